use std::fs;
use std::path::Path;

use visunit::lexicon::Granularity;
use visunit::pipeline::{Experiment, ExperimentConfig, Training, RESULT_COLUMNS, SUMMARY_COLUMNS};

fn quick(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        output: out.to_path_buf(),
        folds: 2,
        test_size: 6,
        iterations: 2,
        mixtures: 1,
        sizes: Some(vec![45, 10, 4]),
        ..ExperimentConfig::default()
    };
    cfg.synth.utterances = 40;
    cfg.synth.dim = 3;
    cfg
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn discovery_writes_every_artifact_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let d = Experiment::prepare(quick(a.path())).unwrap().run_discovery().unwrap();
    Experiment::prepare(quick(b.path())).unwrap().run_discovery().unwrap();
    for f in ["folds.txt", "confusions.txt", "results.csv", "summary.csv", "family/trace.txt", "family/p2v_10.txt"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
    assert_eq!(header(&a.path().join("results.csv")), RESULT_COLUMNS.join(","));
    assert_eq!(header(&a.path().join("summary.csv")), SUMMARY_COLUMNS.join(","));
    let sizes: Vec<usize> = d.summaries.iter().map(|s| s.map_size).collect();
    assert_eq!(sizes, vec![45, 10, 4]);
    for s in &d.summaries {
        assert!((s.unit_chance - 1.0 / s.map_size as f64).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&s.mean));
    }
    assert_eq!(d.family.max_size(), 45);
    assert_eq!(d.family.min_size(), 2);
}

#[test]
fn folds_are_shared_between_steps() {
    let dir = tempfile::tempdir().unwrap();
    let d = Experiment::prepare(quick(dir.path())).unwrap().run_discovery().unwrap();
    let step1: Vec<usize> = d.rows.iter().filter(|r| r.classifier == Granularity::Phoneme).map(|r| r.counts.n).collect();
    assert_eq!(step1.len(), 2);
    // Every step-3 row of a fold scores the same test utterances.
    for fold in 0..2 {
        let words: Vec<usize> = d.rows.iter().filter(|r| r.fold == fold && r.network == Granularity::Word).map(|r| r.counts.n).collect();
        assert!(words.windows(2).all(|w| w[0] == w[1]), "{words:?}");
    }
}

#[test]
fn network_study_covers_six_pairings() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.map_size = Some(10);
    let rows = Experiment::prepare(cfg).unwrap().run_network_study().unwrap();
    let pairs: Vec<(Granularity, Granularity)> = rows.iter().map(|r| (r.classifier, r.network)).collect();
    assert_eq!(pairs, visunit::units::PAIRINGS.to_vec());
    let text = fs::read_to_string(dir.path().join("netstudy.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn hierarchical_study_emits_four_series_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.sizes = Some(vec![12, 10]);
    let rows = Experiment::prepare(cfg).unwrap().run_hierarchical_study().unwrap();
    // Two flat phoneme reference rows, then four per size.
    assert_eq!(rows.len(), 2 + 4 * 2);
    for size in [12, 10] {
        let series: Vec<_> = rows.iter().filter(|r| r.map_size == size).map(|r| (r.classifier, r.network, r.training)).collect();
        assert_eq!(
            series,
            vec![
                (Granularity::Viseme, Granularity::Word, Training::Flat),
                (Granularity::Viseme, Granularity::Phoneme, Training::Flat),
                (Granularity::Phoneme, Granularity::Word, Training::Hierarchical),
                (Granularity::Phoneme, Granularity::Phoneme, Training::Hierarchical),
            ]
        );
    }
}

#[test]
fn impossible_fold_plan_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.test_size = 500;
    assert!(matches!(Experiment::prepare(cfg), Err(visunit::Error::Config(_))));
}
