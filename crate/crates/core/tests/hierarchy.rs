use visunit::hierarchy::{clone_models, conventional_train, hierarchical_train, CloneRecord, HierarchyConfig};
use visunit::lexicon::{Granularity, P2VMap};
use visunit::pipeline::{synthetic_design, Experiment, ExperimentConfig};

fn small(iterations: usize, spread: f64) -> (Experiment, HierarchyConfig) {
    let mut cfg = ExperimentConfig { iterations, mixtures: 1, folds: 1, test_size: 5, ..ExperimentConfig::default() };
    cfg.synth.utterances = 60;
    cfg.synth.dim = 3;
    cfg.synth.spread = spread;
    let exp = Experiment::prepare(cfg).unwrap();
    let h = exp.hierarchy_config();
    (exp, h)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

#[test]
fn identity_map_matches_longer_conventional_training() {
    let (exp, h) = small(4, 0.3);
    let identity = P2VMap::identity(exp.lex.used_phonemes()).unwrap();
    let hier = hierarchical_train(&exp.corpus, &identity, &exp.lex, &h).unwrap();
    let long = HierarchyConfig { train: visunit::hmm::TrainConfig { iterations: 8, ..h.train.clone() }, ..h.clone() };
    let flat = conventional_train(&exp.corpus, &exp.lex, None, Granularity::Phoneme, &long).unwrap();
    assert_eq!(hier.phoneme.set.len(), flat.set.len());
    for m in flat.set.models() {
        let other = hier.phoneme.set.get(&m.label).unwrap();
        assert_eq!(other.trans, m.trans, "{}", m.label);
        for (a, b) in other.states.iter().zip(&m.states) {
            for (ca, cb) in a.mixture.iter().zip(&b.mixture) {
                assert!(ca.mean.iter().zip(&cb.mean).all(|(x, y)| close(*x, *y)), "{}", m.label);
                assert!(ca.var.iter().zip(&cb.var).all(|(x, y)| close(*x, *y)), "{}", m.label);
            }
        }
    }
    assert!(close(*hier.phoneme.log_likelihoods.last().unwrap(), *flat.log_likelihoods.last().unwrap()));
}

#[test]
fn cloning_preserves_the_likelihood() {
    let (exp, h) = small(3, 0.3);
    let hier = hierarchical_train(&exp.corpus, &synthetic_design(), &exp.lex, &h).unwrap();
    let end = *hier.visual.log_likelihoods.last().unwrap();
    let start = hier.phoneme.log_likelihoods[0];
    assert!(close(start, end), "{start} vs {end}");
    // Retraining at the phoneme level only improves on the clone.
    assert!(*hier.phoneme.log_likelihoods.last().unwrap() >= start - 1e-6 * start.abs());
}

#[test]
fn cloned_phonemes_separate_when_targets_differ() {
    let (exp, h) = small(3, 1.0);
    let design = synthetic_design();
    let hier = hierarchical_train(&exp.corpus, &design, &exp.lex, &h).unwrap();
    let unit = &design.units()[0];
    let (a, b) = (&unit.phonemes[0], &unit.phonemes[1]);
    let ma = hier.phoneme.set.get(a).unwrap();
    let mb = hier.phoneme.set.get(b).unwrap();
    assert_ne!(ma.states, mb.states, "{a} and {b} stayed identical");
    assert_eq!(hier.record.sources[&unit.label], unit.phonemes);
    assert_eq!(CloneRecord::parse(&hier.record.to_text()).unwrap(), hier.record);
}

#[test]
fn clone_keeps_ties_and_silence() {
    let (exp, h) = small(4, 0.3);
    let design = synthetic_design();
    let vis = conventional_train(&exp.corpus, &exp.lex, Some(&design), Granularity::Viseme, &h).unwrap();
    let (set, record) = clone_models(&vis.set, &design).unwrap();
    assert_eq!(set.len(), 45 + 2);
    assert_eq!(set.get("sil"), vis.set.get("sil"));
    assert_eq!(set.tying(), vis.set.tying());
    for u in design.units() {
        for p in &u.phonemes {
            assert_eq!(set.get(p).unwrap().states, vis.set.get(&u.label).unwrap().states);
        }
    }
    assert_eq!(record.sources.len(), design.size());
}

#[test]
fn strict_coverage_rejects_partial_maps() {
    let (exp, mut h) = small(1, 0.3);
    h.coverage = visunit::lexicon::Coverage::Strict;
    let partial = P2VMap::parse("V: aa ae\n").unwrap();
    assert!(hierarchical_train(&exp.corpus, &partial, &exp.lex, &h).is_err());
}
