use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn visunit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visunit")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SMALL: &[&str] = &[
    "--folds", "2", "--test_size", "5", "--iterations", "2", "--mixtures", "1",
    "--synth_utterances", "30", "--synth_dim", "3",
];

fn with<'a>(head: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend_from_slice(SMALL);
    v.extend_from_slice(&["--output", out]);
    v
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(code(&visunit(&[])), 2);
    assert_eq!(code(&visunit(&["folds", "--folds", "zero"])), 2);
    assert_eq!(code(&visunit(&["folds", "--corpus", "/no/such/corpus.txt"])), 2);
    assert_eq!(code(&visunit(&["folds", "--size_min", "30", "--size_max", "20"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "folds = 3\nno_such_key = 1\n").unwrap();
    assert_eq!(code(&visunit(&["folds", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = visunit(&with(&["score", "--hyp", "/no/such/hyp.txt"], out));
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# small run\nfolds = 3\ntest_size = 4\nsynth_utterances = 20\n").unwrap();
    let out = dir.path().join("run");
    let o = visunit(&["folds", "--config", cfg.to_str().unwrap(), "--folds", "2", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = fs::read_to_string(out.join("folds.txt")).unwrap();
    assert_eq!(plan.lines().filter(|l| l.contains(" test ")).count(), 2);
    assert!(plan.lines().filter(|l| l.contains(" test ")).all(|l| l.split_whitespace().count() == 3 + 4));
}

#[test]
fn train_decode_score_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let synth = visunit(&with(&["synth"], out));
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));
    for f in ["corpus.txt", "lexicon.txt", "design.txt"] {
        assert!(Path::new(out).join(f).exists(), "{f}");
    }
    let corpus = dir.path().join("corpus.txt");
    let lexicon = dir.path().join("lexicon.txt");
    let design = dir.path().join("design.txt");
    let from_files = |head: &[&str]| {
        let mut v: Vec<String> = head.iter().map(|s| s.to_string()).collect();
        for s in SMALL {
            v.push(s.to_string());
        }
        for (k, p) in [("--corpus", &corpus), ("--lexicon", &lexicon), ("--map", &design)] {
            v.push(k.into());
            v.push(p.to_str().unwrap().into());
        }
        v.extend(["--output".to_string(), out.to_string(), "--classifier".into(), "viseme".into()]);
        v
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = visunit(&refs);
        assert_eq!(code(&o), 0, "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(from_files(&["train", "--fold", "1"]));
    let models = dir.path().join("models_fold1.txt");
    assert!(models.exists());
    run(from_files(&["decode", "--fold", "1", "--models", models.to_str().unwrap()]));
    let hyp = dir.path().join("hyp_fold1.txt");
    assert_eq!(fs::read_to_string(&hyp).unwrap().lines().count(), 5);
    let report = run(from_files(&["score", "--fold", "1", "--hyp", hyp.to_str().unwrap()]));
    assert!(report.starts_with("N="), "{report}");

    let k = dir.path().join("k.txt");
    fs::write(&k, "labels aa iy p t\naa 5 1 0 0\niy 2 4 0 0\np 0 0 3 3\nt 0 0 1 6\n").unwrap();
    run(vec!["cluster".into(), "--confusions".into(), k.to_str().unwrap().into(), "--output".into(), out.into()]);
    let fam = dir.path().join("family");
    assert!(fam.join("p2v_04.txt").exists() && fam.join("p2v_02.txt").exists());
}

#[test]
fn discover_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        let o = visunit(&with(&["discover", "--sizes", "10,3"], out));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["results.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}
