mod common;

use common::{enumerate_best, feats, toy_set};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visunit::decoder::{build_network, decode, estimate_bigram, DecodeParams, NetworkOptions};
use visunit::hmm::forced_align;
use visunit::lexicon::{parse_lexicon, Coverage, Granularity, Inventory, P2VMap, PronLexicon};

fn words(s: &[&str]) -> Vec<Vec<String>> {
    s.iter().map(|x| x.split_whitespace().map(str::to_string).collect()).collect()
}

fn bare() -> NetworkOptions {
    NetworkOptions { sil: false, sp: false, coverage: Coverage::Strict }
}

fn ab_lexicon() -> PronLexicon {
    parse_lexicon("A aa\nB b\nC k\n", &Inventory::british_english()).unwrap()
}

#[test]
fn single_word_network_always_outputs_it() {
    let lex = parse_lexicon("A aa\n", &Inventory::british_english()).unwrap();
    let lm = estimate_bigram(&words(&["A", "A A"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 2, 0.0)]);
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    assert_eq!(net.arcs().iter().filter(|a| a.model.is_some()).count(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-4.0..4.0)).collect();
        let r = decode(&set, &net, &feats(&x), &DecodeParams::default()).unwrap();
        assert!(!r.labels.is_empty() && r.labels.iter().all(|l| l == "A"));
    }
}

#[test]
fn zero_scale_picks_best_acoustic_word() {
    let lex = ab_lexicon();
    let lm = estimate_bigram(&words(&["A", "B", "A A B"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 3, -2.0), ("b", 3, 2.0)]);
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    let params = DecodeParams { grammar_scale: 0.0, ..DecodeParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        // Four frames fit exactly one three-state word.
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = feats(&x);
        let r = decode(&set, &net, &f, &params).unwrap();
        let sa = forced_align(&set, &f, &["aa"]).unwrap().score;
        let sb = forced_align(&set, &f, &["b"]).unwrap().score;
        let want = if sa >= sb { "A" } else { "B" };
        assert_eq!(r.labels, vec![want.to_string()]);
    }
}

#[test]
fn decode_matches_exhaustive_enumeration() {
    let lex = ab_lexicon();
    let lm = estimate_bigram(&words(&["A B", "B C A", "C", "A A"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 2, -1.5), ("b", 2, 0.5), ("k", 2, 2.0)]);
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    let tokens: Vec<String> = net.tokens().to_vec();
    let spell = |s: &[String]| s.iter().map(|w| lex.pronunciation(w).unwrap()[0].clone()).collect::<Vec<_>>();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let t = rng.random_range(2..=8);
        let x: Vec<f64> = (0..t).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = feats(&x);
        let params = DecodeParams {
            grammar_scale: rng.random_range(0.0..2.0),
            penalty: rng.random_range(-1.0..2.0),
            ..DecodeParams::default()
        };
        let got = decode(&set, &net, &f, &params).unwrap();
        let (seq, score) = enumerate_best(&set, &lm, &tokens, spell, &f, &params, t / 2).unwrap();
        assert!((got.score - score).abs() < 1e-9, "case {case}: {} vs {score}", got.score);
        assert_eq!(got.labels, seq, "case {case}");
    }
}

#[test]
fn score_decomposes_into_parts() {
    let lex = ab_lexicon();
    let lm = estimate_bigram(&words(&["A B", "B C A", "C"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 3, -2.0), ("b", 3, 0.0), ("k", 3, 2.0), ("sil", 3, 5.0), ("sp", 1, 5.0)]);
    let opts = NetworkOptions { sil: false, sp: true, coverage: Coverage::Strict };
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let t = rng.random_range(6..20);
        let x: Vec<f64> = (0..t).map(|_| rng.random_range(-3.0..6.0)).collect();
        let f = feats(&x);
        let params = DecodeParams { grammar_scale: 1.3, penalty: 0.7, ..DecodeParams::default() };
        let r = decode(&set, &net, &f, &params).unwrap();
        let mut units = Vec::new();
        for w in &r.labels {
            units.extend(lex.pronunciation(w).unwrap().iter().cloned());
            units.push("sp".to_string());
        }
        let acoustic = forced_align(&set, &f, &units).unwrap().score;
        let lm_part = lm.sentence_log_prob(&r.labels).unwrap();
        let expected = acoustic + 1.3 * lm_part - 0.7 * r.labels.len() as f64;
        assert!((r.score - expected).abs() < 1e-9, "{} vs {expected}", r.score);
        assert!((r.acoustic(&params) - acoustic).abs() < 1e-9);
    }
}

#[test]
fn larger_penalty_never_lengthens_output() {
    let lex = ab_lexicon();
    let lm = estimate_bigram(&words(&["A B", "B C A", "C"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 1, -2.0), ("b", 1, 0.0), ("k", 1, 2.0)]);
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = feats(&x);
        let mut last = usize::MAX;
        for k in 0..12 {
            let p = -2.0 + k as f64 * 0.75;
            let r = decode(&set, &net, &f, &DecodeParams { penalty: p, ..DecodeParams::default() }).unwrap();
            assert!(r.labels.len() <= last);
            last = r.labels.len();
        }
    }
}

#[test]
fn network_construction_rules() {
    let lex = parse_lexicon("TALK t ao k\nTONGUE t ah ng\nDOG d ao g\nDUG d ah g\n", &Inventory::british_english())
        .unwrap();
    let map = P2VMap::parse("C: t d\nV1: ao ah oh\nH: k g ng w\n").unwrap();
    let word_lm = estimate_bigram(&words(&["TALK DOG", "TONGUE DUG"]), 0.5).unwrap();
    // Phoneme classifiers under a word network spell each word's pronunciation.
    let net = build_network(&word_lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    let labels = net.model_labels();
    assert_eq!(labels, vec!["ah", "ao", "d", "g", "k", "ng", "t"]);
    // Viseme tokens: the four words share the unit chain C V1 H.
    let vis: Vec<Vec<String>> = ["TALK", "TONGUE", "DOG", "DUG"]
        .iter()
        .map(|w| {
            lex.pronunciation(w).unwrap().iter().map(|p| map.unit_of(p).unwrap().to_string()).collect()
        })
        .collect();
    assert!(vis.iter().all(|v| v == &vis[0]));
    let vis_lm = estimate_bigram(&vis, 0.5).unwrap();
    let vnet = build_network(&vis_lm, &lex, Some(&map), Granularity::Viseme, Granularity::Viseme, bare()).unwrap();
    assert_eq!(vnet.tokens(), ["C", "H", "V1"]);
    // Pairing and map errors.
    assert!(build_network(&word_lm, &lex, None, Granularity::Word, Granularity::Phoneme, bare()).is_err());
    assert!(build_network(&word_lm, &lex, None, Granularity::Viseme, Granularity::Word, bare()).is_err());
    let partial = P2VMap::parse("C: t d\nV1: ao ah\n").unwrap();
    assert!(build_network(&word_lm, &lex, Some(&partial), Granularity::Viseme, Granularity::Word, bare()).is_err());
}

#[test]
fn unreachable_end_is_an_error() {
    let lex = ab_lexicon();
    let lm = estimate_bigram(&words(&["A"]), 0.5).unwrap();
    let set = toy_set(&[("aa", 3, 0.0)]);
    let net = build_network(&lm, &lex, None, Granularity::Phoneme, Granularity::Word, bare()).unwrap();
    assert!(decode(&set, &net, &feats(&[0.0, 0.0]), &DecodeParams::default()).is_err());
    let missing = toy_set(&[("b", 3, 0.0)]);
    assert!(decode(&missing, &net, &feats(&[0.0; 5]), &DecodeParams::default()).is_err());
}
