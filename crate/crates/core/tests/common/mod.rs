#![allow(dead_code)]

use std::f64::NEG_INFINITY;

use visunit::corpus::FeatureSequence;
use visunit::decoder::{BigramModel, DecodeParams};
use visunit::hmm::{forced_align, Component, EmittingState, GmmHmm, HmmSet};

/// One-dimensional models; each `(label, states, mean)` gets unit-variance
/// single-Gaussian states at `mean`.
pub fn toy_set(specs: &[(&str, usize, f64)]) -> HmmSet {
    let models = specs
        .iter()
        .map(|&(label, states, mean)| {
            let st = EmittingState { mixture: vec![Component { weight: 1.0, mean: vec![mean], var: vec![1.0] }] };
            GmmHmm::left_to_right(label, vec![st; states], label == "sp")
        })
        .collect();
    HmmSet::new(models, vec![1e-3]).unwrap()
}

pub fn feats(x: &[f64]) -> FeatureSequence {
    FeatureSequence::new(x.to_vec(), 1, 0.04).unwrap()
}

/// Best (sequence, score) over every token sequence of length 1..=max_len,
/// scoring each by forced alignment of `spell(sequence)` plus the scaled LM
/// minus the penalty.
pub fn enumerate_best(
    set: &HmmSet,
    lm: &BigramModel,
    tokens: &[String],
    spell: impl Fn(&[String]) -> Vec<String>,
    x: &FeatureSequence,
    params: &DecodeParams,
    max_len: usize,
) -> Option<(Vec<String>, f64)> {
    let mut best: Option<(Vec<String>, f64)> = None;
    let mut seqs: Vec<Vec<String>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &seqs {
            for t in tokens {
                let mut n = s.clone();
                n.push(t.clone());
                next.push(n);
            }
        }
        for s in &next {
            let Ok(al) = forced_align(set, x, &spell(s)) else { continue };
            let score = al.score + params.grammar_scale * lm.sentence_log_prob(s).unwrap()
                - params.penalty_nats() * s.len() as f64;
            if score > NEG_INFINITY && best.as_ref().is_none_or(|b| score > b.1) {
                best = Some((s.clone(), score));
            }
        }
        seqs = next;
    }
    best
}

/// Exhaustive minimum over every alignment of `hyp` against `reference`:
/// (cost, substitutions, deletions, insertions) of the cheapest, with the
/// number of cheapest alignments that disagree on those counts.
pub fn enumerate_alignments(reference: &[&str], hyp: &[&str]) -> (u32, usize, usize, usize, usize) {
    fn walk(r: &[&str], h: &[&str], acc: (u32, usize, usize, usize), out: &mut Vec<(u32, usize, usize, usize)>) {
        if r.is_empty() && h.is_empty() {
            out.push(acc);
            return;
        }
        let (c, s, d, i) = acc;
        if !r.is_empty() && !h.is_empty() {
            let same = r[0] == h[0];
            let step = if same { (c, s, d, i) } else { (c + 10, s + 1, d, i) };
            walk(&r[1..], &h[1..], step, out);
        }
        if !r.is_empty() {
            walk(&r[1..], h, (c + 7, s, d + 1, i), out);
        }
        if !h.is_empty() {
            walk(r, &h[1..], (c + 7, s, d, i + 1), out);
        }
    }
    let mut all = Vec::new();
    walk(reference, hyp, (0, 0, 0, 0), &mut all);
    let best = all.iter().map(|a| a.0).min().unwrap();
    let mut cheapest: Vec<_> = all.into_iter().filter(|a| a.0 == best).collect();
    cheapest.sort_unstable();
    cheapest.dedup();
    let (c, s, d, i) = cheapest[0];
    (c, s, d, i, cheapest.len() - 1)
}

/// Replays a merge trace against an independent exhaustive search: at every
/// step the recorded pair must be among the legal pairs of maximal score,
/// the tie flag must match, and merging must stop only when every category
/// is a single group.
pub fn check_merges(labels: &[String], rows: &[Vec<u64>], vowel: &[bool], family: &visunit::cluster::P2VFamily)
    -> Result<(), String> {
    let n = labels.len();
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let name = |g: &[usize]| {
        let mut v: Vec<String> = g.iter().map(|&i| labels[i].clone()).collect();
        v.sort();
        v
    };
    for (step, rec) in family.trace.records.iter().enumerate() {
        let m = groups.len();
        if rec.size != m {
            return Err(format!("step {step}: size {} but {m} groups", rec.size));
        }
        let count = |a: &[usize], b: &[usize]| -> u64 { a.iter().flat_map(|&i| b.iter().map(move |&j| rows[i][j])).sum() };
        let p = |a: usize, b: usize| -> f64 {
            let col: u64 = (0..m).map(|x| count(&groups[x], &groups[b])).sum();
            if col == 0 {
                0.0
            } else {
                count(&groups[a], &groups[b]) as f64 / col as f64
            }
        };
        let mut scored = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                if vowel[groups[a][0]] == vowel[groups[b][0]] {
                    scored.push((a, b, p(a, b) + p(b, a)));
                }
            }
        }
        let best = scored.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<_> = scored.iter().filter(|x| x.2 == best).collect();
        if (rec.q - best).abs() > 1e-12 {
            return Err(format!("step {step}: q {} but the maximum is {best}", rec.q));
        }
        if rec.tie != (winners.len() > 1) {
            return Err(format!("step {step}: tie flag {} with {} maximal pairs", rec.tie, winners.len()));
        }
        let chosen = winners.iter().find(|w| {
            let (x, y) = (name(&groups[w.0]), name(&groups[w.1]));
            (x == rec.first && y == rec.second) || (x == rec.second && y == rec.first)
        });
        let Some(&&(a, b, _)) = chosen else {
            return Err(format!("step {step}: {:?}+{:?} is not a maximal legal pair", rec.first, rec.second));
        };
        let moved = groups.remove(b);
        groups[a].extend(moved);
    }
    let legal_left = (0..groups.len())
        .any(|a| (a + 1..groups.len()).any(|b| vowel[groups[a][0]] == vowel[groups[b][0]]));
    if legal_left {
        return Err("merging stopped with a legal pair left".into());
    }
    let sizes: Vec<usize> = family.sizes().collect();
    let expect: Vec<usize> = (groups.len()..=n).rev().collect();
    if sizes != expect {
        return Err(format!("family sizes {sizes:?}, expected {expect:?}"));
    }
    Ok(())
}
