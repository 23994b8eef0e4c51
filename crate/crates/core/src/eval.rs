//! Dynamic-programming string alignment, correctness scoring, and confusion
//! counting from aligned transcripts.

use std::collections::HashMap;
use std::ops::{Add, AddAssign};

use crate::cluster::ConfusionMatrix;
use crate::error::{Error, Result};

pub const SUBSTITUTION_COST: u32 = 10;
pub const INSERTION_COST: u32 = 7;
pub const DELETION_COST: u32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EditOp {
    Match,
    Substitution,
    Deletion,
    Insertion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedPair {
    pub op: EditOp,
    pub reference: Option<String>,
    pub hypothesis: Option<String>,
}

/// Reference length and error counts of one aligned transcript pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub i: usize,
}

impl Counts {
    pub fn hits(&self) -> usize {
        self.n - self.d - self.s
    }

    /// (N - D - S) / N; `None` when N = 0.
    pub fn correctness(&self) -> Option<f64> {
        (self.n > 0).then(|| self.hits() as f64 / self.n as f64)
    }

    /// (N - D - S - I) / N; may be negative.
    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.hits() as f64 - self.i as f64) / self.n as f64)
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts { n: self.n + o.n, d: self.d + o.d, s: self.s + o.s, i: self.i + o.i }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentResult {
    pub counts: Counts,
    pub pairs: Vec<AlignedPair>,
}

impl AlignmentResult {
    pub fn cost(&self) -> u32 {
        let c = &self.counts;
        SUBSTITUTION_COST * c.s as u32 + DELETION_COST * c.d as u32 + INSERTION_COST * c.i as u32
    }
}

/// Minimum-cost alignment of `hypothesis` against `reference`. Among equal
/// cost choices the traceback prefers match, then substitution, then
/// deletion, then insertion.
pub fn align<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> AlignmentResult {
    let n = reference.len();
    let m = hypothesis.len();
    let w = m + 1;
    let mut cost = vec![0u32; (n + 1) * w];
    for i in 1..=n {
        cost[i * w] = i as u32 * DELETION_COST;
    }
    for j in 1..=m {
        cost[j] = j as u32 * INSERTION_COST;
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let diag = cost[(i - 1) * w + j - 1] + if same { 0 } else { SUBSTITUTION_COST };
            let del = cost[(i - 1) * w + j] + DELETION_COST;
            let ins = cost[i * w + j - 1] + INSERTION_COST;
            cost[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut pairs = Vec::with_capacity(n.max(m));
    let mut counts = Counts { n, ..Counts::default() };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let r = reference[i - 1].as_ref();
            let h = hypothesis[j - 1].as_ref();
            let same = r == h;
            let step = if same { 0 } else { SUBSTITUTION_COST };
            if cost[(i - 1) * w + j - 1] + step == here {
                let op = if same { EditOp::Match } else { EditOp::Substitution };
                if !same {
                    counts.s += 1;
                }
                pairs.push(AlignedPair { op, reference: Some(r.to_string()), hypothesis: Some(h.to_string()) });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * w + j] + DELETION_COST == here {
            counts.d += 1;
            pairs.push(AlignedPair {
                op: EditOp::Deletion,
                reference: Some(reference[i - 1].as_ref().to_string()),
                hypothesis: None,
            });
            i -= 1;
            continue;
        }
        counts.i += 1;
        pairs.push(AlignedPair {
            op: EditOp::Insertion,
            reference: None,
            hypothesis: Some(hypothesis[j - 1].as_ref().to_string()),
        });
        j -= 1;
    }
    pairs.reverse();
    AlignmentResult { counts, pairs }
}

/// Alignments of one cross-validation fold's test utterances.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub alignments: Vec<AlignmentResult>,
}

impl FoldResult {
    pub fn counts(&self) -> Counts {
        self.alignments.iter().fold(Counts::default(), |acc, a| acc + a.counts)
    }

    pub fn correctness(&self) -> Option<f64> {
        self.counts().correctness()
    }
}

/// Mean fold correctness with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correctness {
    pub mean: f64,
    /// Sample standard deviation over folds divided by sqrt(folds).
    pub se: f64,
    /// False for a single fold, where `se` is reported as 0.
    pub se_defined: bool,
}

/// Mean and standard error of per-fold values.
pub fn mean_and_se(values: &[f64]) -> Result<Correctness> {
    if values.is_empty() {
        return Err(Error::invalid("at least one fold is required"));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return Ok(Correctness { mean, se: 0.0, se_defined: false });
    }
    let var = values.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (k - 1.0);
    Ok(Correctness { mean, se: (var / k).sqrt(), se_defined: true })
}

/// Correctness pooled within each fold, then averaged over folds.
pub fn pooled_correctness(results: &[FoldResult]) -> Result<Correctness> {
    let per_fold = results
        .iter()
        .map(|f| {
            f.correctness()
                .ok_or_else(|| Error::invalid(format!("fold {} has no reference tokens", f.fold)))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_and_se(&per_fold)
}

/// Confusion counts from alignments; deletions and insertions are kept
/// apart from the matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionTally {
    pub matrix: ConfusionMatrix,
    /// Per vocabulary label, times it was deleted from the reference.
    pub deletions: Vec<u64>,
    /// Per vocabulary label, times it was inserted into the hypothesis.
    pub insertions: Vec<u64>,
}

impl ConfusionTally {
    /// Correctness implied by the matrix diagonal and the deletion counts.
    pub fn correctness(&self) -> Option<f64> {
        let k = &self.matrix;
        let n = k.total() + self.deletions.iter().sum::<u64>();
        let hits: u64 = (0..k.len()).map(|i| k.count(i, i)).sum();
        (n > 0).then(|| hits as f64 / n as f64)
    }
}

pub fn confusions_from_alignments<'a, S: AsRef<str>>(
    alignments: impl IntoIterator<Item = &'a AlignmentResult>,
    vocabulary: &[S],
) -> Result<ConfusionTally> {
    let labels: Vec<String> = vocabulary.iter().map(|s| s.as_ref().to_string()).collect();
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |l: &Option<String>| -> Result<usize> {
        let l = l.as_deref().expect("aligned side present");
        index.get(l).copied().ok_or_else(|| Error::invalid(format!("label '{l}' is not in the vocabulary")))
    };
    let mut matrix = ConfusionMatrix::zeros(labels.clone())?;
    let mut deletions = vec![0; labels.len()];
    let mut insertions = vec![0; labels.len()];
    for a in alignments {
        for p in &a.pairs {
            match p.op {
                EditOp::Match | EditOp::Substitution => {
                    matrix.add(lookup(&p.reference)?, lookup(&p.hypothesis)?, 1);
                }
                EditOp::Deletion => deletions[lookup(&p.reference)?] += 1,
                EditOp::Insertion => insertions[lookup(&p.hypothesis)?] += 1,
            }
        }
    }
    Ok(ConfusionTally { matrix, deletions, insertions })
}
