//! Confusion-driven clustering of phonemes into visual units.
//!
//! Confusion counts are column-normalized, every same-category pair is scored
//! by its symmetric confusion `P[r][s] + P[s][r]`, and the best pair is merged
//! in count space. Repeating until no legal pair remains yields a nested
//! family of phoneme-to-viseme maps, one per size.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lexicon::{Category, Inventory, P2VMap, VisualUnit};
use crate::seed;

/// Square count matrix; `count(i, j)` is how often actual `i` was
/// recognised as `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = labels.len();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::invalid(format!("duplicate confusion label '{l}'")));
            }
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("confusion matrix must be {n}x{n}")));
        }
        Ok(ConfusionMatrix { labels, counts: rows.into_iter().flatten().collect() })
    }

    pub fn zeros(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, vec![vec![0; n]; n])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.len() + j]
    }

    pub fn add(&mut self, i: usize, j: usize, n: u64) {
        let w = self.len();
        self.counts[i * w + j] += n;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.len().max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Header line of labels, then one row of counts per label.
    pub fn to_text(&self) -> String {
        let mut out = format!("labels {}\n", self.labels.join(" "));
        for (i, row) in self.rows().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{} {}", self.labels[i], cells.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::invalid("empty confusion matrix file"))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("labels") {
            return Err(Error::parse(1, "expected 'labels' header"));
        }
        let labels: Vec<String> = head.map(str::to_string).collect();
        let mut rows = Vec::with_capacity(labels.len());
        for (no, line) in lines {
            let mut f = line.split_whitespace();
            let name = f.next().unwrap_or_default();
            if labels.get(rows.len()).map(String::as_str) != Some(name) {
                return Err(Error::parse(no + 1, format!("unexpected row label '{name}'")));
            }
            let row = f
                .map(|c| c.parse::<u64>().map_err(|e| Error::parse(no + 1, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(labels, rows)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Element-wise sum of matrices over identical label lists.
pub fn accumulate(folds: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    let first = folds.first().ok_or_else(|| Error::invalid("no confusion matrices to accumulate"))?;
    let mut sum = first.clone();
    for k in &folds[1..] {
        if k.labels != sum.labels {
            return Err(Error::invalid("confusion matrices have different labels"));
        }
        for (a, b) in sum.counts.iter_mut().zip(&k.counts) {
            *a += b;
        }
    }
    Ok(sum)
}

/// Column-stochastic form of a confusion matrix; empty columns stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedConfusion {
    labels: Vec<String>,
    p: Vec<f64>,
}

impl NormalizedConfusion {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.len() + j]
    }
}

pub fn normalize_columns(k: &ConfusionMatrix) -> NormalizedConfusion {
    let n = k.len();
    let p = normalize_counts(&k.counts, n);
    NormalizedConfusion { labels: k.labels.clone(), p }
}

fn normalize_counts(counts: &[u64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for j in 0..n {
        let col: u64 = (0..n).map(|i| counts[i * n + j]).sum();
        if col > 0 {
            for i in 0..n {
                p[i * n + j] = counts[i * n + j] as f64 / col as f64;
            }
        }
    }
    p
}

/// Symmetric confusion `P[r][s] + P[s][r]` between two units.
pub fn merge_score(p: &NormalizedConfusion, r: usize, s: usize) -> Result<f64> {
    if r == s {
        return Err(Error::invalid("a unit cannot be merged with itself"));
    }
    if r >= p.len() || s >= p.len() {
        return Err(Error::invalid("merge index out of range"));
    }
    Ok(p.get(r, s) + p.get(s, r))
}

/// One greedy step: the groups merged when the family had `size` units.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeRecord {
    pub size: usize,
    pub first: Vec<String>,
    pub second: Vec<String>,
    pub q: f64,
    /// Set when several pairs shared the best score and the RNG chose.
    pub tie: bool,
}

fn group_label(members: &[String]) -> String {
    members.join("|")
}

fn parse_group(label: &str) -> Vec<String> {
    label.split('|').map(str::to_string).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeTrace {
    pub seed: u64,
    pub records: Vec<MergeRecord>,
}

impl MergeTrace {
    pub fn to_text(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        for r in &self.records {
            let _ = writeln!(
                out,
                "m={} merge {}+{} q={:e} tie={}",
                r.size,
                group_label(&r.first),
                group_label(&r.second),
                r.q,
                u8::from(r.tie)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = 0;
        let mut records = Vec::new();
        for (no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| Error::parse(no, "bad seed"))?;
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(no, "expected 'm=<size> merge <a>+<b> q=<score> tie=<0|1>'");
            if f.len() != 5 || f[1] != "merge" {
                return Err(bad());
            }
            let size = f[0].strip_prefix("m=").and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let (a, b) = f[2].split_once('+').ok_or_else(bad)?;
            let q = f[3].strip_prefix("q=").and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let tie = match f[4] {
                "tie=0" => false,
                "tie=1" => true,
                _ => return Err(bad()),
            };
            records.push(MergeRecord { size, first: parse_group(a), second: parse_group(b), q, tie });
        }
        Ok(MergeTrace { seed, records })
    }

    /// Re-apply the recorded merges to `k`, returning the score each pair
    /// has at its step.
    pub fn replay(&self, k: &ConfusionMatrix) -> Result<Vec<f64>> {
        let mut state = Merging::new(k);
        let mut scores = Vec::with_capacity(self.records.len());
        for r in &self.records {
            if state.groups.len() != r.size {
                return Err(Error::invalid(format!("trace expects {} units, have {}", r.size, state.groups.len())));
            }
            let find = |g: &[String]| {
                let want: HashSet<&String> = g.iter().collect();
                state
                    .groups
                    .iter()
                    .position(|h| h.len() == want.len() && h.iter().all(|m| want.contains(m)))
                    .ok_or_else(|| Error::invalid(format!("trace group '{}' not present", group_label(g))))
            };
            let (a, b) = (find(&r.first)?, find(&r.second)?);
            let p = normalize_counts(&state.counts, state.groups.len());
            let n = state.groups.len();
            scores.push(p[a * n + b] + p[b * n + a]);
            state.merge(a.min(b), a.max(b));
        }
        Ok(scores)
    }
}

/// Nested maps produced by greedy merging, keyed by number of units.
#[derive(Clone, Debug, PartialEq)]
pub struct P2VFamily {
    pub maps: BTreeMap<usize, P2VMap>,
    pub trace: MergeTrace,
}

impl P2VFamily {
    pub fn get(&self, size: usize) -> Option<&P2VMap> {
        self.maps.get(&size)
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.maps.keys().rev().copied()
    }

    pub fn max_size(&self) -> usize {
        self.maps.keys().next_back().copied().unwrap_or(0)
    }

    pub fn min_size(&self) -> usize {
        self.maps.keys().next().copied().unwrap_or(0)
    }

    /// Writes `p2v_<size>.txt` for each size plus `trace.txt`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (size, map) in &self.maps {
            fs::write(dir.join(format!("p2v_{size:02}.txt")), map.to_text())?;
        }
        fs::write(dir.join("trace.txt"), self.trace.to_text())?;
        Ok(())
    }
}

struct Merging {
    groups: Vec<Vec<String>>,
    counts: Vec<u64>,
}

impl Merging {
    fn new(k: &ConfusionMatrix) -> Self {
        Merging { groups: k.labels.iter().map(|l| vec![l.clone()]).collect(), counts: k.counts.clone() }
    }

    /// Fold unit `s` into unit `r` (r < s), summing rows and columns.
    fn merge(&mut self, r: usize, s: usize) {
        let n = self.groups.len();
        let c = &self.counts;
        let mut next = Vec::with_capacity((n - 1) * (n - 1));
        let src = |i: usize| if i == r { vec![r, s] } else { vec![i] };
        let keep: Vec<usize> = (0..n).filter(|&i| i != s).collect();
        for &i in &keep {
            for &j in &keep {
                let mut v = 0;
                for a in src(i) {
                    for b in src(j) {
                        v += c[a * n + b];
                    }
                }
                next.push(v);
            }
        }
        self.counts = next;
        let mut moved = self.groups.remove(s);
        self.groups[r].append(&mut moved);
        self.groups[r].sort();
    }

    fn to_map(&self) -> Result<P2VMap> {
        let mut groups = self.groups.clone();
        groups.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        let width = groups.len().to_string().len().max(2);
        let units = groups
            .into_iter()
            .enumerate()
            .map(|(i, phonemes)| VisualUnit { label: format!("v{:0width$}", i + 1), phonemes })
            .collect();
        P2VMap::new(units)
    }
}

/// Greedy same-category merging of `k` down to the point where no legal
/// pair remains. Exact score ties are resolved by a seeded uniform draw.
pub fn cluster_family(k: &ConfusionMatrix, categories: &Inventory, seed: u64) -> Result<P2VFamily> {
    let cats: HashMap<&str, Category> = k
        .labels
        .iter()
        .map(|l| {
            categories
                .category(l)
                .map(|c| (l.as_str(), c))
                .ok_or_else(|| Error::invalid(format!("label '{l}' has no vowel/consonant category")))
        })
        .collect::<Result<_>>()?;
    cluster_with(k, |l| cats[l], seed)
}

/// As [`cluster_family`] with the category lookup supplied as a function.
pub fn cluster_with(k: &ConfusionMatrix, category: impl Fn(&str) -> Category, seed: u64) -> Result<P2VFamily> {
    if k.is_empty() {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let mut rng = seed::substream_rng(seed, "ties");
    let mut state = Merging::new(k);
    let mut cats: Vec<Category> = k.labels.iter().map(|l| category(l)).collect();
    let mut maps = BTreeMap::new();
    let mut records = Vec::new();
    maps.insert(state.groups.len(), state.to_map()?);
    loop {
        let n = state.groups.len();
        let p = normalize_counts(&state.counts, n);
        let mut best = f64::NEG_INFINITY;
        let mut ties: Vec<(usize, usize)> = Vec::new();
        for r in 0..n {
            for s in r + 1..n {
                if cats[r] != cats[s] {
                    continue;
                }
                let q = p[r * n + s] + p[s * n + r];
                if q > best {
                    best = q;
                    ties.clear();
                }
                if q == best {
                    ties.push((r, s));
                }
            }
        }
        if ties.is_empty() {
            break;
        }
        let tie = ties.len() > 1;
        let (r, s) = if tie { ties[rng.random_range(0..ties.len())] } else { ties[0] };
        records.push(MergeRecord {
            size: n,
            first: state.groups[r].clone(),
            second: state.groups[s].clone(),
            q: best,
            tie,
        });
        state.merge(r, s);
        cats.remove(s);
        maps.insert(state.groups.len(), state.to_map()?);
    }
    Ok(P2VFamily { maps, trace: MergeTrace { seed, records } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn example() -> ConfusionMatrix {
        ConfusionMatrix::new(labels("a b c"), vec![vec![8, 2, 0], vec![1, 9, 0], vec![0, 0, 10]]).unwrap()
    }

    #[test]
    fn normalized_columns() {
        let p = normalize_columns(&example());
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(p.get(0, 0), 8.0 / 9.0) && close(p.get(1, 0), 1.0 / 9.0) && p.get(2, 0) == 0.0);
        assert!(close(p.get(0, 1), 2.0 / 11.0) && close(p.get(1, 1), 9.0 / 11.0));
        assert_eq!(p.get(2, 2), 1.0);
        let z = ConfusionMatrix::new(labels("a b"), vec![vec![1, 0], vec![0, 0]]).unwrap();
        let pz = normalize_columns(&z);
        assert_eq!((pz.get(0, 1), pz.get(1, 1)), (0.0, 0.0));
    }

    #[test]
    fn scores() {
        let p = normalize_columns(&example());
        assert!((merge_score(&p, 0, 1).unwrap() - 0.292_929_292_929).abs() < 1e-9);
        assert_eq!(merge_score(&p, 0, 2).unwrap(), 0.0);
        assert!(merge_score(&p, 1, 1).is_err());
    }

    #[test]
    fn accumulate_contract() {
        let k = example();
        let two = accumulate(&[k.clone(), k.clone()]).unwrap();
        assert_eq!(two.count(0, 0), 16);
        assert_eq!(accumulate(std::slice::from_ref(&k)).unwrap(), k);
        let other = ConfusionMatrix::zeros(labels("a c b")).unwrap();
        assert!(accumulate(&[k, other]).is_err());
    }

    #[test]
    fn matrix_text_round_trip() {
        let k = example();
        assert_eq!(ConfusionMatrix::parse(&k.to_text()).unwrap(), k);
        assert!(ConfusionMatrix::new(labels("a a"), vec![vec![0; 2]; 2]).is_err());
    }

    #[test]
    fn two_categories_stop_at_two() {
        let k = ConfusionMatrix::new(labels("a p"), vec![vec![3, 1], vec![1, 3]]).unwrap();
        let fam = cluster_with(&k, |l| if l == "a" { Category::Vowel } else { Category::Consonant }, 0).unwrap();
        assert_eq!(fam.maps.len(), 1);
        assert!(fam.trace.records.is_empty());
    }

    #[test]
    fn first_merge_and_naming() {
        let mut rows = vec![vec![0u64; 5]; 5];
        for (i, r) in [[8, 2, 0], [1, 9, 0], [0, 0, 10]].iter().enumerate() {
            rows[i][..3].copy_from_slice(r);
        }
        rows[3][3] = 7;
        rows[4][4] = 7;
        let k = ConfusionMatrix::new(labels("b d g aa iy"), rows).unwrap();
        let cat = |l: &str| if l.len() == 2 { Category::Vowel } else { Category::Consonant };
        let fam = cluster_with(&k, cat, 3).unwrap();
        let first = &fam.trace.records[0];
        assert_eq!((first.first.as_slice(), first.second.as_slice()), (&labels("b")[..], &labels("d")[..]));
        assert_eq!(fam.sizes().collect::<Vec<_>>(), vec![5, 4, 3, 2]);
        let m4 = fam.get(4).unwrap();
        assert_eq!(m4.unit("v01").unwrap().phonemes, labels("b d"));
        assert_eq!(m4.unit_of("aa"), Some("v02"));
        assert_eq!(fam.trace.replay(&k).unwrap().len(), 3);
        assert_eq!(MergeTrace::parse(&fam.trace.to_text()).unwrap(), fam.trace);
    }

    #[test]
    fn merging_conserves_counts() {
        let k = example();
        let mut st = Merging::new(&k);
        st.merge(0, 1);
        assert_eq!(st.counts, vec![20, 0, 0, 10]);
        assert_eq!(st.groups, vec![labels("a b"), labels("c")]);
    }
}
