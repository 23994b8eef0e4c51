//! Utterance-level composite models built by concatenating unit models, and
//! the log-domain dynamic programming that runs over them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::f64::NEG_INFINITY;

use super::{GmmHmm, HmmSet, StateRef};
use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == NEG_INFINITY {
        return b;
    }
    if b == NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        NEG_INFINITY
    }
}

pub(crate) struct Gaussian {
    log_norm: f64,
    mean: Vec<f64>,
    inv_var: Vec<f64>,
}

impl Gaussian {
    fn new(weight: f64, mean: &[f64], var: &[f64]) -> Self {
        let d = mean.len() as f64;
        let log_det: f64 = var.iter().map(|v| v.ln()).sum();
        Gaussian {
            log_norm: ln(weight) - 0.5 * (d * (2.0 * PI).ln() + log_det),
            mean: mean.to_vec(),
            inv_var: var.iter().map(|v| 1.0 / v).collect(),
        }
    }

    #[inline]
    fn log_density(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((xi, mi), iv) in x.iter().zip(&self.mean).zip(&self.inv_var) {
            let d = xi - mi;
            s += d * d * iv;
        }
        self.log_norm - 0.5 * s
    }
}

/// Precomputed emission densities for a model set, with tied states
/// resolved to a single canonical id.
pub(crate) struct Scorer<'a> {
    pub(crate) models: Vec<&'a GmmHmm>,
    index: HashMap<&'a str, usize>,
    /// Per model, per emitting state: canonical state id.
    pub(crate) state_ids: Vec<Vec<usize>>,
    /// Canonical id to (model index, 0-based state).
    pub(crate) owners: Vec<(usize, usize)>,
    gaussians: Vec<Vec<Gaussian>>,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(set: &'a HmmSet) -> Self {
        let models: Vec<&GmmHmm> = set.models().collect();
        let index: HashMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.label.as_str(), i)).collect();
        let mut ids: HashMap<StateRef, usize> = HashMap::new();
        let mut owners = Vec::new();
        let mut gaussians = Vec::new();
        // Owners first so aliases can point at them.
        for (mi, m) in models.iter().enumerate() {
            for s in 0..m.num_states() {
                let r = StateRef::new(m.label.clone(), s + 1);
                if set.owner_of(&r) == &r {
                    ids.insert(r, owners.len());
                    owners.push((mi, s));
                    gaussians.push(
                        m.states[s].mixture.iter().map(|c| Gaussian::new(c.weight, &c.mean, &c.var)).collect(),
                    );
                }
            }
        }
        let state_ids = models
            .iter()
            .map(|m| {
                (0..m.num_states())
                    .map(|s| {
                        let r = StateRef::new(m.label.clone(), s + 1);
                        ids[set.owner_of(&r)]
                    })
                    .collect()
            })
            .collect();
        Scorer { models, index, state_ids, owners, gaussians }
    }

    pub(crate) fn model_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub(crate) fn num_states(&self) -> usize {
        self.owners.len()
    }

    pub(crate) fn log_emission(&self, id: usize, x: &[f64]) -> f64 {
        let mut acc = LogSum::default();
        for g in &self.gaussians[id] {
            if g.log_norm > NEG_INFINITY {
                acc.add(g.log_density(x));
            }
        }
        acc.value()
    }

    /// Per-component log joint densities into `out`; returns their log sum.
    pub(crate) fn component_logs(&self, id: usize, x: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut acc = LogSum::default();
        for g in &self.gaussians[id] {
            let v = if g.log_norm > NEG_INFINITY { g.log_density(x) } else { NEG_INFINITY };
            out.push(v);
            acc.add(v);
        }
        acc.value()
    }
}

/// Streaming log-sum-exp: one `exp` per term and a single `ln`.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum { max: NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    #[inline]
    fn add(&mut self, v: f64) {
        if v == NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == NEG_INFINITY {
            NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// One original transition (model, row, column) underlying a composite arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct TransRef {
    pub(crate) model: usize,
    pub(crate) row: usize,
    pub(crate) col: usize,
}

/// A composite arc; `None` ends are the virtual start and end.
pub(crate) struct Arc {
    pub(crate) from: Option<usize>,
    pub(crate) to: Option<usize>,
    pub(crate) logp: f64,
    pub(crate) refs: Vec<TransRef>,
}

pub(crate) struct Composite {
    /// Per composite emitting state: (segment, 1-based local state).
    pub(crate) position: Vec<(usize, usize)>,
    /// Per composite emitting state: index into `uniq`.
    pub(crate) slot: Vec<usize>,
    /// Distinct canonical state ids in the composite.
    pub(crate) uniq: Vec<usize>,
    pub(crate) arcs: Vec<Arc>,
    init: Vec<usize>,
    finals: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    pub(crate) min_frames: usize,
}

impl Composite {
    pub(crate) fn build<S: AsRef<str>>(scorer: &Scorer<'_>, labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Model("empty label sequence".into()));
        }
        let segs: Vec<usize> = labels
            .iter()
            .map(|l| {
                scorer.model_index(l.as_ref()).ok_or_else(|| Error::Model(format!("no model for '{}'", l.as_ref())))
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(segs.len());
        let mut position = Vec::new();
        for (k, &m) in segs.iter().enumerate() {
            offsets.push(position.len());
            position.extend((1..=scorer.models[m].num_states()).map(|s| (k, s)));
        }
        let mut arcs = Vec::new();

        // Entering segment `k` (possibly skipping tee models) from `from`.
        fn enter(
            scorer: &Scorer<'_>,
            segs: &[usize],
            offsets: &[usize],
            k: usize,
            from: Option<usize>,
            logp: f64,
            refs: Vec<TransRef>,
            arcs: &mut Vec<Arc>,
        ) {
            if k == segs.len() {
                if from.is_some() {
                    arcs.push(Arc { from, to: None, logp, refs });
                }
                return;
            }
            let m = scorer.models[segs[k]];
            for j in 1..=m.num_states() {
                let p = m.trans[0][j];
                if p > 0.0 {
                    let mut r = refs.clone();
                    r.push(TransRef { model: segs[k], row: 0, col: j });
                    arcs.push(Arc { from, to: Some(offsets[k] + j - 1), logp: logp + p.ln(), refs: r });
                }
            }
            let skip = m.trans[0][m.exit()];
            if skip > 0.0 {
                let mut r = refs;
                r.push(TransRef { model: segs[k], row: 0, col: m.exit() });
                enter(scorer, segs, offsets, k + 1, from, logp + skip.ln(), r, arcs);
            }
        }

        enter(scorer, &segs, &offsets, 0, None, 0.0, Vec::new(), &mut arcs);
        for (k, &mi) in segs.iter().enumerate() {
            let m = scorer.models[mi];
            let s = m.num_states();
            for i in 1..=s {
                let from = Some(offsets[k] + i - 1);
                for j in 1..=s {
                    let p = m.trans[i][j];
                    if p > 0.0 {
                        arcs.push(Arc {
                            from,
                            to: Some(offsets[k] + j - 1),
                            logp: p.ln(),
                            refs: vec![TransRef { model: mi, row: i, col: j }],
                        });
                    }
                }
                let p = m.trans[i][s + 1];
                if p > 0.0 {
                    let refs = vec![TransRef { model: mi, row: i, col: s + 1 }];
                    enter(scorer, &segs, &offsets, k + 1, from, p.ln(), refs, &mut arcs);
                }
            }
        }

        let n = position.len();
        let mut init = Vec::new();
        let mut finals = Vec::new();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (a, arc) in arcs.iter().enumerate() {
            match (arc.from, arc.to) {
                (None, Some(_)) => init.push(a),
                (Some(_), None) => finals.push(a),
                _ => {}
            }
            if let (Some(i), Some(j)) = (arc.from, arc.to) {
                if j < i {
                    return Err(Error::Model("composite model is not left-to-right".into()));
                }
            }
            if let Some(j) = arc.to {
                if arc.from.is_some() {
                    incoming[j].push(a);
                }
            }
            if let Some(i) = arc.from {
                if arc.to.is_some() {
                    outgoing[i].push(a);
                }
            }
        }

        // Fewest frames on any start-to-end path; arcs only move forward.
        let mut dist = vec![usize::MAX; n];
        for &a in &init {
            dist[arcs[a].to.unwrap()] = 1;
        }
        for j in 0..n {
            for &a in &incoming[j] {
                let i = arcs[a].from.unwrap();
                if i < j && dist[i] != usize::MAX {
                    dist[j] = dist[j].min(dist[i] + 1);
                }
            }
        }
        let min_frames = finals.iter().map(|&a| dist[arcs[a].from.unwrap()]).min().unwrap_or(usize::MAX);

        let mut uniq = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let slot = position
            .iter()
            .map(|&(k, s)| {
                let id = scorer.state_ids[segs[k]][s - 1];
                *seen.entry(id).or_insert_with(|| {
                    uniq.push(id);
                    uniq.len() - 1
                })
            })
            .collect();

        Ok(Composite { position, slot, uniq, arcs, init, finals, incoming, outgoing, min_frames })
    }

    pub(crate) fn len(&self) -> usize {
        self.position.len()
    }

    /// Log emission of every distinct state at every frame, T x |uniq|.
    pub(crate) fn emissions(&self, scorer: &Scorer<'_>, x: &FeatureSequence) -> Vec<f64> {
        let u = self.uniq.len();
        let mut out = Vec::with_capacity(x.len() * u);
        for frame in x.frames() {
            out.extend(self.uniq.iter().map(|&id| scorer.log_emission(id, frame)));
        }
        out
    }

    pub(crate) fn forward(&self, emis: &[f64], frames: usize, beam: Option<f64>) -> (Vec<f64>, f64) {
        let n = self.len();
        let u = self.uniq.len();
        let mut alpha = vec![NEG_INFINITY; frames * n];
        for &a in &self.init {
            let arc = &self.arcs[a];
            let j = arc.to.unwrap();
            alpha[j] = log_add(alpha[j], arc.logp);
        }
        for j in 0..n {
            alpha[j] += emis[self.slot[j]];
        }
        prune(&mut alpha[..n], beam);
        for t in 1..frames {
            let (prev, cur) = alpha.split_at_mut(t * n);
            let prev = &prev[(t - 1) * n..];
            let cur = &mut cur[..n];
            for j in 0..n {
                let mut sum = LogSum::default();
                for &a in &self.incoming[j] {
                    let arc = &self.arcs[a];
                    sum.add(prev[arc.from.unwrap()] + arc.logp);
                }
                let acc = sum.value();
                cur[j] = if acc > NEG_INFINITY { acc + emis[t * u + self.slot[j]] } else { NEG_INFINITY };
            }
            prune(cur, beam);
        }
        let last = &alpha[(frames - 1) * n..];
        let mut total = NEG_INFINITY;
        for &a in &self.finals {
            let arc = &self.arcs[a];
            total = log_add(total, last[arc.from.unwrap()] + arc.logp);
        }
        (alpha, total)
    }

    pub(crate) fn backward(&self, emis: &[f64], frames: usize) -> Vec<f64> {
        let n = self.len();
        let u = self.uniq.len();
        let mut beta = vec![NEG_INFINITY; frames * n];
        let last = (frames - 1) * n;
        for &a in &self.finals {
            let arc = &self.arcs[a];
            let i = arc.from.unwrap();
            beta[last + i] = log_add(beta[last + i], arc.logp);
        }
        for t in (0..frames - 1).rev() {
            let (cur, next) = beta.split_at_mut((t + 1) * n);
            let cur = &mut cur[t * n..];
            let next = &next[..n];
            for i in 0..n {
                let mut acc = LogSum::default();
                for &a in &self.outgoing[i] {
                    let arc = &self.arcs[a];
                    let j = arc.to.unwrap();
                    acc.add(arc.logp + emis[(t + 1) * u + self.slot[j]] + next[j]);
                }
                cur[i] = acc.value();
            }
        }
        beta
    }

    pub(crate) fn init_arcs(&self) -> &[usize] {
        &self.init
    }

    pub(crate) fn final_arcs(&self) -> &[usize] {
        &self.finals
    }

    /// Best path as composite state indices, and its log score.
    pub(crate) fn viterbi(&self, emis: &[f64], frames: usize) -> Option<(Vec<usize>, f64)> {
        let n = self.len();
        let u = self.uniq.len();
        let mut delta = vec![NEG_INFINITY; frames * n];
        let mut back = vec![usize::MAX; frames * n];
        for &a in &self.init {
            let arc = &self.arcs[a];
            let j = arc.to.unwrap();
            let v = arc.logp + emis[self.slot[j]];
            if v > delta[j] {
                delta[j] = v;
            }
        }
        for t in 1..frames {
            for j in 0..n {
                let mut best = NEG_INFINITY;
                let mut arg = usize::MAX;
                for &a in &self.incoming[j] {
                    let arc = &self.arcs[a];
                    let i = arc.from.unwrap();
                    let v = delta[(t - 1) * n + i] + arc.logp;
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                if arg != usize::MAX {
                    delta[t * n + j] = best + emis[t * u + self.slot[j]];
                    back[t * n + j] = arg;
                }
            }
        }
        let mut best = NEG_INFINITY;
        let mut end = usize::MAX;
        for &a in &self.finals {
            let arc = &self.arcs[a];
            let i = arc.from.unwrap();
            let v = delta[(frames - 1) * n + i] + arc.logp;
            if v > best {
                best = v;
                end = i;
            }
        }
        if end == usize::MAX || best == NEG_INFINITY {
            return None;
        }
        let mut path = vec![0; frames];
        path[frames - 1] = end;
        for t in (1..frames).rev() {
            path[t - 1] = back[t * n + path[t]];
        }
        Some((path, best))
    }
}

fn prune(row: &mut [f64], beam: Option<f64>) {
    if let Some(beam) = beam {
        let max = row.iter().copied().fold(NEG_INFINITY, f64::max);
        for v in row.iter_mut() {
            if *v < max - beam {
                *v = NEG_INFINITY;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedState {
    /// Position of the unit in the transcript.
    pub segment: usize,
    pub label: String,
    /// 1-based emitting state within the unit model.
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub path: Vec<AlignedState>,
    pub score: f64,
}

impl Alignment {
    /// Per-frame local state numbers.
    pub fn states(&self) -> Vec<usize> {
        self.path.iter().map(|s| s.state).collect()
    }
}

/// Viterbi alignment of `features` to the concatenation of `labels`' models.
pub fn forced_align<S: AsRef<str>>(set: &HmmSet, features: &FeatureSequence, labels: &[S]) -> Result<Alignment> {
    if features.dim() != set.dim() {
        return Err(Error::Model(format!("features have dimension {}, models {}", features.dim(), set.dim())));
    }
    let scorer = Scorer::new(set);
    let comp = Composite::build(&scorer, labels)?;
    let frames = features.len();
    if frames < comp.min_frames {
        return Err(Error::Alignment(format!(
            "{frames} frames cannot cover a transcript needing at least {}",
            comp.min_frames
        )));
    }
    let emis = comp.emissions(&scorer, features);
    let (path, score) =
        comp.viterbi(&emis, frames).ok_or_else(|| Error::Alignment("no admissible state path".into()))?;
    let path = path
        .into_iter()
        .map(|i| {
            let (segment, state) = comp.position[i];
            AlignedState { segment, label: labels[segment].as_ref().to_string(), state }
        })
        .collect();
    Ok(Alignment { path, score })
}
