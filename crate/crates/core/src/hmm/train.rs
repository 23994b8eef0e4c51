use std::collections::HashMap;
use std::f64::NEG_INFINITY;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::composite::{Composite, Scorer, TransRef};
use super::{
    Component, EmittingState, GmmHmm, HmmSet, Prototype, StateRef, TieRecord, TrainConfig, MIN_VARIANCE,
    TRANSITION_FLOOR,
};
use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::lexicon::{SIL, SP};
use crate::seed;

/// Components with less occupancy than this keep their previous parameters.
const MIN_COMPONENT_OCC: f64 = 1e-8;

/// Initialize every model from the global frame statistics.
///
/// All models come out identical: each state's component means sit at the
/// global mean plus a per-component offset of `jitter * std * z` (the offsets
/// are shared by every state of every model), variances at the global
/// variance, transitions uniform over the legal arcs. `sp` gets a single
/// state with an entry-to-exit skip.
pub fn flat_start<S: AsRef<str>>(
    corpus: &[Utterance],
    labels: &[S],
    proto: Prototype,
    cfg: &TrainConfig,
) -> Result<HmmSet> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("flat start needs a non-empty corpus"));
    }
    if labels.is_empty() {
        return Err(Error::invalid("flat start needs at least one label"));
    }
    if proto.states == 0 || proto.mixtures == 0 {
        return Err(Error::invalid("prototype needs at least one state and one mixture component"));
    }
    let dim = proto.dim;
    if let Some(u) = corpus.iter().find(|u| u.features.dim() != dim) {
        return Err(Error::Model(format!(
            "prototype dimension {dim} does not match utterance '{}' ({})",
            u.id,
            u.features.dim()
        )));
    }

    let mut count = 0usize;
    let mut sum = vec![0.0; dim];
    for u in corpus {
        for f in u.features.frames() {
            count += 1;
            for (s, v) in sum.iter_mut().zip(f) {
                *s += v;
            }
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; dim];
    for u in corpus {
        for f in u.features.frames() {
            for ((s, v), m) in sq.iter_mut().zip(f).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let var: Vec<f64> = sq.iter().map(|s| s / count as f64).collect();
    let floor: Vec<f64> = var.iter().map(|v| (cfg.floor_factor * v).max(MIN_VARIANCE)).collect();
    let init_var: Vec<f64> = var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = seed::rng(cfg.seed);
    let mixture: Vec<Component> = (0..proto.mixtures)
        .map(|_| {
            let mean = mean
                .iter()
                .zip(&var)
                .map(|(m, v)| {
                    let z: f64 = normal.sample(&mut rng);
                    m + cfg.jitter * v.sqrt() * z
                })
                .collect();
            Component { weight: 1.0 / proto.mixtures as f64, mean, var: init_var.clone() }
        })
        .collect();
    let state = EmittingState { mixture };

    let mut models = Vec::new();
    for l in labels {
        let l = l.as_ref();
        let (n, skip) = if l == SP { (1, true) } else { (proto.states, false) };
        models.push(GmmHmm::left_to_right(l, vec![state.clone(); n], skip));
    }
    HmmSet::new(models, floor)
}

/// Make sp's state an alias of sil's centre state.
pub fn tie_sp(set: &HmmSet) -> Result<HmmSet> {
    let sil = set.get(SIL).ok_or_else(|| Error::Model("tying needs a 'sil' model".into()))?;
    let sp = set.get(SP).ok_or_else(|| Error::Model("tying needs an 'sp' model".into()))?;
    if sp.num_states() != 1 {
        return Err(Error::Model("sp must have exactly one emitting state".into()));
    }
    let centre = sil.num_states() / 2 + 1;
    let owner = StateRef::new(SIL, centre);
    let alias = StateRef::new(SP, 1);
    let mut out = set.clone();
    let params = sil.states[centre - 1].clone();
    out.get_mut(SP).expect("sp exists").states[0] = params;
    if !out.tying().iter().any(|t| t.aliases.contains(&alias)) {
        out.push_tie(TieRecord { owner, aliases: vec![alias] });
    }
    Ok(out)
}

/// Result of embedded re-estimation.
#[derive(Clone, Debug)]
pub struct Reestimation {
    pub set: HmmSet,
    /// Total log-likelihood of the training data under the input models
    /// followed by one entry per completed pass.
    pub log_likelihoods: Vec<f64>,
    /// Utterances left out because no path through their composite model fits.
    pub skipped: Vec<String>,
}

#[derive(Clone)]
struct StateAcc {
    occ: Vec<f64>,
    sum: Vec<f64>,
    sqr: Vec<f64>,
}

impl StateAcc {
    fn new(mixtures: usize, dim: usize) -> Self {
        StateAcc { occ: vec![0.0; mixtures], sum: vec![0.0; mixtures * dim], sqr: vec![0.0; mixtures * dim] }
    }

    fn add(&mut self, other: &StateAcc) {
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sqr.iter_mut().zip(&other.sqr) {
            *a += b;
        }
    }
}

struct UttStats {
    ll: f64,
    /// Aligned with the composite's distinct states.
    states: Vec<(usize, StateAcc)>,
    trans: Vec<(TransRef, f64)>,
}

fn utterance_stats(scorer: &Scorer<'_>, comp: &Composite, u: &Utterance, beam: Option<f64>) -> Option<UttStats> {
    let x = &u.features;
    let frames = x.len();
    if frames < comp.min_frames {
        return None;
    }
    let emis = comp.emissions(scorer, x);
    let (alpha, total) = comp.forward(&emis, frames, beam);
    if total == NEG_INFINITY {
        return None;
    }
    let beta = comp.backward(&emis, frames);
    let n = comp.len();
    let nu = comp.uniq.len();
    let dim = x.dim();

    let mut states: Vec<(usize, StateAcc)> = comp
        .uniq
        .iter()
        .map(|&id| {
            let (mi, s) = scorer.owners[id];
            (id, StateAcc::new(scorer.models[mi].states[s].mixture.len(), dim))
        })
        .collect();
    let mut gamma = vec![0.0; nu];
    let mut comps = Vec::new();
    for t in 0..frames {
        gamma.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..n {
            let a = alpha[t * n + j];
            let b = beta[t * n + j];
            if a > NEG_INFINITY && b > NEG_INFINITY {
                gamma[comp.slot[j]] += (a + b - total).exp();
            }
        }
        let frame = x.frame(t);
        for (k, &g) in gamma.iter().enumerate() {
            if g <= 0.0 {
                continue;
            }
            let (id, acc) = &mut states[k];
            let b = scorer.component_logs(*id, frame, &mut comps);
            for (m, &lc) in comps.iter().enumerate() {
                if lc == NEG_INFINITY {
                    continue;
                }
                let post = g * (lc - b).exp();
                acc.occ[m] += post;
                let sum = &mut acc.sum[m * dim..(m + 1) * dim];
                for (s, v) in sum.iter_mut().zip(frame) {
                    *s += post * v;
                }
                let sqr = &mut acc.sqr[m * dim..(m + 1) * dim];
                for (s, v) in sqr.iter_mut().zip(frame) {
                    *s += post * v * v;
                }
            }
        }
    }

    let mut trans: HashMap<TransRef, f64> = HashMap::new();
    let mut credit = |refs: &[TransRef], xi: f64| {
        if xi > 0.0 {
            for r in refs {
                *trans.entry(*r).or_insert(0.0) += xi;
            }
        }
    };
    for &a in comp.init_arcs() {
        let arc = &comp.arcs[a];
        let j = arc.to.unwrap();
        credit(&arc.refs, (arc.logp + emis[comp.slot[j]] + beta[j] - total).exp());
    }
    for &a in comp.final_arcs() {
        let arc = &comp.arcs[a];
        let i = arc.from.unwrap();
        credit(&arc.refs, (alpha[(frames - 1) * n + i] + arc.logp - total).exp());
    }
    for arc in &comp.arcs {
        let (Some(i), Some(j)) = (arc.from, arc.to) else { continue };
        let mut xi = 0.0;
        for t in 0..frames - 1 {
            let a = alpha[t * n + i];
            let b = beta[(t + 1) * n + j];
            if a > NEG_INFINITY && b > NEG_INFINITY {
                xi += (a + arc.logp + emis[(t + 1) * nu + comp.slot[j]] + b - total).exp();
            }
        }
        credit(&arc.refs, xi);
    }
    let mut trans: Vec<(TransRef, f64)> = trans.into_iter().collect();
    trans.sort_by_key(|(r, _)| (r.model, r.row, r.col));
    Some(UttStats { ll: total, states, trans })
}

fn check_inputs<S: AsRef<str>>(set: &HmmSet, corpus: &[Utterance], transcripts: &[Vec<S>]) -> Result<()> {
    if corpus.len() != transcripts.len() {
        return Err(Error::invalid(format!(
            "{} utterances but {} transcripts",
            corpus.len(),
            transcripts.len()
        )));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("no training utterances"));
    }
    for (u, tr) in corpus.iter().zip(transcripts) {
        if u.features.dim() != set.dim() {
            return Err(Error::Model(format!("utterance '{}' has dimension {}", u.id, u.features.dim())));
        }
        if let Some(l) = tr.iter().find(|l| !set.contains(l.as_ref())) {
            return Err(Error::Model(format!("utterance '{}': no model for '{}'", u.id, l.as_ref())));
        }
    }
    Ok(())
}

/// Total log-likelihood of the utterances that admit a path.
pub(crate) fn total_log_likelihood<S: AsRef<str> + Sync>(
    set: &HmmSet,
    corpus: &[Utterance],
    transcripts: &[Vec<S>],
    beam: Option<f64>,
) -> Result<(f64, Vec<String>)> {
    let scorer = Scorer::new(set);
    let results: Vec<Option<f64>> = corpus
        .par_iter()
        .zip(transcripts.par_iter())
        .map(|(u, tr)| {
            let comp = Composite::build(&scorer, tr).ok()?;
            if u.features.len() < comp.min_frames {
                return None;
            }
            let emis = comp.emissions(&scorer, &u.features);
            let (_, ll) = comp.forward(&emis, u.features.len(), beam);
            (ll > NEG_INFINITY).then_some(ll)
        })
        .collect();
    let mut total = 0.0;
    let mut skipped = Vec::new();
    for (u, r) in corpus.iter().zip(results) {
        match r {
            Some(ll) => total += ll,
            None => skipped.push(u.id.clone()),
        }
    }
    Ok((total, skipped))
}

fn reestimate_once<S: AsRef<str> + Sync>(
    set: &HmmSet,
    corpus: &[Utterance],
    transcripts: &[Vec<S>],
    beam: Option<f64>,
    skipped: &mut Vec<String>,
) -> Result<(HmmSet, f64)> {
    let scorer = Scorer::new(set);
    let dim = set.dim();
    let per_utt: Vec<Result<Option<UttStats>>> = corpus
        .par_iter()
        .zip(transcripts.par_iter())
        .map(|(u, tr)| {
            let comp = Composite::build(&scorer, tr)?;
            Ok(utterance_stats(&scorer, &comp, u, beam))
        })
        .collect();

    let mut acc: Vec<Option<StateAcc>> = vec![None; scorer.num_states()];
    let mut trans: Vec<Vec<Vec<f64>>> =
        scorer.models.iter().map(|m| vec![vec![0.0; m.num_states() + 2]; m.num_states() + 2]).collect();
    let mut total = 0.0;
    let mut used = 0usize;
    for (u, r) in corpus.iter().zip(per_utt) {
        let Some(stats) = r? else {
            log::warn!("skipping utterance '{}': no admissible path", u.id);
            if !skipped.contains(&u.id) {
                skipped.push(u.id.clone());
            }
            continue;
        };
        used += 1;
        total += stats.ll;
        for (id, s) in stats.states {
            match &mut acc[id] {
                Some(a) => a.add(&s),
                slot @ None => *slot = Some(s),
            }
        }
        for (r, c) in stats.trans {
            trans[r.model][r.row][r.col] += c;
        }
    }
    if used == 0 {
        return Err(Error::Model("every training utterance was skipped".into()));
    }
    if !total.is_finite() {
        return Err(Error::Model("non-finite total log-likelihood".into()));
    }

    let mut out = set.clone();
    let floor = set.var_floor().to_vec();
    for (id, a) in acc.iter().enumerate() {
        let Some(a) = a else { continue };
        let occ: f64 = a.occ.iter().sum();
        if !(occ > 0.0) {
            continue;
        }
        let (mi, s) = scorer.owners[id];
        let label = scorer.models[mi].label.clone();
        let state = &mut out.get_mut(&label).expect("model exists").states[s];
        for (m, c) in state.mixture.iter_mut().enumerate() {
            let o = a.occ[m];
            c.weight = o / occ;
            if o > MIN_COMPONENT_OCC {
                for d in 0..dim {
                    let mean = a.sum[m * dim + d] / o;
                    let var = a.sqr[m * dim + d] / o - mean * mean;
                    c.mean[d] = mean;
                    c.var[d] = var.max(floor[d]);
                }
            }
        }
    }
    for (mi, counts) in trans.iter().enumerate() {
        let label = &scorer.models[mi].label;
        let model = out.get_mut(label).expect("model exists");
        for (row, c) in counts.iter().enumerate() {
            let legal: Vec<usize> = (0..c.len()).filter(|&j| model.trans[row][j] > 0.0).collect();
            let sum: f64 = legal.iter().map(|&j| c[j]).sum();
            if !(sum > 0.0) {
                continue;
            }
            let mut probs: Vec<f64> = legal.iter().map(|&j| (c[j] / sum).max(TRANSITION_FLOOR)).collect();
            let norm: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= norm);
            for (&j, p) in legal.iter().zip(probs) {
                model.trans[row][j] = p;
            }
        }
    }
    // Aliases mirror their owners.
    for t in set.tying().to_vec() {
        let params = out.state(&t.owner).expect("owner exists").clone();
        for a in &t.aliases {
            out.get_mut(&a.model).expect("alias exists").states[a.state - 1] = params.clone();
        }
    }
    out.check()?;
    Ok((out, total))
}

/// Run `cfg.iterations` passes of embedded Baum-Welch over composite
/// utterance models built from `transcripts` (model labels per utterance).
pub fn embedded_reestimate<S: AsRef<str> + Sync>(
    set: &HmmSet,
    corpus: &[Utterance],
    transcripts: &[Vec<S>],
    cfg: &TrainConfig,
) -> Result<Reestimation> {
    cfg.validate()?;
    check_inputs(set, corpus, transcripts)?;
    let mut skipped = Vec::new();
    let mut current = set.clone();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for _ in 0..cfg.iterations {
        let (next, ll) = reestimate_once(&current, corpus, transcripts, cfg.beam, &mut skipped)?;
        trace.push(ll);
        current = next;
    }
    let (final_ll, _) = total_log_likelihood(&current, corpus, transcripts, cfg.beam)?;
    trace.push(final_ll);
    Ok(Reestimation { set: current, log_likelihoods: trace, skipped })
}

/// `cfg.iterations` passes with sp tied to sil after `cfg.tie_sp_after`
/// passes when the set has both models. The likelihood trace of each stage
/// is concatenated, so the tie point appears twice (before and after tying).
pub fn train_recipe<S: AsRef<str> + Sync>(
    set: &HmmSet,
    corpus: &[Utterance],
    transcripts: &[Vec<S>],
    cfg: &TrainConfig,
) -> Result<Reestimation> {
    cfg.validate()?;
    let already_tied = set.tying().iter().any(|t| t.aliases.iter().any(|a| a.model == SP));
    let tie_at = match cfg.tie_sp_after {
        Some(k) if k < cfg.iterations && set.contains(SIL) && set.contains(SP) && !already_tied => k,
        _ => return embedded_reestimate(set, corpus, transcripts, cfg),
    };
    let mut log_likelihoods = Vec::new();
    let mut skipped = Vec::new();
    let mut current = set.clone();
    if tie_at > 0 {
        let first = embedded_reestimate(set, corpus, transcripts, &TrainConfig { iterations: tie_at, ..cfg.clone() })?;
        log_likelihoods.extend(first.log_likelihoods);
        skipped.extend(first.skipped);
        current = first.set;
    }
    let tied = tie_sp(&current)?;
    let second = embedded_reestimate(
        &tied,
        corpus,
        transcripts,
        &TrainConfig { iterations: cfg.iterations - tie_at, ..cfg.clone() },
    )?;
    log_likelihoods.extend(second.log_likelihoods);
    for s in second.skipped {
        if !skipped.contains(&s) {
            skipped.push(s);
        }
    }
    Ok(Reestimation { set: second.set, log_likelihoods, skipped })
}
