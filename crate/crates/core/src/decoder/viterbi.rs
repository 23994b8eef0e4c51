use std::f64::NEG_INFINITY;

use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};
use crate::hmm::{HmmSet, Scorer};

use super::network::{UnitNetwork, END, START};

/// Unit of the transition penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PenaltyBase {
    #[default]
    Natural,
    Log10,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeParams {
    pub grammar_scale: f64,
    /// Subtracted once per output token.
    pub penalty: f64,
    pub penalty_base: PenaltyBase,
    /// Optional pruning beam in natural-log units.
    pub beam: Option<f64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { grammar_scale: 1.0, penalty: 0.5, penalty_base: PenaltyBase::Natural, beam: None }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.grammar_scale >= 0.0) || !self.grammar_scale.is_finite() {
            return Err(Error::invalid("grammar scale must be a finite non-negative number"));
        }
        if !self.penalty.is_finite() {
            return Err(Error::invalid("transition penalty must be finite"));
        }
        if matches!(self.beam, Some(b) if !(b > 0.0)) {
            return Err(Error::invalid("decoding beam must be positive"));
        }
        Ok(())
    }

    /// Penalty per token in natural-log units.
    pub fn penalty_nats(&self) -> f64 {
        match self.penalty_base {
            PenaltyBase::Natural => self.penalty,
            PenaltyBase::Log10 => self.penalty * std::f64::consts::LN_10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// Best token sequence at the network's granularity.
    pub labels: Vec<String>,
    /// Acoustic log likelihood + scale * LM log probability - penalty * tokens.
    pub score: f64,
    /// Unscaled natural-log LM probability of `labels`, `</s>` included.
    pub lm_log_prob: f64,
}

impl DecodeResult {
    /// The acoustic part of `score`.
    pub fn acoustic(&self, params: &DecodeParams) -> f64 {
        self.score - params.grammar_scale * self.lm_log_prob + params.penalty_nats() * self.labels.len() as f64
    }
}

const NONE: usize = usize::MAX;

struct Graph {
    topo: Vec<usize>,
    null_out: Vec<Vec<(usize, f64, Option<usize>)>>,
    /// Canonical emission id per emitting state.
    ids: Vec<usize>,
    internal_in: Vec<Vec<(usize, f64)>>,
    entry_in: Vec<Vec<(usize, f64)>>,
    exits: Vec<Vec<(usize, f64)>>,
    used_ids: Vec<usize>,
}

fn compile(set: &HmmSet, scorer: &Scorer<'_>, net: &UnitNetwork, params: &DecodeParams) -> Result<Graph> {
    let n = net.num_nodes();
    let mut null_out: Vec<Vec<(usize, f64, Option<usize>)>> = vec![Vec::new(); n];
    let mut ids = Vec::new();
    let mut internal_in: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut entry_in: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut exits: Vec<Vec<(usize, f64)>> = Vec::new();
    let scale = params.grammar_scale;
    let penalty = params.penalty_nats();

    for arc in net.arcs() {
        let Some(label) = &arc.model else {
            let w = if arc.output.is_some() { scale * arc.lm - penalty } else { scale * arc.lm };
            // A zero-scale LM must not turn an impossible arc into a free one.
            let w = if arc.lm == NEG_INFINITY { NEG_INFINITY } else { w };
            null_out[arc.from].push((arc.to, w, arc.output));
            continue;
        };
        let mi = scorer.model_index(label).ok_or_else(|| Error::Decode(format!("no model for network label '{label}'")))?;
        let m = set.get(label).expect("scorer and set agree");
        let s = m.num_states();
        let base = ids.len();
        for k in 0..s {
            ids.push(scorer.state_ids[mi][k]);
            internal_in.push(Vec::new());
            entry_in.push(Vec::new());
            exits.push(Vec::new());
        }
        let ln = |p: f64| p.ln();
        for j in 1..=s {
            if m.trans[0][j] > 0.0 {
                entry_in[base + j - 1].push((arc.from, ln(m.trans[0][j])));
            }
            for i in 1..=s {
                if m.trans[i][j] > 0.0 {
                    internal_in[base + j - 1].push((base + i - 1, ln(m.trans[i][j])));
                }
            }
            if m.trans[j][s + 1] > 0.0 {
                exits[base + j - 1].push((arc.to, ln(m.trans[j][s + 1])));
            }
        }
        if m.trans[0][s + 1] > 0.0 {
            null_out[arc.from].push((arc.to, ln(m.trans[0][s + 1]), None));
        }
    }

    // Kahn's algorithm over null arcs; the network guarantees no null cycle
    // because every token spells at least one emitting model.
    let mut indeg = vec![0usize; n];
    for out in &null_out {
        for &(v, ..) in out {
            indeg[v] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&u| indeg[u] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(u) = queue.pop() {
        topo.push(u);
        for &(v, ..) in &null_out[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push(v);
            }
        }
    }
    if topo.len() != n {
        return Err(Error::Decode("network has a cycle of null arcs".into()));
    }
    let mut used_ids = ids.clone();
    used_ids.sort_unstable();
    used_ids.dedup();
    Ok(Graph { topo, null_out, ids, internal_in, entry_in, exits, used_ids })
}

fn propagate(g: &Graph, score: &mut [f64], link: &mut [usize], arena: &mut Vec<(usize, usize)>) {
    for &u in &g.topo {
        let su = score[u];
        if su == NEG_INFINITY {
            continue;
        }
        for &(v, w, out) in &g.null_out[u] {
            let cand = su + w;
            if cand > score[v] {
                score[v] = cand;
                link[v] = match out {
                    Some(tok) => {
                        arena.push((link[u], tok));
                        arena.len() - 1
                    }
                    None => link[u],
                };
            }
        }
    }
}

/// Token-passing Viterbi decode of one utterance.
pub fn decode(set: &HmmSet, net: &UnitNetwork, features: &FeatureSequence, params: &DecodeParams) -> Result<DecodeResult> {
    params.validate()?;
    if features.dim() != set.dim() {
        return Err(Error::Decode(format!("features have dimension {}, models {}", features.dim(), set.dim())));
    }
    let scorer = Scorer::new(set);
    let g = compile(set, &scorer, net, params)?;
    let n_nodes = net.num_nodes();
    let n_states = g.ids.len();
    let mut arena: Vec<(usize, usize)> = Vec::new();

    let mut node = vec![NEG_INFINITY; n_nodes];
    let mut node_link = vec![NONE; n_nodes];
    node[START] = 0.0;
    propagate(&g, &mut node, &mut node_link, &mut arena);

    let mut prev = vec![NEG_INFINITY; n_states];
    let mut prev_link = vec![NONE; n_states];
    let mut cur = vec![NEG_INFINITY; n_states];
    let mut cur_link = vec![NONE; n_states];
    let mut emis = vec![NEG_INFINITY; scorer.num_states()];

    for t in 0..features.len() {
        let x = features.frame(t);
        for &id in &g.used_ids {
            emis[id] = scorer.log_emission(id, x);
        }
        let mut best = NEG_INFINITY;
        for j in 0..n_states {
            let mut s = NEG_INFINITY;
            let mut l = NONE;
            for &(u, w) in &g.entry_in[j] {
                let c = node[u] + w;
                if c > s {
                    s = c;
                    l = node_link[u];
                }
            }
            for &(i, w) in &g.internal_in[j] {
                let c = prev[i] + w;
                if c > s {
                    s = c;
                    l = prev_link[i];
                }
            }
            cur[j] = if s > NEG_INFINITY { s + emis[g.ids[j]] } else { NEG_INFINITY };
            cur_link[j] = l;
            best = best.max(cur[j]);
        }
        if let Some(beam) = params.beam {
            for v in cur.iter_mut() {
                if *v < best - beam {
                    *v = NEG_INFINITY;
                }
            }
        }
        node.iter_mut().for_each(|v| *v = NEG_INFINITY);
        node_link.iter_mut().for_each(|v| *v = NONE);
        for i in 0..n_states {
            if cur[i] == NEG_INFINITY {
                continue;
            }
            for &(v, w) in &g.exits[i] {
                let c = cur[i] + w;
                if c > node[v] {
                    node[v] = c;
                    node_link[v] = cur_link[i];
                }
            }
        }
        propagate(&g, &mut node, &mut node_link, &mut arena);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_link, &mut cur_link);
    }

    let score = node[END];
    if score == NEG_INFINITY || features.is_empty() {
        return Err(Error::Decode("no path reaches the end of the network".into()));
    }
    let mut tokens = Vec::new();
    let mut l = node_link[END];
    while l != NONE {
        let (p, tok) = arena[l];
        tokens.push(tok);
        l = p;
    }
    tokens.reverse();
    let labels: Vec<String> = tokens.into_iter().map(|k| net.tokens()[k].clone()).collect();
    let lm_log_prob = net.lm.sentence_log_prob(&labels)?;
    Ok(DecodeResult { labels, score, lm_log_prob })
}
