use crate::error::{Error, Result};
use crate::lexicon::{Coverage, Granularity, P2VMap, PronLexicon, SIL, SP};
use crate::units::{check_pairing, Expander};

use super::bigram::BigramModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkOptions {
    /// Optional `sil` at the start and end of the utterance.
    pub sil: bool,
    /// `sp` after every token (it can be skipped without emitting).
    pub sp: bool,
    pub coverage: Coverage,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions { sil: true, sp: true, coverage: Coverage::Strict }
    }
}

/// A network arc: either an HMM (`model`) or a null arc. Null arcs entering
/// a token carry its bigram log probability and its index in `output`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetArc {
    pub from: usize,
    pub to: usize,
    pub model: Option<String>,
    pub lm: f64,
    pub output: Option<usize>,
}

/// Looped decoding network over the tokens of a bigram model.
#[derive(Clone, Debug)]
pub struct UnitNetwork {
    pub(crate) lm: BigramModel,
    granularity: Granularity,
    classifier: Granularity,
    tokens: Vec<String>,
    nodes: usize,
    arcs: Vec<NetArc>,
}

pub(crate) const START: usize = 0;
pub(crate) const END: usize = 1;

impl UnitNetwork {
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn classifier(&self) -> Granularity {
        self.classifier
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> &[NetArc] {
        &self.arcs
    }

    pub fn start(&self) -> usize {
        START
    }

    pub fn end(&self) -> usize {
        END
    }

    pub fn lm(&self) -> &BigramModel {
        &self.lm
    }

    /// Distinct model labels on the network's arcs.
    pub fn model_labels(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.arcs.iter().filter_map(|a| a.model.as_deref()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Build the network for decoding `classifier` models into tokens of the
/// `network` granularity. The LM's vocabulary supplies the tokens.
pub fn build_network(
    lm: &BigramModel,
    lex: &PronLexicon,
    map: Option<&P2VMap>,
    classifier: Granularity,
    network: Granularity,
    opts: NetworkOptions,
) -> Result<UnitNetwork> {
    check_pairing(classifier, network)?;
    if classifier == Granularity::Viseme && map.is_none() {
        return Err(Error::invalid("viseme classifiers need a P2V map"));
    }
    let expander = Expander::new(lex, map, opts.coverage);
    let tokens = lm.vocabulary().to_vec();
    let spellings: Vec<Vec<String>> =
        tokens.iter().map(|t| expander.units_of(t, network, classifier)).collect::<Result<_>>()?;

    let mut arcs = Vec::new();
    let null = |arcs: &mut Vec<NetArc>, from, to| arcs.push(NetArc { from, to, model: None, lm: 0.0, output: None });
    let model = |arcs: &mut Vec<NetArc>, from, to, label: &str| {
        arcs.push(NetArc { from, to, model: Some(label.to_string()), lm: 0.0, output: None })
    };

    let entry = 2;
    let pre_end = 3;
    let mut nodes = 4;
    null(&mut arcs, START, entry);
    null(&mut arcs, pre_end, END);
    if opts.sil {
        model(&mut arcs, START, entry, SIL);
        model(&mut arcs, pre_end, END, SIL);
    }

    let v = tokens.len();
    let mut ins = Vec::with_capacity(v);
    let mut outs = Vec::with_capacity(v);
    for units in &spellings {
        if units.is_empty() {
            return Err(Error::invalid("a token expands to no units"));
        }
        let start = nodes;
        nodes += 1;
        ins.push(start);
        let mut at = start;
        for u in units {
            model(&mut arcs, at, nodes, u);
            at = nodes;
            nodes += 1;
        }
        let out = nodes;
        nodes += 1;
        if opts.sp {
            model(&mut arcs, at, out, SP);
        } else {
            null(&mut arcs, at, out);
        }
        outs.push(out);
    }

    // History `v` is the sentence start.
    let history_node = |h: usize| if h == v { entry } else { outs[h] };
    for h in 0..=v {
        for w in 0..v {
            arcs.push(NetArc {
                from: history_node(h),
                to: ins[w],
                model: None,
                lm: lm.prob_idx(h, w).ln(),
                output: Some(w),
            });
        }
        arcs.push(NetArc { from: history_node(h), to: pre_end, model: None, lm: lm.prob_idx(h, v).ln(), output: None });
    }

    Ok(UnitNetwork { lm: lm.clone(), granularity: network, classifier, tokens, nodes, arcs })
}
