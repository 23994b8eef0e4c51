//! Weak-learned phoneme models: train visual-unit models, copy each one to
//! the phonemes it covers, then keep training at the phoneme level.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::hmm::{embedded_reestimate, flat_start, train_recipe, GmmHmm, HmmSet, Prototype, Reestimation, TrainConfig};
use crate::lexicon::{Coverage, Granularity, P2VMap, PronLexicon};
use crate::units::{Expander, TranscriptOptions};

/// Which phoneme models were copied from which unit model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CloneRecord {
    pub sources: BTreeMap<String, Vec<String>>,
}

impl CloneRecord {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (unit, phonemes) in &self.sources {
            let _ = writeln!(out, "{unit}: {}", phonemes.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sources = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (unit, rest) = line.split_once(':').ok_or_else(|| Error::parse(i + 1, "expected 'unit: phonemes'"))?;
            sources.insert(unit.trim().to_string(), rest.split_whitespace().map(str::to_string).collect());
        }
        Ok(CloneRecord { sources })
    }
}

/// One phoneme model per mapped phoneme, each a copy of its unit's model.
/// Models whose labels are not units of `map` (sil, sp, singleton units)
/// are kept as they are, together with the tying records.
pub fn clone_models(visual: &HmmSet, map: &P2VMap) -> Result<(HmmSet, CloneRecord)> {
    let mut models: Vec<GmmHmm> = Vec::new();
    let mut record = CloneRecord::default();
    for unit in map.units() {
        let src = visual
            .get(&unit.label)
            .ok_or_else(|| Error::Model(format!("no model for visual unit '{}'", unit.label)))?;
        for p in &unit.phonemes {
            models.push(GmmHmm { label: p.clone(), ..src.clone() });
        }
        record.sources.insert(unit.label.clone(), unit.phonemes.clone());
    }
    for m in visual.models() {
        if map.unit(&m.label).is_none() {
            if models.iter().any(|c| c.label == m.label) {
                return Err(Error::Model(format!("'{}' is both a unit model and a phoneme", m.label)));
            }
            models.push(m.clone());
        }
    }
    let mut set = HmmSet::new(models, visual.var_floor().to_vec())?;
    for t in visual.tying() {
        set.push_tie(t.clone());
    }
    set.check()?;
    Ok((set, record))
}

#[derive(Clone, Debug)]
pub struct HierarchyConfig {
    pub proto: Prototype,
    pub train: TrainConfig,
    pub transcripts: TranscriptOptions,
    pub coverage: Coverage,
}

#[derive(Clone, Debug)]
pub struct HierarchicalOutcome {
    /// Visual-unit training.
    pub visual: Reestimation,
    /// Phoneme training started from the cloned unit models.
    pub phoneme: Reestimation,
    pub record: CloneRecord,
}

/// Flat-start and train unit models of granularity `g` on `corpus`.
pub fn conventional_train(
    corpus: &[Utterance],
    lex: &PronLexicon,
    map: Option<&P2VMap>,
    g: Granularity,
    cfg: &HierarchyConfig,
) -> Result<Reestimation> {
    let ex = Expander::new(lex, map, cfg.coverage);
    let transcripts = corpus
        .iter()
        .map(|u| ex.training_labels(&u.words, g, cfg.transcripts))
        .collect::<Result<Vec<_>>>()?;
    let labels = ex.model_labels(g, cfg.transcripts)?;
    let set = flat_start(corpus, &labels, cfg.proto, &cfg.train)?;
    train_recipe(&set, corpus, &transcripts, &cfg.train)
}

/// Visual-unit training, cloning, then phoneme re-estimation on the same
/// utterances.
pub fn hierarchical_train(
    corpus: &[Utterance],
    map: &P2VMap,
    lex: &PronLexicon,
    cfg: &HierarchyConfig,
) -> Result<HierarchicalOutcome> {
    let uncovered: Vec<String> = lex.used_phonemes().into_iter().filter(|p| !map.covers(p)).collect();
    if !uncovered.is_empty() && cfg.coverage == Coverage::Strict {
        return Err(Error::Uncovered(uncovered.join(" ")));
    }
    let map = map.with_singletons(&uncovered)?;
    let visual = conventional_train(corpus, lex, Some(&map), Granularity::Viseme, cfg)?;
    let (cloned, record) = clone_models(&visual.set, &map)?;
    let ex = Expander::new(lex, None, cfg.coverage);
    let transcripts = corpus
        .iter()
        .map(|u| ex.training_labels(&u.words, Granularity::Phoneme, cfg.transcripts))
        .collect::<Result<Vec<_>>>()?;
    let phoneme = embedded_reestimate(&cloned, corpus, &transcripts, &cfg.train)?;
    Ok(HierarchicalOutcome { visual, phoneme, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{Component, EmittingState};

    fn model(label: &str, mean: f64) -> GmmHmm {
        let st = EmittingState { mixture: vec![Component { weight: 1.0, mean: vec![mean], var: vec![1.0] }] };
        GmmHmm::left_to_right(label, vec![st; 3], false)
    }

    #[test]
    fn table7_clone() {
        let visual = HmmSet::new(vec![model("v1", 0.0), model("v2", 3.0), model("sil", 9.0)], vec![0.1]).unwrap();
        let map = P2VMap::parse("v1: p1 p2 p4\nv2: p3 p5\n").unwrap();
        let (set, rec) = clone_models(&visual, &map).unwrap();
        assert_eq!(set.len(), 6);
        for p in ["p1", "p2", "p4"] {
            assert_eq!(set.get(p).unwrap().states, visual.get("v1").unwrap().states);
            assert_eq!(set.get(p).unwrap().trans, visual.get("v1").unwrap().trans);
        }
        assert_ne!(set.get("p3").unwrap().states, set.get("p1").unwrap().states);
        assert_eq!(set.get("sil"), visual.get("sil"));
        assert_eq!(CloneRecord::parse(&rec.to_text()).unwrap(), rec);
        let short = P2VMap::parse("v1: p1\nv9: p2\n").unwrap();
        assert!(clone_models(&visual, &short).is_err());
    }

    #[test]
    fn identity_map_relabels() {
        let visual = HmmSet::new(vec![model("a", 0.0), model("b", 1.0)], vec![0.1]).unwrap();
        let (set, _) = clone_models(&visual, &P2VMap::identity(["a", "b"]).unwrap()).unwrap();
        assert_eq!(set, visual);
    }
}
