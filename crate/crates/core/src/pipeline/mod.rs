//! Experiment orchestration: cross-validated training and decoding, the
//! three-step unit discovery, the network-unit study and the hierarchical
//! training study.

mod config;
mod report;
mod synth;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use config::{ExperimentConfig, SynthConfig, CONFIG_KEYS};
pub use report::{summarize, ResultRow, SummaryRow, RESULT_COLUMNS, SUMMARY_COLUMNS};
pub use synth::{design_model, synthesize, synthetic_design, synthetic_lexicon};

use crate::cluster::{accumulate, cluster_family, ConfusionMatrix, P2VFamily};
use crate::corpus::{plan_folds, read_corpus, FoldPlan, Utterance};
use crate::decoder::{build_network, decode, estimate_bigram, NetworkOptions};
use crate::error::{Error, Result};
use crate::eval::{align, confusions_from_alignments, AlignmentResult, FoldResult};
use crate::hierarchy::{conventional_train, hierarchical_train, HierarchyConfig};
use crate::hmm::HmmSet;
use crate::lexicon::{guess_baselines, parse_lexicon, Granularity, Inventory, P2VMap, PronLexicon};
use crate::seed;
use crate::units::{Expander, PAIRINGS};

/// How a classifier's models were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Training {
    /// Flat start on the classifier's own labels.
    Flat,
    /// Visual-unit models cloned to phonemes and retrained.
    Hierarchical,
}

impl Training {
    pub fn name(self) -> &'static str {
        match self {
            Training::Flat => "flat",
            Training::Hierarchical => "hierarchical",
        }
    }
}

/// A loaded corpus, its lexicon and the fold plan shared by every stage.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub lex: PronLexicon,
    pub corpus: Vec<Utterance>,
    pub plan: FoldPlan,
    /// True visual classes when the corpus is synthetic.
    pub design: Option<P2VMap>,
    by_id: HashMap<String, usize>,
}

impl Experiment {
    /// Load or synthesize the corpus named by `cfg` and plan its folds.
    pub fn prepare(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let lex = match &cfg.lexicon {
            Some(p) => parse_lexicon(&fs::read_to_string(p)?, &Inventory::british_english())?,
            None => synthetic_lexicon(),
        };
        let (corpus, design) = match &cfg.corpus {
            Some(p) => (read_corpus(p)?, None),
            None => {
                let design = match &cfg.synth.design {
                    Some(p) => P2VMap::parse(&fs::read_to_string(p)?)?,
                    None => synthetic_design(),
                };
                (synthesize(&design, &lex, &cfg.synth, cfg.seed)?, Some(design))
            }
        };
        let mut exp = Self::from_parts(cfg, lex, corpus)?;
        exp.design = design;
        Ok(exp)
    }

    pub fn from_parts(cfg: ExperimentConfig, lex: PronLexicon, corpus: Vec<Utterance>) -> Result<Self> {
        let plan = plan_folds(&corpus, cfg.folds, cfg.test_size, seed::substream(cfg.seed, "folds"))
            .map_err(|e| Error::Config(e.to_string()))?;
        let by_id = corpus.iter().enumerate().map(|(i, u)| (u.id.clone(), i)).collect();
        Ok(Experiment { cfg, lex, corpus, plan, design: None, by_id })
    }

    fn utterances(&self, ids: &[String]) -> Vec<Utterance> {
        ids.iter().map(|id| self.corpus[self.by_id[id]].clone()).collect()
    }

    pub fn train_set(&self, fold: usize) -> Vec<Utterance> {
        self.utterances(&self.plan.folds[fold].train)
    }

    pub fn test_set(&self, fold: usize) -> Vec<Utterance> {
        self.utterances(&self.plan.folds[fold].test)
    }

    pub fn hierarchy_config(&self) -> HierarchyConfig {
        let dim = self.corpus.first().map_or(0, |u| u.features.dim());
        HierarchyConfig {
            proto: self.cfg.prototype(dim),
            train: self.cfg.train_config(),
            transcripts: self.cfg.transcript_options(),
            coverage: self.cfg.coverage,
        }
    }

    /// `map` extended with singletons for lexicon phonemes it leaves out.
    fn full_map(&self, map: &P2VMap) -> Result<P2VMap> {
        map.with_singletons(self.lex.used_phonemes())
    }

    /// Train classifier models of granularity `classifier` on a fold's
    /// training utterances.
    pub fn train(
        &self,
        fold: usize,
        classifier: Granularity,
        map: Option<&P2VMap>,
        training: Training,
    ) -> Result<HmmSet> {
        let data = self.train_set(fold);
        let cfg = self.hierarchy_config();
        match training {
            Training::Flat => {
                let full = map.map(|m| self.full_map(m)).transpose()?;
                Ok(conventional_train(&data, &self.lex, full.as_ref(), classifier, &cfg)?.set)
            }
            Training::Hierarchical => {
                let map = map.ok_or_else(|| Error::invalid("hierarchical training needs a P2V map"))?;
                Ok(hierarchical_train(&data, map, &self.lex, &cfg)?.phoneme.set)
            }
        }
    }

    /// The network for a fold: a bigram of granularity `network` estimated
    /// on the fold's training transcripts.
    fn fold_network(
        &self,
        fold: usize,
        classifier: Granularity,
        network: Granularity,
        map: Option<&P2VMap>,
    ) -> Result<crate::decoder::UnitNetwork> {
        let full = map.map(|m| self.full_map(m)).transpose()?;
        let ex = Expander::new(&self.lex, full.as_ref(), self.cfg.coverage);
        let lm_data = self
            .train_set(fold)
            .iter()
            .map(|u| ex.tokens(&u.words, network))
            .collect::<Result<Vec<_>>>()?;
        let lm = estimate_bigram(&lm_data, self.cfg.discount)?;
        let opts = NetworkOptions { sil: self.cfg.sil, sp: self.cfg.sp, coverage: self.cfg.coverage };
        build_network(&lm, &self.lex, full.as_ref(), classifier, network, opts)
    }

    /// Decode a fold's test utterances. Utterances with no path through the
    /// network get an empty hypothesis.
    pub fn decode_fold(
        &self,
        fold: usize,
        set: &HmmSet,
        classifier: Granularity,
        network: Granularity,
        map: Option<&P2VMap>,
    ) -> Result<Vec<(String, Vec<String>)>> {
        let net = self.fold_network(fold, classifier, network, map)?;
        let params = self.cfg.decode_params();
        self.test_set(fold)
            .par_iter()
            .map(|u| match decode(set, &net, &u.features, &params) {
                Ok(r) => Ok((u.id.clone(), r.labels)),
                Err(Error::Decode(msg)) => {
                    log::warn!("utterance '{}' not decoded: {msg}", u.id);
                    Ok((u.id.clone(), Vec::new()))
                }
                Err(e) => Err(e),
            })
            .collect()
    }

    /// Align hypotheses of granularity `network` against the references at
    /// granularity `scoring`.
    pub fn score_fold(
        &self,
        fold: usize,
        hypotheses: &[(String, Vec<String>)],
        network: Granularity,
        scoring: Granularity,
        map: Option<&P2VMap>,
    ) -> Result<FoldResult> {
        let full = map.map(|m| self.full_map(m)).transpose()?;
        let ex = Expander::new(&self.lex, full.as_ref(), self.cfg.coverage);
        let alignments = hypotheses
            .iter()
            .map(|(id, hyp)| {
                let i = *self.by_id.get(id).ok_or_else(|| Error::invalid(format!("unknown utterance '{id}'")))?;
                let reference = ex.tokens(&self.corpus[i].words, scoring)?;
                Ok(align(&reference, &rescore_tokens(&ex, hyp, network, scoring)?))
            })
            .collect::<Result<Vec<AlignmentResult>>>()?;
        Ok(FoldResult { fold, alignments })
    }

    /// Decode a fold and score it.
    pub fn evaluate(
        &self,
        fold: usize,
        set: &HmmSet,
        classifier: Granularity,
        network: Granularity,
        scoring: Granularity,
        map: Option<&P2VMap>,
    ) -> Result<FoldResult> {
        let hyps = self.decode_fold(fold, set, classifier, network, map)?;
        self.score_fold(fold, &hyps, network, scoring, map)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    fn row(&self, map_size: usize, training: Training, c: Granularity, n: Granularity, r: &FoldResult) -> ResultRow {
        ResultRow::new(&self.cfg.speaker, map_size, training, c, n, r.fold, r.counts())
    }

    /// Step 1: phoneme models per fold, decoded to give confusion counts.
    pub fn phoneme_confusions(&self) -> Result<(ConfusionMatrix, Vec<ResultRow>)> {
        let vocab: Vec<String> = self.lex.used_phonemes().into_iter().collect();
        let network = self.cfg.discovery_network;
        let per_fold = (0..self.plan.folds.len())
            .into_par_iter()
            .map(|k| {
                let set = self.train(k, Granularity::Phoneme, None, Training::Flat)?;
                let res = self.evaluate(k, &set, Granularity::Phoneme, network, Granularity::Phoneme, None)?;
                let tally = confusions_from_alignments(&res.alignments, &vocab)?;
                Ok((tally.matrix, res))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut mats = Vec::new();
        for (m, r) in per_fold {
            rows.push(self.row(vocab.len(), Training::Flat, Granularity::Phoneme, network, &r));
            mats.push(m);
        }
        Ok((accumulate(&mats)?, rows))
    }

    /// Steps 1 and 2: confusions, then the nested family of maps.
    pub fn discover_family(&self) -> Result<(P2VFamily, ConfusionMatrix, Vec<ResultRow>)> {
        let (k, rows) = self.phoneme_confusions()?;
        let family = cluster_family(&k, self.lex.inventory(), self.cfg.seed)?;
        Ok((family, k, rows))
    }

    /// Score one map size with flat-started classifier models.
    pub fn score_map(&self, map: &P2VMap, classifier: Granularity, network: Granularity) -> Result<Vec<ResultRow>> {
        let map_opt = (classifier == Granularity::Viseme || network == Granularity::Viseme).then_some(map);
        (0..self.plan.folds.len())
            .into_par_iter()
            .map(|k| {
                let set = self.train(k, classifier, map_opt, Training::Flat)?;
                let r = self.evaluate(k, &set, classifier, network, network, map_opt)?;
                Ok(self.row(map.size(), Training::Flat, classifier, network, &r))
            })
            .collect()
    }

    fn baselines(&self, map: &P2VMap) -> Result<(f64, f64)> {
        let b = guess_baselines(&self.lex, map, self.cfg.coverage)?;
        Ok((b.unit_chance, b.homophene_ceiling))
    }

    /// The three-step discovery process. Writes the fold plan, confusion
    /// matrix, map family, per-fold results and the correctness-by-size
    /// summary to `cfg.output`.
    pub fn run_discovery(&self) -> Result<Discovery> {
        let out = &self.cfg.output;
        fs::create_dir_all(out)?;
        fs::write(out.join("folds.txt"), self.plan.to_text())?;
        let pool = self.pool()?;
        pool.install(|| {
            let (family, k, step1) = self.discover_family()?;
            k.write(out.join("confusions.txt"))?;
            family.write_dir(out.join("family"))?;
            let mut results = report::Writer::create(out.join("results.csv"), RESULT_COLUMNS)?;
            let mut summary = report::Writer::create(out.join("summary.csv"), SUMMARY_COLUMNS)?;
            let identity = P2VMap::identity(self.lex.used_phonemes())?;
            let mut rows = step1.clone();
            results.rows(&step1)?;
            summary.summary(&summarize(&step1, self.baselines(&identity)?)?)?;
            let mut summaries = Vec::new();
            for size in self.cfg.unit_sizes() {
                let Some(map) = family.get(size) else {
                    log::warn!("no map of size {size} in the family");
                    continue;
                };
                let r = self.score_map(map, Granularity::Viseme, self.cfg.network)?;
                let s = summarize(&r, self.baselines(map)?)?;
                results.rows(&r)?;
                summary.summary(&s)?;
                rows.extend(r);
                summaries.push(s);
            }
            Ok(Discovery { family, confusions: k, rows, summaries })
        })
    }

    fn study_map(&self) -> Result<P2VMap> {
        if let Some(p) = &self.cfg.map {
            return P2VMap::parse(&fs::read_to_string(p)?);
        }
        let (family, ..) = self.discover_family()?;
        let size = self.cfg.map_size.unwrap_or(self.cfg.size_min);
        family.get(size).cloned().ok_or_else(|| Error::Config(format!("no map of size {size} in the family")))
    }

    /// All six classifier/network pairings on the same folds.
    pub fn run_network_study(&self) -> Result<Vec<SummaryRow>> {
        let out = &self.cfg.output;
        fs::create_dir_all(out)?;
        let pool = self.pool()?;
        pool.install(|| {
            let map = self.study_map()?;
            let full = self.full_map(&map)?;
            let mut results = report::Writer::create(out.join("netstudy_results.csv"), RESULT_COLUMNS)?;
            let mut summary = report::Writer::create(out.join("netstudy.csv"), SUMMARY_COLUMNS)?;
            let baselines = self.baselines(&map)?;
            let per_fold = (0..self.plan.folds.len())
                .into_par_iter()
                .map(|k| {
                    let mut sets: HashMap<Granularity, HmmSet> = HashMap::new();
                    let mut rows = Vec::new();
                    for &(c, n) in &PAIRINGS {
                        if !sets.contains_key(&c) {
                            sets.insert(c, self.train(k, c, Some(&full), Training::Flat)?);
                        }
                        let r = self.evaluate(k, &sets[&c], c, n, n, Some(&full))?;
                        rows.push(self.row(map.size(), Training::Flat, c, n, &r));
                    }
                    Ok(rows)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut summaries = Vec::new();
            for (i, _) in PAIRINGS.iter().enumerate() {
                let rows: Vec<ResultRow> = per_fold.iter().map(|f| f[i].clone()).collect();
                results.rows(&rows)?;
                let s = summarize(&rows, baselines)?;
                summary.summary(&s)?;
                summaries.push(s);
            }
            Ok(summaries)
        })
    }

    /// For each size: visual-unit models and hierarchically trained phoneme
    /// models, each decoded with word and phoneme networks, plus flat-started
    /// phoneme models as a reference.
    pub fn run_hierarchical_study(&self) -> Result<Vec<SummaryRow>> {
        let out = &self.cfg.output;
        fs::create_dir_all(out)?;
        let pool = self.pool()?;
        pool.install(|| {
            let family = match &self.cfg.family {
                Some(dir) => read_family(dir)?,
                None => self.discover_family()?.0,
            };
            let mut results = report::Writer::create(out.join("hierstudy_results.csv"), RESULT_COLUMNS)?;
            let mut summary = report::Writer::create(out.join("hierstudy.csv"), SUMMARY_COLUMNS)?;
            let networks = [Granularity::Word, Granularity::Phoneme];
            let mut summaries = Vec::new();

            let identity = P2VMap::identity(self.lex.used_phonemes())?;
            let flat = self.phoneme_rows(&networks, None, Training::Flat)?;
            for rows in flat {
                results.rows(&rows)?;
                let s = summarize(&rows, self.baselines(&identity)?)?;
                summary.summary(&s)?;
                summaries.push(s);
            }
            for size in self.cfg.unit_sizes() {
                let Some(map) = family.get(size) else {
                    log::warn!("no map of size {size} in the family");
                    continue;
                };
                let full = self.full_map(map)?;
                let baselines = self.baselines(map)?;
                let visual = (0..self.plan.folds.len())
                    .into_par_iter()
                    .map(|k| {
                        let set = self.train(k, Granularity::Viseme, Some(&full), Training::Flat)?;
                        networks
                            .iter()
                            .map(|&n| {
                                let r = self.evaluate(k, &set, Granularity::Viseme, n, n, Some(&full))?;
                                Ok(self.row(size, Training::Flat, Granularity::Viseme, n, &r))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut series: Vec<Vec<ResultRow>> =
                    (0..networks.len()).map(|i| visual.iter().map(|f| f[i].clone()).collect()).collect();
                series.extend(self.phoneme_rows(&networks, Some((size, &full)), Training::Hierarchical)?);
                for rows in series {
                    results.rows(&rows)?;
                    let s = summarize(&rows, baselines)?;
                    summary.summary(&s)?;
                    summaries.push(s);
                }
            }
            Ok(summaries)
        })
    }

    /// Phoneme classifiers trained per fold, scored with each network; one
    /// series of fold rows per network.
    pub fn phoneme_rows(
        &self,
        networks: &[Granularity],
        map: Option<(usize, &P2VMap)>,
        training: Training,
    ) -> Result<Vec<Vec<ResultRow>>> {
        let size = map.map_or(self.lex.used_phonemes().len(), |(s, _)| s);
        let per_fold = (0..self.plan.folds.len())
            .into_par_iter()
            .map(|k| {
                let set = self.train(k, Granularity::Phoneme, map.map(|(_, m)| m), training)?;
                networks
                    .iter()
                    .map(|&n| {
                        let r = self.evaluate(k, &set, Granularity::Phoneme, n, n, None)?;
                        Ok(self.row(size, training, Granularity::Phoneme, n, &r))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..networks.len()).map(|i| per_fold.iter().map(|f| f[i].clone()).collect()).collect())
    }
}

/// Rewrite decoded tokens into the scoring granularity.
fn rescore_tokens(ex: &Expander<'_>, tokens: &[String], from: Granularity, to: Granularity) -> Result<Vec<String>> {
    match (from, to) {
        (a, b) if a == b => Ok(tokens.to_vec()),
        (Granularity::Word, g) => ex.tokens(tokens, g),
        (Granularity::Phoneme, Granularity::Viseme) => {
            let map = ex.map.ok_or_else(|| Error::invalid("viseme scoring needs a P2V map"))?;
            tokens.iter().map(|p| map.translate(p, ex.coverage).map(str::to_string)).collect()
        }
        (a, b) => Err(Error::invalid(format!("cannot score {a} output at {b} granularity"))),
    }
}

/// A family written by [`P2VFamily::write_dir`].
pub fn read_family(dir: impl AsRef<Path>) -> Result<P2VFamily> {
    let dir = dir.as_ref();
    let mut maps = std::collections::BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(size) = name.strip_prefix("p2v_").and_then(|s| s.strip_suffix(".txt")) {
            let size: usize = size.parse().map_err(|_| Error::Config(format!("bad family file '{name}'")))?;
            maps.insert(size, P2VMap::parse(&fs::read_to_string(&path)?)?);
        }
    }
    if maps.is_empty() {
        return Err(Error::Config(format!("no maps in '{}'", dir.display())));
    }
    let trace_path = dir.join("trace.txt");
    let trace = if trace_path.exists() {
        crate::cluster::MergeTrace::parse(&fs::read_to_string(trace_path)?)?
    } else {
        crate::cluster::MergeTrace { seed: 0, records: Vec::new() }
    };
    Ok(P2VFamily { maps, trace })
}

/// Everything the discovery process produces.
#[derive(Clone, Debug)]
pub struct Discovery {
    pub family: P2VFamily,
    pub confusions: ConfusionMatrix,
    pub rows: Vec<ResultRow>,
    /// One row per scored unit size, largest first.
    pub summaries: Vec<SummaryRow>,
}
