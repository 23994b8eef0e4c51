use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{mean_and_se, Counts};
use crate::lexicon::Granularity;

use super::Training;

pub const RESULT_COLUMNS: &[&str] = &[
    "speaker",
    "map_size",
    "classifier_unit",
    "network_unit",
    "fold",
    "N",
    "D",
    "S",
    "I",
    "C",
    "accuracy",
    "accuracy_raw",
    "training",
];

pub const SUMMARY_COLUMNS: &[&str] = &[
    "speaker",
    "map_size",
    "classifier_unit",
    "network_unit",
    "training",
    "folds",
    "C_mean",
    "C_se",
    "unit_chance",
    "homophene_ceiling",
];

/// Scores of one fold for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub speaker: String,
    pub map_size: usize,
    pub classifier: Granularity,
    pub network: Granularity,
    pub training: Training,
    pub fold: usize,
    pub counts: Counts,
}

impl ResultRow {
    pub fn new(
        speaker: &str,
        map_size: usize,
        training: Training,
        classifier: Granularity,
        network: Granularity,
        fold: usize,
        counts: Counts,
    ) -> Self {
        ResultRow { speaker: speaker.to_string(), map_size, classifier, network, training, fold, counts }
    }

    pub fn correctness(&self) -> Option<f64> {
        self.counts.correctness()
    }

    fn record(&self) -> Vec<String> {
        let c = &self.counts;
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let acc = c.accuracy();
        vec![
            self.speaker.clone(),
            self.map_size.to_string(),
            self.classifier.to_string(),
            self.network.to_string(),
            self.fold.to_string(),
            c.n.to_string(),
            c.d.to_string(),
            c.s.to_string(),
            c.i.to_string(),
            fmt(c.correctness()),
            fmt(acc.map(|a| a.max(0.0))),
            fmt(acc),
            self.training.name().to_string(),
        ]
    }
}

/// Mean and standard error of fold correctness for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub speaker: String,
    pub map_size: usize,
    pub classifier: Granularity,
    pub network: Granularity,
    pub training: Training,
    pub folds: usize,
    pub mean: f64,
    /// `None` when only one fold was scored.
    pub se: Option<f64>,
    pub unit_chance: f64,
    pub homophene_ceiling: f64,
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.speaker.clone(),
            self.map_size.to_string(),
            self.classifier.to_string(),
            self.network.to_string(),
            self.training.name().to_string(),
            self.folds.to_string(),
            format!("{:.6}", self.mean),
            self.se.map_or_else(|| "NA".to_string(), |s| format!("{s:.6}")),
            format!("{:.6}", self.unit_chance),
            format!("{:.6}", self.homophene_ceiling),
        ]
    }
}

/// Fold rows of a single configuration reduced to a summary. Folds with no
/// reference tokens are left out.
pub fn summarize(rows: &[ResultRow], baselines: (f64, f64)) -> Result<SummaryRow> {
    let first = rows.first().ok_or_else(|| Error::invalid("no fold results to summarize"))?;
    if rows.iter().any(|r| {
        (r.map_size, r.classifier, r.network, r.training) != (first.map_size, first.classifier, first.network, first.training)
    }) {
        return Err(Error::invalid("fold results from different configurations"));
    }
    let values: Vec<f64> = rows.iter().filter_map(ResultRow::correctness).collect();
    let c = mean_and_se(&values)?;
    Ok(SummaryRow {
        speaker: first.speaker.clone(),
        map_size: first.map_size,
        classifier: first.classifier,
        network: first.network,
        training: first.training,
        folds: values.len(),
        mean: c.mean,
        se: c.se_defined.then_some(c.se),
        unit_chance: baselines.0,
        homophene_ceiling: baselines.1,
    })
}

/// A CSV file flushed after every batch so partial runs keep their rows.
pub(crate) struct Writer {
    inner: csv::Writer<File>,
}

impl Writer {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(header)?;
        inner.flush()?;
        Ok(Writer { inner })
    }

    pub fn rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for r in rows {
            self.inner.write_record(r.record())?;
        }
        self.inner.flush()?;
        Ok(())
    }

    pub fn summary(&mut self, row: &SummaryRow) -> Result<()> {
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        Ok(())
    }
}
