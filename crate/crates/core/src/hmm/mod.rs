//! Left-to-right GMM-HMMs with diagonal covariances: flat start, embedded
//! Baum-Welch re-estimation, short-pause tying and forced alignment.

mod composite;
mod io;
mod train;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lexicon::SP;

pub use composite::{forced_align, Alignment, AlignedState};
pub(crate) use composite::Scorer;
pub use train::{embedded_reestimate, flat_start, tie_sp, train_recipe, Reestimation};

/// Lower bound applied to every variance floor, so a constant corpus still
/// yields usable models.
pub const MIN_VARIANCE: f64 = 1e-8;

/// Legal transitions never drop below this probability during re-estimation.
pub const TRANSITION_FLOOR: f64 = 1e-6;

const STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmittingState {
    pub mixture: Vec<Component>,
}

/// One unit model. `trans` is (S+2) x (S+2): row 0 is the non-emitting
/// entry, row S+1 the non-emitting exit, rows 1..=S the emitting states.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmHmm {
    pub label: String,
    pub states: Vec<EmittingState>,
    pub trans: Vec<Vec<f64>>,
}

impl GmmHmm {
    /// Left-to-right topology with self-loops, transitions uniform over the
    /// legal arcs. `skip` adds an entry-to-exit arc (a "tee" model).
    pub fn left_to_right(label: impl Into<String>, states: Vec<EmittingState>, skip: bool) -> Self {
        let s = states.len();
        let mut trans = vec![vec![0.0; s + 2]; s + 2];
        if skip {
            trans[0][1] = 0.5;
            trans[0][s + 1] = 0.5;
        } else {
            trans[0][1] = 1.0;
        }
        for i in 1..=s {
            trans[i][i] = 0.5;
            trans[i][i + 1] = 0.5;
        }
        GmmHmm { label: label.into(), states, trans }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn exit(&self) -> usize {
        self.states.len() + 1
    }

    /// True when the model can be traversed without emitting a frame.
    pub fn is_tee(&self) -> bool {
        self.trans[0][self.exit()] > 0.0
    }

    pub fn dim(&self) -> usize {
        self.states.first().and_then(|s| s.mixture.first()).map_or(0, |c| c.mean.len())
    }

    /// Check stochasticity and the variance floor.
    pub fn check(&self, floor: &[f64]) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(format!("{}: {msg}", self.label)));
        let s = self.num_states();
        if s == 0 {
            return bad("no emitting states".into());
        }
        if self.trans.len() != s + 2 || self.trans.iter().any(|r| r.len() != s + 2) {
            return bad("transition matrix has the wrong shape".into());
        }
        for (i, row) in self.trans.iter().enumerate().take(s + 1) {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|&p| p < 0.0) {
                return bad(format!("transition row {i} sums to {total}"));
            }
        }
        for (k, state) in self.states.iter().enumerate() {
            let total: f64 = state.mixture.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return bad(format!("state {} mixture weights sum to {total}", k + 1));
            }
            for c in &state.mixture {
                if c.mean.len() != floor.len() || c.var.len() != floor.len() {
                    return bad("component dimension mismatch".into());
                }
                if c.var.iter().zip(floor).any(|(v, f)| !(v >= f) || *v <= 0.0) {
                    return bad(format!("state {} has a variance below the floor", k + 1));
                }
            }
        }
        Ok(())
    }
}

/// An emitting state of a named model, numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateRef {
    pub model: String,
    pub state: usize,
}

impl StateRef {
    pub fn new(model: impl Into<String>, state: usize) -> Self {
        StateRef { model: model.into(), state }
    }
}

/// Aliased states share the owner's parameters and pool statistics with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TieRecord {
    pub owner: StateRef,
    pub aliases: Vec<StateRef>,
}

/// Shape of the models created by a flat start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prototype {
    pub states: usize,
    pub mixtures: usize,
    pub dim: usize,
}

impl Prototype {
    pub fn new(states: usize, mixtures: usize, dim: usize) -> Self {
        Prototype { states, mixtures, dim }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub floor_factor: f64,
    /// Forward-pass pruning beam in natural-log units.
    pub beam: Option<f64>,
    /// Seed of the flat-start jitter.
    pub seed: u64,
    /// Component-mean jitter in units of the global standard deviation.
    pub jitter: f64,
    /// Tie sp to sil after this many passes of a training recipe.
    pub tie_sp_after: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { iterations: 11, floor_factor: 1e-4, beam: None, seed: 0, jitter: 0.01, tie_sp_after: Some(3) }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("re-estimation needs at least one iteration"));
        }
        if !(self.floor_factor > 0.0) {
            return Err(Error::invalid("variance floor factor must be positive"));
        }
        if matches!(self.beam, Some(b) if !(b > 0.0)) {
            return Err(Error::invalid("pruning beam must be positive"));
        }
        Ok(())
    }
}

/// A named collection of models sharing a feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmSet {
    models: BTreeMap<String, GmmHmm>,
    tying: Vec<TieRecord>,
    var_floor: Vec<f64>,
}

impl HmmSet {
    pub fn new(models: Vec<GmmHmm>, var_floor: Vec<f64>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for m in models {
            if map.contains_key(&m.label) {
                return Err(Error::Model(format!("duplicate model '{}'", m.label)));
            }
            map.insert(m.label.clone(), m);
        }
        let set = HmmSet { models: map, tying: Vec::new(), var_floor };
        set.check()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.var_floor.len()
    }

    pub fn var_floor(&self) -> &[f64] {
        &self.var_floor
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&GmmHmm> {
        self.models.get(label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.models.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn models(&self) -> impl Iterator<Item = &GmmHmm> {
        self.models.values()
    }

    pub fn tying(&self) -> &[TieRecord] {
        &self.tying
    }

    pub(crate) fn get_mut(&mut self, label: &str) -> Option<&mut GmmHmm> {
        self.models.get_mut(label)
    }

    pub(crate) fn push_tie(&mut self, record: TieRecord) {
        self.tying.push(record);
    }

    /// Replace or add a model. Tying records that reference it are kept.
    pub fn insert(&mut self, model: GmmHmm) -> Result<()> {
        if model.dim() != self.dim() {
            return Err(Error::Model(format!("model '{}' has dimension {}", model.label, model.dim())));
        }
        model.check(&self.var_floor)?;
        self.models.insert(model.label.clone(), model);
        Ok(())
    }

    pub fn state(&self, r: &StateRef) -> Option<&EmittingState> {
        self.models.get(&r.model).and_then(|m| m.states.get(r.state.checked_sub(1)?))
    }

    /// Owner of `r` under the tying records (itself when untied).
    pub fn owner_of<'a>(&'a self, r: &'a StateRef) -> &'a StateRef {
        self.tying.iter().find(|t| t.aliases.contains(r)).map_or(r, |t| &t.owner)
    }

    /// Tied states cannot be separated again.
    pub fn untie(&mut self, r: &StateRef) -> Result<()> {
        Err(Error::Unsupported(format!("untying {}.{}", r.model, r.state)))
    }

    /// Verify every model and tying record.
    pub fn check(&self) -> Result<()> {
        if self.var_floor.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Model("variance floor must be positive".into()));
        }
        for m in self.models.values() {
            m.check(&self.var_floor)?;
        }
        if let Some(sp) = self.models.get(SP) {
            if sp.num_states() != 1 {
                return Err(Error::Model("sp must have exactly one emitting state".into()));
            }
        }
        for t in &self.tying {
            for r in std::iter::once(&t.owner).chain(&t.aliases) {
                if self.state(r).is_none() {
                    return Err(Error::Model(format!("tie references missing state {}.{}", r.model, r.state)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(mean: f64) -> EmittingState {
        EmittingState { mixture: vec![Component { weight: 1.0, mean: vec![mean], var: vec![1.0] }] }
    }

    #[test]
    fn topology() {
        let m = GmmHmm::left_to_right("a", vec![state(0.0), state(1.0), state(2.0)], false);
        assert!(!m.is_tee());
        assert_eq!(m.trans[1][1], 0.5);
        assert_eq!(m.trans[3][4], 0.5);
        m.check(&[0.5]).unwrap();
        let sp = GmmHmm::left_to_right("sp", vec![state(0.0)], true);
        assert!(sp.is_tee());
        sp.check(&[0.5]).unwrap();
        assert!(sp.check(&[2.0]).is_err());
    }

    #[test]
    fn set_rejects_bad_sp() {
        let sp = GmmHmm::left_to_right("sp", vec![state(0.0), state(0.0)], true);
        assert!(HmmSet::new(vec![sp], vec![0.1]).is_err());
    }

    #[test]
    fn untie_is_unsupported() {
        let mut set = HmmSet::new(vec![GmmHmm::left_to_right("a", vec![state(0.0)], false)], vec![0.1]).unwrap();
        assert!(matches!(set.untie(&StateRef::new("a", 1)), Err(Error::Unsupported(_))));
    }
}
