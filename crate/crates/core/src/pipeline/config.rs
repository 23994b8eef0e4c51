use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::decoder::{DecodeParams, PenaltyBase};
use crate::error::{Error, Result};
use crate::hmm::{Prototype, TrainConfig};
use crate::lexicon::{Coverage, Granularity};
use crate::seed;
use crate::units::TranscriptOptions;

/// Parameters of the built-in synthetic speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub utterances: usize,
    pub words: (usize, usize),
    pub dim: usize,
    pub noise: f64,
    /// Per-dimension spread of phoneme targets around their class centre.
    pub spread: f64,
    /// Per-dimension spread of vowel class centres.
    pub vowel_separation: f64,
    /// Per-dimension spread of consonant class centres.
    pub consonant_separation: f64,
    /// Offset between the vowel and consonant regions of feature space.
    pub category_offset: f64,
    pub duration: (usize, usize),
    pub crossfade: usize,
    /// P2V-format file of true visual classes; bundled design when absent.
    pub design: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            utterances: 240,
            words: (2, 4),
            dim: 6,
            noise: 1.0,
            spread: 0.05,
            vowel_separation: 3.0,
            consonant_separation: 3.0,
            category_offset: 6.0,
            duration: (3, 9),
            crossfade: 0,
            design: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub speaker: String,
    /// Corpus file; the synthetic speaker is generated when absent.
    pub corpus: Option<PathBuf>,
    /// Pronunciation lexicon; the bundled synthetic lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    pub folds: usize,
    pub test_size: usize,
    pub seed: u64,
    pub states: usize,
    pub mixtures: usize,
    pub iterations: usize,
    pub floor_factor: f64,
    pub jitter: f64,
    pub tie_sp_after: Option<usize>,
    pub beam: Option<f64>,
    pub grammar_scale: f64,
    pub penalty: f64,
    pub penalty_base: PenaltyBase,
    pub discount: f64,
    pub size_min: usize,
    pub size_max: usize,
    /// Explicit unit sizes, overriding the range.
    pub sizes: Option<Vec<usize>>,
    /// Classifier units of the network and hierarchy studies' viseme rows.
    pub classifier: Granularity,
    /// Network used to score visual-unit classifiers during discovery.
    pub network: Granularity,
    /// Network used for the phoneme classification that yields confusions.
    pub discovery_network: Granularity,
    pub map: Option<PathBuf>,
    pub map_size: Option<usize>,
    pub family: Option<PathBuf>,
    pub sil: bool,
    pub sp: bool,
    pub coverage: Coverage,
    /// Worker threads; 0 picks the machine default.
    pub jobs: usize,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            speaker: "synthetic".into(),
            corpus: None,
            lexicon: None,
            output: PathBuf::from("out"),
            folds: 10,
            test_size: 20,
            seed: 0,
            states: 3,
            mixtures: 5,
            iterations: 11,
            floor_factor: 1e-4,
            jitter: 0.01,
            tie_sp_after: Some(3),
            beam: None,
            grammar_scale: 1.0,
            penalty: 0.5,
            penalty_base: PenaltyBase::Natural,
            discount: 0.5,
            size_min: 11,
            size_max: 35,
            sizes: None,
            classifier: Granularity::Viseme,
            network: Granularity::Word,
            discovery_network: Granularity::Phoneme,
            map: None,
            map_size: None,
            family: None,
            sil: true,
            sp: true,
            coverage: Coverage::Lenient,
            jobs: 0,
            synth: SynthConfig::default(),
        }
    }
}

/// Every key accepted in a config file or as a `--key` flag.
pub const CONFIG_KEYS: &[&str] = &[
    "speaker",
    "corpus",
    "lexicon",
    "output",
    "folds",
    "test_size",
    "seed",
    "states",
    "mixtures",
    "iterations",
    "floor_factor",
    "jitter",
    "tie_sp_after",
    "beam",
    "grammar_scale",
    "penalty",
    "penalty_base",
    "discount",
    "size_min",
    "size_max",
    "sizes",
    "classifier",
    "network",
    "discovery_network",
    "map",
    "map_size",
    "family",
    "sil",
    "sp",
    "coverage",
    "jobs",
    "synth_utterances",
    "synth_words",
    "synth_dim",
    "synth_noise",
    "synth_spread",
    "synth_vowel_separation",
    "synth_consonant_separation",
    "synth_category_offset",
    "synth_duration",
    "synth_crossfade",
    "synth_design",
];

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("bad value '{value}' for '{key}'"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" => Ok(None),
        v => num(key, v).map(Some),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    match value {
        "" | "none" => None,
        v => Some(PathBuf::from(v)),
    }
}

fn range(key: &str, value: &str) -> Result<(usize, usize)> {
    let (lo, hi) = value.split_once('-').unwrap_or((value, value));
    Ok((num(key, lo.trim())?, num(key, hi.trim())?))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn granularity(key: &str, value: &str) -> Result<Granularity> {
    value.parse().map_err(|_| bad(key, value))
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "speaker" => self.speaker = v.to_string(),
            "corpus" => self.corpus = path(v),
            "lexicon" => self.lexicon = path(v),
            "output" => self.output = PathBuf::from(v),
            "folds" => self.folds = num(key, v)?,
            "test_size" => self.test_size = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "states" => self.states = num(key, v)?,
            "mixtures" => self.mixtures = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "floor_factor" => self.floor_factor = num(key, v)?,
            "jitter" => self.jitter = num(key, v)?,
            "tie_sp_after" => self.tie_sp_after = optional(key, v)?,
            "beam" => self.beam = optional(key, v)?,
            "grammar_scale" => self.grammar_scale = num(key, v)?,
            "penalty" => self.penalty = num(key, v)?,
            "penalty_base" => {
                self.penalty_base = match v {
                    "natural" | "e" | "ln" => PenaltyBase::Natural,
                    "log10" | "10" => PenaltyBase::Log10,
                    _ => return Err(bad(key, v)),
                }
            }
            "discount" => self.discount = num(key, v)?,
            "size_min" => self.size_min = num(key, v)?,
            "size_max" => self.size_max = num(key, v)?,
            "sizes" => {
                self.sizes = match v {
                    "" | "none" => None,
                    list => Some(
                        list.split(',').map(|s| num(key, s.trim())).collect::<Result<Vec<usize>>>()?,
                    ),
                }
            }
            "classifier" => self.classifier = granularity(key, v)?,
            "network" => self.network = granularity(key, v)?,
            "discovery_network" => self.discovery_network = granularity(key, v)?,
            "map" => self.map = path(v),
            "map_size" => self.map_size = optional(key, v)?,
            "family" => self.family = path(v),
            "sil" => self.sil = boolean(key, v)?,
            "sp" => self.sp = boolean(key, v)?,
            "coverage" => {
                self.coverage = match v {
                    "strict" => Coverage::Strict,
                    "lenient" => Coverage::Lenient,
                    _ => return Err(bad(key, v)),
                }
            }
            "jobs" => self.jobs = num(key, v)?,
            "synth_utterances" => self.synth.utterances = num(key, v)?,
            "synth_words" => self.synth.words = range(key, v)?,
            "synth_dim" => self.synth.dim = num(key, v)?,
            "synth_noise" => self.synth.noise = num(key, v)?,
            "synth_spread" => self.synth.spread = num(key, v)?,
            "synth_vowel_separation" => self.synth.vowel_separation = num(key, v)?,
            "synth_consonant_separation" => self.synth.consonant_separation = num(key, v)?,
            "synth_category_offset" => self.synth.category_offset = num(key, v)?,
            "synth_duration" => self.synth.duration = range(key, v)?,
            "synth_crossfade" => self.synth.crossfade = num(key, v)?,
            "synth_design" => self.synth.design = path(v),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read '{}': {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let base = match self.penalty_base {
            PenaltyBase::Natural => "natural",
            PenaltyBase::Log10 => "log10",
        };
        let coverage = match self.coverage {
            Coverage::Strict => "strict",
            Coverage::Lenient => "lenient",
        };
        let sizes = self
            .sizes
            .as_ref()
            .map_or("none".to_string(), |v| v.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        let pairs: Vec<(&str, String)> = vec![
            ("speaker", self.speaker.clone()),
            ("corpus", show_path(&self.corpus)),
            ("lexicon", show_path(&self.lexicon)),
            ("output", self.output.display().to_string()),
            ("folds", self.folds.to_string()),
            ("test_size", self.test_size.to_string()),
            ("seed", self.seed.to_string()),
            ("states", self.states.to_string()),
            ("mixtures", self.mixtures.to_string()),
            ("iterations", self.iterations.to_string()),
            ("floor_factor", self.floor_factor.to_string()),
            ("jitter", self.jitter.to_string()),
            ("tie_sp_after", show_opt(&self.tie_sp_after)),
            ("beam", show_opt(&self.beam)),
            ("grammar_scale", self.grammar_scale.to_string()),
            ("penalty", self.penalty.to_string()),
            ("penalty_base", base.to_string()),
            ("discount", self.discount.to_string()),
            ("size_min", self.size_min.to_string()),
            ("size_max", self.size_max.to_string()),
            ("sizes", sizes),
            ("classifier", self.classifier.to_string()),
            ("network", self.network.to_string()),
            ("discovery_network", self.discovery_network.to_string()),
            ("map", show_path(&self.map)),
            ("map_size", show_opt(&self.map_size)),
            ("family", show_path(&self.family)),
            ("sil", self.sil.to_string()),
            ("sp", self.sp.to_string()),
            ("coverage", coverage.to_string()),
            ("jobs", self.jobs.to_string()),
            ("synth_utterances", s.utterances.to_string()),
            ("synth_words", format!("{}-{}", s.words.0, s.words.1)),
            ("synth_dim", s.dim.to_string()),
            ("synth_noise", s.noise.to_string()),
            ("synth_spread", s.spread.to_string()),
            ("synth_vowel_separation", s.vowel_separation.to_string()),
            ("synth_consonant_separation", s.consonant_separation.to_string()),
            ("synth_category_offset", s.category_offset.to_string()),
            ("synth_duration", format!("{}-{}", s.duration.0, s.duration.1)),
            ("synth_crossfade", s.crossfade.to_string()),
            ("synth_design", show_path(&s.design)),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Check ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.folds == 0 {
            return fail("folds must be at least 1");
        }
        if self.test_size == 0 {
            return fail("test_size must be at least 1");
        }
        if self.states == 0 || self.mixtures == 0 {
            return fail("states and mixtures must be at least 1");
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if !(self.floor_factor > 0.0) {
            return fail("floor_factor must be positive");
        }
        if !(self.grammar_scale >= 0.0) {
            return fail("grammar_scale must be non-negative");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return fail("discount must lie in (0, 1)");
        }
        if self.sizes.as_ref().map_or(self.size_min > self.size_max, Vec::is_empty) {
            return fail("the unit-size range is empty");
        }
        if self.sizes.iter().flatten().chain([&self.size_min]).any(|&s| s == 0) {
            return fail("unit sizes must be positive");
        }
        let s = &self.synth;
        if s.words.0 == 0 || s.words.0 > s.words.1 || s.duration.0 == 0 || s.duration.0 > s.duration.1 {
            return fail("synthetic ranges must satisfy 1 <= min <= max");
        }
        if s.dim == 0 || s.utterances == 0 {
            return fail("synthetic dimension and utterance count must be positive");
        }
        for (key, p) in [
            ("corpus", &self.corpus),
            ("lexicon", &self.lexicon),
            ("map", &self.map),
            ("family", &self.family),
            ("synth_design", &self.synth.design),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{key} '{}' does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Requested unit sizes, largest first.
    pub fn unit_sizes(&self) -> Vec<usize> {
        let mut v = self.sizes.clone().unwrap_or_else(|| (self.size_min..=self.size_max).collect());
        v.sort_unstable_by(|a, b| b.cmp(a));
        v.dedup();
        v
    }

    pub fn prototype(&self, dim: usize) -> Prototype {
        Prototype::new(self.states, self.mixtures, dim)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            floor_factor: self.floor_factor,
            beam: self.beam,
            seed: seed::substream(self.seed, "jitter"),
            jitter: self.jitter,
            tie_sp_after: self.tie_sp_after,
        }
    }

    pub fn decode_params(&self) -> DecodeParams {
        DecodeParams {
            grammar_scale: self.grammar_scale,
            penalty: self.penalty,
            penalty_base: self.penalty_base,
            beam: self.beam,
        }
    }

    pub fn transcript_options(&self) -> TranscriptOptions {
        TranscriptOptions { sil: self.sil, sp: self.sp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.folds, cfg.test_size, cfg.states, cfg.mixtures, cfg.iterations), (10, 20, 3, 5, 11));
        assert_eq!((cfg.grammar_scale, cfg.penalty), (1.0, 0.5));
        assert_eq!(cfg.unit_sizes().len(), 25);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let keys: Vec<String> = cfg.to_text().lines().map(|l| l.split(" = ").next().unwrap().to_string()).collect();
        assert_eq!(keys, CONFIG_KEYS);
    }

    #[test]
    fn parse_and_errors() {
        let cfg = ExperimentConfig::parse("# c\nfolds = 3\nsizes = 2, 6,25\nbeam = 200\n").unwrap();
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.unit_sizes(), vec![25, 6, 2]);
        assert_eq!(cfg.beam, Some(200.0));
        assert!(matches!(ExperimentConfig::parse("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("folds = x"), Err(Error::Config(_))));
        let missing = ExperimentConfig::parse("corpus = /nonexistent/file").unwrap();
        assert!(missing.validate().is_err());
        let empty = ExperimentConfig::parse("size_min = 20\nsize_max = 10").unwrap();
        assert!(empty.validate().is_err());
    }
}
