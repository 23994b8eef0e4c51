//! Feature sequences, the corpus text format, a synthetic corpus generator
//! built on a linear shape/appearance model, and cross-validation folds.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lexicon::{PronLexicon, SIL};
use crate::seed;

/// 25 frames per second.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.04;

/// A T x D matrix of frames stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    dim: usize,
    frame_period: f64,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, dim: usize, frame_period: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values do not form a non-empty sequence of {dim}-dimensional frames",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        if !(frame_period > 0.0) {
            return Err(Error::invalid("frame period must be positive"));
        }
        Ok(FeatureSequence { data, dim, frame_period })
    }

    pub fn from_frames(frames: &[Vec<f64>], frame_period: f64) -> Result<Self> {
        let dim = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid("frames have differing dimensions"));
        }
        FeatureSequence::new(frames.concat(), dim, frame_period)
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: FeatureSequence,
    pub words: Vec<String>,
}

/// Linear generative model: a phoneme's target frame is
/// `mean + sum_i modes[i] * coefficients[phoneme][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthModel {
    pub mean: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub coefficients: BTreeMap<String, Vec<f64>>,
    /// Standard deviation of the isotropic frame noise.
    pub noise: f64,
    /// Inclusive frame-count range of one phoneme.
    pub duration: (usize, usize),
    /// Frames at the start of a phone blended linearly from the previous target.
    pub crossfade: usize,
    /// Inclusive frame-count range of the leading and trailing silence; `None` omits it.
    pub silence: Option<(usize, usize)>,
    pub frame_period: f64,
}

/// One phone of a generated utterance, frames `start..end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl SynthModel {
    /// A model whose modes are the coordinate axes, so each phoneme's
    /// coefficients are its target's offset from `mean`.
    pub fn axis_aligned(mean: Vec<f64>, targets: BTreeMap<String, Vec<f64>>, noise: f64) -> Self {
        let dim = mean.len();
        let modes = (0..dim)
            .map(|i| {
                let mut m = vec![0.0; dim];
                m[i] = 1.0;
                m
            })
            .collect();
        let coefficients = targets
            .into_iter()
            .map(|(p, t)| {
                let c = t.iter().zip(&mean).map(|(a, b)| a - b).collect();
                (p, c)
            })
            .collect();
        SynthModel {
            mean,
            modes,
            coefficients,
            noise,
            duration: (3, 9),
            crossfade: 0,
            silence: Some((3, 9)),
            frame_period: DEFAULT_FRAME_PERIOD,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || self.modes.is_empty() {
            return Err(Error::invalid("synthetic model needs a non-empty mean and at least one mode"));
        }
        if self.modes.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("mode dimension differs from the mean"));
        }
        if let Some((p, _)) = self.coefficients.iter().find(|(_, c)| c.len() != self.modes.len()) {
            return Err(Error::invalid(format!("phoneme '{p}' has the wrong number of coefficients")));
        }
        let ranges = std::iter::once(self.duration).chain(self.silence);
        if ranges.clone().any(|(lo, hi)| lo == 0 || lo > hi) {
            return Err(Error::invalid("duration ranges must satisfy 1 <= min <= max"));
        }
        if self.crossfade >= self.duration.0 {
            return Err(Error::invalid("cross-fade must be shorter than the minimum phone duration"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise scale must be non-negative"));
        }
        Ok(())
    }

    /// Target frame of `label`; silence sits at the mean.
    pub fn target(&self, label: &str) -> Result<Vec<f64>> {
        if label == SIL {
            return Ok(self.mean.clone());
        }
        let coef = self
            .coefficients
            .get(label)
            .ok_or_else(|| Error::invalid(format!("synthetic model has no target for '{label}'")))?;
        let mut t = self.mean.clone();
        for (mode, &c) in self.modes.iter().zip(coef) {
            for (ti, mi) in t.iter_mut().zip(mode) {
                *ti += mi * c;
            }
        }
        Ok(t)
    }
}

/// Generate one utterance per sentence; the same inputs and seed always
/// produce the same frames.
pub fn generate_corpus(
    model: &SynthModel,
    lex: &PronLexicon,
    sentences: &[Vec<String>],
    seed: u64,
) -> Result<Vec<Utterance>> {
    Ok(generate_labeled(model, lex, sentences, seed)?.into_iter().map(|(u, _)| u).collect())
}

/// Like [`generate_corpus`], also returning the phone segmentation.
pub fn generate_labeled(
    model: &SynthModel,
    lex: &PronLexicon,
    sentences: &[Vec<String>],
    seed: u64,
) -> Result<Vec<(Utterance, Vec<Segment>)>> {
    model.validate()?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut targets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut rng = seed::rng(seed);
    let dim = model.dim();
    let mut out = Vec::with_capacity(sentences.len());

    for (n, sentence) in sentences.iter().enumerate() {
        if sentence.is_empty() {
            return Err(Error::invalid(format!("sentence {n} is empty")));
        }
        let mut phones: Vec<(String, (usize, usize))> = Vec::new();
        if let Some(range) = model.silence {
            phones.push((SIL.to_string(), range));
        }
        let mut words = Vec::with_capacity(sentence.len());
        for w in sentence {
            let pron = lex.pronunciation(w).ok_or_else(|| Error::UnknownWord(w.clone()))?;
            words.push(w.to_uppercase());
            phones.extend(pron.iter().map(|p| (p.clone(), model.duration)));
        }
        if let Some(range) = model.silence {
            phones.push((SIL.to_string(), range));
        }

        let mut data = Vec::new();
        let mut segments = Vec::with_capacity(phones.len());
        let mut prev: Option<Vec<f64>> = None;
        for (label, (lo, hi)) in phones {
            if !targets.contains_key(&label) {
                targets.insert(label.clone(), model.target(&label)?);
            }
            let target = &targets[&label];
            let frames = rng.random_range(lo..=hi);
            let start = data.len() / dim;
            for k in 0..frames {
                let blend = match &prev {
                    Some(p) if k < model.crossfade => {
                        let w = (k + 1) as f64 / (model.crossfade + 1) as f64;
                        Some((p, w))
                    }
                    _ => None,
                };
                for d in 0..dim {
                    let clean = match blend {
                        Some((p, w)) => p[d] + (target[d] - p[d]) * w,
                        None => target[d],
                    };
                    let noise = if model.noise > 0.0 { model.noise * normal.sample(&mut rng) } else { 0.0 };
                    data.push(clean + noise);
                }
            }
            segments.push(Segment { label, start, end: start + frames });
            prev = Some(target.clone());
        }
        let features = FeatureSequence::new(data, dim, model.frame_period)?;
        out.push((Utterance { id: format!("utt{n:04}"), features, words }, segments));
    }
    Ok(out)
}

/// Sentences of uniformly drawn lexicon words.
pub fn random_sentences(lex: &PronLexicon, count: usize, len: (usize, usize), seed: u64) -> Vec<Vec<String>> {
    let words: Vec<&str> = lex.words().collect();
    if words.is_empty() || len.0 == 0 || len.0 > len.1 {
        return Vec::new();
    }
    let mut rng = seed::rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(len.0..=len.1);
            (0..n).map(|_| words[rng.random_range(0..words.len())].to_string()).collect()
        })
        .collect()
}

/// Serialize a corpus in the line-oriented text format.
pub fn corpus_to_string(utts: &[Utterance]) -> Result<String> {
    let first = utts.first().ok_or_else(|| Error::invalid("cannot write an empty corpus"))?;
    let dim = first.features.dim();
    let rate = 1.0 / first.features.frame_period();
    let mut out = String::new();
    writeln!(out, "corpus dim {dim} rate {rate}").unwrap();
    for u in utts {
        if u.features.dim() != dim {
            return Err(Error::invalid(format!("utterance '{}' has dimension {}", u.id, u.features.dim())));
        }
        write!(out, "utt {} frames {} words", u.id, u.features.len()).unwrap();
        for w in &u.words {
            write!(out, " {w}").unwrap();
        }
        out.push('\n');
        for frame in u.features.frames() {
            let mut first = true;
            for v in frame {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn parse_corpus(text: &str) -> Result<Vec<Utterance>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing corpus header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (dim, rate) = match h.as_slice() {
        ["corpus", "dim", d, "rate", r] => (
            d.parse::<usize>().map_err(|_| Error::parse(1, format!("bad dimension '{d}'")))?,
            r.parse::<f64>().map_err(|_| Error::parse(1, format!("bad rate '{r}'")))?,
        ),
        _ => return Err(Error::parse(1, "expected 'corpus dim <D> rate <R>'")),
    };
    if dim == 0 || !(rate > 0.0) {
        return Err(Error::parse(1, "dimension and rate must be positive"));
    }
    let period = 1.0 / rate;

    let mut utts = Vec::new();
    let mut ids = HashSet::new();
    while let Some((i, line)) = lines.next() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let (id, frames, words) = match f.as_slice() {
            ["utt", id, "frames", t, "words", words @ ..] => {
                let t = t.parse::<usize>().map_err(|_| Error::CorpusFormat {
                    utt: id.to_string(),
                    line: i + 1,
                    msg: format!("bad frame count '{t}'"),
                })?;
                (id.to_string(), t, words.iter().map(|w| w.to_string()).collect::<Vec<_>>())
            }
            _ => return Err(Error::parse(i + 1, "expected 'utt <id> frames <T> words ...'")),
        };
        let fail = |line: usize, msg: String| Error::CorpusFormat { utt: id.clone(), line, msg };
        if frames == 0 {
            return Err(fail(i + 1, "utterance has no frames".into()));
        }
        if words.is_empty() {
            return Err(fail(i + 1, "utterance has no words".into()));
        }
        if !ids.insert(id.clone()) {
            return Err(fail(i + 1, "duplicate utterance id".into()));
        }
        let mut data = Vec::with_capacity(frames * dim);
        for _ in 0..frames {
            let (j, row) = lines.next().ok_or_else(|| fail(i + 1, "file ends inside the utterance".into()))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| fail(j + 1, format!("malformed number '{tok}'")))?;
                if !v.is_finite() {
                    return Err(fail(j + 1, format!("non-finite value '{tok}'")));
                }
                data.push(v);
            }
            let got = data.len() - before;
            if got != dim {
                return Err(fail(j + 1, format!("expected {dim} values, found {got}")));
            }
        }
        let features = FeatureSequence::new(data, dim, period)?;
        utts.push(Utterance { id, features, words });
    }
    Ok(utts)
}

pub fn write_corpus(utts: &[Utterance], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, corpus_to_string(utts)?)?;
    Ok(())
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub test: Vec<String>,
    pub train: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Each fold draws `test_size` distinct utterances uniformly, independently of
/// the other folds; everything else in the corpus is that fold's training set.
pub fn plan_folds(utts: &[Utterance], k: usize, test_size: usize, seed: u64) -> Result<FoldPlan> {
    let ids: Vec<&str> = utts.iter().map(|u| u.id.as_str()).collect();
    plan_folds_for_ids(&ids, k, test_size, seed)
}

pub fn plan_folds_for_ids<S: AsRef<str>>(ids: &[S], k: usize, test_size: usize, seed: u64) -> Result<FoldPlan> {
    let n = ids.len();
    if k == 0 {
        return Err(Error::invalid("fold count must be at least 1"));
    }
    if test_size == 0 {
        return Err(Error::invalid("test size must be at least 1"));
    }
    if test_size > n {
        return Err(Error::invalid(format!("test size {test_size} exceeds corpus size {n}")));
    }
    if test_size == n {
        return Err(Error::invalid("test size leaves no training utterances"));
    }
    let mut rng = seed::rng(seed);
    let folds = (0..k)
        .map(|_| {
            let mut picked = index::sample(&mut rng, n, test_size).into_vec();
            picked.sort_unstable();
            let mut is_test = vec![false; n];
            for &i in &picked {
                is_test[i] = true;
            }
            let id = |i: usize| ids[i].as_ref().to_string();
            Fold {
                test: picked.iter().map(|&i| id(i)).collect(),
                train: (0..n).filter(|&i| !is_test[i]).map(id).collect(),
            }
        })
        .collect();
    Ok(FoldPlan { folds, seed })
}

impl FoldPlan {
    pub fn to_text(&self) -> String {
        let mut out = format!("seed {}\n", self.seed);
        for (i, f) in self.folds.iter().enumerate() {
            writeln!(out, "fold {i} test {}", f.test.join(" ")).unwrap();
            writeln!(out, "fold {i} train {}", f.train.join(" ")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut folds: Vec<Fold> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                [] => {}
                ["seed", s] => seed = Some(s.parse().map_err(|_| Error::parse(i + 1, "bad seed"))?),
                ["fold", idx, kind, rest @ ..] => {
                    let idx: usize = idx.parse().map_err(|_| Error::parse(i + 1, "bad fold index"))?;
                    if idx > folds.len() {
                        return Err(Error::parse(i + 1, "folds out of order"));
                    }
                    if idx == folds.len() {
                        folds.push(Fold { test: Vec::new(), train: Vec::new() });
                    }
                    let ids = rest.iter().map(|s| s.to_string()).collect();
                    match *kind {
                        "test" => folds[idx].test = ids,
                        "train" => folds[idx].train = ids,
                        _ => return Err(Error::parse(i + 1, "expected 'test' or 'train'")),
                    }
                }
                _ => return Err(Error::parse(i + 1, "unrecognized fold line")),
            }
        }
        Ok(FoldPlan { folds, seed: seed.ok_or_else(|| Error::parse(1, "missing seed line"))? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{parse_lexicon, Inventory};

    fn small_model(noise: f64) -> (SynthModel, PronLexicon) {
        let lex = parse_lexicon("AB b aa\nBA aa b\n", &Inventory::british_english()).unwrap();
        let targets = BTreeMap::from([("aa".to_string(), vec![1.0, 2.0]), ("b".to_string(), vec![-3.0, 0.5])]);
        (SynthModel::axis_aligned(vec![0.0, 0.0], targets, noise), lex)
    }

    fn sentences() -> Vec<Vec<String>> {
        vec![vec!["AB".into(), "BA".into()], vec!["BA".into()], vec!["AB".into(), "AB".into(), "BA".into()]]
    }

    #[test]
    fn noiseless_frames_hit_targets() {
        let (model, lex) = small_model(0.0);
        for (utt, segs) in generate_labeled(&model, &lex, &sentences(), 3).unwrap() {
            assert_eq!(segs.first().unwrap().label, SIL);
            assert_eq!(segs.last().unwrap().end, utt.features.len());
            for s in segs {
                let target = model.target(&s.label).unwrap();
                for t in s.start..s.end {
                    assert_eq!(utt.features.frame(t), target.as_slice());
                }
            }
        }
    }

    #[test]
    fn crossfade_blends_only_leading_frames() {
        let (mut model, lex) = small_model(0.0);
        model.crossfade = 2;
        for (utt, segs) in generate_labeled(&model, &lex, &sentences(), 3).unwrap() {
            for (i, s) in segs.iter().enumerate() {
                let target = model.target(&s.label).unwrap();
                let skip = if i == 0 { 0 } else { 2 };
                for t in s.start + skip..s.end {
                    assert_eq!(utt.features.frame(t), target.as_slice());
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (model, lex) = small_model(0.3);
        let a = generate_corpus(&model, &lex, &sentences(), 11).unwrap();
        let b = generate_corpus(&model, &lex, &sentences(), 11).unwrap();
        let c = generate_corpus(&model, &lex, &sentences(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_word_is_named() {
        let (model, lex) = small_model(0.0);
        let err = generate_corpus(&model, &lex, &[vec!["NOPE".into()]], 0).unwrap_err();
        assert!(matches!(err, Error::UnknownWord(w) if w == "NOPE"));
    }

    #[test]
    fn corpus_text_round_trips() {
        let (model, lex) = small_model(0.7);
        let utts = generate_corpus(&model, &lex, &sentences(), 5).unwrap();
        let text = corpus_to_string(&utts).unwrap();
        assert!(text.starts_with("corpus dim 2 rate 25\n"));
        assert_eq!(parse_corpus(&text).unwrap(), utts);
    }

    #[test]
    fn short_frame_line_is_reported() {
        let text = "corpus dim 3 rate 25\nutt a frames 2 words X\n1 2 3\n1 2\n";
        match parse_corpus(text).unwrap_err() {
            Error::CorpusFormat { utt, line, .. } => {
                assert_eq!(utt, "a");
                assert_eq!(line, 4);
            }
            e => panic!("unexpected {e:?}"),
        }
        let text = "corpus dim 2 rate 25\nutt a frames 1 words X\n1 zz\n";
        assert!(matches!(parse_corpus(text), Err(Error::CorpusFormat { line: 3, .. })));
        let text = "corpus dim 2 rate 25\nutt a frames 0 words X\n";
        assert!(matches!(parse_corpus(text), Err(Error::CorpusFormat { .. })));
    }

    #[test]
    fn folds_follow_the_contract() {
        let ids: Vec<String> = (0..200).map(|i| format!("u{i}")).collect();
        let plan = plan_folds_for_ids(&ids, 10, 20, 42).unwrap();
        assert_eq!(plan.folds.len(), 10);
        for f in &plan.folds {
            assert_eq!(f.test.len(), 20);
            assert_eq!(f.train.len(), 180);
            let test: HashSet<_> = f.test.iter().collect();
            assert_eq!(test.len(), 20);
            assert!(f.train.iter().all(|id| !test.contains(id)));
        }
        assert_eq!(plan, plan_folds_for_ids(&ids, 10, 20, 42).unwrap());
        assert_eq!(FoldPlan::parse(&plan.to_text()).unwrap(), plan);
        assert!(plan_folds_for_ids(&ids, 1, 200, 0).is_err());
        assert!(plan_folds_for_ids(&ids, 1, 201, 0).is_err());
    }
}
