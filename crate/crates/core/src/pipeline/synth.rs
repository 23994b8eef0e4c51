use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use crate::corpus::{generate_corpus, random_sentences, SynthModel, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{parse_lexicon, Category, Inventory, P2VMap, PronLexicon};
use crate::seed;

use super::config::SynthConfig;

const DESIGN: &str = include_str!("../../data/synth_design.txt");
const LEXICON: &str = include_str!("../../data/synth_lexicon.txt");

/// The bundled twenty-word lexicon covering all 45 phonemes. Words come in
/// pairs that share a spelling under the true classes, so some homophenes
/// survive even a perfect visual-unit recogniser.
pub fn synthetic_lexicon() -> PronLexicon {
    parse_lexicon(LEXICON, &Inventory::british_english()).expect("bundled lexicon parses")
}

/// The bundled true visual classes of the synthetic speaker.
pub fn synthetic_design() -> P2VMap {
    P2VMap::parse(DESIGN).expect("bundled design parses")
}

/// Phoneme targets drawn around per-class centres. Vowel and consonant
/// classes sit on opposite sides of the first axis; silence is the origin.
pub fn design_model(design: &P2VMap, lex: &PronLexicon, cfg: &SynthConfig, master: u64) -> Result<SynthModel> {
    let inv = lex.inventory();
    design.check_categories(inv)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = seed::substream_rng(master, "synth");
    let dim = cfg.dim;
    let mut draw = |scale: f64, n: usize| -> Vec<f64> { (0..n).map(|_| scale * normal.sample(&mut rng)).collect() };

    let region = |c: Category| {
        let mut v = vec![0.0; dim];
        v[0] = match c {
            Category::Vowel => cfg.category_offset / 2.0,
            Category::Consonant => -cfg.category_offset / 2.0,
        };
        v
    };
    let mut targets = BTreeMap::new();
    let uncovered = lex.used_phonemes().into_iter().filter(|p| !design.covers(p));
    let singletons = design.with_singletons(uncovered)?;
    for unit in singletons.units() {
        let cat = inv
            .category(&unit.phonemes[0])
            .ok_or_else(|| Error::invalid(format!("no category for '{}'", unit.phonemes[0])))?;
        let sep = match cat {
            Category::Vowel => cfg.vowel_separation,
            Category::Consonant => cfg.consonant_separation,
        };
        let centre: Vec<f64> = region(cat).iter().zip(draw(sep, dim)).map(|(a, b)| a + b).collect();
        for p in &unit.phonemes {
            let t = centre.iter().zip(draw(cfg.spread, dim)).map(|(a, b)| a + b).collect();
            targets.insert(p.clone(), t);
        }
    }
    let mut model = SynthModel::axis_aligned(vec![0.0; dim], targets, cfg.noise);
    model.duration = cfg.duration;
    model.silence = Some(cfg.duration);
    model.crossfade = cfg.crossfade;
    model.validate()?;
    Ok(model)
}

/// Sentences and frames of the synthetic speaker.
pub fn synthesize(design: &P2VMap, lex: &PronLexicon, cfg: &SynthConfig, master: u64) -> Result<Vec<Utterance>> {
    let model = design_model(design, lex, cfg, master)?;
    let sentences = random_sentences(lex, cfg.utterances, cfg.words, seed::substream(master, "sentences"));
    if sentences.is_empty() {
        return Err(Error::invalid("no synthetic sentences could be drawn"));
    }
    generate_corpus(&model, lex, &sentences, seed::substream(master, "frames"))
}
