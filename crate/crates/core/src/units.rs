//! Rewriting word transcripts into the label sequences that classifiers are
//! trained on and networks are built from.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lexicon::{Coverage, Granularity, P2VMap, PronLexicon, SIL, SP};

/// The classifier/network pairings that can be decoded, as
/// (classifier units, network units).
pub const PAIRINGS: [(Granularity, Granularity); 6] = [
    (Granularity::Viseme, Granularity::Viseme),
    (Granularity::Viseme, Granularity::Phoneme),
    (Granularity::Phoneme, Granularity::Phoneme),
    (Granularity::Viseme, Granularity::Word),
    (Granularity::Phoneme, Granularity::Word),
    (Granularity::Word, Granularity::Word),
];

pub fn check_pairing(classifier: Granularity, network: Granularity) -> Result<()> {
    if PAIRINGS.contains(&(classifier, network)) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{classifier} classifiers cannot be decoded with a {network} network")))
    }
}

/// Silence handling around and between words in training transcripts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranscriptOptions {
    /// Wrap each transcript in `sil`.
    pub sil: bool,
    /// Put `sp` between words.
    pub sp: bool,
}

impl Default for TranscriptOptions {
    fn default() -> Self {
        TranscriptOptions { sil: true, sp: true }
    }
}

/// Word-to-unit rewriting through a lexicon and an optional P2V map.
#[derive(Clone, Copy, Debug)]
pub struct Expander<'a> {
    pub lex: &'a PronLexicon,
    pub map: Option<&'a P2VMap>,
    pub coverage: Coverage,
}

impl<'a> Expander<'a> {
    pub fn new(lex: &'a PronLexicon, map: Option<&'a P2VMap>, coverage: Coverage) -> Self {
        Expander { lex, map, coverage }
    }

    fn map(&self) -> Result<&'a P2VMap> {
        self.map.ok_or_else(|| Error::invalid("viseme units need a P2V map"))
    }

    fn pron(&self, word: &str) -> Result<&'a [String]> {
        self.lex.pronunciation(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    fn visemes(&self, phonemes: &[String]) -> Result<Vec<String>> {
        let map = self.map()?;
        phonemes.iter().map(|p| map.translate(p, self.coverage).map(str::to_string)).collect()
    }

    /// A word sentence rewritten at granularity `g`.
    pub fn tokens<S: AsRef<str>>(&self, words: &[S], g: Granularity) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for w in words {
            out.extend(self.word_tokens(w.as_ref(), g)?);
        }
        Ok(out)
    }

    fn word_tokens(&self, word: &str, g: Granularity) -> Result<Vec<String>> {
        match g {
            Granularity::Word => {
                self.pron(word)?;
                Ok(vec![word.to_uppercase()])
            }
            Granularity::Phoneme => Ok(self.pron(word)?.to_vec()),
            Granularity::Viseme => self.visemes(self.pron(word)?),
        }
    }

    /// Classifier units spelling one network token.
    pub fn units_of(&self, token: &str, network: Granularity, classifier: Granularity) -> Result<Vec<String>> {
        check_pairing(classifier, network)?;
        match (network, classifier) {
            (Granularity::Word, c) => self.word_tokens(token, c),
            (Granularity::Phoneme, Granularity::Phoneme) => Ok(vec![token.to_string()]),
            (Granularity::Phoneme, _) => self.visemes(&[token.to_string()]),
            _ => Ok(vec![token.to_string()]),
        }
    }

    /// Model labels for embedded training on one word sentence.
    pub fn training_labels<S: AsRef<str>>(
        &self,
        words: &[S],
        classifier: Granularity,
        opts: TranscriptOptions,
    ) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if opts.sil {
            out.push(SIL.to_string());
        }
        for (i, w) in words.iter().enumerate() {
            if i > 0 && opts.sp {
                out.push(SP.to_string());
            }
            out.extend(self.word_tokens(w.as_ref(), classifier)?);
        }
        if opts.sil {
            out.push(SIL.to_string());
        }
        Ok(out)
    }

    /// Every network token of granularity `g` reachable from the lexicon.
    pub fn vocabulary(&self, g: Granularity) -> Result<Vec<String>> {
        let mut set = BTreeSet::new();
        for (w, _) in self.lex.entries() {
            set.extend(self.word_tokens(w, g)?);
        }
        Ok(set.into_iter().collect())
    }

    /// Labels of the models a classifier of granularity `g` needs, sil and
    /// sp included as requested.
    pub fn model_labels(&self, g: Granularity, opts: TranscriptOptions) -> Result<Vec<String>> {
        let mut labels = self.vocabulary(g)?;
        if opts.sil {
            labels.push(SIL.to_string());
        }
        if opts.sp {
            labels.push(SP.to_string());
        }
        Ok(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{parse_lexicon, Inventory};

    fn lex() -> PronLexicon {
        parse_lexicon("TALK t ao k\nDOG d ao g\n", &Inventory::british_english()).unwrap()
    }

    #[test]
    fn pairings() {
        assert!(check_pairing(Granularity::Phoneme, Granularity::Word).is_ok());
        assert!(check_pairing(Granularity::Word, Granularity::Phoneme).is_err());
        assert!(check_pairing(Granularity::Phoneme, Granularity::Viseme).is_err());
    }

    #[test]
    fn expansions() {
        let lex = lex();
        let map = P2VMap::parse("C: t d\nV1: ao\nH: k g\n").unwrap();
        let e = Expander::new(&lex, Some(&map), Coverage::Strict);
        let words = ["talk", "dog"];
        assert_eq!(e.tokens(&words, Granularity::Viseme).unwrap(), vec!["C", "V1", "H", "C", "V1", "H"]);
        assert_eq!(
            e.training_labels(&words, Granularity::Phoneme, TranscriptOptions::default()).unwrap(),
            vec!["sil", "t", "ao", "k", "sp", "d", "ao", "g", "sil"]
        );
        assert_eq!(e.units_of("DOG", Granularity::Word, Granularity::Viseme).unwrap(), vec!["C", "V1", "H"]);
        assert_eq!(e.units_of("ao", Granularity::Phoneme, Granularity::Viseme).unwrap(), vec!["V1"]);
        assert_eq!(e.vocabulary(Granularity::Viseme).unwrap(), vec!["C", "H", "V1"]);
        let partial = P2VMap::parse("C: t\n").unwrap();
        let strict = Expander::new(&lex, Some(&partial), Coverage::Strict);
        assert!(matches!(strict.tokens(&words, Granularity::Viseme), Err(Error::Uncovered(_))));
        let none = Expander::new(&lex, None, Coverage::Strict);
        assert!(none.tokens(&words, Granularity::Viseme).is_err());
    }
}
