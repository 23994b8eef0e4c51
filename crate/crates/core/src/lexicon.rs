//! Pronunciation dictionaries, the phoneme inventory, phoneme-to-visual-unit
//! maps and homophene analysis.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Label of the three-state silence model bracketing every utterance.
pub const SIL: &str = "sil";
/// Label of the single-state short-pause model placed between words.
pub const SP: &str = "sp";

/// Labels that belong to every unit vocabulary and are never mapped.
pub fn is_reserved(label: &str) -> bool {
    label == SIL || label == SP
}

const DEFAULT_INVENTORY: &str = include_str!("../data/inventory.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Vowel,
    Consonant,
}

impl Category {
    pub fn symbol(self) -> &'static str {
        match self {
            Category::Vowel => "V",
            Category::Consonant => "C",
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" | "vowel" => Ok(Category::Vowel),
            "C" | "c" | "consonant" => Ok(Category::Consonant),
            other => Err(Error::invalid(format!("unknown phoneme category '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phone {
    pub label: String,
    pub category: Category,
}

/// An ordered set of phonemes with their vowel/consonant classes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Inventory {
    phones: Vec<Phone>,
    index: HashMap<String, usize>,
}

impl Inventory {
    pub fn new(phones: impl IntoIterator<Item = Phone>) -> Result<Self> {
        let mut inv = Inventory::default();
        for phone in phones {
            if phone.label.is_empty() {
                return Err(Error::invalid("empty phoneme label"));
            }
            if is_reserved(&phone.label) {
                return Err(Error::invalid(format!("'{}' is a reserved label", phone.label)));
            }
            if inv.index.contains_key(&phone.label) {
                return Err(Error::invalid(format!("duplicate phoneme '{}'", phone.label)));
            }
            inv.index.insert(phone.label.clone(), inv.phones.len());
            inv.phones.push(phone);
        }
        Ok(inv)
    }

    /// Parse "label V|C" lines; ";;;" starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phones = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(label), Some(cat), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(i + 1, "expected '<label> <V|C>'"));
            };
            let category = cat.parse().map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
            phones.push(Phone { label: label.to_string(), category });
        }
        Inventory::new(phones).map_err(|e| Error::parse(0, e.to_string()))
    }

    /// The bundled 45-phoneme British English set.
    pub fn british_english() -> Self {
        Inventory::parse(DEFAULT_INVENTORY).expect("bundled inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn phones(&self) -> &[Phone] {
        &self.phones
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.phones.iter().map(|p| p.label.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn category(&self, label: &str) -> Option<Category> {
        self.index.get(label).map(|&i| self.phones[i].category)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.phones {
            out.push_str(&p.label);
            out.push(' ');
            out.push_str(p.category.symbol());
            out.push('\n');
        }
        out
    }
}

/// The unit vocabulary a transcript is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Granularity {
    Word,
    Phoneme,
    Viseme,
}

impl Granularity {
    pub fn name(self) -> &'static str {
        match self {
            Granularity::Word => "word",
            Granularity::Phoneme => "phoneme",
            Granularity::Viseme => "viseme",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "word" | "words" => Ok(Granularity::Word),
            "phoneme" | "phonemes" | "phone" => Ok(Granularity::Phoneme),
            "viseme" | "visemes" | "visual" | "visual-unit" | "unit" => Ok(Granularity::Viseme),
            other => Err(Error::invalid(format!("unknown unit granularity '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub granularity: Granularity,
    pub labels: Vec<String>,
}

impl Transcript {
    pub fn new(granularity: Granularity, labels: Vec<String>) -> Self {
        Transcript { granularity, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Word to phoneme-sequence dictionary, one pronunciation per word.
#[derive(Clone, Debug)]
pub struct PronLexicon {
    entries: BTreeMap<String, Vec<String>>,
    inventory: Inventory,
    warnings: Vec<String>,
}

impl PronLexicon {
    /// Build a lexicon from (word, pronunciation) pairs. Later duplicates
    /// are dropped with a warning.
    pub fn from_entries<W, P, S>(entries: W, inventory: Inventory) -> Result<Self>
    where
        W: IntoIterator<Item = (S, P)>,
        P: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = PronLexicon { entries: BTreeMap::new(), inventory, warnings: Vec::new() };
        for (i, (word, pron)) in entries.into_iter().enumerate() {
            let pron: Vec<String> = pron.into_iter().map(|p| p.as_ref().to_string()).collect();
            lex.insert(i + 1, word.as_ref(), pron)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, line: usize, word: &str, pron: Vec<String>) -> Result<()> {
        if pron.is_empty() {
            return Err(Error::parse(line, format!("empty pronunciation for '{word}'")));
        }
        if let Some(bad) = pron.iter().find(|p| !self.inventory.contains(p)) {
            return Err(Error::parse(line, format!("unknown phoneme '{bad}'")));
        }
        let word = word.to_uppercase();
        if self.entries.contains_key(&word) {
            let msg = format!("line {line}: duplicate pronunciation for {word} ignored");
            log::warn!("{msg}");
            self.warnings.push(msg);
            return Ok(());
        }
        self.entries.insert(word, pron);
        Ok(())
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pronunciation(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).or_else(|| self.entries.get(&word.to_uppercase())).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    /// Phonemes used by at least one entry, sorted.
    pub fn used_phonemes(&self) -> BTreeSet<String> {
        self.entries.values().flatten().cloned().collect()
    }

    /// Concatenated pronunciations of `words`.
    pub fn phoneme_transcript<S: AsRef<str>>(&self, words: &[S]) -> Result<Transcript> {
        let mut labels = Vec::new();
        for w in words {
            let pron = self
                .pronunciation(w.as_ref())
                .ok_or_else(|| Error::UnknownWord(w.as_ref().to_string()))?;
            labels.extend(pron.iter().cloned());
        }
        Ok(Transcript::new(Granularity::Phoneme, labels))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, p) in &self.entries {
            out.push_str(w);
            for ph in p {
                out.push(' ');
                out.push_str(ph);
            }
            out.push('\n');
        }
        out
    }
}

/// Parse a "WORD PH1 PH2 ..." dictionary against `inventory`.
pub fn parse_lexicon(text: &str, inventory: &Inventory) -> Result<PronLexicon> {
    let mut lex =
        PronLexicon { entries: BTreeMap::new(), inventory: inventory.clone(), warnings: Vec::new() };
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;;") {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let word = fields.next().expect("non-empty line has a field");
        let pron: Vec<String> = fields.map(str::to_string).collect();
        lex.insert(i + 1, word, pron)?;
    }
    Ok(lex)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisualUnit {
    pub label: String,
    pub phonemes: Vec<String>,
}

/// A labeled partition of phonemes into visual units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct P2VMap {
    units: Vec<VisualUnit>,
    lookup: HashMap<String, usize>,
}

/// What to do with phonemes a map does not cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Coverage {
    /// Uncovered phonemes are an error.
    Strict,
    /// Uncovered phonemes behave as singleton units named after themselves.
    #[default]
    Lenient,
}

impl P2VMap {
    pub fn new(units: Vec<VisualUnit>) -> Result<Self> {
        let mut lookup = HashMap::new();
        let mut labels = BTreeSet::new();
        for (i, unit) in units.iter().enumerate() {
            if unit.label.is_empty() || is_reserved(&unit.label) {
                return Err(Error::InvalidMap(format!("bad unit label '{}'", unit.label)));
            }
            if !labels.insert(unit.label.as_str()) {
                return Err(Error::InvalidMap(format!("duplicate unit label '{}'", unit.label)));
            }
            if unit.phonemes.is_empty() {
                return Err(Error::InvalidMap(format!("unit '{}' is empty", unit.label)));
            }
            for ph in &unit.phonemes {
                if lookup.insert(ph.clone(), i).is_some() {
                    return Err(Error::InvalidMap(format!("phoneme '{ph}' is in two units")));
                }
            }
        }
        Ok(P2VMap { units, lookup })
    }

    /// Every phoneme is its own unit, labeled with the phoneme itself.
    pub fn identity<S: AsRef<str>>(phonemes: impl IntoIterator<Item = S>) -> Result<Self> {
        P2VMap::new(
            phonemes
                .into_iter()
                .map(|p| VisualUnit { label: p.as_ref().to_string(), phonemes: vec![p.as_ref().to_string()] })
                .collect(),
        )
    }

    /// Parse "unitLabel: ph1 ph2 ..." lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut units = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with(";;;") {
                continue;
            }
            let (label, rest) =
                trimmed.split_once(':').ok_or_else(|| Error::parse(i + 1, "expected 'unit: phonemes'"))?;
            let phonemes: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            units.push(VisualUnit { label: label.trim().to_string(), phonemes });
        }
        P2VMap::new(units)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for u in &self.units {
            out.push_str(&u.label);
            out.push(':');
            for p in &u.phonemes {
                out.push(' ');
                out.push_str(p);
            }
            out.push('\n');
        }
        out
    }

    pub fn size(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[VisualUnit] {
        &self.units
    }

    pub fn unit_labels(&self) -> impl Iterator<Item = &str> {
        self.units.iter().map(|u| u.label.as_str())
    }

    pub fn unit_of(&self, phoneme: &str) -> Option<&str> {
        self.lookup.get(phoneme).map(|&i| self.units[i].label.as_str())
    }

    pub fn unit(&self, label: &str) -> Option<&VisualUnit> {
        self.units.iter().find(|u| u.label == label)
    }

    pub fn covers(&self, phoneme: &str) -> bool {
        self.lookup.contains_key(phoneme)
    }

    pub fn phonemes(&self) -> impl Iterator<Item = &str> {
        self.units.iter().flat_map(|u| u.phonemes.iter().map(String::as_str))
    }

    /// Reject units mixing vowels and consonants or holding unknown phonemes.
    pub fn check_categories(&self, inventory: &Inventory) -> Result<()> {
        for u in &self.units {
            let mut cats = BTreeSet::new();
            for p in &u.phonemes {
                let cat = inventory
                    .category(p)
                    .ok_or_else(|| Error::InvalidMap(format!("unit '{}': unknown phoneme '{p}'", u.label)))?;
                cats.insert(cat);
            }
            if cats.len() > 1 {
                return Err(Error::InvalidMap(format!("unit '{}' mixes vowels and consonants", u.label)));
            }
        }
        Ok(())
    }

    /// Append a singleton unit for each phoneme the map does not cover.
    pub fn with_singletons<S: AsRef<str>>(&self, phonemes: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut units = self.units.clone();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for p in phonemes {
            let p = p.as_ref();
            if !self.covers(p) && !is_reserved(p) && seen.insert(p.to_string()) {
                units.push(VisualUnit { label: p.to_string(), phonemes: vec![p.to_string()] });
            }
        }
        P2VMap::new(units)
    }

    /// Map one phoneme (or reserved label) to its unit label.
    pub fn translate<'a>(&'a self, phoneme: &'a str, coverage: Coverage) -> Result<&'a str> {
        if is_reserved(phoneme) {
            return Ok(phoneme);
        }
        match (self.unit_of(phoneme), coverage) {
            (Some(u), _) => Ok(u),
            (None, Coverage::Lenient) => Ok(phoneme),
            (None, Coverage::Strict) => Err(Error::Uncovered(phoneme.to_string())),
        }
    }
}

/// Rewrite a phoneme transcript into visual units.
pub fn phonemes_to_units(p: &Transcript, map: &P2VMap, coverage: Coverage) -> Result<Transcript> {
    if p.granularity != Granularity::Phoneme {
        return Err(Error::invalid(format!("expected a phoneme transcript, got {}", p.granularity)));
    }
    let labels = p
        .labels
        .iter()
        .map(|ph| map.translate(ph, coverage).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    Ok(Transcript::new(Granularity::Viseme, labels))
}

/// The ten-unit map published for RMAV speaker 1, in this crate's labels.
pub fn rmav_speaker1_map() -> P2VMap {
    P2VMap::parse(include_str!("../data/speaker1_p2v10.txt")).expect("bundled map parses")
}

/// Words grouped by their visual-unit transcript.
#[derive(Clone, Debug, Default)]
pub struct HomopheneGroups {
    groups: BTreeMap<Vec<String>, Vec<String>>,
    by_word: HashMap<String, Vec<String>>,
}

impl HomopheneGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], &[String])> {
        self.groups.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Words sharing `word`'s visual transcript, `word` included.
    pub fn group_of(&self, word: &str) -> Option<&[String]> {
        self.by_word.get(word).and_then(|key| self.groups.get(key)).map(Vec::as_slice)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.values().map(Vec::len).collect()
    }
}

pub fn homophene_groups(lex: &PronLexicon, map: &P2VMap, coverage: Coverage) -> Result<HomopheneGroups> {
    let mut out = HomopheneGroups::default();
    for (word, pron) in lex.entries() {
        let key = pron
            .iter()
            .map(|ph| map.translate(ph, coverage).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        out.groups.entry(key.clone()).or_default().push(word.to_string());
        out.by_word.insert(word.to_string(), key);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuessBaselines {
    /// 1/M for a map of M units.
    pub unit_chance: f64,
    /// Expected word accuracy when guessing uniformly among the homophenes
    /// of the true word, averaged over the lexicon.
    pub homophene_ceiling: f64,
}

pub fn guess_baselines(lex: &PronLexicon, map: &P2VMap, coverage: Coverage) -> Result<GuessBaselines> {
    if map.size() == 0 {
        return Err(Error::InvalidMap("empty map".into()));
    }
    if lex.is_empty() {
        return Err(Error::invalid("homophene ceiling is undefined for an empty lexicon"));
    }
    let groups = homophene_groups(lex, map, coverage)?;
    let total: f64 = lex
        .words()
        .map(|w| 1.0 / groups.group_of(w).map_or(1, <[String]>::len) as f64)
        .sum();
    Ok(GuessBaselines {
        unit_chance: 1.0 / map.size() as f64,
        homophene_ceiling: total / lex.len() as f64,
    })
}
