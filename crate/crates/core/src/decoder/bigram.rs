use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SENT_START: &str = "<s>";
pub const SENT_END: &str = "</s>";

pub const DEFAULT_DISCOUNT: f64 = 0.5;

/// Bigram model with absolute discounting and unigram backoff.
///
/// Tokens are indexed `0..V`; index `V` is `<s>` as a history and `</s>`
/// as a successor.
#[derive(Clone, Debug, PartialEq)]
pub struct BigramModel {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    discount: f64,
    /// Successor distribution over `V + 1` outcomes.
    unigram: Vec<f64>,
    /// Per history, explicit probabilities of seen successors.
    seen: Vec<BTreeMap<usize, f64>>,
    /// Per history, the weight on the unigram for unseen successors.
    backoff: Vec<f64>,
}

impl BigramModel {
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    fn history(&self, h: Option<&str>) -> Result<usize> {
        match h {
            None => Ok(self.vocab.len()),
            Some(t) => self.index_of(t).ok_or_else(|| Error::Decode(format!("'{t}' is not in the LM vocabulary"))),
        }
    }

    /// P(w | h) with `None` standing for `<s>` (history) or `</s>` (successor).
    pub fn prob(&self, h: Option<&str>, w: Option<&str>) -> Result<f64> {
        Ok(self.prob_idx(self.history(h)?, self.history(w)?))
    }

    pub fn log_prob(&self, h: Option<&str>, w: Option<&str>) -> Result<f64> {
        Ok(self.prob(h, w)?.ln())
    }

    pub(crate) fn prob_idx(&self, h: usize, w: usize) -> f64 {
        match self.seen[h].get(&w) {
            Some(&p) => p,
            None => self.backoff[h] * self.unigram[w],
        }
    }

    /// Natural-log probability of a whole sentence including `</s>`.
    pub fn sentence_log_prob<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        let mut h = self.vocab.len();
        let mut total = 0.0;
        for t in tokens {
            let w = self.history(Some(t.as_ref()))?;
            total += self.prob_idx(h, w).ln();
            h = w;
        }
        Ok(total + self.prob_idx(h, self.vocab.len()).ln())
    }

    /// ARPA-style text with base-10 logs.
    pub fn to_arpa(&self) -> String {
        let v = self.vocab.len();
        let bigrams: usize = self.seen.iter().map(BTreeMap::len).sum();
        let mut out = format!("\\data\\\ndiscount={}\nngram 1={}\nngram 2={}\n\n\\1-grams:\n", self.discount, v + 2, bigrams);
        let name = |i: usize, hist: bool| -> &str {
            if i < v {
                &self.vocab[i]
            } else if hist {
                SENT_START
            } else {
                SENT_END
            }
        };
        let _ = writeln!(out, "-99\t{SENT_START}\t{}", self.backoff[v].log10());
        for i in 0..v {
            let _ = writeln!(out, "{}\t{}\t{}", self.unigram[i].log10(), self.vocab[i], self.backoff[i].log10());
        }
        let _ = writeln!(out, "{}\t{SENT_END}", self.unigram[v].log10());
        out.push_str("\n\\2-grams:\n");
        for (h, row) in self.seen.iter().enumerate() {
            for (&w, &p) in row {
                let _ = writeln!(out, "{}\t{}\t{}", p.log10(), name(h, true), name(w, false));
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn parse_arpa(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Uni,
            Bi,
            Done,
        }
        let mut section = Section::Header;
        let mut discount = DEFAULT_DISCOUNT;
        let mut uni: Vec<(String, f64, Option<f64>)> = Vec::new();
        let mut bi: Vec<(String, String, f64)> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let no = no + 1;
            if line.is_empty() {
                continue;
            }
            match line {
                "\\data\\" => continue,
                "\\1-grams:" => {
                    section = Section::Uni;
                    continue;
                }
                "\\2-grams:" => {
                    section = Section::Bi;
                    continue;
                }
                "\\end\\" => {
                    section = Section::Done;
                    continue;
                }
                _ => {}
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(no, format!("bad number '{s}'")));
            let f: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::Header => {
                    if let Some(d) = line.strip_prefix("discount=") {
                        discount = num(d)?;
                    }
                }
                Section::Uni => match f.as_slice() {
                    [p, w] => uni.push((w.to_string(), num(p)?, None)),
                    [p, w, b] => uni.push((w.to_string(), num(p)?, Some(num(b)?))),
                    _ => return Err(Error::parse(no, "expected 'logp word [backoff]'")),
                },
                Section::Bi => match f.as_slice() {
                    [p, h, w] => bi.push((h.to_string(), w.to_string(), num(p)?)),
                    _ => return Err(Error::parse(no, "expected 'logp history word'")),
                },
                Section::Done => return Err(Error::parse(no, "text after \\end\\")),
            }
        }
        let vocab: Vec<String> =
            uni.iter().map(|(w, ..)| w.clone()).filter(|w| w != SENT_START && w != SENT_END).collect();
        let v = vocab.len();
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let pos = |w: &str, hist: bool| -> Result<usize> {
            match w {
                SENT_START if hist => Ok(v),
                SENT_END if !hist => Ok(v),
                _ => index.get(w).copied().ok_or_else(|| Error::invalid(format!("unknown LM token '{w}'"))),
            }
        };
        let mut unigram = vec![0.0; v + 1];
        let mut backoff = vec![1.0; v + 1];
        for (w, p, b) in &uni {
            if w != SENT_START {
                unigram[pos(w, false)?] = 10f64.powf(*p);
            }
            if let Some(b) = b {
                backoff[pos(w, true)?] = 10f64.powf(*b);
            }
        }
        let mut seen = vec![BTreeMap::new(); v + 1];
        for (h, w, p) in &bi {
            seen[pos(h, true)?].insert(pos(w, false)?, 10f64.powf(*p));
        }
        if v == 0 {
            return Err(Error::invalid("LM file has an empty vocabulary"));
        }
        Ok(BigramModel { vocab, index, discount, unigram, seen, backoff })
    }

    pub fn write_arpa(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_arpa())?;
        Ok(())
    }

    pub fn read_arpa(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_arpa(&fs::read_to_string(path)?)
    }
}

/// Estimate a bigram model from token sequences; `<s>` and `</s>` are added
/// around each sequence.
pub fn estimate_bigram<S: AsRef<str>>(transcripts: &[Vec<S>], discount: f64) -> Result<BigramModel> {
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::invalid("discount must lie in (0, 1)"));
    }
    let vocab: Vec<String> = transcripts
        .iter()
        .flatten()
        .map(|t| t.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        return Err(Error::invalid("cannot estimate a language model from an empty vocabulary"));
    }
    if let Some(bad) = vocab.iter().find(|t| *t == SENT_START || *t == SENT_END) {
        return Err(Error::invalid(format!("'{bad}' is reserved")));
    }
    let v = vocab.len();
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();

    let mut pair: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); v + 1];
    let mut succ = vec![0u64; v + 1];
    for t in transcripts {
        let mut h = v;
        for tok in t.iter().map(|x| index[x.as_ref()]).chain(std::iter::once(v)) {
            *pair[h].entry(tok).or_insert(0) += 1;
            succ[tok] += 1;
            h = tok;
        }
    }
    let total: u64 = succ.iter().sum();
    let unigram: Vec<f64> = succ.iter().map(|&c| c as f64 / total as f64).collect();

    let mut seen = Vec::with_capacity(v + 1);
    let mut backoff = Vec::with_capacity(v + 1);
    for row in &pair {
        let ch: u64 = row.values().sum();
        let unseen_mass: f64 = (0..=v).filter(|w| !row.contains_key(w)).map(|w| unigram[w]).sum();
        let mut probs = BTreeMap::new();
        if ch == 0 {
            seen.push(probs);
            backoff.push(1.0);
            continue;
        }
        // With nothing left to back off to, keep the maximum-likelihood estimate.
        let d = if unseen_mass > 0.0 { discount } else { 0.0 };
        for (&w, &c) in row {
            probs.insert(w, (c as f64 - d) / ch as f64);
        }
        let reserved = d * row.len() as f64 / ch as f64;
        backoff.push(if unseen_mass > 0.0 { reserved / unseen_mass } else { 0.0 });
        seen.push(probs);
    }
    Ok(BigramModel { vocab, index, discount, unigram, seen, backoff })
}
