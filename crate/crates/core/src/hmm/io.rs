//! Text model files. Values are written in shortest round-trip form, so a
//! set read back from its own text is bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use super::{Component, EmittingState, GmmHmm, HmmSet, StateRef, TieRecord};
use crate::error::{Error, Result};

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

impl HmmSet {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "hmmset dim {} models {}", self.dim(), self.len()).unwrap();
        writeln!(out, "floor {}", join(self.var_floor())).unwrap();
        for m in self.models() {
            let mixtures = m.states.first().map_or(0, |s| s.mixture.len());
            writeln!(out, "model {} states {} mix {}", m.label, m.num_states(), mixtures).unwrap();
            for (i, s) in m.states.iter().enumerate() {
                writeln!(out, "state {}", i + 1).unwrap();
                for (k, c) in s.mixture.iter().enumerate() {
                    writeln!(out, "comp {} weight {}", k + 1, c.weight).unwrap();
                    writeln!(out, "mean {}", join(&c.mean)).unwrap();
                    writeln!(out, "var {}", join(&c.var)).unwrap();
                }
            }
            out.push_str("trans\n");
            for row in &m.trans {
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str("end\n");
        }
        for t in self.tying() {
            write!(out, "tie {} {}", t.owner.model, t.owner.state).unwrap();
            for a in &t.aliases {
                write!(out, " {} {}", a.model, a.state).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
                .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
        };
        let nums = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
            toks.iter()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(line, format!("malformed number '{t}'"))))
                .collect()
        };
        let int = |line: usize, tok: &str| -> Result<usize> {
            tok.parse::<usize>().map_err(|_| Error::parse(line, format!("malformed integer '{tok}'")))
        };

        let (l, h) = next("header")?;
        let (dim, count) = match h.as_slice() {
            ["hmmset", "dim", d, "models", n] => (int(l, d)?, int(l, n)?),
            _ => return Err(Error::parse(l, "expected 'hmmset dim <D> models <N>'")),
        };
        let (l, f) = next("floor")?;
        if f.first() != Some(&"floor") || f.len() != dim + 1 {
            return Err(Error::parse(l, format!("expected 'floor' with {dim} values")));
        }
        let floor = nums(l, &f[1..])?;

        let mut models = Vec::with_capacity(count);
        for _ in 0..count {
            let (l, h) = next("model")?;
            let (label, ns, nm) = match h.as_slice() {
                ["model", label, "states", s, "mix", m] => (label.to_string(), int(l, s)?, int(l, m)?),
                _ => return Err(Error::parse(l, "expected 'model <label> states <S> mix <G>'")),
            };
            let mut states = Vec::with_capacity(ns);
            for _ in 0..ns {
                let (l, s) = next("state")?;
                if s.first() != Some(&"state") {
                    return Err(Error::parse(l, "expected 'state'"));
                }
                let mut mixture = Vec::with_capacity(nm);
                for _ in 0..nm {
                    let (l, c) = next("comp")?;
                    let weight = match c.as_slice() {
                        ["comp", _, "weight", w] => nums(l, &[w])?[0],
                        _ => return Err(Error::parse(l, "expected 'comp <k> weight <w>'")),
                    };
                    let mut vec_line = |tag: &str| -> Result<Vec<f64>> {
                        let (l, v) = next(tag)?;
                        if v.first() != Some(&tag) || v.len() != dim + 1 {
                            return Err(Error::parse(l, format!("expected '{tag}' with {dim} values")));
                        }
                        nums(l, &v[1..])
                    };
                    let mean = vec_line("mean")?;
                    let var = vec_line("var")?;
                    mixture.push(Component { weight, mean, var });
                }
                states.push(EmittingState { mixture });
            }
            let (l, t) = next("trans")?;
            if t.as_slice() != ["trans"] {
                return Err(Error::parse(l, "expected 'trans'"));
            }
            let mut trans = Vec::with_capacity(ns + 2);
            for _ in 0..ns + 2 {
                let (l, row) = next("transition row")?;
                if row.len() != ns + 2 {
                    return Err(Error::parse(l, format!("expected {} transition values", ns + 2)));
                }
                trans.push(nums(l, &row)?);
            }
            let (l, e) = next("end")?;
            if e.as_slice() != ["end"] {
                return Err(Error::parse(l, "expected 'end'"));
            }
            models.push(GmmHmm { label, states, trans });
        }
        let mut set = HmmSet::new(models, floor)?;
        while let Ok((l, t)) = next("tie") {
            if t.first() != Some(&"tie") || t.len() < 5 || (t.len() - 1) % 2 != 0 {
                return Err(Error::parse(l, "expected 'tie <model> <state> <model> <state> ...'"));
            }
            let refs: Vec<StateRef> = t[1..]
                .chunks(2)
                .map(|c| Ok(StateRef::new(c[0], int(l, c[1])?)))
                .collect::<Result<_>>()?;
            set.push_tie(TieRecord { owner: refs[0].clone(), aliases: refs[1..].to_vec() });
        }
        set.check()?;
        Ok(set)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        HmmSet::parse(&std::fs::read_to_string(path)?)
    }
}
