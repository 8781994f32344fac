use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Forall,
    Exists,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Natural,
    Real,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantifier {
    pub polarity: Polarity,
    pub sort: Sort,
    pub var: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaPrefix {
    pub quantifiers: Vec<Quantifier>,
    pub matrix: Option<String>,
}

impl FormulaPrefix {
    pub fn new(quantifiers: Vec<Quantifier>) -> Self {
        FormulaPrefix { quantifiers, matrix: None }
    }

    /// Parses e.g. `∀ρ:ℝ ∃m:ℕ ∀n:ℕ [matrix]` or `forall rho:R exists m:N [phi]`.
    pub fn parse(src: &str) -> Result<Self> {
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        let err = |pos: usize, msg: &str| Error::Parse { position: pos + 1, message: msg.to_string() };
        let skip_ws = |i: &mut usize| {
            while *i < chars.len() && chars[*i].is_whitespace() {
                *i += 1;
            }
        };
        let word_at = |i: usize, w: &str| -> bool {
            let wc: Vec<char> = w.chars().collect();
            chars.len() >= i + wc.len() && chars[i..i + wc.len()] == wc[..]
        };
        let mut quantifiers = Vec::new();
        let mut matrix = None;
        loop {
            skip_ws(&mut i);
            if i >= chars.len() {
                break;
            }
            if chars[i] == '[' {
                let close = chars[i..].iter().position(|&c| c == ']').ok_or_else(|| err(i, "unclosed matrix"))?;
                matrix = Some(chars[i + 1..i + close].iter().collect::<String>().trim().to_string());
                i += close + 1;
                skip_ws(&mut i);
                if i < chars.len() {
                    return Err(err(i, "text after the matrix"));
                }
                break;
            }
            let start = i;
            let polarity = if chars[i] == '∀' {
                i += 1;
                Polarity::Forall
            } else if chars[i] == '∃' {
                i += 1;
                Polarity::Exists
            } else if word_at(i, "forall") {
                i += 6;
                Polarity::Forall
            } else if word_at(i, "exists") {
                i += 6;
                Polarity::Exists
            } else {
                return Err(err(i, "expected a quantifier"));
            };
            skip_ws(&mut i);
            let vstart = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            if i == vstart {
                return Err(err(i, "expected a variable"));
            }
            let var: String = chars[vstart..i].iter().collect();
            skip_ws(&mut i);
            if i >= chars.len() || chars[i] != ':' {
                return Err(err(i, "expected ':' and a sort"));
            }
            i += 1;
            skip_ws(&mut i);
            let sstart = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '[' {
                i += 1;
            }
            let sort_txt: String = chars[sstart..i].iter().collect();
            let sort = match sort_txt.as_str() {
                "ℕ" | "N" | "nat" | "ω" => Sort::Natural,
                "ℝ" | "R" | "real" | "ℕ^ℕ" | "N^N" | "ω^ω" => Sort::Real,
                _ => return Err(err(sstart, "unknown sort")),
            };
            let _ = start;
            quantifiers.push(Quantifier { polarity, sort, var });
        }
        Ok(FormulaPrefix { quantifiers, matrix })
    }
}

impl fmt::Display for FormulaPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .quantifiers
            .iter()
            .map(|q| {
                let p = if q.polarity == Polarity::Forall { '∀' } else { '∃' };
                let s = if q.sort == Sort::Real { 'ℝ' } else { 'ℕ' };
                format!("{p}{}:{s}", q.var)
            })
            .collect();
        write!(f, "{} [{}]", parts.join(" "), self.matrix.as_deref().unwrap_or("φ"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierMode {
    Strict,
    AsWritten,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pointclass {
    Sigma,
    Pi,
    Delta,
}

/// `order` 0 is arithmetical, 1 analytical (projective over reals).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: Pointclass,
    pub order: u8,
    pub level: usize,
}

impl Classification {
    pub fn ascii(&self) -> String {
        let c = match self.class {
            Pointclass::Sigma => "Sigma",
            Pointclass::Pi => "Pi",
            Pointclass::Delta => "Delta",
        };
        format!("{c}^{}_{}", self.order, self.level)
    }
}

fn subscript(n: usize) -> String {
    n.to_string().chars().map(|c| char::from_u32(0x2080 + c.to_digit(10).unwrap()).unwrap()).collect()
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.class {
            Pointclass::Sigma => 'Σ',
            Pointclass::Pi => 'Π',
            Pointclass::Delta => 'Δ',
        };
        let sup = if self.order == 0 { '⁰' } else { '¹' };
        write!(f, "{c}{sup}{}", subscript(self.level))
    }
}

fn class_of(p: Polarity) -> Pointclass {
    match p {
        Polarity::Forall => Pointclass::Pi,
        Polarity::Exists => Pointclass::Sigma,
    }
}

/// Number of maximal same-polarity runs and the leading polarity.
fn blocks(ps: impl Iterator<Item = Polarity>) -> (usize, Option<Polarity>) {
    let mut count = 0;
    let mut first = None;
    let mut prev = None;
    for p in ps {
        if prev != Some(p) {
            count += 1;
        }
        first.get_or_insert(p);
        prev = Some(p);
    }
    (count, first)
}

/// Strict: number quantifiers never raise the projective level, so only the
/// real quantifiers count. As written: leading number quantifiers are absorbed,
/// every run from the first to the last real quantifier counts, and the first
/// alternation after the last real quantifier adds one more level.
pub fn classify_prefix(f: &FormulaPrefix, mode: ClassifierMode) -> Classification {
    let qs = &f.quantifiers;
    let has_real = qs.iter().any(|q| q.sort == Sort::Real);
    if !has_real {
        let (k, first) = blocks(qs.iter().map(|q| q.polarity));
        return match first {
            None => Classification { class: Pointclass::Delta, order: 0, level: 0 },
            Some(p) => Classification { class: class_of(p), order: 0, level: k },
        };
    }
    match mode {
        ClassifierMode::Strict => {
            let (k, first) = blocks(qs.iter().filter(|q| q.sort == Sort::Real).map(|q| q.polarity));
            Classification { class: class_of(first.unwrap()), order: 1, level: k }
        }
        ClassifierMode::AsWritten => {
            let pol: Vec<Polarity> = qs.iter().map(|q| q.polarity).collect();
            let first_real = qs.iter().position(|q| q.sort == Sort::Real).unwrap();
            let last_real = qs.iter().rposition(|q| q.sort == Sort::Real).unwrap();
            let (through, first) = blocks(pol[first_real..=last_real].iter().copied());
            let raised = pol[last_real + 1..].iter().any(|&p| p != pol[last_real]);
            Classification { class: class_of(first.unwrap()), order: 1, level: through + raised as usize }
        }
    }
}
