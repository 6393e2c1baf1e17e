//! Explicit probability tables over terminal sequences, Gaussian mixture
//! specs, and the shared text formats for both.
//!
//! Tables are the desk-scale stand-in for data distributions, model
//! marginals, and tilted targets, so they are validated strictly: mass must
//! be non-negative, sum to one within 1e-9, and samples must be unique.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::state::TokenId;

pub const PROB_SUM_TOL: f64 = 1e-9;

/// Character shown for a masked position in serialized state keys.
pub const MASK_CHAR: char = '*';

/// Token alphabet declared by the experiment; maps single characters to
/// token ids and back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
}

impl Alphabet {
    pub fn new(spec: &str) -> Result<Self> {
        let chars: Vec<char> = spec.chars().collect();
        if chars.len() < 2 {
            return Err(Error::invalid("alphabet needs at least 2 tokens"));
        }
        if chars.len() > TokenId::MAX as usize {
            return Err(Error::invalid("alphabet too large"));
        }
        for (i, &c) in chars.iter().enumerate() {
            if c.is_whitespace() || c == '#' || c == ',' || c == MASK_CHAR {
                return Err(Error::invalid(format!("alphabet char {c:?} is reserved")));
            }
            if chars[..i].contains(&c) {
                return Err(Error::invalid(format!("duplicate alphabet char {c:?}")));
            }
        }
        Ok(Alphabet { chars })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn token_of(&self, c: char) -> Result<TokenId> {
        self.chars
            .iter()
            .position(|&a| a == c)
            .map(|i| i as TokenId)
            .ok_or_else(|| Error::Parse(format!("char {c:?} not in alphabet")))
    }

    pub fn char_of(&self, id: TokenId) -> Result<char> {
        self.chars
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("token id {id} outside alphabet")))
    }

    pub fn encode(&self, s: &str) -> Result<Vec<TokenId>> {
        s.chars().map(|c| self.token_of(c)).collect()
    }

    pub fn decode(&self, tokens: &[TokenId]) -> Result<String> {
        tokens.iter().map(|&id| self.char_of(id)).collect()
    }
}

/// Explicit probability table over complete token sequences of a fixed
/// shape (K tokens, length L). Entries are kept sorted by sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    k: usize,
    len: usize,
    entries: Vec<(Vec<TokenId>, f64)>,
}

impl DistributionTable {
    pub fn new(k: usize, len: usize, mut entries: Vec<(Vec<TokenId>, f64)>) -> Result<Self> {
        if k < 2 || len == 0 {
            return Err(Error::Distribution("need K >= 2 and L >= 1".into()));
        }
        if entries.is_empty() {
            return Err(Error::Distribution("empty table".into()));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut sum = 0.0;
        for (seq, p) in &entries {
            if seq.len() != len {
                return Err(Error::Distribution("sequence length mismatch".into()));
            }
            if seq.iter().any(|&id| id as usize >= k) {
                return Err(Error::Distribution("token id out of range".into()));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::Distribution("probabilities must be finite and >= 0".into()));
            }
            sum += p;
        }
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Distribution("duplicate sample".into()));
            }
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Distribution(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(DistributionTable { k, len, entries })
    }

    /// Build from non-negative weights, normalizing exactly.
    pub fn from_weights(k: usize, len: usize, weights: Vec<(Vec<TokenId>, f64)>) -> Result<Self> {
        let total: f64 = weights.iter().map(|(_, w)| *w).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Distribution("weights must have positive finite total".into()));
        }
        Self::new(k, len, weights.into_iter().map(|(s, w)| (s, w / total)).collect())
    }

    /// Empirical frequency table of drawn terminal sequences.
    pub fn from_samples<'a, I>(k: usize, len: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [TokenId]>,
    {
        let mut counts: BTreeMap<Vec<TokenId>, usize> = BTreeMap::new();
        let mut n = 0usize;
        for s in samples {
            *counts.entry(s.to_vec()).or_insert(0) += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::Distribution("no samples".into()));
        }
        Self::new(
            k,
            len,
            counts.into_iter().map(|(s, c)| (s, c as f64 / n as f64)).collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seq_len(&self) -> usize {
        self.len
    }

    pub fn entries(&self) -> &[(Vec<TokenId>, f64)] {
        &self.entries
    }

    pub fn prob(&self, seq: &[TokenId]) -> f64 {
        match self.entries.binary_search_by(|(s, _)| s.as_slice().cmp(seq)) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    /// Parse the `<sequence> <probability>` text format.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut entries = Vec::new();
        let mut len = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (seq_s, p_s) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `<sequence> <probability>`",
                        lineno + 1
                    )))
                }
            };
            let seq = alphabet.encode(seq_s)?;
            let p: f64 = p_s
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad probability {p_s:?}", lineno + 1)))?;
            if let Some(l) = len {
                if seq.len() != l {
                    return Err(Error::Parse(format!("line {}: length mismatch", lineno + 1)));
                }
            } else {
                len = Some(seq.len());
            }
            entries.push((seq, p));
        }
        let len = len.ok_or_else(|| Error::Parse("empty table file".into()))?;
        Self::new(alphabet.len(), len, entries)
    }

    pub fn load(path: &Path, alphabet: &Alphabet) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, alphabet)
    }

    pub fn render(&self, alphabet: &Alphabet) -> Result<String> {
        let mut out = String::new();
        for (seq, p) in &self.entries {
            let _ = writeln!(out, "{} {}", alphabet.decode(seq)?, p);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path, alphabet: &Alphabet) -> Result<()> {
        std::fs::write(path, self.render(alphabet)?)?;
        Ok(())
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// 1-D Gaussian mixture used as the continuous family's data distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Distribution("empty mixture".into()));
        }
        let mut sum = 0.0;
        for c in &components {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(Error::Distribution("mixture weights must be >= 0".into()));
            }
            if !c.mean.is_finite() || !(c.std.is_finite() && c.std > 0.0) {
                return Err(Error::Distribution("mixture components need finite mean, std > 0".into()));
            }
            sum += c.weight;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Distribution(format!("mixture weights sum to {sum}, not 1")));
        }
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Parse the `<weight> <mean> <stddev>` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut components = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `<weight> <mean> <stddev>`",
                    lineno + 1
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", lineno + 1)))
            };
            components.push(MixtureComponent {
                weight: parse(fields[0])?,
                mean: parse(fields[1])?,
                std: parse(fields[2])?,
            });
        }
        Self::new(components)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ac() -> Alphabet {
        Alphabet::new("AC").unwrap()
    }

    #[test]
    fn table_round_trips_through_text() {
        let t = DistributionTable::new(2, 2, vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap();
        let text = t.render(&ac()).unwrap();
        let back = DistributionTable::parse(&text, &ac()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn table_rejects_bad_mass() {
        assert!(DistributionTable::new(2, 2, vec![(vec![0, 0], 0.5), (vec![1, 1], 0.6)]).is_err());
        assert!(DistributionTable::new(2, 2, vec![(vec![0, 0], 1.5), (vec![1, 1], -0.5)]).is_err());
        assert!(DistributionTable::new(2, 2, vec![(vec![0, 0], 0.5), (vec![0, 0], 0.5)]).is_err());
        assert!(DistributionTable::new(2, 1, vec![]).is_err());
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let text = "# data\nAA 0.5   # half\n\nCC 0.5\n";
        let t = DistributionTable::parse(text, &ac()).unwrap();
        assert_eq!(t.prob(&[0, 0]), 0.5);
        assert_eq!(t.prob(&[0, 1]), 0.0);
    }

    #[test]
    fn alphabet_rejects_reserved_chars() {
        assert!(Alphabet::new("A").is_err());
        assert!(Alphabet::new("AA").is_err());
        assert!(Alphabet::new("A C").is_err());
        assert!(Alphabet::new("A#").is_err());
        assert!(Alphabet::new("A*").is_err());
    }

    #[test]
    fn mixture_parse_validates_weights() {
        let m = GaussianMixture::parse("0.5 -1 1\n0.5 1 0.5\n").unwrap();
        assert_eq!(m.components().len(), 2);
        assert!(GaussianMixture::parse("0.5 0 1\n0.6 1 1\n").is_err());
        assert!(GaussianMixture::parse("1.0 0 0\n").is_err());
    }
}
