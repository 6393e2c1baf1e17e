//! States of the two model families and their terminal samples.
//!
//! Every state carries its time index explicitly: kernels and value
//! functions are time-inhomogeneous, so a bare token vector or scalar is
//! ambiguous.

use crate::error::{Error, Result};

pub type TokenId = u8;

/// One slot of a masked sequence: either a concrete token in `0..K` or the
/// absorbing mask symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Mask,
    Tok(TokenId),
}

impl Token {
    pub fn is_mask(self) -> bool {
        matches!(self, Token::Mask)
    }
}

/// Masked token sequence at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SequenceState {
    pub tokens: Vec<Token>,
    pub t: usize,
}

impl SequenceState {
    pub fn all_masked(len: usize, t: usize) -> Self {
        SequenceState { tokens: vec![Token::Mask; len], t }
    }

    pub fn from_terminal(tokens: &[TokenId], t: usize) -> Self {
        SequenceState { tokens: tokens.iter().map(|&k| Token::Tok(k)).collect(), t }
    }

    pub fn mask_count(&self) -> usize {
        self.tokens.iter().filter(|tok| tok.is_mask()).count()
    }

    /// Terminal token vector; errors while any position is still masked.
    pub fn terminal_tokens(&self) -> Result<Vec<TokenId>> {
        self.tokens
            .iter()
            .map(|tok| match tok {
                Token::Tok(k) => Ok(*k),
                Token::Mask => Err(Error::invalid("state still contains mask tokens")),
            })
            .collect()
    }

    /// Enumeration index in base K+1, digit K standing for the mask.
    /// Total order used by dense tables and exact dynamic programming.
    pub fn index(&self, k: usize) -> usize {
        let base = k + 1;
        let mut idx = 0usize;
        for tok in &self.tokens {
            let digit = match tok {
                Token::Tok(id) => *id as usize,
                Token::Mask => k,
            };
            idx = idx * base + digit;
        }
        idx
    }

    /// Inverse of [`SequenceState::index`].
    pub fn from_index(mut idx: usize, k: usize, len: usize, t: usize) -> Self {
        let base = k + 1;
        let mut tokens = vec![Token::Mask; len];
        for slot in tokens.iter_mut().rev() {
            let digit = idx % base;
            idx /= base;
            *slot = if digit == k { Token::Mask } else { Token::Tok(digit as TokenId) };
        }
        SequenceState { tokens, t }
    }
}

/// 1-D continuous state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarState {
    pub value: f64,
    pub t: usize,
}

impl ScalarState {
    pub fn new(value: f64, t: usize) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("scalar state must be finite"));
        }
        Ok(ScalarState { value, t })
    }
}

/// A state of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Seq(SequenceState),
    Scalar(ScalarState),
}

impl State {
    pub fn time(&self) -> usize {
        match self {
            State::Seq(s) => s.t,
            State::Scalar(s) => s.t,
        }
    }

    pub fn as_seq(&self) -> Result<&SequenceState> {
        match self {
            State::Seq(s) => Ok(s),
            State::Scalar(_) => Err(Error::invalid("expected a sequence state")),
        }
    }

    pub fn as_scalar(&self) -> Result<&ScalarState> {
        match self {
            State::Scalar(s) => Ok(s),
            State::Seq(_) => Err(Error::invalid("expected a scalar state")),
        }
    }

    /// Terminal sample of a time-0 state.
    pub fn terminal(&self) -> Result<Sample> {
        match self {
            State::Seq(s) => Ok(Sample::Seq(s.terminal_tokens()?)),
            State::Scalar(s) => Ok(Sample::Scalar(s.value)),
        }
    }
}

/// A terminal (time-0) sample: a complete token sequence or a scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Seq(Vec<TokenId>),
    Scalar(f64),
}

impl Sample {
    pub fn as_seq(&self) -> Result<&[TokenId]> {
        match self {
            Sample::Seq(s) => Ok(s),
            Sample::Scalar(_) => Err(Error::invalid("expected a sequence sample")),
        }
    }

    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Sample::Scalar(v) => Ok(*v),
            Sample::Seq(_) => Err(Error::invalid("expected a scalar sample")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let k = 3;
        let len = 4;
        for idx in 0..(k + 1usize).pow(len as u32) {
            let s = SequenceState::from_index(idx, k, len, 2);
            assert_eq!(s.index(k), idx);
            assert_eq!(s.t, 2);
        }
    }

    #[test]
    fn terminal_rejects_masks() {
        let s = SequenceState::all_masked(2, 0);
        assert!(s.terminal_tokens().is_err());
        let s = SequenceState::from_terminal(&[0, 1], 0);
        assert_eq!(s.terminal_tokens().unwrap(), vec![0, 1]);
    }
}
