//! Symbolic expansion of nested commutators into signed operator words.
//!
//! A d-fold nested commutator expands into exactly 2^d products of the
//! participating symbols, each carrying a sign determined by how many
//! times a factor was commuted past the rest. The two nesting shapes
//! treated here put the observable at opposite ends of the bracket tower,
//! and their expansions share no word, which is what makes comparing the
//! corresponding operator series meaningful term by term.

use crate::error::{Error, Result};
use crate::hilbert::{commutator, OperatorMatrix};
use crate::C64;
use std::collections::HashMap;

/// One product of symbols with its sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedWord {
    /// Either +1 or -1.
    pub sign: i8,
    pub symbols: Vec<char>,
}

impl SignedWord {
    /// The bare word, e.g. "OABC".
    pub fn word(&self) -> String {
        self.symbols.iter().collect()
    }
}

impl std::fmt::Display for SignedWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", if self.sign >= 0 { '+' } else { '-' }, self.word())
    }
}

/// Shape of the bracket tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NestingPattern {
    /// `[[[s0, s1], s2], ...]`: the first symbol (the observable) sits in
    /// the innermost bracket and later symbols attach on the right.
    LeftNested,
    /// `[s0, [s1, [..., s_last]]]`: the last symbol (the observable) sits
    /// innermost and earlier symbols wrap around it.
    RightNested,
}

fn validate_symbols(symbols: &[char]) -> Result<()> {
    if symbols.len() < 2 {
        return Err(Error::TooFewSymbols(symbols.len()));
    }
    for (i, s) in symbols.iter().enumerate() {
        if symbols[i + 1..].contains(s) {
            return Err(Error::DuplicateSymbol(*s));
        }
    }
    Ok(())
}

/// Expands the nested commutator over `symbols` into its 2^(n-1) signed
/// words, sorted lexicographically by word.
pub fn expand_nested_commutator(
    pattern: NestingPattern,
    symbols: &[char],
) -> Result<Vec<SignedWord>> {
    validate_symbols(symbols)?;
    let mut words: Vec<(i8, Vec<char>)>;
    match pattern {
        NestingPattern::LeftNested => {
            words = vec![(1, vec![symbols[0]])];
            for &s in &symbols[1..] {
                let mut next = Vec::with_capacity(words.len() * 2);
                for (sign, w) in &words {
                    let mut right = w.clone();
                    right.push(s);
                    next.push((*sign, right));
                    let mut left = Vec::with_capacity(w.len() + 1);
                    left.push(s);
                    left.extend_from_slice(w);
                    next.push((-sign, left));
                }
                words = next;
            }
        }
        NestingPattern::RightNested => {
            let last = symbols.len() - 1;
            words = vec![(1, vec![symbols[last]])];
            for &s in symbols[..last].iter().rev() {
                let mut next = Vec::with_capacity(words.len() * 2);
                for (sign, w) in &words {
                    let mut left = Vec::with_capacity(w.len() + 1);
                    left.push(s);
                    left.extend_from_slice(w);
                    next.push((*sign, left));
                    let mut right = w.clone();
                    right.push(s);
                    next.push((-sign, right));
                }
                words = next;
            }
        }
    }
    words.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(words.into_iter().map(|(sign, symbols)| SignedWord { sign, symbols }).collect())
}

/// True when the two expansions share no word, disregarding signs.
pub fn word_sets_disjoint(a: &[SignedWord], b: &[SignedWord]) -> bool {
    let set: std::collections::HashSet<&[char]> =
        a.iter().map(|w| w.symbols.as_slice()).collect();
    b.iter().all(|w| !set.contains(w.symbols.as_slice()))
}

/// Sums `sign * product(symbols)` over the words with the given operator
/// assignment for each symbol.
pub fn evaluate_words(
    words: &[SignedWord],
    assignment: &HashMap<char, OperatorMatrix>,
) -> Result<OperatorMatrix> {
    let first = words
        .first()
        .ok_or_else(|| Error::InvalidConfig("no words to evaluate".into()))?;
    let lookup = |c: char| -> Result<&OperatorMatrix> {
        assignment
            .get(&c)
            .ok_or_else(|| Error::InvalidConfig(format!("no operator assigned to symbol '{c}'")))
    };
    let space = lookup(first.symbols[0])?.space().clone();
    let mut total = OperatorMatrix::zeros(&space);
    for w in words {
        let mut product = lookup(w.symbols[0])?.clone();
        for &c in &w.symbols[1..] {
            product = product.mul(lookup(c)?)?;
        }
        total = total.add(&product.scaled(C64::new(w.sign as f64, 0.0)))?;
    }
    Ok(total)
}

/// Evaluates the nested commutator directly, bracket by bracket, with
/// `operators` in the same order as the symbol list it mirrors.
pub fn nested_commutator_matrix(
    pattern: NestingPattern,
    operators: &[OperatorMatrix],
) -> Result<OperatorMatrix> {
    if operators.len() < 2 {
        return Err(Error::TooFewSymbols(operators.len()));
    }
    match pattern {
        NestingPattern::LeftNested => {
            let mut acc = operators[0].clone();
            for op in &operators[1..] {
                acc = commutator(&acc, op)?;
            }
            Ok(acc)
        }
        NestingPattern::RightNested => {
            let last = operators.len() - 1;
            let mut acc = operators[last].clone();
            for op in operators[..last].iter().rev() {
                acc = commutator(op, &acc)?;
            }
            Ok(acc)
        }
    }
}
