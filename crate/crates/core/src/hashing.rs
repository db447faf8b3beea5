//! Anonymizing codes `ψ: V → {1..m}`.
//!
//! Simulations use [`HashAssignment`], an idealized uniform random code per
//! vertex. Field surveys can use [`TelefunkenCode`], a many-to-one code
//! built from trailing phone digits.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::multiset::Multiset;
use crate::seed;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("hash space size must be at least 1")]
    EmptyHashSpace,
    #[error("vertex {0} has no assigned code")]
    Unassigned(usize),
    #[error("phone number contains non-digit character {0:?}")]
    NonDigit(char),
    #[error("phone number has {have} digits, need {need}")]
    TooShort { have: usize, need: usize },
    #[error("telefunken digit count must be between 1 and 15, got {0}")]
    DigitCount(usize),
}

/// A materialized uniform random code per vertex, values in `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashAssignment {
    m: u32,
    table: BTreeMap<usize, u32>,
}

impl HashAssignment {
    /// Hash space size `|H|`.
    pub fn space(&self) -> u32 {
        self.m
    }

    pub fn code(&self, v: usize) -> Option<u32> {
        self.table.get(&v).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `ψA`: multiplicities of vertices sharing a code add up.
    pub fn apply(&self, items: &Multiset<usize>) -> Result<Multiset<u32>, HashError> {
        let mut out = Multiset::new();
        for (&v, &n) in items.iter() {
            out.insert_n(self.code(v).ok_or(HashError::Unassigned(v))?, n);
        }
        Ok(out)
    }

    /// Code every vertex of a list, preserving order and repeats.
    pub fn apply_list(&self, items: &[usize]) -> Result<Vec<u32>, HashError> {
        items
            .iter()
            .map(|&v| self.code(v).ok_or(HashError::Unassigned(v)))
            .collect()
    }
}

/// Draw an independent uniform code in `1..=m` for every vertex. Vertices are
/// visited in ascending order, so the table depends only on the vertex set
/// and the seed.
pub fn draw_hash(
    vertices: impl IntoIterator<Item = usize>,
    m: u32,
    rng_seed: u64,
) -> Result<HashAssignment, HashError> {
    if m == 0 {
        return Err(HashError::EmptyHashSpace);
    }
    let mut ids: Vec<usize> = vertices.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = seed::rng(rng_seed);
    let table = ids.into_iter().map(|v| (v, rng.gen_range(1..=m))).collect();
    Ok(HashAssignment { m, table })
}

/// Free function form of [`HashAssignment::apply`].
pub fn apply_hash(
    psi: &HashAssignment,
    items: &Multiset<usize>,
) -> Result<Multiset<u32>, HashError> {
    psi.apply(items)
}

/// Phone-digit code: each of the last `d` digits, taken last to first,
/// contributes a parity bit (odd = 1) followed by a magnitude bit
/// (5..=9 = 1). Bits are packed most significant first, so the final phone
/// digit supplies the two highest bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TelefunkenCode {
    pub digits_used: usize,
    pub code: u32,
}

impl TelefunkenCode {
    /// Number of distinct codes, `2^(2d)`.
    pub fn space_size(digits_used: usize) -> u64 {
        1u64 << (2 * digits_used)
    }

    /// The code shifted into the `1..=m` range used by survey files.
    pub fn hash_code(&self) -> u32 {
        self.code + 1
    }
}

pub fn telefunken_encode(phone_digits: &str, d: usize) -> Result<TelefunkenCode, HashError> {
    if d == 0 || d > 15 {
        return Err(HashError::DigitCount(d));
    }
    let mut digits = Vec::with_capacity(phone_digits.len());
    for ch in phone_digits.chars() {
        digits.push(ch.to_digit(10).ok_or(HashError::NonDigit(ch))?);
    }
    if digits.len() < d {
        return Err(HashError::TooShort {
            have: digits.len(),
            need: d,
        });
    }
    let code = digits.iter().rev().take(d).fold(0u32, |acc, &digit| {
        let parity = digit % 2;
        let high = u32::from(digit >= 5);
        (acc << 2) | (parity << 1) | high
    });
    Ok(TelefunkenCode {
        digits_used: d,
        code,
    })
}
