//! Integer-multiplicity multisets.
//!
//! A [`Multiset`] stores, for every element that appears at least once, its
//! multiplicity. Elements with multiplicity zero are never stored, so the
//! key set is exactly the support. Iteration is in ascending element order.
//!
//! The operators mirror the usual multiset algebra:
//!
//! | operator | multiplicity of `x` in the result |
//! |----------|-----------------------------------|
//! | [`union`](Multiset::union) | `max(a, b)` |
//! | [`intersect`](Multiset::intersect) | `min(a, b)` |
//! | [`sum_union`](Multiset::sum_union) | `a + b` |
//! | [`difference`](Multiset::difference) | `max(0, a - b)` |
//! | [`filter`](Multiset::filter) | `a` if `b > 0`, else `0` |
//!
//! Multiplicity overflow panics rather than wrapping.

use std::collections::btree_map::{self, BTreeMap};
use std::fmt::Display;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

const TEXT_HEADER: &str = "# multiset v1";

#[derive(Debug, Error)]
pub enum MultisetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Multiset<T: Ord> {
    counts: BTreeMap<T, u64>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
        }
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one occurrence of `item`.
    pub fn insert(&mut self, item: T) {
        self.insert_n(item, 1);
    }

    /// Add `n` occurrences of `item`. `n == 0` is a no-op.
    pub fn insert_n(&mut self, item: T, n: u64) {
        if n == 0 {
            return;
        }
        let slot = self.counts.entry(item).or_insert(0);
        *slot = slot.checked_add(n).expect("multiset multiplicity overflow");
    }

    /// Multiplicity of `item` (zero when absent).
    pub fn count(&self, item: &T) -> u64 {
        self.counts.get(item).copied().unwrap_or(0)
    }

    pub fn contains(&self, item: &T) -> bool {
        self.counts.contains_key(item)
    }

    /// Number of distinct elements, `|A|`.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// Sum of multiplicities, `<A>`.
    pub fn mass(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// True when every multiplicity is one.
    pub fn is_set(&self) -> bool {
        self.counts.values().all(|&c| c == 1)
    }

    /// The support `A*`, ascending.
    pub fn support(&self) -> impl Iterator<Item = &T> + '_ {
        self.counts.keys()
    }

    /// `(element, multiplicity)` pairs, ascending by element.
    pub fn iter(&self) -> btree_map::Iter<'_, T, u64> {
        self.counts.iter()
    }

    /// Multiplicities in ascending element order.
    pub fn multiplicities(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.values().copied()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (item, &b) in &other.counts {
            let slot = out.counts.entry(item.clone()).or_insert(0);
            *slot = (*slot).max(b);
        }
        out
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        let counts = small
            .counts
            .iter()
            .filter_map(|(item, &a)| {
                let b = large.count(item);
                (b > 0).then(|| (item.clone(), a.min(b)))
            })
            .collect();
        Self { counts }
    }

    /// `A ⊎ B`: multiplicities add.
    pub fn sum_union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.absorb(other);
        out
    }

    /// In-place `self ⊎= other`.
    pub fn absorb(&mut self, other: &Self) {
        for (item, &b) in &other.counts {
            self.insert_n(item.clone(), b);
        }
    }

    /// Saturating elementwise subtraction.
    pub fn difference(&self, other: &Self) -> Self {
        let counts = self
            .counts
            .iter()
            .filter_map(|(item, &a)| {
                let left = a.saturating_sub(other.count(item));
                (left > 0).then(|| (item.clone(), left))
            })
            .collect();
        Self { counts }
    }

    /// `A | B`: keep the elements of `self` that occur in `other`, at
    /// `self`'s multiplicity. This is the match multiset `M(A, B)`.
    pub fn filter(&self, other: &Self) -> Self {
        let counts = self
            .counts
            .iter()
            .filter(|(item, _)| other.contains(item))
            .map(|(item, &a)| (item.clone(), a))
            .collect();
        Self { counts }
    }

    /// Relabel every element through `f`, adding multiplicities of elements
    /// that land on the same image.
    pub fn map_elements<U: Ord + Clone>(&self, mut f: impl FnMut(&T) -> U) -> Multiset<U> {
        let mut out = Multiset::new();
        for (item, &n) in &self.counts {
            out.insert_n(f(item), n);
        }
        out
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut out = Self::new();
        for item in iter {
            out.insert(item);
        }
        out
    }
}

impl<T: Ord + Clone> FromIterator<(T, u64)> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = (T, u64)>>(iter: I) -> Self {
        let mut out = Self::new();
        for (item, n) in iter {
            out.insert_n(item, n);
        }
        out
    }
}

impl<T: Ord + Clone + Display> Multiset<T> {
    /// Write the two-column `element,count` text form.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TEXT_HEADER}")?;
        writeln!(out, "element,count")?;
        for (item, n) in &self.counts {
            writeln!(out, "{item},{n}")?;
        }
        Ok(())
    }
}

impl<T: Ord + Clone + FromStr> Multiset<T> {
    /// Read the `element,count` text form. Lines starting with `#`, blank
    /// lines and an `element,count` header are skipped; repeated elements
    /// accumulate.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self, MultisetError> {
        let mut out = Self::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == "element,count" {
                continue;
            }
            let parse_err = |message: String| MultisetError::Parse {
                line: lineno,
                message,
            };
            let (elem, count) = trimmed
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `element,count`, got {trimmed:?}")))?;
            let elem = elem
                .trim()
                .parse::<T>()
                .map_err(|_| parse_err(format!("bad element {:?}", elem.trim())))?;
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|_| parse_err(format!("bad count {:?}", count.trim())))?;
            if count == 0 {
                return Err(parse_err("count must be positive".into()));
            }
            out.insert_n(elem, count);
        }
        Ok(out)
    }
}
