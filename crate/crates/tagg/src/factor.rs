//! Dense factors over finite-domain variables.
//!
//! A [`Factor`] is a real-valued table over an ordered scope of variables.
//! Tables are laid out in mixed-radix order with the last scope variable
//! varying fastest, matching the row convention used by the file format.

use crate::error::{Error, Result};
use crate::net::VarId;

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    /// Builds a factor, checking that the table length matches the scope and
    /// that every entry is finite.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::BadTableSize);
        }
        let mut n: u128 = 1;
        for &c in &cards {
            if c == 0 {
                return Err(Error::BadTableSize);
            }
            n = n.saturating_mul(c as u128);
        }
        if n != table.len() as u128 {
            return Err(Error::BadTableSize);
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        let mut seen = scope.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != scope.len() {
            return Err(Error::ScopeMismatch);
        }
        Ok(Factor { scope, cards, table })
    }

    /// Scalar factor with an empty scope; `Factor::scalar(1.0)` is the
    /// multiplicative identity.
    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            table: vec![value],
        }
    }

    pub fn zeros(scope: Vec<VarId>, cards: Vec<usize>) -> Result<Self> {
        let n = checked_len(&cards)?;
        if scope.len() != cards.len() {
            return Err(Error::BadTableSize);
        }
        Ok(Factor {
            scope,
            cards,
            table: vec![0.0; n],
        })
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn card_of(&self, var: VarId) -> Option<usize> {
        self.scope.iter().position(|&v| v == var).map(|i| self.cards[i])
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.scope.contains(&var)
    }

    /// Strides per scope position, last variable fastest.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.cards)
    }

    /// Flat index of a full assignment given in scope order.
    pub fn index_of(&self, assignment: &[usize]) -> usize {
        debug_assert_eq!(assignment.len(), self.scope.len());
        let mut idx = 0;
        for (i, &v) in assignment.iter().enumerate() {
            debug_assert!(v < self.cards[i]);
            idx = idx * self.cards[i] + v;
        }
        idx
    }

    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        self.table[self.index_of(assignment)]
    }

    pub fn sum(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Pointwise product; the result scope is this factor's scope followed by
    /// the other factor's remaining variables.
    pub fn product(&self, other: &Factor) -> Result<Factor> {
        // shared variables must agree on cardinality
        for (i, &v) in self.scope.iter().enumerate() {
            if let Some(c) = other.card_of(v) {
                if c != self.cards[i] {
                    return Err(Error::ScopeMismatch);
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (i, &v) in other.scope.iter().enumerate() {
            if !self.contains(v) {
                scope.push(v);
                cards.push(other.cards[i]);
            }
        }
        let n = checked_len(&cards)?;

        let sa = embedded_strides(&scope, &cards, &self.scope, &self.cards);
        let sb = embedded_strides(&scope, &cards, &other.scope, &other.cards);

        let mut table = vec![0.0; n];
        let mut digits = vec![0usize; scope.len()];
        let mut off_a = 0usize;
        let mut off_b = 0usize;
        for slot in table.iter_mut() {
            *slot = self.table[off_a] * other.table[off_b];
            // odometer increment, last digit fastest
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                off_a += sa[d];
                off_b += sb[d];
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
                off_a -= sa[d] * cards[d];
                off_b -= sb[d] * cards[d];
            }
        }
        Factor::new(scope, cards, table)
    }

    /// Sums out the given variables.
    pub fn marginalize(&self, out: &[VarId]) -> Result<Factor> {
        for &v in out {
            if !self.contains(v) {
                return Err(Error::NotInScope);
            }
        }
        if out.is_empty() {
            return Ok(self.clone());
        }
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        for (i, &v) in self.scope.iter().enumerate() {
            if !out.contains(&v) {
                scope.push(v);
                cards.push(self.cards[i]);
            }
        }
        let n = checked_len(&cards)?;
        let dst = embedded_strides(&self.scope, &self.cards, &scope, &cards);

        let mut table = vec![0.0; n];
        let mut digits = vec![0usize; self.scope.len()];
        let mut off = 0usize;
        for &v in &self.table {
            table[off] += v;
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                off += dst[d];
                if digits[d] < self.cards[d] {
                    break;
                }
                digits[d] = 0;
                off -= dst[d] * self.cards[d];
            }
        }
        Factor::new(scope, cards, table)
    }

    /// Slices the table at the given evidence values. Evidence variables not
    /// in the scope are ignored; out-of-range values are an error.
    pub fn reduce(&self, evidence: &[(VarId, usize)]) -> Result<Factor> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.scope.len()];
        let mut any = false;
        for &(v, val) in evidence {
            if let Some(i) = self.scope.iter().position(|&s| s == v) {
                if val >= self.cards[i] {
                    return Err(Error::ValueOutOfRange {
                        var: format!("{:?}", v),
                        value: val,
                        size: self.cards[i],
                    });
                }
                fixed[i] = Some(val);
                any = true;
            }
        }
        if !any {
            return Ok(self.clone());
        }
        let strides = self.strides();
        let mut base = 0usize;
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        let mut kept_strides = Vec::new();
        for i in 0..self.scope.len() {
            match fixed[i] {
                Some(val) => base += val * strides[i],
                None => {
                    scope.push(self.scope[i]);
                    cards.push(self.cards[i]);
                    kept_strides.push(strides[i]);
                }
            }
        }
        let n = checked_len(&cards)?;
        let mut table = Vec::with_capacity(n);
        let mut digits = vec![0usize; scope.len()];
        let mut off = base;
        for _ in 0..n {
            table.push(self.table[off]);
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                off += kept_strides[d];
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
                off -= kept_strides[d] * cards[d];
            }
        }
        Factor::new(scope, cards, table)
    }

    /// Returns the factor scaled so its entries sum to one. A zero factor is
    /// returned unchanged.
    pub fn normalize(&self) -> Factor {
        let total = self.sum();
        if total == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        for v in out.table.iter_mut() {
            *v /= total;
        }
        out
    }

    /// Reorders the scope to the requested order (a permutation of the
    /// current scope).
    pub fn permuted(&self, order: &[VarId]) -> Result<Factor> {
        if order.len() != self.scope.len() {
            return Err(Error::ScopeMismatch);
        }
        if order == self.scope.as_slice() {
            return Ok(self.clone());
        }
        let mut cards = Vec::with_capacity(order.len());
        for &v in order {
            match self.card_of(v) {
                Some(c) => cards.push(c),
                None => return Err(Error::NotInScope),
            }
        }
        let src = embedded_strides(order, &cards, &self.scope, &self.cards);
        let n = self.table.len();
        let mut table = Vec::with_capacity(n);
        let mut digits = vec![0usize; order.len()];
        let mut off = 0usize;
        for _ in 0..n {
            table.push(self.table[off]);
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                off += src[d];
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
                off -= src[d] * cards[d];
            }
        }
        Factor::new(order.to_vec(), cards, table)
    }
}

/// Product of all cardinalities, or an error when it cannot be addressed.
pub fn checked_len(cards: &[usize]) -> Result<usize> {
    let mut n: u128 = 1;
    for &c in cards {
        n = n.saturating_mul(c as u128);
        if n > isize::MAX as u128 {
            return Err(Error::TableOverflow(n));
        }
    }
    Ok(n as usize)
}

/// Cell count of a table over `cards` without building it.
pub fn cell_count(cards: &[usize]) -> u128 {
    cards.iter().fold(1u128, |n, &c| n.saturating_mul(c as u128))
}

fn strides_of(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Strides of `inner` variables as seen while iterating `outer`'s index
/// space; variables absent from `inner` get stride zero.
fn embedded_strides(
    outer: &[VarId],
    _outer_cards: &[usize],
    inner: &[VarId],
    inner_cards: &[usize],
) -> Vec<usize> {
    let inner_strides = strides_of(inner_cards);
    outer
        .iter()
        .map(|v| {
            inner
                .iter()
                .position(|w| w == v)
                .map_or(0, |i| inner_strides[i])
        })
        .collect()
}
