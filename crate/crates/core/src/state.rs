//! Sparse wavefunctions: determinant -> real amplitude, kept sorted by
//! determinant so that merges and inner products are linear scans.

use alloc::vec::Vec;

use crate::det::Determinant;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseState {
    entries: Vec<(Determinant, f64)>,
}

impl SparseState {
    pub fn new() -> Self {
        SparseState { entries: Vec::new() }
    }

    pub fn single(det: Determinant, coefficient: f64) -> Self {
        SparseState {
            entries: alloc::vec![(det, coefficient)],
        }
    }

    /// Sorts and merges duplicate determinants. Duplicates are summed in the
    /// order they appear in `entries`.
    pub fn from_entries(mut entries: Vec<(Determinant, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(Determinant, f64)> = Vec::with_capacity(entries.len());
        for (d, c) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == d => last.1 += c,
                _ => merged.push((d, c)),
            }
        }
        SparseState { entries: merged }
    }

    /// Wraps entries that are already strictly sorted by determinant.
    pub(crate) fn from_sorted(entries: Vec<(Determinant, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseState { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (Determinant, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(Determinant, f64)] {
        &self.entries
    }

    pub fn determinants(&self) -> impl Iterator<Item = Determinant> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn get(&self, det: Determinant) -> f64 {
        self.entries
            .binary_search_by_key(&det, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.1 *= factor;
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }

    /// Rescales to unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::EmptyState);
        }
        self.scale(1.0 / n);
        Ok(())
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &SparseState) -> SparseState {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, factor * b[j].1));
                j += 1;
            } else {
                out.push((a[i].0, a[i].1 + factor * b[j].1));
                i += 1;
                j += 1;
            }
        }
        SparseState { entries: out }
    }

    /// Removes entries with `|c| <= tolerance`. A tolerance of zero removes
    /// only exact zeros.
    pub fn drop_below(&mut self, tolerance: f64) {
        self.entries.retain(|e| libm::fabs(e.1) > tolerance);
    }

    /// Checks that every determinant has `n_electrons` electrons and the given
    /// `2 S_z`.
    pub fn check_sector(&self, n_spatial: usize, n_electrons: usize, ms2: i32) -> Result<()> {
        for &(d, _) in &self.entries {
            if d.electron_count() != n_electrons
                || d.ms2(n_spatial) != ms2
                || d.bits() >> (2 * n_spatial) != 0
            {
                return Err(Error::SectorMismatch {
                    bits: d.bits(),
                    n_electrons,
                    ms2,
                });
            }
        }
        Ok(())
    }
}

/// Sum of coefficient products over shared determinants.
pub fn inner(a: &SparseState, b: &SparseState) -> f64 {
    let (a, b) = (&a.entries, &b.entries);
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl FromIterator<(Determinant, f64)> for SparseState {
    fn from_iter<T: IntoIterator<Item = (Determinant, f64)>>(iter: T) -> Self {
        SparseState::from_entries(iter.into_iter().collect())
    }
}
