//! Slater determinants as occupation bitmasks.
//!
//! Spin orbitals use a blocked layout: for `M` spatial orbitals, indices
//! `0..M` are alpha and `M..2M` are beta copies of the same spatial orbitals.
//! Fermionic signs count the occupied orbitals strictly below the index being
//! acted on, at the moment it is acted on.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Mul, Neg};

use crate::error::{Error, Result};

/// Capacity of the fixed-width occupation mask.
pub const MAX_SPIN_ORBITALS: usize = 64;

/// Highest excitation rank an [`Excitation`] can hold.
pub const MAX_RANK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn from_parity(odd: bool) -> Self {
        if odd {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_parity(self != rhs)
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Determinant(u64);

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Determinant({:#b})", self.0)
    }
}

#[inline]
fn below(p: usize) -> u64 {
    (1u64 << p) - 1
}

impl Determinant {
    #[inline]
    pub const fn from_bits(bits: u64) -> Self {
        Determinant(bits)
    }

    pub fn from_occupied(orbitals: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &p in orbitals {
            if p >= MAX_SPIN_ORBITALS {
                return Err(Error::OrbitalOutOfRange {
                    index: p,
                    limit: MAX_SPIN_ORBITALS,
                });
            }
            bits |= 1 << p;
        }
        Ok(Determinant(bits))
    }

    /// Aufbau determinant: the lowest `n_alpha` alpha and `n_beta` beta orbitals.
    pub fn hartree_fock(n_spatial: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if 2 * n_spatial > MAX_SPIN_ORBITALS {
            return Err(Error::TooManyOrbitals {
                count: 2 * n_spatial,
                max: MAX_SPIN_ORBITALS,
            });
        }
        if n_alpha > n_spatial || n_beta > n_spatial {
            return Err(Error::InvalidConfiguration(
                "more electrons of one spin than spatial orbitals",
            ));
        }
        let alpha = below(n_alpha);
        let beta = below(n_beta) << n_spatial;
        Ok(Determinant(alpha | beta))
    }

    #[inline]
    pub const fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_occupied(self, p: usize) -> bool {
        p < MAX_SPIN_ORBITALS && self.0 >> p & 1 == 1
    }

    #[inline]
    pub fn electron_count(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn alpha_count(self, n_spatial: usize) -> usize {
        (self.0 & below(n_spatial)).count_ones() as usize
    }

    #[inline]
    pub fn beta_count(self, n_spatial: usize) -> usize {
        (self.0 >> n_spatial).count_ones() as usize
    }

    /// Twice the spin projection, `n_alpha - n_beta`.
    #[inline]
    pub fn ms2(self, n_spatial: usize) -> i32 {
        self.alpha_count(n_spatial) as i32 - self.beta_count(n_spatial) as i32
    }

    pub fn occupied(self) -> BitIter {
        BitIter(self.0)
    }

    /// Unoccupied spin orbitals among the first `n_spin_orbitals`.
    pub fn unoccupied(self, n_spin_orbitals: usize) -> BitIter {
        let full = if n_spin_orbitals >= 64 {
            u64::MAX
        } else {
            below(n_spin_orbitals)
        };
        BitIter(!self.0 & full)
    }

    /// Number of spin orbitals that must move to turn `self` into `other`.
    #[inline]
    pub fn excitation_degree(self, other: Determinant) -> usize {
        ((self.0 ^ other.0).count_ones() / 2) as usize
    }

    /// Removes an electron from `p`, returning the sign picked up.
    #[inline]
    pub fn annihilate(self, p: usize) -> Option<(Determinant, Sign)> {
        if self.0 >> p & 1 == 0 {
            return None;
        }
        let sign = Sign::from_parity((self.0 & below(p)).count_ones() & 1 == 1);
        Some((Determinant(self.0 & !(1 << p)), sign))
    }

    #[inline]
    pub fn create(self, p: usize) -> Option<(Determinant, Sign)> {
        if self.0 >> p & 1 == 1 {
            return None;
        }
        let sign = Sign::from_parity((self.0 & below(p)).count_ones() & 1 == 1);
        Some((Determinant(self.0 | 1 << p), sign))
    }

    /// Applies the operator string `a†[c0] a†[c1] ... a[a0] a[a1] ...`, acting
    /// right-to-left. Indices are assumed in range.
    #[inline]
    pub(crate) fn apply_unchecked(
        self,
        creators: &[u8],
        annihilators: &[u8],
    ) -> Option<(Determinant, Sign)> {
        let mut det = self;
        let mut odd = false;
        for &p in annihilators.iter().rev() {
            let p = p as usize;
            if det.0 >> p & 1 == 0 {
                return None;
            }
            odd ^= (det.0 & below(p)).count_ones() & 1 == 1;
            det.0 &= !(1 << p);
        }
        for &p in creators.iter().rev() {
            let p = p as usize;
            if det.0 >> p & 1 == 1 {
                return None;
            }
            odd ^= (det.0 & below(p)).count_ones() & 1 == 1;
            det.0 |= 1 << p;
        }
        Some((det, Sign::from_parity(odd)))
    }
}

/// Applies `a†[creators[0]] a†[creators[1]] ... a[annihilators[0]] a[annihilators[1]] ...`
/// to `det`. Operators act right-to-left, annihilators first. Returns `None`
/// when the string annihilates the determinant.
pub fn apply_second_quantized(
    det: Determinant,
    n_spin_orbitals: usize,
    creators: &[usize],
    annihilators: &[usize],
) -> Result<Option<(Determinant, Sign)>> {
    let limit = n_spin_orbitals.min(MAX_SPIN_ORBITALS);
    if let Some(&index) = creators.iter().chain(annihilators).find(|&&p| p >= limit) {
        return Err(Error::OrbitalOutOfRange { index, limit });
    }
    let mut current = det;
    let mut sign = Sign::Plus;
    for &p in annihilators.iter().rev() {
        match current.annihilate(p) {
            Some((d, s)) => {
                current = d;
                sign = sign * s;
            }
            None => return Ok(None),
        }
    }
    for &p in creators.iter().rev() {
        match current.create(p) {
            Some((d, s)) => {
                current = d;
                sign = sign * s;
            }
            None => return Ok(None),
        }
    }
    Ok(Some((current, sign)))
}

pub struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for BitIter {}

/// An excitation `a†_a a†_b ... a_i a_j ...` from occupied `i > j > ...` into
/// virtual `a > b > ...`.
///
/// Ordering is canonical: by rank, then lexicographically on the occupied
/// list, then on the virtual list.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Excitation {
    rank: u8,
    occupied: [u8; MAX_RANK],
    virtuals: [u8; MAX_RANK],
    occupied_mask: u64,
    virtual_mask: u64,
}

impl Excitation {
    /// Builds an excitation from arbitrary-order index lists; both lists are
    /// sorted into descending order.
    pub fn new(occupied: &[usize], virtuals: &[usize]) -> Result<Self> {
        let rank = occupied.len();
        if rank == 0 || rank > MAX_RANK || virtuals.len() != rank {
            return Err(Error::InvalidConfiguration(
                "excitation needs equal, nonzero occupied and virtual counts",
            ));
        }
        let mut occ = [0u8; MAX_RANK];
        let mut vir = [0u8; MAX_RANK];
        let mut occupied_mask = 0u64;
        let mut virtual_mask = 0u64;
        for (slot, &p) in occ.iter_mut().zip(occupied) {
            check_index(p)?;
            *slot = p as u8;
            occupied_mask |= 1 << p;
        }
        for (slot, &p) in vir.iter_mut().zip(virtuals) {
            check_index(p)?;
            *slot = p as u8;
            virtual_mask |= 1 << p;
        }
        if occupied_mask.count_ones() as usize != rank
            || virtual_mask.count_ones() as usize != rank
            || occupied_mask & virtual_mask != 0
        {
            return Err(Error::InvalidConfiguration(
                "excitation indices must be distinct and occupied/virtual disjoint",
            ));
        }
        occ[..rank].sort_unstable_by(|a, b| b.cmp(a));
        vir[..rank].sort_unstable_by(|a, b| b.cmp(a));
        Ok(Excitation {
            rank: rank as u8,
            occupied: occ,
            virtuals: vir,
            occupied_mask,
            virtual_mask,
        })
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank as usize
    }

    #[inline]
    pub fn occupied(&self) -> &[u8] {
        &self.occupied[..self.rank as usize]
    }

    #[inline]
    pub fn virtuals(&self) -> &[u8] {
        &self.virtuals[..self.rank as usize]
    }

    #[inline]
    pub fn occupied_mask(&self) -> u64 {
        self.occupied_mask
    }

    #[inline]
    pub fn virtual_mask(&self) -> u64 {
        self.virtual_mask
    }

    /// True when the occupied set is filled and the virtual set empty.
    #[inline]
    pub fn can_excite(&self, det: Determinant) -> bool {
        det.0 & self.occupied_mask == self.occupied_mask && det.0 & self.virtual_mask == 0
    }

    #[inline]
    pub fn can_deexcite(&self, det: Determinant) -> bool {
        det.0 & self.virtual_mask == self.virtual_mask && det.0 & self.occupied_mask == 0
    }

    #[inline]
    pub fn excite(&self, det: Determinant) -> Option<(Determinant, Sign)> {
        det.apply_unchecked(self.virtuals(), self.occupied())
    }

    /// Applies the adjoint string `a†_i a†_j ... a_a a_b ...`.
    #[inline]
    pub fn deexcite(&self, det: Determinant) -> Option<(Determinant, Sign)> {
        det.apply_unchecked(self.occupied(), self.virtuals())
    }

    /// Alpha orbitals among the occupied and virtual lists respectively.
    pub fn alpha_counts(&self, n_spatial: usize) -> (usize, usize) {
        let mask = below(n_spatial);
        (
            (self.occupied_mask & mask).count_ones() as usize,
            (self.virtual_mask & mask).count_ones() as usize,
        )
    }

    pub fn conserves_spin(&self, n_spatial: usize) -> bool {
        let (o, v) = self.alpha_counts(n_spatial);
        o == v
    }
}

fn check_index(p: usize) -> Result<()> {
    if p >= MAX_SPIN_ORBITALS {
        Err(Error::OrbitalOutOfRange {
            index: p,
            limit: MAX_SPIN_ORBITALS,
        })
    } else {
        Ok(())
    }
}

impl fmt::Debug for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Excitation({self})")
    }
}

impl fmt::Display for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, xs: &[u8]| -> fmt::Result {
            for (n, x) in xs.iter().enumerate() {
                if n > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            Ok(())
        };
        join(f, self.occupied())?;
        f.write_str("->")?;
        join(f, self.virtuals())
    }
}

/// All `S_z`-conserving excitations of rank `1..=max_rank` out of `reference`
/// within `2 * n_spatial` spin orbitals, in canonical order.
pub fn enumerate_excitations(
    reference: Determinant,
    n_spatial: usize,
    max_rank: usize,
) -> Vec<Excitation> {
    let n_so = 2 * n_spatial;
    let occ: Vec<usize> = reference.occupied().filter(|&p| p < n_so).collect();
    let vir: Vec<usize> = reference.unoccupied(n_so).collect();
    let mut out = Vec::new();
    for rank in 1..=max_rank.min(MAX_RANK) {
        let occ_sets = combinations(&occ, rank);
        let vir_sets = combinations(&vir, rank);
        for o in &occ_sets {
            for v in &vir_sets {
                let Ok(exc) = Excitation::new(o, v) else {
                    continue;
                };
                if exc.conserves_spin(n_spatial) {
                    out.push(exc);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}
