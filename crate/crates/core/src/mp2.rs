//! MP2 doubles amplitudes used to rank factors and seed their angles.
//!
//! Amplitudes are expressed in each factor's own operator convention
//! (`a†_a a†_b a_i a_j` with `i > j`, `a > b`), so the first-order
//! wavefunction is `|0> + sum_k t_k τ_k |0>`. In this ordering
//! `t = <ab||ji> / (ε_i + ε_j - ε_a - ε_b)`.

use alloc::vec::Vec;

use crate::det::{enumerate_excitations, Determinant, Excitation};
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::ucc::{FactorList, UccFactor};

const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Amplitudes closer than this (relative) count as tied when ranking.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedEntry {
    pub excitation: Excitation,
    pub mp2_amplitude: f64,
    pub seed_angle: f64,
}

/// Excitations sorted by descending `|t|`; singles (amplitude zero) last.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedFactors {
    entries: Vec<RankedEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SeedOrder {
    /// Largest amplitude acts first on the reference.
    #[default]
    LargestFirst,
    /// Largest amplitude acts last.
    LargestLast,
}

impl RankedFactors {
    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rank position of `excitation`, if present.
    pub fn position(&self, excitation: &Excitation) -> Option<usize> {
        self.entries.iter().position(|e| &e.excitation == excitation)
    }

    pub fn doubles(&self) -> impl Iterator<Item = &RankedEntry> {
        self.entries.iter().filter(|e| e.excitation.rank() == 2)
    }
}

fn denominator(eps: &[f64], exc: &Excitation) -> Result<f64> {
    let occ: f64 = exc.occupied().iter().map(|&p| eps[p as usize]).sum();
    let vir: f64 = exc.virtuals().iter().map(|&p| eps[p as usize]).sum();
    let d = occ - vir;
    if libm::fabs(d) < DEGENERACY_TOLERANCE {
        return Err(Error::DegenerateOrbitals(*exc, d));
    }
    Ok(d)
}

/// `<ab||ij>` in the standard `a†_a a†_b a_j a_i` ordering.
fn coupling(ints: &IntegralSet, exc: &Excitation) -> f64 {
    let (o, v) = (exc.occupied(), exc.virtuals());
    ints.antisymmetrized(v[0] as usize, v[1] as usize, o[0] as usize, o[1] as usize)
}

fn sort_key(t: f64) -> (i64, i64) {
    // Quantize so that amplitudes equal up to rounding tie exactly.
    let a = libm::fabs(t);
    if a == 0.0 {
        return (i64::MIN, 0);
    }
    let exp = libm::floor(libm::log10(a));
    let mant = libm::round(a / libm::pow(10.0, exp) / TIE_TOLERANCE) as i64;
    (exp as i64, mant)
}

/// One entry per enumerated single and double excitation of `reference`.
pub fn mp2_amplitudes(ints: &IntegralSet, reference: Determinant) -> Result<RankedFactors> {
    let eps = ints.orbital_energies(reference);
    let all = enumerate_excitations(reference, ints.n_spatial(), 2);
    let mut doubles = Vec::new();
    let mut singles = Vec::new();
    for exc in all {
        if exc.rank() == 1 {
            singles.push(RankedEntry {
                excitation: exc,
                mp2_amplitude: 0.0,
                seed_angle: 0.0,
            });
            continue;
        }
        let d = denominator(&eps, &exc)?;
        // Operator ordering flips the sign relative to <ab||ij>.
        let t = -coupling(ints, &exc) / d;
        doubles.push(RankedEntry {
            excitation: exc,
            mp2_amplitude: t,
            seed_angle: libm::atan(t),
        });
    }
    // Stable sort: ties keep canonical excitation order.
    doubles.sort_by_key(|e| core::cmp::Reverse(sort_key(e.mp2_amplitude)));
    doubles.extend(singles);
    Ok(RankedFactors { entries: doubles })
}

/// Second-order correlation energy `sum_{i>j, a>b} |<ab||ij>|^2 / (ε_i + ε_j - ε_a - ε_b)`.
pub fn mp2_energy(ints: &IntegralSet, reference: Determinant) -> Result<f64> {
    let eps = ints.orbital_energies(reference);
    let mut e = 0.0;
    for exc in enumerate_excitations(reference, ints.n_spatial(), 2) {
        if exc.rank() != 2 {
            continue;
        }
        let g = coupling(ints, &exc);
        e += g * g / denominator(&eps, &exc)?;
    }
    Ok(e)
}

/// Splits the ranking into the first `large` entries (seeded with their MP2
/// angles) and the rest (angle zero), both in rank order.
pub fn partition(ranked: &RankedFactors, large: usize) -> Result<(FactorList, FactorList)> {
    partition_with_order(ranked, large, SeedOrder::LargestFirst)
}

pub fn partition_with_order(
    ranked: &RankedFactors,
    large: usize,
    order: SeedOrder,
) -> Result<(FactorList, FactorList)> {
    if large > ranked.len() {
        return Err(Error::TooManyLargeFactors {
            requested: large,
            available: ranked.len(),
        });
    }
    let mut big: Vec<UccFactor> = ranked.entries[..large]
        .iter()
        .map(|e| UccFactor::new(e.excitation, e.seed_angle))
        .collect();
    if order == SeedOrder::LargestLast {
        big.reverse();
    }
    let small = ranked.entries[large..]
        .iter()
        .map(|e| UccFactor::new(e.excitation, 0.0))
        .collect();
    Ok((FactorList::new(big)?, FactorList::new(small)?))
}
