//! Restricted one- and two-electron integrals over spatial orbitals.
//!
//! Two-electron integrals are chemists' notation `(pq|rs)` and are stored once
//! per 8-fold permutational class.

use alloc::vec;
use alloc::vec::Vec;

use crate::det::{Determinant, MAX_SPIN_ORBITALS};
use crate::error::{Error, Result};

#[inline]
fn pair(p: usize, q: usize) -> usize {
    if p >= q {
        p * (p + 1) / 2 + q
    } else {
        q * (q + 1) / 2 + p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    n_spatial: usize,
    n_electrons: usize,
    ms2: i32,
    core_energy: f64,
    one_body: Vec<f64>,
    two_body: Vec<f64>,
}

impl IntegralSet {
    /// Zero integrals for `n_spatial` orbitals holding `n_electrons` with
    /// `n_alpha - n_beta = ms2`.
    pub fn new(n_spatial: usize, n_electrons: usize, ms2: i32) -> Result<Self> {
        if 2 * n_spatial > MAX_SPIN_ORBITALS {
            return Err(Error::TooManyOrbitals {
                count: 2 * n_spatial,
                max: MAX_SPIN_ORBITALS,
            });
        }
        let parity_ok = (n_electrons as i64 + ms2 as i64) % 2 == 0;
        let n_alpha = (n_electrons as i64 + ms2 as i64) / 2;
        let n_beta = n_electrons as i64 - n_alpha;
        if !parity_ok || n_alpha < 0 || n_beta < 0 || n_alpha as usize > n_spatial || n_beta as usize > n_spatial {
            return Err(Error::InvalidConfiguration(
                "electron count and MS2 do not fit in the orbital space",
            ));
        }
        let npair = n_spatial * (n_spatial + 1) / 2;
        Ok(IntegralSet {
            n_spatial,
            n_electrons,
            ms2,
            core_energy: 0.0,
            one_body: vec![0.0; n_spatial * n_spatial],
            two_body: vec![0.0; npair * (npair + 1) / 2],
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_electrons as i32 + self.ms2) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        self.n_electrons - self.n_alpha()
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn set_core_energy(&mut self, e: f64) {
        self.core_energy = e;
    }

    /// Aufbau reference determinant for this electron count.
    pub fn hartree_fock(&self) -> Determinant {
        Determinant::hartree_fock(self.n_spatial, self.n_alpha(), self.n_beta())
            .expect("dimensions validated at construction")
    }

    #[inline]
    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        self.one_body[p * self.n_spatial + q]
    }

    /// Sets `h_pq` and `h_qp`.
    pub fn set_one_body(&mut self, p: usize, q: usize, value: f64) {
        let n = self.n_spatial;
        self.one_body[p * n + q] = value;
        self.one_body[q * n + p] = value;
    }

    /// Position of `(pq|rs)` in the packed 8-fold store.
    #[inline]
    pub fn two_body_index(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        pair(pair(p, q), pair(r, s))
    }

    /// Chemists' notation `(pq|rs)` over spatial orbitals.
    #[inline]
    pub fn two_body(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body[self.two_body_index(p, q, r, s)]
    }

    /// Sets `(pq|rs)` and, implicitly, its seven permutational partners.
    pub fn set_two_body(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let idx = self.two_body_index(p, q, r, s);
        self.two_body[idx] = value;
    }

    /// Distinct nonzero one-body values (upper triangle including diagonal).
    pub fn unique_one_body_count(&self) -> usize {
        let n = self.n_spatial;
        (0..n)
            .flat_map(|p| (0..=p).map(move |q| (p, q)))
            .filter(|&(p, q)| self.one_body(p, q) != 0.0)
            .count()
    }

    /// Distinct nonzero two-body values, one per 8-fold class.
    pub fn unique_two_body_count(&self) -> usize {
        self.two_body.iter().filter(|v| **v != 0.0).count()
    }

    #[inline]
    fn spatial(&self, p: usize) -> (usize, usize) {
        (p % self.n_spatial, p / self.n_spatial)
    }

    /// Physicists' `<pq|rs>` over spin orbitals: `(pr|qs)` when the spins of
    /// `p,r` and of `q,s` match, else zero.
    #[inline]
    pub fn physicist(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let (ps, pspin) = self.spatial(p);
        let (qs, qspin) = self.spatial(q);
        let (rs, rspin) = self.spatial(r);
        let (ss, sspin) = self.spatial(s);
        if pspin != rspin || qspin != sspin {
            return 0.0;
        }
        self.two_body(ps, rs, qs, ss)
    }

    /// `<pq||rs> = <pq|rs> - <pq|sr>` over spin orbitals.
    #[inline]
    pub fn antisymmetrized(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.physicist(p, q, r, s) - self.physicist(p, q, s, r)
    }

    /// One-body element over spin orbitals (zero across spins).
    #[inline]
    pub fn one_body_spin(&self, p: usize, q: usize) -> f64 {
        let (ps, pspin) = self.spatial(p);
        let (qs, qspin) = self.spatial(q);
        if pspin != qspin {
            0.0
        } else {
            self.one_body(ps, qs)
        }
    }

    /// Diagonal Fock elements `h_pp + sum_i <pi||pi>` for every spin orbital,
    /// summing over the orbitals occupied in `reference`.
    pub fn orbital_energies(&self, reference: Determinant) -> Vec<f64> {
        (0..self.n_spin_orbitals())
            .map(|p| {
                self.one_body_spin(p, p)
                    + reference
                        .occupied()
                        .map(|i| self.antisymmetrized(p, i, p, i))
                        .sum::<f64>()
            })
            .collect()
    }

    /// `<ref|H|ref>` including the core energy.
    pub fn hf_energy(&self, reference: Determinant) -> f64 {
        let occ: Vec<usize> = reference.occupied().collect();
        let mut e = self.core_energy;
        for &i in &occ {
            e += self.one_body_spin(i, i);
        }
        let mut two = 0.0;
        for &i in &occ {
            for &j in &occ {
                two += self.antisymmetrized(i, j, i, j);
            }
        }
        e + 0.5 * two
    }
}
