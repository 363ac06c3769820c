//! Matrix-free action of the electronic Hamiltonian on sparse states.
//!
//! Every output coefficient is gathered independently from the determinants
//! connected to it (degree 0, 1 or 2), with matrix elements from the
//! Slater-Condon rules evaluated on the fly. The many-body matrix is never
//! stored, and the result does not depend on how output determinants are
//! split between workers.

use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::det::Determinant;
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::par;
use crate::state::{inner, SparseState};

/// Spin-orbital tables built once from an [`IntegralSet`].
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n_spatial: usize,
    n_so: usize,
    n_electrons: usize,
    ms2: i32,
    core_energy: f64,
    h1: Vec<f64>,
    anti: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
enum Move {
    Single { i: u8, a: u8 },
    /// `a†_a a†_b a_j a_i` with `i < j`, `a < b`.
    Double { i: u8, j: u8, a: u8, b: u8 },
}

struct OrbitalLists {
    occ: [u8; 64],
    n_occ: usize,
    occ_alpha: [u8; 32],
    n_occ_alpha: usize,
    occ_beta: [u8; 32],
    n_occ_beta: usize,
    vir_alpha: [u8; 32],
    n_vir_alpha: usize,
    vir_beta: [u8; 32],
    n_vir_beta: usize,
}

impl OrbitalLists {
    fn new(d: Determinant, n_spatial: usize) -> Self {
        let mut l = OrbitalLists {
            occ: [0; 64],
            n_occ: 0,
            occ_alpha: [0; 32],
            n_occ_alpha: 0,
            occ_beta: [0; 32],
            n_occ_beta: 0,
            vir_alpha: [0; 32],
            n_vir_alpha: 0,
            vir_beta: [0; 32],
            n_vir_beta: 0,
        };
        for p in 0..2 * n_spatial {
            let occupied = d.bits() >> p & 1 == 1;
            let alpha = p < n_spatial;
            if occupied {
                l.occ[l.n_occ] = p as u8;
                l.n_occ += 1;
            }
            match (occupied, alpha) {
                (true, true) => {
                    l.occ_alpha[l.n_occ_alpha] = p as u8;
                    l.n_occ_alpha += 1;
                }
                (true, false) => {
                    l.occ_beta[l.n_occ_beta] = p as u8;
                    l.n_occ_beta += 1;
                }
                (false, true) => {
                    l.vir_alpha[l.n_vir_alpha] = p as u8;
                    l.n_vir_alpha += 1;
                }
                (false, false) => {
                    l.vir_beta[l.n_vir_beta] = p as u8;
                    l.n_vir_beta += 1;
                }
            }
        }
        l
    }

    fn occ(&self) -> &[u8] {
        &self.occ[..self.n_occ]
    }
}

#[inline]
fn parity_below(bits: u64, p: u8) -> bool {
    (bits & ((1u64 << p) - 1)).count_ones() & 1 == 1
}

impl Hamiltonian {
    pub fn new(ints: &IntegralSet) -> Self {
        let n = ints.n_spin_orbitals();
        let mut h1 = alloc::vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                h1[p * n + q] = ints.one_body_spin(p, q);
            }
        }
        let mut anti = alloc::vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        anti[((p * n + q) * n + r) * n + s] = ints.antisymmetrized(p, q, r, s);
                    }
                }
            }
        }
        Hamiltonian {
            n_spatial: ints.n_spatial(),
            n_so: n,
            n_electrons: ints.n_electrons(),
            ms2: ints.ms2(),
            core_energy: ints.core_energy(),
            h1,
            anti,
        }
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    #[inline]
    fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_so;
        self.anti[((p * n + q) * n + r) * n + s]
    }

    #[inline]
    fn h(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.n_so + q]
    }

    /// `<d|H|d>` including the core energy.
    pub fn diagonal(&self, d: Determinant) -> f64 {
        let l = OrbitalLists::new(d, self.n_spatial);
        self.diagonal_from(&l)
    }

    fn diagonal_from(&self, l: &OrbitalLists) -> f64 {
        let occ = l.occ();
        let mut e = self.core_energy;
        for (n, &i) in occ.iter().enumerate() {
            let i = i as usize;
            e += self.h(i, i);
            for &j in &occ[..n] {
                e += self.g(i, j as usize, i, j as usize);
            }
        }
        e
    }

    fn for_each_move(&self, l: &OrbitalLists, bits: u64, mut f: impl FnMut(u64, Move)) {
        let oa = &l.occ_alpha[..l.n_occ_alpha];
        let ob = &l.occ_beta[..l.n_occ_beta];
        let va = &l.vir_alpha[..l.n_vir_alpha];
        let vb = &l.vir_beta[..l.n_vir_beta];
        for (occ, vir) in [(oa, va), (ob, vb)] {
            for &i in occ {
                for &a in vir {
                    f(bits ^ (1 << i) ^ (1 << a), Move::Single { i, a });
                }
            }
        }
        for (occ, vir) in [(oa, va), (ob, vb)] {
            for (x, &i) in occ.iter().enumerate() {
                for &j in &occ[x + 1..] {
                    let removed = bits ^ (1 << i) ^ (1 << j);
                    for (y, &a) in vir.iter().enumerate() {
                        for &b in &vir[y + 1..] {
                            f(removed ^ (1 << a) ^ (1 << b), Move::Double { i, j, a, b });
                        }
                    }
                }
            }
        }
        for &i in oa {
            for &j in ob {
                let removed = bits ^ (1 << i) ^ (1 << j);
                for &a in va {
                    for &b in vb {
                        f(removed ^ (1 << a) ^ (1 << b), Move::Double { i, j, a, b });
                    }
                }
            }
        }
    }

    /// `<target|H|source>` for the move taking `source` to `target`.
    #[inline]
    fn move_element(&self, source: u64, occ: &[u8], mv: Move) -> f64 {
        match mv {
            Move::Single { i, a } => {
                let mut odd = parity_below(source, i);
                let removed = source ^ (1 << i);
                odd ^= parity_below(removed, a);
                let (iu, au) = (i as usize, a as usize);
                let mut v = self.h(au, iu);
                for &k in occ {
                    v += self.g(au, k as usize, iu, k as usize);
                }
                if odd {
                    -v
                } else {
                    v
                }
            }
            Move::Double { i, j, a, b } => {
                let mut bits = source;
                let mut odd = parity_below(bits, i);
                bits ^= 1 << i;
                odd ^= parity_below(bits, j);
                bits ^= 1 << j;
                odd ^= parity_below(bits, b);
                bits ^= 1 << b;
                odd ^= parity_below(bits, a);
                let v = self.g(a as usize, b as usize, i as usize, j as usize);
                if odd {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// `<bra|H|ket>` for arbitrary determinants of the same sector.
    pub fn matrix_element(&self, bra: Determinant, ket: Determinant) -> f64 {
        match bra.excitation_degree(ket) {
            0 => self.diagonal(ket),
            1 | 2 => {
                let l = OrbitalLists::new(ket, self.n_spatial);
                let mut out = 0.0;
                self.for_each_move(&l, ket.bits(), |t, mv| {
                    if t == bra.bits() {
                        out = self.move_element(ket.bits(), l.occ(), mv);
                    }
                });
                out
            }
            _ => 0.0,
        }
    }

    /// `(H x)_target` where `lookup` returns the coefficient of a determinant
    /// in `x` (or `None` when absent).
    fn gather(&self, target: Determinant, lookup: impl Fn(u64) -> Option<f64>) -> f64 {
        let l = OrbitalLists::new(target, self.n_spatial);
        let mut acc = match lookup(target.bits()) {
            Some(c) => self.diagonal_from(&l) * c,
            None => 0.0,
        };
        let bits = target.bits();
        self.for_each_move(&l, bits, |source, mv| {
            if let Some(c) = lookup(source) {
                // Real symmetric: <target|H|source> = <source|H|target>.
                acc += self.move_element(bits, l.occ(), mv) * c;
            }
        });
        acc
    }

    fn check(&self, psi: &SparseState) -> Result<()> {
        psi.check_sector(self.n_spatial, self.n_electrons, self.ms2)
    }

    /// `H|psi>`. Exact zeros are dropped from the output.
    pub fn apply(&self, psi: &SparseState) -> Result<SparseState> {
        self.check(psi)?;
        let index: HashMap<u64, f64> = psi.iter().map(|(d, c)| (d.bits(), c)).collect();
        let mut support: HashSet<u64> = HashSet::with_capacity(psi.len() * 4);
        for (d, _) in psi.iter() {
            support.insert(d.bits());
            let l = OrbitalLists::new(d, self.n_spatial);
            self.for_each_move(&l, d.bits(), |t, _| {
                support.insert(t);
            });
        }
        let mut targets: Vec<Determinant> = support.into_iter().map(Determinant::from_bits).collect();
        targets.sort_unstable();
        let values = par::map(&targets, |&t| self.gather(t, |b| index.get(&b).copied()));
        let entries = targets
            .into_iter()
            .zip(values)
            .filter(|e| e.1 != 0.0)
            .collect();
        Ok(SparseState::from_sorted(entries))
    }

    /// `<psi|H|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &SparseState) -> Result<f64> {
        self.check(psi)?;
        let norm = psi.norm_squared();
        if psi.is_empty() || norm == 0.0 {
            return Err(Error::EmptyState);
        }
        Ok(self.overlap_energy(psi) / norm)
    }

    /// `<psi|H|psi>`, gathering only over the support of `psi`.
    fn overlap_energy(&self, psi: &SparseState) -> f64 {
        let index: HashMap<u64, f64> = psi.iter().map(|(d, c)| (d.bits(), c)).collect();
        let dets: Vec<(Determinant, f64)> = psi.iter().collect();
        let parts = par::map(&dets, |&(d, c)| c * self.gather(d, |b| index.get(&b).copied()));
        parts.iter().sum()
    }

    /// `<a|H|b>` computed as `<a|(H b)>`.
    pub fn transition(&self, a: &SparseState, b: &SparseState) -> Result<f64> {
        Ok(inner(a, &self.apply(b)?))
    }

    /// `y = H x` over an indexed determinant space.
    pub fn apply_in_space(&self, space: &DeterminantSpace, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), space.len());
        par::map(&space.dets, |&t| {
            self.gather(t, |b| space.index.get(&b).map(|&k| x[k as usize]))
        })
    }

    /// Dense row-major Hamiltonian over `space`, built from the same
    /// Slater-Condon kernels.
    pub fn dense_matrix(&self, space: &DeterminantSpace) -> Vec<f64> {
        let n = space.len();
        let rows = par::map(&space.dets, |&t| {
            let l = OrbitalLists::new(t, self.n_spatial);
            let mut row = alloc::vec![0.0; n];
            row[space.index[&t.bits()] as usize] = self.diagonal_from(&l);
            self.for_each_move(&l, t.bits(), |s, mv| {
                if let Some(&k) = space.index.get(&s) {
                    row[k as usize] = self.move_element(t.bits(), l.occ(), mv);
                }
            });
            row
        });
        rows.concat()
    }
}

/// A sorted list of determinants with an index for O(1) lookup.
#[derive(Clone, Debug)]
pub struct DeterminantSpace {
    dets: Vec<Determinant>,
    index: HashMap<u64, u32>,
}

impl DeterminantSpace {
    pub fn new(mut dets: Vec<Determinant>) -> Self {
        dets.sort_unstable();
        dets.dedup();
        let index = dets
            .iter()
            .enumerate()
            .map(|(k, d)| (d.bits(), k as u32))
            .collect();
        DeterminantSpace { dets, index }
    }

    /// Every determinant with `n_alpha` alpha and `n_beta` beta electrons in
    /// `n_spatial` spatial orbitals.
    pub fn full(n_spatial: usize, n_alpha: usize, n_beta: usize) -> Self {
        let strings = |k: usize| -> Vec<u64> {
            (0u64..1 << n_spatial)
                .filter(|s| s.count_ones() as usize == k)
                .collect()
        };
        let alpha = strings(n_alpha);
        let beta = strings(n_beta);
        let mut dets = Vec::with_capacity(alpha.len() * beta.len());
        for &b in &beta {
            for &a in &alpha {
                dets.push(Determinant::from_bits(a | b << n_spatial));
            }
        }
        DeterminantSpace::new(dets)
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn dets(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn position(&self, d: Determinant) -> Option<usize> {
        self.index.get(&d.bits()).map(|&k| k as usize)
    }

    pub fn to_state(&self, x: &[f64]) -> SparseState {
        SparseState::from_sorted(
            self.dets
                .iter()
                .zip(x)
                .filter(|e| *e.1 != 0.0)
                .map(|(&d, &c)| (d, c))
                .collect(),
        )
    }
}
