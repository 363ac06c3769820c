//! Exact diagonalization in a fixed `(n_α, n_β)` sector.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::det::Determinant;
use crate::error::{Error, Result};
use crate::hamiltonian::{DeterminantSpace, Hamiltonian};
use crate::state::SparseState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FciOptions {
    /// Spaces up to this size are diagonalized densely.
    pub dense_limit: usize,
    pub residual_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FciOptions {
    fn default() -> Self {
        FciOptions {
            dense_limit: 5000,
            residual_tolerance: 1e-9,
            max_iterations: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FciMethod {
    Dense,
    Davidson { iterations: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FciSolution {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Normalized, with a non-negative Hartree–Fock coefficient.
    pub states: Vec<SparseState>,
    pub hf_overlaps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub dimension: usize,
    pub method: FciMethod,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HfTracking {
    pub index: usize,
    pub overlap: f64,
    /// Set when no root has an overlap of at least 0.1.
    pub reference_lost: bool,
}

/// Overlaps closer than this count as tied in [`track_hf_state`].
pub const TRACKING_TIE: f64 = 1e-9;

/// Lowest `n_roots` eigenpairs with default options.
pub fn fci_solve(ham: &Hamiltonian, n_alpha: usize, n_beta: usize, n_roots: usize) -> Result<FciSolution> {
    fci_solve_with(ham, n_alpha, n_beta, n_roots, &FciOptions::default())
}

pub fn fci_solve_with(
    ham: &Hamiltonian,
    n_alpha: usize,
    n_beta: usize,
    n_roots: usize,
    opts: &FciOptions,
) -> Result<FciSolution> {
    let m = ham.n_spatial();
    if n_alpha + n_beta != ham.n_electrons() || n_alpha as i32 - n_beta as i32 != ham.ms2() || n_alpha > m || n_beta > m {
        return Err(Error::InvalidConfiguration("sector does not match the Hamiltonian"));
    }
    let space = DeterminantSpace::full(m, n_alpha, n_beta);
    let dim = space.len();
    if n_roots == 0 || n_roots > dim {
        return Err(Error::TooManyRoots {
            requested: n_roots,
            dimension: dim,
        });
    }
    let (energies, mut vectors, method) = if dim <= opts.dense_limit {
        let (e, v) = dense(ham, &space, n_roots);
        (e, v, FciMethod::Dense)
    } else {
        let (e, v, iterations) = davidson(ham, &space, n_roots, opts)?;
        (e, v, FciMethod::Davidson { iterations })
    };
    let hf = Determinant::hartree_fock(m, n_alpha, n_beta)?;
    let hf_pos = space.position(hf).expect("HF determinant lies in its own sector");
    for v in vectors.iter_mut() {
        let pivot = if v[hf_pos] != 0.0 {
            v[hf_pos]
        } else {
            v.iter().copied().fold(0.0, |a: f64, b| if libm::fabs(b) > libm::fabs(a) { b } else { a })
        };
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let residuals = energies
        .iter()
        .zip(&vectors)
        .map(|(e, v)| {
            let hv = ham.apply_in_space(&space, v);
            norm(&hv.iter().zip(v).map(|(a, b)| a - e * b).collect::<Vec<_>>())
        })
        .collect();
    Ok(FciSolution {
        hf_overlaps: vectors.iter().map(|v| libm::fabs(v[hf_pos])).collect(),
        states: vectors.iter().map(|v| space.to_state(v)).collect(),
        energies,
        residuals,
        dimension: dim,
        method,
    })
}

fn dense(ham: &Hamiltonian, space: &DeterminantSpace, n_roots: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    lowest_eigenpairs(ham.dense_matrix(space), space.len(), n_roots)
}

/// Householder tridiagonalization, bisection for the lowest eigenvalues and
/// inverse iteration for their vectors. Only the requested roots are formed.
/// `a` is row-major and symmetric; only its lower triangle is read.
fn lowest_eigenpairs(a: Vec<f64>, dim: usize, n_roots: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    if dim == 1 {
        return (vec![a[0]], vec![vec![1.0]]);
    }
    let tri = Tridiagonal::new(a, dim);
    let (d, e) = (&tri.diagonal, &tri.off_diagonal);
    let scale = d.iter().chain(e).fold(0.0, |m: f64, v| m.max(libm::fabs(*v))).max(1e-300);
    let energies: Vec<f64> = (0..n_roots).map(|k| tridiagonal_eigenvalue(d, e, k)).collect();
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(n_roots);
    for (k, &lambda) in energies.iter().enumerate() {
        let cluster: Vec<Vec<f64>> = energies[..k]
            .iter()
            .zip(&ys)
            .filter(|(mu, _)| libm::fabs(lambda - **mu) <= 1e-10 * scale)
            .map(|(_, y)| y.clone())
            .collect();
        ys.push(inverse_iteration(d, e, lambda, k, &cluster, scale));
    }
    let vectors = ys.into_iter().map(|y| tri.back_transform(y)).collect();
    (energies, vectors)
}

/// `A = Q T Qᵀ` with `Q = H_0 H_1 ... H_{n-3}`; reflector `k` is stored in
/// column `k` below the subdiagonal.
struct Tridiagonal {
    n: usize,
    reflectors: Vec<f64>,
    betas: Vec<f64>,
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
}

impl Tridiagonal {
    fn new(mut a: Vec<f64>, n: usize) -> Self {
        let mut betas = vec![0.0; n.saturating_sub(2)];
        let mut off_diagonal = vec![0.0; n - 1];
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let (v, p) = (&mut v[..m], &mut p[..m]);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = a[(k + 1 + i) * n + k];
            }
            let tail: f64 = v[1..].iter().map(|x| x * x).sum();
            if tail == 0.0 {
                off_diagonal[k] = v[0];
                continue;
            }
            let norm = libm::sqrt(v[0] * v[0] + tail);
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let beta = 2.0 / (v[0] * v[0] + tail);
            off_diagonal[k] = alpha;
            betas[k] = beta;

            // p = β A v over the trailing block, from the lower triangle.
            p.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..m {
                let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 1 + i];
                let vi = v[i];
                let mut acc = 0.0;
                for ((aij, vj), pj) in row.iter().zip(&v[..i]).zip(p[..i].iter_mut()) {
                    acc += aij * vj;
                    *pj += aij * vi;
                }
                p[i] += acc + a[(k + 1 + i) * n + k + 1 + i] * vi;
            }
            p.iter_mut().for_each(|x| *x *= beta);
            let kappa = 0.5 * beta * p.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>();
            p.iter_mut().zip(v.iter()).for_each(|(x, y)| *x -= kappa * y);
            // A -= v wᵀ + w vᵀ with w = p.
            for i in 0..m {
                let (vi, wi) = (v[i], p[i]);
                let row = &mut a[(k + 1 + i) * n + k + 1..=(k + 1 + i) * n + k + 1 + i];
                for ((aij, vj), wj) in row.iter_mut().zip(v[..=i].iter()).zip(p[..=i].iter()) {
                    *aij -= vi * wj + wi * vj;
                }
            }
            for (i, vi) in v.iter().enumerate() {
                a[(k + 1 + i) * n + k] = *vi;
            }
        }
        if n >= 2 {
            off_diagonal[n - 2] = a[(n - 1) * n + n - 2];
        }
        let diagonal = (0..n).map(|i| a[i * n + i]).collect();
        Tridiagonal {
            n,
            reflectors: a,
            betas,
            diagonal,
            off_diagonal,
        }
    }

    /// `Q y`.
    fn back_transform(&self, mut y: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        for k in (0..self.betas.len()).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let dotv: f64 = (k + 1..n).map(|i| self.reflectors[i * n + k] * y[i]).sum();
            let c = beta * dotv;
            for (i, yi) in y.iter_mut().enumerate().skip(k + 1) {
                *yi -= c * self.reflectors[i * n + k];
            }
        }
        y
    }
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = d[i] - x - e[i - 1] * e[i - 1] / q;
        }
        if libm::fabs(q) < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { libm::fabs(e[i - 1]) } else { 0.0 } + if i + 1 < n { libm::fabs(e[i]) } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pivmin = f64::MIN_POSITIVE * e.iter().fold(1.0, |m: f64, v| m.max(v * v));
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * width;
    hi += 1e-12 * width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - σ) x = b` by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(d: &[f64], e: &[f64], sigma: f64, b: &mut [f64], tiny: f64) {
    let n = d.len();
    // Row i of U holds columns i, i+1, i+2.
    let mut u = vec![[0.0f64; 3]; n];
    let mut row = [d[0] - sigma, if n > 1 { e[0] } else { 0.0 }, 0.0];
    for i in 0..n - 1 {
        let mut next = [e[i], d[i + 1] - sigma, if i + 2 < n { e[i + 1] } else { 0.0 }];
        if libm::fabs(next[0]) > libm::fabs(row[0]) {
            core::mem::swap(&mut row, &mut next);
            b.swap(i, i + 1);
        }
        if row[0] == 0.0 {
            row[0] = tiny;
        }
        let m = next[0] / row[0];
        b[i + 1] -= m * b[i];
        u[i] = row;
        row = [next[1] - m * row[1], next[2] - m * row[2], 0.0];
    }
    if row[0] == 0.0 {
        row[0] = tiny;
    }
    u[n - 1] = row;
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= u[i][1] * b[i + 1];
        }
        if i + 2 < n {
            v -= u[i][2] * b[i + 2];
        }
        b[i] = v / u[i][0];
    }
}

fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64, k: usize, cluster: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let n = d.len();
    let mut y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * libm::sin(0.7 * (i + 1) as f64 * (k + 1) as f64))
        .collect();
    let tiny = f64::EPSILON * scale;
    for _ in 0..4 {
        let nrm = norm(&y);
        y.iter_mut().for_each(|v| *v /= nrm);
        tridiagonal_solve(d, e, lambda, &mut y, tiny);
        orthonormalize(&mut y, cluster);
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Orthogonalizes `v` against `basis` (twice) and normalizes it. Returns
/// `false` if nothing independent is left.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let before = norm(v);
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let after = norm(v);
    if after <= 1e-8 * before.max(1e-300) || after == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= after);
    true
}

/// Block Davidson with a diagonal preconditioner.
fn davidson(
    ham: &Hamiltonian,
    space: &DeterminantSpace,
    n_roots: usize,
    opts: &FciOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let dim = space.len();
    let diag: Vec<f64> = space.dets().iter().map(|&d| ham.diagonal(d)).collect();
    let max_subspace = (12 * n_roots).max(2 * n_roots + 1).min(dim);

    // Start from the lowest diagonal entries, lightly mixed with a fixed
    // pseudo-random vector so that no symmetry sector is missed.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut rng = 0x2545_F491_4F6C_DD1Du64;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut seed = 0;
    while basis.len() < n_roots {
        let mut v: Vec<f64> = (0..dim)
            .map(|_| {
                rng ^= rng << 13;
                rng ^= rng >> 7;
                rng ^= rng << 17;
                1e-3 * ((rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            })
            .collect();
        if seed < dim {
            v[order[seed]] += 1.0;
        }
        seed += 1;
        if orthonormalize(&mut v, &basis) {
            images.push(ham.apply_in_space(space, &v));
            basis.push(v);
        }
    }

    let mut history = Vec::new();
    for iteration in 1..=opts.max_iterations {
        let k = basis.len();
        let t = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &images[j]));
        let t = (&t + t.transpose()) * 0.5;
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        order.truncate(n_roots);

        let mut ritz = Vec::with_capacity(n_roots);
        let mut ritz_images = Vec::with_capacity(n_roots);
        let mut residuals = Vec::with_capacity(n_roots);
        let mut worst: f64 = 0.0;
        for &i in &order {
            let theta = eig.eigenvalues[i];
            let y = eig.eigenvectors.column(i);
            let mut x = vec![0.0; dim];
            let mut ax = vec![0.0; dim];
            for (c, (b, ab)) in y.iter().zip(basis.iter().zip(&images)) {
                x.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
                ax.iter_mut().zip(ab).for_each(|(o, v)| *o += c * v);
            }
            let r: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a - theta * v).collect();
            worst = worst.max(norm(&r));
            residuals.push((theta, r));
            ritz.push(x);
            ritz_images.push(ax);
        }
        history.push(worst);
        if worst <= opts.residual_tolerance {
            let energies = residuals.iter().map(|r| r.0).collect();
            return Ok((energies, ritz, iteration));
        }

        if basis.len() + n_roots > max_subspace {
            basis = ritz;
            images = ritz_images;
        }
        for (theta, r) in residuals {
            if norm(&r) <= opts.residual_tolerance {
                continue;
            }
            let mut t: Vec<f64> = r
                .iter()
                .zip(&diag)
                .map(|(ri, di)| {
                    let d = theta - di;
                    let d = if libm::fabs(d) < 1e-8 { libm::copysign(1e-8, d) } else { d };
                    ri / d
                })
                .collect();
            if orthonormalize(&mut t, &basis) {
                images.push(ham.apply_in_space(space, &t));
                basis.push(t);
            }
        }
    }
    Err(Error::DavidsonNotConverged {
        iterations: opts.max_iterations,
        residual_history: history,
    })
}

/// Index of the root with the largest Hartree–Fock overlap, preferring the
/// lower energy on ties.
pub fn track_hf_state(sol: &FciSolution) -> HfTracking {
    let mut best = 0;
    for (k, &o) in sol.hf_overlaps.iter().enumerate().skip(1) {
        if o > sol.hf_overlaps[best] + TRACKING_TIE {
            best = k;
        }
    }
    let overlap = sol.hf_overlaps.get(best).copied().unwrap_or(0.0);
    HfTracking {
        index: best,
        overlap,
        reference_lost: overlap < 0.1,
    }
}
