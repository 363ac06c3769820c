//! The qUCC pipeline: optimize the large angles exactly, then expand the
//! energy to second order in all angles and solve for the small ones.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bfgs::{self, max_norm, BfgsOptions};
use crate::det::{Determinant, Excitation};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{quadratic_energy, solve_angle_update, SolvePath};
use crate::mp2::{partition_with_order, RankedFactors, SeedOrder};
use crate::par;
use crate::state::{inner, SparseState};
use crate::ucc::{apply_factor, apply_generator, apply_projector, build_state, FactorList, UccFactor};

/// Largest factor count for which `fd_validation` also checks the Hessian.
pub const FD_HESSIAN_LIMIT: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuccConfig {
    /// Number of exactly treated factors `L`.
    pub large: usize,
    pub gradient_tolerance: f64,
    pub max_optimizer_iterations: usize,
    pub fd_validation: bool,
    pub promotion_threshold: f64,
    pub svd_condition_cutoff: f64,
    pub max_promotion_rounds: usize,
    pub promote_singles: bool,
    pub promote_doubles: bool,
    pub seed_order: SeedOrder,
}

impl Default for QuccConfig {
    fn default() -> Self {
        QuccConfig {
            large: 0,
            gradient_tolerance: 1e-8,
            max_optimizer_iterations: 500,
            fd_validation: false,
            promotion_threshold: 1e-4,
            svd_condition_cutoff: 1e12,
            max_promotion_rounds: 5,
            promote_singles: true,
            promote_doubles: false,
            seed_order: SeedOrder::LargestFirst,
        }
    }
}

impl QuccConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gradient_tolerance) {
            return Err(Error::InvalidConfig("gradient_tolerance must be positive"));
        }
        if !positive(self.promotion_threshold) {
            return Err(Error::InvalidConfig("promotion_threshold must be positive"));
        }
        if !positive(self.svd_condition_cutoff) {
            return Err(Error::InvalidConfig("svd_condition_cutoff must be positive"));
        }
        if self.max_optimizer_iterations == 0 {
            return Err(Error::InvalidConfig("max_optimizer_iterations must be positive"));
        }
        Ok(())
    }
}

/// One angle of the result, identified by its MP2 rank position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleEntry {
    pub rank: usize,
    pub excitation: Excitation,
    pub angle: f64,
}

/// Largest deviations from finite differences at the hand-off point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdCheck {
    pub gradient_max_error: f64,
    /// Only computed when `N` is at most [`FD_HESSIAN_LIMIT`].
    pub hessian_max_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuccResult {
    pub e_reference: f64,
    pub e_ucc_large: f64,
    pub e_qucc: f64,
    /// Optimized angles in application order.
    pub large_angles: Vec<AngleEntry>,
    /// Solved angles in rank order.
    pub small_angles: Vec<AngleEntry>,
    pub b_norm: f64,
    /// Infinity norm of the gradient over the large set.
    pub large_gradient_norm: f64,
    pub a_condition: f64,
    pub a_asymmetry: f64,
    pub solve_path: SolvePath,
    pub promoted_singles: Vec<Excitation>,
    pub promoted_doubles: Vec<Excitation>,
    pub promotion_rounds: usize,
    pub optimizer_iterations: usize,
    pub fd_check: Option<FdCheck>,
}

impl QuccResult {
    pub fn n_factors(&self) -> usize {
        self.large_angles.len() + self.small_angles.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub factors: FactorList,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Gradient and Hessian of the energy with respect to every angle.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub energy: f64,
    pub gradient: Vec<f64>,
    /// Symmetrized.
    pub hessian: DMatrix<f64>,
    /// Largest `|A_km - A_mk|` before symmetrization.
    pub asymmetry: f64,
}

fn start(ham: &Hamiltonian, reference: Determinant) -> Result<SparseState> {
    let psi = SparseState::single(reference, 1.0);
    psi.check_sector(ham.n_spatial(), ham.n_electrons(), ham.ms2())?;
    Ok(psi)
}

/// `<Ψ(θ)|H|Ψ(θ)>`.
pub fn energy(ham: &Hamiltonian, reference: Determinant, factors: &FactorList) -> Result<f64> {
    start(ham, reference)?;
    ham.expectation(&build_state(reference, factors))
}

/// States after each factor: `out[k] = U_k ... U_0 |reference>`.
fn forward(reference: &SparseState, factors: &FactorList) -> Vec<SparseState> {
    let mut out: Vec<SparseState> = Vec::with_capacity(factors.len());
    for f in factors.iter() {
        let next = apply_factor(out.last().unwrap_or(reference), f);
        out.push(next);
    }
    out
}

fn final_state<'a>(reference: &'a SparseState, states: &'a [SparseState]) -> &'a SparseState {
    states.last().unwrap_or(reference)
}

/// `λ_k = U_{k+1}† ... U_{n-1}† H|Ψ>` for every `k` from `lowest` up.
fn backward(factors: &FactorList, h_psi: SparseState, lowest: usize) -> Vec<SparseState> {
    let n = factors.len();
    let mut lambdas = vec![SparseState::new(); n];
    let mut lambda = h_psi;
    for k in (lowest..n).rev() {
        let f = factors.factors()[k];
        let next = apply_factor(&lambda, &UccFactor::new(f.excitation, -f.angle));
        lambdas[k] = lambda;
        lambda = next;
    }
    lambdas
}

fn energy_and_gradient_inner(
    ham: &Hamiltonian,
    reference: &SparseState,
    factors: &FactorList,
    active: &[usize],
) -> Result<(f64, Vec<f64>)> {
    for &k in active {
        if k >= factors.len() {
            return Err(Error::FactorIndexOutOfRange {
                index: k,
                len: factors.len(),
            });
        }
    }
    let states = forward(reference, factors);
    let psi = final_state(reference, &states);
    let h_psi = ham.apply(psi)?;
    let e = inner(psi, &h_psi) / psi.norm_squared();
    let lowest = active.iter().copied().min().unwrap_or(factors.len());
    let lambdas = backward(factors, h_psi, lowest);
    let grad = active
        .iter()
        .map(|&k| {
            // dU_k/dθ U_k† = (τ - τ†), so dΨ/dθ_k = ... (τ_k - τ_k†) φ_k.
            let exc = factors.factors()[k].excitation;
            2.0 * inner(&lambdas[k], &apply_generator(&states[k], &exc))
        })
        .collect();
    Ok((e, grad))
}

/// `b_k = 2<Ψ|H|∂_k Ψ>` for each index in `active` (0-based, in the given order).
pub fn gradient(
    ham: &Hamiltonian,
    reference: Determinant,
    factors: &FactorList,
    active: &[usize],
) -> Result<Vec<f64>> {
    let r = start(ham, reference)?;
    Ok(energy_and_gradient_inner(ham, &r, factors, active)?.1)
}

/// Energy and full gradient in one pass.
pub fn energy_and_gradient(
    ham: &Hamiltonian,
    reference: Determinant,
    factors: &FactorList,
) -> Result<(f64, Vec<f64>)> {
    let r = start(ham, reference)?;
    let all: Vec<usize> = (0..factors.len()).collect();
    energy_and_gradient_inner(ham, &r, factors, &all)
}

/// `A_km = 2<∂_m Ψ|H|∂_k Ψ> + 2<Ψ|H|∂²_km Ψ>` together with `b`.
pub fn hessian(ham: &Hamiltonian, reference: Determinant, factors: &FactorList) -> Result<Derivatives> {
    let r = start(ham, reference)?;
    let n = factors.len();
    let fs = factors.factors();
    let states = forward(&r, factors);
    let psi = final_state(&r, &states);
    let h_psi = ham.apply(psi)?;
    let energy = inner(psi, &h_psi) / psi.norm_squared();
    let lambdas = backward(factors, h_psi, 0);
    // μ_m = (τ_m - τ_m†) λ_m, so <λ_m|(τ_m - τ_m†) ξ> = -<μ_m|ξ>.
    let mus: Vec<SparseState> = par::map(&(0..n).collect::<Vec<_>>(), |&m| {
        apply_generator(&lambdas[m], &fs[m].excitation)
    });

    let columns = par::map(&(0..n).collect::<Vec<_>>(), |&k| -> Result<_> {
        let exc = fs[k].excitation;
        let mut xi = apply_generator(&states[k], &exc);
        let grad = 2.0 * inner(&lambdas[k], &xi);
        let mut second = vec![0.0; n];
        second[k] = -2.0 * inner(&lambdas[k], &apply_projector(&states[k], &exc));
        for m in k + 1..n {
            xi = apply_factor(&xi, &fs[m]);
            second[m] = -2.0 * inner(&mus[m], &xi);
        }
        let h_d = ham.apply(&xi)?;
        Ok((grad, second, xi, h_d))
    });
    let columns: Vec<_> = columns.into_iter().collect::<Result<_>>()?;

    let rows = par::map(&(0..n).collect::<Vec<_>>(), |&k| -> Vec<f64> {
        (0..n).map(|m| 2.0 * inner(&columns[m].2, &columns[k].3)).collect()
    });
    let mut a = DMatrix::zeros(n, n);
    let mut asymmetry: f64 = 0.0;
    for k in 0..n {
        for m in 0..n {
            let second = if m >= k { columns[k].1[m] } else { columns[m].1[k] };
            a[(k, m)] = rows[k][m] + second;
        }
    }
    for k in 0..n {
        for m in k + 1..n {
            asymmetry = asymmetry.max(libm::fabs(rows[k][m] - rows[m][k]));
            let avg = 0.5 * (a[(k, m)] + a[(m, k)]);
            a[(k, m)] = avg;
            a[(m, k)] = avg;
        }
    }
    Ok(Derivatives {
        energy,
        gradient: columns.iter().map(|c| c.0).collect(),
        hessian: a,
        asymmetry,
    })
}

/// Minimizes the energy over the angles of `large`, starting from their
/// current values.
pub fn optimize_large_angles(
    ham: &Hamiltonian,
    reference: Determinant,
    large: &FactorList,
    cfg: &QuccConfig,
) -> Result<Optimized> {
    cfg.validate()?;
    let r = start(ham, reference)?;
    if large.is_empty() {
        return Ok(Optimized {
            factors: large.clone(),
            energy: ham.expectation(&r)?,
            gradient_norm: 0.0,
            iterations: 0,
        });
    }
    let all: Vec<usize> = (0..large.len()).collect();
    let mut failure = None;
    let objective = |x: &[f64]| match large
        .with_angles(x)
        .and_then(|f| energy_and_gradient_inner(ham, &r, &f, &all))
    {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            (f64::NAN, vec![f64::NAN; x.len()])
        }
    };
    let opts = BfgsOptions {
        gradient_tolerance: cfg.gradient_tolerance,
        max_iterations: cfg.max_optimizer_iterations,
        ..BfgsOptions::default()
    };
    let report = bfgs::minimize(objective, &large.angles(), &opts);
    if let Some(e) = failure {
        return Err(e);
    }
    let report = report?;
    Ok(Optimized {
        factors: large.with_angles(&report.x)?,
        energy: report.value,
        gradient_norm: max_norm(&report.gradient),
        iterations: report.iterations,
    })
}

fn shifted(factors: &FactorList, k: usize, h: f64) -> Result<FactorList> {
    let mut angles = factors.angles();
    angles[k] += h;
    factors.with_angles(&angles)
}

/// Central-difference gradient of the energy, step `h`.
pub fn finite_difference_gradient(
    ham: &Hamiltonian,
    reference: Determinant,
    factors: &FactorList,
    h: f64,
) -> Result<Vec<f64>> {
    (0..factors.len())
        .map(|k| {
            let plus = energy(ham, reference, &shifted(factors, k, h)?)?;
            let minus = energy(ham, reference, &shifted(factors, k, -h)?)?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// Second central differences of the energy, step `h`.
pub fn finite_difference_hessian(
    ham: &Hamiltonian,
    reference: Determinant,
    factors: &FactorList,
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = factors.len();
    let e = |dk: (usize, f64), dm: (usize, f64)| -> Result<f64> {
        let mut angles = factors.angles();
        angles[dk.0] += dk.1;
        angles[dm.0] += dm.1;
        energy(ham, reference, &factors.with_angles(&angles)?)
    };
    let e0 = energy(ham, reference, factors)?;
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n {
        a[(k, k)] = (e((k, h), (k, 0.0))? - 2.0 * e0 + e((k, -h), (k, 0.0))?) / (h * h);
        for m in k + 1..n {
            let v = (e((k, h), (m, h))? - e((k, h), (m, -h))? - e((k, -h), (m, h))? + e((k, -h), (m, -h))?)
                / (4.0 * h * h);
            a[(k, m)] = v;
            a[(m, k)] = v;
        }
    }
    Ok(a)
}

fn fd_check(ham: &Hamiltonian, reference: Determinant, factors: &FactorList, d: &Derivatives) -> Result<FdCheck> {
    let fd = finite_difference_gradient(ham, reference, factors, 1e-5)?;
    let gradient_max_error = fd
        .iter()
        .zip(&d.gradient)
        .fold(0.0, |m: f64, (a, b)| m.max(libm::fabs(a - b)));
    let hessian_max_error = if factors.len() <= FD_HESSIAN_LIMIT {
        let fd = finite_difference_hessian(ham, reference, factors, 1e-4)?;
        Some((fd - &d.hessian).amax())
    } else {
        None
    };
    Ok(FdCheck {
        gradient_max_error,
        hessian_max_error,
    })
}

fn in_round(round: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Round {
        round,
        source: Box::new(e),
    }
}

/// Runs the full pipeline on the MP2 ranking: optimize the first `cfg.large`
/// factors, solve the quadratic model for the rest, promote small factors
/// whose solved angle exceeds the threshold and repeat.
pub fn promote_and_iterate(
    ham: &Hamiltonian,
    reference: Determinant,
    ranked: &RankedFactors,
    cfg: &QuccConfig,
) -> Result<QuccResult> {
    cfg.validate()?;
    let r = start(ham, reference)?;
    let e_reference = ham.expectation(&r)?;
    let (mut large, small) = partition_with_order(ranked, cfg.large, cfg.seed_order)?;
    let mut large_ranks: Vec<usize> = (0..cfg.large).collect();
    if cfg.seed_order == SeedOrder::LargestLast {
        large_ranks.reverse();
    }
    let mut small_ranks: Vec<usize> = (cfg.large..ranked.len()).collect();
    let mut small: Vec<UccFactor> = small.factors().to_vec();
    let mut promoted_singles = Vec::new();
    let mut promoted_doubles = Vec::new();
    let mut promotion_rounds = 0;
    let mut optimizer_iterations = 0;

    loop {
        let round = promotion_rounds;
        let opt = optimize_large_angles(ham, reference, &large, cfg).map_err(in_round(round))?;
        optimizer_iterations += opt.iterations;
        large = opt.factors;
        let full = large.concat(&FactorList::new(small.clone())?)?;
        let d = hessian(ham, reference, &full).map_err(in_round(round))?;
        let update = solve_angle_update(&d.hessian, &d.gradient, cfg.svd_condition_cutoff).map_err(in_round(round))?;
        let nl = large.len();

        let promote: Vec<usize> = (0..small.len())
            .filter(|&j| {
                let rank = small[j].excitation.rank();
                let eligible = (rank == 1 && cfg.promote_singles) || (rank == 2 && cfg.promote_doubles);
                eligible && libm::fabs(update.delta[nl + j]) > cfg.promotion_threshold
            })
            .collect();

        if promote.is_empty() || promotion_rounds >= cfg.max_promotion_rounds {
            let e_ucc_large = d.energy;
            let e_qucc = quadratic_energy(e_ucc_large, &d.gradient, &d.hessian, &update.delta)?;
            let fd = if cfg.fd_validation {
                Some(fd_check(ham, reference, &full, &d)?)
            } else {
                None
            };
            let large_angles = large
                .iter()
                .zip(&large_ranks)
                .map(|(f, &rank)| AngleEntry {
                    rank,
                    excitation: f.excitation,
                    angle: f.angle,
                })
                .collect();
            let small_angles = small
                .iter()
                .zip(&small_ranks)
                .enumerate()
                .map(|(j, (f, &rank))| AngleEntry {
                    rank,
                    excitation: f.excitation,
                    angle: update.delta[nl + j],
                })
                .collect();
            return Ok(QuccResult {
                e_reference,
                e_ucc_large,
                e_qucc,
                large_angles,
                small_angles,
                b_norm: libm::sqrt(d.gradient.iter().map(|v| v * v).sum()),
                large_gradient_norm: max_norm(&d.gradient[..nl]),
                a_condition: update.condition,
                a_asymmetry: d.asymmetry,
                solve_path: update.path,
                promoted_singles,
                promoted_doubles,
                promotion_rounds,
                optimizer_iterations,
                fd_check: fd,
            });
        }

        promotion_rounds += 1;
        let mut grown: Vec<UccFactor> = large.factors().to_vec();
        for &j in &promote {
            let exc = small[j].excitation;
            grown.push(UccFactor::new(exc, update.delta[nl + j]));
            large_ranks.push(small_ranks[j]);
            if exc.rank() == 1 {
                promoted_singles.push(exc);
            } else {
                promoted_doubles.push(exc);
            }
        }
        large = FactorList::new(grown)?;
        let keep: Vec<bool> = (0..small.len()).map(|j| !promote.contains(&j)).collect();
        small = small.iter().zip(&keep).filter(|x| *x.1).map(|x| *x.0).collect();
        small_ranks = small_ranks.iter().zip(&keep).filter(|x| *x.1).map(|x| *x.0).collect();
    }
}
