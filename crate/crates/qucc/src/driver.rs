//! Single-point calculations on one integral set.

use std::time::Instant;

use qucc_core::fci::{fci_solve, track_hf_state, FciMethod, FciSolution, HfTracking};
use qucc_core::mp2::{mp2_amplitudes, mp2_energy, partition_with_order, RankedFactors, SeedOrder};
use qucc_core::solver::{optimize_large_angles, promote_and_iterate, AngleEntry, QuccConfig, QuccResult};
use qucc_core::{Determinant, Error, Hamiltonian, IntegralSet, SolvePath};
use serde::Serialize;

use crate::manifest::{Large, Method};

/// Integrals with the objects derived from them once per system.
pub struct System {
    pub integrals: IntegralSet,
    pub hamiltonian: Hamiltonian,
    pub reference: Determinant,
    ranked: Option<RankedFactors>,
    fci: Option<FciSolution>,
}

impl System {
    pub fn new(integrals: IntegralSet) -> Self {
        let hamiltonian = Hamiltonian::new(&integrals);
        let reference = integrals.hartree_fock();
        System {
            integrals,
            hamiltonian,
            reference,
            ranked: None,
            fci: None,
        }
    }

    pub fn ranked(&mut self) -> Result<&RankedFactors, Error> {
        if self.ranked.is_none() {
            self.ranked = Some(mp2_amplitudes(&self.integrals, self.reference)?);
        }
        Ok(self.ranked.as_ref().expect("just filled"))
    }

    pub fn hf_energy(&self) -> f64 {
        self.integrals.hf_energy(self.reference)
    }

    /// Lowest `n_roots` FCI states (fewer if the space is smaller), reused
    /// while enough roots are cached.
    pub fn fci(&mut self, n_roots: usize) -> Result<&FciSolution, Error> {
        let ints = &self.integrals;
        let roots = n_roots.min(fci_dimension(ints));
        if self.fci.as_ref().is_none_or(|s| s.energies.len() < roots) {
            self.fci = Some(fci_solve(&self.hamiltonian, ints.n_alpha(), ints.n_beta(), roots)?);
        }
        Ok(self.fci.as_ref().expect("just filled"))
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn fci_dimension(ints: &IntegralSet) -> usize {
    binomial(ints.n_spatial(), ints.n_alpha()) * binomial(ints.n_spatial(), ints.n_beta())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub large: Large,
    pub promote_singles: bool,
    pub promote_doubles: bool,
    pub fd_check: bool,
    pub seed_order: SeedOrder,
    /// FCI roots to compute; tracking needs more than one.
    pub roots: usize,
    pub track_hf: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            large: Large::Count(0),
            promote_singles: true,
            promote_doubles: false,
            fd_check: false,
            seed_order: SeedOrder::LargestFirst,
            roots: 4,
            track_hf: false,
        }
    }
}

impl RunOptions {
    pub fn config(&self, large: usize) -> QuccConfig {
        QuccConfig {
            large,
            fd_validation: self.fd_check,
            promote_singles: self.promote_singles,
            promote_doubles: self.promote_doubles,
            seed_order: self.seed_order,
            ..QuccConfig::default()
        }
    }

    pub fn fci_roots(&self) -> usize {
        if self.track_hf {
            self.roots.max(2)
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleRecord {
    pub rank: usize,
    pub excitation: String,
    pub angle: f64,
}

impl From<&AngleEntry> for AngleRecord {
    fn from(a: &AngleEntry) -> Self {
        AngleRecord {
            rank: a.rank,
            excitation: a.excitation.to_string(),
            angle: a.angle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FciRecord {
    pub dimension: usize,
    pub solver: String,
    pub energies: Vec<f64>,
    pub hf_overlaps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub tracked_index: usize,
    pub tracked_overlap: f64,
    pub reference_lost: bool,
}

impl FciRecord {
    pub fn new(sol: &FciSolution, tracking: &HfTracking) -> Self {
        FciRecord {
            dimension: sol.dimension,
            solver: match sol.method {
                FciMethod::Dense => "dense".to_string(),
                FciMethod::Davidson { iterations } => format!("davidson({iterations})"),
            },
            energies: sol.energies.clone(),
            hf_overlaps: sol.hf_overlaps.clone(),
            residuals: sol.residuals.clone(),
            tracked_index: tracking.index,
            tracked_overlap: tracking.overlap,
            reference_lost: tracking.reference_lost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UccRecord {
    pub e_ucc: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub angles: Vec<AngleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdRecord {
    pub gradient_max_error: f64,
    pub hessian_max_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuccRecord {
    pub e_reference: f64,
    pub e_ucc_large: f64,
    pub e_qucc: f64,
    pub large_angles: Vec<AngleRecord>,
    pub small_angles: Vec<AngleRecord>,
    pub b_norm: f64,
    pub large_gradient_norm: f64,
    pub a_condition: f64,
    pub a_asymmetry: f64,
    pub solve_path: String,
    pub pseudoinverse_rank: Option<usize>,
    pub promoted_singles: Vec<String>,
    pub promoted_doubles: Vec<String>,
    pub promotion_rounds: usize,
    pub optimizer_iterations: usize,
    pub fd_check: Option<FdRecord>,
}

impl From<&QuccResult> for QuccRecord {
    fn from(r: &QuccResult) -> Self {
        let (solve_path, pseudoinverse_rank) = match r.solve_path {
            SolvePath::Direct => ("direct".to_string(), None),
            SolvePath::Pseudoinverse { rank } => ("pseudoinverse".to_string(), Some(rank)),
        };
        QuccRecord {
            e_reference: r.e_reference,
            e_ucc_large: r.e_ucc_large,
            e_qucc: r.e_qucc,
            large_angles: r.large_angles.iter().map(Into::into).collect(),
            small_angles: r.small_angles.iter().map(Into::into).collect(),
            b_norm: r.b_norm,
            large_gradient_norm: r.large_gradient_norm,
            a_condition: r.a_condition,
            a_asymmetry: r.a_asymmetry,
            solve_path,
            pseudoinverse_rank,
            promoted_singles: r.promoted_singles.iter().map(|e| e.to_string()).collect(),
            promoted_doubles: r.promoted_doubles.iter().map(|e| e.to_string()).collect(),
            promotion_rounds: r.promotion_rounds,
            optimizer_iterations: r.optimizer_iterations,
            fd_check: r.fd_check.map(|f| FdRecord {
                gradient_max_error: f.gradient_max_error,
                hessian_max_error: f.hessian_max_error,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub method: Method,
    pub n_spatial: usize,
    pub n_electrons: usize,
    pub ms2: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_factors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub large: Option<usize>,
    /// The method's headline energy.
    pub energy: f64,
    pub e_reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_mp2_correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fci: Option<FciRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ucc: Option<UccRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qucc: Option<QuccRecord>,
    pub wall_seconds: f64,
}

/// Runs one method.
pub fn run(system: &mut System, method: Method, opts: &RunOptions) -> Result<RunRecord, Error> {
    let clock = Instant::now();
    let e_reference = system.hf_energy();
    let ints = &system.integrals;
    let mut record = RunRecord {
        method,
        n_spatial: ints.n_spatial(),
        n_electrons: ints.n_electrons(),
        ms2: ints.ms2(),
        n_factors: None,
        large: None,
        energy: e_reference,
        e_reference,
        e_mp2_correlation: None,
        fci: None,
        ucc: None,
        qucc: None,
        wall_seconds: 0.0,
    };
    match method {
        Method::Hf => {}
        Method::Mp2 => {
            let corr = mp2_energy(&system.integrals, system.reference)?;
            record.e_mp2_correlation = Some(corr);
            record.energy = e_reference + corr;
        }
        Method::Fci => {
            let sol = system.fci(opts.fci_roots())?;
            let tracking = track_hf_state(sol);
            record.energy = if opts.track_hf {
                sol.energies[tracking.index]
            } else {
                sol.energies[0]
            };
            record.fci = Some(FciRecord::new(sol, &tracking));
        }
        Method::Ucc => {
            let seed_order = opts.seed_order;
            let cfg = opts.config(0);
            let ranked = system.ranked()?;
            let n = ranked.len();
            let large = opts.large.resolve(n);
            let (factors, _) = partition_with_order(ranked, large, seed_order)?;
            let opt = optimize_large_angles(&system.hamiltonian, system.reference, &factors, &cfg)?;
            record.n_factors = Some(n);
            record.large = Some(large);
            record.energy = opt.energy;
            let mut ranks: Vec<usize> = (0..large).collect();
            if seed_order == SeedOrder::LargestLast {
                ranks.reverse();
            }
            record.ucc = Some(UccRecord {
                e_ucc: opt.energy,
                gradient_norm: opt.gradient_norm,
                iterations: opt.iterations,
                angles: opt
                    .factors
                    .iter()
                    .zip(ranks)
                    .map(|(f, rank)| AngleRecord {
                        rank,
                        excitation: f.excitation.to_string(),
                        angle: f.angle,
                    })
                    .collect(),
            });
        }
        Method::Qucc => {
            let ranked = system.ranked()?.clone();
            let large = opts.large.resolve(ranked.len());
            let r = promote_and_iterate(&system.hamiltonian, system.reference, &ranked, &opts.config(large))?;
            record.n_factors = Some(ranked.len());
            record.large = Some(large);
            record.energy = r.e_qucc;
            record.qucc = Some((&r).into());
        }
    }
    record.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(record)
}
