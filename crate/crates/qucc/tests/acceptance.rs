//! End-to-end acceptance checks on the fixture set. Prints one line per
//! check and exits nonzero if any fails.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qucc::driver::{run, RunOptions, System};
use qucc::manifest::{Large, Method, MethodSpec, ScanManifest};
use qucc::scan::{scan, ScanOptions};
use qucc_core::mp2::partition;
use qucc_core::solver::{energy, gradient, hessian, optimize_large_angles};
use qucc_core::{
    promote_and_iterate, Determinant, FactorList, IntegralSet, QuccConfig, QuccResult, SolvePath, SparseState,
    UccFactor,
};

mod common;

type Outcome = Result<String, String>;

const H6: [&str; 6] = ["h6_0.6", "h6_0.8", "h6_1.2", "h6_1.6", "h6_2.0", "h6_2.4"];
const BEH2: [&str; 4] = ["beh2_0.0", "beh2_1.0", "beh2_1.75", "beh2_2.4"];

struct Fixtures {
    systems: HashMap<String, System>,
    promoted: HashMap<String, QuccResult>,
}

impl Fixtures {
    fn system(&mut self, label: &str) -> &mut System {
        self.systems
            .entry(label.to_string())
            .or_insert_with(|| System::new(common::load(label).integrals))
    }

    /// H6 at `L = 50` with single promotion.
    fn promoted(&mut self, label: &str) -> Result<&QuccResult, String> {
        if !self.promoted.contains_key(label) {
            let r = qucc_run(self.system(label), 50, true)?;
            self.promoted.insert(label.to_string(), r);
        }
        Ok(&self.promoted[label])
    }
}

fn qucc_run(sys: &mut System, large: usize, promote_singles: bool) -> Result<QuccResult, String> {
    let ranked = sys.ranked().map_err(|e| e.to_string())?.clone();
    let cfg = QuccConfig {
        large,
        promote_singles,
        ..QuccConfig::default()
    };
    promote_and_iterate(&sys.hamiltonian, sys.reference, &ranked, &cfg).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn full_list(large: &FactorList, small: &FactorList) -> FactorList {
    let zeros: Vec<UccFactor> = small.iter().map(|f| UccFactor::new(f.excitation, 0.0)).collect();
    large.concat(&FactorList::new(zeros).unwrap()).unwrap()
}

fn fd_energy(sys: &System, f: &FactorList, shifts: &[(usize, f64)]) -> f64 {
    let mut angles = f.angles();
    for &(k, h) in shifts {
        angles[k] += h;
    }
    energy(&sys.hamiltonian, sys.reference, &f.with_angles(&angles).unwrap()).unwrap()
}

fn factor_counts(fx: &mut Fixtures) -> Outcome {
    let expected = [("h6_0.8", 18, 99), ("h8_0.8", 32, 328), ("h10_1.0", 50, 825), ("beh2_0.0", 24, 180)];
    let mut detail = Vec::new();
    for (label, singles, doubles) in expected {
        let ranked = fx.system(label).ranked().map_err(|e| e.to_string())?;
        let s = ranked.entries().iter().filter(|e| e.excitation.rank() == 1).count();
        let d = ranked.doubles().count();
        ensure(s == singles && d == doubles, || format!("{label}: {s}+{d}, expected {singles}+{doubles}"))?;
        detail.push(format!("{label} {s}+{d}"));
    }
    Ok(detail.join(", "))
}

fn integral_bound(fx: &mut Fixtures) -> Outcome {
    let ints = &fx.system("h10_1.0").integrals;
    let (one, two) = (ints.unique_one_body_count(), ints.unique_two_body_count());
    ensure(one <= 100 && two <= 1540, || format!("one-body {one}, two-body {two}"))?;
    Ok(format!("one-body {one} <= 100, two-body {two} <= 1540"))
}

fn h2_exact(fx: &mut Fixtures) -> Outcome {
    let sys = fx.system("h2_0.7414");
    let opts = RunOptions {
        large: Large::Count(1),
        ..RunOptions::default()
    };
    let ucc = run(sys, Method::Ucc, &opts).map_err(|e| e.to_string())?.energy;
    let fci = sys.fci(1).map_err(|e| e.to_string())?.energies[0];
    let diff = (ucc - fci).abs();
    ensure(diff <= 1e-10, || format!("|UCC - FCI| = {diff:.3e}"))?;
    Ok(format!("|UCC - FCI| = {diff:.3e}"))
}

fn gradient_check(fx: &mut Fixtures) -> Outcome {
    let sys = fx.system("h4_1.0");
    let ranked = sys.ranked().map_err(|e| e.to_string())?.clone();
    let (large, small) = partition(&ranked, 5).map_err(|e| e.to_string())?;
    let opt = optimize_large_angles(&sys.hamiltonian, sys.reference, &large, &QuccConfig::default())
        .map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst = Vec::new();
    for (name, lg) in [("seed", &large), ("optimized", &opt.factors)] {
        let f = full_list(lg, &small);
        let all: Vec<usize> = (0..f.len()).collect();
        let b = gradient(&sys.hamiltonian, sys.reference, &f, &all).map_err(|e| e.to_string())?;
        let fd: Vec<f64> = (0..f.len())
            .map(|k| (fd_energy(sys, &f, &[(k, h)]) - fd_energy(sys, &f, &[(k, -h)])) / (2.0 * h))
            .collect();
        let err = max_abs_diff(&b, &fd);
        ensure(err <= 1e-6, || format!("{name}: max error {err:.3e}"))?;
        worst.push(format!("{name} {err:.2e}"));
    }
    Ok(format!("N = {}, max |b - fd|: {}", ranked.len(), worst.join(", ")))
}

fn hessian_check(fx: &mut Fixtures) -> Outcome {
    let sys = fx.system("h4_1.0");
    let ranked = sys.ranked().map_err(|e| e.to_string())?.clone();
    let (large, small) = partition(&ranked, 5).map_err(|e| e.to_string())?;
    let opt = optimize_large_angles(&sys.hamiltonian, sys.reference, &large, &QuccConfig::default())
        .map_err(|e| e.to_string())?;
    let f = full_list(&opt.factors, &small);
    let n = f.len();
    ensure(n == 26, || format!("N = {n}"))?;
    let a = hessian(&sys.hamiltonian, sys.reference, &f).map_err(|e| e.to_string())?.hessian;
    let h = 1e-4;
    let e0 = fd_energy(sys, &f, &[]);
    let mut err: f64 = 0.0;
    for k in 0..n {
        let d = (fd_energy(sys, &f, &[(k, h)]) - 2.0 * e0 + fd_energy(sys, &f, &[(k, -h)])) / (h * h);
        err = err.max((a[(k, k)] - d).abs());
        for m in k + 1..n {
            let d = (fd_energy(sys, &f, &[(k, h), (m, h)]) - fd_energy(sys, &f, &[(k, h), (m, -h)])
                - fd_energy(sys, &f, &[(k, -h), (m, h)])
                + fd_energy(sys, &f, &[(k, -h), (m, -h)]))
                / (4.0 * h * h);
            err = err.max((a[(k, m)] - d).abs()).max((a[(m, k)] - d).abs());
        }
    }
    ensure(err <= 1e-4, || format!("max |A - fd| = {err:.3e}"))?;
    Ok(format!("N = 26, max |A - fd| = {err:.3e}"))
}

fn sandwich(fx: &mut Fixtures) -> Outcome {
    let mut worst = f64::INFINITY;
    for r in common::references() {
        let sys = fx.system(&r.label);
        let roots = if r.label.starts_with("beh2") { 4 } else { 1 };
        let e_fci = sys.fci(roots).map_err(|e| e.to_string())?.energies[0];
        let e_hf = sys.hf_energy();
        let n = sys.ranked().map_err(|e| e.to_string())?.len();
        let opts = RunOptions {
            large: Large::Count(n.min(30)),
            ..RunOptions::default()
        };
        let e = run(sys, Method::Ucc, &opts).map_err(|e| e.to_string())?.energy;
        ensure(e_fci <= e + 1e-9 && e <= e_hf + 1e-9, || {
            format!("{}: FCI {e_fci:.10} UCC {e:.10} HF {e_hf:.10}", r.label)
        })?;
        worst = worst.min(e - e_fci).min(e_hf - e);
    }
    Ok(format!("16 geometries, smallest margin {worst:.3e}"))
}

fn stationary(fx: &mut Fixtures) -> Outcome {
    let mut detail = Vec::new();
    for label in ["h4_1.0", "h6_0.8"] {
        let sys = fx.system(label);
        let n = sys.ranked().map_err(|e| e.to_string())?.len();
        let r = qucc_run(sys, n, true)?;
        let gap = (r.e_qucc - r.e_ucc_large).abs();
        ensure(gap <= 1e-8, || format!("{label}: gap {gap:.3e}"))?;
        detail.push(format!("{label} L = {n} gap {gap:.2e}"));
    }
    Ok(detail.join(", "))
}

/// `A x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let pivot = a[c].clone();
        for r in c + 1..n {
            let f = a[r][c] / pivot[c];
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn closed_form(fx: &mut Fixtures) -> Outcome {
    let mut detail = Vec::new();
    for (label, large) in [("h4_1.0", 5), ("h6_0.8", 20), ("h6_1.6", 30)] {
        let sys = fx.system(label);
        let r = qucc_run(sys, large, false)?;
        ensure(r.solve_path == SolvePath::Direct, || format!("{label}: {:?}", r.solve_path))?;
        let factors: Vec<UccFactor> = r
            .large_angles
            .iter()
            .map(|a| UccFactor::new(a.excitation, a.angle))
            .chain(r.small_angles.iter().map(|a| UccFactor::new(a.excitation, 0.0)))
            .collect();
        let f = FactorList::new(factors).map_err(|e| e.to_string())?;
        let d = hessian(&sys.hamiltonian, sys.reference, &f).map_err(|e| e.to_string())?;
        let n = f.len();
        let rows = (0..n).map(|i| (0..n).map(|j| d.hessian[(i, j)]).collect()).collect();
        let x = gauss_solve(rows, d.gradient.clone());
        let closed = d.energy - 0.5 * d.gradient.iter().zip(&x).map(|(b, x)| b * x).sum::<f64>();
        let diff = (r.e_qucc - closed).abs();
        ensure(diff <= 1e-10, || format!("{label}: |e_qucc - closed form| = {diff:.3e}"))?;
        detail.push(format!("{label} L = {large} {diff:.2e}"));
    }
    Ok(detail.join(", "))
}

fn convergence_trend(fx: &mut Fixtures) -> Outcome {
    let mut detail = Vec::new();
    for (label, allowed) in [("h6_1.6", 0), ("h6_2.0", 1)] {
        let sys = fx.system(label);
        let opts = RunOptions {
            large: Large::All,
            ..RunOptions::default()
        };
        let full = run(sys, Method::Ucc, &opts).map_err(|e| e.to_string())?.energy;
        let mut diffs = Vec::new();
        for large in [20, 30, 40, 50] {
            diffs.push((qucc_run(fx.system(label), large, false)?.e_qucc - full).abs());
        }
        let last = fx.promoted(label)?;
        let size = last.large_angles.len();
        ensure(size == 58, || format!("{label}: final large set {size}"))?;
        diffs.push((last.e_qucc - full).abs());
        let rises = diffs.windows(2).filter(|w| w[1] > w[0]).count();
        let shown: Vec<String> = diffs.iter().map(|d| format!("{d:.1e}")).collect();
        ensure(rises <= allowed && diffs[4] <= 1e-4, || {
            format!("{label}: {} with {rises} rises", shown.join(" "))
        })?;
        detail.push(format!("{label} [{}]", shown.join(" ")));
    }
    Ok(detail.join(", "))
}

fn promotion(fx: &mut Fixtures) -> Outcome {
    let mut union = BTreeSet::new();
    let mut counts = Vec::new();
    for label in H6 {
        let r = fx.promoted(label)?;
        let size = r.large_angles.len();
        ensure(size == 58, || format!("{label}: final large set {size}"))?;
        ensure(r.promoted_doubles.is_empty(), || format!("{label}: doubles promoted"))?;
        counts.push(r.promoted_singles.len().to_string());
        union.extend(r.promoted_singles.iter().map(|e| e.to_string()));
    }
    ensure(union.len() == 8, || format!("union of promoted singles {}", union.len()))?;
    Ok(format!("50 + 8 = 58, per geometry [{}], union {}", counts.join(" "), union.len()))
}

fn annihilate(det: u64, p: usize) -> Option<(u64, f64)> {
    if det >> p & 1 == 0 {
        return None;
    }
    let sign = if (det & ((1u64 << p) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((det & !(1u64 << p), sign))
}

fn create(det: u64, p: usize) -> Option<(u64, f64)> {
    if det >> p & 1 == 1 {
        return None;
    }
    let sign = if (det & ((1u64 << p) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((det | 1u64 << p, sign))
}

/// `H|det>` from the raw spatial integrals, term by term.
fn brute_force_column(ints: &IntegralSet, det: u64) -> HashMap<u64, f64> {
    let m = ints.n_spatial();
    let k = 2 * m;
    let mut out: HashMap<u64, f64> = HashMap::new();
    *out.entry(det).or_default() += ints.core_energy();
    for p in 0..k {
        for q in 0..k {
            if p / m != q / m {
                continue;
            }
            let h = ints.one_body(p % m, q % m);
            if h == 0.0 {
                continue;
            }
            let Some((d1, s1)) = annihilate(det, q) else { continue };
            let Some((d2, s2)) = create(d1, p) else { continue };
            *out.entry(d2).or_default() += h * s1 * s2;
        }
    }
    // 1/2 sum <pq|rs> a†_p a†_q a_s a_r with <pq|rs> = (pr|qs).
    for p in 0..k {
        for q in 0..k {
            for r in 0..k {
                if p / m != r / m {
                    continue;
                }
                for s in 0..k {
                    if q / m != s / m {
                        continue;
                    }
                    let v = ints.two_body(p % m, r % m, q % m, s % m);
                    if v == 0.0 {
                        continue;
                    }
                    let Some((d1, s1)) = annihilate(det, r) else { continue };
                    let Some((d2, s2)) = annihilate(d1, s) else { continue };
                    let Some((d3, s3)) = create(d2, q) else { continue };
                    let Some((d4, s4)) = create(d3, p) else { continue };
                    *out.entry(d4).or_default() += 0.5 * v * s1 * s2 * s3 * s4;
                }
            }
        }
    }
    out
}

fn sector(ints: &IntegralSet) -> Vec<u64> {
    let m = ints.n_spatial();
    let mask = (1u64 << m) - 1;
    (0..1u64 << (2 * m))
        .filter(|d| {
            (d & mask).count_ones() as usize == ints.n_alpha() && (d >> m).count_ones() as usize == ints.n_beta()
        })
        .collect()
}

fn matrix_free(fx: &mut Fixtures) -> Outcome {
    let mut labels = vec!["h2_0.7414", "h4_1.0"];
    labels.extend(H6);
    labels.extend(BEH2);
    let mut worst: f64 = 0.0;
    let mut dims = Vec::new();
    for label in labels {
        let sys = fx.system(label);
        let dets = sector(&sys.integrals);
        ensure(dets.len() <= 2000, || format!("{label}: dimension {}", dets.len()))?;
        dims.push(dets.len());
        for &d in &dets {
            let expected = brute_force_column(&sys.integrals, d);
            let got = sys
                .hamiltonian
                .apply(&SparseState::single(Determinant::from_bits(d), 1.0))
                .map_err(|e| e.to_string())?;
            for &row in &dets {
                let a = got.get(Determinant::from_bits(row));
                let b = expected.get(&row).copied().unwrap_or(0.0);
                worst = worst.max((a - b).abs());
            }
            let stray = got.iter().any(|(x, v)| v != 0.0 && dets.binary_search(&x.bits()).is_err());
            ensure(!stray, || format!("{label}: output outside the sector"))?;
        }
        ensure(worst <= 1e-12, || format!("{label}: max deviation {worst:.3e}"))?;
    }
    Ok(format!("dimensions {dims:?}, max deviation {worst:.2e}"))
}

fn tracking(fx: &mut Fixtures) -> Outcome {
    let opts = RunOptions {
        track_hf: true,
        ..RunOptions::default()
    };
    let inside = run(fx.system("beh2_1.75"), Method::Fci, &opts).map_err(|e| e.to_string())?;
    let fci = inside.fci.as_ref().ok_or("no FCI record")?;
    ensure(fci.tracked_index != 0, || "tracked index 0 at 1.75".to_string())?;
    ensure(inside.energy == fci.energies[fci.tracked_index], || {
        "tracked energy not used".to_string()
    })?;

    let manifest = common::manifest();
    let entries = manifest.entries.iter().filter(|e| e.label == "beh2_1.75").cloned().collect();
    let manifest = ScanManifest {
        entries,
        methods: Vec::new(),
    };
    let spec: MethodSpec = "fci".parse().map_err(|e: qucc::manifest::ManifestError| e.to_string())?;
    let rows = scan(
        &manifest,
        Some(&[spec]),
        &ScanOptions {
            run: opts,
            omit_timing: true,
        },
    );
    ensure(rows[0].energy == Some(inside.energy), || "scan benchmark differs".to_string())?;

    let outside = run(fx.system("beh2_0.0"), Method::Fci, &opts).map_err(|e| e.to_string())?;
    let out_fci = outside.fci.as_ref().ok_or("no FCI record")?;
    ensure(out_fci.tracked_index == 0, || format!("tracked index {} at 0.0", out_fci.tracked_index))?;
    Ok(format!(
        "1.75: index {} E = {:.10} (overlap {:.3}), 0.0: index 0",
        fci.tracked_index, inside.energy, fci.tracked_overlap
    ))
}

type Check = fn(&mut Fixtures) -> Outcome;

fn main() -> ExitCode {
    let checks: [(&str, Check, u64); 12] = [
        ("factor counts", factor_counts, 1),
        ("integral store bound", integral_bound, 1),
        ("H2 exactness", h2_exact, 1),
        ("gradient vs finite differences", gradient_check, 30),
        ("hessian vs finite differences", hessian_check, 300),
        ("variational sandwich", sandwich, 600),
        ("stationary-point identity", stationary, 600),
        ("closed-form identity", closed_form, 60),
        ("convergence trend", convergence_trend, 1800),
        ("promotion set sizes", promotion, 1800),
        ("matrix-free equivalence", matrix_free, 300),
        ("BeH2 state tracking", tracking, 300),
    ];
    let mut fx = Fixtures {
        systems: HashMap::new(),
        promoted: HashMap::new(),
    };
    let mut failures = 0;
    let stdout = std::io::stdout();
    for (i, (name, check, limit)) in checks.into_iter().enumerate() {
        let clock = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut fx)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = clock.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed > Duration::from_secs(limit) {
                Err(format!("{d}; over the {limit} s budget"))
            } else {
                Ok(d)
            }
        });
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        let mut out = stdout.lock();
        writeln!(out, "{status} {:>2} {name}: {detail} ({:.2} s)", i + 1, elapsed.as_secs_f64()).unwrap();
        out.flush().unwrap();
    }
    writeln!(stdout.lock(), "{} of 12 passed", 12 - failures).unwrap();
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
