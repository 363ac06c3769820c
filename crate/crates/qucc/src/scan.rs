//! Geometry scans: every (entry × method × L) combination as one CSV row.

use std::io::Write;
use std::time::Instant;

use qucc_core::fci::track_hf_state;
use rayon::prelude::*;

use crate::driver::{run, RunOptions, System};
use crate::fcidump::read_fcidump;
use crate::manifest::{Entry, Large, Method, MethodSpec, ScanManifest};

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub label: String,
    pub geometry_parameter: f64,
    pub method: Method,
    pub large: Option<usize>,
    pub energy: Option<f64>,
    pub e_minus_fci: Option<f64>,
    pub promoted_singles: Option<usize>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScanOptions {
    pub run: RunOptions,
    /// Leave `wall_seconds` empty so that output is byte-stable.
    pub omit_timing: bool,
}

pub const COLUMNS: [&str; 9] = [
    "label",
    "geometry_parameter",
    "method",
    "L",
    "energy_hartree",
    "e_minus_fci",
    "promoted_singles",
    "wall_seconds",
    "error",
];

fn jobs(methods: &[MethodSpec]) -> Vec<(Method, Option<Large>, Option<bool>)> {
    let mut out = Vec::new();
    for m in methods {
        if m.name.uses_large() {
            out.extend(m.large.iter().map(|&l| (m.name, Some(l), m.promote_singles)));
        } else {
            out.push((m.name, None, m.promote_singles));
        }
    }
    out
}

fn scan_entry(entry: &Entry, methods: &[MethodSpec], opts: &ScanOptions) -> Vec<ScanRow> {
    let jobs = jobs(methods);
    let row = |method: Method, large: Option<usize>| ScanRow {
        label: entry.label.clone(),
        geometry_parameter: entry.geometry_parameter,
        method,
        large,
        energy: None,
        e_minus_fci: None,
        promoted_singles: None,
        wall_seconds: 0.0,
        error: None,
    };
    let fail = |message: String| -> Vec<ScanRow> {
        jobs.iter()
            .map(|&(m, l, _)| ScanRow {
                error: Some(message.clone()),
                ..row(m, l.and_then(|l| if let Large::Count(n) = l { Some(n) } else { None }))
            })
            .collect()
    };

    let mut dump = match read_fcidump(&entry.fcidump) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    if !dump.has_core_energy {
        if let Some(core) = entry.core_energy {
            dump.integrals.set_core_energy(core);
        }
    }
    let mut system = System::new(dump.integrals);

    let fci_clock = Instant::now();
    let benchmark = system.fci(opts.run.fci_roots()).map(|sol| {
        let tracking = track_hf_state(sol);
        if opts.run.track_hf {
            sol.energies[tracking.index]
        } else {
            sol.energies[0]
        }
    });
    let fci_seconds = fci_clock.elapsed().as_secs_f64();
    let benchmark = benchmark.map_err(|e| e.to_string());

    let mut rows = Vec::with_capacity(jobs.len());
    for (method, large, promote) in jobs {
        let n = system.ranked().map(|r| r.len()).unwrap_or(0);
        let resolved = large.map(|l| l.resolve(n));
        let mut out = row(method, resolved);
        if method == Method::Fci {
            match &benchmark {
                Ok(e) => {
                    out.energy = Some(*e);
                    out.e_minus_fci = Some(0.0);
                    out.wall_seconds = fci_seconds;
                }
                Err(e) => out.error = Some(e.clone()),
            }
            rows.push(out);
            continue;
        }
        let mut run_opts = opts.run;
        if let Some(l) = large {
            run_opts.large = l;
        }
        if let Some(p) = promote {
            run_opts.promote_singles = p;
        }
        match run(&mut system, method, &run_opts) {
            Ok(rec) => {
                out.energy = Some(rec.energy);
                out.e_minus_fci = benchmark.as_ref().ok().map(|b| rec.energy - b);
                out.promoted_singles = rec.qucc.as_ref().map(|q| q.promoted_singles.len());
                out.wall_seconds = rec.wall_seconds;
            }
            Err(e) => out.error = Some(e.to_string()),
        }
        rows.push(out);
    }
    rows
}

/// Runs the manifest's method matrix (or `methods`, when given) on every
/// entry. Entries run in parallel; rows keep manifest order.
pub fn scan(manifest: &ScanManifest, methods: Option<&[MethodSpec]>, opts: &ScanOptions) -> Vec<ScanRow> {
    let methods = methods.unwrap_or(&manifest.methods);
    manifest
        .entries
        .par_iter()
        .map(|e| scan_entry(e, methods, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Energies use 15 significant digits.
pub fn format_energy(v: f64) -> String {
    format!("{v:.14e}")
}

pub fn write_csv<W: Write>(rows: &[ScanRow], omit_timing: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let opt = |v: Option<f64>| v.map(format_energy).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.label.clone(),
            format!("{}", r.geometry_parameter),
            r.method.to_string(),
            r.large.map(|l| l.to_string()).unwrap_or_default(),
            opt(r.energy),
            opt(r.e_minus_fci),
            r.promoted_singles.map(|n| n.to_string()).unwrap_or_default(),
            if omit_timing {
                String::new()
            } else {
                format!("{:.3}", r.wall_seconds)
            },
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
