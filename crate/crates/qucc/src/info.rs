//! Summary of an integral file.

use std::fmt::Write as _;

use qucc_core::enumerate_excitations;

use crate::driver::fci_dimension;
use crate::fcidump::Fcidump;

pub fn info_report(dump: &Fcidump) -> String {
    let ints = &dump.integrals;
    let m = ints.n_spatial();
    let reference = ints.hartree_fock();
    let excitations = enumerate_excitations(reference, m, 2);
    let singles = excitations.iter().filter(|e| e.rank() == 1).count();
    let doubles = excitations.len() - singles;
    let pairs = m * (m + 1) / 2;
    let mut out = String::new();
    let _ = writeln!(out, "orbitals={m} spin_orbitals={}", 2 * m);
    let _ = writeln!(
        out,
        "electrons={} alpha={} beta={} ms2={} sz={}",
        ints.n_electrons(),
        ints.n_alpha(),
        ints.n_beta(),
        ints.ms2(),
        ints.ms2() as f64 / 2.0
    );
    let _ = writeln!(out, "fci_dimension={}", fci_dimension(ints));
    let _ = writeln!(out, "singles={singles} doubles={doubles} total={}", excitations.len());
    let _ = writeln!(
        out,
        "unique one-body={} two-body={} (bounds one-body<={} two-body<={})",
        ints.unique_one_body_count(),
        ints.unique_two_body_count(),
        m * m,
        pairs * (pairs + 1) / 2
    );
    let _ = writeln!(out, "core_energy={:.14e}", ints.core_energy());
    let _ = writeln!(out, "hf_energy={:.14e}", ints.hf_energy(reference));
    out
}
