//! Parsed fixtures against values recorded by the package that produced them.

mod common;

use common::*;
use qucc::fcidump::{parse_fcidump, write_fcidump};
use qucc_core::fci::fci_solve;
use qucc_core::{mp2_energy, Hamiltonian, SparseState};

#[test]
fn manifest_lists_every_reference() {
    let m = manifest();
    let refs = references();
    assert_eq!(m.entries.len(), refs.len());
    for (e, r) in m.entries.iter().zip(&refs) {
        assert_eq!(e.label, r.label);
        assert_eq!(e.geometry_parameter, r.geometry_parameter);
    }
}

#[test]
fn core_energy_and_hartree_fock() {
    for r in references() {
        let ints = load(&r.label).integrals;
        let hf = ints.hartree_fock();
        assert!((ints.core_energy() - r.e_nuc).abs() < 1e-10, "{}", r.label);
        let e = ints.hf_energy(hf);
        assert!((e - r.e_hf).abs() < 1e-8, "{}: {e} vs {}", r.label, r.e_hf);
        let ham = Hamiltonian::new(&ints);
        let direct = ham.expectation(&SparseState::single(hf, 1.0)).unwrap();
        assert!((direct - e).abs() < 1e-12, "{}", r.label);
    }
}

#[test]
fn orbital_energies_match() {
    for r in references() {
        let ints = load(&r.label).integrals;
        let eps = ints.orbital_energies(ints.hartree_fock());
        let m = ints.n_spatial();
        for p in 0..m {
            assert!((eps[p] - r.mo_energy[p]).abs() < 1e-8, "{} orbital {p}", r.label);
            assert!((eps[p] - eps[p + m]).abs() < 1e-12);
        }
        let n_occ = ints.n_alpha();
        assert!(eps[n_occ - 1] < eps[n_occ], "{}: no gap", r.label);
    }
}

#[test]
fn mp2_correlation_matches() {
    for r in references() {
        let ints = load(&r.label).integrals;
        let e = mp2_energy(&ints, ints.hartree_fock()).unwrap();
        assert!((e - r.e_mp2_corr).abs() < 1e-8, "{}: {e} vs {}", r.label, r.e_mp2_corr);
    }
}

#[test]
fn fci_matches_small_fixtures() {
    for r in references() {
        let ints = load(&r.label).integrals;
        if ints.n_spatial() > 7 {
            continue;
        }
        let ham = Hamiltonian::new(&ints);
        let roots = r.fci_energies.len();
        let sol = fci_solve(&ham, ints.n_alpha(), ints.n_beta(), roots).unwrap();
        for k in 0..roots {
            assert!(
                (sol.energies[k] - r.fci_energies[k]).abs() < 1e-8,
                "{} root {k}: {} vs {}",
                r.label,
                sol.energies[k],
                r.fci_energies[k]
            );
        }
        assert!((sol.hf_overlaps[0] - r.fci_hf_overlaps[0]).abs() < 1e-6, "{}", r.label);
        assert!(sol.residuals.iter().all(|x| *x <= 1e-9));
    }
}

#[test]
fn record_order_does_not_matter() {
    let path = fixtures_dir().join("h4_1.0.fcidump");
    let text = std::fs::read_to_string(path).unwrap();
    let end = text.find("&END").unwrap() + "&END".len();
    let (header, body) = text.split_at(end);
    let mut lines: Vec<&str> = body.lines().filter(|l| !l.trim().is_empty()).collect();
    // Deterministic shuffle.
    let mut state = 0x853c_49e6_748f_ea9bu64;
    for i in (1..lines.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        lines.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let shuffled = format!("{header}\n{}\n", lines.join("\n"));
    let a = parse_fcidump(&text).unwrap().integrals;
    let b = parse_fcidump(&shuffled).unwrap().integrals;
    assert_eq!(a, b);
    let ea = fci_solve(&Hamiltonian::new(&a), 2, 2, 3).unwrap().energies;
    let eb = fci_solve(&Hamiltonian::new(&b), 2, 2, 3).unwrap().energies;
    for (x, y) in ea.iter().zip(&eb) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn fixture_round_trip() {
    for label in ["h2_0.7414", "h6_0.8", "beh2_1.75"] {
        let d = load(label);
        let again = parse_fcidump(&write_fcidump(&d)).unwrap();
        assert_eq!(d.integrals, again.integrals, "{label}");
        assert_eq!(d.orbsym, again.orbsym);
    }
}
