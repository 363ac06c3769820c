#![allow(dead_code)]

use std::path::PathBuf;

use qucc::fcidump::{read_fcidump, Fcidump};
use qucc::manifest::ScanManifest;
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
pub struct Reference {
    pub label: String,
    pub system: String,
    pub geometry_parameter: f64,
    pub fcidump: String,
    pub e_nuc: f64,
    pub e_hf: f64,
    pub mo_energy: Vec<f64>,
    pub e_mp2_corr: f64,
    pub fci_energies: Vec<f64>,
    pub fci_hf_overlaps: Vec<f64>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load(label: &str) -> Fcidump {
    read_fcidump(&fixtures_dir().join(format!("{label}.fcidump"))).expect("fixture parses")
}

pub fn references() -> Vec<Reference> {
    let text = std::fs::read_to_string(fixtures_dir().join("reference.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn reference(label: &str) -> Reference {
    references().into_iter().find(|r| r.label == label).unwrap()
}

pub fn manifest() -> ScanManifest {
    ScanManifest::load(&fixtures_dir().join("manifest.toml")).unwrap()
}
