//! Scan manifests: a list of geometries and the methods to run on each.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("entry {label:?}: FCIDUMP {path} does not exist")]
    MissingFile { label: String, path: PathBuf },
    #[error("manifest has no entries")]
    NoEntries,
    #[error("invalid method specification {0:?}")]
    BadMethod(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hf,
    Mp2,
    Fci,
    Ucc,
    Qucc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hf => "hf",
            Method::Mp2 => "mp2",
            Method::Fci => "fci",
            Method::Ucc => "ucc",
            Method::Qucc => "qucc",
        }
    }

    pub fn uses_large(self) -> bool {
        matches!(self, Method::Ucc | Method::Qucc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hf" => Ok(Method::Hf),
            "mp2" => Ok(Method::Mp2),
            "fci" => Ok(Method::Fci),
            "ucc" => Ok(Method::Ucc),
            "qucc" => Ok(Method::Qucc),
            _ => Err(ManifestError::BadMethod(s.to_string())),
        }
    }
}

/// Number of exactly treated factors; `All` means every factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Large {
    Count(usize),
    All,
}

impl Large {
    pub fn resolve(self, n_factors: usize) -> usize {
        match self {
            Large::Count(l) => l,
            Large::All => n_factors,
        }
    }
}

impl FromStr for Large {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") || s == "N" {
            return Ok(Large::All);
        }
        s.parse().map(Large::Count).map_err(|_| ManifestError::BadMethod(s.to_string()))
    }
}

impl<'de> Deserialize<'de> for Large {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Large::Count(n)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: Method,
    #[serde(default)]
    pub large: Vec<Large>,
    /// Overrides the scan-wide setting for this method.
    pub promote_singles: Option<bool>,
}

impl FromStr for MethodSpec {
    type Err = ManifestError;

    /// `name` or `name:L1,L2,...`, e.g. `qucc:20,30,all`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, large) = match s.split_once(':') {
            Some((n, l)) => (n, l.split(',').map(str::parse).collect::<Result<Vec<Large>, _>>()?),
            None => (s, Vec::new()),
        };
        let name: Method = name.parse()?;
        if name.uses_large() && large.is_empty() {
            return Err(ManifestError::BadMethod(s.to_string()));
        }
        Ok(MethodSpec {
            name,
            large,
            promote_singles: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub label: String,
    #[serde(default)]
    pub system: Option<String>,
    pub geometry_parameter: f64,
    #[serde(default = "default_unit")]
    pub unit: String,
    pub fcidump: PathBuf,
    /// Used when the FCIDUMP has no core-energy record.
    #[serde(default)]
    pub core_energy: Option<f64>,
}

fn default_unit() -> String {
    "angstrom".to_string()
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanManifest {
    #[serde(rename = "entry", default)]
    pub entries: Vec<Entry>,
    #[serde(rename = "method", default)]
    pub methods: Vec<MethodSpec>,
}

impl ScanManifest {
    /// Loads a manifest, resolving FCIDUMP paths relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: ScanManifest = toml::from_str(&text).map_err(|source| ManifestError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            if e.fcidump.is_relative() {
                e.fcidump = base.join(&e.fcidump);
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.entries.is_empty() {
            return Err(ManifestError::NoEntries);
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.label.as_str()) {
                return Err(ManifestError::DuplicateLabel(e.label.clone()));
            }
            if !e.fcidump.exists() {
                return Err(ManifestError::MissingFile {
                    label: e.label.clone(),
                    path: e.fcidump.clone(),
                });
            }
        }
        for m in &self.methods {
            if m.name.uses_large() && m.large.is_empty() {
                return Err(ManifestError::BadMethod(format!("{} needs a list of L values", m.name)));
            }
        }
        Ok(())
    }
}
