use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Version shared by every file a bundle contains.
pub const SCHEMA_VERSION: u32 = 1;

/// Version of the code that wrote a bundle.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST: &str = "manifest.json";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const STEPS: &str = "steps.csv";
pub const EPOCHS: &str = "epochs.json";
pub const NETWORK_PRE: &str = "network_pre.json";
pub const NETWORK_POST: &str = "network_post.json";
pub const SURPRISE_SHARES: &str = "surprise_shares.csv";
pub const SAMPLES: &str = "samples.csv";
pub const EDGES: &str = "edges.csv";
pub const SKELETON: &str = "skeleton.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Discover,
    Learn,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Discover => "discover",
            Command::Learn => "learn",
            Command::Run => "run",
        }
    }
}

/// Where the network a run started from came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkSource {
    /// The hand-specified initial network.
    #[default]
    Initial,
    /// The network stored in the bundle's `network_pre.json`.
    Bundled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub code_version: String,
    pub command: Command,
    pub seed: u64,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub network: NetworkSource,
    /// Every other file in the bundle, sorted.
    pub files: Vec<String>,
}

/// The files one command produced, keyed by file name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceBundle {
    files: BTreeMap<String, Vec<u8>>,
}

impl TraceBundle {
    pub fn new() -> Self {
        TraceBundle::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn require(&self, name: &str) -> Result<&[u8]> {
        self.get(name)
            .ok_or_else(|| Error::BundleMismatch(format!("bundle has no {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Ok(serde_json::from_slice(self.require(MANIFEST)?)?)
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<T> {
        Ok(serde_json::from_slice(self.require(name)?)?)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads the manifest in `dir` and every file it lists.
    pub fn read_from(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&raw)?;
        let mut bundle = TraceBundle::new();
        bundle.insert(MANIFEST, raw);
        for name in &manifest.files {
            if name.contains(['/', '\\']) || name == ".." {
                return Err(Error::BundleMismatch(format!("manifest lists a path: {name}")));
            }
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            bundle.insert(name.clone(), bytes);
        }
        Ok(bundle)
    }

    /// Names of files that differ between the two bundles or exist in
    /// only one of them.
    pub fn diff(&self, other: &TraceBundle) -> Vec<String> {
        let mut names: Vec<&String> = self.files.keys().chain(other.files.keys()).collect();
        names.sort();
        names.dedup();
        names
            .into_iter()
            .filter(|n| self.files.get(*n) != other.files.get(*n))
            .cloned()
            .collect()
    }
}

/// Renders `value` as pretty JSON with a trailing newline.
pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Builds a CSV file from a header and rows of already formatted fields.
pub(crate) fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_reports_changed_and_missing() {
        let mut a = TraceBundle::new();
        a.insert("x.csv", b"1".to_vec());
        a.insert("y.csv", b"2".to_vec());
        let mut b = a.clone();
        assert!(a.diff(&b).is_empty());
        b.insert("x.csv", b"3".to_vec());
        b.insert("z.csv", Vec::new());
        assert_eq!(a.diff(&b), vec!["x.csv".to_string(), "z.csv".to_string()]);
    }
}
