//! Dataset manifests and run configuration, both TOML.
//!
//! ```toml
//! [campaign]
//! name = "urban-d2d"
//!
//! [[link]]
//! id = "L01"
//! sweep = "sweeps/L01.sweep"        # relative to the manifest
//! calibration = "sweeps/cal.sweep"
//! distance_m = 10.0
//! los = true
//! tx = "T1"
//! rx = "R1"
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ProcessingConfig;
use crate::sounding::{DEFAULT_GATE_DELAY, DEFAULT_NOISE_MARGIN_DB};
use crate::statfit::DEFAULT_N_BINS;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignMeta {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: String,
    pub sweep: PathBuf,
    pub calibration: PathBuf,
    pub distance_m: f64,
    pub los: bool,
    #[serde(default)]
    pub tx: String,
    #[serde(default)]
    pub rx: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub campaign: CampaignMeta,
    #[serde(default, rename = "link")]
    pub links: Vec<LinkEntry>,
}

impl DatasetManifest {
    /// Parses a manifest and resolves relative file paths against `base`.
    /// Only the structural invariants are checked here; see [`Self::load`].
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut m: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for link in &mut m.links {
            link.sweep = base.join(&link.sweep);
            link.calibration = base.join(&link.calibration);
        }
        m.validate_structure()?;
        Ok(m)
    }

    /// Loads a manifest file and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let m = Self::parse(&text, base)?;
        m.check_files()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    fn validate_structure(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for link in &self.links {
            if link.id.is_empty() {
                return Err(Error::Manifest("link with empty id".into()));
            }
            if !ids.insert(link.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate link id '{}'", link.id)));
            }
            if !(link.distance_m > 0.0 && link.distance_m.is_finite()) {
                return Err(Error::Manifest(format!(
                    "link '{}': distance must be positive, got {}",
                    link.id, link.distance_m
                )));
            }
        }
        Ok(())
    }

    pub fn check_files(&self) -> Result<()> {
        for link in &self.links {
            for p in [&link.sweep, &link.calibration] {
                if !p.is_file() {
                    return Err(Error::Manifest(format!(
                        "link '{}': file {} does not exist",
                        link.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Records,
    Fits,
    ModelTable,
    Plots,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Records, Analysis::Fits, Analysis::ModelTable, Analysis::Plots];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub gate_delay_ns: f64,
    pub noise_margin_db: f64,
    pub n_bins: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub analyses: Vec<Analysis>,
    pub correct_wraparound: bool,
    pub detection_db: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ProcessingConfig::default();
        Self {
            gate_delay_ns: DEFAULT_GATE_DELAY * 1e9,
            noise_margin_db: DEFAULT_NOISE_MARGIN_DB,
            n_bins: DEFAULT_N_BINS,
            seed: 0,
            output_dir: PathBuf::from("out"),
            analyses: Analysis::ALL.to_vec(),
            correct_wraparound: p.correct_wraparound,
            detection_db: p.detection_db,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_delay_ns > 0.0 && self.gate_delay_ns.is_finite()) {
            return Err(Error::InvalidParameter("gate delay must be positive".into()));
        }
        if !(self.noise_margin_db > 0.0 && self.noise_margin_db.is_finite()) {
            return Err(Error::InvalidParameter("noise margin must be positive".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidParameter("n_bins must be at least 1".into()));
        }
        if !self.detection_db.is_finite() {
            return Err(Error::InvalidParameter("detection margin must be finite".into()));
        }
        Ok(())
    }

    pub fn processing(&self) -> ProcessingConfig {
        ProcessingConfig {
            gate_delay: self.gate_delay_ns * 1e-9,
            noise_margin_db: self.noise_margin_db,
            correct_wraparound: self.correct_wraparound,
            detection_db: self.detection_db,
        }
    }

    pub fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[campaign]
name = "demo"

[[link]]
id = "L1"
sweep = "a.sweep"
calibration = "cal.sweep"
distance_m = 10.0
los = true
tx = "T1"
rx = "R1"

[[link]]
id = "L2"
sweep = "b.sweep"
calibration = "cal.sweep"
distance_m = 25.0
los = false
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let m = DatasetManifest::parse(TEXT, Path::new("/data")).unwrap();
        assert_eq!(m.links.len(), 2);
        assert_eq!(m.links[0].sweep, PathBuf::from("/data/a.sweep"));
        assert!(!m.links[1].los);
        assert_eq!(m.campaign.name, "demo");
    }

    #[test]
    fn rejects_duplicates_and_bad_distance() {
        let dup = TEXT.replace("id = \"L2\"", "id = \"L1\"");
        assert!(DatasetManifest::parse(&dup, Path::new(".")).is_err());
        let neg = TEXT.replace("distance_m = 25.0", "distance_m = -1.0");
        assert!(DatasetManifest::parse(&neg, Path::new(".")).is_err());
    }

    #[test]
    fn load_checks_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        fs::write(&path, TEXT).unwrap();
        assert!(matches!(DatasetManifest::load(&path), Err(Error::Manifest(_))));
        for f in ["a.sweep", "b.sweep", "cal.sweep"] {
            fs::write(dir.path().join(f), b"").unwrap();
        }
        assert!(DatasetManifest::load(&path).is_ok());
    }

    #[test]
    fn run_config_defaults_and_validation() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.n_bins, 10);
        assert!((c.processing().gate_delay - 833.33e-9).abs() < 1e-18);
        let c = RunConfig::parse("seed = 7\nanalyses = [\"records\"]").unwrap();
        assert!(c.wants(Analysis::Records) && !c.wants(Analysis::Fits));
        assert!(RunConfig::parse("n_bins = 0").is_err());
        assert!(RunConfig::parse("noise_margin_db = 0.0").is_err());
        assert!(RunConfig::parse("bogus = 1").is_err());
    }
}
