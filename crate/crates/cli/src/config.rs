//! Run configuration: one experiment per TOML file.
//!
//! ```toml
//! schema_version = 1
//! experiment = "hom-scan"
//! seed = 7
//!
//! [hom_scan]
//! eta = 0.5128
//! ```
//!
//! Unknown keys are rejected everywhere. Scalar fields can be overridden
//! from the command line with `--set section.key=value`.

use std::path::PathBuf;

use fockwise::distinguishability::SPEED_OF_LIGHT;
use fockwise::experiments::{linspace, DEFAULT_INTEGRATION_TIME_S, DEFAULT_RATE_PAIRS_PER_S};
use fockwise::WavepacketTemplate;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Delay points used when a scan section gives no delay axis.
pub const DEFAULT_DELAY_POINTS: usize = 40;
/// Half-width of the default delay axis, in coherence times.
pub const DEFAULT_DELAY_HALF_SPAN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    HomScan,
    ThreePhotonScan,
    VisibilitySweep,
    Mz,
    Fit,
}

impl ExperimentKind {
    pub fn section(self) -> &'static str {
        match self {
            Self::HomScan => "hom_scan",
            Self::ThreePhotonScan => "three_photon_scan",
            Self::VisibilitySweep => "visibility_sweep",
            Self::Mz => "mz",
            Self::Fit => "fit",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::HomScan => "hom-scan",
            Self::ThreePhotonScan => "three-photon-scan",
            Self::VisibilitySweep => "visibility-sweep",
            Self::Mz => "mz",
            Self::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hom_scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub three_photon_scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mz: Option<MzSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}

fn default_wavelength() -> f64 {
    804.0
}
fn default_fwhm() -> f64 {
    2.0
}
fn default_stage_passes() -> f64 {
    2.0
}
fn default_rate() -> f64 {
    DEFAULT_RATE_PAIRS_PER_S
}
fn default_integration() -> f64 {
    DEFAULT_INTEGRATION_TIME_S
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

/// Delay axis: either explicit `delays_s`, or actuator travel in millimetres
/// converted with `τ = stage_passes · x / c`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayAxis {
    pub delays_s: Option<Vec<f64>>,
    pub delay_start_mm: Option<f64>,
    pub delay_stop_mm: Option<f64>,
    pub delay_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub eta: f64,
    #[serde(default = "default_wavelength")]
    pub center_wavelength_nm: f64,
    #[serde(default = "default_fwhm")]
    pub filter_fwhm_nm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_start_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_stop_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_points: Option<usize>,
    #[serde(default = "default_stage_passes")]
    pub stage_passes: f64,
    #[serde(default = "default_rate")]
    pub rate_pairs_per_s: f64,
    #[serde(default = "default_integration")]
    pub integration_time_s: f64,
    #[serde(default = "one")]
    pub success_fraction: f64,
    #[serde(default = "one")]
    pub mode_overlap: f64,
    /// Sets `mode_overlap` so the ideal dip visibility drops to this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_visibility: Option<f64>,
    #[serde(default = "one")]
    pub intra_pair_overlap: f64,
    /// Three-photon scans: sets `intra_pair_overlap` so the dip reaches this
    /// fraction of the degenerate-pair visibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_relative_visibility: Option<f64>,
    #[serde(default)]
    pub drift_per_s: f64,
    /// Fit the sampled counts with the dip model.
    #[serde(default = "yes")]
    pub fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub etas: Vec<f64>,
    #[serde(default = "default_wavelength")]
    pub center_wavelength_nm: f64,
    #[serde(default = "default_fwhm")]
    pub filter_fwhm_nm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_start_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_stop_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_points: Option<usize>,
    #[serde(default = "default_stage_passes")]
    pub stage_passes: f64,
    #[serde(default = "default_rate")]
    pub rate_pairs_per_s: f64,
    #[serde(default = "default_integration")]
    pub integration_time_s: f64,
    /// Mode-match factor applied to every coupler's ideal visibility.
    #[serde(default = "one")]
    pub mode_match: f64,
}

fn default_phase_points() -> usize {
    37
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzSection {
    #[serde(default = "half")]
    pub eta1: f64,
    #[serde(default = "half")]
    pub eta2: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    /// Measured effective reflectivity to convert into an arm phase error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_eta_mz: Option<f64>,
    /// Points of the phase scan written to `mz_scan.csv`; 0 disables it.
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// CSV with `tau_s` and `counts` (or `sampled_counts`), optional `sigma`.
    /// Relative paths resolve against the config file's directory.
    pub input: PathBuf,
}

/// A validation problem tied to a config key.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub section: Option<&'static str>,
    pub key: String,
    pub message: String,
}

impl Issue {
    fn new(section: Option<&'static str>, key: &str, message: impl Into<String>) -> Self {
        Self {
            section,
            key: key.to_string(),
            message: message.into(),
        }
    }
}

fn check_unit(section: &'static str, key: &str, v: f64) -> Result<(), Issue> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Issue::new(Some(section), key, format!("must lie in [0, 1], got {v}")))
    }
}

fn check_positive(section: &'static str, key: &str, v: f64) -> Result<(), Issue> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Issue::new(Some(section), key, format!("must be positive, got {v}")))
    }
}

fn check_nonnegative(section: &'static str, key: &str, v: f64) -> Result<(), Issue> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Issue::new(Some(section), key, format!("must be nonnegative, got {v}")))
    }
}

fn resolve_axis(
    section: &'static str,
    axis: DelayAxis,
    stage_passes: f64,
    template: &WavepacketTemplate,
) -> Result<Vec<f64>, Issue> {
    check_positive(section, "stage_passes", stage_passes)?;
    let ranged = axis.delay_start_mm.is_some() || axis.delay_stop_mm.is_some() || axis.delay_points.is_some();
    match (axis.delays_s, ranged) {
        (Some(_), true) => Err(Issue::new(
            Some(section),
            "delays_s",
            "give either delays_s or delay_start_mm/delay_stop_mm/delay_points, not both",
        )),
        (Some(d), false) => {
            if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                return Err(Issue::new(
                    Some(section),
                    "delays_s",
                    "must be a nonempty list of finite delays",
                ));
            }
            Ok(d)
        }
        (None, true) => {
            let (Some(start), Some(stop), Some(points)) = (axis.delay_start_mm, axis.delay_stop_mm, axis.delay_points)
            else {
                return Err(Issue::new(
                    Some(section),
                    "delay_points",
                    "delay_start_mm, delay_stop_mm and delay_points must be given together",
                ));
            };
            if points == 0 {
                return Err(Issue::new(Some(section), "delay_points", "must be at least 1"));
            }
            let to_s = stage_passes * 1e-3 / SPEED_OF_LIGHT;
            Ok(linspace(start * to_s, stop * to_s, points))
        }
        (None, false) => {
            let span = DEFAULT_DELAY_HALF_SPAN
                * template
                    .coherence_time_s()
                    .map_err(|e| Issue::new(Some(section), "filter_fwhm_nm", e.to_string()))?;
            Ok(linspace(-span, span, DEFAULT_DELAY_POINTS))
        }
    }
}

impl ScanSection {
    pub fn template(&self) -> WavepacketTemplate {
        WavepacketTemplate::new(self.center_wavelength_nm, self.filter_fwhm_nm)
    }

    pub fn axis(&self) -> DelayAxis {
        DelayAxis {
            delays_s: self.delays_s.clone(),
            delay_start_mm: self.delay_start_mm,
            delay_stop_mm: self.delay_stop_mm,
            delay_points: self.delay_points,
        }
    }

    pub fn validate(&self, section: &'static str, three_photon: bool) -> Result<Vec<f64>, Issue> {
        check_unit(section, "eta", self.eta)?;
        check_positive(section, "center_wavelength_nm", self.center_wavelength_nm)?;
        check_positive(section, "filter_fwhm_nm", self.filter_fwhm_nm)?;
        check_nonnegative(section, "rate_pairs_per_s", self.rate_pairs_per_s)?;
        check_nonnegative(section, "integration_time_s", self.integration_time_s)?;
        check_unit(section, "success_fraction", self.success_fraction)?;
        check_unit(section, "mode_overlap", self.mode_overlap)?;
        check_unit(section, "intra_pair_overlap", self.intra_pair_overlap)?;
        if !self.drift_per_s.is_finite() {
            return Err(Issue::new(Some(section), "drift_per_s", "must be finite"));
        }
        if let Some(v) = self.target_visibility {
            check_unit(section, "target_visibility", v)?;
        }
        if let Some(v) = self.target_relative_visibility {
            if !three_photon {
                return Err(Issue::new(
                    Some(section),
                    "target_relative_visibility",
                    "only valid for three-photon-scan",
                ));
            }
            check_unit(section, "target_relative_visibility", v)?;
        }
        if !three_photon && self.intra_pair_overlap != 1.0 {
            return Err(Issue::new(
                Some(section),
                "intra_pair_overlap",
                "only valid for three-photon-scan",
            ));
        }
        resolve_axis(section, self.axis(), self.stage_passes, &self.template())
    }
}

impl SweepSection {
    pub fn template(&self) -> WavepacketTemplate {
        WavepacketTemplate::new(self.center_wavelength_nm, self.filter_fwhm_nm)
    }

    pub fn validate(&self) -> Result<Vec<f64>, Issue> {
        const S: &str = "visibility_sweep";
        if self.etas.is_empty() {
            return Err(Issue::new(Some(S), "etas", "must list at least one reflectivity"));
        }
        for &e in &self.etas {
            check_unit(S, "etas", e)?;
        }
        check_positive(S, "center_wavelength_nm", self.center_wavelength_nm)?;
        check_positive(S, "filter_fwhm_nm", self.filter_fwhm_nm)?;
        check_nonnegative(S, "rate_pairs_per_s", self.rate_pairs_per_s)?;
        check_nonnegative(S, "integration_time_s", self.integration_time_s)?;
        check_unit(S, "mode_match", self.mode_match)?;
        let axis = DelayAxis {
            delays_s: self.delays_s.clone(),
            delay_start_mm: self.delay_start_mm,
            delay_stop_mm: self.delay_stop_mm,
            delay_points: self.delay_points,
        };
        resolve_axis(S, axis, self.stage_passes, &self.template())
    }
}

impl MzSection {
    pub fn validate(&self) -> Result<(), Issue> {
        check_unit("mz", "eta1", self.eta1)?;
        check_unit("mz", "eta2", self.eta2)?;
        if !self.phi.is_finite() {
            return Err(Issue::new(Some("mz"), "phi", "must be finite"));
        }
        check_positive("mz", "wavelength_nm", self.wavelength_nm)?;
        if let Some(t) = self.target_eta_mz {
            check_unit("mz", "target_eta_mz", t)?;
        }
        Ok(())
    }
}

impl RunConfig {
    /// Structural checks: schema version and exactly the section matching
    /// `experiment`.
    pub fn check_structure(&self) -> Result<(), Issue> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Issue::new(
                None,
                "schema_version",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let present = [
            ("hom_scan", self.hom_scan.is_some()),
            ("three_photon_scan", self.three_photon_scan.is_some()),
            ("visibility_sweep", self.visibility_sweep.is_some()),
            ("mz", self.mz.is_some()),
            ("fit", self.fit.is_some()),
        ];
        let wanted = self.experiment.section();
        for (name, is_present) in present {
            if name == wanted && !is_present {
                return Err(Issue::new(
                    None,
                    "experiment",
                    format!("experiment \"{}\" needs a [{wanted}] section", self.experiment.name()),
                ));
            }
            if name != wanted && is_present {
                return Err(Issue::new(
                    None,
                    name,
                    format!(
                        "section [{name}] does not belong to experiment \"{}\"",
                        self.experiment.name()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Applies `section.key=value` (or `key=value` at top level). The value is
    /// parsed as a TOML scalar, falling back to a bare string.
    pub fn apply_override(&self, assignment: &str) -> Result<Self, CliError> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {assignment}: expected key=value")))?;
        let path = path.trim();
        let value = parse_scalar(raw.trim());
        let mut table =
            toml::Table::try_from(self).map_err(|e| CliError::Config(format!("--set {assignment}: {e}")))?;
        let parts: Vec<&str> = path.split('.').collect();
        let (last, sections) = parts.split_last().expect("split yields at least one part");
        let mut node = &mut table;
        for section in sections {
            node = node
                .get_mut(*section)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| CliError::Config(format!("--set {path}: no section [{section}] in config")))?;
        }
        node.insert((*last).to_string(), value);
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("--set {path}: {}", e.message())))
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// 1-based line of `key` inside `[section]` (or the top level), if present.
pub fn locate(source: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (k, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if section == Some(key) && name.trim() == key {
                return Some(k + 1);
            }
            continue;
        }
        let in_scope = current.as_deref() == section;
        if in_scope {
            if let Some((lhs, _)) = t.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
        // section given as top-level key for structural issues
        if section.is_none() && current.as_deref() == Some(key) {
            return Some(k + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOM: &str = r#"
schema_version = 1
experiment = "hom-scan"
seed = 3

[hom_scan]
eta = 0.5128
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg: RunConfig = toml::from_str(HOM).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::HomScan);
        let s = cfg.hom_scan.as_ref().unwrap();
        assert_eq!(s.center_wavelength_nm, 804.0);
        assert_eq!(s.stage_passes, 2.0);
        assert!(s.fit);
        assert!(cfg.check_structure().is_ok());
        assert_eq!(s.validate("hom_scan", false).unwrap().len(), DEFAULT_DELAY_POINTS);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let text = HOM.replace("eta = 0.5128", "eta = 0.5128\netta = 0.4");
        let err = toml::from_str::<RunConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("etta"), "{err}");
        assert!(err.contains("line 8"), "{err}");
    }

    #[test]
    fn wrong_or_missing_section() {
        let text = HOM.replace("[hom_scan]", "[mz]").replace("eta = 0.5128", "eta1 = 0.5");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let issue = cfg.check_structure().unwrap_err();
        assert_eq!(issue.key, "experiment");
    }

    #[test]
    fn overrides() {
        let cfg: RunConfig = toml::from_str(HOM).unwrap();
        let cfg2 = cfg.apply_override("hom_scan.eta=0.6").unwrap();
        assert_eq!(cfg2.hom_scan.unwrap().eta, 0.6);
        let cfg3 = cfg.apply_override("seed=99").unwrap();
        assert_eq!(cfg3.seed, 99);
        let err = cfg.apply_override("hom_scan.etaa=0.6").unwrap_err().to_string();
        assert!(err.contains("etaa"), "{err}");
        assert!(cfg.apply_override("nosuch.eta=1").is_err());
        assert!(cfg.apply_override("hom_scan.eta").is_err());
    }

    #[test]
    fn millimetre_axis_conversion() {
        let text = HOM.replace(
            "eta = 0.5128",
            "eta = 0.5\ndelay_start_mm = -0.3\ndelay_stop_mm = 0.3\ndelay_points = 3",
        );
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let d = cfg.hom_scan.unwrap().validate("hom_scan", false).unwrap();
        assert_eq!(d.len(), 3);
        assert!((d[2] - 2.0 * 0.3e-3 / SPEED_OF_LIGHT).abs() < 1e-20);
    }

    #[test]
    fn value_issues_are_located() {
        let text = HOM.replace("eta = 0.5128", "eta = 1.5");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let issue = cfg.hom_scan.unwrap().validate("hom_scan", false).unwrap_err();
        assert_eq!(issue.key, "eta");
        assert_eq!(locate(&text, issue.section, &issue.key), Some(7));
    }

    #[test]
    fn conflicting_axes_rejected() {
        let text = HOM.replace("eta = 0.5128", "eta = 0.5\ndelays_s = [0.0]\ndelay_points = 3");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.hom_scan.unwrap().validate("hom_scan", false).is_err());
    }
}
