//! Run-configuration file: TOML with flat sections, every key optional, plus
//! `--set section.key=value` overrides applied before deserialization.

use anyhow::{bail, Context};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use qspect_core::qfi::{Access, Estimand};
use qspect_core::spectral::DispersionProfile;
use qspect_core::sweep::{KappaGrid, Model, Phases, Quantity, SweepConfig};

pub const DEFAULT_LENGTH_NM: f64 = 4.0e7;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    dispersion: DispersionSection,
    #[serde(default)]
    phases: PhasesSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default = "default_model")]
    model: String,
    #[serde(default = "default_access")]
    access: String,
    #[serde(default = "default_estimand")]
    estimand: String,
    #[serde(default = "default_quantity")]
    quantity: String,
    #[serde(default = "default_length")]
    length_nm: f64,
    #[serde(default = "default_gains")]
    gains: Vec<f64>,
}

fn default_model() -> String {
    "su11".into()
}
fn default_access() -> String {
    "all".into()
}
fn default_estimand() -> String {
    "kappa".into()
}
fn default_quantity() -> String {
    "qfi".into()
}
fn default_length() -> f64 {
    DEFAULT_LENGTH_NM
}
fn default_gains() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            model: default_model(),
            access: default_access(),
            estimand: default_estimand(),
            quantity: default_quantity(),
            length_nm: default_length(),
            gains: default_gains(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    min: Option<f64>,
    max: Option<f64>,
    count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DispersionSection {
    #[serde(default)]
    taylor_s: Vec<f64>,
    #[serde(default)]
    taylor_i: Vec<f64>,
    #[serde(default)]
    omega: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhasesSection {
    #[serde(default)]
    phi_s: f64,
    #[serde(default)]
    phi_i: f64,
    /// Either a number or the string "auto".
    #[serde(default = "default_phi_p2")]
    phi_p2: toml::Value,
}

fn default_phi_p2() -> toml::Value {
    toml::Value::String("auto".into())
}

impl Default for PhasesSection {
    fn default() -> Self {
        Self {
            phi_s: 0.0,
            phi_i: 0.0,
            phi_p2: default_phi_p2(),
        }
    }
}

/// A parsed configuration plus the hash of its canonical form.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub sweep: SweepConfig,
    pub hash: String,
}

fn parse_model(s: &str) -> anyhow::Result<Model> {
    match s {
        "su11" => Ok(Model::Su11),
        "ic" => Ok(Model::Ic),
        "dl" => Ok(Model::Dl),
        other => bail!("unknown model {other:?} (expected su11, ic, or dl)"),
    }
}

fn parse_access(s: &str) -> anyhow::Result<Access> {
    match s {
        "all" | "all_modes" => Ok(Access::AllModes),
        "ic_two_mode" => Ok(Access::IcTwoMode),
        "single_mode" => Ok(Access::SingleMode),
        other => bail!("unknown access {other:?} (expected all, ic_two_mode, or single_mode)"),
    }
}

fn parse_estimand(s: &str) -> anyhow::Result<Estimand> {
    match s {
        "kappa" | "kappa_i" => Ok(Estimand::KappaI),
        "eta" | "eta_i" => Ok(Estimand::EtaI),
        other => bail!("unknown estimand {other:?} (expected kappa or eta)"),
    }
}

fn parse_quantity(s: &str) -> anyhow::Result<Quantity> {
    match s {
        "qfi" => Ok(Quantity::Qfi),
        "inverse_diff_error" => Ok(Quantity::InverseDiffError),
        other => bail!("unknown quantity {other:?} (expected qfi or inverse_diff_error)"),
    }
}

fn parse_phi_p2(v: &toml::Value) -> anyhow::Result<Option<f64>> {
    match v {
        toml::Value::String(s) if s == "auto" => Ok(None),
        toml::Value::Float(x) => Ok(Some(*x)),
        toml::Value::Integer(x) => Ok(Some(*x as f64)),
        other => bail!("phases.phi_p2 must be a number or \"auto\", got {other}"),
    }
}

/// Applies one `section.key=value` override onto the raw TOML table.
fn apply_override(table: &mut toml::Table, spec: &str) -> anyhow::Result<()> {
    let (path, raw_value) = spec
        .split_once('=')
        .with_context(|| format!("override {spec:?} is not of the form section.key=value"))?;
    let (section, key) = path
        .split_once('.')
        .with_context(|| format!("override key {path:?} is not of the form section.key"))?;
    // Parse the value as TOML; bare words fall back to strings.
    let value: toml::Value = format!("v = {raw_value}")
        .parse::<toml::Table>()
        .map(|t| t["v"].clone())
        .unwrap_or_else(|_| toml::Value::String(raw_value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sec) = entry else {
        bail!("config section {section:?} is not a table");
    };
    sec.insert(key.to_string(), value);
    Ok(())
}

/// Loads the optional config file, applies overrides, and converts to a sweep
/// configuration. The hash covers the merged canonical TOML, so identical
/// effective configs hash identically regardless of file formatting.
pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> anyhow::Result<LoadedConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("cannot read config file {}", p.display()))?,
        None => String::new(),
    };
    let mut table: toml::Table = text.parse().context("config file is not valid TOML")?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }

    let canonical = toml::to_string(&table).expect("tables serialize");
    let hash = hex_digest(&canonical);

    let file: FileConfig = table
        .try_into()
        .context("config does not match the expected schema")?;

    let model = parse_model(&file.run.model)?;
    let access = parse_access(&file.run.access)?;
    let estimand = parse_estimand(&file.run.estimand)?;
    let quantity = parse_quantity(&file.run.quantity)?;
    let length = file.run.length_nm;
    if !(length > 0.0) {
        bail!("run.length_nm must be positive, got {length}");
    }

    let mut sweep = SweepConfig::new(model, access, estimand, length);
    sweep.quantity = quantity;
    sweep.gains = file.run.gains;
    let default_grid = KappaGrid::default_for_length(length);
    sweep.grid = KappaGrid {
        min: file.grid.min.unwrap_or(default_grid.min),
        max: file.grid.max.unwrap_or(default_grid.max),
        count: file.grid.count.unwrap_or(default_grid.count),
    };
    sweep.dispersion = DispersionProfile::new(file.dispersion.taylor_s, file.dispersion.taylor_i)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    sweep.omega = file.dispersion.omega;
    sweep.phases = Phases {
        phi_s: file.phases.phi_s,
        phi_i: file.phases.phi_i,
        phi_p2: parse_phi_p2(&file.phases.phi_p2)?,
    };
    sweep
        .validate()
        .map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))?;
    Ok(LoadedConfig { sweep, hash })
}

fn hex_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_without_a_file() {
        let cfg = load(None, &[]).unwrap();
        assert_eq!(cfg.sweep.model, Model::Su11);
        assert_eq!(cfg.sweep.gains, vec![0.1, 1.0, 10.0]);
        assert_eq!(cfg.sweep.grid.count, 200);
    }

    #[test]
    fn overrides_change_the_hash_and_values() {
        let a = load(None, &[]).unwrap();
        let b = load(None, &["run.model=\"dl\"".into(), "grid.count=50".into()]).unwrap();
        assert_eq!(b.sweep.model, Model::Dl);
        assert_eq!(b.sweep.grid.count, 50);
        assert_ne!(a.hash, b.hash);
    }

    #[test]
    fn identical_overrides_hash_identically() {
        let a = load(None, &["run.model=\"ic\"".into()]).unwrap();
        let b = load(None, &["run.model=\"ic\"".into()]).unwrap();
        assert_eq!(a.hash, b.hash);
    }

    #[test]
    fn bad_enum_values_are_rejected() {
        assert!(load(None, &["run.model=\"xyz\"".into()]).is_err());
        assert!(load(None, &["run.access=\"xyz\"".into()]).is_err());
        assert!(load(None, &["phases.phi_p2=\"sometimes\"".into()]).is_err());
    }

    #[test]
    fn phi_p2_accepts_auto_and_numbers() {
        let auto = load(None, &[]).unwrap();
        assert_eq!(auto.sweep.phases.phi_p2, None);
        let fixed = load(None, &["phases.phi_p2=3.14".into()]).unwrap();
        assert_eq!(fixed.sweep.phases.phi_p2, Some(3.14));
    }
}
