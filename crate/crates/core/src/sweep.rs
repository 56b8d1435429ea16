//! Deterministic parameter sweeps over decay rate and gain: value dispatch
//! per (model, access, quantity), CSV emission and parsing, and crossover
//! location between two sweeps.


#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::configurations::{
    anti_squeeze_phase, dl_moments, eta_from_kappa, ic_balanced_bs, ic_moments, ic_optimal_phase,
    su11_moments, DLParams, GainSpec,
};
use crate::qfi::{
    fd_step_for, ic_two_mode_qfi_kappa, intensity_diff_error, moments_derivative, qfi_single_mode,
    qfi_two_mode, su11_full_qfi_eta, su11_full_qfi_kappa, Access, CovarianceTwoMode, Estimand,
};
use crate::spectral::{evaluate_mismatch, DispersionProfile, PhaseMatching};
use crate::twinbeam::{LossChannel, Moments};
use crate::{Error, Result};

/// Sensing configuration being swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Su11,
    Ic,
    Dl,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Su11 => "su11",
            Model::Ic => "ic",
            Model::Dl => "dl",
        }
    }
}

/// What each row's `value` column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Qfi,
    /// Inverse error-propagated variance of an intensity-difference
    /// measurement, `1 / Delta^2 kappa`.
    InverseDiffError,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Qfi => "qfi",
            Quantity::InverseDiffError => "inverse_diff_error",
        }
    }
}

/// Log-spaced decay-rate grid, endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl KappaGrid {
    /// Default grid spanning eta from 0.99 down to 0.001 over the default
    /// length, 200 points.
    pub fn default_for_length(length: f64) -> Self {
        Self {
            min: -(0.99f64.ln()) / length,
            max: -(0.001f64.ln()) / length,
            count: 200,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        (0..self.count)
            .map(|j| {
                let t = j as f64 / (self.count - 1) as f64;
                (lo + t * (hi - lo)).exp()
            })
            .collect()
    }
}

/// Extra phases of the loss channel and the second pump pass; `phi_p2 = None`
/// selects the model's optimal operating phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phases {
    pub phi_s: f64,
    pub phi_i: f64,
    pub phi_p2: Option<f64>,
}

/// Full description of one sweep. Deterministic: equal configs produce
/// byte-identical CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: Model,
    pub access: Access,
    pub estimand: Estimand,
    pub quantity: Quantity,
    pub length: f64,
    pub gains: Vec<f64>,
    pub grid: KappaGrid,
    pub dispersion: DispersionProfile,
    /// Frequency detuning at which the sweep is evaluated.
    pub omega: f64,
    pub phases: Phases,
}

impl SweepConfig {
    pub fn new(model: Model, access: Access, estimand: Estimand, length: f64) -> Self {
        Self {
            model,
            access,
            estimand,
            quantity: Quantity::Qfi,
            length,
            gains: vec![0.1, 1.0, 10.0],
            grid: KappaGrid::default_for_length(length),
            dispersion: DispersionProfile::phase_matched(),
            omega: 0.0,
            phases: Phases::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::InvalidConfig("gain list must be nonempty".into()));
        }
        if self.gains.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidConfig("gains must be finite and >= 0".into()));
        }
        if !(self.grid.min > 0.0) || !(self.grid.min < self.grid.max) {
            return Err(Error::InvalidConfig(
                "kappa grid needs 0 < min < max".into(),
            ));
        }
        if self.grid.count < 2 {
            return Err(Error::InvalidConfig("kappa grid needs count >= 2".into()));
        }
        if !(self.length > 0.0) {
            return Err(Error::InvalidConfig("length must be positive".into()));
        }
        if self.access == Access::IcTwoMode && self.model != Model::Ic {
            return Err(Error::InvalidConfig(
                "ic_two_mode access is only defined for the ic model".into(),
            ));
        }
        if self.quantity == Quantity::InverseDiffError {
            if self.model == Model::Ic {
                return Err(Error::InvalidConfig(
                    "inverse_diff_error is defined for su11 and dl".into(),
                ));
            }
            if self.estimand != Estimand::KappaI {
                return Err(Error::InvalidConfig(
                    "inverse_diff_error uses the kappa_i estimand".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Row status. `Divergent` marks blow-ups (kappa -> 0), `VanishingDerivative`
/// marks intensity-difference dips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFlag {
    Ok,
    Divergent,
    VanishingDerivative,
}

impl RowFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::Divergent => "divergent",
            RowFlag::VanishingDerivative => "vanishing_derivative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowFlag::Ok),
            "divergent" => Ok(RowFlag::Divergent),
            "vanishing_derivative" => Ok(RowFlag::VanishingDerivative),
            other => Err(Error::InvalidConfig(format!("unknown row flag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    pub eta: f64,
    pub gain: f64,
    pub value: f64,
    pub flag: RowFlag,
}

/// Sweep output: metadata key-value pairs (emitted as the CSV comment header)
/// plus rows sorted by (gain, kappa).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<SweepRow>,
}

struct PointValue {
    value: f64,
    flag: RowFlag,
    /// d(N_S - N_I)/dkappa, kept for post-hoc dip detection.
    derivative: Option<f64>,
}

fn pm_for(cfg: &SweepConfig, gain: &GainSpec) -> PhaseMatching {
    evaluate_mismatch(&cfg.dispersion, cfg.omega, gain.gamma_abs(cfg.length))
}

fn dl_point(cfg: &SweepConfig, gain: &GainSpec, kappa: f64) -> Result<Moments> {
    let pm = pm_for(cfg, gain);
    let dl = DLParams::idler_only(kappa, cfg.length)?;
    dl_moments(gain, &pm, &dl)
}

/// Single accessible intensity as a function of kappa, per model.
fn single_mode_occupation(cfg: &SweepConfig, gain: &GainSpec, kappa: f64) -> Result<f64> {
    let pm = pm_for(cfg, gain);
    let eta_i = eta_from_kappa(kappa, cfg.length);
    let ch = LossChannel::new(1.0, eta_i, cfg.phases.phi_s, cfg.phases.phi_i)?;
    match cfg.model {
        Model::Su11 => {
            let phi = cfg
                .phases
                .phi_p2
                .unwrap_or_else(|| anti_squeeze_phase(gain, &pm, &ch, cfg.length));
            Ok(su11_moments(gain, &pm, &ch, phi, cfg.length).n_s)
        }
        Model::Ic => {
            let phi = cfg
                .phases
                .phi_p2
                .unwrap_or_else(|| ic_optimal_phase(&pm, &ch, cfg.length));
            let ic = ic_moments(gain, &pm, &ch, phi, cfg.length);
            Ok(ic_balanced_bs(&ic, -1))
        }
        Model::Dl => Ok(dl_point(cfg, gain, kappa)?.n_s),
    }
}

fn eta_conversion(value: f64, estimand: Estimand, eta: f64, length: f64) -> f64 {
    match estimand {
        Estimand::KappaI => value,
        Estimand::EtaI => value / (length * length * eta * eta),
    }
}

fn qfi_value(cfg: &SweepConfig, gain: &GainSpec, kappa: f64) -> Result<PointValue> {
    let eta = eta_from_kappa(kappa, cfg.length);
    let n_peak = gain.n_peak();
    let ok = |value: f64| PointValue {
        value,
        flag: RowFlag::Ok,
        derivative: None,
    };
    let value = match (cfg.model, cfg.access) {
        // SU(1,1) and IC share the full-access closed form.
        (Model::Su11 | Model::Ic, Access::AllModes) => match cfg.estimand {
            Estimand::KappaI => su11_full_qfi_kappa(n_peak, kappa, cfg.length),
            Estimand::EtaI => su11_full_qfi_eta(n_peak, eta),
        },
        (Model::Ic, Access::IcTwoMode) => eta_conversion(
            ic_two_mode_qfi_kappa(n_peak, kappa, cfg.length),
            cfg.estimand,
            eta,
            cfg.length,
        ),
        (Model::Dl, Access::AllModes) => {
            let q = qfi_two_mode(
                |k| CovarianceTwoMode::from_moments(&dl_point(cfg, gain, k)?),
                kappa,
                fd_step_for(kappa),
                Estimand::KappaI,
                Access::AllModes,
            )?;
            eta_conversion(q.value, cfg.estimand, eta, cfg.length)
        }
        (_, Access::SingleMode) => {
            let q = qfi_single_mode(
                |k| single_mode_occupation(cfg, gain, k),
                kappa,
                fd_step_for(kappa),
                Estimand::KappaI,
            )?;
            if q.divergent {
                return Ok(PointValue {
                    value: f64::INFINITY,
                    flag: RowFlag::Divergent,
                    derivative: None,
                });
            }
            eta_conversion(q.value, cfg.estimand, eta, cfg.length)
        }
        (model, access) => {
            return Err(Error::InvalidConfig(format!(
                "unsupported combination {} / {}",
                model.as_str(),
                access.as_str()
            )))
        }
    };
    if !value.is_finite() {
        return Ok(PointValue {
            value,
            flag: RowFlag::Divergent,
            derivative: None,
        });
    }
    Ok(ok(value))
}

fn diff_error_value(cfg: &SweepConfig, gain: &GainSpec, kappa: f64) -> Result<PointValue> {
    let pipeline = |k: f64| -> Result<Moments> {
        match cfg.model {
            Model::Su11 => {
                let pm = pm_for(cfg, gain);
                let eta_i = eta_from_kappa(k, cfg.length);
                let ch = LossChannel::new(1.0, eta_i, cfg.phases.phi_s, cfg.phases.phi_i)?;
                let phi = cfg
                    .phases
                    .phi_p2
                    .unwrap_or_else(|| anti_squeeze_phase(gain, &pm, &ch, cfg.length));
                Ok(su11_moments(gain, &pm, &ch, phi, cfg.length))
            }
            Model::Dl => dl_point(cfg, gain, k),
            Model::Ic => unreachable!("rejected in validate"),
        }
    };
    let m = pipeline(kappa)?;
    let dm = moments_derivative(pipeline, kappa, fd_step_for(kappa))?;
    let e = intensity_diff_error(&m, &dm);
    Ok(PointValue {
        value: if e.value == 0.0 { f64::INFINITY } else { 1.0 / e.value },
        flag: if e.vanishing_derivative {
            RowFlag::VanishingDerivative
        } else {
            RowFlag::Ok
        },
        derivative: Some(dm.n_s - dm.n_i),
    })
}

fn eval_point(cfg: &SweepConfig, gain_n_peak: f64, kappa: f64) -> Result<(SweepRow, Option<f64>)> {
    let gain = GainSpec::new(gain_n_peak)?;
    let pv = match cfg.quantity {
        Quantity::Qfi => qfi_value(cfg, &gain, kappa)?,
        Quantity::InverseDiffError => diff_error_value(cfg, &gain, kappa)?,
    };
    Ok((
        SweepRow {
            kappa,
            eta: eta_from_kappa(kappa, cfg.length),
            gain: gain_n_peak,
            value: pv.value,
            flag: pv.flag,
        },
        pv.derivative,
    ))
}

/// Evaluates one (gain, kappa) point of the sweep without running the grid.
pub fn evaluate_point(cfg: &SweepConfig, gain_n_peak: f64, kappa: f64) -> Result<SweepRow> {
    cfg.validate()?;
    Ok(eval_point(cfg, gain_n_peak, kappa)?.0)
}

fn assemble(cfg: &SweepConfig, mut pairs: Vec<(SweepRow, Option<f64>)>) -> SweepResult {
    pairs.sort_by(|a, b| {
        (a.0.gain, a.0.kappa)
            .partial_cmp(&(b.0.gain, b.0.kappa))
            .unwrap()
    });

    // A derivative sign flip between neighboring rows of one gain means the
    // zero fell between grid points: flag the bracketing rows as a dip too.
    if cfg.quantity == Quantity::InverseDiffError {
        for i in 1..pairs.len() {
            let same_gain = pairs[i].0.gain == pairs[i - 1].0.gain;
            if let (Some(d0), Some(d1)) = (pairs[i - 1].1, pairs[i].1) {
                if same_gain && d0 * d1 < 0.0 {
                    for j in [i - 1, i] {
                        if pairs[j].0.flag == RowFlag::Ok {
                            pairs[j].0.flag = RowFlag::VanishingDerivative;
                        }
                    }
                }
            }
        }
    }

    let meta = vec![
        ("model".into(), cfg.model.as_str().into()),
        ("access".into(), cfg.access.as_str().into()),
        ("estimand".into(), cfg.estimand.as_str().into()),
        ("quantity".into(), cfg.quantity.as_str().into()),
        ("length_nm".into(), format!("{:e}", cfg.length)),
        (
            "gains".into(),
            cfg.gains
                .iter()
                .map(|g| format!("{g:e}"))
                .collect::<Vec<_>>()
                .join(" "),
        ),
    ];
    SweepResult {
        meta,
        rows: pairs.into_iter().map(|(row, _)| row).collect(),
    }
}

fn task_list(cfg: &SweepConfig) -> Vec<(f64, f64)> {
    let kappas = cfg.grid.points();
    cfg.gains
        .iter()
        .flat_map(|&g| kappas.iter().map(move |&k| (g, k)))
        .collect()
}

/// Runs the sweep, evaluating grid points in parallel when the `parallel`
/// feature is enabled.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let tasks = task_list(cfg);
    #[cfg(feature = "parallel")]
    let pairs = tasks
        .par_iter()
        .map(|&(g, k)| eval_point(cfg, g, k))
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let pairs = tasks
        .iter()
        .map(|&(g, k)| eval_point(cfg, g, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, pairs))
}

/// Sequential fallback with identical output, kept callable regardless of
/// features for benchmarking.
pub fn run_sweep_serial(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let pairs = task_list(cfg)
        .iter()
        .map(|&(g, k)| eval_point(cfg, g, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, pairs))
}

/// Location of the log-ratio zero crossing between two sweeps, per gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverPoint {
    pub gain: f64,
    /// `None` when the log-ratio keeps one sign over the whole grid.
    pub kappa: Option<f64>,
}

/// Finds, per gain, the kappa where `log(value_a / value_b)` changes sign,
/// by linear interpolation in log kappa. Requires matching grids.
pub fn crossover(a: &SweepResult, b: &SweepResult) -> Result<Vec<CrossoverPoint>> {
    if a.rows.len() != b.rows.len()
        || a.rows
            .iter()
            .zip(&b.rows)
            .any(|(ra, rb)| ra.kappa != rb.kappa || ra.gain != rb.gain)
    {
        return Err(Error::InvalidConfig(
            "crossover requires sweeps on matching (gain, kappa) grids".into(),
        ));
    }

    let mut gains: Vec<f64> = a.rows.iter().map(|r| r.gain).collect();
    gains.dedup();

    let mut out = Vec::with_capacity(gains.len());
    for g in gains {
        let pts: Vec<(f64, f64)> = a
            .rows
            .iter()
            .zip(&b.rows)
            .filter(|(ra, rb)| {
                ra.gain == g
                    && ra.flag == RowFlag::Ok
                    && rb.flag == RowFlag::Ok
                    && ra.value > 0.0
                    && rb.value > 0.0
            })
            .map(|(ra, rb)| (ra.kappa, (ra.value / rb.value).ln()))
            .collect();
        // Zeros are skipped so coincident curves report no crossover; a
        // genuine crossing shows as a sign change between nonzero ratios.
        let mut kappa = None;
        let nonzero: Vec<(f64, f64)> = pts.into_iter().filter(|&(_, r)| r != 0.0).collect();
        for w in nonzero.windows(2) {
            let ((k0, r0), (k1, r1)) = (w[0], w[1]);
            if r0 * r1 < 0.0 {
                let t = r0 / (r0 - r1);
                kappa = Some((k0.ln() + t * (k1.ln() - k0.ln())).exp());
                break;
            }
        }
        out.push(CrossoverPoint { gain: g, kappa });
    }
    Ok(out)
}

/// Serializes a sweep as a CSV with a `# key: value` comment header. Floats
/// use the shortest round-tripping scientific form, so equal results emit
/// byte-identical files.
pub fn emit_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    for (k, v) in &result.meta {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str("kappa_i_nm^-1,eta_i,gain_Npeak,value,flag\n");
    for r in &result.rows {
        s.push_str(&format!(
            "{:e},{:e},{:e},{:e},{}\n",
            r.kappa,
            r.eta,
            r.gain,
            r.value,
            r.flag.as_str()
        ));
    }
    s
}

/// Parses a CSV produced by [`emit_csv`], reconstructing the sweep exactly.
pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut meta = Vec::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| Error::InvalidConfig(format!("bad meta line {line:?}")))?;
            meta.push((k.to_string(), v.to_string()));
            continue;
        }
        if !saw_header {
            if line != "kappa_i_nm^-1,eta_i,gain_Npeak,value,flag" {
                return Err(Error::InvalidConfig(format!("bad CSV header {line:?}")));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidConfig(format!("bad CSV row {line:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad number {s:?}")))
        };
        rows.push(SweepRow {
            kappa: num(fields[0])?,
            eta: num(fields[1])?,
            gain: num(fields[2])?,
            value: num(fields[3])?,
            flag: RowFlag::parse(fields[4])?,
        });
    }
    if !saw_header {
        return Err(Error::InvalidConfig("missing CSV header".into()));
    }
    Ok(SweepResult { meta, rows })
}
