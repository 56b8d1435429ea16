//! Frequency grids, dispersion profiles, and the phase-matching quantities
//! that feed every propagator.

use num_complex::Complex64;

use crate::{Error, Result};

/// Uniform grid of frequency detunings, `point(n) = omega0 + n * delta_omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega0: f64,
    delta_omega: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(omega0: f64, delta_omega: f64, n_points: usize) -> Result<Self> {
        if !(delta_omega > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "delta_omega must be positive, got {delta_omega}"
            )));
        }
        if n_points < 1 {
            return Err(Error::InvalidGrid("n_points must be at least 1".into()));
        }
        Ok(Self {
            omega0,
            delta_omega,
            n_points,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Detuning of the n-th grid point. Computed multiplicatively so the grid
    /// carries no accumulation drift.
    pub fn point(&self, n: usize) -> f64 {
        debug_assert!(n < self.n_points);
        self.omega0 + (n as f64) * self.delta_omega
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |n| self.point(n))
    }
}

/// Truncated Taylor expansions of the detuned dispersion relations
/// `delta_k_S(omega)` and `delta_k_I(omega)` around the central frequencies.
///
/// Coefficient `k` has units nm^-1 (rad/s)^-k. The constant term must vanish:
/// the detuned dispersion is zero at the central frequency by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DispersionProfile {
    taylor_s: Vec<f64>,
    taylor_i: Vec<f64>,
}

impl DispersionProfile {
    pub fn new(taylor_s: Vec<f64>, taylor_i: Vec<f64>) -> Result<Self> {
        for (name, coeffs) in [("taylor_S", &taylor_s), ("taylor_I", &taylor_i)] {
            if coeffs.first().map_or(false, |&c0| c0 != 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "{name} constant term must be zero, got {}",
                    coeffs[0]
                )));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "{name} contains a non-finite coefficient"
                )));
            }
        }
        Ok(Self { taylor_s, taylor_i })
    }

    /// Perfectly phase-matched profile: both dispersions identically zero.
    pub fn phase_matched() -> Self {
        Self::default()
    }

    pub fn taylor_s(&self) -> &[f64] {
        &self.taylor_s
    }

    pub fn taylor_i(&self) -> &[f64] {
        &self.taylor_i
    }

    /// Signal dispersion detuned from the central wavevector, nm^-1.
    pub fn delta_k_s(&self, omega: f64) -> f64 {
        horner(&self.taylor_s, omega)
    }

    /// Idler dispersion detuned from the central wavevector, nm^-1.
    pub fn delta_k_i(&self, omega: f64) -> f64 {
        horner(&self.taylor_i, omega)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Wavevector mismatch quantities at one detuning.
///
/// `delta_k = delta_k_S(omega) - delta_k_I(-omega)`,
/// `sigma_k = delta_k_S(omega) + delta_k_I(-omega)`, and
/// `nu = sqrt(sigma_k^2 - 4 gamma^2)` (principal branch). Every downstream
/// propagator element is even in `nu`, so the branch choice is immaterial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatching {
    pub delta_k: f64,
    pub sigma_k: f64,
    pub nu: Complex64,
}

/// Evaluates the phase-matching quantities at detuning `omega` for interaction
/// strength magnitude `gamma_abs`.
pub fn evaluate_mismatch(profile: &DispersionProfile, omega: f64, gamma_abs: f64) -> PhaseMatching {
    let dks = profile.delta_k_s(omega);
    let dki = profile.delta_k_i(-omega);
    let sigma_k = dks + dki;
    let delta_k = dks - dki;
    let nu = Complex64::new(sigma_k * sigma_k - 4.0 * gamma_abs * gamma_abs, 0.0).sqrt();
    PhaseMatching {
        delta_k,
        sigma_k,
        nu,
    }
}

const ROOT_TOL: f64 = 1e-15; // nm^-1
const SIGMA_ZERO: f64 = 1e-300;

/// Locates the root of `sigma_K` nearest zero detuning on the given grid.
///
/// Returns 0 when `sigma_K` vanishes identically on the grid. Bisection is run
/// until `|sigma_K| < 1e-15` nm^-1.
pub fn phase_matched_frequency(profile: &DispersionProfile, grid: &FrequencyGrid) -> Result<f64> {
    let sigma = |omega: f64| profile.delta_k_s(omega) + profile.delta_k_i(-omega);

    let values: Vec<(f64, f64)> = grid.points().map(|w| (w, sigma(w))).collect();
    if values.iter().all(|&(_, s)| s.abs() < SIGMA_ZERO) {
        return Ok(0.0);
    }

    let mut best: Option<f64> = None;
    let mut consider = |root: f64| {
        if best.map_or(true, |b| root.abs() < b.abs()) {
            best = Some(root);
        }
    };

    for pair in values.windows(2) {
        let (a, fa) = pair[0];
        let (b, fb) = pair[1];
        if fa.abs() < ROOT_TOL {
            consider(a);
            continue;
        }
        if fa * fb < 0.0 {
            consider(bisect(&sigma, a, b));
        }
    }
    if let Some(&(last, flast)) = values.last() {
        if flast.abs() < ROOT_TOL {
            consider(last);
        }
    }

    best.ok_or(Error::NoPhaseMatchedPoint)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    loop {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.abs() < ROOT_TOL || mid == a || mid == b {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
}
