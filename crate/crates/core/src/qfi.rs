//! Gaussian covariance matrices, quantum Fisher information for the three
//! detection-access scenarios, reparametrization between transmission and
//! decay rate, intensity-difference error propagation, and the approximate
//! distributed-loss QFI fit.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::configurations::{dl_moments, DLParams, GainSpec, ICMoments};
use crate::spectral::PhaseMatching;
use crate::twinbeam::Moments;
use crate::{Error, Result};

/// Parameter being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimand {
    EtaI,
    KappaI,
}

impl Estimand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimand::EtaI => "eta_i",
            Estimand::KappaI => "kappa_i",
        }
    }
}

/// Which modes the measurement can access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    AllModes,
    IcTwoMode,
    SingleMode,
}

impl Access {
    pub fn as_str(&self) -> &'static str {
        match self {
            Access::AllModes => "all_modes",
            Access::IcTwoMode => "ic_two_mode",
            Access::SingleMode => "single_mode",
        }
    }
}

/// How the value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    Numeric,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Numeric => "numeric",
        }
    }
}

/// A QFI evaluation. `value` is dimensionless for the eta estimand and nm^2
/// for the kappa estimand. `divergent` marks the kappa -> 0 blow-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiResult {
    pub value: f64,
    pub estimand: Estimand,
    pub access: Access,
    pub method: Method,
    pub divergent: bool,
}

/// Finite-difference step balancing truncation against cancellation at double
/// precision.
pub fn fd_step_for(epsilon: f64) -> f64 {
    (1e-6 * epsilon.abs()).max(1e-12)
}

type CMat4 = Matrix4<Complex64>;

const PHYSICALITY_SLACK: f64 = 1e-9;

fn omega_symplectic() -> CMat4 {
    CMat4::from_diagonal(&nalgebra::Vector4::new(
        Complex64::ONE,
        Complex64::ONE,
        -Complex64::ONE,
        -Complex64::ONE,
    ))
}

/// 4x4 Hermitian covariance in the ordering (a_S, a_I, a_S^dag, a_I^dag) with
/// the convention `sigma_ij = <r_i r_j^dag + r_j^dag r_i>` (no 1/2 factor).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTwoMode {
    pub sigma: CMat4,
}

impl CovarianceTwoMode {
    fn validated(sigma: CMat4) -> Result<Self> {
        let cov = Self { sigma };
        let (_, lambda2) = cov.symplectic_eigenvalues();
        // The invariant formula cancels to sqrt(eps) * scale accuracy for
        // near-pure states, so the slack grows with the covariance norm.
        let slack = PHYSICALITY_SLACK.max((f64::EPSILON * sigma.norm_squared()).sqrt());
        if lambda2 < 1.0 - slack {
            return Err(Error::UnphysicalState { min_eig: lambda2 });
        }
        Ok(cov)
    }

    /// Covariance of the signal-idler pair from its moment triple. Diagonal
    /// entries `2N + 1`, anti-diagonal `2M` / `2M^*`.
    pub fn from_moments(m: &Moments) -> Result<Self> {
        let z = Complex64::ZERO;
        let ds = Complex64::new(2.0 * m.n_s + 1.0, 0.0);
        let di = Complex64::new(2.0 * m.n_i + 1.0, 0.0);
        let mm = 2.0 * m.m;
        let sigma = CMat4::new(
            ds, z, z, mm, //
            z, di, mm, z, //
            z, mm.conj(), ds, z, //
            mm.conj(), z, z, di,
        );
        Self::validated(sigma)
    }

    /// Covariance of the signal-ancilla pair of the IC configuration (idler
    /// traced out): thermal diagonal plus the induced coherence `N_SA` inside
    /// the annihilation and creation blocks; no M-type entries.
    pub fn from_ic(ic: &ICMoments) -> Result<Self> {
        let z = Complex64::ZERO;
        let ds = Complex64::new(2.0 * ic.n_s + 1.0, 0.0);
        let da = Complex64::new(2.0 * ic.n_a + 1.0, 0.0);
        let c = 2.0 * ic.n_sa;
        let sigma = CMat4::new(
            ds, c.conj(), z, z, //
            c, da, z, z, //
            z, z, ds, c, //
            z, z, c.conj(), da,
        );
        Self::validated(sigma)
    }

    /// Positive symplectic eigenvalues `(lambda_1, lambda_2)`, descending.
    ///
    /// Obtained from the invariants of `Gamma = Omega sigma` alone: the
    /// eigenvalues of `Gamma` come in +- pairs, so its characteristic
    /// polynomial is quadratic in `lambda^2` with
    /// `lambda^2 = (T +- sqrt(T^2 - 4D)) / 2`, `T = Re tr(Gamma^2) / 2`,
    /// `D = Re det(Gamma)`.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let g = omega_symplectic() * self.sigma;
        let t = (g * g).trace().re / 2.0;
        let d = g.determinant().re;
        let disc = (t * t - 4.0 * d).max(0.0).sqrt();
        let l1 = ((t + disc) / 2.0).max(0.0).sqrt();
        let l2 = ((t - disc) / 2.0).max(0.0).sqrt();
        (l1.max(l2), l1.min(l2))
    }
}

/// Richardson-extrapolated central difference: needs f at x +- h and x +- h/2.
fn richardson(f_ph: f64, f_mh: f64, f_ph2: f64, f_mh2: f64, h: f64) -> f64 {
    let d_h = (f_ph - f_mh) / (2.0 * h);
    let d_h2 = (f_ph2 - f_mh2) / h;
    (4.0 * d_h2 - d_h) / 3.0
}

const PURE_DET_TOL: f64 = 1e-9;
const PURE_LAMBDA_TOL: f64 = 1e-7;
const COND_LIMIT: f64 = 1e12;

/// Two-mode Gaussian QFI of the parametrized covariance `sigma_of` at
/// `epsilon`, by the three-term determinant/trace/eigenvalue formula with
/// Richardson-extrapolated central differences of step `fd_step`.
pub fn qfi_two_mode(
    sigma_of: impl Fn(f64) -> Result<CovarianceTwoMode>,
    epsilon: f64,
    fd_step: f64,
    estimand: Estimand,
    access: Access,
) -> Result<QfiResult> {
    let h = fd_step;
    let center = sigma_of(epsilon)?;
    let s_ph = sigma_of(epsilon + h)?;
    let s_mh = sigma_of(epsilon - h)?;
    let s_ph2 = sigma_of(epsilon + h / 2.0)?;
    let s_mh2 = sigma_of(epsilon - h / 2.0)?;

    let omega = omega_symplectic();
    let gamma = omega * center.sigma;

    // Entrywise Richardson derivative of sigma, then Gamma_dot = Omega sigma_dot.
    let d_h = (s_ph.sigma - s_mh.sigma) / Complex64::new(2.0 * h, 0.0);
    let d_h2 = (s_ph2.sigma - s_mh2.sigma) / Complex64::new(h, 0.0);
    let sigma_dot = (d_h2 * Complex64::new(4.0, 0.0) - d_h) / Complex64::new(3.0, 0.0);
    let gamma_dot = omega * sigma_dot;

    let det_g = gamma.determinant().re;
    let det_dist = (det_g - 1.0).abs();
    if det_dist < PURE_DET_TOL {
        return Err(Error::PureStateSingularity { det_dist });
    }

    let g_inv = gamma
        .try_inverse()
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let a = CMat4::identity() + gamma * gamma;
    let a_inv = a
        .try_inverse()
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let cond = a.norm() * a_inv.norm();
    if cond > COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }

    let term1 = det_g * (g_inv * gamma_dot * g_inv * gamma_dot).trace().re;
    let term2 =
        a.determinant().re.abs().sqrt() * (a_inv * gamma_dot * a_inv * gamma_dot).trace().re;

    // Eigenvalue derivatives, paired by descending rank across the stencil.
    let (l1, l2) = center.symplectic_eigenvalues();
    let (p1, p2) = s_ph.symplectic_eigenvalues();
    let (m1, m2) = s_mh.symplectic_eigenvalues();
    let (p1h, p2h) = s_ph2.symplectic_eigenvalues();
    let (m1h, m2h) = s_mh2.symplectic_eigenvalues();
    let l1_dot = richardson(p1, m1, p1h, m1h, h);
    let l2_dot = richardson(p2, m2, p2h, m2h, h);

    // Each lambda -> 1 makes lambda^4 - 1 vanish removably; drop that term.
    let mut lam_sum = 0.0;
    if (l1 - 1.0).abs() >= PURE_LAMBDA_TOL {
        lam_sum -= l1_dot * l1_dot / (l1.powi(4) - 1.0);
    }
    if (l2 - 1.0).abs() >= PURE_LAMBDA_TOL {
        lam_sum += l2_dot * l2_dot / (l2.powi(4) - 1.0);
    }
    let term3 = 4.0 * (l1 * l1 - l2 * l2) * lam_sum;

    let value = (term1 + term2 + term3) / (2.0 * (det_g - 1.0));
    Ok(QfiResult {
        value: value.max(0.0),
        estimand,
        access,
        method: Method::Numeric,
        divergent: false,
    })
}

/// Thermal single-mode covariance `(2n+1) 1_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSingleMode {
    pub n: f64,
}

impl CovarianceSingleMode {
    pub fn new(n: f64) -> Result<Self> {
        if !(n >= 0.0) {
            return Err(Error::UnphysicalState { min_eig: 2.0 * n + 1.0 });
        }
        Ok(Self { n })
    }

    pub fn symplectic_eigenvalue(&self) -> f64 {
        2.0 * self.n + 1.0
    }
}

/// Single-mode thermal QFI `Ndot^2 / (N (1 + N))` of the parametrized
/// occupation `n_of` at `epsilon`. Reports a divergence when the occupation
/// vanishes while still changing with the parameter.
pub fn qfi_single_mode(
    n_of: impl Fn(f64) -> Result<f64>,
    epsilon: f64,
    fd_step: f64,
    estimand: Estimand,
) -> Result<QfiResult> {
    let h = fd_step;
    let n = n_of(epsilon)?;
    let n_dot = richardson(
        n_of(epsilon + h)?,
        n_of(epsilon - h)?,
        n_of(epsilon + h / 2.0)?,
        n_of(epsilon - h / 2.0)?,
        h,
    );
    let base = QfiResult {
        value: 0.0,
        estimand,
        access: Access::SingleMode,
        method: Method::Numeric,
        divergent: false,
    };
    if n <= 0.0 {
        if n_dot.abs() == 0.0 {
            return Ok(base);
        }
        return Ok(QfiResult {
            value: f64::INFINITY,
            divergent: true,
            ..base
        });
    }
    Ok(QfiResult {
        value: n_dot * n_dot / (n * (1.0 + n)),
        ..base
    })
}

/// General single-mode Gaussian QFI in purity form, specialized to a thermal
/// state with no displacement; agrees with `Ndot^2 / (N (1 + N))` identically
/// and is kept as a cross-check route.
pub fn single_mode_purity_qfi(n: f64, n_dot: f64) -> f64 {
    let u = (2.0 * n + 1.0).powi(2);
    // Tr[(sigma^-1 sigma_dot)^2] / (2 (1 + P^2)) + 2 Pdot^2 / (1 - P^4)
    // with sigma = (2n+1) 1_2 and purity P = 1 / (2n+1).
    let term1 = 4.0 * n_dot * n_dot / (u + 1.0);
    let term2 = 8.0 * n_dot * n_dot / (u * u - 1.0);
    term1 + term2
}

/// Converts an eta-estimand QFI to the kappa estimand: `H_kappa = H_eta L^2
/// eta^2` via the chain rule for `eta = e^{-kappa L}`.
pub fn reparametrize(q: &QfiResult, eta: f64, length: f64) -> Result<QfiResult> {
    if q.estimand != Estimand::EtaI {
        return Err(Error::InvalidConfig(
            "reparametrize expects an eta_i-estimand QFI".into(),
        ));
    }
    Ok(QfiResult {
        value: q.value * length * length * eta * eta,
        estimand: Estimand::KappaI,
        ..*q
    })
}

/// Inverse of [`reparametrize`]: kappa estimand back to eta.
pub fn reparametrize_to_eta(q: &QfiResult, eta: f64, length: f64) -> Result<QfiResult> {
    if q.estimand != Estimand::KappaI {
        return Err(Error::InvalidConfig(
            "reparametrize_to_eta expects a kappa_i-estimand QFI".into(),
        ));
    }
    Ok(QfiResult {
        value: q.value / (length * length * eta * eta),
        estimand: Estimand::EtaI,
        ..*q
    })
}

pub const DERIVATIVE_FLOOR: f64 = 1e-30;

/// Error-propagated variance of the decay-rate estimate from an
/// intensity-difference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityDiffError {
    pub value: f64,
    pub vanishing_derivative: bool,
}

/// `Delta^2 kappa = Delta^2(N_S - N_I) / (d(N_S - N_I)/dkappa)^2` with
/// `Delta^2(N_S - N_I) = N_S(N_S+1) + N_I(N_I+1) - 2|M|^2`. A vanishing
/// derivative is returned as a flagged infinity.
pub fn intensity_diff_error(m: &Moments, dm_dkappa: &Moments) -> IntensityDiffError {
    let variance =
        m.n_s * (m.n_s + 1.0) + m.n_i * (m.n_i + 1.0) - 2.0 * m.m.norm_sqr();
    let deriv = dm_dkappa.n_s - dm_dkappa.n_i;
    if deriv.abs() < DERIVATIVE_FLOOR {
        return IntensityDiffError {
            value: f64::INFINITY,
            vanishing_derivative: true,
        };
    }
    IntensityDiffError {
        value: variance.max(0.0) / (deriv * deriv),
        vanishing_derivative: false,
    }
}

/// Richardson-extrapolated derivative of a moment pipeline.
pub fn moments_derivative(
    f: impl Fn(f64) -> Result<Moments>,
    x: f64,
    fd_step: f64,
) -> Result<Moments> {
    let h = fd_step;
    let (ph, mh, ph2, mh2) = (f(x + h)?, f(x - h)?, f(x + h / 2.0)?, f(x - h / 2.0)?);
    Ok(Moments {
        n_s: richardson(ph.n_s, mh.n_s, ph2.n_s, mh2.n_s, h),
        n_i: richardson(ph.n_i, mh.n_i, ph2.n_i, mh2.n_i, h),
        m: Complex64::new(
            richardson(ph.m.re, mh.m.re, ph2.m.re, mh2.m.re, h),
            richardson(ph.m.im, mh.m.im, ph2.m.im, mh2.m.im, h),
        ),
    })
}

/// SU(1,1)/IC full-access QFI, eta estimand: `N^V / (eta (1 - eta))`.
pub fn su11_full_qfi_eta(n_v: f64, eta: f64) -> f64 {
    n_v / (eta * (1.0 - eta))
}

/// SU(1,1)/IC full-access QFI, kappa estimand: `L^2 N^P / (e^{kappa L} - 1)`.
pub fn su11_full_qfi_kappa(n_peak: f64, kappa: f64, length: f64) -> f64 {
    length * length * n_peak / (kappa * length).exp_m1()
}

/// Two-mode IC (idler traced out) QFI, kappa estimand:
/// `L^2 N^P e^{-kL} (1 + N^P(1 - e^{-kL})) / [(1 - e^{-kL})(2 + N^P(2 - e^{-kL}))]`.
pub fn ic_two_mode_qfi_kappa(n_peak: f64, kappa: f64, length: f64) -> f64 {
    let e = (-kappa * length).exp();
    let num = length * length * n_peak * e * (1.0 + n_peak * (1.0 - e));
    let den = (1.0 - e) * (2.0 + n_peak * (2.0 - e));
    num / den
}

/// Approximate-DL-QFI fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub alpha: f64,
    /// Mean over the per-gain coefficients of determination.
    pub r_squared: f64,
    pub gain_r_squared: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Fits the proportionality constant of `H approx (N_S - N_I) / (alpha
/// kappa^2)` for the distributed-loss model: a joint least-squares slope of
/// `y = (N_S - N_I) / H` against `x = kappa^2` across all gain levels, with
/// per-gain R^2 against the shared slope.
pub fn fit_dl_alpha(grid: &[(f64, f64)], length: f64) -> Result<FitReport> {
    let mut gains: Vec<f64> = grid.iter().map(|&(_, g)| g).collect();
    gains.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gains.dedup();
    let mut kappas: Vec<f64> = grid.iter().map(|&(k, _)| k).collect();
    kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kappas.dedup();
    if gains.len() < 3 || kappas.len() < 2 {
        return Err(Error::InvalidFitGrid(format!(
            "need at least 3 gain levels and 2 decay rates, got {} and {}",
            gains.len(),
            kappas.len()
        )));
    }

    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    let mut gain_of = Vec::with_capacity(grid.len());
    for &(kappa, n_peak) in grid {
        let gain = GainSpec::new(n_peak)?;
        let m = dl_point_moments(&gain, kappa, length)?;
        let h = dl_numeric_qfi_kappa(&gain, kappa, length)?;
        xs.push(kappa * kappa);
        ys.push((m.n_s - m.n_i) / h);
        gain_of.push(n_peak);
    }

    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidFitGrid("degenerate kappa grid".into()));
    }
    let alpha = sxy / sxx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - alpha * x)
        .collect();

    let mut gain_r_squared = Vec::with_capacity(gains.len());
    for &g in &gains {
        let idx: Vec<usize> = (0..grid.len()).filter(|&i| gain_of[i] == g).collect();
        let mean_y = idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64;
        let ss_tot: f64 = idx.iter().map(|&i| (ys[i] - mean_y).powi(2)).sum();
        let ss_res: f64 = idx.iter().map(|&i| residuals[i].powi(2)).sum();
        gain_r_squared.push(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 });
    }
    let r_squared = gain_r_squared.iter().sum::<f64>() / gain_r_squared.len() as f64;

    Ok(FitReport {
        alpha,
        r_squared,
        gain_r_squared,
        residuals,
    })
}

fn matched_pm(gain: &GainSpec, length: f64) -> PhaseMatching {
    crate::spectral::evaluate_mismatch(
        &crate::spectral::DispersionProfile::phase_matched(),
        0.0,
        gain.gamma_abs(length),
    )
}

/// Phase-matched DL moments at decay rate `kappa` (idler-only loss).
pub fn dl_point_moments(gain: &GainSpec, kappa: f64, length: f64) -> Result<Moments> {
    let pm = matched_pm(gain, length);
    let dl = DLParams::idler_only(kappa, length)?;
    dl_moments(gain, &pm, &dl)
}

/// Numeric full-access DL QFI over kappa, phase-matched, idler-only loss.
pub fn dl_numeric_qfi_kappa(gain: &GainSpec, kappa: f64, length: f64) -> Result<f64> {
    let q = qfi_two_mode(
        |k| CovarianceTwoMode::from_moments(&dl_point_moments(gain, k, length)?),
        kappa,
        fd_step_for(kappa),
        Estimand::KappaI,
        Access::AllModes,
    )?;
    Ok(q.value)
}
