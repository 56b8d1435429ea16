//! Output moments of the three sensing configurations: SU(1,1), induced
//! coherence (IC), and distributed loss (DL), plus the shared gain and loss
//! parametrization.
//!
//! Phase convention: the first squeezer pass sets the reference phase
//! (real coupling `|gamma|`); the second pass carries the pump phase
//! `phi_p2`, with `phi_p2 = pi` the anti-squeezing operating point at phase
//! match. Internally the second-pass coupling is `-|gamma| e^{i phi_p2}`,
//! which makes `phi_p2 = pi` reproduce the bright anti-squeezed fringe
//! `N_S = 4 N^V (1 + N^V)` for lossless operation.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::spectral::PhaseMatching;
use crate::twinbeam::{
    apply_loss, propagator, propagator_elements, seeded_moments, vacuum_moments, LossChannel,
    Moments, Propagator,
};
use crate::{Error, Result};

/// Parametric gain expressed through the peak single-pass signal occupation
/// `N_S^P = sinh^2(gamma L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSpec {
    n_peak: f64,
}

impl GainSpec {
    pub fn new(n_peak: f64) -> Result<Self> {
        if !(n_peak >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "n_peak must be non-negative, got {n_peak}"
            )));
        }
        Ok(Self { n_peak })
    }

    pub fn n_peak(&self) -> f64 {
        self.n_peak
    }

    /// Coupling magnitude realizing the peak occupation over `length`:
    /// `asinh(sqrt(N^P)) / L`, in nm^-1.
    pub fn gamma_abs(&self, length: f64) -> f64 {
        self.n_peak.sqrt().asinh() / length
    }
}

/// Transmission coefficient `eta = e^{-kappa L}` of a decay rate over a region
/// of the given length.
pub fn eta_from_kappa(kappa: f64, length: f64) -> f64 {
    (-kappa * length).exp()
}

/// Decay rate realizing transmission `eta` over the given length.
pub fn kappa_from_eta(eta: f64, length: f64) -> f64 {
    -eta.ln() / length
}

fn second_pass_gamma(gamma_abs: f64, phi_p2: f64) -> Complex64 {
    -Complex64::from_polar(gamma_abs, phi_p2)
}

fn first_pass(gain: &GainSpec, pm: &PhaseMatching, length: f64) -> (Propagator, Moments) {
    let gamma = Complex64::new(gain.gamma_abs(length), 0.0);
    let p = propagator(pm, gamma, length);
    let vac = vacuum_moments(&p);
    (p, vac)
}

/// Moments after the full SU(1,1) interferometer: squeezer, beamsplitter loss
/// and dispersion, then a second squeezer pass with pump phase `phi_p2`.
pub fn su11_moments(
    gain: &GainSpec,
    pm: &PhaseMatching,
    ch: &LossChannel,
    phi_p2: f64,
    length: f64,
) -> Moments {
    let (_, vac) = first_pass(gain, pm, length);
    let lost = apply_loss(&vac, ch);
    let gamma2 = second_pass_gamma(gain.gamma_abs(length), phi_p2);
    let p2 = propagator(pm, gamma2, length);
    seeded_moments(&p2, &lost, gamma2)
}

/// Second-pass pump phase that operates the interferometer as an
/// anti-squeezer: `pi + Psi + Phi_S + Phi_I`, with `Psi` the dispersive phase
/// carried by `[M^V]^2` (zero at phase match).
pub fn anti_squeeze_phase(gain: &GainSpec, pm: &PhaseMatching, ch: &LossChannel, length: f64) -> f64 {
    let (_, vac) = first_pass(gain, pm, length);
    // arg([M^V]^2) relative to its phase-matched value of pi.
    let psi = if vac.m == Complex64::ZERO {
        0.0
    } else {
        let m2 = vac.m * vac.m;
        (-m2).arg()
    };
    std::f64::consts::PI + psi + ch.phi_s + ch.phi_i
}

/// Second-order moments of the induced-coherence configuration, including the
/// ancilla occupation and the signal-ancilla coherence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ICMoments {
    pub n_s: f64,
    pub n_i: f64,
    pub n_a: f64,
    /// `<a_S^dag a_A>` coherence induced between signal and ancilla.
    pub n_sa: Complex64,
    pub m_si: Complex64,
    pub m_ai: Complex64,
}

/// Moments after the IC configuration: first squeezer, loss on both branches,
/// then a second squeezer seeded by the idler together with a vacuum ancilla.
pub fn ic_moments(
    gain: &GainSpec,
    pm: &PhaseMatching,
    ch: &LossChannel,
    phi_p2: f64,
    length: f64,
) -> ICMoments {
    let (p1, vac) = first_pass(gain, pm, length);
    let n_v = vac.n_s;
    let m_v = vac.m;
    let u_ii = p1.u_ii;
    let root_eta = (ch.eta_s * ch.eta_i).sqrt();
    let phi = ch.phi_s + ch.phi_i;
    // Second-pass coupling phase relative to the real first pass.
    let pump = -Complex64::from_polar(1.0, phi_p2);
    ICMoments {
        n_s: ch.eta_s * n_v,
        n_i: n_v + ch.eta_i * n_v * (1.0 + n_v),
        n_a: n_v * (1.0 + ch.eta_i * n_v),
        n_sa: root_eta * Complex64::from_polar(1.0, -phi) * pump * n_v * u_ii,
        m_si: root_eta * Complex64::from_polar(1.0, phi) * m_v * u_ii.conj(),
        m_ai: pump * m_v * (1.0 + ch.eta_i * n_v),
    }
}

/// Intensity in one arm of the balanced beamsplitter that recombines signal
/// and ancilla: `(N_S + N_A +- 2 Im N_SA) / 2`.
pub fn ic_balanced_bs(ic: &ICMoments, sign: i8) -> f64 {
    0.5 * (ic.n_s + ic.n_a + 2.0 * f64::from(sign.signum()) * ic.n_sa.im)
}

/// Second-pass pump phase that maximizes the `+` arm (and minimizes the `-`
/// arm) of the balanced beamsplitter: `Phi_S + Phi_I - dK L / 2 - pi/2`.
pub fn ic_optimal_phase(pm: &PhaseMatching, ch: &LossChannel, length: f64) -> f64 {
    ch.phi_s + ch.phi_i - pm.delta_k * length / 2.0 - std::f64::consts::FRAC_PI_2
}

/// Distributed-loss region parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DLParams {
    pub kappa_s: f64,
    pub kappa_i: f64,
    pub length: f64,
    pub quadrature_points: usize,
}

impl DLParams {
    pub fn new(kappa_s: f64, kappa_i: f64, length: f64, quadrature_points: usize) -> Result<Self> {
        if !(kappa_s >= 0.0 && kappa_i >= 0.0) {
            return Err(Error::InvalidConfig(
                "decay rates must be non-negative".into(),
            ));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidConfig("length must be positive".into()));
        }
        if quadrature_points < 32 {
            return Err(Error::InvalidConfig(
                "quadrature_points must be at least 32".into(),
            ));
        }
        Ok(Self {
            kappa_s,
            kappa_i,
            length,
            quadrature_points,
        })
    }

    /// Idler-only in-medium loss, the default scenario.
    pub fn idler_only(kappa_i: f64, length: f64) -> Result<Self> {
        Self::new(0.0, kappa_i, length, 32)
    }
}

/// Single-pass vacuum moments of the lossy region truncated at distance `z`,
/// built from the propagator with the decay rates folded into complex
/// mismatch parameters.
fn dl_vacuum_at(gamma_abs: f64, pm: &PhaseMatching, dl: &DLParams, z: f64) -> Moments {
    let delta_t = Complex64::new(pm.delta_k, (dl.kappa_s + dl.kappa_i) / 2.0);
    let sigma_t = Complex64::new(pm.sigma_k, (dl.kappa_s - dl.kappa_i) / 2.0);
    let p = propagator_elements(delta_t, sigma_t, Complex64::new(gamma_abs, 0.0), z);
    vacuum_moments(&p)
}

const DL_QUAD_TOL: f64 = 1e-10;
const DL_QUAD_MAX_DOUBLINGS: usize = 6;

/// Moments at the end of a lossy nonlinear region. The bath contributions are
/// spatial integrals of the truncated single-pass moments, evaluated by
/// Gauss-Legendre quadrature with node doubling until two successive
/// estimates agree to 1e-10 relative.
pub fn dl_moments(gain: &GainSpec, pm: &PhaseMatching, dl: &DLParams) -> Result<Moments> {
    let gamma_abs = gain.gamma_abs(dl.length);
    let end = dl_vacuum_at(gamma_abs, pm, dl, dl.length);

    // kappa = 0 contributes nothing through the bath integrals.
    if dl.kappa_s == 0.0 && dl.kappa_i == 0.0 {
        return Ok(end);
    }

    let integrand = |z: f64| {
        let m = dl_vacuum_at(gamma_abs, pm, dl, z);
        (m.n_s, m.m)
    };
    let (int_n, int_m) = integrate_pair(integrand, dl.length, dl.quadrature_points)?;

    Ok(Moments {
        n_s: end.n_s + dl.kappa_i * int_n,
        n_i: end.n_i + dl.kappa_s * int_n,
        m: end.m + dl.kappa_s * int_m,
    })
}

/// Adaptive Gauss-Legendre integration of a paired real/complex integrand
/// over [0, L].
fn integrate_pair(
    f: impl Fn(f64) -> (f64, Complex64),
    length: f64,
    start_points: usize,
) -> Result<(f64, Complex64)> {
    let eval = |n: usize| -> (f64, Complex64) {
        let rule = GaussLegendre::new(n).expect("degree >= 2");
        let half = length / 2.0;
        let mut acc_n = 0.0;
        let mut acc_m = Complex64::ZERO;
        for &(node, weight) in rule.iter() {
            let z = half * (node + 1.0);
            let (vn, vm) = f(z);
            acc_n += weight * vn;
            acc_m += weight * vm;
        }
        (half * acc_n, half * acc_m)
    };

    let mut points = start_points.max(32);
    let (mut prev_n, mut prev_m) = eval(points);
    for _ in 0..DL_QUAD_MAX_DOUBLINGS {
        points *= 2;
        let (next_n, next_m) = eval(points);
        let scale_n = next_n.abs().max(1e-300);
        let scale_m = next_m.norm().max(1e-300);
        let ok_n = (next_n - prev_n).abs() / scale_n < DL_QUAD_TOL;
        let ok_m = (next_m - prev_m).norm() / scale_m < DL_QUAD_TOL;
        if ok_n && ok_m {
            return Ok((next_n, next_m));
        }
        prev_n = next_n;
        prev_m = next_m;
    }
    Err(Error::QuadratureNotConverged {
        tol: DL_QUAD_TOL,
        doublings: DL_QUAD_MAX_DOUBLINGS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{evaluate_mismatch, DispersionProfile};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const LEN: f64 = 4.0e7;

    fn matched(gain: &GainSpec) -> PhaseMatching {
        evaluate_mismatch(
            &DispersionProfile::phase_matched(),
            0.0,
            gain.gamma_abs(LEN),
        )
    }

    #[test]
    fn gain_round_trips_through_gamma() {
        for n_peak in [1e-6, 0.1, 1.0, 10.0, 250.0] {
            let gain = GainSpec::new(n_peak).unwrap();
            let gl = gain.gamma_abs(LEN) * LEN;
            assert_relative_eq!(gl.sinh().powi(2), n_peak, max_relative = 1e-12);
        }
    }

    #[test]
    fn eta_kappa_round_trip() {
        assert_eq!(eta_from_kappa(0.0, LEN), 1.0);
        for eta in [0.99, 0.5, 0.0183, 0.001] {
            let kappa = kappa_from_eta(eta, LEN);
            assert_relative_eq!(eta_from_kappa(kappa, LEN), eta, max_relative = 1e-14);
        }
    }

    #[test]
    fn transmission_anchor() {
        // kappa = 1e-7 nm^-1 over 40 mm: eta = e^-4, about 1.8 %.
        let eta = eta_from_kappa(1.0e-7, LEN);
        assert_relative_eq!(eta, (-4.0f64).exp(), max_relative = 1e-14);
        assert!((eta - 0.01832).abs() < 2e-5);
    }

    #[test]
    fn su11_lossless_anti_squeezed_fringe() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let out = su11_moments(&gain, &pm, &LossChannel::transparent(), PI, LEN);
        let n_v = gain.n_peak();
        assert_relative_eq!(out.n_s, 4.0 * n_v * (1.0 + n_v), max_relative = 1e-12);
        assert_relative_eq!(out.n_i, 4.0 * n_v * (1.0 + n_v), max_relative = 1e-12);
    }

    #[test]
    fn su11_lossless_squeezed_fringe_is_dark() {
        // phi_p2 = 0 undoes the first squeezer exactly when nothing is lost.
        let gain = GainSpec::new(2.0).unwrap();
        let pm = matched(&gain);
        let out = su11_moments(&gain, &pm, &LossChannel::transparent(), 0.0, LEN);
        assert!(out.n_s.abs() < 1e-12);
        assert!(out.n_i.abs() < 1e-12);
    }

    #[test]
    fn su11_full_blocking_leaves_second_pass_vacuum() {
        let gain = GainSpec::new(0.5).unwrap();
        let pm = matched(&gain);
        let ch = LossChannel::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let out = su11_moments(&gain, &pm, &ch, PI, LEN);
        assert_relative_eq!(out.n_s, gain.n_peak(), max_relative = 1e-12);
        assert_relative_eq!(out.n_i, gain.n_peak(), max_relative = 1e-12);
    }

    #[test]
    fn su11_zero_gain_gives_vacuum() {
        let gain = GainSpec::new(0.0).unwrap();
        let pm = matched(&gain);
        let out = su11_moments(&gain, &pm, &LossChannel::idler_only(0.4).unwrap(), PI, LEN);
        assert_eq!(out.n_s, 0.0);
        assert_eq!(out.n_i, 0.0);
        assert_eq!(out.m, Complex64::ZERO);
    }

    #[test]
    fn anti_squeeze_phase_at_phase_match_is_pi() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let phi = anti_squeeze_phase(&gain, &pm, &LossChannel::transparent(), LEN);
        assert_relative_eq!(phi, PI, max_relative = 1e-12);
    }

    #[test]
    fn anti_squeeze_phase_shifts_with_added_phases() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let ch = LossChannel::new(1.0, 1.0, PI / 4.0, PI / 4.0).unwrap();
        let phi = anti_squeeze_phase(&gain, &pm, &ch, LEN);
        assert_relative_eq!(phi, 3.0 * PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn anti_squeeze_phase_maximizes_output() {
        // The returned phase must be the argmax of N_S over phi_p2, also with
        // dispersion present.
        let gain = GainSpec::new(1.5).unwrap();
        let profile = DispersionProfile::new(vec![0.0, 4e-21], vec![0.0, 2.5e-21]).unwrap();
        let pm = evaluate_mismatch(&profile, 3.0e11, gain.gamma_abs(LEN));
        let ch = LossChannel::new(0.9, 0.7, 0.2, -0.35).unwrap();
        let best = anti_squeeze_phase(&gain, &pm, &ch, LEN);
        let n_best = su11_moments(&gain, &pm, &ch, best, LEN).n_s;
        for k in 0..64 {
            let phi = 2.0 * PI * (k as f64) / 64.0;
            let n = su11_moments(&gain, &pm, &ch, phi, LEN).n_s;
            assert!(n <= n_best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ic_zero_gain_is_all_zeros() {
        let gain = GainSpec::new(0.0).unwrap();
        let pm = matched(&gain);
        let ic = ic_moments(&gain, &pm, &LossChannel::transparent(), PI, LEN);
        assert_eq!(ic.n_s, 0.0);
        assert_eq!(ic.n_i, 0.0);
        assert_eq!(ic.n_a, 0.0);
        assert_eq!(ic.n_sa, Complex64::ZERO);
    }

    #[test]
    fn ic_full_idler_loss_kills_coherence() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let ch = LossChannel::new(0.6, 0.0, 0.0, 0.0).unwrap();
        let ic = ic_moments(&gain, &pm, &ch, PI, LEN);
        let n_v = gain.n_peak();
        assert_relative_eq!(ic.n_a, n_v, max_relative = 1e-12);
        assert_relative_eq!(ic.n_s, 0.6 * n_v, max_relative = 1e-12);
        assert_eq!(ic.n_sa, Complex64::ZERO);
        assert_eq!(ic.m_si, Complex64::ZERO);
    }

    #[test]
    fn ic_coherence_magnitude_at_phase_match() {
        let gain = GainSpec::new(3.0).unwrap();
        let pm = matched(&gain);
        let ch = LossChannel::new(0.8, 0.5, 0.0, 0.0).unwrap();
        let ic = ic_moments(&gain, &pm, &ch, PI, LEN);
        let n_v = gain.n_peak();
        let expected = (0.8f64 * 0.5).sqrt() * n_v * (1.0 + n_v).sqrt();
        assert_relative_eq!(ic.n_sa.norm(), expected, max_relative = 1e-12);
    }

    #[test]
    fn ic_balanced_bs_sum_rule() {
        let gain = GainSpec::new(2.0).unwrap();
        let pm = matched(&gain);
        let ch = LossChannel::idler_only(0.3).unwrap();
        let ic = ic_moments(&gain, &pm, &ch, 1.234, LEN);
        let plus = ic_balanced_bs(&ic, 1);
        let minus = ic_balanced_bs(&ic, -1);
        assert_relative_eq!(plus + minus, ic.n_s + ic.n_a, max_relative = 1e-12);
    }

    #[test]
    fn ic_balanced_bs_closed_form_at_optimal_phase() {
        // Idler-only loss, phase-matched, optimal phase:
        // N_+- = [2 N^V + eta_I (N^V)^2 +- 2 sqrt(eta_I) N^V sqrt(1 + N^V)] / 2.
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let eta_i = 0.4;
        let ch = LossChannel::idler_only(eta_i).unwrap();
        let phi = ic_optimal_phase(&pm, &ch, LEN);
        let ic = ic_moments(&gain, &pm, &ch, phi, LEN);
        let n_v = gain.n_peak();
        let base = 2.0 * n_v + eta_i * n_v * n_v;
        let fringe = 2.0 * eta_i.sqrt() * n_v * (1.0 + n_v).sqrt();
        assert_relative_eq!(
            ic_balanced_bs(&ic, 1),
            0.5 * (base + fringe),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            ic_balanced_bs(&ic, -1),
            0.5 * (base - fringe),
            max_relative = 1e-10
        );
    }

    #[test]
    fn ic_unit_idler_transmission_intensity() {
        // eta_I = 1: N_I = N^V + N^V (1 + N^V).
        let gain = GainSpec::new(5.0).unwrap();
        let pm = matched(&gain);
        let ic = ic_moments(&gain, &pm, &LossChannel::transparent(), PI, LEN);
        let n_v = gain.n_peak();
        assert_relative_eq!(ic.n_i, n_v + n_v * (1.0 + n_v), max_relative = 1e-12);
    }

    #[test]
    fn dl_without_loss_matches_lossless_vacuum() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        let dl = DLParams::new(0.0, 0.0, LEN, 32).unwrap();
        let out = dl_moments(&gain, &pm, &dl).unwrap();
        let p = propagator(&pm, Complex64::new(gain.gamma_abs(LEN), 0.0), LEN);
        let vac = vacuum_moments(&p);
        assert_relative_eq!(out.n_s, vac.n_s, max_relative = 1e-10);
        assert_relative_eq!(out.n_i, vac.n_i, max_relative = 1e-10);
        assert_relative_eq!(out.m.re, vac.m.re, max_relative = 1e-10);
        assert_relative_eq!(out.m.im, vac.m.im, max_relative = 1e-10);
    }

    #[test]
    fn dl_zero_gain_stays_dark() {
        let gain = GainSpec::new(0.0).unwrap();
        let pm = matched(&gain);
        let dl = DLParams::idler_only(1e-7, LEN).unwrap();
        let out = dl_moments(&gain, &pm, &dl).unwrap();
        assert_eq!(out.n_s, 0.0);
        assert_eq!(out.n_i, 0.0);
        assert_eq!(out.m, Complex64::ZERO);
    }

    #[test]
    fn dl_signal_exceeds_idler_under_idler_loss() {
        let gain = GainSpec::new(1.0).unwrap();
        let pm = matched(&gain);
        for kappa_i in [1e-8, 1e-7, 1.7e-7] {
            let dl = DLParams::idler_only(kappa_i, LEN).unwrap();
            let out = dl_moments(&gain, &pm, &dl).unwrap();
            assert!(out.n_s >= out.n_i);
        }
    }

    #[test]
    fn dl_signal_monotone_in_idler_loss() {
        let gain = GainSpec::new(10.0).unwrap();
        let pm = matched(&gain);
        let mut prev = f64::INFINITY;
        for k in 0..25 {
            let kappa_i = 1e-9 * 1.35f64.powi(k);
            let dl = DLParams::idler_only(kappa_i, LEN).unwrap();
            let n_s = dl_moments(&gain, &pm, &dl).unwrap().n_s;
            assert!(n_s <= prev * (1.0 + 1e-12));
            prev = n_s;
        }
    }
}
