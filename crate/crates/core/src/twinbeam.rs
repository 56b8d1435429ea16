//! Lossless continuous-wave twin-beam propagator and second-order moment
//! algebra: vacuum moments, seeded (second-pass) moments, and beamsplitter
//! loss updates. All three sensing configurations are built from these pieces.

use num_complex::Complex64;

use crate::spectral::PhaseMatching;
use crate::{Error, Result};

/// Threshold on |nu L| below which the trigonometric propagator elements
/// switch to their series expansions. Keeps the relative error below 1e-12
/// while avoiding 0/0 at the gain degeneracy nu -> 0.
const SERIES_THRESHOLD: f64 = 1e-4;

/// Vacuum occupation below which a propagator is treated as gain-free and the
/// seeded-moment update degenerates to a pure phase map.
const ZERO_GAIN: f64 = 1e-30;

/// The four block elements of the 2x2 transfer matrix U(omega; z - z0) acting
/// on (a_S(omega), a_I^dag(-omega)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub u_ss: Complex64,
    pub u_ii: Complex64,
    pub u_si: Complex64,
    pub u_is: Complex64,
}

impl Propagator {
    pub fn identity() -> Self {
        Self {
            u_ss: Complex64::ONE,
            u_ii: Complex64::ONE,
            u_si: Complex64::ZERO,
            u_is: Complex64::ZERO,
        }
    }

    /// `|u_ss|^2 - |u_si|^2`, equal to 1 for a lossless propagator.
    pub fn bogoliubov_invariant(&self) -> f64 {
        self.u_ss.norm_sqr() - self.u_si.norm_sqr()
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &Propagator) -> Propagator {
        Propagator {
            u_ss: self.u_ss * other.u_ss + self.u_si * other.u_is,
            u_si: self.u_ss * other.u_si + self.u_si * other.u_ii,
            u_is: self.u_is * other.u_ss + self.u_ii * other.u_is,
            u_ii: self.u_is * other.u_si + self.u_ii * other.u_ii,
        }
    }
}

/// Builds the twin-beam propagator over a region of the given length for real
/// mismatch parameters (the lossless case).
pub fn propagator(pm: &PhaseMatching, gamma: Complex64, length: f64) -> Propagator {
    propagator_elements(
        Complex64::new(pm.delta_k, 0.0),
        Complex64::new(pm.sigma_k, 0.0),
        gamma,
        length,
    )
}

/// Propagator elements for general complex mismatch parameters. The
/// distributed-loss model reuses this with `delta_k` and `sigma_k` shifted
/// into the complex plane by the decay rates.
pub fn propagator_elements(
    delta_k: Complex64,
    sigma_k: Complex64,
    gamma: Complex64,
    length: f64,
) -> Propagator {
    let nu = (sigma_k * sigma_k - 4.0 * gamma.norm_sqr()).sqrt();
    let x = nu * length / 2.0;
    // c = cos(nu L / 2), s = sin(nu L / 2) / nu; both even in nu.
    let (c, s) = if x.norm() < SERIES_THRESHOLD / 2.0 {
        let x2 = x * x;
        let c = 1.0 + x2 * (-0.5 + x2 / 24.0);
        let sinc = 1.0 + x2 * (-1.0 / 6.0 + x2 / 120.0);
        (c, sinc * length / 2.0)
    } else {
        (x.cos(), x.sin() / nu)
    };
    let phase = (Complex64::i() * delta_k * length / 2.0).exp();
    let i_sig_s = Complex64::i() * sigma_k * s;
    let u_si = 2.0 * Complex64::i() * gamma * phase * s;
    let u_is = -2.0 * Complex64::i() * gamma.conj() * phase * s;
    Propagator {
        u_ss: phase * (c + i_sig_s),
        u_ii: phase * (c - i_sig_s),
        u_si,
        u_is,
    }
}

/// The second-order moment triple (N_S, N_I, M) of a zero-mean two-mode
/// Gaussian state at one frequency point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n_s: f64,
    pub n_i: f64,
    pub m: Complex64,
}

impl Moments {
    pub fn vacuum() -> Self {
        Self {
            n_s: 0.0,
            n_i: 0.0,
            m: Complex64::ZERO,
        }
    }
}

/// Moments after the nonlinear region with vacuum inputs:
/// `N_S = N_I = |U_SI|^2` and `M = U_SS (U_IS)^*`.
pub fn vacuum_moments(p: &Propagator) -> Moments {
    let n = p.u_si.norm_sqr();
    Moments {
        n_s: n,
        n_i: n,
        m: p.u_ss * p.u_is.conj(),
    }
}

/// Moments after the nonlinear region for general (seeded) inputs.
///
/// When the propagator carries no gain (N^V below threshold) the update is the
/// analytic limit of the general formula: occupations pass through unchanged
/// and M picks up the dispersive phase `U_SS U_II^*`.
pub fn seeded_moments(p: &Propagator, input: &Moments, gamma: Complex64) -> Moments {
    let vac = vacuum_moments(p);
    if vac.n_s < ZERO_GAIN {
        return Moments {
            n_s: input.n_s,
            n_i: input.n_i,
            m: p.u_ss * p.u_ii.conj() * input.m,
        };
    }
    let (n_v, m_v) = (vac.n_s, vac.m);
    // gamma_ratio = gamma^* / gamma; unit modulus.
    let gamma_ratio = if gamma == Complex64::ZERO {
        Complex64::ONE
    } else {
        gamma.conj() / gamma
    };
    let cross = 2.0 * (gamma_ratio * m_v * input.m).re;
    Moments {
        n_s: input.n_s * (1.0 + n_v) + n_v * (1.0 + input.n_i) - cross,
        n_i: input.n_i * (1.0 + n_v) + n_v * (1.0 + input.n_s) - cross,
        m: m_v * (1.0 + input.n_s) + m_v * input.n_i
            - gamma_ratio.conj() * n_v * input.m.conj()
            - gamma_ratio * (m_v * m_v / n_v) * input.m,
    }
}

/// Beamsplitter loss plus additional dispersion for the signal and idler
/// branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel {
    pub eta_s: f64,
    pub eta_i: f64,
    pub phi_s: f64,
    pub phi_i: f64,
}

impl LossChannel {
    pub fn new(eta_s: f64, eta_i: f64, phi_s: f64, phi_i: f64) -> Result<Self> {
        for (name, eta) in [("eta_s", eta_s), ("eta_i", eta_i)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidChannel(format!(
                    "{name} must lie in [0, 1], got {eta}"
                )));
            }
        }
        Ok(Self {
            eta_s,
            eta_i,
            phi_s,
            phi_i,
        })
    }

    /// Lossless, phase-free channel.
    pub fn transparent() -> Self {
        Self {
            eta_s: 1.0,
            eta_i: 1.0,
            phi_s: 0.0,
            phi_i: 0.0,
        }
    }

    /// Idler-only loss with no added dispersion, the default scenario of every
    /// comparison figure.
    pub fn idler_only(eta_i: f64) -> Result<Self> {
        Self::new(1.0, eta_i, 0.0, 0.0)
    }
}

/// Beamsplitter update of the moments:
/// `N_S -> eta_S N_S`, `N_I -> eta_I N_I`,
/// `M -> sqrt(eta_S eta_I) e^{i(Phi_S + Phi_I)} M`.
pub fn apply_loss(input: &Moments, ch: &LossChannel) -> Moments {
    let phase = Complex64::from_polar(1.0, ch.phi_s + ch.phi_i);
    Moments {
        n_s: ch.eta_s * input.n_s,
        n_i: ch.eta_i * input.n_i,
        m: (ch.eta_s * ch.eta_i).sqrt() * phase * input.m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{evaluate_mismatch, DispersionProfile};
    use approx::assert_relative_eq;

    fn matched(gamma_abs: f64) -> PhaseMatching {
        evaluate_mismatch(&DispersionProfile::phase_matched(), 0.0, gamma_abs)
    }

    #[test]
    fn zero_coupling_zero_mismatch_gives_identity() {
        let pm = matched(0.0);
        let p = propagator(&pm, Complex64::ZERO, 4.0e7);
        assert_eq!(p.u_ss, Complex64::ONE);
        assert_eq!(p.u_ii, Complex64::ONE);
        assert_eq!(p.u_si, Complex64::ZERO);
        assert_eq!(p.u_is, Complex64::ZERO);
    }

    #[test]
    fn phase_matched_propagator_is_hyperbolic() {
        let gamma = 3.7e-8;
        let length = 4.0e7;
        let pm = matched(gamma);
        let p = propagator(&pm, Complex64::new(gamma, 0.0), length);
        let gl = gamma * length;
        assert_relative_eq!(p.u_si.norm_sqr(), gl.sinh().powi(2), max_relative = 1e-12);
        assert_relative_eq!(p.u_ss.norm_sqr(), gl.cosh().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn series_branch_is_continuous() {
        // Near the gain degeneracy sigma^2 -> 4 gamma^2, pick sigma so that
        // |nu L| sits just below and just above the series switch; the
        // elements must agree across the branch change.
        let length = 4.0e7;
        let gamma = 3.0e-12;
        let sigma_at = |nu: f64| (4.0 * gamma * gamma + nu * nu).sqrt();
        let nu0 = SERIES_THRESHOLD / length;
        let below = propagator_elements(
            Complex64::ZERO,
            Complex64::new(sigma_at(nu0 * (1.0 - 1e-12)), 0.0),
            Complex64::new(gamma, 0.0),
            length,
        );
        let above = propagator_elements(
            Complex64::ZERO,
            Complex64::new(sigma_at(nu0 * (1.0 + 1e-12)), 0.0),
            Complex64::new(gamma, 0.0),
            length,
        );
        assert_relative_eq!(below.u_ss.re, above.u_ss.re, max_relative = 1e-10);
        assert_relative_eq!(below.u_ss.im, above.u_ss.im, max_relative = 1e-10);
        assert_relative_eq!(below.u_si.im, above.u_si.im, max_relative = 1e-10);
        assert_relative_eq!(below.u_ii.im, above.u_ii.im, max_relative = 1e-10);
    }

    #[test]
    fn vacuum_moments_of_identity_vanish() {
        let m = vacuum_moments(&Propagator::identity());
        assert_eq!(m.n_s, 0.0);
        assert_eq!(m.n_i, 0.0);
        assert_eq!(m.m, Complex64::ZERO);
    }

    #[test]
    fn tmsv_saturates_m_bound() {
        // gamma L = asinh(1): N = 1 and |M|^2 = N (N + 1) = 2.
        let length = 4.0e7;
        let gamma = 1.0f64.asinh() / length;
        let pm = matched(gamma);
        let p = propagator(&pm, Complex64::new(gamma, 0.0), length);
        let m = vacuum_moments(&p);
        assert_relative_eq!(m.n_s, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.m.norm_sqr(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn seeded_vacuum_input_reduces_to_vacuum_moments() {
        let pm = evaluate_mismatch(
            &DispersionProfile::new(vec![0.0, 1e-21], vec![0.0, -3e-22]).unwrap(),
            4.0e11,
            2.5e-8,
        );
        let gamma = Complex64::new(2.5e-8, 0.0);
        let p = propagator(&pm, gamma, 4.0e7);
        let out = seeded_moments(&p, &Moments::vacuum(), gamma);
        let vac = vacuum_moments(&p);
        assert_relative_eq!(out.n_s, vac.n_s, max_relative = 1e-13);
        assert_relative_eq!(out.n_i, vac.n_i, max_relative = 1e-13);
        assert_relative_eq!(out.m.re, vac.m.re, max_relative = 1e-13);
        assert_relative_eq!(out.m.im, vac.m.im, max_relative = 1e-13);
    }

    #[test]
    fn seeded_identity_propagator_passes_through() {
        let input = Moments {
            n_s: 0.7,
            n_i: 0.3,
            m: Complex64::new(0.2, -0.4),
        };
        let out = seeded_moments(&Propagator::identity(), &input, Complex64::ZERO);
        assert_eq!(out, input);
    }

    #[test]
    fn loss_identity_and_full_idler_loss() {
        let input = Moments {
            n_s: 1.0,
            n_i: 1.0,
            m: Complex64::ONE,
        };
        let id = apply_loss(&input, &LossChannel::transparent());
        assert_eq!(id, input);

        let dark = apply_loss(&input, &LossChannel::idler_only(0.0).unwrap());
        assert_eq!(dark.n_s, 1.0);
        assert_eq!(dark.n_i, 0.0);
        assert_eq!(dark.m, Complex64::ZERO);
    }

    #[test]
    fn loss_update_matches_direct_arithmetic() {
        // eta_S = 1, eta_I = 0.25, Phi_S + Phi_I = pi/2 on (1, 1, 1):
        // (1, 0.25, 0.5 i).
        let ch = LossChannel::new(1.0, 0.25, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let out = apply_loss(
            &Moments {
                n_s: 1.0,
                n_i: 1.0,
                m: Complex64::ONE,
            },
            &ch,
        );
        assert_eq!(out.n_s, 1.0);
        assert_eq!(out.n_i, 0.25);
        assert_relative_eq!(out.m.re, 0.0, epsilon = 1e-16);
        assert_relative_eq!(out.m.im, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn loss_is_multiplicative() {
        let input = Moments {
            n_s: 0.9,
            n_i: 0.4,
            m: Complex64::new(0.3, 0.1),
        };
        let a = LossChannel::new(0.8, 0.6, 0.3, -0.1).unwrap();
        let b = LossChannel::new(0.5, 0.9, 0.7, 0.2).unwrap();
        let combined = LossChannel::new(0.8 * 0.5, 0.6 * 0.9, 0.3 + 0.7, -0.1 + 0.2).unwrap();
        let two_step = apply_loss(&apply_loss(&input, &a), &b);
        let one_step = apply_loss(&input, &combined);
        assert_relative_eq!(two_step.n_s, one_step.n_s, max_relative = 1e-14);
        assert_relative_eq!(two_step.n_i, one_step.n_i, max_relative = 1e-14);
        assert_relative_eq!(two_step.m.re, one_step.m.re, max_relative = 1e-13);
        assert_relative_eq!(two_step.m.im, one_step.m.im, max_relative = 1e-13);
    }

    #[test]
    fn channel_rejects_eta_outside_unit_interval() {
        assert!(LossChannel::new(1.2, 0.5, 0.0, 0.0).is_err());
        assert!(LossChannel::new(0.5, -0.1, 0.0, 0.0).is_err());
    }
}
