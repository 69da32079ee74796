//! Closed-form solutions used as independent oracles for the numerics:
//! continuum decay law, finite-detuning squeezing integral, two-mode
//! closed-form squeezing, maximum squeezing, dimensionless rescalings, and
//! the Rabi-like oscillation envelope.

use num_complex::Complex64;
use serde::Serialize;

use crate::device::{decay_rate, initial_amplitude, ModeSpectrum, PhysicalParams};
use crate::error::{Error, Result};
use crate::quad;

/// Conversion factors between laboratory time/detuning and the dimensionless
/// variables of the two-mode regime: t_tilde = t * E_dC eps0 / (32 omega_k),
/// delta_tilde = delta * 32 omega_k / (E_dC eps0).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimensionlessFrame {
    pub t_tilde_per_t: f64,
    pub delta_tilde_per_delta: f64,
}

impl DimensionlessFrame {
    pub fn new(params: &PhysicalParams, spectrum: &ModeSpectrum, k: usize) -> Result<Self> {
        if k < 1 || k > spectrum.n_pairs() {
            return Err(Error::ModeIndexOutOfRange {
                k,
                max: spectrum.n_pairs(),
            });
        }
        let t_tilde_per_t = params.e_dc * spectrum.eps[0] / (32.0 * spectrum.omega[k]);
        Ok(DimensionlessFrame {
            t_tilde_per_t,
            delta_tilde_per_delta: 1.0 / t_tilde_per_t,
        })
    }
}

/// Continuum-decay amplitude, phi(t) = i e^{-i eps0 t} phi0 / sqrt(1 + Gamma t).
///
/// The leading factor i fixes the overall phase convention of the closed form;
/// only |phi|^2 and the rotation frequency are compared against numerics.
pub fn continuum_amplitude(t: f64, phi0: Complex64, eps0: f64, gamma: f64) -> Complex64 {
    debug_assert!(t >= 0.0 && gamma >= 0.0);
    Complex64::i() * Complex64::new(0.0, -eps0 * t).exp() * phi0 / (1.0 + gamma * t).sqrt()
}

/// Squeezing integral (Eq.-13 form) at explicit detuning and mode frequency:
/// r = (E_dC/16)(eps0/omega_k) |phi0|^2 int_0^t cos(2 delta t')/(1 + Gamma t') dt',
/// evaluated by adaptive quadrature with oscillatory pre-splitting.
pub fn continuum_squeezing_at(
    delta: f64,
    omega_k: f64,
    t: f64,
    params: &PhysicalParams,
    gamma: f64,
) -> Result<f64> {
    let phi0_sq = initial_amplitude(params).norm_sqr();
    let pref = params.e_dc * phi0_sq * params.eps0() / (16.0 * omega_k);
    let integral = detuned_decay_integral(delta, t, gamma)?;
    Ok(pref * integral)
}

/// Squeezing of spectrum mode `k` at time `t` under the continuum decay law.
pub fn continuum_squeezing(
    k: usize,
    t: f64,
    params: &PhysicalParams,
    spectrum: &ModeSpectrum,
    gamma: f64,
) -> Result<f64> {
    if k < 1 || k > spectrum.n_pairs() {
        return Err(Error::ModeIndexOutOfRange {
            k,
            max: spectrum.n_pairs(),
        });
    }
    continuum_squeezing_at(spectrum.delta[k], spectrum.omega[k], t, params, gamma)
}

/// Closed form of the resonant (delta = 0, omega_k = eps0) squeezing integral:
/// r = (E_dC |phi0|^2 / (16 Gamma)) ln(1 + Gamma t).
pub fn continuum_squeezing_resonant(t: f64, params: &PhysicalParams, gamma: f64) -> f64 {
    let phi0_sq = initial_amplitude(params).norm_sqr();
    params.e_dc * phi0_sq / (16.0 * gamma) * (gamma * t).ln_1p()
}

/// int_0^t cos(2 delta t') / (1 + Gamma t') dt' to absolute tolerance 1e-10.
fn detuned_decay_integral(delta: f64, t: f64, gamma: f64) -> Result<f64> {
    let max_chunk = if delta == 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::FRAC_PI_2 / delta.abs()
    };
    quad::integrate_oscillatory(
        &|tp| (2.0 * delta * tp).cos() / (1.0 + gamma * tp),
        0.0,
        t,
        max_chunk,
        1e-10,
    )
}

/// Normalized squeezing surface value r*(delta, t) = Gamma int_0^t
/// cos(2 delta t')/(1 + Gamma t') dt'; r*(0, t) = ln(1 + Gamma t).
pub fn r_star(delta: f64, t: f64, gamma: f64) -> Result<f64> {
    Ok(gamma * detuned_decay_integral(delta, t, gamma)?)
}

/// Full surface r*(t_i, delta_j) for plotting; row i corresponds to
/// t_grid[i], column j to delta_grid[j]. Gamma is derived from `params`.
pub fn fig3_surface(
    t_grid: &[f64],
    delta_grid: &[f64],
    params: &PhysicalParams,
) -> Result<Vec<Vec<f64>>> {
    let gamma = decay_rate(params)?;
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid("t_grid", format!("non-finite or negative t = {t}")));
            }
            delta_grid.iter().map(|&d| r_star(d, t, gamma)).collect()
        })
        .collect()
}

/// Photon number per direction under the continuum law (Eq.-14 form):
/// N_ph = N (|phi0|^2 - |phi(t)|^2) / 2 = (N |phi0|^2 / 2) Gamma t / (1 + Gamma t).
pub fn photon_number_continuum(t: f64, n: usize, phi0: Complex64, gamma: f64) -> f64 {
    let phi0_sq = phi0.norm_sqr();
    (n as f64) * phi0_sq / 2.0 * gamma * t / (1.0 + gamma * t)
}

/// Maximum reachable squeezing, r_m = ln(2 N |phi0|^2) / 2; defined only for
/// N |phi0|^2 > 1/2.
pub fn max_squeezing(n: usize, phi0: Complex64) -> Result<f64> {
    let n_phi0_sq = n as f64 * phi0.norm_sqr();
    if n_phi0_sq <= 0.5 {
        return Err(Error::FaintDrive { n_phi0_sq });
    }
    Ok((2.0 * n_phi0_sq).ln() / 2.0)
}

/// Two-mode closed-form squeezing (Eq.-17 form) plus the validity cap
/// r <= r_m - sqrt(N/2) e^{-r_m} under which the constant-phase assumption
/// holds. The cap is metadata, not an error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoModeSqueezing {
    pub r: f64,
    pub validity_cap: f64,
    pub within_validity: bool,
}

pub fn two_mode_closed_form(t_tilde: f64, r_m: f64, n: usize) -> TwoModeSqueezing {
    debug_assert!(t_tilde >= 0.0 && r_m > 0.0);
    let s = 4.0 * (2.0 * r_m).sinh() * t_tilde / n as f64;
    let e2rm = (2.0 * r_m).exp();
    let es = (-s).exp();
    let r = 0.5 * ((e2rm + es) / (1.0 + e2rm * es)).ln();
    let validity_cap = r_m - (n as f64 / 2.0).sqrt() * (-r_m).exp();
    TwoModeSqueezing {
        r,
        validity_cap,
        within_validity: r <= validity_cap,
    }
}

/// Rabi frequency Omega = sqrt(|(delta_tilde - 4|phi0|^2)^2 - 4|phi0|^4|)
/// and whether the detuning sits in the exponential-growth window
/// 2|phi0|^2 < delta_tilde < 6|phi0|^2.
pub fn rabi_frequency(delta_tilde: f64, phi0_sq: f64) -> (f64, bool) {
    let d = (delta_tilde - 4.0 * phi0_sq).powi(2) - 4.0 * phi0_sq * phi0_sq;
    (d.abs().sqrt(), d < 0.0)
}

/// Weak-depletion photon number in the two-mode regime:
/// 8|phi0|^2 sinh^2(Omega t_tilde)/Omega^2 in the growth window,
/// 8|phi0|^2 sin^2(Omega t_tilde)/Omega^2 outside, with the common
/// series limit 8|phi0|^2 t_tilde^2 as Omega t_tilde -> 0.
pub fn rabi_photon_number(t_tilde: f64, delta_tilde: f64, phi0: Complex64) -> f64 {
    let phi0_sq = phi0.norm_sqr();
    let (omega, growth) = rabi_frequency(delta_tilde, phi0_sq);
    let u = omega * t_tilde;
    if u < 1e-4 {
        // sinh^2(u)/Omega^2 = t^2 (1 + u^2/3 + ...); both branches share the
        // leading term
        return 8.0 * phi0_sq * t_tilde * t_tilde;
    }
    let env = if growth { u.sinh() } else { u.sin() };
    8.0 * phi0_sq * (env / omega).powi(2)
}

/// Order-of-magnitude quantities quoted by the short-time estimates; these
/// carry no hard tolerances beyond factor-of-10 smoke checks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimateReport {
    pub eps0: f64,
    pub phi0_sq: f64,
    /// exact continuum decay rate (Eq.-12 form)
    pub gamma: f64,
    /// the quoted scale Gamma ~ C0 V^2 / hbar = (eV)^2 / (2 E_C0)
    pub gamma_scale: f64,
    /// model squeezing-rate scale, the drive strength averaged over a
    /// plasmon period at resonance: E_dC |phi0|^2 / 8
    pub squeezing_rate: f64,
    /// the quoted formula E_J (eV / E_dC)^2
    pub squeezing_rate_quoted: f64,
    /// relative charge leakage coefficient sqrt(E_J/E_C0) (eV)^2,
    /// multiplying t^2 in ns^2
    pub leakage_per_ns2: f64,
}

pub fn estimate_report(params: &PhysicalParams) -> Result<EstimateReport> {
    params.validate()?;
    let phi0_sq = initial_amplitude(params).norm_sqr();
    Ok(EstimateReport {
        eps0: params.eps0(),
        phi0_sq,
        gamma: decay_rate(params)?,
        gamma_scale: params.drive_ev * params.drive_ev / (2.0 * params.e_c0),
        squeezing_rate: params.e_dc * phi0_sq / 8.0,
        squeezing_rate_quoted: params.e_j * (params.drive_ev / params.e_dc).powi(2),
        leakage_per_ns2: (params.e_j / params.e_c0).sqrt() * params.drive_ev * params.drive_ev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::build_mode_spectrum;
    use crate::testutil::desk_params;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn dimensionless_frame_reciprocal() {
        let p = desk_params(64);
        let s = build_mode_spectrum(&p).unwrap();
        for k in [1, 17, 32] {
            let f = DimensionlessFrame::new(&p, &s, k).unwrap();
            assert_relative_eq!(
                f.t_tilde_per_t * f.delta_tilde_per_delta,
                1.0,
                max_relative = 1e-15
            );
            assert_relative_eq!(
                f.t_tilde_per_t,
                p.e_dc * s.eps[0] / (32.0 * s.omega[k]),
                max_relative = 1e-15
            );
        }
        assert!(DimensionlessFrame::new(&p, &s, 0).is_err());
        assert!(DimensionlessFrame::new(&p, &s, 33).is_err());
    }

    #[test]
    fn continuum_amplitude_examples() {
        let phi0 = Complex64::new(0.0, 0.4472);
        let eps0 = 200.0;
        let gamma = 2.6042e-4;
        // t = 0: no decay yet
        assert_relative_eq!(
            continuum_amplitude(0.0, phi0, eps0, gamma).norm(),
            phi0.norm(),
            max_relative = 1e-15
        );
        // Gamma t = 1: half the intensity
        let t = 1.0 / gamma;
        assert_relative_eq!(
            continuum_amplitude(t, phi0, eps0, gamma).norm_sqr(),
            phi0.norm_sqr() / 2.0,
            max_relative = 1e-12
        );
        // Gamma = 0: pure rotation at eps0
        let t = 0.123;
        let v = continuum_amplitude(t, phi0, eps0, 0.0);
        let expected = Complex64::i() * phi0 * Complex64::new(0.0, -eps0 * t).exp();
        assert_relative_eq!(v.re, expected.re, max_relative = 1e-14, epsilon = 1e-15);
        assert_relative_eq!(v.im, expected.im, max_relative = 1e-14, epsilon = 1e-15);
    }

    #[test]
    fn resonant_squeezing_matches_log_closed_form() {
        let p = desk_params(512);
        let gamma = decay_rate(&p).unwrap();
        // quadrature vs closed form over Gamma t in [0, 10]
        for gt in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let t = gt / gamma;
            let num = continuum_squeezing_at(0.0, p.eps0(), t, &p, gamma).unwrap();
            let closed = continuum_squeezing_resonant(t, &p, gamma);
            assert_abs_diff_eq!(num, closed, epsilon = 1e-9);
        }
    }

    #[test]
    fn squeezing_zero_at_t_zero_and_suppressed_off_resonance() {
        let p = desk_params(512);
        let gamma = decay_rate(&p).unwrap();
        assert_eq!(
            continuum_squeezing_at(0.0, p.eps0(), 0.0, &p, gamma).unwrap(),
            0.0
        );
        // detuning 10 Gamma suppresses squeezing at Gamma t = 3 at least 5x
        let t = 3.0 / gamma;
        let on = continuum_squeezing_at(0.0, p.eps0(), t, &p, gamma).unwrap();
        let off = continuum_squeezing_at(10.0 * gamma, p.eps0(), t, &p, gamma).unwrap();
        assert!(off.abs() * 5.0 < on, "on = {on}, off = {off}");
    }

    #[test]
    fn continuum_squeezing_mode_indexing() {
        let p = desk_params(64);
        let s = build_mode_spectrum(&p).unwrap();
        let gamma = decay_rate(&p).unwrap();
        assert!(continuum_squeezing(0, 1.0, &p, &s, gamma).is_err());
        assert!(continuum_squeezing(33, 1.0, &p, &s, gamma).is_err());
        let k = s.resonant_mode();
        let direct = continuum_squeezing_at(s.delta[k], s.omega[k], 1.0, &p, gamma).unwrap();
        assert_eq!(continuum_squeezing(k, 1.0, &p, &s, gamma).unwrap(), direct);
    }

    #[test]
    fn r_star_examples() {
        let gamma = 2.6042e-4;
        // delta = 0, Gamma t = e - 1 -> r* = 1
        let t = (std::f64::consts::E - 1.0) / gamma;
        assert_abs_diff_eq!(r_star(0.0, t, gamma).unwrap(), 1.0, epsilon = 1e-9);
        // t = 0 -> 0 for any delta
        assert_eq!(r_star(0.7, 0.0, gamma).unwrap(), 0.0);
    }

    #[test]
    fn fig3_surface_even_in_delta_and_max_at_zero() {
        let p = desk_params(512);
        let gamma = decay_rate(&p).unwrap();
        let t_grid: Vec<f64> = (1..=4).map(|i| i as f64 * 0.75 / gamma).collect();
        let delta_grid: Vec<f64> =
            (-5..=5).map(|i| i as f64 * 2.0 * gamma).collect();
        let surface = fig3_surface(&t_grid, &delta_grid, &p).unwrap();
        let zero_col = delta_grid.iter().position(|&d| d == 0.0).unwrap();
        for (row, &t) in surface.iter().zip(&t_grid) {
            // even in delta
            for j in 0..delta_grid.len() {
                let j_mirror = delta_grid.len() - 1 - j;
                assert_abs_diff_eq!(row[j], row[j_mirror], epsilon = 1e-9);
            }
            // maximal along delta = 0; equals ln(1 + Gamma t) there
            assert_abs_diff_eq!(row[zero_col], (gamma * t).ln_1p(), epsilon = 1e-9);
            for (j, v) in row.iter().enumerate() {
                if j != zero_col {
                    assert!(*v < row[zero_col], "t-slice max off delta = 0 at t = {t}");
                }
            }
        }
    }

    #[test]
    fn photon_number_continuum_examples() {
        let phi0 = Complex64::new(0.0, 0.2f64.sqrt());
        let gamma = 0.01;
        assert_eq!(photon_number_continuum(0.0, 100, phi0, gamma), 0.0);
        // Gamma t = 1, N = 100, |phi0|^2 = 0.2 -> 5
        assert_relative_eq!(
            photon_number_continuum(100.0, 100, phi0, gamma),
            5.0,
            max_relative = 1e-12
        );
        // asymptote N |phi0|^2 / 2
        assert_relative_eq!(
            photon_number_continuum(1e12, 100, phi0, gamma),
            10.0,
            max_relative = 1e-9
        );
        // monotone increasing
        let mut prev = -1.0;
        for i in 0..50 {
            let v = photon_number_continuum(i as f64 * 10.0, 100, phi0, gamma);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn max_squeezing_examples() {
        let phi0 = Complex64::new(0.0, 0.2f64.sqrt());
        let r_m = max_squeezing(100, phi0).unwrap();
        assert_relative_eq!(r_m, 40.0f64.ln() / 2.0, max_relative = 1e-14);
        assert_abs_diff_eq!(r_m, 1.8444, epsilon = 5e-5);
        // consistency with the full-conversion asymptote: sinh^2(r_m) ~ N|phi0|^2/2.
        // Exactly: sinh^2(ln(2x)/2) = x - 1/2 + 1/(16x) ... = 9.50625 for
        // x = N|phi0|^2 = 20, a 4.94% defect from 10
        assert_relative_eq!(r_m.sinh().powi(2), 9.50625, max_relative = 1e-12);
        assert_relative_eq!(r_m.sinh().powi(2), 10.0, max_relative = 0.05);
        // boundary and faint drive
        let phi_b = Complex64::new((0.5f64 / 100.0).sqrt(), 0.0);
        assert!(matches!(
            max_squeezing(100, phi_b),
            Err(Error::FaintDrive { .. })
        ));
        let just_above = Complex64::new((0.5000001f64 / 100.0).sqrt(), 0.0);
        assert!(max_squeezing(100, just_above).unwrap() > 0.0);
    }

    #[test]
    fn two_mode_closed_form_examples() {
        let r_m = 40.0f64.ln() / 2.0;
        assert_eq!(two_mode_closed_form(0.0, r_m, 100).r, 0.0);
        // s = 4 sinh(2 r_m) t_tilde / N = 1
        let t_tilde = 100.0 / (4.0 * (2.0 * r_m).sinh());
        let v = two_mode_closed_form(t_tilde, r_m, 100);
        let e = (2.0 * r_m).exp();
        let expected = 0.5 * ((e + (-1.0f64).exp()) / (1.0 + e * (-1.0f64).exp())).ln();
        assert_relative_eq!(v.r, expected, max_relative = 1e-14);
        // frozen: (1/2) ln[(40 + e^{-1})/(1 + 40 e^{-1})]
        assert_abs_diff_eq!(v.r, 0.4717037154637201, epsilon = 1e-13);
        // t_tilde -> infinity approaches r_m
        let late = two_mode_closed_form(1e6, r_m, 100);
        assert_relative_eq!(late.r, r_m, max_relative = 1e-9);
        assert!(!late.within_validity);
        // validity cap value
        assert_relative_eq!(
            v.validity_cap,
            r_m - 50.0f64.sqrt() * (-r_m).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn two_mode_monotone_bounded() {
        let r_m = 1.8444;
        let n = 100;
        let mut prev = -1.0;
        for i in 0..1000 {
            let t_tilde = i as f64 * 0.05;
            let v = two_mode_closed_form(t_tilde, r_m, n).r;
            assert!(v >= prev, "non-monotone at i = {i}");
            assert!(v <= r_m + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn rabi_examples() {
        let phi0 = Complex64::new(0.0, 0.2f64.sqrt());
        let phi0_sq = phi0.norm_sqr();
        // phase matched: Omega = 2 |phi0|^2, growth branch
        let (omega, growth) = rabi_frequency(4.0 * phi0_sq, phi0_sq);
        assert_relative_eq!(omega, 2.0 * phi0_sq, max_relative = 1e-12);
        assert!(growth);
        // delta_tilde = 10 |phi0|^2 = 2.0: Omega = sqrt(1.28), oscillation
        let (omega, growth) = rabi_frequency(2.0, phi0_sq);
        assert_relative_eq!(omega, 1.28f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(omega, 1.1314, max_relative = 1e-4);
        assert!(!growth);
        // t_tilde = 0
        assert_eq!(rabi_photon_number(0.0, 2.0, phi0), 0.0);
    }

    #[test]
    fn rabi_branch_continuity_at_window_edges() {
        let phi0 = Complex64::new(0.45, 0.0);
        let phi0_sq = phi0.norm_sqr();
        let t_tilde = 0.05;
        let quadratic = 8.0 * phi0_sq * t_tilde * t_tilde;
        for edge in [2.0 * phi0_sq, 6.0 * phi0_sq] {
            for side in [-1.0, 1.0] {
                let v = rabi_photon_number(t_tilde, edge + side * 1e-7, phi0);
                assert_relative_eq!(v, quadratic, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn eq14_identity_amplitude_vs_photon_number() {
        // N(|phi0|^2 - |phi(t)|^2)/2 equals the closed Gamma t/(1+Gamma t) form
        let phi0 = Complex64::new(0.3, -0.2);
        let gamma = 0.37;
        let n = 64;
        for t in [0.0, 0.5, 3.0, 42.0] {
            let phi = continuum_amplitude(t, phi0, 123.0, gamma);
            let lhs = n as f64 * (phi0.norm_sqr() - phi.norm_sqr()) / 2.0;
            let rhs = photon_number_continuum(t, n, phi0, gamma);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14);
        }
    }

    #[test]
    fn estimate_report_desk_scale() {
        let p = desk_params(512);
        let rep = estimate_report(&p).unwrap();
        assert_relative_eq!(rep.eps0, 200.0, max_relative = 1e-12);
        assert_relative_eq!(rep.phi0_sq, 0.2, max_relative = 1e-12);
        assert_relative_eq!(rep.gamma_scale, 4.0 / 20.0, max_relative = 1e-12);
        assert_relative_eq!(rep.squeezing_rate, 10.0 * 0.2 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(
            rep.squeezing_rate_quoted,
            1000.0 * 0.04,
            max_relative = 1e-12
        );
        assert!(rep.gamma > 0.0);
    }
}
