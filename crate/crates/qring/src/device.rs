//! Device constants and static quantities: capacitance Fourier components,
//! plasmon/photon dispersion, initial coherent amplitude, continuum decay rate.
//!
//! Unit convention: hbar = 1 and every energy or frequency is an angular
//! frequency in rad/ns (1 unit is about 0.159 GHz of ordinary frequency).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Device constants for a ring of transmons embedded in a waveguide.
///
/// The photon band is parameterized by `(omega_0, band_width)` with
/// `omega_{N/2} = sqrt(omega_0^2 + band_width^2)`; charging physics by
/// `(e_c0, e_dc, capacitance_profile)`. Microscopic capacitances and
/// inductances are never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Number of transmons N (ring sites). Must be even and >= 2.
    pub n_qubits: usize,
    /// Effective Josephson energy E_J.
    pub e_j: f64,
    /// Charging energy E_{C,0} of the k = 0 mode.
    pub e_c0: f64,
    /// Mutual-capacitance Fourier ratios C_k/C_0 for k = 0..N-1.
    /// `None` means a flat profile (all 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance_profile: Option<Vec<f64>>,
    /// Waveguide coupling energy E_{dC}.
    pub e_dc: f64,
    /// Photon band bottom omega_0.
    pub omega_0: f64,
    /// Band knob: omega_{N/2} = sqrt(omega_0^2 + band_width^2).
    pub band_width: f64,
    /// Drive energy eV (electron charge times gate voltage).
    pub drive_ev: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits % 2 != 0 {
            return Err(Error::invalid(
                "physical.n_qubits",
                format!("must be even and >= 2, got {}", self.n_qubits),
            ));
        }
        for (name, v) in [
            ("physical.e_j", self.e_j),
            ("physical.e_c0", self.e_c0),
            ("physical.e_dc", self.e_dc),
            ("physical.omega_0", self.omega_0),
            ("physical.band_width", self.band_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.drive_ev >= 0.0) || !self.drive_ev.is_finite() {
            return Err(Error::invalid(
                "physical.drive_ev",
                format!("must be >= 0, got {}", self.drive_ev),
            ));
        }
        if let Some(profile) = &self.capacitance_profile {
            if profile.len() != self.n_qubits {
                return Err(Error::invalid(
                    "physical.capacitance_profile",
                    format!(
                        "expected {} entries (k = 0..N-1), got {}",
                        self.n_qubits,
                        profile.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Plasmon frequency of the k = 0 mode, eps_0 = sqrt(4 E_J E_{C,0}).
    pub fn eps0(&self) -> f64 {
        (4.0 * self.e_j * self.e_c0).sqrt()
    }
}

/// Per-mode frequencies on the half Brillouin zone, k = 0..N/2.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    /// Plasmon frequencies eps_k = sqrt(4 E_J E_{C,k}).
    pub eps: Vec<f64>,
    /// Photon frequencies omega_k; omega[0] is the band bottom.
    pub omega: Vec<f64>,
    /// Detunings delta_k = omega_k - eps_0.
    pub delta: Vec<f64>,
}

impl ModeSpectrum {
    /// Number of dynamical mode pairs (k = 1..N/2).
    pub fn n_pairs(&self) -> usize {
        self.omega.len() - 1
    }

    pub fn band_top(&self) -> f64 {
        *self.omega.last().unwrap()
    }

    /// Index k (1..=N/2) of the photon mode closest to the plasmon resonance.
    pub fn resonant_mode(&self) -> usize {
        (1..self.omega.len())
            .min_by(|&a, &b| {
                self.delta[a]
                    .abs()
                    .partial_cmp(&self.delta[b].abs())
                    .unwrap()
            })
            .unwrap()
    }
}

/// Charging energies E_{C,k} = E_{C,0} / (C_k/C_0) for k = 0..N-1.
///
/// The profile must be strictly positive, start at 1, and satisfy the
/// reality symmetry E_{C,k} = E_{C,N-k}.
pub fn fourier_capacitance_energies(params: &PhysicalParams) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.n_qubits;
    let flat;
    let profile: &[f64] = match &params.capacitance_profile {
        Some(p) => p,
        None => {
            flat = vec![1.0; n];
            &flat
        }
    };
    if (profile[0] - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(
            "physical.capacitance_profile",
            format!("entry k = 0 must be 1 (it defines the C_0 scale), got {}", profile[0]),
        ));
    }
    for (k, &p) in profile.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(
                "physical.capacitance_profile",
                format!("entry k = {k} must be > 0, got {p}"),
            ));
        }
    }
    for k in 1..n {
        let a = profile[k];
        let b = profile[(n - k) % n];
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            return Err(Error::invalid(
                "physical.capacitance_profile",
                format!("profile must satisfy C_k = C_(N-k); k = {k}: {a} vs {b}"),
            ));
        }
    }
    Ok(profile.iter().map(|p| params.e_c0 / p).collect())
}

/// Plasmon and photon dispersion on the half zone.
///
/// eps_k = sqrt(4 E_J E_{C,k}),
/// omega_k = sqrt(omega_0^2 + band_width^2 (1 - cos(2 pi k / N)) / 2).
pub fn build_mode_spectrum(params: &PhysicalParams) -> Result<ModeSpectrum> {
    let ec = fourier_capacitance_energies(params)?;
    let n = params.n_qubits;
    let half = n / 2;
    let mut eps = Vec::with_capacity(half + 1);
    let mut omega = Vec::with_capacity(half + 1);
    for k in 0..=half {
        eps.push((4.0 * params.e_j * ec[k]).sqrt());
        let band = (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / 2.0;
        omega.push((params.omega_0.powi(2) + params.band_width.powi(2) * band).sqrt());
    }
    let eps0 = eps[0];
    let delta = omega.iter().map(|w| w - eps0).collect();
    Ok(ModeSpectrum { eps, omega, delta })
}

/// Initial coherent plasmon amplitude phi_0 = i sqrt(E_J/eps_0) (eV/E_{C,0}).
///
/// Purely imaginary with positive imaginary part for a positive drive.
pub fn initial_amplitude(params: &PhysicalParams) -> Complex64 {
    let eps0 = params.eps0();
    Complex64::new(
        0.0,
        (params.e_j / eps0).sqrt() * (params.drive_ev / params.e_c0),
    )
}

/// Continuum decay rate of the plasmon excitation,
///
/// Gamma = (E_dC eV / (16 E_C0))^2 E_J / sqrt((omega_{N/2}^2 - eps_0^2)(eps_0^2 - omega_0^2)).
///
/// Requires the resonance strictly inside the photon band.
pub fn decay_rate(params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    let eps0 = params.eps0();
    let w_bot = params.omega_0;
    let w_top = (params.omega_0.powi(2) + params.band_width.powi(2)).sqrt();
    if !(w_bot < eps0 && eps0 < w_top) {
        return Err(Error::OutOfBand {
            eps0,
            omega_bottom: w_bot,
            omega_top: w_top,
        });
    }
    let prefactor = (params.e_dc * params.drive_ev / (16.0 * params.e_c0)).powi(2);
    let denom = ((w_top.powi(2) - eps0.powi(2)) * (eps0.powi(2) - w_bot.powi(2))).sqrt();
    Ok(prefactor * params.e_j / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::desk_params;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn flat_profile_gives_constant_ec() {
        let p = desk_params(8);
        let ec = fourier_capacitance_energies(&p).unwrap();
        assert_eq!(ec, vec![10.0; 8]);
    }

    #[test]
    fn profile_entry_inversely_proportional() {
        let mut p = desk_params(8);
        let mut prof = vec![1.0; 8];
        prof[1] = 2.0;
        prof[7] = 2.0;
        p.capacitance_profile = Some(prof);
        let ec = fourier_capacitance_energies(&p).unwrap();
        assert_abs_diff_eq!(ec[1], 5.0);
        assert_abs_diff_eq!(ec[7], 5.0);
        assert_abs_diff_eq!(ec[2], 10.0);
    }

    #[test]
    fn zero_profile_entry_rejected() {
        let mut p = desk_params(8);
        let mut prof = vec![1.0; 8];
        prof[3] = 0.0;
        prof[5] = 0.0;
        p.capacitance_profile = Some(prof);
        assert!(matches!(
            fourier_capacitance_energies(&p),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn asymmetric_profile_rejected() {
        let mut p = desk_params(8);
        let mut prof = vec![1.0; 8];
        prof[1] = 2.0; // missing partner at k = 7
        p.capacitance_profile = Some(prof);
        assert!(fourier_capacitance_energies(&p).is_err());
    }

    #[test]
    fn flat_plasmon_spectrum() {
        let p = desk_params(16);
        let s = build_mode_spectrum(&p).unwrap();
        for &e in &s.eps {
            assert_abs_diff_eq!(e, 200.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn band_edges() {
        let p = desk_params(64);
        let s = build_mode_spectrum(&p).unwrap();
        assert_abs_diff_eq!(s.omega[0], 100.0);
        assert_relative_eq!(s.band_top(), 400.0, max_relative = 1e-12);
        // omega_{N/2} ~ 400 for band_width ~ 387.3
        let mut p2 = p.clone();
        p2.band_width = 387.3;
        let s2 = build_mode_spectrum(&p2).unwrap();
        assert_relative_eq!(s2.band_top(), 400.001, max_relative = 1e-5);
    }

    #[test]
    fn omega_monotone_and_delta_exact() {
        let p = desk_params(128);
        let s = build_mode_spectrum(&p).unwrap();
        for k in 1..s.omega.len() {
            assert!(s.omega[k] >= s.omega[k - 1]);
        }
        for k in 0..s.omega.len() {
            assert_eq!(s.delta[k], s.omega[k] - s.eps[0]);
        }
    }

    #[test]
    fn initial_amplitude_examples() {
        let mut p = desk_params(8);
        // sqrt(1000/200) * (2/10) = 0.44721...
        let phi0 = initial_amplitude(&p);
        assert_eq!(phi0.re, 0.0);
        assert_relative_eq!(phi0.im, (5.0f64).sqrt() * 0.2, max_relative = 1e-14);
        assert_relative_eq!(phi0.im, 0.4472, max_relative = 1e-4);

        p.drive_ev = 0.0;
        assert_eq!(initial_amplitude(&p), Complex64::new(0.0, 0.0));

        p.drive_ev = 4.0;
        assert_relative_eq!(initial_amplitude(&p).im, 2.0 * phi0.im, max_relative = 1e-14);
    }

    #[test]
    fn decay_rate_example() {
        let p = desk_params(512);
        let g = decay_rate(&p).unwrap();
        // (0.125)^2 * 1000 / 60000
        assert_relative_eq!(g, 2.604166666666667e-4, max_relative = 1e-10);
    }

    #[test]
    fn decay_rate_zero_drive() {
        let mut p = desk_params(512);
        p.drive_ev = 0.0;
        assert_eq!(decay_rate(&p).unwrap(), 0.0);
    }

    #[test]
    fn decay_rate_out_of_band() {
        // eps0 = 200 at the band bottom: omega_0 = 200
        let mut p = desk_params(64);
        p.omega_0 = 200.0;
        match decay_rate(&p) {
            Err(Error::OutOfBand { eps0, omega_bottom, .. }) => {
                assert_eq!(eps0, 200.0);
                assert_eq!(omega_bottom, 200.0);
            }
            other => panic!("expected out-of-band error, got {other:?}"),
        }
    }

    #[test]
    fn decay_rate_scale_invariance() {
        // rescaling all energies by lambda rescales Gamma by lambda
        let p = desk_params(256);
        let g = decay_rate(&p).unwrap();
        let lambda = 3.0;
        let p2 = PhysicalParams {
            e_j: p.e_j * lambda,
            e_c0: p.e_c0 * lambda,
            e_dc: p.e_dc * lambda,
            omega_0: p.omega_0 * lambda,
            band_width: p.band_width * lambda,
            drive_ev: p.drive_ev * lambda,
            ..p.clone()
        };
        let g2 = decay_rate(&p2).unwrap();
        assert_relative_eq!(g2, lambda * g, max_relative = 1e-12);
    }

    #[test]
    fn eps_symmetric_under_k_reflection() {
        let mut p = desk_params(16);
        let mut prof = vec![1.0; 16];
        for k in 1..16 {
            prof[k] = 1.0 + 0.1 * ((k.min(16 - k)) as f64);
        }
        p.capacitance_profile = Some(prof);
        let ec = fourier_capacitance_energies(&p).unwrap();
        for k in 1..16 {
            assert_abs_diff_eq!(ec[k], ec[16 - k], epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_or_small_n_rejected() {
        let mut p = desk_params(8);
        p.n_qubits = 7;
        assert!(p.validate().is_err());
        p.n_qubits = 0;
        assert!(p.validate().is_err());
    }
}
