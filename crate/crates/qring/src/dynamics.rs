//! Coupled evolution of the plasmon amplitude and the per-mode-pair
//! squeezing degrees of freedom.
//!
//! The squeezing pair (r_k, theta_k) is stored in the Cartesian form
//! x_k = sinh(2 r_k) cos(2 theta_k), y_k = sinh(2 r_k) sin(2 theta_k),
//! which turns the equations of motion into the manifestly regular system
//!
//!   phidot = -i eps0 phi - i (E_dC eps0 / (8N)) (phi + phi*) sum_k (z_k - 1 + x_k)/omega_k
//!   xdot_k = -2 (omega_k + A_k) y_k
//!   ydot_k = +2 (omega_k + A_k) x_k + 2 A_k z_k
//!
//! with z_k = sqrt(1 + x_k^2 + y_k^2) = cosh(2 r_k) and
//! A_k = (E_dC eps0 / 16) (phi + phi*)^2 / omega_k. The coth(2r) singularity
//! of the polar form cancels identically under this map (unit-tested below).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{initial_amplitude, ModeSpectrum, PhysicalParams};
use crate::error::{Error, Result};

/// Instantaneous state: time, plasmon amplitude, squeezing pairs (x_k, y_k)
/// for the system's active mode pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub phi: Complex64,
    /// (x_k, y_k) per active mode pair, in system mode order.
    pub xy: Vec<(f64, f64)>,
}

impl SystemState {
    pub fn is_finite(&self) -> bool {
        self.phi.re.is_finite()
            && self.phi.im.is_finite()
            && self.xy.iter().all(|(x, y)| x.is_finite() && y.is_finite())
    }

    /// Squeezing amplitude of mode slot `i`, computed stably from (x, y).
    pub fn r_of(&self, i: usize) -> f64 {
        let (x, y) = self.xy[i];
        squeezing_of(x, y).0
    }

    /// sinh^2(r_k) = (z_k - 1)/2, cancellation-free at small r.
    pub fn sinh2_r(&self, i: usize) -> f64 {
        let (x, y) = self.xy[i];
        let q = x * x + y * y;
        // z - 1 = q / (z + 1)
        q / ((1.0 + q).sqrt() + 1.0) / 2.0
    }
}

/// Recover (r, theta) from the Cartesian squeezing pair.
///
/// r = asinh(sqrt(x^2+y^2))/2, theta = atan2(y, x)/2 in (-pi/2, pi/2];
/// (0, 0) maps to (0, 0) by convention (theta is gauge at r = 0).
pub fn squeezing_of(x: f64, y: f64) -> (f64, f64) {
    if x == 0.0 && y == 0.0 {
        return (0.0, 0.0);
    }
    let r = (x * x + y * y).sqrt().asinh() / 2.0;
    (r, y.atan2(x) / 2.0)
}

/// Common driving prefactor of the squeezing equations,
/// A_k = (E_dC eps0 / 16) (phi + phi*)^2 / omega_k.
pub fn coupling_strength(
    phi: Complex64,
    params: &PhysicalParams,
    k: usize,
    spectrum: &ModeSpectrum,
) -> A {
    let re2 = 2.0 * phi.re;
    A((params.e_dc * spectrum.eps[0] / 16.0) * re2 * re2 / spectrum.omega[k])
}

/// Newtype for the driving strength A_k (always >= 0).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct A(pub f64);

/// The dynamical system: device constants plus the set of active mode pairs.
///
/// `full` activates every pair k = 1..N/2; `reduced` keeps a single pair
/// while retaining the full model's 1/(8N) back-action normalization
/// (all other modes stay frozen at vacuum, which is exact for them only in
/// the two-mode idealization).
#[derive(Debug, Clone)]
pub struct PlasmonSystem {
    eps0: f64,
    /// spectrum indices (1..=N/2) of the active pairs
    modes: Vec<usize>,
    omega: Vec<f64>,
    inv_omega: Vec<f64>,
    /// E_dC eps0 / 16
    drive_coeff: f64,
    /// E_dC eps0 / (8N)
    back_coeff: f64,
    band_top: f64,
}

impl PlasmonSystem {
    pub fn full(params: &PhysicalParams, spectrum: &ModeSpectrum) -> Result<Self> {
        params.validate()?;
        Self::with_modes(params, spectrum, (1..=spectrum.n_pairs()).collect())
    }

    /// Two-mode reduction: keep only the +-k_sel pair.
    pub fn reduced(
        params: &PhysicalParams,
        spectrum: &ModeSpectrum,
        k_sel: usize,
    ) -> Result<Self> {
        params.validate()?;
        if k_sel < 1 || k_sel > spectrum.n_pairs() {
            return Err(Error::ModeIndexOutOfRange {
                k: k_sel,
                max: spectrum.n_pairs(),
            });
        }
        Self::with_modes(params, spectrum, vec![k_sel])
    }

    fn with_modes(
        params: &PhysicalParams,
        spectrum: &ModeSpectrum,
        modes: Vec<usize>,
    ) -> Result<Self> {
        let omega: Vec<f64> = modes.iter().map(|&k| spectrum.omega[k]).collect();
        let inv_omega = omega.iter().map(|w| 1.0 / w).collect();
        Ok(PlasmonSystem {
            eps0: spectrum.eps[0],
            modes,
            omega,
            inv_omega,
            drive_coeff: params.e_dc * spectrum.eps[0] / 16.0,
            back_coeff: params.e_dc * spectrum.eps[0] / (8.0 * params.n_qubits as f64),
            band_top: spectrum.band_top(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Spectrum indices of the active mode pairs.
    pub fn mode_indices(&self) -> &[usize] {
        &self.modes
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn band_top(&self) -> f64 {
        self.band_top
    }

    /// Initial condition: coherent plasmon amplitude, photon vacuum.
    pub fn initial_state(&self, params: &PhysicalParams) -> SystemState {
        SystemState {
            t: 0.0,
            phi: initial_amplitude(params),
            xy: vec![(0.0, 0.0); self.modes.len()],
        }
    }

    /// Time derivative of a state.
    pub fn derivatives(&self, state: &SystemState) -> Result<(Complex64, Vec<(f64, f64)>)> {
        if !state.is_finite() {
            return Err(Error::NumericDomain {
                context: "derivatives input state".into(),
            });
        }
        assert_eq!(state.xy.len(), self.modes.len());
        let mut flat = vec![0.0; 2 + 2 * self.modes.len()];
        self.pack(state, &mut flat);
        let mut dflat = vec![0.0; flat.len()];
        self.deriv_flat(&flat, &mut dflat);
        let m = self.modes.len();
        let dphi = Complex64::new(dflat[0], dflat[1]);
        let dxy = (0..m).map(|i| (dflat[2 + i], dflat[2 + m + i])).collect();
        Ok((dphi, dxy))
    }

    fn pack(&self, state: &SystemState, flat: &mut [f64]) {
        let m = self.modes.len();
        flat[0] = state.phi.re;
        flat[1] = state.phi.im;
        for (i, &(x, y)) in state.xy.iter().enumerate() {
            flat[2 + i] = x;
            flat[2 + m + i] = y;
        }
    }

    fn unpack(&self, t: f64, flat: &[f64]) -> SystemState {
        let m = self.modes.len();
        SystemState {
            t,
            phi: Complex64::new(flat[0], flat[1]),
            xy: (0..m).map(|i| (flat[2 + i], flat[2 + m + i])).collect(),
        }
    }

    /// Right-hand side on the flat layout [re phi, im phi, x..., y...].
    fn deriv_flat(&self, u: &[f64], du: &mut [f64]) {
        let m = self.modes.len();
        let (phi_re, phi_im) = (u[0], u[1]);
        let re2 = 2.0 * phi_re;
        let a_pref = self.drive_coeff * re2 * re2;
        let (xs, ys) = u[2..].split_at(m);
        let (dxs, rest) = du[2..].split_at_mut(m);
        let dys = rest;
        let mut s = 0.0;
        for i in 0..m {
            let x = xs[i];
            let y = ys[i];
            let z = (1.0 + x * x + y * y).sqrt();
            let iw = self.inv_omega[i];
            let w = self.omega[i];
            let a = a_pref * iw;
            s += (z - 1.0 + x) * iw;
            dxs[i] = -2.0 * (w + a) * y;
            dys[i] = 2.0 * (w + a) * x + 2.0 * a * z;
        }
        // phidot = -i eps0 phi - i back_coeff (phi + phi*) s
        let c = self.back_coeff * re2 * s;
        du[0] = self.eps0 * phi_im;
        du[1] = -self.eps0 * phi_re - c;
    }
}

/// Tolerances and sampling for the adaptive integrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Maximum step size. Defaults to pi / (20 omega_top), resolving the
    /// fastest phase rotation in the system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub t_end: f64,
    pub sample_dt: f64,
    /// Record a full (x, y) snapshot every this many samples.
    #[serde(default = "default_snapshot_stride")]
    pub snapshot_stride: usize,
    /// Record the squeezing amplitude of this mode slot at every sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_mode: Option<usize>,
}

fn default_rel_tol() -> f64 {
    1e-8
}
fn default_abs_tol() -> f64 {
    1e-10
}
fn default_snapshot_stride() -> usize {
    1
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("integrator.rel_tol", self.rel_tol),
            ("integrator.abs_tol", self.abs_tol),
            ("integrator.t_end", self.t_end),
            ("integrator.sample_dt", self.sample_dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::invalid(
                    "integrator.max_step",
                    format!("must be > 0, got {h}"),
                ));
            }
        }
        if self.sample_dt > self.t_end {
            return Err(Error::invalid(
                "integrator.sample_dt",
                "must not exceed t_end",
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("integrator.snapshot_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn effective_max_step(&self, system: &PlasmonSystem) -> f64 {
        self.max_step
            .unwrap_or(std::f64::consts::PI / (20.0 * system.band_top()))
    }
}

/// Time series produced by `integrate`: scalar observables at every sample,
/// full state snapshots every `snapshot_stride`-th sample.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub phi: Vec<Complex64>,
    /// Photon number per propagation direction, sum_k sinh^2(r_k).
    pub photon_number: Vec<f64>,
    /// (mode slot, r_k at every sample), when tracking was requested.
    pub tracked_r: Option<(usize, Vec<f64>)>,
    pub snapshots: Vec<SystemState>,
    pub snapshot_stride: usize,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn phi_sq(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.norm_sqr()).collect()
    }
}

// Dormand-Prince 5(4) coefficients (the time-independent right-hand side
// makes the stage abscissae irrelevant).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// y5 - y4 (error estimate weights, including the FSAL stage)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate with an adaptive embedded Runge-Kutta 5(4) pair (Dormand-Prince),
/// sampling observables every `sample_dt` by step hitting. Deterministic for
/// identical inputs.
pub fn integrate(
    system: &PlasmonSystem,
    initial: &SystemState,
    config: &IntegratorConfig,
) -> Result<EvolutionTrace> {
    config.validate()?;
    if !initial.is_finite() {
        return Err(Error::NumericDomain {
            context: "initial state".into(),
        });
    }
    if initial.xy.len() != system.n_modes() {
        return Err(Error::invalid(
            "initial",
            format!(
                "state has {} mode slots, system has {}",
                initial.xy.len(),
                system.n_modes()
            ),
        ));
    }
    if let Some(slot) = config.track_mode {
        if slot >= system.n_modes() {
            return Err(Error::ModeIndexOutOfRange {
                k: slot,
                max: system.n_modes().saturating_sub(1),
            });
        }
    }

    let dim = 2 + 2 * system.n_modes();
    let max_step = config.effective_max_step(config_system(system));
    let t0 = initial.t;
    let t_end = t0 + config.t_end;

    // sample grid: t0 + n * sample_dt, plus t_end if unaligned
    let n_regular = (config.t_end / config.sample_dt).floor() as usize;
    let mut sample_times: Vec<f64> = (0..=n_regular)
        .map(|n| t0 + n as f64 * config.sample_dt)
        .collect();
    if t_end - sample_times.last().unwrap() > 1e-9 * config.sample_dt {
        sample_times.push(t_end);
    }

    let mut y = vec![0.0; dim];
    system.pack(initial, &mut y);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];

    let mut trace = TraceBuilder::new(system, config, sample_times.len());
    trace.record(initial);
    let mut next_sample = 1usize;

    system.deriv_flat(&y, &mut k1);
    let mut t = t0;
    let mut h = max_step.min(config.sample_dt);

    while next_sample < sample_times.len() {
        let target = sample_times[next_sample];
        if t + h >= target {
            h = target - t;
        }
        if h <= f64::EPSILON * 16.0 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                last_good_t: t,
                reason: "step size underflow".into(),
            });
        }

        // stage 2
        for i in 0..dim {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        system.deriv_flat(&ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.deriv_flat(&ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.deriv_flat(&ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.deriv_flat(&ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        system.deriv_flat(&ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        system.deriv_flat(&ynew, &mut k7);

        // error norm (RMS of scaled components)
        let mut err_sq = 0.0;
        for i in 0..dim {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i]);
            let sc = config.abs_tol + config.rel_tol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7); // FSAL
            if (t - target).abs() <= f64::EPSILON * 64.0 * target.abs().max(1.0) {
                t = target;
                let state = system.unpack(t, &y);
                if !state.is_finite() {
                    return Err(Error::NumericDomain {
                        context: format!("state at t = {t}"),
                    });
                }
                trace.record(&state);
                next_sample += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(max_step);
        } else {
            // reject; halve on non-finite error
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 0.9)
            } else {
                0.5
            };
            h *= factor;
        }
    }

    Ok(trace.finish())
}

// `effective_max_step` takes the system only for the band top; passthrough
// kept separate so the call site reads clearly.
fn config_system(system: &PlasmonSystem) -> &PlasmonSystem {
    system
}

struct TraceBuilder<'a> {
    config: &'a IntegratorConfig,
    times: Vec<f64>,
    phi: Vec<Complex64>,
    photon_number: Vec<f64>,
    tracked_r: Option<(usize, Vec<f64>)>,
    snapshots: Vec<SystemState>,
    count: usize,
}

impl<'a> TraceBuilder<'a> {
    fn new(_system: &PlasmonSystem, config: &'a IntegratorConfig, n: usize) -> Self {
        TraceBuilder {
            config,
            times: Vec::with_capacity(n),
            phi: Vec::with_capacity(n),
            photon_number: Vec::with_capacity(n),
            tracked_r: config.track_mode.map(|slot| (slot, Vec::with_capacity(n))),
            snapshots: Vec::new(),
            count: 0,
        }
    }

    fn record(&mut self, state: &SystemState) {
        self.times.push(state.t);
        self.phi.push(state.phi);
        let nph: f64 = (0..state.xy.len()).map(|i| state.sinh2_r(i)).sum();
        self.photon_number.push(nph);
        if let Some((slot, rs)) = &mut self.tracked_r {
            rs.push(state.r_of(*slot));
        }
        if self.count % self.config.snapshot_stride == 0 {
            self.snapshots.push(state.clone());
        }
        self.count += 1;
    }

    fn finish(self) -> EvolutionTrace {
        EvolutionTrace {
            times: self.times,
            phi: self.phi,
            photon_number: self.photon_number,
            tracked_r: self.tracked_r,
            snapshots: self.snapshots,
            snapshot_stride: self.config.snapshot_stride,
        }
    }
}
