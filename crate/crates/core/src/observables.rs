//! Pressure on the piston and the work decomposition along a trajectory.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gpe::ground_state;
use crate::grid::{Grid, SpinorField};
use crate::piston::{PistonTrajectory, StationarySurface};
use crate::units::SystemParams;

/// Fourier-space evaluator of the exact pressure ∫|Ψ|²·dV(x−a)/dx dx.
///
/// The sampled density is replaced by its trigonometric interpolant and the
/// integral against the analytic barrier slope is done in closed form, so
/// the kinks of the slope at a ± s cost no accuracy. One FFT per call.
pub struct PressureProbe {
    grid: Arc<Grid>,
    /// Transform of the barrier slope, ∫V'(z)·cos(kz) dz, for k ≥ 0.
    kernel: Vec<f64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// sin(x)/x with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl PressureProbe {
    pub fn new(grid: Arc<Grid>, params: &SystemParams) -> Self {
        let s = params.slope_s;
        let beta = PI / (2.0 * s);
        let amp = params.v_piston * PI / (4.0 * s);
        let n = grid.len();
        let kernel = grid.k()[..=n / 2]
            .iter()
            .map(|&k| amp * s * (sinc((beta - k) * s) + sinc((beta + k) * s)))
            .collect();
        Self {
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: grid.make_scratch(),
            kernel,
            grid,
        }
    }

    pub fn pressure(&mut self, field: &SpinorField, a: f64) -> f64 {
        let n = self.grid.len();
        for (b, (u, d)) in self.buf.iter_mut().zip(field.up.iter().zip(&field.down)) {
            *b = Complex64::new(u.norm_sqr() + d.norm_sqr(), 0.0);
        }
        self.grid.forward(&mut self.buf, &mut self.scratch);
        // density(x) = (1/n) Σ ρ̂_m exp(i k_m (x − x_min)); pair ±k_m using ρ̂_{−m} = conj(ρ̂_m)
        let dk = self.grid.k()[1];
        let shift = a - self.grid.x_min();
        let step = Complex64::from_polar(1.0, dk * shift);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = self.buf[0].re * self.kernel[0];
        for m in 1..n / 2 {
            phase *= step;
            if m % 64 == 0 {
                phase = Complex64::from_polar(1.0, m as f64 * dk * shift);
            }
            acc += 2.0 * (self.buf[m] * phase).re * self.kernel[m];
        }
        let nyquist = (n / 2) as f64 * dk * shift;
        acc += (self.buf[n / 2] * Complex64::new(nyquist.cos(), 0.0)).re * self.kernel[n / 2];
        acc / n as f64
    }
}

/// Exact pressure of `field` on a piston at `a`; see [`PressureProbe`].
pub fn pressure_exact(field: &SpinorField, a: f64, params: &SystemParams) -> f64 {
    PressureProbe::new(field.grid().clone(), params).pressure(field, a)
}

/// Ground-state pressure and energy at fixed (a, φ).
pub fn pressure_stationary(a: f64, phi: f64, params: &SystemParams, tol: f64) -> Result<(f64, f64)> {
    let gs = ground_state(a, phi, params, tol)?;
    Ok((pressure_exact(&gs.field, a, params), gs.energy))
}

/// Work decomposition of a piston trajectory against the stationary surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkLedger {
    /// ∫ v·P dt with the pressure recorded along the trajectory.
    pub w_p: f64,
    /// ∫ v·P_st dt with the quasi-static pressure.
    pub w_p_st: f64,
    /// w_p − w_p_st.
    pub dw_p: f64,
    /// E_st(a_f, φ_f) − E_st(a_0, φ_0).
    pub e_st: f64,
    /// ∫ φ'·∂E_st/∂φ dt.
    pub w_phi_st: f64,
}

impl WorkLedger {
    /// w_phi_st − (w_p + e_st − dw_p); vanishes up to quadrature error.
    pub fn closure_residual(&self) -> f64 {
        self.w_phi_st - (self.w_p + self.e_st - self.dw_p)
    }
}

/// Trapezoid-rule work integrals over the trajectory samples. φ' is taken
/// from centered differences of the sampled angle.
pub fn work_report(trajectory: &PistonTrajectory, surface: &StationarySurface) -> Result<WorkLedger> {
    let n = trajectory.len();
    if n < 3 {
        return Err(Error::invalid("trajectory", "needs at least 3 samples"));
    }
    let t = &trajectory.times;
    let phi = &trajectory.phi;
    let mut p_st = Vec::with_capacity(n);
    let mut de_dphi = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    for i in 0..n {
        let (a, f) = (trajectory.a[i], phi[i]);
        p_st.push(surface.pressure(a, f)?);
        de_dphi.push(surface.denergy_dphi(a, f)?);
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        rate.push((phi[hi] - phi[lo]) / (t[hi] - t[lo]));
    }
    let trapz = |g: &dyn Fn(usize) -> f64| -> f64 {
        (1..n).map(|i| 0.5 * (t[i] - t[i - 1]) * (g(i) + g(i - 1))).sum()
    };
    let v = &trajectory.v;
    let w_p = trapz(&|i| v[i] * trajectory.p[i]);
    let w_p_st = trapz(&|i| v[i] * p_st[i]);
    let w_phi_st = trapz(&|i| rate[i] * de_dphi[i]);
    let e_st = surface.energy(trajectory.a[n - 1], phi[n - 1])? - surface.energy(trajectory.a[0], phi[0])?;
    Ok(WorkLedger {
        w_p,
        w_p_st,
        dw_p: w_p - w_p_st,
        e_st,
        w_phi_st,
    })
}
