//! Periodic 1-D grid and the two-component condensate field.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::units::SystemParams;

/// Uniform periodic grid `x_j = x_min + j·dx`, `j = 0..n`, with cached
/// transform plans and the matching wavenumbers in standard DFT order.
pub struct Grid {
    x_min: f64,
    x_max: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("n", &self.x.len())
            .finish()
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Self {
        assert!(x_max > x_min && n >= 2, "degenerate grid");
        let dx = (x_max - x_min) / n as f64;
        let x = (0..n).map(|j| x_min + j as f64 * dx).collect();
        let dk = 2.0 * PI / (x_max - x_min);
        let k = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            x_min,
            x_max,
            dx,
            x,
            k,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn from_params(params: &SystemParams) -> Arc<Self> {
        Arc::new(Self::new(params.x_min, params.x_max, params.n_points))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    pub fn make_scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Inverse DFT in place, including the 1/n factor.
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
}

/// Pseudo-spin amplitudes (ψ↑, ψ↓) sampled on a grid.
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: Arc<Grid>,
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            up: vec![Complex64::new(0.0, 0.0); n],
            down: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        mut f: impl FnMut(f64) -> (Complex64, Complex64),
    ) -> Self {
        let (up, down) = grid.x().iter().map(|&x| f(x)).unzip();
        Self { grid, up, down }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Total density |ψ↑|² + |ψ↓|² at each grid point.
    pub fn density(&self) -> Vec<f64> {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .collect()
    }

    /// Rectangle-rule ∫(|ψ↑|² + |ψ↓|²) dx.
    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .sum();
        s * self.grid.dx()
    }

    /// The same quantity evaluated from the Fourier coefficients.
    pub fn spectral_norm(&self) -> f64 {
        let mut scratch = self.grid.make_scratch();
        let n = self.grid.len() as f64;
        let mut total = 0.0;
        for comp in [&self.up, &self.down] {
            let mut buf = comp.clone();
            self.grid.forward(&mut buf, &mut scratch);
            total += buf.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        total * self.grid.dx() / n
    }

    pub fn scale(&mut self, factor: f64) {
        self.up
            .iter_mut()
            .chain(self.down.iter_mut())
            .for_each(|z| *z *= factor);
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        self.scale(1.0 / norm.sqrt());
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// Population imbalance S = ∫(|ψ↑|² − |ψ↓|²) dx divided by the norm.
    pub fn magnetization(&self) -> f64 {
        let norm = self.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() - d.norm_sqr())
            .sum();
        s * self.grid.dx() / norm
    }

    /// |Ψ|² summed over the first and last grid points.
    pub fn boundary_density(&self) -> f64 {
        let n = self.up.len();
        self.up[0].norm_sqr()
            + self.down[0].norm_sqr()
            + self.up[n - 1].norm_sqr()
            + self.down[n - 1].norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.up
            .iter()
            .chain(&self.down)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ⟨self|other⟩ = ∫(ψ↑*φ↑ + ψ↓*φ↓) dx.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        let s: Complex64 = self
            .up
            .iter()
            .zip(&other.up)
            .chain(self.down.iter().zip(&other.down))
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.dx()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(-2.0, 6.0, 1024))
    }

    fn box_mode(grid: Arc<Grid>, a: f64) -> SpinorField {
        SpinorField::from_fn(grid, |x| {
            let v = if (0.0..=a).contains(&x) {
                (2.0 / a).sqrt() * (PI * x / a).sin()
            } else {
                0.0
            };
            (Complex64::new(v, 0.0), Complex64::new(0.0, 0.0))
        })
    }

    #[test]
    fn wavenumbers_follow_dft_order() {
        let g = Grid::new(0.0, 2.0 * PI, 8);
        assert_eq!(g.k(), &[0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
        assert!((g.k_max() - 4.0).abs() < 1e-12);
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_zero_norm_and_cannot_normalize() {
        let f = SpinorField::zeros(grid());
        assert_eq!(f.norm(), 0.0);
        assert!(matches!(f.normalized(), Err(Error::ZeroNorm)));
    }

    #[test]
    fn box_mode_norm_is_one() {
        let f = box_mode(grid(), 1.5);
        assert!((f.norm() - 1.0).abs() < 1e-6, "{}", f.norm());
    }

    #[test]
    fn normalize_scales_by_inverse_sqrt_norm() {
        let mut f = box_mode(grid(), 1.5);
        f.normalize().unwrap();
        let reference = f.clone();
        f.scale(2.0);
        assert!((f.norm() - 4.0).abs() < 1e-12);
        let g = f.normalized().unwrap();
        for (a, b) in g.up.iter().zip(&reference.up) {
            assert!((a - b).norm() < 1e-14);
        }
        let again = g.clone().normalized().unwrap();
        for (a, b) in again.up.iter().zip(&g.up) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!((again.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnetization_limits() {
        let f = box_mode(grid(), 1.5);
        assert!((f.magnetization() - 1.0).abs() < 1e-14);
        let g = SpinorField::from_fn(grid(), |x| {
            let v = (-x * x).exp();
            (Complex64::new(v, 0.0), Complex64::new(0.0, v))
        });
        assert!(g.magnetization().abs() < 1e-14);
    }

    #[test]
    fn transform_round_trip() {
        let g = grid();
        let f = SpinorField::from_fn(g.clone(), |x| {
            (
                Complex64::new((-(x - 1.0).powi(2) * 4.0).exp(), 0.3 * (2.0 * x).sin()),
                Complex64::new(0.1 * x.cos(), 0.0),
            )
        });
        let mut buf = f.up.clone();
        let mut scratch = g.make_scratch();
        g.forward(&mut buf, &mut scratch);
        g.inverse(&mut buf, &mut scratch);
        for (a, b) in buf.iter().zip(&f.up) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn parseval_holds(seed in proptest::collection::vec(-1.0..1.0f64, 8)) {
            let g = grid();
            let f = SpinorField::from_fn(g, |x| {
                let env = (-(x - 1.0).powi(2) * 3.0).exp();
                (
                    Complex64::new(seed[0] * env + seed[1] * (x * seed[2] * 4.0).sin() * env, seed[3] * env),
                    Complex64::new(seed[4] * env * (x * seed[5]).cos(), seed[6] * env + seed[7] * x * env),
                )
            });
            let n = f.norm();
            prop_assert!((n - f.spectral_norm()).abs() < 1e-12 * n.max(1.0));
        }
    }
}
