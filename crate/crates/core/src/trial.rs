//! Variational box-mode model at φ = 0 with an infinite piston wall: both
//! spin components share the lowest box mode √(2/a)·sin(πx/a) and only
//! their populations vary. Used for qualitative comparison and as a test
//! oracle, never in the simulation path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub g_s: f64,
    pub delta: f64,
    pub a: f64,
}

impl TrialParams {
    pub fn new(g_s: f64, delta: f64, a: f64) -> Result<Self> {
        if !(g_s > 0.0 && g_s.is_finite()) {
            return Err(Error::invalid("g_s", "must be > 0"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid("delta", "must be >= 0"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("a", "must be > 0"));
        }
        Ok(Self { g_s, delta, a })
    }

    /// Rabi strength above which the state is fully spin-down.
    pub fn critical_delta(&self) -> f64 {
        1.5 * self.g_s / self.a
    }

    /// Box length above which the state is fully spin-down.
    pub fn critical_length(&self) -> f64 {
        1.5 * self.g_s / self.delta
    }
}

/// Energy of the trial state with spin-down fraction `n_down` (g_c = 0).
pub fn trial_energy_at(p: &TrialParams, n_down: f64) -> f64 {
    let (a, g, d) = (p.a, p.g_s, p.delta);
    let pi = std::f64::consts::PI;
    pi * pi / (2.0 * a * a) + 0.75 * g / a + 0.5 * d - (1.5 * g / a + d) * n_down
        + 1.5 * g / a * n_down * n_down
}

/// Spin-down fraction minimizing [`trial_energy_at`], clamped to [1/2, 1].
pub fn trial_occupation(p: &TrialParams) -> f64 {
    (0.5 + p.a * p.delta / (3.0 * p.g_s)).min(1.0)
}

/// Stationary magnetization (n↑ − n↓) of the trial state.
pub fn trial_magnetization(p: &TrialParams) -> f64 {
    1.0 - 2.0 * trial_occupation(p)
}

/// Minimized trial energy, piecewise in Δ around the critical strength.
pub fn trial_energy(p: &TrialParams) -> f64 {
    let pi = std::f64::consts::PI;
    let (a, g, d) = (p.a, p.g_s, p.delta);
    let base = pi * pi / (2.0 * a * a) + 3.0 * g / (8.0 * a);
    if d < p.critical_delta() {
        base - a * d * d / (6.0 * g)
    } else {
        base + 3.0 * g / (8.0 * a) - 0.5 * d
    }
}

/// Rabi-induced pressure shift −∂/∂a [E(a, Δ) − E(a, 0)].
pub fn trial_pressure_shift(p: &TrialParams) -> f64 {
    if p.delta < p.critical_delta() {
        p.delta * p.delta / (6.0 * p.g_s)
    } else {
        3.0 * p.g_s / (8.0 * p.a * p.a)
    }
}

/// Stationary pressure −∂E/∂a of the trial state.
pub fn trial_pressure(p: &TrialParams) -> f64 {
    let pi = std::f64::consts::PI;
    pi * pi / p.a.powi(3) + 3.0 * p.g_s / (8.0 * p.a * p.a) + trial_pressure_shift(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tp(g: f64, d: f64, a: f64) -> TrialParams {
        TrialParams::new(g, d, a).unwrap()
    }

    /// Golden-section search of the population functional on [0, 1]. The
    /// functional is convex, so the bracket always holds the minimum.
    fn brute_force_min(p: &TrialParams) -> f64 {
        let f = |n: f64| trial_energy_at(p, n);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
    }

    /// Energy of the trial state by direct quadrature of the box mode.
    fn quadrature_energy(p: &TrialParams, n_down: f64) -> f64 {
        let n = 20000;
        let h = p.a / n as f64;
        let (mut kin, mut quart) = (0.0, 0.0);
        for i in 0..n {
            let x = (i as f64 + 0.5) * h;
            let phi = (2.0 / p.a).sqrt() * (PI * x / p.a).sin();
            let dphi = (2.0 / p.a).sqrt() * (PI / p.a) * (PI * x / p.a).cos();
            kin += 0.5 * dphi * dphi * h;
            quart += phi.powi(4) * h;
        }
        let n_up = 1.0 - n_down;
        kin + 0.5 * p.g_s * quart * (n_up * n_up + n_down * n_down)
            + 0.5 * p.delta * (n_up - n_down)
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(trial_occupation(&tp(5.0, 0.0, 1.8)), 0.5);
        assert_eq!(trial_occupation(&tp(5.0, 7.5, 1.0)), 1.0);
        assert!((trial_occupation(&tp(5.0, 3.75, 1.0)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn energy_at_zero_rabi() {
        let e = trial_energy(&tp(5.0, 0.0, 1.0));
        assert!((e - (PI * PI / 2.0 + 15.0 / 8.0)).abs() < 1e-14);
    }

    #[test]
    fn population_functional_matches_quadrature() {
        for &(d, a, n) in &[(0.0, 1.0, 0.5), (2.0, 1.7, 0.8), (5.0, 1.8, 1.0)] {
            let p = tp(5.0, d, a);
            assert!((trial_energy_at(&p, n) - quadrature_energy(&p, n)).abs() < 1e-7);
        }
    }

    #[test]
    fn continuity_at_critical_point() {
        let p = tp(5.0, 1.0, 1.3);
        let dc = p.critical_delta();
        let below = tp(5.0, dc * (1.0 - 1e-15), 1.3);
        let at = tp(5.0, dc, 1.3);
        assert!((trial_energy(&below) - trial_energy(&at)).abs() < 1e-12);
        assert!((trial_pressure_shift(&below) - trial_pressure_shift(&at)).abs() < 1e-12);
        assert_eq!(trial_occupation(&at), 1.0);
    }

    #[test]
    fn shift_examples() {
        assert_eq!(trial_pressure_shift(&tp(5.0, 0.0, 1.5)), 0.0);
        let s = trial_pressure_shift(&tp(5.0, 2.0, 1.5));
        assert!((s - 4.0 / 30.0).abs() < 1e-15);
        assert_eq!(s, trial_pressure_shift(&tp(5.0, 2.0, 2.5)));
    }

    #[test]
    fn critical_length_for_sweep_values() {
        for d in [1.0, 2.0, 5.0] {
            let p = tp(5.0, d, 1.0);
            assert!((p.critical_length() - 7.5 / d).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(TrialParams::new(0.0, 1.0, 1.0).is_err());
        assert!(TrialParams::new(5.0, -1.0, 1.0).is_err());
        assert!(TrialParams::new(5.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_matches_brute_force(a in 0.5..4.0f64, d in 0.0..10.0f64, g in 0.5..10.0f64) {
            let p = tp(g, d, a);
            prop_assert!((trial_energy(&p) - brute_force_min(&p)).abs() < 1e-10);
        }

        #[test]
        fn shift_is_minus_energy_slope(a in 0.5..4.0f64, d in 0.0..10.0f64) {
            let p = tp(5.0, d, a);
            // stay away from the kink at the critical length
            prop_assume!((a - p.critical_length()).abs() > 1e-3);
            let h = 1e-6;
            let shifted = |a: f64| trial_energy(&tp(5.0, d, a)) - trial_energy(&tp(5.0, 0.0, a));
            let fd = -(shifted(a + h) - shifted(a - h)) / (2.0 * h);
            prop_assert!((fd - trial_pressure_shift(&p)).abs() < 1e-6);
        }

        #[test]
        fn occupation_nondecreasing(a in 0.5..4.0f64, d in 0.0..10.0f64, da in 0.0..1.0f64, dd in 0.0..1.0f64) {
            let base = trial_occupation(&tp(5.0, d, a));
            prop_assert!(trial_occupation(&tp(5.0, d + dd, a)) >= base);
            prop_assert!(trial_occupation(&tp(5.0, d, a + da)) >= base);
        }
    }
}
