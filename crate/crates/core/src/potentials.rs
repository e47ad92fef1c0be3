//! Smooth confining walls: a tall left wall at the origin and the moving
//! piston barrier. Both use a half-sine ramp of half-width `s`.

use std::f64::consts::PI;

use crate::units::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSpec {
    pub v_left: f64,
    pub v_piston: f64,
    pub slope_s: f64,
}

impl From<&SystemParams> for WallSpec {
    fn from(p: &SystemParams) -> Self {
        Self {
            v_left: p.v_left,
            v_piston: p.v_piston,
            slope_s: p.slope_s,
        }
    }
}

impl WallSpec {
    /// Left wall: `v_left` for x < −s, zero for x > s.
    pub fn left_wall(&self, x: f64) -> f64 {
        let s = self.slope_s;
        if x < -s {
            self.v_left
        } else if x > s {
            0.0
        } else {
            self.v_left * 0.5 * (1.0 - (PI * x / (2.0 * s)).sin())
        }
    }

    /// Piston barrier as a function of `z = x − a`.
    pub fn piston_barrier(&self, z: f64) -> f64 {
        let s = self.slope_s;
        if z < -s {
            0.0
        } else if z > s {
            self.v_piston
        } else {
            self.v_piston * 0.5 * (1.0 + (PI * z / (2.0 * s)).sin())
        }
    }

    /// d/dz of [`piston_barrier`](Self::piston_barrier); supported on |z| ≤ s.
    pub fn piston_barrier_deriv(&self, z: f64) -> f64 {
        let s = self.slope_s;
        if z.abs() > s {
            0.0
        } else {
            self.v_piston * PI / (4.0 * s) * (PI * z / (2.0 * s)).cos()
        }
    }

    /// Total external potential with the piston at `a`.
    pub fn total(&self, x: f64, a: f64) -> f64 {
        self.left_wall(x) + self.piston_barrier(x - a)
    }
}
