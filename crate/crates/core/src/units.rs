//! Dimensionless unit system and run parameters.
//!
//! Lengths are measured in ℓ, energies in ε = ħ²/(mℓ²), times in τ = mℓ²/ħ
//! and forces (pressures) in ρ = Nħ²/(mℓ³). The condensate wavefunction is
//! normalized to one, so the particle number is absorbed into the couplings:
//! `g_s` here is the dimensionless combination g_s·N/(εℓ).
//!
//! Parameters are read from a line-oriented `key = value` file. Blank lines
//! and `#` comments are ignored; keys not present keep their defaults.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Self-interaction strength (ε·ℓ).
    pub g_s: f64,
    /// Cross-interaction strength (ε·ℓ).
    pub g_c: f64,
    /// Rabi strength Δ (1/τ).
    pub delta: f64,
    /// Piston-to-condensate mass ratio M/(Nm).
    pub mass_ratio: f64,
    /// Spring constant kℓ/ρ.
    pub spring_k: f64,
    /// Left wall height (ε).
    pub v_left: f64,
    /// Piston barrier height (ε).
    pub v_piston: f64,
    /// Half-width of the wall ramps (ℓ).
    pub slope_s: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// Real-time step (τ).
    pub dt_real: f64,
    /// Imaginary-time step (τ).
    pub dt_imag: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g_s: 5.0,
            g_c: 0.0,
            delta: 5.0,
            mass_ratio: 1000.0,
            spring_k: 1.05,
            v_left: 100.0,
            v_piston: 10.0,
            slope_s: 0.1,
            x_min: -2.0,
            x_max: 6.0,
            n_points: 4096,
            dt_real: 2.5e-4,
            dt_imag: 1e-3,
        }
    }
}

/// Keys accepted in configuration files and `--set` overrides.
pub const KEYS: &[&str] = &[
    "g_s",
    "g_c",
    "delta",
    "mass_ratio",
    "spring_k",
    "v_left",
    "v_piston",
    "slope_s",
    "x_min",
    "x_max",
    "n_points",
    "dt_real",
    "dt_imag",
];

impl SystemParams {
    /// Piston oscillation frequency Ω = √(k/M) in units of 1/τ.
    pub fn spring_frequency(&self) -> f64 {
        (self.spring_k / self.mass_ratio).sqrt()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    /// Assign one parameter from its textual value. Does not validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|e| Error::invalid(key, format!("`{v}` is not a number ({e})")))
        };
        match key {
            "g_s" => self.g_s = real(value)?,
            "g_c" => self.g_c = real(value)?,
            "delta" => self.delta = real(value)?,
            "mass_ratio" => self.mass_ratio = real(value)?,
            "spring_k" => self.spring_k = real(value)?,
            "v_left" => self.v_left = real(value)?,
            "v_piston" => self.v_piston = real(value)?,
            "slope_s" => self.slope_s = real(value)?,
            "x_min" => self.x_min = real(value)?,
            "x_max" => self.x_max = real(value)?,
            "dt_real" => self.dt_real = real(value)?,
            "dt_imag" => self.dt_imag = real(value)?,
            "n_points" => {
                self.n_points = value.parse::<usize>().map_err(|e| {
                    Error::invalid(key, format!("`{value}` is not a point count ({e})"))
                })?
            }
            _ => return Err(Error::invalid(key, "unknown parameter")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(key: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(key, "must be finite"))
            }
        }
        for (key, v) in [
            ("g_s", self.g_s),
            ("g_c", self.g_c),
            ("delta", self.delta),
            ("mass_ratio", self.mass_ratio),
            ("spring_k", self.spring_k),
            ("v_left", self.v_left),
            ("v_piston", self.v_piston),
            ("slope_s", self.slope_s),
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("dt_real", self.dt_real),
            ("dt_imag", self.dt_imag),
        ] {
            finite(key, v)?;
        }
        if self.g_s < 0.0 {
            return Err(Error::invalid("g_s", "must be >= 0"));
        }
        if self.g_c < 0.0 {
            return Err(Error::invalid("g_c", "must be >= 0"));
        }
        if self.delta < 0.0 {
            return Err(Error::invalid("delta", "must be >= 0"));
        }
        if self.mass_ratio <= 0.0 {
            return Err(Error::invalid("mass_ratio", "must be > 0"));
        }
        if self.spring_k <= 0.0 {
            return Err(Error::invalid("spring_k", "must be > 0"));
        }
        if self.v_piston <= 0.0 {
            return Err(Error::invalid("v_piston", "must be > 0"));
        }
        if self.v_left <= self.v_piston {
            return Err(Error::invalid("v_left", "must exceed v_piston"));
        }
        if self.slope_s <= 0.0 {
            return Err(Error::invalid("slope_s", "must be > 0"));
        }
        if self.x_max <= self.x_min {
            return Err(Error::invalid("x_max", "must exceed x_min"));
        }
        if !self.n_points.is_power_of_two() || self.n_points < 16 {
            return Err(Error::invalid(
                "n_points",
                "must be a power of two and at least 16",
            ));
        }
        if self.slope_s < 4.0 * self.dx() {
            return Err(Error::invalid(
                "slope_s",
                format!(
                    "ramp must span at least 4 grid points (slope_s >= {})",
                    4.0 * self.dx()
                ),
            ));
        }
        if self.dt_real <= 0.0 {
            return Err(Error::invalid("dt_real", "must be > 0"));
        }
        if self.dt_imag <= 0.0 {
            return Err(Error::invalid("dt_imag", "must be > 0"));
        }
        Ok(())
    }

    /// Parse configuration text on top of the defaults and validate.
    pub fn parse_config(text: &str, origin: &Path) -> Result<Self> {
        let mut params = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: &str| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                text: raw.to_string(),
                reason: reason.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(parse_err("empty key or value"));
            }
            params.set(key, value)?;
        }
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_config(&text, path)
    }

    /// Serialize in the configuration format. Floats use shortest
    /// round-trip formatting so reloading reproduces the value exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_string(key));
        }
        out
    }

    fn value_string(&self, key: &str) -> String {
        match key {
            "g_s" => self.g_s.to_string(),
            "g_c" => self.g_c.to_string(),
            "delta" => self.delta.to_string(),
            "mass_ratio" => self.mass_ratio.to_string(),
            "spring_k" => self.spring_k.to_string(),
            "v_left" => self.v_left.to_string(),
            "v_piston" => self.v_piston.to_string(),
            "slope_s" => self.slope_s.to_string(),
            "x_min" => self.x_min.to_string(),
            "x_max" => self.x_max.to_string(),
            "n_points" => self.n_points.to_string(),
            "dt_real" => self.dt_real.to_string(),
            "dt_imag" => self.dt_imag.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<SystemParams> {
        SystemParams::parse_config(text, Path::new("test.conf"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let p = parse("").unwrap();
        assert_eq!(p, SystemParams::default());
        assert_eq!(p.g_s, 5.0);
        assert_eq!(p.g_c, 0.0);
        assert_eq!(p.delta, 5.0);
        assert_eq!(p.mass_ratio, 1000.0);
        assert_eq!(p.spring_k, 1.05);
        assert_eq!(p.v_left, 100.0);
        assert_eq!(p.v_piston, 10.0);
        assert_eq!(p.slope_s, 0.1);
    }

    #[test]
    fn single_override() {
        let p = parse("# lighter piston\nmass_ratio=250\n").unwrap();
        let expected = SystemParams {
            mass_ratio: 250.0,
            ..SystemParams::default()
        };
        assert_eq!(p, expected);
    }

    #[test]
    fn negative_slope_is_rejected_by_name() {
        let err = parse("slope_s=-1").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("slope_s"), "{err}");
    }

    #[test]
    fn malformed_line_names_the_line() {
        let err = parse("g_s 5").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse("bogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = parse("g_c = many").unwrap_err();
        assert!(err.to_string().contains("g_c"));
    }

    #[test]
    fn unresolved_ramp_and_bad_grid_rejected() {
        let err = parse("slope_s = 0.005").unwrap_err();
        assert!(err.to_string().contains("slope_s"));
        let err = parse("n_points = 3000").unwrap_err();
        assert!(err.to_string().contains("n_points"));
        let err = parse("v_left = 5").unwrap_err();
        assert!(err.to_string().contains("v_left"));
    }

    #[test]
    fn defaults_are_valid() {
        SystemParams::default().validate().unwrap();
    }

    proptest! {
        #[test]
        fn config_round_trip(
            g_s in 0.0..20.0f64,
            g_c in 0.0..20.0f64,
            delta in 0.0..10.0f64,
            mass_ratio in 1.0..5000.0f64,
            spring_k in 0.01..10.0f64,
            dt_real in 1e-5..1e-2f64,
        ) {
            let p = SystemParams { g_s, g_c, delta, mass_ratio, spring_k, dt_real, ..SystemParams::default() };
            let back = parse(&p.to_config_string()).unwrap();
            prop_assert_eq!(p, back);
        }
    }
}
