//! Classical piston dynamics: the stationary-pressure surface, the exact
//! co-simulation with the condensate, and the surrogate that replaces the
//! condensate by its tabulated ground-state pressure.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::gpe::{ground_state_from, initial_guess, Evolver, GroundStateOptions};
use crate::grid::{Grid, SpinorField};
use crate::observables::{pressure_exact, PressureProbe};
use crate::units::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Exact,
    Surrogate,
}

impl SimMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMode::Exact => "exact",
            SimMode::Surrogate => "surrogate",
        }
    }
}

/// Uniformly sampled piston history. Sample 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct PistonTrajectory {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub s_mag: Vec<f64>,
    pub phi: Vec<f64>,
    pub mode: SimMode,
}

impl PistonTrajectory {
    fn with_capacity(n: usize, mode: SimMode) -> Self {
        Self {
            times: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            s_mag: Vec::with_capacity(n),
            phi: Vec::with_capacity(n),
            mode,
        }
    }

    fn push(&mut self, t: f64, a: f64, v: f64, p: f64, s: f64, phi: f64) {
        self.times.push(t);
        self.a.push(a);
        self.v.push(v);
        self.p.push(p);
        self.s_mag.push(s);
        self.phi.push(phi);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Position and velocity at the last sample.
    pub fn final_state(&self) -> (f64, f64) {
        let n = self.len() - 1;
        (self.a[n], self.v[n])
    }

    /// Every `stride`-th sample, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect();
        Self {
            times: pick(&self.times),
            a: pick(&self.a),
            v: pick(&self.v),
            p: pick(&self.p),
            s_mag: pick(&self.s_mag),
            phi: pick(&self.phi),
            mode: self.mode,
        }
    }

    /// CSV with header `t,a,v,P,S,phi` and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 110);
        out.push_str("t,a,v,P,S,phi\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                self.times[i], self.a[i], self.v[i], self.p[i], self.s_mag[i], self.phi[i]
            );
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv); `#` comment lines are skipped.
    pub fn from_csv(text: &str, mode: SimMode) -> Result<Self> {
        let mut traj = Self::with_capacity(0, mode);
        let mut header_seen = false;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "t,a,v,P,S,phi" {
                    return Err(Error::invalid("trajectory", format!("unexpected header `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let vals = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::invalid("trajectory", format!("line {}: {e}", n + 1)))?;
            if vals.len() != 6 {
                return Err(Error::invalid("trajectory", format!("line {} needs 6 columns", n + 1)));
            }
            traj.push(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]);
        }
        if traj.is_empty() {
            return Err(Error::invalid("trajectory", "no samples"));
        }
        Ok(traj)
    }
}

/// Tabulated ground-state energy, pressure and magnetization on a uniform
/// (a, φ) grid, with cubic Hermite interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySurface {
    a_grid: Vec<f64>,
    phi_grid: Vec<f64>,
    energy: Table,
    pressure: Table,
    magnetization: Option<Table>,
}

/// Node values plus finite-difference slopes used by the Hermite patches.
/// Storage is row-major with a as the slow index.
#[derive(Debug, Clone, PartialEq)]
struct Table {
    f: Vec<f64>,
    fa: Vec<f64>,
    fp: Vec<f64>,
    fap: Vec<f64>,
}

fn slopes(values: &[f64], n: usize, stride: usize, offset: usize, h: f64, out: &mut [f64]) {
    let at = |i: usize| values[offset + i * stride];
    for i in 0..n {
        let d = if n < 3 {
            (at(n - 1) - at(0)) / (h * (n - 1) as f64)
        } else if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        };
        out[offset + i * stride] = d;
    }
}

impl Table {
    fn new(f: Vec<f64>, na: usize, np: usize, ha: f64, hp: f64) -> Self {
        let mut fa = vec![0.0; f.len()];
        let mut fp = vec![0.0; f.len()];
        let mut fap = vec![0.0; f.len()];
        for j in 0..np {
            slopes(&f, na, np, j, ha, &mut fa);
        }
        for i in 0..na {
            slopes(&f, np, 1, i * np, hp, &mut fp);
            slopes(&fa, np, 1, i * np, hp, &mut fap);
        }
        Self { f, fa, fp, fap }
    }
}

/// Hermite basis values (H0, H1, G0, G1) at u ∈ [0, 1].
#[inline]
fn hermite(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        2.0 * u3 - 3.0 * u2 + 1.0,
        -2.0 * u3 + 3.0 * u2,
        u3 - 2.0 * u2 + u,
        u3 - u2,
    ]
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    wa: [f64; 4],
    wp: [f64; 4],
}

impl StationarySurface {
    pub fn new(
        a_grid: Vec<f64>,
        phi_grid: Vec<f64>,
        energy: Vec<f64>,
        pressure: Vec<f64>,
        magnetization: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (na, np) = (a_grid.len(), phi_grid.len());
        if na < 2 || np < 2 {
            return Err(Error::invalid("surface", "each grid needs at least 2 nodes"));
        }
        for (name, g) in [("a_grid", &a_grid), ("phi_grid", &phi_grid)] {
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(name, "must be strictly increasing"));
            }
            let h = (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64;
            if g
                .iter()
                .enumerate()
                .any(|(i, &x)| (x - (g[0] + i as f64 * h)).abs() > 1e-9 * h.max(1.0))
            {
                return Err(Error::invalid(name, "must be uniformly spaced"));
            }
        }
        let expected = na * np;
        for (name, t) in [("energy", &energy), ("pressure", &pressure)] {
            if t.len() != expected {
                return Err(Error::invalid(
                    name,
                    format!("table has {} values, grids need {expected}", t.len()),
                ));
            }
        }
        if let Some(m) = &magnetization {
            if m.len() != expected {
                return Err(Error::invalid("magnetization", "table size mismatch"));
            }
        }
        if pressure.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("pressure", "all tabulated pressures must be positive"));
        }
        let ha = (a_grid[na - 1] - a_grid[0]) / (na - 1) as f64;
        let hp = (phi_grid[np - 1] - phi_grid[0]) / (np - 1) as f64;
        Ok(Self {
            energy: Table::new(energy, na, np, ha, hp),
            pressure: Table::new(pressure, na, np, ha, hp),
            magnetization: magnetization.map(|m| Table::new(m, na, np, ha, hp)),
            a_grid,
            phi_grid,
        })
    }

    pub fn a_grid(&self) -> &[f64] {
        &self.a_grid
    }

    pub fn phi_grid(&self) -> &[f64] {
        &self.phi_grid
    }

    pub fn energy_table(&self) -> &[f64] {
        &self.energy.f
    }

    pub fn pressure_table(&self) -> &[f64] {
        &self.pressure.f
    }

    pub fn magnetization_table(&self) -> Option<&[f64]> {
        self.magnetization.as_ref().map(|t| t.f.as_slice())
    }

    pub fn a_range(&self) -> (f64, f64) {
        (self.a_grid[0], self.a_grid[self.a_grid.len() - 1])
    }

    pub fn phi_range(&self) -> (f64, f64) {
        (self.phi_grid[0], self.phi_grid[self.phi_grid.len() - 1])
    }

    fn out_of_range(&self, a: f64, phi: f64) -> Error {
        let (a_min, a_max) = self.a_range();
        let (phi_min, phi_max) = self.phi_range();
        Error::OutOfSurface {
            a,
            phi,
            a_min,
            a_max,
            phi_min,
            phi_max,
        }
    }

    fn locate(grid: &[f64], x: f64) -> Option<(usize, f64)> {
        let n = grid.len();
        let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let s = (x - grid[0]) / h;
        let tol = 1e-12;
        if !(s >= -tol && s <= (n - 1) as f64 + tol) {
            return None;
        }
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        let mut u = (x - grid[i]) / h;
        // snap queries landing on a node so node values come back exactly
        if u.abs() < 1e-14 {
            u = 0.0;
        } else if (u - 1.0).abs() < 1e-14 {
            u = 1.0;
        }
        Some((i, u))
    }

    fn cell(&self, a: f64, phi: f64) -> Result<Cell> {
        let (i, ua) = Self::locate(&self.a_grid, a).ok_or_else(|| self.out_of_range(a, phi))?;
        let (j, up) = Self::locate(&self.phi_grid, phi).ok_or_else(|| self.out_of_range(a, phi))?;
        Ok(Cell {
            i,
            j,
            wa: hermite(ua),
            wp: hermite(up),
        })
    }

    fn eval(&self, t: &Table, c: &Cell) -> f64 {
        let np = self.phi_grid.len();
        let ha = self.a_grid[1] - self.a_grid[0];
        let hp = self.phi_grid[1] - self.phi_grid[0];
        let mut acc = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                let k = (c.i + di) * np + c.j + dj;
                let (ha_w, hg_w) = (c.wa[di], c.wa[2 + di]);
                let (pa_w, pg_w) = (c.wp[dj], c.wp[2 + dj]);
                acc += ha_w * pa_w * t.f[k]
                    + ha * hg_w * pa_w * t.fa[k]
                    + hp * ha_w * pg_w * t.fp[k]
                    + ha * hp * hg_w * pg_w * t.fap[k];
            }
        }
        acc
    }

    /// Interpolated (pressure, energy) at (a, φ).
    pub fn interpolate(&self, a: f64, phi: f64) -> Result<(f64, f64)> {
        let c = self.cell(a, phi)?;
        Ok((self.eval(&self.pressure, &c), self.eval(&self.energy, &c)))
    }

    pub fn pressure(&self, a: f64, phi: f64) -> Result<f64> {
        let c = self.cell(a, phi)?;
        Ok(self.eval(&self.pressure, &c))
    }

    pub fn energy(&self, a: f64, phi: f64) -> Result<f64> {
        let c = self.cell(a, phi)?;
        Ok(self.eval(&self.energy, &c))
    }

    /// Quasi-static magnetization, NaN when the table was not stored.
    pub fn magnetization(&self, a: f64, phi: f64) -> Result<f64> {
        let c = self.cell(a, phi)?;
        Ok(match &self.magnetization {
            Some(t) => self.eval(t, &c),
            None => f64::NAN,
        })
    }

    /// ∂E/∂φ by a centered difference of the interpolant.
    pub fn denergy_dphi(&self, a: f64, phi: f64) -> Result<f64> {
        let h = 1e-4 * (self.phi_grid[1] - self.phi_grid[0]).max(1e-3);
        let (lo, hi) = self.phi_range();
        let (p0, p1) = ((phi - h).max(lo), (phi + h).min(hi));
        if p1 <= p0 {
            return Err(self.out_of_range(a, phi));
        }
        Ok((self.energy(a, p1)? - self.energy(a, p0)?) / (p1 - p0))
    }

    /// Root of κ·a = P_st(a, φ) on the tabulated a-range, if bracketed.
    pub fn equilibrium(&self, phi: f64, spring_k: f64) -> Result<f64> {
        let f = |a: f64| -> Result<f64> { Ok(self.pressure(a, phi)? - spring_k * a) };
        let mut prev = (self.a_grid[0], f(self.a_grid[0])?);
        for &a in &self.a_grid[1..] {
            let cur = (a, f(a)?);
            if prev.1 == 0.0 {
                return Ok(prev.0);
            }
            if prev.1.signum() != cur.1.signum() {
                let (mut lo, mut hi) = (prev, cur);
                for _ in 0..200 {
                    let mid = 0.5 * (lo.0 + hi.0);
                    let fm = f(mid)?;
                    if fm.signum() == lo.1.signum() {
                        lo = (mid, fm);
                    } else {
                        hi = (mid, fm);
                    }
                    if hi.0 - lo.0 < 1e-13 {
                        break;
                    }
                }
                return Ok(0.5 * (lo.0 + hi.0));
            }
            prev = cur;
        }
        Err(Error::invalid(
            "surface",
            format!("no equilibrium of spring_k*a = P_st(a, {phi}) inside the tabulated a-range"),
        ))
    }

    /// Text format: a-grid line, φ-grid line, then n_a lines of n_φ
    /// energies and n_a lines of pressures, whitespace separated. A third
    /// block of n_a magnetization lines follows when available.
    pub fn to_text(&self) -> String {
        let np = self.phi_grid.len();
        let mut out = String::new();
        let line = |out: &mut String, vals: &[f64]| {
            let s: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&s.join(" "));
            out.push('\n');
        };
        line(&mut out, &self.a_grid);
        line(&mut out, &self.phi_grid);
        let mut tables = vec![&self.energy, &self.pressure];
        if let Some(m) = &self.magnetization {
            tables.push(m);
        }
        for t in tables {
            for row in t.f.chunks(np) {
                line(&mut out, row);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let vals = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::invalid("surface", format!("line {}: {e}", n + 1)))?;
            rows.push(vals);
        }
        if rows.len() < 2 {
            return Err(Error::invalid("surface", "missing grid lines"));
        }
        let a_grid = rows[0].clone();
        let phi_grid = rows[1].clone();
        let na = a_grid.len();
        let body = &rows[2..];
        if body.len() != 2 * na && body.len() != 3 * na {
            return Err(Error::invalid(
                "surface",
                format!("expected {} or {} table lines, found {}", 2 * na, 3 * na, body.len()),
            ));
        }
        if body.iter().any(|r| r.len() != phi_grid.len()) {
            return Err(Error::invalid("surface", "table row length differs from the phi grid"));
        }
        let block = |k: usize| body[k * na..(k + 1) * na].concat();
        let magnetization = (body.len() == 3 * na).then(|| block(2));
        Self::new(a_grid, phi_grid, block(0), block(1), magnetization)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub a_range: (f64, f64),
    pub phi_range: (f64, f64),
    pub na: usize,
    pub nphi: usize,
    pub tol: f64,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            a_range: (1.55, 1.90),
            phi_range: (-0.2 * PI, 0.7 * PI),
            na: 71,
            nphi: 46,
            tol: 1e-10,
        }
    }
}

impl SurfaceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.na < 8 {
            return Err(Error::invalid("na", "at least 8 a-nodes are required"));
        }
        if self.nphi < 8 {
            return Err(Error::invalid("nphi", "at least 8 phi-nodes are required"));
        }
        if !(self.a_range.1 > self.a_range.0 && self.a_range.0 > 0.0) {
            return Err(Error::invalid("a_range", "must be an increasing positive interval"));
        }
        if !(self.phi_range.1 > self.phi_range.0) {
            return Err(Error::invalid("phi_range", "must be an increasing interval"));
        }
        Ok(())
    }

    pub fn a_grid(&self) -> Vec<f64> {
        linspace(self.a_range, self.na)
    }

    pub fn phi_grid(&self) -> Vec<f64> {
        linspace(self.phi_range, self.nphi)
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect()
}

/// Representative of φ under the symmetries φ → −φ (complex conjugation)
/// and φ → π − φ (conjugation plus spin flip) of the stationary problem.
pub fn canonical_angle(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let r = phi.rem_euclid(2.0 * PI);
    let r = if r > PI { 2.0 * PI - r } else { r };
    if r > 0.5 * PI {
        PI - r
    } else {
        r
    }
}

/// Stationary energy, pressure and magnetization for every (a, φ) node.
/// Rows in a are solved in parallel; along φ each solve starts from the
/// previous ground state. Nodes related by [`canonical_angle`] share a solve.
pub fn build_surface(spec: &SurfaceSpec, params: &SystemParams) -> Result<StationarySurface> {
    spec.validate()?;
    params.validate()?;
    let a_grid = spec.a_grid();
    let phi_grid = spec.phi_grid();
    let grid = Grid::from_params(params);

    // distinct canonical angles, ascending, and each node's index into them
    let mut canon: Vec<f64> = Vec::new();
    let mut node_to_canon = Vec::with_capacity(phi_grid.len());
    for &phi in &phi_grid {
        let c = canonical_angle(phi);
        match canon.iter().position(|&x| (x - c).abs() < 1e-9) {
            Some(k) => node_to_canon.push(k),
            None => {
                canon.push(c);
                node_to_canon.push(canon.len() - 1);
            }
        }
    }
    let mut order: Vec<usize> = (0..canon.len()).collect();
    order.sort_by(|&x, &y| canon[x].total_cmp(&canon[y]));

    let opts = GroundStateOptions::with_tol(spec.tol);
    let rows = a_grid
        .par_iter()
        .map(|&a| -> Result<Vec<(f64, f64, f64)>> {
            let mut solved = vec![(0.0, 0.0, 0.0); canon.len()];
            let mut field = initial_guess(grid.clone(), a);
            for &k in &order {
                let gs = ground_state_from(field, a, canon[k], params, &opts)?;
                let p = pressure_exact(&gs.field, a, params);
                solved[k] = (gs.energy, p, gs.field.magnetization());
                field = gs.field;
            }
            Ok(node_to_canon.iter().map(|&k| solved[k]).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut energy = Vec::with_capacity(a_grid.len() * phi_grid.len());
    let mut pressure = Vec::with_capacity(energy.capacity());
    let mut magnetization = Vec::with_capacity(energy.capacity());
    for (row, &a) in rows.iter().zip(&a_grid) {
        for (&(e, p, s), &phi) in row.iter().zip(&phi_grid) {
            energy.push(e);
            pressure.push(p);
            // S changes sign under φ → π − φ (spin flip) but not under φ → −φ
            let flipped = phi.cos() * canonical_angle(phi).cos() < 0.0;
            magnetization.push(if flipped { -s } else { s });
            let _ = a;
        }
    }
    StationarySurface::new(a_grid, phi_grid, energy, pressure, Some(magnetization))
}

/// Condensate ground state and piston position at mechanical equilibrium.
#[derive(Debug, Clone)]
pub struct ExactStart {
    pub a: f64,
    pub phi: f64,
    pub field: SpinorField,
    pub pressure: f64,
    pub energy: f64,
}

/// Solve κ·a = P_st(a, φ) with ground-state solves (Illinois false position
/// on a bracket grown from [1.5, 2.0]).
pub fn exact_equilibrium(phi: f64, params: &SystemParams, tol: f64) -> Result<ExactStart> {
    params.validate()?;
    let grid = Grid::from_params(params);
    let opts = GroundStateOptions::with_tol(tol);
    let a_max = params.x_max - 4.0 * params.slope_s;
    let mut warm: Option<SpinorField> = None;
    let mut solve = |a: f64| -> Result<(f64, ExactStart)> {
        let init = warm.take().unwrap_or_else(|| initial_guess(grid.clone(), a));
        let gs = ground_state_from(init, a, phi, params, &opts)?;
        let p = pressure_exact(&gs.field, a, params);
        warm = Some(gs.field.clone());
        Ok((
            p - params.spring_k * a,
            ExactStart {
                a,
                phi,
                field: gs.field,
                pressure: p,
                energy: gs.energy,
            },
        ))
    };

    let (mut lo, mut hi) = (1.5, 2.0);
    let mut f_lo = solve(lo)?;
    let mut f_hi = solve(hi)?;
    let mut guard = 0;
    while f_lo.0.signum() == f_hi.0.signum() {
        guard += 1;
        if guard > 20 {
            return Err(Error::invalid("a", "could not bracket the piston equilibrium"));
        }
        if f_lo.0 < 0.0 {
            // pressure too weak even at lo: move left
            hi = lo;
            f_hi = f_lo;
            lo *= 0.8;
            f_lo = solve(lo)?;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi = (hi * 1.25).min(a_max);
            f_hi = solve(hi)?;
        }
    }
    let mut side = 0;
    for _ in 0..100 {
        let a = (lo * f_hi.0 - hi * f_lo.0) / (f_hi.0 - f_lo.0);
        let mid = solve(a)?;
        if mid.0 == 0.0 || (hi - lo) < tol.max(1e-12) {
            return Ok(mid.1);
        }
        if mid.0.signum() == f_lo.0.signum() {
            lo = a;
            f_lo = mid;
            if side == -1 {
                f_hi.0 *= 0.5;
            }
            side = -1;
        } else {
            hi = a;
            f_hi = mid;
            if side == 1 {
                f_lo.0 *= 0.5;
            }
            side = 1;
        }
        if (hi - lo).abs() < 1e-7 {
            let last = if f_lo.0.abs() < f_hi.0.abs() { f_lo } else { f_hi };
            return Ok(last.1);
        }
    }
    Err(Error::invalid("a", "piston equilibrium iteration did not converge"))
}

fn check_piston(a: f64, t: f64, params: &SystemParams) -> Result<()> {
    if a.is_finite() && a > 4.0 * params.slope_s && a < params.x_max - 4.0 * params.slope_s {
        Ok(())
    } else {
        Err(Error::PistonEscaped { a, time: t })
    }
}

/// Co-simulation of piston and condensate starting from the mechanical
/// equilibrium at φ(0).
pub fn simulate_exact(schedule: &ControlSchedule, params: &SystemParams) -> Result<PistonTrajectory> {
    let start = exact_equilibrium(schedule.phi(0.0), params, 1e-10)?;
    simulate_exact_from(schedule, &start, params)
}

/// Velocity-Verlet for the piston interleaved with one Strang step of the
/// condensate per time step. The condensate sees the piston frozen at the
/// step midpoint; the force is refreshed from the new field after each step.
pub fn simulate_exact_from(
    schedule: &ControlSchedule,
    start: &ExactStart,
    params: &SystemParams,
) -> Result<PistonTrajectory> {
    simulate_exact_observed(schedule, start, params, |_, _| {})
}

/// As [`simulate_exact_from`], calling `observe(step, evolver)` after every
/// step.
pub fn simulate_exact_observed(
    schedule: &ControlSchedule,
    start: &ExactStart,
    params: &SystemParams,
    mut observe: impl FnMut(usize, &Evolver),
) -> Result<PistonTrajectory> {
    let dt = params.dt_real;
    let steps = (schedule.t_f() / dt).round() as usize;
    let mu = params.mass_ratio;
    let k = params.spring_k;

    let mut evolver = Evolver::new(start.field.clone(), params);
    let mut probe = PressureProbe::new(start.field.grid().clone(), params);
    let mut a = start.a;
    let mut v = 0.0;
    let mut p = probe.pressure(evolver.field(), a);
    let mut traj = PistonTrajectory::with_capacity(steps + 1, SimMode::Exact);
    traj.push(0.0, a, v, p, evolver.field().magnetization(), schedule.phi(0.0));

    for n in 0..steps {
        let t = n as f64 * dt;
        let v_half = v + 0.5 * dt * (p - k * a) / mu;
        let a_new = a + dt * v_half;
        check_piston(a_new, t + dt, params)?;
        evolver.step_real(dt, 0.5 * (a + a_new), schedule.phi(t + 0.5 * dt))?;
        a = a_new;
        p = probe.pressure(evolver.field(), a);
        v = v_half + 0.5 * dt * (p - k * a) / mu;
        let t1 = (n + 1) as f64 * dt;
        traj.push(t1, a, v, p, evolver.field().magnetization(), schedule.phi(t1));
        observe(n + 1, &evolver);
    }
    Ok(traj)
}

/// Piston ODE with the condensate replaced by the interpolated stationary
/// pressure, integrated with classical RK4 at the real-time step. Starts
/// from the surrogate equilibrium at φ(0) with zero velocity.
pub fn simulate_surrogate(
    schedule: &ControlSchedule,
    surface: &StationarySurface,
    params: &SystemParams,
) -> Result<PistonTrajectory> {
    let a0 = surface.equilibrium(schedule.phi(0.0), params.spring_k)?;
    let mut traj = PistonTrajectory::with_capacity(
        (schedule.t_f() / params.dt_real).round() as usize + 1,
        SimMode::Surrogate,
    );
    let mut record = |t: f64, a: f64, v: f64| -> Result<()> {
        let phi = schedule.phi(t);
        traj.push(
            t,
            a,
            v,
            surface.pressure(a, phi)?,
            surface.magnetization(a, phi)?,
            phi,
        );
        Ok(())
    };
    integrate_surrogate(schedule, surface, params, a0, &mut record)?;
    Ok(traj)
}

/// Final (a, v) of the surrogate run without storing the trajectory.
pub fn surrogate_final_state(
    schedule: &ControlSchedule,
    surface: &StationarySurface,
    params: &SystemParams,
) -> Result<(f64, f64)> {
    let a0 = surface.equilibrium(schedule.phi(0.0), params.spring_k)?;
    integrate_surrogate(schedule, surface, params, a0, &mut |_, _, _| Ok(()))
}

fn integrate_surrogate(
    schedule: &ControlSchedule,
    surface: &StationarySurface,
    params: &SystemParams,
    a0: f64,
    record: &mut dyn FnMut(f64, f64, f64) -> Result<()>,
) -> Result<(f64, f64)> {
    let dt = params.dt_real;
    let steps = (schedule.t_f() / dt).round() as usize;
    let mu = params.mass_ratio;
    let k = params.spring_k;
    let accel = |t: f64, a: f64| -> Result<f64> {
        Ok((surface.pressure(a, schedule.phi(t))? - k * a) / mu)
    };

    let (mut a, mut v) = (a0, 0.0);
    record(0.0, a, v)?;
    for n in 0..steps {
        let t = n as f64 * dt;
        let k1a = v;
        let k1v = accel(t, a)?;
        let k2a = v + 0.5 * dt * k1v;
        let k2v = accel(t + 0.5 * dt, a + 0.5 * dt * k1a)?;
        let k3a = v + 0.5 * dt * k2v;
        let k3v = accel(t + 0.5 * dt, a + 0.5 * dt * k2a)?;
        let k4a = v + dt * k3v;
        let k4v = accel(t + dt, a + dt * k3a)?;
        a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        record((n + 1) as f64 * dt, a, v)?;
    }
    Ok((a, v))
}
