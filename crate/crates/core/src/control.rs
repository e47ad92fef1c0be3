//! Control schedules φ(t), the terminal error and the optimizers built on
//! the two piston simulators.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix6, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::piston::{
    simulate_exact_from, ExactStart, PistonTrajectory, StationarySurface,
};
use crate::units::SystemParams;

/// Position scale a₀ of the terminal error (ℓ).
pub const POSITION_SCALE: f64 = 0.1;
/// Velocity scale v₀ of the terminal error (ℓ/τ).
pub const VELOCITY_SCALE: f64 = 0.01;
/// Error level regarded as having reached the control goal.
pub const XI2_GOAL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// φ(t) = (3π/2)u² − πu³ with u = t/t_f.
    ReferenceCubic,
    /// Degree-5 polynomial through the four boundary conditions plus
    /// φ(t_f/3) = π·c1 and φ(2t_f/3) = π·c2.
    ConstrainedQuintic { c1: f64, c2: f64 },
    /// Fixed angle for the whole run.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSchedule {
    kind: ScheduleKind,
    t_f: f64,
    /// Coefficients in the normalized time u = t/t_f, lowest order first.
    coeffs: [f64; 6],
}

impl ControlSchedule {
    pub fn reference(t_f: f64) -> Result<Self> {
        check_tf(t_f)?;
        Ok(Self {
            kind: ScheduleKind::ReferenceCubic,
            t_f,
            coeffs: [0.0, 0.0, 1.5 * PI, -PI, 0.0, 0.0],
        })
    }

    pub fn quintic(t_f: f64, c1: f64, c2: f64) -> Result<Self> {
        check_tf(t_f)?;
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(Error::invalid("c1/c2", "must be finite"));
        }
        // rows: φ(0), φ'(0), φ(1), φ'(1), φ(1/3), φ(2/3) in u = t/t_f
        let value_row = |u: f64| [1.0, u, u * u, u.powi(3), u.powi(4), u.powi(5)];
        let slope_row = |u: f64| {
            [
                0.0,
                1.0,
                2.0 * u,
                3.0 * u * u,
                4.0 * u.powi(3),
                5.0 * u.powi(4),
            ]
        };
        let rows = [
            value_row(0.0),
            slope_row(0.0),
            value_row(1.0),
            slope_row(1.0),
            value_row(1.0 / 3.0),
            value_row(2.0 / 3.0),
        ];
        let m = Matrix6::from_fn(|i, j| rows[i][j]);
        let rhs = Vector6::new(0.0, 0.0, FRAC_PI_2, 0.0, PI * c1, PI * c2);
        let sol = m.lu().solve(&rhs).ok_or(Error::SingularSchedule)?;
        let mut coeffs = [0.0; 6];
        coeffs.copy_from_slice(sol.as_slice());
        Ok(Self {
            kind: ScheduleKind::ConstrainedQuintic { c1, c2 },
            t_f,
            coeffs,
        })
    }

    pub fn constant(t_f: f64, phi: f64) -> Result<Self> {
        check_tf(t_f)?;
        Ok(Self {
            kind: ScheduleKind::Constant(phi),
            t_f,
            coeffs: [phi, 0.0, 0.0, 0.0, 0.0, 0.0],
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// φ(t). Times outside [0, t_f] evaluate the same polynomial.
    pub fn phi(&self, t: f64) -> f64 {
        let u = t / self.t_f;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// dφ/dt.
    pub fn phi_rate(&self, t: f64) -> f64 {
        let u = t / self.t_f;
        let mut acc = 0.0;
        for n in (1..6).rev() {
            acc = acc * u + n as f64 * self.coeffs[n];
        }
        acc / self.t_f
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ScheduleKind::ReferenceCubic => "reference".to_string(),
            ScheduleKind::ConstrainedQuintic { c1, c2 } => format!("quintic c1={c1} c2={c2}"),
            ScheduleKind::Constant(phi) => format!("constant phi={phi}"),
        }
    }
}

fn check_tf(t_f: f64) -> Result<()> {
    if t_f > 0.0 && t_f.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t_f", "final time must be positive"))
    }
}

/// ξ² = ((a(t_f) − a_target)/a₀)² + (v(t_f)/v₀)² from the last sample.
pub fn terminal_error(trajectory: &PistonTrajectory, a_target: f64) -> f64 {
    let (a, v) = trajectory.final_state();
    xi2(a, v, a_target)
}

pub fn xi2(a_final: f64, v_final: f64, a_target: f64) -> f64 {
    ((a_final - a_target) / POSITION_SCALE).powi(2) + (v_final / VELOCITY_SCALE).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Surrogate = 1,
    Exact = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub c1: f64,
    pub c2: f64,
    pub xi2: f64,
    pub evaluations: usize,
    pub stage: Stage,
}

/// One scored candidate, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub stage: Stage,
    pub c1: f64,
    pub c2: f64,
    pub xi2: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Options {
    pub lo: f64,
    pub hi: f64,
    pub grid_step: f64,
    /// Simplex refinement stops once its diameter falls below this.
    pub simplex_tol: f64,
    pub max_simplex_iterations: usize,
}

impl Default for Stage1Options {
    fn default() -> Self {
        Self {
            lo: -0.1,
            hi: 0.6,
            grid_step: 0.025,
            simplex_tol: 1e-4,
            max_simplex_iterations: 500,
        }
    }
}

/// Surrogate ξ² for one candidate; excursions off the surface score +∞.
pub fn surrogate_xi2(
    t_f: f64,
    c1: f64,
    c2: f64,
    a_target: f64,
    surface: &StationarySurface,
    params: &SystemParams,
) -> f64 {
    let Ok(schedule) = ControlSchedule::quintic(t_f, c1, c2) else {
        return f64::INFINITY;
    };
    match crate::piston::surrogate_final_state(&schedule, surface, params) {
        Ok((a, v)) => xi2(a, v, a_target),
        Err(_) => f64::INFINITY,
    }
}

/// First optimization stage: coarse grid over (c1, c2) followed by a
/// Nelder–Mead refinement, scoring candidates with the surrogate model only.
pub fn optimize_stage1(
    t_f: f64,
    a_target: f64,
    surface: &StationarySurface,
    params: &SystemParams,
    opts: &Stage1Options,
    log: &mut Vec<LogEntry>,
) -> Result<OptimizationResult> {
    check_tf(t_f)?;
    let n = ((opts.hi - opts.lo) / opts.grid_step).round() as usize + 1;
    let nodes: Vec<f64> = (0..n).map(|i| opts.lo + i as f64 * opts.grid_step).collect();
    let candidates: Vec<(f64, f64)> = nodes
        .iter()
        .flat_map(|&c1| nodes.iter().map(move |&c2| (c1, c2)))
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(c1, c2)| surrogate_xi2(t_f, c1, c2, a_target, surface, params))
        .collect();
    let mut evaluations = 0;
    let mut best = (candidates[0], f64::INFINITY);
    for (&(c1, c2), &xi2) in candidates.iter().zip(&scores) {
        evaluations += 1;
        log.push(LogEntry {
            stage: Stage::Surrogate,
            c1,
            c2,
            xi2,
            evaluations,
        });
        if xi2 < best.1 {
            best = ((c1, c2), xi2);
        }
    }

    let mut objective = |p: [f64; 2]| {
        let xi2 = surrogate_xi2(t_f, p[0], p[1], a_target, surface, params);
        evaluations += 1;
        log.push(LogEntry {
            stage: Stage::Surrogate,
            c1: p[0],
            c2: p[1],
            xi2,
            evaluations,
        });
        xi2
    };
    let start = [best.0 .0, best.0 .1];
    let (point, value) = nelder_mead(
        &mut objective,
        start,
        best.1,
        opts.grid_step,
        opts.simplex_tol,
        opts.max_simplex_iterations,
    );
    let (c1, c2, xi2) = if value <= best.1 {
        (point[0], point[1], value)
    } else {
        (start[0], start[1], best.1)
    };
    Ok(OptimizationResult {
        c1,
        c2,
        xi2,
        evaluations,
        stage: Stage::Surrogate,
    })
}

/// Nelder–Mead in two dimensions with the standard coefficients.
/// Stops when the simplex diameter falls below `tol`.
fn nelder_mead(
    f: &mut impl FnMut([f64; 2]) -> f64,
    start: [f64; 2],
    start_value: f64,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        (start, start_value),
        ([start[0] + step, start[1]], 0.0),
        ([start[0], start[1] + step], 0.0),
    ];
    simplex[1].1 = f(simplex[1].0);
    simplex[2].1 = f(simplex[2].0);

    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = dist(simplex[0].0, simplex[1].0)
            .max(dist(simplex[0].0, simplex[2].0))
            .max(dist(simplex[1].0, simplex[2].0));
        if diameter < tol {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let worst = simplex[2];

        let reflected = lerp(centroid, worst.0, -1.0);
        let fr = f(reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(centroid, worst.0, -2.0);
            let fe = f(expanded);
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
            continue;
        }
        let contracted = if fr < worst.1 {
            lerp(centroid, reflected, 0.5)
        } else {
            lerp(centroid, worst.0, 0.5)
        };
        let fc = f(contracted);
        if fc < worst.1.min(fr) {
            simplex[2] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            vertex.0 = lerp(best, vertex.0, 0.5);
            vertex.1 = f(vertex.0);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Options {
    pub initial_step: f64,
    pub min_step: f64,
    pub goal: f64,
}

impl Default for Stage2Options {
    fn default() -> Self {
        Self {
            initial_step: 0.005,
            min_step: 0.001,
            goal: XI2_GOAL,
        }
    }
}

/// Second stage: neighbourhood descent on the exact ξ² around the stage-1
/// optimum. The 3×3 stencil at the current step is scored, the best point
/// becomes the incumbent, and the step halves whenever the incumbent is
/// already the best. Ties go to the candidate closest to `start`.
pub fn optimize_stage2(
    start: (f64, f64),
    t_f: f64,
    a_target: f64,
    init: &ExactStart,
    params: &SystemParams,
    opts: &Stage2Options,
    log: &mut Vec<LogEntry>,
) -> Result<OptimizationResult> {
    check_tf(t_f)?;
    stencil_descent(start, opts, log, |c1, c2| {
        exact_xi2(t_f, c1, c2, a_target, init, params)
    })
}

/// Stencil descent of [`optimize_stage2`] on an arbitrary objective.
pub fn stencil_descent(
    start: (f64, f64),
    opts: &Stage2Options,
    log: &mut Vec<LogEntry>,
    objective: impl Fn(f64, f64) -> Result<f64> + Sync,
) -> Result<OptimizationResult> {
    // candidates live on a lattice of 1e-6 so revisits hit the cache exactly
    let key = |c: f64| (c * 1e6).round() as i64;
    let snap = |c: f64| key(c) as f64 / 1e6;
    let mut cache: HashMap<(i64, i64), f64> = HashMap::new();
    let mut evaluations = 0;
    let start = (snap(start.0), snap(start.1));
    let mut incumbent = start;
    let mut step = opts.initial_step;
    let distance = |p: (f64, f64)| ((p.0 - start.0).powi(2) + (p.1 - start.1).powi(2)).sqrt();

    loop {
        let stencil: Vec<(f64, f64)> = (-1..=1)
            .flat_map(|i| (-1..=1).map(move |j| (i, j)))
            .map(|(i, j)| {
                (
                    snap(incumbent.0 + i as f64 * step),
                    snap(incumbent.1 + j as f64 * step),
                )
            })
            .collect();
        let fresh: Vec<(f64, f64)> = stencil
            .iter()
            .copied()
            .filter(|p| !cache.contains_key(&(key(p.0), key(p.1))))
            .collect();
        let scored: Vec<Result<f64>> = fresh
            .par_iter()
            .map(|&(c1, c2)| objective(c1, c2))
            .collect();
        for (&(c1, c2), xi2) in fresh.iter().zip(scored) {
            let xi2 = xi2?;
            evaluations += 1;
            cache.insert((key(c1), key(c2)), xi2);
            log.push(LogEntry {
                stage: Stage::Exact,
                c1,
                c2,
                xi2,
                evaluations,
            });
        }

        let score = |p: &(f64, f64)| cache[&(key(p.0), key(p.1))];
        let best = stencil
            .iter()
            .copied()
            .min_by(|a, b| {
                score(a)
                    .total_cmp(&score(b))
                    .then(distance(*a).total_cmp(&distance(*b)))
            })
            .expect("non-empty stencil");
        let best_xi2 = score(&best);
        let current = score(&incumbent);

        if current < opts.goal {
            break;
        }
        if best_xi2 < current {
            incumbent = best;
            if best_xi2 < opts.goal {
                break;
            }
        } else {
            step *= 0.5;
            if step < opts.min_step {
                break;
            }
        }
    }
    let xi2 = cache[&(key(incumbent.0), key(incumbent.1))];
    Ok(OptimizationResult {
        c1: incumbent.0,
        c2: incumbent.1,
        xi2,
        evaluations,
        stage: Stage::Exact,
    })
}

/// Exact-mode ξ² for one candidate.
pub fn exact_xi2(
    t_f: f64,
    c1: f64,
    c2: f64,
    a_target: f64,
    init: &ExactStart,
    params: &SystemParams,
) -> Result<f64> {
    let wrap = |e: Error| Error::Candidate {
        c1,
        c2,
        source: Box::new(e),
    };
    let schedule = ControlSchedule::quintic(t_f, c1, c2).map_err(wrap)?;
    let trajectory = simulate_exact_from(&schedule, init, params).map_err(wrap)?;
    Ok(terminal_error(&trajectory, a_target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLimitScan {
    /// (t_f, best surrogate ξ², c1, c2) for every final time evaluated,
    /// sorted by t_f.
    pub points: Vec<(f64, f64, f64, f64)>,
    /// Smallest final time reaching the goal, when one was bracketed.
    pub critical_tf: Option<f64>,
}

/// Stage-1 optimum over a list of final times, then bisection to 0.1τ on
/// the first failing/passing pair to locate the critical final time.
pub fn speed_limit_scan(
    t_f_values: &[f64],
    a_target: f64,
    surface: &StationarySurface,
    params: &SystemParams,
    opts: &Stage1Options,
    resolution: f64,
) -> Result<SpeedLimitScan> {
    if t_f_values.is_empty() {
        return Err(Error::invalid("t_f", "empty list of final times"));
    }
    let run = |t_f: f64| -> Result<(f64, f64, f64, f64)> {
        let r = optimize_stage1(t_f, a_target, surface, params, opts, &mut Vec::new())?;
        Ok((t_f, r.xi2, r.c1, r.c2))
    };
    let mut sorted = t_f_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut points = sorted
        .par_iter()
        .map(|&t| run(t))
        .collect::<Result<Vec<_>>>()?;

    let first_pass = points.iter().position(|p| p.1 < XI2_GOAL);
    let critical_tf = match first_pass {
        None => None,
        Some(0) => Some(points[0].0),
        Some(i) => {
            let (mut lo, mut hi) = (points[i - 1].0, points[i].0);
            while hi - lo > resolution {
                let mid = 0.5 * (lo + hi);
                let p = run(mid)?;
                if p.1 < XI2_GOAL {
                    hi = mid;
                } else {
                    lo = mid;
                }
                points.push(p);
            }
            Some(hi)
        }
    };
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpeedLimitScan {
        points,
        critical_tf,
    })
}
