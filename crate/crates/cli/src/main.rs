use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use rabi_piston::control::{
    optimize_stage1, optimize_stage2, speed_limit_scan, terminal_error, ControlSchedule,
    Stage1Options, Stage2Options, XI2_GOAL,
};
use rabi_piston::gpe::ground_state;
use rabi_piston::io::{
    field_csv, key_value_text, optimization_log_csv, optimization_result_text, work_ledger_text,
    write_with_header,
};
use rabi_piston::observables::{pressure_exact, pressure_stationary, work_report};
use rabi_piston::piston::{
    build_surface, exact_equilibrium, simulate_exact_from, simulate_surrogate, PistonTrajectory,
    SimMode, StationarySurface, SurfaceSpec,
};
use rabi_piston::trial::{trial_pressure_shift, TrialParams};
use rabi_piston::{Error, Result, SystemParams};

#[derive(Parser, Debug)]
#[command(name = "rabi-piston", version, about = "Piston driven by a Rabi-coupled two-component condensate")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Parameter file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Worker threads for surface builds and optimizer scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground state at a fixed piston position and Rabi angle.
    GroundState {
        #[arg(long)]
        a: f64,
        /// Angle in radians; a `pi` suffix multiplies by π (e.g. `0.5pi`).
        #[arg(long, default_value = "0", value_parser = parse_angle)]
        phi: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Tabulate the stationary energy and pressure over (a, φ).
    Surface {
        #[arg(long, default_value_t = 71)]
        na: usize,
        #[arg(long, default_value_t = 46)]
        nphi: usize,
        #[arg(long, default_value_t = 1.55)]
        a_min: f64,
        #[arg(long, default_value_t = 1.90)]
        a_max: f64,
        #[arg(long, default_value = "-0.2pi", value_parser = parse_angle)]
        phi_min: f64,
        #[arg(long, default_value = "0.7pi", value_parser = parse_angle)]
        phi_max: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run one schedule in exact or surrogate mode.
    Simulate {
        #[arg(long, value_enum, default_value_t = ScheduleArg::Reference)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 60.0)]
        tf: f64,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        /// Angle for the constant schedule.
        #[arg(long, value_parser = parse_angle)]
        phi: Option<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Target piston position; defaults to the equilibrium at φ = π/2.
        #[arg(long)]
        target: Option<f64>,
        /// Keep every n-th sample in the trajectory file.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Two-stage optimization of the quintic schedule.
    Optimize {
        #[arg(long, default_value_t = 60.0)]
        tf: f64,
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Best surrogate error against final time and the critical time.
    SpeedLimit {
        #[arg(long, default_value_t = 40.0)]
        tf_min: f64,
        #[arg(long, default_value_t = 70.0)]
        tf_max: f64,
        #[arg(long, default_value_t = 2.5)]
        tf_step: f64,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Rabi-induced pressure shift of the box-mode model against a.
    Trial {
        /// Comma-separated Rabi strengths.
        #[arg(long, default_value = "1,2,5", value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        a_min: f64,
        #[arg(long, default_value_t = 5.0)]
        a_max: f64,
        #[arg(long, default_value_t = 81)]
        na: usize,
        /// Also compute the shift from ground-state solves at φ = 0.
        #[arg(long)]
        numeric: bool,
    },
    /// Work decomposition of a saved exact trajectory.
    WorkReport {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScheduleArg {
    Reference,
    Quintic,
    Constant,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Surrogate,
}

fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, scale) = match t.strip_suffix("pi") {
        Some(rest) => (rest.trim_end_matches('*'), PI),
        None => (t, 1.0),
    };
    let v = match num {
        "" => 1.0,
        "-" => -1.0,
        n => n.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
    };
    Ok(v * scale)
}

struct Run {
    params: SystemParams,
    header: String,
    out: PathBuf,
}

impl Run {
    fn new(command: &str, common: &Common) -> Result<Self> {
        let mut params = match &common.config {
            Some(path) => SystemParams::load(path)?,
            None => SystemParams::default(),
        };
        for kv in &common.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid("--set", format!("`{kv}` is not KEY=VALUE")))?;
            params.set(k.trim(), v.trim())?;
        }
        params.validate()?;
        std::fs::create_dir_all(&common.out)
            .map_err(|e| Error::io(format!("creating {}", common.out.display()), e))?;

        let config = params.to_config_string();
        let digest = Sha256::digest(config.as_bytes());
        let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let mut header = format!(
            "rabi-piston {} {command}\nconfig: {}\nconfig_sha256: {hash}\noverrides: {}\ndeterministic: yes\n",
            env!("CARGO_PKG_VERSION"),
            common
                .config
                .as_ref()
                .map_or("(defaults)".to_string(), |p| p.display().to_string()),
            if common.set.is_empty() { "(none)".to_string() } else { common.set.join(" ") },
        );
        header.push_str(&config);
        Ok(Self {
            params,
            header,
            out: common.out.clone(),
        })
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        let path = self.out.join(name);
        write_with_header(&path, &self.header, body)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn surface(&self, path: Option<&Path>, needed_by: &str) -> Result<StationarySurface> {
        let path = path.ok_or_else(|| {
            Error::invalid("--surface", format!("{needed_by} needs a surface file (--surface)"))
        })?;
        StationarySurface::load(path)
    }

    fn target(&self, given: Option<f64>, surface: Option<&StationarySurface>) -> Result<f64> {
        match (given, surface) {
            (Some(t), _) => Ok(t),
            (None, Some(s)) => s.equilibrium(FRAC_PI_2, self.params.spring_k),
            (None, None) => Ok(exact_equilibrium(FRAC_PI_2, &self.params, 1e-10)?.a),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::invalid("--jobs", e.to_string()))?;
    }
    match cli.command {
        Command::GroundState { a, phi, tol } => {
            let r = Run::new("ground-state", &cli.common)?;
            let gs = ground_state(a, phi, &r.params, tol)?;
            let p = pressure_exact(&gs.field, a, &r.params);
            r.write("ground_state_field.csv", &field_csv(&gs.field))?;
            r.write(
                "ground_state.txt",
                &key_value_text(&[
                    ("a", a.to_string()),
                    ("phi", phi.to_string()),
                    ("energy", gs.energy.to_string()),
                    ("pressure", p.to_string()),
                    ("magnetization", gs.field.magnetization().to_string()),
                    ("iterations", gs.iterations.to_string()),
                    ("residual", gs.residual.to_string()),
                ]),
            )?;
            println!("energy = {}\npressure = {p}\nmagnetization = {}", gs.energy, gs.field.magnetization());
        }
        Command::Surface {
            na,
            nphi,
            a_min,
            a_max,
            phi_min,
            phi_max,
            tol,
        } => {
            let r = Run::new("surface", &cli.common)?;
            let spec = SurfaceSpec {
                a_range: (a_min, a_max),
                phi_range: (phi_min, phi_max),
                na,
                nphi,
                tol,
            };
            let surface = build_surface(&spec, &r.params)?;
            r.write("surface.txt", &surface.to_text())?;
        }
        Command::Simulate {
            schedule,
            tf,
            c1,
            c2,
            phi,
            mode,
            surface,
            target,
            stride,
        } => {
            let r = Run::new("simulate", &cli.common)?;
            let schedule = match schedule {
                ScheduleArg::Reference => ControlSchedule::reference(tf)?,
                ScheduleArg::Quintic => {
                    let (c1, c2) = c1.zip(c2).ok_or_else(|| {
                        Error::invalid("--c1/--c2", "the quintic schedule needs both --c1 and --c2")
                    })?;
                    ControlSchedule::quintic(tf, c1, c2)?
                }
                ScheduleArg::Constant => ControlSchedule::constant(
                    tf,
                    phi.ok_or_else(|| Error::invalid("--phi", "the constant schedule needs --phi"))?,
                )?,
            };
            let surface = match (mode, &surface) {
                (ModeArg::Surrogate, s) => Some(r.surface(s.as_deref(), "surrogate mode")?),
                (ModeArg::Exact, Some(p)) => Some(StationarySurface::load(p)?),
                (ModeArg::Exact, None) => None,
            };
            let a_target = r.target(target, surface.as_ref())?;
            let trajectory = match mode {
                ModeArg::Exact => {
                    let start = exact_equilibrium(schedule.phi(0.0), &r.params, 1e-10)?;
                    simulate_exact_from(&schedule, &start, &r.params)?
                }
                ModeArg::Surrogate => {
                    simulate_surrogate(&schedule, surface.as_ref().expect("checked"), &r.params)?
                }
            };
            let xi2 = terminal_error(&trajectory, a_target);
            let (a_f, v_f) = trajectory.final_state();
            r.write("trajectory.csv", &trajectory.subsample(stride).to_csv())?;
            r.write(
                "summary.txt",
                &key_value_text(&[
                    ("mode", trajectory.mode.as_str().to_string()),
                    ("schedule", schedule.describe()),
                    ("t_f", tf.to_string()),
                    ("a_initial", trajectory.a[0].to_string()),
                    ("a_final", a_f.to_string()),
                    ("v_final", v_f.to_string()),
                    ("a_target", a_target.to_string()),
                    ("xi2", xi2.to_string()),
                ]),
            )?;
            if let (SimMode::Exact, Some(s)) = (trajectory.mode, &surface) {
                r.write("work.txt", &work_ledger_text(&work_report(&trajectory, s)?))?;
            }
            println!("xi2 = {xi2}");
        }
        Command::Optimize { tf, surface, target } => {
            let r = Run::new("optimize", &cli.common)?;
            let surface = r.surface(surface.as_deref(), "optimize")?;
            let a_target = r.target(target, Some(&surface))?;
            let mut log = Vec::new();
            let s1 = optimize_stage1(tf, a_target, &surface, &r.params, &Stage1Options::default(), &mut log)?;
            r.write("stage1.txt", &optimization_result_text(&s1))?;
            println!("stage 1: c1 = {} c2 = {} xi2 = {}", s1.c1, s1.c2, s1.xi2);
            if s1.xi2 > XI2_GOAL {
                let notice = format!(
                    "stage 2 skipped: best surrogate xi2 = {} exceeds {XI2_GOAL} at t_f = {tf}",
                    s1.xi2
                );
                eprintln!("{notice}");
                r.write("stage2.txt", &key_value_text(&[("skipped", notice)]))?;
            } else {
                let start = exact_equilibrium(0.0, &r.params, 1e-10)?;
                let s2 = optimize_stage2(
                    (s1.c1, s1.c2),
                    tf,
                    a_target,
                    &start,
                    &r.params,
                    &Stage2Options::default(),
                    &mut log,
                )?;
                r.write("stage2.txt", &optimization_result_text(&s2))?;
                println!("stage 2: c1 = {} c2 = {} xi2 = {}", s2.c1, s2.c2, s2.xi2);
            }
            r.write("optimization_log.csv", &optimization_log_csv(&log))?;
        }
        Command::SpeedLimit {
            tf_min,
            tf_max,
            tf_step,
            resolution,
            surface,
            target,
        } => {
            let r = Run::new("speed-limit", &cli.common)?;
            if !(tf_step > 0.0 && tf_max >= tf_min && tf_min > 0.0) {
                return Err(Error::invalid("--tf-step", "need 0 < tf_min <= tf_max and tf_step > 0"));
            }
            let surface = r.surface(surface.as_deref(), "speed-limit")?;
            let a_target = r.target(target, Some(&surface))?;
            let n = ((tf_max - tf_min) / tf_step + 1e-9).floor() as usize;
            let tfs: Vec<f64> = (0..=n).map(|i| tf_min + i as f64 * tf_step).collect();
            let scan = speed_limit_scan(&tfs, a_target, &surface, &r.params, &Stage1Options::default(), resolution)?;
            let mut csv = String::from("t_f,xi2,c1,c2\n");
            for (t, x, c1, c2) in &scan.points {
                csv.push_str(&format!("{t},{x},{c1},{c2}\n"));
            }
            let critical = scan
                .critical_tf
                .map_or("none".to_string(), |t| t.to_string());
            r.write("speed_limit.csv", &csv)?;
            r.write("speed_limit.txt", &key_value_text(&[("critical_tf", critical.clone())]))?;
            println!("critical_tf = {critical}");
        }
        Command::Trial {
            deltas,
            a_min,
            a_max,
            na,
            numeric,
        } => {
            let r = Run::new("trial", &cli.common)?;
            if na < 2 || !(a_max > a_min && a_min > 0.0) {
                return Err(Error::invalid("--na", "need na >= 2 and 0 < a_min < a_max"));
            }
            let a_values: Vec<f64> = (0..na)
                .map(|i| a_min + (a_max - a_min) * i as f64 / (na - 1) as f64)
                .collect();
            let mut csv = String::from(if numeric { "a,delta,shift,numeric_shift\n" } else { "a,delta,shift\n" });
            let baseline: Vec<f64> = if numeric {
                use rayon::prelude::*;
                a_values
                    .par_iter()
                    .map(|&a| {
                        let p = SystemParams { delta: 0.0, ..r.params };
                        pressure_stationary(a, 0.0, &p, 1e-10).map(|(p, _)| p)
                    })
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            };
            for &d in &deltas {
                let shifted: Vec<f64> = if numeric {
                    use rayon::prelude::*;
                    a_values
                        .par_iter()
                        .map(|&a| {
                            let p = SystemParams { delta: d, ..r.params };
                            pressure_stationary(a, 0.0, &p, 1e-10).map(|(p, _)| p)
                        })
                        .collect::<Result<_>>()?
                } else {
                    Vec::new()
                };
                for (i, &a) in a_values.iter().enumerate() {
                    let shift = trial_pressure_shift(&TrialParams::new(r.params.g_s, d, a)?);
                    if numeric {
                        csv.push_str(&format!("{a},{d},{shift},{}\n", shifted[i] - baseline[i]));
                    } else {
                        csv.push_str(&format!("{a},{d},{shift}\n"));
                    }
                }
            }
            r.write("trial.csv", &csv)?;
        }
        Command::WorkReport { trajectory, surface } => {
            let r = Run::new("work-report", &cli.common)?;
            let surface = r.surface(surface.as_deref(), "work-report")?;
            let text = std::fs::read_to_string(&trajectory)
                .map_err(|e| Error::io(format!("reading {}", trajectory.display()), e))?;
            let traj = PistonTrajectory::from_csv(&text, SimMode::Exact)?;
            let ledger = work_report(&traj, &surface)?;
            r.write("work.txt", &work_ledger_text(&ledger))?;
            print!("{}", work_ledger_text(&ledger));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                1
            } else if e.is_io() {
                3
            } else {
                2
            })
        }
    }
}
