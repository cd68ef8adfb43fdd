//! Command-line dispatch: configuration ingestion, analyses, and artifact
//! emission (CSV, JSON, SVG).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{
    extract_profile, track_front, LineDomain, SimState, Simulator, Trajectory,
};
use crate::eigen::{assemble, lambda_curve, principal_eigen, Direction};
use crate::error::{Error, Result};
use crate::grid::PeriodicField;
use crate::habitat::{
    load_config, BoundaryKind, Config, FieldSpec, GridSpec, HabitatSpec, KernelSpec, KernelsSpec,
    Problem, RunSpec,
};
use crate::speeds::{
    bracket_speeds, check_hypotheses, spreading_speed, ModelContext, SpeedReport,
};
use crate::steady::{scalar_steady_state, SteadyOutcome};
use crate::svg::{render_svg, PlotSpec, Series};

#[derive(Parser, Debug)]
#[command(name = "idefront", version, about = "Periodic-habitat invasion-front toolkit")]
pub struct Cli {
    /// Emit machine-readable JSON instead of human-oriented tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a config, enforce every model invariant, and print a summary.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Principal eigenvalue of a weighted growth operator.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        /// Growth multiplier to use.
        #[arg(long, value_enum, default_value_t = Multiplier::R1)]
        m: Multiplier,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Sample the curve `mu,lambda,log_lambda_over_mu` over `a:b:k`.
        #[arg(long)]
        curve: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semi-trivial steady state of one species alone.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        species: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear spreading speed from the eigenvalue quotient.
    Speed {
        #[arg(long)]
        config: PathBuf,
        /// Use the linearization against the resident state instead of the
        /// raw growth rate.
        #[arg(long)]
        linearized: bool,
        #[arg(long)]
        leftward: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the full hypothesis battery with margins.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Bracket the recursion speeds by bisection over the shift.
    Bracket {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cmin: f64,
        #[arg(long)]
        cmax: f64,
        /// Truncated recursion domain halfwidth, in habitat periods.
        #[arg(long, default_value_t = 10)]
        halfwidth: usize,
    },
    /// Forward simulation with snapshots and front tracking.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        snapshot: Option<usize>,
        #[arg(long, default_value = "sim_out")]
        out: PathBuf,
    },
    /// Traveling-wave profile in the frame moving at speed c.
    Profile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "profile_out")]
        out: PathBuf,
    },
    /// Run a built-in patchy-habitat experiment preset.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplier {
    R1,
    R2,
    /// `r1 / (1 + b1 a1 q*)`, species 1 linearized against the resident.
    Linearized1,
    /// `r2 / (1 + b2 q*)`, the resident linearization.
    Linearized2,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
}

/// Output directory with a manifest recording how to re-run.
struct OutDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path)?;
        Ok(OutDir { path: path.to_path_buf(), outputs: Vec::new() })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path.join(name)
    }

    fn finish(mut self, config: &Config) -> Result<()> {
        #[derive(Serialize)]
        struct RunManifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: Vec<String>,
            timestamp_unix: u64,
            config: &'a Config,
            outputs: Vec<String>,
            tolerances: BTreeMap<&'static str, f64>,
        }
        let tolerances = BTreeMap::from([
            ("power_iteration_tol", crate::eigen::POWER_TOL),
            ("eigen_residual_tol", crate::eigen::RESIDUAL_TOL),
            ("fixed_point_tol", crate::steady::FIXED_POINT_TOL),
            ("speed_mu_tol", crate::speeds::SPEED_MU_TOL),
            ("marginal_band", crate::speeds::MARGINAL_BAND),
            ("bracket_width", crate::speeds::BRACKET_WIDTH),
            ("beta_edge_rel", crate::speeds::BETA_EDGE_REL),
            ("zero_edge_rel", crate::speeds::ZERO_EDGE_REL),
        ]);
        let manifest = RunManifest {
            tool: "idefront",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            outputs: std::mem::take(&mut self.outputs),
            tolerances,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Validation(format!("manifest serialization failed: {e}")))?;
        std::fs::write(self.path.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("JSON serialization failed: {e}")))
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { config } => cmd_validate(config, cli.json),
        Command::Eigen { config, m, mu, curve, out } => {
            cmd_eigen(config, *m, *mu, curve.as_deref(), out.as_deref(), cli.json)
        }
        Command::Steady { config, species, out } => {
            cmd_steady(config, *species, out.as_deref(), cli.json)
        }
        Command::Speed { config, linearized, leftward, out } => {
            cmd_speed(config, *linearized, *leftward, out.as_deref(), cli.json)
        }
        Command::Check { config } => cmd_check(config, cli.json),
        Command::Bracket { config, cmin, cmax, halfwidth } => {
            cmd_bracket(config, *cmin, *cmax, *halfwidth, cli.json)
        }
        Command::Simulate { config, steps, snapshot, out } => {
            cmd_simulate(config, *steps, *snapshot, out, cli.json)
        }
        Command::Profile { config, c, out } => cmd_profile(config, *c, out, cli.json),
        Command::Reproduce { figure, out } => cmd_reproduce(*figure, out.as_deref(), cli.json),
    }
}

fn field_summary(name: &str, f: &PeriodicField) -> String {
    if (f.max() - f.min()).abs() <= 1e-12 * f.max().abs().max(1.0) {
        format!("  {name:<3} = {}", f.max())
    } else {
        format!("  {name:<3} in [{}, {}]", f.min(), f.max())
    }
}

fn cmd_validate(config: &Path, json: bool) -> Result<()> {
    let problem = load_config(config)?;
    if json {
        println!("{}", to_json(&problem.config)?);
        return Ok(());
    }
    let g = problem.grid;
    println!("config OK: {}", config.display());
    println!("grid: L = {}, n = {} per period, {} periods", g.length, g.n, g.sim_periods);
    for (name, f) in [
        ("r1", &problem.habitat.r1),
        ("r2", &problem.habitat.r2),
        ("C1", &problem.habitat.c1),
        ("C2", &problem.habitat.c2),
        ("a1", &problem.habitat.a1),
        ("a2", &problem.habitat.a2),
    ] {
        println!("{}", field_summary(name, f));
    }
    println!("kernels: k1 = {:?}, k2 = {:?}", problem.k1, problem.k2);
    println!(
        "run: {} steps, threshold {}, initial `{}`, boundary {:?}",
        problem.run.steps, problem.run.threshold, problem.run.initial, problem.run.boundary
    );
    Ok(())
}

fn multiplier_field(
    problem: &Problem,
    which: Multiplier,
) -> Result<(PeriodicField, crate::kernel::Kernel)> {
    match which {
        Multiplier::R1 => Ok((problem.habitat.r1.clone(), problem.k1.clone())),
        Multiplier::R2 => Ok((problem.habitat.r2.clone(), problem.k2.clone())),
        Multiplier::Linearized1 | Multiplier::Linearized2 => {
            let ctx = context(problem)?;
            match which {
                Multiplier::Linearized1 => Ok((ctx.invasion_multiplier(), problem.k1.clone())),
                _ => Ok((ctx.resident_mult(), problem.k2.clone())),
            }
        }
    }
}

fn context(problem: &Problem) -> Result<ModelContext> {
    ModelContext::build(
        problem.habitat.clone(),
        problem.k1.clone(),
        problem.k2.clone(),
        problem.grid,
    )
}

fn cmd_eigen(
    config: &Path,
    which: Multiplier,
    mu: f64,
    curve: Option<&str>,
    out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let problem = load_config(config)?;
    let (m, kernel) = multiplier_field(&problem, which)?;
    let op = assemble(&m, &kernel, &problem.grid, mu, Direction::Rightward)?;
    let eig = principal_eigen(&op)?;
    if json {
        #[derive(Serialize)]
        struct EigenOut {
            mu: f64,
            lambda: f64,
            residual: f64,
            iterations: usize,
        }
        println!(
            "{}",
            to_json(&EigenOut {
                mu,
                lambda: eig.lambda,
                residual: eig.residual,
                iterations: eig.iterations
            })?
        );
    } else {
        println!("lambda({mu}) = {:.12}", eig.lambda);
        println!("residual = {:.3e} after {} iterations", eig.residual, eig.iterations);
    }
    if let Some(spec) = curve {
        let parts: Vec<&str> = spec.split(':').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Validation(format!("bad curve component `{s}`")))
        };
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "curve spec `{spec}` should be `mu0:mu1:samples`"
            )));
        }
        let (a, b) = (parse(parts[0])?, parse(parts[1])?);
        let k: usize = parts[2]
            .parse()
            .map_err(|_| Error::Validation(format!("bad sample count `{}`", parts[2])))?;
        let samples = lambda_curve(&m, &kernel, &problem.grid, a, b, k, Direction::Rightward)?;
        let mut dir = OutDir::create(out.unwrap_or(Path::new("eigen_out")))?;
        let mut csv = String::from("mu,lambda,log_lambda_over_mu\n");
        for s in &samples {
            let _ = writeln!(csv, "{},{},{}", s.mu, s.lambda, s.log_lambda_over_mu);
        }
        std::fs::write(dir.file("lambda_curve.csv"), csv)?;
        let best = samples
            .iter()
            .min_by(|a, b| a.log_lambda_over_mu.total_cmp(&b.log_lambda_over_mu))
            .map(|s| (s.mu, s.log_lambda_over_mu));
        let series = Series {
            label: "ln lambda / mu".into(),
            points: samples.iter().map(|s| (s.mu, s.log_lambda_over_mu)).collect(),
        };
        render_svg(
            &[series],
            &PlotSpec {
                title: "eigenvalue quotient".into(),
                x_label: "mu".into(),
                y_label: "ln lambda / mu".into(),
                marker: best,
            },
            &dir.file("lambda_curve.svg"),
        )?;
        dir.finish(&problem.config)?;
    }
    Ok(())
}

fn cmd_steady(config: &Path, species: u8, out: Option<&Path>, json: bool) -> Result<()> {
    let problem = load_config(config)?;
    let (r, b, k, cap) = match species {
        1 => (&problem.habitat.r1, problem.habitat.b1(), &problem.k1, &problem.habitat.c1),
        2 => (&problem.habitat.r2, problem.habitat.b2(), &problem.k2, &problem.habitat.c2),
        other => {
            return Err(Error::Validation(format!("species must be 1 or 2, got {other}")));
        }
    };
    let init = cap.map(|v| 0.5 * v);
    let outcome = scalar_steady_state(r, &b, k, &problem.grid, &init)?;
    let field = outcome.field(&problem.grid);
    if json {
        #[derive(Serialize)]
        struct SteadyOut<'a> {
            species: u8,
            lambda: f64,
            persistent: bool,
            values: &'a [f64],
        }
        println!(
            "{}",
            to_json(&SteadyOut {
                species,
                lambda: outcome.lambda0(),
                persistent: matches!(outcome, SteadyOutcome::Persistent(_)),
                values: &field.values,
            })?
        );
    } else {
        println!("lambda(k{species}, r{species}) = {:.12}", outcome.lambda0());
        match &outcome {
            SteadyOutcome::Persistent(s) => println!(
                "persistent steady state in [{}, {}] after {} iterations",
                s.field.min(),
                s.field.max(),
                s.iterations
            ),
            SteadyOutcome::Extinct { marginal, .. } => {
                println!("extinct (marginal: {marginal}); state is zero")
            }
        }
    }
    let mut dir = OutDir::create(out.unwrap_or(Path::new("steady_out")))?;
    let mut csv = String::from("x,value\n");
    for (i, v) in field.values.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", problem.grid.node(i), v);
    }
    std::fs::write(dir.file(&format!("steady_{species}.csv")), csv)?;
    dir.finish(&problem.config)?;
    Ok(())
}

fn cmd_speed(
    config: &Path,
    linearized: bool,
    leftward: bool,
    out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let problem = load_config(config)?;
    let direction = if leftward { Direction::Leftward } else { Direction::Rightward };
    let (m, kernel) = if linearized {
        let ctx = context(&problem)?;
        (ctx.invasion_multiplier(), problem.k1.clone())
    } else {
        (problem.habitat.r1.clone(), problem.k1.clone())
    };
    let report = spreading_speed(&m, &kernel, &problem.grid, direction)?;
    print_speed(&report, json);
    if let Some(out) = out {
        write_speed_artifacts(&report, out, &problem.config)?;
    }
    Ok(())
}

fn print_speed(report: &SpeedReport, json: bool) {
    if json {
        if let Ok(text) = to_json(report) {
            println!("{text}");
        }
    } else {
        println!("c = {:.8} at mu0 = {:.8} ({:?})", report.c, report.mu0, report.method);
    }
}

fn write_speed_artifacts(report: &SpeedReport, out: &Path, config: &Config) -> Result<()> {
    let mut dir = OutDir::create(out)?;
    std::fs::write(dir.file("speed.json"), to_json(report)? + "\n")?;
    let mut csv = String::from("mu,lambda,log_lambda_over_mu\n");
    for s in &report.curve {
        let _ = writeln!(csv, "{},{},{}", s.mu, s.lambda, s.log_lambda_over_mu);
    }
    std::fs::write(dir.file("speed_curve.csv"), csv)?;
    let series = Series {
        label: "ln lambda / mu".into(),
        points: report.curve.iter().map(|s| (s.mu, s.log_lambda_over_mu)).collect(),
    };
    render_svg(
        &[series],
        &PlotSpec {
            title: "speed objective".into(),
            x_label: "mu".into(),
            y_label: "ln lambda / mu".into(),
            marker: Some((report.mu0, report.c)),
        },
        &dir.file("speed_curve.svg"),
    )?;
    dir.finish(config)
}

fn cmd_check(config: &Path, json: bool) -> Result<()> {
    let problem = load_config(config)?;
    let ctx = context(&problem)?;
    let report = check_hypotheses(&ctx)?;
    if json {
        println!("{}", to_json(&report)?);
    } else {
        for check in &report.checks {
            println!(
                "{:<3} {:<9} margin {:+.6e}  {}",
                check.name,
                format!("{:?}", check.verdict).to_lowercase(),
                check.margin,
                check.detail
            );
        }
    }
    Ok(())
}

fn cmd_bracket(config: &Path, cmin: f64, cmax: f64, halfwidth: usize, json: bool) -> Result<()> {
    let problem = load_config(config)?;
    let ctx = context(&problem)?;
    let bracket = bracket_speeds(&ctx, cmin, cmax, halfwidth)?;
    if json {
        println!("{}", to_json(&bracket)?);
    } else {
        println!(
            "beta edge (slowest spreading) in [{:.4}, {:.4}]",
            bracket.beta_edge.0, bracket.beta_edge.1
        );
        println!(
            "zero edge (fastest spreading) in [{:.4}, {:.4}]",
            bracket.zero_edge.0, bracket.zero_edge.1
        );
    }
    Ok(())
}

fn load_initial(problem: &Problem, sim: &Simulator) -> Result<SimState> {
    match problem.run.initial.as_str() {
        "step" => Ok(sim.initial_step()),
        "periodic" => Ok(sim.initial_periodic()),
        path => load_initial_csv(Path::new(path), &sim.domain),
    }
}

/// Initial state from an `x,p,q` CSV, interpolated onto the domain nodes and
/// extended by its end values.
fn load_initial_csv(path: &Path, domain: &LineDomain) -> Result<SimState> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut qs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            fields.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: expected `x,p,q`", lineno + 1),
            })
        };
        xs.push(get(0)?);
        ps.push(get(1)?);
        qs.push(get(2)?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "initial state needs at least 2 rows".into(),
        });
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("initial-state x column must be increasing".into()));
    }
    let sample = |ys: &[f64], x: f64| -> f64 {
        match xs.partition_point(|&v| v < x) {
            0 => ys[0],
            i if i >= xs.len() => ys[ys.len() - 1],
            i => {
                let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                ys[i - 1] + t * (ys[i] - ys[i - 1])
            }
        }
    };
    let p = (0..domain.n).map(|j| sample(&ps, domain.node(j))).collect();
    let q = (0..domain.n).map(|j| sample(&qs, domain.node(j))).collect();
    Ok(SimState { p, q, step: 0 })
}

fn run_simulation(problem: &Problem) -> Result<(ModelContext, Simulator, Trajectory)> {
    let ctx = context(problem)?;
    let sim = Simulator::new(
        &problem.habitat,
        &problem.k1,
        &problem.k2,
        &problem.grid,
        &ctx.pstar,
        &ctx.qstar,
        problem.run.boundary,
    );
    let init = load_initial(problem, &sim)?;
    let traj = sim.simulate(init, problem.run.steps, problem.run.snapshot_every);
    Ok((ctx, sim, traj))
}

fn write_snapshots(
    dir: &mut OutDir,
    sim: &Simulator,
    traj: &Trajectory,
) -> Result<(Vec<Series>, Vec<Series>)> {
    let mut p_series = Vec::new();
    let mut q_series = Vec::new();
    for state in traj.snapshots() {
        let mut csv = String::from("x,p,q\n");
        for j in 0..sim.domain.n {
            let _ = writeln!(csv, "{},{},{}", sim.domain.node(j), state.p[j], state.q[j]);
        }
        std::fs::write(dir.file(&format!("snapshot_{}.csv", state.step)), csv)?;
        let xs: Vec<f64> = (0..sim.domain.n).map(|j| sim.domain.node(j)).collect();
        p_series.push(Series {
            label: format!("n = {}", state.step),
            points: xs.iter().cloned().zip(state.p.iter().cloned()).collect(),
        });
        q_series.push(Series {
            label: format!("n = {}", state.step),
            points: xs.iter().cloned().zip(state.q.iter().cloned()).collect(),
        });
    }
    Ok((p_series, q_series))
}

fn cmd_simulate(
    config: &Path,
    steps: Option<usize>,
    snapshot: Option<usize>,
    out: &Path,
    json: bool,
) -> Result<()> {
    let mut problem = load_config(config)?;
    if let Some(s) = steps {
        problem.run.steps = s;
        problem.config.run.steps = s;
    }
    if let Some(s) = snapshot {
        problem.run.snapshot_every = s.max(1);
        problem.config.run.snapshot_every = s.max(1);
    }
    let (_, sim, traj) = run_simulation(&problem)?;
    let mut dir = OutDir::create(out)?;
    let (p_series, q_series) = write_snapshots(&mut dir, &sim, &traj)?;
    render_svg(
        &p_series,
        &PlotSpec {
            title: "invader density".into(),
            x_label: "x".into(),
            y_label: "p".into(),
            marker: None,
        },
        &dir.file("p_snapshots.svg"),
    )?;
    render_svg(
        &q_series,
        &PlotSpec {
            title: "resident density".into(),
            x_label: "x".into(),
            y_label: "q".into(),
            marker: None,
        },
        &dir.file("q_snapshots.svg"),
    )?;
    let trace = track_front(&traj, &sim.domain, &problem.grid, problem.run.threshold)?;
    let mut csv = String::from("n,x_front\n");
    for (n, x) in &trace.records {
        let _ = writeln!(csv, "{n},{x}");
    }
    std::fs::write(dir.file("front.csv"), csv)?;
    std::fs::write(dir.file("speed.json"), to_json(&trace)? + "\n")?;
    if json {
        #[derive(Serialize)]
        struct SimOut<'a> {
            steps: usize,
            front_speed: f64,
            front_std_error: f64,
            out: &'a str,
        }
        println!(
            "{}",
            to_json(&SimOut {
                steps: problem.run.steps,
                front_speed: trace.speed,
                front_std_error: trace.std_error,
                out: &out.display().to_string(),
            })?
        );
    } else {
        println!(
            "{} steps; front speed {:.6} +/- {:.6}; artifacts in {}",
            problem.run.steps,
            trace.speed,
            trace.std_error,
            out.display()
        );
    }
    dir.finish(&problem.config)
}

fn cmd_profile(config: &Path, c: f64, out: &Path, json: bool) -> Result<()> {
    let problem = load_config(config)?;
    let (_, sim, traj) = run_simulation(&problem)?;
    let profile = extract_profile(&traj, &sim.domain, &problem.grid, c)?;
    let mut dir = OutDir::create(out)?;
    let h = problem.grid.spacing();
    let mut csv = String::from("xi,x_mod_L,U,V\n");
    for (i, &xi) in profile.xi.iter().enumerate() {
        for m in 0..problem.grid.n {
            let u = profile.u[i][m];
            if u.is_nan() {
                continue;
            }
            let _ = writeln!(csv, "{xi},{},{u},{}", m as f64 * h, profile.v[i][m]);
        }
    }
    std::fs::write(dir.file("profile.csv"), csv)?;
    if json {
        #[derive(Serialize)]
        struct ProfileOut {
            c: f64,
            monotonicity_defect: f64,
            period_defect: f64,
        }
        println!(
            "{}",
            to_json(&ProfileOut {
                c,
                monotonicity_defect: profile.monotonicity_defect,
                period_defect: profile.period_defect,
            })?
        );
    } else {
        println!(
            "profile at c = {c}: monotonicity defect {:.3e}, period defect {:.3e}",
            profile.monotonicity_defect, profile.period_defect
        );
    }
    dir.finish(&problem.config)
}

/// Patchy-habitat presets: shared growth and competition fields, kernels per
/// figure. The sources label the kernels of the first preset with a scale
/// "d" (1 and 0.1) without defining it; it is exposed here as the dispersal
/// scale of each species.
fn preset_config(figure: Figure) -> Config {
    let two = |patch1: f64, patch2: f64| FieldSpec::TwoPatch { patch1, patch2, breakpoint: 5.5 };
    // The first preset's short-range resident kernel (scale 0.1) needs a
    // finer grid than the default: at n = 64 the node rule inflates its mass
    // by almost 20 percent, which visibly slows the resident's collapse.
    let (k1, k2, n) = match figure {
        Figure::Fig1 => (
            KernelSpec { family: "laplace".into(), variance: None, scale: Some(1.0), path: None },
            KernelSpec { family: "laplace".into(), variance: None, scale: Some(0.1), path: None },
            256,
        ),
        Figure::Fig2 => (
            KernelSpec { family: "gaussian".into(), variance: Some(0.1), scale: None, path: None },
            KernelSpec { family: "laplace".into(), variance: None, scale: Some(0.5), path: None },
            64,
        ),
    };
    Config {
        grid: GridSpec { length: 10.0, n, sim_periods: 40 },
        habitat: HabitatSpec {
            r1: FieldSpec::Constant(std::f64::consts::E),
            r2: FieldSpec::Constant(std::f64::consts::E),
            c1: two(1.0, 0.5),
            c2: two(1.0, 0.5),
            a1: two(0.3, 0.4),
            a2: two(2.0, 1.5),
        },
        kernel: KernelsSpec { k1, k2 },
        run: RunSpec {
            steps: 8,
            threshold: 0.05,
            initial: "step".into(),
            boundary: BoundaryKind::Invasion,
            snapshot_every: 2,
        },
    }
}

fn cmd_reproduce(figure: Figure, out: Option<&Path>, json: bool) -> Result<()> {
    let default = match figure {
        Figure::Fig1 => "reproduce_fig1",
        Figure::Fig2 => "reproduce_fig2",
    };
    let out = out.unwrap_or(Path::new(default)).to_path_buf();
    let config = preset_config(figure);
    let problem = crate::habitat::build_problem(config, Path::new("."))?;
    let (ctx, sim, traj) = run_simulation(&problem)?;
    let mut dir = OutDir::create(&out)?;
    let (p_series, q_series) = write_snapshots(&mut dir, &sim, &traj)?;
    render_svg(
        &p_series,
        &PlotSpec {
            title: "invader density".into(),
            x_label: "x".into(),
            y_label: "p".into(),
            marker: None,
        },
        &dir.file("p_snapshots.svg"),
    )?;
    render_svg(
        &q_series,
        &PlotSpec {
            title: "resident density".into(),
            x_label: "x".into(),
            y_label: "q".into(),
            marker: None,
        },
        &dir.file("q_snapshots.svg"),
    )?;
    let report = check_hypotheses(&ctx)?;
    std::fs::write(dir.file("hypotheses.json"), to_json(&report)? + "\n")?;
    if json {
        println!("{}", to_json(&report)?);
    } else {
        println!("snapshots and hypothesis report written to {}", out.display());
        for check in &report.checks {
            println!(
                "{:<3} {:<9} margin {:+.6e}",
                check.name,
                format!("{:?}", check.verdict).to_lowercase(),
                check.margin
            );
        }
    }
    dir.finish(&problem.config)
}
