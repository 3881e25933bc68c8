//! Subcommand implementations. Every command writes one CSV whose first line
//! is a `#` metadata comment.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rfnse_core::analysis::{
    alpha_sweep, check_bracket, omega_sweep, parallel_map, preconditioned_spectrum, rho_sweep, write_sweep_csv,
    OperatorTag, SweepRow,
};
use rfnse_core::block::BlockSystem;
use rfnse_core::experiment::{run_method, Problem, RunRecord, BOOTSTRAP_TOL};
use rfnse_core::scheme::{
    bootstrap_first_level, diagonal_from_state, initial_condition, level_system, write_state_binary,
    write_state_csv, GridSpec, StateField, Stepper,
};
use rfnse_core::solvers::{omega_star, solve_block, tban_solve, PrecondKind, SolveOptions, SolveReport, TbanOptions};
use rfnse_core::stencil::FractionalOrder;
use thiserror::Error;

use crate::config::{ConfigError, Initial, Omega, RunConfig, SolverKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Bench,
    Conserve,
    Eig,
    OmegaSweep,
    RhoSweep,
    AlphaSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Bench => "bench",
            Self::Conserve => "conserve",
            Self::Eig => "eig",
            Self::OmegaSweep => "omega-sweep",
            Self::RhoSweep => "rho-sweep",
            Self::AlphaSweep => "alpha-sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] rfnse_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    /// 2 configuration, 3 solver failure, 4 resource guard, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use rfnse_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::InvalidOrder(_) | E::InvalidParameter { .. }) => 2,
            Self::Core(E::MemoryGuard { .. } | E::SizeGuard { .. }) => 4,
            Self::Core(_) | Self::NotConverged(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command, cfg: &RunConfig) -> Result<()> {
    let mut out = open_output(cfg.path("out").as_deref())?;
    writeln!(
        out,
        "# rfnse {VERSION} command={} config_sha256={} grid={}",
        command.name(),
        cfg.raw.hash(),
        cfg.grid.label()
    )?;
    let result = match command {
        Command::Solve => solve(cfg, &mut out),
        Command::Bench => bench(cfg, &mut out),
        Command::Conserve => conserve(cfg, &mut out),
        Command::Eig => eig(cfg, &mut out),
        Command::OmegaSweep => sweep(cfg, &mut out, "omegas"),
        Command::RhoSweep => sweep(cfg, &mut out, "rhos"),
        Command::AlphaSweep => sweep(cfg, &mut out, "alphas"),
    };
    out.flush()?;
    result
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout())),
    })
}

fn initial_state(cfg: &RunConfig, grid: &GridSpec) -> Result<StateField<f64>> {
    Ok(match cfg.initial {
        Initial::Standard => initial_condition(grid)?,
        Initial::Zero => StateField::zeros(grid.unknowns(), 0),
    })
}

/// Bootstrap from `u⁰` and the system for `u²`.
fn second_level(cfg: &RunConfig, problem: &Problem) -> Result<BlockSystem<f64>> {
    if cfg.initial == Initial::Standard {
        return Ok(problem.second_level_system()?);
    }
    let t = problem.grid.toeplitz::<f64>(problem.alpha)?;
    let u0 = initial_state(cfg, &problem.grid)?;
    let opts = SolveOptions {
        tol: BOOTSTRAP_TOL,
        ..SolveOptions::default()
    };
    let (u1, _, _) = bootstrap_first_level(&t, &u0, problem.rho, problem.grid.dt, &opts)?;
    Ok(level_system(&t, &u0, &u1, problem.rho, problem.grid.dt)?)
}

fn omega_for(omega: Omega, sys: &BlockSystem<f64>) -> f64 {
    match omega {
        Omega::Fixed(w) => w,
        Omega::Auto => omega_star(sys.diagonal().lambda_max()),
    }
}

fn solve_options(cfg: &RunConfig, omega: f64, default_tol: f64) -> SolveOptions {
    SolveOptions {
        tol: cfg.tol.unwrap_or(default_tol),
        max_iter: cfg.max_iter,
        omega,
        precond: cfg.precond,
        circulant: cfg.circulant,
        record_history: true,
        memory_budget: cfg.memory_budget,
    }
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn na<T: ToString>(v: Option<T>) -> String {
    v.map_or("NA".into(), |v| v.to_string())
}

/// `dim, M, unknowns, alpha, rho, dt, h, solver, method, omega, IT, relres,
/// wall_time, status`
fn solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let m = cfg.side()?;
    let problem = cfg.problem(m)?;
    let sys = second_level(cfg, &problem)?;
    let omega = omega_for(cfg.omega, &sys);
    let opts = solve_options(cfg, omega, 1e-8);
    let (x, rep, solver, method) = match cfg.solver {
        SolverKind::Gmres => {
            let (x, rep) = solve_block(&sys, &opts)?;
            (x, rep, "gmres", cfg.precond.label())
        }
        SolverKind::Tban => {
            let t = TbanOptions {
                tol: opts.tol,
                max_iter: opts.max_iter,
                omega,
                half_step: cfg.half_step,
                record_history: true,
            };
            let (x, rep) = tban_solve(&sys, &t)?;
            (x, rep, "tban", "tban")
        }
    };
    let g = &problem.grid;
    writeln!(out, "dim,M,unknowns,alpha,rho,dt,h,solver,method,omega,IT,relres,wall_time,status")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{solver},{method},{},{},{},{},{}",
        g.dim,
        g.m,
        g.unknowns(),
        cfg.alpha,
        cfg.rho,
        g.dt,
        g.h,
        omega,
        rep.iterations,
        sci(rep.final_relres),
        sci(rep.wall_time),
        rep.status.label()
    )?;
    if let Some(path) = cfg.path("history") {
        write_history(&rep, &path)?;
    }
    if let Some(path) = cfg.path("dump") {
        let state = StateField::new(x.lift(), 2)?;
        let mut w = BufWriter::new(File::create(&path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            write_state_binary(&state, g, problem.alpha, cfg.rho, &mut w)?;
        } else {
            write_state_csv(&state, &mut w)?;
        }
        w.flush()?;
    }
    if !rep.converged {
        return Err(CliError::NotConverged(format!(
            "{method} stopped after {} iterations at relative residual {:e}",
            rep.iterations, rep.final_relres
        )));
    }
    Ok(())
}

fn write_history(rep: &SolveReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,relres")?;
    for (k, r) in rep.residuals.iter().enumerate() {
        writeln!(w, "{k},{}", sci(*r))?;
    }
    w.flush()?;
    Ok(())
}

/// `[h,] M, unknowns, method, omega, IT, relres, wall_time, status`; the
/// `h` column appears when sizes are given as mesh widths.
/// Runs refused by the memory guard are rows with status `oom`.
fn bench(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let sizes = cfg.sizes()?;
    let methods = cfg.methods()?;
    let problems = sizes
        .iter()
        .map(|&(v, m)| cfg.problem(m).map(|p| (v, p)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let per_size = parallel_map(&problems, cfg.threads, |(v, p)| -> Result<Vec<(f64, usize, f64, RunRecord)>> {
        let sys = second_level(cfg, p)?;
        let omega = omega_for(cfg.omega, &sys);
        let opts = solve_options(cfg, omega, 1e-8);
        methods
            .iter()
            .map(|&k| Ok((*v, p.grid.m, omega, run_method(&sys, k, &opts)?)))
            .collect()
    });
    let by_h = cfg.size_label() == "h";
    writeln!(out, "{}M,unknowns,method,omega,IT,relres,wall_time,status", if by_h { "h," } else { "" })?;
    for rows in per_size {
        for (v, m, omega, r) in rows? {
            if by_h {
                write!(out, "{v},")?;
            }
            writeln!(
                out,
                "{m},{},{},{omega},{},{},{},{}",
                m.pow(cfg.dim as u32),
                r.method.label(),
                na(r.iterations),
                na(r.relres.map(sci)),
                sci(r.wall_time),
                r.status.label()
            )?;
        }
    }
    Ok(())
}

/// `n, t, Q, E, rel_err_Q, rel_err_E, IT`, errors relative to `n = 0`.
/// Default inner tolerance 1e-15 in 1D and 1e-13 in 2D.
/// `IT` counts the iterations of the solve that produced `u^{n+1}`.
fn conserve(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    if cfg.solver != SolverKind::Gmres {
        return Err(cfg.raw.error("solver", "conserve runs with solver = gmres").into());
    }
    let m = cfg.side()?;
    let grid = cfg.grid_spec(m)?;
    let alpha = FractionalOrder::new(cfg.alpha)?;
    let u0 = initial_state(cfg, &grid)?;
    let start_omega = match cfg.omega {
        Omega::Fixed(w) => w,
        Omega::Auto => omega_star(diagonal_from_state(&u0, cfg.rho, grid.dt)?.scaled(0.5).lambda_max()),
    };
    let dt = grid.dt;
    let n_steps = grid.n_steps;
    let default_tol = if grid.dim == 1 { 1e-15 } else { 1e-13 };
    let mut st = Stepper::new(grid, alpha, cfg.rho, u0, solve_options(cfg, start_omega, default_tol))?;
    let rel = |v: f64, r: f64| if r == 0.0 { (v - r).abs() } else { ((v - r) / r).abs() };
    let (q0, e0) = (st.mass(), st.energy()?);
    writeln!(out, "n,t,Q,E,rel_err_Q,rel_err_E,IT")?;
    writeln!(out, "0,0,{:.17e},{:.17e},{},{},NA", q0, e0, sci(0.0), sci(0.0))?;
    while st.level() < n_steps {
        if cfg.omega == Omega::Auto {
            let w = omega_star(st.next_system()?.diagonal().lambda_max());
            st.set_omega(w);
        }
        let rep = st.step()?;
        let n = st.level() - 1;
        let (q, e) = (st.mass(), st.energy()?);
        writeln!(
            out,
            "{n},{},{q:.17e},{e:.17e},{},{},{}",
            (n as f64 * dt * 1e12).round() / 1e12,
            sci(rel(q, q0)),
            sci(rel(e, e0)),
            rep.iterations
        )?;
    }
    Ok(())
}

/// Spectrum dump `re, im, operator` for `R` and `P⁻¹R`, or one bracket row
/// for `T1`, `T2`, `tauT1`, `tauT2`.
fn eig(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let tag = cfg.operator()?;
    let m = cfg.side()?;
    let problem = cfg.problem(m)?;
    let kind = match tag {
        OperatorTag::R => PrecondKind::None,
        OperatorTag::FInvR => PrecondKind::Exact,
        OperatorTag::FtauInvR => PrecondKind::Tau,
        OperatorTag::FcInvR => PrecondKind::Circulant,
        OperatorTag::T1 | OperatorTag::T2 | OperatorTag::TauT1 | OperatorTag::TauT2 => {
            let g = &problem.grid;
            let r = check_bracket(tag, m, problem.alpha, g.dt, g.a, g.b)?;
            writeln!(out, "operator,M,alpha,lower,upper,min_eig,max_eig,lower_margin,upper_margin,composed,holds")?;
            writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{}",
                tag.label(),
                r.m,
                cfg.alpha,
                r.lower,
                r.upper,
                r.min_eig,
                r.max_eig,
                sci(r.lower_margin()),
                sci(r.upper_margin()),
                r.composed,
                r.holds()
            )?;
            return Ok(());
        }
    };
    let sys = second_level(cfg, &problem)?;
    let omega = omega_for(cfg.omega, &sys);
    let s = preconditioned_spectrum(&sys, kind, omega, cfg.circulant, cfg.force_ritz()?)?;
    let c = s.cluster(num_complex::Complex64::new(1.0, 0.0));
    writeln!(
        out,
        "# size={} ritz={} omega={omega} radius_95={} radius_100={} re=[{},{}] im=[{},{}]",
        s.size,
        s.ritz,
        sci(c.radius_95),
        sci(c.radius_100),
        sci(c.re_min),
        sci(c.re_max),
        sci(c.im_min),
        sci(c.im_max)
    )?;
    s.write_csv(out)?;
    Ok(())
}

/// `omega|rho|alpha, method, IT, relres, wall_time, status`.
fn sweep(cfg: &RunConfig, out: &mut dyn Write, key: &str) -> Result<()> {
    if cfg.initial != Initial::Standard {
        return Err(cfg.raw.error("initial", "sweeps use the standard initial data").into());
    }
    let values = cfg.required_list(key)?;
    let problem = cfg.problem(cfg.side()?)?;
    let methods = cfg.methods()?;
    let opts = solve_options(cfg, 1.0, 1e-8);
    let rows = match (key, cfg.omega) {
        ("omegas", _) => omega_sweep(&problem, &values, &opts, cfg.threads)?,
        ("rhos", Omega::Fixed(w)) => rho_sweep(&problem, &values, &methods, &SolveOptions { omega: w, ..opts }, cfg.threads)?,
        ("rhos", Omega::Auto) => auto_sweep("rho", &values, &methods, &opts, cfg.threads, |rho| {
            Ok(Problem { rho, ..problem.clone() })
        })?,
        (_, Omega::Fixed(w)) => {
            alpha_sweep(&problem, &values, &methods, &SolveOptions { omega: w, ..opts }, cfg.threads)?
        }
        (_, Omega::Auto) => auto_sweep("alpha", &values, &methods, &opts, cfg.threads, |alpha| {
            Ok(Problem {
                alpha: FractionalOrder::new(alpha)?,
                ..problem.clone()
            })
        })?,
    };
    write_sweep_csv(&rows, out)?;
    Ok(())
}

/// A sweep in which every point uses `ω*` of its own system.
fn auto_sweep(
    parameter: &'static str,
    values: &[f64],
    methods: &[PrecondKind],
    opts: &SolveOptions,
    threads: usize,
    make: impl Fn(f64) -> rfnse_core::Result<Problem> + Sync,
) -> rfnse_core::Result<Vec<SweepRow>> {
    let per = parallel_map(values, threads, |&value| -> rfnse_core::Result<Vec<SweepRow>> {
        let sys = make(value)?.second_level_system()?;
        let o = SolveOptions {
            omega: omega_for(Omega::Auto, &sys),
            ..opts.clone()
        };
        methods
            .iter()
            .map(|&k| run_method(&sys, k, &o).map(|record| SweepRow { parameter, value, record }))
            .collect()
    });
    Ok(per.into_iter().collect::<rfnse_core::Result<Vec<_>>>()?.concat())
}
