//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by
//! indented detail lines, then a summary.
//!
//! `cargo test -p rfnse-core --test acceptance -- <filter>` runs only the
//! criteria whose key contains `<filter>`. The process exits with status 0
//! even when criteria fail, unless `RFNSE_ACCEPTANCE_STRICT=1` is set.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfnse_core::analysis::{
    alpha_sweep, check_bracket, omega_sweep, preconditioned_spectrum, rho_sweep, tban_omega_scan, OperatorTag,
    SweepRow,
};
use rfnse_core::block::BlockVector;
use rfnse_core::dense::DenseMatrix;
use rfnse_core::experiment::{run_method, side_for_h, Problem, RunRecord};
use rfnse_core::precond::{assemble_dense_f, CirculantPreconditioner, ExactPreconditioner, TauPreconditioner};
use rfnse_core::scheme::{initial_condition, GridSpec, StateField, Stepper};
use rfnse_core::solvers::{omega_star, sigma_bound, PrecondKind, SolveOptions};
use rfnse_core::stencil::FractionalOrder;
use rfnse_core::structured::{
    CirculantKind, CirculantOp, DiagonalBlock, FractionalToeplitz, TauOp, Toeplitz2Op, ToeplitzOp,
};
use rfnse_core::trig::SineTransformPlan;

type C64 = Complex<f64>;

struct Criterion {
    key: &'static str,
    title: &'static str,
    ok: bool,
    lines: Vec<String>,
}

impl Criterion {
    fn new(key: &'static str, title: &'static str) -> Self {
        Self {
            key,
            title,
            ok: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, cond: bool, msg: impl Into<String>) -> bool {
        self.ok &= cond;
        self.lines
            .push(format!("{} {}", if cond { "ok  " } else { "FAIL" }, msg.into()));
        cond
    }

    fn info(&mut self, msg: impl Into<String>) {
        self.lines.push(format!("info {}", msg.into()));
    }

    fn error(&mut self, e: impl std::fmt::Display) {
        self.check(false, format!("error: {e}"));
    }
}

fn within(got: usize, want: usize, tol: usize) -> bool {
    got.abs_diff(want) <= tol
}

fn within_pct(got: usize, want: usize, pct: f64) -> bool {
    (got as f64 - want as f64).abs() <= pct * want as f64
}

fn show(r: &RunRecord) -> String {
    match r.it() {
        Some(it) => format!("{it}"),
        None => format!("{}({})", r.status.label(), r.iterations.map_or("-".into(), |k| k.to_string())),
    }
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

// ---------------------------------------------------------------- 1D tables

fn table_1d(c: &mut Criterion) -> rfnse_core::Result<()> {
    let sizes = [6400usize, 12800, 25600, 51200, 102400];
    let mut tau_its: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    for &alpha in &[1.2, 1.4, 1.6, 1.8] {
        for &m in &sizes {
            let sys = Problem::table_1d(alpha, 2.0, m)?.second_level_system()?;
            let tau = run_method(&sys, PrecondKind::Tau, &opts())?;
            let key = ((alpha * 10.0f64).round() as u32, m);
            if let Some(it) = tau.it() {
                tau_its.insert(key, it);
            }
            let table_row = (alpha == 1.2 && m <= 25600) || (alpha == 1.8 && (m == 6400 || m == 25600));
            if !table_row {
                continue;
            }
            c.check(tau.it().is_some_and(|it| within(it, 6, 1)), format!("alpha={alpha} M={m}: tau-GMRES IT {} (6±1)", show(&tau)));
            let circ = run_method(&sys, PrecondKind::Circulant, &opts())?;
            let want_c = match (alpha == 1.2, m) {
                (true, _) => 8,
                (false, 6400) => 11,
                _ => 14,
            };
            c.check(
                circ.it().is_some_and(|it| within(it, want_c, 2)),
                format!("alpha={alpha} M={m}: C-GMRES IT {} ({want_c}±2)", show(&circ)),
            );
            if alpha == 1.2 {
                let want = match m {
                    6400 => 317,
                    12800 => 648,
                    _ => 1375,
                };
                let plain = run_method(&sys, PrecondKind::None, &opts())?;
                c.check(
                    plain.it().is_some_and(|it| within_pct(it, want, 0.10)),
                    format!("alpha={alpha} M={m}: GMRES IT {} ({want}±10%), {:.1}s", show(&plain), plain.wall_time),
                );
            }
        }
    }
    for &alpha in &[1.2, 1.4, 1.6, 1.8] {
        let a = (alpha * 10.0f64).round() as u32;
        let its: Vec<usize> = sizes.iter().filter_map(|&m| tau_its.get(&(a, m)).copied()).collect();
        let spread = its.iter().max().zip(its.iter().min()).map(|(x, y)| x - y);
        c.check(
            its.len() == sizes.len() && spread.is_some_and(|s| s <= 1),
            format!("alpha={alpha}: tau-GMRES IT over M=6400..102400 {its:?} (spread <= 1)"),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- 2D tables

/// Wall time of the fixed-size comparison, gathered while the tables run.
#[derive(Default)]
struct Timing {
    tau: Vec<f64>,
    circ: Vec<f64>,
    plain: Option<f64>,
}

fn table_2d(c: &mut Criterion, timing: &mut Timing) -> rfnse_core::Result<()> {
    let rows = [(1.2, [12usize, 11]), (1.4, [14, 15]), (1.6, [19, 22]), (1.8, [26, 34])];
    for (hi, h) in [1.0 / 32.0, 1.0 / 64.0].into_iter().enumerate() {
        let m = side_for_h(h)?;
        for &(alpha, want_c) in &rows {
            let sys = Problem::table_2d(alpha, 1.0, m)?.second_level_system()?;
            let tau = run_method(&sys, PrecondKind::Tau, &opts())?;
            let circ = run_method(&sys, PrecondKind::Circulant, &opts())?;
            let label = format!("h=1/{} (M={m}) alpha={alpha}", (1.0 / h).round());
            c.check(tau.it().is_some_and(|it| within(it, 6, 1)), format!("{label}: tau-GMRES IT {} (6±1)", show(&tau)));
            c.check(
                circ.it().is_some_and(|it| within(it, want_c[hi], 3)),
                format!("{label}: C-GMRES IT {} ({}±3)", show(&circ), want_c[hi]),
            );
            if hi == 0 && alpha == 1.2 {
                let plain = run_method(&sys, PrecondKind::None, &opts())?;
                c.check(
                    plain.it().is_some_and(|it| within_pct(it, 179, 0.10)),
                    format!("{label}: GMRES IT {} (179±10%)", show(&plain)),
                );
                timing.plain = Some(plain.wall_time);
                timing.tau.push(tau.wall_time);
                timing.circ.push(circ.wall_time);
                for _ in 0..2 {
                    timing.tau.push(run_method(&sys, PrecondKind::Tau, &opts())?.wall_time);
                    timing.circ.push(run_method(&sys, PrecondKind::Circulant, &opts())?.wall_time);
                }
            }
        }
    }
    Ok(())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

fn timing_order(c: &mut Criterion, t: &Timing) {
    let Some(plain) = t.plain else {
        c.check(false, "no timings recorded (2D table criterion did not run)");
        return;
    };
    if t.tau.is_empty() || t.circ.is_empty() {
        c.check(false, "no timings recorded");
        return;
    }
    let (tau, circ) = (median(&t.tau), median(&t.circ));
    c.check(
        tau <= circ && circ <= plain,
        format!("2D h=1/32 alpha=1.2: tau-GMRES {tau:.3}s <= C-GMRES {circ:.3}s <= GMRES {plain:.3}s (median of 3 for the preconditioned runs)"),
    );
}

// ---------------------------------------------------------------- TBAN theory

fn tban_theory(c: &mut Criterion) -> rfnse_core::Result<()> {
    let grid: Vec<f64> = (1..=40).map(|k| 0.1 * k as f64).collect();
    let step = 0.1;
    for &m in &[32usize, 64] {
        for &alpha in &[1.2, 1.5, 1.8] {
            for &(rho, gate_minimiser) in &[(2.0, true), (40.0, false)] {
                let sys = Problem::table_1d(alpha, rho, m)?.second_level_system()?;
                let lam = sys.diagonal().lambda_max();
                let ws = omega_star(lam);
                let label = format!("M={m} alpha={alpha} rho={rho} lambda={lam:.4} omega*={ws:.4}");
                let checks = tban_omega_scan(&sys, &[0.5, 1.0, ws, 2.0], 200, 50)?;
                let worst = checks
                    .iter()
                    .map(|p| p.rate - p.sigma)
                    .fold(f64::NEG_INFINITY, f64::max);
                let rates: Vec<String> = checks.iter().map(|p| format!("{:.3}:{:.5}/{:.5}", p.omega, p.rate, p.sigma)).collect();
                c.check(
                    worst <= 1e-8,
                    format!("{label}: rate <= sigma+1e-8 at omega in {{0.5,1,omega*,2}} [{}]", rates.join(" ")),
                );
                let scan = tban_omega_scan(&sys, &grid, 200, 50)?;
                let best = scan
                    .iter()
                    .min_by(|a, b| a.rate.total_cmp(&b.rate))
                    .expect("non-empty grid");
                let near = (best.omega - ws).abs() <= step + 1e-12;
                let msg = format!(
                    "{label}: grid minimiser omega={:.1} (rate {:.5}), |omega - omega*| = {:.3} (<= {step})",
                    best.omega,
                    best.rate,
                    (best.omega - ws).abs()
                );
                if gate_minimiser {
                    c.check(near, msg);
                } else {
                    c.info(format!("{msg} {}", if near { "holds" } else { "does not hold" }));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- brackets

fn brackets(c: &mut Criterion) -> rfnse_core::Result<()> {
    let tags = [OperatorTag::T1, OperatorTag::T2, OperatorTag::TauT1, OperatorTag::TauT2];
    let setups = [(0.04, -20.0, 20.0), (0.05, -5.0, 5.0)];
    let mut total = 0;
    let mut min_rel = f64::INFINITY;
    for k in 11..=19 {
        let alpha = FractionalOrder::new(k as f64 / 10.0)?;
        for &m in &[6usize, 8, 16, 32, 64] {
            for &(dt, a, b) in &setups {
                for &tag in &tags {
                    total += 1;
                    match check_bracket(tag, m, alpha, dt, a, b) {
                        Ok(r) => {
                            min_rel = min_rel.min(r.lower_margin() / r.lower).min(r.upper_margin() / r.upper);
                        }
                        Err(e) => {
                            c.check(false, format!("{} alpha={} M={m} dt={dt} [{a},{b}]: {e}", tag.label(), alpha.value()));
                        }
                    }
                }
            }
        }
    }
    c.check(
        c.ok,
        format!("{total} configurations (alpha 1.1..1.9, M in {{6,8,16,32,64}}, T1/T2/tau(T1)/tau(T2), two grids); smallest relative margin {min_rel:.3e}"),
    );
    Ok(())
}

// ---------------------------------------------------------------- circle containment

fn circle(c: &mut Criterion) -> rfnse_core::Result<()> {
    let problems = [
        ("1D M=64 rho=2", Problem::table_1d(1.5, 2.0, 64)?),
        ("1D M=512 rho=2", Problem::table_1d(1.5, 2.0, 512)?),
        ("1D M=128 rho=40", Problem::table_1d(1.8, 40.0, 128)?),
        ("2D M=16 rho=1", Problem::table_2d(1.5, 1.0, 16)?),
        ("2D M=24 rho=30", Problem::table_2d(1.2, 30.0, 24)?),
    ];
    for (label, p) in problems {
        let sys = p.second_level_system()?;
        let lam = sys.diagonal().lambda_max();
        for omega in [0.5, 1.0, omega_star(lam), 2.0] {
            let s = preconditioned_spectrum(&sys, PrecondKind::Exact, omega, CirculantKind::Optimal, false)?;
            let sigma = sigma_bound(omega, lam)?;
            let r = s.cluster(C64::new(1.0, 0.0)).radius_100;
            c.check(
                !s.ritz && r <= sigma + 1e-8,
                format!(
                    "{label} alpha={} n={} omega={omega:.4}: max|z-1| = {r:.6e} <= sigma = {sigma:.6e}{}",
                    p.alpha.value(),
                    s.size,
                    if s.ritz { " (Ritz, not full)" } else { "" }
                ),
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- clustering

fn clustering(c: &mut Criterion) -> rfnse_core::Result<()> {
    let one = C64::new(1.0, 0.0);
    for &alpha in &[1.1, 1.5, 1.9] {
        let mut tau_r = Vec::new();
        let mut tau_r95 = Vec::new();
        for &m in &[1600usize, 3200] {
            let sys = Problem::table_1d(alpha, 2.0, m)?.second_level_system()?;
            let tau = preconditioned_spectrum(&sys, PrecondKind::Tau, 1.0, CirculantKind::Optimal, true)?.cluster(one);
            let circ = preconditioned_spectrum(&sys, PrecondKind::Circulant, 1.0, CirculantKind::Optimal, true)?.cluster(one);
            let label = format!("alpha={alpha} M={m}");
            if m == 1600 {
                c.check(
                    tau.radius_100 < circ.radius_100,
                    format!(
                        "{label}: radius100 tau {:.4e} < C {:.4e} (radius95 {:.4e} / {:.4e})",
                        tau.radius_100, circ.radius_100, tau.radius_95, circ.radius_95
                    ),
                );
            } else {
                c.info(format!(
                    "{label}: radius100 tau {:.4e}, C {:.4e} (radius95 {:.4e} / {:.4e})",
                    tau.radius_100, circ.radius_100, tau.radius_95, circ.radius_95
                ));
            }
            tau_r.push(tau.radius_100);
            tau_r95.push(tau.radius_95);
        }
        c.info(format!(
            "alpha={alpha}: tau radius95 M=1600 -> 3200 changes by {:.2}%",
            100.0 * (tau_r95[1] - tau_r95[0]).abs() / tau_r95[0]
        ));
        let change = (tau_r[1] - tau_r[0]).abs() / tau_r[0];
        c.check(
            change <= 0.10,
            format!("alpha={alpha}: tau radius100 M=1600 -> 3200 changes by {:.2}% (<= 10%)", 100.0 * change),
        );
    }
    c.info("Ritz values from 200 Arnoldi steps on the real 2M-dimensional operator");
    Ok(())
}

// ---------------------------------------------------------------- conservation

fn relative_drift(values: &[f64]) -> f64 {
    let q0 = values[0];
    values.iter().map(|q| ((q - q0) / q0).abs()).fold(0.0, f64::max)
}

fn conservation(c: &mut Criterion) -> rfnse_core::Result<()> {
    for &alpha in &[1.4, 1.7, 1.9, 2.0] {
        // h = 40/200 = 0.2, Δt = 0.05, t = 4
        let grid = GridSpec::with_dt(1, -20.0, 20.0, 199, 0.05, 80)?;
        let o = SolveOptions { tol: 1e-15, ..opts() };
        let (mass, energy) = evolve(&grid, alpha, 2.0, o)?;
        let (dq, de) = (relative_drift(&mass), relative_drift(&energy));
        c.check(dq <= 1e-12, format!("1D alpha={alpha}: mass relative error {dq:.3e} (<= 1e-12)"));
        c.check(de <= 1e-10, format!("1D alpha={alpha}: energy relative drift {de:.3e} (<= 1e-10)"));
    }
    for &alpha in &[1.2, 1.5, 1.8] {
        // h = 10/200 = 1/20, Δt = 1/20, t = 5
        let grid = GridSpec::with_dt(2, -5.0, 5.0, 199, 0.05, 100)?;
        let o = SolveOptions { tol: 1e-13, ..opts() };
        let (mass, energy) = evolve(&grid, alpha, 1.0, o)?;
        let dq = relative_drift(&mass);
        c.check(dq <= 1e-10, format!("2D alpha={alpha}: Q relative drift {dq:.3e} (<= 1e-10)"));
        c.info(format!("2D alpha={alpha}: E relative drift {:.3e}", relative_drift(&energy)));
    }
    Ok(())
}

fn evolve(grid: &GridSpec, alpha: f64, rho: f64, o: SolveOptions) -> rfnse_core::Result<(Vec<f64>, Vec<f64>)> {
    let u0 = initial_condition::<f64>(grid)?;
    let mut s = Stepper::new(grid.clone(), FractionalOrder::new(alpha)?, rho, u0, o)?;
    let mut mass = vec![s.mass()];
    let mut energy = vec![s.energy()?];
    while s.level() < grid.n_steps {
        s.step()?;
        mass.push(s.mass());
        energy.push(s.energy()?);
    }
    Ok((mass, energy))
}

// ---------------------------------------------------------------- oracles

const TRIALS: usize = 60;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn rand_toeplitz(rng: &mut ChaCha8Rng, m: usize) -> ToeplitzOp<f64> {
    let alpha = FractionalOrder::new(rng.gen_range(1.01..2.0)).unwrap();
    ToeplitzOp::from_order(alpha, rng.gen_range(0.05..20.0), m).unwrap()
}

/// `τ(T) = T − H` with the Hankel correction `H_ij = t_{i+j+2} + t_{2M−i−j}`
/// (zero-based, entries beyond the band dropped).
fn tau_oracle(t: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let m = t.rows();
    let entry = |k: usize| if k < m { t[(0, k)] } else { 0.0 };
    DenseMatrix::from_fn(m, m, |i, j| {
        let mut h = entry(i + j + 2);
        if i + j >= m {
            h += entry(2 * m - i - j);
        }
        t[(i, j)] - h
    })
}

/// T. Chan's optimal circulant, `c_k = ((M−k) t_k + k t_{M−k}) / M`.
fn circulant_oracle(t: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let m = t.rows();
    let tk = |k: usize| t[(0, k)];
    let col: Vec<f64> = (0..m)
        .map(|k| if k == 0 { tk(0) } else { ((m - k) as f64 * tk(k) + k as f64 * tk(m - k)) / m as f64 })
        .collect();
    DenseMatrix::from_fn(m, m, |i, j| col[(i + m - j) % m])
}

fn kron_sum(x: &DenseMatrix<f64>, y: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let m = x.rows();
    let eye = DenseMatrix::identity(m);
    let a = eye.kron(x);
    let b = y.kron(&eye);
    DenseMatrix::from_fn(m * m, m * m, |i, j| a[(i, j)] + b[(i, j)])
}

fn dense_direct(omega: f64, x: &DenseMatrix<f64>, d: &DiagonalBlock<f64>, r: &BlockVector<f64>) -> Vec<f64> {
    assemble_dense_f(omega, x, d).lu().expect("F is nonsingular").solve(&r.to_flat())
}

fn oracles(c: &mut Criterion) -> rfnse_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..TRIALS {
        // one level
        let m = rng.gen_range(2..=40);
        let t = rand_toeplitz(&mut rng, m);
        let td = t.to_dense();
        let x = rand_vec(&mut rng, m);
        note("toeplitz", max_rel_err(&t.apply(&x)?, &td.matvec(&x)));
        note("tau", max_rel_err(&TauOp::from_toeplitz(&t).apply(&x)?, &tau_oracle(&td).matvec(&x)));
        let circ = CirculantOp::from_toeplitz(&t, CirculantKind::Optimal)?;
        note("circulant", max_rel_err(&circ.apply(&x)?, &circulant_oracle(&td).matvec(&x)));

        // two levels, different μ per axis
        let s = rng.gen_range(2..=8);
        let tx = rand_toeplitz(&mut rng, s);
        let ty = rand_toeplitz(&mut rng, s);
        let (txd, tyd) = (tx.to_dense(), ty.to_dense());
        let t2 = Toeplitz2Op::new(tx.clone(), ty.clone())?;
        let x2 = rand_vec(&mut rng, s * s);
        note("toeplitz2", max_rel_err(&t2.apply(&x2)?, &kron_sum(&txd, &tyd).matvec(&x2)));
        note(
            "tau2",
            max_rel_err(&TauOp::from_toeplitz2(&t2).apply(&x2)?, &kron_sum(&tau_oracle(&txd), &tau_oracle(&tyd)).matvec(&x2)),
        );
        let c2 = CirculantOp::from_toeplitz2(&t2, CirculantKind::Optimal)?;
        note(
            "circulant2",
            max_rel_err(&c2.apply(&x2)?, &kron_sum(&circulant_oracle(&txd), &circulant_oracle(&tyd)).matvec(&x2)),
        );

        // preconditioner inverses against dense solves
        let omega = rng.gen_range(0.3..3.0);
        for (ft, xd) in [
            (FractionalToeplitz::OneLevel(t.clone()), td.clone()),
            (FractionalToeplitz::TwoLevel(t2.clone()), kron_sum(&txd, &tyd)),
        ] {
            let n = ft.dim();
            let d = DiagonalBlock::new((0..n).map(|_| rng.gen_range(0.0..2.0)).collect())?;
            let r = BlockVector::new(rand_vec(&mut rng, n), rand_vec(&mut rng, n))?;
            let tau_x = match &ft {
                FractionalToeplitz::OneLevel(_) => tau_oracle(&xd),
                FractionalToeplitz::TwoLevel(_) => kron_sum(&tau_oracle(&txd), &tau_oracle(&tyd)),
            };
            let circ_x = match &ft {
                FractionalToeplitz::OneLevel(_) => circulant_oracle(&xd),
                FractionalToeplitz::TwoLevel(_) => kron_sum(&circulant_oracle(&txd), &circulant_oracle(&tyd)),
            };
            let p = TauPreconditioner::new(omega, ft.tau(), d.clone())?;
            note("tau_inverse", max_rel_err(&p.apply_inverse(&r)?.to_flat(), &dense_direct(omega, &tau_x, &d, &r)));
            let p = CirculantPreconditioner::new(omega, ft.circulant(CirculantKind::Optimal)?, d.clone())?;
            note("circulant_inverse", max_rel_err(&p.apply_inverse(&r)?.to_flat(), &dense_direct(omega, &circ_x, &d, &r)));
            let p = ExactPreconditioner::new(omega, ft.clone(), d.clone())?;
            note("exact_inverse", max_rel_err(&p.apply_inverse(&r)?.to_flat(), &dense_direct(omega, &xd, &d, &r)));
        }
    }
    for (name, e) in &worst {
        c.check(*e <= 1e-10, format!("{name}: worst relative error over {TRIALS} trials {e:.2e} (<= 1e-10)"));
    }

    // sine transform: dense entries, involution, orthogonality
    let mut dst_dense = 0f64;
    let mut dst_orth = 0f64;
    for _ in 0..TRIALS {
        let m = rng.gen_range(1..=160);
        let mut plan = SineTransformPlan::<f64>::new(m)?;
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                plan.apply(&e)
            })
            .collect::<rfnse_core::Result<_>>()?;
        let scale = (2.0 / (m + 1) as f64).sqrt();
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                let exact = scale * (std::f64::consts::PI * ((i + 1) * (j + 1)) as f64 / (m + 1) as f64).sin();
                dst_dense = dst_dense.max((v - exact).abs());
            }
            for (k, other) in cols.iter().enumerate() {
                let dot: f64 = col.iter().zip(other).map(|(a, b)| a * b).sum();
                dst_orth = dst_orth.max((dot - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    c.check(dst_dense <= 1e-12, format!("DST-I entries vs closed form, M <= 160: {dst_dense:.2e} (<= 1e-12)"));
    c.check(dst_orth <= 1e-12, format!("DST-I orthogonality S^T S = I, M <= 160: {dst_orth:.2e} (<= 1e-12)"));
    for m in [255usize, 1000, 6400, 25600, 102400] {
        let mut plan = SineTransformPlan::<f64>::new(m)?;
        let x = rand_vec(&mut rng, m);
        let sx = plan.apply(&x)?;
        let back = plan.apply(&sx)?;
        let err = max_rel_err(&back, &x);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_err = (sx.iter().map(|v| v * v).sum::<f64>().sqrt() - nx).abs() / nx;
        c.check(
            err <= 1e-12 && norm_err <= 1e-12,
            format!("DST-I involution M={m}: ||S S x - x|| = {err:.2e}, norm change {norm_err:.2e} (<= 1e-12)"),
        );
    }

    // α = 2 against a tridiagonal stepper
    let e = laplacian_pipeline_error()?;
    c.check(e <= 1e-8, format!("alpha=2 pipeline vs tridiagonal stepper, 10 levels: max relative error {e:.2e} (<= 1e-8)"));
    Ok(())
}

/// Complex tridiagonal solve with constant off-diagonal `off`.
fn thomas(diag: &[C64], off: C64, rhs: &[C64]) -> Vec<C64> {
    let n = diag.len();
    let mut cp = vec![C64::default(); n];
    let mut dp = vec![C64::default(); n];
    cp[0] = off / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - off * cp[i - 1];
        cp[i] = off / den;
        dp[i] = (rhs[i] - off * dp[i - 1]) / den;
    }
    let mut x = vec![C64::default(); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// `(T u)_j = μ (2u_j − u_{j−1} − u_{j+1})` with zero boundary values.
fn lap(mu: f64, u: &[C64]) -> Vec<C64> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let l = if j > 0 { u[j - 1] } else { C64::default() };
            let r = if j + 1 < n { u[j + 1] } else { C64::default() };
            (u[j] * 2.0 - l - r) * mu
        })
        .collect()
}

/// Solves `(D − sT + iI) x = (iI + sT − D) prev` with `T` the scaled Laplacian.
fn tridiagonal_level(mu: f64, s: f64, dvals: &[f64], prev: &[C64]) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    let tp = lap(s * mu, prev);
    let rhs: Vec<C64> = (0..prev.len()).map(|j| i * prev[j] + tp[j] - prev[j] * dvals[j]).collect();
    let diag: Vec<C64> = dvals.iter().map(|&d| C64::new(d - 2.0 * s * mu, 1.0)).collect();
    thomas(&diag, C64::new(s * mu, 0.0), &rhs)
}

fn laplacian_pipeline_error() -> rfnse_core::Result<f64> {
    let (rho, m, levels) = (2.0, 127usize, 10usize);
    let grid = GridSpec::with_dt(1, -20.0, 20.0, m, 0.04, levels)?;
    let mu = grid.dt / (grid.h * grid.h);
    let dvals = |u: &[C64], scale: f64| -> Vec<f64> { u.iter().map(|z| scale * rho * grid.dt * z.norm_sqr()).collect() };

    let u0: Vec<C64> = (1..=m)
        .map(|j| {
            let x = -20.0 + j as f64 * grid.h;
            C64::from_polar(1.0 / x.cosh(), 2.0 * x)
        })
        .collect();
    let mut iterate = u0.clone();
    for _ in 0..2 {
        iterate = tridiagonal_level(mu, 0.5, &dvals(&iterate, 0.5), &u0);
    }
    let mut oracle = vec![u0.clone(), iterate];
    while oracle.len() <= levels {
        let k = oracle.len();
        let next = tridiagonal_level(mu, 1.0, &dvals(&oracle[k - 1], 1.0), &oracle[k - 2]);
        oracle.push(next);
    }

    let o = SolveOptions { tol: 1e-13, ..opts() };
    let mut s = Stepper::new(grid.clone(), FractionalOrder::new(2.0)?, rho, StateField::new(u0, 0)?, o)?;
    let mut worst = 0f64;
    let mut compare = |level: usize, u: &[C64]| {
        let want = &oracle[level];
        let scale = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let err = u.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / scale;
        worst = worst.max(err);
    };
    compare(1, &s.levels().1.u);
    while s.level() < levels {
        s.step()?;
        compare(s.level(), &s.levels().1.u);
    }
    Ok(worst)
}

// ---------------------------------------------------------------- sweeps

fn its_of(rows: &[SweepRow], value: f64, method: PrecondKind) -> Option<&RunRecord> {
    rows.iter()
        .find(|r| (r.value - value).abs() < 1e-12 && r.record.method == method)
        .map(|r| &r.record)
}

/// Midpoint of the `ω` values that attain the smallest iteration count.
fn plateau_minimiser(rows: &[SweepRow]) -> Option<(f64, usize)> {
    let best = rows.iter().filter_map(|r| r.record.it()).min()?;
    let at: Vec<f64> = rows
        .iter()
        .filter(|r| r.record.it() == Some(best))
        .map(|r| r.value)
        .collect();
    let lo = at.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = at.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((0.5 * (lo + hi), best))
}

fn sweeps(c: &mut Criterion) -> rfnse_core::Result<()> {
    let mut omegas = vec![0.05];
    omegas.extend((1..=40).map(|k| 0.1 * k as f64));
    for &alpha in &[1.1, 1.3, 1.5, 1.7, 1.9] {
        let rows = omega_sweep(&Problem::table_1d(alpha, 2.0, 6400)?, &omegas, &opts(), 1)?;
        let (w, best) = plateau_minimiser(&rows).unwrap_or((f64::NAN, 0));
        let at = |v: f64| its_of(&rows, v, PrecondKind::Tau).and_then(|r| r.it());
        let plateau: Vec<String> = rows
            .iter()
            .filter(|r| r.record.it() == Some(best))
            .map(|r| format!("{:.1}", r.value))
            .collect();
        c.check(
            w > 1.0 && w <= 1.5,
            format!("omega-sweep M=6400 alpha={alpha}: minimiser {w:.2} in (1, 1.5] (min IT {best} at omega {})", plateau.join(",")),
        );
        let (small, one) = (at(0.05), at(1.0));
        c.check(
            matches!((small, one), (Some(a), Some(b)) if a > 3 * b),
            format!("omega-sweep M=6400 alpha={alpha}: IT(0.05) = {small:?} > 3 x IT(1) = {one:?}; IT(4) = {:?}", at(4.0)),
        );
    }

    for &alpha in &[1.3, 1.5, 1.7] {
        let p = Problem::table_1d(alpha, 2.0, 6400)?;
        let rows = rho_sweep(&p, &[1.0, 64.0], &[PrecondKind::Tau, PrecondKind::None], &opts(), 1)?;
        let get = |rho: f64, k: PrecondKind| its_of(&rows, rho, k).expect("row present").clone();
        let (t1, t64) = (get(1.0, PrecondKind::Tau), get(64.0, PrecondKind::Tau));
        let (g1, g64) = (get(1.0, PrecondKind::None), get(64.0, PrecondKind::None));
        c.check(
            matches!((t1.it(), t64.it()), (Some(a), Some(b)) if b <= 2 * a),
            format!("rho-sweep M=6400 alpha={alpha}: tau-GMRES IT(64) = {} <= 2 x IT(1), IT(1) = {}", show(&t64), show(&t1)),
        );
        c.check(
            matches!((g1.it(), g64.iterations), (Some(a), Some(b)) if b >= 2 * a),
            format!("rho-sweep M=6400 alpha={alpha}: GMRES IT(64) = {} >= 2 x IT(1), IT(1) = {}", show(&g64), show(&g1)),
        );
    }

    let alphas: Vec<f64> = (11..=20).map(|k| k as f64 / 10.0).collect();
    let base = Problem::table_2d_h(1.5, 1.0, 1.0 / 8.0)?;
    let rows = alpha_sweep(&base, &alphas, &[PrecondKind::Tau, PrecondKind::Circulant, PrecondKind::None], &opts(), 1)?;
    let tau: Vec<Option<usize>> = alphas
        .iter()
        .map(|&a| its_of(&rows, a, PrecondKind::Tau).and_then(|r| r.it()))
        .collect();
    let conv: Vec<usize> = tau.iter().flatten().copied().collect();
    let range = conv.iter().max().zip(conv.iter().min()).map(|(a, b)| a - b);
    c.check(
        conv.len() == alphas.len() && range.is_some_and(|r| r <= 2),
        format!("alpha-sweep 2D h=1/8 dt=1/20 rho=1: tau-GMRES IT {conv:?} over alpha 1.1..2.0 (range <= 2)"),
    );
    let others = |k: PrecondKind| -> Vec<String> { alphas.iter().map(|&a| its_of(&rows, a, k).map_or("-".into(), show)).collect() };
    c.info(format!("C-GMRES IT {:?}", others(PrecondKind::Circulant)));
    c.info(format!("GMRES IT {:?}", others(PrecondKind::None)));
    Ok(())
}

// ---------------------------------------------------------------- driver

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let strict = std::env::var("RFNSE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let selected = |key: &str| filter.as_deref().is_none_or(|f| key.contains(f));

    type Run = fn(&mut Criterion) -> rfnse_core::Result<()>;
    let plain: [(&'static str, &'static str, Run); 8] = [
        ("tables-1d", "1D tables: tau/C/GMRES iteration counts and M-independence", table_1d),
        ("tban", "TBAN contraction below sigma(omega), minimiser near omega*", tban_theory),
        ("brackets", "Eigenvalue brackets of T1, T2, tau(T1), tau(T2)", brackets),
        ("circle", "Exact-F preconditioned spectrum inside the circle |z-1| <= sigma(omega)", circle),
        ("clustering", "tau clusters tighter than C and stays put as M doubles", clustering),
        ("conservation", "Discrete mass and energy conservation", conservation),
        ("oracles", "Fast operators, preconditioners and DST-I against dense oracles", oracles),
        ("sweeps", "omega, rho and alpha sweeps", sweeps),
    ];

    let start = Instant::now();
    let mut results: Vec<(String, bool)> = Vec::new();
    let mut report = |c: Criterion, secs: f64| {
        println!("[{}] {} ({}, {secs:.1}s)", if c.ok { "PASS" } else { "FAIL" }, c.title, c.key);
        for l in &c.lines {
            println!("    {l}");
        }
        std::io::stdout().flush().ok();
        results.push((c.key.to_string(), c.ok));
    };

    for (key, title, run) in plain {
        if !selected(key) {
            continue;
        }
        let t0 = Instant::now();
        let mut c = Criterion::new(key, title);
        if let Err(e) = run(&mut c) {
            c.error(e);
        }
        report(c, t0.elapsed().as_secs_f64());
    }
    if selected("tables-2d") || selected("timing") {
        let t0 = Instant::now();
        let mut timing = Timing::default();
        let mut c = Criterion::new("tables-2d", "2D tables: tau/C/GMRES iteration counts");
        if let Err(e) = table_2d(&mut c, &mut timing) {
            c.error(e);
        }
        report(c, t0.elapsed().as_secs_f64());
        let mut c = Criterion::new("timing", "Wall time at fixed size: tau-GMRES <= C-GMRES <= GMRES");
        timing_order(&mut c, &timing);
        report(c, 0.0);
    }

    let passed = results.iter().filter(|(_, ok)| *ok).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(k, _)| k.as_str()).collect();
    if !failed.is_empty() {
        println!("acceptance: failing criteria: {}", failed.join(", "));
        if strict {
            std::process::exit(1);
        }
    }
}
