//! Numerical checks of the spectral theory: eigenvalue brackets of the
//! Toeplitz and τ matrices, spectra of preconditioned block systems with
//! their cluster radii, TBAN contraction scans, and iteration-count sweeps.

use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::BlockSystem;
use crate::dense::{symmetric_eigs_dense, DenseMatrix};
use crate::error::{Error, Result};
use crate::experiment::{run_method, Problem, RunRecord};
use crate::precond::{CirculantPreconditioner, ExactPreconditioner, TauPreconditioner, DENSE_LIMIT};
use crate::solvers::{sigma_bound, tban_contraction, LinearOperator, PrecondKind, SolveOptions, TbanOptions};
use crate::stencil::{centered_coeffs, FractionalOrder};
use crate::structured::{CirculantKind, ToeplitzOp};

/// Largest `M` for which one-level brackets are checked with a dense
/// eigensolver.
pub const BRACKET_DENSE_LIMIT: usize = 256;

/// Largest `M²` for which two-level spectra are computed from the assembled
/// matrix rather than as sums of one-level eigenvalues.
pub const BRACKET_KRON_DENSE_LIMIT: usize = 256;

/// Krylov dimension of the Ritz path.
pub const RITZ_STEPS: usize = 200;

/// Operators whose spectra are examined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorTag {
    R,
    FInvR,
    FtauInvR,
    FcInvR,
    T1,
    T2,
    TauT1,
    TauT2,
}

impl OperatorTag {
    pub fn label(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::FInvR => "F_inv_R",
            Self::FtauInvR => "Ftau_inv_R",
            Self::FcInvR => "FC_inv_R",
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::TauT1 => "tauT1",
            Self::TauT2 => "tauT2",
        }
    }

    /// Tag of `P⁻¹R` for a preconditioner choice.
    pub fn preconditioned(kind: PrecondKind) -> Self {
        match kind {
            PrecondKind::None => Self::R,
            PrecondKind::Tau => Self::FtauInvR,
            PrecondKind::Circulant => Self::FcInvR,
            PrecondKind::Exact => Self::FInvR,
        }
    }
}

impl std::str::FromStr for OperatorTag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Self::R,
            Self::FInvR,
            Self::FtauInvR,
            Self::FcInvR,
            Self::T1,
            Self::T2,
            Self::TauT1,
            Self::TauT2,
        ]
        .into_iter()
        .find(|t| t.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown operator `{s}`"))
    }
}

/// Constants of the tail estimates and of the `T_2 − τ(T_2)` splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBoundsParams {
    pub alpha: FractionalOrder,
    pub mu: f64,
    pub m: usize,
    pub length: f64,
    pub theta: f64,
    pub theta0: f64,
    pub epsilon: f64,
    pub k0: usize,
    /// Largest diagonal entry of `D`.
    pub nu: f64,
}

impl EigenBoundsParams {
    /// Requires `2^{2α+1} μ θ₀ / M^α < ε ≤ 2μθ₀`; then
    /// `k₀ = ⌈(2μθ₀/ε)^{1/α}⌉ + 1`.
    pub fn new(alpha: FractionalOrder, mu: f64, m: usize, length: f64, epsilon: f64, nu: f64) -> Result<Self> {
        let a = alpha.value();
        let theta0 = alpha.theta0();
        let hi = 2.0 * mu * theta0;
        let lo = 2f64.powf(2.0 * a + 1.0) * mu * theta0 / (m as f64).powf(a);
        if !(epsilon > lo && epsilon <= hi) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in ({lo:e}, {hi:e}], got {epsilon:e}"),
            });
        }
        Ok(Self {
            alpha,
            mu,
            m,
            length,
            theta: alpha.theta(),
            theta0,
            epsilon,
            k0: (hi / epsilon).powf(1.0 / a).ceil() as usize + 1,
            nu,
        })
    }
}

/// Eigenvalue range of one operator against its closed-form bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport {
    pub tag: OperatorTag,
    pub m: usize,
    pub lower: f64,
    pub upper: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Two-level spectrum formed as sums of one-level eigenvalues.
    pub composed: bool,
}

impl BracketReport {
    pub fn lower_margin(&self) -> f64 {
        self.min_eig - self.lower
    }

    pub fn upper_margin(&self) -> f64 {
        self.upper - self.max_eig
    }

    pub fn holds(&self) -> bool {
        self.lower_margin() > 0.0 && self.upper_margin() > 0.0
    }
}

/// `(lower, upper)` for `T_1`, `T_2`, `τ(T_1)` or `τ(T_2)` with
/// `h = (b − a)/(M + 1)` and `μ = Δt/h^α`.
pub fn bracket(tag: OperatorTag, m: usize, alpha: FractionalOrder, dt: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let len = b - a;
    let h = len / (m + 1) as f64;
    let al = alpha.value();
    let theta = alpha.theta();
    let lo = 2.0 * dt * theta / len.powf(al);
    let up = 2.0 * dt / h.powf(al) * (alpha.c0() - theta * h.powf(al) / len.powf(al));
    let c2 = centered_coeffs::<f64>(alpha, 2)?.get(2);
    let c2_term = c2 * dt / h.powf(al);
    Ok(match tag {
        OperatorTag::T1 => (lo, up),
        OperatorTag::T2 => (2.0 * lo, 2.0 * up),
        OperatorTag::TauT1 => (lo, up - c2_term),
        OperatorTag::TauT2 => (2.0 * lo, 2.0 * up - 2.0 * c2_term),
        other => {
            return Err(Error::InvalidParameter {
                name: "op",
                reason: format!("no closed-form bracket for {}", other.label()),
            })
        }
    })
}

/// Computes the spectrum of the tagged operator and checks it lies strictly
/// inside [`bracket`]. A violation is an error.
pub fn check_bracket(tag: OperatorTag, m: usize, alpha: FractionalOrder, dt: f64, a: f64, b: f64) -> Result<BracketReport> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("brackets need even M >= 4, got {m}"),
        });
    }
    if m > BRACKET_DENSE_LIMIT {
        return Err(Error::SizeGuard {
            n: m,
            limit: BRACKET_DENSE_LIMIT,
        });
    }
    if !(dt > 0.0) || !(b > a) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "need dt > 0 and a < b".into(),
        });
    }
    let (lower, upper) = bracket(tag, m, alpha, dt, a, b)?;
    let h = (b - a) / (m + 1) as f64;
    let t1 = ToeplitzOp::<f64>::from_order(alpha, dt / h.powf(alpha.value()), m)?;
    let one_level = |tau: bool| -> Result<Vec<f64>> {
        symmetric_eigs_dense(&if tau { t1.tau_dense() } else { t1.to_dense() })
    };
    let two_level = |tau: bool| -> Result<(Vec<f64>, bool)> {
        if m * m <= BRACKET_KRON_DENSE_LIMIT {
            let one = if tau { t1.tau_dense() } else { t1.to_dense() };
            let eye = DenseMatrix::identity(m);
            let mut full = eye.kron(&one);
            let other = one.kron(&eye);
            for i in 0..m * m {
                for j in 0..m * m {
                    full[(i, j)] += other[(i, j)];
                }
            }
            Ok((symmetric_eigs_dense(&full)?, false))
        } else {
            let e = one_level(tau)?;
            Ok((e.iter().flat_map(|x| e.iter().map(move |y| x + y)).collect(), true))
        }
    };
    let (eigs, composed) = match tag {
        OperatorTag::T1 => (one_level(false)?, false),
        OperatorTag::TauT1 => (one_level(true)?, false),
        OperatorTag::T2 => two_level(false)?,
        OperatorTag::TauT2 => two_level(true)?,
        _ => unreachable!("rejected by bracket()"),
    };
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = BracketReport {
        tag,
        m,
        lower,
        upper,
        min_eig,
        max_eig,
        composed,
    };
    if !report.holds() {
        return Err(Error::BracketViolation(format!(
            "{} M={m} alpha={}: eigenvalues [{min_eig:e}, {max_eig:e}] outside ({lower:e}, {upper:e})",
            tag.label(),
            alpha.value()
        )));
    }
    Ok(report)
}

/// Spectrum (or Ritz approximation of it) of one operator.
#[derive(Debug, Clone)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<Complex64>,
    pub tag: OperatorTag,
    /// Real dimension of the operator.
    pub size: usize,
    /// Ritz values from a truncated Arnoldi run rather than the full spectrum.
    pub ritz: bool,
}

/// Distances of a spectrum from a centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStats {
    pub center: Complex64,
    pub radius_95: f64,
    pub radius_100: f64,
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SpectrumSample {
    pub fn cluster(&self, center: Complex64) -> ClusterStats {
        let mut d: Vec<f64> = self.eigenvalues.iter().map(|z| (z - center).norm()).collect();
        d.sort_by(f64::total_cmp);
        let q = |p: f64| -> f64 {
            if d.is_empty() {
                return 0.0;
            }
            let k = ((p * d.len() as f64).ceil() as usize).clamp(1, d.len());
            d[k - 1]
        };
        let fold = |f: fn(&Complex64) -> f64, min: bool| {
            self.eigenvalues
                .iter()
                .map(f)
                .fold(if min { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| {
                    if min {
                        a.min(b)
                    } else {
                        a.max(b)
                    }
                })
        };
        ClusterStats {
            center,
            radius_95: q(0.95),
            radius_100: q(1.0),
            re_min: fold(|z| z.re, true),
            re_max: fold(|z| z.re, false),
            im_min: fold(|z| z.im, true),
            im_max: fold(|z| z.im, false),
        }
    }

    /// `(re, im, operator)` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "re,im,operator")?;
        for z in &self.eigenvalues {
            writeln!(w, "{:.17e},{:.17e},{}", z.re, z.im, self.tag.label())?;
        }
        Ok(())
    }
}

/// `x ↦ P⁻¹ R x` on flat `[z; y]` vectors.
pub struct Preconditioned<'a> {
    sys: &'a BlockSystem<f64>,
    inner: Option<Box<dyn LinearOperator<f64> + 'a>>,
}

impl<'a> Preconditioned<'a> {
    pub fn new(sys: &'a BlockSystem<f64>, kind: PrecondKind, omega: f64, circulant: CirculantKind) -> Result<Self> {
        let d = sys.diagonal().clone();
        let inner: Option<Box<dyn LinearOperator<f64>>> = match kind {
            PrecondKind::None => None,
            PrecondKind::Tau => Some(Box::new(TauPreconditioner::new(omega, sys.toeplitz().tau(), d)?)),
            PrecondKind::Circulant => Some(Box::new(CirculantPreconditioner::new(
                omega,
                sys.toeplitz().circulant(circulant)?,
                d,
            )?)),
            PrecondKind::Exact => Some(Box::new(ExactPreconditioner::new(omega, sys.toeplitz().clone(), d)?)),
        };
        Ok(Self { sys, inner })
    }
}

impl LinearOperator<f64> for Preconditioned<'_> {
    fn dim(&self) -> usize {
        2 * self.sys.dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match &self.inner {
            None => LinearOperator::apply(self.sys, x, out),
            Some(p) => {
                let mut rx = vec![0.0; x.len()];
                LinearOperator::apply(self.sys, x, &mut rx);
                p.apply(&rx, out);
            }
        }
    }
}

/// Arnoldi with two passes of Gram–Schmidt and a seeded random start. If an
/// invariant subspace is found before `steps`, a fresh random direction
/// orthogonal to the basis continues the process, so `steps = dim` yields an
/// orthogonal similarity transform and hence the exact spectrum.
/// Returns the eigenvalues of the Hessenberg matrix.
pub fn arnoldi_eigenvalues(op: &dyn LinearOperator<f64>, steps: usize, seed: u64) -> Result<Vec<Complex64>> {
    let n = op.dim();
    let k = steps.min(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut h = faer::Mat::<f64>::zeros(k, k);

    let fresh = |basis: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                for b in basis {
                    let c = dot(&v, b);
                    axpy(&mut v, -c, b);
                }
            }
            let nv = dot(&v, &v).sqrt();
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Ok(v);
            }
        }
        Err(Error::SolverFailure("Arnoldi could not extend the basis".into()))
    };

    basis.push(fresh(&basis, &mut rng)?);
    let mut w = vec![0.0; n];
    for j in 0..k {
        op.apply(&basis[j], &mut w);
        let scale = dot(&w, &w).sqrt();
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
                h[(i, j)] += c;
            }
        }
        if j + 1 == k {
            break;
        }
        let nw = dot(&w, &w).sqrt();
        if nw > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            h[(j + 1, j)] = nw;
            basis.push(w.iter().map(|x| x / nw).collect());
        } else {
            basis.push(fresh(&basis, &mut rng)?);
        }
    }
    h.eigenvalues()
        .map_err(|e| Error::SolverFailure(format!("Hessenberg eigenvalues: {e:?}")))
}

/// Spectrum of `P⁻¹R`. Up to [`DENSE_LIMIT`] real unknowns the Arnoldi
/// process runs to full dimension (exact); beyond, [`RITZ_STEPS`] steps
/// give Ritz values and the sample is flagged.
pub fn preconditioned_spectrum(
    sys: &BlockSystem<f64>,
    kind: PrecondKind,
    omega: f64,
    circulant: CirculantKind,
    force_ritz: bool,
) -> Result<SpectrumSample> {
    let op = Preconditioned::new(sys, kind, omega, circulant)?;
    let n = op.dim();
    let ritz = force_ritz || n > DENSE_LIMIT;
    let steps = if ritz { RITZ_STEPS.min(n) } else { n };
    Ok(SpectrumSample {
        eigenvalues: arnoldi_eigenvalues(&op, steps, 0x5eed)?,
        tag: OperatorTag::preconditioned(kind),
        size: n,
        ritz,
    })
}

/// Measured TBAN contraction and the bound `σ(ω)` on an `ω` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionPoint {
    pub omega: f64,
    pub rate: f64,
    pub sigma: f64,
}

pub fn tban_omega_scan(sys: &BlockSystem<f64>, omegas: &[f64], steps: usize, window: usize) -> Result<Vec<ContractionPoint>> {
    let lambda = sys.diagonal().lambda_max();
    omegas
        .iter()
        .map(|&omega| {
            let opts = TbanOptions {
                omega,
                ..TbanOptions::default()
            };
            Ok(ContractionPoint {
                omega,
                rate: tban_contraction(sys, &opts, steps, window)?,
                sigma: sigma_bound(omega, lambda)?,
            })
        })
        .collect()
}

/// One solve of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub value: f64,
    pub record: RunRecord,
}

/// `parameter, method, IT, relres, wall_time, status` rows. Runs refused by
/// a resource guard write `NA` for `IT` and `relres`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    let name = rows.first().map_or("value", |r| r.parameter);
    writeln!(w, "{name},method,IT,relres,wall_time,status")?;
    for r in rows {
        let it = r.record.iterations.map_or("NA".into(), |v| v.to_string());
        let rr = r.record.relres.map_or("NA".into(), |v| format!("{v:.6e}"));
        writeln!(
            w,
            "{},{},{},{},{:.6e},{}",
            r.value,
            r.record.method.label(),
            it,
            rr,
            r.record.wall_time,
            r.record.status.label()
        )?;
    }
    Ok(())
}

/// Maps `f` over `items` on at most `threads` scoped workers, preserving
/// order.
pub fn parallel_map<I: Sync, R: Send>(items: &[I], threads: usize, f: impl Fn(&I) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item is visited"))
        .collect()
}

fn require_nonempty(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        Err(Error::InvalidParameter {
            name,
            reason: "sweep list is empty".into(),
        })
    } else {
        Ok(())
    }
}

/// τ-GMRES iteration counts over `omegas` on the second-level system.
pub fn omega_sweep(problem: &Problem, omegas: &[f64], opts: &SolveOptions, threads: usize) -> Result<Vec<SweepRow>> {
    require_nonempty("omegas", omegas)?;
    let sys = problem.second_level_system()?;
    parallel_map(omegas, threads, |&omega| {
        let o = SolveOptions { omega, ..opts.clone() };
        run_method(&sys, PrecondKind::Tau, &o).map(|record| SweepRow {
            parameter: "omega",
            value: omega,
            record,
        })
    })
    .into_iter()
    .collect()
}

/// Iteration counts of `methods` as `ρ` varies (the system is rebuilt for
/// each `ρ`).
pub fn rho_sweep(
    problem: &Problem,
    rhos: &[f64],
    methods: &[PrecondKind],
    opts: &SolveOptions,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    require_nonempty("rhos", rhos)?;
    let per = parallel_map(rhos, threads, |&rho| -> Result<Vec<SweepRow>> {
        let p = Problem { rho, ..problem.clone() };
        let sys = p.second_level_system()?;
        methods
            .iter()
            .map(|&m| {
                run_method(&sys, m, opts).map(|record| SweepRow {
                    parameter: "rho",
                    value: rho,
                    record,
                })
            })
            .collect()
    });
    Ok(per.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Iteration counts of `methods` as `α` varies.
pub fn alpha_sweep(
    problem: &Problem,
    alphas: &[f64],
    methods: &[PrecondKind],
    opts: &SolveOptions,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    require_nonempty("alphas", alphas)?;
    let per = parallel_map(alphas, threads, |&alpha| -> Result<Vec<SweepRow>> {
        let p = Problem {
            alpha: FractionalOrder::new(alpha)?,
            ..problem.clone()
        };
        let sys = p.second_level_system()?;
        methods
            .iter()
            .map(|&m| {
                run_method(&sys, m, opts).map(|record| SweepRow {
                    parameter: "alpha",
                    value: alpha,
                    record,
                })
            })
            .collect()
    });
    Ok(per.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
