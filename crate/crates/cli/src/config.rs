//! Flat `key = value` run configuration.
//!
//! A configuration is read from an optional file and then patched by
//! `--set key=value` overrides. Blank lines and `#` comments are ignored.
//! Every value remembers where it came from so that validation errors can
//! point at the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rfnse_core::analysis::OperatorTag;
use rfnse_core::experiment::Problem;
use rfnse_core::scheme::GridSpec;
use rfnse_core::solvers::{HalfStepPolicy, PrecondKind};
use rfnse_core::structured::CirculantKind;
use sha2::{Digest, Sha256};

/// Every key the harness understands.
pub const KEYS: &[&str] = &[
    "dim", "alpha", "rho", "domain", "M", "h", "grid", "N", "dt", "t_end", "initial", "solver", "precond",
    "circulant", "omega", "tol", "max_iter", "memory_mb", "half_step", "threads", "M_list", "h_list", "methods",
    "omegas", "rhos", "alphas", "operator", "ritz", "out", "dump", "history",
];

/// Keys that name output locations or scheduling; they do not enter the hash.
const UNHASHED: &[&str] = &["out", "dump", "history", "threads"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::File { path, line } => write!(f, "{}:{line}", path.display()),
            Self::Override(i) => write!(f, "--set #{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(o) => write!(f, "{o}: field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Raw key/value pairs with their origins.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            raw.insert(body, origin)?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: None,
            field: "config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text, path)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), ConfigError> {
        for (i, s) in sets.iter().enumerate() {
            self.insert(s.trim(), Origin::Override(i + 1))?;
        }
        Ok(())
    }

    fn insert(&mut self, body: &str, origin: Origin) -> Result<(), ConfigError> {
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError {
                origin: Some(origin),
                field: body.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError {
                origin: Some(origin),
                field: k.to_string(),
                message: "unknown key".into(),
            });
        }
        if v.is_empty() {
            return Err(ConfigError {
                origin: Some(origin),
                field: k.to_string(),
                message: "empty value".into(),
            });
        }
        self.entries.insert(k.to_string(), (v.to_string(), origin));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.entries.get(key).map(|(_, o)| o.clone()),
            field: key.to_string(),
            message: message.into(),
        }
    }

    /// Parses `key` if present.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| self.error(key, format!("`{v}`: {e}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Comma-separated values or an inclusive `start:step:end` range.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let values = parse_list(v).map_err(|e| self.error(key, e))?;
        if values.is_empty() {
            return Err(self.error(key, "empty list"));
        }
        Ok(Some(values))
    }

    /// SHA-256 of the sorted `key=value` lines that affect results.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, (v, _)) in &self.entries {
            if !UNHASHED.contains(&k.as_str()) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `a,b,c` or `start:step:end`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| -> Result<f64, String> {
        parse_number(t.trim()).map_err(|_| format!("`{}` is not a number", t.trim()))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{s}` must be start:step:end"));
        }
        let (a, step, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(format!("range `{s}` needs a positive step and start <= end"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(format!("range `{s}` has {count} points"));
        }
        return Ok((0..count).map(|k| round12(a + k as f64 * step)).collect());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
}

/// Accepts plain floats and fractions such as `1/32`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (f64, f64) = (
            p.trim().parse().map_err(|_| format!("`{s}` is not a number"))?,
            q.trim().parse().map_err(|_| format!("`{s}` is not a number"))?,
        );
        if q == 0.0 {
            return Err(format!("`{s}` divides by zero"));
        }
        return Ok(p / q);
    }
    s.parse().map_err(|_| format!("`{s}` is not a number"))
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// How a mesh width `h` maps to the number of interior points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridConvention {
    /// `M = L/h`, the count used by the published table headers.
    Table,
    /// `M = L/h − 1`, so the node spacing is exactly `h`.
    Exact,
}

impl GridConvention {
    pub fn label(self) -> &'static str {
        match self {
            Self::Table => "interior-M-equals-L-over-h",
            Self::Exact => "interior-M-equals-L-over-h-minus-1",
        }
    }

    pub fn side(self, length: f64, h: f64) -> Result<usize, String> {
        if !(h > 0.0) || h >= length {
            return Err(format!("h must lie in (0, {length}), got {h}"));
        }
        let cells = length / h;
        let n = cells.round();
        if (cells - n).abs() > 1e-6 * cells {
            return Err(format!("domain length {length} is not a multiple of h = {h}"));
        }
        let m = match self {
            Self::Table => n as usize,
            Self::Exact => n as usize - 1,
        };
        if m < 1 {
            return Err(format!("h = {h} leaves no interior point"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Omega {
    Fixed(f64),
    /// `√(λ_max² + 1)` of the system being solved.
    Auto,
}

impl Omega {
    pub fn label(self) -> String {
        match self {
            Self::Fixed(w) => w.to_string(),
            Self::Auto => "auto".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Gmres,
    Tban,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Standard,
    Zero,
}

/// Time discretisation as given, resolved against the per-dimension
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub n_steps: usize,
    pub t_end: f64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub dim: usize,
    pub alpha: f64,
    pub rho: f64,
    pub domain: (f64, f64),
    pub grid: GridConvention,
    pub time: TimeSpec,
    pub initial: Initial,
    pub solver: SolverKind,
    pub precond: PrecondKind,
    pub circulant: CirculantKind,
    pub omega: Omega,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub memory_budget: usize,
    pub half_step: HalfStepPolicy,
    pub threads: usize,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let dim: usize = raw.parse_or("dim", 1)?;
        if dim != 1 && dim != 2 {
            return Err(raw.error("dim", format!("must be 1 or 2, got {dim}")));
        }
        let alpha = number(&raw, "alpha")?.unwrap_or(1.5);
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(raw.error("alpha", format!("must lie in (1, 2], got {alpha}")));
        }
        let rho = number(&raw, "rho")?.unwrap_or(if dim == 1 { 2.0 } else { 1.0 });
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(raw.error("rho", format!("must be nonnegative, got {rho}")));
        }
        let domain = match raw.list("domain")? {
            None if dim == 1 => (-20.0, 20.0),
            None => (-5.0, 5.0),
            Some(v) if v.len() == 2 && v[0] < v[1] => (v[0], v[1]),
            Some(_) => return Err(raw.error("domain", "expected `a,b` with a < b")),
        };
        let grid = match raw.get("grid") {
            None | Some("table") => GridConvention::Table,
            Some("exact") => GridConvention::Exact,
            Some(v) => return Err(raw.error("grid", format!("`{v}`: expected table or exact"))),
        };
        let time = resolve_time(&raw, dim)?;
        let initial = match raw.get("initial") {
            None | Some("standard") => Initial::Standard,
            Some("zero") => Initial::Zero,
            Some(v) => return Err(raw.error("initial", format!("`{v}`: expected standard or zero"))),
        };
        let solver = match raw.get("solver") {
            None | Some("gmres") => SolverKind::Gmres,
            Some("tban") => SolverKind::Tban,
            Some(v) => return Err(raw.error("solver", format!("`{v}`: expected gmres or tban"))),
        };
        let precond = raw.parse_or("precond", PrecondKind::Tau)?;
        let circulant = raw.parse_or("circulant", CirculantKind::Optimal)?;
        let omega = match raw.get("omega") {
            None => Omega::Fixed(1.0),
            Some("auto") => Omega::Auto,
            Some(_) => {
                let w = number(&raw, "omega")?.expect("present");
                if !(w > 0.0) || !w.is_finite() {
                    return Err(raw.error("omega", format!("must be positive or `auto`, got {w}")));
                }
                Omega::Fixed(w)
            }
        };
        let tol = number(&raw, "tol")?;
        if let Some(t) = tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(raw.error("tol", format!("must lie in (0, 1), got {t}")));
            }
        }
        let max_iter: usize = raw.parse_or("max_iter", 2000)?;
        if max_iter == 0 {
            return Err(raw.error("max_iter", "must be at least 1"));
        }
        let memory_mb = number(&raw, "memory_mb")?.unwrap_or(3072.0);
        if !(memory_mb > 0.0) || !memory_mb.is_finite() {
            return Err(raw.error("memory_mb", format!("must be positive, got {memory_mb}")));
        }
        let half_step = match raw.get("half_step") {
            None | Some("auto") => HalfStepPolicy::Auto,
            Some("dense") => HalfStepPolicy::Dense,
            Some("cg") => HalfStepPolicy::Cg { factor: 0.1 },
            Some(v) => return Err(raw.error("half_step", format!("`{v}`: expected auto, dense or cg"))),
        };
        let threads: usize = raw.parse_or("threads", 1)?;
        if threads == 0 {
            return Err(raw.error("threads", "must be at least 1"));
        }
        let cfg = Self {
            raw,
            dim,
            alpha,
            rho,
            domain,
            grid,
            time,
            initial,
            solver,
            precond,
            circulant,
            omega,
            tol,
            max_iter,
            memory_budget: (memory_mb * 1024.0 * 1024.0) as usize,
            half_step,
            threads,
        };
        if cfg.raw.has("M") && cfg.raw.has("h") {
            return Err(cfg.raw.error("h", "give either M or h, not both"));
        }
        if cfg.raw.has("M_list") && cfg.raw.has("h_list") {
            return Err(cfg.raw.error("h_list", "give either M_list or h_list, not both"));
        }
        Ok(cfg)
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    /// Interior points per axis from `M` or `h`.
    pub fn side(&self) -> Result<usize, ConfigError> {
        if let Some(m) = self.raw.parse_opt::<usize>("M")? {
            if m == 0 {
                return Err(self.raw.error("M", "must be at least 1"));
            }
            return Ok(m);
        }
        if let Some(h) = number(&self.raw, "h")? {
            return self.grid.side(self.length(), h).map_err(|e| self.raw.error("h", e));
        }
        Err(ConfigError {
            origin: None,
            field: "M".into(),
            message: "one of M or h is required".into(),
        })
    }

    /// `(list value, M)` pairs from `M_list`/`h_list`, falling back to the
    /// single size.
    pub fn sizes(&self) -> Result<Vec<(f64, usize)>, ConfigError> {
        if let Some(ms) = self.raw.list("M_list")? {
            return ms
                .into_iter()
                .map(|m| {
                    if m >= 1.0 && m.fract() == 0.0 {
                        Ok((m, m as usize))
                    } else {
                        Err(self.raw.error("M_list", format!("`{m}` is not a positive integer")))
                    }
                })
                .collect();
        }
        if let Some(hs) = self.raw.list("h_list")? {
            return hs
                .into_iter()
                .map(|h| {
                    self.grid
                        .side(self.length(), h)
                        .map(|m| (h, m))
                        .map_err(|e| self.raw.error("h_list", e))
                })
                .collect();
        }
        let m = self.side()?;
        let v = number(&self.raw, "h")?.unwrap_or(m as f64);
        Ok(vec![(v, m)])
    }

    /// Name of the first CSV column of `bench`.
    pub fn size_label(&self) -> &'static str {
        if self.raw.has("h_list") || (!self.raw.has("M_list") && self.raw.has("h")) {
            "h"
        } else {
            "M"
        }
    }

    pub fn grid_spec(&self, m: usize) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.dim, self.domain.0, self.domain.1, m, self.time.n_steps, self.time.t_end)
            .map_err(|e| ConfigError {
                origin: None,
                field: "grid".into(),
                message: e.to_string(),
            })
    }

    pub fn problem(&self, m: usize) -> Result<Problem, ConfigError> {
        Problem::new(self.grid_spec(m)?, self.alpha, self.rho).map_err(|e| self.raw.error("alpha", e.to_string()))
    }

    /// Methods for bench and sweeps, default `tau,circulant,none`.
    pub fn methods(&self) -> Result<Vec<PrecondKind>, ConfigError> {
        match self.raw.get("methods") {
            None => Ok(vec![PrecondKind::Tau, PrecondKind::Circulant, PrecondKind::None]),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<PrecondKind>().map_err(|e| self.raw.error("methods", e.to_string())))
                .collect(),
        }
    }

    /// A sweep list that must be present and nonempty.
    pub fn required_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.raw.list(key)?.ok_or_else(|| ConfigError {
            origin: None,
            field: key.into(),
            message: "a nonempty list is required".into(),
        })
    }

    pub fn operator(&self) -> Result<OperatorTag, ConfigError> {
        match self.raw.get("operator") {
            None => Ok(OperatorTag::preconditioned(self.precond)),
            Some(v) => v.parse().map_err(|e: String| self.raw.error("operator", e)),
        }
    }

    pub fn force_ritz(&self) -> Result<bool, ConfigError> {
        match self.raw.get("ritz") {
            None | Some("auto") => Ok(false),
            Some("always") => Ok(true),
            Some(v) => Err(self.raw.error("ritz", format!("`{v}`: expected auto or always"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw.get(key).map(PathBuf::from)
    }
}

fn number(raw: &RawConfig, key: &str) -> Result<Option<f64>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some(v) => {
            let x = parse_number(v).map_err(|e| raw.error(key, e))?;
            if !x.is_finite() {
                return Err(raw.error(key, format!("`{v}` is not finite")));
            }
            Ok(Some(x))
        }
    }
}

/// Two of `N`, `dt`, `t_end` fix the third. Missing values come from the
/// defaults `t_end = 8, Δt = 0.04` in 1D and `t_end = 5, Δt = 0.05` in 2D.
fn resolve_time(raw: &RawConfig, dim: usize) -> Result<TimeSpec, ConfigError> {
    let n: Option<usize> = raw.parse_opt("N")?;
    let dt = number(raw, "dt")?;
    let t_end = number(raw, "t_end")?;
    if n == Some(0) {
        return Err(raw.error("N", "must be at least 1"));
    }
    if let Some(d) = dt.filter(|d| !(*d > 0.0)) {
        return Err(raw.error("dt", format!("must be positive, got {d}")));
    }
    if let Some(t) = t_end.filter(|t| !(*t > 0.0)) {
        return Err(raw.error("t_end", format!("must be positive, got {t}")));
    }
    let (default_t, default_dt) = if dim == 1 { (8.0, 0.04) } else { (5.0, 0.05) };
    let steps_for = |t: f64, d: f64, key: &str| -> Result<usize, ConfigError> {
        let q = t / d;
        let r = q.round();
        if r < 1.0 || (q - r).abs() > 1e-9 * q.max(1.0) {
            return Err(raw.error(key, format!("t_end = {t} is not a whole number of steps of {d}")));
        }
        Ok(r as usize)
    };
    Ok(match (n, dt, t_end) {
        (Some(n), Some(d), Some(t)) => {
            if (n as f64 * d - t).abs() > 1e-9 * t {
                return Err(raw.error("t_end", format!("N * dt = {} disagrees with t_end = {t}", n as f64 * d)));
            }
            TimeSpec { n_steps: n, t_end: t }
        }
        (Some(n), None, t) => TimeSpec {
            n_steps: n,
            t_end: t.unwrap_or(default_t),
        },
        (Some(n), Some(d), None) => TimeSpec {
            n_steps: n,
            t_end: n as f64 * d,
        },
        (None, d, t) => {
            let d = d.unwrap_or(default_dt);
            let t = t.unwrap_or(default_t);
            let key = if raw.has("dt") { "dt" } else { "t_end" };
            TimeSpec {
                n_steps: steps_for(t, d, key)?,
                t_end: t,
            }
        }
    })
}
