//! Command implementations. Every command writes `key = value` lines to
//! its output stream and returns an exit code: 0 success, 1 not
//! contracting, 2 bad input, 3 integration diverged.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use contrakit::composite::{
    auto_step, check_step, disturbance_bound, estimate_constants, mu_max_composite_lyapunov,
    simulate_closed_loop, theorem1_fast_bound, theorem2_holds, theorem2_mu_star,
    theorem2_mu_star_capped, BoundCurves, Manifold, StandardDesign,
};
use contrakit::contraction::{
    check_region_with, partial_contraction_check_with, ContractionReport, Metric,
};
use contrakit::highgain::{control_law, highgain_constants, simulate_highgain, theorem4_bound};
use contrakit::model::{norm2, norm2_diff, BoxRegion, Trajectory};
use contrakit::nonstandard::{
    self, fast_error_dynamics, simulate_tracking, theorem3_fast_bound, theorem3_slow_limit,
    SLOW_LIMIT_MAPPING, STEADY_WINDOW,
};
use contrakit::numerics::rk4_integrate_recording;
use contrakit::par::{map_ordered, Execution};
use contrakit::sysdsl::{load_system, load_system_path, LoadedSystem};
use contrakit::Error;

use crate::output::{
    line_chart, write_table_csv, write_trajectory_csv, write_truncation_marker, BoundColumns,
};
use crate::registry::{self, ExampleEntry, Kind};
use crate::{BoundsArgs, CheckArgs, ParamArgs, ReproduceArgs, SimulateArgs, SourceArgs, Sub};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONTRACTING: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IntegrationDiverged { .. } => EXIT_DIVERGED,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(format!("I/O error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

/// Where a system comes from. File sources are always treated as standard
/// models.
#[derive(Clone, Debug)]
pub enum Source {
    Example(ExampleEntry),
    File { path: PathBuf, loaded: LoadedSystem },
}

impl Source {
    pub fn from_args(a: &SourceArgs) -> CliResult<Self> {
        match (&a.example, &a.file) {
            (Some(id), None) => registry::find(id).map(Source::Example).ok_or_else(|| {
                let ids: Vec<&str> = registry::entries().iter().map(|e| e.id).collect();
                CliError::input(format!(
                    "unknown example '{id}' (known: {})",
                    ids.join(", ")
                ))
            }),
            (None, Some(path)) => {
                let loaded = load_system_path(path)?;
                Ok(Source::File {
                    path: path.clone(),
                    loaded,
                })
            }
            _ => Err(CliError::input("give exactly one of --example or --file")),
        }
    }

    pub fn example(id: &str) -> CliResult<Self> {
        registry::find(id)
            .map(Source::Example)
            .ok_or_else(|| CliError::input(format!("unknown example '{id}'")))
    }

    pub fn kind(&self) -> Kind {
        match self {
            Source::Example(e) => e.kind,
            Source::File { .. } => Kind::Standard,
        }
    }

    /// Output file stem.
    pub fn name(&self) -> String {
        match self {
            Source::Example(e) => e.id.to_string(),
            Source::File { path, loaded } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| loaded.system.name.clone()),
        }
    }

    pub fn dims(&self) -> CliResult<(usize, usize)> {
        match self {
            Source::Example(e) => {
                let l = load_system(e.source)?;
                Ok((l.system.n, l.system.m))
            }
            Source::File { loaded, .. } => Ok((loaded.system.n, loaded.system.m)),
        }
    }

    fn default_param(&self) -> f64 {
        match self {
            Source::Example(e) => e.param,
            Source::File { loaded, .. } => loaded.file.mu,
        }
    }

    fn default_t_end(&self) -> f64 {
        match self {
            Source::Example(e) => e.t_end,
            Source::File { .. } => 10.0,
        }
    }

    fn default_init(&self) -> Vec<f64> {
        match self {
            Source::Example(e) => e.init.to_vec(),
            Source::File { loaded, .. } => {
                let mut v = loaded.system.slow_region.center();
                v.extend(loaded.system.fast_region.center());
                v
            }
        }
    }

    /// Composite design at `mu`, or `None` for a file without controls.
    fn standard_design(&self, mu: f64) -> CliResult<Option<StandardDesign>> {
        match self {
            Source::Example(e) => Ok(Some(registry::standard_design(e.id, mu)?)),
            Source::File { loaded, .. } => {
                let system = loaded.system.with_mu(mu)?;
                let (control, manifold) = loaded.control_for(mu);
                let Some(control) = control else {
                    return Ok(None);
                };
                let manifold = match manifold {
                    Some(h) => Manifold::Analytic(h),
                    None => Manifold::Newton,
                };
                let (n, m) = (system.n, system.m);
                let mut d = StandardDesign::new(system, control, manifold);
                if loaded.slow_metric.is_some() || loaded.fast_metric.is_some() {
                    d = d.with_metrics(
                        loaded
                            .slow_metric
                            .clone()
                            .unwrap_or_else(|| Metric::identity(n)),
                        loaded
                            .fast_metric
                            .clone()
                            .unwrap_or_else(|| Metric::identity(m)),
                    );
                }
                Ok(Some(d))
            }
        }
    }

    fn open_loop(&self) -> Option<&LoadedSystem> {
        match self {
            Source::File { loaded, .. } if loaded.control.is_none() && loaded.file.u1.is_none() => {
                Some(loaded)
            }
            _ => None,
        }
    }
}

/// `mu` for every source except the high-gain chain, which takes `k`.
fn validate_param(kind: Kind, v: f64) -> CliResult<f64> {
    match kind {
        Kind::HighGain if !(v >= 1.0) || !v.is_finite() => {
            Err(CliError::input(format!("k = {v} must be >= 1")))
        }
        Kind::HighGain => Ok(v),
        _ if !(v > 0.0 && v <= 1.0) => Err(CliError::input(format!("mu = {v} must lie in (0, 1]"))),
        _ => Ok(v),
    }
}

fn resolve_param(src: &Source, p: &ParamArgs) -> CliResult<f64> {
    let kind = src.kind();
    let v = if kind == Kind::HighGain {
        if p.mu.is_some() {
            return Err(CliError::input(
                "the high-gain example takes --k (mu = 1/k), not --mu",
            ));
        }
        p.k.unwrap_or_else(|| src.default_param())
    } else {
        if p.k.is_some() {
            return Err(CliError::input("--k only applies to the high-gain example"));
        }
        p.mu.unwrap_or_else(|| src.default_param())
    };
    validate_param(kind, v)
}

fn check_per_axis(per_axis: usize) -> CliResult<usize> {
    if per_axis < 2 {
        return Err(CliError::input(format!(
            "--per-axis {per_axis} must be at least 2"
        )));
    }
    Ok(per_axis)
}

fn mu_of(kind: Kind, param: f64) -> f64 {
    if kind == Kind::HighGain {
        1.0 / param
    } else {
        param
    }
}

pub fn parse_init(s: &str, expected: usize) -> CliResult<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("--init: '{}' is not a number", t.trim())))
        })
        .collect::<CliResult<_>>()?;
    if vals.len() != expected {
        return Err(CliError::input(format!(
            "--init has {} values, the system has {expected} states",
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CliError::input("--init values must be finite"));
    }
    Ok(vals)
}

/// `LO:HI:STEPS`, endpoints included.
pub fn parse_sweep(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::input(format!("--sweep '{s}' must look like LO:HI:STEPS"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Standard => "standard",
        Kind::Nonstandard => "nonstandard",
        Kind::HighGain => "highgain",
    }
}

// ---------------------------------------------------------------- check

fn write_report(out: &mut dyn Write, label: &str, r: &ContractionReport) -> io::Result<()> {
    writeln!(out, "subsystem = {label}")?;
    writeln!(out, "verdict = {}", r.verdict)?;
    writeln!(out, "rate = {:.6e}", r.rate)?;
    writeln!(out, "worst_eig = {:.6e}", r.worst_eig)?;
    writeln!(out, "metric_chi = {:.6e}", r.metric_chi)?;
    writeln!(out, "worst_point = {}", fmt_vec(&r.worst_point))?;
    writeln!(out, "samples = {}", r.samples)
}

fn joint_field<'a>(
    n: usize,
    slow: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send + 'a,
    fast: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send + 'a,
    mu: f64,
) -> impl Fn(&[f64]) -> Vec<f64> + Sync + Send + 'a {
    move |p: &[f64]| {
        let (x, z) = p.split_at(n);
        let mut d = slow(x, z);
        d.extend(fast(x, z).into_iter().map(|v| v / mu));
        d
    }
}

fn check_standard(
    src: &Source,
    mu: f64,
    sub: Option<Sub>,
    per_axis: usize,
    exec: Execution,
) -> CliResult<(Sub, ContractionReport)> {
    let Some(design) = src.standard_design(mu)? else {
        let loaded = src
            .open_loop()
            .ok_or_else(|| CliError::input("system file declares a partial control law"))?;
        let sub = sub.unwrap_or(Sub::Full);
        if sub != Sub::Full {
            return Err(CliError::input(
                "without a control law only --sub full (the open loop) can be checked",
            ));
        }
        let sys = loaded.system.with_mu(mu)?;
        let n = sys.n;
        let region = sys.joint_region();
        let dim = region.dim();
        let field = joint_field(
            n,
            |x, z| sys.slow(x, z, 0.0),
            |x, z| sys.fast(x, z, mu, 0.0),
            mu,
        );
        let r = check_region_with(field, &region, &Metric::identity(dim), per_axis, exec)?;
        return Ok((sub, r));
    };
    let sys = &design.system;
    let n = sys.n;
    let sub = sub.unwrap_or(Sub::Reduced);
    let r = match sub {
        Sub::Reduced => check_region_with(
            |x| design.reduced(x).unwrap_or_else(|_| vec![f64::NAN; n]),
            &sys.slow_region,
            &design.slow_metric,
            per_axis,
            exec,
        )?,
        Sub::Fast => partial_contraction_check_with(
            |z, x| design.closed_fast(x, z, mu),
            &sys.fast_region,
            &sys.slow_region,
            &design.fast_metric,
            per_axis,
            exec,
        )?,
        Sub::Full => {
            let region = sys.joint_region();
            let field = joint_field(
                n,
                |x, z| design.closed_slow(x, z),
                |x, z| design.closed_fast(x, z, mu),
                mu,
            );
            check_region_with(
                field,
                &region,
                &Metric::identity(region.dim()),
                per_axis,
                exec,
            )?
        }
    };
    Ok((sub, r))
}

fn check_nonstandard(
    mu: f64,
    sub: Option<Sub>,
    per_axis: usize,
    exec: Execution,
) -> CliResult<(Sub, ContractionReport)> {
    let design = registry::nonstandard_design(mu)?;
    let sys = &design.error.system;
    let n = sys.n;
    let sub = sub.unwrap_or(Sub::Reduced);
    let r = match sub {
        Sub::Reduced => check_region_with(
            |e| design.reduced(0.0, e),
            &sys.slow_region,
            &design.slow_metric,
            per_axis,
            exec,
        )?,
        Sub::Fast => {
            let fields = fast_error_dynamics(&design);
            partial_contraction_check_with(
                |ez, e| (fields.unperturbed)(0.0, e, ez),
                &sys.fast_region,
                &sys.slow_region,
                &design.fast_metric,
                per_axis,
                exec,
            )?
        }
        Sub::Full => {
            let region = sys.joint_region();
            let u = |x: &[f64], z: &[f64]| design.input(0.0, x, z);
            let field = joint_field(
                n,
                |x, z| sys.slow(x, z, u(x, z)),
                |x, z| sys.fast(x, z, mu, u(x, z)),
                mu,
            );
            check_region_with(
                field,
                &region,
                &Metric::identity(region.dim()),
                per_axis,
                exec,
            )?
        }
    };
    Ok((sub, r))
}

fn check_highgain(
    k: f64,
    sub: Option<Sub>,
    per_axis: usize,
    exec: Execution,
) -> CliResult<(Sub, ContractionReport)> {
    let chain = registry::highgain_chain()?;
    let design = registry::highgain_design(&chain, k)?;
    let n = chain.n;
    let mu = design.mu;
    let scaled = registry::highgain_scaled_region(k);
    let eta_region = BoxRegion::new(scaled.lower()[..n].to_vec(), scaled.upper()[..n].to_vec())?;
    let xi_region = BoxRegion::new(scaled.lower()[n..].to_vec(), scaled.upper()[n..].to_vec())?;
    let sub = sub.unwrap_or(Sub::Reduced);
    let r = match sub {
        Sub::Reduced => check_region_with(
            |eta| design.reduced(&chain, eta),
            &eta_region,
            &Metric::identity(n),
            per_axis,
            exec,
        )?,
        Sub::Fast => {
            let a1 = design.a[0];
            partial_contraction_check_with(
                |xi, eta| {
                    let mut d = design.g.mul_vec(xi);
                    let last = d.len() - 1;
                    d[last] += a1 * (design.rho)(eta);
                    for (di, gi) in d.iter_mut().zip(design.gbar3(&chain, eta, xi)) {
                        *di += mu * gi;
                    }
                    d
                },
                &xi_region,
                &eta_region,
                &Metric::identity(chain.m),
                per_axis,
                exec,
            )?
        }
        Sub::Full => {
            let loaded = load_system(registry::HIGHGAIN_SPS)?;
            let region = loaded.system.joint_region();
            let field = |p: &[f64]| {
                let (x, z) = p.split_at(n);
                let u = control_law(&design, x, z);
                let mut d = (chain.slow_f)(x, z);
                d.extend(chain.zdot(x, z, u));
                d
            };
            check_region_with(
                field,
                &region,
                &Metric::identity(region.dim()),
                per_axis,
                exec,
            )?
        }
    };
    Ok((sub, r))
}

pub fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> CliResult<i32> {
    let src = Source::from_args(&a.source)?;
    let param = resolve_param(&src, &a.params)?;
    let per_axis = check_per_axis(a.params.per_axis)?;
    let exec = Execution::default();
    let kind = src.kind();
    let (sub, report) = match kind {
        Kind::Standard => check_standard(&src, param, a.sub, per_axis, exec)?,
        Kind::Nonstandard => check_nonstandard(param, a.sub, per_axis, exec)?,
        Kind::HighGain => check_highgain(param, a.sub, per_axis, exec)?,
    };
    writeln!(out, "system = {}", src.name())?;
    if kind == Kind::HighGain {
        writeln!(out, "k = {param}")?;
    }
    writeln!(out, "mu = {}", mu_of(kind, param))?;
    writeln!(out, "per_axis = {per_axis}")?;
    let label = match sub {
        Sub::Reduced => "reduced",
        Sub::Fast => "fast",
        Sub::Full => "full",
    };
    write_report(out, label, &report)?;
    Ok(if report.is_contracting() {
        EXIT_OK
    } else {
        EXIT_NOT_CONTRACTING
    })
}

// ------------------------------------------------------------- simulate

/// Resolved settings for one simulation run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    /// `mu`, or `k` for the high-gain chain.
    pub param: f64,
    pub t_end: f64,
    pub dt: f64,
    pub per_axis: usize,
    pub init: Vec<f64>,
    pub saturation: Option<f64>,
}

impl RunConfig {
    pub fn new(
        source: Source,
        param: f64,
        t_end: Option<f64>,
        dt: Option<f64>,
        init: Option<&str>,
    ) -> CliResult<Self> {
        let kind = source.kind();
        let param = validate_param(kind, param)?;
        let t_end = t_end.unwrap_or_else(|| source.default_t_end());
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(CliError::input(format!("--t-end {t_end} must be positive")));
        }
        let mu = mu_of(kind, param);
        let dt = match dt {
            Some(dt) => {
                check_step(dt, mu)?;
                dt
            }
            None => auto_step(mu, t_end),
        };
        let (n, m) = source.dims()?;
        let init = match init {
            Some(s) => parse_init(s, n + m)?,
            None => source.default_init(),
        };
        Ok(RunConfig {
            source,
            param,
            t_end,
            dt,
            per_axis: contrakit::contraction::DEFAULT_PER_AXIS,
            init,
            saturation: None,
        })
    }

    pub fn mu(&self) -> f64 {
        mu_of(self.source.kind(), self.param)
    }

    /// Same run at another parameter, with `dt` re-derived unless `fixed_dt`.
    fn at_param(&self, param: f64, fixed_dt: Option<f64>) -> CliResult<Self> {
        let kind = self.source.kind();
        let param = validate_param(kind, param)?;
        let mu = mu_of(kind, param);
        let dt = match fixed_dt {
            Some(dt) => {
                check_step(dt, mu)?;
                dt
            }
            None => auto_step(mu, self.t_end),
        };
        Ok(RunConfig {
            param,
            dt,
            ..self.clone()
        })
    }
}

type Curve = Box<dyn Fn(f64) -> f64>;

/// Result of one run, ready to be written out.
pub struct Simulation {
    pub n: usize,
    pub m: usize,
    pub trajectory: Trajectory,
    pub fast_bound: Option<Curve>,
    pub slow_bound: Option<Curve>,
    pub error_label: &'static str,
    /// Per-sample error tracked by the bounds; empty after divergence.
    pub error: Vec<f64>,
    /// Extra table for the high-gain chain: `t, eta.., xi.., manifold_error`.
    pub scaled: Option<(Vec<String>, Vec<Vec<f64>>)>,
    pub report: Vec<(String, String)>,
    pub diverged: Option<f64>,
    pub steady_error: f64,
}

impl Simulation {
    fn empty(n: usize, m: usize, error_label: &'static str) -> Self {
        Simulation {
            n,
            m,
            trajectory: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                inputs: Vec::new(),
                step: 0.0,
            },
            fast_bound: None,
            slow_bound: None,
            error_label,
            error: Vec::new(),
            scaled: None,
            report: Vec::new(),
            diverged: None,
            steady_error: f64::NAN,
        }
    }

    fn note(&mut self, key: &str, value: impl Into<String>) {
        self.report.push((key.to_string(), value.into()));
    }

    /// Takes a finished run, or the partial trajectory of a diverged one.
    fn absorb(&mut self, r: contrakit::Result<Trajectory>) -> CliResult<bool> {
        match r {
            Ok(t) => {
                self.trajectory = t;
                Ok(true)
            }
            Err(Error::IntegrationDiverged { t_last, partial }) => {
                self.trajectory = *partial;
                self.diverged = Some(t_last);
                Ok(false)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn final_norm(&self) -> f64 {
        self.trajectory.last_state().map(norm2).unwrap_or(f64::NAN)
    }

    fn max_abs_u(&self) -> f64 {
        self.trajectory
            .inputs
            .iter()
            .fold(0.0f64, |a, u| a.max(u.abs()))
    }

    fn window_max(&self, t_end: f64) -> f64 {
        let from = t_end * (1.0 - STEADY_WINDOW);
        self.trajectory
            .window_from(from)
            .filter_map(|i| self.error.get(i).copied())
            .fold(f64::NAN, f64::max)
    }

    fn summarize(&mut self) {
        let t = &self.trajectory;
        let last_t = t.times.last().copied().unwrap_or(f64::NAN);
        let last = t.last_state().map(fmt_vec).unwrap_or_default();
        let (len, fnorm, umax) = (t.len(), self.final_norm(), self.max_abs_u());
        self.note("samples", len.to_string());
        self.note("t_final", format!("{last_t:.6e}"));
        self.note("final_state", last);
        self.note("final_norm", format!("{fnorm:.6e}"));
        self.note("max_abs_u", format!("{umax:.6e}"));
        if let Some(tl) = self.diverged {
            self.note("diverged_at", format!("{tl:.6e}"));
        }
    }
}

fn simulate_standard(cfg: &RunConfig, with_bounds: bool) -> CliResult<Simulation> {
    let (n, m) = cfg.source.dims()?;
    let mu = cfg.mu();
    let (x0, z0) = cfg.init.split_at(n);
    let Some(design) = cfg.source.standard_design(mu)? else {
        let loaded = cfg
            .source
            .open_loop()
            .ok_or_else(|| CliError::input("system file declares a partial control law"))?;
        check_step(cfg.dt, mu)?;
        let sys = loaded.system.with_mu(mu)?;
        let mut sim = Simulation::empty(n, m, "none");
        let field = |_t: f64, s: &[f64]| {
            let (x, z) = s.split_at(n);
            let mut d = sys.slow(x, z, 0.0);
            d.extend(sys.fast(x, z, mu, 0.0).into_iter().map(|v| v / mu));
            d
        };
        sim.absorb(rk4_integrate_recording(
            field,
            |_, _| 0.0,
            &cfg.init,
            0.0,
            cfg.t_end,
            cfg.dt,
        ))?;
        sim.note("mode", "open loop (no control law in file)");
        sim.summarize();
        return Ok(sim);
    };
    let mut sim = Simulation::empty(n, m, "manifold_error");
    match simulate_closed_loop(&design, x0, z0, cfg.t_end, cfg.dt) {
        Ok(run) => {
            sim.trajectory = run.trajectory;
            sim.error = run.fast_error;
            sim.steady_error = sim.window_max(cfg.t_end);
            sim.note("steady_manifold_error", format!("{:.6e}", sim.steady_error));
        }
        Err(e) => {
            sim.absorb(Err(e))?;
        }
    }
    if with_bounds {
        let z0_err = norm2_diff(z0, &design.manifold_at(x0, None)?);
        let curves = estimate_constants(&design, cfg.per_axis, Execution::default())
            .and_then(|c| BoundCurves::new(&c.bounds, 0.0, z0_err).map(|b| (c, b)));
        match curves {
            Ok((c, curves)) => {
                sim.note("lambda_x", format!("{:.6e}", c.bounds.lambda_x));
                sim.note("lambda_z", format!("{:.6e}", c.bounds.lambda_z));
                sim.note("fast_limit", format!("{:.6e}", curves.fast_limit));
                match curves.slow_limit {
                    Some(v) => sim.note("slow_limit", format!("{v:.6e}")),
                    None => sim.note("slow_limit", "inapplicable"),
                }
                for w in &curves.warnings {
                    sim.note("warning", w.clone());
                }
                let fb = curves.fast;
                sim.fast_bound = Some(Box::new(move |t| fb.eval(t)));
                if let Some(sb) = curves.slow {
                    sim.slow_bound = Some(Box::new(move |t| sb.eval(t)));
                }
            }
            Err(e) => sim.note("bounds", format!("unavailable: {e}")),
        }
    }
    sim.summarize();
    Ok(sim)
}

fn simulate_nonstandard(cfg: &RunConfig, with_bounds: bool) -> CliResult<Simulation> {
    let (n, m) = cfg.source.dims()?;
    let mu = cfg.mu();
    let (x0, z0) = cfg.init.split_at(n);
    let design = registry::nonstandard_design(mu)?;
    let mut sim = Simulation::empty(n, m, "fast_error");
    match simulate_tracking(&design, x0, z0, cfg.t_end, cfg.dt) {
        Ok(run) => {
            sim.trajectory = run.trajectory;
            sim.error = run.fast_error;
            sim.steady_error = run.steady_error;
            sim.note("steady_error", format!("{:.6e}", run.steady_error));
            sim.note("window_start", format!("{:.6e}", run.window_start));
        }
        Err(e) => {
            sim.absorb(Err(e))?;
        }
    }
    if with_bounds {
        let e0 = norm2_diff(z0, &design.z_de(0.0, x0));
        match nonstandard::estimate_constants(&design, cfg.per_axis, Execution::default()) {
            Ok(c) => {
                let b = c.bound_set();
                match theorem3_fast_bound(&b, e0) {
                    Ok(fb) => {
                        sim.note("fast_limit", format!("{:.6e}", fb.limit()));
                        sim.fast_bound = Some(Box::new(move |t| fb.eval(t)));
                    }
                    Err(e) => sim.note("fast_limit", format!("inapplicable: {e}")),
                }
                match theorem3_slow_limit(&b) {
                    Ok(v) => sim.note("slow_limit", format!("{v:.6e}")),
                    Err(e) => sim.note("slow_limit", format!("inapplicable: {e}")),
                }
            }
            Err(e) => sim.note("bounds", format!("unavailable: {e}")),
        }
    }
    sim.summarize();
    Ok(sim)
}

fn simulate_highgain_cfg(cfg: &RunConfig, with_bounds: bool) -> CliResult<Simulation> {
    let chain = registry::highgain_chain()?;
    let k = cfg.param;
    let design = registry::highgain_design(&chain, k)?;
    let (n, m) = (chain.n, chain.m);
    let (x0, z0) = cfg.init.split_at(n);
    let mut sim = Simulation::empty(n, m, "manifold_error");
    match simulate_highgain(&chain, &design, x0, z0, cfg.t_end, cfg.dt, cfg.saturation) {
        Ok(run) => {
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).map(|i| format!("eta{i}")));
            header.extend((1..=m).map(|j| format!("xi{j}")));
            header.push("manifold_error".into());
            let rows = run
                .trajectory
                .times
                .iter()
                .zip(&run.scaled)
                .zip(&run.manifold_error)
                .map(|((t, s), e)| {
                    let mut r = vec![*t];
                    r.extend_from_slice(s);
                    r.push(*e);
                    r
                })
                .collect();
            sim.scaled = Some((header, rows));
            sim.trajectory = run.trajectory;
            sim.error = run.manifold_error;
            sim.steady_error = run.steady_error;
            sim.note("steady_error", format!("{:.6e}", run.steady_error));
            sim.note("steady_slow", format!("{:.6e}", run.steady_slow));
            sim.note("window_start", format!("{:.6e}", run.window_start));
        }
        Err(e) => {
            sim.absorb(Err(e))?;
        }
    }
    if let Some(s) = cfg.saturation {
        sim.note("saturation", format!("{s}"));
    }
    if with_bounds {
        let region = registry::highgain_scaled_region(k);
        match highgain_constants(&chain, &design, &region, cfg.per_axis) {
            Ok(c) => match theorem4_bound(c.c4, c.c5, c.check.sup_jac, &design) {
                Ok(v) => sim.note("manifold_bound", format!("{v:.6e}")),
                Err(e) => sim.note("manifold_bound", format!("inapplicable: {e}")),
            },
            Err(e) => sim.note("manifold_bound", format!("unavailable: {e}")),
        }
    }
    sim.summarize();
    Ok(sim)
}

pub fn run_simulation(cfg: &RunConfig, with_bounds: bool) -> CliResult<Simulation> {
    match cfg.source.kind() {
        Kind::Standard => simulate_standard(cfg, with_bounds),
        Kind::Nonstandard => simulate_nonstandard(cfg, with_bounds),
        Kind::HighGain => simulate_highgain_cfg(cfg, with_bounds),
    }
}

/// Writes `<stem>.csv`, `<stem>_scaled.csv` when present and `<stem>.svg`
/// when asked. Returns the written paths.
pub fn write_simulation(
    sim: &Simulation,
    dir: &Path,
    stem: &str,
    svg: bool,
    title: &str,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let t = &sim.trajectory;

    let path = dir.join(format!("{stem}.csv"));
    let mut f = BufWriter::new(File::create(&path)?);
    let bounds = BoundColumns {
        fast: sim.fast_bound.as_deref(),
        slow: sim.slow_bound.as_deref(),
    };
    write_trajectory_csv(
        &mut f, sim.n, sim.m, &t.times, &t.states, &t.inputs, &bounds,
    )?;
    if let Some(tl) = sim.diverged {
        write_truncation_marker(&mut f, tl)?;
    }
    f.flush()?;
    written.push(path);

    if let Some((header, rows)) = &sim.scaled {
        let path = dir.join(format!("{stem}_scaled.csv"));
        let mut f = BufWriter::new(File::create(&path)?);
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table_csv(&mut f, &h, rows)?;
        f.flush()?;
        written.push(path);
    }

    if svg {
        let mut series = Vec::new();
        for i in 0..sim.n {
            series.push((format!("x{}", i + 1), t.component(i)));
        }
        for j in 0..sim.m {
            series.push((format!("z{}", j + 1), t.component(sim.n + j)));
        }
        if sim.error.len() == t.len() {
            series.push((sim.error_label.to_string(), sim.error.clone()));
        }
        if let Some(fb) = &sim.fast_bound {
            series.push((
                "fast_bound".to_string(),
                t.times.iter().map(|&s| fb(s)).collect(),
            ));
        }
        let path = dir.join(format!("{stem}.svg"));
        fs::write(&path, line_chart(title, &t.times, &series))?;
        written.push(path);
    }
    Ok(written)
}

fn print_pairs(out: &mut dyn Write, pairs: &[(String, String)]) -> io::Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{k} = {v}")?;
    }
    Ok(())
}

fn diverged_error(t_last: f64) -> CliError {
    CliError {
        code: EXIT_DIVERGED,
        message: format!("integration diverged after t = {t_last}; partial trajectory written"),
    }
}

fn sweep_simulate(
    cfg: &RunConfig,
    values: &[f64],
    fixed_dt: Option<f64>,
    dir: &Path,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| cfg.at_param(v, fixed_dt))
        .collect::<CliResult<_>>()?;
    let rows: Vec<Vec<f64>> =
        map_ordered(Execution::default(), &configs, |c| {
            match run_simulation(c, false) {
                Ok(sim) if sim.diverged.is_none() => {
                    vec![c.param, sim.steady_error, sim.final_norm(), sim.max_abs_u()]
                }
                _ => vec![c.param, f64::NAN, f64::NAN, f64::NAN],
            }
        });
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}_sweep.csv", cfg.source.name()));
    let mut f = BufWriter::new(File::create(&path)?);
    let pname = if cfg.source.kind() == Kind::HighGain {
        "k"
    } else {
        "mu"
    };
    write_table_csv(
        &mut f,
        &[pname, "steady_error", "final_norm", "max_abs_u"],
        &rows,
    )?;
    f.flush()?;
    writeln!(out, "sweep_points = {}", rows.len())?;
    for r in &rows {
        writeln!(
            out,
            "{pname} = {:.6e}, steady_error = {:.6e}, final_norm = {:.6e}",
            r[0], r[1], r[2]
        )?;
    }
    writeln!(out, "output = {}", path.display())?;
    let failed = rows
        .iter()
        .filter(|r| r[1].is_nan() && r[2].is_nan())
        .count();
    if failed > 0 {
        writeln!(out, "failed_points = {failed}")?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let src = Source::from_args(&a.source)?;
    let kind = src.kind();
    if a.saturation.is_some() && kind != Kind::HighGain {
        return Err(CliError::input(
            "--saturation only applies to the high-gain example",
        ));
    }
    let param = resolve_param(&src, &a.params)?;
    let per_axis = check_per_axis(a.params.per_axis)?;
    let sweep = a.sweep.as_deref().map(parse_sweep).transpose()?;
    // With a sweep, dt is checked per point.
    let dt_first = if sweep.is_some() { None } else { a.dt };
    let mut cfg = RunConfig::new(src, param, a.t_end, dt_first, a.init.as_deref())?;
    cfg.per_axis = per_axis;
    cfg.saturation = a.saturation;
    if let Some(values) = sweep {
        return sweep_simulate(&cfg, &values, a.dt, &a.out, out);
    }

    let sim = run_simulation(&cfg, true)?;
    let name = cfg.source.name();
    let written = write_simulation(&sim, &a.out, &name, a.svg, &name)?;
    writeln!(out, "system = {name}")?;
    if kind == Kind::HighGain {
        writeln!(out, "k = {}", cfg.param)?;
    }
    writeln!(out, "mu = {}", cfg.mu())?;
    writeln!(out, "dt = {:e}", cfg.dt)?;
    writeln!(out, "t_end = {}", cfg.t_end)?;
    print_pairs(out, &sim.report)?;
    for p in &written {
        writeln!(out, "output = {}", p.display())?;
    }
    match sim.diverged {
        Some(tl) => Err(diverged_error(tl)),
        None => Ok(EXIT_OK),
    }
}

// --------------------------------------------------------------- bounds

fn bounds_standard(src: &Source, mu: f64, per_axis: usize, out: &mut dyn Write) -> CliResult<()> {
    let design = src
        .standard_design(mu)?
        .ok_or_else(|| CliError::input("bounds need a control law; the file declares none"))?;
    let c = estimate_constants(&design, per_axis, Execution::default())?;
    let b = &c.bounds;
    let pairs = [
        ("lambda_x", b.lambda_x),
        ("lambda_z", b.lambda_z),
        ("chi_x", b.chi_x),
        ("chi_z", b.chi_z),
        ("L1", b.l1),
        ("L2", b.l2),
        ("L_u", b.l_u),
        ("d1", b.d1),
        ("d2", b.d2),
        ("d_q", b.d_q),
    ];
    for (k, v) in pairs {
        writeln!(out, "{k} = {v:.6e}")?;
    }
    writeln!(out, "slow_verdict = {}", c.slow.verdict)?;
    writeln!(out, "fast_verdict = {}", c.fast.verdict)?;
    match theorem1_fast_bound(b, 0.0) {
        Ok(fb) => writeln!(out, "fast_limit = {:.6e}", fb.limit())?,
        Err(e) => writeln!(out, "fast_limit = inapplicable: {e}")?,
    }
    let curves = BoundCurves::new(b, 0.0, 0.0);
    match &curves {
        Ok(cv) => {
            match cv.slow_limit {
                Some(v) => writeln!(out, "slow_limit = {v:.6e}")?,
                None => writeln!(out, "slow_limit = inapplicable")?,
            }
            let gap = b.lambda_z - b.mu * b.lambda_x;
            if cv.slow.is_some() {
                writeln!(
                    out,
                    "slow_transient = available (lambda_z - mu lambda_x = {gap:.6e})"
                )?;
            } else {
                writeln!(
                    out,
                    "slow_transient = refused (lambda_z - mu lambda_x = {gap:.6e})"
                )?;
            }
            for w in &cv.warnings {
                writeln!(out, "warning = {w}")?;
            }
        }
        Err(e) => writeln!(out, "slow_limit = inapplicable: {e}")?,
    }
    match disturbance_bound(b, 0.0, 0.0) {
        Ok(d) => writeln!(out, "disturbance_limit = {:.6e}", d.limit())?,
        Err(e) => writeln!(out, "disturbance_limit = inapplicable: {e}")?,
    }
    match (
        theorem2_mu_star(b.d_q, b.lambda_z),
        theorem2_mu_star_capped(b.d_q, b.lambda_z),
    ) {
        (Ok(raw), Ok(capped)) => {
            writeln!(out, "mu_star = {raw:.6e}")?;
            writeln!(out, "mu_star_capped = {capped:.6e}")?;
        }
        (Err(e), _) | (_, Err(e)) => writeln!(out, "mu_star = inapplicable: {e}")?,
    }
    writeln!(out, "robust_at_mu = {}", theorem2_holds(b))?;
    Ok(())
}

fn bounds_nonstandard(mu: f64, per_axis: usize, out: &mut dyn Write) -> CliResult<()> {
    let design = registry::nonstandard_design(mu)?;
    let c = nonstandard::estimate_constants(&design, per_axis, Execution::default())?;
    let pairs = [
        ("lambda_xe", c.lambda_xe),
        ("lambda_ez", c.lambda_ez),
        ("chi_xe", c.chi_xe),
        ("chi_ze", c.chi_ze),
        ("L_e", c.l_e),
        ("d_e", c.d_e),
    ];
    for (k, v) in pairs {
        writeln!(out, "{k} = {v:.6e}")?;
    }
    writeln!(out, "slow_verdict = {}", c.slow.verdict)?;
    writeln!(out, "fast_verdict = {}", c.fast.verdict)?;
    let b = c.bound_set();
    match theorem3_fast_bound(&b, 0.0) {
        Ok(fb) => writeln!(out, "fast_limit = {:.6e}", fb.limit())?,
        Err(e) => writeln!(out, "fast_limit = inapplicable: {e}")?,
    }
    match theorem3_slow_limit(&b) {
        Ok(v) => writeln!(out, "slow_limit = {v:.6e}")?,
        Err(e) => writeln!(out, "slow_limit = inapplicable: {e}")?,
    }
    for (sym, meaning) in SLOW_LIMIT_MAPPING {
        writeln!(out, "mapping {sym} = {meaning}")?;
    }
    Ok(())
}

fn bounds_highgain(k: f64, per_axis: usize, out: &mut dyn Write) -> CliResult<()> {
    let chain = registry::highgain_chain()?;
    let design = registry::highgain_design(&chain, k)?;
    let region = registry::highgain_scaled_region(k);
    let c = highgain_constants(&chain, &design, &region, per_axis)?;
    writeln!(out, "lambda_g = {:.6e}", design.lambda_g)?;
    writeln!(
        out,
        "lambda_g_convention = |largest eigenvalue of the symmetric part of G| (that part is indefinite here)"
    )?;
    writeln!(out, "c4 = {:.6e}", c.c4)?;
    writeln!(out, "c5 = {:.6e}", c.c5)?;
    writeln!(out, "sup_dgbar3_dxi = {:.6e}", c.check.sup_jac)?;
    writeln!(out, "threshold = {:.6e}", c.check.threshold)?;
    writeln!(out, "condition_holds = {}", c.check.holds)?;
    writeln!(out, "condition_margin = {:.6e}", c.check.margin)?;
    writeln!(out, "worst_point = {}", fmt_vec(&c.check.worst_point))?;
    match theorem4_bound(c.c4, c.c5, c.check.sup_jac, &design) {
        Ok(v) => writeln!(out, "manifold_bound = {v:.6e}")?,
        Err(e) => writeln!(out, "manifold_bound = inapplicable: {e}")?,
    }
    Ok(())
}

fn sweep_bounds(
    src: &Source,
    values: &[f64],
    per_axis: usize,
    out: &mut dyn Write,
) -> CliResult<()> {
    let kind = src.kind();
    let values: Vec<f64> = values
        .iter()
        .map(|&v| validate_param(kind, v))
        .collect::<CliResult<_>>()?;
    // One row per point: param, first rate, second rate, fast-side limit,
    // slow-side limit. NaN marks an inapplicable entry.
    let rows: Vec<Vec<f64>> = map_ordered(Execution::default(), &values, |&p| {
        let nan = f64::NAN;
        match kind {
            Kind::Standard => match src.standard_design(p) {
                Ok(Some(d)) => match estimate_constants(&d, per_axis, Execution::Sequential) {
                    Ok(c) => {
                        let b = &c.bounds;
                        let fast = theorem1_fast_bound(b, 0.0)
                            .map(|f| f.limit())
                            .unwrap_or(nan);
                        let slow = contrakit::composite::theorem1_slow_limit(b).unwrap_or(nan);
                        vec![p, b.lambda_x, b.lambda_z, fast, slow]
                    }
                    Err(_) => vec![p, nan, nan, nan, nan],
                },
                _ => vec![p, nan, nan, nan, nan],
            },
            Kind::Nonstandard => match registry::nonstandard_design(p)
                .and_then(|d| nonstandard::estimate_constants(&d, per_axis, Execution::Sequential))
            {
                Ok(c) => {
                    let b = c.bound_set();
                    let fast = theorem3_fast_bound(&b, 0.0)
                        .map(|f| f.limit())
                        .unwrap_or(nan);
                    let slow = theorem3_slow_limit(&b).unwrap_or(nan);
                    vec![p, b.lambda_x, b.lambda_z, fast, slow]
                }
                Err(_) => vec![p, nan, nan, nan, nan],
            },
            Kind::HighGain => {
                let r = registry::highgain_chain().and_then(|chain| {
                    let d = registry::highgain_design(&chain, p)?;
                    let c = highgain_constants(
                        &chain,
                        &d,
                        &registry::highgain_scaled_region(p),
                        per_axis,
                    )?;
                    Ok((d.lambda_g, c))
                });
                match r {
                    Ok((lg, c)) => {
                        let chain = registry::highgain_chain().ok();
                        let bound = chain
                            .and_then(|ch| registry::highgain_design(&ch, p).ok())
                            .and_then(|d| theorem4_bound(c.c4, c.c5, c.check.sup_jac, &d).ok())
                            .unwrap_or(nan);
                        vec![p, lg, c.check.threshold, nan, bound]
                    }
                    Err(_) => vec![p, nan, nan, nan, nan],
                }
            }
        }
    });
    let header = match kind {
        Kind::HighGain => "k,lambda_g,threshold,unused,manifold_bound",
        _ => "mu,lambda_x,lambda_z,fast_limit,slow_limit",
    };
    writeln!(out, "{header}")?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> CliResult<i32> {
    let src = Source::from_args(&a.source)?;
    let kind = src.kind();
    let param = resolve_param(&src, &a.params)?;
    let per_axis = check_per_axis(a.params.per_axis)?;
    if src.open_loop().is_some() {
        return Err(CliError::input(
            "bounds need a control law; the file declares none",
        ));
    }
    let baseline = if a.baseline {
        match &src {
            Source::Example(e) => Some(e.baseline.ok_or_else(|| {
                CliError::input(format!(
                    "example '{}' has no composite-Lyapunov constants",
                    e.id
                ))
            })?),
            Source::File { .. } => {
                return Err(CliError::input(
                    "--baseline is only available for built-in examples",
                ));
            }
        }
    } else {
        None
    };
    if let Some(s) = &a.sweep {
        let values = parse_sweep(s)?;
        sweep_bounds(&src, &values, per_axis, out)?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "system = {}", src.name())?;
    if kind == Kind::HighGain {
        writeln!(out, "k = {param}")?;
    }
    writeln!(out, "mu = {}", mu_of(kind, param))?;
    writeln!(out, "per_axis = {per_axis}")?;
    match kind {
        Kind::Standard => bounds_standard(&src, param, per_axis, out)?,
        Kind::Nonstandard => bounds_nonstandard(param, per_axis, out)?,
        Kind::HighGain => bounds_highgain(param, per_axis, out)?,
    }
    if let Some(bc) = baseline {
        let r = mu_max_composite_lyapunov(bc.alpha1, bc.alpha2, bc.beta1, bc.beta2, bc.beta3)?;
        writeln!(out, "baseline_mu_max = {:.6e}", r.mu_max)?;
        writeln!(out, "baseline_d_star = {:.6e}", r.d_star)?;
        writeln!(out, "baseline_mu_max_exact = {:.6e}", r.mu_max_exact)?;
        writeln!(out, "baseline_d_star_exact = {:.6e}", r.d_star_exact)?;
    }
    Ok(EXIT_OK)
}

// ------------------------------------------------------------ reproduce

/// `(example, parameter, t_end, caption)` for each figure.
pub fn figure_setup(figure: u32) -> Option<(&'static str, f64, f64, &'static str)> {
    Some(match figure {
        1 => ("motivating", 0.5, 40.0, "motivating example, mu = 0.5"),
        2 => ("dcmotor", 0.1, 5.0, "DC motor speed regulation, mu = 0.1"),
        3 => ("nonstandard", 0.2, 10.0, "nonstandard regulation, mu = 0.2"),
        4 => ("highgain", 10.0, 10.0, "high-gain chain, k = 10"),
        5 => ("highgain", 4.5, 10.0, "high-gain chain, k = 4.5"),
        _ => return None,
    })
}

pub fn cmd_reproduce(a: &ReproduceArgs, out: &mut dyn Write) -> CliResult<i32> {
    let (id, param, t_end, caption) = figure_setup(a.figure)
        .ok_or_else(|| CliError::input(format!("unknown figure {} (expected 1 to 5)", a.figure)))?;
    let cfg = RunConfig::new(Source::example(id)?, param, Some(t_end), None, None)?;
    let sim = run_simulation(&cfg, true)?;
    let dir = a.out.join(format!("fig{}", a.figure));
    let written = write_simulation(&sim, &dir, "trajectory", true, caption)?;

    let mut report = Vec::new();
    writeln!(report, "figure = {}", a.figure)?;
    writeln!(report, "caption = {caption}")?;
    writeln!(report, "system = {id}")?;
    if cfg.source.kind() == Kind::HighGain {
        writeln!(report, "k = {}", cfg.param)?;
    }
    writeln!(report, "mu = {}", cfg.mu())?;
    writeln!(report, "dt = {:e}", cfg.dt)?;
    writeln!(report, "t_end = {t_end}")?;
    writeln!(report, "init = {}", fmt_vec(&cfg.init))?;
    print_pairs(&mut report, &sim.report)?;
    let report_path = dir.join("report.txt");
    fs::write(&report_path, &report)?;

    out.write_all(&report)?;
    for p in written.iter().chain(std::iter::once(&report_path)) {
        writeln!(out, "output = {}", p.display())?;
    }
    match sim.diverged {
        Some(tl) => Err(diverged_error(tl)),
        None => Ok(EXIT_OK),
    }
}

pub fn cmd_list(out: &mut dyn Write) -> CliResult<i32> {
    for e in registry::entries() {
        let p = if e.kind == Kind::HighGain {
            format!("k={}", e.param)
        } else {
            format!("mu={}", e.param)
        };
        writeln!(
            out,
            "{:<12} {:<12} {:<8} {}",
            e.id,
            kind_name(e.kind),
            p,
            e.description
        )?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0.1:0.3:3").unwrap().len(), 3);
        let v = parse_sweep("1:2:5").unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[4], 2.0);
        assert_eq!(parse_sweep("0.5:0.9:1").unwrap(), vec![0.5]);
        assert!(parse_sweep("1:2").is_err());
        assert!(parse_sweep("a:2:3").is_err());
        assert!(parse_sweep("1:2:0").is_err());
    }

    #[test]
    fn init_parsing() {
        assert_eq!(parse_init("0.9, -0.4", 2).unwrap(), vec![0.9, -0.4]);
        assert_eq!(parse_init("1,2", 3).unwrap_err().code, EXIT_INPUT);
        assert!(parse_init("1,x", 2).is_err());
        assert!(parse_init("1,inf", 2).is_err());
    }

    #[test]
    fn parameter_flags_follow_kind() {
        let hg = Source::example("highgain").unwrap();
        let mo = Source::example("motivating").unwrap();
        let p = |mu, k| ParamArgs {
            mu,
            k,
            per_axis: 21,
        };
        assert_eq!(resolve_param(&hg, &p(None, None)).unwrap(), 10.0);
        assert!(resolve_param(&hg, &p(Some(0.1), None)).is_err());
        assert!(resolve_param(&hg, &p(None, Some(0.5))).is_err());
        assert_eq!(resolve_param(&mo, &p(None, None)).unwrap(), 0.5);
        assert!(resolve_param(&mo, &p(None, Some(10.0))).is_err());
        assert!(resolve_param(&mo, &p(Some(0.0), None)).is_err());
        assert!(resolve_param(&mo, &p(Some(1.5), None)).is_err());
    }

    #[test]
    fn divergence_maps_to_exit_three() {
        let e = Error::IntegrationDiverged {
            t_last: 1.0,
            partial: Box::new(Trajectory {
                times: vec![0.0],
                states: vec![vec![0.0]],
                inputs: vec![0.0],
                step: 0.1,
            }),
        };
        assert_eq!(CliError::from(e).code, EXIT_DIVERGED);
        assert_eq!(
            CliError::from(Error::InvalidInput("x".into())).code,
            EXIT_INPUT
        );
    }

    #[test]
    fn auto_step_respects_mu() {
        let cfg =
            RunConfig::new(Source::example("dcmotor").unwrap(), 0.1, None, None, None).unwrap();
        assert_eq!(cfg.dt, 0.0005);
        assert!(RunConfig::new(
            Source::example("dcmotor").unwrap(),
            0.1,
            None,
            Some(0.01),
            None
        )
        .is_err());
        let hg =
            RunConfig::new(Source::example("highgain").unwrap(), 10.0, None, None, None).unwrap();
        assert!((hg.mu() - 0.1).abs() < 1e-15);
        assert_eq!(hg.dt, 0.001);
    }
}
