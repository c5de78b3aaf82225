//! Command-line front end: parses a run request, dispatches to the kernel
//! routes and writes CSV (with a JSON header in `#` lines) or JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use symheat::acceptance::{run_criterion, CriterionReport, CRITERIA};
use symheat::efunction::{e_closed_form, e_from_orbit_densities, OrbitTriple};
use symheat::kernel::{evaluate_kernel, KernelOptions};
use symheat::pde::PotentialMode;
use symheat::potentials::omega_star;
use symheat::stochastics::{flat_walk_feynman_kac, Scheme, WalkConfig};
use symheat::wrapping::{Branch, ShiftDirection, WrapPolicy};
use symheat::{build_space, linspace, parse_space_config, preset_by_name, Method, SpaceKind, SpaceSpec};

/// `start:stop:count`, an evenly spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

impl FromStr for GridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("grid '{s}' is not start:stop:count"));
        };
        let start: f64 = a.trim().parse().map_err(|_| format!("grid start '{a}' is not a number"))?;
        let stop: f64 = b.trim().parse().map_err(|_| format!("grid stop '{b}' is not a number"))?;
        let count: usize = c.trim().parse().map_err(|_| format!("grid count '{c}' is not a positive integer"))?;
        Ok(Self { start, stop, count })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

/// Two methods separated by a comma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodPair(pub Method, pub Method);

impl FromStr for MethodPair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("methods '{s}' must be two names separated by a comma"))?;
        Ok(Self(a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?))
    }
}

impl fmt::Display for MethodPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug, Clone, PartialEq, Serialize)]
#[command(name = "symheat", version, about = "Heat kernels on rank-one symmetric spaces")]
pub struct RunRequest {
    #[command(subcommand)]
    pub command: Command,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Space definitions (INI-style sections) searched before the built-in presets.
    #[arg(long, global = true, env = "SYMHEAT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SYMHEAT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
pub struct SpaceArgs {
    /// A kind (sphere, hyperbolic, circle, su2, complex, euclidean) with --dim,
    /// or a preset name such as S2, H3, CP2, SU3.
    #[arg(long)]
    pub space: String,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
pub struct WrapArgs {
    #[arg(long, default_value = "abs_j")]
    pub branch: Branch,
    #[arg(long, default_value_t = 12)]
    pub lattice_terms: usize,
    /// Rescale wrapped Gaussians by the rho shift.
    #[arg(long)]
    pub shift: Option<ShiftDirection>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
pub struct TuningArgs {
    /// Spectral truncation tolerance.
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dx: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Heat kernel on a grid by one method.
    Kernel {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        grid: GridSpec,
        #[arg(long, default_value = "spectral")]
        method: Method,
        #[command(flatten)]
        wrap: WrapArgs,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Omega* along the radial coordinate.
    Potential {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        grid: GridSpec,
    },
    /// e(r1, r2; r) over a grid of r.
    Efunction {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        #[arg(long)]
        grid: GridSpec,
    },
    /// Two methods side by side with their pointwise difference.
    Compare {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        grid: GridSpec,
        #[arg(long)]
        methods: MethodPair,
        #[command(flatten)]
        wrap: WrapArgs,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Feynman-Kac estimate; the grid lists histogram bin edges.
    Mc {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        grid: GridSpec,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Drop the potential, recovering the flat kernel.
        #[arg(long)]
        zero_potential: bool,
    },
    /// Wrapped solution of the perturbed tangent-space heat equation.
    Pde {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        grid: GridSpec,
        #[arg(long, default_value_t = 1e-3)]
        dx: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
    },
    /// The reference criteria.
    Suite {
        #[arg(long)]
        all: bool,
        #[arg(long)]
        criterion: Vec<u32>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage { field: String, message: String },
    Module(symheat::Error),
    Io(String),
    SuiteFailed(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { field, message } => write!(f, "invalid --{field}: {message}"),
            CliError::Module(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::SuiteFailed(n) => write!(f, "{n} criteria failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<symheat::Error> for CliError {
    fn from(e: symheat::Error) -> Self {
        CliError::Module(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } => 2,
            _ => 1,
        }
    }
}

fn usage(field: &str, message: impl Into<String>) -> CliError {
    CliError::Usage { field: field.into(), message: message.into() }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(usage(field, format!("must be a positive number, got {v}")))
    }
}

fn check_grid(g: &GridSpec) -> Result<(), CliError> {
    if !g.start.is_finite() || !g.stop.is_finite() || g.start < 0.0 || g.stop < g.start {
        return Err(usage("grid", format!("{g}: need 0 <= start <= stop")));
    }
    if g.count == 0 || (g.count == 1 && g.start != g.stop) {
        return Err(usage("grid", format!("{g}: count must be positive")));
    }
    Ok(())
}

impl RunRequest {
    /// Checks every numeric field before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == Some(0) {
            return Err(usage("threads", "must be at least 1"));
        }
        match &self.command {
            Command::Kernel { t, grid, wrap, tuning, .. } | Command::Compare { t, grid, wrap, tuning, .. } => {
                positive("t", *t)?;
                check_grid(grid)?;
                if wrap.lattice_terms == 0 {
                    return Err(usage("lattice-terms", "must be at least 1"));
                }
                positive("tol", tuning.tol)?;
                positive("dx", tuning.dx)?;
                positive("dt", tuning.dt)?;
                if tuning.steps == 0 || tuning.samples == 0 {
                    return Err(usage("steps", "steps and samples must be positive"));
                }
            }
            Command::Potential { grid, .. } => check_grid(grid)?,
            Command::Efunction { r1, r2, grid, .. } => {
                positive("r1", *r1)?;
                positive("r2", *r2)?;
                check_grid(grid)?;
            }
            Command::Mc { t, grid, steps, samples, .. } => {
                positive("t", *t)?;
                check_grid(grid)?;
                if grid.count < 2 {
                    return Err(usage("grid", "bin edges need at least two points"));
                }
                if *steps == 0 || *samples == 0 {
                    return Err(usage("steps", "steps and samples must be positive"));
                }
            }
            Command::Pde { t, grid, dx, dt, .. } => {
                positive("t", *t)?;
                check_grid(grid)?;
                positive("dx", *dx)?;
                positive("dt", *dt)?;
            }
            Command::Suite { all, criterion } => {
                if !all && criterion.is_empty() {
                    return Err(usage("criterion", "give --all or at least one --criterion"));
                }
                if let Some(bad) = criterion.iter().find(|c| !(1..=CRITERIA.len() as u32).contains(c)) {
                    return Err(usage("criterion", format!("{bad} is not in 1..={}", CRITERIA.len())));
                }
            }
        }
        Ok(())
    }

    /// The argument list that parses back to this request.
    pub fn to_args(&self) -> Vec<String> {
        let mut head: Vec<String> = Vec::new();
        let mut tail: Vec<(String, String)> = Vec::new();
        let space = |s: &SpaceArgs, tail: &mut Vec<(String, String)>| {
            tail.push(("space".into(), s.space.clone()));
            if let Some(d) = s.dim {
                tail.push(("dim".into(), d.to_string()));
            }
        };
        let wrap = |w: &WrapArgs, tail: &mut Vec<(String, String)>| {
            tail.push(("branch".into(), w.branch.to_string()));
            tail.push(("lattice-terms".into(), w.lattice_terms.to_string()));
            if let Some(s) = w.shift {
                tail.push(("shift".into(), shift_name(s).into()));
            }
        };
        let tuning = |x: &TuningArgs, tail: &mut Vec<(String, String)>| {
            for (k, v) in [
                ("tol", x.tol.to_string()),
                ("dx", x.dx.to_string()),
                ("dt", x.dt.to_string()),
                ("steps", x.steps.to_string()),
                ("samples", x.samples.to_string()),
                ("seed", x.seed.to_string()),
            ] {
                tail.push((k.into(), v));
            }
        };
        match &self.command {
            Command::Kernel { space: s, t, grid, method, wrap: w, tuning: x } => {
                head.push("kernel".into());
                space(s, &mut tail);
                tail.push(("t".into(), t.to_string()));
                tail.push(("grid".into(), grid.to_string()));
                tail.push(("method".into(), method.to_string()));
                wrap(w, &mut tail);
                tuning(x, &mut tail);
            }
            Command::Potential { space: s, grid } => {
                head.push("potential".into());
                space(s, &mut tail);
                tail.push(("grid".into(), grid.to_string()));
            }
            Command::Efunction { space: s, r1, r2, grid } => {
                head.push("efunction".into());
                space(s, &mut tail);
                tail.push(("r1".into(), r1.to_string()));
                tail.push(("r2".into(), r2.to_string()));
                tail.push(("grid".into(), grid.to_string()));
            }
            Command::Compare { space: s, t, grid, methods, wrap: w, tuning: x } => {
                head.push("compare".into());
                space(s, &mut tail);
                tail.push(("t".into(), t.to_string()));
                tail.push(("grid".into(), grid.to_string()));
                tail.push(("methods".into(), methods.to_string()));
                wrap(w, &mut tail);
                tuning(x, &mut tail);
            }
            Command::Mc { space: s, t, grid, steps, samples, seed, zero_potential } => {
                head.push("mc".into());
                space(s, &mut tail);
                tail.push(("t".into(), t.to_string()));
                tail.push(("grid".into(), grid.to_string()));
                tail.push(("steps".into(), steps.to_string()));
                tail.push(("samples".into(), samples.to_string()));
                tail.push(("seed".into(), seed.to_string()));
                if *zero_potential {
                    head.push("--zero-potential".into());
                }
            }
            Command::Pde { space: s, t, grid, dx, dt } => {
                head.push("pde".into());
                space(s, &mut tail);
                tail.push(("t".into(), t.to_string()));
                tail.push(("grid".into(), grid.to_string()));
                tail.push(("dx".into(), dx.to_string()));
                tail.push(("dt".into(), dt.to_string()));
            }
            Command::Suite { all, criterion } => {
                head.push("suite".into());
                if *all {
                    head.push("--all".into());
                }
                for c in criterion {
                    tail.push(("criterion".into(), c.to_string()));
                }
            }
        }
        if let Some(p) = &self.output {
            tail.push(("output".into(), p.display().to_string()));
        }
        let format = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        tail.push(("format".into(), format.into()));
        if let Some(p) = &self.config {
            tail.push(("config".into(), p.display().to_string()));
        }
        if let Some(n) = self.threads {
            tail.push(("threads".into(), n.to_string()));
        }
        let mut a = vec!["symheat".to_string()];
        a.extend(head);
        for (k, v) in tail {
            a.push(format!("--{k}"));
            a.push(v);
        }
        a
    }
}

fn shift_name(s: ShiftDirection) -> &'static str {
    match s {
        ShiftDirection::ToStandard => "to_standard",
        ShiftDirection::ToShifted => "to_shifted",
    }
}

/// One output row; the CSV columns are fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub space: String,
    pub n: usize,
    pub t: Option<f64>,
    pub coordinate: f64,
    pub method: String,
    pub value: f64,
    pub err_est: f64,
    pub extra: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Output {
    pub request: RunRequest,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionReport>,
}

fn resolve_space(args: &SpaceArgs, config: &Option<PathBuf>) -> Result<SpaceSpec, CliError> {
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let spaces = parse_space_config(&text)?;
        if let Some(s) = spaces.get(&args.space) {
            return Ok(s.clone());
        }
    }
    if let Ok(kind) = args.space.parse::<SpaceKind>() {
        if kind != SpaceKind::PresetByName {
            let dim = args.dim.ok_or_else(|| usage("dim", format!("required for space kind '{}'", args.space)))?;
            return Ok(build_space(kind, dim)?);
        }
    }
    Ok(preset_by_name(&args.space)?)
}

fn kernel_options(wrap: &WrapArgs, tuning: &TuningArgs) -> KernelOptions {
    let mut policy = WrapPolicy::with_branch(wrap.branch);
    policy.lattice_terms = wrap.lattice_terms;
    policy.shift_applied = wrap.shift == Some(ShiftDirection::ToStandard);
    KernelOptions {
        policy,
        tol: tuning.tol,
        pde_dx: tuning.dx,
        pde_dt: tuning.dt,
        mc_steps: tuning.steps,
        mc_samples: tuning.samples,
        seed: tuning.seed,
    }
}

fn kernel_rows(k: &symheat::KernelEvaluation) -> Vec<Row> {
    (0..k.grid.len())
        .map(|i| Row {
            space: k.space.clone(),
            n: k.n,
            t: Some(k.t),
            coordinate: k.grid[i],
            method: k.method.to_string(),
            value: k.values[i],
            err_est: k.err_est[i],
            extra: k.extra[i].clone(),
        })
        .collect()
}

/// Runs the request and returns what would be written.
pub fn execute(request: &RunRequest) -> Result<Output, CliError> {
    request.validate()?;
    let mut summary = BTreeMap::new();
    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    match &request.command {
        Command::Kernel { space, t, grid, method, wrap, tuning } => {
            let s = resolve_space(space, &request.config)?;
            let k = evaluate_kernel(&s, *method, *t, &grid.points(), &kernel_options(wrap, tuning))?;
            rows = kernel_rows(&k);
        }
        Command::Potential { space, grid } => {
            let s = resolve_space(space, &request.config)?;
            for r in grid.points() {
                let mut h = vec![0.0; s.roots.rank()];
                if let Some(x) = h.first_mut() {
                    *x = r;
                }
                let v = omega_star(&s, &h)?;
                rows.push(Row {
                    space: s.name.clone(),
                    n: s.dim,
                    t: None,
                    coordinate: r,
                    method: "omega_star".into(),
                    value: v.value,
                    err_est: 0.0,
                    extra: format!("{:?}", v.regime).to_lowercase(),
                });
            }
        }
        Command::Efunction { space, r1, r2, grid } => {
            let s = resolve_space(space, &request.config)?;
            for r in grid.points() {
                let tri = OrbitTriple::new(*r1, *r2, r);
                let e = e_closed_form(&s, &tri)?;
                let status = format!("{:?}", e.status).to_lowercase();
                rows.push(Row {
                    space: s.name.clone(),
                    n: s.dim,
                    t: None,
                    coordinate: r,
                    method: "e_closed_form".into(),
                    value: e.value,
                    err_est: 0.0,
                    extra: format!("r1={r1};r2={r2};{status}"),
                });
                if s.dim == 2 && e.status == symheat::efunction::SupportStatus::Interior {
                    rows.push(Row {
                        space: s.name.clone(),
                        n: s.dim,
                        t: None,
                        coordinate: r,
                        method: "e_orbit_densities".into(),
                        value: e_from_orbit_densities(&s, &tri)?,
                        err_est: 0.0,
                        extra: format!("r1={r1};r2={r2}"),
                    });
                }
            }
        }
        Command::Compare { space, t, grid, methods, wrap, tuning } => {
            let s = resolve_space(space, &request.config)?;
            let options = kernel_options(wrap, tuning);
            let points = grid.points();
            let a = evaluate_kernel(&s, methods.0, *t, &points, &options)?;
            let b = evaluate_kernel(&s, methods.1, *t, &points, &options)?;
            if a.grid != b.grid {
                return Err(usage("methods", "the two methods produce different grids (mc cannot be compared pointwise)"));
            }
            let mut sup = 0.0f64;
            let mut sup_rel = 0.0f64;
            let mut delta = Vec::with_capacity(points.len());
            for i in 0..a.grid.len() {
                let d = a.values[i] - b.values[i];
                sup = sup.max(d.abs());
                if b.values[i] != 0.0 {
                    sup_rel = sup_rel.max((d / b.values[i]).abs());
                }
                delta.push(Row {
                    space: s.name.clone(),
                    n: s.dim,
                    t: Some(*t),
                    coordinate: a.grid[i],
                    method: "delta".into(),
                    value: d,
                    err_est: a.err_est[i] + b.err_est[i],
                    extra: format!("{}-{}", methods.0, methods.1),
                });
            }
            rows.extend(kernel_rows(&a));
            rows.extend(kernel_rows(&b));
            rows.extend(delta);
            summary.insert("sup_abs_delta".into(), serde_json::json!(sup));
            summary.insert("sup_rel_delta".into(), serde_json::json!(sup_rel));
        }
        Command::Mc { space, t, grid, steps, samples, seed, zero_potential } => {
            let s = resolve_space(space, &request.config)?;
            let mut config = WalkConfig::new(Scheme::FlatWalkFk, *t, *steps, *samples, *seed);
            if *zero_potential {
                config.potential = PotentialMode::Zero;
            }
            let est = flat_walk_feynman_kac(&s, &config, &grid.points())?;
            for i in 0..est.grid.len() {
                rows.push(Row {
                    space: s.name.clone(),
                    n: s.dim,
                    t: Some(*t),
                    coordinate: est.grid[i],
                    method: Method::MonteCarlo.to_string(),
                    value: est.density[i],
                    err_est: est.stderr[i],
                    extra: format!("killed_mass={:.3e};seed={seed};steps={steps};samples={samples}", est.killed_mass),
                });
            }
            summary.insert("killed_mass".into(), serde_json::json!(est.killed_mass));
            summary.insert("effective_samples".into(), serde_json::json!(est.effective_samples));
            summary.insert("mass".into(), serde_json::json!(est.mass));
            summary.insert("weight_range".into(), serde_json::json!([est.weight_range.0, est.weight_range.1]));
        }
        Command::Pde { space, t, grid, dx, dt } => {
            let s = resolve_space(space, &request.config)?;
            let options = KernelOptions { pde_dx: *dx, pde_dt: *dt, ..KernelOptions::default() };
            let k = evaluate_kernel(&s, Method::Pde, *t, &grid.points(), &options)?;
            rows = kernel_rows(&k);
        }
        Command::Suite { all, criterion } => {
            let ids: Vec<u32> = if *all { CRITERIA.iter().map(|(k, _)| *k).collect() } else { criterion.clone() };
            for id in ids {
                criteria.push(run_criterion(id)?);
            }
            let failed = criteria.iter().filter(|c| !c.passed()).count();
            summary.insert("passed".into(), serde_json::json!(failed == 0));
            summary.insert("failed".into(), serde_json::json!(failed));
        }
    }
    Ok(Output { request: request.clone(), summary, rows, criteria })
}

/// Serializes the output in the requested format.
pub fn render(output: &Output, format: Format) -> Result<Vec<u8>, CliError> {
    let io = |e: &dyn fmt::Display| CliError::Io(e.to_string());
    match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(output).map_err(|e| io(&e))?;
            v.push(b'\n');
            Ok(v)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            let header = serde_json::json!({ "request": output.request, "summary": output.summary });
            writeln!(buf, "# {header}").map_err(|e| io(&e))?;
            for c in &output.criteria {
                for line in c.to_string().lines() {
                    writeln!(buf, "# {line}").map_err(|e| io(&e))?;
                }
            }
            let mut w = csv::Writer::from_writer(buf);
            if output.rows.is_empty() {
                w.write_record(["space", "n", "t", "coordinate", "method", "value", "err_est", "extra"])
                    .map_err(|e| io(&e))?;
            }
            for r in &output.rows {
                w.serialize(r).map_err(|e| io(&e))?;
            }
            w.into_inner().map_err(|e| io(&e))
        }
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn run(request: RunRequest) -> Result<(), CliError> {
    if let Some(n) = request.threads {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let output = execute(&request)?;
    if let Command::Suite { .. } = request.command {
        for c in &output.criteria {
            eprintln!("{c}");
        }
    }
    let bytes = render(&output, request.format)?;
    match &request.output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?,
    }
    let failed = output.criteria.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::SuiteFailed(failed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunRequest {
        RunRequest::try_parse_from(args).unwrap()
    }

    #[test]
    fn grid_spec_round_trip() {
        let g: GridSpec = "0.05:3.1:128".parse().unwrap();
        assert_eq!(g, GridSpec { start: 0.05, stop: 3.1, count: 128 });
        assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("a:2:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn requests_round_trip_through_arguments() {
        for args in [
            &["symheat", "kernel", "--space", "sphere", "--dim", "3", "--t", "0.5", "--method", "spectral", "--grid", "0.05:3.1:128"][..],
            &["symheat", "compare", "--space", "S2", "--t", "1", "--grid", "0.1:3:30", "--methods", "gaussian_wrap,spectral", "--shift", "to_standard", "--format", "json"],
            &["symheat", "mc", "--space", "S2", "--t", "0.3", "--grid", "0.2:2:13", "--seed", "9", "--zero-potential"],
            &["symheat", "suite", "--criterion", "3", "--criterion", "10", "--threads", "2"],
            &["symheat", "efunction", "--space", "H2", "--r1", "0.5", "--r2", "0.7", "--grid", "0.3:1.1:9", "--output", "/tmp/x.csv"],
        ] {
            let req = parse(args);
            let again = RunRequest::try_parse_from(req.to_args()).unwrap();
            assert_eq!(req, again, "{args:?}");
        }
    }

    #[test]
    fn validation_names_the_field() {
        let req = parse(&["symheat", "kernel", "--space", "S2", "--t=-1", "--grid", "0:1:5"]);
        match req.validate() {
            Err(CliError::Usage { field, .. }) => assert_eq!(field, "t"),
            other => panic!("{other:?}"),
        }
        let req = parse(&["symheat", "kernel", "--space", "S2", "--t", "1", "--grid", "2:1:5"]);
        assert!(matches!(req.validate(), Err(CliError::Usage { field, .. }) if field == "grid"));
        let req = parse(&["symheat", "suite"]);
        assert!(matches!(req.validate(), Err(CliError::Usage { .. })));
    }

    #[test]
    fn space_resolution() {
        let a = SpaceArgs { space: "sphere".into(), dim: Some(2) };
        assert_eq!(resolve_space(&a, &None).unwrap().dim, 2);
        let b = SpaceArgs { space: "CP2".into(), dim: None };
        assert_eq!(resolve_space(&b, &None).unwrap().dim, 4);
        let c = SpaceArgs { space: "sphere".into(), dim: None };
        assert!(matches!(resolve_space(&c, &None), Err(CliError::Usage { .. })));
    }

    #[test]
    fn compare_reports_the_s2_defect() {
        let req = parse(&[
            "symheat", "compare", "--space", "sphere", "--dim", "2", "--t", "1", "--grid", "0.1:3:30", "--methods",
            "gaussian_wrap,spectral", "--shift", "to_standard",
        ]);
        let out = execute(&req).unwrap();
        assert_eq!(out.rows.len(), 90);
        assert!(out.summary["sup_rel_delta"].as_f64().unwrap() > 1e-3);
    }
}
