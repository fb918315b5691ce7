//! Command-line driver: argument and config handling, CSV/JSON writers.
//!
//! Exit codes: 0 success, 1 verification or computation failure, 2 usage or
//! config error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::finite::{kernel_finite, GridPoint, ModelParams, Scheme};
use crate::limits::{
    branch_of, kernel_gue_limit, kernel_gue_minor, kernel_pearcey, nearby_limit,
    scaled_finite_for_tacnode, scaled_finite_nearby, scaled_tacnode_for_gue,
    scaled_tacnode_for_pearcey, Branch, ChiNormalization, GuePoint, PearceyPoint,
};
use crate::macro_geometry::{boundary_curve, Classifier};
use crate::simulator::{run_trial, simulate_statistics, SimConfig, Targets};
use crate::tacnode::{kernel_tacnode, TacnodeParams, TacnodePoint};
use crate::verify::{run_suite, SuiteOptions};
use crate::{KernelError, KernelValue};

pub const CONFIG_SCHEMA: u64 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Quadrature failures are computation failures, everything else is a bad
/// argument.
fn kernel_err(e: KernelError) -> CliError {
    match e {
        KernelError::Quad(_) => CliError::Failure(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "tacnode",
    version,
    about = "Kernels, simulation and limit-shape geometry for push-block interlacing dynamics"
)]
pub struct Cli {
    /// JSON config with `"schema": 1` and one section per command; flags
    /// override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a kernel on a list of argument tuples.
    Kernel(KernelArgs),
    /// Monte Carlo occupancies, pair and endpoint frequencies.
    Simulate(SimulateArgs),
    /// Macroscopic density and region on a (ξ, μ) grid.
    DensityMap(DensityArgs),
    /// Boundary curve of the liquid region, parametrized by real z.
    Boundary(BoundaryArgs),
    /// Scaled kernels against their limits over a list of scales.
    Converge(ConvergeArgs),
    /// Run the identity suites.
    Verify(VerifyArgs),
}

macro_rules! overlay {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            fn overlay(self, base: Self) -> Self {
                Self { $($f: self.$f.or(base.$f)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelArgs {
    /// finite | tacnode | gue | gue-minor | pearcey
    #[arg(long)]
    pub family: Option<String>,
    /// Tuples `x1,a1,x2,a2` separated by `;` (a = level m or μ or ν).
    #[arg(long, allow_hyphen_values = true)]
    pub args: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// ε (finite)
    #[arg(long)]
    pub eps: Option<f64>,
    /// t (finite)
    #[arg(long)]
    pub t: Option<f64>,
    /// ϵ (tacnode)
    #[arg(long)]
    pub eps_tac: Option<f64>,
    /// original | deformed | steepest (finite)
    #[arg(long)]
    pub scheme: Option<String>,
    /// factorial | plain (gue, gue-minor)
    #[arg(long)]
    pub chi_normalization: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(KernelArgs { family, args, tol, eps, t, eps_tac, scheme, chi_normalization, out });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Occupancy CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Terminal configurations of the first trials, one row per particle.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_trials: Option<usize>,
    /// JSON targets `{"pairs": [[[x2,m],[x2,m]]], "endpoints": [[x2,m]]}`.
    #[arg(long)]
    pub endpoints: Option<PathBuf>,
    /// Pair and endpoint frequencies for `--endpoints`.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}
overlay!(SimulateArgs {
    levels, eps, t, trials, seed, out, snapshots, snapshot_trials, endpoints, events_out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi_max: Option<f64>,
    #[arg(long)]
    pub xi_steps: Option<usize>,
    #[arg(long)]
    pub mu_min: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub mu_steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(DensityArgs { eps, tau, xi_min, xi_max, xi_steps, mu_min, mu_max, mu_steps, out });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_max: Option<f64>,
    #[arg(long)]
    pub z_steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(BoundaryArgs { eps, tau, z_min, z_max, z_steps, out });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeArgs {
    /// tacnode | gue | pearcey | nearby-sections
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated scales: L (tacnode, nearby-sections), ϵ (gue), M
    /// (pearcey).
    #[arg(long)]
    pub scales: Option<String>,
    /// Tuples `x1,a1,x2,a2` separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    pub args: Option<String>,
    #[arg(long)]
    pub eps_tac: Option<f64>,
    /// Level offset of the second point (nearby-sections).
    #[arg(long, allow_hyphen_values = true)]
    pub dm: Option<i64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub chi_normalization: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(ConvergeArgs { target, scales, args, eps_tac, dm, tol, chi_normalization, out });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// deform | symmetry | recurrence | all
    #[arg(long)]
    pub suite: Option<String>,
    /// Residual bound replacing each check's default.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Machine-readable report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
overlay!(VerifyArgs { suite, threshold, tol, seed, json });

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let config = match &cli.config {
        Some(p) => Some(load_config(p)?),
        None => None,
    };
    let section = |name: &str| config.as_ref().and_then(|c| c.get(name).cloned());
    match cli.command {
        Command::Kernel(a) => cmd_kernel(a.overlay(from_section(section("kernel"))?)),
        Command::Simulate(a) => cmd_simulate(a.overlay(from_section(section("simulate"))?)),
        Command::DensityMap(a) => {
            cmd_density_map(a.overlay(from_section(section("density-map"))?))
        }
        Command::Boundary(a) => cmd_boundary(a.overlay(from_section(section("boundary"))?)),
        Command::Converge(a) => cmd_converge(a.overlay(from_section(section("converge"))?)),
        Command::Verify(a) => cmd_verify(a.overlay(from_section(section("verify"))?)),
    }
}

const SECTIONS: [&str; 6] = ["kernel", "simulate", "density-map", "boundary", "converge", "verify"];

fn load_config(path: &Path) -> CliResult<serde_json::Map<String, serde_json::Value>> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let serde_json::Value::Object(map) = v else {
        return Err(usage("config must be a JSON object"));
    };
    match map.get("schema").and_then(|s| s.as_u64()) {
        Some(CONFIG_SCHEMA) => {}
        Some(s) => return Err(usage(format!("unsupported config schema {s}"))),
        None => return Err(usage("config needs \"schema\": 1")),
    }
    for k in map.keys() {
        if k != "schema" && !SECTIONS.contains(&k.as_str()) {
            return Err(usage(format!("unknown config section {k:?}")));
        }
    }
    Ok(map)
}

fn from_section<T: DeserializeOwned + Default>(v: Option<serde_json::Value>) -> CliResult<T> {
    match v {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| usage(format!("config: {e}"))),
    }
}

/// `printf("%.17g", v)`.
pub fn fmt_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `n` evenly spaced points from `a` to `b`, endpoints exact.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let d = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == 0 {
                        a
                    } else if i == n - 1 {
                        b
                    } else {
                        (a * (n - 1 - i) as f64 + b * i as f64) / d
                    }
                })
                .collect()
        }
    }
}

/// `"x1,a1,x2,a2;…"`
pub fn parse_tuples(s: &str) -> CliResult<Vec<[f64; 4]>> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let vals: Vec<f64> = part
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad number {v:?} in tuple {part:?}")))
            })
            .collect::<CliResult<_>>()?;
        let arr: [f64; 4] = vals
            .try_into()
            .map_err(|_| usage(format!("tuple {part:?} needs 4 values")))?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(usage(format!("tuple {part:?} is not finite")));
        }
        out.push(arr);
    }
    if out.is_empty() {
        return Err(usage("no argument tuples"));
    }
    Ok(out)
}

pub fn parse_scales(s: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| usage(format!("bad scale {p:?}"))))
        .collect::<CliResult<_>>()?;
    if v.is_empty() {
        return Err(usage("empty scale list"));
    }
    if v.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(usage("scales must be positive"));
    }
    Ok(v)
}

fn as_int(v: f64, what: &str) -> CliResult<i64> {
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(usage(format!("{what} must be an integer, got {v}")));
    }
    Ok(v as i64)
}

fn as_level(v: f64) -> CliResult<u32> {
    let m = as_int(v, "level")?;
    if m < 1 || m > u32::MAX as i64 {
        return Err(usage(format!("level must be ≥ 1, got {m}")));
    }
    Ok(m as u32)
}

fn require<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("missing --{flag}")))
}

fn positive(v: f64, flag: &str) -> CliResult<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(usage(format!("--{flag} must be positive, got {v}")));
    }
    Ok(v)
}

fn parse_scheme(s: Option<&str>) -> CliResult<Scheme> {
    match s.unwrap_or("deformed") {
        "original" => Ok(Scheme::Original),
        "deformed" => Ok(Scheme::Deformed),
        "steepest" => Ok(Scheme::steepest()),
        o => Err(usage(format!("unknown scheme {o:?}"))),
    }
}

fn parse_norm(s: Option<&str>) -> CliResult<ChiNormalization> {
    match s.unwrap_or("factorial") {
        "factorial" => Ok(ChiNormalization::Factorial),
        "plain" => Ok(ChiNormalization::Plain),
        o => Err(usage(format!("unknown chi normalization {o:?}"))),
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::new();
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn g(v: f64) -> String {
    fmt_g17(v)
}

pub const KERNEL_HEADER: &str = "family,x1,m1_or_mu1,x2,m2_or_mu2,re,im,err";

fn cmd_kernel(a: KernelArgs) -> CliResult<i32> {
    let family = require(a.family.clone(), "family")?;
    let tuples = parse_tuples(&require(a.args.clone(), "args")?)?;
    let tol = positive(a.tol.unwrap_or(1e-10), "tol")?;
    let norm = parse_norm(a.chi_normalization.as_deref())?;
    type Eval = Box<dyn Fn(&[f64; 4]) -> CliResult<KernelValue> + Sync>;
    let eval: Eval = match family.as_str() {
        "finite" => {
            let p = ModelParams::new(require(a.eps, "eps")?, require(a.t, "t")?)
                .map_err(kernel_err)?;
            let scheme = parse_scheme(a.scheme.as_deref())?;
            Box::new(move |v| {
                let pa = GridPoint::at(v[0], as_level(v[1])?).map_err(kernel_err)?;
                let pb = GridPoint::at(v[2], as_level(v[3])?).map_err(kernel_err)?;
                kernel_finite(&pa, &pb, &p, scheme, tol).map_err(kernel_err)
            })
        }
        "tacnode" => {
            let params = TacnodeParams::new(require(a.eps_tac, "eps-tac")?)
                .map_err(kernel_err)?
                .with_tol(tol);
            Box::new(move |v| {
                let pa = TacnodePoint::new(as_int(v[0], "x1")?, v[1]);
                let pb = TacnodePoint::new(as_int(v[2], "x2")?, v[3]);
                kernel_tacnode(&pa, &pb, &params).map_err(kernel_err)
            })
        }
        "gue" => Box::new(move |v| {
            let pa = GuePoint::new(as_int(v[0], "x1")?, v[1]);
            let pb = GuePoint::new(as_int(v[2], "x2")?, v[3]);
            // mixed signs: the limit vanishes
            let br = branch_of(&pa, &pb).unwrap_or(Branch::Nonnegative);
            kernel_gue_limit(&pa, &pb, br, norm, tol).map_err(kernel_err)
        }),
        "gue-minor" => Box::new(move |v| {
            let pa = GuePoint::new(as_int(v[0], "x1")?, v[1]);
            let pb = GuePoint::new(as_int(v[2], "x2")?, v[3]);
            kernel_gue_minor(&pa, &pb, norm, tol).map_err(kernel_err)
        }),
        "pearcey" => Box::new(move |v| {
            let pa = PearceyPoint::new(v[0], v[1]);
            let pb = PearceyPoint::new(v[2], v[3]);
            kernel_pearcey(&pa, &pb, tol).map_err(kernel_err)
        }),
        o => return Err(usage(format!("unknown family {o:?}"))),
    };
    let values: Vec<KernelValue> = tuples
        .par_iter()
        .map(|v| eval(v))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<CliResult<_>>()?;
    let rows = tuples.iter().zip(&values).map(|(v, k)| {
        vec![
            family.clone(),
            g(v[0]),
            g(v[1]),
            g(v[2]),
            g(v[3]),
            g(k.value.re),
            g(k.value.im),
            g(k.err),
        ]
    });
    emit(a.out.as_deref(), &csv(KERNEL_HEADER, rows))?;
    Ok(0)
}

pub const OCCUPANCY_HEADER: &str = "m,x2,freq,stderr,trials";
pub const EVENTS_HEADER: &str = "kind,x2_a,m_a,x2_b,m_b,freq,stderr,trials";
pub const SNAPSHOT_HEADER: &str = "trial,m,x2";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsFile {
    #[serde(default)]
    pairs: Vec<[[i64; 2]; 2]>,
    #[serde(default)]
    endpoints: Vec<[i64; 2]>,
}

fn site([x2, m]: [i64; 2]) -> CliResult<GridPoint> {
    if m < 1 || m > u32::MAX as i64 {
        return Err(usage(format!("target level must be ≥ 1, got {m}")));
    }
    GridPoint::new(x2, m as u32).map_err(kernel_err)
}

pub fn load_targets(path: &Path) -> CliResult<Targets> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read targets {}: {e}", path.display())))?;
    let f: TargetsFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("targets {}: {e}", path.display())))?;
    Ok(Targets {
        pairs: f
            .pairs
            .iter()
            .map(|[a, b]| Ok((site(*a)?, site(*b)?)))
            .collect::<CliResult<_>>()?,
        endpoints: f.endpoints.iter().map(|e| site(*e)).collect::<CliResult<_>>()?,
    })
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<i32> {
    let cfg = SimConfig {
        levels: require(a.levels, "levels")?,
        eps: require(a.eps, "eps")?,
        t_end: require(a.t, "t")?,
        trials: a.trials.unwrap_or(1000),
        seed: a.seed.unwrap_or(0),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let targets = match &a.endpoints {
        Some(p) => load_targets(p)?,
        None => Targets::default(),
    };
    if a.endpoints.is_some() && a.events_out.is_none() {
        return Err(usage("--endpoints needs --events-out"));
    }
    let stats = simulate_statistics(&cfg, &targets).map_err(|e| usage(e.to_string()))?;
    let rows = stats.occupancy.iter().map(|(p, e)| {
        vec![
            p.m.to_string(),
            p.x2.to_string(),
            g(e.freq()),
            g(e.stderr()),
            e.trials.to_string(),
        ]
    });
    emit(a.out.as_deref(), &csv(OCCUPANCY_HEADER, rows))?;

    if let Some(path) = &a.events_out {
        let mut rows = Vec::new();
        for ((pa, pb), e) in targets.pairs.iter().zip(&stats.pairs) {
            rows.push(event_row("pair", pa, pb, e));
        }
        for (p, e) in targets.endpoints.iter().zip(&stats.endpoints) {
            let up = GridPoint { m: p.m + 2, x2: p.x2 };
            rows.push(event_row("endpoint", p, &up, e));
        }
        emit(Some(path), &csv(EVENTS_HEADER, rows))?;
    }

    if let Some(path) = &a.snapshots {
        let n = a.snapshot_trials.unwrap_or(1).min(cfg.trials);
        let configs: Vec<_> = (0..n as u64)
            .into_par_iter()
            .map(|i| run_trial(&cfg, i))
            .collect();
        let mut s = String::from(SNAPSHOT_HEADER);
        s.push('\n');
        for (i, c) in configs.iter().enumerate() {
            for (m, lvl) in c.levels.iter().enumerate() {
                for x2 in lvl {
                    let _ = writeln!(s, "{i},{},{x2}", m + 1);
                }
            }
        }
        emit(Some(path), &s)?;
    }
    Ok(0)
}

fn event_row(
    kind: &str,
    a: &GridPoint,
    b: &GridPoint,
    e: &crate::simulator::Estimate,
) -> Vec<String> {
    vec![
        kind.to_string(),
        a.x2.to_string(),
        a.m.to_string(),
        b.x2.to_string(),
        b.m.to_string(),
        g(e.freq()),
        g(e.stderr()),
        e.trials.to_string(),
    ]
}

pub const DENSITY_HEADER: &str = "xi,mu,region,density";
pub const BOUNDARY_HEADER: &str = "z,xi,mu";
pub const DEFAULT_TAU: f64 = 0.5;

fn steps(n: Option<usize>, default: usize, flag: &str) -> CliResult<usize> {
    let n = n.unwrap_or(default);
    if n == 0 {
        return Err(usage(format!("--{flag} must be ≥ 1")));
    }
    Ok(n)
}

fn cmd_density_map(a: DensityArgs) -> CliResult<i32> {
    let eps = a.eps.unwrap_or(0.5);
    let tau = a.tau.unwrap_or(DEFAULT_TAU);
    let cls = Classifier::new(eps, tau).map_err(|e| usage(e.to_string()))?;
    let xis = linspace(
        a.xi_min.unwrap_or(-3.0),
        a.xi_max.unwrap_or(3.0),
        steps(a.xi_steps, 61, "xi-steps")?,
    );
    let mu_min = a.mu_min.unwrap_or(0.0);
    if !(mu_min >= 0.0) {
        return Err(usage("--mu-min must be ≥ 0"));
    }
    let mus = linspace(mu_min, a.mu_max.unwrap_or(6.0), steps(a.mu_steps, 61, "mu-steps")?);
    let grid: Vec<(f64, f64)> = xis
        .iter()
        .flat_map(|&x| mus.iter().map(move |&m| (x, m)))
        .collect();
    let results: Vec<_> = grid.par_iter().map(|&(x, m)| cls.saddle(x, m)).collect();
    let mut rows = Vec::with_capacity(grid.len());
    for ((x, m), r) in grid.iter().zip(results) {
        let r = r.map_err(|e| CliError::Failure(format!("ξ={x}, μ={m}: {e}")))?;
        rows.push(vec![g(*x), g(*m), r.region.label().to_string(), g(r.density)]);
    }
    emit(a.out.as_deref(), &csv(DENSITY_HEADER, rows))?;
    Ok(0)
}

fn cmd_boundary(a: BoundaryArgs) -> CliResult<i32> {
    let eps = a.eps.unwrap_or(0.5);
    let tau = a.tau.unwrap_or(DEFAULT_TAU);
    Classifier::new(eps, tau).map_err(|e| usage(e.to_string()))?;
    let zs = linspace(
        a.z_min.unwrap_or(-8.0),
        a.z_max.unwrap_or(8.0),
        steps(a.z_steps, 1601, "z-steps")?,
    );
    let (pts, skipped) = boundary_curve(eps, tau, &zs);
    if !skipped.is_empty() {
        eprintln!("skipped {} singular parameter value(s)", skipped.len());
    }
    let rows = pts.iter().map(|b| vec![g(b.z_real), g(b.xi), g(b.mu)]);
    emit(a.out.as_deref(), &csv(BOUNDARY_HEADER, rows))?;
    Ok(0)
}

pub const CONVERGE_HEADER: &str =
    "scale,x1,mu1_or_nu1,x2,mu2_or_nu2,approx_re,approx_im,limit_re,limit_im,abs_err";

fn cmd_converge(a: ConvergeArgs) -> CliResult<i32> {
    let target = require(a.target.clone(), "target")?;
    let scales = parse_scales(&require(a.scales.clone(), "scales")?)?;
    let tuples = parse_tuples(&require(a.args.clone(), "args")?)?;
    let tol = positive(a.tol.unwrap_or(1e-10), "tol")?;
    let eps_tac = positive(a.eps_tac.unwrap_or(0.5), "eps-tac")?;
    let norm = parse_norm(a.chi_normalization.as_deref())?;
    let dm = a.dm.unwrap_or(2);

    // (limit, approx at scale) for one tuple
    type Pair = Box<dyn Fn(&[f64; 4], f64) -> CliResult<(KernelValue, KernelValue)> + Sync>;
    let pair: Pair = match target.as_str() {
        "tacnode" => {
            let params = TacnodeParams::new(eps_tac).map_err(kernel_err)?.with_tol(tol);
            Box::new(move |v, l| {
                let pa = TacnodePoint::new(as_int(v[0], "x1")?, v[1]);
                let pb = TacnodePoint::new(as_int(v[2], "x2")?, v[3]);
                let lim = kernel_tacnode(&pa, &pb, &params).map_err(kernel_err)?;
                let app = scaled_finite_for_tacnode(l, eps_tac, &pa, &pb, tol).map_err(kernel_err)?;
                Ok((lim, app))
            })
        }
        "nearby-sections" => Box::new(move |v, l| {
            if v[1].to_bits() != v[3].to_bits() {
                return Err(usage("nearby-sections tuples need μ1 = μ2"));
            }
            let pa = TacnodePoint::new(as_int(v[0], "x1")?, v[1]);
            let bx = as_int(v[2], "x2")?;
            let lim = nearby_limit(eps_tac, &pa, bx, dm, tol).map_err(kernel_err)?;
            let app = scaled_finite_nearby(l, eps_tac, &pa, bx, dm, tol).map_err(kernel_err)?;
            Ok((lim, app))
        }),
        "gue" => Box::new(move |v, e| {
            let pa = GuePoint::new(as_int(v[0], "x1")?, v[1]);
            let pb = GuePoint::new(as_int(v[2], "x2")?, v[3]);
            let br = branch_of(&pa, &pb)
                .ok_or_else(|| usage("gue tuples need x1, x2 of the same sign"))?;
            let lim = kernel_gue_limit(&pa, &pb, br, norm, tol).map_err(kernel_err)?;
            let app = scaled_tacnode_for_gue(e, &pa, &pb, br, tol).map_err(kernel_err)?;
            Ok((lim, app))
        }),
        "pearcey" => Box::new(move |v, m| {
            let pa = PearceyPoint::new(v[0], v[1]);
            let pb = PearceyPoint::new(v[2], v[3]);
            let (app, ea, eb) = scaled_tacnode_for_pearcey(m, &pa, &pb, tol).map_err(kernel_err)?;
            // the lattice-effective arguments
            let lim = kernel_pearcey(&ea, &eb, tol).map_err(kernel_err)?;
            Ok((lim, app))
        }),
        o => return Err(usage(format!("unknown target {o:?}"))),
    };
    let jobs: Vec<(usize, f64)> = (0..tuples.len())
        .flat_map(|i| scales.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<_> = jobs.par_iter().map(|&(i, s)| pair(&tuples[i], s)).collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(i, s), r) in jobs.iter().zip(results) {
        let (lim, app) = r?;
        let v = &tuples[i];
        rows.push(vec![
            g(s),
            g(v[0]),
            g(v[1]),
            g(v[2]),
            g(v[3]),
            g(app.value.re),
            g(app.value.im),
            g(lim.value.re),
            g(lim.value.im),
            g((app.value - lim.value).norm()),
        ]);
    }
    emit(a.out.as_deref(), &csv(CONVERGE_HEADER, rows))?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CliResult<i32> {
    let suite = a.suite.clone().unwrap_or_else(|| "all".into());
    if !["deform", "symmetry", "recurrence", "all"].contains(&suite.as_str()) {
        return Err(usage(format!("unknown suite {suite:?}")));
    }
    let mut opts = SuiteOptions::default();
    if let Some(t) = a.threshold {
        opts.threshold = Some(positive(t, "threshold")?);
    }
    if let Some(t) = a.tol {
        opts.tol = positive(t, "tol")?;
    }
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let reports = run_suite(&suite, &opts).map_err(|e| CliError::Failure(e.to_string()))?;
    let passed = reports.iter().all(|r| r.passed());
    for r in &reports {
        for c in &r.checks {
            let status = if c.informational {
                "INFO"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            println!(
                "{} {} cases={} max_residual={} threshold={} {status}",
                r.suite,
                c.name,
                c.cases,
                g(c.max_residual),
                g(c.threshold)
            );
        }
    }
    if let Some(path) = &a.json {
        let doc = serde_json::json!({ "passed": passed, "suites": reports });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        emit(Some(path), &(text + "\n"))?;
    }
    Ok(if passed { 0 } else { 1 })
}
