#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use polygreen::config::RunConfig;
use polygreen::harness::{
    build_operator, verify_counterexample, verify_decay, verify_dirichlet_bound, verify_green_estimates,
    verify_hardy, verify_regular_part, EstimateRun,
};
use polygreen::operator::{discrete_green, regular_part};
use polygreen::report::{add_reports, merge_summaries, write_reports, CheckSummary, Summary, SUMMARY_FILE};
use polygreen::{DimensionParams, Error, FundamentalSolution, MultiIndex};

#[derive(Parser)]
#[command(name = "polygreen", version, about = "Polyharmonic Green functions and their pointwise estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the fundamental solution (or a derivative) along a ray; CSV to stdout.
    Fundsol(FundsolArgs),
    /// Compute G_h(·, y) and S_h(·, y) and dump them.
    Green(GreenArgs),
    /// Check the pointwise Green function estimates on sampled pairs.
    VerifyGreen(RunArgs),
    /// Check the pointwise regular-part estimates on sampled pairs.
    VerifyRegular(RunArgs),
    /// Check the sharpness example.
    Counterexample(RunArgs),
    /// Check decay near and away from an exterior point.
    Decay(DecayArgs),
    /// Check the weighted bounds for the Dirichlet problem.
    DirichletBound(RunArgs),
    /// Check Hardy's inequality on random fields.
    Hardy(HardyArgs),
    /// Merge run outputs into one summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct FundsolArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    n: u32,
    /// Single radius; overrides the range.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Unit direction of the ray, comma-separated (default e_1).
    #[arg(long)]
    direction: Option<String>,
    /// Multi-index of an extra derivative column, comma-separated.
    #[arg(long)]
    alpha: Option<String>,
    /// Length scale inside the logarithm for even n.
    #[arg(long, default_value_t = 1.0)]
    diam: f64,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    /// `ball`, `punctured-ball`, `cube`, `l-shape`, `ellipse`, or a JSON object.
    #[arg(long)]
    domain: Option<String>,
    /// Mesh widths, comma-separated; fractions like 1/32 are accepted.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampled pairs.
    #[arg(long)]
    count: Option<usize>,
    /// Estimate as TARGET:i:j, e.g. Gr1:1:0; repeatable.
    #[arg(long = "spec")]
    specs: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GreenArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Source point, comma-separated.
    #[arg(long)]
    y: String,
    /// Mesh width; defaults to the finest configured level.
    #[arg(long)]
    h: Option<String>,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Boundary point near which Q is placed, comma-separated.
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct HardyArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories or summary files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures after a successful parse: bad input or a broken run.
enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::DimensionOutOfRange { .. }
            | Error::SpecMismatch(_)
            | Error::InvalidParity(_)
            | Error::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn config_error(path: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Config(Error::Config { path: path.into(), message: msg.to_string() }.to_string())
}

fn parse_number(s: &str, path: &str) -> Result<f64, Failure> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
        None => s.parse().ok(),
    };
    v.ok_or_else(|| config_error(path, format!("cannot parse `{s}` as a number")))
}

fn parse_list(s: &str, path: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(|t| parse_number(t, path)).collect()
}

fn domain_value(s: &str, n: Option<u64>) -> Result<Value, Failure> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| config_error("domain", e));
    }
    let dim = n.unwrap_or(2);
    Ok(match s {
        "ball" => json!({"kind": "ball", "radius": 1.0, "dim": dim}),
        "punctured-ball" => json!({"kind": "punctured-ball", "radius": 1.0, "epsilon": 0.0, "dim": dim}),
        "cube" | "square" => json!({"kind": "rectangle", "sides": vec![1.0; dim as usize], "dim": dim}),
        "l-shape" => json!({"kind": "l-shape", "size": 1.0, "width": 0.5, "dim": 2}),
        "ellipse" => json!({"kind": "ellipse", "a": 1.0, "b": 0.1, "dim": 2}),
        other => return Err(config_error("domain", format!("unknown domain `{other}`"))),
    })
}

fn spec_value(s: &str, k: usize) -> Result<Value, Failure> {
    let path = format!("specs[{k}]");
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(config_error(&path, format!("expected TARGET:i:j, got `{s}`")));
    }
    let idx = |t: &str| t.parse::<u32>().map_err(|_| config_error(&path, format!("bad index `{t}`")));
    Ok(json!({"target": parts[0], "i": idx(parts[1])?, "j": idx(parts[2])?}))
}

/// Merges the config file and the flags into one JSON object, then parses
/// it so every error carries a field path.
fn load_config(args: &RunArgs, extra: impl FnOnce(&mut Map<String, Value>) -> Result<(), Failure>) -> Result<RunConfig, Failure> {
    let mut obj = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_error("config", format!("{}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| config_error("config", e))? {
                Value::Object(o) => o,
                _ => return Err(config_error("config", "expected a JSON object")),
            }
        }
        None => Map::new(),
    };
    if let Some(m) = args.m {
        obj.insert("m".into(), json!(m));
    }
    if let Some(n) = args.n {
        obj.insert("n".into(), json!(n));
    }
    let n = obj.get("n").and_then(Value::as_u64);
    if let Some(d) = &args.domain {
        obj.insert("domain".into(), domain_value(d, n)?);
    } else if !obj.contains_key("domain") {
        obj.insert("domain".into(), domain_value("ball", n)?);
    }
    if let Some(l) = &args.levels {
        obj.insert("levels".into(), json!(parse_list(l, "levels")?));
    }
    if let Some(s) = args.seed {
        obj.insert("seed".into(), json!(s));
    }
    if let Some(c) = args.count {
        let seed = obj.get("seed").cloned().unwrap_or(json!(0));
        let plan = obj.entry("plan").or_insert_with(|| json!({"seed": seed}));
        if let Value::Object(p) = plan {
            p.insert("count".into(), json!(c));
        }
    }
    if !args.specs.is_empty() {
        let specs = args.specs.iter().enumerate().map(|(k, s)| spec_value(s, k)).collect::<Result<Vec<_>, _>>()?;
        obj.insert("specs".into(), Value::Array(specs));
    }
    if let Some(o) = &args.out {
        obj.insert("output".into(), json!(o));
    }
    extra(&mut obj)?;
    Ok(RunConfig::from_json(&Value::Object(obj).to_string())?)
}

fn config_echo(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    // The output location does not change results.
    if let Value::Object(o) = &mut v {
        o.remove("output");
    }
    v
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn finish(summary: &Summary, out: Option<&Path>) -> Outcome {
    if let Some(dir) = out {
        summary.write(dir)?;
    }
    println!("{}", verdict(summary.passed));
    Ok(summary.passed)
}

fn estimate_command(args: &RunArgs, regular: bool) -> Outcome {
    let cfg = load_config(args, |_| Ok(()))?;
    let run = cfg.verification_run()?;
    let result: EstimateRun = if regular { verify_regular_part(&run)? } else { verify_green_estimates(&run)? };
    let name = if regular { "verify-regular" } else { "verify-green" };
    let mut summary = Summary::new(name, config_echo(&cfg));
    summary.warnings = result.warnings.clone();
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.output {
        Some(dir) => write_reports(dir, &result.reports, &mut summary)?,
        None => add_reports(&result.reports, &mut summary),
    }
    println!("pairs sampled: {}", result.pairs_sampled);
    for (region, count) in &result.region_counts {
        println!("region {region}: {count} pairs");
    }
    for rep in &result.reports {
        println!(
            "{:<14} constant {:.6e}  max change {:.3}  {}",
            rep.name,
            rep.constant(),
            rep.max_change,
            verdict(rep.passed())
        );
    }
    finish(&summary, cfg.output.as_deref())
}

fn fundsol(a: &FundsolArgs) -> Outcome {
    let params = DimensionParams::new(a.m, a.n)?;
    let n = a.n as usize;
    let dir = match &a.direction {
        Some(d) => parse_list(d, "direction")?,
        None => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dir.len() != n || !(len > 0.0) {
        return Err(config_error("direction", format!("need a nonzero vector with {n} components")));
    }
    let alpha = match &a.alpha {
        Some(s) => {
            let c = s
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| config_error("alpha", format!("bad component `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if c.len() != n {
                return Err(config_error("alpha", format!("need {n} components")));
            }
            Some(MultiIndex::new(c))
        }
        None => None,
    };
    let radii: Vec<f64> = match a.r {
        Some(r) => vec![r],
        None if a.steps >= 2 => (0..a.steps)
            .map(|k| a.r_min + (a.r_max - a.r_min) * k as f64 / (a.steps - 1) as f64)
            .collect(),
        None => vec![a.r_min],
    };
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(config_error("r", "radii must be positive"));
    }
    let gamma = FundamentalSolution::new(params, a.diam);
    let deriv = alpha.as_ref().map(|al| gamma.derivative_expr(al));
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let io = |e: std::io::Error| Failure::Run(e.to_string());
    match &alpha {
        Some(al) => writeln!(w, "r,value,d{}", al.components().iter().map(u32::to_string).collect::<Vec<_>>().join("_")),
        None => writeln!(w, "r,value"),
    }
    .map_err(io)?;
    for r in radii {
        let z: Vec<f64> = dir.iter().map(|v| v / len * r).collect();
        let v = gamma.value(&z)?;
        match &deriv {
            Some(e) => writeln!(w, "{r},{v},{}", e.eval(&z)),
            None => writeln!(w, "{r},{v}"),
        }
        .map_err(io)?;
    }
    Ok(true)
}

fn green(a: &GreenArgs) -> Outcome {
    let cfg = load_config(&a.run, |_| Ok(()))?;
    let params = cfg.params()?;
    let y = parse_list(&a.y, "y")?;
    if y.len() != params.n() as usize {
        return Err(config_error("y", format!("need {} components", params.n())));
    }
    let h = match &a.h {
        Some(h) => parse_number(h, "h")?,
        None => cfg
            .levels
            .iter()
            .cloned()
            .reduce(f64::min)
            .ok_or_else(|| config_error("h", "give --h or at least one level"))?,
    };
    if !(h > 0.0) {
        return Err(config_error("h", "must be positive"));
    }
    let op = build_operator(&cfg.domain, params.m(), h, &cfg.solver)?;
    let col = discrete_green(&op, &y)?;
    let s = regular_part(&col, params, cfg.domain.diameter())?;
    let grid = op.grid();
    println!("nodes: {}", grid.num_interior());
    println!("source node: {:?} (snap distance {:.3e})", grid.coords_of(&col.source), col.snap_distance);
    println!("max |G_h|: {:.6e}", col.field.max_abs());
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        col.field.write_binary(&dir.join("green.bin"))?;
        s.write_binary(&dir.join("regular.bin"))?;
        // 3D fields get the slice through the source.
        let axis = (grid.dim() == 3).then(|| (2, col.source[2]));
        col.field.write_slice_csv(&dir.join("green.csv"), axis)?;
        s.write_slice_csv(&dir.join("regular.csv"), axis)?;
    }
    Ok(true)
}

fn counterexample(args: &RunArgs) -> Outcome {
    let cfg = load_config(args, |_| Ok(()))?;
    let r = verify_counterexample(cfg.m, cfg.n, &cfg.levels)?;
    println!("sup |∇^λ u| variation: {:.4} (bounded: {})", r.variation, verdict(r.bounded));
    println!("sup |∇^(λ+1) u| exponent: {:.4} (unbounded: {})", r.exponent, verdict(r.unbounded));
    println!("directional gap: {:.4} ({})", r.gap, verdict(r.no_limit));
    println!("source support: {}", verdict(r.supported));
    let mut summary = Summary::new("counterexample", config_echo(&cfg));
    summary.levels = cfg.levels.clone();
    summary.push_check(CheckSummary::new("counterexample", r.passed(), &r)?);
    finish(&summary, cfg.output.as_deref())
}

fn decay(a: &DecayArgs) -> Outcome {
    let cfg = load_config(&a.run, |obj| {
        if a.anchor.is_none() && a.radius.is_none() {
            return Ok(());
        }
        let sec = obj.entry("decay").or_insert_with(|| json!({}));
        if let Value::Object(s) = sec {
            if let Some(an) = &a.anchor {
                s.insert("anchor".into(), json!(parse_list(an, "decay.anchor")?));
            }
            if let Some(r) = a.radius {
                s.insert("radius".into(), json!(r));
            }
        }
        Ok(())
    })?;
    let (interior, far) = verify_decay(&cfg.decay_config()?)?;
    let mut summary = Summary::new("decay", config_echo(&cfg));
    summary.levels = interior.levels.iter().map(|l| l.h).collect();
    for rep in [&interior, &far] {
        println!(
            "{:<10} max change {:.3}  two-point {:?}  {}",
            rep.kind,
            rep.max_change,
            rep.two_point,
            verdict(rep.passed())
        );
        summary.push_check(CheckSummary::new(rep.kind.clone(), rep.passed(), rep)?);
    }
    finish(&summary, cfg.output.as_deref())
}

fn dirichlet(args: &RunArgs) -> Outcome {
    let cfg = load_config(args, |_| Ok(()))?;
    let reports = verify_dirichlet_bound(&cfg.dirichlet_problem()?)?;
    let mut summary = Summary::new("dirichlet-bound", config_echo(&cfg));
    if let Some(r) = reports.first() {
        summary.levels = r.levels.iter().map(|l| l.h).collect();
    }
    for r in &reports {
        println!("data set {}: max change {:.3}  {}", r.data_set, r.max_change, verdict(r.passed()));
        summary.push_check(CheckSummary::new(format!("data_set_{}", r.data_set), r.passed(), r)?);
    }
    finish(&summary, cfg.output.as_deref())
}

fn hardy(a: &HardyArgs) -> Outcome {
    let cfg = load_config(&a.run, |obj| {
        if let Some(t) = a.trials {
            obj.insert("hardy".into(), json!({"trials": t}));
        }
        Ok(())
    })?;
    let r = verify_hardy(&cfg.domain, cfg.m, cfg.hardy_trials(), cfg.seed, &cfg.levels)?;
    println!("max ratio per level: {:?}  max change {:.3}", r.max_ratio, r.max_change);
    let mut summary = Summary::new("hardy", config_echo(&cfg));
    summary.levels = r.levels.clone();
    summary.push_check(CheckSummary::new("hardy", r.passed(), &r)?);
    finish(&summary, cfg.output.as_deref())
}

fn report(a: &ReportArgs) -> Outcome {
    let mut runs = Vec::with_capacity(a.inputs.len());
    for p in &a.inputs {
        let file = if p.is_dir() { p.join(SUMMARY_FILE) } else { p.clone() };
        let mut s = Summary::read(&file).map_err(|e| config_error("inputs", format!("{}: {e}", file.display())))?;
        // CSV names become relative to the merged summary's directory.
        if let (Some(out), Some(parent)) = (&a.out, file.parent()) {
            let base = pathdiff(parent, out);
            for spec in &mut s.specs {
                for l in &mut spec.levels {
                    l.csv = base.join(&l.csv).to_string_lossy().into_owned();
                }
            }
        }
        runs.push(s);
    }
    let merged = merge_summaries(&runs)?;
    for s in &merged.specs {
        println!("{:<30} {}", s.name, verdict(s.passed));
    }
    for c in &merged.checks {
        println!("{:<30} {}", c.name, verdict(c.passed));
    }
    finish(&merged, a.out.as_deref())
}

/// `target` relative to `from` when both share a prefix, else `target`.
fn pathdiff(target: &Path, from: &Path) -> PathBuf {
    let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (t, f) = (abs(target), abs(from));
    let common = t.components().zip(f.components()).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return t;
    }
    let mut out = PathBuf::new();
    for _ in f.components().skip(common) {
        out.push("..");
    }
    for c in t.components().skip(common) {
        out.push(c);
    }
    out
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("POLYGREEN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| config_error("POLYGREEN_THREADS", format!("expected a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Fundsol(a) => fundsol(a),
        Command::Green(a) => green(a),
        Command::VerifyGreen(a) => estimate_command(a, false),
        Command::VerifyRegular(a) => estimate_command(a, true),
        Command::Counterexample(a) => counterexample(a),
        Command::Decay(a) => decay(a),
        Command::DirichletBound(a) => dirichlet(a),
        Command::Hardy(a) => hardy(a),
        Command::Report(a) => report(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
