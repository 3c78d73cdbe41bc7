use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kerneldyn::activations::Activation;
use kerneldyn::dynamics::{cobweb, iterate_with_report, ode_solve, OdeOptions, Trajectory};
use kerneldyn::export::{write_sim_csv, write_table_csv, write_trajectory_csv, ReportJson};
use kerneldyn::kernel::{depth_threshold, find_fixed_point, DepthThreshold};
use kerneldyn::mc_sim::{run, SimConfig, WeightDist};
use kerneldyn::table::{table, TableRow};
use kerneldyn::{GaussianQuadrature, KernelMap, NormalizationMode};
use serde::Serialize;
use serde_json::{json, Value};

use crate::svg::{Plot, Series};
use crate::{Cli, Command, GlobalArgs, TransformArgs};

#[derive(Debug)]
pub enum CliError {
    Core(kerneldyn::Error),
    Usage(String),
    Io(std::io::Error),
    Csv(csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_usage() => 2,
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Csv(e) => write!(f, "csv error: {e}"),
        }
    }
}

impl From<kerneldyn::Error> for CliError {
    fn from(e: kerneldyn::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a Value,
    version: &'static str,
    seed: u64,
    outputs: Vec<String>,
    duration_seconds: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

/// Everything a command produces: the text echoed to stdout plus named
/// files for the output directory.
struct Output {
    stem: String,
    stdout: String,
    files: Vec<(String, String)>,
}

impl Output {
    fn new(stem: String) -> Self {
        Self {
            stem,
            stdout: String::new(),
            files: Vec::new(),
        }
    }

    fn primary(&mut self, ext: &str, body: String) {
        self.files.push((format!("{}.{ext}", self.stem), body.clone()));
        self.stdout = body;
    }

    fn extra(&mut self, suffix: &str, body: String) {
        self.files.push((format!("{}_{suffix}", self.stem), body));
    }
}

fn format_of(g: &GlobalArgs, default: Format) -> Format {
    if g.json {
        Format::Json
    } else if g.csv {
        Format::Csv
    } else {
        default
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn csv_string<F>(f: F) -> CliResult<String>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn safe_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
    quad: GaussianQuadrature,
}

impl Ctx<'_> {
    fn map(&self, activation: &str, t: &TransformArgs) -> CliResult<KernelMap> {
        let act = Activation::lookup(activation, &self.quad)?;
        let km = KernelMap::for_activation(&act, self.global.truncation, &self.quad)?;
        Ok(km.transformed(parse_norm(t)?, t.residual)?)
    }
}

fn parse_norm(t: &TransformArgs) -> CliResult<Option<NormalizationMode>> {
    Ok(t.norm.as_deref().map(str::parse).transpose()?)
}

fn transform_config(t: &TransformArgs) -> Value {
    json!({ "residual": t.residual, "norm": t.norm })
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    if g.truncation < 2 {
        return Err(CliError::Usage(format!("--K {} must be at least 2", g.truncation)));
    }
    if g.svg && g.out_dir.is_none() {
        return Err(CliError::Usage("--svg needs --out-dir (or KD_OUT_DIR)".into()));
    }
    let start = Instant::now();
    let ctx = Ctx {
        global: g,
        quad: GaussianQuadrature::default(),
    };
    let (name, config, out) = match &cli.command {
        Command::Analyze { activation } => analyze(&ctx, activation)?,
        Command::Table => table_cmd(&ctx)?,
        Command::Iterate {
            activation,
            start,
            depth,
            transform,
        } => iterate_cmd(&ctx, activation, start.rho0, *depth, transform)?,
        Command::Cobweb {
            activation,
            start,
            steps,
            transform,
        } => cobweb_cmd(&ctx, activation, start.rho0, *steps, transform)?,
        Command::Ode {
            activation,
            start,
            t_max,
            dt,
            transform,
        } => ode_cmd(&ctx, activation, start.rho0, *t_max, *dt, transform)?,
        Command::Simulate {
            activation,
            start,
            width,
            depth,
            trials,
            weights,
            transform,
        } => {
            let mut config = SimConfig::new(activation.clone(), *width, *depth, start.rho0, *trials);
            config.weight_dist = weights.parse::<WeightDist>()?;
            config.residual = transform.residual;
            config.norm_mode = parse_norm(transform)?;
            config.seed = g.seed;
            simulate_cmd(&ctx, config)?
        }
        Command::DepthThreshold { activation, epsilon } => {
            depth_cmd(&ctx, activation, epsilon.unwrap_or(2f64.powi(-128)))?
        }
        Command::Figure {
            activation,
            start,
            depth,
        } => figure_cmd(&ctx, activation, start.rho0, *depth)?,
    };
    print!("{}", out.stdout);
    if let Some(dir) = &g.out_dir {
        write_outputs(dir, name, &config, g, out, start)?;
    }
    Ok(())
}

fn write_outputs(
    dir: &Path,
    command: &str,
    config: &Value,
    g: &GlobalArgs,
    out: Output,
    start: Instant,
) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (file, body) in &out.files {
        let path: PathBuf = dir.join(file);
        fs::write(&path, body)?;
        paths.push(file.clone());
    }
    let full_config = json!({
        "command": config,
        "K": g.truncation,
        "format": if g.json { "json" } else if g.csv { "csv" } else { "default" },
        "svg": g.svg,
    });
    let manifest = RunManifest {
        command,
        config: &full_config,
        version: env!("CARGO_PKG_VERSION"),
        seed: g.seed,
        outputs: paths,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(dir.join(format!("{}.manifest.json", out.stem)), to_json(&manifest))?;
    Ok(())
}

type CmdOutput = (&'static str, Value, Output);

fn analyze(ctx: &Ctx, activation: &str) -> CliResult<CmdOutput> {
    let km = ctx.map(
        activation,
        &TransformArgs {
            residual: None,
            norm: None,
        },
    )?;
    let report = find_fixed_point(&km)?;
    let mut out = Output::new(format!("analyze_{}", safe_stem(activation)));
    match format_of(ctx.global, Format::Json) {
        Format::Json => out.primary("json", to_json(&ReportJson::from(&report))),
        Format::Csv => {
            let row = TableRow::from_report(&report);
            out.primary("csv", csv_string(|b| write_table_csv(b, &[row]))?)
        }
    }
    Ok(("analyze", json!({ "activation": activation }), out))
}

fn table_cmd(ctx: &Ctx) -> CliResult<CmdOutput> {
    let rows = table(ctx.global.truncation, &ctx.quad)?;
    let mut out = Output::new("table".into());
    match format_of(ctx.global, Format::Csv) {
        Format::Csv => out.primary("csv", csv_string(|b| write_table_csv(b, &rows))?),
        Format::Json => out.primary("json", to_json(&rows)),
    }
    Ok(("table", json!({}), out))
}

fn trajectory_output(ctx: &Ctx, stem: String, traj: &Trajectory, title: &str) -> CliResult<Output> {
    let mut out = Output::new(stem);
    match format_of(ctx.global, Format::Csv) {
        Format::Csv => out.primary("csv", csv_string(|b| write_trajectory_csv(b, traj))?),
        Format::Json => out.primary("json", to_json(traj)),
    }
    if ctx.global.svg {
        let pts = traj.times.iter().copied().zip(traj.values.iter().copied()).collect();
        let plot = Plot::new(title, "depth / time", "rho").with(Series::new("rho", pts));
        out.extra("rho.svg", plot.render());
    }
    Ok(out)
}

fn iterate_cmd(ctx: &Ctx, activation: &str, rho0: f64, depth: usize, t: &TransformArgs) -> CliResult<CmdOutput> {
    let km = ctx.map(activation, t)?;
    let report = find_fixed_point(&km).ok();
    let traj = iterate_with_report(&km, report.as_ref(), rho0, depth)?;
    let out = trajectory_output(ctx, format!("iterate_{}", safe_stem(activation)), &traj, activation)?;
    let config = json!({ "activation": activation, "rho0": rho0, "depth": depth, "transform": transform_config(t) });
    Ok(("iterate", config, out))
}

fn cobweb_cmd(ctx: &Ctx, activation: &str, rho0: f64, steps: usize, t: &TransformArgs) -> CliResult<CmdOutput> {
    let km = ctx.map(activation, t)?;
    let pairs = cobweb(&km, rho0, steps)?;
    let mut out = Output::new(format!("cobweb_{}", safe_stem(activation)));
    match format_of(ctx.global, Format::Csv) {
        Format::Csv => out.primary(
            "csv",
            csv_string(|b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["step", "rho", "kappa"])?;
                for (i, (r, k)) in pairs.iter().enumerate() {
                    w.serialize((i, r, k))?;
                }
                w.flush()?;
                Ok(())
            })?,
        ),
        Format::Json => out.primary("json", to_json(&pairs)),
    }
    let config = json!({ "activation": activation, "rho0": rho0, "steps": steps, "transform": transform_config(t) });
    Ok(("cobweb", config, out))
}

fn ode_cmd(ctx: &Ctx, activation: &str, rho0: f64, t_max: f64, dt: f64, t: &TransformArgs) -> CliResult<CmdOutput> {
    let km = ctx.map(activation, t)?;
    let opts = OdeOptions {
        t_max,
        dt,
        ..Default::default()
    };
    let traj = ode_solve(&km, rho0, opts)?;
    if traj.out_of_range {
        eprintln!("kd: warning: trajectory left [-1, 1]");
    }
    let out = trajectory_output(ctx, format!("ode_{}", safe_stem(activation)), &traj, activation)?;
    let config =
        json!({ "activation": activation, "rho0": rho0, "t_max": t_max, "dt": dt, "transform": transform_config(t) });
    Ok(("ode", config, out))
}

fn simulate_cmd(ctx: &Ctx, config: SimConfig) -> CliResult<CmdOutput> {
    let result = run(&config, ctx.global.truncation, &ctx.quad)?;
    let mut out = Output::new(format!("simulate_{}", safe_stem(&config.activation)));
    match format_of(ctx.global, Format::Csv) {
        Format::Csv => out.primary("csv", csv_string(|b| write_sim_csv(b, &result))?),
        Format::Json => out.primary("json", to_json(&result)),
    }
    if ctx.global.svg {
        let emp = result.layers.iter().map(|l| (l.layer as f64, l.mean_kernel)).collect();
        let mf = result
            .layers
            .iter()
            .map(|l| (l.layer as f64, l.meanfield_kernel))
            .collect();
        let plot = Plot::new(&config.activation, "layer", "kernel")
            .with(Series::new("empirical", emp))
            .with(Series::new("mean field", mf));
        out.extra("kernel.svg", plot.render());
    }
    let cfg = serde_json::to_value(&config).expect("config serializes");
    Ok(("simulate", cfg, out))
}

#[derive(Serialize)]
struct DepthReport<'a> {
    activation: &'a str,
    epsilon: f64,
    case: &'static str,
    rate: Option<f64>,
    layers: Option<u64>,
}

fn depth_cmd(ctx: &Ctx, activation: &str, epsilon: f64) -> CliResult<CmdOutput> {
    let km = ctx.map(
        activation,
        &TransformArgs {
            residual: None,
            norm: None,
        },
    )?;
    let report = find_fixed_point(&km)?;
    let layers = match depth_threshold(&report, epsilon)? {
        DepthThreshold::Depth { layers } => Some(layers),
        DepthThreshold::NotApplicable { .. } => None,
    };
    let rep = DepthReport {
        activation,
        epsilon,
        case: report.case.as_str(),
        rate: layers.map(|_| report.dkappa1_quad),
        layers,
    };
    let mut out = Output::new(format!("depth_threshold_{}", safe_stem(activation)));
    match format_of(ctx.global, Format::Json) {
        Format::Json => out.primary("json", to_json(&rep)),
        Format::Csv => out.primary(
            "csv",
            csv_string(|b| {
                let mut w = csv::Writer::from_writer(b);
                w.serialize(&rep)?;
                w.flush()?;
                Ok(())
            })?,
        ),
    }
    Ok((
        "depth-threshold",
        json!({ "activation": activation, "epsilon": epsilon }),
        out,
    ))
}

const FIGURE_X_RANGE: f64 = 3.0;
const FIGURE_SAMPLES: usize = 201;

fn figure_cmd(ctx: &Ctx, activation: &str, rho0: f64, depth: usize) -> CliResult<CmdOutput> {
    if rho0.is_nan() || rho0.abs() >= 1.0 {
        return Err(kerneldyn::Error::Domain(format!("initial kernel {rho0} must satisfy |rho0| < 1")).into());
    }
    let act = Activation::lookup(activation, &ctx.quad)?;
    let km = KernelMap::for_activation(&act, ctx.global.truncation, &ctx.quad)?;
    let report = find_fixed_point(&km)?;
    let traj = iterate_with_report(&km, Some(&report), rho0, depth)?;
    let bounds = traj.bounds.as_ref().expect("bounds exist for |rho0| < 1");
    let star = report.rho_star;
    let grid =
        |lo: f64, hi: f64| (0..FIGURE_SAMPLES).map(move |i| lo + (hi - lo) * i as f64 / (FIGURE_SAMPLES - 1) as f64);

    let act_pts: Vec<(f64, f64)> = grid(-FIGURE_X_RANGE, FIGURE_X_RANGE)
        .map(|x| (x, act.eval(x)))
        .collect();
    let activation_csv = csv_string(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["x", "phi"])?;
        for p in &act_pts {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    })?;

    let kernel_pts: Vec<(f64, f64)> = grid(-1.0, 1.0).map(|r| (r, km.eval(r))).collect();
    let identity_pts: Vec<(f64, f64)> = grid(-1.0, 1.0).map(|r| (r, r)).collect();
    let mut web = vec![(rho0, rho0)];
    for w in traj.values.windows(2) {
        web.push((w[0], w[1]));
        web.push((w[1], w[1]));
    }
    let kernel_csv = csv_string(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["series", "x", "y"])?;
        for (name, pts) in [("kernel", &kernel_pts), ("identity", &identity_pts), ("cobweb", &web)] {
            for (x, y) in pts.iter() {
                w.serialize((name, x, y))?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    let functional = bounds.functional;
    let band: Vec<(f64, f64)> = bounds
        .values
        .iter()
        .map(|b| {
            let d = functional.distance_bound(*b);
            ((star - d).max(-1.0), (star + d).min(1.0))
        })
        .collect();
    let sequence_csv = csv_string(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["ell", "rho", "theory_lower", "theory_upper"])?;
        for (ell, (rho, (lo, hi))) in traj.values.iter().zip(&band).enumerate() {
            w.serialize((ell, rho, lo, hi))?;
        }
        w.flush()?;
        Ok(())
    })?;

    let dist: Vec<f64> = traj.distances(star);
    let bound_dist: Vec<f64> = bounds.values.iter().map(|b| functional.distance_bound(*b)).collect();
    let distance_csv = csv_string(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "ell",
            "distance",
            "log10_distance",
            "bound",
            "log10_bound",
            "functional",
        ])?;
        for (ell, (d, bd)) in dist.iter().zip(&bound_dist).enumerate() {
            w.serialize((ell, d, d.log10(), bd, bd.log10(), functional.as_str()))?;
        }
        w.flush()?;
        Ok(())
    })?;

    let mut out = Output::new(format!("figure_{}", safe_stem(activation)));
    out.extra("activation.csv", activation_csv);
    out.extra("kernel.csv", kernel_csv);
    out.extra("sequence.csv", sequence_csv.clone());
    out.extra("distance.csv", distance_csv);
    out.stdout = sequence_csv;

    if ctx.global.svg {
        let ells = |v: &[f64]| v.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect::<Vec<_>>();
        out.extra(
            "activation.svg",
            Plot::new(activation, "x", "phi(x)")
                .with(Series::new("phi", act_pts))
                .render(),
        );
        out.extra(
            "kernel.svg",
            Plot::new(activation, "rho", "kappa(rho)")
                .with(Series::new("kappa", kernel_pts))
                .with(Series::new("identity", identity_pts))
                .with(Series::new("cobweb", web))
                .render(),
        );
        let lower: Vec<f64> = band.iter().map(|b| b.0).collect();
        let upper: Vec<f64> = band.iter().map(|b| b.1).collect();
        out.extra(
            "sequence.svg",
            Plot::new(activation, "depth", "rho")
                .with(Series::new("rho", ells(&traj.values)))
                .with(Series::new("theory lower", ells(&lower)))
                .with(Series::new("theory upper", ells(&upper)))
                .render(),
        );
        out.extra(
            "distance.svg",
            Plot::new(activation, "depth", "|rho - rho*|")
                .log_y()
                .with(Series::new("distance", ells(&dist)))
                .with(Series::new("bound", ells(&bound_dist)))
                .render(),
        );
    }
    let config = json!({ "activation": activation, "rho0": rho0, "depth": depth });
    Ok(("figure", config, out))
}
