mod report;

use arw_core::correlations::{correlation_report, scan_range, ThresholdRule};
use arw_core::field::{two_point_k2, CovarianceKernel, K2Method, KernelTraces};
use arw_core::lattice::Eigenspace;
use arw_core::moments::{moment_suite, singular_partition, SINGULAR_THRESHOLD};
use arw_core::nodal::{distribution_compare, kac_rice_variance, monte_carlo};
use arw_core::sectors::construct_nu_target;
use arw_core::{Error, DEFAULT_WORK_LIMIT, VERSION};
use clap::{Args, Parser, Subcommand, ValueEnum};
use report::{render_text, to_finite_json, OutputTargets, Report, RunConfig, Warning};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const SEED_ENV: &str = "ARW_SEED";

#[derive(Parser, Debug)]
#[command(name = "arw", version, about = "Arithmetic random waves on the flat torus")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Print the report as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Random seed; defaults to $ARW_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on enumeration work.
    #[arg(long, global = true, default_value_t = DEFAULT_WORK_LIMIT)]
    work_limit: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lattice points of an eigenspace.
    Lattice {
        #[arg(long)]
        n: u64,
    },
    /// Spectral, diagonal and quasi-correlation counts.
    Correlate {
        #[arg(long)]
        n: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=6))]
        l: u64,
        /// Radius for quasi-correlations.
        #[arg(long)]
        k: Option<f64>,
        /// Maximum number of quasi-correlation tuples to list.
        #[arg(long, default_value_t = 0)]
        tuples: usize,
    },
    /// Separatedness scan over a range of n.
    Scan {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        delta: f64,
        /// Inclusive range `A:B`.
        #[arg(long, value_parser = parse_range)]
        range: (u64, u64),
        #[arg(long, value_enum, default_value_t = Rule::HalfMinusDelta)]
        rule: Rule,
        /// Per-n rows as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Build an eigenspace whose angles approach the four-arc measure.
    Nus {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: f64,
    },
    /// Covariance kernel and two-point function at one displacement.
    Kernel {
        #[arg(long)]
        n: u64,
        /// Displacement `x,y`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        x: [f64; 2],
        #[arg(long, value_enum, default_value_t = Method::Quadrature)]
        method: Method,
        /// Draws for the Monte Carlo method.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Restricted covariance moments and singular-set cover.
    Moments {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 0.1)]
        c0: f64,
        #[arg(long, default_value_t = SINGULAR_THRESHOLD)]
        threshold: f64,
        /// Per-entry deviations as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Monte Carlo nodal lengths.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Per-trial lengths as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Kac-Rice variance bracket for the restricted length.
    Kacrice {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        s: f64,
        /// Radius of the excised disc around the origin.
        #[arg(long)]
        h0: Option<f64>,
    },
    /// Compare simulated restricted lengths with the limit law.
    Compare {
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    trials: usize,
    /// Grid points per wavelength.
    #[arg(long, default_value_t = 16)]
    gpw: u32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    HalfMinusDelta,
    HalfOfOneMinusDelta,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Taylor,
    Quadrature,
    Mc,
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if a == 0 || b < a {
        return Err("need 0 < A <= B".into());
    }
    Ok((a, b))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("x: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("y: {e}"))?;
    Ok([a, b])
}

/// Exit status for a module error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotInS(_) | Error::Invalid(_) => 2,
        Error::WorkLimit { .. } => 3,
        Error::SingularDisplacement(_) | Error::Numerical(_) | Error::EmptySector { .. } => 4,
    }
}

enum Failure {
    Module(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Command name, its parameters, and an optional CSV target.
fn describe(cmd: &Command) -> (&'static str, Value, Option<&PathBuf>) {
    let sim = |s: &SimArgs| json!({"n": s.n, "s": s.s, "trials": s.trials, "gpw": s.gpw});
    match cmd {
        Command::Lattice { n } => ("lattice", json!({"n": n}), None),
        Command::Correlate { n, l, k, tuples } => ("correlate", json!({"n": n, "l": l, "k": k, "tuples": tuples}), None),
        Command::Scan { l, delta, range, rule, csv } => (
            "scan",
            json!({"l": l, "delta": delta, "range": [range.0, range.1], "rule": format!("{rule:?}")}),
            csv.as_ref(),
        ),
        Command::Nus { s, k, radius } => ("nus", json!({"s": s, "k": k, "radius": radius}), None),
        Command::Kernel { n, x, method, samples } => (
            "kernel",
            json!({"n": n, "x": x, "method": format!("{method:?}"), "samples": samples}),
            None,
        ),
        Command::Moments { n, s, c0, threshold, csv } => (
            "moments",
            json!({"n": n, "s": s, "c0": c0, "threshold": threshold}),
            csv.as_ref(),
        ),
        Command::Simulate { sim: a, csv } => ("simulate", sim(a), csv.as_ref()),
        Command::Kacrice { n, s, h0 } => ("kacrice", json!({"n": n, "s": s, "h0": h0}), None),
        Command::Compare { sim: a } => ("compare", sim(a), None),
    }
}

fn results<T: Serialize>(x: &T, warnings: &mut Vec<Warning>) -> Value {
    to_finite_json(x, warnings)
}

fn run(cmd: &Command, seed: u64, work_limit: u64, warnings: &mut Vec<Warning>) -> Result<Value, Failure> {
    Ok(match cmd {
        Command::Lattice { n } => {
            let e = Eigenspace::new(*n)?;
            let points: Vec<[i64; 2]> = e.points.iter().map(|&(a, b)| [a, b]).collect();
            #[derive(Serialize)]
            struct Out {
                n: u64,
                dim: usize,
                energy: f64,
                tau4: f64,
                points: Vec<[i64; 2]>,
            }
            results(&Out { n: *n, dim: e.dim(), energy: e.energy(), tau4: e.tau_hat(4), points }, warnings)
        }
        Command::Correlate { n, l, k, tuples } => {
            results(&correlation_report(*n, *l as usize, *k, *tuples, work_limit)?, warnings)
        }
        Command::Scan { l, delta, range, rule, csv } => {
            let rule = match rule {
                Rule::HalfMinusDelta => ThresholdRule::HalfMinusDelta,
                Rule::HalfOfOneMinusDelta => ThresholdRule::HalfOfOneMinusDelta,
            };
            let r = scan_range(range.0, range.1, *l, *delta, rule, work_limit)?;
            if !r.skipped.is_empty() {
                warnings.push(Warning {
                    kind: "work_limit".into(),
                    path: "results.skipped".into(),
                    message: format!("{} values of n skipped", r.skipped.len()),
                });
            }
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["n", "N_n", "count", "threshold", "separated"])?;
                for row in &r.rows {
                    w.serialize((row.n, row.dim, row.count, row.threshold, row.separated))?;
                }
                w.flush()?;
            }
            results(&r, warnings)
        }
        Command::Nus { s, k, radius } => results(&construct_nu_target(*s, *k, *radius)?, warnings),
        Command::Kernel { n, x, method, samples } => {
            let kernel = CovarianceKernel::new(&Eigenspace::new(*n)?);
            let base = kernel.base(*x);
            let blocks = kernel.conditioned(*x)?;
            let method = match method {
                Method::Taylor => K2Method::Taylor,
                Method::Quadrature => K2Method::Quadrature,
                Method::Mc => K2Method::GaussianMc { samples: *samples, seed },
            };
            let k2 = two_point_k2(&kernel, *x, method)?;
            let omega = blocks.omega();
            let omega: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| omega[(i, j)]).collect()).collect();
            let traces = KernelTraces::of(&blocks);
            json_like(vec![
                ("r", results(&base.r, warnings)),
                ("d", results(&base.d, warnings)),
                ("h", results(&base.h, warnings)),
                ("x", results(&blocks.x, warnings)),
                ("y", results(&blocks.y, warnings)),
                ("omega", results(&omega, warnings)),
                ("traces", results(&traces, warnings)),
                ("k2", results(&k2, warnings)),
            ])
        }
        Command::Moments { n, s, c0, threshold, csv } => {
            let suite = moment_suite(*n, *s)?;
            let cover = singular_partition(*n, *s, *c0, *threshold, seed)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["name", "numeric", "predicted_leading", "rel_dev", "singular_part"])?;
                for e in &suite.entries {
                    w.serialize((&e.name, e.numeric, e.predicted_leading, e.rel_dev, e.singular_part))?;
                }
                w.flush()?;
            }
            json!({"suite": results(&suite, warnings), "singular_partition": results(&cover, warnings)})
        }
        Command::Simulate { sim, csv } => {
            let st = monte_carlo(sim.n, sim.s, sim.trials, seed, sim.gpw as f64)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["trial", "L_full", "L_restricted"])?;
                for (i, (full, restricted)) in st.samples.iter().enumerate() {
                    w.serialize((i, full, restricted))?;
                }
                w.flush()?;
            }
            results(&st, warnings)
        }
        Command::Kacrice { n, s, h0 } => results(&kac_rice_variance(*n, *s, *h0)?, warnings),
        Command::Compare { sim } => {
            let st = monte_carlo(sim.n, sim.s, sim.trials, seed, sim.gpw as f64)?;
            let lengths: Vec<f64> = st.samples.iter().map(|&(_, r)| r).collect();
            let c = distribution_compare(&lengths, st.tau4.abs(), seed)?;
            json!({
                "n": sim.n,
                "s": sim.s,
                "tau4": results(&st.tau4, warnings),
                "mean_restricted": results(&st.mean_restricted, warnings),
                "var_restricted": results(&st.var_restricted, warnings),
                "comparison": results(&c, warnings),
            })
        }
    })
}

fn json_like(fields: Vec<(&str, Value)>) -> Value {
    Value::Object(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;

    if let Some(t) = g.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot build worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let (seed, seed_source) = match (g.seed, std::env::var(SEED_ENV)) {
        (Some(s), _) => (s, "flag"),
        (None, Ok(v)) => match v.trim().parse() {
            Ok(s) => (s, "env"),
            Err(_) => {
                eprintln!("error: {SEED_ENV}={v:?} is not an unsigned integer");
                return ExitCode::from(2);
            }
        },
        (None, Err(_)) => (0, "default"),
    };

    let (name, params, csv) = describe(&cli.command);
    let params: BTreeMap<String, Value> = match params {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    let config = RunConfig {
        command: name.to_string(),
        params,
        seed,
        seed_source: seed_source.to_string(),
        work_limit: g.work_limit,
        threads: g.threads,
        output: OutputTargets {
            json: g.out.as_ref().map(|p| p.display().to_string()),
            csv: csv.map(|p| p.display().to_string()),
            stdout: true,
        },
    };

    let start = Instant::now();
    let mut warnings = Vec::new();
    let results = match run(&cli.command, seed, g.work_limit, &mut warnings) {
        Ok(v) => v,
        Err(Failure::Module(e)) => {
            eprintln!("error: {name}: {e}");
            return ExitCode::from(exit_code(&e));
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {name}: {e}");
            return ExitCode::from(1);
        }
    };
    let report = Report {
        version: VERSION.to_string(),
        config,
        results,
        timing: start.elapsed().as_secs_f64(),
        warnings,
    };

    let doc = serde_json::to_string_pretty(&report).expect("report serialises");
    if let Some(path) = &g.out {
        if let Err(e) = std::fs::write(path, &doc) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    let text = if g.json { format!("{doc}\n") } else { render_text(&report) };
    // a closed pipe downstream is not an error of the run
    let _ = std::io::stdout().write_all(text.as_bytes());
    ExitCode::SUCCESS
}
