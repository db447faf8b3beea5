//! `rdscr`: command-line front end for RDS capture-recapture estimation.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no finite estimate.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rds_recapture::estimators::{
    self, BootstrapConfig, EstimateResult, FalseMatchModel, ReplicateReports, Variant,
};
use rds_recapture::experiments::{
    self, ExperimentConfig, Params, Scale, SweepParam, SweepSinks, TrialOptions,
};
use rds_recapture::graph::{self, Graph};
use rds_recapture::hashing::{telefunken_encode, TelefunkenCode};
use rds_recapture::seed::{self, Stage};
use rds_recapture::survey::{self, HashedSample, SurveyHeader};

#[derive(Parser)]
#[command(
    name = "rdscr",
    version,
    about = "Hidden population size from RDS capture-recapture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Ba,
    Er,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random population graph as an edge list.
    Generate {
        #[arg(long, value_enum, default_value = "ba")]
        family: Family,
        #[arg(long)]
        n: usize,
        /// Edges per new vertex (Barabási–Albert).
        #[arg(long, default_value_t = 3)]
        attach: usize,
        /// Mean degree (Erdős–Rényi).
        #[arg(long, default_value_t = 6.0)]
        mean_degree: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate one capture, recapture and hash on a graph and estimate its size.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 500)]
        n0: usize,
        #[arg(long, default_value_t = 6)]
        seeds: usize,
        #[arg(long, default_value_t = 3)]
        coupons: usize,
        #[arg(long, default_value_t = 25)]
        reports: usize,
        #[arg(long, default_value_t = 3125)]
        m: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        kappa: usize,
        #[arg(long)]
        no_bootstrap: bool,
        /// `closed-form`, `monte-carlo` or `monte-carlo:N`.
        #[arg(long, default_value = "monte-carlo:50")]
        false_matches: FalseMatchModel,
        /// Write results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the hashed sample as a survey file.
        #[arg(long)]
        export_survey: Option<PathBuf>,
    },
    /// Run a parameter sweep from a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Summary CSV (one row per cell).
        #[arg(short, long, required_unless_present = "dry_run")]
        output: Option<PathBuf>,
        /// Per-trial CSV.
        #[arg(long)]
        long: Option<PathBuf>,
        /// Validate the config and print the plan without running trials.
        #[arg(long)]
        dry_run: bool,
    },
    /// Print a sweep config over the default grid of one parameter.
    Preset {
        /// Swept parameter: n0, s, c, p or m.
        #[arg(long, value_parser = parse_sweep_param)]
        sweep: SweepParam,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Estimate population size from a hashed survey file.
    Estimate {
        #[arg(long)]
        survey: PathBuf,
        /// Hash space size; defaults to the survey header.
        #[arg(long, conflicts_with = "telefunken_digits")]
        m: Option<u32>,
        /// Codes are phone-digit codes over `d` digits, so `m = 4^d`.
        #[arg(long)]
        telefunken_digits: Option<usize>,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        kappa: usize,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        coupons: Option<usize>,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "monte-carlo:50")]
        false_matches: FalseMatchModel,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the phone-digit code of each number.
    EncodePhone {
        #[arg(long, default_value_t = 7)]
        digits: usize,
        numbers: Vec<String>,
    },
}

enum Failure {
    Invalid(String),
    NoEstimate(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate {
            family,
            n,
            attach,
            mean_degree,
            seed,
            output,
        } => generate(family, n, attach, mean_degree, seed, output),
        Command::Simulate {
            graph,
            n0,
            seeds,
            coupons,
            reports,
            m,
            seed,
            alpha,
            kappa,
            no_bootstrap,
            false_matches,
            json,
            export_survey,
        } => {
            let params = Params {
                n0,
                s: seeds,
                c: coupons,
                p: reports,
                m,
            };
            let mut options = TrialOptions {
                alpha,
                kappa,
                false_matches,
                ..TrialOptions::default()
            };
            if no_bootstrap {
                options.estimators.retain(|v| *v != Variant::N3Bootstrap);
            }
            simulate(graph, params, options, seed, json, export_survey)
        }
        Command::Sweep {
            config,
            output,
            long,
            dry_run,
        } => sweep(config, output, long, dry_run),
        Command::Preset {
            sweep,
            scale,
            master_seed,
        } => preset(sweep, scale, master_seed),
        Command::Estimate {
            survey,
            m,
            telefunken_digits,
            alpha,
            kappa,
            seeds,
            coupons,
            n0,
            seed,
            false_matches,
            json,
        } => estimate(EstimateArgs {
            survey,
            m,
            telefunken_digits,
            alpha,
            kappa,
            seeds,
            coupons,
            n0,
            seed,
            false_matches,
            json,
        }),
        Command::EncodePhone { digits, numbers } => encode_phone(digits, &numbers),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NoEstimate(msg)) => {
            eprintln!("no estimate: {msg}");
            ExitCode::from(3)
        }
    }
}

fn generate(
    family: Family,
    n: usize,
    attach: usize,
    mean_degree: f64,
    seed: u64,
    output: PathBuf,
) -> Outcome {
    let g = match family {
        Family::Ba => graph::generate_ba(n, attach, seed)?,
        Family::Er => graph::generate_er(n, mean_degree, seed)?,
    };
    g.save_edge_list(&output)?;
    println!("vertices:    {}", g.vertex_count());
    println!("edges:       {}", g.edge_count());
    println!("mean degree: {:.4}", g.mean_degree());
    println!("max degree:  {}", g.max_degree());
    Ok(())
}

fn label(variant: Variant) -> &'static str {
    match variant {
        Variant::N1 => "RDS full-knowledge (n1)",
        Variant::N3 => "RDS + ANON/hashing (n3)",
        Variant::N3Bootstrap => "RDS + ANON/hashing (n3-bootstrap)",
        _ => variant.name(),
    }
}

fn print_result(r: &EstimateResult) {
    let value = r
        .estimate
        .map(|x| format!("{x:.2}"))
        .unwrap_or_else(|| "none".into());
    let flags = r.flags.names();
    if flags.is_empty() {
        println!("{:<36} {value}", label(r.variant));
    } else {
        println!("{:<36} {value}  [{}]", label(r.variant), flags.join(", "));
    }
}

/// The last requested estimate is the headline; it must be finite.
fn check_headline(results: &[EstimateResult]) -> Outcome {
    match results.last() {
        Some(r) if !r.is_finite() => Err(Failure::NoEstimate(format!(
            "{} has no finite value ({})",
            r.variant,
            r.flags.names().join(", ")
        ))),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Outcome {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GraphSummary {
    vertices: usize,
    edges: usize,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    graph: GraphSummary,
    params: Params,
    seed: u64,
    options: &'a TrialOptions,
    capture_size: usize,
    exhausted: bool,
    results: &'a [EstimateResult],
}

fn simulate(
    graph_path: PathBuf,
    params: Params,
    options: TrialOptions,
    seed: u64,
    json: Option<PathBuf>,
    export_survey: Option<PathBuf>,
) -> Outcome {
    let g = Graph::load_edge_list(&graph_path)?;
    let record = experiments::simulate_trial(&g, &params, &options, seed)?;
    println!(
        "graph: {} vertices, {} edges; captured {} subjects",
        g.vertex_count(),
        g.edge_count(),
        record.forest.len()
    );
    for r in &record.results {
        print_result(r);
    }
    if let Some(path) = export_survey {
        let header = SurveyHeader {
            m: Some(params.m),
            p: Some(params.p),
            s: Some(params.s),
            c: Some(params.c),
            n0: Some(params.n0),
            telefunken_digits: None,
        };
        let mut out = BufWriter::new(File::create(path)?);
        survey::write_survey(&mut out, &header, &record.sample.to_records())?;
        out.flush()?;
    }
    if let Some(path) = json {
        write_json(
            &path,
            &SimulateReport {
                graph: GraphSummary {
                    vertices: g.vertex_count(),
                    edges: g.edge_count(),
                },
                params,
                seed,
                options: &options,
                capture_size: record.forest.len(),
                exhausted: record.forest.exhausted(),
                results: &record.results,
            },
        )?;
    }
    check_headline(&record.results)
}

fn sweep(
    config_path: PathBuf,
    output: Option<PathBuf>,
    long: Option<PathBuf>,
    dry_run: bool,
) -> Outcome {
    let text = std::fs::read_to_string(&config_path)?;
    let config = ExperimentConfig::from_toml(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", config_path.display())))?;
    if dry_run {
        if let Some(warning) = config.runtime_warning() {
            log::warn!("{warning}");
        }
        println!(
            "{} sizes x {} graphs x {} trials x {} values of {} = {} trials",
            config.population_sizes.len(),
            config.graphs_per_size,
            config.trials_per_graph,
            config.sweep.values.len(),
            config.sweep.param.name(),
            config.total_trials()
        );
        return Ok(());
    }
    let output = output.expect("clap requires --output without --dry-run");
    let mut summary = BufWriter::new(File::create(&output)?);
    let mut trials = long.map(File::create).transpose()?.map(BufWriter::new);
    let result = experiments::run_sweep(
        &config,
        SweepSinks {
            summary: Some(&mut summary),
            trials: trials.as_mut().map(|w| w as &mut dyn Write),
        },
    )?;
    let failed = result.cells.iter().filter(|c| c.stats.failed()).count();
    println!(
        "{} cells written to {} ({} failed)",
        result.cells.len(),
        output.display(),
        failed
    );
    Ok(())
}

fn parse_sweep_param(name: &str) -> Result<SweepParam, String> {
    SweepParam::from_name(name).ok_or_else(|| format!("expected n0, s, c, p or m, got {name:?}"))
}

fn preset(param: SweepParam, scale: ScaleArg, master_seed: Option<u64>) -> Outcome {
    let scale = match scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    };
    let mut config = ExperimentConfig::preset(param, scale);
    if let Some(s) = master_seed {
        config.master_seed = s;
    }
    print!("{}", config.to_toml());
    Ok(())
}

struct EstimateArgs {
    survey: PathBuf,
    m: Option<u32>,
    telefunken_digits: Option<usize>,
    alpha: f64,
    kappa: usize,
    seeds: Option<usize>,
    coupons: Option<usize>,
    n0: Option<usize>,
    seed: u64,
    false_matches: FalseMatchModel,
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    subjects: usize,
    m: u32,
    seed: u64,
    bootstrap: BootstrapConfig,
    results: &'a [EstimateResult],
}

fn estimate(args: EstimateArgs) -> Outcome {
    let (header, records) = survey::read_survey(BufReader::new(File::open(&args.survey)?))?;
    let digits = args.telefunken_digits.or(header.telefunken_digits);
    let m = match (args.m, digits) {
        (Some(m), _) => m,
        (None, Some(d)) => {
            if d == 0 || d > 15 {
                return Err(Failure::Invalid(format!(
                    "telefunken digits must lie in 1..=15, got {d}"
                )));
            }
            u32::try_from(TelefunkenCode::space_size(d))?
        }
        (None, None) => header.m.ok_or_else(|| {
            Failure::Invalid("hash space unknown: pass --m or --telefunken-digits".into())
        })?,
    };
    let sample = HashedSample::from_records(&records, m, header.p)?;
    let seeds = args
        .seeds
        .or(header.s)
        .unwrap_or_else(|| sample.forest().seeds().len());
    let coupons = args.coupons.or(header.c).unwrap_or(3);
    let n0 = args.n0.or(header.n0).unwrap_or(sample.forest().len());
    let config = BootstrapConfig {
        alpha: args.alpha,
        kappa: args.kappa,
        seeds,
        coupons,
        target: n0,
        false_matches: args.false_matches,
    };
    let results = vec![
        estimators::estimate_n3_hashed(
            &sample,
            args.false_matches,
            seed::stage(args.seed, Stage::FalseMatches),
        ),
        estimators::bootstrap_hashed(
            &sample,
            &config,
            ReplicateReports::Restrict,
            seed::stage(args.seed, Stage::Bootstrap),
        )?,
    ];
    println!("survey: {} subjects, m = {m}", sample.forest().len());
    for r in &results {
        print_result(r);
    }
    if let Some(path) = &args.json {
        write_json(
            path,
            &EstimateReport {
                subjects: sample.forest().len(),
                m,
                seed: args.seed,
                bootstrap: config,
                results: &results,
            },
        )?;
    }
    check_headline(&results)
}

fn encode_phone(digits: usize, numbers: &[String]) -> Outcome {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for number in numbers {
        let code = telefunken_encode(number, digits)?;
        writeln!(out, "{number},{}", code.hash_code())?;
    }
    Ok(())
}
