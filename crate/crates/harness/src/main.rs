use std::path::PathBuf;
use std::process::ExitCode;

use bandloc::config::{Experiment, ExperimentConfig};
use bandloc::verify::{verify, Fault, Suite};
use bandloc::{replay, run, HarnessError, RunOptions, RunStatus};
use bandloc_core::estimators::FChoice;
use bandloc_core::radial::{ConditionParams, RadialDensity};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bandloc", version, about = "Monte Carlo laboratory for random band GOE matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON artifacts
    Run(RunArgs),
    /// Run the exact-identity suites
    Verify(VerifyArgs),
    /// Analyse one radial density
    Radial(RadialArgs),
    /// Re-run the configuration of a manifest and compare checksums
    Replay {
        manifest: PathBuf,
        /// where the replay writes (default: `<manifest dir>/replay`)
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// flat TOML configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    #[arg(long, value_delimiter = ',')]
    w: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    e: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    support_a: Option<f64>,
    #[arg(long)]
    dichotomy_a: Option<f64>,
    #[arg(long)]
    cfrak: Option<f64>,
    #[arg(long)]
    cond_cap: Option<f64>,
    #[arg(long)]
    wegner_k: Option<f64>,
    #[arg(long, value_parser = parse_f_choice)]
    f_choice: Option<FChoice>,
    #[arg(long)]
    log_r_thin: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<f64>>,
    #[arg(long)]
    bernstein_copies: Option<usize>,
    #[arg(long)]
    bernstein_c: Option<f64>,
    #[arg(long)]
    radial_sites: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long, hide = true)]
    stop_after_chunks: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// suites to run (default: all)
    #[arg(long, value_enum, value_delimiter = ',')]
    suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// flip the recurrence exponent at this site (negative control)
    #[arg(long, hide = true)]
    inject_recurrence_fault: Option<usize>,
}

#[derive(Args)]
struct RadialArgs {
    #[arg(long)]
    w: usize,
    #[arg(long)]
    a2: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 4.0)]
    support_a: f64,
    #[arg(long, default_value_t = 1.0)]
    dichotomy_a: f64,
    #[arg(long, default_value_t = 1.0)]
    cfrak: f64,
}

fn parse_f_choice(s: &str) -> Result<FChoice, String> {
    match s {
        "e1" => Ok(FChoice::E1),
        "basis-average" => Ok(FChoice::BasisAverage),
        _ => Err(format!("expected e1 or basis-average, got {s}")),
    }
}

fn build_config(a: RunArgs) -> Result<(ExperimentConfig, RunOptions), HarnessError> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let missing = |k: &str| HarnessError::Config(format!("--{k} is required without --config"));
            let exp = a.experiment.ok_or_else(|| missing("experiment"))?;
            let trials = a.trials.ok_or_else(|| missing("trials"))?;
            ExperimentConfig::new(exp, a.w.clone().ok_or_else(|| missing("w"))?, a.n.clone().ok_or_else(|| missing("n"))?, trials)
        }
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { c.$field = v; } )* };
    }
    set!(experiment, w, n, e, trials, seed, support_a, dichotomy_a, cfrak, cond_cap, wegner_k, f_choice, log_r_thin, t_list, k_list);
    set!(bernstein_copies, bernstein_c, radial_sites, output_dir, workers, chunk_size);
    c.resume |= a.resume;
    Ok((c, RunOptions { stop_after_chunks: a.stop_after_chunks }))
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable report"));
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => {
            let (config, opts) = match build_config(args) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run(&config, opts) {
                Ok(out) => {
                    match out.status {
                        RunStatus::Complete => println!("summary: {}", out.summary_path.display()),
                        RunStatus::Stopped { chunks_written } => {
                            println!("stopped after {chunks_written} chunks; manifest: {}", out.manifest_path.display())
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify(args) => {
            let suites = if args.suite.is_empty() { Suite::ALL.to_vec() } else { args.suite };
            let fault = args.inject_recurrence_fault.map(|site| Fault::RecurrenceSign { site });
            match verify(&suites, args.seed, fault) {
                Ok(report) => {
                    print_json(&report);
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Radial(a) => {
            let params = ConditionParams { support_a: a.support_a, dichotomy_a: a.dichotomy_a, cfrak: a.cfrak, ..ConditionParams::default() };
            let density = match RadialDensity::new(a.w, a.a2, a.b, a.c) {
                Ok(d) => d,
                Err(e) => return fail(HarnessError::Config(e.to_string())),
            };
            match density.report(&params) {
                Ok(report) => {
                    print_json(&report);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(HarnessError::Worker(e)),
            }
        }
        Command::Replay { manifest, output_dir } => {
            let out = output_dir.unwrap_or_else(|| manifest.parent().unwrap_or(&PathBuf::from(".")).join("replay"));
            match replay(&manifest, &out) {
                Ok(files) => {
                    let mut ok = true;
                    for (file, same) in &files {
                        println!("{file}: {}", if *same { "identical" } else { "DIFFERS" });
                        ok &= same;
                    }
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
