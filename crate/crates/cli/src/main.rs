use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causens_cli::commands::{counterfactual, gcsp, gradcheck, identify, report, sample_bn, Run};
use causens_cli::output::RunOutput;
use causens_cli::{CliResult, ExperimentConfig};
use causens_core::ndcompute::Fault;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "causens", version, about = "Causal sensitivity identification with CVAEs")]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Sigmoid,
    Tanh,
}

#[derive(Subcommand)]
enum Command {
    /// Ancestral samples from a network spec as CSV.
    SampleBn {
        /// Network spec file (bundled Asia network when omitted).
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factual vs interventional accuracy per conditioning set.
    Identify(RunArgs),
    /// Counterfactual accuracy per altered feature, with latent dumps.
    Counterfactual(RunArgs),
    /// Sensitivity sweep, then prediction conditioned on selected features.
    Gcsp(RunArgs),
    /// Finite-difference check of every op and both CVAE heads.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt a backward rule (negative control).
        #[arg(long)]
        inject_fault: Option<FaultArg>,
        /// Directory for gradcheck.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verifies a run's checksums and prints its tables.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn experiment(args: &RunArgs, name: &str, body: fn(&Run, &mut RunOutput) -> CliResult<()>) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    let mut out = RunOutput::create(&cfg.out_dir)?;
    let run = out.timed("data", |_| Run::new(cfg))?;
    body(&run, &mut out)?;
    let dir = out.dir().to_path_buf();
    let files = out.finish(name, run.config_json(), run.seeds.to_json())?;
    println!("{name}: wrote {} files to {}", files.len() + 2, dir.display());
    Ok(())
}

fn gradcheck_cmd(instances: usize, seed: u64, fault: Option<FaultArg>, out: Option<&Path>) -> CliResult<()> {
    let fault = match fault {
        None => Fault::None,
        Some(FaultArg::Sigmoid) => Fault::SigmoidDerivative,
        Some(FaultArg::Tanh) => Fault::TanhDerivative,
    };
    let report = gradcheck::run_gradcheck(instances, seed, fault)?;
    print!("{}", gradcheck::render(&report));
    if let Some(dir) = out {
        let mut o = RunOutput::create(dir)?;
        o.write_json("gradcheck.json", &report)?;
        o.finish("gradcheck", serde_json::json!({ "instances": instances, "seed": seed }), serde_json::json!({ "root": seed }))?;
    }
    gradcheck::verdict(&report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::SampleBn { network, n, seed, out } => sample_bn::cmd_sample_bn(network.as_deref(), *n, *seed, out),
        Command::Identify(a) => experiment(a, "identify", identify::cmd_identify),
        Command::Counterfactual(a) => experiment(a, "counterfactual", counterfactual::cmd_counterfactual),
        Command::Gcsp(a) => experiment(a, "gcsp", gcsp::cmd_gcsp),
        Command::Gradcheck {
            instances,
            seed,
            inject_fault,
            out,
        } => gradcheck_cmd(*instances, *seed, *inject_fault, out.as_deref()),
        Command::Report { out } => report::cmd_report(out).map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
