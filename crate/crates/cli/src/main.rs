use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phydrl::commands::{self, Run};
use phydrl::config::RawConfig;
use phydrl::{CliError, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "phydrl", version, about = "Envelope synthesis, residual DDPG training and safety analysis on a friction cart-pole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs/out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the LMIs for P and F.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Only verify the configured (or previously written) P and F.
        #[arg(long)]
        verify_only: bool,
    },
    /// Verify a given P and F against the LMIs.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Train the residual DDPG agent.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Compare model-based-only and trained control from matched initial states.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Estimate beta and check the safety and stability conditions.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Training speed of {safety+stability, stability-only} x {residual, none}.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Fit plant masses and pole length to the configured linear model.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
}

fn open(common: &Common) -> Result<Run, CliError> {
    let mut raw = RawConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        raw.set("seed", &seed.to_string());
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    Run::open(cfg, &common.out)
}

fn verify(run: &mut Run) -> Result<ExitCode, CliError> {
    let report = commands::cmd_verify(run)?;
    print!("{}", commands::report_text(&report, None));
    Ok(if report.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Synth { common, verify_only } => {
            let mut run = open(&common)?;
            if verify_only {
                return verify(&mut run);
            }
            let out = commands::cmd_synth(&mut run)?;
            print!("{}", commands::report_text(&out.report, Some(&out.solution.f)));
            println!("spectral_radius = {:e}", out.spectral_radius);
        }
        Command::Verify { common } => {
            let mut run = open(&common)?;
            return verify(&mut run);
        }
        Command::Train { common } => {
            let mut run = open(&common)?;
            let out = commands::cmd_train(&mut run)?;
            println!("steps = {}", out.steps);
            println!("episodes = {}", out.episodes.len());
            if let Some(last) = out.evals.last() {
                println!("final_eval_return = {}", last.eval_return);
            }
        }
        Command::Eval { common, checkpoint } => {
            let mut run = open(&common)?;
            let s = commands::cmd_eval(&mut run, checkpoint.as_deref())?;
            println!("model_based_exits = {}/{}", s.model_based_exits(), s.model_based.len());
            println!("phydrl_exits = {}/{}", s.phydrl_exits(), s.phydrl.len());
        }
        Command::Analyze { common, checkpoint } => {
            let mut run = open(&common)?;
            let s = commands::cmd_analyze(&mut run, checkpoint.as_deref())?;
            print!("{}", s.text());
        }
        Command::Compare { common } => {
            let mut run = open(&common)?;
            let results = commands::cmd_compare(&mut run)?;
            for arm in commands::Arm::ALL {
                let steps: Vec<Option<u64>> = results
                    .iter()
                    .filter(|r| r.arm == arm)
                    .map(|r| r.steps_to_threshold)
                    .collect();
                let median = commands::median_steps(&steps);
                println!(
                    "{} median_steps_to_threshold = {}",
                    arm.label(),
                    median.map_or("not reached".to_string(), |m| m.to_string())
                );
            }
        }
        Command::Calibrate { common } => {
            let mut run = open(&common)?;
            let (p, _, _) = commands::cmd_calibrate(&mut run)?;
            println!("plant.cart_mass = {:.6}", p.cart_mass);
            println!("plant.pole_mass = {:.6}", p.pole_mass);
            println!("plant.pole_half_length = {:.6}", p.pole_half_length);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
