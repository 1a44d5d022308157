use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use triage_cli::pipeline::{self, DecisionLine};
use triage_cli::{CliError, Result, RunConfig};
use triage_core::cascade::ThresholdStrategy;
use triage_core::explain::ShapleyMethod;

#[derive(Parser)]
#[command(name = "triage", version, about = "Two-stage triage prediction pipeline")]
struct Cli {
    /// Run configuration (JSON). Unset fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Overrides the run seed (also seeds the synthetic generator).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    RiskCap,
    Knee,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and its schema.
    Synth {
        /// Number of patients.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Split, fit Basic and Advanced, build triage labels, fit Triage.
    Train,
    /// Choose the escalation threshold and write the policy file.
    Threshold {
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Risk cap for `risk-cap`.
        #[arg(long)]
        r_max: Option<f64>,
        /// Threshold for `fixed`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Evaluate models, cascade and baselines on the test split.
    Evaluate {
        /// Point estimates only.
        #[arg(long)]
        no_bootstrap: bool,
    },
    /// Route patients from a CSV and write a decision log.
    Predict {
        /// Patient CSV in the cohort layout; the label column is optional.
        #[arg(long)]
        input: PathBuf,
        /// Decision log name inside the run directory.
        #[arg(long, default_value = "decisions.jsonl")]
        output: String,
    },
    /// Shapley explanations of escalation scores.
    Explain {
        /// Patients to explain; defaults to the test split.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Use the sampled estimator with this many permutations.
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn threshold_strategy(
    current: ThresholdStrategy,
    strategy: Option<StrategyArg>,
    r_max: Option<f64>,
    tau: Option<f64>,
) -> Result<ThresholdStrategy> {
    Ok(match strategy {
        None => match (current, r_max, tau) {
            (_, Some(_), Some(_)) => return Err(CliError::Config("--r-max and --tau are exclusive".into())),
            (_, Some(r_max), None) => ThresholdStrategy::MaxCoverageUnderRisk { r_max },
            (_, None, Some(tau)) => ThresholdStrategy::Fixed { tau },
            (s, None, None) => s,
        },
        Some(StrategyArg::RiskCap) => ThresholdStrategy::MaxCoverageUnderRisk { r_max: r_max.unwrap_or(0.08) },
        Some(StrategyArg::Knee) => ThresholdStrategy::Knee,
        Some(StrategyArg::Fixed) => ThresholdStrategy::Fixed {
            tau: tau.ok_or_else(|| CliError::Config("--strategy fixed needs --tau".into()))?,
        },
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let dir = cli.out.as_path();
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match cli.command {
        Command::Synth { n } => {
            if let Some(n) = n {
                cfg.synth.n_total = n;
            }
            let cohort = pipeline::cmd_synth(&cfg, dir)?;
            let adv = cohort.advanced_available_indices().len();
            say(format!("wrote {} patients ({adv} with advanced features) to {}", cohort.len(), dir.display()));
        }
        Command::Train => {
            let out = pipeline::cmd_train(&cfg, dir)?;
            let r = &out.report;
            say(format!(
                "basic {} | advanced {} | triage {} | z rate {:.3} | triage CV AUROC {:.3}",
                out.basic.spec, out.advanced.spec, out.triage.spec, r.z_rate, r.triage_cv_auroc
            ));
        }
        Command::Threshold { strategy, r_max, tau } => {
            cfg.threshold = threshold_strategy(cfg.threshold, strategy, r_max, tau)?;
            let p = pipeline::cmd_threshold(&cfg, dir)?;
            if let Some(w) = &p.selection.warning {
                eprintln!("warning: {w}");
            }
            match p.selection.point {
                Some(pt) => say(format!("tau {} (coverage {:.3}, risk {:.3})", p.tau, pt.coverage, pt.risk)),
                None => say(format!("tau {}", p.tau)),
            }
        }
        Command::Evaluate { no_bootstrap } => {
            let r = pipeline::cmd_evaluate(&cfg, dir, !no_bootstrap)?;
            say(format!("escalated {} of {} (rate {:.2})", r.n_escalated, r.n_test, r.escalation_rate));
            for p in &r.policies {
                say(format!("{:<15} AUROC {:.3}", p.name, p.metrics.auroc));
            }
        }
        Command::Predict { input, output } => {
            let out = pipeline::cmd_predict(&cfg, dir, &input, &output)?;
            let required = out
                .lines
                .iter()
                .filter(|l| matches!(l, DecisionLine::Decision(d) if d.route == triage_core::Route::AdvancedRequired))
                .count();
            say(format!(
                "{} rows, {required} need the advanced test, {} errors",
                out.lines.len(),
                out.n_errors
            ));
            if out.n_errors > 0 {
                return Err(CliError::Data(format!(
                    "{} of {} rows could not be routed; see {}",
                    out.n_errors,
                    out.lines.len(),
                    dir.join(&output).display()
                )));
            }
        }
        Command::Explain { input, limit, samples } => {
            if let Some(n_samples) = samples {
                cfg.explain.method = ShapleyMethod::Sampled { n_samples, seed: 0 };
            }
            let records = pipeline::cmd_explain(&cfg, dir, input.as_deref(), limit)?;
            for r in &records {
                let top: Vec<String> = r
                    .top(cfg.explain.top_k)
                    .iter()
                    .map(|e| format!("{} {:+.3}", e.feature, e.phi))
                    .collect();
                say(format!("{} g={:.3} escalate={} | {}", r.id, r.score, r.escalate, top.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
