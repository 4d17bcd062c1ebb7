//! `bdmec` — runs offloading experiments, verifies exported ledgers and
//! sweeps the privacy budget.
//!
//! On failure the process exits nonzero and prints one line to stderr:
//! `error kind=<kind> message=<json-quoted message>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdmec_core::harness::manifest::parse_scenario;
use bdmec_core::harness::{
    preset_manifest, run_manifest, ExperimentKind, Manifest, OutputOptions, Overrides, RunReport,
};
use bdmec_core::{Channel, ConfigError, Error, LedgerStore, Mode};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdmec", version, about = "Work-stealing offloading experiments with an accountability ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset or a manifest file.
    Run {
        /// speed-gain | malicious | small-jobs | privacy-tradeoff
        #[arg(long)]
        preset: Option<String>,
        /// A manifest, or a bare scenario that replaces the preset's scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-iteration event logs.
        #[arg(long)]
        events: bool,
    },
    /// Check both hash chains of an exported ledger.
    Verify {
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Sweep the privacy budget over noised job counts.
    Privacy {
        /// Comma-separated, e.g. 0.01,0.1,0.5,1,2
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5,1,2")]
        epsilon_list: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// True counts as `id=count` pairs; defaults to the preset's.
        #[arg(long, value_delimiter = ',', value_parser = parse_count)]
        counts: Vec<(String, u64)>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_count(s: &str) -> Result<(String, u64), String> {
    let (id, n) = s.split_once('=').ok_or("expected id=count")?;
    let n = n.trim().parse::<u64>().map_err(|e| e.to_string())?;
    Ok((id.trim().to_string(), n))
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Sim(_) => "simulation",
        Error::Privacy(_) => "privacy",
        Error::Selection(_) => "selection",
        Error::Ledger(_) => "ledger",
        Error::InsufficientData(_) => "insufficient-data",
        Error::UnknownPreset(_) => "unknown-preset",
        Error::Io(_) => "io",
        Error::Csv(_) => "io",
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("error kind={kind} message={message:?}");
    ExitCode::FAILURE
}

fn resolve_manifest(preset: Option<&str>, config: Option<&Path>) -> Result<Manifest, Error> {
    let Some(path) = config else {
        let name = preset.ok_or_else(|| ConfigError::Invalid {
            field: "--preset".into(),
            reason: "either --preset or --config is required".into(),
        })?;
        return preset_manifest(name);
    };
    let text = std::fs::read_to_string(path)?;
    match Manifest::from_toml(&text) {
        Ok(m) => Ok(m.validate()?),
        Err(manifest_err) => {
            // A bare scenario borrows the experiment settings of the preset.
            let Some(name) = preset else {
                return Err(manifest_err.into());
            };
            let mut m = preset_manifest(name)?;
            if m.experiment.kind != ExperimentKind::Simulation {
                return Err(manifest_err.into());
            }
            m.scenario = Some(parse_scenario(&text)?);
            Ok(m.validate()?)
        }
    }
}

fn report(run: &RunReport) {
    match run {
        RunReport::Simulation { result, .. } => {
            for mode in [Mode::Baseline, Mode::Bdmec] {
                if let Some(mean) = result.mean(mode) {
                    println!("{} {mode} mean_speed_gain={mean:.4}", result.scenario);
                }
            }
            if let Some(u) = result.uplift_percent {
                println!("{} uplift_percent={u:.3}", result.scenario);
            }
        }
        RunReport::Privacy { rows, .. } => {
            for r in rows {
                println!(
                    "epsilon={} worker={} mean_R_percent={:.4} P_percent={:.2}",
                    r.epsilon, r.worker_id, r.mean_r_percent, r.p_percent
                );
            }
        }
    }
    for f in run.files() {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            preset,
            config,
            seed,
            repetitions,
            iterations,
            out,
            events,
        } => {
            let manifest = resolve_manifest(preset.as_deref(), config.as_deref())?;
            let overrides = Overrides {
                seed,
                repetitions,
                iterations,
                ..Overrides::default()
            };
            let manifest = overrides.apply(manifest)?;
            let run = run_manifest(&manifest, &out, OutputOptions { event_logs: events })?;
            report(&run);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { ledger } => {
            let file = std::fs::File::open(&ledger)?;
            let store = LedgerStore::import(std::io::BufReader::new(file))?;
            let violations = store.verify_all();
            for channel in Channel::ALL {
                println!("{} height={}", channel.as_str(), store.height(channel));
            }
            if violations.is_empty() {
                println!("ok");
                return Ok(ExitCode::SUCCESS);
            }
            for (channel, v) in &violations {
                println!("violation channel={} height={} reason={}", channel.as_str(), v.height, v.reason);
            }
            Ok(fail("tampered", &format!("{} violation(s)", violations.len())))
        }
        Command::Privacy {
            epsilon_list,
            trials,
            seed,
            counts,
            out,
        } => {
            let mut manifest = preset_manifest("privacy-tradeoff")?;
            if !counts.is_empty() {
                manifest.privacy_sweep.as_mut().expect("privacy preset").counts =
                    counts.into_iter().collect::<BTreeMap<_, _>>();
            }
            let overrides = Overrides {
                seed,
                trials: Some(trials),
                epsilons: Some(epsilon_list),
                ..Overrides::default()
            };
            let manifest = overrides.apply(manifest)?;
            let run = run_manifest(&manifest, &out, OutputOptions::default())?;
            report(&run);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("usage error");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(error_kind(&e), &e.to_string()),
    }
}
