//! Command-line front end: scenario runs, false-positive evaluation,
//! prefilter benchmarking, and export of the builtin corpus to files.
//!
//! Exit codes: 0 on success, 1 when any scenario's expected outcome did not
//! match, 2 on configuration or parse errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flashguard::calldata::SignatureDatabase;
use flashguard::detector::DetectorMode;
use flashguard::harness::{self, HarnessError, RunConfig, RunMode};
use flashguard::scenarios::{
    build_hedgey_scenario, build_unseen_scenarios, default_corpus_spec, table_presets,
    CorpusSpec, ScenarioError, ScenarioSpec,
};

#[derive(Parser)]
#[command(
    name = "flashguard",
    version,
    about = "Flash-loan attack detection and dusting-disruption laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios through the pipeline and write a metrics report.
    Run {
        /// Scenario JSON paths or builtin names
        /// (builtin:hedgey, builtin:presets, builtin:unseen, builtin:all).
        #[arg(long = "scenario", required = true, num_args = 1.., env = "FGUARD_SCENARIO")]
        scenario: Vec<String>,
        /// detect | disrupt | baseline
        #[arg(long, default_value = "disrupt", env = "FGUARD_MODE")]
        mode: String,
        /// scan | trace
        #[arg(long, default_value = "scan", env = "FGUARD_DETECTOR")]
        detector: String,
        #[arg(long, default_value_t = 0, env = "FGUARD_SEED")]
        seed: u64,
        /// Override every scenario's block interval (virtual ms).
        #[arg(long = "block-interval-ms", env = "FGUARD_BLOCK_INTERVAL_MS")]
        block_interval_ms: Option<u64>,
        /// Detection budget before sealing (virtual ms).
        #[arg(long = "grace-ms", default_value_t = 2_000, env = "FGUARD_GRACE_MS")]
        grace_ms: u64,
        /// Report JSON output path.
        #[arg(long, env = "FGUARD_REPORT")]
        report: Option<PathBuf>,
        /// Optional CSV flattening of per-scenario rows.
        #[arg(long, env = "FGUARD_CSV")]
        csv: Option<PathBuf>,
        /// Disable the cheap prefilter stage.
        #[arg(long = "no-prefilter", env = "FGUARD_NO_PREFILTER")]
        no_prefilter: bool,
    },
    /// Evaluate the false-positive rate on a synthetic corpus.
    Fpr {
        /// Corpus spec JSON path or builtin:mixed-<count> (e.g.
        /// builtin:mixed-100k).
        #[arg(long, env = "FGUARD_CORPUS")]
        corpus: String,
        #[arg(long, env = "FGUARD_REPORT")]
        report: Option<PathBuf>,
    },
    /// Compare classification time with and without the prefilter.
    Bench {
        #[arg(long, env = "FGUARD_CORPUS")]
        corpus: String,
    },
    /// Write the builtin scenarios, corpus specs, and signature database to
    /// files for editing and replay.
    Export {
        #[arg(long, env = "FGUARD_OUT")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            mode,
            detector,
            seed,
            block_interval_ms,
            grace_ms,
            report,
            csv,
            no_prefilter,
        } => cmd_run(
            scenario,
            &mode,
            &detector,
            seed,
            block_interval_ms,
            grace_ms,
            report,
            csv,
            no_prefilter,
        ),
        Command::Fpr { corpus, report } => cmd_fpr(&corpus, report),
        Command::Bench { corpus } => cmd_bench(&corpus),
        Command::Export { out } => cmd_export(&out),
    }
}

const EXIT_MISMATCH: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CONFIG)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario_args: Vec<String>,
    mode: &str,
    detector: &str,
    seed: u64,
    block_interval_ms: Option<u64>,
    grace_ms: u64,
    report_path: Option<PathBuf>,
    csv_path: Option<PathBuf>,
    no_prefilter: bool,
) -> ExitCode {
    let mode = match mode {
        "detect" => RunMode::DetectOnly,
        "disrupt" => RunMode::DetectAndDisrupt,
        "baseline" => RunMode::Baseline,
        other => return config_error(format!("unknown mode {other:?} (detect|disrupt|baseline)")),
    };
    let detector_mode = match detector {
        "scan" => DetectorMode::Scan,
        "trace" => DetectorMode::Trace,
        other => return config_error(format!("unknown detector {other:?} (scan|trace)")),
    };

    let mut specs: Vec<ScenarioSpec> = Vec::new();
    for arg in &scenario_args {
        match resolve_scenarios(arg) {
            Ok(mut resolved) => specs.append(&mut resolved),
            Err(err) => return config_error(err),
        }
    }

    let config = RunConfig {
        mode,
        detector_mode,
        block_interval_ms,
        sealing_grace_ms: grace_ms,
        seed,
        use_prefilter: !no_prefilter,
        ..RunConfig::default()
    };

    let report = match harness::run(&specs, &config) {
        Ok(report) => report,
        Err(HarnessError::Config(message)) => return config_error(message),
        Err(HarnessError::Scenario(err)) => return config_error(err),
    };

    for record in &report.scenarios {
        println!(
            "{:<34} detected={:<5} disrupted={:<5} status={:<30} loss={} rescued={} match={}",
            record.name,
            record.detected,
            record.disrupted,
            record.attack_status,
            record.loss,
            record.rescued,
            record.expected_match
        );
    }
    println!(
        "total: {} scenarios, {} detected, {} disrupted, rescued {} units, all_matched={}",
        report.aggregates.scenarios,
        report.aggregates.detected,
        report.aggregates.disrupted,
        report.aggregates.total_rescued,
        report.aggregates.all_matched
    );

    if let Some(path) = &report_path {
        if let Err(err) = report.write_json(path) {
            return config_error(format!("writing report {}: {err}", path.display()));
        }
    }
    if let Some(path) = &csv_path {
        if let Err(err) = report.write_csv(path) {
            return config_error(format!("writing csv {}: {err}", path.display()));
        }
    }

    if report.aggregates.all_matched {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    }
}

fn cmd_fpr(corpus: &str, report_path: Option<PathBuf>) -> ExitCode {
    let spec = match resolve_corpus(corpus) {
        Ok(spec) => spec,
        Err(err) => return config_error(err),
    };
    let report = harness::evaluate_fpr(&spec);
    println!(
        "corpus {}: {} txs, FPR {:.4}% ({} flagged benign), accuracy {:.4}%",
        report.corpus,
        report.total,
        report.fpr_percent,
        report.flagged_benign,
        report.accuracy_percent
    );
    for profile in &report.per_profile {
        println!(
            "  {:<12} {:>8} txs  FPR {:.4}%",
            profile.name, profile.total, profile.fpr_percent
        );
    }
    println!(
        "  classification latency: mean {:.4} ms, p99 {:.4} ms",
        report.mean_latency_ms, report.p99_latency_ms
    );
    if let Some(path) = &report_path {
        if let Err(err) = report.write_json(path) {
            return config_error(format!("writing report {}: {err}", path.display()));
        }
    }
    ExitCode::SUCCESS
}

fn cmd_bench(corpus: &str) -> ExitCode {
    let spec = match resolve_corpus(corpus) {
        Ok(spec) => spec,
        Err(err) => return config_error(err),
    };
    let report = harness::bench_prefilter(&spec);
    println!(
        "corpus {}: {} txs\n  unfiltered  mean {:.3} us/tx\n  prefiltered mean {:.3} us/tx ({:.2}% reduction)\n  identical flagged sets: {}",
        report.corpus,
        report.count,
        report.mean_us_unfiltered,
        report.mean_us_prefiltered,
        report.reduction_percent,
        report.identical_flagged_sets
    );
    if report.identical_flagged_sets {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    }
}

fn cmd_export(out: &Path) -> ExitCode {
    let scenario_dir = out.join("scenarios");
    if let Err(err) = std::fs::create_dir_all(&scenario_dir) {
        return config_error(format!("creating {}: {err}", scenario_dir.display()));
    }

    let mut specs = vec![build_hedgey_scenario()];
    specs.extend(table_presets());
    specs.extend(build_unseen_scenarios());
    for spec in &specs {
        let slug: String = spec
            .name
            .to_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        let path = scenario_dir.join(format!("{slug}.json"));
        if let Err(err) = spec.save(&path) {
            return config_error(err);
        }
    }

    let db_path = out.join("signatures.db");
    if let Err(err) = SignatureDatabase::builtin().save(&db_path) {
        return config_error(err);
    }
    for (name, count) in [
        ("corpus-mixed-10k.json", 10_000),
        ("corpus-mixed-100k.json", 100_000),
    ] {
        if let Err(err) = default_corpus_spec(count, 2_024).save(&out.join(name)) {
            return config_error(err);
        }
    }
    println!(
        "exported {} scenarios, signatures.db, and corpus specs to {}",
        specs.len(),
        out.display()
    );
    ExitCode::SUCCESS
}

fn resolve_scenarios(arg: &str) -> Result<Vec<ScenarioSpec>, String> {
    match arg {
        "builtin:hedgey" => Ok(vec![build_hedgey_scenario()]),
        "builtin:presets" => Ok(table_presets()),
        "builtin:unseen" => Ok(build_unseen_scenarios()),
        "builtin:all" => {
            let mut specs = vec![build_hedgey_scenario()];
            specs.extend(table_presets());
            specs.extend(build_unseen_scenarios());
            Ok(specs)
        }
        other if other.starts_with("builtin:") => {
            Err(format!("unknown builtin scenario {other:?}"))
        }
        path => ScenarioSpec::load(Path::new(path))
            .map(|spec| vec![spec])
            .map_err(|err| match err {
                ScenarioError::Parse { path, detail } => format!("scenario {path}: {detail}"),
                other => other.to_string(),
            }),
    }
}

fn resolve_corpus(arg: &str) -> Result<CorpusSpec, String> {
    if let Some(rest) = arg.strip_prefix("builtin:mixed-") {
        let count = match rest {
            "10k" => 10_000,
            "100k" => 100_000,
            other => other
                .parse::<u64>()
                .map_err(|_| format!("unknown builtin corpus {arg:?}"))?,
        };
        return Ok(default_corpus_spec(count, 2_024));
    }
    if arg.starts_with("builtin:") {
        return Err(format!("unknown builtin corpus {arg:?}"));
    }
    CorpusSpec::load(Path::new(arg))
}
