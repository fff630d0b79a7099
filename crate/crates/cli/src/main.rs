//! Command-line front end: verification with CI exit codes, batch
//! evaluation, the ablation study, and the theory calculators.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use verimux_core::aggregate::Verdict;
use verimux_core::agents::Agent;
use verimux_core::config::{OutputFormat, RunConfig};
use verimux_core::eval::{
    self, agent_correlation, evaluate_dataset, load_dataset, marginal_contributions, mcnemar,
    run_ablation, verdict_distribution,
};
use verimux_core::facts::SourceUnit;
use verimux_core::theory::{
    self, diminishing_returns_check, GeneralizationQuery, MarginalGainSeries, PacQuery,
};
use verimux_core::{SampleReport, Verifier};

/// Environment variable consulted for a config file when `--config` is
/// not given.
const CONFIG_ENV: &str = "VERIMUX_CONFIG";

#[derive(Parser)]
#[command(
    name = "verimux",
    version,
    about = "Multi-agent static verification for Python code samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Comma-separated agents: c,s,p,st (or full names).
    #[arg(long, value_name = "LIST", global = true)]
    agents: Option<String>,

    /// Comma-separated weights in c,s,p,st order.
    #[arg(long, value_name = "W,W,W,W", global = true)]
    weights: Option<String>,

    /// Output format.
    #[arg(long, value_name = "json|text", global = true)]
    format: Option<String>,

    /// RNG seed for bootstrap resampling.
    #[arg(long, value_name = "N", global = true)]
    seed: Option<u64>,

    /// Worker threads for batch processing (defaults to core count).
    #[arg(long, value_name = "N", global = true)]
    jobs: Option<usize>,

    /// TOML config file; flags override its values.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,

    /// Verdicts counted as flagged, e.g. "FAIL,ERROR".
    #[arg(long, value_name = "LIST", global = true)]
    positive_verdicts: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify source files; exit code is the worst verdict
    /// (0 PASS, 1 WARNING, 2 FAIL, 3 ERROR).
    Verify {
        /// Files to verify.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate a labeled JSON-lines dataset: metrics with bootstrap CI.
    Eval {
        dataset: PathBuf,
        /// Baseline predictions (one flagged/clean, true/false, or 1/0
        /// per line) for a McNemar comparison.
        #[arg(long, value_name = "PATH")]
        baseline: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run all 15 agent-subset configurations over a dataset.
    Ablate {
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Tally verdicts over a directory of source files.
    Verdicts {
        dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Information-theoretic and sample-complexity calculators.
    Theory {
        #[command(subcommand)]
        calc: TheoryCommand,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Required sample size for a finite hypothesis class.
    Pac {
        hypothesis_count: u64,
        epsilon: f64,
        delta: f64,
    },
    /// Upper bound on true error from empirical error.
    Genbound {
        empirical_error: f64,
        n: u64,
        hypothesis_count: u64,
        delta: f64,
    },
    /// Mutual information between agent decisions and labels, per subset,
    /// over a labeled dataset.
    Mi {
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Check a marginal-gain sequence for diminishing returns.
    Diminishing {
        #[arg(required = true)]
        gains: Vec<f64>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { paths, common } => cmd_verify(&paths, &common),
        Command::Eval {
            dataset,
            baseline,
            common,
        } => {
            cmd_eval(&dataset, baseline.as_deref(), &common)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate { dataset, common } => {
            cmd_ablate(&dataset, &common)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verdicts { dir, common } => {
            cmd_verdicts(&dir, &common)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Theory { calc } => {
            cmd_theory(calc)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Defaults, then the config file (flag or environment), then flags.
fn resolve_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => match std::env::var_os(CONFIG_ENV) {
            Some(path) => {
                let path = PathBuf::from(path);
                RunConfig::load(&path)
                    .with_context(|| format!("loading {CONFIG_ENV} config {}", path.display()))?
            }
            None => RunConfig::default(),
        },
    };
    if let Some(list) = &common.agents {
        let mut agents = Vec::new();
        for part in list.split(',') {
            let agent = Agent::parse(part)
                .ok_or_else(|| anyhow!("unknown agent `{part}` (expected c, s, p or st)"))?;
            if !agents.contains(&agent) {
                agents.push(agent);
            }
        }
        cfg.agents = agents;
    }
    if let Some(list) = &common.weights {
        let values: Vec<f64> = list
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .context("parsing --weights")?;
        let [c, s, p, st] = values.as_slice() else {
            bail!("--weights takes exactly four values in c,s,p,st order");
        };
        cfg.weights.correctness = *c;
        cfg.weights.security = *s;
        cfg.weights.performance = *p;
        cfg.weights.style = *st;
    }
    if let Some(fmt) = &common.format {
        cfg.format = match fmt.as_str() {
            "json" => OutputFormat::Json,
            "text" => OutputFormat::Text,
            other => bail!("unknown format `{other}` (expected json or text)"),
        };
    }
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        cfg.jobs = Some(jobs);
    }
    if let Some(list) = &common.positive_verdicts {
        let mut verdicts = Vec::new();
        for part in list.split(',') {
            let verdict = match part.trim().to_ascii_uppercase().as_str() {
                "PASS" => Verdict::Pass,
                "WARNING" => Verdict::Warning,
                "FAIL" => Verdict::Fail,
                "ERROR" => Verdict::Error,
                other => bail!("unknown verdict `{other}`"),
            };
            if !verdicts.contains(&verdict) {
                verdicts.push(verdict);
            }
        }
        cfg.positive_verdicts = verdicts;
    }
    Ok(cfg)
}

/// Run `body` inside a worker pool sized by `--jobs` (or the default).
fn with_jobs<T: Send>(jobs: Option<usize>, body: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(body()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            Ok(pool.install(body))
        }
    }
}

fn cmd_verify(paths: &[PathBuf], common: &CommonOpts) -> Result<ExitCode> {
    let cfg = resolve_config(common)?;
    let format = cfg.format;
    let jobs = cfg.jobs;
    let verifier = Verifier::new(cfg).map_err(|e| anyhow!(e.to_string()))?;

    // Missing or unreadable paths are ERROR verdicts, not aborts: the gate
    // must always produce one signal per input.
    let reports: Vec<SampleReport> = with_jobs(jobs, || {
        paths
            .par_iter()
            .map(|path| report_for_path(path, &verifier))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut stdout = std::io::stdout().lock();
    for report in &reports {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer(&mut stdout, report)?;
                writeln!(stdout)?;
            }
            OutputFormat::Text => writeln!(stdout, "{}", report.to_text())?,
        }
    }
    let worst = reports
        .iter()
        .map(|r| r.verdict)
        .max()
        .unwrap_or(Verdict::Error);
    Ok(ExitCode::from(worst.exit_code() as u8))
}

fn report_for_path(path: &Path, verifier: &Verifier) -> Result<SampleReport> {
    let id = path.display().to_string();
    let result = match std::fs::read_to_string(path) {
        Ok(code) => verifier
            .verify(&SourceUnit::new(id, code))
            .map_err(|e| anyhow!(e.to_string()))?,
        Err(err) => {
            return Ok(SampleReport {
                id: id.clone(),
                verdict: Verdict::Error,
                score: 0.0,
                latency_ms: 0.0,
                issues: Vec::new(),
                agents: Vec::new(),
                error: Some(format!("unreadable: {err}")),
                degraded: false,
            })
        }
    };
    Ok(SampleReport::from(&result))
}

fn cmd_eval(dataset: &Path, baseline: Option<&Path>, common: &CommonOpts) -> Result<()> {
    let cfg = resolve_config(common)?;
    let jobs = cfg.jobs;
    let format = cfg.format;
    let verifier = Verifier::new(cfg).map_err(|e| anyhow!(e.to_string()))?;
    let samples = load_dataset(dataset).map_err(|e| anyhow!(e.to_string()))?;

    let outcome = with_jobs(jobs, || evaluate_dataset(&samples, &verifier))?
        .map_err(|e| anyhow!(e.to_string()))?;

    let mut output = json!({
        "metrics": outcome.metrics,
        "confusion": outcome.confusion,
        "fpr_budget": outcome.fpr_budget,
        "fpr_within_budget": outcome.fpr_within_budget,
    });

    if let Some(baseline_path) = baseline {
        let baseline_preds = load_predictions(baseline_path, samples.len())?;
        let test = mcnemar(&outcome.flagged, &baseline_preds, &outcome.buggy)
            .map_err(|e| anyhow!(e.to_string()))?;
        output["mcnemar"] = json!({
            "chi2": test.chi2,
            "p_value": test.p_value,
            "b": test.b,
            "c": test.c,
            "no_discordance": test.no_discordance,
            "bonferroni_threshold": 0.017,
            "significant": !test.no_discordance && test.p_value < 0.017,
        });
    }

    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&output)?),
        OutputFormat::Text => {
            let m = &outcome.metrics;
            println!("n          {}", m.n);
            println!("accuracy   {:.3}", m.accuracy);
            print_opt("tpr", m.tpr);
            print_opt("fpr", m.fpr);
            print_opt("precision", m.precision);
            print_opt("f1", m.f1);
            if let Some([lo, hi]) = m.ci {
                println!("ci95       [{lo:.3}, {hi:.3}]");
            }
            if let Some(mc) = output.get("mcnemar") {
                println!(
                    "mcnemar    chi2 {:.3} p {:.4}",
                    mc["chi2"].as_f64().unwrap_or(0.0),
                    mc["p_value"].as_f64().unwrap_or(1.0)
                );
            }
        }
    }
    Ok(())
}

fn print_opt(name: &str, value: Option<f64>) {
    match value {
        Some(v) => println!("{name:<10} {v:.3}"),
        None => println!("{name:<10} undefined"),
    }
}

/// One prediction per line: flagged/clean, true/false, or 1/0.
fn load_predictions(path: &Path, expected: usize) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading baseline {}", path.display()))?;
    let mut preds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let value = match token.to_ascii_lowercase().as_str() {
            "1" | "true" | "flagged" | "fail" | "buggy" => true,
            "0" | "false" | "clean" | "pass" | "correct" => false,
            other => bail!(
                "baseline line {}: unrecognized prediction `{other}`",
                idx + 1
            ),
        };
        preds.push(value);
    }
    if preds.len() != expected {
        bail!(
            "baseline has {} predictions but the dataset has {expected} samples",
            preds.len()
        );
    }
    Ok(preds)
}

fn cmd_ablate(dataset: &Path, common: &CommonOpts) -> Result<()> {
    let cfg = resolve_config(common)?;
    let jobs = cfg.jobs;
    let format = cfg.format;
    let verifier = Verifier::new(cfg).map_err(|e| anyhow!(e.to_string()))?;
    let samples = load_dataset(dataset).map_err(|e| anyhow!(e.to_string()))?;

    let joined = with_jobs(jobs, || -> verimux_core::Result<_> {
        let run = run_ablation(&samples, &verifier)?;
        let correlation = agent_correlation(&samples, &verifier)?;
        Ok((run, correlation))
    })?;
    let (run, correlation) = joined.map_err(|e| anyhow!(e.to_string()))?;

    let marginal = marginal_contributions(&run.configs).map_err(|e| anyhow!(e.to_string()))?;
    let mut ranked = run.configs.clone();
    ranked.sort_by(|a, b| {
        b.metrics
            .accuracy
            .total_cmp(&a.metrics.accuracy)
            .then(a.agents.len().cmp(&b.agents.len()))
    });

    let output = json!({
        "configs": ranked,
        "by_agent_count": run.by_agent_count,
        "marginal_contribution_pp": marginal,
        "correlation": correlation,
    });
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&output)?),
        OutputFormat::Text => {
            println!(
                "{:<40} {:>8} {:>8} {:>8} {:>12}",
                "agents", "acc", "tpr", "fpr", "latency_ms"
            );
            for c in &ranked {
                let names: Vec<&str> = c.agents.iter().map(|a| a.name()).collect();
                println!(
                    "{:<40} {:>8.3} {:>8} {:>8} {:>12.2}",
                    names.join("+"),
                    c.metrics.accuracy,
                    c.metrics
                        .tpr
                        .map(|v| format!("{v:.3}"))
                        .unwrap_or_else(|| "-".into()),
                    c.metrics
                        .fpr
                        .map(|v| format!("{v:.3}"))
                        .unwrap_or_else(|| "-".into()),
                    c.mean_latency_ms,
                );
            }
            println!("by agent count: {:?}", run.by_agent_count);
            println!("marginal contribution (pp): {marginal:?}");
        }
    }
    Ok(())
}

fn cmd_verdicts(dir: &Path, common: &CommonOpts) -> Result<()> {
    let cfg = resolve_config(common)?;
    let jobs = cfg.jobs;
    let format = cfg.format;
    let verifier = Verifier::new(cfg).map_err(|e| anyhow!(e.to_string()))?;
    let dist = with_jobs(jobs, || verdict_distribution(dir, &verifier))?
        .map_err(|e| anyhow!(e.to_string()))?;
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&dist)?),
        OutputFormat::Text => {
            println!("PASS       {}", dist.pass);
            println!("WARNING    {}", dist.warning);
            println!("FAIL       {}", dist.fail);
            println!("ERROR      {}", dist.error);
            println!("acceptable {} / {}", dist.acceptable, dist.total);
        }
    }
    Ok(())
}

fn cmd_theory(calc: TheoryCommand) -> Result<()> {
    match calc {
        TheoryCommand::Pac {
            hypothesis_count,
            epsilon,
            delta,
        } => {
            let n = theory::pac_sample_size(&PacQuery {
                hypothesis_count,
                epsilon,
                delta,
            })
            .map_err(|e| anyhow!(e.to_string()))?;
            println!("{}", json!({ "pac": { "n": n } }));
        }
        TheoryCommand::Genbound {
            empirical_error,
            n,
            hypothesis_count,
            delta,
        } => {
            let bound = theory::generalization_bound(&GeneralizationQuery {
                empirical_error,
                n,
                hypothesis_count,
                delta,
            })
            .map_err(|e| anyhow!(e.to_string()))?;
            println!("{}", json!({ "generalization": { "bound": bound } }));
        }
        TheoryCommand::Mi { dataset, common } => {
            let cfg = resolve_config(&common)?;
            let jobs = cfg.jobs;
            let verifier = Verifier::new(cfg).map_err(|e| anyhow!(e.to_string()))?;
            let samples = load_dataset(&dataset).map_err(|e| anyhow!(e.to_string()))?;
            let output = with_jobs(jobs, || mi_report(&samples, &verifier))??;
            println!("{}", serde_json::to_string_pretty(&output)?);
        }
        TheoryCommand::Diminishing { gains } => {
            let report = diminishing_returns_check(&MarginalGainSeries {
                agents: Vec::new(),
                gains,
            });
            println!(
                "{}",
                json!({ "diminishing": {
                    "monotone": report.monotone,
                    "violations": report.violations,
                    "gains": report.gains,
                }})
            );
        }
    }
    Ok(())
}

/// Per-subset plug-in mutual information between joint agent decisions
/// and labels, plus the conditional-correlation diagnostic.
fn mi_report(
    samples: &[eval::LabeledSample],
    verifier: &Verifier,
) -> Result<serde_json::Value> {
    let results =
        eval::run_batch(samples, verifier, &Agent::ALL).map_err(|e| anyhow!(e.to_string()))?;
    let mut decisions: Vec<Vec<bool>> = vec![Vec::new(); 4];
    let mut labels = Vec::new();
    for (sample, result) in samples.iter().zip(&results) {
        if result.per_agent.len() != 4 {
            continue; // parse failures carry no decisions
        }
        labels.push(sample.is_buggy());
        for (slot, report) in decisions.iter_mut().zip(&result.per_agent) {
            slot.push(report.decision);
        }
    }
    let mut per_subset = Vec::new();
    for subset in eval::agent_subsets() {
        let vectors: Vec<Vec<bool>> = subset
            .iter()
            .map(|a| decisions[Agent::ALL.iter().position(|x| x == a).unwrap()].clone())
            .collect();
        let bits: f64 =
            theory::mutual_information(&vectors, &labels).map_err(|e| anyhow!(e.to_string()))?;
        per_subset.push(json!({
            "agents": subset.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "bits": bits,
        }));
    }
    let names: Vec<String> = Agent::ALL.iter().map(|a| a.name().to_string()).collect();
    let conditional = theory::conditional_correlation(&names, &decisions, &labels)
        .map_err(|e| anyhow!(e.to_string()))?;
    let h_label: f64 = theory::label_entropy(&labels);
    Ok(json!({
        "mi": {
            "per_subset": per_subset,
            "label_entropy_bits": h_label,
            "conditional_correlation": conditional,
        }
    }))
}
