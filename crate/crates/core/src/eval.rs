//! The evaluation laboratory: dataset ingestion, classification metrics
//! with bootstrap uncertainty, McNemar significance testing, agent score
//! correlation, the 15-configuration ablation study, and verdict
//! distributions over directories of patches.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{Verdict, Verifier};
use crate::agents::Agent;
use crate::config::RunConfig;
use crate::facts::SourceUnit;
use crate::stats::{chi2_tail_1df, pearson};
use crate::{Error, Result, Score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Buggy,
    Correct,
}

/// Topic of a sample; correct samples carry the category they exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Correctness,
    Security,
    Performance,
    EdgeCases,
    Resource,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    HandCurated,
    Generated,
}

/// One ground-truth dataset row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub code: String,
    pub label: Label,
    pub category: Category,
    pub difficulty: Difficulty,
    pub source: SampleSource,
}

impl LabeledSample {
    pub fn unit(&self) -> SourceUnit {
        SourceUnit::new(self.id.clone(), self.code.clone())
    }

    pub fn is_buggy(&self) -> bool {
        self.label == Label::Buggy
    }
}

/// Parse a JSON-lines dataset. Every malformed or unknown-valued record is
/// an error naming its line number; blank lines are permitted.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<LabeledSample>> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: LabeledSample = serde_json::from_str(line).map_err(|e| Error::Dataset {
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Binary classification tallies. "Positive" means flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn from_predictions(flagged: &[bool], buggy: &[bool]) -> Self {
        let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
        for (&pred, &truth) in flagged.iter().zip(buggy) {
            match (truth, pred) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fn_ += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Classification metrics; ratios with zero denominators are reported as
/// absent rather than coerced to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Score,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tpr: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fpr: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<[Score; 2]>,
    pub n: usize,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::invalid(
            "metrics undefined for an empty confusion matrix",
        ));
    }
    let ratio =
        |num: usize, den: usize| -> Option<Score> { (den > 0).then(|| num as Score / den as Score) };
    let tpr = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let f1 = match (precision, tpr) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(MetricsReport {
        accuracy: (cm.tp + cm.tn) as Score / n as Score,
        tpr,
        fpr: ratio(cm.fp, cm.fp + cm.tn),
        precision,
        f1,
        ci: None,
        n,
    })
}

/// Evaluation knobs, extracted from the run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub positive_verdicts: Vec<Verdict>,
    pub bootstrap_iterations: u32,
    pub rng_seed: u64,
    /// Acceptable false-positive rate; reporting only, never a gate.
    pub fpr_budget: Score,
}

impl EvalConfig {
    pub fn from_run(cfg: &RunConfig) -> Result<Self> {
        if cfg.positive_verdicts.is_empty() {
            return Err(Error::invalid("positive_verdicts must be nonempty"));
        }
        Ok(EvalConfig {
            positive_verdicts: cfg.positive_verdicts.clone(),
            bootstrap_iterations: cfg.bootstrap_iterations,
            rng_seed: cfg.rng_seed,
            fpr_budget: cfg.fpr_budget,
        })
    }

    pub fn is_flagged(&self, verdict: Verdict) -> bool {
        self.positive_verdicts.contains(&verdict)
    }
}

/// Percentile bootstrap confidence interval for accuracy, deterministic
/// for a fixed seed.
pub fn bootstrap_ci(flagged: &[bool], buggy: &[bool], cfg: &EvalConfig) -> Result<(Score, Score)> {
    let n = flagged.len();
    if n == 0 || n != buggy.len() {
        return Err(Error::invalid(
            "bootstrap requires nonempty, aligned prediction and label vectors",
        ));
    }
    let correct: Vec<bool> = flagged.iter().zip(buggy).map(|(p, l)| p == l).collect();
    let iterations = cfg.bootstrap_iterations.max(1) as usize;
    let mut rng = Pcg64::seed_from_u64(cfg.rng_seed);
    let mut accuracies = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut hits = 0usize;
        for _ in 0..n {
            if correct[rng.random_range(0..n)] {
                hits += 1;
            }
        }
        accuracies.push(hits as Score / n as Score);
    }
    accuracies.sort_by(|a, b| a.total_cmp(b));
    let lower_idx = (0.025 * iterations as Score) as usize;
    let upper_idx = ((0.975 * iterations as Score) as usize).min(iterations - 1);
    Ok((accuracies[lower_idx], accuracies[upper_idx]))
}

/// McNemar's test with continuity correction over two aligned prediction
/// vectors; `b` and `c` are the discordant counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarTest {
    pub chi2: Score,
    pub p_value: Score,
    pub b: usize,
    pub c: usize,
    /// True when the two systems never disagree (chi-squared undefined;
    /// p reported as 1).
    pub no_discordance: bool,
}

pub fn mcnemar(pred_a: &[bool], pred_b: &[bool], buggy: &[bool]) -> Result<McNemarTest> {
    if pred_a.len() != pred_b.len() || pred_a.len() != buggy.len() {
        return Err(Error::invalid(
            "mcnemar requires aligned, equal-length vectors",
        ));
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for ((&a, &p), &l) in pred_a.iter().zip(pred_b).zip(buggy) {
        let a_correct = a == l;
        let b_correct = p == l;
        match (a_correct, b_correct) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    if b + c == 0 {
        return Ok(McNemarTest {
            chi2: 0.0,
            p_value: 1.0,
            b,
            c,
            no_discordance: true,
        });
    }
    let diff = (b as Score - c as Score).abs() - 1.0;
    let chi2 = diff * diff / (b + c) as Score;
    Ok(McNemarTest {
        chi2,
        p_value: chi2_tail_1df(chi2),
        b,
        c,
        no_discordance: false,
    })
}

/// Pairwise Pearson correlation of per-agent score vectors, rows and
/// columns in [`Agent::ALL`] order. Entries are absent when either score
/// vector is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub agents: [Agent; 4],
    pub matrix: [[Option<Score>; 4]; 4],
}

impl CorrelationMatrix {
    pub fn mean_off_diagonal(&self) -> Option<Score> {
        let mut values = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if let Some(r) = self.matrix[i][j] {
                    values.push(r);
                }
            }
        }
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<Score>() / values.len() as Score)
        }
    }
}

/// Correlation matrix from four aligned score vectors.
pub fn correlation_from_scores(scores: &[Vec<Score>; 4]) -> CorrelationMatrix {
    let mut matrix = [[None; 4]; 4];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j {
                Some(1.0)
            } else {
                pearson(&scores[i], &scores[j])
            };
        }
    }
    CorrelationMatrix {
        agents: Agent::ALL,
        matrix,
    }
}

/// Run the full 4-agent pipeline over the dataset and correlate agent
/// scores across samples.
pub fn agent_correlation(
    samples: &[LabeledSample],
    verifier: &Verifier,
) -> Result<CorrelationMatrix> {
    if samples.len() < 3 {
        return Err(Error::invalid("agent correlation needs at least 3 samples"));
    }
    let results = run_batch(samples, verifier, &Agent::ALL)?;
    let mut scores: [Vec<Score>; 4] = Default::default();
    for result in &results {
        // ERROR verdicts carry no agent reports; skip them.
        if result.per_agent.len() != 4 {
            continue;
        }
        for (slot, report) in scores.iter_mut().zip(&result.per_agent) {
            slot.push(report.score);
        }
    }
    Ok(correlation_from_scores(&scores))
}

/// Verify every sample with the given agent subset, concurrently, results
/// in dataset order.
pub fn run_batch(
    samples: &[LabeledSample],
    verifier: &Verifier,
    agents: &[Agent],
) -> Result<Vec<crate::aggregate::VerificationResult>> {
    samples
        .par_iter()
        .map(|s| verifier.verify_with(&s.unit(), agents))
        .collect()
}

/// Metrics plus bootstrap interval for one agent subset over the dataset.
pub fn evaluate_subset(
    samples: &[LabeledSample],
    verifier: &Verifier,
    agents: &[Agent],
    cfg: &EvalConfig,
) -> Result<(MetricsReport, f64)> {
    let results = run_batch(samples, verifier, agents)?;
    let flagged: Vec<bool> = results.iter().map(|r| cfg.is_flagged(r.verdict)).collect();
    let buggy: Vec<bool> = samples.iter().map(|s| s.is_buggy()).collect();
    let cm = ConfusionMatrix::from_predictions(&flagged, &buggy);
    let mut metrics = compute_metrics(&cm)?;
    let (lo, hi) = bootstrap_ci(&flagged, &buggy, cfg)?;
    metrics.ci = Some([lo, hi]);
    let mean_latency =
        results.iter().map(|r| r.total_latency_ms).sum::<f64>() / results.len().max(1) as f64;
    Ok((metrics, mean_latency))
}

/// Full evaluation of the configured agent set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalOutcome {
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub fpr_budget: Score,
    /// Whether measured FPR stayed within the budget (absent when FPR is
    /// undefined).
    pub fpr_within_budget: Option<bool>,
    #[serde(skip)]
    pub flagged: Vec<bool>,
    #[serde(skip)]
    pub buggy: Vec<bool>,
}

pub fn evaluate_dataset(samples: &[LabeledSample], verifier: &Verifier) -> Result<EvalOutcome> {
    if samples.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let cfg = EvalConfig::from_run(verifier.config())?;
    let agents = verifier.config().agents.clone();
    let results = run_batch(samples, verifier, &agents)?;
    let flagged: Vec<bool> = results.iter().map(|r| cfg.is_flagged(r.verdict)).collect();
    let buggy: Vec<bool> = samples.iter().map(|s| s.is_buggy()).collect();
    let cm = ConfusionMatrix::from_predictions(&flagged, &buggy);
    let mut metrics = compute_metrics(&cm)?;
    metrics.ci = Some({
        let (lo, hi) = bootstrap_ci(&flagged, &buggy, &cfg)?;
        [lo, hi]
    });
    let fpr_within_budget = metrics.fpr.map(|f| f <= cfg.fpr_budget);
    Ok(EvalOutcome {
        metrics,
        confusion: cm,
        fpr_budget: cfg.fpr_budget,
        fpr_within_budget,
        flagged,
        buggy,
    })
}

/// All 15 nonempty agent subsets, singletons first, full set last.
pub fn agent_subsets() -> Vec<Vec<Agent>> {
    let mut subsets: Vec<Vec<Agent>> = (1u8..16)
        .map(|mask| {
            Agent::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &a)| a)
                .collect()
        })
        .collect();
    subsets.sort_by_key(|s: &Vec<Agent>| s.len());
    subsets
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationResult {
    pub agents: Vec<Agent>,
    pub metrics: MetricsReport,
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRun {
    /// One entry per nonempty agent subset, in subset order.
    pub configs: Vec<AblationResult>,
    /// Mean accuracy by agent count (index 0 holds the singleton average).
    pub by_agent_count: [Score; 4],
}

/// Evaluate every one of the 15 agent subsets end to end, with weights
/// renormalized to each subset.
pub fn run_ablation(samples: &[LabeledSample], verifier: &Verifier) -> Result<AblationRun> {
    if samples.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let cfg = EvalConfig::from_run(verifier.config())?;
    let mut configs = Vec::with_capacity(15);
    for agents in agent_subsets() {
        let (metrics, mean_latency_ms) = evaluate_subset(samples, verifier, &agents, &cfg)?;
        configs.push(AblationResult {
            agents,
            metrics,
            mean_latency_ms,
        });
    }
    let mut by_agent_count = [0.0; 4];
    for count in 1..=4usize {
        let group: Vec<_> = configs.iter().filter(|c| c.agents.len() == count).collect();
        by_agent_count[count - 1] =
            group.iter().map(|c| c.metrics.accuracy).sum::<Score>() / group.len() as Score;
    }
    Ok(AblationRun {
        configs,
        by_agent_count,
    })
}

/// Marginal contribution of one agent in percentage points: mean accuracy
/// of the 8 subsets containing it minus the mean of the 7 lacking it.
pub fn marginal_contribution(results: &[AblationResult], agent: Agent) -> Result<Score> {
    if results.len() != 15 {
        return Err(Error::invalid(
            "marginal contribution needs the full 15-configuration ablation",
        ));
    }
    let (with, without): (Vec<_>, Vec<_>) = results.iter().partition(|r| r.agents.contains(&agent));
    if with.len() != 8 || without.len() != 7 {
        return Err(Error::invalid("ablation results do not cover all subsets"));
    }
    let mean = |group: &[&AblationResult]| {
        group.iter().map(|r| r.metrics.accuracy).sum::<Score>() / group.len() as Score
    };
    Ok((mean(&with) - mean(&without)) * 100.0)
}

/// Marginal contributions for all four agents, keyed by agent name.
pub fn marginal_contributions(results: &[AblationResult]) -> Result<BTreeMap<String, Score>> {
    let mut out = BTreeMap::new();
    for agent in Agent::ALL {
        out.insert(
            agent.name().to_string(),
            marginal_contribution(results, agent)?,
        );
    }
    Ok(out)
}

/// Verdict tallies over a directory of source files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerdictDistribution {
    pub pass: usize,
    pub warning: usize,
    pub fail: usize,
    pub error: usize,
    /// PASS + WARNING.
    pub acceptable: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Verify every regular file in `dir` (sorted by name) and tally verdicts.
/// Unreadable files count as ERROR with a diagnostic.
pub fn verdict_distribution(dir: &Path, verifier: &Verifier) -> Result<VerdictDistribution> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();

    let mut dist = VerdictDistribution::default();
    for path in entries {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let verdict = match std::fs::read_to_string(&path) {
            Ok(code) => verifier.verify(&SourceUnit::new(name, code))?.verdict,
            Err(e) => {
                dist.diagnostics.push(format!("{name}: unreadable: {e}"));
                Verdict::Error
            }
        };
        match verdict {
            Verdict::Pass => dist.pass += 1,
            Verdict::Warning => dist.warning += 1,
            Verdict::Fail => dist.fail += 1,
            Verdict::Error => dist.error += 1,
        }
        dist.total += 1;
    }
    dist.acceptable = dist.pass + dist.warning;
    Ok(dist)
}
