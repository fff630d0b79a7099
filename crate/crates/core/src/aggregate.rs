//! Fan-in of the agent reports: duplicate merging, weighted scoring, the
//! deployment decision, and the end-to-end pipeline orchestration.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{self, Agent, AgentReport, CompiledSecurityRules, Issue, Severity};
use crate::config::{DecisionMode, RunConfig};
use crate::facts::{extract_facts, SourceUnit, StructuralFacts};
use crate::{Error, Result, Score};

/// Deployment verdict, ordered from best to worst.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Warning,
    Fail,
    Error,
}

impl Verdict {
    /// CI exit code: 0 PASS, 1 WARNING, 2 FAIL, 3 ERROR.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Warning => 1,
            Verdict::Fail => 2,
            Verdict::Error => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Warning => "WARNING",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which branch of the decision procedure produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionBranch {
    /// Branch 1: a CRITICAL issue was detected.
    CriticalIssue,
    /// Branch 2: at least one security HIGH or two correctness HIGHs.
    BlockingHighs,
    /// Branch 3: one correctness HIGH or score inside the warning band.
    WarningBand,
    /// Branch 4: clean score with no HIGH issues.
    CleanPass,
    /// Branch 5: everything else defers to review.
    Fallback,
}

/// Per-agent aggregation weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightVector {
    pub correctness: Score,
    pub security: Score,
    pub performance: Score,
    pub style: Score,
}

impl Default for WeightVector {
    fn default() -> Self {
        WeightVector {
            security: 0.45,
            correctness: 0.35,
            performance: 0.15,
            style: 0.05,
        }
    }
}

impl WeightVector {
    pub fn get(&self, agent: Agent) -> Score {
        match agent {
            Agent::Correctness => self.correctness,
            Agent::Security => self.security,
            Agent::Performance => self.performance,
            Agent::Style => self.style,
        }
    }

    pub fn uniform() -> Self {
        WeightVector {
            correctness: 0.25,
            security: 0.25,
            performance: 0.25,
            style: 0.25,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.correctness, self.security, self.performance, self.style];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be nonnegative and finite"));
        }
        if all.iter().sum::<Score>() <= 0.0 {
            return Err(Error::invalid("at least one weight must be positive"));
        }
        Ok(())
    }
}

/// Inputs to the weight-selection heuristic for one agent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightHeuristicInput {
    /// Solo accuracy `p_i` in `[0, 1]`.
    pub accuracy: Score,
    /// Mean correlation with the other agents, in `[-1, 1]`.
    pub mean_redundancy: Score,
    /// Domain criticality `gamma_i > 0`.
    pub criticality: Score,
}

/// `w_i` proportional to `p_i * (1 - rho_i) * gamma_i`, normalized to sum
/// to one. Inputs follow [`Agent::ALL`] order.
pub fn heuristic_weights(inputs: &[WeightHeuristicInput; 4]) -> Result<WeightVector> {
    let mut products = [0.0; 4];
    for (i, input) in inputs.iter().enumerate() {
        if !(0.0..=1.0).contains(&input.accuracy) {
            return Err(Error::invalid("accuracy must be in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&input.mean_redundancy) {
            return Err(Error::invalid("mean redundancy must be in [-1, 1]"));
        }
        if input.criticality <= 0.0 {
            return Err(Error::invalid("criticality must be positive"));
        }
        products[i] = input.accuracy * (1.0 - input.mean_redundancy) * input.criticality;
    }
    let total: Score = products.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid(
            "all heuristic weight products are zero; weights are undefined",
        ));
    }
    Ok(WeightVector {
        correctness: products[0] / total,
        security: products[1] / total,
        performance: products[2] / total,
        style: products[3] / total,
    })
}

/// Collapse duplicate detections: issues sharing `(line, category)` merge
/// into one, keeping the maximum severity and confidence. Output is sorted
/// by severity (descending) then line (ascending).
pub fn merge_issues(reports: &[AgentReport]) -> Vec<Issue> {
    use std::collections::BTreeMap;
    let mut merged: BTreeMap<(u32, String), Issue> = BTreeMap::new();
    for report in reports {
        for issue in &report.issues {
            let key = (issue.line, issue.category.clone());
            match merged.get_mut(&key) {
                None => {
                    merged.insert(key, issue.clone());
                }
                Some(existing) => {
                    let max_confidence = existing.confidence.max(issue.confidence);
                    // Ownership follows severity; ties go to the agent with
                    // higher blocking rank so FAILs survive agent-set growth.
                    let replace = issue.severity > existing.severity
                        || (issue.severity == existing.severity
                            && issue.agent.blocking_rank() > existing.agent.blocking_rank());
                    if replace {
                        *existing = issue.clone();
                    }
                    existing.confidence = max_confidence;
                }
            }
        }
    }
    let mut out: Vec<Issue> = merged.into_values().collect();
    out.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then(a.line.cmp(&b.line))
            .then(a.category.cmp(&b.category))
    });
    out
}

/// Weighted system score over the present agents, with weights
/// renormalized to the enabled subset.
pub fn aggregate_score(reports: &[AgentReport], weights: &WeightVector) -> Result<Score> {
    let total: Score = reports.iter().map(|r| weights.get(r.agent)).sum();
    if reports.is_empty() || total <= 0.0 {
        return Err(Error::invalid(
            "aggregate score undefined: enabled agents carry zero total weight",
        ));
    }
    let dot: Score = reports
        .iter()
        .map(|r| weights.get(r.agent) * r.score)
        .sum();
    Ok((dot / total).clamp(0.0, 1.0))
}

/// The deployment decision over the aggregate score and merged issues.
pub fn decide(score: Score, merged_issues: &[Issue]) -> Verdict {
    decide_with_branch(score, merged_issues, DecisionMode::BranchOrder).0
}

/// Decision with the branch that fired, evaluated strictly in order.
pub fn decide_with_branch(
    score: Score,
    merged_issues: &[Issue],
    mode: DecisionMode,
) -> (Verdict, DecisionBranch) {
    let any_critical = merged_issues
        .iter()
        .any(|i| i.severity == Severity::Critical);
    if any_critical {
        return (Verdict::Fail, DecisionBranch::CriticalIssue);
    }

    let high_count = |agent: Agent| {
        merged_issues
            .iter()
            .filter(|i| i.agent == agent && i.severity == Severity::High)
            .count()
    };
    let security_high = high_count(Agent::Security);
    let correctness_high = high_count(Agent::Correctness);
    if security_high >= 1 || correctness_high >= 2 {
        return (Verdict::Fail, DecisionBranch::BlockingHighs);
    }

    let any_high = merged_issues.iter().any(|i| i.severity == Severity::High);
    let in_band = (0.50..=0.85).contains(&score);

    match mode {
        DecisionMode::BranchOrder => {
            if correctness_high == 1 || in_band {
                return (Verdict::Warning, DecisionBranch::WarningBand);
            }
            if score >= 0.70 && !any_high {
                return (Verdict::Pass, DecisionBranch::CleanPass);
            }
        }
        DecisionMode::Prose => {
            if correctness_high == 1 {
                return (Verdict::Warning, DecisionBranch::WarningBand);
            }
            if score >= 0.70 && !any_high {
                return (Verdict::Pass, DecisionBranch::CleanPass);
            }
            if in_band {
                return (Verdict::Warning, DecisionBranch::WarningBand);
            }
        }
    }
    (Verdict::Warning, DecisionBranch::Fallback)
}

/// Result of verifying one sample.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationResult {
    pub id: String,
    pub verdict: Verdict,
    pub score: Score,
    pub merged_issues: Vec<Issue>,
    pub per_agent: Vec<AgentReport>,
    pub total_latency_ms: f64,
    /// True when an agent blew its time budget and was dropped.
    pub degraded: bool,
    pub diagnostics: Vec<String>,
    /// Present exactly when parsing failed (verdict ERROR).
    pub error: Option<String>,
    /// Absent for ERROR verdicts, where no decision ran.
    pub decision_branch: Option<DecisionBranch>,
}

/// The configured verification engine: owns the thresholds and the
/// compiled security rules, and fans the enabled agents out per sample.
pub struct Verifier {
    cfg: RunConfig,
    rules: CompiledSecurityRules,
}

impl Verifier {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.weights.validate()?;
        if cfg.agents.is_empty() {
            return Err(Error::invalid("at least one agent must be enabled"));
        }
        let rules = CompiledSecurityRules::compile(&cfg.security)?;
        Ok(Verifier { cfg, rules })
    }

    pub fn with_defaults() -> Self {
        Self::new(RunConfig::default()).expect("default config is valid")
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    /// Verify with the configured agent set.
    pub fn verify(&self, unit: &SourceUnit) -> Result<VerificationResult> {
        let agents = self.cfg.agents.clone();
        self.verify_with(unit, &agents)
    }

    /// Verify with an explicit agent subset (ablation entry point).
    pub fn verify_with(&self, unit: &SourceUnit, agents: &[Agent]) -> Result<VerificationResult> {
        if agents.is_empty() {
            return Err(Error::invalid("agent subset must be nonempty"));
        }
        let start = Instant::now();
        let facts = match extract_facts(unit) {
            Ok(facts) => facts,
            Err(failure) => {
                return Ok(VerificationResult {
                    id: unit.id.clone(),
                    verdict: Verdict::Error,
                    score: 0.0,
                    merged_issues: Vec::new(),
                    per_agent: Vec::new(),
                    total_latency_ms: start.elapsed().as_secs_f64() * 1e3,
                    degraded: false,
                    diagnostics: Vec::new(),
                    error: Some(failure.to_string()),
                    decision_branch: None,
                });
            }
        };

        let mut reports = self.analyze_facts(&facts, agents);

        // Budget enforcement is post-hoc: agents are total functions, so a
        // slow one is dropped after the fact rather than interrupted.
        let mut degraded = false;
        let mut diagnostics = Vec::new();
        for report in &mut reports {
            if report.latency_ms > self.cfg.agent_timeout_ms {
                diagnostics.push(format!(
                    "agent {} exceeded its {:.0} ms budget ({:.1} ms); findings dropped",
                    report.agent, self.cfg.agent_timeout_ms, report.latency_ms
                ));
                *report = AgentReport::empty_degraded(report.agent, report.latency_ms);
                degraded = true;
            }
        }

        let merged_issues = merge_issues(&reports);
        let score = aggregate_score(&reports, &self.cfg.weights)?;
        let (verdict, branch) =
            decide_with_branch(score, &merged_issues, self.cfg.decision_mode);

        Ok(VerificationResult {
            id: unit.id.clone(),
            verdict,
            score,
            merged_issues,
            per_agent: reports,
            total_latency_ms: start.elapsed().as_secs_f64() * 1e3,
            degraded,
            diagnostics,
            error: None,
            decision_branch: Some(branch),
        })
    }

    /// Run the given agents over an already-extracted fact bundle,
    /// concurrently when the configuration allows it. Report order follows
    /// `agents` regardless of completion order.
    pub fn analyze_facts(&self, facts: &StructuralFacts, agents: &[Agent]) -> Vec<AgentReport> {
        if self.cfg.parallel && agents.len() > 1 {
            self.reports_parallel(facts, agents)
        } else {
            agents
                .iter()
                .map(|&a| agents::analyze(a, facts, &self.cfg, &self.rules))
                .collect()
        }
    }

    /// Recursive binary fan-out; join order fixes the report order
    /// regardless of which task finishes first.
    fn reports_parallel(&self, facts: &StructuralFacts, agents: &[Agent]) -> Vec<AgentReport> {
        match agents {
            [] => Vec::new(),
            [one] => vec![agents::analyze(*one, facts, &self.cfg, &self.rules)],
            _ => {
                let (left, right) = agents.split_at(agents.len() / 2);
                let (mut l, r) = rayon::join(
                    || self.reports_parallel(facts, left),
                    || self.reports_parallel(facts, right),
                );
                l.extend(r);
                l
            }
        }
    }
}
