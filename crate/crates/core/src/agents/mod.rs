//! The four specialized analyzers.
//!
//! Each agent is a pure function of the immutable fact bundle: same facts,
//! same report (latency aside). That is what makes the concurrent fan-out
//! in the aggregator safe and the ablation study meaningful.

pub mod correctness;
pub mod performance;
pub mod security;
pub mod style;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Penalties, RunConfig};
use crate::facts::StructuralFacts;
use crate::Score;

pub use security::{escalate_context, CompiledSecurityRules};

/// Finding severity with total order `LOW < MEDIUM < HIGH < CRITICAL`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    /// One step up the ladder; CRITICAL is a fixed point.
    pub fn escalated(self) -> Severity {
        match self {
            Severity::Low => Severity::Medium,
            Severity::Medium => Severity::High,
            Severity::High => Severity::Critical,
            Severity::Critical => Severity::Critical,
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Severity::Low => "LOW",
            Severity::Medium => "MEDIUM",
            Severity::High => "HIGH",
            Severity::Critical => "CRITICAL",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Correctness,
    Security,
    Performance,
    Style,
}

impl Agent {
    pub const ALL: [Agent; 4] = [
        Agent::Correctness,
        Agent::Security,
        Agent::Performance,
        Agent::Style,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Agent::Correctness => "correctness",
            Agent::Security => "security",
            Agent::Performance => "performance",
            Agent::Style => "style",
        }
    }

    /// Parse either the full name or the `c`/`s`/`p`/`st` abbreviation.
    pub fn parse(s: &str) -> Option<Agent> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "correctness" => Some(Agent::Correctness),
            "s" | "security" => Some(Agent::Security),
            "p" | "performance" => Some(Agent::Performance),
            "st" | "style" => Some(Agent::Style),
            _ => None,
        }
    }

    /// Attribution priority when merged duplicates tie on severity.
    /// Security and correctness findings drive the blocking rules, so they
    /// must keep ownership of a merged issue; otherwise an agent-set
    /// extension could demote a FAIL.
    pub(crate) fn blocking_rank(self) -> u8 {
        match self {
            Agent::Security => 3,
            Agent::Correctness => 2,
            Agent::Performance => 1,
            Agent::Style => 0,
        }
    }
}

impl std::fmt::Display for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One detected finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub agent: Agent,
    pub severity: Severity,
    pub category: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cwe: Option<String>,
    pub message: String,
    pub line: u32,
    pub confidence: Score,
}

impl Issue {
    pub fn new(
        agent: Agent,
        severity: Severity,
        category: &str,
        line: u32,
        confidence: Score,
        message: impl Into<String>,
    ) -> Self {
        Issue {
            agent,
            severity,
            category: category.to_string(),
            cwe: None,
            message: message.into(),
            // Issue lines are 1-based even for module-level findings.
            line: line.max(1),
            confidence,
        }
    }

    pub fn with_cwe(mut self, cwe: &str) -> Self {
        self.cwe = Some(cwe.to_string());
        self
    }
}

/// One agent's verdict on a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentReport {
    pub agent: Agent,
    pub score: Score,
    /// The agent's binary decision `D_i`: flagged iff any issue is HIGH or
    /// worse, or the score dropped below 0.5.
    pub decision: bool,
    pub issues: Vec<Issue>,
    pub latency_ms: f64,
}

impl AgentReport {
    pub fn from_issues(
        agent: Agent,
        issues: Vec<Issue>,
        penalties: &Penalties,
        latency_ms: f64,
    ) -> Self {
        let score = score_from_issues(&issues, penalties);
        AgentReport {
            agent,
            score,
            decision: decision_from(score, &issues),
            issues,
            latency_ms,
        }
    }

    /// Placeholder report for an agent that blew its time budget.
    pub fn empty_degraded(agent: Agent, latency_ms: f64) -> Self {
        AgentReport {
            agent,
            score: 1.0,
            decision: false,
            issues: Vec::new(),
            latency_ms,
        }
    }
}

/// `S_i = max(0, 1 - sum(penalty))`, monotone in the issue set.
pub fn score_from_issues(issues: &[Issue], penalties: &Penalties) -> Score {
    let total: Score = issues.iter().map(|i| penalties.penalty(i.severity)).sum();
    (1.0 - total).max(0.0)
}

pub fn decision_from(score: Score, issues: &[Issue]) -> bool {
    issues.iter().any(|i| i.severity >= Severity::High) || score < 0.5
}

/// Run one agent over the facts, timing it.
pub fn analyze(
    agent: Agent,
    facts: &StructuralFacts,
    cfg: &RunConfig,
    rules: &CompiledSecurityRules,
) -> AgentReport {
    let start = Instant::now();
    let issues = match agent {
        Agent::Correctness => correctness::issues(facts, cfg),
        Agent::Security => security::issues(facts, cfg, rules),
        Agent::Performance => performance::issues(facts, cfg),
        Agent::Style => style::issues(facts, cfg),
    };
    let latency_ms = start.elapsed().as_secs_f64() * 1e3;
    AgentReport::from_issues(agent, issues, &cfg.penalties, latency_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_order_is_total() {
        assert!(Severity::Low < Severity::Medium);
        assert!(Severity::Medium < Severity::High);
        assert!(Severity::High < Severity::Critical);
        assert_eq!(Severity::Critical.escalated(), Severity::Critical);
    }

    #[test]
    fn score_is_monotone_in_issues() {
        let p = Penalties::default();
        let mut issues = Vec::new();
        let mut last = score_from_issues(&issues, &p);
        for sev in [Severity::Low, Severity::Medium, Severity::High, Severity::Critical] {
            issues.push(Issue::new(Agent::Correctness, sev, "x", 1, 0.5, "m"));
            let s = score_from_issues(&issues, &p);
            assert!(s <= last);
            last = s;
        }
        assert!(last >= 0.0);
    }

    #[test]
    fn decision_rule() {
        let p = Penalties::default();
        let high = vec![Issue::new(Agent::Security, Severity::High, "x", 1, 0.9, "m")];
        assert!(decision_from(score_from_issues(&high, &p), &high));
        let low = vec![Issue::new(Agent::Style, Severity::Low, "x", 1, 0.9, "m")];
        assert!(!decision_from(score_from_issues(&low, &p), &low));
        // six MEDIUMs push the score below 0.5
        let many: Vec<_> = (0..6)
            .map(|i| Issue::new(Agent::Correctness, Severity::Medium, "x", i + 1, 0.9, "m"))
            .collect();
        assert!(decision_from(score_from_issues(&many, &p), &many));
    }

    #[test]
    fn agent_abbreviations_parse() {
        assert_eq!(Agent::parse("c"), Some(Agent::Correctness));
        assert_eq!(Agent::parse("st"), Some(Agent::Style));
        assert_eq!(Agent::parse("STYLE"), Some(Agent::Style));
        assert_eq!(Agent::parse("x"), None);
    }
}
