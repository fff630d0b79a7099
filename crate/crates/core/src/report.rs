//! The per-sample JSON report consumed by the CLI and the evaluation
//! tooling. Field names here are a stable interface.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Severity};
use crate::aggregate::{Verdict, VerificationResult};
use crate::Score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    pub verdict: Verdict,
    pub score: Score,
    pub latency_ms: f64,
    pub issues: Vec<IssueReport>,
    pub agents: Vec<AgentSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub agent: Agent,
    pub severity: Severity,
    pub category: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cwe: Option<String>,
    pub line: u32,
    pub message: String,
    pub confidence: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: Agent,
    pub score: Score,
    pub decision: bool,
    pub latency_ms: f64,
}

impl From<&VerificationResult> for SampleReport {
    fn from(result: &VerificationResult) -> Self {
        SampleReport {
            id: result.id.clone(),
            verdict: result.verdict,
            score: result.score,
            latency_ms: result.total_latency_ms,
            issues: result
                .merged_issues
                .iter()
                .map(|i| IssueReport {
                    agent: i.agent,
                    severity: i.severity,
                    category: i.category.clone(),
                    cwe: i.cwe.clone(),
                    line: i.line,
                    message: i.message.clone(),
                    confidence: i.confidence,
                })
                .collect(),
            agents: result
                .per_agent
                .iter()
                .map(|r| AgentSummary {
                    name: r.agent,
                    score: r.score,
                    decision: r.decision,
                    latency_ms: r.latency_ms,
                })
                .collect(),
            error: result.error.clone(),
            degraded: result.degraded,
        }
    }
}

impl SampleReport {
    /// Human-readable rendering for `--format text`.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = write!(
            out,
            "{}: {} (score {:.3}, {} issue{}, {:.1} ms)",
            self.id,
            self.verdict,
            self.score,
            self.issues.len(),
            if self.issues.len() == 1 { "" } else { "s" },
            self.latency_ms
        );
        if let Some(err) = &self.error {
            let _ = write!(out, "\n  error: {err}");
        }
        for issue in &self.issues {
            let cwe = issue
                .cwe
                .as_deref()
                .map(|c| format!(" [{c}]"))
                .unwrap_or_default();
            let _ = write!(
                out,
                "\n  {}:{} {}{} ({}) {}",
                issue.severity, issue.line, issue.category, cwe, issue.agent, issue.message
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::SourceUnit;
    use crate::Verifier;

    #[test]
    fn json_round_trips() {
        let v = Verifier::with_defaults();
        let result = v
            .verify(&SourceUnit::new("r1", "def run(s):\n    return eval(s)\n"))
            .unwrap();
        let report = SampleReport::from(&result);
        let json = serde_json::to_string(&report).unwrap();
        let back: SampleReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
        // Interface field names are pinned.
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["id", "verdict", "score", "latency_ms", "issues", "agents"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let issue = &value["issues"][0];
        for key in ["agent", "severity", "category", "cwe", "line", "message", "confidence"] {
            assert!(issue.get(key).is_some(), "issue missing {key}");
        }
        let agent = &value["agents"][0];
        for key in ["name", "score", "decision", "latency_ms"] {
            assert!(agent.get(key).is_some(), "agent missing {key}");
        }
        assert_eq!(value["verdict"], "FAIL");
    }

    #[test]
    fn error_report_carries_diagnostic() {
        let v = Verifier::with_defaults();
        let result = v.verify(&SourceUnit::new("bad", "def f(:\n")).unwrap();
        let report = SampleReport::from(&result);
        assert_eq!(report.verdict, crate::Verdict::Error);
        assert!(report.error.is_some());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"error\""));
    }
}
