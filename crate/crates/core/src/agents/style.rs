//! Style agent. Every finding here is LOW severity: style informs the
//! weighted score but can never block a deployment on its own.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::config::RunConfig;
use crate::facts::StructuralFacts;
use crate::stats::halstead_volume;

use super::{Agent, Issue, Severity};

static SNAKE_CASE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^_*[a-z][a-z0-9_]*$").unwrap());

pub fn issues(facts: &StructuralFacts, cfg: &RunConfig) -> Vec<Issue> {
    let t = &cfg.thresholds;
    let mut out = Vec::new();

    let volume: f64 =
        halstead_volume(facts.total_token_count(), facts.distinct_token_count());
    if volume > t.halstead_volume {
        out.push(Issue::new(
            Agent::Style,
            Severity::Low,
            "halstead-volume",
            1,
            0.8,
            format!(
                "Halstead volume {volume:.0} exceeds {:.0}",
                t.halstead_volume
            ),
        ));
    }

    for f in &facts.functions {
        if !SNAKE_CASE.is_match(&f.name) {
            out.push(Issue::new(
                Agent::Style,
                Severity::Low,
                "naming-convention",
                f.line_span.0,
                0.9,
                format!("function `{}` is not snake_case", f.name),
            ));
        }
    }

    if !facts.functions.is_empty() {
        let documented = facts.functions.iter().filter(|f| f.has_docstring).count();
        let coverage = documented as f64 / facts.functions.len() as f64;
        if coverage < t.docstring_coverage {
            out.push(Issue::new(
                Agent::Style,
                Severity::Low,
                "docstring-coverage",
                facts.functions[0].line_span.0,
                0.85,
                format!(
                    "docstring coverage {documented}/{} is below {:.0}%",
                    facts.functions.len(),
                    t.docstring_coverage * 100.0
                ),
            ));
        }
    }

    if facts.total_line_count > 0 {
        let density = facts.comment_line_count as f64 / facts.total_line_count as f64;
        if density < t.comment_density {
            out.push(Issue::new(
                Agent::Style,
                Severity::Low,
                "comment-density",
                1,
                0.7,
                format!(
                    "comment density {:.1}% is below {:.1}%",
                    density * 100.0,
                    t.comment_density * 100.0
                ),
            ));
        }
    }

    if let Some(first_stmt) = facts.first_non_import_line {
        if facts.imports.iter().any(|i| i.line > first_stmt) {
            out.push(Issue::new(
                Agent::Style,
                Severity::Low,
                "import-organization",
                first_stmt,
                0.8,
                "imports are not grouped at the top of the module",
            ));
        }
    }

    out
}
