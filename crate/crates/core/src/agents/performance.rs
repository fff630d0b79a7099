//! Performance agent: loop-depth complexity classes, exponential
//! recursion, and loop-body anti-patterns.
//!
//! In patch mode the loop-depth thresholds are relaxed by the patch
//! multiplier; the exponential-recursion threshold is not (two self-calls
//! branch exponentially regardless of sample size).

use crate::config::RunConfig;
use crate::facts::{LoopBodyOp, StructuralFacts};

use super::{Agent, Issue, Severity};

/// Complexity class implied by the deepest loop nest.
pub fn complexity_class(loop_depth: u32) -> &'static str {
    match loop_depth {
        0 => "O(1)",
        1 => "O(n)",
        2 => "O(n^2)",
        _ => "O(n^3)",
    }
}

pub fn issues(facts: &StructuralFacts, cfg: &RunConfig) -> Vec<Issue> {
    let t = &cfg.thresholds;
    let medium_at = t.patch_scaled(t.loop_depth_medium, facts.mode);
    let high_at = t.patch_scaled(t.loop_depth_high, facts.mode);
    let mut out = Vec::new();

    for f in &facts.functions {
        let class = complexity_class(f.max_loop_depth);
        if f.max_loop_depth >= high_at {
            out.push(Issue::new(
                Agent::Performance,
                Severity::High,
                "algorithmic-complexity",
                f.line_span.0,
                0.85,
                format!(
                    "function `{}` has {}-deep loop nesting ({class})",
                    f.name, f.max_loop_depth
                ),
            ));
        } else if f.max_loop_depth >= medium_at {
            out.push(Issue::new(
                Agent::Performance,
                Severity::Medium,
                "algorithmic-complexity",
                f.line_span.0,
                0.8,
                format!(
                    "function `{}` has {}-deep loop nesting ({class})",
                    f.name, f.max_loop_depth
                ),
            ));
        }
        if f.self_call_count >= t.exponential_self_calls {
            out.push(Issue::new(
                Agent::Performance,
                Severity::High,
                "exponential-recursion",
                f.line_span.0,
                0.9,
                format!(
                    "function `{}` recurses into itself {} times per invocation",
                    f.name, f.self_call_count
                ),
            ));
        }
    }

    for (op, line) in &facts.loop_body_ops {
        let (category, message) = match op {
            LoopBodyOp::StringConcat => (
                "loop-string-concat",
                "string concatenation inside a loop; accumulate in a list and join",
            ),
            LoopBodyOp::NestedLinearSearch => (
                "nested-linear-search",
                "linear membership test inside a loop; use a set or dict",
            ),
        };
        out.push(Issue::new(
            Agent::Performance,
            Severity::Medium,
            category,
            *line,
            0.7,
            message,
        ));
    }

    out
}
