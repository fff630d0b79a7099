//! Correctness agent: complexity, nesting, exception coverage, and
//! edge-case guarding.

use crate::config::RunConfig;
use crate::facts::StructuralFacts;

use super::{Agent, Issue, Severity};

pub fn issues(facts: &StructuralFacts, cfg: &RunConfig) -> Vec<Issue> {
    let t = &cfg.thresholds;
    let mut out = Vec::new();

    for f in &facts.functions {
        if f.cyclomatic_complexity > t.complexity {
            out.push(Issue::new(
                Agent::Correctness,
                Severity::High,
                "high-complexity",
                f.line_span.0,
                0.9,
                format!(
                    "function `{}` has cyclomatic complexity {} (threshold {})",
                    f.name, f.cyclomatic_complexity, t.complexity
                ),
            ));
        }
        if f.max_nesting_depth > t.nesting {
            out.push(Issue::new(
                Agent::Correctness,
                Severity::Medium,
                "deep-nesting",
                f.line_span.0,
                0.8,
                format!(
                    "function `{}` nests {} levels deep (threshold {})",
                    f.name, f.max_nesting_depth, t.nesting
                ),
            ));
        }
    }

    // Exception coverage over functions that perform risky operations.
    // Coverage over an empty denominator is defined as full.
    let risky: Vec<_> = facts
        .functions
        .iter()
        .filter(|f| f.risky_op_count > 0)
        .collect();
    if !risky.is_empty() {
        let covered = risky.iter().filter(|f| f.has_exception_handling).count();
        let coverage = covered as f64 / risky.len() as f64;
        if coverage < t.exception_coverage {
            let first_uncovered = risky
                .iter()
                .find(|f| !f.has_exception_handling)
                .map(|f| f.line_span.0)
                .unwrap_or(1);
            out.push(Issue::new(
                Agent::Correctness,
                Severity::High,
                "exception-coverage",
                first_uncovered,
                0.7,
                format!(
                    "insufficient exception coverage: {covered}/{} risky functions handle exceptions ({:.0}% < {:.0}%)",
                    risky.len(),
                    coverage * 100.0,
                    t.exception_coverage * 100.0
                ),
            ));
        }
    }

    // Edge-case guarding: at least one parameterized function must compare
    // against an empty/None/zero literal somewhere.
    let with_params: Vec<_> = facts
        .functions
        .iter()
        .filter(|f| f.param_count > 0)
        .collect();
    if !with_params.is_empty() && !with_params.iter().any(|f| f.has_input_guard) {
        out.push(Issue::new(
            Agent::Correctness,
            Severity::Medium,
            "edge-case-coverage",
            with_params[0].line_span.0,
            0.6,
            "low edge-case coverage: no parameterized function guards against empty/None/zero inputs",
        ));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{extract_facts, SourceUnit};

    fn run(src: &str) -> Vec<Issue> {
        let facts = extract_facts(&SourceUnit::new("t", src)).unwrap();
        issues(&facts, &RunConfig::default())
    }

    #[test]
    fn complexity_sixteen_fires_high() {
        let mut src = String::from("def f(x):\n");
        for i in 0..15 {
            src.push_str(&format!("    if x > {i}:\n        x -= 1\n"));
        }
        src.push_str("    return x\n");
        let found = run(&src);
        let complexity: Vec<_> = found
            .iter()
            .filter(|i| i.category == "high-complexity")
            .collect();
        assert_eq!(complexity.len(), 1);
        assert_eq!(complexity[0].severity, Severity::High);
    }

    #[test]
    fn complexity_fifteen_is_within_threshold() {
        let mut src = String::from("def f(x):\n");
        for i in 0..14 {
            src.push_str(&format!("    if x > {i}:\n        x -= 1\n"));
        }
        src.push_str("    return x\n");
        assert!(run(&src).iter().all(|i| i.category != "high-complexity"));
    }

    #[test]
    fn empty_module_is_clean() {
        let found = run("");
        assert!(found.is_empty());
        let facts = extract_facts(&SourceUnit::new("t", "")).unwrap();
        let report = super::super::analyze(
            Agent::Correctness,
            &facts,
            &RunConfig::default(),
            &crate::agents::CompiledSecurityRules::compile(
                &RunConfig::default().security,
            )
            .unwrap(),
        );
        assert_eq!(report.score, 1.0);
    }

    #[test]
    fn exception_coverage_three_of_five_fires() {
        // Five functions with risky ops, three wrapped in try: 0.6 < 0.8.
        let mut src = String::new();
        for i in 0..3 {
            src.push_str(&format!(
                "def safe{i}(d):\n    try:\n        return d[0]\n    except IndexError:\n        return None\n\n"
            ));
        }
        for i in 0..2 {
            src.push_str(&format!("def unsafe{i}(d):\n    return d[0]\n\n"));
        }
        let found = run(&src);
        let cov: Vec<_> = found
            .iter()
            .filter(|i| i.category == "exception-coverage")
            .collect();
        assert_eq!(cov.len(), 1);
        assert_eq!(cov[0].severity, Severity::High);
        assert!(cov[0].message.contains("3/5"));
    }

    #[test]
    fn guarded_function_suppresses_edge_case_issue() {
        let guarded = "def f(xs):\n    if xs == []:\n        return 0\n    return 1\n";
        assert!(run(guarded).iter().all(|i| i.category != "edge-case-coverage"));
        let unguarded = "def f(xs):\n    return 1\n";
        assert!(run(unguarded)
            .iter()
            .any(|i| i.category == "edge-case-coverage"));
    }

    #[test]
    fn deep_nesting_fires_medium() {
        let src = "def f(x):\n    if x:\n        if x:\n            if x:\n                if x:\n                    if x:\n                        return x\n";
        let found = run(src);
        let nest: Vec<_> = found.iter().filter(|i| i.category == "deep-nesting").collect();
        assert_eq!(nest.len(), 1);
        assert_eq!(nest[0].severity, Severity::Medium);
    }
}
