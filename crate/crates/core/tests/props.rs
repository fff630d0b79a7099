//! Property tests for the engine invariants: entropy bounds, score
//! monotonicity, metric identities, statistical symmetries, information
//! monotonicity, and parser determinism over generated programs.

use proptest::prelude::*;

use verimux_core::agents::{escalate_context, Agent, AgentReport, Issue, Severity};
use verimux_core::aggregate::{aggregate_score, merge_issues, WeightVector};
use verimux_core::config::{Penalties, RunConfig};
use verimux_core::eval::{
    bootstrap_ci, compute_metrics, correlation_from_scores, mcnemar, ConfusionMatrix, EvalConfig,
};
use verimux_core::facts::{extract_facts, Mode, SourceUnit};
use verimux_core::stats::shannon_entropy;
use verimux_core::theory::{
    generalization_bound, label_entropy, mutual_information, pac_sample_size,
    GeneralizationQuery, PacQuery,
};
use verimux_core::Verdict;

fn arb_severity() -> impl Strategy<Value = Severity> {
    prop_oneof![
        Just(Severity::Low),
        Just(Severity::Medium),
        Just(Severity::High),
        Just(Severity::Critical),
    ]
}

fn arb_agent() -> impl Strategy<Value = Agent> {
    prop_oneof![
        Just(Agent::Correctness),
        Just(Agent::Security),
        Just(Agent::Performance),
        Just(Agent::Style),
    ]
}

fn arb_issue() -> impl Strategy<Value = Issue> {
    (
        arb_agent(),
        arb_severity(),
        prop_oneof![
            Just("sql-injection"),
            Just("high-complexity"),
            Just("naming-convention"),
            Just("secret")
        ],
        1u32..200,
        0.0f64..=1.0,
    )
        .prop_map(|(agent, severity, category, line, confidence)| {
            Issue::new(agent, severity, category, line, confidence, "generated")
        })
}

proptest! {
    #[test]
    fn entropy_stays_within_bounds(s in "[ -~]{1,120}") {
        let h: f64 = shannon_entropy(&s).unwrap();
        let max = (s.chars().count() as f64).log2();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= max + 1e-9, "H = {h}, log2(len) = {max}");
    }

    #[test]
    fn agent_score_is_monotone_in_issue_count(issues in prop::collection::vec(arb_issue(), 0..12)) {
        let penalties = Penalties::default();
        let mut running = Vec::new();
        let mut last = verimux_core::agents::score_from_issues(&running, &penalties);
        for issue in issues {
            running.push(issue);
            let score = verimux_core::agents::score_from_issues(&running, &penalties);
            prop_assert!(score <= last + 1e-12);
            prop_assert!((0.0..=1.0).contains(&score));
            last = score;
        }
    }

    #[test]
    fn metric_identities_from_raw_predictions(
        outcomes in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)
    ) {
        let flagged: Vec<bool> = outcomes.iter().map(|(f, _)| *f).collect();
        let buggy: Vec<bool> = outcomes.iter().map(|(_, b)| *b).collect();
        let cm = ConfusionMatrix::from_predictions(&flagged, &buggy);
        prop_assert_eq!(cm.total(), outcomes.len());
        let m = compute_metrics(&cm).unwrap();

        let n = outcomes.len() as f64;
        let correct = outcomes.iter().filter(|(f, b)| f == b).count() as f64;
        prop_assert!((m.accuracy - correct / n).abs() < 1e-12);

        if let (Some(p), Some(r), Some(f1)) = (m.precision, m.tpr, m.f1) {
            prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
        if let Some(tpr) = m.tpr {
            let buggy_total = (cm.tp + cm.fn_) as f64;
            prop_assert!((tpr - cm.tp as f64 / buggy_total).abs() < 1e-12);
        }
    }

    #[test]
    fn mcnemar_is_symmetric_on_random_vectors(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 2..120)
    ) {
        let a: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let b: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let ab = mcnemar(&a, &b, &labels).unwrap();
        let ba = mcnemar(&b, &a, &labels).unwrap();
        prop_assert_eq!(ab.chi2, ba.chi2);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(
        columns in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 3..40)
    ) {
        let mut scores: [Vec<f64>; 4] = Default::default();
        for (a, b, c, d) in columns {
            scores[0].push(a);
            scores[1].push(b);
            scores[2].push(c);
            scores[3].push(d);
        }
        let m = correlation_from_scores(&scores);
        for i in 0..4 {
            prop_assert_eq!(m.matrix[i][i], Some(1.0));
            for j in 0..4 {
                prop_assert_eq!(m.matrix[i][j], m.matrix[j][i]);
                if let Some(rho) = m.matrix[i][j] {
                    prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&rho));
                }
            }
        }
    }

    #[test]
    fn mutual_information_bounded_and_monotone_under_refinement(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()), 2..100)
    ) {
        let labels: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let d1: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let d2: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let d3: Vec<bool> = rows.iter().map(|r| r.3).collect();
        let h: f64 = label_entropy(&labels);

        let single: f64 = mutual_information(std::slice::from_ref(&d1), &labels).unwrap();
        let pair: f64 = mutual_information(&[d1.clone(), d2.clone()], &labels).unwrap();
        let triple: f64 = mutual_information(&[d1, d2, d3], &labels).unwrap();

        for mi in [single, pair, triple] {
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= h + 1e-9, "I = {mi} > H(B) = {h}");
        }
        // Refining the joint tuple never loses information.
        prop_assert!(pair + 1e-9 >= single);
        prop_assert!(triple + 1e-9 >= pair);
    }

    #[test]
    fn pac_bound_is_monotone(
        h1 in 1u64..500, extra in 0u64..500,
        eps in 0.01f64..0.9, delta in 0.01f64..0.9
    ) {
        let base = pac_sample_size(&PacQuery { hypothesis_count: h1, epsilon: eps, delta }).unwrap();
        let more_h = pac_sample_size(&PacQuery { hypothesis_count: h1 + extra, epsilon: eps, delta }).unwrap();
        prop_assert!(more_h >= base);
        let tighter_delta = pac_sample_size(&PacQuery { hypothesis_count: h1, epsilon: eps, delta: delta / 2.0 }).unwrap();
        prop_assert!(tighter_delta >= base);
        let looser_eps = pac_sample_size(&PacQuery { hypothesis_count: h1, epsilon: (eps * 1.5).min(0.95), delta }).unwrap();
        prop_assert!(looser_eps <= base);
    }

    #[test]
    fn generalization_bound_dominates_empirical_error(
        r_emp in 0.0f64..=1.0, n in 1u64..10_000, h in 1u64..1000, delta in 0.01f64..0.99
    ) {
        let bound: f64 = generalization_bound(&GeneralizationQuery {
            empirical_error: r_emp,
            n,
            hypothesis_count: h,
            delta,
        }).unwrap();
        prop_assert!(bound >= r_emp);
    }

    #[test]
    fn escalation_never_lowers_severity_or_confidence(
        issue in arb_issue(), window in 0u32..10
    ) {
        let cfg = RunConfig::default();
        // A fact bundle whose first line mentions an auth keyword.
        let facts = extract_facts(&SourceUnit::new("p", "login = True\nx = 1\n")).unwrap();
        let before = issue.clone();
        let after = escalate_context(issue, &facts, window, &cfg);
        prop_assert!(after.severity >= before.severity);
        prop_assert!(after.confidence >= before.confidence - 1e-12);
        prop_assert!(after.confidence <= 1.0 + 1e-12);
    }

    #[test]
    fn merged_issues_are_deduplicated_and_sorted(
        issues in prop::collection::vec(arb_issue(), 0..30)
    ) {
        let report = AgentReport {
            agent: Agent::Security,
            score: 1.0,
            decision: false,
            issues,
            latency_ms: 0.0,
        };
        let merged = merge_issues(std::slice::from_ref(&report));
        // Unique (line, category) keys.
        let mut keys: Vec<(u32, &str)> =
            merged.iter().map(|i| (i.line, i.category.as_str())).collect();
        let before = keys.len();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(before, keys.len());
        // Sorted by severity descending, then line ascending.
        for pair in merged.windows(2) {
            prop_assert!(pair[0].severity >= pair[1].severity);
            if pair[0].severity == pair[1].severity {
                prop_assert!(pair[0].line <= pair[1].line);
            }
        }
        // Max severity per key survives the merge.
        for original in &report.issues {
            let kept = merged
                .iter()
                .find(|m| m.line == original.line && m.category == original.category)
                .expect("key survives");
            prop_assert!(kept.severity >= original.severity);
            prop_assert!(kept.confidence >= original.confidence - 1e-12);
        }
    }

    #[test]
    fn subset_scores_renormalize_into_unit_interval(
        mask in 1u8..16, scores in prop::collection::vec(0.0f64..=1.0, 4)
    ) {
        let weights = WeightVector::default();
        let reports: Vec<AgentReport> = Agent::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(i, &agent)| AgentReport {
                agent,
                score: scores[i],
                decision: false,
                issues: Vec::new(),
                latency_ms: 0.0,
            })
            .collect();
        let s = aggregate_score(&reports, &weights).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        // Agrees with the direct renormalized dot product.
        let total: f64 = reports.iter().map(|r| weights.get(r.agent)).sum();
        let dot: f64 = reports.iter().map(|r| weights.get(r.agent) * r.score).sum();
        prop_assert!((s - dot / total).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_per_seed(
        rows in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60),
        seed in any::<u64>()
    ) {
        let flagged: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let buggy: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let cfg = EvalConfig {
            positive_verdicts: vec![Verdict::Fail],
            bootstrap_iterations: 200,
            rng_seed: seed,
            fpr_budget: 0.5,
        };
        let a = bootstrap_ci(&flagged, &buggy, &cfg).unwrap();
        let b = bootstrap_ci(&flagged, &buggy, &cfg).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.0 <= a.1);
    }
}

// A tiny grammar of always-valid Python snippets for parser invariants.
#[derive(Debug, Clone)]
enum Block {
    Assign(u8),
    IfGuard(u8, Box<Block>),
    ForLoop(u8, Box<Block>),
    WhileLoop(u8, Box<Block>),
    TryWrap(Box<Block>),
    CallOut(u8),
}

fn arb_block() -> impl Strategy<Value = Block> {
    let leaf = prop_oneof![
        (0u8..20).prop_map(Block::Assign),
        (0u8..20).prop_map(Block::CallOut),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            ((0u8..20), inner.clone()).prop_map(|(n, b)| Block::IfGuard(n, Box::new(b))),
            ((0u8..20), inner.clone()).prop_map(|(n, b)| Block::ForLoop(n, Box::new(b))),
            ((0u8..20), inner.clone()).prop_map(|(n, b)| Block::WhileLoop(n, Box::new(b))),
            inner.prop_map(|b| Block::TryWrap(Box::new(b))),
        ]
    })
}

fn render(block: &Block, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match block {
        Block::Assign(n) => out.push_str(&format!("{pad}value_{n} = {n} + 1\n")),
        Block::CallOut(n) => out.push_str(&format!("{pad}print(value, {n})\n")),
        Block::IfGuard(n, body) => {
            out.push_str(&format!("{pad}if value > {n}:\n"));
            render(body, indent + 1, out);
        }
        Block::ForLoop(n, body) => {
            out.push_str(&format!("{pad}for item_{n} in items:\n"));
            render(body, indent + 1, out);
        }
        Block::WhileLoop(n, body) => {
            out.push_str(&format!("{pad}while value < {n}:\n"));
            render(body, indent + 1, out);
        }
        Block::TryWrap(body) => {
            out.push_str(&format!("{pad}try:\n"));
            render(body, indent + 1, out);
            out.push_str(&format!("{pad}except ValueError:\n{pad}    pass\n"));
        }
    }
}

fn render_program(blocks: &[Block]) -> String {
    let mut out = String::from("def generated(value, items):\n");
    if blocks.is_empty() {
        out.push_str("    pass\n");
    }
    for block in blocks {
        render(block, 1, &mut out);
    }
    out.push_str("\n\ndef helper():\n    return 0\n");
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn facts_extraction_is_deterministic_and_line_contained(
        blocks in prop::collection::vec(arb_block(), 0..6)
    ) {
        let source = render_program(&blocks);
        let unit = SourceUnit::new("generated", source);
        let first = extract_facts(&unit).expect("generated programs parse");
        let second = extract_facts(&unit).expect("generated programs parse");
        prop_assert_eq!(&first, &second);

        let total = first.total_line_count;
        prop_assert!(first.comment_line_count <= total);
        for f in &first.functions {
            prop_assert!(f.line_span.0 >= 1 && f.line_span.1 <= total);
            prop_assert!(f.line_span.0 <= f.line_span.1);
            prop_assert!(f.cyclomatic_complexity >= 1);
            prop_assert!(f.max_loop_depth <= f.max_nesting_depth);
        }
        for line in first
            .calls
            .iter()
            .map(|c| c.line)
            .chain(first.imports.iter().map(|i| i.line))
            .chain(first.string_literals.iter().map(|s| s.line))
            .chain(first.assignments.iter().map(|a| a.line))
            .chain(first.loop_body_ops.iter().map(|(_, l)| *l))
        {
            prop_assert!(line >= 1 && line <= total);
        }
    }

    #[test]
    fn patch_mode_follows_the_line_count(lines in 0usize..220) {
        let text = "x = 1\n".repeat(lines);
        let unit = SourceUnit::new("m", text);
        prop_assert_eq!(unit.line_count as usize, lines);
        let expected = if (unit.line_count) < 100 { Mode::Patch } else { Mode::Full };
        prop_assert_eq!(unit.mode, expected);
    }
}
