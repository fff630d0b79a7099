//! Integration checks over the bundled corpus and fixture files: dataset
//! composition, frozen per-sample verdicts, aggregate metrics, and the
//! ablation / correlation structure.

use std::collections::BTreeMap;
use std::path::Path;

use verimux_core::aggregate::Verdict;
use verimux_core::eval::{
    agent_correlation, evaluate_dataset, load_dataset, marginal_contributions, run_ablation,
    Category, Label,
};
use verimux_core::facts::SourceUnit;
use verimux_core::Verifier;

fn data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

#[test]
fn corpus_composition_mirrors_the_dataset_design() {
    let samples = load_dataset(&data_dir().join("corpus.jsonl")).unwrap();
    assert!(samples.len() >= 30);

    let buggy = samples.iter().filter(|s| s.label == Label::Buggy).count();
    let correct = samples.len() - buggy;
    assert!(buggy > correct, "majority of samples carry bugs");
    assert!(correct >= 8, "enough correct samples to measure FPR");

    let mut categories: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &samples {
        let name = match s.category {
            Category::Correctness => "correctness",
            Category::Security => "security",
            Category::Performance => "performance",
            Category::EdgeCases => "edge_cases",
            Category::Resource => "resource",
            Category::Other => "other",
        };
        *categories.entry(name).or_insert(0) += 1;
    }
    for required in [
        "correctness",
        "security",
        "performance",
        "edge_cases",
        "resource",
        "other",
    ] {
        assert!(
            categories.get(required).copied().unwrap_or(0) > 0,
            "category {required} missing from corpus"
        );
    }
}

#[test]
fn corpus_verdicts_are_frozen() {
    let samples = load_dataset(&data_dir().join("corpus.jsonl")).unwrap();
    let verifier = Verifier::with_defaults();
    let expected: BTreeMap<&str, Verdict> = [
        ("sec_eval_untrusted", Verdict::Fail),
        ("sec_shell_cleanup", Verdict::Fail),
        ("sec_pickle_restore", Verdict::Fail),
        ("sec_hardcoded_key", Verdict::Fail),
        ("sec_sql_login", Verdict::Fail),
        ("sec_aws_token", Verdict::Fail),
        ("sec_weak_hash_store", Verdict::Fail),
        ("corr_dispatch_pair", Verdict::Fail),
        ("corr_nested_no_handlers", Verdict::Warning),
        ("corr_ratio_unguarded", Verdict::Fail),
        ("corr_single_monster", Verdict::Warning),
        ("corr_parser_tangle", Verdict::Fail),
        ("corr_stateful_flags", Verdict::Fail),
        ("corr_report_mutation", Verdict::Warning),
        ("perf_fib_exponential", Verdict::Warning),
        ("perf_matrix_cubic", Verdict::Fail),
        ("perf_concat_scan", Verdict::Warning),
        ("perf_shell_per_item", Verdict::Fail),
        ("edge_no_guards", Verdict::Warning),
        ("edge_span_mixup", Verdict::Warning),
        ("res_leaked_handles", Verdict::Fail),
        ("res_connection_churn", Verdict::Fail),
        ("other_truncated_def", Verdict::Error),
        ("ok_interval_math", Verdict::Pass),
        ("ok_batch_totals", Verdict::Pass),
        ("ok_param_sql", Verdict::Pass),
        ("ok_digest_modern", Verdict::Pass),
        ("ok_subprocess_list", Verdict::Pass),
        ("ok_linear_recursion", Verdict::Pass),
        ("ok_single_pass", Verdict::Pass),
        ("ok_strict_loader", Verdict::Pass),
        ("ok_dense_reconciler", Verdict::Fail),
        ("ok_wide_dispatch", Verdict::Fail),
    ]
    .into_iter()
    .collect();

    assert_eq!(samples.len(), expected.len());
    for sample in &samples {
        let verdict = verifier.verify(&sample.unit()).unwrap().verdict;
        assert_eq!(
            verdict,
            expected[sample.id.as_str()],
            "verdict drifted for {}",
            sample.id
        );
    }
}

#[test]
fn corpus_metrics_hold_their_floors() {
    let samples = load_dataset(&data_dir().join("corpus.jsonl")).unwrap();
    let verifier = Verifier::with_defaults();
    let outcome = evaluate_dataset(&samples, &verifier).unwrap();
    let m = &outcome.metrics;
    assert!(m.accuracy >= 0.65, "accuracy {:.3}", m.accuracy);
    assert!(m.tpr.unwrap() >= 0.6, "tpr {:?}", m.tpr);
    assert!(m.fpr.unwrap() <= 0.5, "fpr {:?}", m.fpr);
    assert!(m.f1.is_some() && m.precision.is_some());
    let [lo, hi] = m.ci.unwrap();
    assert!(lo <= m.accuracy && m.accuracy <= hi);
    assert_eq!(outcome.fpr_within_budget, Some(true));
    assert_eq!(outcome.confusion.total(), samples.len());
}

#[test]
fn corpus_ablation_shows_multi_agent_advantage() {
    let samples = load_dataset(&data_dir().join("corpus.jsonl")).unwrap();
    let verifier = Verifier::with_defaults();
    let run = run_ablation(&samples, &verifier).unwrap();
    assert_eq!(run.configs.len(), 15);

    // Average accuracy never drops as the agent count grows on this
    // corpus, and four agents beat singles outright.
    for pair in run.by_agent_count.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-12, "{:?}", run.by_agent_count);
    }
    assert!(run.by_agent_count[3] > run.by_agent_count[0]);

    let marginal = marginal_contributions(&run.configs).unwrap();
    assert!(marginal["correctness"] > 0.0);
    assert!(marginal["security"] > 0.0);
}

#[test]
fn corpus_agent_correlation_is_well_formed() {
    let samples = load_dataset(&data_dir().join("corpus.jsonl")).unwrap();
    let verifier = Verifier::with_defaults();
    let corr = agent_correlation(&samples, &verifier).unwrap();
    for i in 0..4 {
        assert_eq!(corr.matrix[i][i], Some(1.0));
        for j in 0..4 {
            assert_eq!(corr.matrix[i][j], corr.matrix[j][i]);
            if let Some(rho) = corr.matrix[i][j] {
                assert!((-1.0..=1.0).contains(&rho));
            }
        }
    }
    // Off-diagonal entries exist on this corpus and stay modest.
    let mean = corr.mean_off_diagonal().expect("defined correlations");
    assert!(mean.abs() < 0.9, "agents nearly collinear: {mean}");
}

#[test]
fn fixture_files_hit_their_verdicts() {
    let verifier = Verifier::with_defaults();
    let fixtures = data_dir().join("fixtures");
    let verify_file = |name: &str| {
        let code = std::fs::read_to_string(fixtures.join(name)).unwrap();
        verifier.verify(&SourceUnit::new(name, code)).unwrap()
    };

    // The three clean fixtures pass outright with a healthy margin.
    for clean in ["clean_intervals.py", "clean_storage.py", "clean_loader.py"] {
        let result = verify_file(clean);
        assert_eq!(result.verdict, Verdict::Pass, "{clean}");
        assert!(result.score >= 0.85, "{clean} score {:.3}", result.score);
    }
    assert_eq!(verify_file("eval_injection.py").verdict, Verdict::Fail);
    assert_eq!(verify_file("syntax_error.py").verdict, Verdict::Error);
}
