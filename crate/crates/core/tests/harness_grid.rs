//! Ablation grid on the generated corpus.

use std::path::Path;

use simtree::harness::{run_ablation, AblationVariant, ExperimentConfig, HarnessError};

fn config(extra: &str) -> ExperimentConfig {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let text = format!("profile = \"synthetic\"\n{extra}");
    ExperimentConfig::from_toml(&text, &dir).unwrap()
}

#[test]
fn single_variant_gives_single_row() {
    let r = run_ablation(&config("[ablation]\nvariants = [\"tilde\"]\n")).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.to_csv().lines().count(), 2);
    assert_eq!(r.rows[0].metrics.confusion.total(), 150);
}

#[test]
fn similar_beats_exact_match_and_is_reproducible() {
    let cfg = config("[ablation]\nvariants = [\"tilde\", \"tilde_similar\"]\nseeds = [1, 2]\n");
    let a = run_ablation(&cfg).unwrap();
    assert_eq!(a.rows.len(), 4);
    for pair in a.rows.chunks(2) {
        assert_eq!((pair[0].variant, pair[1].variant), (AblationVariant::Tilde, AblationVariant::TildeSimilar));
        assert!(pair[1].metrics.f1 >= pair[0].metrics.f1 + 0.1, "{pair:?}");
    }
    assert_eq!(a.to_csv(), run_ablation(&cfg).unwrap().to_csv());
    assert!(a.table().contains("TILDE+similar"));
}

#[test]
fn handcrafted_variant_needs_a_rule_file() {
    let mut cfg = config("[ablation]\nvariants = [\"handcrafted_similar\"]\n");
    cfg.ablation.handcrafted_rules = None;
    assert!(matches!(run_ablation(&cfg), Err(HarnessError::MissingHandcrafted)));
    cfg.ablation.handcrafted_rules = Some("/nonexistent/rules.pl".into());
    assert!(matches!(run_ablation(&cfg), Err(HarnessError::Open { .. })));
}
