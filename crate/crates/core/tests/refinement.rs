//! Refinement on the perturbed-constant corpus.

use simtree::embed::cosine;
use simtree::fuzzy::{finetune, Classifier, FinetuneConfig, FuzzyConfig, OptimConfig, Variant};
use simtree::rules::convert_tree_to_rules;
use simtree::synthetic::{refinement_fixture, RefinementFixture, SyntheticConfig};
use simtree::Sym;

fn fixture() -> RefinementFixture {
    refinement_fixture(&SyntheticConfig::default(), 0.75, 3, 42).unwrap()
}

fn config(variant: Variant) -> FinetuneConfig {
    FinetuneConfig {
        fuzzy: FuzzyConfig::new(0.7),
        optim: OptimConfig::new(0.02),
        variant,
        positive_class: Sym::new("pos"),
    }
}

#[test]
fn constants_only_pulls_the_constant_back_to_its_cluster() {
    let f = fixture();
    let rules = convert_tree_to_rules(&f.tree);
    let r = finetune(&rules, Classifier::Tree(&f.tree), &f.train, &f.val, &f.store, &config(Variant::ConstantsOnly)).unwrap();
    assert_eq!(r.trainable, vec![f.corpus.hidden]);
    let centroid = f.corpus.centroid(0);
    let hidden = f.corpus.hidden;
    let before = cosine(f.store.vector(hidden).unwrap(), &centroid).unwrap();
    let after = cosine(r.store.vector(hidden).unwrap(), &centroid).unwrap();
    assert!(after > before + 0.05, "{before} -> {after}");
    assert!(r.trace[r.best_epoch].val_f1 > r.trace[0].val_f1);
}

#[test]
fn refined_store_improves_held_out_f1() {
    let f = fixture();
    let rules = convert_tree_to_rules(&f.tree);
    let cfg = config(Variant::All);
    let r = finetune(&rules, Classifier::Tree(&f.tree), &f.train, &f.val, &f.store, &cfg).unwrap();
    let score = |store| {
        let preds = simtree::fuzzy::apply_refined(Classifier::Tree(&f.tree), store, &f.test, &cfg.fuzzy.similarity()).unwrap();
        let labels: Vec<Sym> = f.test.interpretations().iter().map(|i| i.label).collect();
        simtree::harness::metrics(&preds, &labels, cfg.positive_class).unwrap().f1
    };
    let (before, after) = (score(&f.store), score(&r.store));
    assert!(after >= before + 0.05, "{before} -> {after}");
}
