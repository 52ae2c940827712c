//! Finite-difference, crisp-limit and filtering checks for the fuzzy layer.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{crisp_limit_gap, random_kb, random_store, random_tree, words, worst_gradient_error};
use simtree::embed::EmbeddingStore;
use simtree::fuzzy::{ground_batch, ground_body, pmean, FuzzyConfig};
use simtree::kb::{GroundAtom, Interpretation, KnowledgeBase, Term, Var};
use simtree::rules::{convert_tree_to_rules, parse_rules, Formula, RuleSet};
use simtree::Sym;

#[test]
fn gradients_match_central_differences() {
    let worst = (0..200u64).map(worst_gradient_error).fold(0.0, f64::max);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn unreferenced_entity_has_no_gradient() {
    let kb = simtree::kb::parse_facts("w(a, x).\ntarget(a, ham).\n").unwrap();
    let mut store = EmbeddingStore::new(2);
    store.insert(Sym::new("x"), &[1.0, 0.2]).unwrap();
    store.insert(Sym::new("free"), &[0.9, 0.1]).unwrap();
    store.insert(Sym::new("idle"), &[0.3, 0.3]).unwrap();
    let rules = parse_rules("spam :- exists W (w(T, W) & similar(W, free)).").unwrap();
    let batch = ground_batch(&rules, &kb, &[0], &store, &FuzzyConfig::new(0.5)).unwrap();
    let (report, grad) = batch.loss_and_grad(&store);
    assert!(report.loss > 0.0);
    assert!(grad.get(store.slot(Sym::new("x")).unwrap()).is_some());
    assert!(grad.get(store.slot(Sym::new("idle")).unwrap()).is_none());
}

#[test]
fn steep_sigmoid_reaches_crisp_truth() {
    for seed in 0..100 {
        let (gap, agree) = crisp_limit_gap(seed);
        assert!(gap < 1e-3, "seed {seed}: gap {gap}");
        assert!(agree, "seed {seed}");
    }
}

/// Evaluates `f` without filtering: symbolic atoms are crisp 0/1 factors,
/// every quantifier ranges over the active domain, and entities failing the
/// guard are masked out of the p-mean after their body is checked to be 0.
fn unfiltered(f: &Formula, env: &mut Vec<(Var, Sym)>, interp: &Interpretation, store: &EmbeddingStore, cfg: &FuzzyConfig) -> f64 {
    let resolve = |env: &Vec<(Var, Sym)>, t: &Term| match t {
        Term::Const(c) => *c,
        Term::Var(v) => env.iter().rev().find(|(w, _)| w == v).unwrap().1,
    };
    match f {
        Formula::True => 1.0,
        Formula::Pred(a) if a.is_similar() => {
            let (x, y) = (resolve(env, &a.args[0]), resolve(env, &a.args[1]));
            match (store.vector(x), store.vector(y)) {
                (Some(x), Some(y)) => simtree::fuzzy::fuzzy_similar(x, y, cfg).unwrap(),
                _ => 0.0,
            }
        }
        Formula::Pred(a) => {
            let args = a.args.iter().map(|t| resolve(env, t)).collect();
            if interp.contains(&GroundAtom { predicate: a.predicate, args }) {
                1.0
            } else {
                0.0
            }
        }
        Formula::And(xs) => xs.iter().map(|x| unfiltered(x, env, interp, store, cfg)).product(),
        Formula::Or(xs) => 1.0 - xs.iter().map(|x| 1.0 - unfiltered(x, env, interp, store, cfg)).product::<f64>(),
        Formula::Not(x) => 1.0 - unfiltered(x, env, interp, store, cfg),
        Formula::Exists(v, body) => {
            let guards: Vec<_> = top_conjuncts(body)
                .into_iter()
                .filter(|a| !a.is_similar() && a.vars().any(|w| w == *v))
                .filter(|a| a.vars().all(|w| w == *v || env.iter().any(|(u, _)| *u == w)))
                .collect();
            let mut kept = Vec::new();
            for e in interp.active_domain() {
                env.push((*v, e));
                let value = unfiltered(body, env, interp, store, cfg);
                let guard: f64 = guards
                    .iter()
                    .map(|a| unfiltered(&Formula::Pred((*a).clone()), env, interp, store, cfg))
                    .product();
                env.pop();
                if guard == 0.0 {
                    assert_eq!(value, 0.0, "a failing guard must annihilate the body");
                } else {
                    kept.push(value);
                }
            }
            pmean(&kept, cfg.p_exists)
        }
    }
}

fn top_conjuncts(f: &Formula) -> Vec<&simtree::kb::Atom> {
    match f {
        Formula::Pred(a) => vec![a],
        Formula::And(xs) => xs.iter().flat_map(top_conjuncts).collect(),
        Formula::Exists(_, x) => top_conjuncts(x),
        _ => vec![],
    }
}

fn check_filter_equivalence(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = words(rng.random_range(2..=10));
    let store = random_store(&mut rng, &ws, 3);
    let kb: KnowledgeBase = random_kb(&mut rng, &ws, 6);
    let rules: RuleSet = convert_tree_to_rules(&random_tree(&mut rng, &ws, 3));
    let cfg = FuzzyConfig::new(0.2);
    for interp in kb.interpretations() {
        for rule in &rules.rules {
            let g = ground_body(rule, interp, &kb, &store).unwrap();
            let tape = ground_batch(
                &RuleSet { rules: vec![rule.clone()], ..rules.clone() },
                &kb,
                &[kb.index_of(interp.id).unwrap()],
                &store,
                &cfg,
            )
            .unwrap()
            .body_truths(&store)[0];
            let mut env = vec![(Var::instance(), interp.id)];
            let oracle = unfiltered(&rule.body, &mut env, interp, &store, &cfg);
            assert_eq!(tape, oracle, "seed {seed}, rule {rule}, ops {:?}", g.ops);
        }
    }
}

#[test]
fn filtered_grounding_equals_masked_brute_force() {
    for seed in 0..100 {
        check_filter_equivalence(seed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_is_bounded_and_zero_only_when_satisfied(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = words(5);
        let kb = random_kb(&mut rng, &ws, 6);
        let rules = convert_tree_to_rules(&random_tree(&mut rng, &ws, 3));
        let store = random_store(&mut rng, &ws, 4);
        let all: Vec<usize> = (0..kb.len()).collect();
        let report = ground_batch(&rules, &kb, &all, &store, &FuzzyConfig::new(0.5)).unwrap().loss(&store);
        prop_assert!((0.0..=1.0).contains(&report.loss));
        prop_assert_eq!(report.loss == 0.0, report.clauses.iter().all(|&c| c == 1.0));
    }
}
