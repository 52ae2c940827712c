//! Random knowledge bases, trees and stores, and the randomized fuzzy
//! checks built on them, shared by the property and acceptance suites.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use simtree::embed::{cosine, ground_similar, EmbeddingStore, SimilarGrounding, SimilarityConfig};
use simtree::fuzzy::{ground_batch, FuzzyConfig};
use simtree::induce::{Conjunction, LogicalDecisionTree, Node};
use simtree::kb::{Atom, GroundAtom, KnowledgeBase, Term, Var};
use simtree::rules::{convert_tree_to_rules, crisp_eval, crisp_truth};
use simtree::Sym;

pub const CLASSES: [&str; 3] = ["k0", "k1", "k2"];

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Examples over `w/2`, `r/3` and `p/1`, without a similarity grounding.
pub fn random_kb(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    kb.declare(Sym::new("w"), 2);
    kb.declare(Sym::new("r"), 3);
    kb.declare(Sym::new("p"), 1);
    for i in 0..n {
        let id = format!("x{i}");
        kb.add_example(Sym::new(&id), Sym::new(CLASSES[rng.random_range(0..3)])).unwrap();
        for w in words {
            if rng.random_bool(0.3) {
                kb.add_fact(GroundAtom::new("w", &[&id, w])).unwrap();
            }
        }
        for _ in 0..rng.random_range(0..4) {
            let (a, b) = (words.choose(rng).unwrap(), words.choose(rng).unwrap());
            kb.add_fact(GroundAtom::new("r", &[&id, a, b])).unwrap();
        }
        if rng.random_bool(0.5) {
            kb.add_fact(GroundAtom::new("p", &[&id])).unwrap();
        }
    }
    kb
}

/// Reflexive pairs plus a random quarter of the others.
pub fn random_similar(rng: &mut ChaCha8Rng, words: &[String]) -> SimilarGrounding {
    let mut pairs: Vec<(Sym, Sym)> = words.iter().map(|w| (Sym::new(w), Sym::new(w))).collect();
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            if rng.random_bool(0.25) {
                pairs.push((Sym::new(a), Sym::new(b)));
            }
        }
    }
    SimilarGrounding::from_pairs(pairs, Some(0.5))
}

pub fn random_store(rng: &mut ChaCha8Rng, words: &[String], dim: usize) -> EmbeddingStore {
    let mut store = EmbeddingStore::new(dim);
    for w in words {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        store.insert(Sym::new(w), &v).unwrap();
    }
    store
}

fn var(n: usize) -> Term {
    Term::Var(Var::new(&format!("X{n}")))
}

fn t() -> Term {
    Term::Var(Var::instance())
}

/// A node test that may reuse variables bound on the yes-path.
fn random_test(rng: &mut ChaCha8Rng, words: &[String], path_vars: &[usize], next_var: &mut usize) -> (Conjunction, Vec<usize>) {
    let word = |rng: &mut ChaCha8Rng| Term::constant(words.choose(rng).unwrap());
    let mut fresh = || {
        *next_var += 1;
        *next_var
    };
    let choice = if path_vars.is_empty() { rng.random_range(0..3) } else { rng.random_range(0..5) };
    match choice {
        0 => {
            let v = fresh();
            let c = word(rng);
            (Conjunction(vec![Atom::new("w", vec![t(), var(v)]), Atom::new("similar", vec![var(v), c])]), vec![v])
        }
        1 => (Conjunction(vec![Atom::new("w", vec![t(), word(rng)])]), vec![]),
        2 => (Conjunction(vec![Atom::new("p", vec![t()])]), vec![]),
        3 => {
            let u = *path_vars.choose(rng).unwrap();
            let v = fresh();
            (Conjunction(vec![Atom::new("r", vec![t(), var(u), var(v)])]), vec![v])
        }
        _ => {
            let u = *path_vars.choose(rng).unwrap();
            (Conjunction(vec![Atom::new("similar", vec![var(u), word(rng)])]), vec![])
        }
    }
}

fn random_node(rng: &mut ChaCha8Rng, words: &[String], depth: usize, path_vars: &mut Vec<usize>, next_var: &mut usize) -> Node {
    if depth == 0 || rng.random_bool(0.25) {
        return Node::leaf(Sym::new(CLASSES[rng.random_range(0..3)]));
    }
    let (conj, fresh) = random_test(rng, words, path_vars, next_var);
    let mark = path_vars.len();
    path_vars.extend(&fresh);
    let yes = random_node(rng, words, depth - 1, path_vars, next_var);
    path_vars.truncate(mark);
    let no = random_node(rng, words, depth - 1, path_vars, next_var);
    Node::test(conj, yes, no)
}

/// A tree of depth between 1 and `max_depth`.
pub fn random_tree(rng: &mut ChaCha8Rng, words: &[String], max_depth: usize) -> LogicalDecisionTree {
    let depth = rng.random_range(1..=max_depth);
    LogicalDecisionTree { root: random_node(rng, words, depth, &mut Vec::new(), &mut 0) }
}

/// Worst relative error between the analytic gradient and central
/// differences over every component of every referenced vector.
pub fn worst_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = words(5);
    let kb = random_kb(&mut rng, &ws, 6);
    let rules = convert_tree_to_rules(&random_tree(&mut rng, &ws, 3));
    let mut store = random_store(&mut rng, &ws, 4);
    let cfg = FuzzyConfig { tau: rng.random_range(-0.5..0.9), ..FuzzyConfig::new(0.5) };
    let all: Vec<usize> = (0..kb.len()).collect();
    let batch = ground_batch(&rules, &kb, &all, &store, &cfg).unwrap();
    let (_, grad) = batch.loss_and_grad(&store);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for slot in 0..store.len() {
        for i in 0..4 {
            let x = store.row(slot)[i];
            store.row_mut(slot)[i] = x + h;
            let up = batch.loss(&store).loss;
            store.row_mut(slot)[i] = x - h;
            let down = batch.loss(&store).loss;
            store.row_mut(slot)[i] = x;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.get(slot).map_or(0.0, |g| g[i]);
            // Components below 1e-6 are compared absolutely.
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// Resamples until every pair of words has `|cos - tau| > margin`.
pub fn margin_store(rng: &mut ChaCha8Rng, ws: &[String], tau: f64, margin: f64) -> EmbeddingStore {
    loop {
        let store = random_store(rng, ws, 4);
        let ok = ws.iter().enumerate().all(|(i, a)| {
            ws[i + 1..].iter().all(|b| {
                let c = cosine(store.vector(Sym::new(a)).unwrap(), store.vector(Sym::new(b)).unwrap()).unwrap();
                (c - tau).abs() > margin
            })
        });
        if ok {
            return store;
        }
    }
}

/// Largest gap between fuzzy and crisp body truth, and whether the most
/// satisfied rule always carries the crisp prediction.
pub fn crisp_limit_gap(seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = words(5);
    let tau = 0.3;
    let store = margin_store(&mut rng, &ws, tau, 0.05);
    let mut kb = random_kb(&mut rng, &ws, 8);
    let sim = SimilarityConfig::new(tau).unwrap();
    let entities: Vec<Sym> = ws.iter().map(|w| Sym::new(w)).collect();
    kb.attach_similar(ground_similar(&store, &entities, &sim).unwrap());
    let rules = convert_tree_to_rules(&random_tree(&mut rng, &ws, 4));
    let cfg = FuzzyConfig { tau, steepness: 1e4, p_exists: 1e4, p_aggregate: 2.0 };
    let all: Vec<usize> = (0..kb.len()).collect();
    let batch = ground_batch(&rules, &kb, &all, &store, &cfg).unwrap();
    let truths = batch.body_truths(&store);
    let n = rules.rules.len();
    let mut gap: f64 = 0.0;
    let mut agree = true;
    for (e, interp) in kb.interpretations().iter().enumerate() {
        let row = &truths[e * n..(e + 1) * n];
        for (r, rule) in rules.rules.iter().enumerate() {
            let crisp = if crisp_truth(&rule.body, interp, &kb).unwrap() { 1.0 } else { 0.0 };
            gap = gap.max((row[r] - crisp).abs());
        }
        let best = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap();
        agree &= rules.rules[best].head == crisp_eval(&rules, interp, &kb).unwrap();
    }
    (gap, agree)
}
