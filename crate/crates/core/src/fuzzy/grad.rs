//! Implication loss over (rule, example) pairs and its reverse-mode gradient.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::embed::{dot, norm, EmbeddingStore};
use crate::kb::KnowledgeBase;
use crate::rules::RuleSet;

use super::ground::{ground_body, GroundedBody, Op};
use super::{pmean, sigmoid, FuzzyConfig, FuzzyError};

/// Sparse gradient keyed by embedding slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient {
    pub by_slot: BTreeMap<usize, Vec<f64>>,
}

impl Gradient {
    fn add(&mut self, slot: usize, scale: f64, v: &[f64]) {
        let g = self.by_slot.entry(slot).or_insert_with(|| vec![0.0; v.len()]);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += scale * vi;
        }
    }

    pub fn get(&self, slot: usize) -> Option<&[f64]> {
        self.by_slot.get(&slot).map(Vec::as_slice)
    }

    pub fn is_finite(&self) -> bool {
        self.by_slot.values().flatten().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    /// `1 - A` where `A` is the p-mean-error aggregate of all clause truths.
    pub loss: f64,
    /// Mean clause truth.
    pub mean_truth: f64,
    /// Truth of each `body -> target` clause, pair order.
    pub clauses: Vec<f64>,
}

struct Pair {
    body: GroundedBody,
    /// Whether the example's label equals the rule head.
    target: bool,
}

/// Every (rule, example) pair of a batch, grounded once. Domains depend only
/// on symbolic facts, so the same grounding serves every epoch.
pub struct GroundedBatch {
    pairs: Vec<Pair>,
    config: FuzzyConfig,
}

pub fn ground_batch(
    rules: &RuleSet,
    kb: &KnowledgeBase,
    examples: &[usize],
    store: &EmbeddingStore,
    config: &FuzzyConfig,
) -> Result<GroundedBatch, FuzzyError> {
    config.validate()?;
    if examples.is_empty() || rules.rules.is_empty() {
        return Err(FuzzyError::EmptyBatch);
    }
    let jobs: Vec<(usize, usize)> = examples.iter().flat_map(|&e| (0..rules.rules.len()).map(move |r| (e, r))).collect();
    let pairs = jobs
        .par_iter()
        .map(|&(e, r)| {
            let interp = &kb.interpretations()[e];
            let rule = &rules.rules[r];
            Ok(Pair { body: ground_body(rule, interp, kb, store)?, target: interp.label == rule.head })
        })
        .collect::<Result<Vec<_>, FuzzyError>>()?;
    Ok(GroundedBatch { pairs, config: *config })
}

/// Grounds and evaluates in one go.
pub fn batch_loss(
    rules: &RuleSet,
    kb: &KnowledgeBase,
    examples: &[usize],
    store: &EmbeddingStore,
    config: &FuzzyConfig,
) -> Result<LossReport, FuzzyError> {
    Ok(ground_batch(rules, kb, examples, store, config)?.loss(store))
}

fn similar_value(store: &EmbeddingStore, a: usize, b: usize, config: &FuzzyConfig) -> f64 {
    let (x, y) = (store.row(a), store.row(b));
    let (nx, ny) = (norm(x), norm(y));
    let c = if nx == 0.0 || ny == 0.0 { 0.0 } else { dot(x, y) / (nx * ny) };
    sigmoid(config.steepness * (c - config.tau))
}

fn forward(body: &GroundedBody, store: &EmbeddingStore, config: &FuzzyConfig) -> Vec<f64> {
    let mut val = vec![0.0; body.ops.len()];
    for (i, op) in body.ops.iter().enumerate() {
        val[i] = match op {
            Op::Const(c) => *c,
            Op::Similar { a, b } => similar_value(store, *a, *b, config),
            Op::And(k) => k.iter().map(|&j| val[j]).product(),
            Op::Or(k) => 1.0 - k.iter().map(|&j| 1.0 - val[j]).product::<f64>(),
            Op::Not(j) => 1.0 - val[*j],
            Op::Exists(k) => {
                let xs: Vec<f64> = k.iter().map(|&j| val[j]).collect();
                pmean(&xs, config.p_exists)
            }
        };
    }
    val
}

/// Products of all entries except position i, without division.
fn leave_one_out(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= xs[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= xs[i];
    }
    out
}

/// Adds `seed * d(root)/d(vectors)` into `grad`.
fn backward(body: &GroundedBody, val: &[f64], seed: f64, store: &EmbeddingStore, config: &FuzzyConfig, grad: &mut Gradient) {
    let mut adj = vec![0.0; body.ops.len()];
    adj[body.root] = seed;
    for i in (0..=body.root).rev() {
        let g = adj[i];
        if g == 0.0 {
            continue;
        }
        match &body.ops[i] {
            Op::Const(_) => {}
            Op::Similar { a, b } => {
                let (x, y) = (store.row(*a), store.row(*b));
                let (nx, ny) = (norm(x), norm(y));
                if nx == 0.0 || ny == 0.0 {
                    continue;
                }
                let s = val[i];
                let c = dot(x, y) / (nx * ny);
                let dc = g * config.steepness * s * (1.0 - s);
                // d cos / dx = y / (|x||y|) - cos * x / |x|^2
                let gx: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi / (nx * ny) - c * xi / (nx * nx)).collect();
                let gy: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| xi / (nx * ny) - c * yi / (ny * ny)).collect();
                grad.add(*a, dc, &gx);
                grad.add(*b, dc, &gy);
            }
            Op::And(k) => {
                let xs: Vec<f64> = k.iter().map(|&j| val[j]).collect();
                for (&j, p) in k.iter().zip(leave_one_out(&xs)) {
                    adj[j] += g * p;
                }
            }
            Op::Or(k) => {
                let xs: Vec<f64> = k.iter().map(|&j| 1.0 - val[j]).collect();
                for (&j, p) in k.iter().zip(leave_one_out(&xs)) {
                    adj[j] += g * p;
                }
            }
            Op::Not(j) => adj[*j] -= g,
            Op::Exists(k) => {
                let r = val[i];
                if r <= 0.0 {
                    continue;
                }
                let n = k.len() as f64;
                let p = config.p_exists;
                for &j in k {
                    adj[j] += g * (val[j] / r).powf(p - 1.0) / n;
                }
            }
        }
    }
}

impl GroundedBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn config(&self) -> &FuzzyConfig {
        &self.config
    }

    /// Slots referenced by any `similar/2` leaf.
    pub fn slots(&self) -> std::collections::BTreeSet<usize> {
        self.pairs.iter().flat_map(|p| p.body.slots()).collect()
    }

    /// Domain entities dropped for lack of a vector, summed over pairs.
    pub fn dropped(&self) -> usize {
        self.pairs.iter().map(|p| p.body.dropped).sum()
    }

    /// Body truth for each pair.
    pub fn body_truths(&self, store: &EmbeddingStore) -> Vec<f64> {
        self.pairs
            .par_iter()
            .map(|p| forward(&p.body, store, &self.config)[p.body.root])
            .collect()
    }

    fn report(&self, bodies: &[f64]) -> (LossReport, Vec<f64>) {
        // Clause truth: implies(s, t) = 1 - s + s*t; its error is s when the
        // head disagrees with the label and 0 otherwise.
        let errors: Vec<f64> = bodies.iter().zip(&self.pairs).map(|(&s, p)| if p.target { 0.0 } else { s }).collect();
        let clauses: Vec<f64> = errors.iter().map(|e| 1.0 - e).collect();
        let loss = pmean(&errors, self.config.p_aggregate);
        let mean_truth = clauses.iter().sum::<f64>() / clauses.len() as f64;
        (LossReport { loss, mean_truth, clauses }, errors)
    }

    pub fn loss(&self, store: &EmbeddingStore) -> LossReport {
        self.report(&self.body_truths(store)).0
    }

    /// Loss and its exact gradient with respect to every referenced vector.
    pub fn loss_and_grad(&self, store: &EmbeddingStore) -> (LossReport, Gradient) {
        let cfg = &self.config;
        let values: Vec<Vec<f64>> = self.pairs.par_iter().map(|p| forward(&p.body, store, cfg)).collect();
        let bodies: Vec<f64> = values.iter().zip(&self.pairs).map(|(v, p)| v[p.body.root]).collect();
        let (report, errors) = self.report(&bodies);
        let m = errors.len() as f64;
        let p = cfg.p_aggregate;
        let loss = report.loss;
        // d loss / d e_j = (e_j / loss)^(p-1) / m
        let partial: Vec<Gradient> = self
            .pairs
            .par_iter()
            .zip(values.par_iter())
            .zip(errors.par_iter())
            .map(|((pair, val), &e)| {
                let mut g = Gradient::default();
                if !pair.target && e > 0.0 && loss > 0.0 {
                    let seed = (e / loss).powf(p - 1.0) / m;
                    backward(&pair.body, val, seed, store, cfg, &mut g);
                }
                g
            })
            .collect();
        let mut total = Gradient::default();
        for g in partial {
            for (slot, v) in g.by_slot {
                total.add(slot, 1.0, &v);
            }
        }
        (report, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_facts;
    use crate::rules::parse_rules;
    use crate::symbol::Sym;
    use approx::assert_abs_diff_eq;

    #[test]
    fn leave_one_out_products() {
        assert_eq!(leave_one_out(&[2.0, 3.0, 5.0]), vec![15.0, 10.0, 6.0]);
        assert_eq!(leave_one_out(&[0.0, 3.0]), vec![3.0, 0.0]);
    }

    /// Four clauses: one rule over four examples. Body truth 0.9 on a
    /// mislabeled example, crisp 0 on the rest.
    #[test]
    fn four_clause_fixture() {
        let kb = parse_facts(
            "w(a, x).\ntarget(a, ham).\ntarget(b, ham).\ntarget(c, ham).\ntarget(d, spam).\n",
        )
        .unwrap();
        let mut store = EmbeddingStore::new(2);
        store.insert(Sym::new("x"), &[1.0, 0.0]).unwrap();
        store.insert(Sym::new("free"), &[1.0, 0.0]).unwrap();
        let rules = parse_rules("spam :- exists W (w(T, W) & similar(W, free)).").unwrap();
        // sigmoid(k * (1 - tau)) = 0.9  =>  k = ln 9 / (1 - tau)
        let tau = 0.5;
        let cfg = FuzzyConfig { steepness: 9f64.ln() / (1.0 - tau), ..FuzzyConfig::new(tau) };
        let r = batch_loss(&rules, &kb, &[0, 1, 2, 3], &store, &cfg).unwrap();
        assert_abs_diff_eq!(r.clauses[0], 0.1, epsilon = 1e-12);
        assert_eq!(&r.clauses[1..], &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(r.loss, 0.45, epsilon = 1e-12);
        assert!(batch_loss(&rules, &kb, &[], &store, &cfg).is_err());
    }

    #[test]
    fn loss_zero_when_bodies_zero_or_heads_agree() {
        let kb = parse_facts("w(a, x).\ntarget(a, spam).\ntarget(b, ham).\n").unwrap();
        let mut store = EmbeddingStore::new(2);
        store.insert(Sym::new("x"), &[1.0, 0.0]).unwrap();
        store.insert(Sym::new("free"), &[0.0, 1.0]).unwrap();
        let rules = parse_rules("spam :- exists W (w(T, W) & similar(W, free)).").unwrap();
        let batch = ground_batch(&rules, &kb, &[0, 1], &store, &FuzzyConfig::new(0.5)).unwrap();
        let (r, g) = batch.loss_and_grad(&store);
        assert_eq!(r.loss, 0.0);
        assert!(g.by_slot.is_empty());
    }
}
