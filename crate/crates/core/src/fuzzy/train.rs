//! Embedding refinement with Adam and crisp validation checkpoints.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embed::{ground_similar_anchored, EmbeddingStore, SimilarityConfig};
use crate::harness::{metrics, Metrics};
use crate::induce::{classify, LogicalDecisionTree};
use crate::kb::KnowledgeBase;
use crate::rules::{crisp_eval, RuleSet};
use crate::symbol::Sym;

use super::grad::{ground_batch, Gradient};
use super::{FuzzyConfig, FuzzyError};

/// Which vectors the optimizer may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Only constants compared against in `similar/2` atoms of the rules.
    ConstantsOnly,
    /// Every entity in a training domain, plus the constants.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Epochs without a validation F1 improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_max_epochs() -> usize {
    500
}
fn default_patience() -> usize {
    20
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimConfig {
    pub fn new(learning_rate: f64) -> Self {
        OptimConfig {
            learning_rate,
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    fn validate(&self) -> Result<(), FuzzyError> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FuzzyError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub fuzzy: FuzzyConfig,
    pub optim: OptimConfig,
    pub variant: Variant,
    /// Class whose F1 selects the checkpoint.
    pub positive_class: Sym,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_sat: f64,
    pub val_f1: f64,
    pub val_acc: f64,
}

impl TraceRow {
    pub fn write_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneResult {
    /// Snapshot with the best validation F1 (earliest on ties).
    pub store: EmbeddingStore,
    pub trace: Vec<TraceRow>,
    pub best_epoch: usize,
    /// Entities whose vectors the optimizer was allowed to move.
    pub trainable: Vec<Sym>,
    /// Sum over epochs of each entity's gradient norm (masked or not).
    pub grad_norms: BTreeMap<Sym, f64>,
    /// Domain entities without a vector, over all training pairs.
    pub dropped: usize,
}

/// What crisp validation classifies with.
#[derive(Clone, Copy, Debug)]
pub enum Classifier<'a> {
    Tree(&'a LogicalDecisionTree),
    Rules(&'a RuleSet),
}

impl Classifier<'_> {
    /// Constants the classifier compares against through `similar/2`.
    pub fn constants(&self) -> Vec<Sym> {
        match self {
            Classifier::Tree(t) => t.similar_constants(),
            Classifier::Rules(r) => r.similar_constants(),
        }
    }

    pub fn classify_all(&self, kb: &KnowledgeBase) -> Result<Vec<Sym>, FuzzyError> {
        kb.interpretations()
            .iter()
            .map(|i| match self {
                Classifier::Tree(t) => Ok(classify(t, i, kb)?),
                Classifier::Rules(r) => Ok(crisp_eval(r, i, kb)?),
            })
            .collect()
    }
}

/// Regrounds `similar/2` on `kb` with `store` at the configured threshold,
/// anchored on the classifier's constants, and classifies every example.
/// Entities without a vector are similar to nothing.
pub fn apply_refined(
    classifier: Classifier<'_>,
    store: &EmbeddingStore,
    kb: &KnowledgeBase,
    similarity: &SimilarityConfig,
) -> Result<Vec<Sym>, FuzzyError> {
    let mut kb = kb.clone();
    let grounding = ground_similar_anchored(store, &kb.entities(), &classifier.constants(), similarity)?;
    kb.attach_similar(grounding);
    classifier.classify_all(&kb)
}

fn evaluate(
    classifier: Classifier<'_>,
    store: &EmbeddingStore,
    val: &KnowledgeBase,
    cfg: &FinetuneConfig,
) -> Result<Metrics, FuzzyError> {
    let preds = apply_refined(classifier, store, val, &cfg.fuzzy.similarity())?;
    let labels: Vec<Sym> = val.interpretations().iter().map(|i| i.label).collect();
    Ok(metrics(&preds, &labels, cfg.positive_class).expect("one prediction per example"))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Refines embeddings so that the rule set's implications hold on `train`.
///
/// Epoch 0 is the unrefined store. Each later epoch takes one full-batch
/// Adam step on the trainable vectors, then reclassifies `val` crisply. The
/// returned store is the snapshot with the best validation F1.
pub fn finetune(
    rules: &RuleSet,
    classifier: Classifier<'_>,
    train: &KnowledgeBase,
    val: &KnowledgeBase,
    store: &EmbeddingStore,
    cfg: &FinetuneConfig,
) -> Result<FinetuneResult, FuzzyError> {
    cfg.optim.validate()?;
    if val.is_empty() {
        return Err(FuzzyError::InvalidConfig("validation set is empty".into()));
    }
    let all: Vec<usize> = (0..train.len()).collect();
    let batch = ground_batch(rules, train, &all, store, &cfg.fuzzy)?;

    let constants: BTreeSet<usize> = rules.similar_constants().into_iter().filter_map(|c| store.slot(c)).collect();
    let trainable: Vec<usize> = match cfg.variant {
        Variant::ConstantsOnly => constants.into_iter().collect(),
        Variant::All => batch.slots().into_iter().chain(constants).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let dim = store.dim();
    let mut current = store.clone();
    current.clear_trainable();
    for &s in &trainable {
        current.set_trainable(current.tokens()[s], true);
    }
    let mut adam = Adam { m: vec![0.0; trainable.len() * dim], v: vec![0.0; trainable.len() * dim], t: 0 };
    let mut grad_norms: BTreeMap<Sym, f64> = BTreeMap::new();

    let (mut report, mut grad) = batch.loss_and_grad(&current);
    check_finite(report.loss, &grad, 0)?;
    let m0 = evaluate(classifier, &current, val, cfg)?;
    let mut trace = vec![TraceRow { epoch: 0, loss: report.loss, train_sat: 1.0 - report.loss, val_f1: m0.f1, val_acc: m0.accuracy }];
    let (mut best_f1, mut best_epoch, mut best) = (m0.f1, 0, current.clone());

    for epoch in 1..=cfg.optim.max_epochs {
        accumulate_norms(&grad, &current, &mut grad_norms);
        step(&mut adam, &cfg.optim, &trainable, &grad, &mut current, dim);
        (report, grad) = batch.loss_and_grad(&current);
        check_finite(report.loss, &grad, epoch)?;
        let m = evaluate(classifier, &current, val, cfg)?;
        trace.push(TraceRow { epoch, loss: report.loss, train_sat: 1.0 - report.loss, val_f1: m.f1, val_acc: m.accuracy });
        log::debug!("epoch {epoch}: loss {:.6} val_f1 {:.4}", report.loss, m.f1);
        if m.f1 > best_f1 {
            (best_f1, best_epoch, best) = (m.f1, epoch, current.clone());
        } else if epoch - best_epoch >= cfg.optim.patience {
            break;
        }
    }
    Ok(FinetuneResult {
        store: best,
        trace,
        best_epoch,
        trainable: trainable.iter().map(|&s| store.tokens()[s]).collect(),
        grad_norms,
        dropped: batch.dropped(),
    })
}

fn check_finite(loss: f64, grad: &Gradient, epoch: usize) -> Result<(), FuzzyError> {
    if loss.is_finite() && grad.is_finite() {
        Ok(())
    } else {
        Err(FuzzyError::Diverged { epoch })
    }
}

fn accumulate_norms(grad: &Gradient, store: &EmbeddingStore, out: &mut BTreeMap<Sym, f64>) {
    for (&slot, g) in &grad.by_slot {
        *out.entry(store.tokens()[slot]).or_default() += g.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
}

fn step(adam: &mut Adam, cfg: &OptimConfig, trainable: &[usize], grad: &Gradient, store: &mut EmbeddingStore, dim: usize) {
    adam.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(adam.t);
    let bc2 = 1.0 - cfg.beta2.powi(adam.t);
    for (k, &slot) in trainable.iter().enumerate() {
        let Some(g) = grad.get(slot) else {
            // Moments still decay for parameters without gradient.
            for i in 0..dim {
                adam.m[k * dim + i] *= cfg.beta1;
                adam.v[k * dim + i] *= cfg.beta2;
            }
            apply(adam, cfg, k, dim, bc1, bc2, store.row_mut(slot));
            continue;
        };
        for i in 0..dim {
            let j = k * dim + i;
            adam.m[j] = cfg.beta1 * adam.m[j] + (1.0 - cfg.beta1) * g[i];
            adam.v[j] = cfg.beta2 * adam.v[j] + (1.0 - cfg.beta2) * g[i] * g[i];
        }
        apply(adam, cfg, k, dim, bc1, bc2, store.row_mut(slot));
    }
}

fn apply(adam: &Adam, cfg: &OptimConfig, k: usize, dim: usize, bc1: f64, bc2: f64, row: &mut [f64]) {
    if cfg.learning_rate == 0.0 {
        return;
    }
    for (i, x) in row.iter_mut().enumerate() {
        let j = k * dim + i;
        let mhat = adam.m[j] / bc1;
        let vhat = adam.v[j] / bc2;
        *x -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ground_similar;
    use crate::induce::parse_tree;
    use crate::kb::parse_facts;
    use crate::rules::convert_tree_to_rules;

    /// Two positives use `cash`, which starts just outside the tau-ball of
    /// the rule constant `free`.
    fn fixture() -> (KnowledgeBase, EmbeddingStore, LogicalDecisionTree) {
        let kb = parse_facts(
            "w(a, free).\ntarget(a, spam).\nw(b, cash).\ntarget(b, spam).\nw(c, mum).\ntarget(c, ham).\nw(d, dad).\ntarget(d, ham).\n",
        )
        .unwrap();
        let mut store = EmbeddingStore::new(3);
        store.insert(Sym::new("free"), &[1.0, 0.0, 0.1]).unwrap();
        store.insert(Sym::new("cash"), &[0.6, 0.8, 0.0]).unwrap();
        store.insert(Sym::new("mum"), &[0.0, 0.2, 1.0]).unwrap();
        store.insert(Sym::new("dad"), &[-0.1, 0.1, 1.0]).unwrap();
        let tree = parse_tree("node: w(T, X1), similar(X1, free)\nyes:\n  leaf: spam\nno:\n  leaf: ham\n").unwrap();
        (kb, store, tree)
    }

    fn config(variant: Variant, lr: f64) -> FinetuneConfig {
        FinetuneConfig {
            fuzzy: FuzzyConfig::new(0.8),
            optim: OptimConfig { max_epochs: 60, ..OptimConfig::new(lr) },
            variant,
            positive_class: Sym::new("spam"),
        }
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (kb, store, tree) = fixture();
        let rules = convert_tree_to_rules(&tree);
        let r = finetune(&rules, Classifier::Tree(&tree), &kb, &kb, &store, &config(Variant::All, 0.0)).unwrap();
        assert_eq!(r.store.to_text(), store.to_text());
        assert_eq!(r.best_epoch, 0);
        assert!(r.trace.iter().all(|t| t.loss == r.trace[0].loss && t.val_f1 == r.trace[0].val_f1));
        assert_eq!(r.trace.len(), 21);
    }

    #[test]
    fn constants_only_preserves_other_vectors() {
        let (kb, store, tree) = fixture();
        let rules = convert_tree_to_rules(&tree);
        let r = finetune(&rules, Classifier::Tree(&tree), &kb, &kb, &store, &config(Variant::ConstantsOnly, 0.05)).unwrap();
        assert_eq!(r.trainable, vec![Sym::new("free")]);
        for t in ["cash", "mum", "dad"] {
            let (a, b) = (r.store.vector(Sym::new(t)).unwrap(), store.vector(Sym::new(t)).unwrap());
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert!(r.grad_norms.contains_key(&Sym::new("cash")));
    }

    #[test]
    fn refinement_pulls_positive_into_ball() {
        let (kb, store, tree) = fixture();
        let rules = convert_tree_to_rules(&tree);
        let before = apply_refined(Classifier::Tree(&tree), &store, &kb, &SimilarityConfig::new(0.8).unwrap()).unwrap();
        assert_eq!(before[1], Sym::new("ham"));
        let r = finetune(&rules, Classifier::Tree(&tree), &kb, &kb, &store, &config(Variant::All, 0.05)).unwrap();
        assert!(r.best_epoch > 0);
        assert_eq!(r.trace[r.best_epoch].val_f1, 1.0);
        let after = apply_refined(Classifier::Tree(&tree), &r.store, &kb, &SimilarityConfig::new(0.8).unwrap()).unwrap();
        let labels: Vec<Sym> = kb.interpretations().iter().map(|i| i.label).collect();
        assert_eq!(after, labels);
    }

    #[test]
    fn unchanged_store_reproduces_predictions() {
        let (mut kb, store, tree) = fixture();
        let sim = SimilarityConfig::new(0.8).unwrap();
        let via_apply = apply_refined(Classifier::Tree(&tree), &store, &kb, &sim).unwrap();
        kb.attach_similar(ground_similar(&store, &kb.entities(), &sim).unwrap());
        let direct: Vec<Sym> = kb.interpretations().iter().map(|i| classify(&tree, i, &kb).unwrap()).collect();
        assert_eq!(via_apply, direct);
    }

    #[test]
    fn moving_a_token_flips_its_path() {
        let (kb, mut store, tree) = fixture();
        let sim = SimilarityConfig::new(0.8).unwrap();
        assert_eq!(apply_refined(Classifier::Tree(&tree), &store, &kb, &sim).unwrap()[2], Sym::new("ham"));
        store.set_vector(Sym::new("mum"), &[0.95, 0.0, 0.2]).unwrap();
        assert_eq!(apply_refined(Classifier::Tree(&tree), &store, &kb, &sim).unwrap()[2], Sym::new("spam"));
    }

    #[test]
    fn oov_token_is_similar_to_nothing() {
        let (kb, store, tree) = fixture();
        let mut small = EmbeddingStore::new(3);
        small.insert(Sym::new("free"), store.vector(Sym::new("free")).unwrap()).unwrap();
        let preds = apply_refined(Classifier::Tree(&tree), &small, &kb, &SimilarityConfig::new(0.8).unwrap()).unwrap();
        assert_eq!(preds, ["spam", "ham", "ham", "ham"].map(Sym::new));
    }
}
