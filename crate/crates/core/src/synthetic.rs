//! Planted-rule corpora with embedded token clusters.
//!
//! Tokens come in three tight clusters named `a*`, `b*` and `c*`. A message
//! is positive iff one of its tokens has cosine at least `tau` with the
//! hidden constant `a0`. Every `a*` token is rare, so no single token
//! separates the classes, while one `similar/2` test does.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, dot, norm, EmbedError, EmbeddingStore};
use crate::induce::{Conjunction, LogicalDecisionTree, Node};
use crate::kb::{Atom, GroundAtom, KbError, KnowledgeBase, Term};
use crate::harness::{split, HarnessError};
use crate::symbol::Sym;

pub const POSITIVE: &str = "pos";
pub const NEGATIVE: &str = "neg";
pub const PREDICATE: &str = "contains_word";
pub const HIDDEN: &str = "a0";

const CLUSTER_PREFIX: [&str; 3] = ["a", "b", "c"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub dim: usize,
    pub tokens_per_cluster: usize,
    pub messages: usize,
    /// Share of messages that receive an `a*` token.
    pub positive_rate: f64,
    /// Standard deviation of token offsets from their cluster center, relative to the center's unit norm.
    pub spread: f64,
    pub tau: f64,
    pub min_noise_tokens: usize,
    pub max_noise_tokens: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            dim: 16,
            tokens_per_cluster: 80,
            messages: 600,
            positive_rate: 0.4,
            spread: 0.25,
            tau: 0.7,
            min_noise_tokens: 2,
            max_noise_tokens: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub kb: KnowledgeBase,
    pub store: EmbeddingStore,
    pub hidden: Sym,
    /// Tokens of each cluster, in generation order.
    pub clusters: Vec<Vec<Sym>>,
    /// Unit cluster centers.
    pub centers: Vec<Vec<f64>>,
}

impl SyntheticCorpus {
    /// Mean of the vectors of a cluster's tokens.
    pub fn centroid(&self, cluster: usize) -> Vec<f64> {
        centroid(&self.store, &self.clusters[cluster])
    }
}

pub fn centroid(store: &EmbeddingStore, tokens: &[Sym]) -> Vec<f64> {
    let mut c = vec![0.0; store.dim()];
    for &t in tokens {
        if let Some(v) = store.vector(t) {
            c.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
    }
    c.iter_mut().for_each(|a| *a /= tokens.len().max(1) as f64);
    c
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// `k` orthonormal directions by Gram-Schmidt on Gaussian draws.
fn orthonormal(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < k {
        let mut v = gaussian(rng, dim);
        for u in &out {
            let d = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let n = norm(&v);
        if n > 1e-6 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

fn invalid(message: String) -> KbError {
    KbError::Data { context: "synthetic config".into(), message }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus, KbError> {
    if cfg.dim < 3 || cfg.tokens_per_cluster == 0 || cfg.messages < 3 {
        return Err(invalid("need dim >= 3, tokens_per_cluster >= 1 and messages >= 3".into()));
    }
    if cfg.min_noise_tokens > cfg.max_noise_tokens || !(0.0..=1.0).contains(&cfg.positive_rate) {
        return Err(invalid("noise token range or positive_rate out of bounds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = orthonormal(&mut rng, CLUSTER_PREFIX.len(), cfg.dim);
    let mut store = EmbeddingStore::new(cfg.dim);
    let mut clusters = Vec::new();
    let scale = cfg.spread / (cfg.dim as f64).sqrt();
    for (prefix, center) in CLUSTER_PREFIX.iter().zip(&centers) {
        let mut members = Vec::new();
        for j in 0..cfg.tokens_per_cluster {
            let tok = Sym::new(&format!("{prefix}{j}"));
            let v: Vec<f64> = center.iter().map(|c| c + scale * rng.sample::<f64, _>(StandardNormal)).collect();
            store.insert(tok, &v).map_err(|e| invalid(e.to_string()))?;
            members.push(tok);
        }
        clusters.push(members);
    }
    let hidden = Sym::new(HIDDEN);
    let hv = store.vector(hidden).expect("hidden token exists").to_vec();
    let noise: Vec<Sym> = clusters[1].iter().chain(&clusters[2]).copied().collect();

    let mut kb = KnowledgeBase::new();
    kb.declare(Sym::new(PREDICATE), 2);
    let width = cfg.messages.to_string().len();
    for m in 0..cfg.messages {
        let id = format!("m{m:0width$}");
        let mut tokens: Vec<Sym> = Vec::new();
        for _ in 0..rng.random_range(cfg.min_noise_tokens..=cfg.max_noise_tokens) {
            tokens.push(*noise.choose(&mut rng).expect("noise tokens"));
        }
        if rng.random_bool(cfg.positive_rate) {
            tokens.push(*clusters[0].choose(&mut rng).expect("cluster tokens"));
        }
        let positive = tokens
            .iter()
            .any(|&t| cosine(store.vector(t).expect("token has a vector"), &hv).is_ok_and(|c| c >= cfg.tau));
        kb.add_example(Sym::new(&id), Sym::new(if positive { POSITIVE } else { NEGATIVE }))?;
        for t in tokens {
            kb.add_fact(GroundAtom::new(PREDICATE, &[&id, t.as_str()]))?;
        }
    }
    Ok(SyntheticCorpus { kb, store, hidden, clusters, centers })
}

/// The planted rule as a depth-1 tree over `constant`.
pub fn planted_tree(constant: Sym) -> LogicalDecisionTree {
    let x = Term::var("X1");
    let conj = Conjunction(vec![
        Atom::new(PREDICATE, vec![Term::var("T"), x.clone()]),
        Atom::new("similar", vec![x, Term::Const(constant)]),
    ]);
    LogicalDecisionTree { root: Node::test(conj, Node::leaf(Sym::new(POSITIVE)), Node::leaf(Sym::new(NEGATIVE))) }
}

/// Rotates `token` away from its own direction so that its cosine with
/// the original vector becomes `cos_to_original`. The rotation axis is a
/// seeded random direction orthogonal to the vector.
pub fn perturb(store: &mut EmbeddingStore, token: Sym, cos_to_original: f64, seed: u64) -> Result<(), EmbedError> {
    let v = store.vector(token).ok_or_else(|| EmbedError::UnknownEntity(token.to_string()))?.to_vec();
    let n = norm(&v);
    let u: Vec<f64> = v.iter().map(|x| x / n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = loop {
        let mut g = gaussian(&mut rng, v.len());
        let d = dot(&g, &u);
        g.iter_mut().zip(&u).for_each(|(a, b)| *a -= d * b);
        let gn = norm(&g);
        if gn > 1e-6 {
            break g.into_iter().map(|x| x / gn).collect::<Vec<f64>>();
        }
    };
    let (c, s) = (cos_to_original, (1.0 - cos_to_original * cos_to_original).max(0.0).sqrt());
    let moved: Vec<f64> = u.iter().zip(&w).map(|(a, b)| n * (c * a + s * b)).collect();
    store.set_vector(token, &moved)
}

/// A corpus whose hidden constant was rotated away from its cluster after
/// labeling, split into train, validation and test parts. The planted tree
/// over the moved constant misclassifies until refinement pulls it back.
#[derive(Clone, Debug)]
pub struct RefinementFixture {
    pub corpus: SyntheticCorpus,
    /// `corpus.store` with the hidden constant perturbed.
    pub store: EmbeddingStore,
    pub tree: LogicalDecisionTree,
    pub train: KnowledgeBase,
    pub val: KnowledgeBase,
    pub test: KnowledgeBase,
}

pub fn refinement_fixture(
    cfg: &SyntheticConfig,
    cos_to_original: f64,
    perturb_seed: u64,
    split_seed: u64,
) -> Result<RefinementFixture, HarnessError> {
    let corpus = generate(cfg)?;
    let mut store = corpus.store.clone();
    perturb(&mut store, corpus.hidden, cos_to_original, perturb_seed)?;
    let all: Vec<usize> = (0..corpus.kb.len()).collect();
    let (tr, va, te) = split(&all, [0.5, 0.25, 0.25], split_seed)?;
    Ok(RefinementFixture {
        tree: planted_tree(corpus.hidden),
        train: corpus.kb.subset(&tr),
        val: corpus.kb.subset(&va),
        test: corpus.kb.subset(&te),
        store,
        corpus,
    })
}

/// `n` labeled vectors drawn around `k` random centers.
pub fn gaussian_clusters(seed: u64, n: usize, k: usize, dim: usize, spread: f64) -> Vec<(Sym, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| gaussian(&mut rng, dim)).collect();
    (0..n)
        .map(|i| {
            let c = &centers[i % k];
            let v = c.iter().map(|x| x + spread * rng.sample::<f64, _>(StandardNormal)).collect();
            (Sym::new(&format!("v{i}")), v)
        })
        .collect()
}
