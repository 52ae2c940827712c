//! Pretrained entity vectors, cosine geometry and the `similar/2` grounding.
//!
//! `similar(X, Y)` holds iff `cos(X, Y) >= tau`. Groundings are materialized
//! in both orientations and include reflexive pairs.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::Vocabulary;
use crate::symbol::Sym;
use crate::syntax::quote_constant;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vector has {found} components, expected {expected}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate token `{token}`")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: token `{token}` has an all-zero vector")]
    ZeroVector { line: usize, token: String },
    #[error("embedding stream is empty")]
    Empty,
    #[error("header declares {declared} vectors but {found} were read")]
    CountMismatch { declared: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine of a zero-norm vector")]
    ZeroNorm,
    #[error("entity `{0}` has no embedding")]
    UnknownEntity(String),
    #[error("invalid similarity configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token → vector table with a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    tokens: Vec<Sym>,
    index: HashMap<Sym, usize>,
    data: Vec<f64>,
    trainable: Vec<bool>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, tokens: Vec::new(), index: HashMap::new(), data: Vec::new(), trainable: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> &[Sym] {
        &self.tokens
    }

    pub fn contains(&self, token: Sym) -> bool {
        self.index.contains_key(&token)
    }

    pub fn slot(&self, token: Sym) -> Option<usize> {
        self.index.get(&token).copied()
    }

    pub fn vector(&self, token: Sym) -> Option<&[f64]> {
        self.slot(token).map(|i| self.row(i))
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn row_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Adds a vector; rejects wrong lengths, zero vectors and duplicates.
    pub fn insert(&mut self, token: Sym, vector: &[f64]) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::Ragged { line: 0, expected: self.dim, found: vector.len() });
        }
        if vector.iter().all(|&x| x == 0.0) {
            return Err(EmbedError::ZeroVector { line: 0, token: token.to_string() });
        }
        if self.index.contains_key(&token) {
            return Err(EmbedError::DuplicateToken { line: 0, token: token.to_string() });
        }
        self.index.insert(token, self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        self.trainable.push(false);
        Ok(())
    }

    /// Overwrites an existing vector.
    pub fn set_vector(&mut self, token: Sym, vector: &[f64]) -> Result<(), EmbedError> {
        let slot = self.slot(token).ok_or_else(|| EmbedError::UnknownEntity(token.to_string()))?;
        if vector.len() != self.dim {
            return Err(EmbedError::DimensionMismatch(vector.len(), self.dim));
        }
        self.row_mut(slot).copy_from_slice(vector);
        Ok(())
    }

    pub fn set_trainable(&mut self, token: Sym, trainable: bool) {
        if let Some(s) = self.slot(token) {
            self.trainable[s] = trainable;
        }
    }

    pub fn clear_trainable(&mut self) {
        self.trainable.iter_mut().for_each(|t| *t = false);
    }

    pub fn is_trainable(&self, token: Sym) -> bool {
        self.slot(token).is_some_and(|s| self.trainable[s])
    }

    pub fn trainable_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.trainable.iter().enumerate().filter(|(_, &t)| t).map(|(i, _)| i)
    }

    /// Cosine between two stored entities, `None` if either is missing.
    pub fn cosine_of(&self, a: Sym, b: Sym) -> Option<f64> {
        let (u, v) = (self.vector(a)?, self.vector(b)?);
        cosine(u, v).ok()
    }

    /// A store restricted to `keep` (in this store's order).
    pub fn restricted(&self, keep: &HashSet<Sym>) -> EmbeddingStore {
        let mut out = EmbeddingStore::new(self.dim);
        for (i, &t) in self.tokens.iter().enumerate() {
            if keep.contains(&t) {
                out.insert(t, self.row(i)).expect("rows of a valid store are valid");
                let last = out.len() - 1;
                out.trainable[last] = self.trainable[i];
            }
        }
        out
    }

    /// Token-vector text with an `N D` header. Components use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t.as_str());
            for x in self.row(i) {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl Vocabulary for EmbeddingStore {
    fn contains_token(&self, token: &str) -> bool {
        Sym::get(token).is_some_and(|s| self.contains(s))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let n = parts.next()?.parse().ok()?;
    let d = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((n, d))
}

/// Loads a whitespace-delimited token-vector stream with an optional
/// `count dim` header line.
pub fn load_embeddings<R: Read>(source: R) -> Result<EmbeddingStore, EmbedError> {
    load_embeddings_filtered(source, |_| true)
}

/// Like [`load_embeddings`] but only keeps tokens accepted by `keep`.
/// Skipped lines are still counted against the header.
pub fn load_embeddings_filtered<R: Read>(source: R, keep: impl Fn(&str) -> bool) -> Result<EmbeddingStore, EmbedError> {
    let reader = BufReader::new(source);
    let mut header: Option<(usize, usize)> = None;
    let mut dim: Option<usize> = None;
    let mut store: Option<EmbeddingStore> = None;
    let mut seen_tokens: HashSet<String> = HashSet::new();
    let mut count = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Some(h) = parse_header(&line) {
                header = Some(h);
                dim = Some(h.1);
                continue;
            }
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line").to_owned();
        let n_components = parts.clone().count();
        let d = *dim.get_or_insert(n_components);
        if n_components != d {
            return Err(EmbedError::Ragged { line: lineno, expected: d, found: n_components });
        }
        if d == 0 {
            return Err(EmbedError::Parse { line: lineno, message: "vector has no components".into() });
        }
        count += 1;
        if !seen_tokens.insert(token.clone()) {
            return Err(EmbedError::DuplicateToken { line: lineno, token });
        }
        if !keep(&token) {
            continue;
        }
        let vector = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| EmbedError::Parse { line: lineno, message: format!("`{p}` is not a number") })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::Parse { line: lineno, message: "non-finite component".into() });
        }
        let st = store.get_or_insert_with(|| EmbeddingStore::new(d));
        st.insert(Sym::new(&token), &vector).map_err(|e| match e {
            EmbedError::ZeroVector { token, .. } => EmbedError::ZeroVector { line: lineno, token },
            other => other,
        })?;
    }
    if let Some((n, _)) = header {
        if n != count {
            return Err(EmbedError::CountMismatch { declared: n, found: count });
        }
    }
    if count == 0 {
        return Err(EmbedError::Empty);
    }
    Ok(store.unwrap_or_else(|| EmbeddingStore::new(dim.unwrap_or(0))))
}

/// Token set of a token-vector stream, without parsing the vectors.
pub fn read_vocabulary<R: Read>(source: R) -> Result<HashSet<String>, EmbedError> {
    let mut out = HashSet::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if i == 0 && parse_header(&line).is_some() {
            continue;
        }
        if let Some(tok) = line.split_whitespace().next() {
            out.insert(tok.to_owned());
        }
    }
    Ok(out)
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::DimensionMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

#[inline]
pub(crate) fn cosine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    pub tau: f64,
    /// Slope `k` of the fuzzy relaxation `sigmoid(k * (cos - tau))`.
    #[serde(default = "default_steepness")]
    pub steepness: f64,
}

fn default_steepness() -> f64 {
    10.0
}

impl SimilarityConfig {
    pub fn new(tau: f64) -> Result<Self, EmbedError> {
        let c = SimilarityConfig { tau, steepness: default_steepness() };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if !(self.tau > -1.0 && self.tau < 1.0) {
            return Err(EmbedError::InvalidConfig(format!("tau = {} must lie in (-1, 1)", self.tau)));
        }
        if !(self.steepness > 0.0 && self.steepness.is_finite()) {
            return Err(EmbedError::InvalidConfig(format!("steepness = {} must be positive", self.steepness)));
        }
        Ok(())
    }
}

/// Materialized `similar/2` relation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarGrounding {
    tau: Option<f64>,
    adjacency: HashMap<Sym, HashSet<Sym>>,
}

impl SimilarGrounding {
    /// Builds a grounding from pairs, adding the reverse of each pair.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Sym, Sym)>, tau: Option<f64>) -> Self {
        let mut g = SimilarGrounding { tau, adjacency: HashMap::new() };
        for (a, b) in pairs {
            g.insert(a, b);
        }
        g
    }

    fn insert(&mut self, a: Sym, b: Sym) {
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn holds(&self, a: Sym, b: Sym) -> bool {
        self.adjacency.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Entities related to `a`, sorted by name.
    pub fn neighbors_sorted(&self, a: Sym) -> Vec<Sym> {
        let mut v: Vec<Sym> = self.adjacency.get(&a).into_iter().flatten().copied().collect();
        v.sort();
        v
    }

    /// Every ordered pair, sorted.
    pub fn pairs_sorted(&self) -> Vec<(Sym, Sym)> {
        let mut v: Vec<(Sym, Sym)> = self.adjacency.iter().flat_map(|(&a, n)| n.iter().map(move |&b| (a, b))).collect();
        v.sort();
        v
    }

    /// Number of ordered pairs.
    pub fn len(&self) -> usize {
        self.adjacency.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Merges another grounding into this one.
    pub fn extend(&mut self, other: &SimilarGrounding) {
        for (a, b) in other.pairs_sorted() {
            self.insert(a, b);
        }
    }

    /// `similar(a, b).` lines, sorted, preceded by a threshold comment.
    pub fn to_fact_text(&self) -> String {
        let mut out = String::new();
        if let Some(t) = self.tau {
            out.push_str(&format!("{} {}\n", crate::kb::TAU_PRAGMA, t));
        }
        for (a, b) in self.pairs_sorted() {
            out.push_str(&format!("similar({}, {}).\n", quote_constant(a.as_str()), quote_constant(b.as_str())));
        }
        out
    }
}

/// Exact all-pairs grounding over `entities` (reflexive and symmetric).
pub fn ground_similar(store: &EmbeddingStore, entities: &[Sym], config: &SimilarityConfig) -> Result<SimilarGrounding, EmbedError> {
    config.validate()?;
    let mut ents: Vec<Sym> = entities.to_vec();
    ents.sort();
    ents.dedup();
    let slots = ents
        .iter()
        .map(|&e| store.slot(e).ok_or_else(|| EmbedError::UnknownEntity(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let norms: Vec<f64> = slots.iter().map(|&s| norm(store.row(s))).collect();
    let rows: Vec<Vec<(Sym, Sym)>> = (0..ents.len())
        .into_par_iter()
        .map(|i| {
            let u = store.row(slots[i]);
            (i..ents.len())
                .filter(|&j| cosine_with_norms(u, store.row(slots[j]), norms[i], norms[j]) >= config.tau)
                .map(|j| (ents[i], ents[j]))
                .collect()
        })
        .collect();
    Ok(SimilarGrounding::from_pairs(rows.into_iter().flatten(), Some(config.tau)))
}

/// Grounding restricted to pairs with at least one side in `anchors`.
///
/// Entities without a vector are skipped, so `similar/2` is false for them.
pub fn ground_similar_anchored(
    store: &EmbeddingStore,
    entities: &[Sym],
    anchors: &[Sym],
    config: &SimilarityConfig,
) -> Result<SimilarGrounding, EmbedError> {
    config.validate()?;
    let mut anchors: Vec<(Sym, usize, f64)> = anchors
        .iter()
        .filter_map(|&a| store.slot(a).map(|s| (a, s, norm(store.row(s)))))
        .collect();
    anchors.sort_by_key(|a| a.0);
    anchors.dedup_by_key(|a| a.0);
    let mut ents: Vec<Sym> = entities.iter().copied().chain(anchors.iter().map(|a| a.0)).collect();
    ents.sort();
    ents.dedup();
    let rows: Vec<Vec<(Sym, Sym)>> = ents
        .par_iter()
        .map(|&e| {
            let Some(s) = store.slot(e) else { return Vec::new() };
            let u = store.row(s);
            let nu = norm(u);
            anchors
                .iter()
                .filter(|(_, t, nt)| cosine_with_norms(u, store.row(*t), nu, *nt) >= config.tau)
                .map(|(a, _, _)| (e, *a))
                .collect()
        })
        .collect();
    Ok(SimilarGrounding::from_pairs(rows.into_iter().flatten(), Some(config.tau)))
}

/// The `k` entities most similar to `entity`, best first; ties by name.
pub fn neighbors(store: &EmbeddingStore, entity: Sym, k: usize) -> Result<Vec<(Sym, f64)>, EmbedError> {
    let u = store.vector(entity).ok_or_else(|| EmbedError::UnknownEntity(entity.to_string()))?;
    let nu = norm(u);
    let mut scored: Vec<(Sym, f64)> = store
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t != entity)
        .map(|(i, &t)| {
            let v = store.row(i);
            (t, cosine_with_norms(u, v, nu, norm(v)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn store(rows: &[(&str, &[f64])]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(rows[0].1.len());
        for (t, v) in rows {
            s.insert(Sym::new(t), v).unwrap();
        }
        s
    }

    #[test]
    fn load_two_lines() {
        let s = load_embeddings("a 1 0 0\nb 0 1 0.5\n".as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
    }

    #[test]
    fn load_rejections() {
        let header = "5 200\n".to_string() + &(0..4).map(|i| format!("t{i} 1 2\n")).collect::<String>();
        assert!(matches!(load_embeddings(header.as_bytes()), Err(EmbedError::Ragged { .. }) | Err(EmbedError::CountMismatch { .. })));
        let header = "5 2\n".to_string() + &(0..4).map(|i| format!("t{i} 1 2\n")).collect::<String>();
        assert!(matches!(load_embeddings(header.as_bytes()), Err(EmbedError::CountMismatch { declared: 5, found: 4 })));
        assert!(matches!(load_embeddings("a 1 2\na 3 4\n".as_bytes()), Err(EmbedError::DuplicateToken { line: 2, .. })));
        assert!(matches!(load_embeddings("a 1 2\nb 3\n".as_bytes()), Err(EmbedError::Ragged { line: 2, .. })));
        assert!(matches!(load_embeddings("a 0 0\n".as_bytes()), Err(EmbedError::ZeroVector { line: 1, .. })));
        assert!(matches!(load_embeddings("".as_bytes()), Err(EmbedError::Empty)));
        assert!(matches!(load_embeddings("a 1 x\n".as_bytes()), Err(EmbedError::Parse { line: 1, .. })));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = store(&[("a", &[0.1, -2.5e-7, 3.0]), ("b", &[1.0 / 3.0, 2.0, -0.7])]);
        let back = load_embeddings(s.to_text().as_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1., 0.], &[1., 0.]).unwrap(), 1.0);
        assert_eq!(cosine(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine(&[1., 1.], &[1., 0.]).unwrap(), 0.70710678, epsilon = 1e-8);
        assert!(matches!(cosine(&[1., 0.], &[1.]), Err(EmbedError::DimensionMismatch(2, 1))));
        assert!(matches!(cosine(&[0., 0.], &[1., 0.]), Err(EmbedError::ZeroNorm)));
    }

    /// Two vectors at an angle whose cosine is exactly 0.9 up to rounding.
    fn pair_fixture() -> EmbeddingStore {
        let c: f64 = 0.9;
        store(&[("a", &[1.0, 0.0]), ("b", &[c, (1.0 - c * c).sqrt()])])
    }

    #[test]
    fn grounding_examples() {
        let s = pair_fixture();
        let ents = [Sym::new("a"), Sym::new("b")];
        let g = ground_similar(&s, &ents, &SimilarityConfig::new(0.75).unwrap()).unwrap();
        assert_eq!(g.len(), 4);
        let g = ground_similar(&s, &ents, &SimilarityConfig::new(0.95).unwrap()).unwrap();
        assert_eq!(g.pairs_sorted(), vec![(ents[0], ents[0]), (ents[1], ents[1])]);
        let g = ground_similar(&s, &ents[..1], &SimilarityConfig::new(0.95).unwrap()).unwrap();
        assert_eq!(g.pairs_sorted(), vec![(ents[0], ents[0])]);
        let err = ground_similar(&s, &[Sym::new("zzz_missing")], &SimilarityConfig::new(0.5).unwrap()).unwrap_err();
        assert!(err.to_string().contains("zzz_missing"));
    }

    #[test]
    fn grounding_fact_text_reparses() {
        let s = pair_fixture();
        let g = ground_similar(&s, &[Sym::new("a"), Sym::new("b")], &SimilarityConfig::new(0.75).unwrap()).unwrap();
        let kb = crate::kb::parse_facts(&g.to_fact_text()).unwrap();
        assert_eq!(kb.similar().unwrap(), &g);
    }

    #[test]
    fn anchored_grounding_matches_full_on_anchor_pairs() {
        let s = store(&[("a", &[1.0, 0.1]), ("b", &[0.9, 0.3]), ("c", &[0.0, 1.0]), ("d", &[0.2, 1.0])]);
        let ents: Vec<Sym> = s.tokens().to_vec();
        let cfg = SimilarityConfig::new(0.8).unwrap();
        let full = ground_similar(&s, &ents, &cfg).unwrap();
        let anchors = [Sym::new("a"), Sym::new("oov")];
        let anch = ground_similar_anchored(&s, &ents, &anchors, &cfg).unwrap();
        for &e in &ents {
            assert_eq!(full.holds(e, anchors[0]), anch.holds(e, anchors[0]), "{e}");
            assert!(!anch.holds(e, anchors[1]));
        }
    }

    #[test]
    fn neighbor_ranking() {
        let s = store(&[("x", &[1.0, 0.0]), ("y", &[1.0, 1.0]), ("z", &[0.0, 1.0]), ("w", &[1.0, 0.5])]);
        assert!(neighbors(&s, Sym::new("x"), 0).unwrap().is_empty());
        let all = neighbors(&s, Sym::new("x"), 10).unwrap();
        // Brute force: cos(x,w)=0.894, cos(x,y)=0.707, cos(x,z)=0.
        let names: Vec<&str> = all.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, vec!["w", "y", "z"]);
        assert!(matches!(neighbors(&s, Sym::new("nope"), 1), Err(EmbedError::UnknownEntity(_))));
    }

    fn brute_force(vs: &[Vec<f64>], tau: f64) -> HashSet<(usize, usize)> {
        let mut out = HashSet::new();
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                if cosine(&vs[i], &vs[j]).unwrap() >= tau {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    fn vectors() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..40)
            .prop_map(|vs| vs.into_iter().map(|mut v| {
                if v.iter().all(|x| x.abs() < 1e-6) {
                    v[0] = 1.0;
                }
                v
            }).collect())
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_scale_invariant(u in prop::collection::vec(-5.0f64..5.0, 4), v in prop::collection::vec(-5.0f64..5.0, 4), c in 0.01f64..100.0) {
            prop_assume!(norm(&u) > 1e-3 && norm(&v) > 1e-3);
            let a = cosine(&u, &v).unwrap();
            prop_assert!((a - cosine(&v, &u).unwrap()).abs() <= 1e-12);
            let cu: Vec<f64> = u.iter().map(|x| x * c).collect();
            prop_assert!((a - cosine(&cu, &v).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn grounding_equals_brute_force(vs in vectors(), tau in -0.9f64..0.95) {
            let mut s = EmbeddingStore::new(3);
            let names: Vec<Sym> = (0..vs.len()).map(|i| Sym::new(&format!("pg{i}"))).collect();
            for (n, v) in names.iter().zip(&vs) {
                s.insert(*n, v).unwrap();
            }
            let g = ground_similar(&s, &names, &SimilarityConfig::new(tau).unwrap()).unwrap();
            let expected = brute_force(&vs, tau);
            prop_assert_eq!(g.len(), expected.len());
            for &(i, j) in &expected {
                prop_assert!(g.holds(names[i], names[j]));
            }
            for &n in &names {
                prop_assert!(g.holds(n, n));
            }
        }

        #[test]
        fn grounding_is_monotone_in_tau(vs in vectors(), t1 in -0.9f64..0.95, t2 in -0.9f64..0.95) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let mut s = EmbeddingStore::new(3);
            let names: Vec<Sym> = (0..vs.len()).map(|i| Sym::new(&format!("pm{i}"))).collect();
            for (n, v) in names.iter().zip(&vs) {
                s.insert(*n, v).unwrap();
            }
            let g_lo = ground_similar(&s, &names, &SimilarityConfig::new(lo).unwrap()).unwrap();
            let g_hi = ground_similar(&s, &names, &SimilarityConfig::new(hi).unwrap()).unwrap();
            for (a, b) in g_hi.pairs_sorted() {
                prop_assert!(g_lo.holds(a, b));
            }
        }
    }
}
