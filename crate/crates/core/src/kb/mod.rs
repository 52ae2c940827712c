//! Ground-fact knowledge bases in the learning-from-interpretations setting.
//!
//! Every example is an [`Interpretation`]: its own bag of ground facts plus a
//! class label carried by a `target(Example, Class)` fact. Facts whose first
//! argument is not an example id are rejected, with the single exception of
//! `similar/2`, which is background knowledge and lives in the attached
//! [`SimilarGrounding`].

mod compile;
mod parse;
mod query;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::embed::SimilarGrounding;
use crate::symbol::Sym;
use crate::syntax::{quote_constant, SyntaxError};

pub use compile::{
    candidate_tokens, compile_omics_dataset, compile_text_dataset, default_stop_words, read_label_file,
    read_text_records, ExpressionThreshold, OmicsConfig, OmicsMatrix, Stemmer, TextConfig,
    TextRecord, Vocabulary,
};
pub use parse::parse_facts;
pub(crate) use parse::TAU_PRAGMA;
pub use query::Substitution;

/// Name of the reserved label predicate.
pub const TARGET: &str = "target";
/// Name of the embedding-backed similarity predicate.
pub const SIMILAR: &str = "similar";
/// The variable that stands for the example under evaluation.
pub const INSTANCE_VAR: &str = "T";

pub fn target_sym() -> Sym {
    Sym::new(TARGET)
}

pub fn similar_sym() -> Sym {
    Sym::new(SIMILAR)
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: fact `{atom}` is not ground")]
    NonGround { line: usize, atom: String },
    #[error("line {line}: example `{example}` already has a target")]
    DuplicateTarget { line: usize, example: String },
    #[error("line {line}: fact `{atom}` refers to unknown example `{example}` (no target/2 fact)")]
    UnknownExample { line: usize, atom: String, example: String },
    #[error("line {line}: `{predicate}` used with arity {found}, expected {expected}")]
    ArityMismatch { line: usize, predicate: String, expected: usize, found: usize },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{predicate}` has arity {expected}, atom has {found} arguments")]
    QueryArity { predicate: String, expected: usize, found: usize },
    #[error("query uses similar/2 but no similarity grounding is attached")]
    NoSimilarGrounding,
    #[error("record {index} has an empty id")]
    EmptyId { index: usize },
    #[error("duplicate example id `{0}`")]
    DuplicateExample(String),
    #[error("no token survived preprocessing; the embedding vocabulary does not match the dataset")]
    EmptyVocabulary,
    #[error("sample axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A logic variable, named by an uppercase identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub Sym);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Sym::new(name))
    }

    pub fn instance() -> Var {
        Var::new(INSTANCE_VAR)
    }

    pub fn is_instance(self) -> bool {
        self.0.as_str() == INSTANCE_VAR
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Const(Sym),
    Var(Var),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(Sym::new(name))
    }

    pub fn as_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(&quote_constant(c.as_str())),
            Term::Var(v) => write!(f, "{v}"),
        }
    }
}

/// A possibly non-ground atom. Arity is `args.len()`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Atom {
    pub predicate: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Atom {
        Atom { predicate: Sym::new(predicate), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_similar(&self) -> bool {
        self.predicate == similar_sym() && self.args.len() == 2
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(*c),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate: self.predicate, args })
    }

    /// Applies `subst`, leaving unbound variables in place.
    pub fn substitute(&self, subst: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate,
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => subst.get(v).map_or(*t, |c| Term::Const(*c)),
                    c => *c,
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GroundAtom {
    pub predicate: Sym,
    pub args: Vec<Sym>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> GroundAtom {
        GroundAtom { predicate: Sym::new(predicate), args: args.iter().map(|a| Sym::new(a)).collect() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&quote_constant(a.as_str()))?;
        }
        f.write_str(")")
    }
}

/// The facts describing one example.
#[derive(Clone, Debug)]
pub struct Interpretation {
    pub id: Sym,
    pub label: Sym,
    facts: Vec<GroundAtom>,
    seen: HashSet<GroundAtom>,
    by_predicate: HashMap<Sym, Vec<usize>>,
}

impl Interpretation {
    pub fn new(id: Sym, label: Sym) -> Self {
        Interpretation { id, label, facts: Vec::new(), seen: HashSet::new(), by_predicate: HashMap::new() }
    }

    /// Adds a fact; returns false if it was already present.
    pub fn insert(&mut self, fact: GroundAtom) -> bool {
        if !self.seen.insert(fact.clone()) {
            return false;
        }
        self.by_predicate.entry(fact.predicate).or_default().push(self.facts.len());
        self.facts.push(fact);
        true
    }

    pub fn facts(&self) -> &[GroundAtom] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &GroundAtom) -> bool {
        self.seen.contains(fact)
    }

    pub fn facts_of(&self, predicate: Sym) -> impl Iterator<Item = &GroundAtom> {
        self.by_predicate.get(&predicate).into_iter().flatten().map(move |&i| &self.facts[i])
    }

    /// Every constant mentioned in a fact, except the example id itself.
    pub fn active_domain(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = self
            .facts
            .iter()
            .flat_map(|f| f.args.iter().copied())
            .filter(|&c| c != self.id)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        out.sort();
        out
    }

    /// Constants in argument position `arg` of `predicate` facts.
    pub fn entities_of(&self, predicate: Sym, arg: usize) -> impl Iterator<Item = Sym> + '_ {
        self.facts_of(predicate).filter_map(move |f| f.args.get(arg).copied())
    }
}

/// A set of labeled interpretations sharing one predicate schema.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    interpretations: Vec<Interpretation>,
    by_id: HashMap<Sym, usize>,
    schema: BTreeMap<Sym, usize>,
    similar: Option<SimilarGrounding>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an empty interpretation; errors if the id is taken.
    pub fn add_example(&mut self, id: Sym, label: Sym) -> Result<usize, KbError> {
        if self.by_id.contains_key(&id) {
            return Err(KbError::DuplicateExample(id.to_string()));
        }
        self.by_id.insert(id, self.interpretations.len());
        self.interpretations.push(Interpretation::new(id, label));
        Ok(self.interpretations.len() - 1)
    }

    /// Adds a fact to the interpretation named by its first argument.
    pub fn add_fact(&mut self, fact: GroundAtom) -> Result<bool, KbError> {
        let arity = fact.args.len();
        match self.schema.get(&fact.predicate) {
            Some(&a) if a != arity => {
                return Err(KbError::ArityMismatch {
                    line: 0,
                    predicate: fact.predicate.to_string(),
                    expected: a,
                    found: arity,
                })
            }
            _ => {}
        }
        let Some(&ix) = fact.args.first().and_then(|id| self.by_id.get(id)) else {
            return Err(KbError::UnknownExample {
                line: 0,
                atom: fact.to_string(),
                example: fact.args.first().map(|s| s.to_string()).unwrap_or_default(),
            });
        };
        self.schema.insert(fact.predicate, arity);
        Ok(self.interpretations[ix].insert(fact))
    }

    /// Declares a predicate without adding facts for it.
    pub fn declare(&mut self, predicate: Sym, arity: usize) {
        self.schema.entry(predicate).or_insert(arity);
    }

    pub fn interpretations(&self) -> &[Interpretation] {
        &self.interpretations
    }

    pub fn len(&self) -> usize {
        self.interpretations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interpretations.is_empty()
    }

    pub fn get(&self, id: Sym) -> Option<&Interpretation> {
        self.by_id.get(&id).map(|&i| &self.interpretations[i])
    }

    pub fn index_of(&self, id: Sym) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn schema(&self) -> &BTreeMap<Sym, usize> {
        &self.schema
    }

    pub fn arity(&self, predicate: Sym) -> Option<usize> {
        if predicate == similar_sym() {
            return Some(2);
        }
        self.schema.get(&predicate).copied()
    }

    pub fn similar(&self) -> Option<&SimilarGrounding> {
        self.similar.as_ref()
    }

    pub fn attach_similar(&mut self, grounding: SimilarGrounding) {
        self.similar = Some(grounding);
    }

    pub fn detach_similar(&mut self) -> Option<SimilarGrounding> {
        self.similar.take()
    }

    /// Sorted set of class labels.
    pub fn classes(&self) -> Vec<Sym> {
        let mut c: Vec<Sym> = self.interpretations.iter().map(|i| i.label).collect::<HashSet<_>>().into_iter().collect();
        c.sort();
        c
    }

    /// Sorted set of entities (non-example constants) across all facts.
    pub fn entities(&self) -> Vec<Sym> {
        let mut out: HashSet<Sym> = HashSet::new();
        for interp in &self.interpretations {
            out.extend(interp.active_domain());
        }
        let mut v: Vec<Sym> = out.into_iter().collect();
        v.sort();
        v
    }

    /// A new KB holding copies of the interpretations at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> KnowledgeBase {
        let mut kb = KnowledgeBase { schema: self.schema.clone(), similar: self.similar.clone(), ..Default::default() };
        for &i in indices {
            let interp = self.interpretations[i].clone();
            kb.by_id.insert(interp.id, kb.interpretations.len());
            kb.interpretations.push(interp);
        }
        kb
    }

    /// Renders the KB in the fact-file format accepted by [`parse_facts`].
    pub fn to_fact_text(&self) -> String {
        let mut out = String::new();
        for interp in &self.interpretations {
            for f in interp.facts() {
                out.push_str(&format!("{f}.\n"));
            }
            out.push_str(&format!(
                "{}({}, {}).\n",
                TARGET,
                quote_constant(interp.id.as_str()),
                quote_constant(interp.label.as_str())
            ));
        }
        if let Some(g) = &self.similar {
            out.push_str(&g.to_fact_text());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpretation_dedups_facts() {
        let mut i = Interpretation::new(Sym::new("e"), Sym::new("c"));
        assert!(i.insert(GroundAtom::new("p", &["e", "a"])));
        assert!(!i.insert(GroundAtom::new("p", &["e", "a"])));
        assert_eq!(i.len(), 1);
        assert_eq!(i.active_domain(), vec![Sym::new("a")]);
    }

    #[test]
    fn add_fact_requires_known_example() {
        let mut kb = KnowledgeBase::new();
        kb.add_example(Sym::new("e1"), Sym::new("pos")).unwrap();
        assert!(kb.add_fact(GroundAtom::new("p", &["e1", "a"])).unwrap());
        assert!(matches!(kb.add_fact(GroundAtom::new("p", &["e2", "a"])), Err(KbError::UnknownExample { .. })));
        assert!(matches!(kb.add_fact(GroundAtom::new("p", &["e1"])), Err(KbError::ArityMismatch { .. })));
    }
}
