//! Grounding a rule body on one interpretation into a flat computation tape.
//!
//! Symbolic atoms act as filters: a quantified variable only ranges over the
//! entities for which the symbolic atoms guarding it hold, and those atoms
//! then drop out of the fuzzy graph. Only `similar/2` atoms stay
//! differentiable.

use std::collections::BTreeSet;

use crate::embed::EmbeddingStore;
use crate::kb::{Atom, GroundAtom, Interpretation, KnowledgeBase, Term, Var};
use crate::rules::{Formula, Rule};
use crate::symbol::Sym;

use super::FuzzyError;

/// One tape entry. Children always precede their parent.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Const(f64),
    /// Fuzzy similarity between two embedding slots.
    Similar { a: usize, b: usize },
    And(Vec<usize>),
    Or(Vec<usize>),
    Not(usize),
    Exists(Vec<usize>),
}

/// Entities a quantifier ranged over for one binding of the outer variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub var: Var,
    pub entities: Vec<Sym>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundedBody {
    pub ops: Vec<Op>,
    pub root: usize,
    pub domains: Vec<Domain>,
    /// Domain entities left out because they have no embedding.
    pub dropped: usize,
}

impl GroundedBody {
    /// Store slots referenced by `similar/2` leaves.
    pub fn slots(&self) -> BTreeSet<usize> {
        self.ops
            .iter()
            .flat_map(|op| match op {
                Op::Similar { a, b } => vec![*a, *b],
                _ => vec![],
            })
            .collect()
    }

    /// The body's value when it does not depend on any vector.
    pub fn constant(&self) -> Option<f64> {
        match self.ops[self.root] {
            Op::Const(c) => Some(c),
            _ => None,
        }
    }
}

pub fn ground_body(rule: &Rule, interp: &Interpretation, kb: &KnowledgeBase, store: &EmbeddingStore) -> Result<GroundedBody, FuzzyError> {
    for a in rule.body.atoms() {
        if !a.is_similar() {
            kb.check_atom(a)?;
        }
    }
    let mut b = Builder { kb, interp, store, ops: Vec::new(), domains: Vec::new(), dropped: 0, active: None };
    let mut env = vec![(Var::instance(), interp.id)];
    let root = b.build(&rule.body, &mut env);
    Ok(GroundedBody { ops: b.ops, root, domains: b.domains, dropped: b.dropped })
}

type Env = Vec<(Var, Sym)>;

fn lookup(env: &Env, v: Var) -> Option<Sym> {
    env.iter().rev().find(|(w, _)| *w == v).map(|(_, c)| *c)
}

struct Builder<'a> {
    kb: &'a KnowledgeBase,
    interp: &'a Interpretation,
    store: &'a EmbeddingStore,
    ops: Vec<Op>,
    domains: Vec<Domain>,
    dropped: usize,
    active: Option<Vec<Sym>>,
}

impl Builder<'_> {
    fn push(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    fn constant(&self, i: usize) -> Option<f64> {
        match self.ops[i] {
            Op::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Replaces everything built since `mark` by a constant.
    fn collapse(&mut self, mark: usize, value: f64) -> usize {
        self.ops.truncate(mark);
        self.push(Op::Const(value))
    }

    fn resolve(env: &Env, t: &Term) -> Option<Sym> {
        match t {
            Term::Const(c) => Some(*c),
            Term::Var(v) => lookup(env, *v),
        }
    }

    fn build(&mut self, f: &Formula, env: &mut Env) -> usize {
        let mark = self.ops.len();
        match f {
            Formula::True => self.push(Op::Const(1.0)),
            Formula::Pred(a) if a.is_similar() => {
                let x = Self::resolve(env, &a.args[0]).and_then(|s| self.store.slot(s));
                let y = Self::resolve(env, &a.args[1]).and_then(|s| self.store.slot(s));
                match (x, y) {
                    (Some(a), Some(b)) => self.push(Op::Similar { a, b }),
                    _ => self.push(Op::Const(0.0)),
                }
            }
            Formula::Pred(a) => {
                let args: Option<Vec<Sym>> = a.args.iter().map(|t| Self::resolve(env, t)).collect();
                let holds = args.is_some_and(|args| self.interp.contains(&GroundAtom { predicate: a.predicate, args }));
                self.push(Op::Const(if holds { 1.0 } else { 0.0 }))
            }
            Formula::And(xs) => {
                let mut kids = Vec::new();
                for x in xs {
                    let k = self.build(x, env);
                    match self.constant(k) {
                        Some(c) if c == 0.0 => return self.collapse(mark, 0.0),
                        Some(c) if c == 1.0 => {}
                        _ => kids.push(k),
                    }
                }
                self.finish(mark, kids, 1.0, Op::And)
            }
            Formula::Or(xs) => {
                let mut kids = Vec::new();
                for x in xs {
                    let k = self.build(x, env);
                    match self.constant(k) {
                        Some(c) if c == 1.0 => return self.collapse(mark, 1.0),
                        Some(c) if c == 0.0 => {}
                        _ => kids.push(k),
                    }
                }
                self.finish(mark, kids, 0.0, Op::Or)
            }
            Formula::Not(x) => {
                let k = self.build(x, env);
                match self.constant(k) {
                    Some(c) => self.collapse(mark, 1.0 - c),
                    None => self.push(Op::Not(k)),
                }
            }
            Formula::Exists(v, body) => {
                let domain = self.domain(*v, body, env);
                let mut kids = Vec::with_capacity(domain.len());
                for &e in &domain {
                    env.push((*v, e));
                    kids.push(self.build(body, env));
                    env.pop();
                }
                self.domains.push(Domain { var: *v, entities: domain });
                if kids.is_empty() {
                    self.collapse(mark, 0.0)
                } else {
                    self.push(Op::Exists(kids))
                }
            }
        }
    }

    fn finish(&mut self, mark: usize, kids: Vec<usize>, unit: f64, make: fn(Vec<usize>) -> Op) -> usize {
        match kids.len() {
            0 => self.collapse(mark, unit),
            1 => kids[0],
            _ => self.push(make(kids)),
        }
    }

    /// Values of `v` satisfying the symbolic atoms that mention `v` and are
    /// otherwise bound; the active domain when there are none. Entities
    /// without a vector are dropped when `v` feeds a `similar/2` atom.
    fn domain(&mut self, v: Var, body: &Formula, env: &Env) -> Vec<Sym> {
        let mut positive = Vec::new();
        positive_atoms(body, &mut positive);
        let guards: Vec<Atom> = positive
            .into_iter()
            .filter(|a| {
                !a.is_similar()
                    && a.vars().any(|w| w == v)
                    && a.vars().all(|w| w == v || lookup(env, w).is_some())
            })
            .cloned()
            .collect();
        let candidates: Vec<Sym> = if guards.is_empty() {
            self.active.get_or_insert_with(|| self.interp.active_domain()).clone()
        } else {
            let mut seen = BTreeSet::new();
            let seed: Env = env.iter().filter(|(w, _)| *w != v).copied().collect();
            self.kb.for_each_solution(self.interp, &guards, &seed, &mut |b| {
                if let Some(&(_, e)) = b.iter().rev().find(|(w, _)| *w == v) {
                    seen.insert(e);
                }
                false
            });
            seen.into_iter().collect()
        };
        let needs_vector = body.atoms().iter().any(|a| a.is_similar() && a.vars().any(|w| w == v));
        if !needs_vector {
            return candidates;
        }
        let before = candidates.len();
        let kept: Vec<Sym> = candidates.into_iter().filter(|e| self.store.contains(*e)).collect();
        self.dropped += before - kept.len();
        kept
    }
}

/// Atoms reachable from `f` through conjunctions and quantifiers only.
fn positive_atoms<'f>(f: &'f Formula, out: &mut Vec<&'f Atom>) {
    match f {
        Formula::Pred(a) => out.push(a),
        Formula::And(xs) => xs.iter().for_each(|x| positive_atoms(x, out)),
        Formula::Exists(_, x) => positive_atoms(x, out),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_facts;
    use crate::rules::{convert_tree_to_rules, parse_rules};

    fn fixture() -> (KnowledgeBase, EmbeddingStore) {
        let kb = parse_facts("w(m1, free).\nw(m1, call).\ntarget(m1, spam).\ntarget(m2, ham).\nw(m3, zzz).\ntarget(m3, ham).\n").unwrap();
        let mut store = EmbeddingStore::new(2);
        store.insert(Sym::new("free"), &[1.0, 0.0]).unwrap();
        store.insert(Sym::new("call"), &[0.0, 1.0]).unwrap();
        (kb, store)
    }

    fn rule(text: &str) -> Rule {
        parse_rules(text).unwrap().rules.remove(0)
    }

    #[test]
    fn filtered_domain() {
        let (kb, store) = fixture();
        let r = rule("spam :- exists W (w(T, W) & similar(W, free)).");
        let g = ground_body(&r, &kb.interpretations()[0], &kb, &store).unwrap();
        assert_eq!(g.domains, vec![Domain { var: Var::new("W"), entities: vec![Sym::new("call"), Sym::new("free")] }]);
        assert_eq!(g.ops.iter().filter(|o| matches!(o, Op::Similar { .. })).count(), 2);
        assert!(matches!(g.ops[g.root], Op::Exists(ref k) if k.len() == 2));
    }

    #[test]
    fn empty_interpretation_gives_zero() {
        let (kb, store) = fixture();
        let r = rule("spam :- exists W (w(T, W) & similar(W, free)).");
        let g = ground_body(&r, &kb.interpretations()[1], &kb, &store).unwrap();
        assert_eq!(g.constant(), Some(0.0));
    }

    #[test]
    fn missing_vectors_are_counted() {
        let (kb, store) = fixture();
        let r = rule("spam :- exists W (w(T, W) & similar(W, free)).");
        let g = ground_body(&r, &kb.interpretations()[2], &kb, &store).unwrap();
        assert_eq!(g.dropped, 1);
        assert_eq!(g.constant(), Some(0.0));
    }

    #[test]
    fn negated_branch_wraps_exists() {
        let (kb, store) = fixture();
        let t = crate::induce::parse_tree(
            "node: w(T, X1), similar(X1, free)\nyes:\n  leaf: spam\nno:\n  node: w(T, X1), similar(X1, call)\n  yes:\n    leaf: spam\n  no:\n    leaf: ham\n",
        )
        .unwrap();
        let rs = convert_tree_to_rules(&t);
        // ham :- ~q1 & ~(q2 & ~q1)
        let g = ground_body(&rs.rules[0], &kb.interpretations()[0], &kb, &store).unwrap();
        let Op::And(ref kids) = g.ops[g.root] else { panic!("{:?}", g.ops[g.root]) };
        let Op::Not(inner) = g.ops[kids[0]] else { panic!() };
        assert!(matches!(g.ops[inner], Op::Exists(_)));
        for d in &g.domains {
            assert_eq!(d.entities, vec![Sym::new("call"), Sym::new("free")]);
        }
    }

    #[test]
    fn ground_symbolic_atoms_become_constants() {
        let (kb, store) = fixture();
        let g = ground_body(&rule("x :- w(T, free) & ~w(T, zzz)."), &kb.interpretations()[0], &kb, &store).unwrap();
        assert_eq!(g.ops, vec![Op::Const(1.0)]);
    }
}
