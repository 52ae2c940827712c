//! Two-valued evaluation of rule bodies.
//!
//! Quantified variables range over the solutions of the positive literals
//! directly under the quantifier block. A variable that no such literal
//! restricts (or that only occurs in `similar/2`) ranges over the active
//! domain of the interpretation.

use crate::kb::{Atom, GroundAtom, Interpretation, KnowledgeBase, Term, Var};
use crate::symbol::Sym;

use super::{Formula, Provenance, RuleError, RuleSet};

type Env = Vec<(Var, Sym)>;

fn lookup(env: &Env, v: Var) -> Option<Sym> {
    env.iter().rev().find(|(w, _)| *w == v).map(|(_, c)| *c)
}

/// Truth of a closed formula (only `T` free) on `interp`.
pub fn crisp_truth(formula: &Formula, interp: &Interpretation, kb: &KnowledgeBase) -> Result<bool, RuleError> {
    for a in formula.atoms() {
        kb.check_atom(a)?;
    }
    let mut env = vec![(Var::instance(), interp.id)];
    Ok(Eval { kb, interp, domain: None }.eval(formula, &mut env))
}

/// Indices of the rules whose bodies hold on `interp`.
pub fn fired_rules(rules: &RuleSet, interp: &Interpretation, kb: &KnowledgeBase) -> Result<Vec<usize>, RuleError> {
    for r in &rules.rules {
        for a in r.body.atoms() {
            kb.check_atom(a)?;
        }
    }
    let mut ev = Eval { kb, interp, domain: None };
    let mut out = Vec::new();
    for (i, r) in rules.rules.iter().enumerate() {
        let mut env = vec![(Var::instance(), interp.id)];
        if ev.eval(&r.body, &mut env) {
            out.push(i);
        }
    }
    Ok(out)
}

/// Class assigned by the rule set.
///
/// Tree-derived sets must fire exactly one rule; anything else is reported
/// as an error because it means the conversion is broken. Hand-crafted sets
/// return the first firing rule's head, else the default class.
pub fn crisp_eval(rules: &RuleSet, interp: &Interpretation, kb: &KnowledgeBase) -> Result<Sym, RuleError> {
    let fired = fired_rules(rules, interp, kb)?;
    match rules.provenance {
        Provenance::TreeDerived => match fired.as_slice() {
            [i] => Ok(rules.rules[*i].head),
            _ => Err(RuleError::NotExclusive { example: interp.id.to_string(), fired: fired.len() }),
        },
        Provenance::HandCrafted => match fired.first() {
            Some(&i) => Ok(rules.rules[i].head),
            None => rules.default_class.ok_or_else(|| RuleError::NoDefault { example: interp.id.to_string() }),
        },
    }
}

struct Eval<'a> {
    kb: &'a KnowledgeBase,
    interp: &'a Interpretation,
    domain: Option<Vec<Sym>>,
}

impl Eval<'_> {
    fn active_domain(&mut self) -> Vec<Sym> {
        self.domain.get_or_insert_with(|| self.interp.active_domain()).clone()
    }

    fn ground(&self, atom: &Atom, env: &Env) -> Option<GroundAtom> {
        let args = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(*c),
                Term::Var(v) => lookup(env, *v),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate: atom.predicate, args })
    }

    fn eval(&mut self, f: &Formula, env: &mut Env) -> bool {
        match f {
            Formula::True => true,
            Formula::Pred(a) => self.ground(a, env).is_some_and(|g| self.kb.holds(self.interp, &g)),
            Formula::And(xs) => xs.iter().all(|x| self.eval(x, env)),
            Formula::Or(xs) => xs.iter().any(|x| self.eval(x, env)),
            Formula::Not(x) => !self.eval(x, env),
            Formula::Exists(..) => {
                let mut vars = Vec::new();
                let mut positive = Vec::new();
                let mut rest = Vec::new();
                flatten(f, &mut vars, &mut positive, &mut rest);
                let unguarded: Vec<Var> = vars
                    .iter()
                    .copied()
                    .filter(|v| !positive.iter().any(|a: &&Atom| !a.is_similar() && a.vars().any(|w| w == *v)))
                    .collect();
                let positive: Vec<Atom> = positive.into_iter().cloned().collect();
                // Quantified names shadow outer bindings of the same name.
                let mut local: Env = env.iter().filter(|(w, _)| !vars.contains(w)).copied().collect();
                self.enumerate_unguarded(&unguarded, &positive, &rest, &mut local)
            }
        }
    }

    fn enumerate_unguarded(&mut self, unguarded: &[Var], positive: &[Atom], rest: &[&Formula], env: &mut Env) -> bool {
        if let Some((&v, tail)) = unguarded.split_first() {
            for e in self.active_domain() {
                env.push((v, e));
                let found = self.enumerate_unguarded(tail, positive, rest, env);
                env.pop();
                if found {
                    return true;
                }
            }
            return false;
        }
        if rest.is_empty() {
            return self.kb.succeeds_unchecked(self.interp, positive, env);
        }
        let (kb, interp) = (self.kb, self.interp);
        let mut found = false;
        kb.for_each_solution(interp, positive, env, &mut |b| {
            let mut inner: Env = b.to_vec();
            found = rest.iter().all(|x| self.eval(x, &mut inner));
            found
        });
        found
    }
}

/// Splits a quantifier block into its variables, the positive atoms directly
/// under it, and every other conjunct.
fn flatten<'f>(f: &'f Formula, vars: &mut Vec<Var>, positive: &mut Vec<&'f Atom>, rest: &mut Vec<&'f Formula>) {
    match f {
        Formula::Exists(v, body) => {
            vars.push(*v);
            flatten(body, vars, positive, rest);
        }
        Formula::And(xs) => xs.iter().for_each(|x| flatten(x, vars, positive, rest)),
        Formula::Pred(a) => positive.push(a),
        Formula::True => {}
        other => rest.push(other),
    }
}
