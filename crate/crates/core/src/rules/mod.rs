//! Rule sets over first-order formulas: conversion from decision trees,
//! a textual rule language, and crisp evaluation.

mod convert;
mod crisp;
mod grammar;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Atom, KbError, KnowledgeBase, Term, Var};
use crate::symbol::Sym;
use crate::syntax::{quote_constant, SyntaxError};

pub use convert::{convert_tree_to_rules, quantify_and_conjunct, Component};
pub use crisp::{crisp_eval, crisp_truth, fired_rules};
pub use grammar::{parse_rules, serialize_rules};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}, column {col}: unbound variable {var}")]
    UnboundVariable { line: usize, col: usize, var: String },
    #[error("variable {var} is free in a quantified component")]
    FreeVariable { var: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("example `{example}`: {fired} tree-derived rule bodies fired, expected exactly one")]
    NotExclusive { example: String, fired: usize },
    #[error("example `{example}`: no rule fired and the rule set has no default class")]
    NoDefault { example: String },
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Pred(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Exists(Var, Box<Formula>),
}

impl Formula {
    /// Conjunction of `parts`, collapsing the empty and singleton cases.
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::True,
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    pub fn or(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(v: Var, body: Formula) -> Formula {
        Formula::Exists(v, Box::new(body))
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Formula::True => {}
            Formula::Pred(a) => out.extend(a.vars().filter(|v| !bound.contains(v))),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.collect_free(bound, out)),
            Formula::Not(x) => x.collect_free(bound, out),
            Formula::Exists(v, x) => {
                bound.push(*v);
                x.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every atom in the formula, in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.walk_atoms(&mut out);
        out
    }

    fn walk_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True => {}
            Formula::Pred(a) => out.push(a),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.walk_atoms(out)),
            Formula::Not(x) | Formula::Exists(_, x) => x.walk_atoms(out),
        }
    }

    /// Second arguments of `similar/2` atoms that are constants.
    pub fn similar_constants(&self) -> BTreeSet<Sym> {
        self.atoms()
            .into_iter()
            .filter(|a| a.is_similar())
            .filter_map(|a| match a.args[1] {
                Term::Const(c) => Some(c),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// Renames every bound variable `V` to `V{suffix}`.
    pub(crate) fn rename_bound(&self, suffix: &str) -> Formula {
        fn go(f: &Formula, suffix: &str, map: &mut Vec<(Var, Var)>) -> Formula {
            match f {
                Formula::True => Formula::True,
                Formula::Pred(a) => Formula::Pred(Atom {
                    predicate: a.predicate,
                    args: a
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) => Term::Var(map.iter().rev().find(|(o, _)| o == v).map_or(*v, |(_, n)| *n)),
                            c => *c,
                        })
                        .collect(),
                }),
                Formula::And(xs) => Formula::And(xs.iter().map(|x| go(x, suffix, map)).collect()),
                Formula::Or(xs) => Formula::Or(xs.iter().map(|x| go(x, suffix, map)).collect()),
                Formula::Not(x) => Formula::not(go(x, suffix, map)),
                Formula::Exists(v, x) => {
                    let renamed = Var::new(&format!("{v}{suffix}"));
                    map.push((*v, renamed));
                    let body = go(x, suffix, map);
                    map.pop();
                    Formula::exists(renamed, body)
                }
            }
        }
        go(self, suffix, &mut Vec::new())
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(_) => 0,
            Formula::And(_) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::Pred(a) => write!(f, "{a}"),
            Formula::And(xs) | Formula::Or(xs) => {
                let (sep, child) = if matches!(self, Formula::And(_)) { (" & ", 2) } else { (" | ", 1) };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    // Nested same-kind children keep their parentheses so the
                    // printed text parses back to the same tree.
                    x.fmt_at(f, child)?;
                }
                Ok(())
            }
            Formula::Not(x) => {
                f.write_str("~")?;
                x.fmt_at(f, 2)
            }
            Formula::Exists(v, x) => {
                write!(f, "exists {v} (")?;
                x.fmt_at(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

/// `head :- body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: Sym,
    pub body: Formula,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- {}.", quote_constant(self.head.as_str()), self.body)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    TreeDerived,
    #[default]
    HandCrafted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::TreeDerived => "tree_derived",
            Provenance::HandCrafted => "hand_crafted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub provenance: Provenance,
    /// Class returned by crisp evaluation when no hand-crafted rule fires.
    pub default_class: Option<Sym>,
}

impl RuleSet {
    pub fn hand_crafted(rules: Vec<Rule>, default_class: Option<Sym>) -> Self {
        RuleSet { rules, provenance: Provenance::HandCrafted, default_class }
    }

    pub fn heads(&self) -> BTreeSet<Sym> {
        self.rules.iter().map(|r| r.head).chain(self.default_class).collect()
    }

    /// Constants compared against through `similar/2` anywhere in the set.
    pub fn similar_constants(&self) -> Vec<Sym> {
        let set: BTreeSet<Sym> = self.rules.iter().flat_map(|r| r.body.similar_constants()).collect();
        set.into_iter().collect()
    }

    /// Checks heads against the knowledge base's classes and every symbolic
    /// atom against its schema. `similar/2` needs no grounding here.
    pub fn validate(&self, kb: &KnowledgeBase) -> Result<(), RuleError> {
        let classes = kb.classes();
        for h in self.heads() {
            if !classes.contains(&h) {
                return Err(RuleError::UnknownClass(h.to_string()));
            }
        }
        for r in &self.rules {
            for a in r.body.atoms().into_iter().filter(|a| !a.is_similar()) {
                kb.check_atom(a)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_rules(self))
    }
}
