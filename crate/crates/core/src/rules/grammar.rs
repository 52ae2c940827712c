//! Textual rule language.
//!
//! ```text
//! :- provenance(hand_crafted).
//! :- default(ham).
//! spam :- atleast(2, [exists W (contains_word(T, W) & similar(W, free)),
//!                     exists W (contains_word(T, W) & similar(W, win))]).
//! ```
//!
//! `|` binds loosest, then `&`, then `~`. `atleast(k, [f1, ..., fn])`
//! expands at parse time into the disjunction of all k-element conjunctions,
//! renaming quantified variables in the i-th element with the suffix `_i`.

use std::fmt::Write as _;

use crate::kb::{Term, Var};
use crate::syntax::{is_variable_name, quote_constant, Parser, SyntaxError, Tok};

use super::{Formula, Provenance, Rule, RuleError, RuleSet};

pub fn serialize_rules(rules: &RuleSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ":- provenance({}).", rules.provenance.as_str());
    if let Some(d) = rules.default_class {
        let _ = writeln!(out, ":- default({}).", quote_constant(d.as_str()));
    }
    for r in &rules.rules {
        let _ = writeln!(out, "{r}");
    }
    out
}

pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut p = Parser::new(text, 1)?;
    let mut rules = Vec::new();
    let mut provenance = Provenance::HandCrafted;
    let mut default_class = None;
    while !p.at_eof() {
        if p.eat(&Tok::ColonDash) {
            let name = p.ident()?;
            p.expect(Tok::LParen)?;
            match name.as_str() {
                "default" => default_class = Some(p.constant()?),
                "provenance" => {
                    let v = p.ident()?;
                    provenance = match v.as_str() {
                        "tree_derived" => Provenance::TreeDerived,
                        "hand_crafted" => Provenance::HandCrafted,
                        other => return Err(p.error(format!("unknown provenance `{other}`")).into()),
                    };
                }
                other => return Err(p.error(format!("unknown directive `{other}`")).into()),
            }
            p.expect(Tok::RParen)?;
            p.expect(Tok::Dot)?;
            continue;
        }
        let head = p.constant()?;
        p.expect(Tok::ColonDash)?;
        let body = disjunction(&mut p, &mut Vec::new())?;
        p.expect(Tok::Dot)?;
        rules.push(Rule { head, body });
    }
    Ok(RuleSet { rules, provenance, default_class })
}

fn disjunction(p: &mut Parser, scope: &mut Vec<Var>) -> Result<Formula, RuleError> {
    let mut parts = vec![conjunction(p, scope)?];
    while p.eat(&Tok::Pipe) {
        parts.push(conjunction(p, scope)?);
    }
    Ok(Formula::or(parts))
}

fn conjunction(p: &mut Parser, scope: &mut Vec<Var>) -> Result<Formula, RuleError> {
    let mut parts = vec![unary(p, scope)?];
    while p.eat(&Tok::Amp) {
        parts.push(unary(p, scope)?);
    }
    Ok(Formula::and(parts))
}

fn unary(p: &mut Parser, scope: &mut Vec<Var>) -> Result<Formula, RuleError> {
    if p.eat(&Tok::Tilde) {
        return Ok(Formula::not(unary(p, scope)?));
    }
    if p.eat(&Tok::LParen) {
        let f = disjunction(p, scope)?;
        p.expect(Tok::RParen)?;
        return Ok(f);
    }
    let keyword = match p.peek() {
        Tok::Ident(s) => s.clone(),
        other => return Err(p.error(format!("expected a formula, found {other}")).into()),
    };
    match (keyword.as_str(), p.peek_at(1)) {
        ("exists", Tok::Ident(v)) if is_variable_name(v) => {
            p.next();
            let at = p.error("");
            let Term::Var(v) = p.term()? else { unreachable!() };
            if v.is_instance() {
                return Err(SyntaxError { message: format!("`{v}` is the instance variable and cannot be quantified"), ..at }.into());
            }
            if scope.contains(&v) {
                return Err(SyntaxError { message: format!("variable {v} is already bound"), ..at }.into());
            }
            p.expect(Tok::LParen)?;
            scope.push(v);
            let body = disjunction(p, scope)?;
            scope.pop();
            p.expect(Tok::RParen)?;
            if !body.free_vars().contains(&v) {
                return Err(SyntaxError { message: format!("quantified variable {v} does not occur in its scope"), ..at }.into());
            }
            Ok(Formula::exists(v, body))
        }
        ("true", t) if *t != Tok::LParen => {
            p.next();
            Ok(Formula::True)
        }
        ("atleast", Tok::LParen) => atleast(p, scope),
        _ => {
            let at = p.error("");
            let atom = p.atom()?;
            if let Some(v) = atom.vars().find(|v| !v.is_instance() && !scope.contains(v)) {
                return Err(RuleError::UnboundVariable { line: at.line, col: at.col, var: v.to_string() });
            }
            Ok(Formula::Pred(atom))
        }
    }
}

fn atleast(p: &mut Parser, scope: &mut Vec<Var>) -> Result<Formula, RuleError> {
    p.next();
    p.expect(Tok::LParen)?;
    let at = p.error("");
    let k = p.ident()?;
    let k: usize = k.parse().map_err(|_| SyntaxError { message: format!("`{k}` is not a count"), ..at.clone() })?;
    p.expect(Tok::Comma)?;
    p.expect(Tok::LBracket)?;
    let mut items = Vec::new();
    if !p.eat(&Tok::RBracket) {
        loop {
            items.push(disjunction(p, scope)?);
            if p.eat(&Tok::Comma) {
                continue;
            }
            p.expect(Tok::RBracket)?;
            break;
        }
    }
    p.expect(Tok::RParen)?;
    if k == 0 || k > items.len() {
        return Err(SyntaxError { message: format!("atleast needs 1 <= k <= {}, got {k}", items.len()), ..at }.into());
    }
    let renamed: Vec<Formula> = items.iter().enumerate().map(|(i, f)| f.rename_bound(&format!("_{}", i + 1))).collect();
    let mut disjuncts = Vec::new();
    for subset in k_subsets(renamed.len(), k) {
        disjuncts.push(Formula::and(subset.into_iter().map(|i| renamed[i].clone()).collect()));
    }
    Ok(Formula::or(disjuncts))
}

/// All k-element index subsets of 0..n in lexicographic order.
fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else { break };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}
