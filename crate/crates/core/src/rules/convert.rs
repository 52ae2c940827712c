use crate::induce::{LogicalDecisionTree, Node};
use crate::kb::{Atom, Var};

use super::{Formula, Provenance, Rule, RuleError, RuleSet};

/// One element of a rule under construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Component {
    /// A literal whose variables are not yet quantified.
    Atom(Atom),
    /// A closed sub-formula (apart from `T`), such as a negated branch.
    Quantified(Formula),
}

/// Closes the raw atoms of `components` under existential quantifiers and
/// conjoins the result with the already quantified parts.
///
/// Atoms that share a variable end up under the same quantifier block, so
/// `p(T, X), q(X, Y)` becomes `exists X (exists Y (p(T, X) & q(X, Y)))`.
/// Each new block is placed in front of what was built so far, and `T` is
/// never quantified.
pub fn quantify_and_conjunct(components: &[Component]) -> Result<Formula, RuleError> {
    let mut quantified = Vec::new();
    let mut raw: Vec<&Atom> = Vec::new();
    for c in components {
        match c {
            Component::Quantified(f) => {
                if let Some(v) = f.free_vars().into_iter().find(|v| !v.is_instance()) {
                    return Err(RuleError::FreeVariable { var: v.to_string() });
                }
                quantified.push(f.clone());
            }
            Component::Atom(a) => raw.push(a),
        }
    }

    let mut groups: Vec<(Vec<Var>, Vec<&Atom>)> = Vec::new();
    let mut ground: Vec<Formula> = Vec::new();
    for atom in raw {
        let vars: Vec<Var> = atom.vars().filter(|v| !v.is_instance()).collect();
        if vars.is_empty() {
            ground.push(Formula::Pred(atom.clone()));
            continue;
        }
        // Merge every group that shares a variable with this atom.
        let mut merged: (Vec<Var>, Vec<&Atom>) = (Vec::new(), Vec::new());
        let mut i = 0;
        while i < groups.len() {
            if groups[i].0.iter().any(|v| vars.contains(v)) {
                let (gv, ga) = groups.remove(i);
                merged.0.extend(gv);
                merged.1.extend(ga);
            } else {
                i += 1;
            }
        }
        for v in vars {
            if !merged.0.contains(&v) {
                merged.0.push(v);
            }
        }
        merged.1.push(atom);
        groups.push(merged);
    }
    // Restore first-occurrence order of atoms and variables.
    let order = |a: &&Atom| components.iter().position(|c| matches!(c, Component::Atom(x) if std::ptr::eq(x, *a)));
    for g in &mut groups {
        g.1.sort_by_key(order);
        let mut vs: Vec<Var> = Vec::new();
        for v in g.1.iter().flat_map(|a| a.vars()) {
            if !v.is_instance() && !vs.contains(&v) {
                vs.push(v);
            }
        }
        g.0 = vs;
    }
    groups.sort_by_key(|g| order(&g.1[0]));

    let mut parts: Vec<Formula> = Vec::new();
    for (vars, atoms) in groups.into_iter().rev() {
        let body = Formula::and(atoms.into_iter().map(|a| Formula::Pred(a.clone())).collect());
        let block = vars.into_iter().rev().fold(body, |acc, v| Formula::exists(v, acc));
        parts.push(block);
    }
    parts.extend(ground);
    parts.extend(quantified);
    Ok(Formula::and(parts))
}

/// Turns every root-to-leaf path into one rule.
///
/// Walks the tree with an explicit stack. The yes-child inherits the node's
/// literals as raw components; the no-child receives the negation of the
/// quantified yes-side conjunction as a closed component. Rules come out in
/// stack-pop order, so no-branches are emitted before their yes siblings.
pub fn convert_tree_to_rules(tree: &LogicalDecisionTree) -> RuleSet {
    let mut stack: Vec<(&Node, Vec<Component>)> = vec![(&tree.root, Vec::new())];
    let mut rules = Vec::new();
    while let Some((node, comps)) = stack.pop() {
        match node {
            Node::Leaf(leaf) => {
                let body = quantify_and_conjunct(&comps).expect("tree components are closed");
                rules.push(Rule { head: leaf.class, body });
            }
            Node::Test { conjunction, yes, no } => {
                let mut positive = comps.clone();
                positive.extend(conjunction.0.iter().cloned().map(Component::Atom));
                let closed = quantify_and_conjunct(&positive).expect("tree components are closed");
                stack.push((yes, positive));
                let mut negative = comps;
                negative.push(Component::Quantified(Formula::not(closed)));
                stack.push((no, negative));
            }
        }
    }
    RuleSet { rules, provenance: Provenance::TreeDerived, default_class: None }
}
