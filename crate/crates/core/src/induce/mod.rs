//! Top-down induction of first-order logical decision trees.
//!
//! Each internal node tests whether the conjunction of all `yes`-ancestor
//! tests, extended by the node's own conjunction, has a solution in the
//! example's interpretation. The refinement operator couples membership
//! predicates with `similar(Var, constant)` so that a split can say "the
//! message contains a word close to *free*".

mod bias;
mod gain;
mod serial;
mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::Atom;
use crate::symbol::Sym;

pub use bias::{constant_pools, refinements, ArgMode, ConstantPools, LanguageBias, Mode};
pub use gain::{entropy, gain_from_counts, split_gain, ClassCounts};
pub use serial::{parse_tree, TreeParseError};
pub use tree::{classify, induce_tree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    #[default]
    GainRatio,
    InfoGain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InduceParams {
    /// Minimum number of examples on each side of a split.
    pub minimal_cases: usize,
    pub constant_pool_cap: usize,
    pub heuristic: Heuristic,
    /// Class whose frequency ranks pooled constants; the rarest training
    /// class when unset.
    pub positive_class: Option<Sym>,
}

impl Default for InduceParams {
    fn default() -> Self {
        InduceParams { minimal_cases: 2, constant_pool_cap: 500, heuristic: Heuristic::GainRatio, positive_class: None }
    }
}

/// An ordered list of literals, rendered as `a, b, c`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conjunction(pub Vec<Atom>);

impl Conjunction {
    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn extended(&self, other: &Conjunction) -> Conjunction {
        Conjunction(self.0.iter().chain(&other.0).cloned().collect())
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub class: Sym,
    /// Training examples per class that reached this leaf.
    pub support: BTreeMap<Sym, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf(Leaf),
    Test { conjunction: Conjunction, yes: Box<Node>, no: Box<Node> },
}

impl Node {
    pub fn leaf(class: Sym) -> Node {
        Node::Leaf(Leaf { class, support: BTreeMap::new() })
    }

    pub fn test(conjunction: Conjunction, yes: Node, no: Node) -> Node {
        Node::Test { conjunction, yes: Box::new(yes), no: Box::new(no) }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Test { yes, no, .. } => 1 + yes.depth().max(no.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Test { yes, no, .. } => yes.leaves() + no.leaves(),
        }
    }

    /// Every constant appearing as the second argument of `similar/2`.
    pub fn similar_constants(&self, out: &mut Vec<Sym>) {
        if let Node::Test { conjunction, yes, no } = self {
            for a in &conjunction.0 {
                if let (true, Some(crate::kb::Term::Const(c))) = (a.is_similar(), a.args.get(1)) {
                    if !out.contains(c) {
                        out.push(*c);
                    }
                }
            }
            yes.similar_constants(out);
            no.similar_constants(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicalDecisionTree {
    pub root: Node,
}

impl LogicalDecisionTree {
    pub fn similar_constants(&self) -> Vec<Sym> {
        let mut v = Vec::new();
        self.root.similar_constants(&mut v);
        v.sort();
        v
    }
}

impl fmt::Display for LogicalDecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serial::render(self))
    }
}
