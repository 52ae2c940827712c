use rayon::prelude::*;

use crate::kb::{Interpretation, KbError, KnowledgeBase, Var};
use crate::symbol::Sym;

use super::bias::{constant_pools, refinements, ConstantPools, LanguageBias};
use super::gain::{counts_of, gain_from_counts, ClassCounts};
use super::{Conjunction, InduceParams, Leaf, LogicalDecisionTree, Node};

const MIN_GAIN: f64 = 1e-12;

fn majority(counts: &ClassCounts) -> Sym {
    // BTreeMap iterates by name, so `max_by` with a strict comparison keeps
    // the lexicographically smallest of the tied classes.
    let mut best: Option<(Sym, usize)> = None;
    for (&c, &k) in counts {
        if best.is_none_or(|(_, bk)| k > bk) {
            best = Some((c, k));
        }
    }
    best.map(|(c, _)| c).expect("non-empty counts")
}

fn make_leaf(counts: ClassCounts) -> Node {
    Node::Leaf(Leaf { class: majority(&counts), support: counts })
}

struct Scored {
    gain: f64,
    key: String,
    candidate: Conjunction,
    yes: Vec<usize>,
    no: Vec<usize>,
}

/// Grows a tree over `examples` (indices into `kb`).
///
/// At each node the candidate with the highest gain wins; ties go to the
/// lexicographically smallest rendered conjunction. Growth stops when the
/// node is pure, when no split leaves `minimal_cases` examples on both sides,
/// or when no candidate has positive gain. Leaves take the majority class,
/// ties broken by class name.
pub fn induce_tree(
    kb: &KnowledgeBase,
    examples: &[usize],
    bias: &LanguageBias,
    params: &InduceParams,
) -> Result<LogicalDecisionTree, KbError> {
    bias.validate(kb)?;
    if bias.uses_similar() && kb.similar().is_none() {
        return Err(KbError::NoSimilarGrounding);
    }
    if examples.is_empty() {
        return Err(KbError::Data { context: "induce".into(), message: "no training examples".into() });
    }
    let pools = constant_pools(kb, examples, bias, params);
    let root = grow(kb, examples, &Conjunction::default(), bias, &pools, params);
    Ok(LogicalDecisionTree { root })
}

fn grow(
    kb: &KnowledgeBase,
    examples: &[usize],
    path: &Conjunction,
    bias: &LanguageBias,
    pools: &ConstantPools,
    params: &InduceParams,
) -> Node {
    let counts = counts_of(kb, examples);
    let min = params.minimal_cases.max(1);
    if counts.len() <= 1 || examples.len() < 2 * min {
        return make_leaf(counts);
    }
    let candidates = refinements(path, bias, pools);
    let scored: Vec<Scored> = candidates
        .into_par_iter()
        .map(|candidate| {
            let query = path.extended(&candidate);
            let (mut yes, mut no) = (Vec::new(), Vec::new());
            let (mut cy, mut cn) = (ClassCounts::new(), ClassCounts::new());
            for &e in examples {
                let interp = &kb.interpretations()[e];
                if kb.succeeds_unchecked(interp, &query.0, &[(Var::instance(), interp.id)]) {
                    yes.push(e);
                    *cy.entry(interp.label).or_default() += 1;
                } else {
                    no.push(e);
                    *cn.entry(interp.label).or_default() += 1;
                }
            }
            let gain = gain_from_counts(&cy, &cn, params);
            Scored { gain, key: candidate.to_string(), candidate, yes, no }
        })
        .collect();

    let mut best: Option<&Scored> = None;
    for s in &scored {
        if !(s.gain > MIN_GAIN) {
            continue;
        }
        best = match best {
            None => Some(s),
            Some(b) if s.gain > b.gain || (s.gain == b.gain && s.key < b.key) => Some(s),
            keep => keep,
        };
    }
    let Some(best) = best else {
        return make_leaf(counts);
    };
    let yes_path = path.extended(&best.candidate);
    let yes = grow(kb, &best.yes, &yes_path, bias, pools, params);
    let no = grow(kb, &best.no, path, bias, pools, params);
    Node::test(best.candidate.clone(), yes, no)
}

/// Walks the tree for one interpretation.
pub fn classify(tree: &LogicalDecisionTree, interp: &Interpretation, kb: &KnowledgeBase) -> Result<Sym, KbError> {
    let seed = [(Var::instance(), interp.id)];
    let mut path: Vec<crate::kb::Atom> = Vec::new();
    let mut node = &tree.root;
    loop {
        match node {
            Node::Leaf(l) => return Ok(l.class),
            Node::Test { conjunction, yes, no } => {
                kb.check_conjunction(&conjunction.0)?;
                let mark = path.len();
                path.extend(conjunction.0.iter().cloned());
                if kb.succeeds_unchecked(interp, &path, &seed) {
                    node = yes;
                } else {
                    path.truncate(mark);
                    node = no;
                }
            }
        }
    }
}
