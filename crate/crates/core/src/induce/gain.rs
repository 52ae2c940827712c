use std::collections::BTreeMap;

use crate::kb::{KnowledgeBase, Var};
use crate::symbol::Sym;

use super::{Conjunction, Heuristic, InduceParams};

pub type ClassCounts = BTreeMap<Sym, usize>;

/// Shannon entropy in bits.
pub fn entropy(counts: &ClassCounts) -> f64 {
    let n: usize = counts.values().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Score of a binary split; `-inf` when a side holds fewer than
/// `minimal_cases` examples or is empty.
pub fn gain_from_counts(yes: &ClassCounts, no: &ClassCounts, params: &InduceParams) -> f64 {
    let ny: usize = yes.values().sum();
    let nn: usize = no.values().sum();
    let min = params.minimal_cases.max(1);
    if ny < min || nn < min {
        return f64::NEG_INFINITY;
    }
    let mut parent = yes.clone();
    for (c, k) in no {
        *parent.entry(*c).or_default() += k;
    }
    let n = (ny + nn) as f64;
    let (wy, wn) = (ny as f64 / n, nn as f64 / n);
    let info = entropy(&parent) - wy * entropy(yes) - wn * entropy(no);
    match params.heuristic {
        Heuristic::InfoGain => info,
        Heuristic::GainRatio => {
            let split_info = -(wy * wy.log2() + wn * wn.log2());
            info / split_info
        }
    }
}

pub(crate) fn counts_of(kb: &KnowledgeBase, examples: &[usize]) -> ClassCounts {
    let mut c = ClassCounts::new();
    for &e in examples {
        *c.entry(kb.interpretations()[e].label).or_default() += 1;
    }
    c
}

/// Gain of splitting `examples` on whether `path ∧ candidate` succeeds.
pub fn split_gain(kb: &KnowledgeBase, examples: &[usize], path: &Conjunction, candidate: &Conjunction, params: &InduceParams) -> f64 {
    let query = path.extended(candidate);
    let (mut yes, mut no) = (ClassCounts::new(), ClassCounts::new());
    for &e in examples {
        let interp = &kb.interpretations()[e];
        let side = if kb.succeeds_unchecked(interp, &query.0, &[(Var::instance(), interp.id)]) { &mut yes } else { &mut no };
        *side.entry(interp.label).or_default() += 1;
    }
    gain_from_counts(&yes, &no, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_facts, Atom, Term};

    fn counts(pairs: &[(&str, usize)]) -> ClassCounts {
        pairs.iter().map(|(c, k)| (Sym::new(c), *k)).collect()
    }

    fn info_gain() -> InduceParams {
        InduceParams { minimal_cases: 1, heuristic: Heuristic::InfoGain, ..Default::default() }
    }

    #[test]
    fn perfect_split_on_balanced_set() {
        // 4 examples, 2 per class, split separates them: parent entropy = 1 bit.
        let kb = parse_facts(
            "w(a, x).\ntarget(a, pos).\nw(b, x).\ntarget(b, pos).\nw(c, y).\ntarget(c, neg).\nw(d, y).\ntarget(d, neg).\n",
        )
        .unwrap();
        let cand = Conjunction(vec![Atom::new("w", vec![Term::var("T"), Term::constant("x")])]);
        let g = split_gain(&kb, &[0, 1, 2, 3], &Conjunction::default(), &cand, &info_gain());
        assert!((g - 1.0).abs() < 1e-12);
        let ratio = InduceParams { minimal_cases: 1, ..Default::default() };
        assert!((split_gain(&kb, &[0, 1, 2, 3], &Conjunction::default(), &cand, &ratio) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_split_is_rejected() {
        let g = gain_from_counts(&counts(&[("pos", 2), ("neg", 2)]), &ClassCounts::new(), &info_gain());
        assert_eq!(g, f64::NEG_INFINITY);
    }

    #[test]
    fn minimal_cases_rejects_small_branch() {
        let p = InduceParams { minimal_cases: 3, ..info_gain() };
        assert_eq!(gain_from_counts(&counts(&[("pos", 2)]), &counts(&[("neg", 6)]), &p), f64::NEG_INFINITY);
    }

    #[test]
    fn label_independent_split_has_zero_gain() {
        // 8 balanced examples; each side holds 2 pos + 2 neg.
        let g = gain_from_counts(&counts(&[("pos", 2), ("neg", 2)]), &counts(&[("pos", 2), ("neg", 2)]), &info_gain());
        assert!(g.abs() < 1e-12);
        let r = gain_from_counts(
            &counts(&[("pos", 2), ("neg", 2)]),
            &counts(&[("pos", 2), ("neg", 2)]),
            &InduceParams { minimal_cases: 1, ..Default::default() },
        );
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&counts(&[("a", 5)])), 0.0);
        assert!((entropy(&counts(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)])) - 2.0).abs() < 1e-12);
    }
}
