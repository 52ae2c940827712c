use crate::embed::SimilarGrounding;
use crate::symbol::Sym;
use crate::syntax::{Parser, Tok};

use super::{similar_sym, target_sym, GroundAtom, KbError, KnowledgeBase};

/// Comment prefix carrying the threshold of an exported similar/2 grounding.
pub(crate) const TAU_PRAGMA: &str = "% similar tau =";

/// Parses a fact file into a knowledge base.
///
/// Interpretations appear in the order of their `target/2` facts; facts may
/// precede the target of their example.
pub fn parse_facts(text: &str) -> Result<KnowledgeBase, KbError> {
    let mut parser = Parser::new(text, 1)?;
    let mut statements = Vec::new();
    while !parser.at_eof() {
        let line = parser.line();
        let atom = parser.atom()?;
        parser.expect(Tok::Dot)?;
        let Some(ground) = atom.to_ground() else {
            return Err(KbError::NonGround { line, atom: atom.to_string() });
        };
        statements.push((line, ground));
    }

    let mut kb = KnowledgeBase::new();
    let target = target_sym();
    for (line, fact) in statements.iter().filter(|(_, f)| f.predicate == target) {
        if fact.args.len() != 2 {
            return Err(KbError::ArityMismatch {
                line: *line,
                predicate: target.to_string(),
                expected: 2,
                found: fact.args.len(),
            });
        }
        kb.add_example(fact.args[0], fact.args[1]).map_err(|_| KbError::DuplicateTarget {
            line: *line,
            example: fact.args[0].to_string(),
        })?;
    }

    let similar = similar_sym();
    let mut pairs: Vec<(Sym, Sym)> = Vec::new();
    for (line, fact) in statements.into_iter().filter(|(_, f)| f.predicate != target) {
        if fact.predicate == similar {
            if fact.args.len() != 2 {
                return Err(KbError::ArityMismatch {
                    line,
                    predicate: similar.to_string(),
                    expected: 2,
                    found: fact.args.len(),
                });
            }
            pairs.push((fact.args[0], fact.args[1]));
            continue;
        }
        add_fact_at(&mut kb, fact, line)?;
    }
    if !pairs.is_empty() {
        let tau = text
            .lines()
            .find_map(|l| l.trim().strip_prefix(TAU_PRAGMA))
            .and_then(|t| t.trim().parse::<f64>().ok());
        kb.attach_similar(SimilarGrounding::from_pairs(pairs, tau));
    }
    Ok(kb)
}

fn add_fact_at(kb: &mut KnowledgeBase, fact: GroundAtom, line: usize) -> Result<(), KbError> {
    kb.add_fact(fact).map(|_| ()).map_err(|e| match e {
        KbError::UnknownExample { atom, example, .. } => KbError::UnknownExample { line, atom, example },
        KbError::ArityMismatch { predicate, expected, found, .. } => {
            KbError::ArityMismatch { line, predicate, expected, found }
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let kb = parse_facts("contains_word(ex1, free).\ntarget(ex1, spam).").unwrap();
        assert_eq!(kb.len(), 1);
        let i = &kb.interpretations()[0];
        assert_eq!(i.len(), 1);
        assert_eq!(i.label, Sym::new("spam"));
    }

    #[test]
    fn rejects_non_ground() {
        let err = parse_facts("contains_word(ex1, X).").unwrap_err();
        assert!(matches!(err, KbError::NonGround { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_duplicate_target() {
        let err = parse_facts("target(a, x).\n\ntarget(a, y).").unwrap_err();
        assert!(matches!(err, KbError::DuplicateTarget { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_unknown_example() {
        let err = parse_facts("target(a, x).\np(b, c).").unwrap_err();
        assert!(matches!(err, KbError::UnknownExample { line: 2, .. }), "{err}");
    }

    #[test]
    fn syntax_error_carries_line() {
        let err = parse_facts("target(a, x).\np(a, c)\nq(a).").unwrap_err();
        match err {
            KbError::Syntax(e) => assert_eq!(e.line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn two_examples_five_facts() {
        let text = "% fixture\n\
            contains_word(e1, free).\ncontains_word(e1, money).\ncontains_word(e1, now).\n\
            target(e1, spam).\n\
            contains_word(e2, hello).\ncontains_word(e2, mum).\n\
            target(e2, ham).\n";
        let kb = parse_facts(text).unwrap();
        let sizes: Vec<usize> = kb.interpretations().iter().map(|i| i.len()).collect();
        assert_eq!(sizes, vec![3, 2]);
    }

    #[test]
    fn similar_facts_become_background() {
        let kb = parse_facts("% similar tau = 0.5\ntarget(e, c).\nsimilar(a, b).").unwrap();
        let g = kb.similar().unwrap();
        assert!(g.holds(Sym::new("a"), Sym::new("b")));
        assert!(g.holds(Sym::new("b"), Sym::new("a")));
        assert_eq!(g.tau(), Some(0.5));
        assert!(kb.interpretations()[0].is_empty());
    }
}
