//! Plain-text tree format.
//!
//! ```text
//! node: contains_word(T, X1), similar(X1, free)
//! yes:
//!   leaf: spam [ham=1, spam=40]
//! no:
//!   leaf: ham [ham=52, spam=3]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{quote_constant, Parser, SyntaxError, Tok};

use super::{Conjunction, Leaf, LogicalDecisionTree, Node};

#[derive(Debug, Error)]
pub enum TreeParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: {message}")]
    Layout { line: usize, message: String },
}

pub(crate) fn render(tree: &LogicalDecisionTree) -> String {
    let mut out = String::new();
    render_node(&tree.root, 0, &mut out);
    out
}

fn render_node(node: &Node, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        Node::Leaf(l) => {
            let _ = write!(out, "{pad}leaf: {}", quote_constant(l.class.as_str()));
            if !l.support.is_empty() {
                out.push_str(" [");
                for (i, (c, n)) in l.support.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{}={n}", quote_constant(c.as_str()));
                }
                out.push(']');
            }
            out.push('\n');
        }
        Node::Test { conjunction, yes, no } => {
            let _ = writeln!(out, "{pad}node: {conjunction}");
            let _ = writeln!(out, "{pad}yes:");
            render_node(yes, depth + 1, out);
            let _ = writeln!(out, "{pad}no:");
            render_node(no, depth + 1, out);
        }
    }
}

struct Line<'a> {
    no: usize,
    indent: usize,
    key: &'a str,
    rest: &'a str,
}

pub fn parse_tree(text: &str) -> Result<LogicalDecisionTree, TreeParseError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = raw.trim_end();
        let trimmed = body.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let spaces = body.len() - trimmed.len();
        if spaces % 2 != 0 || body[..spaces].contains('\t') {
            return Err(TreeParseError::Layout { line: no, message: "indentation must be a multiple of two spaces".into() });
        }
        let (key, rest) = trimmed
            .split_once(':')
            .ok_or_else(|| TreeParseError::Layout { line: no, message: format!("expected `key:`, found {trimmed:?}") })?;
        lines.push(Line { no, indent: spaces / 2, key, rest: rest.trim() });
    }
    let mut pos = 0;
    let root = parse_node(&lines, &mut pos, 0)?;
    if let Some(l) = lines.get(pos) {
        return Err(TreeParseError::Layout { line: l.no, message: "trailing content after tree".into() });
    }
    Ok(LogicalDecisionTree { root })
}

fn parse_node(lines: &[Line], pos: &mut usize, depth: usize) -> Result<Node, TreeParseError> {
    let last = lines.last().map_or(1, |l| l.no);
    let line = lines
        .get(*pos)
        .ok_or(TreeParseError::Layout { line: last, message: "unexpected end of tree".into() })?;
    if line.indent != depth {
        return Err(TreeParseError::Layout { line: line.no, message: format!("expected indentation {}", depth * 2) });
    }
    *pos += 1;
    match line.key {
        "leaf" => parse_leaf(line).map(Node::Leaf),
        "node" => {
            let conjunction = parse_conjunction(line.rest, line.no)?;
            expect_branch(lines, pos, depth, "yes")?;
            let yes = parse_node(lines, pos, depth + 1)?;
            expect_branch(lines, pos, depth, "no")?;
            let no = parse_node(lines, pos, depth + 1)?;
            Ok(Node::test(conjunction, yes, no))
        }
        other => Err(TreeParseError::Layout { line: line.no, message: format!("expected `node:` or `leaf:`, found `{other}:`") }),
    }
}

fn expect_branch(lines: &[Line], pos: &mut usize, depth: usize, key: &str) -> Result<(), TreeParseError> {
    match lines.get(*pos) {
        Some(l) if l.indent == depth && l.key == key && l.rest.is_empty() => {
            *pos += 1;
            Ok(())
        }
        Some(l) => Err(TreeParseError::Layout { line: l.no, message: format!("expected `{key}:` at indentation {}", depth * 2) }),
        None => Err(TreeParseError::Layout {
            line: lines.last().map_or(1, |l| l.no),
            message: format!("missing `{key}:` branch"),
        }),
    }
}

pub(crate) fn parse_conjunction(text: &str, line: usize) -> Result<Conjunction, SyntaxError> {
    let mut p = Parser::new(text, line)?;
    let mut atoms = vec![p.atom()?];
    while p.eat(&Tok::Comma) {
        atoms.push(p.atom()?);
    }
    if !p.at_eof() {
        return Err(p.error(format!("unexpected {}", p.peek())));
    }
    Ok(Conjunction(atoms))
}

fn parse_leaf(line: &Line) -> Result<Leaf, TreeParseError> {
    let mut p = Parser::new(line.rest, line.no)?;
    let class = p.constant()?;
    let mut support = BTreeMap::new();
    if p.eat(&Tok::LBracket) && !p.eat(&Tok::RBracket) {
        loop {
            let c = p.constant()?;
            p.expect(Tok::Eq)?;
            let n = p.ident()?;
            let n: usize = n.parse().map_err(|_| p.error(format!("`{n}` is not a count")))?;
            support.insert(c, n);
            if p.eat(&Tok::Comma) {
                continue;
            }
            p.expect(Tok::RBracket)?;
            break;
        }
    }
    if !p.at_eof() {
        return Err(p.error(format!("unexpected {}", p.peek())).into());
    }
    Ok(Leaf { class, support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Sym;

    const SAMPLE: &str = "\
node: contains_word(T, X1), similar(X1, free)
yes:
  node: contains_word(T, \"win!\")
  yes:
    leaf: spam [spam=4]
  no:
    leaf: spam [ham=1, spam=3]
no:
  leaf: ham [ham=52, spam=3]
";

    #[test]
    fn round_trip() {
        let t = parse_tree(SAMPLE).unwrap();
        assert_eq!(t.root.depth(), 2);
        assert_eq!(t.root.leaves(), 3);
        assert_eq!(t.to_string(), SAMPLE);
        assert_eq!(t.similar_constants(), vec![Sym::new("free")]);
    }

    #[test]
    fn leaf_without_support() {
        let t = parse_tree("leaf: pos\n").unwrap();
        assert_eq!(t.root, Node::leaf(Sym::new("pos")));
    }

    #[test]
    fn layout_errors_carry_lines() {
        let err = parse_tree("node: p(T)\nyes:\n  leaf: a\n").unwrap_err();
        assert!(matches!(err, TreeParseError::Layout { line: 3, .. }), "{err}");
        let err = parse_tree("node: p(T)\nyes:\n leaf: a\nno:\n  leaf: b\n").unwrap_err();
        assert!(matches!(err, TreeParseError::Layout { line: 3, .. }), "{err}");
        let err = parse_tree("node: p(T,\nyes:\n").unwrap_err();
        assert!(matches!(err, TreeParseError::Syntax(SyntaxError { line: 1, .. })), "{err}");
    }
}
