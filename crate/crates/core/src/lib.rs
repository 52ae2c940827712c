pub mod embed;
pub mod fuzzy;
pub mod harness;
pub mod induce;
pub mod kb;
pub mod rules;
pub mod som;
pub mod synthetic;
pub mod symbol;
mod syntax;

pub use symbol::Sym;
pub use syntax::{quote_constant, SyntaxError};

// The guide's listings run as doctests; one module per chapter keeps
// failures traceable.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/facts.md")]
mod book_facts {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/similarity.md")]
mod book_similarity {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/induction.md")]
mod book_induction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rules.md")]
mod book_rules {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/refinement.md")]
mod book_refinement {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/som.md")]
mod book_som {}
