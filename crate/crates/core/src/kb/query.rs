//! Crisp conjunctive queries against a single interpretation.

use std::collections::BTreeMap;

use crate::symbol::Sym;

use super::{similar_sym, Atom, GroundAtom, Interpretation, KbError, KnowledgeBase, Term, Var};

/// A total or partial assignment of constants to variables.
pub type Substitution = BTreeMap<Var, Sym>;

type Bindings = Vec<(Var, Sym)>;

fn lookup(b: &Bindings, v: Var) -> Option<Sym> {
    b.iter().rev().find(|(w, _)| *w == v).map(|(_, c)| *c)
}

fn resolve(b: &Bindings, t: &Term) -> Option<Sym> {
    match t {
        Term::Const(c) => Some(*c),
        Term::Var(v) => lookup(b, *v),
    }
}

impl KnowledgeBase {
    /// Verifies that every atom names a known predicate with the right arity.
    pub fn check_conjunction(&self, conj: &[Atom]) -> Result<(), KbError> {
        for atom in conj {
            self.check_atom(atom)?;
        }
        Ok(())
    }

    pub fn check_atom(&self, atom: &Atom) -> Result<(), KbError> {
        if atom.predicate == similar_sym() {
            if atom.arity() != 2 {
                return Err(KbError::QueryArity { predicate: atom.predicate.to_string(), expected: 2, found: atom.arity() });
            }
            if self.similar().is_none() {
                return Err(KbError::NoSimilarGrounding);
            }
            return Ok(());
        }
        match self.schema().get(&atom.predicate) {
            None => Err(KbError::UnknownPredicate(atom.predicate.to_string())),
            Some(&a) if a != atom.arity() => {
                Err(KbError::QueryArity { predicate: atom.predicate.to_string(), expected: a, found: atom.arity() })
            }
            Some(_) => Ok(()),
        }
    }

    /// Every total substitution over the conjunction's variables (extending
    /// `seed`) under which all atoms hold, sorted.
    pub fn query(&self, interp: &Interpretation, conj: &[Atom], seed: &Substitution) -> Result<Vec<Substitution>, KbError> {
        self.check_conjunction(conj)?;
        let atoms: Vec<&Atom> = conj.iter().collect();
        let mut bindings: Bindings = seed.iter().map(|(v, c)| (*v, *c)).collect();
        let mut out = Vec::new();
        self.solve(interp, &atoms, &mut bindings, &mut |b| {
            out.push(b.iter().copied().collect::<Substitution>());
            false
        });
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Whether the conjunction has at least one solution.
    pub fn succeeds(&self, interp: &Interpretation, conj: &[Atom], seed: &Substitution) -> Result<bool, KbError> {
        self.check_conjunction(conj)?;
        let seed: Bindings = seed.iter().map(|(v, c)| (*v, *c)).collect();
        Ok(self.succeeds_unchecked(interp, conj, &seed))
    }

    /// Existential success without schema checks. Independent groups of
    /// atoms (linked only through seed-bound variables) are solved separately.
    pub(crate) fn succeeds_unchecked(&self, interp: &Interpretation, conj: &[Atom], seed: &[(Var, Sym)]) -> bool {
        let mut bindings: Bindings = seed.to_vec();
        for group in components(conj, seed) {
            let found = self.solve(interp, &group, &mut bindings, &mut |_| true);
            if !found {
                return false;
            }
        }
        true
    }

    /// Streams solutions (seed bindings included) to `f` until it returns true.
    /// Returns whether `f` stopped the search.
    pub(crate) fn for_each_solution(
        &self,
        interp: &Interpretation,
        conj: &[Atom],
        seed: &[(Var, Sym)],
        f: &mut dyn FnMut(&[(Var, Sym)]) -> bool,
    ) -> bool {
        let atoms: Vec<&Atom> = conj.iter().collect();
        let mut bindings: Bindings = seed.to_vec();
        self.solve(interp, &atoms, &mut bindings, &mut |b| f(b))
    }

    /// Whether a ground atom holds in `interp` (facts, or the similar/2 grounding).
    pub fn holds(&self, interp: &Interpretation, atom: &GroundAtom) -> bool {
        if atom.predicate == similar_sym() && atom.args.len() == 2 {
            return self.similar().is_some_and(|g| g.holds(atom.args[0], atom.args[1]));
        }
        interp.contains(atom)
    }

    /// Backtracking join. `on_solution` returns true to stop the search;
    /// the return value reports whether the search was stopped.
    fn solve(
        &self,
        interp: &Interpretation,
        atoms: &[&Atom],
        bindings: &mut Bindings,
        on_solution: &mut dyn FnMut(&Bindings) -> bool,
    ) -> bool {
        let Some((atom, rest)) = atoms.split_first() else {
            return on_solution(bindings);
        };
        let mark = bindings.len();
        if atom.is_similar() {
            let Some(g) = self.similar() else { return false };
            let a = resolve(bindings, &atom.args[0]);
            let b = resolve(bindings, &atom.args[1]);
            let mut try_pair = |x: Sym, y: Sym, bindings: &mut Bindings| -> bool {
                if let Term::Var(v) = atom.args[0] {
                    if lookup(bindings, v).is_none() {
                        bindings.push((v, x));
                    }
                }
                if let Term::Var(v) = atom.args[1] {
                    match lookup(bindings, v) {
                        None => bindings.push((v, y)),
                        Some(bound) if bound != y => {
                            bindings.truncate(mark);
                            return false;
                        }
                        Some(_) => {}
                    }
                }
                let stop = self.solve(interp, rest, bindings, on_solution);
                bindings.truncate(mark);
                stop
            };
            match (a, b) {
                (Some(x), Some(y)) => {
                    if g.holds(x, y) {
                        return try_pair(x, y, bindings);
                    }
                }
                (Some(x), None) => {
                    for y in g.neighbors_sorted(x) {
                        if try_pair(x, y, bindings) {
                            return true;
                        }
                    }
                }
                (None, Some(y)) => {
                    for x in g.neighbors_sorted(y) {
                        if try_pair(x, y, bindings) {
                            return true;
                        }
                    }
                }
                (None, None) => {
                    for (x, y) in g.pairs_sorted() {
                        if try_pair(x, y, bindings) {
                            return true;
                        }
                    }
                }
            }
            return false;
        }

        let resolved: Vec<Option<Sym>> = atom.args.iter().map(|t| resolve(bindings, t)).collect();
        if resolved.iter().all(Option::is_some) {
            let ground = GroundAtom { predicate: atom.predicate, args: resolved.into_iter().flatten().collect() };
            return interp.contains(&ground) && self.solve(interp, rest, bindings, on_solution);
        }
        for fact in interp.facts_of(atom.predicate) {
            if fact.args.len() != atom.args.len() {
                continue;
            }
            let mut ok = true;
            for (term, &value) in atom.args.iter().zip(&fact.args) {
                let current = match term {
                    Term::Const(c) => Some(*c),
                    Term::Var(v) => lookup(bindings, *v),
                };
                match (current, term) {
                    (Some(c), _) if c != value => {
                        ok = false;
                        break;
                    }
                    (None, Term::Var(v)) => bindings.push((*v, value)),
                    _ => {}
                }
            }
            if ok && self.solve(interp, rest, bindings, on_solution) {
                bindings.truncate(mark);
                return true;
            }
            bindings.truncate(mark);
        }
        false
    }
}

/// Partitions atoms into groups connected through variables that `seed`
/// leaves unbound. Atom order inside each group is preserved.
fn components<'a>(conj: &'a [Atom], seed: &[(Var, Sym)]) -> Vec<Vec<&'a Atom>> {
    let n = conj.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: Vec<(Var, usize)> = Vec::new();
    for (i, atom) in conj.iter().enumerate() {
        for v in atom.vars() {
            if seed.iter().any(|(w, _)| *w == v) {
                continue;
            }
            match owner.iter().find(|(w, _)| *w == v) {
                Some(&(_, j)) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
                None => owner.push((v, i)),
            }
        }
    }
    let mut groups: Vec<(usize, Vec<&Atom>)> = Vec::new();
    for (i, atom) in conj.iter().enumerate() {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(atom),
            None => groups.push((r, vec![atom])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}
