//! Mode declarations, constant pools and the refinement operator.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::kb::{similar_sym, Atom, KbError, KnowledgeBase, Term, Var, INSTANCE_VAR};
use crate::symbol::Sym;

use super::{Conjunction, InduceParams};

/// How one argument position of a mode is filled during refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArgMode {
    /// The example variable `T`.
    Instance,
    /// A variable already introduced on the path (`+`).
    Input,
    /// A fresh variable (`-`).
    Output,
    /// A constant from the pool for this position (`#`).
    Constant,
}

/// A predicate template such as `contains_word(T, #)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mode {
    pub predicate: Sym,
    pub args: Vec<ArgMode>,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| format!("mode `{s}`: expected `pred(args)`"))?;
        if !s.ends_with(')') {
            return Err(format!("mode `{s}`: missing `)`"));
        }
        let name = s[..open].trim();
        if name.is_empty() || !name.chars().next().is_some_and(|c| c.is_lowercase()) {
            return Err(format!("mode `{s}`: predicate must start lowercase"));
        }
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| match a.trim() {
                INSTANCE_VAR => Ok(ArgMode::Instance),
                "+" => Ok(ArgMode::Input),
                "-" => Ok(ArgMode::Output),
                "#" => Ok(ArgMode::Constant),
                other => Err(format!("mode `{s}`: unknown argument mode `{other}` (use T, +, -, #)")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mode { predicate: Sym::new(name), args })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(match a {
                ArgMode::Instance => INSTANCE_VAR,
                ArgMode::Input => "+",
                ArgMode::Output => "-",
                ArgMode::Constant => "#",
            })?;
        }
        f.write_str(")")
    }
}

/// Which literals the refinement operator may add.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LanguageBias {
    /// Templates usable on their own.
    pub modes: Vec<Mode>,
    /// Membership templates with exactly one `-` position; they are only
    /// ever emitted together with `similar(Fresh, c)` for a pooled `c`.
    pub coupled: Vec<Mode>,
}

impl LanguageBias {
    /// Plain symbolic bias: `pred(T, #)` for every predicate.
    pub fn symbolic(predicates: &[&str]) -> Self {
        LanguageBias {
            modes: predicates.iter().map(|p| format!("{p}(T, #)").parse().expect("valid mode")).collect(),
            coupled: Vec::new(),
        }
    }

    /// Every predicate coupled with `similar/2`, no standalone atoms.
    pub fn with_similar(predicates: &[&str]) -> Self {
        LanguageBias {
            modes: Vec::new(),
            coupled: predicates.iter().map(|p| format!("{p}(T, -)").parse().expect("valid mode")).collect(),
        }
    }

    pub fn uses_similar(&self) -> bool {
        !self.coupled.is_empty() || self.modes.iter().any(|m| m.predicate == similar_sym())
    }

    /// Checks modes against the KB schema.
    pub fn validate(&self, kb: &KnowledgeBase) -> Result<(), KbError> {
        for m in self.modes.iter().chain(&self.coupled) {
            if m.predicate == similar_sym() {
                if m.args.len() != 2 {
                    return Err(KbError::QueryArity { predicate: "similar".into(), expected: 2, found: m.args.len() });
                }
                continue;
            }
            match kb.schema().get(&m.predicate) {
                None => return Err(KbError::UnknownPredicate(m.predicate.to_string())),
                Some(&a) if a != m.args.len() => {
                    return Err(KbError::QueryArity { predicate: m.predicate.to_string(), expected: a, found: m.args.len() })
                }
                _ => {}
            }
        }
        for m in &self.coupled {
            let outputs = m.args.iter().filter(|a| **a == ArgMode::Output).count();
            if outputs != 1 || m.predicate == similar_sym() {
                return Err(KbError::Data {
                    context: format!("coupled mode {m}"),
                    message: "needs exactly one `-` position and must not be similar/2".into(),
                });
            }
        }
        Ok(())
    }
}

/// Ranked constants per `(predicate, argument)` position, plus the pool for
/// the second argument of `similar/2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstantPools {
    pub by_position: HashMap<(Sym, usize), Vec<Sym>>,
    pub similar: Vec<Sym>,
}

/// The class whose frequencies rank pooled constants: the configured
/// positive class, else the rarest label among `examples`.
pub(crate) fn ranking_class(kb: &KnowledgeBase, examples: &[usize], params: &InduceParams) -> Option<Sym> {
    if params.positive_class.is_some() {
        return params.positive_class;
    }
    let mut counts: HashMap<Sym, usize> = HashMap::new();
    for &e in examples {
        *counts.entry(kb.interpretations()[e].label).or_default() += 1;
    }
    counts.into_iter().min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0))).map(|(c, _)| c)
}

fn rank(entities: HashMap<Sym, usize>, cap: usize) -> Vec<Sym> {
    let mut v: Vec<(Sym, usize)> = entities.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(cap);
    v.into_iter().map(|(s, _)| s).collect()
}

/// Builds the constant pools from the training examples.
///
/// Candidates are the entities occurring at a position, ranked by the number
/// of ranking-class examples containing them (ties by name) and truncated to
/// `constant_pool_cap`. When a similar/2 grounding is attached, the similar
/// pool keeps only constants that occur in it.
pub fn constant_pools(kb: &KnowledgeBase, examples: &[usize], bias: &LanguageBias, params: &InduceParams) -> ConstantPools {
    let positive = ranking_class(kb, examples, params);
    let count_position = |pred: Sym, pos: usize, filter: &dyn Fn(Sym) -> bool| -> Vec<Sym> {
        let mut freq: HashMap<Sym, usize> = HashMap::new();
        for &e in examples {
            let interp = &kb.interpretations()[e];
            let is_pos = Some(interp.label) == positive;
            let distinct: HashSet<Sym> = interp.entities_of(pred, pos).collect();
            for c in distinct {
                if filter(c) {
                    *freq.entry(c).or_default() += usize::from(is_pos);
                }
            }
        }
        rank(freq, params.constant_pool_cap)
    };

    let mut pools = ConstantPools::default();
    for m in bias.modes.iter().chain(&bias.coupled) {
        if m.predicate == similar_sym() {
            continue;
        }
        for (pos, a) in m.args.iter().enumerate() {
            if *a == ArgMode::Constant {
                pools.by_position.entry((m.predicate, pos)).or_insert_with(|| count_position(m.predicate, pos, &|_| true));
            }
        }
    }

    let needs_similar_pool = bias.uses_similar();
    if needs_similar_pool {
        let grounding = kb.similar();
        let keep = |c: Sym| grounding.is_none_or(|g| g.holds(c, c));
        // Entities feeding similar/2: outputs of coupled modes.
        let mut freq: HashMap<Sym, usize> = HashMap::new();
        for &e in examples {
            let interp = &kb.interpretations()[e];
            let is_pos = Some(interp.label) == positive;
            let mut distinct: HashSet<Sym> = HashSet::new();
            for m in &bias.coupled {
                let pos = m.args.iter().position(|a| *a == ArgMode::Output).expect("validated");
                distinct.extend(interp.entities_of(m.predicate, pos));
            }
            if bias.coupled.is_empty() {
                distinct.extend(interp.active_domain());
            }
            for c in distinct.into_iter().filter(|&c| keep(c)) {
                *freq.entry(c).or_default() += usize::from(is_pos);
            }
        }
        pools.similar = rank(freq, params.constant_pool_cap);
    }
    pools
}

/// Variables (other than `T`) occurring in `conj`, in first-occurrence order.
pub(crate) fn path_vars(conj: &[Atom]) -> Vec<Var> {
    let mut out: Vec<Var> = Vec::new();
    for v in conj.iter().flat_map(|a| a.vars()) {
        if !v.is_instance() && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn fresh_var(taken: &BTreeSet<Var>, n: &mut usize) -> Var {
    loop {
        *n += 1;
        let v = Var::new(&format!("X{n}"));
        if !taken.contains(&v) {
            return v;
        }
    }
}

/// Instantiates one template. `pool_for(pos)` supplies constants for `#`.
fn expand_mode(
    mode: &Mode,
    inputs: &[Var],
    taken: &BTreeSet<Var>,
    pool_for: &dyn Fn(usize) -> Vec<Sym>,
) -> Vec<(Atom, Vec<Var>)> {
    let mut partial: Vec<(Vec<Term>, Vec<Var>, usize)> = vec![(Vec::new(), Vec::new(), 0)];
    for (pos, a) in mode.args.iter().enumerate() {
        let mut next = Vec::new();
        for (terms, fresh, counter) in partial {
            match a {
                ArgMode::Instance => {
                    let mut t = terms.clone();
                    t.push(Term::Var(Var::instance()));
                    next.push((t, fresh, counter));
                }
                ArgMode::Input => {
                    for &v in inputs {
                        let mut t = terms.clone();
                        t.push(Term::Var(v));
                        next.push((t, fresh.clone(), counter));
                    }
                }
                ArgMode::Output => {
                    let mut all_taken = taken.clone();
                    all_taken.extend(fresh.iter().copied());
                    let mut c = counter;
                    let v = fresh_var(&all_taken, &mut c);
                    let mut t = terms.clone();
                    t.push(Term::Var(v));
                    let mut f = fresh.clone();
                    f.push(v);
                    next.push((t, f, c));
                }
                ArgMode::Constant => {
                    for c in pool_for(pos) {
                        let mut t = terms.clone();
                        t.push(Term::Const(c));
                        next.push((t, fresh.clone(), counter));
                    }
                }
            }
        }
        partial = next;
    }
    partial.into_iter().map(|(args, fresh, _)| (Atom { predicate: mode.predicate, args }, fresh)).collect()
}

/// Candidate conjunctions extending `path` under `bias`.
///
/// Coupled templates yield the two-literal step `m(T, V) ∧ similar(V, c)`
/// for each pooled `c`; standalone templates yield single atoms. Candidates
/// come out deduplicated in generation order.
pub fn refinements(path: &Conjunction, bias: &LanguageBias, pools: &ConstantPools) -> Vec<Conjunction> {
    let inputs = path_vars(&path.0);
    let taken: BTreeSet<Var> = inputs.iter().copied().collect();
    let mut out: Vec<Conjunction> = Vec::new();
    let mut seen: HashSet<Conjunction> = HashSet::new();
    let mut push = |c: Conjunction, out: &mut Vec<Conjunction>| {
        if seen.insert(c.clone()) {
            out.push(c);
        }
    };

    for mode in &bias.coupled {
        let pool_for = |pos: usize| pools.by_position.get(&(mode.predicate, pos)).cloned().unwrap_or_default();
        for (atom, fresh) in expand_mode(mode, &inputs, &taken, &pool_for) {
            let Some(&entity) = fresh.last() else { continue };
            for &c in &pools.similar {
                let sim = Atom { predicate: similar_sym(), args: vec![Term::Var(entity), Term::Const(c)] };
                push(Conjunction(vec![atom.clone(), sim]), &mut out);
            }
        }
    }
    for mode in &bias.modes {
        let pool_for = |pos: usize| {
            if mode.predicate == similar_sym() {
                pools.similar.clone()
            } else {
                pools.by_position.get(&(mode.predicate, pos)).cloned().unwrap_or_default()
            }
        };
        for (atom, _) in expand_mode(mode, &inputs, &taken, &pool_for) {
            push(Conjunction(vec![atom]), &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pools(sim: &[&str]) -> ConstantPools {
        ConstantPools { by_position: HashMap::new(), similar: sim.iter().map(|s| Sym::new(s)).collect() }
    }

    #[test]
    fn mode_parsing() {
        let m: Mode = "contains_word(T, #)".parse().unwrap();
        assert_eq!(m.args, vec![ArgMode::Instance, ArgMode::Constant]);
        assert_eq!(m.to_string(), "contains_word(T, #)");
        assert!("Foo(T)".parse::<Mode>().is_err());
        assert!("p(T, ?)".parse::<Mode>().is_err());
    }

    #[test]
    fn single_constant_coupling() {
        let bias = LanguageBias::with_similar(&["contains_word"]);
        let c = refinements(&Conjunction::default(), &bias, &pools(&["free"]));
        let shown: Vec<String> = c.iter().map(|c| c.to_string()).collect();
        assert_eq!(shown, vec!["contains_word(T, X1), similar(X1, free)"]);
    }

    #[test]
    fn pool_of_three_gives_three_candidates() {
        let bias = LanguageBias::with_similar(&["contains_word"]);
        assert_eq!(refinements(&Conjunction::default(), &bias, &pools(&["a", "b", "c"])).len(), 3);
    }

    #[test]
    fn coupled_bias_emits_no_bare_membership() {
        let bias = LanguageBias::with_similar(&["contains_word"]);
        let c = refinements(&Conjunction::default(), &bias, &pools(&["a"]));
        assert!(c.iter().all(|c| c.0.len() == 2));
    }

    #[test]
    fn fresh_variables_avoid_path_variables() {
        let bias = LanguageBias::with_similar(&["contains_word"]);
        let path = refinements(&Conjunction::default(), &bias, &pools(&["a"])).remove(0);
        let next = refinements(&path, &bias, &pools(&["b"]));
        assert_eq!(next[0].to_string(), "contains_word(T, X2), similar(X2, b)");
    }

    #[test]
    fn input_mode_reuses_path_variables() {
        let mut bias = LanguageBias::with_similar(&["contains_word"]);
        bias.modes.push("similar(+, #)".parse().unwrap());
        let path = refinements(&Conjunction::default(), &bias, &pools(&["a"])).remove(0);
        let next = refinements(&path, &bias, &pools(&["a", "b"]));
        let shown: Vec<String> = next.iter().map(|c| c.to_string()).collect();
        assert!(shown.contains(&"similar(X1, b)".to_string()), "{shown:?}");
    }

    #[test]
    fn pools_rank_by_positive_frequency() {
        let kb = crate::kb::parse_facts(
            "w(e1, a).\nw(e1, b).\ntarget(e1, pos).\n\
             w(e2, b).\ntarget(e2, pos).\n\
             w(e3, c).\nw(e3, a).\ntarget(e3, neg).\n",
        )
        .unwrap();
        let bias = LanguageBias::symbolic(&["w"]);
        let params = InduceParams { positive_class: Some(Sym::new("pos")), constant_pool_cap: 2, ..Default::default() };
        let p = constant_pools(&kb, &[0, 1, 2], &bias, &params);
        assert_eq!(p.by_position[&(Sym::new("w"), 1)], vec![Sym::new("b"), Sym::new("a")]);
    }
}
