//! Propositional formulas and the compilation of feature models into them.

use std::fmt;

use thiserror::Error;

use crate::model::{
    ConstraintKind, CrossTreeConstraint, FeatureId, FeatureModel, Relation, RelationType,
};

/// Propositional formula over variables of type `V` (feature names by default).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula<V = FeatureId> {
    Var(V),
    Not(Box<Formula<V>>),
    And(Vec<Formula<V>>),
    Or(Vec<Formula<V>>),
    Implies(Box<Formula<V>>, Box<Formula<V>>),
    Iff(Box<Formula<V>>, Box<Formula<V>>),
    /// True iff exactly one member is true. Generalizes binary exclusive-or
    /// to groups; it is not parity.
    ExactlyOne(Vec<Formula<V>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("variable `{0}` is undecided")]
pub struct UndecidedVariable(pub String);

impl<V> Formula<V> {
    pub fn var(v: V) -> Self {
        Formula::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula<V>) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula<V>, b: Formula<V>) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula<V>, b: Formula<V>) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Evaluates with `lookup` supplying variable values; `None` means undecided.
    pub fn eval_with<L>(&self, lookup: &L) -> Result<bool, &V>
    where
        L: Fn(&V) -> Option<bool>,
    {
        Ok(match self {
            Formula::Var(v) => return lookup(v).ok_or(v),
            Formula::Not(g) => !g.eval_with(lookup)?,
            Formula::And(gs) => {
                let mut all = true;
                for g in gs {
                    all &= g.eval_with(lookup)?;
                }
                all
            }
            Formula::Or(gs) => {
                let mut any = false;
                for g in gs {
                    any |= g.eval_with(lookup)?;
                }
                any
            }
            Formula::Implies(a, b) => {
                let a = a.eval_with(lookup)?;
                let b = b.eval_with(lookup)?;
                !a || b
            }
            Formula::Iff(a, b) => a.eval_with(lookup)? == b.eval_with(lookup)?,
            Formula::ExactlyOne(gs) => {
                let mut n = 0;
                for g in gs {
                    n += g.eval_with(lookup)? as usize;
                }
                n == 1
            }
        })
    }

    pub fn map_vars<W, F: Fn(&V) -> W + Copy>(&self, f: F) -> Formula<W> {
        let many = |gs: &[Formula<V>]| gs.iter().map(|g| g.map_vars(f)).collect();
        match self {
            Formula::Var(v) => Formula::Var(f(v)),
            Formula::Not(g) => Formula::Not(Box::new(g.map_vars(f))),
            Formula::And(gs) => Formula::And(many(gs)),
            Formula::Or(gs) => Formula::Or(many(gs)),
            Formula::Implies(a, b) => Formula::implies(a.map_vars(f), b.map_vars(f)),
            Formula::Iff(a, b) => Formula::iff(a.map_vars(f), b.map_vars(f)),
            Formula::ExactlyOne(gs) => Formula::ExactlyOne(many(gs)),
        }
    }

    /// Variables in preorder, first occurrence only.
    pub fn variables(&self) -> Vec<&V>
    where
        V: PartialEq,
    {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a V>)
    where
        V: PartialEq,
    {
        match self {
            Formula::Var(v) => {
                if !out.contains(&v) {
                    out.push(v)
                }
            }
            Formula::Not(g) => g.collect_vars(out),
            Formula::And(gs) | Formula::Or(gs) | Formula::ExactlyOne(gs) => {
                gs.iter().for_each(|g| g.collect_vars(out))
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula<V>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Formula::And(gs) => stack.extend(gs.iter().rev()),
                other => out.push(other),
            }
        }
        out
    }
}

impl<V: fmt::Display> fmt::Display for Formula<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<V: fmt::Display>(
            f: &mut fmt::Formatter<'_>,
            gs: &[Formula<V>],
            sep: &str,
        ) -> fmt::Result {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                g.fmt_operand(f)?;
            }
            Ok(())
        }
        match self {
            Formula::Var(v) => write!(f, "{v}"),
            Formula::Not(g) => {
                f.write_str("!")?;
                g.fmt_operand(f)
            }
            Formula::And(gs) => list(f, gs, " & "),
            Formula::Or(gs) => list(f, gs, " | "),
            Formula::Implies(a, b) => {
                a.fmt_operand(f)?;
                f.write_str(" => ")?;
                b.fmt_operand(f)
            }
            Formula::Iff(a, b) => {
                a.fmt_operand(f)?;
                f.write_str(" <=> ")?;
                b.fmt_operand(f)
            }
            Formula::ExactlyOne(gs) => {
                f.write_str("oneof(")?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{g}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl<V: fmt::Display> Formula<V> {
    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Var(_) | Formula::Not(_) | Formula::ExactlyOne(_) => write!(f, "{self}"),
            Formula::And(gs) | Formula::Or(gs) if gs.len() == 1 => write!(f, "{self}"),
            _ => write!(f, "({self})"),
        }
    }
}

/// Which reading of the relation table to compile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SemanticsMode {
    /// The table rows plus child-implies-parent on every edge and at-most-one
    /// within alternative groups.
    #[default]
    Strict,
    /// The table rows verbatim.
    PaperLiteral,
}

impl SemanticsMode {
    pub fn name(self) -> &'static str {
        match self {
            SemanticsMode::Strict => "strict",
            SemanticsMode::PaperLiteral => "paper-literal",
        }
    }
}

impl std::str::FromStr for SemanticsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(SemanticsMode::Strict),
            "paper-literal" => Ok(SemanticsMode::PaperLiteral),
            other => Err(format!(
                "unknown semantics `{other}` (expected strict or paper-literal)"
            )),
        }
    }
}

fn vars(fs: &[FeatureId]) -> Vec<Formula> {
    fs.iter().cloned().map(Formula::Var).collect()
}

pub fn compile_relation(r: &Relation, mode: SemanticsMode) -> Formula {
    let parent = Formula::Var(r.parent.clone());
    let children = vars(&r.children);
    let literal = match r.rtype {
        RelationType::Mandatory => Formula::iff(parent.clone(), children[0].clone()),
        RelationType::Optional => Formula::implies(children[0].clone(), parent.clone()),
        RelationType::Alternative => {
            Formula::iff(parent.clone(), Formula::ExactlyOne(children.clone()))
        }
        RelationType::OptionalAlternative => {
            Formula::implies(Formula::ExactlyOne(children.clone()), parent.clone())
        }
        RelationType::Or => Formula::iff(parent.clone(), Formula::Or(children.clone())),
        RelationType::OptionalOr => Formula::implies(Formula::Or(children.clone()), parent.clone()),
    };
    if mode == SemanticsMode::PaperLiteral {
        return literal;
    }
    let mut parts = vec![literal];
    parts.extend(
        children
            .iter()
            .map(|c| Formula::implies(c.clone(), parent.clone())),
    );
    if matches!(
        r.rtype,
        RelationType::Alternative | RelationType::OptionalAlternative
    ) {
        for i in 0..children.len() {
            for j in i + 1..children.len() {
                parts.push(Formula::not(Formula::And(vec![
                    children[i].clone(),
                    children[j].clone(),
                ])));
            }
        }
    }
    Formula::And(parts)
}

pub fn compile_constraint(c: &CrossTreeConstraint) -> Formula {
    let a = Formula::Var(c.source.clone());
    let b = Formula::Var(c.target.clone());
    match c.kind {
        ConstraintKind::Requires => Formula::implies(a, b),
        ConstraintKind::Excludes => Formula::not(Formula::And(vec![a, b])),
    }
}

/// Root assertion, then relations, then constraints, each in declaration order.
pub fn compile_model(m: &FeatureModel, mode: SemanticsMode) -> Formula {
    let mut parts = vec![Formula::Var(m.root().clone())];
    parts.extend(m.relations().iter().map(|r| compile_relation(r, mode)));
    parts.extend(m.constraints().iter().map(compile_constraint));
    Formula::And(parts)
}

/// Evaluates `f` under a configuration; every variable of `f` must be decided.
pub fn evaluate(
    f: &Formula,
    config: &crate::model::Configuration,
) -> Result<bool, UndecidedVariable> {
    f.eval_with(&|v: &FeatureId| config.value(v.as_str()))
        .map_err(|v| UndecidedVariable(v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{cad, cons, fid, rel};
    use crate::model::{make_config, make_partial_config};
    use RelationType::*;

    fn v(s: &str) -> Formula {
        Formula::Var(fid(s))
    }

    #[test]
    fn paper_literal_rows() {
        let m = SemanticsMode::PaperLiteral;
        assert_eq!(
            compile_relation(&rel(0, Mandatory, "v", &["v1"]), m),
            Formula::iff(v("v"), v("v1"))
        );
        assert_eq!(
            compile_relation(&rel(0, Optional, "v", &["v3"]), m),
            Formula::implies(v("v3"), v("v"))
        );
        assert_eq!(
            compile_relation(&rel(0, Alternative, "v1", &["v1.1", "v1.2"]), m),
            Formula::iff(v("v1"), Formula::ExactlyOne(vec![v("v1.1"), v("v1.2")]))
        );
        assert_eq!(
            compile_relation(&rel(0, Or, "v2", &["v2.1", "v2.2", "v2.3", "v2.4"]), m),
            Formula::iff(
                v("v2"),
                Formula::Or(vec![v("v2.1"), v("v2.2"), v("v2.3"), v("v2.4")])
            )
        );
        assert_eq!(
            compile_relation(&rel(0, OptionalAlternative, "p", &["a", "b"]), m),
            Formula::implies(Formula::ExactlyOne(vec![v("a"), v("b")]), v("p"))
        );
        assert_eq!(
            compile_relation(&rel(0, OptionalOr, "p", &["a", "b"]), m),
            Formula::implies(Formula::Or(vec![v("a"), v("b")]), v("p"))
        );
    }

    #[test]
    fn strict_alternative_adds_edges_and_exclusion() {
        let f = compile_relation(
            &rel(0, Alternative, "p", &["a", "b", "c"]),
            SemanticsMode::Strict,
        );
        let Formula::And(parts) = &f else {
            panic!("expected conjunction")
        };
        // literal row + 3 child edges + 3 pairwise exclusions
        assert_eq!(parts.len(), 7);
        assert_eq!(parts[1], Formula::implies(v("a"), v("p")));
        assert_eq!(parts[4], Formula::not(Formula::And(vec![v("a"), v("b")])));
    }

    #[test]
    fn constraints_compile() {
        assert_eq!(
            compile_constraint(&cons(0, ConstraintKind::Requires, "v2.3.1", "v1.1")),
            Formula::implies(v("v2.3.1"), v("v1.1"))
        );
        assert_eq!(
            compile_constraint(&cons(0, ConstraintKind::Excludes, "a", "b")),
            Formula::not(Formula::And(vec![v("a"), v("b")]))
        );
    }

    #[test]
    fn cad_compiles_to_ten_conjuncts() {
        let m = cad();
        let f = compile_model(&m, SemanticsMode::PaperLiteral);
        let Formula::And(parts) = &f else { panic!() };
        assert_eq!(parts.len(), 1 + 7 + 2);
        assert_eq!(parts[0], v("v"));
        let mut fv: Vec<&FeatureId> = f.variables();
        fv.sort();
        let mut mv: Vec<&FeatureId> = m.features().iter().collect();
        mv.sort();
        assert_eq!(fv, mv);
    }

    #[test]
    fn valid_selection_satisfies_v1_subtree() {
        let m = cad();
        let g1 = Formula::iff(Formula::ExactlyOne(vec![v("v1.1"), v("v1.2")]), v("v1"));
        let cfg = make_config(&m, &["v1", "v1.1"], true).unwrap();
        assert!(evaluate(&g1, &cfg).unwrap());
    }

    #[test]
    fn invalid_selection_breaks_dependencies() {
        let m = cad();
        let sel = ["v1", "v1.2", "v2", "v2.3", "v2.3.1", "v2.4", "v3", "v3.1"];
        let cfg = make_config(&m, &sel, true).unwrap();
        let deps = Formula::And(m.constraints().iter().map(compile_constraint).collect());
        assert!(!evaluate(&deps, &cfg).unwrap());
    }

    #[test]
    fn undecided_variable_is_an_error() {
        let m = cad();
        let cfg = make_partial_config(&m, &[("v1", true)]).unwrap();
        let err = evaluate(&Formula::iff(v("v1"), v("v1.1")), &cfg).unwrap_err();
        assert_eq!(err, UndecidedVariable("v1.1".into()));
    }

    #[test]
    fn iff_self_is_tautology() {
        let m = cad();
        for sel in [&[][..], &["v3"][..]] {
            let cfg = make_config(&m, sel, true).unwrap();
            assert!(evaluate(&Formula::iff(v("v3"), v("v3")), &cfg).unwrap());
        }
    }

    #[test]
    fn exactly_one_truth_table() {
        // Or(list) & pairwise exclusion, exhaustively up to six members.
        for n in 2..=6usize {
            let members: Vec<Formula<usize>> = (0..n).map(Formula::Var).collect();
            let eo = Formula::ExactlyOne(members.clone());
            let mut pairs = vec![Formula::Or(members.clone())];
            for i in 0..n {
                for j in i + 1..n {
                    pairs.push(Formula::not(Formula::And(vec![
                        members[i].clone(),
                        members[j].clone(),
                    ])));
                }
            }
            let expanded = Formula::And(pairs);
            for bits in 0u32..(1 << n) {
                let look = |i: &usize| Some(bits >> i & 1 == 1);
                assert_eq!(
                    eo.eval_with(&look),
                    expanded.eval_with(&look),
                    "n={n} bits={bits:b}"
                );
                assert_eq!(eo.eval_with(&look).unwrap(), bits.count_ones() == 1);
            }
        }
    }

    #[test]
    fn binary_xor_matches_exactly_one() {
        let eo = Formula::ExactlyOne(vec![Formula::Var(0usize), Formula::Var(1)]);
        for bits in 0u32..4 {
            let look = |i: &usize| Some(bits >> i & 1 == 1);
            assert_eq!(
                eo.eval_with(&look).unwrap(),
                (bits & 1 == 1) ^ (bits >> 1 & 1 == 1)
            );
        }
    }

    #[test]
    fn strict_strengthens_paper_literal() {
        for rtype in RelationType::ALL {
            let kids: &[&str] = if rtype.is_group() {
                &["a", "b", "c"]
            } else {
                &["a"]
            };
            let r = rel(0, rtype, "p", kids);
            let strict = compile_relation(&r, SemanticsMode::Strict);
            let literal = compile_relation(&r, SemanticsMode::PaperLiteral);
            let names = ["p", "a", "b", "c"];
            for bits in 0u32..16 {
                let look = |f: &FeatureId| {
                    names
                        .iter()
                        .position(|n| *n == f.as_str())
                        .map(|i| bits >> i & 1 == 1)
                };
                if strict.eval_with(&look).unwrap() {
                    assert!(literal.eval_with(&look).unwrap(), "{rtype} bits={bits:04b}");
                }
            }
        }
    }

    #[test]
    fn display_is_readable() {
        let f = compile_relation(
            &rel(0, Alternative, "v1", &["v1.1", "v1.2"]),
            SemanticsMode::PaperLiteral,
        );
        assert_eq!(f.to_string(), "v1 <=> oneof(v1.1, v1.2)");
        let f = compile_constraint(&cons(0, ConstraintKind::Excludes, "a", "b"));
        assert_eq!(f.to_string(), "!(a & b)");
    }
}
