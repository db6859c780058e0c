//! Clausal form: definitional (Tseitin-style) conversion and DIMACS text I/O.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::logic::{compile_constraint, compile_relation, Formula, SemanticsMode};
use crate::model::{is_identifier, ElementId, FeatureId, FeatureModel};

/// Index of a CNF variable, 0-based.
pub type Var = usize;

/// A literal: variable plus polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: Var,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Lit {
        Lit {
            var,
            positive: true,
        }
    }

    pub fn neg(var: Var) -> Lit {
        Lit {
            var,
            positive: false,
        }
    }

    pub fn new(var: Var, positive: bool) -> Lit {
        Lit { var, positive }
    }

    pub fn negate(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// Dense code: `2 * var + (negative as usize)`.
    pub fn code(self) -> usize {
        2 * self.var + (!self.positive) as usize
    }

    /// DIMACS integer (1-based, sign = polarity).
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        self.negate()
    }
}

/// A CNF variable: either a named feature or a definitional auxiliary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CnfVar {
    Feature(FeatureId),
    Aux(usize),
}

impl fmt::Display for CnfVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CnfVar::Feature(id) => write!(f, "{id}"),
            CnfVar::Aux(n) => write!(f, "_aux{n}"),
        }
    }
}

/// What a clause was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Structural,
    Element(ElementId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    /// Feature variables first, auxiliaries after.
    pub variables: Vec<CnfVar>,
    pub clauses: Vec<Vec<Lit>>,
    /// One entry per clause.
    pub origins: Vec<Origin>,
}

impl Cnf {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_features(&self) -> usize {
        self.variables
            .iter()
            .take_while(|v| matches!(v, CnfVar::Feature(_)))
            .count()
    }

    /// The feature variables, `0..num_features()`.
    pub fn feature_vars(&self) -> Vec<Var> {
        (0..self.num_features()).collect()
    }

    pub fn var_of(&self, feature: &str) -> Option<Var> {
        self.variables
            .iter()
            .position(|v| matches!(v, CnfVar::Feature(f) if f.as_str() == feature))
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>, origin: Origin) {
        self.clauses.push(clause);
        self.origins.push(origin);
    }

    /// DIMACS text with `c var <index> <name>` comments for feature variables.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.variables.iter().enumerate() {
            if let CnfVar::Feature(f) = v {
                let _ = writeln!(out, "c var {} {}", i + 1, f);
            }
        }
        let _ = writeln!(out, "p cnf {} {}", self.variables.len(), self.clauses.len());
        for clause in &self.clauses {
            for l in clause {
                let _ = write!(out, "{} ", l.to_dimacs());
            }
            out.push_str("0\n");
        }
        out
    }

    /// Parses DIMACS CNF. `c var <index> <name>` comments name feature variables;
    /// unnamed variables become features `x<index>`. Named variables must come
    /// before unnamed ones so that features stay in front.
    pub fn from_dimacs(text: &str) -> Result<Cnf, DimacsError> {
        let mut header: Option<(usize, usize)> = None;
        let mut names: Vec<(usize, String)> = Vec::new();
        let mut clauses: Vec<Vec<Lit>> = Vec::new();
        let mut current: Vec<Lit> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed == "%" {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('c') {
                let words: Vec<&str> = rest.split_whitespace().collect();
                if let ["var", idx, name] = words[..] {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| DimacsError::new(line_no, "bad variable index"))?;
                    if idx == 0 || !is_identifier(name) {
                        return Err(DimacsError::new(line_no, "bad variable name comment"));
                    }
                    names.push((idx, name.to_string()));
                }
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('p') {
                let words: Vec<&str> = rest.split_whitespace().collect();
                match words[..] {
                    ["cnf", v, c] => {
                        let v = v
                            .parse()
                            .map_err(|_| DimacsError::new(line_no, "bad header"))?;
                        let c = c
                            .parse()
                            .map_err(|_| DimacsError::new(line_no, "bad header"))?;
                        header = Some((v, c));
                    }
                    _ => {
                        return Err(DimacsError::new(
                            line_no,
                            "expected `p cnf <vars> <clauses>`",
                        ))
                    }
                }
                continue;
            }
            let (nvars, _) =
                header.ok_or_else(|| DimacsError::new(line_no, "clause before header"))?;
            for tok in trimmed.split_whitespace() {
                let n: i64 = tok
                    .parse()
                    .map_err(|_| DimacsError::new(line_no, format!("bad literal `{tok}`")))?;
                if n == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    let var = n.unsigned_abs() as usize;
                    if var > nvars {
                        return Err(DimacsError::new(
                            line_no,
                            format!("variable {var} exceeds declared {nvars}"),
                        ));
                    }
                    current.push(Lit::new(var - 1, n > 0));
                }
            }
        }
        let (nvars, nclauses) = header.ok_or_else(|| DimacsError::new(0, "missing header"))?;
        if !current.is_empty() {
            clauses.push(current);
        }
        if clauses.len() != nclauses {
            return Err(DimacsError::new(
                0,
                format!(
                    "header declares {nclauses} clauses, found {}",
                    clauses.len()
                ),
            ));
        }
        let mut slot: Vec<Option<String>> = vec![None; nvars];
        for (idx, name) in names {
            if idx > nvars {
                return Err(DimacsError::new(
                    0,
                    format!("named variable {idx} exceeds declared {nvars}"),
                ));
            }
            slot[idx - 1] = Some(name);
        }
        let variables = slot
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let name = n.unwrap_or_else(|| format!("x{}", i + 1));
                CnfVar::Feature(FeatureId::new(name).expect("checked identifier"))
            })
            .collect();
        let origins = vec![Origin::Structural; clauses.len()];
        Ok(Cnf {
            variables,
            clauses,
            origins,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dimacs line {line}: {message}")]
pub struct DimacsError {
    pub line: usize,
    pub message: String,
}

impl DimacsError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        DimacsError {
            line,
            message: message.into(),
        }
    }
}

/// Incremental definitional encoder over a fixed feature-variable prefix.
struct Encoder {
    cnf: Cnf,
    next_aux: usize,
    origin: Origin,
}

impl Encoder {
    fn new(features: &[FeatureId]) -> Self {
        Encoder {
            cnf: Cnf {
                variables: features.iter().cloned().map(CnfVar::Feature).collect(),
                clauses: Vec::new(),
                origins: Vec::new(),
            },
            next_aux: 0,
            origin: Origin::Structural,
        }
    }

    fn fresh(&mut self) -> Var {
        self.cnf.variables.push(CnfVar::Aux(self.next_aux));
        self.next_aux += 1;
        self.cnf.variables.len() - 1
    }

    fn emit(&mut self, clause: Vec<Lit>) {
        self.cnf.add_clause(clause, self.origin);
    }

    /// Literal form of `f` when it is a (possibly negated) variable.
    fn literal(f: &Formula<Var>) -> Option<Lit> {
        match f {
            Formula::Var(v) => Some(Lit::pos(*v)),
            Formula::Not(g) => Self::literal(g).map(Lit::negate),
            _ => None,
        }
    }

    /// Asserts `f` at top level.
    fn assert(&mut self, f: &Formula<Var>) {
        if let Formula::And(gs) = f {
            for g in gs {
                self.assert(g);
            }
            return;
        }
        if let Some(l) = Self::literal(f) {
            self.emit(vec![l]);
            return;
        }
        // Negated conjunction of literals is a single clause.
        if let Formula::Not(g) = f {
            if let Formula::And(gs) = g.as_ref() {
                if let Some(lits) = gs.iter().map(Self::literal).collect::<Option<Vec<_>>>() {
                    self.emit(lits.into_iter().map(Lit::negate).collect());
                    return;
                }
            }
        }
        let l = self.encode(f);
        self.emit(vec![l]);
    }

    /// Returns a literal equivalent to `f`, defining auxiliaries in preorder.
    fn encode(&mut self, f: &Formula<Var>) -> Lit {
        match f {
            Formula::Var(v) => Lit::pos(*v),
            Formula::Not(g) => self.encode(g).negate(),
            Formula::And(gs) | Formula::Or(gs) if gs.len() == 1 => self.encode(&gs[0]),
            Formula::And(gs) => {
                let t = self.fresh();
                let ls: Vec<Lit> = gs.iter().map(|g| self.encode(g)).collect();
                let mut back = vec![Lit::pos(t)];
                for &l in &ls {
                    self.emit(vec![Lit::neg(t), l]);
                    back.push(!l);
                }
                self.emit(back);
                Lit::pos(t)
            }
            Formula::Or(gs) => {
                let t = self.fresh();
                let ls: Vec<Lit> = gs.iter().map(|g| self.encode(g)).collect();
                let mut fwd = vec![Lit::neg(t)];
                for &l in &ls {
                    self.emit(vec![Lit::pos(t), !l]);
                    fwd.push(l);
                }
                self.emit(fwd);
                Lit::pos(t)
            }
            Formula::Implies(a, b) => {
                let t = self.fresh();
                let a = self.encode(a);
                let b = self.encode(b);
                self.emit(vec![Lit::neg(t), !a, b]);
                self.emit(vec![Lit::pos(t), a]);
                self.emit(vec![Lit::pos(t), !b]);
                Lit::pos(t)
            }
            Formula::Iff(a, b) => {
                let t = self.fresh();
                let a = self.encode(a);
                let b = self.encode(b);
                self.emit(vec![Lit::neg(t), !a, b]);
                self.emit(vec![Lit::neg(t), a, !b]);
                self.emit(vec![Lit::pos(t), a, b]);
                self.emit(vec![Lit::pos(t), !a, !b]);
                Lit::pos(t)
            }
            Formula::ExactlyOne(gs) => {
                let t = self.fresh();
                let ls: Vec<Lit> = gs.iter().map(|g| self.encode(g)).collect();
                // t => at least one
                let mut some = vec![Lit::neg(t)];
                some.extend(ls.iter().copied());
                self.emit(some);
                // t => pairwise at most one
                for i in 0..ls.len() {
                    for j in i + 1..ls.len() {
                        self.emit(vec![Lit::neg(t), !ls[i], !ls[j]]);
                    }
                }
                // exactly one => t
                for i in 0..ls.len() {
                    let mut c = vec![!ls[i]];
                    c.extend(
                        ls.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, l)| *l),
                    );
                    c.push(Lit::pos(t));
                    self.emit(c);
                }
                Lit::pos(t)
            }
        }
    }
}

fn index_formula(f: &Formula, features: &[FeatureId]) -> Formula<Var> {
    f.map_vars(|v| {
        features
            .iter()
            .position(|g| g == v)
            .unwrap_or_else(|| panic!("variable `{v}` missing from the variable order"))
    })
}

/// Converts `f` to an equisatisfiable CNF. Feature variables are ordered by
/// first occurrence in `f`; every clause has a structural origin.
pub fn to_cnf(f: &Formula) -> Cnf {
    let vars: Vec<FeatureId> = f.variables().into_iter().cloned().collect();
    to_cnf_with_vars(f, &vars)
}

/// Like [`to_cnf`] with an explicit feature-variable order, which must cover
/// every variable of `f`.
pub fn to_cnf_with_vars(f: &Formula, vars: &[FeatureId]) -> Cnf {
    let mut enc = Encoder::new(vars);
    enc.assert(&index_formula(f, vars));
    enc.cnf
}

/// Compiles a model straight to CNF with per-element clause origins.
pub fn model_cnf(m: &FeatureModel, mode: SemanticsMode) -> Cnf {
    model_cnf_subset(m, mode, &m.elements())
}

/// CNF of the root assertion plus the listed relations and constraints only.
pub fn model_cnf_subset(m: &FeatureModel, mode: SemanticsMode, keep: &[ElementId]) -> Cnf {
    let vars = m.features();
    let mut enc = Encoder::new(vars);
    enc.assert(&Formula::Var(0));
    for &e in keep {
        let f = match e {
            ElementId::Relation(i) => {
                compile_relation(m.relation(i).expect("relation id from this model"), mode)
            }
            ElementId::Constraint(i) => {
                compile_constraint(m.constraint(i).expect("constraint id from this model"))
            }
        };
        enc.origin = Origin::Element(e);
        enc.assert(&index_formula(&f, vars));
    }
    enc.cnf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::compile_model;
    use crate::model::tests::{cad, fid};

    fn v(s: &str) -> Formula {
        Formula::Var(fid(s))
    }

    /// Brute-force projected solution set of a CNF onto its first `k` variables.
    fn cnf_projection(cnf: &Cnf, k: usize) -> std::collections::BTreeSet<u64> {
        let n = cnf.num_vars();
        assert!(n <= 22);
        let mut out = std::collections::BTreeSet::new();
        for bits in 0u64..(1 << n) {
            let sat = cnf
                .clauses
                .iter()
                .all(|c| c.iter().any(|l| (bits >> l.var & 1 == 1) == l.positive));
            if sat {
                out.insert(bits & ((1 << k) - 1));
            }
        }
        out
    }

    fn formula_models(f: &Formula<Var>, k: usize) -> std::collections::BTreeSet<u64> {
        (0u64..(1 << k))
            .filter(|bits| f.eval_with(&|i: &usize| Some(bits >> i & 1 == 1)).unwrap())
            .collect()
    }

    #[test]
    fn single_variable() {
        let cnf = to_cnf(&v("x"));
        assert_eq!(cnf.clauses, vec![vec![Lit::pos(0)]]);
        assert_eq!(cnf.num_vars(), 1);
    }

    #[test]
    fn negated_literal_conjunction_needs_no_aux() {
        let cnf = to_cnf(&Formula::not(Formula::And(vec![v("a"), v("b")])));
        assert_eq!(cnf.clauses, vec![vec![Lit::neg(0), Lit::neg(1)]]);
        assert_eq!(cnf.num_vars(), 2);
    }

    #[test]
    fn double_negation_folds() {
        let cnf = to_cnf(&Formula::not(Formula::not(v("a"))));
        assert_eq!(cnf.clauses, vec![vec![Lit::pos(0)]]);
    }

    #[test]
    fn aux_numbering_is_preorder() {
        // Iff gets aux 0, the nested ExactlyOne aux 1.
        let f = Formula::iff(v("p"), Formula::ExactlyOne(vec![v("a"), v("b")]));
        let cnf = to_cnf(&f);
        assert_eq!(cnf.variables[3], CnfVar::Aux(0));
        assert_eq!(cnf.variables[4], CnfVar::Aux(1));
        assert_eq!(*cnf.clauses.last().unwrap(), vec![Lit::pos(3)]);
    }

    #[test]
    fn each_connective_preserves_projected_models() {
        let a = || Formula::Var(0usize);
        let b = || Formula::Var(1usize);
        let c = || Formula::Var(2usize);
        let cases: Vec<Formula<Var>> = vec![
            Formula::Or(vec![a(), Formula::And(vec![b(), c()])]),
            Formula::implies(Formula::Or(vec![a(), b()]), c()),
            Formula::iff(a(), Formula::ExactlyOne(vec![a(), b(), c()])),
            Formula::not(Formula::iff(a(), b())),
            Formula::ExactlyOne(vec![a(), Formula::not(b()), c()]),
            Formula::not(Formula::Or(vec![a(), b()])),
            Formula::And(vec![
                Formula::implies(a(), b()),
                Formula::not(Formula::And(vec![b(), c()])),
            ]),
        ];
        for f in cases {
            let names = [fid("a"), fid("b"), fid("c")];
            let named = f.map_vars(|i| names[*i].clone());
            let cnf = to_cnf_with_vars(&named, &names);
            assert_eq!(cnf_projection(&cnf, 3), formula_models(&f, 3), "{named}");
        }
    }

    #[test]
    fn cad_projection_matches_formula() {
        let m = cad();
        let f = compile_model(&m, SemanticsMode::Strict);
        let cnf = model_cnf(&m, SemanticsMode::Strict);
        let indexed = index_formula(&f, m.features());
        let expected = formula_models(&indexed, 14);
        assert_eq!(expected.len(), 74);
        // The strict CAD CNF has too many auxiliaries for a naive 2^n scan;
        // check every formula model extends to a CNF model and vice versa by
        // propagating definitional clauses (auxiliaries are functionally determined).
        let mut cnf_models = std::collections::BTreeSet::new();
        for bits in 0u64..(1 << 14) {
            if let Some(ok) = extend_and_check(&cnf, bits) {
                if ok {
                    cnf_models.insert(bits);
                }
            }
        }
        assert_eq!(cnf_models, expected);
        let plain = to_cnf_with_vars(&f, m.features());
        assert_eq!(plain.clauses, cnf.clauses);
    }

    /// Fix the feature bits, then repeatedly set auxiliaries from their definitions
    /// by trying both values; auxiliaries are defined bottom-up so a fixpoint is reached.
    fn extend_and_check(cnf: &Cnf, feature_bits: u64) -> Option<bool> {
        let k = cnf.num_features();
        let n = cnf.num_vars();
        let mut val: Vec<Option<bool>> = (0..n)
            .map(|i| {
                if i < k {
                    Some(feature_bits >> i & 1 == 1)
                } else {
                    None
                }
            })
            .collect();
        loop {
            let mut changed = false;
            for c in &cnf.clauses {
                let mut unassigned = None;
                let mut count = 0;
                let mut satisfied = false;
                for l in c {
                    match val[l.var] {
                        Some(b) if b == l.positive => satisfied = true,
                        Some(_) => {}
                        None => {
                            count += 1;
                            unassigned = Some(*l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                if count == 0 {
                    return Some(false);
                }
                if count == 1 {
                    let l = unassigned.unwrap();
                    val[l.var] = Some(l.positive);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if val.iter().any(Option::is_none) {
            return None;
        }
        Some(
            cnf.clauses
                .iter()
                .all(|c| c.iter().any(|l| val[l.var] == Some(l.positive))),
        )
    }

    #[test]
    fn model_cnf_origins() {
        let m = cad();
        let cnf = model_cnf(&m, SemanticsMode::Strict);
        assert_eq!(cnf.origins.len(), cnf.clauses.len());
        assert_eq!(cnf.origins[0], Origin::Structural);
        assert_eq!(
            *cnf.origins.last().unwrap(),
            Origin::Element(ElementId::Constraint(1))
        );
        let names: Vec<String> = cnf.variables[..14].iter().map(|v| v.to_string()).collect();
        assert_eq!(names[0], "v");
        assert_eq!(cnf.num_features(), 14);
    }

    #[test]
    fn dimacs_round_trip() {
        let m = cad();
        let cnf = model_cnf(&m, SemanticsMode::PaperLiteral);
        let text = cnf.to_dimacs();
        assert!(text.contains("c var 11 v2.3.1\n"));
        assert!(text.contains(&format!("p cnf {} {}\n", cnf.num_vars(), cnf.clauses.len())));
        let back = Cnf::from_dimacs(&text).unwrap();
        assert_eq!(back.clauses, cnf.clauses);
        assert_eq!(back.variables[..14], cnf.variables[..14]);
        assert_eq!(back.variables[14].to_string(), "x15");
    }

    #[test]
    fn dimacs_errors() {
        assert!(Cnf::from_dimacs("1 2 0\n").is_err());
        assert!(Cnf::from_dimacs("p cnf 1 1\n2 0\n").is_err());
        assert!(Cnf::from_dimacs("p cnf 2 2\n1 0\n").is_err());
        assert!(Cnf::from_dimacs("p cnf 2 1\n1 x 0\n").is_err());
        let cnf = Cnf::from_dimacs("c plain comment\np cnf 2 1\n1 -2\n0\n").unwrap();
        assert_eq!(cnf.clauses, vec![vec![Lit::pos(0), Lit::neg(1)]]);
    }
}
