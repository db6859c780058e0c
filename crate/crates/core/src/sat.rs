//! A small deterministic DPLL solver, solution enumeration by blocking
//! clauses, and an exhaustive truth-table oracle used to cross-check both.
//!
//! The search branches on the lowest-index unassigned variable and tries
//! `true` first. Between decisions it runs unit propagation to fixpoint and
//! then assigns pure literals. Clause state is tracked with per-clause
//! counters (satisfied literals, falsified literals), which makes undo on
//! backtrack a plain reversal of the trail.

use thiserror::Error;

use crate::cnf::{Cnf, Lit, Var};
use crate::logic::Formula;
use crate::model::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatResult {
    pub status: SatStatus,
    /// Total assignment over the CNF variables, present iff satisfiable.
    pub witness: Option<Vec<bool>>,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        self.status == SatStatus::Sat
    }
}

/// Projected solutions, sorted ascending by bit-vector (`false < true`,
/// first projected variable most significant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSet {
    pub solutions: Vec<Vec<bool>>,
    /// Set when the limit stopped enumeration while further solutions remained.
    pub truncated: bool,
    pub limit: Option<usize>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle is limited to {max} variables, got {got}")]
    TooManyVariables { got: usize, max: usize },
}

pub const ORACLE_MAX_VARS: usize = 24;

struct Dpll {
    /// Deduplicated, non-tautological clauses.
    clauses: Vec<Vec<Lit>>,
    /// Clause indices per literal code.
    occurs: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    sat_count: Vec<u32>,
    false_count: Vec<u32>,
    /// Per literal code: number of unsatisfied clauses containing it.
    active: Vec<u32>,
    open_clauses: usize,
    trail: Vec<Lit>,
    /// (trail length before the decision, decision literal, second branch taken)
    decisions: Vec<(usize, Lit, bool)>,
    queue: Vec<Lit>,
    empty_clause: bool,
}

impl Dpll {
    fn new<'a>(num_vars: usize, clauses: impl Iterator<Item = &'a [Lit]>) -> Self {
        let mut occurs = vec![Vec::new(); 2 * num_vars];
        let mut active = vec![0; 2 * num_vars];
        let mut kept: Vec<Vec<Lit>> = Vec::new();
        let mut empty_clause = false;
        let mut queue = Vec::new();
        for c in clauses {
            if c.is_empty() {
                empty_clause = true;
                continue;
            }
            // Tautologies never constrain anything.
            if c.iter().any(|l| c.contains(&l.negate())) {
                continue;
            }
            let mut lits: Vec<Lit> = Vec::with_capacity(c.len());
            for &l in c {
                if !lits.contains(&l) {
                    lits.push(l);
                }
            }
            let ci = kept.len();
            for l in &lits {
                occurs[l.code()].push(ci);
                active[l.code()] += 1;
            }
            if lits.len() == 1 {
                queue.push(lits[0]);
            }
            kept.push(lits);
        }
        let n = kept.len();
        Dpll {
            clauses: kept,
            occurs,
            value: vec![None; num_vars],
            sat_count: vec![0; n],
            false_count: vec![0; n],
            active,
            open_clauses: n,
            trail: Vec::new(),
            decisions: Vec::new(),
            queue,
            empty_clause,
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var].map(|v| v == l.positive)
    }

    /// Assigns `l` true. Returns false on conflict; counters are fully
    /// updated either way so the assignment can be undone.
    fn assign(&mut self, l: Lit) -> bool {
        self.value[l.var] = Some(l.positive);
        self.trail.push(l);
        let mut ok = true;
        for &ci in &self.occurs[l.code()] {
            self.sat_count[ci] += 1;
            if self.sat_count[ci] == 1 {
                self.open_clauses -= 1;
                for m in &self.clauses[ci] {
                    self.active[m.code()] -= 1;
                }
            }
        }
        for &ci in &self.occurs[l.negate().code()] {
            self.false_count[ci] += 1;
            if self.sat_count[ci] > 0 {
                continue;
            }
            let len = self.clauses[ci].len() as u32;
            if self.false_count[ci] == len {
                ok = false;
            } else if self.false_count[ci] + 1 == len {
                if let Some(&u) = self.clauses[ci]
                    .iter()
                    .find(|m| self.value[m.var].is_none())
                {
                    self.queue.push(u);
                }
            }
        }
        ok
    }

    fn unassign(&mut self, l: Lit) {
        for &ci in &self.occurs[l.code()] {
            self.sat_count[ci] -= 1;
            if self.sat_count[ci] == 0 {
                self.open_clauses += 1;
                for m in &self.clauses[ci] {
                    self.active[m.code()] += 1;
                }
            }
        }
        for &ci in &self.occurs[l.negate().code()] {
            self.false_count[ci] -= 1;
        }
        self.value[l.var] = None;
    }

    /// Unit propagation to fixpoint. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while let Some(l) = self.queue.pop() {
            match self.lit_value(l) {
                Some(true) => continue,
                Some(false) => {
                    self.queue.clear();
                    return false;
                }
                None => {
                    if !self.assign(l) {
                        self.queue.clear();
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Assigns every currently pure literal. Never causes a conflict.
    fn eliminate_pure(&mut self) -> bool {
        let mut any = false;
        for var in 0..self.value.len() {
            if self.value[var].is_some() {
                continue;
            }
            let pos = self.active[Lit::pos(var).code()];
            let neg = self.active[Lit::neg(var).code()];
            let pure = match (pos > 0, neg > 0) {
                (true, false) => Some(Lit::pos(var)),
                (false, true) => Some(Lit::neg(var)),
                _ => None,
            };
            if let Some(l) = pure {
                let ok = self.assign(l);
                debug_assert!(ok, "pure literal cannot falsify a clause");
                any = true;
            }
        }
        any
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let l = self.trail.pop().unwrap();
            self.unassign(l);
        }
    }

    /// Chronological backtracking. Returns false when the search space is exhausted.
    fn backtrack(&mut self) -> bool {
        while let Some((len, lit, flipped)) = self.decisions.pop() {
            self.undo_to(len);
            if !flipped {
                self.decisions.push((len, lit.negate(), true));
                self.queue.clear();
                if self.assign(lit.negate()) && self.propagate() {
                    return true;
                }
                // Conflict right after flipping: keep unwinding.
                continue;
            }
        }
        false
    }

    fn solve(mut self) -> Option<Vec<bool>> {
        if !self.start() || !self.search(false) {
            return None;
        }
        Some(self.value.iter().map(|v| v.unwrap_or(true)).collect())
    }

    fn start(&mut self) -> bool {
        !self.empty_clause && self.propagate()
    }

    fn decide(&mut self, l: Lit) -> bool {
        self.decisions.push((self.trail.len(), l, false));
        (self.assign(l) && self.propagate()) || self.backtrack()
    }

    /// Runs until every clause is satisfied (true) or the space is
    /// exhausted (false). When `complete` is set, pure literals and the
    /// final fill of free variables are recorded as decisions so that
    /// backtracking later visits their other polarity too; the search
    /// then ends with every variable assigned.
    fn search(&mut self, complete: bool) -> bool {
        loop {
            if self.open_clauses == 0 {
                if !complete {
                    return true;
                }
                match self.value.iter().position(Option::is_none) {
                    None => return true,
                    Some(var) => {
                        if !self.decide(Lit::pos(var)) {
                            return false;
                        }
                        continue;
                    }
                }
            }
            if complete {
                if let Some(l) = self.pure_literal() {
                    if !self.decide(l) {
                        return false;
                    }
                    continue;
                }
            } else if self.eliminate_pure() {
                continue;
            }
            match self.value.iter().position(Option::is_none) {
                Some(var) => {
                    if !self.decide(Lit::pos(var)) {
                        return false;
                    }
                }
                // A clause added after its literals were assigned is still false.
                None => {
                    if !self.backtrack() {
                        return false;
                    }
                }
            }
        }
    }

    fn pure_literal(&self) -> Option<Lit> {
        (0..self.value.len())
            .filter(|&v| self.value[v].is_none())
            .find_map(|var| {
                let pos = self.active[Lit::pos(var).code()];
                let neg = self.active[Lit::neg(var).code()];
                match (pos > 0, neg > 0) {
                    (true, false) => Some(Lit::pos(var)),
                    (false, true) => Some(Lit::neg(var)),
                    _ => None,
                }
            })
    }

    /// Adds a clause every literal of which is currently false.
    fn add_falsified(&mut self, lits: Vec<Lit>) {
        debug_assert!(lits.iter().all(|l| self.lit_value(*l) == Some(false)));
        let ci = self.clauses.len();
        for l in &lits {
            self.occurs[l.code()].push(ci);
            self.active[l.code()] += 1;
        }
        self.sat_count.push(0);
        self.false_count.push(lits.len() as u32);
        self.open_clauses += 1;
        self.clauses.push(lits);
    }
}

fn solve_clauses<'a>(num_vars: usize, clauses: impl Iterator<Item = &'a [Lit]>) -> SatResult {
    let witness = Dpll::new(num_vars, clauses).solve();
    SatResult {
        status: if witness.is_some() {
            SatStatus::Sat
        } else {
            SatStatus::Unsat
        },
        witness,
    }
}

pub fn solve(cnf: &Cnf) -> SatResult {
    solve_under(cnf, &[])
}

/// Solves `cnf` conjoined with unit clauses for each assumption.
pub fn solve_under(cnf: &Cnf, assumptions: &[Lit]) -> SatResult {
    let units: Vec<[Lit; 1]> = assumptions.iter().map(|&l| [l]).collect();
    solve_clauses(
        cnf.num_vars(),
        cnf.clauses
            .iter()
            .map(Vec::as_slice)
            .chain(units.iter().map(|u| &u[..])),
    )
}

/// All distinct solutions projected onto `projection`. After each solution
/// a blocking clause over the projected literals is added and the search
/// resumes from the most recent decision.
pub fn enumerate(cnf: &Cnf, projection: &[Var], limit: Option<usize>) -> SolutionSet {
    enumerate_under(cnf, &[], projection, limit)
}

pub fn enumerate_under(
    cnf: &Cnf,
    assumptions: &[Lit],
    projection: &[Var],
    limit: Option<usize>,
) -> SolutionSet {
    assert!(
        projection.iter().all(|&v| v < cnf.num_vars()),
        "projection outside the CNF variables"
    );
    let units: Vec<[Lit; 1]> = assumptions.iter().map(|&l| [l]).collect();
    let mut dpll = Dpll::new(
        cnf.num_vars(),
        cnf.clauses
            .iter()
            .map(Vec::as_slice)
            .chain(units.iter().map(|u| &u[..])),
    );
    let mut solutions = Vec::new();
    let mut truncated = false;
    let mut found = dpll.start() && dpll.search(true);
    while found {
        if limit.is_some_and(|n| solutions.len() >= n) {
            truncated = true;
            break;
        }
        let projected: Vec<bool> = projection
            .iter()
            .map(|&v| dpll.value[v].expect("complete assignment"))
            .collect();
        if projection.is_empty() {
            // The single empty projection has been seen; its blocking clause is empty.
            solutions.push(projected);
            break;
        }
        dpll.add_falsified(
            projection
                .iter()
                .zip(&projected)
                .map(|(&v, &b)| Lit::new(v, !b))
                .collect(),
        );
        solutions.push(projected);
        found = dpll.backtrack() && dpll.search(true);
    }
    solutions.sort();
    SolutionSet {
        solutions,
        truncated,
        limit,
    }
}

pub fn count(cnf: &Cnf, projection: &[Var]) -> u64 {
    enumerate(cnf, projection, None).len() as u64
}

/// Exhaustive truth-table enumeration of `f` over `vars`. Independent of the
/// CNF path; intended as a test oracle.
pub fn oracle_enumerate(f: &Formula, vars: &[FeatureId]) -> Result<SolutionSet, OracleError> {
    if vars.len() > ORACLE_MAX_VARS {
        return Err(OracleError::TooManyVariables {
            got: vars.len(),
            max: ORACLE_MAX_VARS,
        });
    }
    let n = vars.len();
    let indexed: Formula<Option<usize>> = f.map_vars(|v| vars.iter().position(|w| w == v));
    let mut solutions = Vec::new();
    // Counting upward with the first variable as the most significant bit
    // yields the ascending order directly.
    for code in 0u64..(1u64 << n) {
        let bit = |i: usize| code >> (n - 1 - i) & 1 == 1;
        let value = indexed
            .eval_with(&|v: &Option<usize>| v.map(bit))
            .unwrap_or(false);
        if value {
            solutions.push((0..n).map(bit).collect());
        }
    }
    Ok(SolutionSet {
        solutions,
        truncated: false,
        limit: None,
    })
}
