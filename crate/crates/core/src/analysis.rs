//! Model-health and configuration queries on top of the SAT engine.
//!
//! Every query compiles the model once (see [`Analyzer`]) and then asks
//! satisfiability questions under unit assumptions, one solver run per
//! feature where a per-feature answer is needed. Results are always
//! reported in feature declaration order.

use std::cell::OnceCell;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::cnf::{model_cnf, model_cnf_subset, Cnf, Lit};
use crate::logic::{
    compile_constraint, compile_relation, Formula, SemanticsMode, UndecidedVariable,
};
use crate::model::{Configuration, ElementId, FeatureId, FeatureModel, RelationType, Truth};
use crate::sat::{enumerate_under, solve_under, SolutionSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("the feature model is void (it has no products)")]
    VoidModel,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("{0} does not hold")]
    ConditionAbsent(Target),
    #[error(transparent)]
    Undecided(#[from] UndecidedVariable),
}

/// What a failed check was compiled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationSource {
    Root,
    Element(ElementId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub source: ViolationSource,
    /// Rendering of the violated formula.
    pub formula: String,
    /// Always false for reported violations.
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigVerdict {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelHealthReport {
    pub void: bool,
    pub dead: Vec<FeatureId>,
    pub false_optional: Vec<FeatureId>,
    /// Minimal explanation per dead or false-optional feature.
    pub implicated: IndexMap<FeatureId, Vec<ElementId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropagationResult {
    pub forced_in: Vec<FeatureId>,
    pub forced_out: Vec<FeatureId>,
    pub free: Vec<FeatureId>,
    pub conflict: bool,
}

/// The condition an explanation accounts for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    VoidModel,
    Dead(FeatureId),
    FalseOptional(FeatureId),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::VoidModel => write!(f, "void model"),
            Target::Dead(x) => write!(f, "dead feature `{x}`"),
            Target::FalseOptional(x) => write!(f, "false optional `{x}`"),
        }
    }
}

/// Products containing a feature over all products, as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commonality {
    pub containing: u64,
    pub products: u64,
}

impl Commonality {
    pub fn as_f64(self) -> f64 {
        self.containing as f64 / self.products as f64
    }

    pub fn is_one(self) -> bool {
        self.containing == self.products
    }

    pub fn is_zero(self) -> bool {
        self.containing == 0
    }
}

impl fmt::Display for Commonality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.containing, self.products)
    }
}

/// The root literal and every compiled relation and constraint, each kept
/// separately so a verdict can name the parts a configuration breaks.
pub struct ConfigChecker<'m> {
    model: &'m FeatureModel,
    /// Source, rendering, and the formula over feature indices.
    parts: Vec<(ViolationSource, String, Formula<usize>)>,
}

impl<'m> ConfigChecker<'m> {
    pub fn new(m: &'m FeatureModel, mode: SemanticsMode) -> Self {
        let parts = std::iter::once((ViolationSource::Root, Formula::Var(m.root().clone())))
            .chain(m.relations().iter().map(|r| {
                (
                    ViolationSource::Element(ElementId::Relation(r.id)),
                    compile_relation(r, mode),
                )
            }))
            .chain(m.constraints().iter().map(|c| {
                (
                    ViolationSource::Element(ElementId::Constraint(c.id)),
                    compile_constraint(c),
                )
            }))
            .map(|(src, f)| {
                let indexed = f.map_vars(|v| m.index_of(v.as_str()).expect("model feature"));
                (src, f.to_string(), indexed)
            })
            .collect();
        ConfigChecker { model: m, parts }
    }

    /// Evaluates every part against a total configuration; the verdict
    /// lists each false one.
    pub fn check(&self, cfg: &Configuration) -> Result<ConfigVerdict, AnalysisError> {
        let values: Vec<Option<bool>> = self
            .model
            .features()
            .iter()
            .map(|f| cfg.value(f.as_str()))
            .collect();
        let mut violations = Vec::new();
        for (source, f, indexed) in &self.parts {
            let holds = indexed
                .eval_with(&|i: &usize| values[*i])
                .map_err(|i| UndecidedVariable(self.model.features()[*i].to_string()))?;
            if !holds {
                violations.push(Violation {
                    source: *source,
                    formula: f.clone(),
                    value: false,
                });
            }
        }
        Ok(ConfigVerdict {
            valid: violations.is_empty(),
            violations,
        })
    }
}

pub fn check_config(
    m: &FeatureModel,
    cfg: &Configuration,
    mode: SemanticsMode,
) -> Result<ConfigVerdict, AnalysisError> {
    ConfigChecker::new(m, mode).check(cfg)
}

/// A model compiled once under one semantics mode.
pub struct Analyzer<'m> {
    model: &'m FeatureModel,
    mode: SemanticsMode,
    cnf: Cnf,
    void: OnceCell<bool>,
    product_count: OnceCell<u64>,
}

impl<'m> Analyzer<'m> {
    pub fn new(model: &'m FeatureModel, mode: SemanticsMode) -> Self {
        Analyzer {
            model,
            mode,
            cnf: model_cnf(model, mode),
            void: OnceCell::new(),
            product_count: OnceCell::new(),
        }
    }

    pub fn model(&self) -> &FeatureModel {
        self.model
    }

    pub fn mode(&self) -> SemanticsMode {
        self.mode
    }

    pub fn cnf(&self) -> &Cnf {
        &self.cnf
    }

    fn lit(&self, f: &str, value: bool) -> Result<Lit, AnalysisError> {
        self.model
            .index_of(f)
            .map(|v| Lit::new(v, value))
            .ok_or_else(|| AnalysisError::UnknownFeature(f.to_string()))
    }

    fn sat(&self, assumptions: &[Lit]) -> bool {
        solve_under(&self.cnf, assumptions).is_sat()
    }

    pub fn is_void(&self) -> bool {
        *self.void.get_or_init(|| !self.sat(&[]))
    }

    fn require_consistent(&self) -> Result<(), AnalysisError> {
        if self.is_void() {
            Err(AnalysisError::VoidModel)
        } else {
            Ok(())
        }
    }

    fn is_dead(&self, index: usize) -> bool {
        !self.sat(&[Lit::pos(index)])
    }

    pub fn dead_features(&self) -> Result<Vec<FeatureId>, AnalysisError> {
        self.require_consistent()?;
        Ok(self
            .model
            .features()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_dead(*i))
            .map(|(_, f)| f.clone())
            .collect())
    }

    /// Whether `f` is declared non-mandatory yet selected in every product
    /// that selects its (live) parent.
    fn is_false_optional(&self, f: &FeatureId) -> bool {
        let Some(rel) = self.model.incoming_relation(f.as_str()) else {
            return false;
        };
        if rel.rtype == RelationType::Mandatory {
            return false;
        }
        let parent = self
            .model
            .index_of(rel.parent.as_str())
            .expect("parent exists");
        let me = self.model.index_of(f.as_str()).expect("feature exists");
        self.sat(&[Lit::pos(parent)]) && !self.sat(&[Lit::pos(parent), Lit::neg(me)])
    }

    pub fn false_optionals(&self) -> Result<Vec<FeatureId>, AnalysisError> {
        self.require_consistent()?;
        Ok(self
            .model
            .features()
            .iter()
            .filter(|f| self.is_false_optional(f))
            .cloned()
            .collect())
    }

    pub fn core_features(&self) -> Result<Vec<FeatureId>, AnalysisError> {
        self.require_consistent()?;
        Ok(self
            .model
            .features()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.sat(&[Lit::neg(*i)]))
            .map(|(_, f)| f.clone())
            .collect())
    }

    pub fn count_products(&self) -> u64 {
        *self.product_count.get_or_init(|| {
            enumerate_under(&self.cnf, &[], &self.cnf.feature_vars(), None).len() as u64
        })
    }

    pub fn list_products(&self, limit: Option<usize>) -> SolutionSet {
        enumerate_under(&self.cnf, &[], &self.cnf.feature_vars(), limit)
    }

    pub fn commonality(&self, f: &str) -> Result<Commonality, AnalysisError> {
        let lit = self.lit(f, true)?;
        self.require_consistent()?;
        let containing =
            enumerate_under(&self.cnf, &[lit], &self.cnf.feature_vars(), None).len() as u64;
        Ok(Commonality {
            containing,
            products: self.count_products(),
        })
    }

    /// Consequences of the decided features in `cfg`.
    pub fn propagate(&self, cfg: &Configuration) -> Result<PropagationResult, AnalysisError> {
        let mut decisions = Vec::new();
        let mut undecided = Vec::new();
        for (f, t) in cfg.iter() {
            match t {
                Truth::Undecided => undecided.push(self.lit(f.as_str(), true)?),
                t => decisions.push(self.lit(f.as_str(), t == Truth::True)?),
            }
        }
        if !self.sat(&decisions) {
            return Ok(PropagationResult {
                conflict: true,
                ..Default::default()
            });
        }
        let mut result = PropagationResult::default();
        let mut with = decisions.clone();
        for lit in undecided {
            let name = self.model.features()[lit.var].clone();
            with.push(!lit);
            let can_be_out = self.sat(&with);
            with.pop();
            with.push(lit);
            let can_be_in = self.sat(&with);
            with.pop();
            match (can_be_in, can_be_out) {
                (true, true) => result.free.push(name),
                (true, false) => result.forced_in.push(name),
                (false, true) => result.forced_out.push(name),
                (false, false) => unreachable!("decisions were satisfiable"),
            }
        }
        Ok(result)
    }

    fn condition_holds(&self, target: &Target, keep: &[ElementId]) -> Result<bool, AnalysisError> {
        let assumptions = match target {
            Target::VoidModel => vec![],
            Target::Dead(f) => vec![self.lit(f.as_str(), true)?],
            Target::FalseOptional(f) => {
                let parent = self
                    .model
                    .parent(f.as_str())
                    .ok_or_else(|| AnalysisError::ConditionAbsent(target.clone()))?;
                vec![
                    self.lit(parent.as_str(), true)?,
                    self.lit(f.as_str(), false)?,
                ]
            }
        };
        let cnf = model_cnf_subset(self.model, self.mode, keep);
        Ok(!solve_under(&cnf, &assumptions).is_sat())
    }

    /// Subset-minimal set of relations and constraints that alone produce
    /// `target`, found by dropping elements one at a time in declaration order.
    pub fn explain(&self, target: &Target) -> Result<Vec<ElementId>, AnalysisError> {
        let holds = match target {
            Target::VoidModel => self.is_void(),
            Target::Dead(f) => {
                let i = self.lit(f.as_str(), true)?.var;
                self.is_dead(i)
            }
            Target::FalseOptional(f) => {
                self.lit(f.as_str(), true)?;
                self.require_consistent()?;
                self.is_false_optional(f)
            }
        };
        if !holds {
            return Err(AnalysisError::ConditionAbsent(target.clone()));
        }
        let mut keep = self.model.elements();
        let mut i = 0;
        while i < keep.len() {
            let mut trial = keep.clone();
            trial.remove(i);
            if self.condition_holds(target, &trial)? {
                keep = trial;
            } else {
                i += 1;
            }
        }
        Ok(keep)
    }

    /// Void check, then dead and false-optional features with explanations.
    /// A void model is reported alone.
    pub fn health(&self) -> ModelHealthReport {
        if self.is_void() {
            return ModelHealthReport {
                void: true,
                ..Default::default()
            };
        }
        let dead = self.dead_features().expect("model is consistent");
        let false_optional = self.false_optionals().expect("model is consistent");
        let mut implicated = IndexMap::new();
        for f in &dead {
            let why = self
                .explain(&Target::Dead(f.clone()))
                .expect("feature is dead");
            implicated.insert(f.clone(), why);
        }
        for f in &false_optional {
            let why = self
                .explain(&Target::FalseOptional(f.clone()))
                .expect("feature is false optional");
            implicated.insert(f.clone(), why);
        }
        ModelHealthReport {
            void: false,
            dead,
            false_optional,
            implicated,
        }
    }
}

pub fn is_void(m: &FeatureModel, mode: SemanticsMode) -> bool {
    Analyzer::new(m, mode).is_void()
}

pub fn dead_features(
    m: &FeatureModel,
    mode: SemanticsMode,
) -> Result<Vec<FeatureId>, AnalysisError> {
    Analyzer::new(m, mode).dead_features()
}

pub fn false_optionals(
    m: &FeatureModel,
    mode: SemanticsMode,
) -> Result<Vec<FeatureId>, AnalysisError> {
    Analyzer::new(m, mode).false_optionals()
}

pub fn core_features(
    m: &FeatureModel,
    mode: SemanticsMode,
) -> Result<Vec<FeatureId>, AnalysisError> {
    Analyzer::new(m, mode).core_features()
}

pub fn commonality(
    m: &FeatureModel,
    f: &str,
    mode: SemanticsMode,
) -> Result<Commonality, AnalysisError> {
    Analyzer::new(m, mode).commonality(f)
}

pub fn list_products(m: &FeatureModel, mode: SemanticsMode, limit: Option<usize>) -> SolutionSet {
    Analyzer::new(m, mode).list_products(limit)
}

pub fn count_products(m: &FeatureModel, mode: SemanticsMode) -> u64 {
    Analyzer::new(m, mode).count_products()
}

pub fn propagate(
    m: &FeatureModel,
    cfg: &Configuration,
    mode: SemanticsMode,
) -> Result<PropagationResult, AnalysisError> {
    Analyzer::new(m, mode).propagate(cfg)
}

pub fn explain(
    m: &FeatureModel,
    mode: SemanticsMode,
    target: &Target,
) -> Result<Vec<ElementId>, AnalysisError> {
    Analyzer::new(m, mode).explain(target)
}
