//! Feature models: features arranged in a tree by typed relations, plus
//! cross-tree `requires` / `excludes` constraints.
//!
//! A [`FeatureModel`] can only be obtained through [`build_model`] (or the
//! DSL parser, which calls it), so every value of the type satisfies the
//! structural invariants: a single rooted tree, unique feature names, and
//! constraints that never relate a feature to its own ancestor or descendant.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// Name of a feature. Matches `[A-Za-z_][A-Za-z0-9_.]*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(name: impl Into<String>) -> Result<Self, StructuralError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(FeatureId(name))
        } else {
            Err(StructuralError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for FeatureId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for FeatureId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// True when `s` is a legal feature (or model) identifier.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// The six parent/child relation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationType {
    Mandatory,
    Optional,
    Or,
    Alternative,
    OptionalOr,
    OptionalAlternative,
}

impl RelationType {
    pub const ALL: [RelationType; 6] = [
        RelationType::Mandatory,
        RelationType::Optional,
        RelationType::Or,
        RelationType::Alternative,
        RelationType::OptionalOr,
        RelationType::OptionalAlternative,
    ];

    /// Mandatory and optional relations are per-child edges; the rest are groups.
    pub fn is_group(self) -> bool {
        !matches!(self, RelationType::Mandatory | RelationType::Optional)
    }

    /// DSL keyword for this relation type.
    pub fn keyword(self) -> &'static str {
        match self {
            RelationType::Mandatory => "mandatory",
            RelationType::Optional => "optional",
            RelationType::Or => "or",
            RelationType::Alternative => "alternative",
            RelationType::OptionalOr => "optional_or",
            RelationType::OptionalAlternative => "optional_alternative",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        RelationType::ALL.into_iter().find(|t| t.keyword() == s)
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    /// Declaration ordinal.
    pub id: usize,
    pub parent: FeatureId,
    pub children: Vec<FeatureId>,
    pub rtype: RelationType,
}

impl Relation {
    pub fn new(
        id: usize,
        parent: FeatureId,
        children: Vec<FeatureId>,
        rtype: RelationType,
    ) -> Self {
        Relation {
            id,
            parent,
            children,
            rtype,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({} -> ", self.rtype, self.parent)?;
        if self.rtype.is_group() {
            write!(f, "{{")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, "}})")
        } else {
            write!(f, "{})", self.children[0])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Requires,
    Excludes,
}

impl ConstraintKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ConstraintKind::Requires => "requires",
            ConstraintKind::Excludes => "excludes",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "requires" => Some(ConstraintKind::Requires),
            "excludes" => Some(ConstraintKind::Excludes),
            _ => None,
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTreeConstraint {
    pub id: usize,
    pub kind: ConstraintKind,
    pub source: FeatureId,
    pub target: FeatureId,
}

impl CrossTreeConstraint {
    pub fn new(id: usize, kind: ConstraintKind, source: FeatureId, target: FeatureId) -> Self {
        CrossTreeConstraint {
            id,
            kind,
            source,
            target,
        }
    }
}

impl fmt::Display for CrossTreeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.source, self.kind, self.target)
    }
}

/// A relation or constraint of a model, by declaration ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementId {
    Relation(usize),
    Constraint(usize),
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementId::Relation(i) => write!(f, "r{i}"),
            ElementId::Constraint(i) => write!(f, "c{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("`{0}` is not a valid feature name")]
    InvalidName(String),
    #[error("feature `{feature}` is listed twice in relation {relation}")]
    DuplicateFeature { feature: FeatureId, relation: usize },
    #[error("feature `{feature}` has more than one parent (`{first}` and `{second}`)")]
    MultipleParents {
        feature: FeatureId,
        first: FeatureId,
        second: FeatureId,
    },
    #[error("model has no root feature")]
    NoRoot,
    #[error("model has several candidate roots: {}", join(.0))]
    MultipleRoots(Vec<FeatureId>),
    #[error("relations around `{0}` form a cycle")]
    Cycle(FeatureId),
    #[error("constraint {constraint} references unknown feature `{feature}`")]
    UnknownFeatureInConstraint {
        feature: FeatureId,
        constraint: usize,
    },
    #[error("constraint {constraint} relates `{source_feature}` to itself")]
    SelfConstraint {
        source_feature: FeatureId,
        constraint: usize,
    },
    #[error("constraint {constraint} relates `{ancestor}` to its descendant `{descendant}`")]
    HierarchicalConstraint {
        ancestor: FeatureId,
        descendant: FeatureId,
        constraint: usize,
    },
    #[error("relation {relation} under `{parent}` has no children")]
    EmptyChildList { parent: FeatureId, relation: usize },
    #[error("{rtype} relation {relation} under `{parent}` has {found} children")]
    BadGroupArity {
        parent: FeatureId,
        relation: usize,
        rtype: RelationType,
        found: usize,
    },
    #[error("declared root `{declared}` disagrees with inferred root `{inferred}`")]
    RootMismatch {
        declared: FeatureId,
        inferred: FeatureId,
    },
}

fn join(ids: &[FeatureId]) -> String {
    ids.iter()
        .map(|f| f.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Role of a feature within the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Root,
    VariationPoint,
    Variant,
}

/// A validated feature model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FeatureModel {
    name: String,
    root: FeatureId,
    features: Vec<FeatureId>,
    relations: Vec<Relation>,
    constraints: Vec<CrossTreeConstraint>,
    index: HashMap<FeatureId, usize>,
    /// Incoming relation (index into `relations`) per feature; `None` for the root.
    incoming: Vec<Option<usize>>,
    has_children: Vec<bool>,
}

impl PartialEq for FeatureModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.root == other.root
            && self.features == other.features
            && self.relations == other.relations
            && self.constraints == other.constraints
    }
}

impl Eq for FeatureModel {}

impl FeatureModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &FeatureId {
        &self.root
    }

    /// Features in declaration order: the root first, then first appearance in relations.
    pub fn features(&self) -> &[FeatureId] {
        &self.features
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn constraints(&self) -> &[CrossTreeConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureId> {
        self.index_of(name).map(|i| &self.features[i])
    }

    /// The relation that has `f` as a child; `None` for the root or unknown names.
    pub fn incoming_relation(&self, f: &str) -> Option<&Relation> {
        let i = self.index_of(f)?;
        self.incoming[i].map(|r| &self.relations[r])
    }

    pub fn parent(&self, f: &str) -> Option<&FeatureId> {
        self.incoming_relation(f).map(|r| &r.parent)
    }

    /// Strict ancestry: `is_ancestor(a, a)` is false.
    pub fn is_ancestor(&self, ancestor: &str, of: &str) -> bool {
        let mut cur = self.parent(of);
        while let Some(p) = cur {
            if p.as_str() == ancestor {
                return true;
            }
            cur = self.parent(p.as_str());
        }
        false
    }

    pub fn kind(&self, f: &str) -> Option<FeatureKind> {
        let i = self.index_of(f)?;
        Some(if self.features[i] == self.root {
            FeatureKind::Root
        } else if self.has_children[i] {
            FeatureKind::VariationPoint
        } else {
            FeatureKind::Variant
        })
    }

    /// All relations and constraints in declaration order.
    pub fn elements(&self) -> Vec<ElementId> {
        self.relations
            .iter()
            .map(|r| ElementId::Relation(r.id))
            .chain(self.constraints.iter().map(|c| ElementId::Constraint(c.id)))
            .collect()
    }

    pub fn relation(&self, id: usize) -> Option<&Relation> {
        self.relations.iter().find(|r| r.id == id)
    }

    pub fn constraint(&self, id: usize) -> Option<&CrossTreeConstraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    /// Human-readable description of a relation or constraint.
    pub fn describe(&self, element: ElementId) -> String {
        match element {
            ElementId::Relation(i) => self
                .relation(i)
                .map(|r| r.to_string())
                .unwrap_or_else(|| element.to_string()),
            ElementId::Constraint(i) => self
                .constraint(i)
                .map(|c| c.to_string())
                .unwrap_or_else(|| element.to_string()),
        }
    }
}

/// Validates relations and constraints into a [`FeatureModel`], inferring the root.
pub fn build_model(
    name: &str,
    relations: Vec<Relation>,
    constraints: Vec<CrossTreeConstraint>,
) -> Result<FeatureModel, StructuralError> {
    build_model_with_root(name, None, relations, constraints)
}

/// Like [`build_model`], with an optional declared root. A declared root must
/// agree with the inferred one; it is required when there are no relations.
pub fn build_model_with_root(
    name: &str,
    declared_root: Option<FeatureId>,
    relations: Vec<Relation>,
    constraints: Vec<CrossTreeConstraint>,
) -> Result<FeatureModel, StructuralError> {
    // Per-relation shape.
    for r in &relations {
        if r.children.is_empty() {
            return Err(StructuralError::EmptyChildList {
                parent: r.parent.clone(),
                relation: r.id,
            });
        }
        if r.children.contains(&r.parent) {
            return Err(StructuralError::Cycle(r.parent.clone()));
        }
        let mut seen = HashSet::new();
        for c in &r.children {
            if !seen.insert(c) {
                return Err(StructuralError::DuplicateFeature {
                    feature: c.clone(),
                    relation: r.id,
                });
            }
        }
        let arity_ok = if r.rtype.is_group() {
            r.children.len() >= 2
        } else {
            r.children.len() == 1
        };
        if !arity_ok {
            return Err(StructuralError::BadGroupArity {
                parent: r.parent.clone(),
                relation: r.id,
                rtype: r.rtype,
                found: r.children.len(),
            });
        }
    }

    // First-appearance order over parents and children.
    let mut order: IndexMap<FeatureId, ()> = IndexMap::new();
    if let Some(root) = &declared_root {
        order.insert(root.clone(), ());
    }
    for r in &relations {
        order.insert(r.parent.clone(), ());
        for c in &r.children {
            order.insert(c.clone(), ());
        }
    }

    let mut parent_rel: HashMap<&FeatureId, usize> = HashMap::new();
    for (ri, r) in relations.iter().enumerate() {
        for c in &r.children {
            if let Some(&prev) = parent_rel.get(c) {
                return Err(StructuralError::MultipleParents {
                    feature: c.clone(),
                    first: relations[prev].parent.clone(),
                    second: r.parent.clone(),
                });
            }
            parent_rel.insert(c, ri);
        }
    }

    let candidates: Vec<FeatureId> = order
        .keys()
        .filter(|f| !parent_rel.contains_key(f))
        .cloned()
        .collect();
    let root = match candidates.len() {
        0 => match relations.first() {
            // Every feature has a parent, so following parents must loop.
            Some(r) => return Err(StructuralError::Cycle(r.parent.clone())),
            None => return Err(StructuralError::NoRoot),
        },
        1 => candidates.into_iter().next().unwrap(),
        _ => {
            // A declared root that is itself somebody's child shows up as a mismatch.
            return Err(StructuralError::MultipleRoots(candidates));
        }
    };
    if let Some(declared) = declared_root {
        if declared != root {
            return Err(StructuralError::RootMismatch {
                declared,
                inferred: root,
            });
        }
    }

    // Root first, then first appearance.
    let mut features = vec![root.clone()];
    features.extend(order.keys().filter(|f| **f != root).cloned());
    let index: HashMap<FeatureId, usize> = features
        .iter()
        .enumerate()
        .map(|(i, f)| (f.clone(), i))
        .collect();
    let incoming: Vec<Option<usize>> = features
        .iter()
        .map(|f| parent_rel.get(f).copied())
        .collect();
    let mut has_children = vec![false; features.len()];
    for r in &relations {
        has_children[index[&r.parent]] = true;
    }

    // Reachability from the root; anything unreachable sits on a cycle.
    let mut children_of: Vec<Vec<usize>> = vec![Vec::new(); features.len()];
    for r in &relations {
        let p = index[&r.parent];
        children_of[p].extend(r.children.iter().map(|c| index[c]));
    }
    let mut reached = vec![false; features.len()];
    let mut stack = vec![0usize];
    reached[0] = true;
    while let Some(n) = stack.pop() {
        for &c in &children_of[n] {
            if !reached[c] {
                reached[c] = true;
                stack.push(c);
            }
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(StructuralError::Cycle(features[i].clone()));
    }

    let model = FeatureModel {
        name: name.to_string(),
        root,
        features,
        relations,
        constraints: Vec::new(),
        index,
        incoming,
        has_children,
    };

    for c in &constraints {
        for f in [&c.source, &c.target] {
            if !model.contains(f.as_str()) {
                return Err(StructuralError::UnknownFeatureInConstraint {
                    feature: f.clone(),
                    constraint: c.id,
                });
            }
        }
        if c.source == c.target {
            return Err(StructuralError::SelfConstraint {
                source_feature: c.source.clone(),
                constraint: c.id,
            });
        }
        let (a, b) = (c.source.as_str(), c.target.as_str());
        let pair = if model.is_ancestor(a, b) {
            Some((&c.source, &c.target))
        } else if model.is_ancestor(b, a) {
            Some((&c.target, &c.source))
        } else {
            None
        };
        if let Some((anc, desc)) = pair {
            return Err(StructuralError::HierarchicalConstraint {
                ancestor: anc.clone(),
                descendant: desc.clone(),
                constraint: c.id,
            });
        }
    }

    Ok(FeatureModel {
        constraints,
        ..model
    })
}

/// Classifies `f` as root, variation point (has children) or variant (leaf).
pub fn feature_kind(model: &FeatureModel, f: &str) -> Result<FeatureKind, UnknownFeature> {
    model.kind(f).ok_or_else(|| UnknownFeature(f.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature `{0}`")]
pub struct UnknownFeature(pub String);

/// Selection state of one feature in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Undecided,
}

impl Truth {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Truth::True => Some(true),
            Truth::False => Some(false),
            Truth::Undecided => None,
        }
    }
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

/// A total or partial truth assignment over the features of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    assignment: IndexMap<FeatureId, Truth>,
}

impl Configuration {
    pub fn get(&self, f: &str) -> Option<Truth> {
        self.assignment.get(f).copied()
    }

    pub fn value(&self, f: &str) -> Option<bool> {
        self.get(f).and_then(Truth::as_bool)
    }

    pub fn is_total(&self) -> bool {
        self.assignment.values().all(|t| *t != Truth::Undecided)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, Truth)> {
        self.assignment.iter().map(|(f, t)| (f, *t))
    }

    /// Features assigned true, in model order.
    pub fn selected(&self) -> impl Iterator<Item = &FeatureId> {
        self.iter()
            .filter(|(_, t)| *t == Truth::True)
            .map(|(f, _)| f)
    }

    /// Builds a total configuration from a bit per feature in model order.
    /// The root is forced true regardless of `bits[0]`.
    pub fn from_bits(model: &FeatureModel, bits: &[bool]) -> Configuration {
        assert_eq!(bits.len(), model.len(), "one bit per feature");
        let mut assignment: IndexMap<FeatureId, Truth> = model
            .features()
            .iter()
            .zip(bits)
            .map(|(f, &b)| (f.clone(), Truth::from(b)))
            .collect();
        assignment.insert(model.root().clone(), Truth::True);
        Configuration { assignment }
    }
}

/// Marks `selected` true; others false when `total`, undecided otherwise. The root is always true.
pub fn make_config<S: AsRef<str>>(
    model: &FeatureModel,
    selected: &[S],
    total: bool,
) -> Result<Configuration, UnknownFeature> {
    let default = if total {
        Truth::False
    } else {
        Truth::Undecided
    };
    let mut assignment: IndexMap<FeatureId, Truth> = model
        .features()
        .iter()
        .map(|f| (f.clone(), default))
        .collect();
    for s in selected {
        let s = s.as_ref();
        match assignment.get_mut(s) {
            Some(t) => *t = Truth::True,
            None => return Err(UnknownFeature(s.to_string())),
        }
    }
    assignment.insert(model.root().clone(), Truth::True);
    Ok(Configuration { assignment })
}

/// Builds a partial configuration from explicit decisions.
pub fn make_partial_config<S: AsRef<str>>(
    model: &FeatureModel,
    decisions: &[(S, bool)],
) -> Result<Configuration, UnknownFeature> {
    let mut cfg = make_config::<&str>(model, &[], false)?;
    for (f, value) in decisions {
        let f = f.as_ref();
        match cfg.assignment.get_mut(f) {
            Some(t) => *t = Truth::from(*value),
            None => return Err(UnknownFeature(f.to_string())),
        }
    }
    Ok(cfg)
}
