//! Cross-checks of the SAT-based answers against exhaustive evaluation.
//!
//! [`check_model`] runs every consistency property on one model and
//! returns a description of each failure; an empty list means the model
//! passed.

use std::collections::HashSet;

use crate::analysis::{Analyzer, ConfigChecker};
use crate::cnf::model_cnf;
use crate::logic::{compile_model, SemanticsMode};
use crate::model::{Configuration, ConstraintKind, FeatureModel, RelationType};
use crate::sat::{enumerate, oracle_enumerate};

/// Which property a failure belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// Enumeration over the CNF equals the truth-table oracle.
    OracleAgreement,
    /// A total configuration is valid exactly when it is a product.
    VerdictSoundness,
    /// Commonality 1 means core, 0 means dead.
    CommonalityConsistency,
    /// Every product selects the parent of each selected child.
    ChildImpliesParent,
    /// A group parent requiring a feature also gets that feature's
    /// mandatory children.
    RequiresMandatory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub property: Property,
    pub detail: String,
}

/// Number of Requires(group parent, feature with a mandatory child) edges.
pub fn requires_mandatory_edges(m: &FeatureModel) -> usize {
    m.constraints()
        .iter()
        .filter(|c| c.kind == ConstraintKind::Requires)
        .filter(|c| {
            m.relations()
                .iter()
                .any(|r| r.parent == c.source && r.rtype.is_group())
        })
        .map(|c| {
            m.relations()
                .iter()
                .filter(|r| r.parent == c.target && r.rtype == RelationType::Mandatory)
                .count()
        })
        .sum()
}

/// Runs all properties in strict mode. Models must stay within the
/// oracle's variable cap.
pub fn check_model(m: &FeatureModel) -> Vec<Failure> {
    let mode = SemanticsMode::Strict;
    let mut failures = Vec::new();
    let mut fail = |property, detail: String| failures.push(Failure { property, detail });

    let cnf = model_cnf(m, mode);
    let products = enumerate(&cnf, &cnf.feature_vars(), None);
    let oracle = match oracle_enumerate(&compile_model(m, mode), m.features()) {
        Ok(o) => o,
        Err(e) => {
            fail(Property::OracleAgreement, e.to_string());
            return failures;
        }
    };
    if products.solutions != oracle.solutions {
        fail(
            Property::OracleAgreement,
            format!(
                "{} solver products, {} oracle products",
                products.len(),
                oracle.len()
            ),
        );
    }

    let set: HashSet<&Vec<bool>> = products.solutions.iter().collect();
    let checker = ConfigChecker::new(m, mode);
    let n = m.len();
    // The root is first and forced true; walk the other 2^(n-1) assignments.
    for mask in 0u64..(1u64 << (n - 1)) {
        let bits: Vec<bool> = (0..n)
            .map(|i| i == 0 || mask >> (n - 1 - i) & 1 == 1)
            .collect();
        let cfg = Configuration::from_bits(m, &bits);
        let valid = match checker.check(&cfg) {
            Ok(v) => v.valid,
            Err(e) => {
                fail(Property::VerdictSoundness, e.to_string());
                break;
            }
        };
        if valid != set.contains(&bits) {
            fail(
                Property::VerdictSoundness,
                format!("{:?}: valid={valid}", cfg.selected().collect::<Vec<_>>()),
            );
            break;
        }
    }

    let analyzer = Analyzer::new(m, mode);
    if !products.is_empty() {
        let core = analyzer.core_features().unwrap_or_default();
        let dead = analyzer.dead_features().unwrap_or_default();
        for (i, f) in m.features().iter().enumerate() {
            let containing = products.solutions.iter().filter(|s| s[i]).count();
            let c = match analyzer.commonality(f.as_str()) {
                Ok(c) => c,
                Err(e) => {
                    fail(Property::CommonalityConsistency, e.to_string());
                    continue;
                }
            };
            if c.containing as usize != containing || c.products as usize != products.len() {
                fail(
                    Property::CommonalityConsistency,
                    format!("{f}: commonality {c}"),
                );
            }
            if c.is_one() != core.contains(f) || c.is_zero() != dead.contains(f) {
                fail(
                    Property::CommonalityConsistency,
                    format!(
                        "{f}: commonality {c}, core {}, dead {}",
                        core.contains(f),
                        dead.contains(f)
                    ),
                );
            }
        }
    } else if !analyzer.is_void() {
        fail(
            Property::CommonalityConsistency,
            "no products but not void".into(),
        );
    }

    for r in m.relations() {
        let p = m.index_of(r.parent.as_str()).expect("parent");
        for c in &r.children {
            let ci = m.index_of(c.as_str()).expect("child");
            if let Some(s) = products.solutions.iter().find(|s| s[ci] && !s[p]) {
                fail(
                    Property::ChildImpliesParent,
                    format!("{c} without {}: {s:?}", r.parent),
                );
            }
        }
    }

    for con in m
        .constraints()
        .iter()
        .filter(|c| c.kind == ConstraintKind::Requires)
    {
        let group_children: Vec<usize> = m
            .relations()
            .iter()
            .filter(|r| r.parent == con.source && r.rtype.is_group())
            .flat_map(|r| r.children.iter())
            .map(|c| m.index_of(c.as_str()).expect("child"))
            .collect();
        let mandatory: Vec<usize> = m
            .relations()
            .iter()
            .filter(|r| r.parent == con.target && r.rtype == RelationType::Mandatory)
            .flat_map(|r| r.children.iter())
            .map(|c| m.index_of(c.as_str()).expect("child"))
            .collect();
        for s in &products.solutions {
            if group_children.iter().any(|c| s[*c]) && mandatory.iter().any(|y| !s[*y]) {
                fail(
                    Property::RequiresMandatory,
                    format!("{} requires {}: {s:?}", con.source, con.target),
                );
            }
        }
    }
    failures
}
