//! JSON documents printed with `--json`. Struct field order is the
//! serialized order.

use fm_core::analysis::{
    ConfigVerdict, ModelHealthReport, PropagationResult, Violation, ViolationSource,
};
use fm_core::model::{ElementId, FeatureId, FeatureModel};
use serde::Serialize;

pub const SCHEMA: &str = "fm/1";

fn names(fs: &[FeatureId]) -> Vec<String> {
    fs.iter().map(|f| f.to_string()).collect()
}

#[derive(Serialize)]
pub struct ViolationDoc {
    pub kind: String,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<String>>,
    pub formula: String,
}

impl ViolationDoc {
    pub fn new(m: &FeatureModel, v: &Violation) -> Self {
        let (kind, source, target, children) = match v.source {
            ViolationSource::Root => ("root".to_string(), m.root().to_string(), None, None),
            ViolationSource::Element(ElementId::Relation(i)) => {
                let r = m.relation(i).expect("relation of this model");
                (
                    r.rtype.keyword().to_string(),
                    r.parent.to_string(),
                    None,
                    Some(names(&r.children)),
                )
            }
            ViolationSource::Element(ElementId::Constraint(i)) => {
                let c = m.constraint(i).expect("constraint of this model");
                (
                    c.kind.keyword().to_string(),
                    c.source.to_string(),
                    Some(c.target.to_string()),
                    None,
                )
            }
        };
        ViolationDoc {
            kind,
            source,
            target,
            children,
            formula: v.formula.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct VerdictDoc {
    pub valid: bool,
    pub violations: Vec<ViolationDoc>,
}

impl VerdictDoc {
    pub fn new(m: &FeatureModel, v: &ConfigVerdict) -> Self {
        VerdictDoc {
            valid: v.valid,
            violations: v
                .violations
                .iter()
                .map(|x| ViolationDoc::new(m, x))
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct ExplanationDoc {
    pub feature: String,
    pub elements: Vec<String>,
}

#[derive(Serialize)]
pub struct HealthDoc {
    pub void: bool,
    pub dead: Vec<String>,
    pub false_optional: Vec<String>,
    pub core: Vec<String>,
    pub explanations: Vec<ExplanationDoc>,
}

impl HealthDoc {
    pub fn new(m: &FeatureModel, h: &ModelHealthReport, core: &[FeatureId]) -> Self {
        HealthDoc {
            void: h.void,
            dead: names(&h.dead),
            false_optional: names(&h.false_optional),
            core: names(core),
            explanations: h
                .implicated
                .iter()
                .map(|(f, why)| ExplanationDoc {
                    feature: f.to_string(),
                    elements: why.iter().map(|e| m.describe(*e)).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct PropagationDoc {
    pub conflict: bool,
    pub forced_in: Vec<String>,
    pub forced_out: Vec<String>,
    pub free: Vec<String>,
}

impl From<&PropagationResult> for PropagationDoc {
    fn from(p: &PropagationResult) -> Self {
        PropagationDoc {
            conflict: p.conflict,
            forced_in: names(&p.forced_in),
            forced_out: names(&p.forced_out),
            free: names(&p.free),
        }
    }
}

/// Top-level document; sections absent for a command are omitted.
#[derive(Serialize)]
pub struct Document {
    pub schema: &'static str,
    pub model: String,
    pub semantics: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagation: Option<PropagationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub health: Option<HealthDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub products: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl Document {
    pub fn new(m: &FeatureModel, semantics: &'static str) -> Self {
        Document {
            schema: SCHEMA,
            model: m.name().to_string(),
            semantics,
            verdict: None,
            propagation: None,
            health: None,
            products: None,
            truncated: None,
            count: None,
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}
