//! Graphviz and Alloy renderings of a feature model.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::model::{ConstraintKind, FeatureModel, RelationType};

/// DOT digraph: boxes for features, tree edges styled by relation type,
/// dashed edges for cross-tree constraints.
pub fn export_dot(model: &FeatureModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", model.name());
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=box];\n");
    for f in model.features() {
        let _ = writeln!(out, "  \"{f}\";");
    }
    for r in model.relations() {
        let attrs = match r.rtype {
            RelationType::Mandatory => "arrowhead=dot",
            RelationType::Optional => "arrowhead=odot",
            RelationType::Or => "arrowhead=none, label=\"OR\"",
            RelationType::Alternative => "arrowhead=none, label=\"ALT\"",
            RelationType::OptionalOr => "arrowhead=odot, label=\"OR\"",
            RelationType::OptionalAlternative => "arrowhead=odot, label=\"ALT\"",
        };
        for c in &r.children {
            let _ = writeln!(out, "  \"{}\" -> \"{c}\" [{attrs}];", r.parent);
        }
    }
    for c in model.constraints() {
        let extra = match c.kind {
            ConstraintKind::Requires => "",
            ConstraintKind::Excludes => ", dir=both",
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style=dashed, label=\"{}\"{extra}];",
            c.source, c.target, c.kind
        );
    }
    out.push_str("}\n");
    out
}

const ALLOY_RESERVED: &[&str] = &[
    "abstract",
    "all",
    "and",
    "as",
    "assert",
    "but",
    "check",
    "disj",
    "else",
    "enum",
    "exactly",
    "expect",
    "extends",
    "fact",
    "for",
    "fun",
    "iden",
    "iff",
    "implies",
    "in",
    "Int",
    "let",
    "lone",
    "module",
    "no",
    "none",
    "not",
    "one",
    "open",
    "or",
    "pred",
    "run",
    "seq",
    "set",
    "sig",
    "some",
    "String",
    "sum",
    "this",
    "univ",
    "var",
    // schema names
    "FM",
    "Name",
    "Relation",
    "Type",
    "Optional",
    "Mandatory",
    "OrFeature",
    "Alternative",
    "OptionalAlternative",
    "OptionalOr",
    "Constraint",
    "Requires",
    "Excludes",
    "features",
    "root",
    "relation",
    "parent",
    "child",
    "type",
    "source",
    "target",
];

struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn fresh(&mut self, raw: &str) -> String {
        let base = raw.replace('.', "_");
        let mut name = base.clone();
        let mut n = 1;
        while self.used.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.used.insert(name.clone());
        name
    }
}

fn alloy_type(t: RelationType) -> &'static str {
    match t {
        RelationType::Mandatory => "Mandatory",
        RelationType::Optional => "Optional",
        RelationType::Or => "OrFeature",
        RelationType::Alternative => "Alternative",
        RelationType::OptionalOr => "OptionalOr",
        RelationType::OptionalAlternative => "OptionalAlternative",
    }
}

/// Alloy module text: the feature-model schema signatures plus facts binding
/// this model's root, features and relations (`cN.type/parent/child`).
/// Dots in names become underscores.
pub fn export_alloy(model: &FeatureModel) -> String {
    let relations = model.relations();
    let constraints = model.constraints();
    let rel_atoms: Vec<String> = (1..=relations.len()).map(|i| format!("c{i}")).collect();
    let con_atoms: Vec<String> = (1..=constraints.len()).map(|i| format!("k{i}")).collect();
    let mut namer = Namer {
        used: ALLOY_RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(rel_atoms.iter().cloned())
            .chain(con_atoms.iter().cloned())
            .collect(),
    };
    let fm = namer.fresh(model.name());
    let names: Vec<String> = model
        .features()
        .iter()
        .map(|f| namer.fresh(f.as_str()))
        .collect();
    let name_of = |f: &str| &names[model.index_of(f).expect("feature of this model")];

    let mut out = String::new();
    let _ = writeln!(out, "// feature model {}", model.name());
    out.push_str(
        "abstract sig Type {}\n\
         one sig Optional, Mandatory, OrFeature, Alternative, OptionalAlternative, OptionalOr extends Type {}\n\
         \n\
         sig Name {}\n\
         \n\
         sig Relation {\n  parent: Name,\n  child: set Name,\n  type: Type\n}\n\
         \n\
         sig FM {\n  features: set Name,\n  root: Name,\n  relation: set Relation\n}\n",
    );
    if !constraints.is_empty() {
        out.push_str(
            "\nabstract sig Constraint {\n  source: Name,\n  target: Name\n}\n\
             sig Requires, Excludes extends Constraint {}\n",
        );
    }
    out.push('\n');
    let _ = writeln!(out, "one sig {} extends Name {{}}", names.join(", "));
    let _ = writeln!(out, "one sig {fm} extends FM {{}}");
    if !relations.is_empty() {
        let _ = writeln!(
            out,
            "one sig {} extends Relation {{}}",
            rel_atoms.join(", ")
        );
    }
    for (atom, c) in con_atoms.iter().zip(constraints) {
        let kind = match c.kind {
            ConstraintKind::Requires => "Requires",
            ConstraintKind::Excludes => "Excludes",
        };
        let _ = writeln!(out, "one sig {atom} extends {kind} {{}}");
    }

    out.push_str("\nfact elements {\n");
    let _ = writeln!(out, "  {fm}.root = {}", name_of(model.root().as_str()));
    let _ = writeln!(out, "  {fm}.features = {}", names.join(" + "));
    let rel_set = if relations.is_empty() {
        "none".to_string()
    } else {
        rel_atoms.join(" + ")
    };
    let _ = writeln!(out, "  {fm}.relation = {rel_set}");
    out.push_str("}\n");

    if !relations.is_empty() {
        out.push_str("\nfact relations {\n");
        for (atom, r) in rel_atoms.iter().zip(relations) {
            let children: Vec<&str> = r
                .children
                .iter()
                .map(|c| name_of(c.as_str()).as_str())
                .collect();
            let _ = writeln!(out, "  {atom}.type = {}", alloy_type(r.rtype));
            let _ = writeln!(out, "  {atom}.parent = {}", name_of(r.parent.as_str()));
            let _ = writeln!(out, "  {atom}.child = {}", children.join(" + "));
        }
        out.push_str("}\n");
    }
    if !constraints.is_empty() {
        out.push_str("\nfact constraints {\n");
        for (atom, c) in con_atoms.iter().zip(constraints) {
            let _ = writeln!(out, "  {atom}.source = {}", name_of(c.source.as_str()));
            let _ = writeln!(out, "  {atom}.target = {}", name_of(c.target.as_str()));
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::tests::cad;

    #[test]
    fn dot_counts_for_cad() {
        let dot = export_dot(&cad());
        let nodes = dot
            .lines()
            .filter(|l| l.trim_end().ends_with("\";"))
            .count();
        let dashed = dot.lines().filter(|l| l.contains("style=dashed")).count();
        let tree = dot
            .lines()
            .filter(|l| l.contains("->") && !l.contains("dashed"))
            .count();
        assert_eq!((nodes, tree, dashed), (14, 13, 2));
        assert!(dot.contains("\"v\" -> \"v1\" [arrowhead=dot];"));
        assert!(dot.contains("\"v\" -> \"v3\" [arrowhead=odot];"));
        assert!(dot.contains("\"v2\" -> \"v2.4\" [arrowhead=none, label=\"OR\"];"));
        assert_eq!(dot, export_dot(&cad()));
    }

    #[test]
    fn dot_single_feature() {
        let m = parse("model M root r features { }").unwrap();
        let dot = export_dot(&m);
        assert_eq!(dot.matches("->").count(), 0);
        assert!(dot.contains("  \"r\";\n"));
    }

    #[test]
    fn alloy_relation_facts() {
        let als = export_alloy(&cad());
        for line in [
            "  c1.type = Mandatory",
            "  c1.parent = v",
            "  c1.child = v1",
            "  c3.type = Optional",
            "  c3.parent = v",
            "  c3.child = v3",
            "  c5.type = OrFeature",
            "  c5.child = v2_1 + v2_2 + v2_3 + v2_4",
            "  CAD_partial.root = v",
            "  CAD_partial.relation = c1 + c2 + c3 + c4 + c5 + c6 + c7",
            "  k1.source = v2_3_1",
        ] {
            assert!(als.lines().any(|l| l == line), "missing {line:?}");
        }
    }

    #[test]
    fn alloy_without_constraints() {
        let m = parse("model M features { r { or { a b } } }").unwrap();
        let als = export_alloy(&m);
        assert!(!als.contains("Constraint"));
        assert!(!als.contains("fact constraints"));
        assert!(als.contains("c1.type = OrFeature"));
    }

    #[test]
    fn alloy_names_do_not_collide() {
        let m = parse("model Name features { c1 { optional { a.b a_b sig } } }").unwrap();
        let als = export_alloy(&m);
        assert!(
            als.contains("one sig c1_1, a_b, a_b_1, sig_1 extends Name {}"),
            "{als}"
        );
        assert!(als.contains("one sig Name_1 extends FM {}"));
    }
}
