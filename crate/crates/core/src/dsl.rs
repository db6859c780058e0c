//! Text format for feature models.
//!
//! ```text
//! model CAD_partial
//! features {
//!   v {
//!     mandatory { v1 v2 }
//!     optional { v3 }
//!   }
//!   v1 {
//!     alternative { v1.1 v1.2 }
//!   }
//! }
//! constraints {
//!   v1.1 requires v3
//! }
//! ```
//!
//! Keywords are contextual, so any identifier may name a feature. `#` starts
//! a comment that runs to the end of the line. `mandatory { a b }` and
//! `optional { a b }` expand to one relation per child. A feature may have
//! several blocks; their groups are appended in order. A `root r` line after
//! the model name is required only for models without relations and must
//! otherwise agree with the inferred root.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use crate::model::{
    build_model_with_root, ConstraintKind, CrossTreeConstraint, FeatureId, FeatureModel, Relation,
    RelationType, StructuralError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceSpan {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    /// In characters, at least 1.
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Syntactic,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub kind: ErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Lexical => "lexical",
            ErrorKind::Syntactic => "syntax",
            ErrorKind::Semantic => "semantic",
        };
        write!(
            f,
            "{}:{}: {} error: {}",
            self.span.line, self.span.column, kind, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Open,
    Close,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

impl Token {
    fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Open => "`{`".into(),
            Tok::Close => "`}`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str, errors: &mut Vec<ParseError>) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let mut last = SourceSpan {
        line: 1,
        column: 1,
        length: 1,
    };
    while let Some(&c) = chars.peek() {
        let start = (line, col);
        let span = |len| SourceSpan {
            line: start.0,
            column: start.1,
            length: len,
        };
        if c != '\n' && !c.is_whitespace() {
            last = span(1);
        }
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' | '}' => {
                chars.next();
                col += 1;
                let tok = if c == '{' { Tok::Open } else { Tok::Close };
                tokens.push(Token { tok, span: span(1) });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let len = s.chars().count();
                last = span(len);
                last.column += len - 1;
                last.length = 1;
                tokens.push(Token {
                    tok: Tok::Ident(s),
                    span: span(len),
                });
            }
            other => {
                chars.next();
                col += 1;
                errors.push(ParseError {
                    span: span(1),
                    message: format!("unexpected character `{}`", other.escape_default()),
                    kind: ErrorKind::Lexical,
                });
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: last,
    });
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    relations: Vec<(Relation, Vec<SourceSpan>)>,
    constraints: Vec<(CrossTreeConstraint, SourceSpan, SourceSpan)>,
    /// First span at which each feature name was declared.
    declared: HashMap<String, SourceSpan>,
    root: Option<(FeatureId, SourceSpan)>,
    name: String,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.errors.push(ParseError {
            span,
            message: message.into(),
            kind: ErrorKind::Syntactic,
        });
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == word)
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn expect_ident(&mut self, what: &str) -> Option<(String, SourceSpan)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.bump();
                Some((s, t.span))
            }
            _ => {
                self.error(t.span, format!("expected {what}, found {}", t.describe()));
                None
            }
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> bool {
        if self.at(&tok) {
            self.bump();
            true
        } else {
            let t = self.peek().clone();
            self.error(t.span, format!("expected {what}, found {}", t.describe()));
            false
        }
    }

    /// Skips to just past the next `}` or to the first token of a later line.
    fn recover(&mut self) {
        let line = self.peek().span.line;
        loop {
            let t = self.peek();
            match t.tok {
                Tok::Eof => return,
                Tok::Close => {
                    self.bump();
                    return;
                }
                _ if t.span.line > line => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn feature(&mut self, name: String, span: SourceSpan) -> Option<FeatureId> {
        match FeatureId::new(name) {
            Ok(f) => {
                self.declared.entry(f.as_str().to_string()).or_insert(span);
                Some(f)
            }
            Err(e) => {
                self.error(span, e.to_string());
                None
            }
        }
    }

    fn parse_model(&mut self) {
        if !self.at_ident("model") {
            let t = self.peek().clone();
            self.error(t.span, format!("expected `model`, found {}", t.describe()));
            if !self.at_ident("features") {
                self.recover();
            }
        } else {
            self.bump();
            if let Some((name, _)) = self.expect_ident("model name") {
                self.name = name;
            }
        }
        if self.at_ident("root") && matches!(self.peek_at(1).tok, Tok::Ident(_)) {
            self.bump();
            let (name, span) = self.expect_ident("root feature").expect("checked ident");
            if let Some(f) = self.feature(name, span) {
                self.root = Some((f, span));
            }
        }
        if self.at_ident("features") {
            self.bump();
            if self.expect(Tok::Open, "`{` after `features`") {
                self.parse_nodes();
            } else {
                self.recover();
            }
        } else {
            let t = self.peek().clone();
            self.error(
                t.span,
                format!("expected `features`, found {}", t.describe()),
            );
            self.recover();
        }
        if self.at_ident("constraints") {
            self.bump();
            if self.expect(Tok::Open, "`{` after `constraints`") {
                self.parse_constraints();
            } else {
                self.recover();
            }
        }
        if !self.at(&Tok::Eof) {
            let t = self.peek().clone();
            self.error(
                t.span,
                format!("unexpected {} after the model", t.describe()),
            );
        }
    }

    fn parse_nodes(&mut self) {
        loop {
            match self.peek().tok.clone() {
                Tok::Close => {
                    self.bump();
                    return;
                }
                Tok::Eof => {
                    let span = self.peek().span;
                    self.error(span, "unterminated `features` block");
                    return;
                }
                Tok::Open => {
                    let span = self.peek().span;
                    self.error(span, "expected a feature name before `{`");
                    self.bump();
                    self.recover();
                }
                Tok::Ident(_) => self.parse_node(),
            }
        }
    }

    fn parse_node(&mut self) {
        let (name, span) = self.expect_ident("feature name").expect("caller checked");
        if !self.expect(Tok::Open, &format!("`{{` after feature `{name}`")) {
            self.recover();
            return;
        }
        let parent = self.feature(name.clone(), span);
        if self.at(&Tok::Close) {
            self.error(
                span,
                format!("feature block `{name}` declares no groups; leaves need no block"),
            );
            self.bump();
            return;
        }
        loop {
            match self.peek().tok.clone() {
                Tok::Close => {
                    self.bump();
                    return;
                }
                Tok::Eof => {
                    self.error(span, format!("unterminated block for feature `{name}`"));
                    return;
                }
                Tok::Open => {
                    let s = self.peek().span;
                    self.error(s, "expected a relation kind before `{`");
                    self.bump();
                    self.recover();
                }
                Tok::Ident(_) => self.parse_group(parent.as_ref()),
            }
        }
    }

    fn parse_group(&mut self, parent: Option<&FeatureId>) {
        let (word, span) = self.expect_ident("relation kind").expect("caller checked");
        let Some(rtype) = RelationType::from_keyword(&word) else {
            self.error(
                span,
                format!(
                    "unknown relation kind `{word}` (expected mandatory, optional, or, \
                     alternative, optional_or or optional_alternative)"
                ),
            );
            self.recover();
            return;
        };
        if !self.expect(Tok::Open, &format!("`{{` after `{word}`")) {
            self.recover();
            return;
        }
        let mut children = Vec::new();
        loop {
            let t = self.peek().clone();
            match t.tok {
                Tok::Ident(s) => {
                    self.bump();
                    if let Some(f) = self.feature(s, t.span) {
                        children.push((f, t.span));
                    }
                }
                Tok::Close => {
                    self.bump();
                    break;
                }
                Tok::Open | Tok::Eof => {
                    self.error(
                        t.span,
                        format!("expected a feature name or `}}`, found {}", t.describe()),
                    );
                    if t.tok == Tok::Open {
                        self.bump();
                        self.recover();
                    }
                    return;
                }
            }
        }
        if children.is_empty() {
            self.error(span, format!("`{word}` group lists no features"));
            return;
        }
        let Some(parent) = parent else { return };
        if rtype.is_group() {
            let spans = children.iter().map(|(_, s)| *s).collect();
            let ids = children.into_iter().map(|(f, _)| f).collect();
            self.push_relation(parent.clone(), ids, rtype, spans);
        } else {
            for (f, s) in children {
                self.push_relation(parent.clone(), vec![f], rtype, vec![s]);
            }
        }
    }

    fn push_relation(
        &mut self,
        parent: FeatureId,
        children: Vec<FeatureId>,
        rtype: RelationType,
        spans: Vec<SourceSpan>,
    ) {
        let id = self.relations.len();
        self.relations
            .push((Relation::new(id, parent, children, rtype), spans));
    }

    fn parse_constraints(&mut self) {
        loop {
            let t = self.peek().clone();
            match t.tok {
                Tok::Close => {
                    self.bump();
                    return;
                }
                Tok::Eof => {
                    self.error(t.span, "unterminated `constraints` block");
                    return;
                }
                Tok::Open => {
                    self.error(t.span, "unexpected `{` in constraints");
                    self.bump();
                    self.recover();
                }
                Tok::Ident(source) => {
                    self.bump();
                    let kind_tok = self.peek().clone();
                    let kind = match &kind_tok.tok {
                        Tok::Ident(k) => ConstraintKind::from_keyword(k),
                        _ => None,
                    };
                    let Some(kind) = kind else {
                        self.error(
                            kind_tok.span,
                            format!(
                                "expected `requires` or `excludes`, found {}",
                                kind_tok.describe()
                            ),
                        );
                        self.recover_line(t.span.line);
                        continue;
                    };
                    self.bump();
                    let Some((target, tspan)) = self.expect_ident("constraint target") else {
                        self.recover_line(t.span.line);
                        continue;
                    };
                    let (Ok(s), Ok(tg)) = (FeatureId::new(source), FeatureId::new(target)) else {
                        self.error(t.span, "invalid feature name in constraint");
                        continue;
                    };
                    let id = self.constraints.len();
                    self.constraints.push((
                        CrossTreeConstraint::new(id, kind, s, tg),
                        t.span,
                        tspan,
                    ));
                }
            }
        }
    }

    /// Skips the rest of `line` without consuming a closing brace.
    fn recover_line(&mut self, line: usize) {
        while !matches!(self.peek().tok, Tok::Eof | Tok::Close) && self.peek().span.line == line {
            self.bump();
        }
    }

    fn semantic(&mut self, span: SourceSpan, message: String) {
        self.errors.push(ParseError {
            span,
            message,
            kind: ErrorKind::Semantic,
        });
    }

    fn span_of(&self, f: &FeatureId) -> Option<SourceSpan> {
        self.declared.get(f.as_str()).copied()
    }

    fn first_span(&self) -> SourceSpan {
        self.tokens[0].span
    }

    fn finish(mut self) -> Result<FeatureModel, Vec<ParseError>> {
        let mut undefined = Vec::new();
        for (c, sspan, tspan) in &self.constraints {
            for (f, span) in [(&c.source, *sspan), (&c.target, *tspan)] {
                if !self.declared.contains_key(f.as_str()) {
                    undefined.push((
                        span,
                        format!("constraint references undefined feature `{f}`"),
                    ));
                }
            }
        }
        for (span, msg) in undefined {
            self.semantic(span, msg);
        }
        if self.errors.is_empty() {
            let relations = self.relations.iter().map(|(r, _)| r.clone()).collect();
            let constraints = self.constraints.iter().map(|(c, _, _)| c.clone()).collect();
            let root = self.root.as_ref().map(|(f, _)| f.clone());
            match build_model_with_root(&self.name, root, relations, constraints) {
                Ok(m) => return Ok(m),
                Err(e) => {
                    let span = self.structural_span(&e);
                    self.semantic(span, e.to_string());
                }
            }
        }
        let mut errors = self.errors;
        errors.sort_by_key(|e| e.span);
        Err(errors)
    }

    fn structural_span(&self, e: &StructuralError) -> SourceSpan {
        let constraint_span = |id: usize| self.constraints.get(id).map(|(_, s, _)| *s);
        let child_span = |f: &FeatureId| {
            // Last listing as a child is the one that conflicts.
            self.relations
                .iter()
                .rev()
                .find_map(|(r, spans)| r.children.iter().position(|c| c == f).map(|i| spans[i]))
        };
        let span = match e {
            StructuralError::MultipleParents { feature, .. }
            | StructuralError::DuplicateFeature { feature, .. } => child_span(feature),
            StructuralError::Cycle(f) => self.span_of(f),
            StructuralError::MultipleRoots(fs) => fs.get(1).and_then(|f| self.span_of(f)),
            StructuralError::RootMismatch { .. } => self.root.as_ref().map(|(_, s)| *s),
            StructuralError::UnknownFeatureInConstraint { constraint, .. }
            | StructuralError::SelfConstraint { constraint, .. }
            | StructuralError::HierarchicalConstraint { constraint, .. } => {
                constraint_span(*constraint)
            }
            StructuralError::EmptyChildList { parent, .. }
            | StructuralError::BadGroupArity { parent, .. } => self.span_of(parent),
            StructuralError::InvalidName(_) | StructuralError::NoRoot => None,
        };
        span.unwrap_or_else(|| self.first_span())
    }
}

/// Parses model text, reporting every recoverable error in one pass.
pub fn parse(text: &str) -> Result<FeatureModel, Vec<ParseError>> {
    let mut errors = Vec::new();
    let tokens = lex(text, &mut errors);
    let mut parser = Parser {
        tokens,
        pos: 0,
        errors,
        relations: Vec::new(),
        constraints: Vec::new(),
        declared: HashMap::new(),
        root: None,
        name: String::new(),
    };
    parser.parse_model();
    parser.finish()
}

/// Canonical text: one group per line, two-space indentation, declaration order.
pub fn serialize(model: &FeatureModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {}", model.name());
    let rels = model.relations();
    if rels.is_empty() {
        let _ = writeln!(out, "root {}", model.root());
        out.push_str("features { }\n");
    } else {
        out.push_str("features {\n");
        let mut i = 0;
        while i < rels.len() {
            let parent = &rels[i].parent;
            let _ = writeln!(out, "  {parent} {{");
            while i < rels.len() && rels[i].parent == *parent {
                let rtype = rels[i].rtype;
                let mut names: Vec<&FeatureId> = rels[i].children.iter().collect();
                i += 1;
                if !rtype.is_group() {
                    while i < rels.len() && rels[i].parent == *parent && rels[i].rtype == rtype {
                        names.push(&rels[i].children[0]);
                        i += 1;
                    }
                }
                let list: Vec<&str> = names.iter().map(|f| f.as_str()).collect();
                let _ = writeln!(out, "    {} {{ {} }}", rtype.keyword(), list.join(" "));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    if !model.constraints().is_empty() {
        out.push_str("constraints {\n");
        for c in model.constraints() {
            let _ = writeln!(out, "  {} {} {}", c.source, c.kind, c.target);
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::cad;

    pub(crate) const CAD: &str = "model CAD_partial
features {
  v    { mandatory { v1 v2 }  optional { v3 } }
  v1   { alternative { v1.1 v1.2 } }
  v2   { or { v2.1 v2.2 v2.3 v2.4 } }
  v2.3 { alternative { v2.3.1 v2.3.2 } }
  v3   { alternative { v3.1 v3.2 } }
}
constraints {
  v2.3.1 requires v1.1
  v2.4   requires v3.2
}
";

    #[test]
    fn parses_cad_fixture() {
        let m = parse(CAD).unwrap();
        assert_eq!(m, cad());
        assert_eq!(m.len(), 14);
        assert_eq!(m.constraints().len(), 2);
    }

    #[test]
    fn empty_feature_body_is_syntactic() {
        let errs = parse("model M features { r { } }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ErrorKind::Syntactic);
        assert_eq!(
            errs[0].span,
            SourceSpan {
                line: 1,
                column: 20,
                length: 1
            }
        );
    }

    #[test]
    fn undefined_constraint_feature_is_semantic() {
        let text = "model M\nfeatures {\n  r { optional { v1 } }\n}\nconstraints {\n  ghost requires v1\n}\n";
        let errs = parse(text).unwrap_err();
        assert_eq!(errs.len(), 1);
        let e = &errs[0];
        assert_eq!(e.kind, ErrorKind::Semantic);
        assert!(e.message.contains("`ghost`"));
        assert_eq!(
            e.span,
            SourceSpan {
                line: 6,
                column: 3,
                length: 5
            }
        );
    }

    #[test]
    fn reports_several_errors_in_one_pass() {
        let text = "model M\nfeatures {\n  r { bogus { a } optional { b } }\n  b { or { c } }\n  $\n}\nconstraints {\n  b maybe c\n  ghost excludes b\n}\n";
        let errs = parse(text).unwrap_err();
        let kinds: Vec<(usize, ErrorKind)> = errs.iter().map(|e| (e.span.line, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (3, ErrorKind::Syntactic),
                (5, ErrorKind::Lexical),
                (8, ErrorKind::Syntactic),
                (9, ErrorKind::Semantic),
            ]
        );
    }

    #[test]
    fn structural_errors_surface_as_semantic() {
        let errs =
            parse("model M features { r { optional { a } } q { optional { a } } }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ErrorKind::Semantic);
        assert!(errs[0].message.contains("more than one parent"));
        assert_eq!(errs[0].span.column, 56);
        let errs = parse("model M features { r { or { a } } }").unwrap_err();
        assert!(errs[0].message.contains("has 1 children"));
        let errs =
            parse("model M features { r { optional { a b } } } constraints { a requires r }")
                .unwrap_err();
        assert!(errs[0].message.contains("descendant"));
    }

    #[test]
    fn comments_and_keyword_names() {
        let text = "# leading\nmodel or # trailing\nfeatures {\n  or { or { requires features } }\n}\nconstraints { requires excludes features }\n";
        let m = parse(text).unwrap();
        assert_eq!(m.name(), "or");
        assert_eq!(m.root().as_str(), "or");
        assert_eq!(parse(&serialize(&m)).unwrap(), m);
    }

    #[test]
    fn canonical_cad_text() {
        let m = parse(CAD).unwrap();
        let expected = "model CAD_partial
features {
  v {
    mandatory { v1 v2 }
    optional { v3 }
  }
  v1 {
    alternative { v1.1 v1.2 }
  }
  v2 {
    or { v2.1 v2.2 v2.3 v2.4 }
  }
  v2.3 {
    alternative { v2.3.1 v2.3.2 }
  }
  v3 {
    alternative { v3.1 v3.2 }
  }
}
constraints {
  v2.3.1 requires v1.1
  v2.4 requires v3.2
}
";
        assert_eq!(serialize(&m), expected);
        assert_eq!(parse(expected).unwrap(), m);
    }

    #[test]
    fn root_only_model() {
        let m = parse("model M\nroot r\nfeatures { }\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(serialize(&m), "model M\nroot r\nfeatures { }\n");
        assert!(parse("model M features { }").is_err());
    }

    #[test]
    fn root_line_must_agree() {
        assert!(parse("model M root r features { r { optional { a } } }").is_ok());
        let errs = parse("model M root a features { r { optional { a } } }").unwrap_err();
        assert_eq!(errs[0].kind, ErrorKind::Semantic);
    }

    #[test]
    fn split_blocks_round_trip() {
        let text =
            "model M features { r { optional { a } } a { or { b c } } r { mandatory { d } } }";
        let m = parse(text).unwrap();
        let s = serialize(&m);
        assert_eq!(s.matches("  r {").count(), 2);
        assert_eq!(parse(&s).unwrap(), m);
    }

    #[test]
    fn eof_errors_point_inside_text() {
        for text in [
            "model M features { r { optional { a }",
            "model",
            "model M features {\n r {\n",
        ] {
            let errs = parse(text).unwrap_err();
            for e in &errs {
                let line = text.lines().nth(e.span.line - 1).expect("line inside text");
                assert!(
                    e.span.column + e.span.length - 1 <= line.chars().count(),
                    "{e} in {text:?}"
                );
            }
        }
    }

    #[test]
    fn missing_model_keyword() {
        let errs = parse("features { r { optional { a } } }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("`model`"));
    }
}
