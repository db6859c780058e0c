//! `fm`: check, analyze and configure feature models from the command line.
//!
//! Exit status is 0 for success with a positive verdict, 1 for a negative
//! verdict (invalid configuration, void model, dead features, propagation
//! conflict) and 2 for usage, file and parse errors.

mod report;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fm_core::analysis::{Analyzer, ConfigChecker, ViolationSource};
use fm_core::cnf::model_cnf;
use fm_core::dsl::{parse, serialize};
use fm_core::export::{export_alloy, export_dot};
use fm_core::logic::SemanticsMode;
use fm_core::model::{make_config, make_partial_config, FeatureModel};

use report::{Document, HealthDoc, PropagationDoc, VerdictDoc};

#[derive(Parser)]
#[command(name = "fm", version, about = "Feature-model analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Semantics {
    Strict,
    PaperLiteral,
}

impl From<Semantics> for SemanticsMode {
    fn from(s: Semantics) -> Self {
        match s {
            Semantics::Strict => SemanticsMode::Strict,
            Semantics::PaperLiteral => SemanticsMode::PaperLiteral,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Alloy,
    Dimacs,
    Canonical,
}

#[derive(Args)]
struct Common {
    /// Model file.
    file: PathBuf,
    /// How relations are translated to logic.
    #[arg(long, value_enum, default_value = "strict")]
    semantics: Semantics,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model, then check that it has a product.
    Check(Common),
    /// Report void, dead and false-optional features, core features and the product count.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration, or propagate a partial one with --partial.
    Config {
        #[command(flatten)]
        common: Common,
        /// Comma-separated selected features.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        select: Vec<String>,
        /// Comma-separated deselected features (only with --partial).
        #[arg(long, value_delimiter = ',', requires = "partial")]
        deselect: Vec<String>,
        /// Leave unlisted features undecided and report their consequences.
        #[arg(long)]
        partial: bool,
        #[arg(long)]
        json: bool,
    },
    /// List products, one per line.
    Products {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        limit: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print the number of products.
    Count(Common),
    /// Render the model in another format.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        format: Format,
    },
}

/// Output and exit status of one command.
struct Outcome {
    stdout: String,
    stderr: String,
    code: u8,
}

impl Outcome {
    fn ok(stdout: String, positive: bool) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code: if positive { 0 } else { 1 },
        }
    }

    fn usage(message: String) -> Self {
        Outcome {
            stdout: String::new(),
            stderr: message,
            code: 2,
        }
    }
}

fn load(path: &PathBuf) -> Result<FeatureModel, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::usage(format!("error: cannot read {}: {e}\n", path.display())))?;
    parse(&text).map_err(|errors| {
        let mut msg = String::new();
        for e in errors {
            let _ = writeln!(msg, "{}:{e}", path.display());
        }
        Outcome::usage(msg)
    })
}

fn join(fs: impl IntoIterator<Item = impl std::fmt::Display>) -> String {
    let parts: Vec<String> = fs.into_iter().map(|f| f.to_string()).collect();
    if parts.is_empty() {
        "none".to_string()
    } else {
        parts.join(" ")
    }
}

fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

fn check(c: &Common) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let void = Analyzer::new(&m, c.semantics.into()).is_void();
    let out = format!(
        "model {}: {}, {}, {}\n{}\n",
        m.name(),
        plural(m.len(), "feature"),
        plural(m.relations().len(), "relation"),
        plural(m.constraints().len(), "constraint"),
        if void {
            "void (no products)"
        } else {
            "consistent"
        }
    );
    Ok(Outcome::ok(out, !void))
}

fn analyze(c: &Common, json: bool) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let mode: SemanticsMode = c.semantics.into();
    let a = Analyzer::new(&m, mode);
    let health = a.health();
    let core = a.core_features().unwrap_or_default();
    let count = a.count_products();
    let positive = !health.void && health.dead.is_empty();
    if json {
        let mut doc = Document::new(&m, mode.name());
        doc.health = Some(HealthDoc::new(&m, &health, &core));
        doc.count = Some(count);
        return Ok(Outcome::ok(doc.render(), positive));
    }
    let mut out = String::new();
    let _ = writeln!(out, "model {} ({})", m.name(), mode.name());
    let _ = writeln!(out, "void: {}", if health.void { "yes" } else { "no" });
    let _ = writeln!(out, "dead: {}", join(&health.dead));
    let _ = writeln!(out, "false optional: {}", join(&health.false_optional));
    for (f, why) in &health.implicated {
        let _ = writeln!(out, "  {f} is explained by:");
        for e in why {
            let _ = writeln!(out, "    {}", m.describe(*e));
        }
    }
    if !health.void {
        let _ = writeln!(out, "core: {}", join(&core));
    }
    let _ = writeln!(out, "products: {count}");
    Ok(Outcome::ok(out, positive))
}

fn config(
    c: &Common,
    select: &[String],
    deselect: &[String],
    partial: bool,
    json: bool,
) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let mode: SemanticsMode = c.semantics.into();
    let unknown = |e: fm_core::model::UnknownFeature| Outcome::usage(format!("error: {e}\n"));
    if partial {
        let decisions: Vec<(&str, bool)> = select
            .iter()
            .map(|s| (s.as_str(), true))
            .chain(deselect.iter().map(|s| (s.as_str(), false)))
            .collect();
        let cfg = make_partial_config(&m, &decisions).map_err(unknown)?;
        let p = Analyzer::new(&m, mode)
            .propagate(&cfg)
            .map_err(|e| Outcome::usage(format!("error: {e}\n")))?;
        if json {
            let mut doc = Document::new(&m, mode.name());
            doc.propagation = Some(PropagationDoc::from(&p));
            return Ok(Outcome::ok(doc.render(), !p.conflict));
        }
        let out = if p.conflict {
            "CONFLICT\n".to_string()
        } else {
            format!(
                "forced in: {}\nforced out: {}\nfree: {}\n",
                join(&p.forced_in),
                join(&p.forced_out),
                join(&p.free)
            )
        };
        return Ok(Outcome::ok(out, !p.conflict));
    }
    let cfg = make_config(&m, select, true).map_err(unknown)?;
    let verdict = ConfigChecker::new(&m, mode)
        .check(&cfg)
        .map_err(|e| Outcome::usage(format!("error: {e}\n")))?;
    if json {
        let mut doc = Document::new(&m, mode.name());
        doc.verdict = Some(VerdictDoc::new(&m, &verdict));
        return Ok(Outcome::ok(doc.render(), verdict.valid));
    }
    let mut out = String::from(if verdict.valid {
        "VALID\n"
    } else {
        "INVALID\n"
    });
    for v in &verdict.violations {
        let what = match v.source {
            ViolationSource::Root => format!("root {}", m.root()),
            ViolationSource::Element(e) => m.describe(e),
        };
        let _ = writeln!(out, "  violated: {what}  [{}]", v.formula);
    }
    Ok(Outcome::ok(out, verdict.valid))
}

fn products(c: &Common, limit: usize, json: bool) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let mode: SemanticsMode = c.semantics.into();
    let set = Analyzer::new(&m, mode).list_products(Some(limit));
    let rows: Vec<Vec<String>> = set
        .solutions
        .iter()
        .map(|bits| {
            m.features()
                .iter()
                .zip(bits)
                .filter(|(_, b)| **b)
                .map(|(f, _)| f.to_string())
                .collect()
        })
        .collect();
    let positive = !rows.is_empty();
    if json {
        let mut doc = Document::new(&m, mode.name());
        doc.count = Some(rows.len() as u64);
        doc.products = Some(rows);
        doc.truncated = Some(set.truncated);
        return Ok(Outcome::ok(doc.render(), positive));
    }
    let mut out = String::new();
    for r in &rows {
        let _ = writeln!(out, "{}", r.join(" "));
    }
    let mut outcome = Outcome::ok(out, positive);
    if set.truncated {
        outcome.stderr = format!("note: stopped after {limit} products\n");
    }
    Ok(outcome)
}

fn count(c: &Common) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let n = Analyzer::new(&m, c.semantics.into()).count_products();
    Ok(Outcome::ok(format!("{n}\n"), n > 0))
}

fn export(c: &Common, format: Format) -> Result<Outcome, Outcome> {
    let m = load(&c.file)?;
    let out = match format {
        Format::Dot => export_dot(&m),
        Format::Alloy => export_alloy(&m),
        Format::Dimacs => model_cnf(&m, c.semantics.into()).to_dimacs(),
        Format::Canonical => serialize(&m),
    };
    Ok(Outcome::ok(out, true))
}

fn run(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Check(c) => check(c),
        Command::Analyze { common, json } => analyze(common, *json),
        Command::Config {
            common,
            select,
            deselect,
            partial,
            json,
        } => config(common, select, deselect, *partial, *json),
        Command::Products {
            common,
            limit,
            json,
        } => products(common, *limit, *json),
        Command::Count(c) => count(c),
        Command::Export { common, format } => export(common, *format),
    };
    result.unwrap_or_else(|e| e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = run(&cli);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code)
}
