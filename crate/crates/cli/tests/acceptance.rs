//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use fm_core::analysis::Analyzer;
use fm_core::cnf::{model_cnf, Lit};
use fm_core::dsl::{parse, serialize};
use fm_core::generate::{generate_model, GeneratorConfig};
use fm_core::logic::{compile_model, SemanticsMode};
use fm_core::model::FeatureModel;
use fm_core::sat::{enumerate, oracle_enumerate, solve, solve_under};
use fm_core::selfcheck::{check_model, requires_mandatory_edges};

const VALID_SELECTION: &[&str] = &[
    "v1", "v1.1", "v2", "v2.1", "v2.3", "v2.3.1", "v2.4", "v3", "v3.2",
];
const INVALID_SELECTION: &[&str] = &["v1", "v1.2", "v2", "v2.3", "v2.3.1", "v2.4", "v3", "v3.1"];
const STRICT: SemanticsMode = SemanticsMode::Strict;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> FeatureModel {
    let text = std::fs::read_to_string(root().join("fixtures").join(name)).expect("fixture");
    parse(&text).expect("fixture parses")
}

fn fm(args: &[&str]) -> (String, i32, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_fm"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("run fm");
    let elapsed = start.elapsed();
    (
        String::from_utf8(out.stdout).expect("utf-8"),
        out.status.code().unwrap_or(-1),
        elapsed,
    )
}

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn names(fs: &[fm_core::model::FeatureId]) -> Vec<&str> {
    fs.iter().map(|f| f.as_str()).collect()
}

fn ac1() -> Check {
    let (out, code, t) = fm(&[
        "config",
        "fixtures/cad.fm",
        "--select",
        &VALID_SELECTION.join(","),
    ]);
    ensure(out == "VALID\n", format!("output {out:?}"))?;
    ensure(code == 0, format!("exit {code}"))?;
    ensure(t < Duration::from_millis(100), format!("took {t:?}"))?;
    Ok(format!("VALID, exit 0, {:.3} s", t.as_secs_f64()))
}

fn ac2() -> Check {
    let (out, code, t) = fm(&[
        "config",
        "fixtures/cad.fm",
        "--select",
        &INVALID_SELECTION.join(","),
    ]);
    ensure(out.starts_with("INVALID\n"), format!("output {out:?}"))?;
    ensure(
        out.lines()
            .any(|l| l.contains("violated: v2.3.1 requires v1.1")),
        format!("requires(v2.3.1, v1.1) not named: {out:?}"),
    )?;
    ensure(code == 1, format!("exit {code}"))?;
    ensure(t < Duration::from_millis(100), format!("took {t:?}"))?;
    Ok(format!(
        "INVALID naming v2.3.1 requires v1.1, exit 1, {:.3} s",
        t.as_secs_f64()
    ))
}

fn selection_units(m: &FeatureModel, selected: &[&str]) -> Vec<Lit> {
    m.features()
        .iter()
        .enumerate()
        .map(|(i, f)| Lit::new(i, i == 0 || selected.contains(&f.as_str())))
        .collect()
}

fn ac3() -> Check {
    let m = fixture("cad.fm");
    let cnf = model_cnf(&m, STRICT);
    ensure(solve(&cnf).is_sat(), "CAD model is unsat")?;
    ensure(
        solve_under(&cnf, &selection_units(&m, VALID_SELECTION)).is_sat(),
        "valid selection is unsat",
    )?;
    ensure(
        !solve_under(&cnf, &selection_units(&m, INVALID_SELECTION)).is_sat(),
        "invalid selection is sat",
    )?;
    Ok("model Sat, invalid selection units Unsat".into())
}

fn ac4() -> Check {
    let cases: [(&str, &str, &[&str]); 3] = [
        ("inconsistent.fm", "dead", &["v1", "v1.1", "v1.2"]),
        ("dead_feature.fm", "dead", &["v2.1"]),
        ("false_optional.fm", "false optional", &["v2"]),
    ];
    let mut report = Vec::new();
    for (file, what, want) in cases {
        let m = fixture(file);
        let a = Analyzer::new(&m, STRICT);
        // Re-derive the verdict from the truth table first.
        let oracle = oracle_enumerate(&compile_model(&m, STRICT), m.features())
            .map_err(|e| e.to_string())?;
        ensure(
            !oracle.is_empty(),
            format!("{file}: oracle finds no products"),
        )?;
        let membership = |name: &str| {
            let i = m.index_of(name).expect("feature");
            oracle.solutions.iter().filter(|s| s[i]).count()
        };
        let got = if what == "dead" {
            let expected: Vec<&str> = m
                .features()
                .iter()
                .map(|f| f.as_str())
                .filter(|f| membership(f) == 0)
                .collect();
            ensure(
                expected == want,
                format!("{file}: oracle dead {expected:?}"),
            )?;
            a.dead_features().map_err(|e| e.to_string())?
        } else {
            for f in want {
                let parent = m.parent(f).expect("parent").as_str();
                ensure(
                    membership(f) == membership(parent) && membership(parent) > 0,
                    format!("{file}: oracle does not force {f}"),
                )?;
            }
            a.false_optionals().map_err(|e| e.to_string())?
        };
        ensure(
            names(&got) == want,
            format!("{file}: {what} {:?}", names(&got)),
        )?;
        report.push(format!("{file} {what} {{{}}}", want.join(", ")));
    }
    Ok(report.join("; "))
}

fn ac5() -> Check {
    let m = fixture("cad.fm");
    let oracle =
        oracle_enumerate(&compile_model(&m, STRICT), m.features()).map_err(|e| e.to_string())?;
    ensure(oracle.len() == 74, format!("oracle count {}", oracle.len()))?;
    let start = Instant::now();
    let count = Analyzer::new(&m, STRICT).count_products();
    let cnf = model_cnf(&m, STRICT);
    let products = enumerate(&cnf, &cnf.feature_vars(), None);
    let t = start.elapsed();
    ensure(count == 74, format!("count {count}"))?;
    ensure(
        products.solutions == oracle.solutions,
        "enumeration differs from oracle",
    )?;
    ensure(t < Duration::from_secs(1), format!("took {t:?}"))?;
    Ok(format!(
        "74 products, equal to oracle element-for-element, {:.3} s",
        t.as_secs_f64()
    ))
}

fn ac6() -> Check {
    let cfg = GeneratorConfig::default();
    let start = Instant::now();
    let mut planted = 0;
    let mut largest = 0;
    for seed in 0..1000 {
        let m = generate_model(seed, &cfg);
        ensure(m.len() <= 14, format!("seed {seed}: {} features", m.len()))?;
        largest = largest.max(m.len());
        planted += requires_mandatory_edges(&m);
        let failures = check_model(&m);
        ensure(failures.is_empty(), format!("seed {seed}: {failures:?}"))?;
    }
    let t = start.elapsed();
    ensure(
        planted > 0,
        "no model exercised the requires/mandatory property",
    )?;
    ensure(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!(
        "1000 models (up to {largest} features, {planted} requires/mandatory edges), 0 failures, {:.1} s",
        t.as_secs_f64()
    ))
}

const GOLDENS: &[(&str, &[&str])] = &[
    (
        "cad.canonical.fm",
        &["export", "fixtures/cad.fm", "--format", "canonical"],
    ),
    ("cad.dot", &["export", "fixtures/cad.fm", "--format", "dot"]),
    (
        "cad.als",
        &["export", "fixtures/cad.fm", "--format", "alloy"],
    ),
    (
        "cad.cnf",
        &["export", "fixtures/cad.fm", "--format", "dimacs"],
    ),
    (
        "groups.canonical.fm",
        &["export", "fixtures/groups.fm", "--format", "canonical"],
    ),
    (
        "single.canonical.fm",
        &["export", "fixtures/single.fm", "--format", "canonical"],
    ),
    (
        "cad.analyze.json",
        &["analyze", "fixtures/cad.fm", "--json"],
    ),
    ("cad.products.txt", &["products", "fixtures/cad.fm"]),
];

fn ac7() -> Check {
    let mut corpus = 0;
    for entry in std::fs::read_dir(root().join("fixtures")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_none_or(|x| x != "fm") {
            continue;
        }
        let m = parse(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e:?}", path.display()))?;
        let back = parse(&serialize(&m)).map_err(|e| format!("{}: {e:?}", path.display()))?;
        ensure(back == m, format!("{} does not round-trip", path.display()))?;
        corpus += 1;
    }
    let cfg = GeneratorConfig::default();
    for seed in 0..1000 {
        let m = generate_model(seed, &cfg);
        let back = parse(&serialize(&m)).map_err(|e| format!("seed {seed}: {e:?}"))?;
        ensure(back == m, format!("seed {seed} does not round-trip"))?;
    }
    for (name, args) in GOLDENS {
        let want = std::fs::read_to_string(root().join("fixtures/golden").join(name))
            .map_err(|e| format!("{name}: {e}"))?;
        let (first, _, _) = fm(args);
        let (second, _, _) = fm(args);
        ensure(first == want, format!("{name} differs from golden"))?;
        ensure(second == first, format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "{corpus} corpus + 1000 generated models round-trip, {} goldens byte-stable over 2 runs",
        GOLDENS.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("AC1", "valid CAD configuration", ac1),
        ("AC2", "invalid CAD configuration", ac2),
        ("AC3", "solver parity on the CAD model", ac3),
        ("AC4", "dead and false-optional fixtures", ac4),
        ("AC5", "CAD product count", ac5),
        ("AC6", "property suite on generated models", ac6),
        ("AC7", "round trip and golden stability", ac7),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {id} {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {title}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
