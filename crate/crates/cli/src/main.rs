//! Command-line front end: load and validate sites, build theories, compute
//! per-arrow groups, run the axiom suite, and extract covariant or
//! contravariant shadows. Reports render as text by default and as canonical
//! JSON (sorted keys, no insignificant whitespace) with `--json`; identical
//! inputs always produce byte-identical reports.

use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use obcalc::bivariant::{axiom_suite, contravariant_part, covariant_part, AxiomReport};
use obcalc::cycles::GradeWindow;
use obcalc::{
    build_ob1, build_ob2, build_ob3, build_ob4, FiniteSite, Theory, TheoryError, TheoryKind,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "obcalc", version, about = "exact bivariant bordism calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a site document against the structural invariants.
    Validate {
        site: String,
        #[arg(long)]
        json: bool,
    },
    /// Report the graded group of one arrow in one theory.
    Group {
        site: String,
        #[command(flatten)]
        params: TheoryParams,
        #[arg(long)]
        arrow: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the exhaustive axiom suite for a theory over the whole site.
    Axioms {
        site: String,
        #[command(flatten)]
        params: TheoryParams,
        #[arg(long)]
        json: bool,
    },
    /// Extract the covariant or contravariant shadow at an object.
    Extract {
        site: String,
        #[command(flatten)]
        params: TheoryParams,
        #[arg(long)]
        object: String,
        #[arg(long, value_parser = ["co", "contra"])]
        variance: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct TheoryParams {
    #[arg(long, value_parser = ["M", "Mprime", "OB", "OB1", "OB2", "OB3", "OB4"])]
    theory: String,
    /// Truncation degree of the coefficient ring.
    #[arg(long, default_value_t = 3)]
    truncate_degree: usize,
    /// Bundle bound; defaults to the dimension of the relevant source object.
    #[arg(long)]
    bundle_bound: Option<usize>,
    /// Grade window lo..hi (inclusive).
    #[arg(long)]
    grades: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Semantic(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Semantic(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Semantic(m) => write!(f, "{m}"),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        CliError::Semantic(e.to_string())
    }
}

fn load_site(path: &str) -> Result<(Arc<FiniteSite>, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let digest = hex_digest(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let site = FiniteSite::load_str(&text).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    Ok((Arc::new(site), digest))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_window(text: &Option<String>) -> Result<GradeWindow, CliError> {
    let Some(text) = text else {
        return Ok(GradeWindow::full());
    };
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| CliError::Semantic(format!("bad grade window {text}, expected lo..hi")))?;
    let parse = |s: &str| -> Result<i64, CliError> {
        s.parse()
            .map_err(|_| CliError::Semantic(format!("bad grade bound {s}")))
    };
    Ok(GradeWindow {
        lo: Some(parse(lo)?),
        hi: Some(parse(hi)?),
    })
}

/// Build the requested theory. The bundle bound defaults to the dimension of
/// `source_obj` (or the largest object dimension when no arrow is fixed).
fn build_theory(
    site: &Arc<FiniteSite>,
    params: &TheoryParams,
    source_obj: Option<&str>,
) -> Result<(Theory, usize), CliError> {
    let kind = TheoryKind::parse(&params.theory)
        .ok_or_else(|| CliError::Semantic(format!("unknown theory {}", params.theory)))?;
    let window = parse_window(&params.grades)?;
    let bound = match params.bundle_bound {
        Some(b) => b,
        None => match source_obj {
            Some(obj) => {
                let o = site
                    .object(obj)
                    .map_err(|e| CliError::Semantic(e.to_string()))?;
                o.dim.max(0) as usize
            }
            None => site
                .objects
                .values()
                .map(|o| o.dim.max(0) as usize)
                .max()
                .unwrap_or(0),
        },
    };
    let n = params.truncate_degree;
    let theory = match kind {
        TheoryKind::M => Theory::m(site.clone()),
        TheoryKind::MPrime => Theory::mprime(site.clone()),
        TheoryKind::Ob => Theory::ob(site.clone(), bound, window),
        TheoryKind::Ob1 => build_ob1(site.clone(), n, bound, window)?,
        TheoryKind::Ob2 => build_ob2(site.clone(), n, bound, window)?,
        TheoryKind::Ob3 => build_ob3(site.clone(), window)?,
        TheoryKind::Ob4 => build_ob4(site.clone(), window)?,
    };
    Ok((theory, bound))
}

fn table_json(table: &[(i64, usize, Vec<num_bigint::BigInt>)]) -> Value {
    Value::Array(
        table
            .iter()
            .map(|(g, rank, torsion)| {
                json!({
                    "grade": g,
                    "rank": rank,
                    "torsion": torsion
                        .iter()
                        .map(|t| t.to_string().parse::<u64>().map(Value::from)
                            .unwrap_or_else(|_| Value::from(t.to_string())))
                        .collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn render_table_text(table: &[(i64, usize, Vec<num_bigint::BigInt>)]) -> String {
    let mut out = String::new();
    out.push_str("grade  rank  torsion\n");
    for (g, rank, torsion) in table {
        let tor = if torsion.is_empty() {
            "-".to_string()
        } else {
            torsion
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!("{g:>5}  {rank:>4}  {tor}\n"));
    }
    out
}

fn axiom_report_json(report: &AxiomReport) -> Value {
    let mut checked = 0;
    let mut passed = 0;
    let mut failed = 0;
    let mut skipped = 0;
    let results: Vec<Value> = report
        .results
        .iter()
        .map(|r| {
            checked += r.checked;
            passed += r.passed;
            failed += r.failed;
            skipped += r.skipped;
            json!({
                "axiom": r.axiom,
                "checked": r.checked,
                "passed": r.passed,
                "failed": r.failed,
                "skipped": r.skipped,
                "failures": r.failures,
                "skips": r.skips,
            })
        })
        .collect();
    json!({
        "results": results,
        "totals": {"checked": checked, "passed": passed, "failed": failed, "skipped": skipped},
    })
}

fn emit(value: &Value, text: String, as_json: bool) {
    if as_json {
        println!("{}", serde_json::to_string(value).expect("serializable"));
    } else {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Validate { site, json } => {
            let (loaded, digest) = load_site(&site)?;
            let violations = loaded.validate();
            let ok = violations.is_empty();
            let value = json!({
                "command": ["validate", site],
                "site_digest": digest,
                "ok": ok,
                "violations": violations
                    .iter()
                    .map(|v| json!({"code": v.code, "ids": v.ids, "message": v.message}))
                    .collect::<Vec<_>>(),
            });
            let mut text = format!("site {site}\ndigest {digest}\n");
            if ok {
                text.push_str("ok: all invariants hold\n");
            } else {
                for v in &violations {
                    text.push_str(&format!(
                        "violation [{}] {} ({:?})\n",
                        v.code, v.message, v.ids
                    ));
                }
            }
            emit(&value, text, json);
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Group {
            site,
            params,
            arrow,
            json,
        } => {
            let (loaded, digest) = load_site(&site)?;
            let src = loaded
                .morphism(&arrow)
                .map_err(|e| CliError::Semantic(e.to_string()))?
                .src
                .clone();
            let (theory, bound) = build_theory(&loaded, &params, Some(&src))?;
            let table = theory.group_invariants(&arrow)?;
            // how many imposed relation rows of each family touch this arrow
            let mut relation_summary: std::collections::BTreeMap<&str, usize> =
                std::collections::BTreeMap::new();
            if let Some(rels) = theory.relations.get(&arrow) {
                for rel in rels {
                    *relation_summary.entry(rel.family).or_insert(0) += 1;
                }
            }
            let coefficient_ring = theory.lazard.as_ref().map(|ring| {
                ring.degree_invariants()
                    .iter()
                    .map(|(r, _)| *r)
                    .collect::<Vec<_>>()
            });
            let value = json!({
                "command": ["group", site],
                "site_digest": digest,
                "theory": params.theory,
                "arrow": arrow,
                "params": {
                    "truncate_degree": params.truncate_degree,
                    "bundle_bound": bound,
                    "grades": params.grades,
                },
                "truncated_fragment": true,
                "relations": relation_summary,
                "coefficient_ring_ranks": coefficient_ring,
                "table": table_json(&table),
            });
            let text = format!(
                "theory {} on arrow {arrow} (N={}, B={bound})\n{}",
                params.theory,
                params.truncate_degree,
                render_table_text(&table)
            );
            emit(&value, text, json);
            Ok(ExitCode::SUCCESS)
        }
        Command::Axioms { site, params, json } => {
            let (loaded, digest) = load_site(&site)?;
            let (theory, bound) = build_theory(&loaded, &params, None)?;
            let report = axiom_suite(&theory)?;
            let failed = report.total_failed();
            let value = json!({
                "command": ["axioms", site],
                "site_digest": digest,
                "theory": params.theory,
                "params": {
                    "truncate_degree": params.truncate_degree,
                    "bundle_bound": bound,
                    "grades": params.grades,
                },
                "report": axiom_report_json(&report),
            });
            let mut text = format!("axiom suite for {} (B={bound})\n", params.theory);
            for r in &report.results {
                text.push_str(&format!(
                    "{:<28} checked {:>4} passed {:>4} failed {:>3} skipped {:>3}\n",
                    r.axiom, r.checked, r.passed, r.failed, r.skipped
                ));
                for f in &r.failures {
                    text.push_str(&format!("  FAIL {f}\n"));
                }
            }
            emit(&value, text, json);
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Extract {
            site,
            params,
            object,
            variance,
            json,
        } => {
            let (loaded, digest) = load_site(&site)?;
            let (theory, bound) = build_theory(&loaded, &params, Some(&object))?;
            let (arrow, table, products) = match variance.as_str() {
                "co" => {
                    let (arrow, table) = covariant_part(&theory, &object)?;
                    (arrow, table, None)
                }
                _ => {
                    let (arrow, table, products) = contravariant_part(&theory, &object)?;
                    (arrow, table, Some(products))
                }
            };
            let value = json!({
                "command": ["extract", site],
                "site_digest": digest,
                "theory": params.theory,
                "object": object,
                "variance": variance,
                "arrow": arrow,
                "params": {
                    "truncate_degree": params.truncate_degree,
                    "bundle_bound": bound,
                    "grades": params.grades,
                },
                "table": table_json(&table),
                "products": products.as_ref().map(|list| {
                    list.iter()
                        .map(|p| json!({"left": p.left, "right": p.right, "result": p.result}))
                        .collect::<Vec<_>>()
                }),
            });
            let mut text = format!(
                "theory {} at {object} ({variance}), arrow {arrow}\n{}",
                params.theory,
                render_table_text(&table)
            );
            if let Some(list) = &products {
                text.push_str("products:\n");
                for p in list {
                    text.push_str(&format!("  {} * {} = {}\n", p.left, p.right, p.result));
                }
            }
            emit(&value, text, json);
            Ok(ExitCode::SUCCESS)
        }
    }
}
