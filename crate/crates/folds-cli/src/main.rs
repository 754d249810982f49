//! The `folds` command line: validate workbench files, check models against
//! theories, decide univalence and indiscernibility, print signature
//! derivatives, enumerate morphisms and models, and test the equivalence
//! principle between finite models.
//!
//! Exit codes: 0 all checks pass, 1 a checked property fails, 2 input or
//! usage error, 3 resource limit hit. Reports are deterministic byte for
//! byte; `--timing` trades that for a real elapsed-milliseconds field.

use clap::{Parser, Subcommand, ValueEnum};
use folds_core::corpus::{self, CorpusError};
use folds_core::dsl::{self, DslFile, ModelDecl};
use folds_core::equiv::{
    enumerate_morphisms, univalence_principle_check, EquivError, MorFilter, DEFAULT_SEARCH_BOUND,
};
use folds_core::folds::{check_model, check_wf, eval_formula, random_formula, Theory};
use folds_core::indisc::{indiscernibilities, univalence_report, IndiscError};
use folds_core::sigcore::{signature_spec, validate_signature, SigError, Signature, SortId};
use folds_core::structure::{split_structure, CellId, Structure, StructureMorphism};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

/// Witness listings are cut off here; counts stay exact.
const WITNESS_LIMIT: usize = 100;
/// Random closed formulas per `principle` invariance pass.
const RANDOM_FORMULAS: usize = 20;
const RANDOM_FORMULA_DEPTH: usize = 4;

#[derive(Parser)]
#[command(
    name = "folds",
    version,
    about = "Finite-model workbench for diagram signatures and dependent-sorted first-order theories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Bound on the raw morphism search space (candidate count).
    #[arg(long, global = true, default_value_t = DEFAULT_SEARCH_BOUND)]
    max_search: u64,
    /// Seed for the randomized formula checks run by `principle`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print nothing; the exit code carries the verdict.
    #[arg(long, global = true)]
    quiet: bool,
    /// Report real elapsed milliseconds instead of 0.
    #[arg(long, global = true)]
    timing: bool,
    /// Directory searched before the builtin corpus for .sig/.thy/.mod names.
    #[arg(long, global = true, env = "FOLDS_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate signature, theory, and model files.
    Validate {
        /// Files or corpus names ending in .sig, .thy, or .mod.
        #[arg(required = true)]
        files: Vec<String>,
    },
    /// Check a model against every axiom of a theory.
    Check { theory: String, model: String },
    /// Decide whether a model is univalent (optionally at one sort).
    Univalence {
        theory: String,
        model: String,
        /// Restrict the verdict to fibers of this sort.
        #[arg(long)]
        sort: Option<String>,
    },
    /// Count indiscernibility witnesses between two cells of one fiber.
    Indisc {
        theory: String,
        model: String,
        /// Sort of the two cells.
        #[arg(long)]
        sort: String,
        /// Fiber context: cell labels joined by commas, in generator order.
        #[arg(long, default_value = "")]
        context: String,
        /// The two cell labels to compare.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        elems: Vec<String>,
    },
    /// Print the n-th derivative of a signature at a model, as DSL.
    Derive {
        signature: String,
        model: String,
        /// How many times to derive; 0 prints the base signature.
        #[arg(short, long, default_value_t = 1)]
        n: usize,
    },
    /// Enumerate structure morphisms between two models of a theory.
    Equiv {
        theory: String,
        model_a: String,
        model_b: String,
        /// Which class to select: levelwise, split-surjective equivalences,
        /// or all equivalences.
        #[arg(long, value_enum, default_value_t = Kind::Full)]
        kind: Kind,
        /// Report counts without listing morphisms.
        #[arg(long)]
        count_only: bool,
    },
    /// Check the equivalence-principle implications between two models.
    Principle {
        theory: String,
        model_a: String,
        model_b: String,
    },
    /// Enumerate all models of a theory within per-sort fiber bounds.
    Enumerate {
        theory: String,
        /// Comma-separated bounds, e.g. `X=3,Le=1` or `Op=set:8`.
        #[arg(long)]
        bounds: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    /// Levelwise equivalences (fiberwise bijections).
    Lvl,
    /// Split-surjective equivalences.
    Sse,
    /// Equivalences up to indiscernibility.
    Full,
}

struct Report {
    command: &'static str,
    verdict: &'static str,
    details: Value,
    counts: Value,
    witnesses: Vec<String>,
    text: Vec<String>,
    exit: u8,
}

enum Failure {
    /// Exit 2: bad input or usage.
    Input(String),
    /// Exit 3: a configured resource bound was hit.
    Resource(String),
}

fn input<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Input(msg.into()))
}

fn corpus_fail(e: CorpusError) -> Failure {
    let resource = matches!(
        &e,
        CorpusError::Sig(errs) if errs.iter().any(|s| matches!(s, SigError::ClosureBound { .. }))
    ) || matches!(&e, CorpusError::SigOp(SigError::ClosureBound { .. }));
    if resource {
        Failure::Resource(e.to_string())
    } else {
        Failure::Input(e.to_string())
    }
}

fn equiv_fail(e: EquivError) -> Failure {
    match &e {
        EquivError::SearchSpace(..) => Failure::Resource(e.to_string()),
        _ => Failure::Input(e.to_string()),
    }
}

fn indisc_fail(e: IndiscError) -> Failure {
    Failure::Input(e.to_string())
}

// ---------------------------------------------------------------------------
// Argument resolution: corpus/data-dir names first, filesystem paths second.

fn looks_like_path(arg: &str) -> bool {
    arg.contains('/') || arg.contains(std::path::MAIN_SEPARATOR)
}

fn read_path(arg: &str) -> Result<String, Failure> {
    std::fs::read_to_string(arg).map_err(|e| Failure::Input(format!("{arg}: {e}")))
}

fn resolve_sig_named(
    name: &str,
    dir: Option<&Path>,
    near: Option<&Path>,
) -> Result<Arc<Signature>, CorpusError> {
    match corpus::load_signature(name, dir) {
        Err(CorpusError::NotFound(..)) if near.is_some() => corpus::load_signature(name, near),
        r => r,
    }
}

fn load_sig_arg(arg: &str, dir: Option<&Path>) -> Result<Arc<Signature>, Failure> {
    let name = arg.strip_suffix(".sig").unwrap_or(arg);
    if !looks_like_path(arg) && corpus::find_source(name, "sig", dir).is_some() {
        return corpus::load_signature(name, dir).map_err(corpus_fail);
    }
    let src = read_path(arg)?;
    match dsl::parse(&src).map_err(|e| Failure::Input(format!("{arg}: {e}")))? {
        DslFile::Signature(spec) => validate_signature(spec).map(Arc::new).map_err(|es| {
            let msgs: Vec<String> = es.iter().map(|e| e.to_string()).collect();
            Failure::Input(format!("{arg}: {}", msgs.join("; ")))
        }),
        _ => input(format!("{arg} is not a signature file")),
    }
}

fn load_thy_arg(arg: &str, dir: Option<&Path>) -> Result<(Theory, Arc<Signature>), Failure> {
    let name = arg.strip_suffix(".thy").unwrap_or(arg);
    if !looks_like_path(arg) && corpus::find_source(name, "thy", dir).is_some() {
        return corpus::load_theory(name, dir).map_err(corpus_fail);
    }
    let src = read_path(arg)?;
    let theory = match dsl::parse(&src).map_err(|e| Failure::Input(format!("{arg}: {e}")))? {
        DslFile::Theory(t) => t,
        _ => return input(format!("{arg} is not a theory file")),
    };
    let sig = resolve_sig_named(&theory.sig_name, dir, Path::new(arg).parent())
        .map_err(corpus_fail)?;
    for ax in &theory.axioms {
        check_wf(&sig, &ax.formula)
            .map_err(|e| Failure::Input(format!("{arg}: axiom {}: {e}", ax.id)))?;
    }
    Ok((theory, sig))
}

fn load_model_decl(arg: &str, dir: Option<&Path>) -> Result<ModelDecl, Failure> {
    let name = arg.strip_suffix(".mod").unwrap_or(arg);
    let src = if !looks_like_path(arg) {
        match corpus::find_source(name, "mod", dir) {
            Some(s) => s,
            None => read_path(arg)?,
        }
    } else {
        read_path(arg)?
    };
    match dsl::parse(&src).map_err(|e| Failure::Input(format!("{arg}: {e}")))? {
        DslFile::Model(m) => Ok(m),
        _ => input(format!("{arg} is not a model file")),
    }
}

fn load_model_for(
    sig: &Arc<Signature>,
    arg: &str,
    dir: Option<&Path>,
) -> Result<Structure, Failure> {
    let decl = load_model_decl(arg, dir)?;
    if decl.sig_name != sig.name {
        return input(format!(
            "{arg} is a model over `{}`, expected `{}`",
            decl.sig_name, sig.name
        ));
    }
    corpus::build_structure(sig, &decl).map_err(corpus_fail)
}

/// Reject structures that are not actually models of the theory; commands
/// that reason about a theory's models treat that as an input error.
fn require_model(m: &Structure, theory: &Theory, arg: &str) -> Result<(), Failure> {
    let report = check_model(m, theory).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(bad) = report.axioms.iter().find(|a| !a.holds) {
        return input(format!(
            "{arg} is not a model of `{}`: axiom {} fails",
            theory.name, bad.id
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rendering helpers

fn gen_arg_labels(m: &Structure, k: SortId, ctx: &[CellId]) -> Vec<String> {
    m.sig
        .gens_from(k)
        .iter()
        .map(|&g| {
            let p = m
                .sig
                .fanout_position(k, m.sig.gen_class(g))
                .expect("generator position");
            m.cell(ctx[p]).label.clone()
        })
        .collect()
}

/// `O` for empty contexts, `A(x, y)` otherwise.
fn sort_at(m: &Structure, k: SortId, ctx: &[CellId]) -> String {
    let name = &m.sig.sort(k).name;
    let args = gen_arg_labels(m, k, ctx);
    if args.is_empty() {
        name.clone()
    } else {
        format!("{}({})", name, args.join(", "))
    }
}

fn render_witness(w: &folds_core::indisc::IndiscWitness) -> String {
    if w.pairs.is_empty() {
        return "(empty)".into();
    }
    w.pairs
        .iter()
        .map(|(s, a, b)| format!("{s}: {a} -> {b}"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn render_morphism(dom: &Structure, cod: &Structure, f: &StructureMorphism) -> String {
    if dom.cells.is_empty() {
        return "(empty)".into();
    }
    dom.cells
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{} -> {}", c.label, cod.cell(f.map[i]).label))
        .collect::<Vec<_>>()
        .join(", ")
}

fn push_witness_lines(text: &mut Vec<String>, witnesses: &[String], noun: &str) {
    for w in witnesses.iter().take(WITNESS_LIMIT) {
        text.push(format!("  {w}"));
    }
    if witnesses.len() > WITNESS_LIMIT {
        text.push(format!(
            "  ... {} more {noun} elided",
            witnesses.len() - WITNESS_LIMIT
        ));
    }
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_validate(files: &[String], dir: Option<&Path>) -> Result<Report, Failure> {
    let mut rows = Vec::new();
    let mut text = Vec::new();
    let mut failed = 0usize;
    for arg in files {
        let ext = Path::new(arg)
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        if !matches!(ext, "sig" | "thy" | "mod") {
            return input(format!(
                "{arg}: cannot tell the file kind (expected .sig, .thy, or .mod)"
            ));
        }
        let stem = arg
            .strip_suffix(&format!(".{ext}"))
            .expect("suffix present");
        let src = if !looks_like_path(arg) {
            match corpus::find_source(stem, ext, dir) {
                Some(s) => s,
                None => read_path(arg)?,
            }
        } else {
            read_path(arg)?
        };
        let near = Path::new(arg).parent();
        let outcome: Result<String, String> = validate_source(&src, ext, dir, near);
        match outcome {
            Ok(summary) => {
                text.push(format!("ok {arg}: {summary}"));
                rows.push(json!({"file": arg, "ok": true, "summary": summary}));
            }
            Err(msg) => {
                failed += 1;
                text.push(format!("error {arg}: {msg}"));
                rows.push(json!({"file": arg, "ok": false, "error": msg}));
            }
        }
    }
    let pass = failed == 0;
    text.push(format!("{} of {} files valid", files.len() - failed, files.len()));
    Ok(Report {
        command: "validate",
        verdict: if pass { "pass" } else { "fail" },
        details: json!({ "files": rows }),
        counts: json!({"files": files.len(), "failed": failed}),
        witnesses: Vec::new(),
        text,
        exit: u8::from(!pass),
    })
}

fn validate_source(
    src: &str,
    ext: &str,
    dir: Option<&Path>,
    near: Option<&Path>,
) -> Result<String, String> {
    let parsed = dsl::parse(src).map_err(|e| e.to_string())?;
    match (ext, parsed) {
        ("sig", DslFile::Signature(spec)) => {
            let sig = validate_signature(spec).map_err(|es| {
                es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
            })?;
            Ok(format!(
                "signature {}: {} sorts, {} generators, height {}",
                sig.name,
                sig.sort_count(),
                sig.gens.len(),
                sig.height
            ))
        }
        ("thy", DslFile::Theory(t)) => {
            let sig = resolve_sig_named(&t.sig_name, dir, near).map_err(|e| e.to_string())?;
            for ax in &t.axioms {
                check_wf(&sig, &ax.formula).map_err(|e| format!("axiom {}: {e}", ax.id))?;
            }
            Ok(format!(
                "theory {}: {} axioms over {}",
                t.name,
                t.axioms.len(),
                t.sig_name
            ))
        }
        ("mod", DslFile::Model(decl)) => {
            let sig = resolve_sig_named(&decl.sig_name, dir, near).map_err(|e| e.to_string())?;
            let m = corpus::build_structure(&sig, &decl).map_err(|e| e.to_string())?;
            Ok(format!(
                "model {}: {} cells over {}",
                decl.name,
                m.len(),
                decl.sig_name
            ))
        }
        (want, got) => {
            let kind = match got {
                DslFile::Signature(_) => "signature",
                DslFile::Theory(_) => "theory",
                DslFile::Model(_) => "model",
            };
            Err(format!("expected a .{want} file but found a {kind}"))
        }
    }
}

fn cmd_check(theory: &str, model: &str, dir: Option<&Path>) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let m = load_model_for(&sig, model, dir)?;
    let report = check_model(&m, &t).map_err(|e| Failure::Input(e.to_string()))?;
    let mut text = Vec::new();
    let mut rows = Vec::new();
    let mut failed = 0usize;
    for ax in &report.axioms {
        if ax.holds {
            text.push(format!("axiom {}: holds", ax.id));
            rows.push(json!({"id": ax.id, "holds": true}));
        } else {
            failed += 1;
            let binding = ax
                .counterexample
                .as_ref()
                .map(|env| {
                    env.iter()
                        .map(|(v, l)| format!("{v} = {l}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                })
                .unwrap_or_default();
            if binding.is_empty() {
                text.push(format!("axiom {}: fails", ax.id));
            } else {
                text.push(format!("axiom {}: fails at {binding}", ax.id));
            }
            rows.push(json!({
                "id": ax.id,
                "holds": false,
                "counterexample": ax.counterexample.as_ref().map(|env| {
                    env.iter().map(|(v, l)| json!([v, l])).collect::<Vec<_>>()
                }),
            }));
        }
    }
    text.push(if report.all_hold {
        format!(
            "model satisfies {} ({}/{} axioms)",
            t.name,
            report.axioms.len(),
            report.axioms.len()
        )
    } else {
        format!(
            "model violates {} ({} of {} axioms fail)",
            t.name,
            failed,
            report.axioms.len()
        )
    });
    Ok(Report {
        command: "check",
        verdict: if report.all_hold { "pass" } else { "fail" },
        details: json!({"theory": t.name, "model": model, "axioms": rows}),
        counts: json!({"axioms": report.axioms.len(), "failed": failed}),
        witnesses: Vec::new(),
        text,
        exit: u8::from(!report.all_hold),
    })
}

fn cmd_univalence(
    theory: &str,
    model: &str,
    sort: Option<&str>,
    dir: Option<&Path>,
) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let m = load_model_for(&sig, model, dir)?;
    require_model(&m, &t, model)?;
    let sort_id = match sort {
        None => None,
        Some(s) => Some(
            sig.sort_by_name(s)
                .ok_or_else(|| Failure::Input(format!("no sort named `{s}` in `{}`", sig.name)))?,
        ),
    };
    let report = univalence_report(&m).map_err(indisc_fail)?;
    let relevant: Vec<_> = report
        .fibers
        .iter()
        .filter(|f| sort_id.map_or(true, |k| f.sort == k))
        .collect();
    let failing: Vec<_> = relevant.iter().filter(|f| !f.univalent).collect();
    let mut text = Vec::new();
    let mut rows = Vec::new();
    for f in &failing {
        let at = sort_at(&m, f.sort, &f.context);
        for &(a, b) in &f.merged_pairs {
            let (la, lb) = (&m.cell(a).label, &m.cell(b).label);
            text.push(format!("not univalent at {at}: {la} ≍ {lb} with {la} ≠ {lb}"));
        }
        for &(a, n) in &f.bad_self {
            let la = &m.cell(a).label;
            if n == 0 {
                text.push(format!("not univalent at {at}: {la} ≍ {la} has no witness"));
            } else {
                text.push(format!(
                    "not univalent at {at}: {la} ≍ {la} has multiple witnesses"
                ));
            }
        }
        rows.push(json!({
            "sort": sig.sort(f.sort).name,
            "context": gen_arg_labels(&m, f.sort, &f.context),
            "merged": f.merged_pairs.iter()
                .map(|&(a, b)| json!([m.cell(a).label, m.cell(b).label]))
                .collect::<Vec<_>>(),
            "bad_self": f.bad_self.iter()
                .map(|&(a, n)| json!([m.cell(a).label, n]))
                .collect::<Vec<_>>(),
        }));
    }
    let pass = failing.is_empty();
    text.push(match (pass, sort) {
        (true, None) => "univalent".into(),
        (true, Some(s)) => format!("univalent at {s}"),
        (false, None) => "not univalent".into(),
        (false, Some(s)) => format!("not univalent at {s}"),
    });
    Ok(Report {
        command: "univalence",
        verdict: if pass { "pass" } else { "fail" },
        details: json!({
            "theory": t.name,
            "model": model,
            "sort": sort,
            "failures": rows,
        }),
        counts: json!({"fibers": relevant.len(), "failing": failing.len()}),
        witnesses: Vec::new(),
        text,
        exit: u8::from(!pass),
    })
}

fn cmd_indisc(
    theory: &str,
    model: &str,
    sort: &str,
    context: &str,
    elems: &[String],
    dir: Option<&Path>,
) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let m = load_model_for(&sig, model, dir)?;
    require_model(&m, &t, model)?;
    let k = sig
        .sort_by_name(sort)
        .ok_or_else(|| Failure::Input(format!("no sort named `{sort}` in `{}`", sig.name)))?;
    let ctx_labels: Vec<String> = context
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    let mut cells = Vec::with_capacity(2);
    for label in elems {
        let cell = m.find_cell(k, label).ok_or_else(|| {
            Failure::Input(format!("no cell labeled `{label}` of sort `{sort}`"))
        })?;
        let have = gen_arg_labels(&m, k, &m.cell(cell).ctx);
        if have != ctx_labels {
            return input(format!(
                "cell `{label}` lives at {}, not {}({})",
                sort_at(&m, k, &m.cell(cell).ctx),
                sort,
                ctx_labels.join(", ")
            ));
        }
        cells.push(cell);
    }
    let result = indiscernibilities(&m, cells[0], cells[1]).map_err(indisc_fail)?;
    let at = sort_at(&m, k, &m.cell(cells[0]).ctx);
    let witnesses: Vec<String> = result.witnesses.iter().map(render_witness).collect();
    let mut text = vec![format!(
        "|{} ≍ {}| = {} at {at}",
        elems[0], elems[1], result.count
    )];
    push_witness_lines(&mut text, &witnesses, "witnesses");
    let pass = result.count >= 1;
    Ok(Report {
        command: "indisc",
        verdict: if pass { "pass" } else { "fail" },
        details: json!({
            "theory": t.name,
            "model": model,
            "sort": sort,
            "context": ctx_labels,
            "elems": elems,
        }),
        counts: json!({"witnesses": result.count}),
        witnesses,
        text,
        exit: u8::from(!pass),
    })
}

fn cmd_derive(signature: &str, model: &str, n: usize, dir: Option<&Path>) -> Result<Report, Failure> {
    let sig = load_sig_arg(signature, dir)?;
    let m = load_model_for(&sig, model, dir)?;
    let mut out_sig = Arc::clone(&sig);
    let mut current = m;
    for _ in 0..n {
        let split = split_structure(&current).map_err(|e| Failure::Input(e.to_string()))?;
        out_sig = Arc::clone(&split.dsig.sig);
        current = split.derived;
    }
    let printed = dsl::print_signature(&signature_spec(&out_sig));
    let text: Vec<String> = printed.lines().map(String::from).collect();
    Ok(Report {
        command: "derive",
        verdict: "pass",
        details: json!({
            "signature": out_sig.name,
            "steps": n,
            "dsl": printed,
        }),
        counts: json!({
            "sorts": out_sig.sort_count(),
            "generators": out_sig.gens.len(),
        }),
        witnesses: Vec::new(),
        text,
        exit: 0,
    })
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Lvl => "levelwise equivalences",
        Kind::Sse => "split-surjective equivalences",
        Kind::Full => "equivalences",
    }
}

fn cmd_equiv(
    theory: &str,
    model_a: &str,
    model_b: &str,
    kind: Kind,
    count_only: bool,
    bound: u64,
    dir: Option<&Path>,
) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let a = load_model_for(&sig, model_a, dir)?;
    let b = load_model_for(&sig, model_b, dir)?;
    require_model(&a, &t, model_a)?;
    require_model(&b, &t, model_b)?;
    let morphisms = enumerate_morphisms(&a, &b, MorFilter::All, bound).map_err(equiv_fail)?;
    let levelwise = morphisms.iter().filter(|m| m.levelwise).count();
    let sse = morphisms
        .iter()
        .filter(|m| m.split_surjective && m.is_equivalence())
        .count();
    let equivalences = morphisms.iter().filter(|m| m.is_equivalence()).count();
    let selected: Vec<&_> = morphisms
        .iter()
        .filter(|m| match kind {
            Kind::Lvl => m.levelwise,
            Kind::Sse => m.split_surjective && m.is_equivalence(),
            Kind::Full => m.is_equivalence(),
        })
        .collect();
    let witnesses: Vec<String> = if count_only {
        Vec::new()
    } else {
        selected
            .iter()
            .map(|cm| render_morphism(&a, &b, &cm.morphism))
            .collect()
    };
    let mut text = vec![
        format!("morphisms: {}", morphisms.len()),
        format!("levelwise: {levelwise}"),
        format!("split-surjective equivalences: {sse}"),
        format!("equivalences: {equivalences}"),
        format!("selected {}: {}", kind_name(kind), selected.len()),
    ];
    push_witness_lines(&mut text, &witnesses, "morphisms");
    let pass = !selected.is_empty();
    Ok(Report {
        command: "equiv",
        verdict: if pass { "pass" } else { "fail" },
        details: json!({
            "theory": t.name,
            "models": [model_a, model_b],
            "kind": kind_name(kind),
            "count_only": count_only,
        }),
        counts: json!({
            "morphisms": morphisms.len(),
            "levelwise": levelwise,
            "split_surjective_equivalences": sse,
            "equivalences": equivalences,
            "selected": selected.len(),
        }),
        witnesses,
        text,
        exit: u8::from(!pass),
    })
}

fn cmd_principle(
    theory: &str,
    model_a: &str,
    model_b: &str,
    bound: u64,
    seed: u64,
    dir: Option<&Path>,
) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let a = load_model_for(&sig, model_a, dir)?;
    let b = load_model_for(&sig, model_b, dir)?;
    require_model(&a, &t, model_a)?;
    require_model(&b, &t, model_b)?;
    let report = univalence_principle_check(&a, &b, bound).map_err(equiv_fail)?;

    // Consequence check: equivalent univalent models satisfy the same
    // sentences, so try every axiom plus seeded random closed formulas.
    let applicable =
        report.dom_univalent && report.cod_univalent && !report.equivalences.is_empty();
    let mut mismatches: Vec<String> = Vec::new();
    if applicable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut formulas: Vec<(String, folds_core::folds::Formula)> = t
            .axioms
            .iter()
            .map(|ax| (format!("axiom {}", ax.id), ax.formula.clone()))
            .collect();
        for i in 0..RANDOM_FORMULAS {
            formulas.push((
                format!("random formula {i}"),
                random_formula(&sig, &mut rng, RANDOM_FORMULA_DEPTH),
            ));
        }
        for (name, f) in &formulas {
            let checked = check_wf(&sig, f).map_err(|e| Failure::Input(e.to_string()))?;
            let va = eval_formula(&a, &checked, &mut Vec::new());
            let vb = eval_formula(&b, &checked, &mut Vec::new());
            if va != vb {
                mismatches.push(name.clone());
            }
        }
    }
    let invariant = mismatches.is_empty();
    let holds = report.holds && invariant;
    let mut text = vec![
        format!("dom univalent: {}", report.dom_univalent),
        format!("cod univalent: {}", report.cod_univalent),
        format!("morphisms: {}", report.morphisms.len()),
        format!("levelwise: {}", report.levelwise.len()),
        format!(
            "split-surjective equivalences: {}",
            report.split_surjective_equivalences.len()
        ),
        format!("equivalences: {}", report.equivalences.len()),
        match report.unique_tables {
            Some(u) => format!("witness tables unique: {u}"),
            None => "witness tables unique: n/a".into(),
        },
        if applicable {
            format!(
                "formula invariance ({} axioms + {} random, seed {}): {}",
                t.axioms.len(),
                RANDOM_FORMULAS,
                seed,
                if invariant { "agree" } else { "disagree" }
            )
        } else {
            "formula invariance: n/a".into()
        },
        format!("principle: {}", if holds { "holds" } else { "violated" }),
    ];
    for name in &mismatches {
        text.push(format!("  disagreement on {name}"));
    }
    Ok(Report {
        command: "principle",
        verdict: if holds { "pass" } else { "fail" },
        details: json!({
            "theory": t.name,
            "models": [model_a, model_b],
            "dom_univalent": report.dom_univalent,
            "cod_univalent": report.cod_univalent,
            "unique_tables": report.unique_tables,
            "formula_invariance": if applicable { json!(invariant) } else { Value::Null },
            "formula_mismatches": mismatches,
            "holds": holds,
        }),
        counts: json!({
            "morphisms": report.morphisms.len(),
            "levelwise": report.levelwise.len(),
            "split_surjective_equivalences": report.split_surjective_equivalences.len(),
            "equivalences": report.equivalences.len(),
        }),
        witnesses: Vec::new(),
        text,
        exit: u8::from(!holds),
    })
}

fn cmd_enumerate(theory: &str, bounds: &str, dir: Option<&Path>) -> Result<Report, Failure> {
    let (t, sig) = load_thy_arg(theory, dir)?;
    let parsed = corpus::parse_bounds(bounds).map_err(corpus_fail)?;
    let models = corpus::enumerate_models(&sig, &t, &parsed).map_err(corpus_fail)?;
    let witnesses: Vec<String> = models
        .iter()
        .enumerate()
        .map(|(i, m)| dsl::print_model(&corpus::model_decl_of(&format!("m{i}"), m)))
        .collect();
    let mut text = vec![format!("models: {}", models.len())];
    for w in witnesses.iter().take(WITNESS_LIMIT) {
        text.push(String::new());
        text.extend(w.lines().map(String::from));
    }
    if witnesses.len() > WITNESS_LIMIT {
        text.push(format!(
            "... {} more models elided",
            witnesses.len() - WITNESS_LIMIT
        ));
    }
    Ok(Report {
        command: "enumerate",
        verdict: "pass",
        details: json!({"theory": t.name, "bounds": bounds}),
        counts: json!({"models": models.len()}),
        witnesses,
        text,
        exit: 0,
    })
}

// ---------------------------------------------------------------------------

fn run(cli: &Cli) -> Result<Report, Failure> {
    let dir = cli.data_dir.as_deref();
    match &cli.command {
        Command::Validate { files } => cmd_validate(files, dir),
        Command::Check { theory, model } => cmd_check(theory, model, dir),
        Command::Univalence { theory, model, sort } => {
            cmd_univalence(theory, model, sort.as_deref(), dir)
        }
        Command::Indisc {
            theory,
            model,
            sort,
            context,
            elems,
        } => cmd_indisc(theory, model, sort, context, elems, dir),
        Command::Derive { signature, model, n } => cmd_derive(signature, model, *n, dir),
        Command::Equiv {
            theory,
            model_a,
            model_b,
            kind,
            count_only,
        } => cmd_equiv(theory, model_a, model_b, *kind, *count_only, cli.max_search, dir),
        Command::Principle {
            theory,
            model_a,
            model_b,
        } => cmd_principle(theory, model_a, model_b, cli.max_search, cli.seed, dir),
        Command::Enumerate { theory, bounds } => cmd_enumerate(theory, bounds, dir),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Check { .. } => "check",
        Command::Univalence { .. } => "univalence",
        Command::Indisc { .. } => "indisc",
        Command::Derive { .. } => "derive",
        Command::Equiv { .. } => "equiv",
        Command::Principle { .. } => "principle",
        Command::Enumerate { .. } => "enumerate",
    }
}

/// Write the whole report in one call and swallow a closed pipe, so
/// `folds ... | head` ends quietly instead of panicking mid-line.
fn write_stdout(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn emit(report: &Report, cli: &Cli, elapsed_ms: u128) {
    if cli.quiet {
        return;
    }
    if cli.json {
        let listed: Vec<&str> = report
            .witnesses
            .iter()
            .take(WITNESS_LIMIT)
            .map(String::as_str)
            .collect();
        let value = json!({
            "command": report.command,
            "verdict": report.verdict,
            "details": report.details,
            "counts": report.counts,
            "witnesses": listed,
            "elapsed_ms": elapsed_ms,
        });
        let mut out = serde_json::to_string_pretty(&value).expect("serializable");
        out.push('\n');
        write_stdout(&out);
    } else {
        let mut out = String::new();
        for line in &report.text {
            out.push_str(line);
            out.push('\n');
        }
        write_stdout(&out);
    }
}

fn emit_failure(cli: &Cli, code: u8, msg: &str) -> ExitCode {
    if cli.json && !cli.quiet {
        let value = json!({
            "command": command_name(&cli.command),
            "verdict": "error",
            "details": {"error": msg},
            "counts": {},
            "witnesses": [],
            "elapsed_ms": 0,
        });
        let mut out = serde_json::to_string_pretty(&value).expect("serializable");
        out.push('\n');
        write_stdout(&out);
    }
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok(report) => {
            let elapsed_ms = if cli.timing { start.elapsed().as_millis() } else { 0 };
            emit(&report, &cli, elapsed_ms);
            ExitCode::from(report.exit)
        }
        Err(Failure::Input(msg)) => emit_failure(&cli, 2, &msg),
        Err(Failure::Resource(msg)) => emit_failure(&cli, 3, &msg),
    }
}
