//! Builtin signatures and theories, model construction from familiar
//! mathematical presentations, independent categorical oracles, and bounded
//! exhaustive model enumeration.
//!
//! Builtins ship as `.sig`/`.thy` sources compiled into the library; a data
//! directory can shadow them by name. Presentations (finite categories,
//! preorders, pointed sets, topologies, multigraphs, semicategories) are
//! validated against their own laws before being turned into structures, so
//! the structures they produce are known-good models and the presentation
//! side can serve as an oracle for the engine.

use crate::dsl::{self, DslFile, ModelDecl, ParseError};
use crate::folds::{check_model, check_wf, FoldsError, Theory};
use crate::sigcore::{validate_signature, SigError, Signature, SortId};
use crate::structure::{matching_contexts, validate_structure, CellId, RawCell, StructError, Structure};
use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("no builtin or data-directory file named `{0}.{1}`")]
    NotFound(String, String),
    #[error("`{0}` is not a {1} file")]
    WrongKind(String, &'static str),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("signature invalid: {}", join_errors(.0))]
    Sig(Vec<SigError>),
    #[error(transparent)]
    SigOp(#[from] SigError),
    #[error(transparent)]
    Struct(#[from] StructError),
    #[error(transparent)]
    Folds(#[from] FoldsError),
    #[error("presentation law violated: {0}")]
    Law(String),
    #[error("model `{model}`: unknown sort `{sort}`")]
    UnknownSort { model: String, sort: String },
    #[error("model `{model}`: sort `{sort}` has no cell labeled `{label}` yet")]
    UnknownLabel { model: String, sort: String, label: String },
    #[error("model `{model}`: label `{label}` declared twice in sort `{sort}`")]
    DuplicateLabel { model: String, sort: String, label: String },
    #[error("model `{model}`: fiber of `{sort}` takes {expect} arguments, got {got}")]
    ArgCount { model: String, sort: String, expect: usize, got: usize },
    #[error("no bound given for sort `{0}`")]
    MissingBound(String),
    #[error("malformed bound `{0}`; expected `Sort=N` or `Sort=set:N`")]
    BadBound(String),
    #[error("set-mode enumeration unsupported here: {0}")]
    Unsupported(String),
}

fn join_errors(es: &[SigError]) -> String {
    es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

// ---------------------------------------------------------------------------
// Builtin registry

static BUILTINS: &[(&str, &str)] = &[
    ("cat.sig", include_str!("../data/cat.sig")),
    ("cat.thy", include_str!("../data/cat.thy")),
    ("cat_e.thy", include_str!("../data/cat_e.thy")),
    ("pointed.sig", include_str!("../data/pointed.sig")),
    ("pointed.thy", include_str!("../data/pointed.thy")),
    ("set.sig", include_str!("../data/set.sig")),
    ("set.thy", include_str!("../data/set.thy")),
    ("preorder.sig", include_str!("../data/preorder.sig")),
    ("preorder.thy", include_str!("../data/preorder.thy")),
    ("preorder_e.sig", include_str!("../data/preorder_e.sig")),
    ("preorder_e.thy", include_str!("../data/preorder_e.thy")),
    ("poset_e.thy", include_str!("../data/poset_e.thy")),
    ("multigraph.sig", include_str!("../data/multigraph.sig")),
    ("multigraph.thy", include_str!("../data/multigraph.thy")),
    ("multigraph_het.sig", include_str!("../data/multigraph_het.sig")),
    ("multigraph_het.thy", include_str!("../data/multigraph_het.thy")),
    ("semicat.sig", include_str!("../data/semicat.sig")),
    ("semicat.thy", include_str!("../data/semicat.thy")),
    ("topology.sig", include_str!("../data/topology.sig")),
    ("topology.thy", include_str!("../data/topology.thy")),
    ("strictcat.sig", include_str!("../data/strictcat.sig")),
    ("strictcat.thy", include_str!("../data/strictcat.thy")),
];

pub fn builtin_files() -> impl Iterator<Item = (&'static str, &'static str)> {
    BUILTINS.iter().copied()
}

pub fn builtin_source(file: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == file).map(|(_, s)| *s)
}

/// Resolve `name.ext`: the data directory (when given) shadows builtins.
pub fn find_source(name: &str, ext: &str, data_dir: Option<&Path>) -> Option<String> {
    if let Some(dir) = data_dir {
        if let Ok(s) = std::fs::read_to_string(dir.join(format!("{name}.{ext}"))) {
            return Some(s);
        }
    }
    builtin_source(&format!("{name}.{ext}")).map(str::to_string)
}

pub fn load_signature(name: &str, data_dir: Option<&Path>) -> Result<Arc<Signature>, CorpusError> {
    let src = find_source(name, "sig", data_dir)
        .ok_or_else(|| CorpusError::NotFound(name.into(), "sig".into()))?;
    match dsl::parse(&src)? {
        DslFile::Signature(spec) => validate_signature(spec)
            .map(Arc::new)
            .map_err(CorpusError::Sig),
        _ => Err(CorpusError::WrongKind(name.into(), "signature")),
    }
}

/// Load a theory and the signature it names; every axiom is wf-checked.
pub fn load_theory(
    name: &str,
    data_dir: Option<&Path>,
) -> Result<(Theory, Arc<Signature>), CorpusError> {
    let src = find_source(name, "thy", data_dir)
        .ok_or_else(|| CorpusError::NotFound(name.into(), "thy".into()))?;
    let theory = match dsl::parse(&src)? {
        DslFile::Theory(t) => t,
        _ => return Err(CorpusError::WrongKind(name.into(), "theory")),
    };
    let sig = load_signature(&theory.sig_name, data_dir)?;
    for ax in &theory.axioms {
        check_wf(&sig, &ax.formula)?;
    }
    Ok((theory, sig))
}

// ---------------------------------------------------------------------------
// Model files

/// Resolve a parsed model file against a signature. Fibers may reference
/// the labels of cells declared earlier in the file; labels must be unique
/// within each sort.
pub fn build_structure(sig: &Arc<Signature>, decl: &ModelDecl) -> Result<Structure, CorpusError> {
    let mut raws: Vec<RawCell> = Vec::new();
    let mut by_label: HashMap<(SortId, String), usize> = HashMap::new();
    for fiber in &decl.fibers {
        let sort = sig.sort_by_name(&fiber.sort).ok_or_else(|| CorpusError::UnknownSort {
            model: decl.name.clone(),
            sort: fiber.sort.clone(),
        })?;
        let gens = sig.gens_from(sort);
        if fiber.args.len() != gens.len() {
            return Err(CorpusError::ArgCount {
                model: decl.name.clone(),
                sort: fiber.sort.clone(),
                expect: gens.len(),
                got: fiber.args.len(),
            });
        }
        let mut gen_args = Vec::with_capacity(gens.len());
        for (&g, arg) in gens.iter().zip(&fiber.args) {
            let target = sig.gen(g).cod;
            let raw = by_label.get(&(target, arg.clone())).ok_or_else(|| {
                CorpusError::UnknownLabel {
                    model: decl.name.clone(),
                    sort: sig.sort(target).name.clone(),
                    label: arg.clone(),
                }
            })?;
            gen_args.push(*raw);
        }
        for label in &fiber.labels {
            if by_label
                .insert((sort, label.clone()), raws.len())
                .is_some()
            {
                return Err(CorpusError::DuplicateLabel {
                    model: decl.name.clone(),
                    sort: fiber.sort.clone(),
                    label: label.clone(),
                });
            }
            raws.push(RawCell {
                sort: sort.0,
                label: label.clone(),
                gen_args: gen_args.clone(),
            });
        }
    }
    let (m, _) = validate_structure(sig, &raws)?;
    Ok(m)
}

/// Load a model file source against a named signature.
pub fn parse_model(
    src: &str,
    data_dir: Option<&Path>,
) -> Result<(ModelDecl, Arc<Signature>, Structure), CorpusError> {
    let decl = match dsl::parse(src)? {
        DslFile::Model(m) => m,
        _ => return Err(CorpusError::WrongKind("<model>".into(), "model")),
    };
    let sig = load_signature(&decl.sig_name, data_dir)?;
    let m = build_structure(&sig, &decl)?;
    Ok((decl, sig, m))
}

/// Render a structure as a model declaration; feeding the result back
/// through [`build_structure`] reproduces the structure.
pub fn model_decl_of(name: &str, m: &Structure) -> ModelDecl {
    let sig = &m.sig;
    let mut fibers: Vec<crate::dsl::FiberDecl> = Vec::new();
    let mut key: Option<(SortId, Vec<CellId>)> = None;
    for cell in &m.cells {
        if key.as_ref() != Some(&(cell.sort, cell.ctx.clone())) {
            let args = sig
                .gens_from(cell.sort)
                .iter()
                .map(|&g| {
                    let p = sig
                        .fanout_position(cell.sort, sig.gen_class(g))
                        .expect("generator position");
                    m.cell(cell.ctx[p]).label.clone()
                })
                .collect();
            fibers.push(crate::dsl::FiberDecl {
                sort: sig.sort(cell.sort).name.clone(),
                args,
                labels: Vec::new(),
            });
            key = Some((cell.sort, cell.ctx.clone()));
        }
        fibers.last_mut().expect("just pushed").labels.push(cell.label.clone());
    }
    ModelDecl {
        name: name.to_string(),
        sig_name: sig.name.clone(),
        fibers,
    }
}

// ---------------------------------------------------------------------------
// Presentations

/// A finite category given by its composition table. `compose[f][g]` is the
/// composite "f then g", defined exactly when cod(f) = dom(g).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatPresentation {
    pub objects: Vec<String>,
    /// (label, dom object, cod object)
    pub arrows: Vec<(String, usize, usize)>,
    /// identities[x] is the arrow index of the identity at object x.
    pub identities: Vec<usize>,
    pub compose: Vec<Vec<Option<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemicatPresentation {
    pub objects: Vec<String>,
    pub arrows: Vec<(String, usize, usize)>,
    pub compose: Vec<Vec<Option<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreorderPresentation {
    pub elems: Vec<String>,
    pub le: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointedPresentation {
    pub elems: Vec<String>,
    pub point: usize,
}

/// Opens are extents: one membership row per open, indexed by point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopologyPresentation {
    pub points: Vec<String>,
    pub opens: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultigraphPresentation {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PresentedObject {
    Category(CatPresentation),
    Semicategory(SemicatPresentation),
    Preorder(PreorderPresentation),
    PointedSet(PointedPresentation),
    Topology(TopologyPresentation),
    Multigraph(MultigraphPresentation),
}

fn distinct(labels: impl Iterator<Item = String>, what: &str) -> Result<(), CorpusError> {
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l.clone()) {
            return Err(CorpusError::Law(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

fn validate_table(
    objects: &[String],
    arrows: &[(String, usize, usize)],
    compose: &[Vec<Option<usize>>],
) -> Result<(), CorpusError> {
    distinct(objects.iter().cloned(), "object")?;
    distinct(arrows.iter().map(|(l, _, _)| l.clone()), "arrow")?;
    for (l, d, c) in arrows {
        if *d >= objects.len() || *c >= objects.len() {
            return Err(CorpusError::Law(format!("arrow `{l}` has a bad endpoint")));
        }
    }
    if compose.len() != arrows.len() || compose.iter().any(|row| row.len() != arrows.len()) {
        return Err(CorpusError::Law("composition table has wrong dimensions".into()));
    }
    for f in 0..arrows.len() {
        for g in 0..arrows.len() {
            let composable = arrows[f].2 == arrows[g].1;
            match compose[f][g] {
                Some(h) if composable => {
                    if arrows[h].1 != arrows[f].1 || arrows[h].2 != arrows[g].2 {
                        return Err(CorpusError::Law(format!(
                            "composite of `{}` and `{}` has wrong endpoints",
                            arrows[f].0, arrows[g].0
                        )));
                    }
                }
                None if !composable => {}
                Some(_) => {
                    return Err(CorpusError::Law(format!(
                        "`{}` and `{}` are not composable but have a composite",
                        arrows[f].0, arrows[g].0
                    )))
                }
                None => {
                    return Err(CorpusError::Law(format!(
                        "missing composite of `{}` and `{}`",
                        arrows[f].0, arrows[g].0
                    )))
                }
            }
        }
    }
    for f in 0..arrows.len() {
        for g in 0..arrows.len() {
            if arrows[f].2 != arrows[g].1 {
                continue;
            }
            for h in 0..arrows.len() {
                if arrows[g].2 != arrows[h].1 {
                    continue;
                }
                let left = compose[compose[f][g].expect("checked")][h].expect("checked");
                let right = compose[f][compose[g][h].expect("checked")].expect("checked");
                if left != right {
                    return Err(CorpusError::Law(format!(
                        "associativity fails at `{}`, `{}`, `{}`",
                        arrows[f].0, arrows[g].0, arrows[h].0
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn validate_category(p: &CatPresentation) -> Result<(), CorpusError> {
    validate_table(&p.objects, &p.arrows, &p.compose)?;
    if p.identities.len() != p.objects.len() {
        return Err(CorpusError::Law("one identity per object required".into()));
    }
    for (x, &i) in p.identities.iter().enumerate() {
        if i >= p.arrows.len() || p.arrows[i].1 != x || p.arrows[i].2 != x {
            return Err(CorpusError::Law(format!(
                "identity of `{}` is not an endo-arrow there",
                p.objects[x]
            )));
        }
    }
    for f in 0..p.arrows.len() {
        let (ref l, d, c) = p.arrows[f];
        if p.compose[p.identities[d]][f] != Some(f) || p.compose[f][p.identities[c]] != Some(f) {
            return Err(CorpusError::Law(format!("identity laws fail at `{l}`")));
        }
    }
    Ok(())
}

pub fn validate_semicategory(p: &SemicatPresentation) -> Result<(), CorpusError> {
    validate_table(&p.objects, &p.arrows, &p.compose)
}

pub fn validate_preorder(p: &PreorderPresentation) -> Result<(), CorpusError> {
    distinct(p.elems.iter().cloned(), "element")?;
    let n = p.elems.len();
    let mut rel = vec![vec![false; n]; n];
    for &(a, b) in &p.le {
        if a >= n || b >= n {
            return Err(CorpusError::Law("relation pair out of range".into()));
        }
        rel[a][b] = true;
    }
    for x in 0..n {
        if !rel[x][x] {
            return Err(CorpusError::Law(format!("not reflexive at `{}`", p.elems[x])));
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if rel[x][y] && rel[y][z] && !rel[x][z] {
                    return Err(CorpusError::Law(format!(
                        "not transitive at `{}`, `{}`, `{}`",
                        p.elems[x], p.elems[y], p.elems[z]
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn validate_pointed(p: &PointedPresentation) -> Result<(), CorpusError> {
    distinct(p.elems.iter().cloned(), "element")?;
    if p.point >= p.elems.len() {
        return Err(CorpusError::Law("marked point out of range".into()));
    }
    Ok(())
}

pub fn validate_topology(p: &TopologyPresentation) -> Result<(), CorpusError> {
    distinct(p.points.iter().cloned(), "point")?;
    let n = p.points.len();
    if p.opens.iter().any(|o| o.len() != n) {
        return Err(CorpusError::Law("open extent has wrong length".into()));
    }
    let has = |ext: &Vec<bool>| p.opens.contains(ext);
    for (i, a) in p.opens.iter().enumerate() {
        for b in &p.opens[i + 1..] {
            if a == b {
                return Err(CorpusError::Law("duplicate open".into()));
            }
        }
    }
    if !has(&vec![false; n]) {
        return Err(CorpusError::Law("missing empty open".into()));
    }
    if !has(&vec![true; n]) {
        return Err(CorpusError::Law("missing total open".into()));
    }
    for a in &p.opens {
        for b in &p.opens {
            let inter: Vec<bool> = a.iter().zip(b).map(|(&x, &y)| x && y).collect();
            let union: Vec<bool> = a.iter().zip(b).map(|(&x, &y)| x || y).collect();
            if !has(&inter) || !has(&union) {
                return Err(CorpusError::Law(
                    "opens not closed under binary intersection/union".into(),
                ));
            }
        }
    }
    Ok(())
}

pub fn validate_multigraph(p: &MultigraphPresentation) -> Result<(), CorpusError> {
    distinct(p.vertices.iter().cloned(), "vertex")?;
    distinct(p.edges.iter().map(|(l, _, _)| l.clone()), "edge")?;
    for (l, d, c) in &p.edges {
        if *d >= p.vertices.len() || *c >= p.vertices.len() {
            return Err(CorpusError::Law(format!("edge `{l}` has a bad endpoint")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Building structures from presentations

fn raw(sort: usize, label: String, gen_args: Vec<usize>) -> RawCell {
    RawCell { sort, label, gen_args }
}

fn cat_raws(
    sig: &Signature,
    objects: &[String],
    arrows: &[(String, usize, usize)],
    compose: &[Vec<Option<usize>>],
    identities: Option<&[usize]>,
    with_object_equality: bool,
) -> Vec<RawCell> {
    let s = |n: &str| sig.sort_by_name(n).expect("category-shaped signature").0;
    let (o, a, t) = (s("O"), s("A"), s("T"));
    let mut raws = Vec::new();
    for l in objects {
        raws.push(raw(o, l.clone(), vec![]));
    }
    let ar = |f: usize| objects.len() + f;
    for (l, d, c) in arrows {
        raws.push(raw(a, l.clone(), vec![*d, *c]));
    }
    let mut k = 0;
    for f in 0..arrows.len() {
        for g in 0..arrows.len() {
            if let Some(h) = compose[f][g] {
                raws.push(raw(t, format!("t{k}"), vec![ar(f), ar(g), ar(h)]));
                k += 1;
            }
        }
    }
    if let Some(ids) = identities {
        let i = s("I");
        for (x, &f) in ids.iter().enumerate() {
            raws.push(raw(i, format!("u{x}"), vec![ar(f)]));
        }
    }
    let e_sort = sig.sort_by_name("E").or_else(|| sig.sort_by_name("EA")).expect("arrow equality sort");
    for f in 0..arrows.len() {
        raws.push(raw(e_sort.0, format!("e{f}"), vec![ar(f), ar(f)]));
    }
    if with_object_equality {
        let eo = s("EO");
        for x in 0..objects.len() {
            raws.push(raw(eo, format!("eo{x}"), vec![x, x]));
        }
    }
    raws
}

/// Build the (theory, structure) pair a presentation denotes; the laws are
/// checked first and the result is verified against the theory's axioms.
pub fn build_model(p: &PresentedObject) -> Result<(Theory, Structure), CorpusError> {
    let (theory_name, raws, sig) = match p {
        PresentedObject::Category(c) => {
            validate_category(c)?;
            let sig = load_signature("cat", None)?;
            let raws = cat_raws(&sig, &c.objects, &c.arrows, &c.compose, Some(&c.identities), false);
            ("cat_e", raws, sig)
        }
        PresentedObject::Semicategory(c) => {
            validate_semicategory(c)?;
            let sig = load_signature("semicat", None)?;
            let raws = cat_raws(&sig, &c.objects, &c.arrows, &c.compose, None, false);
            ("semicat", raws, sig)
        }
        PresentedObject::Preorder(pr) => {
            validate_preorder(pr)?;
            let sig = load_signature("preorder", None)?;
            let mut raws = Vec::new();
            for l in &pr.elems {
                raws.push(raw(0, l.clone(), vec![]));
            }
            for (k, &(x, y)) in pr.le.iter().enumerate() {
                raws.push(raw(1, format!("le{k}"), vec![x, y]));
            }
            ("preorder", raws, sig)
        }
        PresentedObject::PointedSet(ps) => {
            validate_pointed(ps)?;
            let sig = load_signature("pointed", None)?;
            let mut raws = Vec::new();
            for l in &ps.elems {
                raws.push(raw(0, l.clone(), vec![]));
            }
            raws.push(raw(1, "pt".into(), vec![ps.point]));
            for x in 0..ps.elems.len() {
                raws.push(raw(2, format!("e{x}"), vec![x, x]));
            }
            ("pointed", raws, sig)
        }
        PresentedObject::Topology(tp) => {
            validate_topology(tp)?;
            let sig = load_signature("topology", None)?;
            let mut raws = Vec::new();
            for l in &tp.points {
                raws.push(raw(0, l.clone(), vec![]));
            }
            for k in 0..tp.opens.len() {
                raws.push(raw(1, format!("o{k}"), vec![]));
            }
            let mut k = 0;
            for (oi, ext) in tp.opens.iter().enumerate() {
                for (pi, &inside) in ext.iter().enumerate() {
                    if inside {
                        raws.push(raw(2, format!("in{k}"), vec![pi, tp.points.len() + oi]));
                        k += 1;
                    }
                }
            }
            ("topology", raws, sig)
        }
        PresentedObject::Multigraph(g) => {
            validate_multigraph(g)?;
            let sig = load_signature("multigraph", None)?;
            let mut raws = Vec::new();
            for l in &g.vertices {
                raws.push(raw(0, l.clone(), vec![]));
            }
            for (l, d, c) in &g.edges {
                raws.push(raw(1, l.clone(), vec![*d, *c]));
            }
            for f in 0..g.edges.len() {
                raws.push(raw(2, format!("e{f}"), vec![g.vertices.len() + f, g.vertices.len() + f]));
            }
            ("multigraph", raws, sig)
        }
    };
    let (m, _) = validate_structure(&sig, &raws)?;
    let (theory, _) = load_theory(theory_name, None)?;
    let report = check_model(&m, &theory)?;
    if !report.all_hold {
        let bad: Vec<&str> = report
            .axioms
            .iter()
            .filter(|a| !a.holds)
            .map(|a| a.id.as_str())
            .collect();
        return Err(CorpusError::Law(format!(
            "built model violates axiom(s) {}",
            bad.join(", ")
        )));
    }
    Ok((theory, m))
}

/// A category model over the object-equality signature, with both equality
/// sorts populated diagonally.
pub fn build_strict_category(c: &CatPresentation) -> Result<(Theory, Structure), CorpusError> {
    validate_category(c)?;
    let sig = load_signature("strictcat", None)?;
    let raws = cat_raws(&sig, &c.objects, &c.arrows, &c.compose, Some(&c.identities), true);
    let (m, _) = validate_structure(&sig, &raws)?;
    let (theory, _) = load_theory("strictcat", None)?;
    let report = check_model(&m, &theory)?;
    if !report.all_hold {
        return Err(CorpusError::Law("strict category model violates its axioms".into()));
    }
    Ok((theory, m))
}

/// A multigraph model over the heterogeneous-equality signature.
pub fn build_het_multigraph(g: &MultigraphPresentation) -> Result<(Theory, Structure), CorpusError> {
    validate_multigraph(g)?;
    let sig = load_signature("multigraph_het", None)?;
    let mut raws = Vec::new();
    for l in &g.vertices {
        raws.push(raw(0, l.clone(), vec![]));
    }
    for (l, d, c) in &g.edges {
        raws.push(raw(1, l.clone(), vec![*d, *c]));
    }
    for x in 0..g.vertices.len() {
        raws.push(raw(2, format!("eo{x}"), vec![x, x]));
    }
    for f in 0..g.edges.len() {
        let a = g.vertices.len() + f;
        raws.push(raw(3, format!("ea{f}"), vec![a, a]));
    }
    let (m, _) = validate_structure(&sig, &raws)?;
    let (theory, _) = load_theory("multigraph_het", None)?;
    let report = check_model(&m, &theory)?;
    if !report.all_hold {
        return Err(CorpusError::Law("multigraph model violates its axioms".into()));
    }
    Ok((theory, m))
}

// ---------------------------------------------------------------------------
// Extraction (inverse of building, up to canonical relabeling)

fn endpoint_positions(sig: &Signature, a: SortId) -> (usize, usize) {
    let gens = sig.gens_from(a);
    let p0 = sig.fanout_position(a, sig.gen_class(gens[0])).expect("fanout");
    let p1 = sig.fanout_position(a, sig.gen_class(gens[1])).expect("fanout");
    (p0, p1)
}

pub fn extract_category(m: &Structure) -> CatPresentation {
    let sig = &m.sig;
    let (o, a, t, i) = (
        sig.sort_by_name("O").expect("O"),
        sig.sort_by_name("A").expect("A"),
        sig.sort_by_name("T").expect("T"),
        sig.sort_by_name("I").expect("I"),
    );
    let objects: Vec<String> = m.cells_of_sort(o).iter().map(|&x| m.cell(x).label.clone()).collect();
    let (dp, cp) = endpoint_positions(sig, a);
    let arrows: Vec<(String, usize, usize)> = m
        .cells_of_sort(a)
        .iter()
        .map(|&x| {
            let cell = m.cell(x);
            (
                cell.label.clone(),
                m.index_in_sort(cell.ctx[dp]),
                m.index_in_sort(cell.ctx[cp]),
            )
        })
        .collect();
    let n = arrows.len();
    let mut compose = vec![vec![None; n]; n];
    let tg = sig.gens_from(t);
    let tpos: Vec<usize> = tg
        .iter()
        .map(|&g| sig.fanout_position(t, sig.gen_class(g)).expect("fanout"))
        .collect();
    for &x in m.cells_of_sort(t) {
        let c = &m.cell(x).ctx;
        let (f, g, h) = (
            m.index_in_sort(c[tpos[0]]),
            m.index_in_sort(c[tpos[1]]),
            m.index_in_sort(c[tpos[2]]),
        );
        compose[f][g] = Some(h);
    }
    let mut identities = vec![usize::MAX; objects.len()];
    let ipos = sig.fanout_position(i, sig.gen_class(sig.gens_from(i)[0])).expect("fanout");
    for &x in m.cells_of_sort(i) {
        let f = m.index_in_sort(m.cell(x).ctx[ipos]);
        identities[arrows[f].1] = f;
    }
    CatPresentation { objects, arrows, identities, compose }
}

pub fn extract_preorder(m: &Structure) -> PreorderPresentation {
    let sig = &m.sig;
    let x = sig.sort_by_name("X").expect("X");
    let le = sig.sort_by_name("Le").expect("Le");
    let elems: Vec<String> = m.cells_of_sort(x).iter().map(|&c| m.cell(c).label.clone()).collect();
    let (lp, rp) = endpoint_positions(sig, le);
    let mut pairs: Vec<(usize, usize)> = m
        .cells_of_sort(le)
        .iter()
        .map(|&c| {
            let cell = m.cell(c);
            (m.index_in_sort(cell.ctx[lp]), m.index_in_sort(cell.ctx[rp]))
        })
        .collect();
    pairs.sort();
    pairs.dedup();
    PreorderPresentation { elems, le: pairs }
}

pub fn extract_pointed(m: &Structure) -> PointedPresentation {
    let sig = &m.sig;
    let x = sig.sort_by_name("X").expect("X");
    let p = sig.sort_by_name("P").expect("P");
    let elems: Vec<String> = m.cells_of_sort(x).iter().map(|&c| m.cell(c).label.clone()).collect();
    let cell = m.cells_of_sort(p).first().expect("a marked point");
    PointedPresentation {
        elems,
        point: m.index_in_sort(m.cell(*cell).ctx[0]),
    }
}

pub fn extract_topology(m: &Structure) -> TopologyPresentation {
    let sig = &m.sig;
    let pt = sig.sort_by_name("Pt").expect("Pt");
    let op = sig.sort_by_name("Op").expect("Op");
    let inn = sig.sort_by_name("In").expect("In");
    let points: Vec<String> = m.cells_of_sort(pt).iter().map(|&c| m.cell(c).label.clone()).collect();
    let opens = m
        .cells_of_sort(op)
        .iter()
        .map(|&o| {
            m.cells_of_sort(pt)
                .iter()
                .map(|&p| !m.fiber(inn, &[p, o]).is_empty())
                .collect()
        })
        .collect();
    TopologyPresentation { points, opens }
}

pub fn extract_multigraph(m: &Structure) -> MultigraphPresentation {
    let sig = &m.sig;
    let o = sig.sort_by_name("O").expect("O");
    let a = sig.sort_by_name("A").expect("A");
    let vertices: Vec<String> = m.cells_of_sort(o).iter().map(|&c| m.cell(c).label.clone()).collect();
    let (dp, cp) = endpoint_positions(sig, a);
    let edges = m
        .cells_of_sort(a)
        .iter()
        .map(|&x| {
            let cell = m.cell(x);
            (
                cell.label.clone(),
                m.index_in_sort(cell.ctx[dp]),
                m.index_in_sort(cell.ctx[cp]),
            )
        })
        .collect();
    MultigraphPresentation { vertices, edges }
}

// ---------------------------------------------------------------------------
// Categorical oracle

/// All isomorphism pairs (f: a -> b, g: b -> a) computed directly from the
/// composition table, independent of the indiscernibility engine.
pub fn oracle_isomorphisms(
    p: &CatPresentation,
    a: usize,
    b: usize,
) -> Result<Vec<(usize, usize)>, CorpusError> {
    if a >= p.objects.len() || b >= p.objects.len() {
        return Err(CorpusError::Law("not an object of the category".into()));
    }
    let mut isos = Vec::new();
    for f in 0..p.arrows.len() {
        if p.arrows[f].1 != a || p.arrows[f].2 != b {
            continue;
        }
        for g in 0..p.arrows.len() {
            if p.arrows[g].1 != b || p.arrows[g].2 != a {
                continue;
            }
            if p.compose[f][g] == Some(p.identities[a]) && p.compose[g][f] == Some(p.identities[b]) {
                isos.push((f, g));
            }
        }
    }
    Ok(isos)
}

/// Skeletal with trivial automorphism groups, straight from the table.
pub fn oracle_gaunt(p: &CatPresentation) -> Result<bool, CorpusError> {
    for a in 0..p.objects.len() {
        for b in 0..p.objects.len() {
            let want = usize::from(a == b);
            if oracle_isomorphisms(p, a, b)?.len() != want {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// The category corpus

/// A thin category from a reflexive-transitive relation.
fn thin(labels: &[&str], rel: &[(usize, usize)]) -> CatPresentation {
    let objects: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    let arrows: Vec<(String, usize, usize)> = rel
        .iter()
        .map(|&(i, j)| {
            let l = if i == j { format!("i{}", labels[i]) } else { format!("f{i}{j}") };
            (l, i, j)
        })
        .collect();
    let find = |i: usize, j: usize| rel.iter().position(|&p| p == (i, j)).expect("closed relation");
    let n = arrows.len();
    let mut compose = vec![vec![None; n]; n];
    for (fi, &(i, j)) in rel.iter().enumerate() {
        for (gi, &(j2, k)) in rel.iter().enumerate() {
            if j == j2 {
                compose[fi][gi] = Some(find(i, k));
            }
        }
    }
    let identities = (0..labels.len()).map(|i| find(i, i)).collect();
    CatPresentation { objects, arrows, identities, compose }
}

/// A one-object category from a monoid table; `mult[g][f]` is g after f.
fn one_object(labels: &[&str], unit: usize, mult: &dyn Fn(usize, usize) -> usize) -> CatPresentation {
    let n = labels.len();
    let arrows: Vec<(String, usize, usize)> =
        labels.iter().map(|l| (l.to_string(), 0, 0)).collect();
    let mut compose = vec![vec![None; n]; n];
    for (f, row) in compose.iter_mut().enumerate() {
        for (g, slot) in row.iter_mut().enumerate() {
            *slot = Some(mult(g, f));
        }
    }
    CatPresentation {
        objects: vec!["o".into()],
        arrows,
        identities: vec![unit],
        compose,
    }
}

fn coproduct(left: &CatPresentation, right: &CatPresentation) -> CatPresentation {
    let objects: Vec<String> = left.objects.iter().chain(&right.objects).cloned().collect();
    let oo = left.objects.len();
    let ao = left.arrows.len();
    let mut arrows = left.arrows.clone();
    arrows.extend(right.arrows.iter().map(|(l, d, c)| (l.clone(), d + oo, c + oo)));
    let n = arrows.len();
    let mut compose = vec![vec![None; n]; n];
    for f in 0..left.arrows.len() {
        for g in 0..left.arrows.len() {
            compose[f][g] = left.compose[f][g];
        }
    }
    for f in 0..right.arrows.len() {
        for g in 0..right.arrows.len() {
            compose[ao + f][ao + g] = right.compose[f][g].map(|h| ao + h);
        }
    }
    let identities = left
        .identities
        .iter()
        .copied()
        .chain(right.identities.iter().map(|&i| ao + i))
        .collect();
    CatPresentation { objects, arrows, identities, compose }
}

fn discrete(labels: &[&str]) -> CatPresentation {
    let rel: Vec<(usize, usize)> = (0..labels.len()).map(|i| (i, i)).collect();
    thin(labels, &rel)
}

fn codiscrete(labels: &[&str]) -> CatPresentation {
    let mut rel = Vec::new();
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            rel.push((i, j));
        }
    }
    thin(labels, &rel)
}

fn chain(labels: &[&str]) -> CatPresentation {
    let mut rel = Vec::new();
    for i in 0..labels.len() {
        for j in i..labels.len() {
            rel.push((i, j));
        }
    }
    thin(labels, &rel)
}

fn cyclic(n: usize) -> CatPresentation {
    let labels: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
    let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    one_object(&refs, 0, &|g, f| (g + f) % n)
}

fn parallel_pair() -> CatPresentation {
    CatPresentation {
        objects: vec!["x".into(), "y".into()],
        arrows: vec![
            ("ix".into(), 0, 0),
            ("iy".into(), 1, 1),
            ("u".into(), 0, 1),
            ("v".into(), 0, 1),
        ],
        identities: vec![0, 1],
        compose: vec![
            vec![Some(0), None, Some(2), Some(3)],
            vec![None, Some(1), None, None],
            vec![None, Some(2), None, None],
            vec![None, Some(3), None, None],
        ],
    }
}

/// Named presentations covering discrete, thin, grouplike, and monoid
/// behaviour; every entry is a lawful finite category.
pub fn category_corpus() -> Vec<(&'static str, CatPresentation)> {
    vec![
        ("discrete1", discrete(&["x"])),
        ("discrete2", discrete(&["x", "y"])),
        ("discrete3", discrete(&["x", "y", "z"])),
        ("walking_iso", codiscrete(&["x", "y"])),
        ("z2", cyclic(2)),
        ("z3", cyclic(3)),
        ("chain2", chain(&["x", "y"])),
        ("chain3", chain(&["x", "y", "z"])),
        ("codiscrete2", codiscrete(&["a", "b"])),
        ("codiscrete3", codiscrete(&["a", "b", "c"])),
        ("monoid2", one_object(&["e", "s"], 0, &|g, f| {
            if g == 0 && f == 0 {
                0
            } else {
                1
            }
        })),
        ("parallel_pair", parallel_pair()),
        ("span", thin(&["l", "c", "r"], &[(0, 0), (1, 1), (2, 2), (1, 0), (1, 2)])),
        ("cospan", thin(&["l", "c", "r"], &[(0, 0), (1, 1), (2, 2), (0, 1), (2, 1)])),
        ("z2_plus_point", coproduct(&cyclic(2), &discrete(&["p"]))),
        ("iso_plus_point", coproduct(&codiscrete(&["x", "y"]), &discrete(&["p"]))),
    ]
}

/// Curated small models per builtin theory, for cross-theory sweeps.
pub fn corpus_models(theory: &str) -> Result<Vec<(String, Structure)>, CorpusError> {
    let mut out = Vec::new();
    match theory {
        "cat" | "cat_e" => {
            for (name, p) in category_corpus() {
                let (_, m) = build_model(&PresentedObject::Category(p))?;
                out.push((name.to_string(), m));
            }
        }
        "semicat" => {
            for (name, p) in [
                ("discrete2", discrete(&["x", "y"])),
                ("chain2", chain(&["x", "y"])),
                ("band2", {
                    // Two endo-arrows with g after f = f: an associative
                    // table with no unit.
                    let mut p = one_object(&["s", "t"], 0, &|_, f| f);
                    p.identities.clear();
                    p
                }),
            ] {
                let sc = SemicatPresentation {
                    objects: p.objects.clone(),
                    arrows: p.arrows.clone(),
                    compose: p.compose.clone(),
                };
                let (_, m) = build_model(&PresentedObject::Semicategory(sc))?;
                out.push((name.to_string(), m));
            }
        }
        "preorder" => {
            for (name, elems, le) in [
                ("discrete2", vec!["a", "b"], vec![(0, 0), (1, 1)]),
                ("chain2", vec!["a", "b"], vec![(0, 0), (1, 1), (0, 1)]),
                ("codiscrete2", vec!["a", "b"], vec![(0, 0), (1, 1), (0, 1), (1, 0)]),
                ("chain3", vec!["a", "b", "c"], vec![(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]),
            ] {
                let p = PreorderPresentation {
                    elems: elems.into_iter().map(String::from).collect(),
                    le,
                };
                let (_, m) = build_model(&PresentedObject::Preorder(p))?;
                out.push((name.to_string(), m));
            }
        }
        "pointed" => {
            for (name, elems, point) in [
                ("single", vec!["x"], 0),
                ("pair", vec!["x", "y"], 0),
                ("triple", vec!["x", "y", "z"], 1),
            ] {
                let p = PointedPresentation {
                    elems: elems.into_iter().map(String::from).collect(),
                    point,
                };
                let (_, m) = build_model(&PresentedObject::PointedSet(p))?;
                out.push((name.to_string(), m));
            }
        }
        "set" => {
            for n in 1..=3usize {
                let elems: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let sig = load_signature("set", None)?;
                let mut raws = Vec::new();
                for l in &elems {
                    raws.push(raw(0, l.clone(), vec![]));
                }
                for i in 0..n {
                    raws.push(raw(1, format!("e{i}"), vec![i, i]));
                }
                let (m, _) = validate_structure(&sig, &raws)?;
                out.push((format!("set{n}"), m));
            }
        }
        "topology" => {
            for (name, points, opens) in [
                ("point", vec!["p"], vec![vec![false], vec![true]]),
                (
                    "sierpinski",
                    vec!["bot", "top"],
                    vec![vec![false, false], vec![false, true], vec![true, true]],
                ),
                (
                    "discrete2",
                    vec!["p", "q"],
                    vec![
                        vec![false, false],
                        vec![false, true],
                        vec![true, false],
                        vec![true, true],
                    ],
                ),
                ("indiscrete2", vec!["p", "q"], vec![vec![false, false], vec![true, true]]),
            ] {
                let p = TopologyPresentation {
                    points: points.into_iter().map(String::from).collect(),
                    opens,
                };
                let (_, m) = build_model(&PresentedObject::Topology(p))?;
                out.push((name.to_string(), m));
            }
        }
        "multigraph" => {
            for (name, vertices, edges) in [
                ("loop1", vec!["v"], vec![("s", 0, 0)]),
                ("pair_edge", vec!["v", "w"], vec![("s", 0, 1)]),
                ("parallel", vec!["v", "w"], vec![("s", 0, 1), ("t", 0, 1)]),
            ] {
                let p = MultigraphPresentation {
                    vertices: vertices.into_iter().map(String::from).collect(),
                    edges: edges
                        .into_iter()
                        .map(|(l, d, c)| (l.to_string(), d, c))
                        .collect(),
                };
                let (_, m) = build_model(&PresentedObject::Multigraph(p))?;
                out.push((name.to_string(), m));
            }
        }
        "multigraph_het" => {
            for (name, vertices, edges) in [
                ("loop1", vec!["v"], vec![("s", 0, 0)]),
                ("parallel", vec!["v", "w"], vec![("s", 0, 1), ("t", 0, 1)]),
            ] {
                let p = MultigraphPresentation {
                    vertices: vertices.into_iter().map(String::from).collect(),
                    edges: edges
                        .into_iter()
                        .map(|(l, d, c)| (l.to_string(), d, c))
                        .collect(),
                };
                let (_, m) = build_het_multigraph(&p)?;
                out.push((name.to_string(), m));
            }
        }
        "strictcat" => {
            for (name, p) in [
                ("discrete1", discrete(&["x"])),
                ("discrete2", discrete(&["x", "y"])),
                ("chain2", chain(&["x", "y"])),
            ] {
                let (_, m) = build_strict_category(&p)?;
                out.push((name.to_string(), m));
            }
        }
        "preorder_e" | "poset_e" => {
            let sig = load_signature("preorder_e", None)?;
            for (name, elems, le) in [
                ("discrete2", vec!["a", "b"], vec![(0usize, 0usize), (1, 1)]),
                ("chain2", vec!["a", "b"], vec![(0, 0), (1, 1), (0, 1)]),
            ] {
                let mut raws = Vec::new();
                for l in &elems {
                    raws.push(raw(0, l.to_string(), vec![]));
                }
                for (k, &(x, y)) in le.iter().enumerate() {
                    raws.push(raw(1, format!("le{k}"), vec![x, y]));
                }
                for x in 0..elems.len() {
                    raws.push(raw(2, format!("e{x}"), vec![x, x]));
                }
                let (m, _) = validate_structure(&sig, &raws)?;
                out.push((name.to_string(), m));
            }
        }
        other => return Err(CorpusError::NotFound(other.into(), "thy".into())),
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bounded exhaustive model enumeration

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortBound {
    pub sort: String,
    /// Maximum fiber size at that sort.
    pub cap: usize,
    /// Enumerate cells of this rank-0 sort up to their dependency profile:
    /// profiles must be strictly increasing, so the cells behave as a set.
    pub set_mode: bool,
}

/// Parse `X=3,Le=1,Op=set:8`.
pub fn parse_bounds(s: &str) -> Result<Vec<SortBound>, CorpusError> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (sort, val) = item
            .split_once('=')
            .ok_or_else(|| CorpusError::BadBound(item.into()))?;
        let (set_mode, num) = match val.strip_prefix("set:") {
            Some(rest) => (true, rest),
            None => (false, val),
        };
        let cap: usize = num
            .parse()
            .map_err(|_| CorpusError::BadBound(item.into()))?;
        out.push(SortBound {
            sort: sort.trim().to_string(),
            cap,
            set_mode,
        });
    }
    Ok(out)
}

/// All models of the theory within the per-sort fiber caps, filtered by the
/// axioms, in canonical order. Labels are the lowercased sort name plus a
/// counter. Set-mode sorts must have rank 0, be referenced by at most one
/// generator position per rank-1 sort, and not be referenced above rank 1.
pub fn enumerate_models(
    sig: &Arc<Signature>,
    theory: &Theory,
    bounds: &[SortBound],
) -> Result<Vec<Structure>, CorpusError> {
    for ax in &theory.axioms {
        check_wf(sig, &ax.formula)?;
    }
    let mut caps = vec![None; sig.sort_count()];
    let mut set_mode = vec![false; sig.sort_count()];
    for b in bounds {
        let s = sig
            .sort_by_name(&b.sort)
            .ok_or_else(|| CorpusError::MissingBound(b.sort.clone()))?;
        caps[s.0] = Some(b.cap);
        set_mode[s.0] = b.set_mode;
    }
    let caps: Vec<usize> = caps
        .into_iter()
        .enumerate()
        .map(|(s, c)| c.ok_or_else(|| CorpusError::MissingBound(sig.sort(SortId(s)).name.clone())))
        .collect::<Result<_, _>>()?;
    for s in 0..sig.sort_count() {
        let s = SortId(s);
        if set_mode[s.0] && sig.rank(s) != 0 {
            return Err(CorpusError::Unsupported(format!(
                "sort `{}` has positive rank",
                sig.sort(s).name
            )));
        }
        if sig.rank(s) == 0 {
            continue;
        }
        let set_positions = sig
            .full_fanout(s)
            .iter()
            .filter(|&&f| set_mode[sig.class(f).cod.0])
            .count();
        if sig.rank(s) >= 2 && set_positions > 0 {
            return Err(CorpusError::Unsupported(format!(
                "sort `{}` of rank {} depends on a set-mode sort",
                sig.sort(s).name,
                sig.rank(s)
            )));
        }
        if sig.rank(s) == 1 && set_positions > 1 {
            return Err(CorpusError::Unsupported(format!(
                "sort `{}` references a set-mode sort more than once",
                sig.sort(s).name
            )));
        }
    }
    let mut e = Enumerator {
        sig,
        theory,
        caps,
        set_mode,
        out: Vec::new(),
    };
    let mut raws = Vec::new();
    let mut counters = vec![0usize; sig.sort_count()];
    e.rank0(0, &mut raws, &mut counters)?;
    Ok(e.out)
}

struct Enumerator<'a> {
    sig: &'a Arc<Signature>,
    theory: &'a Theory,
    caps: Vec<usize>,
    set_mode: Vec<bool>,
    out: Vec<Structure>,
}

enum Block {
    Single(SortId, Vec<usize>),
    /// All fiber instances referencing one set-mode cell, in parallel order
    /// across the cells of that sort.
    Group {
        set_sort: SortId,
        insts: Vec<(SortId, Vec<usize>)>,
    },
}

impl Enumerator<'_> {
    fn label(&self, s: usize, n: usize) -> String {
        format!("{}{}", self.sig.sort(SortId(s)).name.to_lowercase(), n)
    }

    fn rank0(
        &mut self,
        s: usize,
        raws: &mut Vec<RawCell>,
        counters: &mut Vec<usize>,
    ) -> Result<(), CorpusError> {
        if s == self.sig.sort_count() {
            return self.upper(1, raws, counters);
        }
        if self.sig.rank(SortId(s)) != 0 {
            return self.rank0(s + 1, raws, counters);
        }
        for size in 0..=self.caps[s] {
            let mark = raws.len();
            for i in 0..size {
                raws.push(RawCell {
                    sort: s,
                    label: self.label(s, i),
                    gen_args: vec![],
                });
            }
            counters[s] = size;
            self.rank0(s + 1, raws, counters)?;
            raws.truncate(mark);
            counters[s] = 0;
        }
        Ok(())
    }

    fn upper(
        &mut self,
        r: usize,
        raws: &mut Vec<RawCell>,
        counters: &mut Vec<usize>,
    ) -> Result<(), CorpusError> {
        let set_pass = r == 1 && self.set_mode.iter().any(|&m| m);
        if r >= self.sig.height && !set_pass {
            return self.finalize(raws);
        }
        let (partial, raw_to_cell) = validate_structure(self.sig, raws)?;
        let mut cell_to_raw = vec![0usize; partial.len()];
        for (raw_i, &cell) in raw_to_cell.iter().enumerate() {
            cell_to_raw[cell.0] = raw_i;
        }
        // (group cell, sort, generator args as raw indices)
        let mut insts: Vec<(Option<CellId>, SortId, Vec<usize>)> = Vec::new();
        for s in 0..self.sig.sort_count() {
            let s = SortId(s);
            if self.sig.rank(s) != r {
                continue;
            }
            let gens = self.sig.gens_from(s);
            let positions: Vec<usize> = gens
                .iter()
                .map(|&g| {
                    self.sig
                        .fanout_position(s, self.sig.gen_class(g))
                        .expect("generator position")
                })
                .collect();
            let set_pos: Option<usize> = (r == 1)
                .then(|| {
                    self.sig
                        .full_fanout(s)
                        .iter()
                        .position(|&f| self.set_mode[self.sig.class(f).cod.0])
                })
                .flatten();
            for ctx in matching_contexts(&partial, s) {
                let args: Vec<usize> = positions.iter().map(|&p| cell_to_raw[ctx[p].0]).collect();
                let group = set_pos.map(|p| ctx[p]);
                insts.push((group, s, args));
            }
        }
        insts.sort();
        let mut blocks: Vec<Block> = Vec::new();
        let mut grouped: HashMap<CellId, Vec<(SortId, Vec<usize>)>> = HashMap::new();
        for (group, s, args) in insts {
            match group {
                None => blocks.push(Block::Single(s, args)),
                Some(cell) => grouped.entry(cell).or_default().push((s, args)),
            }
        }
        if set_pass {
            // One group per set-mode cell, in cell order, so that two cells
            // with identical dependency profiles are rejected even when the
            // profile is empty.
            for s0 in 0..self.sig.sort_count() {
                let s0 = SortId(s0);
                if !self.set_mode[s0.0] {
                    continue;
                }
                for &cell in partial.cells_of_sort(s0) {
                    blocks.push(Block::Group {
                        set_sort: s0,
                        insts: grouped.remove(&cell).unwrap_or_default(),
                    });
                }
            }
        }
        self.block_dfs(r, &blocks, 0, raws, counters, &HashMap::new())
    }

    fn block_dfs(
        &mut self,
        r: usize,
        blocks: &[Block],
        b: usize,
        raws: &mut Vec<RawCell>,
        counters: &mut Vec<usize>,
        prev: &HashMap<SortId, Vec<usize>>,
    ) -> Result<(), CorpusError> {
        if b == blocks.len() {
            return self.upper(r + 1, raws, counters);
        }
        match &blocks[b] {
            Block::Single(s, args) => {
                for size in 0..=self.caps[s.0] {
                    let mark = raws.len();
                    let cbase = counters[s.0];
                    for i in 0..size {
                        raws.push(RawCell {
                            sort: s.0,
                            label: self.label(s.0, cbase + i),
                            gen_args: args.clone(),
                        });
                    }
                    counters[s.0] = cbase + size;
                    self.block_dfs(r, blocks, b + 1, raws, counters, prev)?;
                    raws.truncate(mark);
                    counters[s.0] = cbase;
                }
                Ok(())
            }
            Block::Group { set_sort, insts } => {
                let caps: Vec<usize> = insts.iter().map(|(s, _)| self.caps[s.0]).collect();
                let floor = prev.get(set_sort);
                let mut profile = vec![0usize; insts.len()];
                loop {
                    if floor.map_or(true, |f| &profile > f) {
                        let mark = raws.len();
                        let cbase = counters.clone();
                        for (k, (s, args)) in insts.iter().enumerate() {
                            for _ in 0..profile[k] {
                                raws.push(RawCell {
                                    sort: s.0,
                                    label: self.label(s.0, counters[s.0]),
                                    gen_args: args.clone(),
                                });
                                counters[s.0] += 1;
                            }
                        }
                        let mut next = prev.clone();
                        next.insert(*set_sort, profile.clone());
                        self.block_dfs(r, blocks, b + 1, raws, counters, &next)?;
                        raws.truncate(mark);
                        *counters = cbase;
                    }
                    // Odometer over the profile vector, last slot fastest.
                    let mut k = insts.len();
                    loop {
                        if k == 0 {
                            return Ok(());
                        }
                        k -= 1;
                        if profile[k] < caps[k] {
                            profile[k] += 1;
                            break;
                        }
                        profile[k] = 0;
                    }
                }
            }
        }
    }

    fn finalize(&mut self, raws: &[RawCell]) -> Result<(), CorpusError> {
        let (m, _) = validate_structure(self.sig, raws)?;
        if check_model(&m, self.theory)?.all_hold {
            self.out.push(m);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indisc::univalence_report;

    #[test]
    fn every_builtin_parses_validates_and_round_trips() {
        for (file, src) in builtin_files() {
            let parsed = dsl::parse(src).unwrap_or_else(|e| panic!("{file}: {e}"));
            assert_eq!(dsl::print(&parsed), src, "{file} not in canonical form");
            if file.ends_with(".thy") {
                let name = file.trim_end_matches(".thy");
                load_theory(name, None).unwrap_or_else(|e| panic!("{file}: {e}"));
            } else {
                let name = file.trim_end_matches(".sig");
                load_signature(name, None).unwrap_or_else(|e| panic!("{file}: {e}"));
            }
        }
    }

    #[test]
    fn the_category_corpus_is_lawful_and_model_checked() {
        let corpus = category_corpus();
        assert!(corpus.len() >= 15);
        for (name, p) in corpus {
            validate_category(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            let (_, m) = build_model(&PresentedObject::Category(p))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!m.is_empty(), "{name}");
        }
    }

    #[test]
    fn walking_iso_model_has_eight_triangles_with_singleton_fibers() {
        let p = codiscrete(&["x", "y"]);
        let (_, m) = build_model(&PresentedObject::Category(p)).unwrap();
        let t = m.sig.sort_by_name("T").unwrap();
        assert_eq!(m.cells_of_sort(t).len(), 8);
        for ctx in matching_contexts(&m, t) {
            assert!(m.fiber(t, &ctx).len() <= 1);
        }
    }

    #[test]
    fn oracle_counts_match_the_hand_computed_values() {
        let wiso = codiscrete(&["x", "y"]);
        assert_eq!(oracle_isomorphisms(&wiso, 0, 1).unwrap().len(), 1);
        let z2 = cyclic(2);
        assert_eq!(oracle_isomorphisms(&z2, 0, 0).unwrap().len(), 2);
        let d2 = discrete(&["x", "y"]);
        assert_eq!(oracle_isomorphisms(&d2, 0, 1).unwrap().len(), 0);
        assert!(oracle_gaunt(&d2).unwrap());
        assert!(!oracle_gaunt(&wiso).unwrap());
        assert!(oracle_gaunt(&one_object(&["e", "s"], 0, &|g, f| {
            if g == 0 && f == 0 {
                0
            } else {
                1
            }
        }))
        .unwrap());
    }

    #[test]
    fn sierpinski_is_univalent_and_indiscrete_is_not() {
        let (_, sierp) = build_model(&PresentedObject::Topology(TopologyPresentation {
            points: vec!["bot".into(), "top".into()],
            opens: vec![vec![false, false], vec![false, true], vec![true, true]],
        }))
        .unwrap();
        assert!(univalence_report(&sierp).unwrap().univalent);
        let (_, indis) = build_model(&PresentedObject::Topology(TopologyPresentation {
            points: vec!["p".into(), "q".into()],
            opens: vec![vec![false, false], vec![true, true]],
        }))
        .unwrap();
        assert!(!univalence_report(&indis).unwrap().univalent);
    }

    #[test]
    fn extraction_inverts_building() {
        let p = chain(&["x", "y", "z"]);
        let (_, m) = build_model(&PresentedObject::Category(p.clone())).unwrap();
        assert_eq!(extract_category(&m), p);

        let pre = PreorderPresentation {
            elems: vec!["a".into(), "b".into()],
            le: vec![(0, 0), (0, 1), (1, 1)],
        };
        let (_, m) = build_model(&PresentedObject::Preorder(pre.clone())).unwrap();
        let got = extract_preorder(&m);
        assert_eq!(got.elems, pre.elems);
        assert_eq!(got.le, pre.le);

        let tp = TopologyPresentation {
            points: vec!["p".into(), "q".into()],
            opens: vec![vec![false, false], vec![true, false], vec![true, true]],
        };
        let (_, m) = build_model(&PresentedObject::Topology(tp.clone())).unwrap();
        assert_eq!(extract_topology(&m), tp);

        let ps = PointedPresentation {
            elems: vec!["x".into(), "y".into()],
            point: 1,
        };
        let (_, m) = build_model(&PresentedObject::PointedSet(ps.clone())).unwrap();
        assert_eq!(extract_pointed(&m), ps);
    }

    #[test]
    fn model_files_resolve_labels_and_reject_duplicates() {
        let src = "model two of preorder {\n  X() = { a, b }\n  Le(a, a) = { p }\n  Le(b, b) = { q }\n  Le(a, b) = { r }\n}\n";
        let (_, _, m) = parse_model(src, None).unwrap();
        assert_eq!(m.len(), 5);
        let bad = "model dup of preorder {\n  X() = { a, a }\n}\n";
        assert!(matches!(
            parse_model(bad, None),
            Err(CorpusError::DuplicateLabel { .. })
        ));
        let dangling = "model miss of preorder {\n  X() = { a }\n  Le(a, b) = { p }\n}\n";
        assert!(matches!(
            parse_model(dangling, None),
            Err(CorpusError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn model_decls_round_trip_through_build() {
        let (_, m) = build_model(&PresentedObject::Category(codiscrete(&["x", "y"]))).unwrap();
        let decl = model_decl_of("wiso", &m);
        let rebuilt = build_structure(&m.sig, &decl).unwrap();
        assert!(m.same_cells(&rebuilt));
        let printed = dsl::print_model(&decl);
        let reparsed = match dsl::parse(&printed).unwrap() {
            DslFile::Model(d) => d,
            _ => panic!("expected a model"),
        };
        assert_eq!(reparsed, decl);
    }

    #[test]
    fn preorder_enumeration_matches_the_known_counts() {
        let (theory, sig) = load_theory("preorder", None).unwrap();
        let bounds = parse_bounds("X=3,Le=1").unwrap();
        let models = enumerate_models(&sig, &theory, &bounds).unwrap();
        let x = sig.sort_by_name("X").unwrap();
        let mut by_size = [0usize; 4];
        for m in &models {
            by_size[m.cells_of_sort(x).len()] += 1;
        }
        // Labeled preorders on 0..3 elements.
        assert_eq!(by_size, [1, 1, 4, 29]);
    }

    #[test]
    fn pointed_enumeration_with_one_element_is_forced() {
        let (theory, sig) = load_theory("pointed", None).unwrap();
        let bounds = parse_bounds("X=1,P=1,E=1").unwrap();
        let models = enumerate_models(&sig, &theory, &bounds).unwrap();
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].len(), 3);
    }

    #[test]
    fn topology_enumeration_matches_the_known_counts() {
        let (theory, sig) = load_theory("topology", None).unwrap();
        let bounds = parse_bounds("Pt=2,Op=set:4,In=1").unwrap();
        let models = enumerate_models(&sig, &theory, &bounds).unwrap();
        let pt = sig.sort_by_name("Pt").unwrap();
        let mut by_size = [0usize; 3];
        for m in &models {
            by_size[m.cells_of_sort(pt).len()] += 1;
        }
        // Labeled topologies on 0, 1, 2 points.
        assert_eq!(by_size, [1, 1, 4]);
    }

    #[test]
    fn three_point_enumeration_matches_the_known_counts() {
        let (theory, sig) = load_theory("topology", None).unwrap();
        let bounds = parse_bounds("Pt=3,Op=set:8,In=1").unwrap();
        let models = enumerate_models(&sig, &theory, &bounds).unwrap();
        let pt = sig.sort_by_name("Pt").unwrap();
        let full = models
            .iter()
            .filter(|m| m.cells_of_sort(pt).len() == 3)
            .count();
        // Labeled topologies on 3 points.
        assert_eq!(full, 29);

        let (theory, sig) = load_theory("preorder", None).unwrap();
        let bounds = parse_bounds("X=3,Le=1").unwrap();
        let models = enumerate_models(&sig, &theory, &bounds).unwrap();
        let x = sig.sort_by_name("X").unwrap();
        let posets = models
            .iter()
            .filter(|m| m.cells_of_sort(x).len() == 3)
            .filter(|m| {
                let p = extract_preorder(m);
                p.le.iter().all(|&(a, b)| a == b || !p.le.contains(&(b, a)))
            })
            .count();
        // Labeled posets on 3 elements.
        assert_eq!(posets, 19);
    }

    #[test]
    fn data_directory_shadows_builtins() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("preorder.thy"),
            "theory preorder on preorder {\n  axiom refl: forall x:X. Le(x, x)\n}\n",
        )
        .unwrap();
        let (t, _) = load_theory("preorder", Some(dir.path())).unwrap();
        assert_eq!(t.axioms.len(), 1);
        let (t, _) = load_theory("preorder", None).unwrap();
        assert_eq!(t.axioms.len(), 3);
    }

    #[test]
    fn corpus_models_exist_for_every_builtin_theory() {
        for theory in [
            "cat", "cat_e", "semicat", "preorder", "preorder_e", "poset_e", "pointed", "set",
            "topology", "multigraph", "multigraph_het", "strictcat",
        ] {
            let models = corpus_models(theory).unwrap_or_else(|e| panic!("{theory}: {e}"));
            assert!(!models.is_empty(), "{theory}");
            let (t, _) = load_theory(theory, None).unwrap();
            for (name, m) in models {
                let report = check_model(&m, &t).unwrap();
                assert!(report.all_hold, "{theory}/{name}");
            }
        }
    }
}
