//! Dependent-sorted first-order logic over a diagram signature.
//!
//! Formulas quantify over fibers: a binder `v : S(a1, ..., ak)` ranges over
//! the cells of sort S whose dependencies at the generators are the cells
//! named by the arguments. Well-formedness resolves every such binder and
//! atom to a full-fanout context template and rejects templates whose
//! factorization routes disagree, exactly mirroring cell validation but on
//! variables instead of cells. Equality is permitted only between variables
//! of one sort with syntactically identical templates.

use crate::sigcore::{Signature, SortId};
use crate::structure::{CellId, Structure};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    /// The fiber of `sort` over the context named by `args` is inhabited.
    /// One argument per generator out of the sort, declaration order.
    Inhab { sort: String, args: Vec<String> },
    Eq(String, String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall {
        var: String,
        sort: String,
        args: Vec<String>,
        body: Box<Formula>,
    },
    Exists {
        var: String,
        sort: String,
        args: Vec<String>,
        body: Box<Formula>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axiom {
    pub id: String,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub sig_name: String,
    pub axioms: Vec<Axiom>,
}

/// A formula resolved against a signature. Variables are slots into the
/// evaluation stack, counted from the bottom; every binder and atom carries
/// its full-fanout context template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Checked {
    True,
    False,
    Inhab {
        sort: SortId,
        ctx: Vec<usize>,
    },
    Eq(usize, usize),
    Not(Box<Checked>),
    And(Box<Checked>, Box<Checked>),
    Or(Box<Checked>, Box<Checked>),
    Implies(Box<Checked>, Box<Checked>),
    Iff(Box<Checked>, Box<Checked>),
    Forall {
        var: String,
        sort: SortId,
        ctx: Vec<usize>,
        body: Box<Checked>,
    },
    Exists {
        var: String,
        sort: SortId,
        ctx: Vec<usize>,
        body: Box<Checked>,
    },
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FoldsError {
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{var}` has sort `{got}`, expected `{expected}`")]
    VariableSort {
        var: String,
        expected: String,
        got: String,
    },
    #[error("sort `{sort}` takes {expected} arguments, got {got}")]
    ArgCount {
        sort: String,
        expected: usize,
        got: usize,
    },
    #[error("context for sort `{sort}` is incoherent at `{position}`")]
    IncoherentContext { sort: String, position: String },
    #[error("cannot equate `{v1}` of sort `{s1}` with `{v2}` of sort `{s2}`")]
    EqSort {
        v1: String,
        s1: String,
        v2: String,
        s2: String,
    },
    #[error("cannot equate `{v1}` and `{v2}`: their contexts differ")]
    EqContext { v1: String, v2: String },
}

struct ScopeVar {
    name: String,
    sort: SortId,
    template: Vec<usize>,
}

fn resolve_context(
    sig: &Signature,
    scope: &[ScopeVar],
    sort: SortId,
    args: &[String],
) -> Result<Vec<usize>, FoldsError> {
    let gens = sig.gens_from(sort);
    if args.len() != gens.len() {
        return Err(FoldsError::ArgCount {
            sort: sig.sort(sort).name.clone(),
            expected: gens.len(),
            got: args.len(),
        });
    }
    let full = sig.full_fanout(sort);
    let routes = sig.factorizations(sort);
    let mut tpl: Vec<Option<usize>> = vec![None; full.len()];
    for (i, &g) in gens.iter().enumerate() {
        let slot = scope
            .iter()
            .rposition(|v| v.name == args[i])
            .ok_or_else(|| FoldsError::UnknownVariable(args[i].clone()))?;
        let expected = sig.gen(g).cod;
        if scope[slot].sort != expected {
            return Err(FoldsError::VariableSort {
                var: args[i].clone(),
                expected: sig.sort(expected).name.clone(),
                got: sig.sort(scope[slot].sort).name.clone(),
            });
        }
        let pos = sig
            .fanout_position(sort, sig.gen_class(g))
            .expect("generator class is in the fanout");
        match tpl[pos] {
            None => tpl[pos] = Some(slot),
            Some(prev) if prev == slot => {}
            Some(_) => {
                return Err(FoldsError::IncoherentContext {
                    sort: sig.sort(sort).name.clone(),
                    position: sig.gen(g).name.clone(),
                })
            }
        }
    }
    for j in 0..full.len() {
        if tpl[j].is_none() {
            let &(jp, g) = routes[j]
                .first()
                .expect("non-generator positions factor through a generator");
            let src = tpl[jp].expect("route source precedes its target");
            let pos = sig
                .fanout_position(scope[src].sort, g)
                .expect("route class is in the source fanout");
            tpl[j] = Some(scope[src].template[pos]);
        }
    }
    let tpl: Vec<usize> = tpl.into_iter().map(|t| t.unwrap()).collect();
    for (j, rs) in routes.iter().enumerate() {
        for &(jp, g) in rs {
            let src = tpl[jp];
            let pos = sig
                .fanout_position(scope[src].sort, g)
                .expect("route class is in the source fanout");
            if scope[src].template[pos] != tpl[j] {
                return Err(FoldsError::IncoherentContext {
                    sort: sig.sort(sort).name.clone(),
                    position: sig.display_class(full[j]),
                });
            }
        }
    }
    Ok(tpl)
}

pub fn check_wf(sig: &Signature, f: &Formula) -> Result<Checked, FoldsError> {
    let mut scope = Vec::new();
    check(sig, &mut scope, f)
}

fn check(sig: &Signature, scope: &mut Vec<ScopeVar>, f: &Formula) -> Result<Checked, FoldsError> {
    Ok(match f {
        Formula::True => Checked::True,
        Formula::False => Checked::False,
        Formula::Inhab { sort, args } => {
            let sid = sig
                .sort_by_name(sort)
                .ok_or_else(|| FoldsError::UnknownSort(sort.clone()))?;
            Checked::Inhab {
                sort: sid,
                ctx: resolve_context(sig, scope, sid, args)?,
            }
        }
        Formula::Eq(v1, v2) => {
            let s1 = scope
                .iter()
                .rposition(|v| v.name == *v1)
                .ok_or_else(|| FoldsError::UnknownVariable(v1.clone()))?;
            let s2 = scope
                .iter()
                .rposition(|v| v.name == *v2)
                .ok_or_else(|| FoldsError::UnknownVariable(v2.clone()))?;
            if scope[s1].sort != scope[s2].sort {
                return Err(FoldsError::EqSort {
                    v1: v1.clone(),
                    s1: sig.sort(scope[s1].sort).name.clone(),
                    v2: v2.clone(),
                    s2: sig.sort(scope[s2].sort).name.clone(),
                });
            }
            if scope[s1].template != scope[s2].template {
                return Err(FoldsError::EqContext {
                    v1: v1.clone(),
                    v2: v2.clone(),
                });
            }
            Checked::Eq(s1, s2)
        }
        Formula::Not(x) => Checked::Not(Box::new(check(sig, scope, x)?)),
        Formula::And(a, b) => Checked::And(
            Box::new(check(sig, scope, a)?),
            Box::new(check(sig, scope, b)?),
        ),
        Formula::Or(a, b) => Checked::Or(
            Box::new(check(sig, scope, a)?),
            Box::new(check(sig, scope, b)?),
        ),
        Formula::Implies(a, b) => Checked::Implies(
            Box::new(check(sig, scope, a)?),
            Box::new(check(sig, scope, b)?),
        ),
        Formula::Iff(a, b) => Checked::Iff(
            Box::new(check(sig, scope, a)?),
            Box::new(check(sig, scope, b)?),
        ),
        Formula::Forall {
            var,
            sort,
            args,
            body,
        }
        | Formula::Exists {
            var,
            sort,
            args,
            body,
        } => {
            let sid = sig
                .sort_by_name(sort)
                .ok_or_else(|| FoldsError::UnknownSort(sort.clone()))?;
            let ctx = resolve_context(sig, scope, sid, args)?;
            scope.push(ScopeVar {
                name: var.clone(),
                sort: sid,
                template: ctx.clone(),
            });
            let checked_body = check(sig, scope, body);
            scope.pop();
            let body = Box::new(checked_body?);
            match f {
                Formula::Forall { .. } => Checked::Forall {
                    var: var.clone(),
                    sort: sid,
                    ctx,
                    body,
                },
                _ => Checked::Exists {
                    var: var.clone(),
                    sort: sid,
                    ctx,
                    body,
                },
            }
        }
    })
}

/// Evaluate a checked formula; `env` holds the cells bound so far, one per
/// enclosing binder, bottom first.
pub fn eval_formula(m: &Structure, f: &Checked, env: &mut Vec<CellId>) -> bool {
    match f {
        Checked::True => true,
        Checked::False => false,
        Checked::Inhab { sort, ctx } => {
            let c: Vec<CellId> = ctx.iter().map(|&s| env[s]).collect();
            !m.fiber(*sort, &c).is_empty()
        }
        Checked::Eq(a, b) => env[*a] == env[*b],
        Checked::Not(x) => !eval_formula(m, x, env),
        Checked::And(a, b) => eval_formula(m, a, env) && eval_formula(m, b, env),
        Checked::Or(a, b) => eval_formula(m, a, env) || eval_formula(m, b, env),
        Checked::Implies(a, b) => !eval_formula(m, a, env) || eval_formula(m, b, env),
        Checked::Iff(a, b) => eval_formula(m, a, env) == eval_formula(m, b, env),
        Checked::Forall { sort, ctx, body, .. } => {
            let c: Vec<CellId> = ctx.iter().map(|&s| env[s]).collect();
            for &x in m.fiber(*sort, &c) {
                env.push(x);
                let ok = eval_formula(m, body, env);
                env.pop();
                if !ok {
                    return false;
                }
            }
            true
        }
        Checked::Exists { sort, ctx, body, .. } => {
            let c: Vec<CellId> = ctx.iter().map(|&s| env[s]).collect();
            for &x in m.fiber(*sort, &c) {
                env.push(x);
                let ok = eval_formula(m, body, env);
                env.pop();
                if ok {
                    return true;
                }
            }
            false
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    pub id: String,
    pub holds: bool,
    /// For a failing axiom: the least assignment of its leading universal
    /// binders under which the rest is false, as (variable, cell label).
    pub counterexample: Option<Vec<(String, String)>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelReport {
    pub all_hold: bool,
    pub axioms: Vec<AxiomReport>,
}

pub fn check_model(m: &Structure, theory: &Theory) -> Result<ModelReport, FoldsError> {
    let mut axioms = Vec::with_capacity(theory.axioms.len());
    let mut all_hold = true;
    for ax in &theory.axioms {
        let checked = check_wf(&m.sig, &ax.formula)?;
        let holds = eval_formula(m, &checked, &mut Vec::new());
        let counterexample = if holds {
            None
        } else {
            all_hold = false;
            let mut env = Vec::new();
            let mut trace = Vec::new();
            let ce = least_falsifying(m, &checked, &mut env, &mut trace)
                .expect("a false formula has a falsifying assignment");
            Some(
                ce.into_iter()
                    .map(|(v, x)| (v, m.cell(x).label.clone()))
                    .collect(),
            )
        };
        axioms.push(AxiomReport {
            id: ax.id.clone(),
            holds,
            counterexample,
        });
    }
    Ok(ModelReport { all_hold, axioms })
}

/// Search the leading universal binders, cells in canonical order, for the
/// lexicographically least assignment falsifying the matrix. Returns None
/// when the formula holds under `env`.
fn least_falsifying(
    m: &Structure,
    f: &Checked,
    env: &mut Vec<CellId>,
    trace: &mut Vec<(String, CellId)>,
) -> Option<Vec<(String, CellId)>> {
    if let Checked::Forall { var, sort, ctx, body } = f {
        let c: Vec<CellId> = ctx.iter().map(|&s| env[s]).collect();
        for &x in m.fiber(*sort, &c) {
            env.push(x);
            trace.push((var.clone(), x));
            let r = least_falsifying(m, body, env, trace);
            env.pop();
            trace.pop();
            if r.is_some() {
                return r;
            }
        }
        None
    } else if eval_formula(m, f, env) {
        None
    } else {
        Some(trace.clone())
    }
}

/// A random closed well-formed formula, at most `max_depth` connectives and
/// binders deep. Deterministic in the generator state.
pub fn random_formula<R: Rng>(sig: &Signature, rng: &mut R, max_depth: usize) -> Formula {
    let mut scope = Vec::new();
    let f = gen_formula(sig, rng, &mut scope, max_depth);
    debug_assert!(check_wf(sig, &f).is_ok());
    f
}

fn gen_formula<R: Rng>(
    sig: &Signature,
    rng: &mut R,
    scope: &mut Vec<ScopeVar>,
    depth: usize,
) -> Formula {
    if depth > 0 {
        match rng.gen_range(0..10) {
            0..=3 => {
                // Binder over a sort whose arguments we can supply.
                if let Some((sort, args, ctx)) = gen_binder_site(sig, rng, scope) {
                    let var = format!("v{}", scope.len());
                    scope.push(ScopeVar {
                        name: var.clone(),
                        sort,
                        template: ctx,
                    });
                    let body = Box::new(gen_formula(sig, rng, scope, depth - 1));
                    scope.pop();
                    let sort = sig.sort(sort).name.clone();
                    return if rng.gen_bool(0.5) {
                        Formula::Forall { var, sort, args, body }
                    } else {
                        Formula::Exists { var, sort, args, body }
                    };
                }
            }
            4 => return Formula::Not(Box::new(gen_formula(sig, rng, scope, depth - 1))),
            5..=8 => {
                let a = Box::new(gen_formula(sig, rng, scope, depth - 1));
                let b = Box::new(gen_formula(sig, rng, scope, depth - 1));
                return match rng.gen_range(0..4) {
                    0 => Formula::And(a, b),
                    1 => Formula::Or(a, b),
                    2 => Formula::Implies(a, b),
                    _ => Formula::Iff(a, b),
                };
            }
            _ => {}
        }
    }
    gen_atom(sig, rng, scope)
}

fn gen_atom<R: Rng>(sig: &Signature, rng: &mut R, scope: &mut Vec<ScopeVar>) -> Formula {
    for _ in 0..8 {
        match rng.gen_range(0..3) {
            0 => {
                if let Some((sort, args, _)) = gen_binder_site(sig, rng, scope) {
                    return Formula::Inhab {
                        sort: sig.sort(sort).name.clone(),
                        args,
                    };
                }
            }
            1 => {
                // Two variables of one sort with identical templates.
                let mut pairs = Vec::new();
                for (i, a) in scope.iter().enumerate() {
                    for b in &scope[i..] {
                        if a.sort == b.sort && a.template == b.template {
                            pairs.push((a.name.clone(), b.name.clone()));
                        }
                    }
                }
                if let Some((a, b)) = pairs.choose(rng) {
                    return Formula::Eq(a.clone(), b.clone());
                }
            }
            _ => return if rng.gen_bool(0.5) { Formula::True } else { Formula::False },
        }
    }
    Formula::True
}

/// Pick a sort and draw scope variables for its generator positions until
/// the induced context is coherent; rank-0 sorts always work.
fn gen_binder_site<R: Rng>(
    sig: &Signature,
    rng: &mut R,
    scope: &mut Vec<ScopeVar>,
) -> Option<(SortId, Vec<String>, Vec<usize>)> {
    let sorts: Vec<SortId> = (0..sig.sort_count()).map(SortId).collect();
    if sorts.is_empty() {
        return None;
    }
    for _ in 0..8 {
        let &sort = sorts.choose(rng).expect("sort list is nonempty");
        let gens = sig.gens_from(sort);
        let mut args = Vec::with_capacity(gens.len());
        let mut ok = true;
        for &g in gens {
            let cod = sig.gen(g).cod;
            let candidates: Vec<&ScopeVar> =
                scope.iter().filter(|v| v.sort == cod).collect();
            match candidates.choose(rng) {
                Some(v) => args.push(v.name.clone()),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if let Ok(ctx) = resolve_context(sig, scope, sort, &args) {
            return Some((sort, args, ctx));
        }
    }
    // Fall back to a rank-0 sort, which needs no arguments.
    let rank0: Vec<SortId> = sorts
        .iter()
        .copied()
        .filter(|&s| sig.rank(s) == 0)
        .collect();
    rank0
        .choose(rng)
        .map(|&s| (s, Vec::new(), Vec::new()))
}
