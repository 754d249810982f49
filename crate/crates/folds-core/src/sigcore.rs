//! Diagram signatures as finite inverse categories.
//!
//! A signature is presented by ranked sorts, generators whose codomain rank
//! is strictly below their domain rank, and equations between parallel
//! generator paths. Validation enumerates every generator path (paths are
//! finite because rank strictly decreases) and identifies parallel paths
//! under the congruence generated by the equations. The result carries
//! finite hom-sets, a total composition table, canonically ordered fanouts,
//! and the factorization routes used for context compatibility checks.
//!
//! The derivative of a signature with respect to a family over its rank-0
//! sorts re-indexes every higher sort by an assignment of family elements to
//! its rank-0 dependencies; it is itself a signature of height one less.

use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

/// Default bound on the number of generator paths enumerated during closure.
pub const DEFAULT_PATH_BOUND: usize = 10_000;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SortId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GenId(pub usize);

/// A morphism class of the closure (an equivalence class of parallel
/// generator paths). Identities are the classes with empty normal form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MorId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortDecl {
    pub name: String,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenDecl {
    pub name: String,
    pub dom: SortId,
    pub cod: SortId,
}

/// An equation between two parallel generator paths, written
/// outermost-first: `[g1, g2]` denotes g1 after g2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: Vec<GenId>,
    pub rhs: Vec<GenId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorClass {
    pub dom: SortId,
    pub cod: SortId,
    /// Least representative path under (length, lexicographic) order.
    pub normal: Vec<GenId>,
}

impl MorClass {
    pub fn is_identity(&self) -> bool {
        self.normal.is_empty()
    }
}

/// Raw presentation accepted by [`validate_signature`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SigSpec {
    pub name: String,
    /// (name, rank)
    pub sorts: Vec<(String, usize)>,
    /// (name, dom sort index, cod sort index)
    pub gens: Vec<(String, usize, usize)>,
    /// Parallel generator paths, outermost-first, by generator index.
    pub equations: Vec<(Vec<usize>, Vec<usize>)>,
    /// Path enumeration bound; 0 means [`DEFAULT_PATH_BOUND`].
    pub path_bound: usize,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SigError {
    #[error("duplicate sort name `{0}`")]
    DuplicateSort(String),
    #[error("duplicate generator name `{name}` on sort `{sort}`")]
    DuplicateGenerator { sort: String, name: String },
    #[error("generator `{gen}`: codomain rank {cod_rank} is not strictly below domain rank {dom_rank}")]
    RankViolation {
        gen: String,
        dom_rank: usize,
        cod_rank: usize,
    },
    #[error("sort index {0} is out of range")]
    DanglingSort(usize),
    #[error("generator index {0} is out of range")]
    DanglingGenerator(usize),
    #[error("equation {index}: side is empty (identities are not permitted in equations)")]
    EmptyEquationSide { index: usize },
    #[error("equation {index}: path does not compose at step {step}")]
    NonComposablePath { index: usize, step: usize },
    #[error("equation {index}: sides are not parallel")]
    NonParallelEquation { index: usize },
    #[error("closure exceeded the path bound of {bound} paths")]
    ClosureBound { bound: usize },
    #[error("morphisms are not composable: cod of the second is not dom of the first")]
    NotComposable,
    #[error("fanout rank {m} is not below the rank {rank} of sort `{sort}`")]
    FanoutRank { sort: String, m: usize, rank: usize },
    #[error("cannot derive a signature of height 0")]
    HeightZero,
    #[error("family gives no value set for rank-0 sort `{0}`")]
    FamilyMissingSort(String),
    #[error("family assigns elements to sort `{0}`, which is not at rank 0")]
    FamilyNotRank0(String),
    #[error("family labels for sort `{0}` are not unique")]
    FamilyDuplicateLabel(String),
    #[error("family map is not total on sort `{0}`")]
    FamilyMapNotTotal(String),
    #[error("derived signatures have different base signatures")]
    BaseMismatch,
}

#[derive(Debug)]
pub struct Signature {
    pub name: String,
    pub sorts: Vec<SortDecl>,
    pub gens: Vec<GenDecl>,
    pub equations: Vec<Equation>,
    /// 1 + max rank; 0 for the empty signature.
    pub height: usize,
    classes: Vec<MorClass>,
    path_class: HashMap<(SortId, Vec<GenId>), MorId>,
    identities: Vec<MorId>,
    gen_class: Vec<MorId>,
    gens_from: Vec<Vec<GenId>>,
    /// fanouts[k][m]: classes from sort k to sorts of rank m, canonical order.
    fanouts: Vec<Vec<Vec<MorId>>>,
    /// Concatenation of fanouts[k][m] for m from rank(k)-1 down to 0.
    full_fanout: Vec<Vec<MorId>>,
    fanout_pos: Vec<HashMap<MorId, usize>>,
    /// factorizations[k][j]: all (j', g) with position_j = g . position_j'
    /// and g not an identity; j' always precedes j.
    factorizations: Vec<Vec<Vec<(usize, MorId)>>>,
}

impl Signature {
    pub fn sort_count(&self) -> usize {
        self.sorts.len()
    }

    pub fn sort(&self, s: SortId) -> &SortDecl {
        &self.sorts[s.0]
    }

    pub fn sort_by_name(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s.name == name).map(SortId)
    }

    pub fn gen(&self, g: GenId) -> &GenDecl {
        &self.gens[g.0]
    }

    pub fn rank(&self, s: SortId) -> usize {
        self.sorts[s.0].rank
    }

    pub fn class(&self, m: MorId) -> &MorClass {
        &self.classes[m.0]
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn identity(&self, s: SortId) -> MorId {
        self.identities[s.0]
    }

    pub fn gen_class(&self, g: GenId) -> MorId {
        self.gen_class[g.0]
    }

    /// Generators out of a sort, in declaration order.
    pub fn gens_from(&self, s: SortId) -> &[GenId] {
        &self.gens_from[s.0]
    }

    /// All morphism classes from `k` to sorts of rank `m`, canonical order.
    pub fn fanout(&self, k: SortId, m: usize) -> Result<&[MorId], SigError> {
        let rank = self.rank(k);
        if m >= rank {
            return Err(SigError::FanoutRank {
                sort: self.sort(k).name.clone(),
                m,
                rank,
            });
        }
        Ok(&self.fanouts[k.0][m])
    }

    /// Fanout positions of `k` over all ranks below it, highest rank first.
    pub fn full_fanout(&self, k: SortId) -> &[MorId] {
        &self.full_fanout[k.0]
    }

    pub fn fanout_position(&self, k: SortId, f: MorId) -> Option<usize> {
        self.fanout_pos[k.0].get(&f).copied()
    }

    pub fn factorizations(&self, k: SortId) -> &[Vec<(usize, MorId)>] {
        &self.factorizations[k.0]
    }

    /// The class of g . f; errors unless cod(f) = dom(g).
    pub fn compose(&self, g: MorId, f: MorId) -> Result<MorId, SigError> {
        let gc = &self.classes[g.0];
        let fc = &self.classes[f.0];
        if fc.cod != gc.dom {
            return Err(SigError::NotComposable);
        }
        if gc.is_identity() {
            return Ok(f);
        }
        if fc.is_identity() {
            return Ok(g);
        }
        let mut path = gc.normal.clone();
        path.extend_from_slice(&fc.normal);
        Ok(self.path_class[&(fc.dom, path)])
    }

    /// The class of a generator path from `dom`; errors if the path does not
    /// compose. The empty path is the identity on `dom`.
    pub fn class_of_path(&self, dom: SortId, path: &[GenId]) -> Result<MorId, SigError> {
        if path.is_empty() {
            return Ok(self.identities[dom.0]);
        }
        self.path_class
            .get(&(dom, path.to_vec()))
            .copied()
            .ok_or(SigError::NotComposable)
    }

    /// All classes from `k` to `l`.
    pub fn hom(&self, k: SortId, l: SortId) -> Vec<MorId> {
        if k == l {
            return vec![self.identities[k.0]];
        }
        let m = self.rank(l);
        if m >= self.rank(k) {
            return Vec::new();
        }
        self.fanouts[k.0][m]
            .iter()
            .copied()
            .filter(|&f| self.classes[f.0].cod == l)
            .collect()
    }

    pub fn display_class(&self, m: MorId) -> String {
        let c = &self.classes[m.0];
        if c.is_identity() {
            format!("id_{}", self.sort(c.dom).name)
        } else {
            c.normal
                .iter()
                .map(|&g| self.gen(g).name.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

pub fn validate_signature(spec: SigSpec) -> Result<Signature, Vec<SigError>> {
    let mut errors = Vec::new();
    let nsorts = spec.sorts.len();

    for (i, (name, _)) in spec.sorts.iter().enumerate() {
        if spec.sorts[..i].iter().any(|(n, _)| n == name) {
            errors.push(SigError::DuplicateSort(name.clone()));
        }
    }

    for (i, (name, dom, cod)) in spec.gens.iter().enumerate() {
        if *dom >= nsorts {
            errors.push(SigError::DanglingSort(*dom));
            continue;
        }
        if *cod >= nsorts {
            errors.push(SigError::DanglingSort(*cod));
            continue;
        }
        let dom_rank = spec.sorts[*dom].1;
        let cod_rank = spec.sorts[*cod].1;
        if cod_rank >= dom_rank {
            errors.push(SigError::RankViolation {
                gen: name.clone(),
                dom_rank,
                cod_rank,
            });
        }
        if spec.gens[..i]
            .iter()
            .any(|(n, d, _)| n == name && d == dom)
        {
            errors.push(SigError::DuplicateGenerator {
                sort: spec.sorts[*dom].0.clone(),
                name: name.clone(),
            });
        }
    }

    let path_endpoints = |path: &[usize], index: usize| -> Result<(usize, usize), SigError> {
        if path.is_empty() {
            return Err(SigError::EmptyEquationSide { index });
        }
        for &g in path {
            if g >= spec.gens.len() {
                return Err(SigError::DanglingGenerator(g));
            }
        }
        for (step, w) in path.windows(2).enumerate() {
            // Outermost-first: the later generator is applied first, so its
            // codomain must be the earlier generator's domain.
            if spec.gens[w[1]].2 != spec.gens[w[0]].1 {
                return Err(SigError::NonComposablePath { index, step });
            }
        }
        Ok((spec.gens[*path.last().unwrap()].1, spec.gens[path[0]].2))
    };

    for (index, (lhs, rhs)) in spec.equations.iter().enumerate() {
        match (path_endpoints(lhs, index), path_endpoints(rhs, index)) {
            (Ok(l), Ok(r)) => {
                if l != r {
                    errors.push(SigError::NonParallelEquation { index });
                }
            }
            (l, r) => {
                if let Err(e) = l {
                    errors.push(e);
                }
                if let Err(e) = r {
                    errors.push(e);
                }
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let sorts: Vec<SortDecl> = spec
        .sorts
        .iter()
        .map(|(name, rank)| SortDecl {
            name: name.clone(),
            rank: *rank,
        })
        .collect();
    let gens: Vec<GenDecl> = spec
        .gens
        .iter()
        .map(|(name, dom, cod)| GenDecl {
            name: name.clone(),
            dom: SortId(*dom),
            cod: SortId(*cod),
        })
        .collect();
    let equations: Vec<Equation> = spec
        .equations
        .iter()
        .map(|(l, r)| Equation {
            lhs: l.iter().map(|&g| GenId(g)).collect(),
            rhs: r.iter().map(|&g| GenId(g)).collect(),
        })
        .collect();
    let bound = if spec.path_bound == 0 {
        DEFAULT_PATH_BOUND
    } else {
        spec.path_bound
    };

    match close(&sorts, &gens, &equations, bound) {
        Ok(closure) => {
            let height = sorts.iter().map(|s| s.rank + 1).max().unwrap_or(0);
            let mut gens_from = vec![Vec::new(); sorts.len()];
            for (i, g) in gens.iter().enumerate() {
                gens_from[g.dom.0].push(GenId(i));
            }
            let mut sig = Signature {
                name: spec.name,
                sorts,
                gens,
                equations,
                height,
                classes: closure.classes,
                path_class: closure.path_class,
                identities: closure.identities,
                gen_class: closure.gen_class,
                gens_from,
                fanouts: Vec::new(),
                full_fanout: Vec::new(),
                fanout_pos: Vec::new(),
                factorizations: Vec::new(),
            };
            build_fanouts(&mut sig);
            Ok(sig)
        }
        Err(e) => Err(vec![e]),
    }
}

/// The declaration the signature was validated from, suitable for printing.
pub fn signature_spec(sig: &Signature) -> SigSpec {
    SigSpec {
        name: sig.name.clone(),
        sorts: sig.sorts.iter().map(|s| (s.name.clone(), s.rank)).collect(),
        gens: sig
            .gens
            .iter()
            .map(|g| (g.name.clone(), g.dom.0, g.cod.0))
            .collect(),
        equations: sig
            .equations
            .iter()
            .map(|e| {
                (
                    e.lhs.iter().map(|g| g.0).collect(),
                    e.rhs.iter().map(|g| g.0).collect(),
                )
            })
            .collect(),
        path_bound: 0,
    }
}

struct Closure {
    classes: Vec<MorClass>,
    path_class: HashMap<(SortId, Vec<GenId>), MorId>,
    identities: Vec<MorId>,
    gen_class: Vec<MorId>,
}

/// Enumerate all generator paths and identify them under the congruence
/// generated by the equations. Replacing one equation side by the other
/// inside any enclosing path is a single rewrite step; the congruence is the
/// symmetric-transitive closure of such steps, which union-find computes
/// once every (path, rewrite) pair has been merged.
fn close(
    sorts: &[SortDecl],
    gens: &[GenDecl],
    equations: &[Equation],
    bound: usize,
) -> Result<Closure, SigError> {
    // Paths keyed by (dom sort, generator list, outermost-first).
    let mut paths: Vec<(SortId, Vec<GenId>)> = Vec::new();
    let mut index: HashMap<(SortId, Vec<GenId>), usize> = HashMap::new();
    let mut cods: Vec<SortId> = Vec::new();

    for (i, _) in sorts.iter().enumerate() {
        let key = (SortId(i), Vec::new());
        index.insert(key.clone(), paths.len());
        paths.push(key);
        cods.push(SortId(i));
    }

    let mut frontier: Vec<usize> = (0..paths.len()).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &p in &frontier {
            let cod = cods[p];
            let (dom, gs) = paths[p].clone();
            for (gi, g) in gens.iter().enumerate() {
                if g.dom != cod {
                    continue;
                }
                let mut new_gs = Vec::with_capacity(gs.len() + 1);
                new_gs.push(GenId(gi));
                new_gs.extend_from_slice(&gs);
                let key = (dom, new_gs);
                if !index.contains_key(&key) {
                    if paths.len() >= bound {
                        return Err(SigError::ClosureBound { bound });
                    }
                    index.insert(key.clone(), paths.len());
                    next.push(paths.len());
                    paths.push(key);
                    cods.push(g.cod);
                }
            }
        }
        frontier = next;
    }

    let mut uf = UnionFind::new(paths.len());
    for (p, (dom, gs)) in paths.iter().enumerate() {
        for eq in equations {
            for (from, to) in [(&eq.lhs, &eq.rhs), (&eq.rhs, &eq.lhs)] {
                if from.len() > gs.len() {
                    continue;
                }
                for start in 0..=gs.len() - from.len() {
                    if &gs[start..start + from.len()] == from.as_slice() {
                        let mut rewritten = Vec::with_capacity(gs.len() - from.len() + to.len());
                        rewritten.extend_from_slice(&gs[..start]);
                        rewritten.extend_from_slice(to);
                        rewritten.extend_from_slice(&gs[start + from.len()..]);
                        let q = index[&(*dom, rewritten)];
                        uf.union(p, q);
                    }
                }
            }
        }
    }

    // Group paths into classes and pick normal forms.
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for p in 0..paths.len() {
        members.entry(uf.find(p)).or_default().push(p);
    }
    let mut reps: Vec<(usize, Vec<usize>)> = members.into_iter().collect();
    let path_key = |p: usize| {
        let (_, gs) = &paths[p];
        (gs.len(), gs.clone())
    };
    for (_, ps) in reps.iter_mut() {
        ps.sort_by_key(|&p| path_key(p));
    }
    reps.sort_by_key(|(_, ps)| {
        let p = ps[0];
        (paths[p].0, path_key(p))
    });

    let mut classes = Vec::with_capacity(reps.len());
    let mut path_class = HashMap::new();
    for (mid, (_, ps)) in reps.iter().enumerate() {
        let first = ps[0];
        let (dom, normal) = paths[first].clone();
        let cod = cods[first];
        for &p in ps {
            debug_assert_eq!(paths[p].0, dom);
            debug_assert_eq!(cods[p], cod);
            path_class.insert(paths[p].clone(), MorId(mid));
        }
        classes.push(MorClass { dom, cod, normal });
    }

    let identities = (0..sorts.len())
        .map(|s| path_class[&(SortId(s), Vec::new())])
        .collect();
    let gen_class = gens
        .iter()
        .enumerate()
        .map(|(gi, g)| path_class[&(g.dom, vec![GenId(gi)])])
        .collect();

    Ok(Closure {
        classes,
        path_class,
        identities,
        gen_class,
    })
}

fn build_fanouts(sig: &mut Signature) {
    let nsorts = sig.sorts.len();
    let mut fanouts = vec![Vec::new(); nsorts];
    for (k, sort) in sig.sorts.iter().enumerate() {
        fanouts[k] = vec![Vec::new(); sort.rank];
    }
    // Classes are already in canonical (dom, length, lex) order, so pushing
    // in MorId order keeps every fanout canonically ordered.
    for (mid, c) in sig.classes.iter().enumerate() {
        if c.is_identity() {
            continue;
        }
        fanouts[c.dom.0][sig.sorts[c.cod.0].rank].push(MorId(mid));
    }

    let mut full = vec![Vec::new(); nsorts];
    let mut pos = vec![HashMap::new(); nsorts];
    for k in 0..nsorts {
        for m in (0..sig.sorts[k].rank).rev() {
            full[k].extend_from_slice(&fanouts[k][m]);
        }
        for (j, &f) in full[k].iter().enumerate() {
            pos[k].insert(f, j);
        }
    }

    let mut factorizations = vec![Vec::new(); nsorts];
    for k in 0..nsorts {
        let n = full[k].len();
        let mut routes = vec![Vec::new(); n];
        for jp in 0..n {
            let fp = full[k][jp];
            let mid_sort = sig.classes[fp.0].cod;
            for g in 0..sig.classes.len() {
                let g = MorId(g);
                let gc = &sig.classes[g.0];
                if gc.dom != mid_sort || gc.is_identity() {
                    continue;
                }
                let composite = sig
                    .compose(g, fp)
                    .expect("fanout composition is total by construction");
                let j = pos[k][&composite];
                debug_assert!(jp < j, "composition strictly decreases rank");
                routes[j].push((jp, g));
            }
        }
        factorizations[k] = routes;
    }

    sig.fanouts = fanouts;
    sig.full_fanout = full;
    sig.fanout_pos = pos;
    sig.factorizations = factorizations;
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// A finite set of labeled elements for every rank-0 sort, indexed by sort.
/// Sorts of positive rank must have empty entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub elems: Vec<Vec<String>>,
}

impl Family {
    pub fn validate(&self, sig: &Signature) -> Result<(), SigError> {
        if self.elems.len() != sig.sorts.len() {
            let missing = sig
                .sorts
                .iter()
                .find(|s| s.rank == 0)
                .map(|s| s.name.clone())
                .unwrap_or_default();
            return Err(SigError::FamilyMissingSort(missing));
        }
        for (i, labels) in self.elems.iter().enumerate() {
            let s = &sig.sorts[i];
            if s.rank > 0 && !labels.is_empty() {
                return Err(SigError::FamilyNotRank0(s.name.clone()));
            }
            for (j, l) in labels.iter().enumerate() {
                if labels[..j].contains(l) {
                    return Err(SigError::FamilyDuplicateLabel(s.name.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Componentwise map between two families over the same base signature.
/// `maps[sort][i]` is the target index of element `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyMap {
    pub maps: Vec<Vec<usize>>,
}

impl FamilyMap {
    pub fn identity(family: &Family) -> Self {
        FamilyMap {
            maps: family
                .elems
                .iter()
                .map(|labels| (0..labels.len()).collect())
                .collect(),
        }
    }
}

#[derive(Debug)]
pub struct DerivedSignature {
    pub base: Arc<Signature>,
    pub family: Family,
    /// The derivative itself, a valid signature of height base.height - 1.
    pub sig: Arc<Signature>,
    /// Per derived sort: the base sort it re-indexes.
    pub sort_base: Vec<SortId>,
    /// Per derived sort: family element indices over fanout(base, 0).
    pub sort_assign: Vec<Vec<usize>>,
    /// Per derived generator: the base generator.
    pub gen_base: Vec<GenId>,
    sort_index: HashMap<(SortId, Vec<usize>), SortId>,
    gen_lift: HashMap<(SortId, GenId), GenId>,
    /// Per derived sort: derived full-fanout position -> base full-fanout
    /// position (the positions of rank >= 1 in the base).
    pos_to_base: Vec<Vec<usize>>,
    /// Per derived sort: base full-fanout position -> derived position.
    base_to_pos: Vec<HashMap<usize, usize>>,
}

impl DerivedSignature {
    pub fn sort_for(&self, base_sort: SortId, assign: &[usize]) -> Option<SortId> {
        self.sort_index.get(&(base_sort, assign.to_vec())).copied()
    }

    pub fn lift_gen(&self, dom: SortId, base_gen: GenId) -> Option<GenId> {
        self.gen_lift.get(&(dom, base_gen)).copied()
    }

    /// The derived class over `dom` projecting to the base class `f`.
    /// Requires rank(cod f) >= 1 in the base (other classes vanish).
    pub fn lift_class(&self, dom: SortId, f: MorId) -> Result<MorId, SigError> {
        let fc = self.base.class(f);
        let mut cur = dom;
        let mut lifted = Vec::with_capacity(fc.normal.len());
        for &g in fc.normal.iter().rev() {
            let dg = self.lift_gen(cur, g).ok_or(SigError::NotComposable)?;
            lifted.push(dg);
            cur = self.sig.gen(dg).cod;
        }
        lifted.reverse();
        self.sig.class_of_path(dom, &lifted)
    }

    pub fn pos_to_base(&self, dsort: SortId) -> &[usize] {
        &self.pos_to_base[dsort.0]
    }

    pub fn base_position(&self, dsort: SortId, base_pos: usize) -> Option<usize> {
        self.base_to_pos[dsort.0].get(&base_pos).copied()
    }
}

pub fn derive_signature(
    base: &Arc<Signature>,
    family: &Family,
) -> Result<DerivedSignature, SigError> {
    if base.height == 0 {
        return Err(SigError::HeightZero);
    }
    family.validate(base)?;

    let mut sort_base = Vec::new();
    let mut sort_assign: Vec<Vec<usize>> = Vec::new();
    let mut sort_names: Vec<String> = Vec::new();
    let mut sort_ranks = Vec::new();
    let mut sort_index = HashMap::new();

    for k in 0..base.sorts.len() {
        let k = SortId(k);
        if base.rank(k) == 0 {
            continue;
        }
        let fan0 = base.fanout(k, 0)?;
        let targets: Vec<usize> = fan0.iter().map(|&f| base.class(f).cod.0).collect();
        let mut assign = vec![0usize; fan0.len()];
        loop {
            if assign
                .iter()
                .zip(&targets)
                .all(|(&a, &t)| a < family.elems[t].len())
            {
                let labels: Vec<&str> = assign
                    .iter()
                    .zip(&targets)
                    .map(|(&a, &t)| family.elems[t][a].as_str())
                    .collect();
                let mut name = base.sort(k).name.clone();
                for l in &labels {
                    name.push('\'');
                    name.push_str(l);
                }
                while sort_names.contains(&name) {
                    name.push('_');
                }
                sort_index.insert((k, assign.clone()), SortId(sort_base.len()));
                sort_base.push(k);
                sort_assign.push(assign.clone());
                sort_names.push(name);
                sort_ranks.push(base.rank(k) - 1);
            }
            // Advance the assignment like a mixed-radix counter.
            let mut i = assign.len();
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                assign[i] += 1;
                if assign[i] < family.elems[targets[i]].len() {
                    break;
                }
                assign[i] = 0;
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX || assign.is_empty() {
                break;
            }
        }
        // Sorts with an empty fanout still yield one derived sort with the
        // empty assignment, which the loop above emits exactly once before
        // `assign.is_empty()` stops it. Sorts with an empty family at some
        // target emit none, which the bounds check above ensures.
    }

    let mut gen_base = Vec::new();
    let mut gen_lift = HashMap::new();
    let mut spec_gens = Vec::new();
    for (ds, (&k, assign)) in sort_base.iter().zip(&sort_assign).enumerate() {
        let fan0 = base.fanout(k, 0)?;
        for &g in base.gens_from(k) {
            let gc = base.gen(g);
            if base.rank(gc.cod) == 0 {
                continue;
            }
            // The codomain assignment is forced: compose each rank-0
            // dependency of the codomain with g and read off the value.
            let cod_fan0 = base.fanout(gc.cod, 0)?;
            let mut cod_assign = Vec::with_capacity(cod_fan0.len());
            for &f in cod_fan0 {
                let composite = base.compose(f, base.gen_class(g))?;
                let p = fan0
                    .iter()
                    .position(|&x| x == composite)
                    .expect("composite lands in the domain fanout");
                cod_assign.push(assign[p]);
            }
            let cod_ds = sort_index[&(gc.cod, cod_assign)];
            gen_lift.insert((SortId(ds), g), GenId(spec_gens.len()));
            gen_base.push(g);
            spec_gens.push((gc.name.clone(), ds, cod_ds.0));
        }
    }

    // Base equations whose codomain survives (rank >= 1) lift once per
    // derived domain sort; equations into rank 0 vanish with their sorts.
    let mut spec_eqs = Vec::new();
    for eq in &base.equations {
        let cod = base.gen(eq.lhs[0]).cod;
        if base.rank(cod) == 0 {
            continue;
        }
        let dom = base.gen(*eq.lhs.last().unwrap()).dom;
        for ds in 0..sort_base.len() {
            if sort_base[ds] != dom {
                continue;
            }
            let lift_path = |path: &[GenId]| -> Vec<usize> {
                let mut cur = SortId(ds);
                let mut out = Vec::with_capacity(path.len());
                for &g in path.iter().rev() {
                    let dg = gen_lift[&(cur, g)];
                    out.push(dg.0);
                    cur = SortId(spec_gens[dg.0].2);
                }
                out.reverse();
                out
            };
            spec_eqs.push((lift_path(&eq.lhs), lift_path(&eq.rhs)));
        }
    }

    let spec = SigSpec {
        name: format!("{}'", base.name),
        sorts: sort_names.into_iter().zip(sort_ranks).collect(),
        gens: spec_gens,
        equations: spec_eqs,
        path_bound: 0,
    };
    let sig = validate_signature(spec)
        .map_err(|mut es| es.pop().expect("derived signature errors are nonempty"))?;
    let sig = Arc::new(sig);

    let mut pos_to_base = Vec::with_capacity(sort_base.len());
    let mut base_to_pos = Vec::with_capacity(sort_base.len());
    let mut derived = DerivedSignature {
        base: Arc::clone(base),
        family: family.clone(),
        sig: Arc::clone(&sig),
        sort_base,
        sort_assign,
        gen_base,
        sort_index,
        gen_lift,
        pos_to_base: Vec::new(),
        base_to_pos: Vec::new(),
    };
    for ds in 0..derived.sort_base.len() {
        let ds_id = SortId(ds);
        let k = derived.sort_base[ds];
        let mut fwd = Vec::new();
        let mut back = HashMap::new();
        for (j, &df) in sig.full_fanout(ds_id).iter().enumerate() {
            // Project the derived class to its base class.
            let base_path: Vec<GenId> = sig.class(df).normal.iter().map(|&dg| derived.gen_base[dg.0]).collect();
            let bf = derived
                .base
                .class_of_path(k, &base_path)
                .expect("projected path composes in the base");
            let bpos = derived
                .base
                .fanout_position(k, bf)
                .expect("projected class is in the base fanout");
            fwd.push(bpos);
            back.insert(bpos, j);
        }
        pos_to_base.push(fwd);
        base_to_pos.push(back);
    }
    derived.pos_to_base = pos_to_base;
    derived.base_to_pos = base_to_pos;
    Ok(derived)
}

/// Sort-and-morphism mapping between two derivatives of the same base,
/// induced by a componentwise family map.
#[derive(Debug, Clone)]
pub struct SigMapping {
    pub sort_map: Vec<SortId>,
    pub class_map: Vec<MorId>,
}

pub fn derived_reindex(
    d1: &DerivedSignature,
    d2: &DerivedSignature,
    h: &FamilyMap,
) -> Result<SigMapping, SigError> {
    if !Arc::ptr_eq(&d1.base, &d2.base) {
        return Err(SigError::BaseMismatch);
    }
    for (s, labels) in d1.family.elems.iter().enumerate() {
        let map = h.maps.get(s).ok_or_else(|| {
            SigError::FamilyMapNotTotal(d1.base.sorts[s].name.clone())
        })?;
        if map.len() != labels.len() || map.iter().any(|&t| t >= d2.family.elems[s].len()) {
            return Err(SigError::FamilyMapNotTotal(d1.base.sorts[s].name.clone()));
        }
    }

    let mut sort_map = Vec::with_capacity(d1.sort_base.len());
    for ds in 0..d1.sort_base.len() {
        let k = d1.sort_base[ds];
        let fan0 = d1.base.fanout(k, 0)?;
        let mapped: Vec<usize> = d1.sort_assign[ds]
            .iter()
            .zip(fan0)
            .map(|(&a, &f)| h.maps[d1.base.class(f).cod.0][a])
            .collect();
        sort_map.push(
            d2.sort_for(k, &mapped)
                .expect("mapped assignment indexes a derived sort"),
        );
    }

    let mut class_map = Vec::with_capacity(d1.sig.class_count());
    for m in 0..d1.sig.class_count() {
        let c = d1.sig.class(MorId(m));
        let dom2 = sort_map[c.dom.0];
        let base_path: Vec<GenId> = c.normal.iter().map(|&dg| d1.gen_base[dg.0]).collect();
        let base_class = d1
            .base
            .class_of_path(d1.sort_base[c.dom.0], &base_path)
            .expect("projected path composes in the base");
        class_map.push(d2.lift_class(dom2, base_class)?);
    }

    Ok(SigMapping {
        sort_map,
        class_map,
    })
}
