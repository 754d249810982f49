//! Finite structures over a diagram signature.
//!
//! A structure assigns to every sort a finite set of labeled cells; each
//! cell carries one dependency per full-fanout position of its sort, and the
//! dependencies must commute with every factorization route of the
//! signature. Cells are numbered canonically by (rank, sort, context,
//! label), which makes every construction in this crate deterministic.
//!
//! A structure splits into its rank-0 family plus a structure over the
//! derived signature; the two halves assemble back exactly. Structures over
//! a derivative pull back along a componentwise map of families.

use crate::sigcore::{
    derive_signature, derived_reindex, DerivedSignature, Family, FamilyMap, MorId, SigError,
    Signature, SortId,
};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CellId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub sort: SortId,
    pub label: String,
    /// One dependency per full-fanout position of the sort.
    pub ctx: Vec<CellId>,
}

#[derive(Debug, Clone)]
pub struct Structure {
    pub sig: Arc<Signature>,
    pub cells: Vec<Cell>,
    by_sort: Vec<Vec<CellId>>,
    fibers: BTreeMap<(SortId, Vec<CellId>), Vec<CellId>>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StructError {
    #[error("cell `{label}`: sort index {sort} is out of range")]
    SortOutOfRange { label: String, sort: usize },
    #[error("cell `{label}`: expected {expected} generator arguments, got {got}")]
    ArgCount {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("cell `{label}`: argument index {arg} is out of range")]
    ArgOutOfRange { label: String, arg: usize },
    #[error("cell `{label}`: argument of `{gen}` has sort `{got}`, expected `{expected}`")]
    ArgSort {
        label: String,
        gen: String,
        expected: String,
        got: String,
    },
    #[error("cell `{label}`: `{g1}` and `{g2}` are equated but their arguments differ")]
    MergedGeneratorMismatch {
        label: String,
        g1: String,
        g2: String,
    },
    #[error("cell `{label}`: dependency at `{composite}` disagrees with `{route}` applied to the dependency at `{via}`")]
    RouteViolation {
        label: String,
        composite: String,
        route: String,
        via: String,
    },
    #[error("duplicate label `{label}` in a fiber of sort `{sort}`")]
    DuplicateLabel { sort: String, label: String },
    #[error("morphism has {got} entries for a structure with {expected} cells")]
    MorphismLength { expected: usize, got: usize },
    #[error("morphism target index {0} is out of range")]
    MorphismTarget(usize),
    #[error("morphism sends a cell of sort `{dom}` to a cell of sort `{cod}`")]
    MorphismSortMismatch { dom: String, cod: String },
    #[error("morphism does not commute with `{class}` at cell `{label}`")]
    MorphismNotNatural { label: String, class: String },
    #[error("cell index {0} is out of range")]
    NoSuchCell(usize),
    #[error("class does not start at the cell's sort")]
    ActionSort,
    #[error("structures are over different signatures")]
    SignatureMismatch,
    #[error(transparent)]
    Sig(#[from] SigError),
}

impl Structure {
    pub fn empty(sig: &Arc<Signature>) -> Structure {
        Structure {
            sig: Arc::clone(sig),
            cells: Vec::new(),
            by_sort: vec![Vec::new(); sig.sort_count()],
            fibers: BTreeMap::new(),
        }
    }

    fn index(sig: &Arc<Signature>, cells: Vec<Cell>) -> Structure {
        let mut by_sort = vec![Vec::new(); sig.sort_count()];
        let mut fibers: BTreeMap<(SortId, Vec<CellId>), Vec<CellId>> = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            by_sort[c.sort.0].push(CellId(i));
            fibers
                .entry((c.sort, c.ctx.clone()))
                .or_default()
                .push(CellId(i));
        }
        Structure {
            sig: Arc::clone(sig),
            cells,
            by_sort,
            fibers,
        }
    }

    pub fn cell(&self, x: CellId) -> &Cell {
        &self.cells[x.0]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells of a sort, ascending (equivalently: grouped by context in
    /// context order, then by label).
    pub fn cells_of_sort(&self, k: SortId) -> &[CellId] {
        &self.by_sort[k.0]
    }

    /// The fiber over a context vector; empty when nothing sits over it.
    pub fn fiber(&self, k: SortId, ctx: &[CellId]) -> &[CellId] {
        self.fibers
            .get(&(k, ctx.to_vec()))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Position of a cell within the cell list of its own sort.
    pub fn index_in_sort(&self, x: CellId) -> usize {
        self.by_sort[self.cells[x.0].sort.0]
            .binary_search(&x)
            .expect("cell is listed under its sort")
    }

    /// First cell of the sort carrying the label, in canonical order.
    pub fn find_cell(&self, k: SortId, label: &str) -> Option<CellId> {
        self.by_sort[k.0]
            .iter()
            .copied()
            .find(|&x| self.cells[x.0].label == label)
    }

    pub fn same_cells(&self, other: &Structure) -> bool {
        self.cells == other.cells
    }
}

/// Input cell for [`validate_structure`]: dependencies are given only at
/// the generators out of the sort (declaration order), as indices into the
/// raw cell list itself.
#[derive(Clone, Debug)]
pub struct RawCell {
    pub sort: usize,
    pub label: String,
    pub gen_args: Vec<usize>,
}

/// Check a raw cell list against the signature and produce the canonically
/// numbered structure plus the raw-index-to-cell translation.
///
/// Dependencies at composite fanout positions are inferred from the
/// generator arguments, then every factorization route is verified, so the
/// resulting contexts commute with all path equalities of the signature.
pub fn validate_structure(
    sig: &Arc<Signature>,
    raw: &[RawCell],
) -> Result<(Structure, Vec<CellId>), StructError> {
    for rc in raw {
        if rc.sort >= sig.sort_count() {
            return Err(StructError::SortOutOfRange {
                label: rc.label.clone(),
                sort: rc.sort,
            });
        }
    }

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&r| sig.rank(SortId(raw[r].sort)));

    let mut temp: Vec<Cell> = Vec::with_capacity(raw.len());
    let mut temp_of_raw: Vec<Option<usize>> = vec![None; raw.len()];

    for &r in &order {
        let rc = &raw[r];
        let k = SortId(rc.sort);
        let gens = sig.gens_from(k);
        if rc.gen_args.len() != gens.len() {
            return Err(StructError::ArgCount {
                label: rc.label.clone(),
                expected: gens.len(),
                got: rc.gen_args.len(),
            });
        }

        let mut args = Vec::with_capacity(gens.len());
        for (i, &a) in rc.gen_args.iter().enumerate() {
            if a >= raw.len() {
                return Err(StructError::ArgOutOfRange {
                    label: rc.label.clone(),
                    arg: a,
                });
            }
            let expected = sig.gen(gens[i]).cod;
            match temp_of_raw[a] {
                Some(t) if temp[t].sort == expected => args.push(t),
                _ => {
                    return Err(StructError::ArgSort {
                        label: rc.label.clone(),
                        gen: sig.gen(gens[i]).name.clone(),
                        expected: sig.sort(expected).name.clone(),
                        got: sig.sort(SortId(raw[a].sort)).name.clone(),
                    })
                }
            }
        }

        let full = sig.full_fanout(k);
        let routes = sig.factorizations(k);
        let mut ctx: Vec<Option<usize>> = vec![None; full.len()];
        for (i, &g) in gens.iter().enumerate() {
            let pos = sig
                .fanout_position(k, sig.gen_class(g))
                .expect("generator class is in the fanout");
            match ctx[pos] {
                None => ctx[pos] = Some(args[i]),
                Some(prev) if prev == args[i] => {}
                Some(_) => {
                    let g1 = gens[..i]
                        .iter()
                        .copied()
                        .find(|&g0| sig.gen_class(g0) == sig.gen_class(g))
                        .expect("an earlier generator filled the position");
                    return Err(StructError::MergedGeneratorMismatch {
                        label: rc.label.clone(),
                        g1: sig.gen(g1).name.clone(),
                        g2: sig.gen(g).name.clone(),
                    });
                }
            }
        }
        // Composite positions: every one has a route from an earlier,
        // already-filled position (routes strictly decrease rank).
        for j in 0..full.len() {
            if ctx[j].is_none() {
                let &(jp, g) = routes[j]
                    .first()
                    .expect("non-generator positions factor through a generator");
                let x = ctx[jp].expect("route source precedes its target");
                let pos = sig
                    .fanout_position(temp[x].sort, g)
                    .expect("route class is in the source fanout");
                ctx[j] = Some(temp[x].ctx[pos].0);
            }
        }
        let ctx: Vec<usize> = ctx.into_iter().map(|c| c.unwrap()).collect();
        for (j, rs) in routes.iter().enumerate() {
            for &(jp, g) in rs {
                let x = ctx[jp];
                let pos = sig
                    .fanout_position(temp[x].sort, g)
                    .expect("route class is in the source fanout");
                if temp[x].ctx[pos].0 != ctx[j] {
                    return Err(StructError::RouteViolation {
                        label: rc.label.clone(),
                        composite: sig.display_class(full[j]),
                        route: sig.display_class(g),
                        via: sig.display_class(full[jp]),
                    });
                }
            }
        }

        temp_of_raw[r] = Some(temp.len());
        temp.push(Cell {
            sort: k,
            label: rc.label.clone(),
            ctx: ctx.into_iter().map(CellId).collect(),
        });
    }

    // Canonical renumbering: ranks ascending; within a rank order by
    // (sort, context under final ids, label). Context entries always point
    // at strictly lower ranks, so their final ids are known in time.
    let mut final_of_temp: Vec<usize> = vec![usize::MAX; temp.len()];
    let mut cells: Vec<Cell> = Vec::with_capacity(temp.len());
    for rank in 0..sig.height {
        let mut level: Vec<usize> = (0..temp.len())
            .filter(|&t| sig.rank(temp[t].sort) == rank)
            .collect();
        level.sort_by(|&a, &b| {
            let key = |t: usize| {
                let c = &temp[t];
                (
                    c.sort,
                    c.ctx
                        .iter()
                        .map(|x| final_of_temp[x.0])
                        .collect::<Vec<_>>(),
                    c.label.clone(),
                )
            };
            key(a).cmp(&key(b))
        });
        for t in level {
            final_of_temp[t] = cells.len();
            let c = &temp[t];
            cells.push(Cell {
                sort: c.sort,
                label: c.label.clone(),
                ctx: c.ctx.iter().map(|x| CellId(final_of_temp[x.0])).collect(),
            });
        }
    }

    let st = Structure::index(sig, cells);
    for ((k, _), fiber) in &st.fibers {
        for w in fiber.windows(2) {
            if st.cells[w[0].0].label == st.cells[w[1].0].label {
                return Err(StructError::DuplicateLabel {
                    sort: sig.sort(*k).name.clone(),
                    label: st.cells[w[0].0].label.clone(),
                });
            }
        }
    }

    let raw_map = temp_of_raw
        .into_iter()
        .map(|t| CellId(final_of_temp[t.expect("every raw cell was placed")]))
        .collect();
    Ok((st, raw_map))
}

/// The dependency of `x` under a morphism class out of its sort; the
/// identity acts trivially.
pub fn action(m: &Structure, f: MorId, x: CellId) -> Result<CellId, StructError> {
    let cell = m.cells.get(x.0).ok_or(StructError::NoSuchCell(x.0))?;
    let c = m.sig.class(f);
    if c.dom != cell.sort {
        return Err(StructError::ActionSort);
    }
    if c.is_identity() {
        return Ok(x);
    }
    let pos = m
        .sig
        .fanout_position(cell.sort, f)
        .expect("non-identity class out of the sort is in its fanout");
    Ok(cell.ctx[pos])
}

/// All context vectors over the full fanout of `k` whose entries commute
/// with every factorization route, in lexicographic order of the vector.
///
/// Positions with a route are forced by earlier entries; the rest range
/// over all cells of the target sort. The fiber over any other vector is
/// necessarily empty, so these are exactly the places where cells can live.
pub fn matching_contexts(m: &Structure, k: SortId) -> Vec<Vec<CellId>> {
    let full = m.sig.full_fanout(k);
    let routes = m.sig.factorizations(k);
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(full.len());
    fill_contexts(m, full, routes, &mut cur, &mut out);
    out
}

fn fill_contexts(
    m: &Structure,
    full: &[MorId],
    routes: &[Vec<(usize, MorId)>],
    cur: &mut Vec<CellId>,
    out: &mut Vec<Vec<CellId>>,
) {
    let j = cur.len();
    if j == full.len() {
        out.push(cur.clone());
        return;
    }
    let act = |x: CellId, g: MorId| -> CellId {
        let pos = m
            .sig
            .fanout_position(m.cells[x.0].sort, g)
            .expect("route class is in the source fanout");
        m.cells[x.0].ctx[pos]
    };
    if let Some(&(jp, g)) = routes[j].first() {
        let y = act(cur[jp], g);
        for &(jp2, g2) in &routes[j][1..] {
            if act(cur[jp2], g2) != y {
                return;
            }
        }
        cur.push(y);
        fill_contexts(m, full, routes, cur, out);
        cur.pop();
    } else {
        let target = m.sig.class(full[j]).cod;
        for &y in m.cells_of_sort(target) {
            cur.push(y);
            fill_contexts(m, full, routes, cur, out);
            cur.pop();
        }
    }
}

/// A structure separated into its rank-0 family and the remainder,
/// re-indexed over the derived signature.
#[derive(Debug)]
pub struct SplitStructure {
    pub family: Family,
    pub dsig: Arc<DerivedSignature>,
    pub derived: Structure,
    /// Derived cell to the original cell it came from.
    pub to_base: Vec<CellId>,
    /// Original cell to its derived cell; None at rank 0.
    pub from_base: Vec<Option<CellId>>,
}

pub fn split_structure(m: &Structure) -> Result<SplitStructure, StructError> {
    let sig = &m.sig;
    let mut elems = vec![Vec::new(); sig.sort_count()];
    for s in 0..sig.sort_count() {
        if sig.rank(SortId(s)) == 0 {
            elems[s] = m
                .cells_of_sort(SortId(s))
                .iter()
                .map(|&x| m.cells[x.0].label.clone())
                .collect();
        }
    }
    let family = Family { elems };
    let dsig = Arc::new(derive_signature(sig, &family)?);

    let mut raw = Vec::new();
    let mut base_of_raw: Vec<CellId> = Vec::new();
    let mut raw_of_base: Vec<Option<usize>> = vec![None; m.cells.len()];
    for (x, cell) in m.cells.iter().enumerate() {
        let k = cell.sort;
        if sig.rank(k) == 0 {
            continue;
        }
        let fan0 = sig.fanout(k, 0)?;
        let assign: Vec<usize> = fan0
            .iter()
            .map(|&f| {
                let pos = sig.fanout_position(k, f).expect("fanout class");
                m.index_in_sort(cell.ctx[pos])
            })
            .collect();
        let ds = dsig
            .sort_for(k, &assign)
            .expect("rank-0 dependencies index a derived sort");
        let gen_args = dsig
            .sig
            .gens_from(ds)
            .iter()
            .map(|&dg| {
                let g = dsig.gen_base[dg.0];
                let pos = sig
                    .fanout_position(k, sig.gen_class(g))
                    .expect("generator class");
                raw_of_base[cell.ctx[pos].0].expect("lower ranks come first")
            })
            .collect();
        raw_of_base[x] = Some(raw.len());
        base_of_raw.push(CellId(x));
        raw.push(RawCell {
            sort: ds.0,
            label: cell.label.clone(),
            gen_args,
        });
    }

    let (derived, raw_map) = validate_structure(&dsig.sig, &raw)?;
    let mut to_base = vec![CellId(usize::MAX); derived.len()];
    let mut from_base = vec![None; m.cells.len()];
    for (r, &d) in raw_map.iter().enumerate() {
        to_base[d.0] = base_of_raw[r];
        from_base[base_of_raw[r].0] = Some(d);
    }
    Ok(SplitStructure {
        family,
        dsig,
        derived,
        to_base,
        from_base,
    })
}

/// Rebuild the original structure from a split. Exact inverse of
/// [`split_structure`] thanks to canonical numbering.
pub fn assemble_structure(s: &SplitStructure) -> Result<Structure, StructError> {
    let base = &s.dsig.base;
    let mut raw = Vec::new();
    let mut raw_of_elem: Vec<Vec<usize>> = vec![Vec::new(); base.sort_count()];
    for (sort, labels) in s.family.elems.iter().enumerate() {
        for label in labels {
            raw_of_elem[sort].push(raw.len());
            raw.push(RawCell {
                sort,
                label: label.clone(),
                gen_args: Vec::new(),
            });
        }
    }
    let mut raw_of_derived: Vec<usize> = vec![usize::MAX; s.derived.len()];
    for (d, cell) in s.derived.cells.iter().enumerate() {
        let ds = cell.sort;
        let k = s.dsig.sort_base[ds.0];
        let assign = &s.dsig.sort_assign[ds.0];
        let fan0 = base.fanout(k, 0)?;
        let gen_args = base
            .gens_from(k)
            .iter()
            .map(|&g| {
                let cod = base.gen(g).cod;
                if base.rank(cod) == 0 {
                    let q = fan0
                        .iter()
                        .position(|&f| f == base.gen_class(g))
                        .expect("rank-0 generator class is in the rank-0 fanout");
                    raw_of_elem[cod.0][assign[q]]
                } else {
                    let dg = s
                        .dsig
                        .lift_gen(ds, g)
                        .expect("surviving generator lifts");
                    let pos = s
                        .dsig
                        .sig
                        .fanout_position(ds, s.dsig.sig.gen_class(dg))
                        .expect("generator class");
                    raw_of_derived[cell.ctx[pos].0]
                }
            })
            .collect();
        raw_of_derived[d] = raw.len();
        raw.push(RawCell {
            sort: k.0,
            label: cell.label.clone(),
            gen_args,
        });
    }
    let (st, _) = validate_structure(base, &raw)?;
    Ok(st)
}

/// Pull a structure over `d2`'s derivative back along a family map
/// h : d1.family -> d2.family. The fiber of the result at (S, c) is the
/// fiber of `d` at the re-indexed sort over the re-indexed context; cells
/// keep their labels. Returns the result and the map from its cells to the
/// cells of `d` they came from.
pub fn pullback_structure(
    d1: &DerivedSignature,
    d2: &DerivedSignature,
    h: &FamilyMap,
    d: &Structure,
) -> Result<(Structure, Vec<CellId>), StructError> {
    if !Arc::ptr_eq(&d.sig, &d2.sig) {
        return Err(StructError::SignatureMismatch);
    }
    let mapping = derived_reindex(d1, d2, h)?;
    let sig1 = &d1.sig;

    let mut raw: Vec<RawCell> = Vec::new();
    let mut src_of_raw: Vec<CellId> = Vec::new();
    let mut cur = Structure::empty(sig1);
    let mut src_of_cell: Vec<CellId> = Vec::new();
    let mut raw_of_cell: Vec<usize> = Vec::new();

    for rank in 0..sig1.height {
        for s1 in 0..sig1.sort_count() {
            let s1 = SortId(s1);
            if sig1.rank(s1) != rank {
                continue;
            }
            let s2 = mapping.sort_map[s1.0];
            let full2_len = d2.sig.full_fanout(s2).len();
            for c1 in matching_contexts(&cur, s1) {
                // Positions of s1 and s2 correspond through the base.
                let c2: Vec<CellId> = (0..full2_len)
                    .map(|j2| {
                        let bpos = d2.pos_to_base(s2)[j2];
                        let j1 = d1
                            .base_position(s1, bpos)
                            .expect("both fanouts cover the surviving base positions");
                        src_of_cell[c1[j1].0]
                    })
                    .collect();
                for &y in d.fiber(s2, &c2) {
                    let gen_args = sig1
                        .gens_from(s1)
                        .iter()
                        .map(|&g| {
                            let pos = sig1
                                .fanout_position(s1, sig1.gen_class(g))
                                .expect("generator class");
                            raw_of_cell[c1[pos].0]
                        })
                        .collect();
                    src_of_raw.push(y);
                    raw.push(RawCell {
                        sort: s1.0,
                        label: d.cells[y.0].label.clone(),
                        gen_args,
                    });
                }
            }
        }
        // Re-validate after each rank; lower final ids are unchanged by
        // appending higher cells, so earlier contexts stay valid.
        let (next, raw_map) = validate_structure(sig1, &raw)?;
        cur = next;
        src_of_cell = vec![CellId(usize::MAX); cur.len()];
        raw_of_cell = vec![usize::MAX; cur.len()];
        for (r, &c) in raw_map.iter().enumerate() {
            src_of_cell[c.0] = src_of_raw[r];
            raw_of_cell[c.0] = r;
        }
    }
    Ok((cur, src_of_cell))
}

/// A sort-preserving, context-preserving map of cells between structures
/// over one signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureMorphism {
    pub map: Vec<CellId>,
}

pub fn validate_morphism(
    dom: &Structure,
    cod: &Structure,
    f: &StructureMorphism,
) -> Result<(), StructError> {
    if !Arc::ptr_eq(&dom.sig, &cod.sig) {
        return Err(StructError::SignatureMismatch);
    }
    if f.map.len() != dom.len() {
        return Err(StructError::MorphismLength {
            expected: dom.len(),
            got: f.map.len(),
        });
    }
    for &y in &f.map {
        if y.0 >= cod.len() {
            return Err(StructError::MorphismTarget(y.0));
        }
    }
    for (x, cell) in dom.cells.iter().enumerate() {
        let img = &cod.cells[f.map[x].0];
        if img.sort != cell.sort {
            return Err(StructError::MorphismSortMismatch {
                dom: dom.sig.sort(cell.sort).name.clone(),
                cod: cod.sig.sort(img.sort).name.clone(),
            });
        }
        for (j, &dep) in cell.ctx.iter().enumerate() {
            if img.ctx[j] != f.map[dep.0] {
                return Err(StructError::MorphismNotNatural {
                    label: cell.label.clone(),
                    class: dom.sig.display_class(dom.sig.full_fanout(cell.sort)[j]),
                });
            }
        }
    }
    Ok(())
}

/// second after first.
pub fn compose_morphisms(
    second: &StructureMorphism,
    first: &StructureMorphism,
) -> Result<StructureMorphism, StructError> {
    let map = first
        .map
        .iter()
        .map(|&x| {
            second
                .map
                .get(x.0)
                .copied()
                .ok_or(StructError::MorphismTarget(x.0))
        })
        .collect::<Result<_, _>>()?;
    Ok(StructureMorphism { map })
}

pub fn identity_morphism(m: &Structure) -> StructureMorphism {
    StructureMorphism {
        map: (0..m.len()).map(CellId).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MorphismClass {
    /// Restricts to a bijection on the fiber over every matching context
    /// of the domain.
    pub levelwise: bool,
    /// Restricts to a surjection on the fiber over every matching context
    /// of the domain (finite fibers, so sections always exist).
    pub split_surjective: bool,
}

pub fn classify_morphism(
    dom: &Structure,
    cod: &Structure,
    f: &StructureMorphism,
) -> Result<MorphismClass, StructError> {
    validate_morphism(dom, cod, f)?;
    let mut levelwise = true;
    let mut split_surjective = true;
    'sorts: for k in 0..dom.sig.sort_count() {
        let k = SortId(k);
        for c in matching_contexts(dom, k) {
            let fc: Vec<CellId> = c.iter().map(|&x| f.map[x.0]).collect();
            let dom_fiber = dom.fiber(k, &c);
            let cod_fiber = cod.fiber(k, &fc);
            let mut image: Vec<CellId> = dom_fiber.iter().map(|&x| f.map[x.0]).collect();
            image.sort_unstable();
            image.dedup();
            let surj = cod_fiber.iter().all(|y| image.binary_search(y).is_ok());
            split_surjective &= surj;
            levelwise &= surj && image.len() == dom_fiber.len();
            if !levelwise && !split_surjective {
                break 'sorts;
            }
        }
    }
    Ok(MorphismClass {
        levelwise,
        split_surjective,
    })
}

#[cfg(test)]
pub mod test_structs {
    use super::*;
    use crate::sigcore::test_sigs::{cat_spec, graph_spec};
    use crate::sigcore::validate_signature;

    pub fn cat_plain() -> Arc<Signature> {
        Arc::new(validate_signature(cat_spec()).expect("cat validates"))
    }

    pub fn graph_sig() -> Arc<Signature> {
        Arc::new(validate_signature(graph_spec()).expect("graph validates"))
    }

    /// A finite category presented by object names and arrows with a
    /// composition table; grows the T and I cells mechanically.
    pub struct CatSpec<'a> {
        pub objects: &'a [&'a str],
        /// (label, dom object, cod object)
        pub arrows: &'a [(&'a str, &'a str, &'a str)],
        /// identity arrow label per object, same order as `objects`
        pub identities: &'a [&'a str],
        /// (first, second, composite) by arrow label
        pub compose: for<'b> fn(&'b str, &'b str) -> &'b str,
    }

    pub fn build_cat(sig: &Arc<Signature>, spec: &CatSpec) -> Structure {
        let mut raw = Vec::new();
        let obj_idx = |o: &str| {
            spec.objects
                .iter()
                .position(|&x| x == o)
                .expect("known object")
        };
        for &o in spec.objects {
            raw.push(RawCell {
                sort: 0,
                label: o.to_string(),
                gen_args: vec![],
            });
        }
        let arrow_raw = |l: &str| {
            spec.objects.len()
                + spec
                    .arrows
                    .iter()
                    .position(|&(a, _, _)| a == l)
                    .expect("known arrow")
        };
        for &(l, d, c) in spec.arrows {
            raw.push(RawCell {
                sort: 1,
                label: l.to_string(),
                gen_args: vec![obj_idx(d), obj_idx(c)],
            });
        }
        let mut t = 0;
        for &(u, _, ucod) in spec.arrows {
            for &(v, vdom, _) in spec.arrows {
                if ucod != vdom {
                    continue;
                }
                let w = (spec.compose)(u, v);
                raw.push(RawCell {
                    sort: 2,
                    label: format!("t{t}"),
                    gen_args: vec![arrow_raw(u), arrow_raw(v), arrow_raw(w)],
                });
                t += 1;
            }
        }
        for (i, &l) in spec.identities.iter().enumerate() {
            raw.push(RawCell {
                sort: 3,
                label: format!("i{}", spec.objects[i]),
                gen_args: vec![arrow_raw(l)],
            });
        }
        let (st, _) = validate_structure(sig, &raw).expect("category data validates");
        st
    }

    /// Two objects, one isomorphism each way.
    pub fn walking_iso(sig: &Arc<Signature>) -> Structure {
        build_cat(
            sig,
            &CatSpec {
                objects: &["x", "y"],
                arrows: &[("ix", "x", "x"), ("iy", "y", "y"), ("f", "x", "y"), ("g", "y", "x")],
                identities: &["ix", "iy"],
                compose: |u, v| match (u, v) {
                    ("ix", z) => z,
                    (z, "iy") if z == "f" || z == "ix" => z,
                    ("f", "g") => "ix",
                    ("g", "f") => "iy",
                    ("iy", z) => z,
                    (z, "ix") => z,
                    (z, "iy") => z,
                    _ => unreachable!(),
                },
            },
        )
    }

    /// One object, one identity arrow.
    pub fn terminal_cat(sig: &Arc<Signature>) -> Structure {
        build_cat(
            sig,
            &CatSpec {
                objects: &["z"],
                arrows: &[("iz", "z", "z")],
                identities: &["iz"],
                compose: |_, _| "iz",
            },
        )
    }

    pub fn graph_structure(nodes: &[&str], edges: &[(&str, &str, &str)]) -> Structure {
        let sig = graph_sig();
        let mut raw: Vec<RawCell> = nodes
            .iter()
            .map(|&n| RawCell {
                sort: 0,
                label: n.to_string(),
                gen_args: vec![],
            })
            .collect();
        for &(l, d, c) in edges {
            let di = nodes.iter().position(|&x| x == d).unwrap();
            let ci = nodes.iter().position(|&x| x == c).unwrap();
            raw.push(RawCell {
                sort: 1,
                label: l.to_string(),
                gen_args: vec![di, ci],
            });
        }
        validate_structure(&sig, &raw).expect("graph validates").0
    }
}
