//! Indiscernibility of cells and univalence of structures.
//!
//! Two cells of one fiber are indiscernible when the structure cannot tell
//! them apart: writing M_r for the r-fold derivative of M at a cell a of
//! rank r, we adjoin one fresh element to the bottom family of M_r at a's
//! sort and pull the rest of M_r back along the two maps sending the fresh
//! element to a and to b. A witness is a levelwise isomorphism between the
//! two pullbacks that is the identity on every sort not referencing the
//! fresh element. A structure is univalent when every cell has exactly one
//! self-witness and distinct cells of a fiber have none.
//!
//! The engine caches the derivative chain, the adjoined signatures, and the
//! pullbacks, so sweeping a whole structure stays cheap.

use crate::sigcore::{DerivedSignature, FamilyMap, SigError, SortId};
use crate::structure::{
    matching_contexts, pullback_structure, split_structure, CellId, SplitStructure, StructError,
    Structure,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum IndiscError {
    #[error("cell index {0} is out of range")]
    NoSuchCell(usize),
    #[error("cells `{0}` and `{1}` live in different fibers and cannot be compared")]
    NotComparable(String, String),
    #[error(transparent)]
    Struct(#[from] StructError),
    #[error(transparent)]
    Sig(#[from] SigError),
}

/// One fiber bijection table: the cells of the two pullbacks matched up at
/// the sorts that reference the fresh element, as (sort name, label in the
/// first pullback, label in the second).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndiscWitness {
    pub pairs: Vec<(String, String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndiscResult {
    /// Number of witnesses found (all of them unless truncated).
    pub count: usize,
    pub witnesses: Vec<IndiscWitness>,
    pub truncated: bool,
}

/// The pullback of the derivative of M along "evaluate the fresh element at
/// a", together with which of its sorts are copies of old data.
#[derive(Clone, Debug)]
pub struct Partial {
    /// Over the adjoined signature.
    pub structure: Structure,
    /// Per sort of the adjoined signature: does its re-indexing avoid the
    /// fresh element entirely?
    pub old_sorts: Vec<bool>,
    /// Cells of `structure` to the cells of the r-fold derivative of M
    /// they were copied from.
    pub to_derived: Vec<CellId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberVerdict {
    pub sort: SortId,
    pub context: Vec<CellId>,
    pub cells: Vec<CellId>,
    pub univalent: bool,
    /// Cells with zero or several self-witnesses (count capped at 2).
    pub bad_self: Vec<(CellId, usize)>,
    /// Distinct cells of the fiber with at least one witness between them.
    pub merged_pairs: Vec<(CellId, CellId)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnivalenceReport {
    pub univalent: bool,
    /// One verdict per nonempty fiber, in canonical order; empty fibers are
    /// trivially univalent and omitted.
    pub fibers: Vec<FiberVerdict>,
}

pub struct IndiscEngine {
    m: Structure,
    /// levels[i] is the split of the i-fold derivative.
    levels: Vec<SplitStructure>,
    jokers: HashMap<(usize, SortId), Joker>,
}

struct Joker {
    jsig: DerivedSignature,
    old_sorts: Vec<bool>,
    partials: HashMap<usize, PartialEntry>,
}

struct PartialEntry {
    p: Structure,
    src: Vec<CellId>,
    /// Derived cell to its copy at an old sort of the pullback.
    old_of_src: Vec<Option<CellId>>,
    /// (new sort, matching context), ranks ascending.
    instances: Vec<(SortId, Vec<CellId>)>,
    /// Cells at new sorts, ascending.
    new_cells: Vec<CellId>,
}

impl IndiscEngine {
    pub fn new(m: &Structure) -> Result<IndiscEngine, IndiscError> {
        let mut levels: Vec<SplitStructure> = Vec::with_capacity(m.sig.height);
        for i in 0..m.sig.height {
            let prev = if i == 0 { m } else { &levels[i - 1].derived };
            if prev.sig.height == 0 {
                // An empty family can wipe out every derived sort early;
                // nothing below this level carries cells, so stop. Cells of
                // rank r always keep the first r + 1 levels alive.
                break;
            }
            levels.push(split_structure(prev)?);
        }
        Ok(IndiscEngine {
            m: m.clone(),
            levels,
            jokers: HashMap::new(),
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.m
    }

    fn level(&self, r: usize) -> &Structure {
        if r == 0 {
            &self.m
        } else {
            &self.levels[r - 1].derived
        }
    }

    /// The rank-0 cell of the r-fold derivative that `a` becomes.
    fn descend(&self, a: CellId) -> (usize, CellId) {
        let r = self.m.sig.rank(self.m.cell(a).sort);
        let mut x = a;
        for i in 0..r {
            x = self.levels[i].from_base[x.0].expect("positive rank descends");
        }
        (r, x)
    }

    fn joker(&mut self, r: usize, star_sort: SortId) -> Result<&mut Joker, IndiscError> {
        if !self.jokers.contains_key(&(r, star_sort)) {
            let split = &self.levels[r];
            let mut family = split.family.clone();
            let mut star = "*".to_string();
            while family.elems[star_sort.0].contains(&star) {
                star.push('*');
            }
            let star_elem = family.elems[star_sort.0].len();
            family.elems[star_sort.0].push(star);
            let base = &self.level(r).sig;
            let jsig = crate::sigcore::derive_signature(base, &family)?;
            let old_sorts = (0..jsig.sig.sort_count())
                .map(|s| {
                    let k = jsig.sort_base[s];
                    let fan0 = jsig.base.fanout(k, 0).expect("positive rank");
                    jsig.sort_assign[s]
                        .iter()
                        .zip(fan0)
                        .all(|(&a, &f)| jsig.base.class(f).cod != star_sort || a != star_elem)
                })
                .collect();
            self.jokers.insert(
                (r, star_sort),
                Joker {
                    jsig,
                    old_sorts,
                    partials: HashMap::new(),
                },
            );
        }
        Ok(self.jokers.get_mut(&(r, star_sort)).expect("just inserted"))
    }

    fn partial_entry(&mut self, r: usize, star_sort: SortId, elem: usize) -> Result<(), IndiscError> {
        let split = &self.levels[r];
        // Work around the borrow of self by taking what we need up front.
        let dsig = &split.dsig;
        let derived = &split.derived;
        let joker = match self.jokers.get(&(r, star_sort)) {
            Some(j) if j.partials.contains_key(&elem) => return Ok(()),
            _ => self.jokers.get(&(r, star_sort)).expect("joker built first"),
        };
        let jsig = &joker.jsig;
        let mut maps: Vec<Vec<usize>> = split
            .family
            .elems
            .iter()
            .map(|labels| (0..labels.len()).collect())
            .collect();
        maps[star_sort.0].push(elem);
        let h = FamilyMap { maps };
        let (p, src) = pullback_structure(jsig, dsig, &h, derived)?;
        let mut old_of_src = vec![None; derived.len()];
        for (x, cell) in p.cells.iter().enumerate() {
            if joker.old_sorts[cell.sort.0] {
                old_of_src[src[x].0] = Some(CellId(x));
            }
        }
        let mut instances = Vec::new();
        let mut new_cells = Vec::new();
        for rank in 0..jsig.sig.height {
            for s in 0..jsig.sig.sort_count() {
                let s = SortId(s);
                if jsig.sig.rank(s) != rank || joker.old_sorts[s.0] {
                    continue;
                }
                for c in matching_contexts(&p, s) {
                    instances.push((s, c));
                }
            }
        }
        for (x, cell) in p.cells.iter().enumerate() {
            if !joker.old_sorts[cell.sort.0] {
                new_cells.push(CellId(x));
            }
        }
        let entry = PartialEntry {
            p,
            src,
            old_of_src,
            instances,
            new_cells,
        };
        self.jokers
            .get_mut(&(r, star_sort))
            .expect("joker built first")
            .partials
            .insert(elem, entry);
        Ok(())
    }

    fn locate(&self, a: CellId, b: CellId) -> Result<(usize, SortId, usize, usize), IndiscError> {
        if a.0 >= self.m.len() {
            return Err(IndiscError::NoSuchCell(a.0));
        }
        if b.0 >= self.m.len() {
            return Err(IndiscError::NoSuchCell(b.0));
        }
        let (ca, cb) = (self.m.cell(a), self.m.cell(b));
        if ca.sort != cb.sort || ca.ctx != cb.ctx {
            return Err(IndiscError::NotComparable(
                ca.label.clone(),
                cb.label.clone(),
            ));
        }
        let (r, xa) = self.descend(a);
        let (_, xb) = self.descend(b);
        let level = self.level(r);
        let star_sort = level.cell(xa).sort;
        Ok((
            r,
            star_sort,
            level.index_in_sort(xa),
            level.index_in_sort(xb),
        ))
    }

    /// All witnesses that `a` and `b` are indiscernible, up to `cap`.
    pub fn witnesses(
        &mut self,
        a: CellId,
        b: CellId,
        cap: Option<usize>,
    ) -> Result<IndiscResult, IndiscError> {
        let (r, star_sort, ea, eb) = self.locate(a, b)?;
        self.joker(r, star_sort)?;
        self.partial_entry(r, star_sort, ea)?;
        self.partial_entry(r, star_sort, eb)?;
        let joker = &self.jokers[&(r, star_sort)];
        let pa = &joker.partials[&ea];
        let pb = &joker.partials[&eb];
        let mut search = WitnessSearch {
            pa,
            pb,
            psi: vec![None; pa.p.len()],
            cap,
            out: Vec::new(),
        };
        for (x, cell) in pa.p.cells.iter().enumerate() {
            if joker.old_sorts[cell.sort.0] {
                search.psi[x] = Some(
                    pb.old_of_src[pa.src[x].0].expect("old fibers coincide on derived cells"),
                );
            }
        }
        search.dfs(0);
        let truncated = cap.is_some_and(|c| search.out.len() >= c);
        let witnesses = search
            .out
            .iter()
            .map(|pairs| IndiscWitness {
                pairs: pairs
                    .iter()
                    .map(|&(x, y)| {
                        (
                            joker.jsig.sig.sort(pa.p.cell(x).sort).name.clone(),
                            pa.p.cell(x).label.clone(),
                            pb.p.cell(y).label.clone(),
                        )
                    })
                    .collect(),
            })
            .collect();
        Ok(IndiscResult {
            count: search.out.len(),
            witnesses,
            truncated,
        })
    }

    /// Number of witnesses, stopping early once `cap` are found.
    pub fn count_witnesses(
        &mut self,
        a: CellId,
        b: CellId,
        cap: usize,
    ) -> Result<usize, IndiscError> {
        Ok(self.witnesses(a, b, Some(cap))?.count)
    }

    pub fn partial_structure(&mut self, a: CellId) -> Result<Partial, IndiscError> {
        let (r, star_sort, ea, _) = self.locate(a, a)?;
        self.joker(r, star_sort)?;
        self.partial_entry(r, star_sort, ea)?;
        let joker = &self.jokers[&(r, star_sort)];
        let entry = &joker.partials[&ea];
        Ok(Partial {
            structure: entry.p.clone(),
            old_sorts: joker.old_sorts.clone(),
            to_derived: entry.src.clone(),
        })
    }

    pub fn univalence_report(&mut self) -> Result<UnivalenceReport, IndiscError> {
        let mut fibers = Vec::new();
        let mut univalent = true;
        for k in 0..self.m.sig.sort_count() {
            let k = SortId(k);
            for context in matching_contexts(&self.m, k) {
                let cells: Vec<CellId> = self.m.fiber(k, &context).to_vec();
                if cells.is_empty() {
                    continue;
                }
                let mut bad_self = Vec::new();
                let mut merged_pairs = Vec::new();
                for (i, &a) in cells.iter().enumerate() {
                    let n = self.count_witnesses(a, a, 2)?;
                    if n != 1 {
                        bad_self.push((a, n));
                    }
                    for &b in &cells[i + 1..] {
                        if self.count_witnesses(a, b, 1)? > 0 {
                            merged_pairs.push((a, b));
                        }
                    }
                }
                let ok = bad_self.is_empty() && merged_pairs.is_empty();
                univalent &= ok;
                fibers.push(FiberVerdict {
                    sort: k,
                    context,
                    cells,
                    univalent: ok,
                    bad_self,
                    merged_pairs,
                });
            }
        }
        Ok(UnivalenceReport { univalent, fibers })
    }
}

struct WitnessSearch<'a> {
    pa: &'a PartialEntry,
    pb: &'a PartialEntry,
    psi: Vec<Option<CellId>>,
    cap: Option<usize>,
    out: Vec<Vec<(CellId, CellId)>>,
}

impl WitnessSearch<'_> {
    fn full(&self) -> bool {
        self.cap.is_some_and(|c| self.out.len() >= c)
    }

    /// Returns true when the cap is reached and the search should stop.
    fn dfs(&mut self, inst: usize) -> bool {
        if self.full() {
            return true;
        }
        if inst == self.pa.instances.len() {
            let pairs = self
                .pa
                .new_cells
                .iter()
                .map(|&x| (x, self.psi[x.0].expect("new cells are all assigned")))
                .collect();
            self.out.push(pairs);
            return self.full();
        }
        let (s, c) = &self.pa.instances[inst];
        let image: Vec<CellId> = c
            .iter()
            .map(|&x| self.psi[x.0].expect("context cells are assigned earlier"))
            .collect();
        let fa: Vec<CellId> = self.pa.p.fiber(*s, c).to_vec();
        let fb: Vec<CellId> = self.pb.p.fiber(*s, &image).to_vec();
        if fa.len() != fb.len() {
            return false;
        }
        if fa.is_empty() {
            return self.dfs(inst + 1);
        }
        let mut used = vec![false; fb.len()];
        self.match_fiber(inst, &fa, &fb, 0, &mut used)
    }

    fn match_fiber(
        &mut self,
        inst: usize,
        fa: &[CellId],
        fb: &[CellId],
        k: usize,
        used: &mut Vec<bool>,
    ) -> bool {
        if k == fa.len() {
            return self.dfs(inst + 1);
        }
        for j in 0..fb.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            self.psi[fa[k].0] = Some(fb[j]);
            let stop = self.match_fiber(inst, fa, fb, k + 1, used);
            self.psi[fa[k].0] = None;
            used[j] = false;
            if stop {
                return true;
            }
        }
        false
    }
}

/// One-shot: all indiscernibility witnesses between two cells of a fiber.
pub fn indiscernibilities(
    m: &Structure,
    a: CellId,
    b: CellId,
) -> Result<IndiscResult, IndiscError> {
    IndiscEngine::new(m)?.witnesses(a, b, None)
}

/// One-shot: the pullback of M's derivative at the fresh element over `a`.
pub fn partial_structure(m: &Structure, a: CellId) -> Result<Partial, IndiscError> {
    IndiscEngine::new(m)?.partial_structure(a)
}

/// One-shot: univalence across every nonempty fiber.
pub fn univalence_report(m: &Structure) -> Result<UnivalenceReport, IndiscError> {
    IndiscEngine::new(m)?.univalence_report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::test_structs::{build_cat, cat_plain, walking_iso, CatSpec};
    use crate::structure::{validate_structure, RawCell};

    fn discrete2() -> Structure {
        let sig = cat_plain();
        build_cat(
            &sig,
            &CatSpec {
                objects: &["x", "y"],
                arrows: &[("ix", "x", "x"), ("iy", "y", "y")],
                identities: &["ix", "iy"],
                compose: |u, _| if u == "ix" { "ix" } else { "iy" },
            },
        )
    }

    fn cyclic(n: usize) -> Structure {
        let sig = cat_plain();
        let names: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
        let arrows: Vec<(&str, &str, &str)> = names
            .iter()
            .map(|l| (l.as_str(), "o", "o"))
            .collect();
        let compose = match n {
            2 => (|u, v| {
                let (a, b) = (u.as_bytes()[1] - b'0', v.as_bytes()[1] - b'0');
                if (a + b) % 2 == 0 {
                    "g0"
                } else {
                    "g1"
                }
            }) as for<'b> fn(&'b str, &'b str) -> &'b str,
            3 => |u: &str, v: &str| {
                let (a, b) = (u.as_bytes()[1] - b'0', v.as_bytes()[1] - b'0');
                match (a + b) % 3 {
                    0 => "g0",
                    1 => "g1",
                    _ => "g2",
                }
            },
            _ => unreachable!(),
        };
        build_cat(
            &sig,
            &CatSpec {
                objects: &["o"],
                arrows: &arrows,
                identities: &["g0"],
                compose,
            },
        )
    }

    fn parallel_arrows() -> Structure {
        let sig = cat_plain();
        build_cat(
            &sig,
            &CatSpec {
                objects: &["x", "y"],
                arrows: &[("ix", "x", "x"), ("iy", "y", "y"), ("u", "x", "y"), ("v", "x", "y")],
                identities: &["ix", "iy"],
                compose: |a, b| match (a, b) {
                    ("ix", z) => z,
                    (z, "iy") => z,
                    _ => unreachable!(),
                },
            },
        )
    }

    #[test]
    fn isomorphic_objects_of_the_walking_iso_are_indiscernible() {
        let sig = cat_plain();
        let m = walking_iso(&sig);
        let o = sig.sort_by_name("O").unwrap();
        let x = m.find_cell(o, "x").unwrap();
        let y = m.find_cell(o, "y").unwrap();
        let mut eng = IndiscEngine::new(&m).unwrap();
        assert_eq!(eng.count_witnesses(x, y, 10).unwrap(), 1);
        assert_eq!(eng.count_witnesses(x, x, 10).unwrap(), 1);
        let report = eng.univalence_report().unwrap();
        assert!(!report.univalent);
        let object_fiber = &report.fibers[0];
        assert_eq!(object_fiber.merged_pairs, vec![(x, y)]);
    }

    #[test]
    fn discrete_objects_are_discernible() {
        let m = discrete2();
        let o = m.sig.sort_by_name("O").unwrap();
        let x = m.find_cell(o, "x").unwrap();
        let y = m.find_cell(o, "y").unwrap();
        let mut eng = IndiscEngine::new(&m).unwrap();
        assert_eq!(eng.count_witnesses(x, y, 10).unwrap(), 0);
        assert!(eng.univalence_report().unwrap().univalent);
    }

    #[test]
    fn self_witnesses_count_the_automorphisms_at_the_object() {
        // A cyclic group of order n as a one-object category: the fresh
        // element can be matched to the object in n structure-preserving
        // ways, one per group element.
        let m2 = cyclic(2);
        let o = m2.sig.sort_by_name("O").unwrap();
        let a = m2.find_cell(o, "o").unwrap();
        let r = indiscernibilities(&m2, a, a).unwrap();
        assert_eq!(r.count, 2);
        assert!(!r.truncated);
        assert!(!univalence_report(&m2).unwrap().univalent);

        let m3 = cyclic(3);
        let a = m3.find_cell(o, "o").unwrap();
        let r = indiscernibilities(&m3, a, a).unwrap();
        assert_eq!(r.count, 3);
    }

    #[test]
    fn parallel_arrows_are_discernible_and_the_category_is_univalent() {
        let m = parallel_arrows();
        let a = m.sig.sort_by_name("A").unwrap();
        let u = m.find_cell(a, "u").unwrap();
        let v = m.find_cell(a, "v").unwrap();
        let mut eng = IndiscEngine::new(&m).unwrap();
        assert_eq!(eng.count_witnesses(u, v, 10).unwrap(), 0);
        assert_eq!(eng.count_witnesses(u, u, 10).unwrap(), 1);
        assert!(eng.univalence_report().unwrap().univalent);
    }

    #[test]
    fn duplicate_top_rank_cells_in_a_fiber_break_univalence() {
        let sig = cat_plain();
        let raw = vec![
            RawCell { sort: 0, label: "x".into(), gen_args: vec![] },
            RawCell { sort: 1, label: "ix".into(), gen_args: vec![0, 0] },
            RawCell { sort: 2, label: "t".into(), gen_args: vec![1, 1, 1] },
            RawCell { sort: 3, label: "w1".into(), gen_args: vec![1] },
            RawCell { sort: 3, label: "w2".into(), gen_args: vec![1] },
        ];
        let (m, _) = validate_structure(&sig, &raw).unwrap();
        let i = sig.sort_by_name("I").unwrap();
        let w1 = m.find_cell(i, "w1").unwrap();
        let w2 = m.find_cell(i, "w2").unwrap();
        // Top-rank fibers have no sorts above them: any two cells are
        // indiscernible by the empty witness.
        assert_eq!(indiscernibilities(&m, w1, w2).unwrap().count, 1);
        let report = univalence_report(&m).unwrap();
        assert!(!report.univalent);
        assert!(report
            .fibers
            .iter()
            .any(|f| f.merged_pairs.contains(&(w1, w2))));
    }

    #[test]
    fn comparing_cells_of_different_fibers_is_an_error() {
        let sig = cat_plain();
        let m = walking_iso(&sig);
        let o = sig.sort_by_name("O").unwrap();
        let a = sig.sort_by_name("A").unwrap();
        let x = m.find_cell(o, "x").unwrap();
        let f = m.find_cell(a, "f").unwrap();
        let ix = m.find_cell(a, "ix").unwrap();
        assert!(matches!(
            indiscernibilities(&m, x, f),
            Err(IndiscError::NotComparable(_, _))
        ));
        // Same sort, different context: still not comparable.
        assert!(matches!(
            indiscernibilities(&m, f, ix),
            Err(IndiscError::NotComparable(_, _))
        ));
    }

    #[test]
    fn partial_structure_of_the_walking_iso_has_the_pinned_shape() {
        let sig = cat_plain();
        let m = walking_iso(&sig);
        let o = sig.sort_by_name("O").unwrap();
        let x = m.find_cell(o, "x").unwrap();
        let p = partial_structure(&m, x).unwrap();
        // Sorts: A over 3x3 object pairs, I over 3, T over 27.
        assert_eq!(p.structure.sig.sort_count(), 9 + 3 + 27);
        assert_eq!(p.old_sorts.iter().filter(|&&o| o).count(), 4 + 2 + 8);
        // Every hom-set of the walking iso is a singleton, so the pullback
        // has one cell per A sort, one per inhabited I sort, one per T sort.
        assert_eq!(p.structure.len(), 9 + 3 + 27);
        let old_cells = p
            .structure
            .cells
            .iter()
            .filter(|c| p.old_sorts[c.sort.0])
            .count();
        assert_eq!(old_cells, 4 + 2 + 8);
    }

    #[test]
    fn witness_tables_pair_up_the_fresh_fibers() {
        let sig = cat_plain();
        let m = walking_iso(&sig);
        let o = sig.sort_by_name("O").unwrap();
        let x = m.find_cell(o, "x").unwrap();
        let y = m.find_cell(o, "y").unwrap();
        let r = indiscernibilities(&m, x, y).unwrap();
        assert_eq!(r.count, 1);
        let w = &r.witnesses[0];
        assert!(!w.pairs.is_empty());
        // The witness matches the arrow into x with the arrow into y.
        assert!(w
            .pairs
            .iter()
            .any(|(_, l, r)| (l == "f" && r == "iy") || (l == "ix" && r == "g")));
    }

    #[test]
    fn the_empty_structure_is_univalent() {
        // With no rank-0 cells the first derivative has no sorts at all;
        // the engine must stop deriving there instead of failing.
        let sig = cat_plain();
        let (m, _) = validate_structure(&sig, &[]).unwrap();
        let report = univalence_report(&m).unwrap();
        assert!(report.univalent);
        assert!(report.fibers.is_empty());
    }
}
