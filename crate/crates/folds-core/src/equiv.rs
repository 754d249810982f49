//! Morphism enumeration and the three flavours of sameness between finite
//! structures: levelwise isomorphism, split-surjective equivalence, and
//! equivalence via indiscernibility in the codomain.
//!
//! A morphism f is an equivalence when for every sort, every matching
//! context c of the domain, and every codomain cell y in the fiber over the
//! image of c, some domain cell x over c has f(x) indiscernible from y.
//! `univalence_principle_check` compares the three notions: levelwise
//! morphisms are always split-surjective equivalences; with a univalent
//! domain the split-surjective equivalences collapse to the levelwise ones;
//! with both sides univalent all equivalences do, and their witness tables
//! are unique.

use crate::indisc::{IndiscEngine, IndiscError, IndiscWitness};
use crate::sigcore::SortId;
use crate::structure::{
    classify_morphism, matching_contexts, validate_morphism, CellId, StructError, Structure,
    StructureMorphism,
};
use std::sync::Arc;
use thiserror::Error;

/// Refuse enumeration when the unpruned candidate space is larger than this.
pub const DEFAULT_SEARCH_BOUND: u64 = 10_000_000;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EquivError {
    #[error("morphism search space of about 10^{0} candidates exceeds the bound {1}")]
    SearchSpace(u32, u64),
    #[error(transparent)]
    Struct(#[from] StructError),
    #[error(transparent)]
    Indisc(#[from] IndiscError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorFilter {
    All,
    Levelwise,
    SplitSurjective,
    Equivalence,
}

/// One resolved obligation of the equivalence definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessEntry {
    pub sort: SortId,
    /// Matching context in the domain.
    pub context: Vec<CellId>,
    /// Codomain cell in the fiber over the image context.
    pub target: CellId,
    /// Least domain cell of the fiber whose image is indiscernible from
    /// `target`, with the first indiscernibility witness.
    pub chosen: CellId,
    pub witness: IndiscWitness,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceWitness {
    pub morphism: StructureMorphism,
    pub table: Vec<WitnessEntry>,
}

#[derive(Clone, Debug)]
pub struct ClassifiedMorphism {
    pub morphism: StructureMorphism,
    pub levelwise: bool,
    pub split_surjective: bool,
    /// Present exactly when the morphism is an equivalence.
    pub equivalence: Option<EquivalenceWitness>,
}

impl ClassifiedMorphism {
    pub fn is_equivalence(&self) -> bool {
        self.equivalence.is_some()
    }

    pub fn passes(&self, filter: MorFilter) -> bool {
        match filter {
            MorFilter::All => true,
            MorFilter::Levelwise => self.levelwise,
            MorFilter::SplitSurjective => self.split_surjective,
            MorFilter::Equivalence => self.is_equivalence(),
        }
    }
}

/// Is `f` an equivalence? Returns the witness table when it is.
pub fn is_equivalence(
    dom: &Structure,
    cod: &Structure,
    f: &StructureMorphism,
) -> Result<Option<EquivalenceWitness>, EquivError> {
    validate_morphism(dom, cod, f)?;
    let mut engine = IndiscEngine::new(cod)?;
    equivalence_with_engine(dom, f, &mut engine)
}

/// As `is_equivalence`, reusing a caller-held engine over the codomain.
fn equivalence_with_engine(
    dom: &Structure,
    f: &StructureMorphism,
    engine: &mut IndiscEngine,
) -> Result<Option<EquivalenceWitness>, EquivError> {
    let cod = engine.structure().clone();
    let mut table = Vec::new();
    for k in 0..dom.sig.sort_count() {
        let k = SortId(k);
        for context in matching_contexts(dom, k) {
            let image: Vec<CellId> = context.iter().map(|&x| f.map[x.0]).collect();
            for &target in cod.fiber(k, &image) {
                let mut found = None;
                for &x in dom.fiber(k, &context) {
                    let r = engine.witnesses(f.map[x.0], target, Some(1))?;
                    if let Some(w) = r.witnesses.into_iter().next() {
                        found = Some((x, w));
                        break;
                    }
                }
                match found {
                    Some((chosen, witness)) => table.push(WitnessEntry {
                        sort: k,
                        context: context.clone(),
                        target,
                        chosen,
                        witness,
                    }),
                    None => return Ok(None),
                }
            }
        }
    }
    Ok(Some(EquivalenceWitness {
        morphism: f.clone(),
        table,
    }))
}

/// All morphisms from `dom` to `cod` passing `filter`, fully classified, in
/// canonical order. Refuses if the unpruned space exceeds `bound`.
pub fn enumerate_morphisms(
    dom: &Structure,
    cod: &Structure,
    filter: MorFilter,
    bound: u64,
) -> Result<Vec<ClassifiedMorphism>, EquivError> {
    if !Arc::ptr_eq(&dom.sig, &cod.sig) {
        return Err(StructError::SignatureMismatch.into());
    }
    let mut log_space = 0f64;
    for cell in &dom.cells {
        let n = cod.cells_of_sort(cell.sort).len();
        if n == 0 {
            return Ok(Vec::new());
        }
        log_space += (n as f64).log10();
    }
    if log_space > (bound as f64).log10() {
        return Err(EquivError::SearchSpace(log_space.ceil() as u32, bound));
    }
    let mut engine = IndiscEngine::new(cod)?;
    let mut out = Vec::new();
    let mut map: Vec<CellId> = Vec::with_capacity(dom.len());
    extend(dom, cod, filter, &mut engine, &mut map, &mut out)?;
    Ok(out)
}

fn extend(
    dom: &Structure,
    cod: &Structure,
    filter: MorFilter,
    engine: &mut IndiscEngine,
    map: &mut Vec<CellId>,
    out: &mut Vec<ClassifiedMorphism>,
) -> Result<(), EquivError> {
    if map.len() == dom.len() {
        let f = StructureMorphism { map: map.clone() };
        let class = classify_morphism(dom, cod, &f)?;
        let equivalence = equivalence_with_engine(dom, &f, engine)?;
        let cm = ClassifiedMorphism {
            morphism: f,
            levelwise: class.levelwise,
            split_surjective: class.split_surjective,
            equivalence,
        };
        if cm.passes(filter) {
            out.push(cm);
        }
        return Ok(());
    }
    let cell = dom.cell(CellId(map.len()));
    let image: Vec<CellId> = cell.ctx.iter().map(|&x| map[x.0]).collect();
    let candidates: Vec<CellId> = cod.fiber(cell.sort, &image).to_vec();
    for y in candidates {
        map.push(y);
        extend(dom, cod, filter, engine, map, out)?;
        map.pop();
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PrincipleReport {
    pub dom_univalent: bool,
    pub cod_univalent: bool,
    /// Every morphism, classified; index lists below refer into it.
    pub morphisms: Vec<ClassifiedMorphism>,
    pub levelwise: Vec<usize>,
    pub split_surjective_equivalences: Vec<usize>,
    pub equivalences: Vec<usize>,
    /// Split-surjective equivalences that are not levelwise; must be empty
    /// when the domain is univalent.
    pub split_gap: Vec<usize>,
    /// Equivalences that are not levelwise; must be empty when both sides
    /// are univalent.
    pub equiv_gap: Vec<usize>,
    /// When both sides are univalent: every equivalence obligation is met
    /// by exactly one domain cell with exactly one witness.
    pub unique_tables: Option<bool>,
    /// The implications that apply all hold.
    pub holds: bool,
}

pub fn univalence_principle_check(
    dom: &Structure,
    cod: &Structure,
    bound: u64,
) -> Result<PrincipleReport, EquivError> {
    let dom_univalent = IndiscEngine::new(dom)?.univalence_report()?.univalent;
    let cod_univalent = IndiscEngine::new(cod)?.univalence_report()?.univalent;
    let morphisms = enumerate_morphisms(dom, cod, MorFilter::All, bound)?;
    let levelwise: Vec<usize> = indices(&morphisms, |m| m.levelwise);
    let sse: Vec<usize> = indices(&morphisms, |m| m.split_surjective && m.is_equivalence());
    let equivalences: Vec<usize> = indices(&morphisms, |m| m.is_equivalence());
    let split_gap: Vec<usize> = sse
        .iter()
        .copied()
        .filter(|&i| !morphisms[i].levelwise)
        .collect();
    let equiv_gap: Vec<usize> = equivalences
        .iter()
        .copied()
        .filter(|&i| !morphisms[i].levelwise)
        .collect();
    let unique_tables = if dom_univalent && cod_univalent {
        let mut engine = IndiscEngine::new(cod)?;
        let mut unique = true;
        'outer: for &i in &equivalences {
            let cm = &morphisms[i];
            for entry in &cm.equivalence.as_ref().expect("is an equivalence").table {
                let mut total = 0usize;
                for &x in dom.fiber(entry.sort, &entry.context) {
                    let fx = cm.morphism.map[x.0];
                    total += engine.count_witnesses(fx, entry.target, 2)?;
                    if total > 1 {
                        unique = false;
                        break 'outer;
                    }
                }
                if total != 1 {
                    unique = false;
                    break 'outer;
                }
            }
        }
        Some(unique)
    } else {
        None
    };
    let split_case = !dom_univalent || split_gap.is_empty();
    let full_case = !(dom_univalent && cod_univalent)
        || (equiv_gap.is_empty() && unique_tables == Some(true));
    Ok(PrincipleReport {
        dom_univalent,
        cod_univalent,
        morphisms,
        levelwise,
        split_surjective_equivalences: sse,
        equivalences,
        split_gap,
        equiv_gap,
        unique_tables,
        holds: split_case && full_case,
    })
}

fn indices(ms: &[ClassifiedMorphism], pred: impl Fn(&ClassifiedMorphism) -> bool) -> Vec<usize> {
    ms.iter()
        .enumerate()
        .filter(|(_, m)| pred(m))
        .map(|(i, _)| i)
        .collect()
}
