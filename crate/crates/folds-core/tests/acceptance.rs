//! Acceptance gate for the workbench: ten end-to-end criteria, each run as
//! one test that prints a single `A<n> <name>: pass` or `... : fail` line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Every tolerance is pinned here as a constant: time budgets, search
//! bounds, model-size cutoffs, formula counts, seeds, and the frozen
//! reference counts the criteria compare against.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use folds_core::corpus::{
    build_model, build_structure, builtin_files, category_corpus, corpus_models, enumerate_models,
    extract_preorder, extract_topology, load_theory, model_decl_of, oracle_gaunt,
    oracle_isomorphisms, parse_bounds, PresentedObject,
};
use folds_core::dsl::{self, FiberDecl, ModelDecl};
use folds_core::equiv::{enumerate_morphisms, univalence_principle_check, EquivError, MorFilter};
use folds_core::folds::{check_wf, eval_formula, random_formula, Axiom, Theory};
use folds_core::indisc::{self, IndiscEngine};
use folds_core::sigcore::{derive_signature, validate_signature, Family, SigSpec, Signature};
use folds_core::structure::{matching_contexts, split_structure, Structure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// No single criterion may take longer than this.
const SINGLE_BUDGET: Duration = Duration::from_secs(60);
/// Candidate cap for exhaustive morphism searches.
const SEARCH_BOUND: u64 = 10_000_000;
/// The category corpus must offer at least this many members.
const MIN_CATEGORIES: usize = 15;
/// Cell-count cutoff for the exhaustive cross-model criteria.
const SMALL_MODEL_CELLS: usize = 12;
/// Random closed formulas evaluated per theory for invariance.
const INVARIANCE_FORMULAS: usize = 100;
const INVARIANCE_SEED: u64 = 5;
const INVARIANCE_DEPTH: usize = 4;
/// Random syntax trees round-tripped through the printer and parser.
const GENERATED_ASTS: usize = 500;
const AST_SEED: u64 = 10;
/// Labeled preorders on 0..=3 elements: 1 + 1 + 4 + 29.
const PREORDERS_UP_TO_3: usize = 35;
/// Labeled partial orders on 0..=3 elements: 1 + 1 + 3 + 19.
const POSETS_UP_TO_3: usize = 24;
/// Topologies on 0..=3 labeled points: 1 + 1 + 4 + 29.
const TOPOLOGIES_UP_TO_3: usize = 35;
/// Derived-signature sort counts over an n-object family of the
/// four-sort category signature: (rank 0, rank 1) = (n^2, n + n^3).
const DERIVED_SORT_COUNTS: [(usize, usize, usize); 3] = [(1, 1, 2), (2, 4, 10), (3, 9, 30)];

/// Every bundled theory, each with a curated model list.
const BUILTIN_THEORIES: [&str; 12] = [
    "cat",
    "cat_e",
    "semicat",
    "preorder",
    "preorder_e",
    "poset_e",
    "pointed",
    "set",
    "topology",
    "multigraph",
    "multigraph_het",
    "strictcat",
];

fn criterion(tag: &str, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= SINGLE_BUDGET => println!("{tag}: pass"),
        Ok(()) => {
            println!("{tag}: fail");
            panic!("{tag} finished but took {elapsed:?}, over the {SINGLE_BUDGET:?} budget");
        }
        Err(cause) => {
            println!("{tag}: fail");
            std::panic::resume_unwind(cause);
        }
    }
}

/// Load a bundled theory and rebuild its curated models over the one shared
/// signature instance, so they can be compared by the morphism machinery.
fn theory_with_models(name: &str) -> (Theory, Arc<Signature>, Vec<(String, Structure)>) {
    let (theory, sig) = load_theory(name, None).expect("bundled theory loads");
    let models = corpus_models(name)
        .expect("curated models exist")
        .into_iter()
        .map(|(n, m)| {
            let decl = model_decl_of(&n, &m);
            let rebuilt = build_structure(&sig, &decl).expect("curated model rebuilds");
            (n, rebuilt)
        })
        .collect();
    (theory, sig, models)
}

fn univalent(m: &Structure) -> bool {
    indisc::univalence_report(m).expect("univalence report").univalent
}

fn fiber_labels(m: &Structure, cells: &[folds_core::structure::CellId]) -> Vec<String> {
    let mut labels: Vec<String> = cells.iter().map(|&x| m.cell(x).label.clone()).collect();
    labels.sort();
    labels
}

#[test]
fn a1_indiscernibility_counts_match_isomorphism_counts() {
    criterion("A1 indiscernibility counts match isomorphism counts", || {
        let corpus = category_corpus();
        assert!(
            corpus.len() >= MIN_CATEGORIES,
            "need at least {MIN_CATEGORIES} categories, found {}",
            corpus.len()
        );
        for (name, p) in &corpus {
            let (_, m) = build_model(&PresentedObject::Category(p.clone()))
                .expect("corpus member builds");
            let o = m.sig.sort_by_name("O").expect("object sort");
            let mut engine = IndiscEngine::new(&m).expect("engine");
            for a in 0..p.objects.len() {
                for b in 0..p.objects.len() {
                    let ca = m.find_cell(o, &p.objects[a]).expect("object cell");
                    let cb = m.find_cell(o, &p.objects[b]).expect("object cell");
                    let got = engine.witnesses(ca, cb, None).expect("witness search").count;
                    let want = oracle_isomorphisms(p, a, b).expect("iso table").len();
                    assert_eq!(
                        got, want,
                        "{name}: |{} == {}| disagrees with the isomorphism count",
                        p.objects[a], p.objects[b]
                    );
                }
            }
        }
    });
}

#[test]
fn a2_univalence_matches_gauntness() {
    criterion("A2 univalence matches gauntness", || {
        let mut gaunt_seen = false;
        let mut non_gaunt_seen = false;
        for (name, p) in &category_corpus() {
            let (_, m) = build_model(&PresentedObject::Category(p.clone()))
                .expect("corpus member builds");
            let gaunt = oracle_gaunt(p).expect("gauntness oracle");
            assert_eq!(
                univalent(&m),
                gaunt,
                "{name}: univalence verdict disagrees with gauntness"
            );
            gaunt_seen |= gaunt;
            non_gaunt_seen |= !gaunt;
        }
        assert!(gaunt_seen && non_gaunt_seen, "corpus must exercise both verdicts");
    });
}

#[test]
fn a3_equivalences_of_univalent_models_are_levelwise() {
    criterion("A3 equivalences of univalent models are levelwise", || {
        let mut pairs = 0usize;
        let mut with_equivalences = 0usize;
        for theory in BUILTIN_THEORIES {
            let (_, _, models) = theory_with_models(theory);
            let small: Vec<&(String, Structure)> = models
                .iter()
                .filter(|(_, m)| m.cells.len() <= SMALL_MODEL_CELLS && univalent(m))
                .collect();
            for (na, a) in &small {
                for (nb, b) in &small {
                    let rep = univalence_principle_check(a, b, SEARCH_BOUND)
                        .expect("search fits the bound");
                    assert!(rep.dom_univalent && rep.cod_univalent);
                    assert_eq!(
                        rep.equivalences, rep.levelwise,
                        "{theory}: {na} -> {nb}: equivalences and levelwise equivalences differ"
                    );
                    if !rep.equivalences.is_empty() {
                        assert_eq!(
                            rep.unique_tables,
                            Some(true),
                            "{theory}: {na} -> {nb}: witness tables are not unique"
                        );
                        with_equivalences += 1;
                    }
                    assert!(rep.holds, "{theory}: {na} -> {nb}: principle report fails");
                    pairs += 1;
                }
            }
        }
        // Identity morphisms guarantee one equivalence per model, so the
        // criterion cannot pass vacuously.
        assert!(pairs >= BUILTIN_THEORIES.len());
        assert!(with_equivalences >= BUILTIN_THEORIES.len());

        // Dropping univalence breaks the conclusion: the two-object chaotic
        // iso collapses onto the one-object category by an equivalence that
        // no levelwise morphism can replace.
        let (_, _, cats) = theory_with_models("cat_e");
        let wiso = &cats.iter().find(|(n, _)| n == "walking_iso").expect("walking_iso").1;
        let one = &cats.iter().find(|(n, _)| n == "discrete1").expect("discrete1").1;
        let rep = univalence_principle_check(wiso, one, SEARCH_BOUND).expect("small search");
        assert!(!rep.dom_univalent, "the chaotic iso pair must not be univalent");
        assert!(!rep.equivalences.is_empty(), "the collapse equivalence must be found");
        assert!(rep.levelwise.is_empty(), "no levelwise morphism exists onto the point");
    });
}

#[test]
fn a4_split_surjective_equivalences_out_of_univalent_models_are_levelwise() {
    criterion(
        "A4 split-surjective equivalences out of univalent models are levelwise",
        || {
            let mut witnessed = 0usize;
            for theory in BUILTIN_THEORIES {
                let (_, _, models) = theory_with_models(theory);
                let verdicts: Vec<bool> = models.iter().map(|(_, m)| univalent(m)).collect();
                for (i, (na, a)) in models.iter().enumerate() {
                    for (nb, b) in &models {
                        let list = match enumerate_morphisms(a, b, MorFilter::All, SEARCH_BOUND) {
                            Ok(list) => list,
                            Err(EquivError::SearchSpace(..)) => continue,
                            Err(e) => panic!("{theory}: {na} -> {nb}: {e}"),
                        };
                        for cm in &list {
                            if verdicts[i] && cm.split_surjective && cm.is_equivalence() {
                                assert!(
                                    cm.levelwise,
                                    "{theory}: {na} -> {nb}: a split-surjective equivalence \
                                     out of a univalent model is not levelwise"
                                );
                                witnessed += 1;
                            }
                        }
                    }
                }
            }
            assert!(
                witnessed >= BUILTIN_THEORIES.len(),
                "too few split-surjective equivalences exercised: {witnessed}"
            );
        },
    );
}

#[test]
fn a5_equivalent_models_satisfy_the_same_formulas() {
    criterion("A5 equivalent models satisfy the same formulas", || {
        let mut invariant_pairs = 0usize;
        for theory_name in BUILTIN_THEORIES {
            let (theory, sig, models) = theory_with_models(theory_name);
            let mut rng = ChaCha8Rng::seed_from_u64(INVARIANCE_SEED);
            let formulas: Vec<_> = theory
                .axioms
                .iter()
                .map(|ax| ax.formula.clone())
                .chain((0..INVARIANCE_FORMULAS).map(|_| {
                    random_formula(&sig, &mut rng, INVARIANCE_DEPTH)
                }))
                .collect();
            let checked: Vec<_> = formulas
                .iter()
                .map(|f| check_wf(&sig, f).expect("generated formula is well-formed"))
                .collect();
            let small: Vec<&(String, Structure)> = models
                .iter()
                .filter(|(_, m)| m.cells.len() <= SMALL_MODEL_CELLS && univalent(m))
                .collect();
            for (na, a) in &small {
                for (nb, b) in &small {
                    let equivalences =
                        match enumerate_morphisms(a, b, MorFilter::Equivalence, SEARCH_BOUND) {
                            Ok(list) => list,
                            Err(EquivError::SearchSpace(..)) => continue,
                            Err(e) => panic!("{theory_name}: {na} -> {nb}: {e}"),
                        };
                    if equivalences.is_empty() {
                        continue;
                    }
                    invariant_pairs += 1;
                    for (k, f) in checked.iter().enumerate() {
                        assert_eq!(
                            eval_formula(a, f, &mut Vec::new()),
                            eval_formula(b, f, &mut Vec::new()),
                            "{theory_name}: {na} and {nb} are equivalent but disagree \
                             on formula {k}"
                        );
                    }
                }
            }
        }
        assert!(
            invariant_pairs >= BUILTIN_THEORIES.len(),
            "too few equivalent pairs exercised: {invariant_pairs}"
        );
    });
}

#[test]
fn a6_fibers_agree_between_direct_and_derivative_computation() {
    criterion("A6 fibers agree between direct and derivative computation", || {
        for (name, m) in corpus_models("cat_e").expect("category models") {
            let split = split_structure(&m).expect("split");
            let sig = &m.sig;
            for s in 0..sig.sort_count() {
                let k = folds_core::sigcore::SortId(s);
                if sig.rank(k) == 0 {
                    // Rank-0 sorts become the family itself.
                    assert_eq!(
                        split.family.elems[s],
                        m.cells_of_sort(k)
                            .iter()
                            .map(|&x| m.cell(x).label.clone())
                            .collect::<Vec<_>>(),
                        "{name}: family mismatch at a rank-0 sort"
                    );
                    continue;
                }
                let fan0 = sig.fanout(k, 0).expect("fanout");
                let bottoms: Vec<folds_core::sigcore::SortId> =
                    fan0.iter().map(|&f| sig.class(f).cod).collect();
                let full = sig.full_fanout(k).to_vec();
                let mut direct_contexts = 0usize;
                for c in matching_contexts(&m, k) {
                    direct_contexts += 1;
                    // Read the rank-0 part of the context off as a family
                    // assignment and look up the derived sort it selects.
                    let mut assign = Vec::with_capacity(fan0.len());
                    for (pos, &f) in full.iter().enumerate() {
                        if sig.rank(sig.class(f).cod) == 0 {
                            let slot = fan0.iter().position(|&g| g == f).expect("rank-0 slot");
                            assert_eq!(slot, assign.len(), "rank-0 tail order");
                            assign.push(m.index_in_sort(c[pos]));
                        }
                    }
                    let ds = split.dsig.sort_for(k, &assign).expect("derived sort exists");
                    // The remaining positions name the derived context.
                    let dlen = split.dsig.sig.full_fanout(ds).len();
                    let mut dctx = vec![folds_core::structure::CellId(usize::MAX); dlen];
                    for (pos, &f) in full.iter().enumerate() {
                        if sig.rank(sig.class(f).cod) > 0 {
                            let dpos = split
                                .dsig
                                .base_position(ds, pos)
                                .expect("higher position survives");
                            dctx[dpos] = split.from_base[c[pos].0].expect("derived copy");
                        }
                    }
                    assert!(dctx.iter().all(|x| x.0 != usize::MAX));
                    let direct = fiber_labels(&m, m.fiber(k, &c));
                    let via_derivative: Vec<String> = {
                        let cells: Vec<_> = split
                            .derived
                            .fiber(ds, &dctx)
                            .iter()
                            .map(|&x| split.to_base[x.0])
                            .collect();
                        fiber_labels(&m, &cells)
                    };
                    assert_eq!(
                        direct, via_derivative,
                        "{name}: fiber over a context of {} disagrees with its \
                         derivative-side computation",
                        sig.sort(k).name
                    );
                }
                // The context translation is a bijection: counting both
                // sides rules out derivative contexts with no preimage.
                let mut derived_contexts = 0usize;
                let mut assign = vec![0usize; fan0.len()];
                loop {
                    if assign
                        .iter()
                        .zip(&bottoms)
                        .all(|(&a, &t)| a < split.family.elems[t.0].len())
                    {
                        let ds = split.dsig.sort_for(k, &assign).expect("derived sort");
                        derived_contexts += matching_contexts(&split.derived, ds).len();
                    }
                    let mut i = assign.len();
                    loop {
                        if i == 0 {
                            break;
                        }
                        i -= 1;
                        assign[i] += 1;
                        if assign[i] < split.family.elems[bottoms[i].0].len().max(1) {
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
                assert_eq!(
                    direct_contexts, derived_contexts,
                    "{name}: context counts for {} diverge",
                    sig.sort(k).name
                );
            }
        }
    });
}

#[test]
fn a7_preorder_indiscernibility_is_two_sided_order() {
    criterion("A7 preorder indiscernibility is two-sided order", || {
        let (theory, sig) = load_theory("preorder", None).expect("preorder theory");
        let bounds = parse_bounds("X=3,Le=1").expect("bounds");
        let models = enumerate_models(&sig, &theory, &bounds).expect("enumeration");
        assert_eq!(models.len(), PREORDERS_UP_TO_3, "labeled preorder count");
        let mut posets = 0usize;
        for m in &models {
            let p = extract_preorder(m);
            let x = m.sig.sort_by_name("X").expect("X");
            let elems = m.cells_of_sort(x).to_vec();
            let mut engine = IndiscEngine::new(m).expect("engine");
            let mut antisymmetric = true;
            for i in 0..elems.len() {
                for j in 0..elems.len() {
                    let both = p.le.contains(&(i, j)) && p.le.contains(&(j, i));
                    let count = engine.witnesses(elems[i], elems[j], None).expect("search").count;
                    assert_eq!(
                        count >= 1,
                        both,
                        "indiscernibility must mean order in both directions"
                    );
                    if i != j && both {
                        antisymmetric = false;
                    }
                }
            }
            assert_eq!(
                univalent(m),
                antisymmetric,
                "a preorder is univalent exactly when it is a partial order"
            );
            if antisymmetric {
                posets += 1;
            }
        }
        assert_eq!(posets, POSETS_UP_TO_3, "labeled poset count");
    });
}

#[test]
fn a8_topology_univalence_at_points_is_t0() {
    criterion("A8 topology univalence at points is T0 separation", || {
        let (theory, sig) = load_theory("topology", None).expect("topology theory");
        let bounds = parse_bounds("Pt=3,Op=set:8,In=1").expect("bounds");
        let models = enumerate_models(&sig, &theory, &bounds).expect("enumeration");
        assert_eq!(models.len(), TOPOLOGIES_UP_TO_3, "topology count");
        let mut t0_seen = false;
        let mut non_t0_seen = false;
        for m in &models {
            let t = extract_topology(m);
            let n = t.points.len();
            let t0 = (0..n).all(|p| {
                (0..n).all(|q| p == q || t.opens.iter().any(|o| o[p] != o[q]))
            });
            let pt = m.sig.sort_by_name("Pt").expect("Pt");
            let report = indisc::univalence_report(m).expect("report");
            let univalent_at_points = report
                .fibers
                .iter()
                .filter(|f| f.sort == pt)
                .all(|f| f.univalent);
            assert_eq!(
                univalent_at_points, t0,
                "univalence at the point sort must coincide with T0 separation"
            );
            t0_seen |= t0;
            non_t0_seen |= !t0;
        }
        assert!(t0_seen && non_t0_seen, "enumeration must exercise both verdicts");
    });
}

#[test]
fn a9_relation_example_distinguishes_image_elements() {
    criterion("A9 relation example distinguishes image elements", || {
        let spec = SigSpec {
            name: "rel".into(),
            sorts: vec![("A".into(), 0), ("R".into(), 1)],
            gens: vec![("l".into(), 1, 0), ("r".into(), 1, 0)],
            equations: vec![],
            path_bound: 0,
        };
        let sig = Arc::new(validate_signature(spec).expect("relation signature"));
        let small = build_structure(
            &sig,
            &ModelDecl {
                name: "m".into(),
                sig_name: "rel".into(),
                fibers: vec![FiberDecl {
                    sort: "A".into(),
                    args: vec![],
                    labels: vec!["a".into(), "b".into()],
                }],
            },
        )
        .expect("two-element empty relation");
        let big = build_structure(
            &sig,
            &ModelDecl {
                name: "n".into(),
                sig_name: "rel".into(),
                fibers: vec![
                    FiberDecl {
                        sort: "A".into(),
                        args: vec![],
                        labels: vec!["a".into(), "b".into(), "c".into()],
                    },
                    FiberDecl {
                        sort: "R".into(),
                        args: vec!["a".into(), "c".into()],
                        labels: vec!["w".into()],
                    },
                ],
            },
        )
        .expect("three-element relation with one pair");
        let a_sort = sig.sort_by_name("A").expect("A");
        let (ma, mb) = (
            small.find_cell(a_sort, "a").expect("a"),
            small.find_cell(a_sort, "b").expect("b"),
        );
        assert!(
            indisc::indiscernibilities(&small, ma, mb).expect("search").count >= 1,
            "with an empty relation the two elements must be indiscernible"
        );
        let (na, nb) = (
            big.find_cell(a_sort, "a").expect("a"),
            big.find_cell(a_sort, "b").expect("b"),
        );
        assert_eq!(
            indisc::indiscernibilities(&big, na, nb).expect("search").count,
            0,
            "after embedding, one related and one unrelated element must be discernible"
        );
    });
}

#[test]
fn a10_printer_and_parser_are_inverse_and_derivatives_count() {
    criterion("A10 printer and parser are inverse and derivatives count", || {
        // Every bundled file survives parse-then-print byte for byte.
        for (file, src) in builtin_files() {
            let ast = dsl::parse(src).unwrap_or_else(|e| panic!("{file}: {e}"));
            assert_eq!(dsl::print(&ast), src, "{file}: printed form differs");
        }

        // Freshly generated syntax trees survive print-then-parse exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(AST_SEED);
        for i in 0..GENERATED_ASTS {
            match i % 5 {
                0 | 1 => {
                    let spec = random_sig_spec(&mut rng, i);
                    let printed = dsl::print_signature(&spec);
                    let back = dsl::parse_signature(&printed)
                        .unwrap_or_else(|e| panic!("case {i}: {e}\n{printed}"));
                    assert_eq!(back, spec, "case {i}:\n{printed}");
                }
                2 | 3 => {
                    let theory = random_theory(&mut rng, i);
                    let printed = dsl::print_theory(&theory);
                    let back = dsl::parse_theory(&printed)
                        .unwrap_or_else(|e| panic!("case {i}: {e}\n{printed}"));
                    assert_eq!(back, theory, "case {i}:\n{printed}");
                }
                _ => {
                    let model = random_model_decl(&mut rng, i);
                    let printed = dsl::print_model(&model);
                    let back = dsl::parse_model(&printed)
                        .unwrap_or_else(|e| panic!("case {i}: {e}\n{printed}"));
                    assert_eq!(back, model, "case {i}:\n{printed}");
                }
            }
        }

        // Deriving the four-sort category signature over an n-element
        // object family yields the closed-form sort counts.
        let base = Arc::new(validate_signature(four_sort_category_spec()).expect("category sig"));
        for (n, rank0, rank1) in DERIVED_SORT_COUNTS {
            let family = Family {
                elems: vec![(0..n).map(|i| format!("x{i}")).collect(), vec![], vec![], vec![]],
            };
            let d = derive_signature(&base, &family).expect("derivative");
            let got0 = d.sig.sorts.iter().filter(|s| s.rank == 0).count();
            let got1 = d.sig.sorts.iter().filter(|s| s.rank == 1).count();
            assert_eq!((got0, got1), (rank0, rank1), "derived sort counts at n = {n}");
        }
    });
}

/// Objects, arrows, composition triangles, and identity witnesses; the
/// category signature without the arrow-equality sort.
fn four_sort_category_spec() -> SigSpec {
    SigSpec {
        name: "cat4".into(),
        sorts: vec![
            ("O".into(), 0),
            ("A".into(), 1),
            ("T".into(), 2),
            ("I".into(), 2),
        ],
        gens: vec![
            ("d".into(), 1, 0),
            ("c".into(), 1, 0),
            ("t0".into(), 2, 1),
            ("t1".into(), 2, 1),
            ("t2".into(), 2, 1),
            ("i".into(), 3, 1),
        ],
        equations: vec![
            (vec![1, 2], vec![0, 3]),
            (vec![0, 2], vec![0, 4]),
            (vec![1, 3], vec![1, 4]),
            (vec![1, 5], vec![0, 5]),
        ],
        path_bound: 0,
    }
}

/// A random well-shaped signature spec whose printed form regroups to
/// itself: generators are listed by domain sort and equations by the sort
/// their paths start from, matching the printer's layout.
fn random_sig_spec(rng: &mut ChaCha8Rng, tag: usize) -> SigSpec {
    let n_sorts = rng.gen_range(1..=5);
    let mut sorts: Vec<(String, usize)> = (0..n_sorts)
        .map(|s| (format!("S{s}"), rng.gen_range(0..=3)))
        .collect();
    sorts[0].1 = 0;
    let mut gens: Vec<(String, usize, usize)> = Vec::new();
    for dom in 0..n_sorts {
        let lower: Vec<usize> = (0..n_sorts).filter(|&c| sorts[c].1 < sorts[dom].1).collect();
        if lower.is_empty() {
            continue;
        }
        for _ in 0..rng.gen_range(0..=3) {
            let cod = lower[rng.gen_range(0..lower.len())];
            gens.push((format!("g{}", gens.len()), dom, cod));
        }
    }
    let mut equations = Vec::new();
    for start in 0..n_sorts {
        for _ in 0..rng.gen_range(0..=2) {
            if let (Some(lhs), Some(rhs)) =
                (random_path(rng, &gens, start), random_path(rng, &gens, start))
            {
                equations.push((lhs, rhs));
            }
        }
    }
    SigSpec {
        name: format!("sig{tag}"),
        sorts,
        gens,
        equations,
        path_bound: 0,
    }
}

/// A composable generator path out of `start`, outermost generator first,
/// or None when no generator leaves the sort.
fn random_path(
    rng: &mut ChaCha8Rng,
    gens: &[(String, usize, usize)],
    start: usize,
) -> Option<Vec<usize>> {
    let mut cur = start;
    let mut applied = Vec::new();
    for _ in 0..rng.gen_range(1..=3usize) {
        let out: Vec<usize> = gens
            .iter()
            .enumerate()
            .filter(|(_, g)| g.1 == cur)
            .map(|(i, _)| i)
            .collect();
        if out.is_empty() {
            break;
        }
        let g = out[rng.gen_range(0..out.len())];
        applied.push(g);
        cur = gens[g].2;
    }
    if applied.is_empty() {
        None
    } else {
        applied.reverse();
        Some(applied)
    }
}

fn random_theory(rng: &mut ChaCha8Rng, tag: usize) -> Theory {
    // Equation-free specs with one guaranteed rank-0 sort always validate,
    // which lets the formula generator draw binder sites.
    let spec = SigSpec {
        equations: vec![],
        ..random_sig_spec(rng, tag)
    };
    let sig = validate_signature(spec).expect("generated signature validates");
    let axioms = (0..rng.gen_range(1..=4))
        .map(|k| Axiom {
            id: format!("ax{k}"),
            formula: random_formula(&sig, rng, 3),
        })
        .collect();
    Theory {
        name: format!("thy{tag}"),
        sig_name: sig.name.clone(),
        axioms,
    }
}

fn random_model_decl(rng: &mut ChaCha8Rng, tag: usize) -> ModelDecl {
    let pool = ["a", "b", "c", "x", "y"];
    let fibers = (0..rng.gen_range(0..=5))
        .map(|k| {
            let mut labels = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=4) {
                labels.insert(format!("e{}", rng.gen_range(0..9)));
            }
            FiberDecl {
                sort: format!("X{k}"),
                args: (0..rng.gen_range(0..=2))
                    .map(|_| pool[rng.gen_range(0..pool.len())].to_string())
                    .collect(),
                labels: labels.into_iter().collect(),
            }
        })
        .collect();
    ModelDecl {
        name: format!("m{tag}"),
        sig_name: format!("s{tag}"),
        fibers,
    }
}
