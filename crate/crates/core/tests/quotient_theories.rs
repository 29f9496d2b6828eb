//! The relation machinery and the four quotient theories on the bundled
//! fixtures: relation families with their closure, quotient groups, dual
//! image generators, and relation stability.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use obcalc::bivariant::covariant_part;
use obcalc::cycles::GradeWindow;
use obcalc::lazard::TruncatedLazardRing;
use obcalc::quotients::{closure, RelationKind, RelationSet};
use obcalc::*;

fn point() -> Arc<FiniteSite> {
    Arc::new(FiniteSite::load_str(include_str!("../fixtures/point.json")).unwrap())
}

fn p1() -> Arc<FiniteSite> {
    Arc::new(FiniteSite::load_str(include_str!("../fixtures/p1.json")).unwrap())
}

fn dp_demo() -> Arc<FiniteSite> {
    Arc::new(FiniteSite::load_str(include_str!("../fixtures/dp_demo.json")).unwrap())
}

#[test]
fn dim_relations_examples() {
    // point site, bound 1: one generator, the trivial bundle applied to the
    // point's fundamental class
    let site = point();
    let ob = Theory::ob(site.clone(), 1, GradeWindow::full());
    let set = dim_relations(&ob, "id_pt", 1).unwrap();
    let rels = &set.by_arrow["id_pt"];
    assert_eq!(rels.len(), 1);
    let (elem, _) = &rels[0];
    assert_eq!(elem.terms.len(), 1);
    let key = elem.terms.keys().next().unwrap();
    assert_eq!(key.class.bundles, vec![Vec::<i64>::new()]);
    // bound at most the dimension: empty set
    let set = dim_relations(&ob, "id_pt", 0).unwrap();
    assert!(set.is_empty());
    // the line with bound 2: multisets of size 2 over {+O1, -O1, 0}
    let site = p1();
    let ob = Theory::ob(site.clone(), 2, GradeWindow::full());
    let set = dim_relations(&ob, "c", 2).unwrap();
    let rels = &set.by_arrow["c"];
    assert_eq!(rels.len(), 6, "{rels:?}");
    for (elem, _) in rels {
        for key in elem.terms.keys() {
            assert_eq!(key.class.bundles.len(), 2);
        }
    }
}

#[test]
fn sect_relations_examples() {
    // no registry entries: empty set
    let site = point();
    let ob = Theory::ob(site.clone(), 1, GradeWindow::full());
    assert!(sect_relations(&ob, "id_pt").unwrap().is_empty());
    // the line over the point: the O(1) Chern class is identified with the
    // pushed-forward zero locus, in grade 0
    let site = p1();
    let ob = Theory::ob(site.clone(), 1, GradeWindow::full());
    let set = sect_relations(&ob, "c").unwrap();
    let rels = &set.by_arrow["c"];
    assert_eq!(rels.len(), 1);
    let (elem, _) = &rels[0];
    assert_eq!(elem.terms.len(), 2);
    assert!(elem.grades().into_iter().all(|g| g == 0));
    let labels: Vec<String> = elem.terms.keys().map(|k| k.label()).collect();
    assert!(labels.contains(&"[id_P1; (1)]".to_string()), "{labels:?}");
    assert!(labels.contains(&"[i_Z]".to_string()), "{labels:?}");
    // over the identity arrow the zero locus composes non-smoothly: the
    // entry is skipped and recorded
    let set = sect_relations(&ob, "id_P1").unwrap();
    assert!(set.is_empty());
    assert_eq!(set.skipped.len(), 1, "{:?}", set.skipped);
}

#[test]
fn fgl_relations_examples() {
    // rank-zero Picard groups contribute nothing
    let site = point();
    let ring = TruncatedLazardRing::build(2);
    let scratch = Theory::with_relations(
        TheoryKind::Ob1,
        site.clone(),
        2,
        1,
        GradeWindow::full(),
        Some(Arc::new(TruncatedLazardRing::build(2))),
        Default::default(),
    );
    assert!(fgl_relations(&scratch, "id_pt", &ring).unwrap().is_empty());
    // on the line with bound 2 the pair (O1, O1) identifies the O(2) Chern
    // class with twice O(1) plus the first coefficient times the square
    let site = p1();
    let scratch = Theory::with_relations(
        TheoryKind::Ob1,
        site.clone(),
        2,
        2,
        GradeWindow::full(),
        Some(Arc::new(TruncatedLazardRing::build(2))),
        Default::default(),
    );
    let set = fgl_relations(&scratch, "c", &ring).unwrap();
    let rels = &set.by_arrow["c"];
    // the monomial span includes the plain relation; find the alpha = [id_P1]
    // instance with trivial multiplier
    let plain = rels
        .iter()
        .find(|(e, p)| p.contains("[id_P1]") && p.ends_with("times 1") && e.terms.len() == 3)
        .map(|(e, _)| e.clone())
        .expect("plain relation present");
    let mut labels: Vec<(String, String)> = plain
        .terms
        .iter()
        .map(|(k, c)| (k.label(), c.to_string()))
        .collect();
    labels.sort();
    assert_eq!(
        labels,
        vec![
            ("[id_P1; (1)]".to_string(), "2".to_string()),
            ("[id_P1; (2)]".to_string(), "-1".to_string()),
            ("a11*[id_P1; (1) (1)]".to_string(), "1".to_string()),
        ],
        "a11-term carries the double Chern application"
    );
    let a11_key = plain
        .terms
        .keys()
        .find(|k| !k.monomial.is_one())
        .expect("coefficient monomial present");
    assert_eq!(a11_key.monomial.label(), "a11");
}

#[test]
fn closure_examples() {
    // empty input: empty closure
    let site = p1();
    let ob = Theory::ob(site.clone(), 1, GradeWindow::full());
    let closed = closure(&ob, &RelationSet::new(RelationKind::Sect)).unwrap();
    assert!(closed.values().all(|v| v.is_empty()));
    // point site: the dimension family is already closed
    let psite = point();
    let pob = Theory::ob(psite.clone(), 1, GradeWindow::full());
    let raw = dim_relations(&pob, "id_pt", 1).unwrap();
    let closed = closure(&pob, &raw).unwrap();
    assert_eq!(closed["id_pt"].len(), raw.by_arrow["id_pt"].len());
    // the section relation spreads along the confined structure map into the
    // identity arrow of the point
    let mut sect_raw = RelationSet::new(RelationKind::Sect);
    let sect = sect_relations(&ob, "c").unwrap();
    for (a, v) in sect.by_arrow {
        for (e, p) in v {
            sect_raw.by_arrow.entry(a.clone()).or_default().push((e, p));
        }
    }
    let closed = closure(&ob, &sect_raw).unwrap();
    let pushed_somewhere = closed
        .get("id_pt")
        .map(|v| {
            v.iter()
                .any(|(_, prov)| prov.contains("pushforward along c"))
        })
        .unwrap_or(false);
    assert!(pushed_somewhere, "{closed:?}");
}

#[test]
fn dp_relation_examples() {
    // empty registry
    let site = p1();
    let m = Theory::m(site.clone());
    let (set, rejected) = dp_relations(&m, "c").unwrap();
    assert!(set.is_empty());
    assert!(rejected.is_empty());
    // the demo fixture: a single signed quadruple in one grade
    let site = dp_demo();
    let m = Theory::m(site.clone());
    let (set, rejected) = dp_relations(&m, "cS").unwrap();
    assert!(rejected.is_empty());
    let rels = &set.by_arrow["cS"];
    assert_eq!(rels.len(), 1);
    // the same degeneration is declared over the final object as well
    let (pt_set, _) = dp_relations(&m, "id_pt").unwrap();
    assert_eq!(pt_set.by_arrow["id_pt"].len(), 1);
    let (elem, _) = &rels[0];
    let mut coeffs: Vec<(String, i64)> = elem
        .terms
        .iter()
        .map(|(k, c)| {
            let as_i64: i64 = c.to_string().parse().unwrap();
            (k.label(), as_i64)
        })
        .collect();
    coeffs.sort();
    assert_eq!(
        coeffs,
        vec![
            ("[hA]".to_string(), -1),
            ("[hB]".to_string(), -1),
            ("[hE]".to_string(), 1),
            ("[hPD]".to_string(), 1),
        ]
    );
    assert!(elem.grades().into_iter().all(|g| g == 1));
    // an entry whose component composite is not smooth is rejected with the
    // failed condition
    let text = include_str!("../fixtures/dp_demo.json").replace(
        r#"{ "id": "cA", "src": "A", "dst": "pt", "proper": true, "projective": true, "smooth": true }"#,
        r#"{ "id": "cA", "src": "A", "dst": "pt", "proper": true, "projective": true, "smooth": false }"#,
    );
    let mutated = Arc::new(FiniteSite::load_str(&text).unwrap());
    let m = Theory::m(mutated);
    let (set, rejected) = dp_relations(&m, "cS").unwrap();
    assert!(set.is_empty());
    assert_eq!(rejected.len(), 1);
    assert!(rejected[0].reason.contains("not smooth"), "{rejected:?}");
}

#[test]
fn ob1_point_site_matches_coefficient_ring() {
    let site = point();
    let ob1 = build_ob1(site, 3, 0, GradeWindow::full()).unwrap();
    let table = ob1.group_invariants("id_pt").unwrap();
    assert_eq!(
        table,
        vec![
            (0, 1, vec![]),
            (1, 1, vec![]),
            (2, 2, vec![]),
            (3, 3, vec![])
        ]
    );
    // generator-for-generator match with the ring basis
    let ring = TruncatedLazardRing::build(3);
    let pres = ob1.presentation("id_pt", &BTreeSet::new()).unwrap();
    for d in 0..=3usize {
        let keys = &pres.keys[&(d as i64)];
        let ring_labels: Vec<String> = ring.basis(d).iter().map(|m| m.label()).collect();
        let key_monomials: Vec<String> = keys.iter().map(|k| k.monomial.label()).collect();
        assert_eq!(key_monomials, ring_labels, "degree {d}");
    }
}

#[test]
fn ob1_section_identification_on_the_line() {
    let site = p1();
    let ob1 = build_ob1(site.clone(), 3, 1, GradeWindow::full()).unwrap();
    let fund = fundamental_class(&ob1, "c").unwrap();
    let chern = ob1.chern(&[1], &Element::from_class("c", fund)).unwrap();
    let zclass = canonicalize(
        &site,
        &BivariantCycle::new(CycleKind::Ob, "c", "i_Z", vec![]),
    )
    .unwrap();
    let point_class = Element::from_class("c", zclass);
    let diff = chern.sub(&point_class);
    // zero in the quotient, nonzero in the raw oriented theory
    assert!(ob1.is_zero(&diff).unwrap());
    assert!(!diff.is_zero());
    let raw = Theory::ob(site.clone(), 1, GradeWindow::full());
    assert!(!raw.is_zero(&diff).unwrap());
}

#[test]
fn ob1_bound_zero_is_tensored_cycle_fragment() {
    let site = p1();
    let ob1 = build_ob1(site.clone(), 2, 0, GradeWindow::full()).unwrap();
    let m = Theory::m(site.clone());
    // no Chern generators: per grade, the group is the ring tensor the free
    // cycle group
    let ring = TruncatedLazardRing::build(2);
    let ring_rank: Vec<usize> = ring.degree_invariants().iter().map(|(r, _)| *r).collect();
    for arrow in ["c", "id_P1"] {
        let m_table = m.group_invariants(arrow).unwrap();
        let ob1_table = ob1.group_invariants(arrow).unwrap();
        for (g, rank, torsion) in &ob1_table {
            let expected: usize = m_table
                .iter()
                .map(|(mg, mr, _)| {
                    let d = g - mg;
                    if (0..=2).contains(&d) {
                        mr * ring_rank[d as usize]
                    } else {
                        0
                    }
                })
                .sum();
            assert_eq!(*rank, expected, "arrow {arrow} grade {g}");
            assert!(torsion.is_empty());
        }
    }
}

#[test]
fn sequential_quotient_order_independence() {
    // stacking the dimension and section rows in either order presents the
    // same group
    let site = p1();
    let ob = Theory::ob(site.clone(), 1, GradeWindow::full());
    let mut dim_raw = RelationSet::new(RelationKind::Dim);
    let mut sect_raw = RelationSet::new(RelationKind::Sect);
    for arrow in ob.arrows() {
        for (a, v) in dim_relations(&ob, &arrow, 1).unwrap().by_arrow {
            dim_raw.by_arrow.entry(a).or_default().extend(v);
        }
        for (a, v) in sect_relations(&ob, &arrow).unwrap().by_arrow {
            sect_raw.by_arrow.entry(a).or_default().extend(v);
        }
    }
    let dim_closed = closure(&ob, &dim_raw).unwrap();
    let sect_closed = closure(&ob, &sect_raw).unwrap();
    let empty = Vec::new();
    for arrow in ob.arrows() {
        let dim_rows = dim_closed.get(&arrow).unwrap_or(&empty);
        let sect_rows = sect_closed.get(&arrow).unwrap_or(&empty);
        let pres = ob
            .presentation(&arrow, &{
                let mut extras = BTreeSet::new();
                for (e, _) in dim_rows.iter().chain(sect_rows) {
                    extras.extend(e.classes());
                }
                extras
            })
            .unwrap();
        let to_ges = |rows: &[(Element, String)]| {
            rows.iter()
                .flat_map(|(e, _)| pres.element_to_group(e).unwrap())
                .map(|(_, ge)| ge)
                .collect::<Vec<_>>()
        };
        let dim_ges = to_ges(dim_rows);
        let sect_ges = to_ges(sect_rows);
        let both: Vec<_> = dim_ges.iter().chain(&sect_ges).cloned().collect();
        let at_once = pres.group.quotient(&both).unwrap();
        let sequential = pres
            .group
            .quotient(&dim_ges)
            .unwrap()
            .quotient(&sect_ges)
            .unwrap();
        for g in at_once.grades().collect::<Vec<_>>() {
            assert_eq!(
                at_once.invariants(g).unwrap(),
                sequential.invariants(g).unwrap(),
                "arrow {arrow} grade {g}"
            );
        }
    }
}

#[test]
fn ob3_with_empty_registry_is_plain_theory() {
    let site = p1();
    let ob3 = build_ob3(site.clone(), GradeWindow::full()).unwrap();
    let m = Theory::m(site.clone());
    for arrow in m.arrows() {
        assert_eq!(
            ob3.group_invariants(&arrow).unwrap(),
            m.group_invariants(&arrow).unwrap(),
            "arrow {arrow}"
        );
        // identity on generators
        let a: Vec<String> = ob3
            .generator_classes(&arrow)
            .unwrap()
            .iter()
            .map(|c| c.label())
            .collect();
        let b: Vec<String> = m
            .generator_classes(&arrow)
            .unwrap()
            .iter()
            .map(|c| c.label())
            .collect();
        assert_eq!(a, b);
    }
}

#[test]
fn ob3_rank_drop_matches_relation_span() {
    let site = dp_demo();
    let m = Theory::m(site.clone());
    let ob3 = build_ob3(site.clone(), GradeWindow::full()).unwrap();
    let m_table = m.group_invariants("cS").unwrap();
    let ob3_table = ob3.group_invariants("cS").unwrap();
    // independent rank of the relation span by Smith reduction on the raw
    // coefficient matrix
    let (set, _) = dp_relations(&m, "cS").unwrap();
    let rels = &set.by_arrow["cS"];
    let classes: Vec<CycleClass> = {
        let mut all = BTreeSet::new();
        for (e, _) in rels {
            all.extend(e.classes());
        }
        all.into_iter().collect()
    };
    let rows: Vec<Vec<BigInt>> = rels
        .iter()
        .map(|(e, _)| {
            classes
                .iter()
                .map(|c| {
                    e.terms
                        .iter()
                        .find(|(k, _)| &k.class == c)
                        .map(|(_, v)| v.clone())
                        .unwrap_or_default()
                })
                .collect()
        })
        .collect();
    let span_rank = smith_normal_form(&IntMatrix::from_rows(rows)).rank();
    assert_eq!(span_rank, 1);
    // grade-matched comparison
    for (g, m_rank, _) in &m_table {
        let ob3_rank = ob3_table
            .iter()
            .find(|(og, _, _)| og == g)
            .map(|(_, r, _)| *r)
            .unwrap_or(0);
        if *g == 1 {
            assert_eq!(ob3_rank, m_rank - span_rank, "grade {g}");
        } else {
            assert_eq!(ob3_rank, *m_rank, "grade {g}");
        }
    }
}

#[test]
fn ob2_and_ob4_point_site() {
    let site = point();
    let ob2 = build_ob2(site.clone(), 1, 0, GradeWindow::full()).unwrap();
    let gens = ob2.dual_generators("id_pt").unwrap();
    assert_eq!(gens.len(), 1);
    assert_eq!(gens[0].grade, 0);
    assert_eq!(ob2.group_invariants("id_pt").unwrap(), vec![(0, 1, vec![])]);
    let ob4 = build_ob4(site.clone(), GradeWindow::full()).unwrap();
    assert_eq!(ob4.group_invariants("id_pt").unwrap(), vec![(0, 1, vec![])]);
}

#[test]
fn ob2_covariant_part_independent_of_source_object() {
    let site = p1();
    let ob2 = build_ob2(site.clone(), 2, 1, GradeWindow::full()).unwrap();
    let (_, table_p1) = covariant_part(&ob2, "P1").unwrap();
    let (_, table_z) = covariant_part(&ob2, "Z").unwrap();
    // hom sets to the point differ by arrow but the tables agree
    assert_eq!(table_p1, table_z);
    let ob4 = build_ob4(site.clone(), GradeWindow::full()).unwrap();
    let (_, t1) = covariant_part(&ob4, "P1").unwrap();
    let (_, t2) = covariant_part(&ob4, "Z").unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn ob4_empty_registry_matches_ob2_index_sets() {
    let site = p1();
    let ob2 = build_ob2(site.clone(), 1, 0, GradeWindow::full()).unwrap();
    let ob4 = build_ob4(site.clone(), GradeWindow::full()).unwrap();
    for arrow in ob2.arrows() {
        let a: Vec<(i64, String)> = ob2
            .dual_generators(&arrow)
            .unwrap()
            .into_iter()
            .map(|g| (g.grade, g.target_arrow))
            .collect();
        let b: Vec<(i64, String)> = ob4
            .dual_generators(&arrow)
            .unwrap()
            .into_iter()
            .map(|g| (g.grade, g.target_arrow))
            .collect();
        assert_eq!(a, b, "arrow {arrow}");
    }
}

/// Source automorphism that flips two dual cycles: the dual-image theories
/// identify them while the dual cycle theory keeps them distinct.
#[test]
fn dual_image_merges_automorphism_translates() {
    let text = r#"{
        "format": 1,
        "objects": [
            { "id": "pt", "dim": 0, "smooth": true, "final": true },
            { "id": "Y", "dim": 1, "smooth": true },
            { "id": "W", "dim": 1, "smooth": true }
        ],
        "morphisms": [
            { "id": "id_pt", "src": "pt", "dst": "pt", "proper": true, "projective": true, "smooth": true },
            { "id": "id_Y", "src": "Y", "dst": "Y", "proper": true, "projective": true, "smooth": true },
            { "id": "id_W", "src": "W", "dst": "W", "proper": true, "projective": true, "smooth": true },
            { "id": "flip", "src": "Y", "dst": "Y", "proper": true, "projective": true, "smooth": true, "inverse": "flip" },
            { "id": "h1", "src": "Y", "dst": "W", "proper": true, "projective": true, "smooth": true },
            { "id": "h2", "src": "Y", "dst": "W", "proper": true, "projective": true, "smooth": true },
            { "id": "cY", "src": "Y", "dst": "pt", "proper": true, "projective": true, "smooth": true },
            { "id": "cW", "src": "W", "dst": "pt", "proper": true, "projective": true, "smooth": true }
        ],
        "composition": [
            ["id_pt", "id_pt", "id_pt"],
            ["id_Y", "id_Y", "id_Y"],
            ["id_W", "id_W", "id_W"],
            ["flip", "id_Y", "flip"], ["id_Y", "flip", "flip"],
            ["flip", "flip", "id_Y"],
            ["h1", "id_Y", "h1"], ["h2", "id_Y", "h2"],
            ["h1", "flip", "h2"], ["h2", "flip", "h1"],
            ["cY", "id_Y", "cY"], ["cY", "flip", "cY"],
            ["id_W", "h1", "h1"], ["id_W", "h2", "h2"],
            ["cW", "h1", "cY"], ["cW", "h2", "cY"],
            ["cW", "id_W", "cW"],
            ["id_pt", "cY", "cY"], ["id_pt", "cW", "cW"]
        ]
    }"#;
    let site = Arc::new(FiniteSite::load_str(text).unwrap());
    assert!(site.validate().is_empty(), "{:?}", site.validate());
    // four dual cycle classes on the identity arrow of Y
    let mp = Theory::mprime(site.clone());
    let classes = mp.generator_classes("id_Y").unwrap();
    assert_eq!(classes.len(), 4, "{classes:?}");
    // the dual-image theory merges the two automorphism translates
    let ob2 = build_ob2(site.clone(), 1, 0, GradeWindow::full()).unwrap();
    let gens = ob2.dual_generators("id_Y").unwrap();
    assert_eq!(gens.len(), 3, "{gens:?}");
    assert!(gens.iter().any(|g| g.target_arrow == "h1"));
    assert!(!gens.iter().any(|g| g.target_arrow == "h2"));
}

#[test]
fn relation_stability_ob1_point() {
    let site = point();
    let ob1 = build_ob1(site, 3, 1, GradeWindow::full()).unwrap();
    let report = check_relation_stability(&ob1).unwrap();
    assert!(report.checked > 0);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
}

#[test]
fn relation_stability_ob1_line() {
    let site = p1();
    let ob1 = build_ob1(site, 3, 1, GradeWindow::full()).unwrap();
    let report = check_relation_stability(&ob1).unwrap();
    assert!(report.checked > 0);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
}

#[test]
fn relation_stability_ob3_demo() {
    let site = dp_demo();
    let ob3 = build_ob3(site, GradeWindow::full()).unwrap();
    let report = check_relation_stability(&ob3).unwrap();
    assert!(report.checked > 0);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
}

#[test]
fn fundamental_class_requires_smooth_source() {
    let text = include_str!("../fixtures/p1.json").replace(
        r#"{ "id": "P1", "dim": 1, "smooth": true }"#,
        r#"{ "id": "P1", "dim": 1, "smooth": false }"#,
    );
    let site = Arc::new(FiniteSite::load_str(&text).unwrap());
    let m = Theory::m(site);
    assert!(matches!(
        fundamental_class(&m, "c"),
        Err(TheoryError::NonSmooth(_))
    ));
}

#[test]
fn trivial_bundle_chern_dies_in_quotient_only() {
    // appending the trivial bundle is a distinct formal entry in the raw
    // oriented theory; it becomes the zero operator in the quotient
    let site = point();
    let raw = Theory::ob(site.clone(), 1, GradeWindow::full());
    let fund = fundamental_class(&raw, "id_pt").unwrap();
    let e = Element::from_class("id_pt", fund);
    let appended = raw.chern(&[], &e).unwrap();
    assert!(!appended.is_zero());
    let ob1 = build_ob1(site, 2, 1, GradeWindow::full()).unwrap();
    assert!(ob1.is_zero(&appended).unwrap());

    let site = p1();
    let raw = Theory::ob(site.clone(), 1, GradeWindow::full());
    let fund = fundamental_class(&raw, "c").unwrap();
    let e = Element::from_class("c", fund);
    let appended = raw.chern(&[0], &e).unwrap();
    assert!(
        !appended.is_zero(),
        "distinct formal entry in the raw theory"
    );
    let ob1 = build_ob1(site, 2, 1, GradeWindow::full()).unwrap();
    assert!(ob1.is_zero(&appended).unwrap(), "unit-law consequence");
}

#[test]
fn axiom_suite_descends_to_quotient_kinds() {
    // the identities hold modulo the installed relations
    let site = point();
    let ob1 = build_ob1(site, 2, 1, GradeWindow::full()).unwrap();
    let report = obcalc::bivariant::axiom_suite(&ob1).unwrap();
    assert_eq!(report.total_failed(), 0, "{report:?}");
    let site = dp_demo();
    let ob3 = build_ob3(site, GradeWindow::full()).unwrap();
    let report = obcalc::bivariant::axiom_suite(&ob3).unwrap();
    assert_eq!(
        report.total_failed(),
        0,
        "{:?}",
        report
            .results
            .iter()
            .flat_map(|r| r.failures.clone())
            .collect::<Vec<_>>()
    );
}

#[test]
fn covariant_pushforwards_are_functorial() {
    use obcalc::bivariant::covariant_pushforward;
    let site = dp_demo();
    let ob3 = build_ob3(site.clone(), GradeWindow::full()).unwrap();
    // pushing the fiber components into the surface and on to the point
    // agrees with the direct structure pushforward
    let via_surface = covariant_pushforward(&ob3, "hE").unwrap();
    assert!(!via_surface.is_empty());
    for (class, image) in &via_surface {
        let onward = ob3.pushforward("cS", "id_pt", image).unwrap();
        let direct = ob3
            .pushforward("cE", "id_pt", &Element::from_class("cE", class.clone()))
            .unwrap();
        assert!(ob3.elements_equal(&onward, &direct).unwrap());
    }
}

#[test]
fn theories_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Theory>();
    assert_send_sync::<FiniteSite>();
}

#[test]
fn ob3_contravariant_part_restricts_to_smooth_maps() {
    // the degeneration legs into the surface are not smooth, so the
    // identity-arrow group keeps no double point relation there
    let site = dp_demo();
    let ob3 = build_ob3(site.clone(), GradeWindow::full()).unwrap();
    let m = Theory::m(site.clone());
    assert_eq!(
        ob3.group_invariants("id_S").unwrap(),
        m.group_invariants("id_S").unwrap()
    );
    let (set, rejected) = dp_relations(&m, "id_S").unwrap();
    assert!(set.is_empty());
    assert_eq!(rejected.len(), 1);
    assert!(rejected[0].reason.contains("not smooth"));
}

#[test]
fn quotient_builders_reject_invalid_sites() {
    let text = include_str!("../fixtures/p1.json").replace(
        r#"{ "id": "u", "src": "Z", "dst": "pt", "proper": true, "projective": true, "smooth": true }"#,
        r#"{ "id": "u", "src": "Z", "dst": "pt", "proper": false, "projective": true, "smooth": true }"#,
    );
    let site = Arc::new(FiniteSite::load_str(&text).unwrap());
    assert!(build_ob1(site.clone(), 2, 1, GradeWindow::full()).is_err());
    assert!(build_ob3(site, GradeWindow::full()).is_err());
}
