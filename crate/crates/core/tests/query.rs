use std::collections::BTreeSet;

use hetpeer::instance::*;
use hetpeer::query::*;
use hetpeer::schema::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

const Q1: &str =
    r#"FOR $A IN //Admission, $P IN //Patient[@ID=$A/@PatRef] WHERE $A/Problem="Coronary" AND $P/Treat/Date="12/25/2003" RETURN {$P/Name}"#;
const Q2: &str = "FOR $P IN //Progress, $Y IN //Pulmonary WHERE $Y/@ID=$P/@PatRef RETURN {$P/Symptom/Desc}";

fn mong() -> DtdGraph {
    parse_dtd(include_str!("../fixtures/mong.dtd")).unwrap()
}

fn fixture() -> XmlInstance {
    parse_instance(include_str!("../fixtures/hospital2.xml"), &mong()).unwrap()
}

// ---- tests ---------------------------------------------------------------------------

#[test]
fn q1_is_a_join_of_two_patterns() {
    let q = parse_query(Q1).unwrap();
    assert_eq!(q.patterns.len(), 2);
    assert_eq!(q.joins.len(), 1);
    let (a, b) = &q.joins[0];
    let tags: BTreeSet<String> = [a, b].iter().map(|v| q.node(v).unwrap().tag.to_string()).collect();
    assert_eq!(tags, BTreeSet::from(["@ID".to_string(), "@PatRef".to_string()]));
    assert_eq!(q.selection_count(), 2);
    assert_eq!(q.node(&q.returns[0]).unwrap().tag, TagTest::Name("Name".into()));
}

#[test]
fn q2_is_a_join_of_two_patterns() {
    let q = parse_query(Q2).unwrap();
    assert_eq!(q.patterns.len(), 2);
    assert_eq!(q.joins.len(), 1);
    assert_eq!(q.node(&q.returns[0]).unwrap().tag, TagTest::Name("Desc".into()));
}

#[test]
fn simple_path() {
    let q = parse_query("//Patient/Name").unwrap();
    assert_eq!(q.patterns.len(), 1);
    assert_eq!(q.vars().len(), 2);
    assert_eq!(print_query(&q), "//Patient/Name");
    let root_only = parse_query("//MonGenHosp").unwrap();
    assert_eq!(print_query(&root_only), "//MonGenHosp");
}

#[test]
fn printing_round_trips_worked_queries() {
    for text in [
        Q1,
        Q2,
        "//Coronary[@ID]/Name",
        "//Coronary/@ID",
        "FOR $P IN //Patient, $T IN $P/Treat WHERE $T/Date>'1' AND $T/Desc='x' RETURN {$P/Name, $T/Doc}",
    ] {
        let q = parse_query(text).unwrap();
        let printed = print_query(&q);
        let again = parse_query(&printed).unwrap();
        assert_eq!(canonical_query(&again), canonical_query(&q), "{printed}");
        assert_eq!(print_query(&again), printed);
    }
    let q = parse_query(Q1).unwrap();
    assert_eq!(
        print_query(&q),
        "FOR $A IN //Admission, $P IN //Patient[@ID=$A/@PatRef] WHERE $A/Problem='Coronary' AND $P/Treat/Date='12/25/2003' RETURN {$P/Name}"
    );
}

#[test]
fn unsupported_features_are_rejected() {
    for text in [
        "FOR $P IN //Patient WHERE not($P/Name='a') RETURN {$P}",
        "FOR $P IN //Patient WHERE $P/Name='a' OR $P/Name='b' RETURN {$P}",
        "FOR $P IN //Patient RETURN {count($P)}",
        "//Patient | //Admission",
    ] {
        assert!(matches!(parse_query(text), Err(QueryError::UnsupportedFeature(_))), "{text}");
    }
    assert!(matches!(parse_query("FOR $P IN //Patient RETURN {$Q}"), Err(QueryError::Syntax { .. })));
    assert!(matches!(parse_query("//Patient/@ID/Name"), Err(QueryError::Syntax { .. })));
}

#[test]
fn union_parsing_and_printing() {
    let u = parse_union("//Coronary/@ID UNION //Pulmonary/@ID").unwrap();
    assert_eq!(u.len(), 2);
    assert_eq!(print_union(&u), "//Coronary/@ID UNION //Pulmonary/@ID");
}

#[test]
fn q1_on_fixture() {
    let d = fixture();
    let got = evaluate(&parse_query(Q1).unwrap(), &d);
    assert_eq!(got, AnswerSet::from([vec!["Ada Byron".to_string()]]));
    assert_eq!(got, oracle(&parse_query(Q1).unwrap(), &d));
}

#[test]
fn coronary_ids_on_exchanged_fixture() {
    // The exchanged instance lacks unmapped required elements, so it is read unvalidated.
    let d = read_instance(include_str!("../fixtures/hospital2.masg.xml")).unwrap();
    let q = parse_query("//Coronary/@ID").unwrap();
    assert_eq!(evaluate(&q, &d), AnswerSet::from([vec!["p5".to_string()]]));
    assert_eq!(evaluate(&q, &d), oracle(&q, &d));
}

#[test]
fn empty_instance_has_no_answers() {
    let d = XmlInstance::empty("MonGenHosp");
    assert!(evaluate(&parse_query(Q1).unwrap(), &d).is_empty());
}

#[test]
fn internal_nodes_answer_with_subtrees() {
    let d = fixture();
    let q = parse_query("FOR $P IN //Patient WHERE $P/@ID='p5' RETURN {$P/Hist/Event}").unwrap();
    let got = evaluate(&q, &d);
    assert_eq!(got, AnswerSet::from([vec!["<Event><Date>12/20/2003</Date><Problem>chest pain</Problem></Event>".to_string()]]));
}

#[test]
fn comparisons() {
    assert!(CmpOp::Lt.holds("9", "10"));
    assert!(!CmpOp::Lt.holds("b", "a"));
    assert!(CmpOp::Lt.holds("10", "9x"));
    assert!(!CmpOp::Eq.holds("1.0", "1"));
    assert!(CmpOp::Ge.holds("2.0", "2"));
}

#[test]
fn wildcard_skips_attributes() {
    let d = fixture();
    let q = parse_query("FOR $P IN //Patient WHERE $P/@ID='p9' RETURN {$P/*}").unwrap();
    let got = evaluate(&q, &d);
    assert_eq!(got.len(), 4, "{got:?}");
    assert!(got.iter().all(|t| t[0] != "p9"));
}

#[test]
fn descendant_axis_is_proper() {
    let d = fixture();
    let q = parse_query("FOR $X IN //Hist, $Y IN $X//Hist RETURN {$Y}").unwrap();
    assert!(evaluate(&q, &d).is_empty());
    let all = parse_query("//MonGenHosp").unwrap();
    assert_eq!(evaluate(&all, &d).len(), 1);
    let none = parse_query("/Patient").unwrap();
    assert!(evaluate(&none, &d).is_empty());
}

#[test]
fn evaluator_matches_exhaustive_enumeration() {
    let g = mong();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..50 {
        let q = random_query(&g, &mut rng);
        let d = small_instance(&g, 1000 + k);
        assert!(d.len() <= 50);
        assert_eq!(evaluate(&q, &d), oracle(&q, &d), "{}", print_query(&q));
    }
}

fn weaken(q: &TpQuery, rng: &mut ChaCha8Rng) -> TpQuery {
    let mut w = q.clone();
    for p in &mut w.patterns {
        p.root.for_each_mut(&mut |n| {
            for (ax, _) in &mut n.children {
                if rng.gen_bool(0.5) {
                    *ax = Axis::Descendant;
                }
            }
        });
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_parse_round_trip(seed in 0u64..100_000) {
        let g = mong();
        let q = random_query(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let printed = print_query(&q);
        let again = parse_query(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert_eq!(canonical_query(&again), canonical_query(&q), "{}", printed);
    }

    #[test]
    fn axis_weakening_never_shrinks(seed in 0u64..100_000) {
        let g = mong();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_query(&g, &mut rng);
        let d = small_instance(&g, seed);
        let w = weaken(&q, &mut rng);
        prop_assert!(evaluate(&q, &d).is_subset(&evaluate(&w, &d)));
    }

    #[test]
    fn joins_commute(seed in 0u64..100_000) {
        let g = mong();
        let q = random_query(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let d = small_instance(&g, seed);
        let mut r = q.clone();
        r.patterns.reverse();
        r.joins = r.joins.iter().map(|(a, b)| (b.clone(), a.clone())).rev().collect();
        prop_assert_eq!(evaluate(&q, &d), evaluate(&r, &d));
    }
}
