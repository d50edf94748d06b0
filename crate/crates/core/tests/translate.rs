use std::collections::BTreeSet;

use hetpeer::instance::*;
use hetpeer::mapping::*;
use hetpeer::query::*;
use hetpeer::schema::*;
use hetpeer::translate::*;
use hetpeer::verify::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::oracle;

const Q1: &str =
    r#"FOR $A IN //Admission, $P IN //Patient[@ID=$A/@PatRef] WHERE $A/Problem="Coronary" AND $P/Treat/Date="12/25/2003" RETURN {$P/Name}"#;
const Q2: &str = "FOR $P IN //Progress, $Y IN //Pulmonary WHERE $Y/@ID=$P/@PatRef RETURN {$P/Symptom/Desc}";

fn hospital() -> MappingContext {
    let s = parse_dtd(include_str!("../fixtures/mong.dtd")).unwrap();
    let t = parse_dtd(include_str!("../fixtures/masg.dtd")).unwrap();
    let c = parse_correspondences(include_str!("../fixtures/hospital.corr"), &s, &t).unwrap();
    let rules = infer_rules(&s, &t, &c).mapping_rules();
    MappingContext::new(s, t, rules)
}

fn suite(text: &str) -> Vec<TpQuery> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_query(l).unwrap_or_else(|e| panic!("{l}: {e}")))
        .collect()
}

fn union_oracle(qs: &[TpQuery], d: &XmlInstance) -> AnswerSet {
    qs.iter().flat_map(|q| oracle(q, d)).collect()
}

/// Source instances paired with their exchanged images.
fn samples(ctx: &MappingContext, queries: &[&TpQuery], n: usize, seed: u64) -> Vec<(XmlInstance, XmlInstance)> {
    let cfg = VerifyConfig { instances: n, seed, ..VerifyConfig::default() };
    let params = params_for(ctx, &cfg.params, queries);
    sample(ctx, &cfg, &params)
}

/// Checks a translation against the exhaustive evaluator. Returns how many instances had
/// answers to the original query.
fn oracle_check(q: &TpQuery, t: &Translation, dir: Direction, data: &[(XmlInstance, XmlInstance)]) -> usize {
    let mut nonempty = 0;
    for (d, md) in data {
        match dir {
            Direction::Backward => {
                let want = oracle(q, md);
                let got = union_oracle(&t.queries(), d);
                assert_eq!(got, want, "{} vs {}\n{}", print_query(q), t.text(), d.to_xml());
                assert_eq!(union_oracle(&t.uncontracted(), d), got, "contraction of {}", t.text());
                nonempty += usize::from(!want.is_empty());
            }
            Direction::Forward => {
                let want = oracle(q, d);
                let got = union_oracle(&t.queries(), md);
                assert!(got.is_subset(&want), "{} vs {}\n{}", print_query(q), t.text(), d.to_xml());
                assert_eq!(union_oracle(&t.uncontracted(), md), got, "contraction of {}", t.text());
                nonempty += usize::from(!want.is_empty());
            }
        }
    }
    nonempty
}

#[test]
fn q1_forward_stitches_coronary_and_progress() {
    let ctx = hospital();
    let t = translate(&parse_query(Q1).unwrap(), &ctx, Direction::Forward).unwrap();
    assert_eq!(t.text(), "FOR $C IN //Coronary, $P IN //Progress[@PatRef=$C/@ID] WHERE $P/Treatment/Date='12/25/2003' RETURN {$C/Patient}");
    assert_eq!(t.trace.contracted_stages(0), vec!["//Coronary/@ID", "//Progress/@PatRef"]);
    assert_eq!(t.trace.contracted_stages(1), vec!["//Coronary[@ID]/Patient"]);
}

#[test]
fn q2_backward_returns_the_event_problems() {
    let ctx = hospital();
    let t = translate(&parse_query(Q2).unwrap(), &ctx, Direction::Backward).unwrap();
    assert_eq!(t.text(), "FOR $P IN //Patient, $A IN //Admission[@PatRef=$P/@ID] WHERE $A/Problem='Pulmonary' RETURN {$P//Problem}");
}

#[test]
fn single_path_translations() {
    let ctx = hospital();
    let cases = [
        (Direction::Forward, "//Patient/Name", "//Admission/*/Patient"),
        (Direction::Forward, "//Treat/Desc", "//Treatment/Desc"),
        (Direction::Forward, "//Admission[Problem='Pulmonary']/AdmDate", "//Pulmonary/Enter"),
        (
            Direction::Backward,
            "//Coronary/@ID",
            "FOR $P IN //Patient, $I IN $P/@ID, $A IN //Admission[@PatRef=$I] WHERE $A/Problem='Coronary' RETURN {$I}",
        ),
    ];
    for (dir, q, want) in cases {
        let t = translate(&parse_query(q).unwrap(), &ctx, dir).unwrap();
        assert_eq!(t.text(), want, "{dir} {q}");
    }
}

#[test]
fn suites_cover_the_required_shapes() {
    for (text, dir) in [
        (include_str!("../fixtures/queries/forward.txt"), Direction::Forward),
        (include_str!("../fixtures/queries/backward.txt"), Direction::Backward),
    ] {
        let qs = suite(text);
        assert!(qs.len() >= 10, "{dir}");
        let joins: BTreeSet<usize> = qs.iter().map(|q| q.joins.len()).collect();
        let sels: BTreeSet<usize> = qs.iter().map(|q| q.selection_count()).collect();
        assert!((0..=3).all(|k| joins.contains(&k)), "{dir} joins {joins:?}");
        assert!((0..=2).all(|k| sels.contains(&k)), "{dir} selections {sels:?}");
    }
}

#[test]
fn suites_agree_with_the_exhaustive_evaluator() {
    let ctx = hospital();
    for (text, dir) in [
        (include_str!("../fixtures/queries/forward.txt"), Direction::Forward),
        (include_str!("../fixtures/queries/backward.txt"), Direction::Backward),
    ] {
        for q in suite(text) {
            let t = translate(&q, &ctx, dir).unwrap_or_else(|e| panic!("{}: {e}", print_query(&q)));
            let translated = t.queries();
            let mut qs = vec![&q];
            qs.extend(translated.iter());
            let data = samples(&ctx, &qs, 100, 11);
            let nonempty = oracle_check(&q, &t, dir, &data);
            assert!(nonempty > 0, "{} never has answers", print_query(&q));
        }
    }
}

#[test]
fn printed_translations_parse_back_to_the_same_answers() {
    let ctx = hospital();
    for (text, dir) in [
        (include_str!("../fixtures/queries/forward.txt"), Direction::Forward),
        (include_str!("../fixtures/queries/backward.txt"), Direction::Backward),
    ] {
        for q in suite(text) {
            let t = translate(&q, &ctx, dir).unwrap();
            let reparsed = parse_union(&t.text()).unwrap();
            let data = samples(&ctx, &[&q], 15, 5);
            for (d, md) in &data {
                let on = if dir == Direction::Backward { d } else { md };
                assert_eq!(union_oracle(&reparsed, on), union_oracle(&t.queries(), on), "{}", t.text());
            }
        }
    }
}

#[test]
fn element_returns_are_untranslatable() {
    let ctx = hospital();
    for (dir, q) in [(Direction::Backward, "//Admission/Coronary"), (Direction::Forward, "//Patient")] {
        let err = translate(&parse_query(q).unwrap(), &ctx, dir).unwrap_err();
        assert!(matches!(err, TranslateError::Untranslatable(_)), "{q}: {err}");
    }
}

#[test]
fn unmapped_conditions_are_untranslatable() {
    let ctx = hospital();
    let cases = [
        (Direction::Forward, "FOR $P IN //Patient WHERE $P/Treat/Doc='Doc1' RETURN {$P/Name}"),
        (Direction::Forward, "//Patient/Treat/Doc"),
        (Direction::Backward, "//Coronary[InsName='x']/Patient"),
    ];
    for (dir, q) in cases {
        let err = translate(&parse_query(q).unwrap(), &ctx, dir).unwrap_err();
        assert!(matches!(err, TranslateError::Untranslatable(_)), "{q}: {err}");
    }
}

#[test]
fn queries_off_the_schema_are_rejected() {
    let ctx = hospital();
    let q = parse_query("//Patient/Hist/Event/Desc").unwrap();
    assert!(translate(&q, &ctx, Direction::Forward).is_err());
    let conflict = parse_query("//Patient[Name='a'][Name='b']/Name").unwrap();
    // one Name per patient, so no instance satisfies both selections
    assert!(translate(&conflict, &ctx, Direction::Forward).is_err());
}

#[test]
fn compared_box_tags_expand_to_the_matching_tags() {
    let ctx = hospital();
    let t = translate(&parse_query("//Admission[Problem>'D']/DisDate").unwrap(), &ctx, Direction::Forward).unwrap();
    assert_eq!(t.text(), "//Pulmonary/Leave");
    let t = translate(&parse_query("//Admission[Problem!='x']/DisDate").unwrap(), &ctx, Direction::Forward).unwrap();
    let got: BTreeSet<String> = t.queries().iter().map(print_query).collect();
    assert_eq!(got, BTreeSet::from(["//Coronary/Leave".to_string(), "//Pulmonary/Leave".to_string()]));
}

#[test]
fn backward_trace_names_the_hosting_rules() {
    let ctx = hospital();
    let t = translate(&parse_query(Q2).unwrap(), &ctx, Direction::Backward).unwrap();
    assert!(t.render_trace().contains("result: "));
    assert!(!t.trace.notes.is_empty());
}

// ---- random queries ----------------------------------------------------------------

fn checked_random(ctx: &MappingContext, dir: Direction, seed: u64) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = common::random_query(ctx.input_schema(dir), &mut rng);
    let t = translate(&q, ctx, dir).ok()?;
    let translated = t.queries();
    let mut qs = vec![&q];
    qs.extend(translated.iter());
    let data = samples(ctx, &qs, 6, seed);
    Some(oracle_check(&q, &t, dir, &data))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn random_backward_translations_are_exact(seed in 0u64..10_000) {
        let ctx = hospital();
        checked_random(&ctx, Direction::Backward, seed);
    }

    #[test]
    fn random_forward_translations_are_contained(seed in 0u64..10_000) {
        let ctx = hospital();
        checked_random(&ctx, Direction::Forward, seed);
    }
}

#[test]
fn random_queries_often_translate() {
    let ctx = hospital();
    for dir in [Direction::Forward, Direction::Backward] {
        let ok = (0..60).filter(|&s| checked_random(&ctx, dir, 1000 + s).is_some()).count();
        assert!(ok >= 10, "{dir}: {ok}/60 translated");
    }
}
