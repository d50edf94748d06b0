use std::collections::BTreeSet;

use hetpeer::mapping::*;
use hetpeer::schema::*;
use proptest::prelude::*;

fn hospital() -> (DtdGraph, DtdGraph, CorrespondenceSet) {
    let s = parse_dtd(include_str!("../fixtures/mong.dtd")).unwrap();
    let t = parse_dtd(include_str!("../fixtures/masg.dtd")).unwrap();
    let c = parse_correspondences(include_str!("../fixtures/hospital.corr"), &s, &t).unwrap();
    (s, t, c)
}

fn names(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn group_sets(groups: &[Group], g: &DtdGraph, boxes: &[BoxDecl]) -> BTreeSet<BTreeSet<String>> {
    groups.iter().map(|gr| gr.qualified_names(g, boxes)).collect()
}

#[test]
fn source_groups() {
    let (s, _, _) = hospital();
    let got = group_sets(&detect_groups(&s, &[], Side::Source), &s, &[]);
    let want: BTreeSet<_> = [
        names(&["MonGenHosp", "Patient", "Hist", "Event", "Event_Problem", "Event_Date"]),
        names(&["MonGenHosp", "Patient", "Treat", "Treat_Date", "Desc", "Doc"]),
        names(&["MonGenHosp", "Admission", "Admission_Problem", "AdmDate", "DisDate", "@PatRef"]),
        names(&["MonGenHosp", "Patient", "@ID", "MedCr#", "Name"]),
    ]
    .into();
    assert_eq!(got, want);
}

#[test]
fn target_groups() {
    let (_, t, c) = hospital();
    let got = group_sets(&detect_groups(&t, &c.boxes, Side::Target), &t, &c.boxes);
    let want: BTreeSet<_> = [
        names(&["MassGeneral", "Admission", "Pulmonary", "Coronary", "@ID", "InsName", "Policy#", "Enter", "Leave", "Patient"]),
        names(&["MassGeneral", "Progress", "Symptom", "Symptom_Date", "Symptom_Desc"]),
        names(&["MassGeneral", "Progress", "Treatment", "Treatment_Date", "Treatment_Desc"]),
        names(&["MassGeneral", "Progress", "@PatRef"]),
    ]
    .into();
    assert_eq!(got, want);
}

#[test]
fn groups_cover_every_position() {
    let (s, t, c) = hospital();
    for (g, boxes, side) in [(&s, &[][..], Side::Source), (&t, &c.boxes[..], Side::Target)] {
        let groups = detect_groups(g, boxes, side);
        for n in g.node_ids() {
            let covered = groups.iter().any(|gr| gr.members.iter().any(|p| p.last() == Some(&n)));
            assert!(covered, "{} not in any group", g.tag(n));
        }
    }
}

#[test]
fn connected_group_pairs() {
    let (s, t, c) = hospital();
    let inf = infer_rules(&s, &t, &c);
    let label = |i: usize, j: usize| (inf.source_groups[i].qualified_names(&s, &[]), inf.target_groups[j].qualified_names(&t, &c.boxes));
    let got: BTreeSet<(BTreeSet<String>, BTreeSet<String>)> = inf.pairs.iter().map(|&(i, j)| label(i, j)).collect();
    let key = |src: &str, tgt: &str| {
        let sg = inf.source_groups.iter().find(|g| g.qualified_names(&s, &[]).contains(src)).unwrap();
        let tg = inf.target_groups.iter().find(|g| g.qualified_names(&t, &c.boxes).contains(tgt)).unwrap();
        (sg.qualified_names(&s, &[]), tg.qualified_names(&t, &c.boxes))
    };
    let want: BTreeSet<_> = [
        key("Admission_Problem", "Enter"),
        key("MedCr#", "Enter"),
        key("Event", "Symptom"),
        key("Treat", "Treatment"),
        key("Admission_Problem", "@PatRef"),
    ]
    .into();
    assert_eq!(got, want);
}

#[test]
fn inferred_rules_match_golden_rules() {
    let (s, t, c) = hospital();
    let inf = infer_rules(&s, &t, &c);
    assert!(inf.warnings.is_empty(), "{:?}", inf.warnings);
    let gold = parse_rules(include_str!("../fixtures/hospital.rules.golden")).unwrap();
    let mut got: Vec<String> = inf.mapping_rules().iter().map(canonical_rule).collect();
    let mut want: Vec<String> = gold.iter().map(canonical_rule).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn inferred_rules_are_safe_and_round_trip() {
    let (s, t, c) = hospital();
    let rules = infer_rules(&s, &t, &c).mapping_rules();
    for r in &rules {
        assert!(r.is_safe(), "unsafe: {:?}", r.unsafe_vars());
    }
    let text = serialize_rules(&rules);
    assert_eq!(parse_rules(&text).unwrap(), rules);
}

#[test]
fn symptom_rule_draws_on_three_source_groups() {
    let (s, t, c) = hospital();
    let inf = infer_rules(&s, &t, &c);
    let r = inf.rules.iter().find(|r| r.rule.head.preorder().iter().any(|e| e.tag == ExprTag::Name("Symptom".into()))).unwrap();
    assert_eq!(r.source_groups.len(), 3);
    assert_eq!(r.intermediate.body.len(), 3);
}

#[test]
fn box_rule_uses_text_tag() {
    let (s, t, c) = hospital();
    let inf = infer_rules(&s, &t, &c);
    let boxed = inf.mapping_rules().into_iter().find(|r| r.head.preorder().iter().any(|e| matches!(e.tag, ExprTag::TextOf(_))));
    assert!(boxed.is_some());
}

#[test]
fn dtd_round_trip() {
    let (s, t, _) = hospital();
    for g in [s, t] {
        let again = parse_dtd(&serialize_dtd(&g)).unwrap();
        assert_eq!(serialize_dtd(&again), serialize_dtd(&g));
        assert_eq!(again.nodes.len(), g.nodes.len());
        assert_eq!(again.links.len(), g.links.len());
    }
}

#[test]
fn dtd_paths_between_nodes() {
    let (s, _, _) = hospital();
    let root = s.root;
    let problem = s.lookup("Problem").unwrap();
    let got = dtd_paths(&s, root, problem);
    let want: BTreeSet<LabelPath> =
        [vec!["Patient".to_string(), "Hist".into(), "Event".into(), "Problem".into()], vec!["Admission".to_string(), "Problem".into()]]
            .into();
    assert_eq!(got, want);
}

#[test]
fn ambiguous_arrow_rejected() {
    let (s, t, _) = hospital();
    let err = parse_correspondences("ARROW Date -> Enter\n", &s, &t).unwrap_err();
    assert!(matches!(err, CorrError::AmbiguousArrow { line: 1, .. }));
    let err = parse_correspondences("ARROW Name -> Nope\n", &s, &t).unwrap_err();
    assert!(matches!(err, CorrError::UnknownNode { .. }));
}

fn arb_var() -> impl Strategy<Value = String> {
    "[A-Z][a-z0-9]{0,3}"
}

fn arb_expr(depth: u32) -> BoxedStrategy<TreeExpr> {
    let tag = prop_oneof![
        "[A-Z][A-Za-z#_]{0,6}".prop_map(ExprTag::Name),
        "@[A-Za-z]{1,5}".prop_map(ExprTag::Name),
        arb_var().prop_map(ExprTag::Var),
        arb_var().prop_map(ExprTag::TextOf),
    ];
    let term = (arb_var(), any::<bool>()).prop_map(|(var, text)| Term { var, text });
    let id = prop_oneof![
        arb_var().prop_map(ExprId::Var),
        ("f[0-9]", prop::collection::vec(term, 1..4)).prop_map(|(functor, args)| ExprId::Skolem(SkolemTerm { functor, args })),
        Just(ExprId::Unknown),
    ];
    if depth == 0 {
        (tag, id).prop_map(|(tag, id)| TreeExpr { tag, id, children: vec![] }).boxed()
    } else {
        (tag, id, prop::collection::vec(arb_expr(depth - 1), 0..3)).prop_map(|(tag, id, children)| TreeExpr { tag, id, children }).boxed()
    }
}

fn arb_rule() -> impl Strategy<Value = MappingRule> {
    let eq = (arb_var(), any::<bool>(), arb_var(), any::<bool>())
        .prop_map(|(a, at, b, bt)| Equality { left: Term { var: a, text: at }, right: Term { var: b, text: bt } });
    (arb_expr(3), prop::collection::vec(arb_expr(2), 1..3), prop::collection::vec(eq, 0..3))
        .prop_map(|(head, body, predicates)| MappingRule { head, body, predicates })
}

proptest! {
    #[test]
    fn rule_text_round_trips(rules in prop::collection::vec(arb_rule(), 1..4)) {
        let text = serialize_rules(&rules);
        prop_assert_eq!(parse_rules(&text).unwrap(), rules);
    }

    #[test]
    fn canonical_form_ignores_variable_names(rule in arb_rule(), suffix in "[a-z]{1,3}") {
        let rename = |v: &str| format!("Q{suffix}{v}");
        fn walk(e: &mut TreeExpr, f: &dyn Fn(&str) -> String) {
            match &mut e.tag { ExprTag::Var(v) | ExprTag::TextOf(v) => *v = f(v), _ => {} }
            match &mut e.id {
                ExprId::Var(v) => *v = f(v),
                ExprId::Skolem(s) => { for t in &mut s.args { t.var = f(&t.var); } s.functor = format!("g{}", s.functor); }
                ExprId::Unknown => {}
            }
            for c in &mut e.children { walk(c, f); }
        }
        let mut renamed = rule.clone();
        walk(&mut renamed.head, &rename);
        for b in &mut renamed.body { walk(b, &rename); }
        for p in &mut renamed.predicates { p.left.var = rename(&p.left.var); p.right.var = rename(&p.right.var); }
        prop_assert_eq!(canonical_rule(&rule).replace(&format!("Q{suffix}"), ""), canonical_rule(&renamed).replace(&format!("Q{suffix}"), ""));
    }
}
