use std::collections::{BTreeMap, BTreeSet};

use hetpeer::instance::*;
use hetpeer::mapping::*;
use hetpeer::schema::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    src: DtdGraph,
    rules: Vec<MappingRule>,
}

fn fixture() -> Fixture {
    let src = parse_dtd(include_str!("../fixtures/mong.dtd")).unwrap();
    let tgt = parse_dtd(include_str!("../fixtures/masg.dtd")).unwrap();
    let corr = parse_correspondences(include_str!("../fixtures/hospital.corr"), &src, &tgt).unwrap();
    let rules = infer_rules(&src, &tgt, &corr).mapping_rules();
    Fixture { src, rules }
}

fn two_patients(src: &DtdGraph) -> XmlInstance {
    parse_instance(include_str!("../fixtures/hospital2.xml"), src).unwrap()
}

// ---- brute-force oracles -------------------------------------------------------------

/// Value of a node as seen by predicates and Skolem arguments.
fn oracle_value(d: &XmlInstance, i: usize) -> String {
    match d.value(i) {
        Some(v) => format!("t:{}", v.render()),
        None => format!("n:{i}"),
    }
}

/// Every assignment of instance nodes to body variables, checked after the fact.
fn brute_force_matches(rule: &MappingRule, d: &XmlInstance) -> BTreeSet<BTreeMap<String, usize>> {
    let Some(root) = d.root() else { return BTreeSet::new() };
    // (var, tag, parent var)
    let mut vars: Vec<(String, String, Option<String>)> = Vec::new();
    fn collect(e: &TreeExpr, parent: Option<&str>, out: &mut Vec<(String, String, Option<String>)>) {
        let ExprId::Var(v) = &e.id else { panic!("body ids are variables") };
        let ExprTag::Name(t) = &e.tag else { panic!("body tags are names") };
        if !out.iter().any(|(x, _, _)| x == v) {
            out.push((v.clone(), t.clone(), parent.map(str::to_string)));
        }
        for c in &e.children {
            collect(c, Some(v), out);
        }
    }
    for b in &rule.body {
        collect(b, None, &mut vars);
    }
    // Variables are listed parent-first, so each one only ranges over the node table
    // entries whose parent is the node already chosen for its parent variable.
    let mut out = BTreeSet::new();
    fn go(
        k: usize,
        vars: &[(String, String, Option<String>)],
        d: &XmlInstance,
        root: usize,
        rule: &MappingRule,
        asg: &mut BTreeMap<String, usize>,
        out: &mut BTreeSet<BTreeMap<String, usize>>,
    ) {
        if k == vars.len() {
            if rule.predicates.iter().all(|e| oracle_value(d, asg[&e.left.var]) == oracle_value(d, asg[&e.right.var])) {
                out.insert(asg.clone());
            }
            return;
        }
        let (v, t, p) = &vars[k];
        for i in 0..d.len() {
            let placed = match p {
                Some(p) => d.node(i).parent == Some(asg[p]),
                None => i == root,
            };
            if d.tag(i) == t && placed {
                asg.insert(v.clone(), i);
                go(k + 1, vars, d, root, rule, asg, out);
                asg.remove(v);
            }
        }
    }
    go(0, &vars, d, root, rule, &mut BTreeMap::new(), &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct OTree {
    tag: String,
    id: String,
    value: Option<String>,
    children: Vec<OTree>,
}

fn materialize(e: &TreeExpr, asg: &BTreeMap<String, usize>, d: &XmlInstance) -> OTree {
    let tag = match &e.tag {
        ExprTag::Name(n) => n.clone(),
        ExprTag::Var(v) | ExprTag::TextOf(v) => d.value(asg[v]).unwrap().render(),
    };
    let (id, value) = match &e.id {
        ExprId::Skolem(s) => {
            let args: Vec<String> = s.args.iter().map(|a| oracle_value(d, asg[&a.var])).collect();
            (format!("{}({})", s.functor, args.join(",")), None)
        }
        ExprId::Var(v) => {
            let i = asg[v];
            let id = if tag.starts_with('@') { oracle_value(d, i) } else { format!("src{i}") };
            (id, if e.children.is_empty() { d.value(i).map(|v| v.render()) } else { None })
        }
        ExprId::Unknown => panic!("head without id"),
    };
    OTree { tag, id, value, children: e.children.iter().map(|c| materialize(c, asg, d)).collect() }
}

/// Merges a forest until no two siblings share tag and id.
fn glue(forest: Vec<OTree>) -> Vec<OTree> {
    let mut groups: BTreeMap<(String, String), OTree> = BTreeMap::new();
    for t in forest {
        groups.entry((t.tag.clone(), t.id.clone())).and_modify(|g| g.children.extend(t.children.clone())).or_insert(t);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.children = glue(std::mem::take(&mut g.children));
            g
        })
        .collect()
}

fn to_instance(forest: &[OTree]) -> XmlInstance {
    let mut inst = XmlInstance::empty("oracle");
    fn add(inst: &mut XmlInstance, t: &OTree, parent: Option<usize>) {
        let me = inst.add(parent, &t.tag, NodeIdValue::Source(0), t.value.clone().map(Value::Text));
        for c in &t.children {
            add(inst, c, Some(me));
        }
    }
    assert!(forest.len() <= 1, "oracle produced several roots");
    for t in forest {
        add(&mut inst, t, None);
    }
    inst
}

fn chase_oracle(rules: &[MappingRule], d: &XmlInstance) -> XmlInstance {
    let mut forest = Vec::new();
    for r in rules {
        for asg in brute_force_matches(r, d) {
            forest.push(materialize(&r.head, &asg, d));
        }
    }
    to_instance(&glue(forest))
}

fn engine_matches(rule: &MappingRule, d: &XmlInstance, src: &DtdGraph) -> BTreeSet<BTreeMap<String, usize>> {
    match_body(rule, d, src)
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(k, b)| match b {
                    Binding::Node(i) => (k, i),
                    Binding::Null(_) => panic!("no optional edges in this schema"),
                })
                .collect()
        })
        .collect()
}

fn rule_with(rules: &[MappingRule], tag: &str) -> MappingRule {
    rules.iter().find(|r| r.head.preorder().iter().any(|e| e.tag == ExprTag::Name(tag.into()))).cloned().unwrap()
}

// ---- tests ---------------------------------------------------------------------------

#[test]
fn fixture_passes_an_independent_conformance_check() {
    let f = fixture();
    let d = two_patients(&f.src);
    for i in d.preorder() {
        let n = d.node(i);
        let sn = f.src.lookup(&n.tag).unwrap();
        for e in f.src.children(sn) {
            let k = n.children.iter().filter(|&&c| d.tag(c) == f.src.tag(e.child)).count();
            let ok = match e.card {
                Cardinality::One => k == 1,
                Cardinality::Optional => k <= 1,
                Cardinality::Star => true,
                Cardinality::Plus => k >= 1,
            };
            assert!(ok, "{} under {}", f.src.tag(e.child), n.tag);
        }
    }
    assert_eq!(d.count_tag("Patient"), 2);
    assert_eq!(d.count_tag("Admission"), 2);
}

#[test]
fn match_body_agrees_with_brute_force() {
    let f = fixture();
    let d = two_patients(&f.src);
    for r in &f.rules {
        assert_eq!(engine_matches(r, &d, &f.src), brute_force_matches(r, &d));
    }
}

#[test]
fn admission_rule_on_single_patient() {
    let f = fixture();
    let doc = r#"<MonGenHosp><Patient ID="p1"><MedCr#>1</MedCr#><Name>a</Name><Hist/></Patient>
        <Admission PatRef="p1"><Problem>Coronary</Problem><AdmDate>x</AdmDate><DisDate>y</DisDate></Admission></MonGenHosp>"#;
    let d = parse_instance(doc, &f.src).unwrap();
    let boxed = f.rules.iter().find(|r| r.head.preorder().iter().any(|e| matches!(e.tag, ExprTag::TextOf(_)))).unwrap();
    assert_eq!(match_body(boxed, &d, &f.src).len(), 1);
    let dangling = doc.replace("PatRef=\"p1\"", "PatRef=\"p2\"");
    let d = parse_instance(&dangling, &f.src).unwrap();
    assert_eq!(match_body(boxed, &d, &f.src).len(), 0);
}

#[test]
fn treatment_rule_matches_each_treat() {
    let f = fixture();
    let d = two_patients(&f.src);
    let r = rule_with(&f.rules, "Treatment");
    let p5: Vec<_> = match_body(&r, &d, &f.src)
        .into_iter()
        .filter(|s| matches!(s.get("ID"), Some(Binding::Node(i)) if d.value(*i).unwrap().render() == "p5"))
        .collect();
    assert_eq!(p5.len(), 2);
}

#[test]
fn progress_nodes_are_glued() {
    let f = fixture();
    let d = two_patients(&f.src);
    let out = apply_rules(&f.rules, &d, &f.src).unwrap();
    let progress: Vec<usize> = out.preorder().into_iter().filter(|&i| out.tag(i) == "Progress").collect();
    assert_eq!(progress.len(), 2);
    let p5 = progress
        .iter()
        .copied()
        .find(|&p| out.children(p).iter().any(|&c| out.tag(c) == "@PatRef" && out.value(c).unwrap().render() == "p5"))
        .unwrap();
    let kids = |t: &str| out.children(p5).iter().filter(|&&c| out.tag(c) == t).count();
    assert_eq!(kids("Symptom"), 1);
    assert_eq!(kids("Treatment"), 2);
    assert!(matches!(&out.node(p5).id, NodeIdValue::Skolem { args, .. } if args == &[Ground::Text("p5".into())]));
}

#[test]
fn exchange_matches_chase_oracle_on_fixture() {
    let f = fixture();
    let d = two_patients(&f.src);
    let out = apply_rules(&f.rules, &d, &f.src).unwrap();
    assert_eq!(out.to_xml(), chase_oracle(&f.rules, &d).to_xml());
    let golden = include_str!("../fixtures/hospital2.masg.xml");
    assert_eq!(out.to_xml(), golden);
}

#[test]
fn empty_source_gives_empty_output() {
    let f = fixture();
    let d = parse_instance("<MonGenHosp/>", &f.src).unwrap();
    let out = apply_rules(&f.rules, &d, &f.src).unwrap();
    assert!(out.is_empty());
    assert_eq!(out.to_xml(), "");
}

#[test]
fn optional_leaf_binds_marked_null() {
    let src = parse_dtd("<!ELEMENT R (A*)>\n<!ELEMENT A (B, C?)>\n<!ELEMENT B (#PCDATA)>\n<!ELEMENT C (#PCDATA)>\n").unwrap();
    let rules = parse_rules("T -> f1($R)[X -> f2($B, $C)[Y -> $B, Z -> $C]] <- R -> $R[A -> $A[B -> $B, C -> $C]]").unwrap();
    let d = parse_instance("<R><A><B>1</B></A><A><B>2</B><C>3</C></A></R>", &src).unwrap();
    let subs = match_body(&rules[0], &d, &src);
    assert_eq!(subs.len(), 2);
    let nulls: Vec<_> = subs
        .iter()
        .filter_map(|s| match &s["C"] {
            Binding::Null(m) => Some(m.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(nulls.len(), 1);
    assert_eq!(nulls[0].origin, vec!["R", "A", "C"]);
    let again = match_body(&rules[0], &d, &src);
    assert_eq!(subs, again);
    let out = apply_rules(&rules, &d, &src).unwrap();
    assert_eq!(out.count_tag("X"), 2);
    assert_eq!(out.count_tag("Z"), 2);
}

#[test]
fn unsafe_head_is_reported() {
    let f = fixture();
    let d = two_patients(&f.src);
    let rules = parse_rules("T -> f1($Q) <- MonGenHosp -> $M").unwrap();
    assert_eq!(apply_rules(&rules, &d, &f.src), Err(ExchangeError::UnboundHeadVariable("Q".into())));
}

fn params() -> GenParams {
    let mut p = GenParams::default();
    p.pools.insert("Problem".into(), vec!["Coronary".into(), "Pulmonary".into()]);
    p
}

#[test]
fn generator_is_valid_and_deterministic() {
    let f = fixture();
    for seed in 0..30 {
        let a = random_instance(&f.src, &params(), &mut ChaCha8Rng::seed_from_u64(seed));
        let b = random_instance(&f.src, &params(), &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(a.to_xml(), b.to_xml());
        validate(&a, &f.src).unwrap();
        assert!(a.count_tag("Patient") <= 10);
        let reparsed = parse_instance(&a.to_xml(), &f.src).unwrap();
        assert_eq!(reparsed.to_xml(), a.to_xml());
    }
}

#[test]
fn generator_produces_some_dangling_references() {
    let f = fixture();
    let mut dangling = 0;
    let mut total = 0;
    for seed in 0..200 {
        let d = random_instance(&f.src, &params(), &mut ChaCha8Rng::seed_from_u64(seed));
        if d.count_tag("Patient") == 0 {
            continue;
        }
        for i in d.preorder() {
            if d.tag(i) == "@PatRef" {
                total += 1;
                dangling += usize::from(d.value(i).unwrap().render().starts_with("dangling"));
            }
        }
    }
    assert!(total > 100);
    let share = dangling as f64 / total as f64;
    assert!((0.1..0.3).contains(&share), "{dangling}/{total}");
}

fn random_source(seed: u64, src: &DtdGraph) -> XmlInstance {
    let mut p = params();
    p.root_cap = 4;
    p.cap = 3;
    random_instance(src, &p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Adds a fresh Treat under the first patient, if any.
fn grow(d: &XmlInstance, src: &DtdGraph) -> XmlInstance {
    let text = d.to_xml();
    let extra = "<Treat><Date>extra</Date><Desc>extra</Desc><Doc>extra</Doc></Treat>";
    let grown = match text.find("<Hist") {
        Some(i) => format!("{}{}{}", &text[..i], extra, &text[i..]),
        None => text,
    };
    parse_instance(&grown, src).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exchange_matches_chase_oracle(seed in 0u64..10_000) {
        let f = fixture();
        let d = random_source(seed, &f.src);
        let out = apply_rules(&f.rules, &d, &f.src).unwrap();
        prop_assert_eq!(out.to_xml(), chase_oracle(&f.rules, &d).to_xml());
    }

    #[test]
    fn glued_siblings_have_distinct_ids(seed in 0u64..10_000) {
        let f = fixture();
        let d = random_source(seed, &f.src);
        let out = apply_rules(&f.rules, &d, &f.src).unwrap();
        for i in out.preorder() {
            let mut keys = BTreeSet::new();
            for &c in out.children(i) {
                prop_assert!(keys.insert((out.tag(c).to_string(), out.node(c).id.clone())));
            }
        }
    }

    #[test]
    fn gluing_is_idempotent(seed in 0u64..10_000) {
        let f = fixture();
        let d = random_source(seed, &f.src);
        let doubled: Vec<MappingRule> = f.rules.iter().chain(f.rules.iter()).cloned().collect();
        prop_assert_eq!(apply_rules(&doubled, &d, &f.src).unwrap().to_xml(), apply_rules(&f.rules, &d, &f.src).unwrap().to_xml());
    }

    #[test]
    fn multiplicities_are_preserved(seed in 0u64..10_000) {
        let f = fixture();
        let d = random_source(seed, &f.src);
        let out = apply_rules(&f.rules, &d, &f.src).unwrap();
        // Patients reached by at least one admission contribute their events and treatments.
        let refs: BTreeSet<String> = d.preorder().into_iter().filter(|&i| d.tag(i) == "@PatRef").map(|i| d.value(i).unwrap().render()).collect();
        let mut events = 0;
        let mut treats = 0;
        for p in d.preorder().into_iter().filter(|&i| d.tag(i) == "Patient") {
            let id = d.children(p).iter().find(|&&c| d.tag(c) == "@ID").map(|&c| d.value(c).unwrap().render()).unwrap();
            if !refs.contains(&id) { continue; }
            treats += d.descendants(p).into_iter().filter(|&i| d.tag(i) == "Treat").count();
            events += d.descendants(p).into_iter().filter(|&i| d.tag(i) == "Event").count();
        }
        let dedup = |tag: &str| -> usize {
            // identical value pairs under one patient glue into one Skolem node
            out.preorder().into_iter().filter(|&i| out.tag(i) == tag).count()
        };
        prop_assert!(dedup("Treatment") <= treats);
        prop_assert!(dedup("Symptom") <= events);
        let distinct = |tag: &str, a: &str, b: &str| -> usize {
            let mut s = BTreeSet::new();
            for p in d.preorder().into_iter().filter(|&i| d.tag(i) == "Patient") {
                let id = d.children(p).iter().find(|&&c| d.tag(c) == "@ID").map(|&c| d.value(c).unwrap().render()).unwrap();
                if !refs.contains(&id) { continue; }
                for t in d.descendants(p).into_iter().filter(|&i| d.tag(i) == tag) {
                    let v = |x: &str| d.children(t).iter().find(|&&c| d.tag(c) == x).map(|&c| d.value(c).unwrap().render()).unwrap();
                    s.insert((id.clone(), v(a), v(b)));
                }
            }
            s.len()
        };
        prop_assert_eq!(dedup("Treatment"), distinct("Treat", "Date", "Desc"));
        prop_assert_eq!(dedup("Symptom"), distinct("Event", "Date", "Problem"));
    }

    #[test]
    fn exchange_is_monotone(seed in 0u64..10_000) {
        let f = fixture();
        let d = random_source(seed, &f.src);
        let bigger = grow(&d, &f.src);
        let small = apply_rules(&f.rules, &d, &f.src).unwrap();
        let large = apply_rules(&f.rules, &bigger, &f.src).unwrap();
        let paths = |x: &XmlInstance| -> BTreeSet<Vec<(String, Option<String>)>> {
            x.preorder()
                .into_iter()
                .map(|i| {
                    let mut p = Vec::new();
                    let mut cur = Some(i);
                    while let Some(c) = cur {
                        p.push((x.tag(c).to_string(), x.value(c).map(Value::render)));
                        cur = x.node(c).parent;
                    }
                    p.reverse();
                    p
                })
                .collect()
        };
        for t in ["Treatment", "Symptom", "Pulmonary", "Coronary", "Progress"] {
            prop_assert!(small.count_tag(t) <= large.count_tag(t));
        }
        let pl = paths(&large);
        for p in paths(&small) {
            prop_assert!(pl.contains(&p), "lost {:?}", p);
        }
    }
}
