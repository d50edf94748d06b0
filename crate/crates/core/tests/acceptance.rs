//! One line per acceptance criterion. Exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hetpeer::instance::*;
use hetpeer::mapping::*;
use hetpeer::query::*;
use hetpeer::schema::*;
use hetpeer::sim::*;
use hetpeer::translate::*;
use hetpeer::verify::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{oracle, random_query, small_instance};

const Q1: &str =
    r#"FOR $A IN //Admission, $P IN //Patient[@ID=$A/@PatRef] WHERE $A/Problem="Coronary" AND $P/Treat/Date="12/25/2003" RETURN {$P/Name}"#;
const Q2: &str = "FOR $P IN //Progress, $Y IN //Pulmonary WHERE $Y/@ID=$P/@PatRef RETURN {$P/Symptom/Desc}";
/// Expected backward translation of Q2.
const Q2_EXPECTED: &str = "FOR $P IN //Patient, $A IN //Admission[@ID=$P/@ID] WHERE $A/Problem='Pulmonary' RETURN {$P/Event}";
const Q1_STAGES: [&str; 2] = ["//Coronary/@ID", "//Coronary[@ID]/Name"];

const INSTANCES: usize = 100;
const MAX_PATIENTS: usize = 10;
const MAX_MEAN_HOPS: f64 = 5.0;
const ASPL_RANGE: (f64, f64) = (2.0, 3.5);
const ORACLE_PAIRS: u64 = 50;
const MAX_ORACLE_NODES: usize = 50;

struct Hospital {
    ctx: MappingContext,
    corr: CorrespondenceSet,
}

fn hospital() -> Hospital {
    let s = parse_dtd(include_str!("../fixtures/mong.dtd")).unwrap();
    let t = parse_dtd(include_str!("../fixtures/masg.dtd")).unwrap();
    let corr = parse_correspondences(include_str!("../fixtures/hospital.corr"), &s, &t).unwrap();
    let rules = infer_rules(&s, &t, &corr).mapping_rules();
    Hospital { ctx: MappingContext::new(s, t, rules), corr }
}

fn names(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn suite(text: &str) -> Vec<TpQuery> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(|l| parse_query(l).unwrap()).collect()
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn union_oracle(qs: &[TpQuery], d: &XmlInstance) -> AnswerSet {
    qs.iter().flat_map(|q| oracle(q, d)).collect()
}

type Verdict = Result<String, String>;

fn groups(h: &Hospital) -> Verdict {
    let (s, t) = (&h.ctx.source, &h.ctx.target);
    let got_s: BTreeSet<_> = detect_groups(s, &[], Side::Source).iter().map(|g| g.qualified_names(s, &[])).collect();
    let got_t: BTreeSet<_> = detect_groups(t, &h.corr.boxes, Side::Target).iter().map(|g| g.qualified_names(t, &h.corr.boxes)).collect();
    let want_s: BTreeSet<_> = [
        names(&["MonGenHosp", "Patient", "Hist", "Event", "Event_Problem", "Event_Date"]),
        names(&["MonGenHosp", "Patient", "Treat", "Treat_Date", "Desc", "Doc"]),
        names(&["MonGenHosp", "Admission", "Admission_Problem", "AdmDate", "DisDate", "@PatRef"]),
        names(&["MonGenHosp", "Patient", "@ID", "MedCr#", "Name"]),
    ]
    .into();
    let want_t: BTreeSet<_> = [
        names(&["MassGeneral", "Admission", "Pulmonary", "Coronary", "@ID", "InsName", "Policy#", "Enter", "Leave", "Patient"]),
        names(&["MassGeneral", "Progress", "Symptom", "Symptom_Date", "Symptom_Desc"]),
        names(&["MassGeneral", "Progress", "Treatment", "Treatment_Date", "Treatment_Desc"]),
        names(&["MassGeneral", "Progress", "@PatRef"]),
    ]
    .into();
    if got_s == want_s && got_t == want_t {
        Ok(format!("{} source and {} target groups", got_s.len(), got_t.len()))
    } else {
        Err(format!("source {got_s:?} target {got_t:?}"))
    }
}

fn rules(h: &Hospital) -> Verdict {
    let inf = infer_rules(&h.ctx.source, &h.ctx.target, &h.corr);
    let mut got: Vec<String> = inf.mapping_rules().iter().map(canonical_rule).collect();
    let mut want: Vec<String> =
        parse_rules(include_str!("../fixtures/hospital.rules.golden")).unwrap().iter().map(canonical_rule).collect();
    got.sort();
    want.sort();
    if got == want && got.len() == 4 {
        Ok("4 rules equal to the golden file up to renaming".into())
    } else {
        Err(format!("{} rules, golden {}", got.len(), want.len()))
    }
}

fn worked_translations(h: &Hospital) -> Verdict {
    let mut failures = Vec::new();
    let t1 = translate(&parse_query(Q1).unwrap(), &h.ctx, Direction::Forward).map_err(|e| format!("Q1: {e}"))?;
    let q = &t1.queries()[0];
    let stitched = t1.queries().len() == 1
        && q.patterns.len() == 2
        && q.patterns[0].root.tag == TagTest::Name("Coronary".into())
        && q.patterns[1].root.tag == TagTest::Name("Progress".into())
        && q.joins.len() == 1;
    if !stitched {
        failures.push(format!("Q1 not stitched: {}", t1.text()));
    }
    let stages: BTreeSet<&str> = (0..2).flat_map(|p| t1.trace.contracted_stages(p)).collect();
    for s in Q1_STAGES {
        if !stages.contains(s) {
            failures.push(format!("Q1 stage {s} missing, stages {stages:?}"));
        }
    }
    let t2 = translate(&parse_query(Q2).unwrap(), &h.ctx, Direction::Backward).map_err(|e| format!("Q2: {e}"))?;
    if squeeze(&t2.text()) != squeeze(Q2_EXPECTED) {
        failures.push(format!("Q2 gave `{}`, expected `{Q2_EXPECTED}`", t2.text()));
    }
    if failures.is_empty() {
        Ok(format!("Q1 `{}`; Q2 `{}`", t1.text(), t2.text()))
    } else {
        Err(failures.join("; "))
    }
}

/// Per suite query: the query, its translation and the instance pairs it was checked on.
struct Checked {
    q: TpQuery,
    dir: Direction,
    t: Translation,
    data: Vec<(XmlInstance, XmlInstance)>,
}

fn checked_suites(h: &Hospital) -> Result<Vec<Checked>, String> {
    let mut out = Vec::new();
    for (text, dir) in [
        (include_str!("../fixtures/queries/backward.txt"), Direction::Backward),
        (include_str!("../fixtures/queries/forward.txt"), Direction::Forward),
    ] {
        for q in suite(text) {
            let t = translate(&q, &h.ctx, dir).map_err(|e| format!("{}: {e}", print_query(&q)))?;
            let translated = t.queries();
            let mut qs = vec![&q];
            qs.extend(translated.iter());
            let cfg = VerifyConfig { instances: INSTANCES, seed: 11, ..VerifyConfig::default() };
            let params = params_for(&h.ctx, &cfg.params, &qs);
            let data = sample(&h.ctx, &cfg, &params);
            out.push(Checked { q, dir, t, data });
        }
    }
    Ok(out)
}

fn semantics(checked: &[Checked]) -> Verdict {
    let mut joins = BTreeSet::new();
    let mut sels = BTreeSet::new();
    let (mut cases, mut nonempty) = (0, 0);
    for c in checked {
        joins.insert(c.q.joins.len());
        sels.insert(c.q.selection_count());
        if c.data.len() != INSTANCES {
            return Err(format!("{} instances for {}", c.data.len(), print_query(&c.q)));
        }
        let mut answered = false;
        for (d, md) in &c.data {
            if d.count_tag("Patient") > MAX_PATIENTS {
                return Err(format!("{} patients", d.count_tag("Patient")));
            }
            cases += 1;
            let ok = match c.dir {
                Direction::Backward => union_oracle(&c.t.queries(), d) == oracle(&c.q, md),
                Direction::Forward => union_oracle(&c.t.queries(), md).is_subset(&oracle(&c.q, d)),
            };
            if !ok {
                return Err(format!("{} {} -> {}\n{}", c.dir, print_query(&c.q), c.t.text(), d.to_xml()));
            }
            let on = if c.dir == Direction::Backward { md } else { d };
            answered |= !oracle(&c.q, on).is_empty();
        }
        nonempty += usize::from(answered);
        if !answered {
            return Err(format!("{} never has answers", print_query(&c.q)));
        }
    }
    if !(0..=3).all(|k| joins.contains(&k)) || !(0..=2).all(|k| sels.contains(&k)) {
        return Err(format!("suite shapes: joins {joins:?} selections {sels:?}"));
    }
    Ok(format!("{} queries, {cases} cases, {nonempty} queries with answers", checked.len()))
}

fn contraction(checked: &[Checked]) -> Verdict {
    let (mut contracted, mut cases) = (0, 0);
    for c in checked {
        let (full, short) = (c.t.uncontracted(), c.t.queries());
        if full.iter().map(print_query).ne(short.iter().map(print_query)) {
            contracted += 1;
        }
        for (d, md) in &c.data {
            let on = if c.dir == Direction::Backward { d } else { md };
            cases += 1;
            if union_oracle(&full, on) != union_oracle(&short, on) {
                return Err(format!("{} vs {}", print_union(&full), print_union(&short)));
            }
        }
    }
    if contracted == 0 {
        return Err("no translation was contracted".into());
    }
    Ok(format!("{contracted} contracted translations, {cases} cases"))
}

fn catalog(h: &Hospital) -> SchemaCatalog {
    SchemaCatalog::alternating(&h.ctx.source, &h.ctx.target, &h.corr, 10)
}

fn structure(cat: &SchemaCatalog) -> Verdict {
    let cfg = SimConfig { peers: 128, degree: 4, schemas: 10, seed: 42, ..SimConfig::default() };
    let net = build_network(&cfg, cat).map_err(|e| e.to_string())?;
    let r = broadcast(&net, cat, net.origin, &parse_query(Q1).unwrap()).map_err(|e| e.to_string())?;
    let ids: BTreeSet<usize> = r.per_peer.iter().map(|p| p.peer).collect();
    let processed = r.messages + 1 - r.duplicates_suppressed;
    let line =
        format!("min degree {}, mean hops {:.3}, aspl {:.3}, {} peers processed once", net.min_degree(), r.mean_hops(), r.aspl, ids.len());
    let ok = net.min_degree() >= 4
        && r.mean_hops() <= MAX_MEAN_HOPS
        && (ASPL_RANGE.0..=ASPL_RANGE.1).contains(&r.aspl)
        && ids.len() == 128
        && r.per_peer.len() == 128
        && processed == 128;
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn scaling(cat: &SchemaCatalog) -> Verdict {
    let counts: Vec<usize> = (1..=10).collect();
    let rows = scaling_run(&SimConfig::default(), cat, &counts, &[parse_query(Q1).unwrap()]).map_err(|e| e.to_string())?;
    let calls: Vec<usize> = rows.iter().map(|r| r.translations).collect();
    let line = format!("translations for 1..10 schemas {calls:?}");
    if calls[0] == 0 && calls[1..].windows(2).all(|w| w[1] > w[0]) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn evaluator(h: &Hospital) -> Verdict {
    let g = &h.ctx.source;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut largest = 0;
    for k in 0..ORACLE_PAIRS {
        let q = random_query(g, &mut rng);
        let d = small_instance(g, 1000 + k);
        largest = largest.max(d.len());
        if d.len() > MAX_ORACLE_NODES {
            return Err(format!("instance with {} nodes", d.len()));
        }
        if evaluate(&q, &d) != oracle(&q, &d) {
            return Err(format!("{}\n{}", print_query(&q), d.to_xml()));
        }
    }
    Ok(format!("{ORACLE_PAIRS} pairs, largest instance {largest} nodes"))
}

fn report(id: usize, name: &str, budget: Option<Duration>, run: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = run();
    let took = start.elapsed();
    let late = budget.is_some_and(|b| took > b);
    let pass = verdict.is_ok() && !late;
    let detail = match &verdict {
        Ok(s) | Err(s) => s.clone(),
    };
    let limit = budget.map_or(String::new(), |b| format!(" limit {:.0?}", b));
    println!("[{id}] {} {name} ({took:.2?}{limit}): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    let h = hospital();
    let secs = |s| Some(Duration::from_secs(s));
    let mut ok = true;
    ok &= report(1, "group detection", secs(1), || groups(&h));
    ok &= report(2, "rule inference", secs(1), || rules(&h));
    ok &= report(3, "worked translations", secs(1), || worked_translations(&h));
    let mut checked = None;
    ok &= report(4, "semantics oracle", secs(60), || {
        let c = checked_suites(&h)?;
        let v = semantics(&c);
        checked = Some(c);
        v
    });
    ok &= report(5, "contraction equivalence", None, || contraction(checked.as_deref().ok_or("no translations to inspect")?));
    let cat = catalog(&h);
    ok &= report(6, "network structure", secs(30), || structure(&cat));
    ok &= report(7, "scaling trend", None, || scaling(&cat));
    ok &= report(8, "evaluator oracle", secs(10), || evaluator(&h));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
