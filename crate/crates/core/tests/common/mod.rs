//! Test-only oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hetpeer::instance::*;
use hetpeer::query::*;
use hetpeer::schema::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---- exhaustive oracle ---------------------------------------------------------------

pub struct Flat {
    var: String,
    tag: TagTest,
    lits: Vec<(CmpOp, String)>,
    parent: Option<(usize, Axis)>,
    doc_axis: Axis,
}

pub fn flatten(q: &TpQuery) -> Vec<Flat> {
    let mut out = Vec::new();
    fn go(n: &PatternNode, parent: Option<(usize, Axis)>, doc_axis: Axis, out: &mut Vec<Flat>) {
        let lits = n
            .constraints
            .iter()
            .filter_map(|c| match &c.operand {
                Operand::Lit(l) => Some((c.op, l.clone())),
                Operand::Var(_) => None,
            })
            .collect();
        let me = out.len();
        out.push(Flat { var: n.var.clone(), tag: n.tag.clone(), lits, parent, doc_axis });
        for (ax, c) in &n.children {
            go(c, Some((me, *ax)), doc_axis, out);
        }
    }
    for p in &q.patterns {
        go(&p.root, None, p.axis, &mut out);
    }
    out
}

pub fn is_proper_ancestor(d: &XmlInstance, a: usize, mut b: usize) -> bool {
    while let Some(p) = d.node(b).parent {
        if p == a {
            return true;
        }
        b = p;
    }
    false
}

pub fn key(d: &XmlInstance, i: usize) -> String {
    match d.value(i) {
        Some(v) => v.render(),
        None => format!("#node{i}"),
    }
}

/// Tries every node for every variable, pruning only on checks local to the variable.
pub fn oracle(q: &TpQuery, d: &XmlInstance) -> AnswerSet {
    let flat = flatten(q);
    let mut out = AnswerSet::new();
    let mut asg = vec![0usize; flat.len()];
    fn go(k: usize, flat: &[Flat], q: &TpQuery, d: &XmlInstance, asg: &mut Vec<usize>, out: &mut AnswerSet) {
        if k == flat.len() {
            let idx: BTreeMap<&str, usize> = flat.iter().enumerate().map(|(i, f)| (f.var.as_str(), asg[i])).collect();
            for (a, b) in &q.joins {
                if key(d, idx[a.as_str()]) != key(d, idx[b.as_str()]) {
                    return;
                }
            }
            for p in &q.patterns {
                for n in p.root.preorder() {
                    for c in &n.constraints {
                        if let Operand::Var(o) = &c.operand {
                            if !c.op.holds(&key(d, idx[n.var.as_str()]), &key(d, idx[o.as_str()])) {
                                return;
                            }
                        }
                    }
                }
            }
            out.insert(q.returns.iter().map(|r| node_answer(d, idx[r.as_str()])).collect());
            return;
        }
        let f = &flat[k];
        for i in 0..d.len() {
            if !f.tag.matches(d.tag(i)) {
                continue;
            }
            if !f.lits.iter().all(|(op, l)| d.value(i).is_some_and(|v| op.holds(&v.render(), l))) {
                continue;
            }
            let placed = match f.parent {
                Some((p, Axis::Child)) => d.node(i).parent == Some(asg[p]),
                Some((p, Axis::Descendant)) => is_proper_ancestor(d, asg[p], i),
                None => match f.doc_axis {
                    Axis::Child => d.root() == Some(i),
                    Axis::Descendant => true,
                },
            };
            if placed {
                asg[k] = i;
                go(k + 1, flat, q, d, asg, out);
            }
        }
    }
    go(0, &flat, q, d, &mut asg, &mut out);
    out
}

// ---- random queries and instances ------------------------------------------------------

pub fn small_instance(g: &DtdGraph, seed: u64) -> XmlInstance {
    let p = GenParams { root_cap: 3, cap: 3, default_values: 2, ..GenParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = random_instance(g, &p, &mut rng);
        if d.len() <= 50 {
            return d;
        }
    }
}

pub fn descendants_in_schema(g: &DtdGraph, n: NodeIdx) -> Vec<(NodeIdx, bool)> {
    let mut out = Vec::new();
    let mut stack: Vec<(NodeIdx, bool)> = g.children(n).map(|e| (e.child, true)).collect();
    while let Some((c, direct)) = stack.pop() {
        if !out.contains(&(c, direct)) {
            out.push((c, direct));
        }
        stack.extend(g.children(c).map(|e| (e.child, false)));
    }
    out
}

pub fn random_query(g: &DtdGraph, rng: &mut ChaCha8Rng) -> TpQuery {
    let elems: Vec<NodeIdx> = g.node_ids().filter(|&n| !g.node(n).is_attribute()).collect();
    let npat = rng.gen_range(1..=2);
    let mut q = TpQuery { patterns: vec![], joins: vec![], returns: vec![] };
    let mut fresh = 0;
    let mut valued: Vec<(String, usize)> = Vec::new();
    for pi in 0..npat {
        let root_n = elems[rng.gen_range(0..elems.len())];
        fresh += 1;
        let axis = if root_n == g.root && rng.gen_bool(0.5) { Axis::Child } else { Axis::Descendant };
        let mut pat = TreePattern { axis, root: PatternNode::new(&format!("v{fresh}"), TagTest::Name(g.tag(root_n).into())) };
        let mut nodes: Vec<(String, NodeIdx)> = vec![(format!("v{fresh}"), root_n)];
        for _ in 0..rng.gen_range(0..=3) {
            let (pv, pn) = nodes[rng.gen_range(0..nodes.len())].clone();
            let desc = descendants_in_schema(g, pn);
            if desc.is_empty() {
                continue;
            }
            let (c, direct) = desc[rng.gen_range(0..desc.len())];
            let ax = if direct && rng.gen_bool(0.7) { Axis::Child } else { Axis::Descendant };
            if !direct && ax == Axis::Child {
                continue;
            }
            fresh += 1;
            let var = format!("v{fresh}");
            let is_attr = g.node(c).is_attribute();
            let tag = if !is_attr && rng.gen_bool(0.1) { TagTest::Wildcard } else { TagTest::Name(g.tag(c).into()) };
            let mut node = PatternNode::new(&var, tag);
            if g.node(c).valued && g.is_leaf(c) && rng.gen_bool(0.3) {
                let base = g.tag(c).trim_start_matches('@');
                let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt][rng.gen_range(0..4)];
                node.constraints.push(ValueConstraint { op, operand: Operand::Lit(format!("{base}{}", rng.gen_range(0..2))) });
            }
            if g.node(c).valued || is_attr {
                valued.push((var.clone(), pi));
            }
            pat.root.find_mut(&pv).unwrap().children.push((ax, node));
            nodes.push((var, c));
        }
        q.patterns.push(pat);
    }
    if npat == 2 {
        let a: Vec<&String> = valued.iter().filter(|v| v.1 == 0).map(|v| &v.0).collect();
        let b: Vec<&String> = valued.iter().filter(|v| v.1 == 1).map(|v| &v.0).collect();
        if !a.is_empty() && !b.is_empty() {
            q.joins.push((a[rng.gen_range(0..a.len())].clone(), b[rng.gen_range(0..b.len())].clone()));
        }
    }
    let vars = q.vars();
    let k = rng.gen_range(1..=2.min(vars.len()));
    while q.returns.len() < k {
        let v = vars[rng.gen_range(0..vars.len())].clone();
        if !q.returns.contains(&v) {
            q.returns.push(v);
        }
    }
    q
}
