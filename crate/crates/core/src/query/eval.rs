use std::collections::{BTreeMap, BTreeSet};

use super::{Axis, Operand, PatternNode, TpQuery, TreePattern};
use crate::instance::XmlInstance;

pub type Tuple = Vec<String>;
/// Distinct answer tuples, columns in return order.
pub type AnswerSet = BTreeSet<Tuple>;

type Assignment = BTreeMap<String, usize>;

/// Answer value of a node: its text when valued, its canonical subtree otherwise.
pub fn node_answer(d: &XmlInstance, i: usize) -> String {
    match d.value(i) {
        Some(v) => v.render(),
        None => d.canonical_subtree(i),
    }
}

/// Comparison key: text for valued nodes, identity for internal ones.
fn node_key(d: &XmlInstance, i: usize) -> String {
    match d.value(i) {
        Some(v) => v.render(),
        None => format!("#node{i}"),
    }
}

fn local_ok(n: &PatternNode, d: &XmlInstance, i: usize) -> bool {
    n.tag.matches(d.tag(i))
        && n.constraints.iter().all(|c| match &c.operand {
            Operand::Lit(l) => d.value(i).is_some_and(|v| c.op.holds(&v.render(), l)),
            Operand::Var(_) => true,
        })
}

fn candidates(d: &XmlInstance, from: Option<usize>, axis: Axis) -> Vec<usize> {
    match (from, axis) {
        (None, Axis::Child) => d.root().into_iter().collect(),
        (None, Axis::Descendant) => d.preorder(),
        (Some(n), Axis::Child) => d.children(n).to_vec(),
        (Some(n), Axis::Descendant) => d.descendants(n),
    }
}

fn embed<'p>(
    n: &'p PatternNode,
    d: &XmlInstance,
    i: usize,
    acc: &mut Assignment,
    out: &mut Vec<Assignment>,
    rest: &mut Vec<(Axis, &'p PatternNode, usize)>,
) {
    acc.insert(n.var.clone(), i);
    for (ax, c) in n.children.iter().rev() {
        rest.push((*ax, c, i));
    }
    expand(d, acc, out, rest);
    for _ in &n.children {
        rest.pop();
    }
    acc.remove(&n.var);
}

fn expand(d: &XmlInstance, acc: &mut Assignment, out: &mut Vec<Assignment>, rest: &mut Vec<(Axis, &PatternNode, usize)>) {
    let Some((ax, n, parent)) = rest.pop() else {
        out.push(acc.clone());
        return;
    };
    for c in candidates(d, Some(parent), ax) {
        if local_ok(n, d, c) {
            embed(n, d, c, acc, out, rest);
        }
    }
    rest.push((ax, n, parent));
}

/// All embeddings of one pattern.
pub(crate) fn pattern_matches(p: &TreePattern, d: &XmlInstance) -> Vec<Assignment> {
    let mut out = Vec::new();
    for i in candidates(d, None, p.axis) {
        if local_ok(&p.root, d, i) {
            embed(&p.root, d, i, &mut Assignment::new(), &mut out, &mut Vec::new());
        }
    }
    out
}

/// Cross-variable checks whose variables are all in `a`.
fn cross_ok(q: &TpQuery, d: &XmlInstance, a: &Assignment, fresh: &BTreeSet<String>) -> bool {
    let touches = |x: &str, y: &str| fresh.contains(x) || fresh.contains(y);
    for (x, y) in &q.joins {
        if let (Some(&i), Some(&j)) = (a.get(x), a.get(y)) {
            if touches(x, y) && node_key(d, i) != node_key(d, j) {
                return false;
            }
        }
    }
    for p in &q.patterns {
        for n in p.root.preorder() {
            for c in &n.constraints {
                let Operand::Var(o) = &c.operand else { continue };
                if let (Some(&i), Some(&j)) = (a.get(&n.var), a.get(o)) {
                    if touches(&n.var, o) && !c.op.holds(&node_key(d, i), &node_key(d, j)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// All tuples of distinguished-node answers over embeddings of every pattern that satisfy
/// the joins.
pub fn evaluate(q: &TpQuery, d: &XmlInstance) -> AnswerSet {
    let mut needed: BTreeSet<String> = q.returns.iter().cloned().collect();
    for (x, y) in &q.joins {
        needed.insert(x.clone());
        needed.insert(y.clone());
    }
    for p in &q.patterns {
        for n in p.root.preorder() {
            for c in &n.constraints {
                if let Operand::Var(o) = &c.operand {
                    needed.insert(n.var.clone());
                    needed.insert(o.clone());
                }
            }
        }
    }
    let mut acc: Vec<Assignment> = vec![Assignment::new()];
    for p in &q.patterns {
        let own: BTreeSet<String> = p.vars().into_iter().filter(|v| needed.contains(v)).collect();
        let mut proj: BTreeSet<Assignment> = BTreeSet::new();
        for m in pattern_matches(p, d) {
            proj.insert(m.into_iter().filter(|(k, _)| own.contains(k)).collect());
        }
        let mut next = Vec::new();
        for a in &acc {
            for m in &proj {
                let mut merged = a.clone();
                merged.extend(m.iter().map(|(k, v)| (k.clone(), *v)));
                if cross_ok(q, d, &merged, &own) {
                    next.push(merged);
                }
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    acc.iter().map(|a| q.returns.iter().map(|r| node_answer(d, a[r])).collect()).collect()
}

pub fn evaluate_union(qs: &[TpQuery], d: &XmlInstance) -> AnswerSet {
    qs.iter().flat_map(|q| evaluate(q, d)).collect()
}

/// One line per tuple, values separated by tabs, in sorted order.
pub fn render_answers(a: &AnswerSet) -> String {
    a.iter().map(|t| format!("{}\n", t.join("\t"))).collect()
}
