//! Body-to-head translation. The query is frozen into a small source instance (its
//! canonical instance, completed with the children the schema requires and with the
//! referenced elements of its IDREF links), the rules are applied to it, and the
//! target pattern is read off the generated nodes that carry the query's values.

use std::collections::{BTreeMap, BTreeSet};

use super::cq::{Cq, LeafPolicy};
use super::{MappingContext, TranslateError};
use crate::instance::{apply_rules, Ground, NodeIdValue, Value, XmlInstance};
use crate::mapping::MappingRule;
use crate::query::{Axis, CmpOp, Operand, PatternNode, TagTest, TpQuery};
use crate::schema::{node_paths, DtdGraph, NodeIdx};

const SCENARIO_LIMIT: usize = 32;

fn fresh(k: &mut usize, kind: char) -> String {
    *k += 1;
    format!("\u{27e8}{kind}{k}\u{27e9}")
}

pub(crate) fn is_fresh(s: &str) -> bool {
    s.starts_with('\u{27e8}')
}

/// What a query leaves on the frozen instance.
#[derive(Debug, Clone, Default)]
pub(crate) struct Constants {
    /// Value of each valued query node.
    pub of_var: BTreeMap<String, String>,
    /// Equal literals.
    pub literals: BTreeSet<String>,
    /// Other comparisons a value must satisfy.
    pub ops: BTreeMap<String, Vec<(CmpOp, String)>>,
    /// Comparisons between two values.
    pub cross: Vec<(String, CmpOp, String)>,
}

impl Constants {
    fn build(g: &DtdGraph, q: &TpQuery, k: &mut usize) -> Option<Constants> {
        let vars = q.vars();
        let mut uf: BTreeMap<String, String> = vars.iter().map(|v| (v.clone(), v.clone())).collect();
        fn find(uf: &BTreeMap<String, String>, v: &str) -> String {
            let mut c = v.to_string();
            while uf[&c] != c {
                c = uf[&c].clone();
            }
            c
        }
        let mut pairs: Vec<(String, String)> = q.joins.clone();
        for p in &q.patterns {
            for n in p.root.preorder() {
                let mut first: BTreeMap<String, &str> = BTreeMap::new();
                for (_, c) in &n.children {
                    if let TagTest::Name(t) = &c.tag {
                        if t.starts_with('@') || single_child(g, &n.tag, t) {
                            match first.get(t) {
                                Some(f) => pairs.push((f.to_string(), c.var.clone())),
                                None => {
                                    first.insert(t.clone(), &c.var);
                                }
                            }
                        }
                    }
                }
            }
        }
        for (a, b) in &pairs {
            let (ra, rb) = (find(&uf, a), find(&uf, b));
            if ra != rb {
                uf.insert(ra, rb);
            }
        }
        let mut eq: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut ops: BTreeMap<String, Vec<(CmpOp, String)>> = BTreeMap::new();
        let mut cross = Vec::new();
        for p in &q.patterns {
            for n in p.root.preorder() {
                for c in &n.constraints {
                    match (&c.operand, c.op) {
                        (Operand::Lit(l), CmpOp::Eq) => {
                            eq.entry(find(&uf, &n.var)).or_default().insert(l.clone());
                        }
                        (Operand::Lit(l), op) => ops.entry(find(&uf, &n.var)).or_default().push((op, l.clone())),
                        (Operand::Var(o), op) => cross.push((n.var.clone(), op, o.clone())),
                    }
                }
            }
        }
        let mut c = Constants::default();
        let mut class_const: BTreeMap<String, String> = BTreeMap::new();
        for v in &vars {
            let r = find(&uf, v);
            let val = match class_const.get(&r) {
                Some(x) => x.clone(),
                None => {
                    let x = match eq.get(&r) {
                        Some(ls) if ls.len() > 1 => return None,
                        Some(ls) => {
                            let l = ls.iter().next().unwrap().clone();
                            if ops.get(&r).is_some_and(|os| os.iter().any(|(op, o)| !op.holds(&l, o))) {
                                return None;
                            }
                            c.literals.insert(l.clone());
                            l
                        }
                        None => {
                            let f = fresh(k, 'q');
                            if let Some(os) = ops.get(&r) {
                                c.ops.insert(f.clone(), os.clone());
                            }
                            f
                        }
                    };
                    class_const.insert(r, x.clone());
                    x
                }
            };
            c.of_var.insert(v.clone(), val);
        }
        for (a, op, b) in cross {
            c.cross.push((c.of_var[&a].clone(), op, c.of_var[&b].clone()));
        }
        Some(c)
    }
}

/// Whether every `parent` element has at most one `child`.
fn single_child(g: &DtdGraph, parent: &TagTest, child: &str) -> bool {
    let (TagTest::Name(p), Some(c)) = (parent, g.lookup(child)) else { return false };
    g.lookup(p).and_then(|p| g.edge(p, c)).is_some_and(|e| e.card.is_single())
}

/// A frozen query instance and its bookkeeping.
pub(crate) struct Scenario {
    pub inst: XmlInstance,
    /// Query variable to instance node.
    pub at: BTreeMap<String, usize>,
    /// Values of completion nodes below query leaves; they witness the leaves' existence.
    pub witness: BTreeSet<String>,
}

fn tag_nodes(g: &DtdGraph, t: &TagTest) -> Vec<NodeIdx> {
    match t {
        TagTest::Name(n) => g.lookup(n).into_iter().collect(),
        TagTest::Wildcard => g.node_ids().filter(|&n| !g.node(n).is_attribute()).collect(),
    }
}

/// Placement of every query node: a schema path from the placed parent (or the root).
type Placement = Vec<(String, Vec<NodeIdx>)>;

fn placements(g: &DtdGraph, q: &TpQuery) -> Vec<Placement> {
    let mut nodes: Vec<(&PatternNode, Option<String>, Axis)> = Vec::new();
    fn go<'a>(n: &'a PatternNode, parent: Option<String>, axis: Axis, out: &mut Vec<(&'a PatternNode, Option<String>, Axis)>) {
        out.push((n, parent, axis));
        for (a, c) in &n.children {
            go(c, Some(n.var.clone()), *a, out);
        }
    }
    for p in &q.patterns {
        go(&p.root, None, p.axis, &mut nodes);
    }
    let mut out = Vec::new();
    fn rec(
        g: &DtdGraph,
        nodes: &[(&PatternNode, Option<String>, Axis)],
        k: usize,
        placed: &mut BTreeMap<String, NodeIdx>,
        cur: &mut Placement,
        out: &mut Vec<Placement>,
    ) {
        if out.len() >= SCENARIO_LIMIT {
            return;
        }
        if k == nodes.len() {
            out.push(cur.clone());
            return;
        }
        let (n, parent, axis) = &nodes[k];
        let mut options: Vec<Vec<NodeIdx>> = Vec::new();
        for t in tag_nodes(g, &n.tag) {
            match parent {
                None => {
                    if t == g.root {
                        options.push(vec![]);
                    } else if *axis == Axis::Descendant {
                        options.extend(node_paths(g, g.root, t));
                    }
                }
                Some(pv) => {
                    let from = placed[pv];
                    match axis {
                        Axis::Child => {
                            if g.edge(from, t).is_some() {
                                options.push(vec![t]);
                            }
                        }
                        Axis::Descendant => options.extend(node_paths(g, from, t).into_iter().filter(|p| !p.is_empty())),
                    }
                }
            }
        }
        for opt in options {
            let end = opt.last().copied().unwrap_or(g.root);
            placed.insert(n.var.clone(), end);
            cur.push((n.var.clone(), opt));
            rec(g, nodes, k + 1, placed, cur, out);
            cur.pop();
        }
        placed.remove(&n.var);
    }
    rec(g, &nodes, 0, &mut BTreeMap::new(), &mut Vec::new(), &mut out);
    out
}

struct Freezer<'a> {
    g: &'a DtdGraph,
    inst: XmlInstance,
    dtd_of: Vec<NodeIdx>,
    under_leaf: Vec<bool>,
    k: usize,
    witness: BTreeSet<String>,
}

impl<'a> Freezer<'a> {
    fn add(&mut self, parent: Option<usize>, n: NodeIdx, value: Option<String>, under_leaf: bool) -> usize {
        let i = self.inst.len();
        let v = if self.g.node(n).valued {
            let v = value.unwrap_or_else(|| fresh(&mut self.k, 'c'));
            if under_leaf {
                self.witness.insert(v.clone());
            }
            Some(Value::Text(v))
        } else {
            None
        };
        self.inst.add(parent, self.g.tag(n), NodeIdValue::Source(i as u64), v);
        self.dtd_of.push(n);
        self.under_leaf.push(under_leaf);
        i
    }

    /// Adds required children and attributes below every node from `start` on.
    fn complete(&mut self, start: usize) {
        let mut i = start;
        while i < self.inst.len() {
            let n = self.dtd_of[i];
            let edges: Vec<_> = self.g.children(n).copied().collect();
            for e in edges {
                if !e.card.is_guaranteed() {
                    continue;
                }
                let tag = self.g.tag(e.child).to_string();
                if !self.inst.children(i).iter().any(|&c| self.inst.tag(c) == tag) {
                    let ul = self.under_leaf[i];
                    self.add(Some(i), e.child, None, ul);
                }
            }
            i += 1;
        }
    }

    fn value_of(&self, i: usize) -> Option<String> {
        match self.inst.value(i) {
            Some(Value::Text(t)) => Some(t.clone()),
            _ => None,
        }
    }

    /// Adds the other side of every IDREF link that has only one side.
    fn close_links(&mut self) {
        let links = self.g.links.clone();
        for l in links {
            let side = |me: &Self, elem: NodeIdx, attr: NodeIdx| -> BTreeSet<String> {
                (0..me.inst.len())
                    .filter(|&i| me.dtd_of[i] == attr && me.inst.node(i).parent.is_some_and(|p| me.dtd_of[p] == elem))
                    .filter_map(|i| me.value_of(i))
                    .collect()
            };
            let ids = side(self, l.id_elem, l.id_attr);
            let refs = side(self, l.ref_elem, l.ref_attr);
            // a reference may point into any of its links' targets
            let any_target: BTreeSet<String> = self
                .g
                .links
                .iter()
                .filter(|m| m.ref_elem == l.ref_elem && m.ref_attr == l.ref_attr)
                .flat_map(|m| side(self, m.id_elem, m.id_attr))
                .collect();
            for (missing, elem, attr) in [
                (ids.difference(&refs).cloned().collect::<Vec<_>>(), l.ref_elem, l.ref_attr),
                (refs.difference(&any_target).cloned().collect::<Vec<_>>(), l.id_elem, l.id_attr),
            ] {
                for v in missing {
                    let Some(path) = node_paths(self.g, self.g.root, elem).into_iter().next() else { continue };
                    let start = self.inst.len();
                    let mut at = self.inst.root().unwrap();
                    for &n in &path {
                        at = self.add(Some(at), n, None, false);
                    }
                    self.add(Some(at), attr, Some(v), false);
                    self.complete(start);
                }
            }
        }
    }
}

fn freeze(g: &DtdGraph, q: &TpQuery, consts: &Constants, placement: &Placement, k: &mut usize) -> Scenario {
    let mut f = Freezer { g, inst: XmlInstance::empty(&g.name), dtd_of: vec![], under_leaf: vec![], k: *k, witness: BTreeSet::new() };
    let root = f.add(None, g.root, None, false);
    let mut at: BTreeMap<String, usize> = BTreeMap::new();
    let parent_of: BTreeMap<String, Option<String>> = q
        .patterns
        .iter()
        .flat_map(|p| p.root.preorder().into_iter().map(move |n| (n.var.clone(), p.parent_of(&n.var).map(|x| x.0.var.clone()))))
        .collect();
    let leaf: BTreeSet<String> = q.patterns.iter().flat_map(|p| p.root.preorder()).filter(|n| n.is_leaf()).map(|n| n.var.clone()).collect();
    for (var, path) in placement {
        let mut cur = match &parent_of[var] {
            Some(p) => at[p],
            None => root,
        };
        if path.is_empty() {
            at.insert(var.clone(), root);
            continue;
        }
        for (i, &n) in path.iter().enumerate() {
            let last = i + 1 == path.len();
            let single = g.edge(f.dtd_of[cur], n).is_some_and(|e| e.card.is_single());
            if let Some(&same) = f.inst.children(cur).iter().find(|&&c| single && f.inst.tag(c) == g.tag(n)) {
                cur = same;
                continue;
            }
            let value = if last { consts.of_var.get(var).cloned() } else { None };
            cur = f.add(Some(cur), n, value, false);
        }
        if leaf.contains(var) {
            f.under_leaf[cur] = true;
        }
        at.insert(var.clone(), cur);
    }
    f.complete(0);
    f.close_links();
    *k = f.k;
    Scenario { inst: f.inst, at, witness: f.witness }
}

/// All frozen instances of a query.
pub(crate) fn scenarios(ctx: &MappingContext, q: &TpQuery) -> (Option<Constants>, Vec<Scenario>) {
    let mut k = 0;
    let Some(consts) = Constants::build(&ctx.source, q, &mut k) else { return (None, vec![]) };
    let out = placements(&ctx.source, q).iter().map(|p| freeze(&ctx.source, q, &consts, p, &mut k)).collect();
    (Some(consts), out)
}

/// Which query values a target pattern is read against.
pub(crate) struct Focus<'a> {
    pub relevant: BTreeSet<String>,
    pub witness: &'a BTreeSet<String>,
    /// Values whose first carrier becomes a distinguished node, in order.
    pub shown: Vec<String>,
    /// Join the carriers of completion values too, not only of query values.
    pub link_all: bool,
}

/// Reads candidate target patterns off an exchanged frozen instance.
pub(crate) fn extract(ctx: &MappingContext, out: &XmlInstance, consts: &Constants, focus: &Focus) -> Vec<Cq> {
    let Some(root) = out.root() else { return vec![] };
    let mut cq = Cq::new();
    let mut idx: BTreeMap<usize, usize> = BTreeMap::new();
    let mut carriers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut op_tags: Vec<(usize, String)> = Vec::new();
    for i in out.preorder() {
        let n = out.node(i);
        let parent = n.parent.map(|p| idx[&p]);
        let tag = if is_fresh(&n.tag) {
            if consts.ops.contains_key(&n.tag) {
                op_tags.push((cq.nodes.len(), n.tag.clone()));
            }
            TagTest::Wildcard
        } else {
            TagTest::Name(n.tag.clone())
        };
        let c = cq.add(tag, parent, Axis::Child);
        idx.insert(i, c);
        if let NodeIdValue::Skolem { args, .. } = &n.id {
            let hit = args.iter().any(|a| matches!(a, Ground::Text(t) if focus.relevant.contains(t)));
            let tag_hit = !is_fresh(&n.tag) && consts.literals.contains(&n.tag) && focus.relevant.contains(&n.tag);
            if hit || tag_hit {
                cq.nodes[c].keep = true;
            }
        }
        if out.children(i).is_empty() {
            if let Some(Value::Text(v)) = out.value(i) {
                carriers.entry(v.clone()).or_default().push(c);
                if focus.relevant.contains(v) || focus.witness.contains(v) {
                    cq.nodes[c].keep = true;
                }
                if consts.literals.contains(v) {
                    if focus.relevant.contains(v) {
                        cq.nodes[c].lits.push((CmpOp::Eq, v.clone()));
                    }
                } else if let Some(os) = consts.ops.get(v) {
                    if focus.relevant.contains(v) {
                        cq.nodes[c].lits.extend(os.iter().cloned());
                    }
                }
            }
        }
    }
    let _ = root;
    for (v, cs) in &carriers {
        if consts.literals.contains(v) || !(focus.link_all || focus.relevant.contains(v) || focus.witness.contains(v)) {
            continue;
        }
        for w in cs.windows(2) {
            cq.union(w[0], w[1]);
        }
    }
    for (a, op, b) in &consts.cross {
        if let (Some(x), Some(y)) = (carriers.get(a).and_then(|c| c.first()), carriers.get(b).and_then(|c| c.first())) {
            if focus.relevant.contains(a) {
                cq.nodes[*x].cross.push((*op, *y));
            }
        }
    }
    for v in &focus.shown {
        match carriers.get(v).and_then(|c| c.first()) {
            Some(&x) => cq.returns.push(x),
            None => return vec![],
        }
    }
    // a tag standing for a compared value expands to each schema tag that satisfies it
    let mut out_cqs = vec![cq];
    for (node, value) in op_tags {
        let ops = &consts.ops[&value];
        let mut next = Vec::new();
        for c in &out_cqs {
            let parent_tag = c.nodes[node].parent.and_then(|p| match &c.nodes[p].tag {
                TagTest::Name(t) => ctx.target.lookup(t.as_str()),
                TagTest::Wildcard => None,
            });
            let Some(pt) = parent_tag else { continue };
            for e in ctx.target.children(pt) {
                let t = ctx.target.tag(e.child);
                if t.starts_with('@') || !ops.iter().all(|(op, l)| op.holds(t, l)) {
                    continue;
                }
                let mut c2 = c.clone();
                c2.nodes[node].tag = TagTest::Name(t.to_string());
                c2.nodes[node].keep = true;
                next.push(c2);
            }
        }
        out_cqs = next;
    }
    out_cqs
}

/// Minimizes a target candidate and returns it with its contracted form.
pub(crate) fn finish(ctx: &MappingContext, mut cq: Cq) -> Option<(Cq, Cq)> {
    cq.check_literals();
    if cq.unsat {
        return None;
    }
    cq.fold();
    let mut c = cq.clone();
    c.contract(&ctx.target, LeafPolicy::Always);
    Some((cq, c))
}

pub(crate) fn exchange(rules: &[MappingRule], s: &Scenario, g: &DtdGraph) -> Result<XmlInstance, TranslateError> {
    apply_rules(rules, &s.inst, g).map_err(|e| TranslateError::Untranslatable(format!("the frozen query does not exchange: {e}")))
}
