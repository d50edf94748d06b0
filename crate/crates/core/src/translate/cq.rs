//! Flat conjunctive tree queries with value-equality classes: the working form for
//! stitching, minimization, contraction and containment.

use std::collections::{BTreeMap, BTreeSet};

use crate::query::{Axis, CmpOp, Operand, PatternNode, TagTest, TpQuery, TreePattern, ValueConstraint};
use crate::schema::{dtd_paths, AttrKind, DtdGraph, LabelPath, NodeIdx, NodeKind};

#[derive(Debug, Clone)]
pub(crate) struct CqNode {
    pub tag: TagTest,
    pub parent: Option<usize>,
    /// Edge from the parent, or from the document node for roots.
    pub axis: Axis,
    pub lits: Vec<(CmpOp, String)>,
    pub cross: Vec<(CmpOp, usize)>,
    pub alive: bool,
    /// Never treated as a dummy.
    pub keep: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Cq {
    pub nodes: Vec<CqNode>,
    uf: Vec<usize>,
    pub returns: Vec<usize>,
    pub unsat: bool,
}

/// How contraction treats dummy leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LeafPolicy {
    /// Drop only leaves the schema guarantees to exist.
    Guaranteed,
    Always,
}

impl Cq {
    pub fn new() -> Self {
        Cq { nodes: Vec::new(), uf: Vec::new(), returns: Vec::new(), unsat: false }
    }

    pub fn add(&mut self, tag: TagTest, parent: Option<usize>, axis: Axis) -> usize {
        let i = self.nodes.len();
        self.nodes.push(CqNode { tag, parent, axis, lits: vec![], cross: vec![], alive: true, keep: false });
        self.uf.push(i);
        i
    }

    pub fn find(&self, mut i: usize) -> usize {
        while self.uf[i] != i {
            i = self.uf[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.uf[hi] = lo;
        }
    }

    pub fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].alive)
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        self.alive().filter(|&c| self.nodes[c].parent == Some(i)).collect()
    }

    pub fn roots(&self) -> Vec<usize> {
        self.alive().filter(|&c| self.nodes[c].parent.is_none()).collect()
    }

    fn class_size(&self, i: usize) -> usize {
        let r = self.find(i);
        self.alive().filter(|&j| self.find(j) == r).count()
    }

    fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            out.extend(self.children(out[k]));
            k += 1;
        }
        out
    }

    fn cross_touches(&self, i: usize) -> bool {
        !self.nodes[i].cross.is_empty() || self.alive().any(|j| self.nodes[j].cross.iter().any(|c| c.1 == i))
    }

    /// Whether removing the node would drop a condition.
    pub fn used(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.keep || self.returns.contains(&i) || !n.lits.is_empty() || self.cross_touches(i) || self.class_size(i) > 1
    }

    /// Roots whose whole pattern carries no condition.
    pub fn idle_roots(&self) -> Vec<usize> {
        self.roots().into_iter().filter(|&r| self.roots().len() > 1 && !self.subtree(r).iter().any(|&j| self.used(j))).collect()
    }

    /// A copy without the pattern rooted at `r`.
    pub fn without(&self, r: usize) -> Cq {
        let mut c = self.clone();
        for j in self.subtree(r) {
            c.nodes[j].alive = false;
        }
        c
    }

    /// Equal literals that hold for the whole class of `i`.
    fn class_eq_lits(&self, i: usize) -> Vec<String> {
        let r = self.find(i);
        self.alive()
            .filter(|&j| self.find(j) == r)
            .flat_map(|j| self.nodes[j].lits.iter().filter(|l| l.0 == CmpOp::Eq).map(|l| l.1.clone()))
            .collect()
    }

    fn implies(&self, y: usize, op: CmpOp, lit: &str) -> bool {
        self.nodes[y].lits.iter().any(|(o, l)| *o == op && l == lit) || self.class_eq_lits(y).iter().any(|v| op.holds(v, lit))
    }

    /// Marks the query unsatisfiable when one class carries two different equal literals.
    pub fn check_literals(&mut self) {
        let mut by_class: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for i in self.alive().collect::<Vec<_>>() {
            for (op, l) in &self.nodes[i].lits {
                if *op == CmpOp::Eq {
                    by_class.entry(self.find(i)).or_default().insert(l.clone());
                }
            }
        }
        if by_class.values().any(|s| s.len() > 1) {
            self.unsat = true;
        }
        for i in self.alive().collect::<Vec<_>>() {
            let eqs = self.class_eq_lits(i);
            if let Some(v) = eqs.first() {
                if self.nodes[i].lits.iter().any(|(op, l)| !op.holds(v, l)) {
                    self.unsat = true;
                }
            }
        }
    }

    /// Identifies two nodes. Parents are identified first; returns false when the edges
    /// involved make that inexpressible.
    pub fn merge(&mut self, x: usize, y: usize) -> bool {
        if x == y {
            return true;
        }
        let (tx, ty) = (self.nodes[x].tag.clone(), self.nodes[y].tag.clone());
        let tag = match (&tx, &ty) {
            (a, b) if a == b => a.clone(),
            (TagTest::Wildcard, TagTest::Name(n)) | (TagTest::Name(n), TagTest::Wildcard) if !n.starts_with('@') => {
                TagTest::Name(n.clone())
            }
            _ => {
                self.unsat = true;
                return false;
            }
        };
        match (self.nodes[x].parent, self.nodes[y].parent) {
            (Some(px), Some(py)) => {
                if self.nodes[x].axis != Axis::Child || self.nodes[y].axis != Axis::Child {
                    return false;
                }
                if !self.merge(px, py) {
                    return false;
                }
            }
            (None, None) => {
                if self.nodes[x].axis == Axis::Child {
                    self.nodes[y].axis = Axis::Child;
                }
            }
            _ => return false,
        }
        self.nodes[y].tag = tag;
        for c in 0..self.nodes.len() {
            if self.nodes[c].parent == Some(x) {
                self.nodes[c].parent = Some(y);
            }
            for cr in &mut self.nodes[c].cross {
                if cr.1 == x {
                    cr.1 = y;
                }
            }
        }
        let lits = std::mem::take(&mut self.nodes[x].lits);
        let cross = std::mem::take(&mut self.nodes[x].cross);
        let keep = self.nodes[x].keep;
        let n = &mut self.nodes[y];
        n.keep |= keep;
        for l in lits {
            if !n.lits.contains(&l) {
                n.lits.push(l);
            }
        }
        n.cross.extend(cross);
        for r in &mut self.returns {
            if *r == x {
                *r = y;
            }
        }
        self.union(x, y);
        self.nodes[x].alive = false;
        true
    }

    /// Identifies elements whose ID attributes carry equal values.
    pub fn id_chase(&mut self, g: &DtdGraph) {
        loop {
            let ids: Vec<usize> = self
                .alive()
                .filter(|&i| match &self.nodes[i].tag {
                    TagTest::Name(t) => g.lookup(t).is_some_and(|n| g.node(n).kind == NodeKind::Attribute(AttrKind::Id)),
                    _ => false,
                })
                .filter(|&i| self.nodes[i].axis == Axis::Child && self.nodes[i].parent.is_some())
                .collect();
            let mut pair = None;
            'outer: for (k, &a) in ids.iter().enumerate() {
                for &b in &ids[k + 1..] {
                    if self.find(a) == self.find(b) && self.nodes[a].tag == self.nodes[b].tag {
                        let (pa, pb) = (self.nodes[a].parent.unwrap(), self.nodes[b].parent.unwrap());
                        if pa != pb || a != b {
                            pair = Some((a, b));
                            break 'outer;
                        }
                    }
                }
            }
            let Some((a, b)) = pair else { return };
            let before = self.nodes.iter().filter(|n| n.alive).count();
            self.merge(b, a);
            if self.unsat || self.nodes.iter().filter(|n| n.alive).count() == before {
                return;
            }
        }
    }

    /// Adds the children and attributes the schema requires, recursively.
    pub fn complete(&mut self, g: &DtdGraph) {
        let mut k = 0;
        while k < self.nodes.len() {
            if self.nodes[k].alive {
                if let TagTest::Name(t) = self.nodes[k].tag.clone() {
                    if let Some(n) = g.lookup(&t) {
                        let have: BTreeSet<String> = self
                            .children(k)
                            .into_iter()
                            .filter(|&c| self.nodes[c].axis == Axis::Child)
                            .filter_map(|c| match &self.nodes[c].tag {
                                TagTest::Name(x) => Some(x.clone()),
                                _ => None,
                            })
                            .collect();
                        let edges: Vec<_> = g.children(n).copied().collect();
                        for e in edges {
                            let ct = g.tag(e.child).to_string();
                            if e.card.is_guaranteed() && !have.contains(&ct) {
                                self.add(TagTest::Name(ct), Some(k), Axis::Child);
                            }
                        }
                    }
                }
            }
            k += 1;
        }
    }

    fn tag_ok(x: &TagTest, y: &TagTest) -> bool {
        match (x, y) {
            (TagTest::Wildcard, TagTest::Name(n)) => !n.starts_with('@'),
            (a, b) => a == b,
        }
    }

    /// Proper descendants of `y`.
    fn descendants(&self, y: usize) -> Vec<usize> {
        let mut s = self.subtree(y);
        s.remove(0);
        s
    }

    /// Searches a homomorphism from the subtree of `x` in `from` into the subtree of `y` in
    /// `self`, extending `m`; `check` validates complete assignments.
    #[allow(clippy::too_many_arguments)]
    fn hom_search(
        &self,
        from: &Cq,
        order: &[(usize, Option<usize>)],
        k: usize,
        m: &mut BTreeMap<usize, usize>,
        lit_ok: &dyn Fn(usize, usize) -> bool,
        check: &dyn Fn(&BTreeMap<usize, usize>) -> bool,
    ) -> bool {
        if k == order.len() {
            return check(m);
        }
        let (x, fixed) = order[k];
        let xn = &from.nodes[x];
        let cands: Vec<usize> = match fixed {
            Some(y) => vec![y],
            None => {
                let p = m[&xn.parent.expect("non-first nodes have parents")];
                match xn.axis {
                    Axis::Child => self.children(p).into_iter().filter(|&c| self.nodes[c].axis == Axis::Child).collect(),
                    Axis::Descendant => self.descendants(p),
                }
            }
        };
        for y in cands {
            if !Self::tag_ok(&xn.tag, &self.nodes[y].tag) {
                continue;
            }
            if !lit_ok(x, y) {
                continue;
            }
            m.insert(x, y);
            if self.hom_search(from, order, k + 1, m, lit_ok, check) {
                return true;
            }
            m.remove(&x);
        }
        false
    }

    /// Tries to fold the subtree at `c` onto the subtree at `t`.
    fn try_fold(&mut self, c: usize, t: usize) -> bool {
        let sub = self.subtree(c);
        if sub.contains(&t) || sub.iter().any(|&i| self.cross_touches(i)) || sub.iter().any(|&i| self.nodes[i].keep) {
            return false;
        }
        let inside: BTreeSet<usize> = sub.iter().copied().collect();
        let order: Vec<(usize, Option<usize>)> = sub.iter().map(|&i| (i, if i == c { Some(t) } else { None })).collect();
        let returns = self.returns.clone();
        let me = &*self;
        let check = |m: &BTreeMap<usize, usize>| -> bool {
            // classes reaching outside must map into themselves; inner classes map into one class
            let mut inner: BTreeMap<usize, usize> = BTreeMap::new();
            for (&x, &y) in m {
                let r = me.find(x);
                let outside = me.alive().any(|j| me.find(j) == r && !inside.contains(&j));
                if outside || returns.contains(&x) {
                    if me.find(y) != r {
                        return false;
                    }
                } else if let Some(&prev) = inner.get(&r) {
                    if me.find(y) != prev {
                        return false;
                    }
                } else {
                    inner.insert(r, me.find(y));
                }
            }
            true
        };
        // literals must follow from what stays, or move along with an equal value
        let lit_ok = |x: usize, y: usize| -> bool {
            me.find(x) == me.find(y)
                || me.nodes[x].lits.iter().all(|(op, l)| {
                    me.nodes[y].lits.iter().any(|(o, v)| o == op && v == l)
                        || me
                            .alive()
                            .filter(|&j| me.find(j) == me.find(y) && !inside.contains(&j))
                            .flat_map(|j| me.nodes[j].lits.iter().filter(|v| v.0 == CmpOp::Eq))
                            .any(|v| op.holds(&v.1, l))
                })
        };
        let mut m = BTreeMap::new();
        if !self.hom_search(self, &order, 0, &mut m, &lit_ok, &check) {
            return false;
        }
        for (&x, &y) in &m {
            if x != y && self.find(x) == self.find(y) {
                let lits = self.nodes[x].lits.clone();
                for l in lits {
                    if !self.nodes[y].lits.contains(&l) {
                        self.nodes[y].lits.push(l);
                    }
                }
            }
        }
        for r in &mut self.returns {
            if let Some(&y) = m.get(r) {
                *r = y;
            }
        }
        for &i in &sub {
            self.nodes[i].alive = false;
        }
        true
    }

    /// Removes sibling subtrees that map into other siblings.
    pub fn fold(&mut self) {
        loop {
            let mut changed = false;
            let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
            for i in self.alive() {
                groups.entry(self.nodes[i].parent).or_default().push(i);
            }
            'scan: for sibs in groups.values() {
                for &c in sibs {
                    for &t in sibs {
                        if c == t || !self.nodes[c].alive || !self.nodes[t].alive {
                            continue;
                        }
                        if self.nodes[c].axis == Axis::Child && self.nodes[t].axis != Axis::Child {
                            continue;
                        }
                        if self.try_fold(c, t) {
                            changed = true;
                            break 'scan;
                        }
                    }
                }
            }
            if !changed {
                return;
            }
        }
    }

    /// Whether every answer of `self` is an answer of `q` on every instance: a
    /// homomorphism from `q` into `self` preserving tags, edges, literals, joins and returns.
    pub fn contained_in(&self, q: &Cq) -> bool {
        if self.unsat {
            return true;
        }
        if q.unsat || q.returns.len() != self.returns.len() || q.alive().any(|i| !q.nodes[i].cross.is_empty()) {
            return false;
        }
        let mut order: Vec<(usize, Option<usize>)> = Vec::new();
        let roots = q.roots();
        for &r in &roots {
            for i in q.subtree(r) {
                order.push((i, None));
            }
        }
        let check = |m: &BTreeMap<usize, usize>| -> bool {
            let mut classes: BTreeMap<usize, usize> = BTreeMap::new();
            for (&x, &y) in m {
                if q.class_size(x) > 1 {
                    match classes.get(&q.find(x)) {
                        Some(&c) if c != self.find(y) => return false,
                        Some(_) => {}
                        None => {
                            classes.insert(q.find(x), self.find(y));
                        }
                    }
                }
            }
            q.returns.iter().zip(&self.returns).all(|(a, b)| self.find(m[a]) == self.find(*b))
        };
        self.root_search(q, &order, 0, &mut BTreeMap::new(), &check)
    }

    fn root_search(
        &self,
        q: &Cq,
        order: &[(usize, Option<usize>)],
        k: usize,
        m: &mut BTreeMap<usize, usize>,
        check: &dyn Fn(&BTreeMap<usize, usize>) -> bool,
    ) -> bool {
        if k == order.len() {
            return check(m);
        }
        let x = order[k].0;
        let xn = &q.nodes[x];
        let cands: Vec<usize> = match xn.parent {
            None => match xn.axis {
                Axis::Child => self.roots().into_iter().filter(|&r| self.nodes[r].axis == Axis::Child).collect(),
                Axis::Descendant => self.alive().collect(),
            },
            Some(p) => match xn.axis {
                Axis::Child => self.children(m[&p]).into_iter().filter(|&c| self.nodes[c].axis == Axis::Child).collect(),
                Axis::Descendant => self.descendants(m[&p]),
            },
        };
        for y in cands {
            if !Self::tag_ok(&xn.tag, &self.nodes[y].tag) || !xn.lits.iter().all(|(op, l)| self.implies(y, *op, l)) {
                continue;
            }
            m.insert(x, y);
            if self.root_search(q, order, k + 1, m, check) {
                return true;
            }
            m.remove(&x);
        }
        false
    }

    fn tag_nodes(g: &DtdGraph, t: &TagTest) -> Vec<NodeIdx> {
        match t {
            TagTest::Name(n) => g.lookup(n).into_iter().collect(),
            TagTest::Wildcard => g.node_ids().filter(|&n| !g.node(n).is_attribute()).collect(),
        }
    }

    /// Label paths below `from` reaching `to` over one edge of the given axis.
    fn edge_paths(g: &DtdGraph, from: NodeIdx, to: NodeIdx, axis: Axis) -> BTreeSet<LabelPath> {
        match axis {
            Axis::Child => {
                if g.edge(from, to).is_some() {
                    BTreeSet::from([vec![g.tag(to).to_string()]])
                } else {
                    BTreeSet::new()
                }
            }
            Axis::Descendant => dtd_paths(g, from, to).into_iter().filter(|p| !p.is_empty()).collect(),
        }
    }

    /// Paths from the document node to `to`; the document element is the first label.
    fn doc_paths(g: &DtdGraph, to: NodeIdx, axis: Axis) -> BTreeSet<LabelPath> {
        let root = g.tag(g.root).to_string();
        if to == g.root {
            return BTreeSet::from([vec![root]]);
        }
        match axis {
            Axis::Child => BTreeSet::new(),
            Axis::Descendant => dtd_paths(g, g.root, to).into_iter().map(|p| std::iter::once(root.clone()).chain(p).collect()).collect(),
        }
    }

    /// Whether dropping `v` between `parent` (None for the document) and `child`, joined by
    /// a descendant edge, keeps the schema paths between them.
    fn can_skip(&self, g: &DtdGraph, parent: Option<usize>, v: usize, child: usize) -> bool {
        let vn = &self.nodes[v];
        let cn = &self.nodes[child];
        let vtags = Self::tag_nodes(g, &vn.tag);
        let ctags = Self::tag_nodes(g, &cn.tag);
        let ptags: Vec<Option<NodeIdx>> = match parent {
            None => vec![None],
            Some(p) => Self::tag_nodes(g, &self.nodes[p].tag).into_iter().map(Some).collect(),
        };
        for pt in &ptags {
            for &ct in &ctags {
                let mut through = BTreeSet::new();
                for &vt in &vtags {
                    let first = match pt {
                        None => Self::doc_paths(g, vt, vn.axis),
                        Some(p) => Self::edge_paths(g, *p, vt, vn.axis),
                    };
                    let second = Self::edge_paths(g, vt, ct, cn.axis);
                    for a in &first {
                        for b in &second {
                            through.insert(a.iter().chain(b).cloned().collect::<Vec<_>>());
                        }
                    }
                }
                let all = match pt {
                    None => Self::doc_paths(g, ct, Axis::Descendant),
                    Some(p) => Self::edge_paths(g, *p, ct, Axis::Descendant),
                };
                if through != all {
                    return false;
                }
            }
        }
        true
    }

    fn leaf_guaranteed(&self, g: &DtdGraph, i: usize) -> bool {
        let n = &self.nodes[i];
        let (Some(p), TagTest::Name(t)) = (n.parent, &n.tag) else { return false };
        let TagTest::Name(pt) = &self.nodes[p].tag else { return false };
        if n.axis != Axis::Child {
            return false;
        }
        match (g.lookup(pt), g.lookup(t)) {
            (Some(a), Some(b)) => g.edge(a, b).is_some_and(|e| e.card.is_guaranteed()),
            _ => false,
        }
    }

    /// Drops dummy nodes: leaves per `policy`, single-child internal nodes when the schema
    /// paths are unchanged, and a dummy document element whose children can stand alone.
    pub fn contract(&mut self, g: &DtdGraph, policy: LeafPolicy) {
        loop {
            let mut changed = false;
            for i in self.alive().collect::<Vec<_>>() {
                if !self.nodes[i].alive || self.used(i) {
                    continue;
                }
                let kids = self.children(i);
                let parent = self.nodes[i].parent;
                if kids.is_empty() {
                    if parent.is_some() && (policy == LeafPolicy::Always || self.leaf_guaranteed(g, i)) {
                        self.nodes[i].alive = false;
                        changed = true;
                    }
                } else if kids.len() == 1 {
                    if !self.is_attribute(kids[0]) && self.can_skip(g, parent, i, kids[0]) {
                        self.nodes[kids[0]].parent = parent;
                        self.nodes[kids[0]].axis = Axis::Descendant;
                        self.nodes[i].alive = false;
                        changed = true;
                    }
                } else if parent.is_none() && self.is_document_element(g, i) && kids.iter().all(|&c| self.can_skip(g, None, i, c)) {
                    for c in kids {
                        self.nodes[c].parent = None;
                        self.nodes[c].axis = Axis::Descendant;
                    }
                    self.nodes[i].alive = false;
                    changed = true;
                }
            }
            if !changed {
                return;
            }
        }
    }

    fn is_attribute(&self, i: usize) -> bool {
        matches!(&self.nodes[i].tag, TagTest::Name(t) if t.starts_with('@'))
    }

    fn is_document_element(&self, g: &DtdGraph, i: usize) -> bool {
        matches!(&self.nodes[i].tag, TagTest::Name(t) if g.tag(g.root) == t)
    }

    /// Root patterns ordered with returning patterns first.
    fn ordered_roots(&self) -> Vec<usize> {
        let mut roots = self.roots();
        let first_return = |r: usize| -> usize {
            let sub = self.subtree(r);
            self.returns.iter().position(|x| sub.contains(x)).unwrap_or(usize::MAX)
        };
        roots.sort_by_key(|&r| (first_return(r), r));
        roots
    }

    pub fn to_query(&self) -> TpQuery {
        let var = |i: usize| format!("_{i}");
        fn build(cq: &Cq, i: usize, var: &dyn Fn(usize) -> String) -> PatternNode {
            let n = &cq.nodes[i];
            let mut p = PatternNode::new(&var(i), n.tag.clone());
            p.constraints = n.lits.iter().map(|(op, l)| ValueConstraint { op: *op, operand: Operand::Lit(l.clone()) }).collect();
            p.constraints.extend(n.cross.iter().map(|(op, o)| ValueConstraint { op: *op, operand: Operand::Var(var(*o)) }));
            p.children = cq.children(i).into_iter().map(|c| (cq.nodes[c].axis, build(cq, c, var))).collect();
            p
        }
        let patterns: Vec<TreePattern> =
            self.ordered_roots().into_iter().map(|r| TreePattern { axis: self.nodes[r].axis, root: build(self, r, &var) }).collect();
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for p in &patterns {
            for n in p.root.preorder() {
                let i: usize = n.var[1..].parse().unwrap();
                classes.entry(self.find(i)).or_default().push(i);
            }
        }
        let mut joins = Vec::new();
        for members in classes.values() {
            for w in members.windows(2) {
                joins.push((var(w[0]), var(w[1])));
            }
        }
        TpQuery { patterns, joins, returns: self.returns.iter().map(|&r| var(r)).collect() }
    }

    pub fn from_query(q: &TpQuery) -> (Cq, BTreeMap<String, usize>) {
        let mut cq = Cq::new();
        let mut map = BTreeMap::new();
        fn add(cq: &mut Cq, n: &PatternNode, parent: Option<usize>, axis: Axis, map: &mut BTreeMap<String, usize>) {
            let i = cq.add(n.tag.clone(), parent, axis);
            map.insert(n.var.clone(), i);
            for (ax, c) in &n.children {
                add(cq, c, Some(i), *ax, map);
            }
        }
        for p in &q.patterns {
            add(&mut cq, &p.root, None, p.axis, &mut map);
        }
        for p in &q.patterns {
            for n in p.root.preorder() {
                let i = map[&n.var];
                for c in &n.constraints {
                    match &c.operand {
                        Operand::Lit(l) => cq.nodes[i].lits.push((c.op, l.clone())),
                        Operand::Var(o) => cq.nodes[i].cross.push((c.op, map[o])),
                    }
                }
            }
        }
        for (a, b) in &q.joins {
            cq.union(map[a], map[b]);
        }
        cq.returns = q.returns.iter().map(|r| map[r]).collect();
        (cq, map)
    }
}
