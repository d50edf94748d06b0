use std::collections::BTreeSet;

use crate::schema::{BoxDecl, CorrespondenceSet, DtdGraph, NodeIdx};

use super::Side;

/// A node occurrence in the DTD unfolded as a tree: the node indices from the root down.
pub type Position = Vec<NodeIdx>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub id: String,
    pub members: BTreeSet<Position>,
}

impl Group {
    pub fn contains(&self, pos: &[NodeIdx]) -> bool {
        self.members.contains(pos)
    }

    pub fn qualified_names(&self, g: &DtdGraph, boxes: &[BoxDecl]) -> BTreeSet<String> {
        self.members.iter().map(|p| qualified_name(g, boxes, p)).collect()
    }
}

/// Display name of a position: the tag, prefixed by the parent tag when the node is shared
/// by parents that are not all members of one box.
pub fn qualified_name(g: &DtdGraph, boxes: &[BoxDecl], pos: &[NodeIdx]) -> String {
    let node = *pos.last().expect("empty position");
    let parents: Vec<NodeIdx> = g.parents(node).map(|e| e.parent).collect();
    let boxed = boxes.iter().any(|b| parents.iter().all(|p| b.contains(*p)));
    if parents.len() <= 1 || boxed || pos.len() < 2 {
        g.tag(node).to_string()
    } else {
        format!("{}_{}", g.tag(pos[pos.len() - 2]), g.tag(node))
    }
}

fn descendants(g: &DtdGraph, pos: &Position, out: &mut BTreeSet<Position>) {
    for e in g.children(*pos.last().unwrap()) {
        let mut c = pos.clone();
        c.push(e.child);
        descendants(g, &c, out);
        out.insert(c);
    }
}

fn with_ancestors(pos: &Position, out: &mut BTreeSet<Position>) {
    for i in 1..=pos.len() {
        out.insert(pos[..i].to_vec());
    }
}

/// A stop node: one position, or the positions of boxed siblings reached through starred edges.
type Stop = Vec<Position>;

struct Marker<'a> {
    g: &'a DtdGraph,
    boxes: &'a [BoxDecl],
    groups: Vec<BTreeSet<Position>>,
    pending_rest: Vec<(Stop, Vec<Position>)>,
}

impl Marker<'_> {
    fn out_degree(&self, stop: &Stop) -> usize {
        self.g.out_degree(*stop[0].last().unwrap())
    }

    /// Step 2: walk single-valued edges below `p`, collecting stop nodes and traversed nodes.
    fn scan(&self, p: &Stop) -> (Vec<Stop>, Vec<Position>) {
        let mut stops: Vec<(Option<usize>, NodeIdx, Stop)> = Vec::new();
        let mut local = Vec::new();
        let mut work: Vec<Position> = p.iter().rev().cloned().collect();
        while let Some(pos) = work.pop() {
            let mut next = Vec::new();
            for e in self.g.children(*pos.last().unwrap()) {
                let mut c = pos.clone();
                c.push(e.child);
                if e.card.is_single() {
                    local.push(c.clone());
                    next.push(c);
                } else {
                    let bx = self.boxes.iter().position(|b| b.contains(e.child));
                    let key_node = if bx.is_some() { NodeIdx(usize::MAX) } else { e.child };
                    match stops.iter_mut().find(|(b, n, _)| *b == bx && *n == key_node) {
                        Some((_, _, s)) => s.push(c),
                        None => stops.push((bx, key_node, vec![c])),
                    }
                }
            }
            work.extend(next.into_iter().rev());
        }
        (stops.into_iter().map(|(_, _, s)| s).collect(), local)
    }

    fn subtree_group(&mut self, stop: &Stop) {
        let mut set = BTreeSet::new();
        for pos in stop {
            with_ancestors(pos, &mut set);
            descendants(self.g, pos, &mut set);
        }
        self.groups.push(set);
    }

    fn mark(&mut self, p: Stop) {
        let (stops, local) = self.scan(&p);
        if stops.len() <= 1 {
            self.subtree_group(&p);
            return;
        }
        for s in stops {
            match self.descend_single(&s) {
                Some(deeper) => self.mark(deeper),
                None => self.subtree_group(&s),
            }
        }
        self.pending_rest.push((p, local));
    }

    /// A stop with several outgoing edges, or one that leads to such a node through a chain of
    /// single-valued only-children, becomes the next P.
    fn descend_single(&self, s: &Stop) -> Option<Stop> {
        let mut cur = s.clone();
        loop {
            if self.out_degree(&cur) > 1 {
                return Some(cur);
            }
            let node = *cur[0].last().unwrap();
            let e = self.g.children(node).next()?;
            if !e.card.is_single() {
                return None;
            }
            for pos in &mut cur {
                pos.push(e.child);
            }
        }
    }
}

/// Partitions the unfolded DTD into groups. Boxed siblings reached through starred edges
/// form a single stop node.
pub fn detect_groups(g: &DtdGraph, boxes: &[BoxDecl], side: Side) -> Vec<Group> {
    let mut p = vec![g.root];
    while g.out_degree(*p.last().unwrap()) == 1 {
        p.push(g.children(*p.last().unwrap()).next().unwrap().child);
    }
    let mut m = Marker { g, boxes, groups: Vec::new(), pending_rest: Vec::new() };
    if g.is_leaf(*p.last().unwrap()) {
        m.subtree_group(&vec![p]);
    } else {
        m.mark(vec![p]);
    }

    let covered = |groups: &[BTreeSet<Position>], pos: &Position| groups.iter().any(|s| s.contains(pos));
    let pending = std::mem::take(&mut m.pending_rest);
    for (p, local) in pending {
        let rest: Vec<Position> = local.into_iter().filter(|pos| !covered(&m.groups, pos)).collect();
        if rest.is_empty() {
            continue;
        }
        let mut set = BTreeSet::new();
        for pos in p.iter().chain(rest.iter()) {
            with_ancestors(pos, &mut set);
        }
        m.groups.push(set);
    }

    let mut all = BTreeSet::new();
    descendants(g, &vec![g.root], &mut all);
    all.insert(vec![g.root]);
    for pos in all {
        if !covered(&m.groups, &pos) {
            let mut set = BTreeSet::new();
            with_ancestors(&pos, &mut set);
            descendants(g, &pos, &mut set);
            m.groups.push(set);
        }
    }

    let prefix = match side {
        Side::Source => "sg",
        Side::Target => "tg",
    };
    m.groups.into_iter().enumerate().map(|(i, members)| Group { id: format!("{prefix}{}", i + 1), members }).collect()
}

/// Index pairs `(source group, target group)` joined by at least one arrow, sorted.
pub fn connected_pairs(corr: &CorrespondenceSet, src: &[Group], tgt: &[Group]) -> Vec<(usize, usize)> {
    let mut out = BTreeSet::new();
    for a in &corr.arrows {
        for (i, sg) in src.iter().enumerate() {
            if !sg.members.iter().any(|p| a.source.matches(p)) {
                continue;
            }
            for (j, tg) in tgt.iter().enumerate() {
                if tg.members.iter().any(|q| corr.arrow_hits(a, q)) {
                    out.insert((i, j));
                }
            }
        }
    }
    out.into_iter().collect()
}
