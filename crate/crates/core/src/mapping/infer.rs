use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::schema::{Arrow, AttrKind, CorrespondenceSet, DtdGraph, NodeKind};

use super::expr::{assign_names, pos_tree, source_expr, PosNode};
use super::groups::{connected_pairs, detect_groups, Group, Position};
use super::{Equality, ExprId, ExprTag, MappingRule, Side, SkolemTerm, Term, TreeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("target group {0} is reached by no arrow; no rule generated")]
    UnmappedTargetGroup(String),
    #[error("target group {0} has no mapped leaves; no rule generated")]
    NoMappedLeaves(String),
    #[error("box node in target group {0} has no arrow binding its tag; no rule generated")]
    UnboundTag(String),
}

#[derive(Debug, Clone)]
pub struct InferredRule {
    pub target_group: String,
    pub source_groups: Vec<String>,
    pub rule: MappingRule,
    /// Same rule with one body expression per source group, before shared paths are unified.
    pub intermediate: MappingRule,
}

#[derive(Debug, Clone)]
pub struct Inferred {
    pub source_groups: Vec<Group>,
    pub target_groups: Vec<Group>,
    pub pairs: Vec<(usize, usize)>,
    pub rules: Vec<InferredRule>,
    pub warnings: Vec<InferenceError>,
}

impl Inferred {
    pub fn mapping_rules(&self) -> Vec<MappingRule> {
        self.rules.iter().map(|r| r.rule.clone()).collect()
    }
}

enum HeadId {
    Leaf(Position),
    Skolem(Vec<(Position, bool)>),
}

struct Ctx<'a> {
    src: &'a DtdGraph,
    sgs: &'a [Group],
    body: Vec<usize>,
    preds: Vec<(Position, Position)>,
}

impl Ctx<'_> {
    /// Source position of an arrow, preferring groups already in the body; adds its group.
    fn source_of(&mut self, a: &Arrow) -> Option<Position> {
        let order: Vec<usize> = self.body.iter().copied().chain(0..self.sgs.len()).collect();
        for gi in order {
            if let Some(p) = self.sgs[gi].members.iter().find(|p| a.source.matches(p)) {
                let p = p.clone();
                self.add_group_of(&p, gi);
                return Some(p);
            }
        }
        None
    }

    fn add_group_of(&mut self, p: &Position, preferred: usize) {
        if self.body.iter().any(|&b| self.sgs[b].contains(p)) {
            return;
        }
        self.body.push(preferred);
    }

    fn find_position(&self, tail: &[crate::schema::NodeIdx]) -> Option<(Position, usize)> {
        let order: Vec<usize> = self.body.iter().copied().chain(0..self.sgs.len()).collect();
        for gi in order {
            if let Some(p) = self.sgs[gi].members.iter().find(|p| p.ends_with(tail)) {
                return Some((p.clone(), gi));
            }
        }
        None
    }

    /// Follows an IDREF at `p` to the ID it points to, adding that group and the equality.
    fn follow_idref(&mut self, p: &Position) {
        let n = *p.last().unwrap();
        if self.src.node(n).kind != NodeKind::Attribute(AttrKind::IdRef) || p.len() < 2 {
            return;
        }
        let elem = p[p.len() - 2];
        let links: Vec<_> = self.src.links_from(elem, n).copied().collect();
        for l in links.into_iter().take(1) {
            if let Some((q, gi)) = self.find_position(&[l.id_elem, l.id_attr]) {
                self.add_group_of(&q, gi);
                if !self.preds.contains(&(p.clone(), q.clone())) {
                    self.preds.push((p.clone(), q));
                }
            }
        }
    }
}

/// Infers one rule per target group from the correspondences.
pub fn infer_rules(src: &DtdGraph, tgt: &DtdGraph, corr: &CorrespondenceSet) -> Inferred {
    let sgs = detect_groups(src, &[], Side::Source);
    let tgs = detect_groups(tgt, &corr.boxes, Side::Target);
    let pairs = connected_pairs(corr, &sgs, &tgs);
    let mut rules = Vec::new();
    let mut warnings = Vec::new();

    for (j, tg) in tgs.iter().enumerate() {
        let body: Vec<usize> = pairs.iter().filter(|(_, t)| *t == j).map(|(s, _)| *s).collect();
        if body.is_empty() {
            log::warn!("target group {} unmapped", tg.id);
            warnings.push(InferenceError::UnmappedTargetGroup(tg.id.clone()));
            continue;
        }
        match infer_one(src, tgt, corr, &sgs, tg, body) {
            Ok(r) => rules.push(r),
            Err(e) => {
                log::warn!("{e}");
                warnings.push(e);
            }
        }
    }
    Inferred { source_groups: sgs, target_groups: tgs, pairs, rules, warnings }
}

fn infer_one(
    src: &DtdGraph,
    tgt: &DtdGraph,
    corr: &CorrespondenceSet,
    sgs: &[Group],
    tg: &Group,
    body: Vec<usize>,
) -> Result<InferredRule, InferenceError> {
    let hits =
        |ps: &[Position]| -> Vec<Arrow> { corr.arrows.iter().filter(|a| ps.iter().any(|q| corr.arrow_hits(a, q))).cloned().collect() };
    let head = pos_tree(tgt, &tg.members, &corr.boxes, &|ps| !hits(ps).is_empty()).expect("group without root");
    let is_leaf = |n: &PosNode| n.children.is_empty() && tgt.is_leaf(n.node());
    if !head.preorder().into_iter().any(is_leaf) {
        return Err(InferenceError::NoMappedLeaves(tg.id.clone()));
    }

    let mut cx = Ctx { src, sgs, body, preds: Vec::new() };

    let mut leaf_src: BTreeMap<Position, Position> = BTreeMap::new();
    let mut tag_src: BTreeMap<Position, Position> = BTreeMap::new();
    for n in head.preorder() {
        if is_leaf(n) {
            for a in hits(&n.members) {
                if let Some(p) = cx.source_of(&a) {
                    leaf_src.insert(n.pos().clone(), p);
                    break;
                }
            }
        }
        if let Some(b) = n.boxed {
            let arrow = corr.arrows.iter().find(|a| a.target == crate::schema::ArrowTarget::Box(b));
            match arrow.and_then(|a| cx.source_of(a)) {
                Some(p) => {
                    tag_src.insert(n.pos().clone(), p);
                }
                None => return Err(InferenceError::UnboundTag(tg.id.clone())),
            }
        }
    }

    let root_pos = vec![src.root];
    let mut ids: BTreeMap<Position, HeadId> = BTreeMap::new();
    assign_ids(&head, None, true, tgt, tg, &mut cx, &leaf_src, &tag_src, &root_pos, &hits, &mut ids);

    for l in src.links.clone() {
        let members: BTreeSet<Position> = cx.body.iter().flat_map(|&b| sgs[b].members.iter().cloned()).collect();
        let refs: Vec<&Position> = members.iter().filter(|p| p.ends_with(&[l.ref_elem, l.ref_attr])).collect();
        let idps: Vec<&Position> = members.iter().filter(|p| p.ends_with(&[l.id_elem, l.id_attr])).collect();
        for r in &refs {
            for i in &idps {
                let pair = ((*r).clone(), (*i).clone());
                if !cx.preds.contains(&pair) {
                    cx.preds.push(pair);
                }
            }
        }
    }

    let mut referenced: BTreeSet<Position> = leaf_src.values().cloned().collect();
    referenced.extend(tag_src.values().cloned());
    for id in ids.values() {
        if let HeadId::Skolem(args) = id {
            referenced.extend(args.iter().map(|(p, _)| p.clone()));
        }
    }
    for (a, b) in &cx.preds {
        referenced.insert(a.clone());
        referenced.insert(b.clone());
    }
    let keep_src = |ps: &[Position]| referenced.contains(&ps[0]) || corr.arrows.iter().any(|a| a.source.matches(&ps[0]));

    let positions: BTreeSet<Position> = cx.body.iter().flat_map(|&b| sgs[b].members.iter().cloned()).collect();
    let body_tree = pos_tree(src, &positions, &[], &keep_src).expect("body without root");
    let names = assign_names(&body_tree, src, &[], &mut BTreeSet::new());

    let term = |p: &Position, text: bool| Term { var: names[p].clone(), text };
    let mut counter = 0;
    let head_expr = head_to_expr(&head, tgt, &ids, &tag_src, &term, &mut counter);
    let predicates: Vec<Equality> = cx
        .preds
        .iter()
        .map(|(r, i)| Equality { left: term(r, false), right: term(i, !src.node(*i.last().unwrap()).is_attribute()) })
        .collect();

    let rule = MappingRule { head: head_expr.clone(), body: vec![source_expr(&body_tree, src, &names)], predicates: predicates.clone() };

    let mut body_groups = cx.body.clone();
    body_groups.sort();
    let separate: Vec<TreeExpr> =
        body_groups.iter().filter_map(|&b| pos_tree(src, &sgs[b].members, &[], &keep_src)).map(|t| source_expr(&t, src, &names)).collect();
    let intermediate = MappingRule { head: head_expr, body: separate, predicates };

    Ok(InferredRule {
        target_group: tg.id.clone(),
        source_groups: body_groups.iter().map(|&b| sgs[b].id.clone()).collect(),
        rule,
        intermediate,
    })
}

#[allow(clippy::too_many_arguments)]
fn assign_ids(
    n: &PosNode,
    parent_args: Option<&Vec<(Position, bool)>>,
    root_chain: bool,
    tgt: &DtdGraph,
    tg: &Group,
    cx: &mut Ctx<'_>,
    leaf_src: &BTreeMap<Position, Position>,
    tag_src: &BTreeMap<Position, Position>,
    root_pos: &Position,
    hits: &dyn Fn(&[Position]) -> Vec<Arrow>,
    ids: &mut BTreeMap<Position, HeadId>,
) {
    if n.children.is_empty() && tgt.is_leaf(n.node()) {
        if let Some(p) = leaf_src.get(n.pos()) {
            ids.insert(n.pos().clone(), HeadId::Leaf(p.clone()));
        }
        return;
    }
    let args = if root_chain {
        vec![(root_pos.clone(), false)]
    } else {
        let mut args = Vec::new();
        if let Some(p) = tag_src.get(n.pos()) {
            args.push((p.clone(), true));
        }
        for e in tgt.children(n.node()).filter(|e| e.card.is_single()) {
            let child_positions: Vec<Position> = n
                .members
                .iter()
                .map(|m| {
                    let mut c = m.clone();
                    c.push(e.child);
                    c
                })
                .collect();
            if let Some(c) = n.children.iter().find(|c| c.node() == e.child) {
                if c.children.is_empty() && tgt.is_leaf(c.node()) {
                    if let Some(p) = leaf_src.get(c.pos()) {
                        args.push((p.clone(), false));
                    }
                }
                continue;
            }
            if child_positions.iter().any(|p| tg.contains(p)) {
                continue;
            }
            for a in hits(&child_positions) {
                if let Some(p) = cx.source_of(&a) {
                    cx.follow_idref(&p);
                    args.push((p, false));
                    break;
                }
            }
        }
        if args.is_empty() {
            parent_args.cloned().unwrap_or_else(|| vec![(root_pos.clone(), false)])
        } else {
            args
        }
    };
    for c in &n.children {
        let chain = root_chain && c.boxed.is_none() && tgt.edge(n.node(), c.node()).is_some_and(|e| e.card.is_single());
        assign_ids(c, Some(&args), chain, tgt, tg, cx, leaf_src, tag_src, root_pos, hits, ids);
    }
    ids.insert(n.pos().clone(), HeadId::Skolem(args));
}

fn head_to_expr(
    n: &PosNode,
    tgt: &DtdGraph,
    ids: &BTreeMap<Position, HeadId>,
    tag_src: &BTreeMap<Position, Position>,
    term: &dyn Fn(&Position, bool) -> Term,
    counter: &mut usize,
) -> TreeExpr {
    let tag = match tag_src.get(n.pos()) {
        Some(p) => ExprTag::TextOf(term(p, true).var),
        None => ExprTag::Name(tgt.tag(n.node()).to_string()),
    };
    let id = match ids.get(n.pos()) {
        Some(HeadId::Leaf(p)) => ExprId::Var(term(p, false).var),
        Some(HeadId::Skolem(args)) => {
            *counter += 1;
            ExprId::Skolem(SkolemTerm { functor: format!("f{counter}"), args: args.iter().map(|(p, t)| term(p, *t)).collect() })
        }
        None => ExprId::Unknown,
    };
    let children = n.children.iter().map(|c| head_to_expr(c, tgt, ids, tag_src, term, counter)).collect();
    TreeExpr { tag, id, children }
}
