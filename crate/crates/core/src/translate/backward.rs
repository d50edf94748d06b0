//! Head-to-body translation: every root-to-leaf path of a pattern is embedded into a rule
//! head, each embedding contributes a copy of that rule's body, and copies are glued
//! where the target nodes they denote must coincide.

use std::collections::BTreeMap;

use super::cq::{Cq, LeafPolicy};
use super::{MappingContext, TranslateError};
use crate::mapping::{ExprId, ExprTag, MappingRule, Term, TreeExpr};
use crate::query::{Axis, Operand, PatternNode, TagTest, TpQuery, TreePattern};
use crate::schema::DtdGraph;

/// A rule head flattened in preorder.
pub(crate) struct Head<'r> {
    pub nodes: Vec<&'r TreeExpr>,
    pub parent: Vec<Option<usize>>,
}

impl<'r> Head<'r> {
    pub fn new(rule: &'r MappingRule) -> Self {
        let mut h = Head { nodes: vec![], parent: vec![] };
        fn go<'r>(h: &mut Head<'r>, e: &'r TreeExpr, parent: Option<usize>) {
            let i = h.nodes.len();
            h.nodes.push(e);
            h.parent.push(parent);
            for c in &e.children {
                go(h, c, Some(i));
            }
        }
        go(&mut h, &rule.head, None);
        h
    }

    fn children(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.parent[c] == Some(i)).collect()
    }

    fn descendants(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.is_ancestor(i, c)).collect()
    }

    fn is_ancestor(&self, a: usize, mut c: usize) -> bool {
        while let Some(p) = self.parent[c] {
            if p == a {
                return true;
            }
            c = p;
        }
        false
    }

    /// Head nodes from the root down to `i`.
    fn chain(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut c = i;
        while let Some(p) = self.parent[c] {
            out.push(p);
            c = p;
        }
        out.reverse();
        out
    }

    /// The body variable whose value a head leaf copies.
    pub fn carrier(&self, i: usize) -> Option<&'r str> {
        match &self.nodes[i].id {
            ExprId::Var(v) if self.nodes[i].children.is_empty() => Some(v),
            _ => None,
        }
    }
}

/// One root-to-leaf path of a pattern mapped into one rule head.
#[derive(Debug, Clone)]
pub(crate) struct Embedding {
    pub rule: usize,
    /// Pattern variable to head node.
    pub images: Vec<(String, usize)>,
    /// Tag variables fixed to a tag.
    pub tag_eqs: Vec<(String, String)>,
}

/// Tags a head node can take: its name, or for a tag variable every element the target
/// schema allows under the parent's tag.
fn tag_match(t: &TagTest, head: &Head, h: usize, target: &DtdGraph) -> Option<Option<(String, String)>> {
    let e = head.nodes[h];
    match (&e.tag, t) {
        (ExprTag::Name(x), TagTest::Name(n)) => (x == n).then_some(None),
        (ExprTag::Name(x), TagTest::Wildcard) => (!x.starts_with('@')).then_some(None),
        (ExprTag::TextOf(v) | ExprTag::Var(v), TagTest::Name(n)) => {
            let parent = head.parent[h].and_then(|p| match &head.nodes[p].tag {
                ExprTag::Name(pt) => target.lookup(pt),
                _ => None,
            });
            let allowed = match parent {
                Some(p) => target.child_by_tag(p, n).is_some(),
                None => target.lookup(n) == Some(target.root),
            };
            (allowed && !n.starts_with('@')).then(|| Some((v.clone(), n.clone())))
        }
        (ExprTag::TextOf(_) | ExprTag::Var(_), TagTest::Wildcard) => Some(None),
    }
}

fn has_lits(n: &PatternNode) -> bool {
    n.constraints.iter().any(|c| matches!(c.operand, Operand::Lit(_)))
}

#[allow(clippy::too_many_arguments)]
fn embed_path(
    target: &DtdGraph,
    head: &Head,
    path: &[(&PatternNode, Axis)],
    root_axis: Axis,
    k: usize,
    at: Option<usize>,
    cur: &mut Embedding,
    out: &mut Vec<Embedding>,
) {
    if k == path.len() {
        out.push(cur.clone());
        return;
    }
    let (node, axis) = path[k];
    let cands: Vec<usize> = match at {
        None => match root_axis {
            Axis::Child => vec![0],
            Axis::Descendant => (0..head.nodes.len()).collect(),
        },
        Some(p) => match axis {
            Axis::Child => head.children(p),
            Axis::Descendant => head.descendants(p),
        },
    };
    for h in cands {
        let Some(teq) = tag_match(&node.tag, head, h, target) else { continue };
        if has_lits(node) && head.carrier(h).is_none() {
            continue;
        }
        cur.images.push((node.var.clone(), h));
        let pushed = teq.is_some();
        if let Some(t) = teq {
            cur.tag_eqs.push(t);
        }
        embed_path(target, head, path, root_axis, k + 1, Some(h), cur, out);
        cur.images.pop();
        if pushed {
            cur.tag_eqs.pop();
        }
    }
}

/// Root-to-leaf paths of a pattern as (node, edge into it) lists.
pub(crate) fn leaf_paths(p: &TreePattern) -> Vec<Vec<(&PatternNode, Axis)>> {
    fn go<'a>(n: &'a PatternNode, axis: Axis, cur: &mut Vec<(&'a PatternNode, Axis)>, out: &mut Vec<Vec<(&'a PatternNode, Axis)>>) {
        cur.push((n, axis));
        if n.children.is_empty() {
            out.push(cur.clone());
        }
        for (a, c) in &n.children {
            go(c, *a, cur, out);
        }
        cur.pop();
    }
    let mut out = Vec::new();
    go(&p.root, p.axis, &mut Vec::new(), &mut out);
    out
}

/// All embeddings of one leaf path into every rule head.
pub(crate) fn expand_path(target: &DtdGraph, heads: &[Head], path: &[(&PatternNode, Axis)], root_axis: Axis) -> Vec<Embedding> {
    let mut out = Vec::new();
    for (r, h) in heads.iter().enumerate() {
        let mut cur = Embedding { rule: r, images: vec![], tag_eqs: vec![] };
        embed_path(target, h, path, root_axis, 0, None, &mut cur, &mut out);
    }
    out
}

/// A term of one body copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CopyTerm {
    pub copy: usize,
    pub var: String,
}

/// Conditions for two head nodes in two copies to denote the same target node.
#[derive(Debug, Clone, Default)]
pub(crate) struct Glue {
    pub same: Vec<(CopyTerm, CopyTerm)>,
    pub tag_lits: Vec<(CopyTerm, String)>,
}

fn glue(heads: &[Head], a: (usize, usize, usize), b: (usize, usize, usize), out: &mut Glue) -> bool {
    let (ca, ra, ha) = a;
    let (cb, rb, hb) = b;
    let (xa, xb) = (heads[ra].chain(ha), heads[rb].chain(hb));
    if xa.len() != xb.len() {
        return false;
    }
    let t = |c: usize, v: &str| CopyTerm { copy: c, var: v.to_string() };
    for (&na, &nb) in xa.iter().zip(&xb) {
        let (ea, eb) = (heads[ra].nodes[na], heads[rb].nodes[nb]);
        match (&ea.tag, &eb.tag) {
            (ExprTag::Name(x), ExprTag::Name(y)) => {
                if x != y {
                    return false;
                }
            }
            (ExprTag::Name(x), ExprTag::TextOf(v) | ExprTag::Var(v)) => out.tag_lits.push((t(cb, v), x.clone())),
            (ExprTag::TextOf(v) | ExprTag::Var(v), ExprTag::Name(y)) => out.tag_lits.push((t(ca, v), y.clone())),
            (ExprTag::TextOf(v) | ExprTag::Var(v), ExprTag::TextOf(w) | ExprTag::Var(w)) => out.same.push((t(ca, v), t(cb, w))),
        }
        match (&ea.id, &eb.id) {
            (ExprId::Skolem(s), ExprId::Skolem(u)) => {
                if s.functor != u.functor || s.args.len() != u.args.len() {
                    return false;
                }
                for (x, y) in s.args.iter().zip(&u.args) {
                    out.same.push((t(ca, &x.var), t(cb, &y.var)));
                }
            }
            (ExprId::Var(x), ExprId::Var(y)) => out.same.push((t(ca, x), t(cb, y))),
            _ => return false,
        }
    }
    true
}

/// One candidate source query: the chosen embedding of every leaf path of every pattern.
pub(crate) struct Combo {
    pub embs: Vec<Embedding>,
    pub glue: Glue,
}

fn images_of<'e>(embs: &'e [Embedding], var: &str) -> Option<(usize, &'e Embedding, usize)> {
    embs.iter().enumerate().find_map(|(c, e)| e.images.iter().find(|(v, _)| v == var).map(|(_, h)| (c, e, *h)))
}

/// Enumerates consistent embedding choices for one pattern.
fn pattern_combos(target: &DtdGraph, heads: &[Head], p: &TreePattern, limit: usize) -> Vec<(Vec<Embedding>, Glue)> {
    let paths = leaf_paths(p);
    let options: Vec<Vec<Embedding>> = paths.iter().map(|path| expand_path(target, heads, path, p.axis)).collect();
    let mut out = Vec::new();
    fn go(
        heads: &[Head],
        options: &[Vec<Embedding>],
        k: usize,
        cur: &mut Vec<Embedding>,
        g: Glue,
        out: &mut Vec<(Vec<Embedding>, Glue)>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if k == options.len() {
            out.push((cur.clone(), g));
            return;
        }
        'next: for e in &options[k] {
            let mut g2 = g.clone();
            // the deepest node shared with each earlier path must be the same target node
            for (c, prev) in cur.iter().enumerate() {
                let shared = prev.images.iter().zip(&e.images).take_while(|(a, b)| a.0 == b.0).count();
                if shared == 0 {
                    continue 'next;
                }
                for s in 0..shared {
                    let (ha, hb) = (prev.images[s].1, e.images[s].1);
                    if heads[prev.rule].chain(ha).len() != heads[e.rule].chain(hb).len() {
                        continue 'next;
                    }
                }
                let (ha, hb) = (prev.images[shared - 1].1, e.images[shared - 1].1);
                if !glue(heads, (c, prev.rule, ha), (k, e.rule, hb), &mut g2) {
                    continue 'next;
                }
            }
            cur.push(e.clone());
            go(heads, options, k + 1, cur, g2, out, limit);
            cur.pop();
        }
    }
    go(heads, &options, 0, &mut Vec::new(), Glue::default(), &mut out, limit);
    out
}

const COMBO_LIMIT: usize = 512;

/// All consistent choices for the whole query, copies numbered across patterns. More than
/// `COMBO_LIMIT` choices make the query untranslatable, since a partial union is not exact.
pub(crate) fn combos(target: &DtdGraph, heads: &[Head], q: &TpQuery) -> Result<Vec<Combo>, TranslateError> {
    let too_many = || TranslateError::Untranslatable(format!("more than {COMBO_LIMIT} rule combinations"));
    let mut acc = vec![Combo { embs: vec![], glue: Glue::default() }];
    for p in &q.patterns {
        let per = pattern_combos(target, heads, p, COMBO_LIMIT + 1);
        if acc.len() * per.len() > COMBO_LIMIT {
            return Err(too_many());
        }
        let mut next = Vec::new();
        for base in &acc {
            for (embs, g) in &per {
                let off = base.embs.len();
                let shift = |t: &CopyTerm| CopyTerm { copy: t.copy + off, var: t.var.clone() };
                let mut glue = base.glue.clone();
                glue.same.extend(g.same.iter().map(|(a, b)| (shift(a), shift(b))));
                glue.tag_lits.extend(g.tag_lits.iter().map(|(a, l)| (shift(a), l.clone())));
                let mut all = base.embs.clone();
                all.extend(embs.iter().cloned());
                next.push(Combo { embs: all, glue });
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Adds one body copy; returns the variable-to-node map.
fn add_copy(cq: &mut Cq, rule: &MappingRule) -> BTreeMap<String, usize> {
    let mut vars: BTreeMap<String, usize> = BTreeMap::new();
    fn go(cq: &mut Cq, e: &TreeExpr, parent: Option<usize>, vars: &mut BTreeMap<String, usize>) {
        let ExprTag::Name(tag) = &e.tag else { return };
        let ExprId::Var(v) = &e.id else { return };
        let me = match vars.get(v) {
            Some(&i) => i,
            None => {
                let axis = Axis::Child;
                let i = cq.add(TagTest::Name(tag.clone()), parent, axis);
                vars.insert(v.clone(), i);
                i
            }
        };
        for c in &e.children {
            go(cq, c, Some(me), vars);
        }
    }
    for b in &rule.body {
        go(cq, b, None, &mut vars);
    }
    for p in &rule.predicates {
        if let (Some(&a), Some(&b)) = (vars.get(&p.left.var), vars.get(&p.right.var)) {
            cq.union(a, b);
        }
    }
    vars
}

fn same_value(cq: &mut Cq, a: usize, b: usize) {
    if cq.children(a).is_empty() && cq.children(b).is_empty() {
        cq.union(a, b);
    } else if !cq.merge(a, b) {
        cq.unsat = true;
    }
}

/// The body copies of a combination as one conjunctive source query, minimized.
pub(crate) fn combo_cq(ctx: &MappingContext, heads: &[Head], q: &TpQuery, combo: &Combo) -> Result<Option<Cq>, TranslateError> {
    let mut cq = Cq::new();
    let maps: Vec<BTreeMap<String, usize>> = combo.embs.iter().map(|e| add_copy(&mut cq, &ctx.rules[e.rule])).collect();
    let node = |t: &CopyTerm| maps[t.copy].get(&t.var).copied();
    let term = |c: usize, t: &Term| maps[c].get(&t.var).copied();

    for (a, b) in &combo.glue.same {
        if let (Some(x), Some(y)) = (node(a), node(b)) {
            same_value(&mut cq, x, y);
        }
    }
    for (a, l) in &combo.glue.tag_lits {
        if let Some(x) = node(a) {
            cq.nodes[x].lits.push((crate::query::CmpOp::Eq, l.clone()));
        }
    }
    for (c, e) in combo.embs.iter().enumerate() {
        for (v, t) in &e.tag_eqs {
            if let Some(x) = term(c, &Term::var(v)) {
                cq.nodes[x].lits.push((crate::query::CmpOp::Eq, t.clone()));
            }
        }
    }

    // carrier node of a query variable
    let carrier = |var: &str| -> Result<Option<usize>, TranslateError> {
        let Some((c, e, h)) = images_of(&combo.embs, var) else { return Ok(None) };
        match heads[e.rule].carrier(h) {
            Some(x) => Ok(maps[c].get(x).copied()),
            None => Err(TranslateError::Untranslatable(format!("`${var}` denotes element content, which no source value holds"))),
        }
    };
    for p in &q.patterns {
        for n in p.root.preorder() {
            for c in &n.constraints {
                let Some(x) = carrier(&n.var)? else { continue };
                match &c.operand {
                    Operand::Lit(l) => cq.nodes[x].lits.push((c.op, l.clone())),
                    Operand::Var(o) => {
                        if let Some(y) = carrier(o)? {
                            cq.nodes[x].cross.push((c.op, y));
                        }
                    }
                }
            }
        }
    }
    for (a, b) in &q.joins {
        if let (Some(x), Some(y)) = (carrier(a)?, carrier(b)?) {
            cq.union(x, y);
        }
    }
    for r in &q.returns {
        match carrier(r)? {
            Some(x) => cq.returns.push(x),
            None => return Ok(None),
        }
    }

    let roots = cq.roots();
    for &r in roots.iter().skip(1) {
        cq.merge(r, roots[0]);
    }
    cq.check_literals();
    if cq.unsat {
        return Ok(None);
    }
    cq.id_chase(&ctx.source);
    cq.check_literals();
    if cq.unsat {
        return Ok(None);
    }
    cq.fold();
    Ok(Some(cq))
}

/// The exact source-side union for a target query, as minimized conjunctive queries.
pub(crate) fn backward_cqs(ctx: &MappingContext, q: &TpQuery) -> Result<(Vec<Cq>, Vec<Combo>), TranslateError> {
    let heads: Vec<Head> = ctx.rules.iter().map(Head::new).collect();
    let all = combos(&ctx.target, &heads, q)?;
    let mut cqs: Vec<Cq> = Vec::new();
    let mut used = Vec::new();
    for combo in all {
        if let Some(cq) = combo_cq(ctx, &heads, q, &combo)? {
            cqs.push(cq);
            used.push(combo);
        }
    }
    // drop branches contained in another branch
    let mut keep = vec![true; cqs.len()];
    for i in 0..cqs.len() {
        for j in 0..cqs.len() {
            if i != j && keep[j] && keep[i] && cqs[i].contained_in(&cqs[j]) && (!cqs[j].contained_in(&cqs[i]) || j < i) {
                keep[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut out_combos = Vec::new();
    for ((cq, c), k) in cqs.into_iter().zip(used).zip(keep) {
        if k {
            out.push(cq);
            out_combos.push(c);
        }
    }
    Ok((out, out_combos))
}

pub(crate) fn contract_source(ctx: &MappingContext, cq: &Cq) -> Cq {
    let mut c = cq.clone();
    c.contract(&ctx.source, LeafPolicy::Guaranteed);
    c
}
