use std::collections::{BTreeMap, BTreeSet};

use crate::schema::{BoxDecl, CorrespondenceSet, DtdGraph, NodeIdx};

use super::groups::{qualified_name, Group, Position};
use super::{ExprId, ExprTag, TreeExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// A group unfolded into a tree; boxed siblings share one node.
#[derive(Debug, Clone)]
pub(crate) struct PosNode {
    pub members: Vec<Position>,
    pub boxed: Option<usize>,
    pub children: Vec<PosNode>,
}

impl PosNode {
    pub fn pos(&self) -> &Position {
        &self.members[0]
    }

    pub fn node(&self) -> NodeIdx {
        *self.pos().last().unwrap()
    }

    pub fn preorder(&self) -> Vec<&PosNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }
}

pub(crate) fn pos_tree(
    g: &DtdGraph,
    positions: &BTreeSet<Position>,
    boxes: &[BoxDecl],
    keep_leaf: &dyn Fn(&[Position]) -> bool,
) -> Option<PosNode> {
    let root = vec![g.root];
    if !positions.contains(&root) {
        return None;
    }
    Some(grow(g, positions, boxes, keep_leaf, vec![root], None))
}

fn grow(
    g: &DtdGraph,
    positions: &BTreeSet<Position>,
    boxes: &[BoxDecl],
    keep_leaf: &dyn Fn(&[Position]) -> bool,
    members: Vec<Position>,
    boxed: Option<usize>,
) -> PosNode {
    let node = *members[0].last().unwrap();
    let mut children = Vec::new();
    let mut done_boxes = BTreeSet::new();
    for e in g.children(node) {
        let bx = boxes.iter().position(|b| b.contains(e.child));
        let kids: Vec<NodeIdx> = match bx {
            Some(b) => {
                if !done_boxes.insert(b) {
                    continue;
                }
                g.children(node).map(|x| x.child).filter(|c| boxes[b].contains(*c)).collect()
            }
            None => vec![e.child],
        };
        let mut cm = Vec::new();
        for m in &members {
            for k in &kids {
                let mut p = m.clone();
                p.push(*k);
                if positions.contains(&p) {
                    cm.push(p);
                }
            }
        }
        if cm.is_empty() {
            continue;
        }
        if g.is_leaf(*cm[0].last().unwrap()) && !keep_leaf(&cm) {
            continue;
        }
        children.push(grow(g, positions, boxes, keep_leaf, cm, bx));
    }
    PosNode { members, boxed, children }
}

fn abbreviate(qname: &str) -> String {
    let caps: String = qname.chars().filter(|c| c.is_ascii_uppercase() || c.is_ascii_digit()).collect();
    let base = if caps.is_empty() {
        qname.chars().filter(|c| c.is_alphanumeric()).take(1).flat_map(char::to_uppercase).collect()
    } else if caps.len() > 2 {
        let mut s: String = caps[..1].to_string();
        s.push_str(&caps[1..].to_lowercase());
        s
    } else {
        caps
    };
    if base.is_empty() || base.starts_with(|c: char| c.is_ascii_digit()) {
        format!("V{base}")
    } else {
        base
    }
}

/// Variable names for the positions of a tree, in preorder, deduplicated with numeric suffixes.
pub(crate) fn assign_names(tree: &PosNode, g: &DtdGraph, boxes: &[BoxDecl], taken: &mut BTreeSet<String>) -> BTreeMap<Position, String> {
    let mut out = BTreeMap::new();
    for n in tree.preorder() {
        let base = abbreviate(&qualified_name(g, boxes, n.pos()));
        let mut name = base.clone();
        let mut k = 2;
        while taken.contains(&name) {
            name = format!("{base}{k}");
            k += 1;
        }
        taken.insert(name.clone());
        for m in &n.members {
            out.insert(m.clone(), name.clone());
        }
    }
    out
}

pub(crate) fn source_expr(tree: &PosNode, g: &DtdGraph, names: &BTreeMap<Position, String>) -> TreeExpr {
    TreeExpr {
        tag: ExprTag::Name(g.tag(tree.node()).to_string()),
        id: ExprId::Var(names[tree.pos()].clone()),
        children: tree.children.iter().map(|c| source_expr(c, g, names)).collect(),
    }
}

fn skeleton(tree: &PosNode, g: &DtdGraph) -> TreeExpr {
    TreeExpr {
        tag: match tree.boxed {
            Some(_) => ExprTag::Var("Tag".into()),
            None => ExprTag::Name(g.tag(tree.node()).to_string()),
        },
        id: ExprId::Unknown,
        children: tree.children.iter().map(|c| skeleton(c, g)).collect(),
    }
}

/// Tree expression of a group. Source expressions bind fresh variables everywhere; target
/// skeletons carry `??` ids, collapse boxed siblings into a `$Tag` node and drop leaves that
/// no arrow reaches.
pub fn build_tree_expression(g: &DtdGraph, group: &Group, side: Side, corr: &CorrespondenceSet) -> TreeExpr {
    match side {
        Side::Source => {
            let tree = pos_tree(g, &group.members, &[], &|_| true).expect("group without the schema root");
            let names = assign_names(&tree, g, &[], &mut BTreeSet::new());
            source_expr(&tree, g, &names)
        }
        Side::Target => {
            let keep = |ps: &[Position]| ps.iter().any(|p| corr.arrows.iter().any(|a| corr.arrow_hits(a, p)));
            let tree = pos_tree(g, &group.members, &corr.boxes, &keep).expect("group without the schema root");
            skeleton(&tree, g)
        }
    }
}
