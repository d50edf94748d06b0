//! DTD graphs, correspondence sets and label-path queries over them.

mod corr;
mod dtd;
mod paths;

pub use corr::{parse_correspondences, Arrow, ArrowTarget, BoxDecl, CorrError, CorrespondenceSet, Endpoint};
pub use dtd::{parse_dtd, serialize_dtd, DtdError};
pub use paths::{dtd_paths, node_paths, LabelPath};

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIdx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrKind {
    Plain,
    Id,
    IdRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Element,
    Attribute(AttrKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cardinality {
    One,
    Optional,
    Star,
    Plus,
}

impl Cardinality {
    pub fn is_single(self) -> bool {
        matches!(self, Cardinality::One | Cardinality::Optional)
    }

    /// True when a parent instance always has at least one such child.
    pub fn is_guaranteed(self) -> bool {
        matches!(self, Cardinality::One | Cardinality::Plus)
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Cardinality::One => "",
            Cardinality::Optional => "?",
            Cardinality::Star => "*",
            Cardinality::Plus => "+",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtdNode {
    /// Attribute tags carry a leading `@`.
    pub tag: String,
    pub kind: NodeKind,
    pub valued: bool,
}

impl DtdNode {
    pub fn is_attribute(&self) -> bool {
        matches!(self.kind, NodeKind::Attribute(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DtdEdge {
    pub parent: NodeIdx,
    pub child: NodeIdx,
    pub card: Cardinality,
}

/// `ref_elem.@ref_attr` holds values of `id_elem.@id_attr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdrefLink {
    pub ref_elem: NodeIdx,
    pub ref_attr: NodeIdx,
    pub id_elem: NodeIdx,
    pub id_attr: NodeIdx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtdGraph {
    pub name: String,
    pub nodes: Vec<DtdNode>,
    pub edges: Vec<DtdEdge>,
    pub root: NodeIdx,
    pub links: Vec<IdrefLink>,
    by_tag: BTreeMap<String, NodeIdx>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl DtdGraph {
    pub(crate) fn assemble(name: String, nodes: Vec<DtdNode>, edges: Vec<DtdEdge>, root: NodeIdx, links: Vec<IdrefLink>) -> DtdGraph {
        let mut out = vec![Vec::new(); nodes.len()];
        let mut inc = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.parent.0].push(i);
            inc[e.child.0].push(i);
        }
        let by_tag = nodes.iter().enumerate().map(|(i, n)| (n.tag.clone(), NodeIdx(i))).collect();
        DtdGraph { name, nodes, edges, root, links, by_tag, out, inc }
    }

    /// The same graph under another name, every tag mapped through `f` (attributes keep
    /// their `@`). Node indices are unchanged.
    pub fn renamed(&self, name: &str, f: impl Fn(&str) -> String) -> DtdGraph {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let tag = match n.tag.strip_prefix('@') {
                    Some(a) => format!("@{}", f(a)),
                    None => f(&n.tag),
                };
                DtdNode { tag, ..n.clone() }
            })
            .collect();
        DtdGraph::assemble(name.to_string(), nodes, self.edges.clone(), self.root, self.links.clone())
    }

    pub fn node(&self, n: NodeIdx) -> &DtdNode {
        &self.nodes[n.0]
    }

    pub fn tag(&self, n: NodeIdx) -> &str {
        &self.nodes[n.0].tag
    }

    pub fn lookup(&self, tag: &str) -> Option<NodeIdx> {
        self.by_tag.get(tag).copied()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeIdx> {
        (0..self.nodes.len()).map(NodeIdx)
    }

    /// Outgoing edges in declaration order (attributes first).
    pub fn children(&self, n: NodeIdx) -> impl Iterator<Item = &DtdEdge> + '_ {
        self.out[n.0].iter().map(move |&i| &self.edges[i])
    }

    pub fn parents(&self, n: NodeIdx) -> impl Iterator<Item = &DtdEdge> + '_ {
        self.inc[n.0].iter().map(move |&i| &self.edges[i])
    }

    pub fn edge(&self, parent: NodeIdx, child: NodeIdx) -> Option<&DtdEdge> {
        self.children(parent).find(|e| e.child == child)
    }

    pub fn child_by_tag(&self, parent: NodeIdx, tag: &str) -> Option<&DtdEdge> {
        self.children(parent).find(|e| self.tag(e.child) == tag)
    }

    pub fn out_degree(&self, n: NodeIdx) -> usize {
        self.out[n.0].len()
    }

    pub fn is_leaf(&self, n: NodeIdx) -> bool {
        self.out[n.0].is_empty()
    }

    /// The ID attribute declared on element `n`, if any.
    pub fn id_attr(&self, n: NodeIdx) -> Option<NodeIdx> {
        self.children(n).map(|e| e.child).find(|&c| self.node(c).kind == NodeKind::Attribute(AttrKind::Id))
    }

    /// Links whose reference side is `attr` under element `elem`.
    pub fn links_from(&self, elem: NodeIdx, attr: NodeIdx) -> impl Iterator<Item = &IdrefLink> + '_ {
        self.links.iter().filter(move |l| l.ref_elem == elem && l.ref_attr == attr)
    }
}
