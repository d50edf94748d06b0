use std::collections::BTreeSet;

use thiserror::Error;

use super::{DtdGraph, NodeIdx};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown node `{path}` in {schema}")]
    UnknownNode { line: usize, path: String, schema: String },
    #[error("line {line}: `{path}` has several parents in {schema}; qualify the path or add VIA")]
    AmbiguousArrow { line: usize, path: String, schema: String },
    #[error("line {line}: box `{name}` members do not share one parent set")]
    BoxMemberNotSibling { line: usize, name: String },
    #[error("line {line}: unknown box `{name}`")]
    UnknownBox { line: usize, name: String },
    #[error("line {line}: VIA edge `{edge}` does not match the arrow endpoint")]
    ViaMismatch { line: usize, edge: String },
}

/// A schema node, optionally pinned to one of its parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub node: NodeIdx,
    pub parent: Option<NodeIdx>,
}

impl Endpoint {
    /// Whether a position (root label path as node indices) ends at this endpoint.
    pub fn matches(&self, pos: &[NodeIdx]) -> bool {
        match pos {
            [] => false,
            [.., last] if *last != self.node => false,
            [.., p, _] => self.parent.is_none_or(|x| x == *p),
            [_] => self.parent.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrowTarget {
    Node(Endpoint),
    Box(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub source: Endpoint,
    pub target: ArrowTarget,
    pub type_tag: Option<String>,
    /// `(source parent, source child)`, `(target parent, target child)`.
    pub via: Option<((NodeIdx, NodeIdx), (NodeIdx, NodeIdx))>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDecl {
    pub name: String,
    pub members: Vec<NodeIdx>,
}

impl BoxDecl {
    pub fn contains(&self, n: NodeIdx) -> bool {
        self.members.contains(&n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceSet {
    pub source: String,
    pub target: String,
    pub arrows: Vec<Arrow>,
    pub boxes: Vec<BoxDecl>,
}

impl CorrespondenceSet {
    pub fn empty(source: &DtdGraph, target: &DtdGraph) -> Self {
        CorrespondenceSet { source: source.name.clone(), target: target.name.clone(), arrows: vec![], boxes: vec![] }
    }

    /// The box containing `n`, if any.
    pub fn box_of(&self, n: NodeIdx) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(n))
    }

    /// Whether the target-side position `pos` is hit by `arrow`.
    pub fn arrow_hits(&self, arrow: &Arrow, pos: &[NodeIdx]) -> bool {
        match &arrow.target {
            ArrowTarget::Node(ep) => ep.matches(pos),
            ArrowTarget::Box(b) => pos.last().is_some_and(|n| self.boxes[*b].contains(*n)),
        }
    }
}

/// Parses a correspondence file against a source and a target schema.
pub fn parse_correspondences(text: &str, source: &DtdGraph, target: &DtdGraph) -> Result<CorrespondenceSet, CorrError> {
    let mut set = CorrespondenceSet::empty(source, target);
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#')).collect();

    for &(line, l) in &lines {
        if let Some(rest) = l.strip_prefix("BOX ") {
            set.boxes.push(parse_box(rest, line, target)?);
        }
    }
    for &(line, l) in &lines {
        if l.starts_with("BOX ") {
            continue;
        }
        let rest = l.strip_prefix("ARROW ").ok_or_else(|| CorrError::Syntax { line, msg: format!("expected ARROW or BOX, got `{l}`") })?;
        let arrow = parse_arrow(rest, line, source, target, &set.boxes)?;
        set.arrows.push(arrow);
    }
    Ok(set)
}

fn parse_box(rest: &str, line: usize, target: &DtdGraph) -> Result<BoxDecl, CorrError> {
    let bad = || CorrError::Syntax { line, msg: "expected `BOX name = {tag, ...}`".into() };
    let (name, members) = rest.split_once('=').ok_or_else(bad)?;
    let members = members.trim().strip_prefix('{').and_then(|m| m.strip_suffix('}')).ok_or_else(bad)?;
    let name = name.trim().to_string();
    let mut nodes = Vec::new();
    for m in members.split(',').map(str::trim) {
        let n = target.lookup(m).ok_or_else(|| CorrError::UnknownNode { line, path: m.into(), schema: target.name.clone() })?;
        nodes.push(n);
    }
    if nodes.is_empty() {
        return Err(bad());
    }
    let parents = |n: NodeIdx| -> BTreeSet<NodeIdx> { target.parents(n).map(|e| e.parent).collect() };
    let first = parents(nodes[0]);
    if first.is_empty() || nodes.iter().any(|&n| parents(n) != first) {
        return Err(CorrError::BoxMemberNotSibling { line, name });
    }
    Ok(BoxDecl { name, members: nodes })
}

fn resolve_path(path: &str, line: usize, g: &DtdGraph) -> Result<Endpoint, CorrError> {
    let unknown = || CorrError::UnknownNode { line, path: path.to_string(), schema: g.name.clone() };
    let parts: Vec<&str> = path.split('/').map(str::trim).collect();
    let mut nodes = Vec::new();
    for p in &parts {
        nodes.push(g.lookup(p).ok_or_else(unknown)?);
    }
    for w in nodes.windows(2) {
        if g.edge(w[0], w[1]).is_none() {
            return Err(unknown());
        }
    }
    let node = *nodes.last().unwrap();
    let parent = if nodes.len() >= 2 { Some(nodes[nodes.len() - 2]) } else { None };
    Ok(Endpoint { node, parent })
}

fn parse_edge(s: &str, line: usize, g: &DtdGraph) -> Result<(NodeIdx, NodeIdx), CorrError> {
    let ep = resolve_path(s, line, g)?;
    match ep.parent {
        Some(p) => Ok((p, ep.node)),
        None => Err(CorrError::Syntax { line, msg: format!("VIA edge `{s}` needs `parent/child`") }),
    }
}

fn pin(ep: &mut Endpoint, edge: (NodeIdx, NodeIdx), line: usize, text: &str) -> Result<(), CorrError> {
    if edge.1 != ep.node || ep.parent.is_some_and(|p| p != edge.0) {
        return Err(CorrError::ViaMismatch { line, edge: text.trim().to_string() });
    }
    ep.parent = Some(edge.0);
    Ok(())
}

fn parse_arrow(rest: &str, line: usize, source: &DtdGraph, target: &DtdGraph, boxes: &[BoxDecl]) -> Result<Arrow, CorrError> {
    let (rest, type_tag) = match rest.split_once(" AS ") {
        Some((r, t)) => (r, Some(t.trim().to_string())),
        None => (rest, None),
    };
    let (rest, via_text) = match rest.split_once(" VIA ") {
        Some((r, v)) => (r, Some(v)),
        None => (rest, None),
    };
    let (src, tgt) = rest.split_once("->").ok_or_else(|| CorrError::Syntax { line, msg: "expected `src -> tgt`".into() })?;
    let mut source_ep = resolve_path(src.trim(), line, source)?;
    let mut resolved = match tgt.trim().strip_prefix("BOX ") {
        Some(name) => {
            let name = name.trim();
            let b = boxes.iter().position(|b| b.name == name).ok_or_else(|| CorrError::UnknownBox { line, name: name.to_string() })?;
            ArrowTarget::Box(b)
        }
        None => ArrowTarget::Node(resolve_path(tgt.trim(), line, target)?),
    };

    let mut via = None;
    if let Some(v) = via_text {
        let (vs, vt) = v.split_once('~').ok_or_else(|| CorrError::Syntax { line, msg: "expected `VIA a/b ~ c/d`".into() })?;
        let se = parse_edge(vs.trim(), line, source)?;
        let te = parse_edge(vt.trim(), line, target)?;
        pin(&mut source_ep, se, line, vs)?;
        match &mut resolved {
            ArrowTarget::Node(ep) => pin(ep, te, line, vt)?,
            ArrowTarget::Box(_) => return Err(CorrError::ViaMismatch { line, edge: vt.trim().to_string() }),
        }
        via = Some((se, te));
    }

    if source_ep.parent.is_none() && source.parents(source_ep.node).count() > 1 {
        return Err(CorrError::AmbiguousArrow { line, path: src.trim().to_string(), schema: source.name.clone() });
    }
    if let ArrowTarget::Node(ep) = &resolved {
        if ep.parent.is_none() && target.parents(ep.node).count() > 1 {
            let boxed = boxes.iter().any(|b| target.parents(ep.node).all(|e| b.contains(e.parent)));
            if !boxed {
                return Err(CorrError::AmbiguousArrow { line, path: tgt.trim().to_string(), schema: target.name.clone() });
            }
        }
    }
    Ok(Arrow { source: source_ep, target: resolved, type_tag, via, line })
}
