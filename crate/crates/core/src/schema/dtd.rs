use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{AttrKind, Cardinality, DtdEdge, DtdGraph, DtdNode, IdrefLink, NodeIdx, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtdError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported construct: {what}")]
    UnsupportedConstruct { line: usize, what: String },
    #[error("element recursion through {0}")]
    CycleError(String),
    #[error("line {line}: dangling reference to `{name}`")]
    DanglingReference { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("schema root is not unique: {0}")]
    Root(String),
    #[error("attribute `{0}` declared with conflicting kinds")]
    AttrKindConflict(String),
    #[error("line {line}: invalid link: {msg}")]
    InvalidLink { line: usize, msg: String },
}

enum Content {
    Text,
    Empty,
    Seq(Vec<(String, Cardinality)>),
}

struct ElementDecl {
    name: String,
    line: usize,
    content: Content,
}

struct AttrDecl {
    name: String,
    kind: AttrKind,
    required: bool,
    line: usize,
}

struct LinkDecl {
    line: usize,
    ref_elem: String,
    ref_attr: String,
    id_elem: String,
    id_attr: String,
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !"(),|?*+<>\"'".contains(c)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].matches('\n').count() + 1
}

/// Parses the supported DTD subset plus trailing `LINK` directives.
pub fn parse_dtd(text: &str) -> Result<DtdGraph, DtdError> {
    let mut elements: Vec<ElementDecl> = Vec::new();
    let mut attlists: BTreeMap<String, Vec<AttrDecl>> = BTreeMap::new();
    let mut attlist_lines: Vec<(String, usize)> = Vec::new();
    let mut links: Vec<LinkDecl> = Vec::new();

    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let line = line_of(text, pos);
        if c == '#' {
            pos += rest.find('\n').unwrap_or(rest.len());
            continue;
        }
        if let Some(body) = rest.strip_prefix("<!ELEMENT") {
            let end = body.find('>').ok_or_else(|| DtdError::Syntax { line, msg: "unterminated <!ELEMENT".into() })?;
            elements.push(parse_element(&body[..end], line)?);
            pos += "<!ELEMENT".len() + end + 1;
        } else if let Some(body) = rest.strip_prefix("<!ATTLIST") {
            let end = body.find('>').ok_or_else(|| DtdError::Syntax { line, msg: "unterminated <!ATTLIST".into() })?;
            let (elem, decls) = parse_attlist(&body[..end], line)?;
            attlist_lines.push((elem.clone(), line));
            attlists.entry(elem).or_default().extend(decls);
            pos += "<!ATTLIST".len() + end + 1;
        } else if rest.starts_with("<!--") {
            let end = rest.find("-->").ok_or_else(|| DtdError::Syntax { line, msg: "unterminated comment".into() })?;
            pos += end + 3;
        } else if rest.starts_with("<!") {
            let what: String = rest.chars().take_while(|c| !c.is_whitespace()).collect();
            return Err(DtdError::UnsupportedConstruct { line, what });
        } else if let Some(body) = rest.strip_prefix("LINK") {
            let end = body.find('\n').unwrap_or(body.len());
            links.push(parse_link(&body[..end], line)?);
            pos += "LINK".len() + end;
        } else {
            return Err(DtdError::Syntax { line, msg: format!("unexpected `{}`", rest.lines().next().unwrap_or("")) });
        }
    }
    build(elements, attlists, attlist_lines, links)
}

fn parse_element(body: &str, line: usize) -> Result<ElementDecl, DtdError> {
    let body = body.trim();
    let name: String = body.chars().take_while(|&c| is_name_char(c)).collect();
    if name.is_empty() {
        return Err(DtdError::Syntax { line, msg: "missing element name".into() });
    }
    let model = body[name.len()..].trim();
    let content = if model == "EMPTY" {
        Content::Empty
    } else if model == "ANY" {
        return Err(DtdError::UnsupportedConstruct { line, what: "ANY content".into() });
    } else {
        let inner = model.strip_prefix('(').and_then(|m| m.strip_suffix(')')).ok_or_else(|| {
            if model.starts_with('(') && model.contains(')') {
                DtdError::UnsupportedConstruct { line, what: format!("group cardinality in `{model}`") }
            } else {
                DtdError::Syntax { line, msg: format!("bad content model `{model}`") }
            }
        })?;
        if inner.contains('|') {
            let what = if inner.contains("#PCDATA") { "mixed content" } else { "choice group" };
            return Err(DtdError::UnsupportedConstruct { line, what: what.into() });
        }
        if inner.contains('(') || inner.contains(')') {
            return Err(DtdError::UnsupportedConstruct { line, what: "nested group".into() });
        }
        if inner.trim() == "#PCDATA" {
            Content::Text
        } else {
            let mut items = Vec::new();
            for raw in inner.split(',') {
                let raw = raw.trim();
                let (tag, card) = match raw.chars().last() {
                    Some('?') => (&raw[..raw.len() - 1], Cardinality::Optional),
                    Some('*') => (&raw[..raw.len() - 1], Cardinality::Star),
                    Some('+') => (&raw[..raw.len() - 1], Cardinality::Plus),
                    _ => (raw, Cardinality::One),
                };
                let tag = tag.trim();
                if tag == "#PCDATA" {
                    return Err(DtdError::UnsupportedConstruct { line, what: "mixed content".into() });
                }
                if tag.is_empty() || !tag.chars().all(is_name_char) {
                    return Err(DtdError::Syntax { line, msg: format!("bad child `{raw}`") });
                }
                if items.iter().any(|(t, _): &(String, Cardinality)| t == tag) {
                    return Err(DtdError::UnsupportedConstruct { line, what: format!("repeated child `{tag}`") });
                }
                items.push((tag.to_string(), card));
            }
            Content::Seq(items)
        }
    };
    Ok(ElementDecl { name, line, content })
}

fn parse_attlist(body: &str, line: usize) -> Result<(String, Vec<AttrDecl>), DtdError> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    let (elem, rest) = toks.split_first().ok_or_else(|| DtdError::Syntax { line, msg: "empty <!ATTLIST".into() })?;
    if rest.is_empty() || rest.len() % 3 != 0 {
        return Err(DtdError::Syntax { line, msg: "expected `name TYPE DEFAULT` triples".into() });
    }
    let mut out = Vec::new();
    for t in rest.chunks(3) {
        let kind = match t[1] {
            "CDATA" => AttrKind::Plain,
            "ID" => AttrKind::Id,
            "IDREF" => AttrKind::IdRef,
            other => return Err(DtdError::UnsupportedConstruct { line, what: format!("attribute type {other}") }),
        };
        let required = match t[2] {
            "#REQUIRED" => true,
            "#IMPLIED" => false,
            other => return Err(DtdError::UnsupportedConstruct { line, what: format!("attribute default {other}") }),
        };
        out.push(AttrDecl { name: t[0].to_string(), kind, required, line });
    }
    Ok((elem.to_string(), out))
}

fn parse_link(body: &str, line: usize) -> Result<LinkDecl, DtdError> {
    let bad = || DtdError::Syntax { line, msg: "expected `LINK Elem.@ref -> Elem.@id`".into() };
    let (l, r) = body.split_once("->").ok_or_else(bad)?;
    let split = |s: &str| -> Result<(String, String), DtdError> {
        let (e, a) = s.trim().split_once(".@").ok_or_else(bad)?;
        Ok((e.to_string(), a.to_string()))
    };
    let (ref_elem, ref_attr) = split(l)?;
    let (id_elem, id_attr) = split(r)?;
    Ok(LinkDecl { line, ref_elem, ref_attr, id_elem, id_attr })
}

fn build(
    elements: Vec<ElementDecl>,
    attlists: BTreeMap<String, Vec<AttrDecl>>,
    attlist_lines: Vec<(String, usize)>,
    links: Vec<LinkDecl>,
) -> Result<DtdGraph, DtdError> {
    let mut index: BTreeMap<String, NodeIdx> = BTreeMap::new();
    let mut nodes = Vec::new();
    for e in &elements {
        if index.contains_key(&e.name) {
            return Err(DtdError::Duplicate { line: e.line, name: e.name.clone() });
        }
        index.insert(e.name.clone(), NodeIdx(nodes.len()));
        nodes.push(DtdNode { tag: e.name.clone(), kind: NodeKind::Element, valued: matches!(e.content, Content::Text) });
    }
    for (elem, line) in &attlist_lines {
        if !index.contains_key(elem) {
            return Err(DtdError::DanglingReference { line: *line, name: elem.clone() });
        }
    }
    for e in &elements {
        for a in attlists.get(&e.name).into_iter().flatten() {
            let tag = format!("@{}", a.name);
            match index.get(&tag) {
                Some(&n) => {
                    if nodes[n.0].kind != NodeKind::Attribute(a.kind) {
                        return Err(DtdError::AttrKindConflict(tag));
                    }
                }
                None => {
                    index.insert(tag.clone(), NodeIdx(nodes.len()));
                    nodes.push(DtdNode { tag, kind: NodeKind::Attribute(a.kind), valued: true });
                }
            }
        }
    }

    let mut edges = Vec::new();
    for e in &elements {
        let parent = index[&e.name];
        let mut seen = BTreeSet::new();
        for a in attlists.get(&e.name).into_iter().flatten() {
            if !seen.insert(a.name.clone()) {
                return Err(DtdError::Duplicate { line: a.line, name: format!("{}.@{}", e.name, a.name) });
            }
            let card = if a.required { Cardinality::One } else { Cardinality::Optional };
            edges.push(DtdEdge { parent, child: index[&format!("@{}", a.name)], card });
        }
        if let Content::Seq(items) = &e.content {
            for (tag, card) in items {
                let child = *index
                    .get(tag)
                    .filter(|c| nodes[c.0].kind == NodeKind::Element)
                    .ok_or_else(|| DtdError::DanglingReference { line: e.line, name: tag.clone() })?;
                edges.push(DtdEdge { parent, child, card: *card });
            }
        }
    }

    if nodes.is_empty() {
        return Err(DtdError::Root("no element declarations".into()));
    }
    check_acyclic(&nodes, &edges)?;
    let has_parent: BTreeSet<usize> = edges.iter().map(|e| e.child.0).collect();
    let roots: Vec<&str> = (0..nodes.len()).filter(|i| !has_parent.contains(i)).map(|i| nodes[i].tag.as_str()).collect();
    if roots.len() != 1 {
        return Err(DtdError::Root(format!("candidates {}", roots.join(", "))));
    }
    let root = index[roots[0]];

    let mut out_links = Vec::new();
    for l in &links {
        let lookup = |elem: &str, attr: &str, want: AttrKind| -> Result<(NodeIdx, NodeIdx), DtdError> {
            let e = *index
                .get(elem)
                .filter(|n| nodes[n.0].kind == NodeKind::Element)
                .ok_or_else(|| DtdError::DanglingReference { line: l.line, name: elem.to_string() })?;
            let a = *index
                .get(&format!("@{attr}"))
                .filter(|a| edges.iter().any(|x| x.parent == e && x.child == **a))
                .ok_or_else(|| DtdError::DanglingReference { line: l.line, name: format!("{elem}.@{attr}") })?;
            if nodes[a.0].kind != NodeKind::Attribute(want) {
                return Err(DtdError::InvalidLink { line: l.line, msg: format!("{elem}.@{attr} has the wrong attribute kind") });
            }
            Ok((e, a))
        };
        let (ref_elem, ref_attr) = lookup(&l.ref_elem, &l.ref_attr, AttrKind::IdRef)?;
        let (id_elem, id_attr) = lookup(&l.id_elem, &l.id_attr, AttrKind::Id)?;
        out_links.push(IdrefLink { ref_elem, ref_attr, id_elem, id_attr });
    }

    let name = nodes[root.0].tag.clone();
    Ok(DtdGraph::assemble(name, nodes, edges, root, out_links))
}

fn check_acyclic(nodes: &[DtdNode], edges: &[DtdEdge]) -> Result<(), DtdError> {
    let mut adj = vec![Vec::new(); nodes.len()];
    for e in edges {
        adj[e.parent.0].push(e.child.0);
    }
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; nodes.len()];
    fn visit(n: usize, adj: &[Vec<usize>], state: &mut [u8]) -> Option<usize> {
        state[n] = 1;
        for &c in &adj[n] {
            match state[c] {
                1 => return Some(c),
                0 => {
                    if let Some(x) = visit(c, adj, state) {
                        return Some(x);
                    }
                }
                _ => {}
            }
        }
        state[n] = 2;
        None
    }
    for n in 0..nodes.len() {
        if state[n] == 0 {
            if let Some(c) = visit(n, &adj, &mut state) {
                return Err(DtdError::CycleError(nodes[c].tag.clone()));
            }
        }
    }
    Ok(())
}

/// Renders a graph in the accepted schema file format.
pub fn serialize_dtd(g: &DtdGraph) -> String {
    let mut out = String::new();
    let elements: Vec<NodeIdx> = g.node_ids().filter(|&n| !g.node(n).is_attribute()).collect();
    for &e in &elements {
        let node = g.node(e);
        let kids: Vec<String> =
            g.children(e).filter(|x| !g.node(x.child).is_attribute()).map(|x| format!("{}{}", g.tag(x.child), x.card.suffix())).collect();
        let model = if node.valued {
            "(#PCDATA)".to_string()
        } else if kids.is_empty() {
            "EMPTY".to_string()
        } else {
            format!("({})", kids.join(", "))
        };
        out.push_str(&format!("<!ELEMENT {} {}>\n", node.tag, model));
    }
    for &e in &elements {
        for x in g.children(e).filter(|x| g.node(x.child).is_attribute()) {
            let a = g.node(x.child);
            let kind = match a.kind {
                NodeKind::Attribute(AttrKind::Id) => "ID",
                NodeKind::Attribute(AttrKind::IdRef) => "IDREF",
                _ => "CDATA",
            };
            let default = if x.card == Cardinality::One { "#REQUIRED" } else { "#IMPLIED" };
            out.push_str(&format!("<!ATTLIST {} {} {} {}>\n", g.tag(e), &a.tag[1..], kind, default));
        }
    }
    for l in &g.links {
        out.push_str(&format!("LINK {}.{} -> {}.{}\n", g.tag(l.ref_elem), g.tag(l.ref_attr), g.tag(l.id_elem), g.tag(l.id_attr)));
    }
    out
}
