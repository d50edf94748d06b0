//! Unordered XML instances, their validation, and data exchange through mapping rules.

mod exchange;
mod gen;
mod xml;

pub use exchange::{apply_rules, match_body, Binding, ExchangeError, Substitution};
pub use gen::{random_instance, GenParams};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::schema::{AttrKind, DtdGraph, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("line {line}: {msg}")]
    Xml { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Validation { path: String, msg: String },
    #[error("{path}: duplicate ID value `{value}`")]
    DuplicateId { path: String, value: String },
}

/// Placeholder for a missing optional value, identified by the slot it fills.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkedNull {
    pub origin: Vec<String>,
    pub parent: u64,
}

impl fmt::Display for MarkedNull {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:null({}@s{})", self.origin.join("/"), self.parent)
    }
}

/// A ground Skolem argument.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ground {
    Text(String),
    /// An internal source node, by its opaque id.
    Node(u64),
    Null(MarkedNull),
}

impl fmt::Display for Ground {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ground::Text(t) => write!(f, "{t:?}"),
            Ground::Node(n) => write!(f, "s{n}"),
            Ground::Null(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeIdValue {
    Source(u64),
    Skolem {
        functor: String,
        args: Vec<Ground>,
    },
    /// Nodes identified by their value alone (attributes produced by rules).
    Value(Ground),
}

impl fmt::Display for NodeIdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeIdValue::Source(n) => write!(f, "s{n}"),
            NodeIdValue::Skolem { functor, args } => {
                let a: Vec<String> = args.iter().map(|g| g.to_string()).collect();
                write!(f, "{functor}({})", a.join(", "))
            }
            NodeIdValue::Value(g) => write!(f, "={g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Text(String),
    Null(MarkedNull),
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Text(t) => t.clone(),
            Value::Null(m) => m.to_string(),
        }
    }

    pub fn as_ground(&self) -> Ground {
        match self {
            Value::Text(t) => Ground::Text(t.clone()),
            Value::Null(m) => Ground::Null(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlNode {
    /// Attributes carry a leading `@`.
    pub tag: String,
    pub id: NodeIdValue,
    /// Present on valued leaves and attributes.
    pub value: Option<Value>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl XmlNode {
    pub fn is_attribute(&self) -> bool {
        self.tag.starts_with('@')
    }
}

/// An instance as an arena of nodes; child order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlInstance {
    pub schema: String,
    nodes: Vec<XmlNode>,
    root: Option<usize>,
}

impl XmlInstance {
    pub fn empty(schema: &str) -> Self {
        XmlInstance { schema: schema.to_string(), nodes: Vec::new(), root: None }
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn node(&self, i: usize) -> &XmlNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.nodes[i].children
    }

    pub fn tag(&self, i: usize) -> &str {
        &self.nodes[i].tag
    }

    pub fn value(&self, i: usize) -> Option<&Value> {
        self.nodes[i].value.as_ref()
    }

    /// Adds a node; the first node added without a parent becomes the root.
    pub fn add(&mut self, parent: Option<usize>, tag: &str, id: NodeIdValue, value: Option<Value>) -> usize {
        let i = self.nodes.len();
        self.nodes.push(XmlNode { tag: tag.to_string(), id, value, children: vec![], parent });
        match parent {
            Some(p) => self.nodes[p].children.push(i),
            None => {
                assert!(self.root.is_none(), "instance already has a root");
                self.root = Some(i);
            }
        }
        i
    }

    pub fn set_value(&mut self, i: usize, v: Value) {
        self.nodes[i].value = Some(v);
    }

    /// Proper descendants of `i`, in no particular order.
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.nodes[i].children.clone();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(&self.nodes[n].children);
        }
        out
    }

    pub fn preorder(&self) -> Vec<usize> {
        match self.root {
            Some(r) => {
                let mut v = vec![r];
                v.extend(self.descendants(r));
                v
            }
            None => vec![],
        }
    }

    pub fn count_tag(&self, tag: &str) -> usize {
        self.nodes.iter().filter(|n| n.tag == tag).count()
    }

    /// One-line canonical rendering of the subtree at `i`, ids erased.
    pub fn canonical_subtree(&self, i: usize) -> String {
        let mut s = String::new();
        self.write_node(i, None, &mut s);
        s
    }

    /// Canonical document: UTF-8, two-space indent, attributes sorted by name, element
    /// children sorted by tag, then text, then full rendering. Empty instances serialize to "".
    pub fn to_xml(&self) -> String {
        let mut s = String::new();
        if let Some(r) = self.root {
            self.write_node(r, Some(0), &mut s);
        }
        s
    }

    fn sorted_children(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let n = &self.nodes[i];
        let mut attrs: Vec<usize> = n.children.iter().copied().filter(|&c| self.nodes[c].is_attribute()).collect();
        attrs.sort_by(|&a, &b| (&self.nodes[a].tag, &self.nodes[a].value).cmp(&(&self.nodes[b].tag, &self.nodes[b].value)));
        let mut elems: Vec<(String, String, String, usize)> = n
            .children
            .iter()
            .copied()
            .filter(|&c| !self.nodes[c].is_attribute())
            .map(|c| {
                let text = self.nodes[c].value.as_ref().map(Value::render).unwrap_or_default();
                (self.nodes[c].tag.clone(), text, self.canonical_subtree(c), c)
            })
            .collect();
        elems.sort();
        (attrs, elems.into_iter().map(|e| e.3).collect())
    }

    fn write_node(&self, i: usize, indent: Option<usize>, out: &mut String) {
        let n = &self.nodes[i];
        let (attrs, elems) = self.sorted_children(i);
        if let Some(d) = indent {
            out.push_str(&"  ".repeat(d));
        }
        out.push('<');
        out.push_str(&n.tag);
        for a in attrs {
            let an = &self.nodes[a];
            let v = an.value.as_ref().map(Value::render).unwrap_or_default();
            out.push_str(&format!(" {}=\"{}\"", &an.tag[1..], xml::escape(&v, true)));
        }
        let text = n.value.as_ref().map(Value::render);
        match (&text, elems.is_empty()) {
            (None, true) => out.push_str("/>"),
            (Some(t), true) => {
                out.push('>');
                out.push_str(&xml::escape(t, false));
                out.push_str(&format!("</{}>", n.tag));
            }
            (_, false) => {
                out.push('>');
                if indent.is_some() {
                    out.push('\n');
                }
                for c in elems {
                    self.write_node(c, indent.map(|d| d + 1), out);
                }
                if let Some(d) = indent {
                    out.push_str(&"  ".repeat(d));
                }
                out.push_str(&format!("</{}>", n.tag));
            }
        }
        if indent.is_some() {
            out.push('\n');
        }
    }

    fn path_of(&self, i: usize) -> String {
        let mut tags = vec![];
        let mut cur = Some(i);
        while let Some(c) = cur {
            tags.push(self.nodes[c].tag.clone());
            cur = self.nodes[c].parent;
        }
        tags.reverse();
        format!("/{}", tags.join("/"))
    }
}

/// Parses and validates an instance of `schema`. Document order is discarded.
pub fn parse_instance(text: &str, schema: &DtdGraph) -> Result<XmlInstance, InstanceError> {
    let mut inst = XmlInstance::empty(&schema.name);
    let Some(raw) = xml::read_document(text)? else {
        return Ok(inst);
    };
    let mut lines = Vec::new();
    build(&mut inst, None, &raw, Some(schema), &mut lines);
    validate_with_lines(&inst, schema, &lines)?;
    Ok(inst)
}

/// Reads a well-formed document without a schema, e.g. the output of an exchange, which
/// need not be valid. Elements without text carry no value.
pub fn read_instance(text: &str) -> Result<XmlInstance, InstanceError> {
    let Some(raw) = xml::read_document(text)? else {
        return Ok(XmlInstance::empty(""));
    };
    let mut inst = XmlInstance::empty(&raw.tag);
    build(&mut inst, None, &raw, None, &mut Vec::new());
    Ok(inst)
}

fn build(inst: &mut XmlInstance, parent: Option<usize>, raw: &xml::RawElem, schema: Option<&DtdGraph>, lines: &mut Vec<usize>) {
    let valued = schema.is_some_and(|schema| schema.lookup(&raw.tag).is_some_and(|n| schema.node(n).valued && schema.is_leaf(n)));
    let value = match (&raw.text, valued) {
        (Some(t), _) => Some(Value::Text(t.clone())),
        (None, true) => Some(Value::Text(String::new())),
        (None, false) => None,
    };
    let id = NodeIdValue::Source(inst.len() as u64);
    let me = inst.add(parent, &raw.tag, id, value);
    lines.push(raw.line);
    for (name, v) in &raw.attrs {
        let id = NodeIdValue::Source(inst.len() as u64);
        inst.add(Some(me), &format!("@{name}"), id, Some(Value::Text(v.clone())));
        lines.push(raw.line);
    }
    for c in &raw.children {
        build(inst, Some(me), c, schema, lines);
    }
}

/// Checks tags, parent-child edges, cardinalities, required attributes, text placement
/// and ID uniqueness. IDREF values are not required to resolve.
pub fn validate(inst: &XmlInstance, schema: &DtdGraph) -> Result<(), InstanceError> {
    validate_with_lines(inst, schema, &[])
}

fn validate_with_lines(inst: &XmlInstance, schema: &DtdGraph, lines: &[usize]) -> Result<(), InstanceError> {
    let Some(root) = inst.root else { return Ok(()) };
    let where_ = |i: usize| match lines.get(i) {
        Some(l) => format!("{} (line {l})", inst.path_of(i)),
        None => inst.path_of(i),
    };
    let bad = |i: usize, msg: String| InstanceError::Validation { path: where_(i), msg };
    if inst.tag(root) != schema.tag(schema.root) {
        return Err(bad(root, format!("root must be `{}`", schema.tag(schema.root))));
    }
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    for i in inst.preorder() {
        let n = inst.node(i);
        let sn = schema.lookup(&n.tag).ok_or_else(|| bad(i, format!("unknown tag `{}`", n.tag)))?;
        let decl = schema.node(sn);
        if n.is_attribute() != decl.is_attribute() {
            return Err(bad(i, "attribute/element mismatch".into()));
        }
        if let Some(p) = n.parent {
            let psn = schema.lookup(inst.tag(p)).expect("parent checked first");
            if schema.edge(psn, sn).is_none() {
                return Err(bad(i, format!("`{}` is not allowed under `{}`", n.tag, inst.tag(p))));
            }
        }
        if n.value.is_some() && !(decl.valued || decl.is_attribute()) {
            return Err(bad(i, format!("`{}` cannot hold text", n.tag)));
        }
        if decl.kind == NodeKind::Attribute(AttrKind::Id) {
            let v = n.value.as_ref().map(Value::render).unwrap_or_default();
            if ids.insert(v.clone(), i).is_some() {
                return Err(InstanceError::DuplicateId { path: where_(i), value: v });
            }
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &c in &n.children {
            *counts.entry(inst.tag(c)).or_default() += 1;
        }
        let mut seen = BTreeSet::new();
        for e in schema.children(sn) {
            let t = schema.tag(e.child);
            seen.insert(t);
            let k = counts.get(t).copied().unwrap_or(0);
            let ok = match e.card {
                crate::schema::Cardinality::One => k == 1,
                crate::schema::Cardinality::Optional => k <= 1,
                crate::schema::Cardinality::Star => true,
                crate::schema::Cardinality::Plus => k >= 1,
            };
            if !ok {
                return Err(bad(i, format!("`{t}{}` occurs {k} times", e.card.suffix())));
            }
        }
        if let Some(t) = counts.keys().find(|t| !seen.contains(*t)) {
            return Err(bad(i, format!("`{t}` is not allowed under `{}`", n.tag)));
        }
    }
    Ok(())
}
