use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::{NodeIdValue, Value, XmlInstance};
use crate::schema::{AttrKind, Cardinality, DtdGraph, NodeIdx, NodeKind};

/// Shape of generated instances.
#[derive(Debug, Clone)]
pub struct GenParams {
    /// Mean of the geometric fan-out for repeated children.
    pub mean_fanout: f64,
    pub cap: usize,
    /// Cap on repeated children of the root.
    pub root_cap: usize,
    pub optional_p: f64,
    /// Share of IDREF values that point nowhere.
    pub dangling: f64,
    /// Value pools by tag (attributes with `@`).
    pub pools: BTreeMap<String, Vec<String>>,
    /// Values mixed into every pool, e.g. query constants.
    pub extra: Vec<String>,
    /// Size of the default per-tag pool.
    pub default_values: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            mean_fanout: 2.0,
            cap: 5,
            root_cap: 10,
            optional_p: 0.5,
            dangling: 0.2,
            pools: BTreeMap::new(),
            extra: Vec::new(),
            default_values: 3,
        }
    }
}

struct Gen<'a, R: Rng> {
    g: &'a DtdGraph,
    p: &'a GenParams,
    rng: &'a mut R,
    geo: Geometric,
    inst: XmlInstance,
    ids: BTreeMap<NodeIdx, Vec<String>>,
    refs: Vec<(usize, NodeIdx, NodeIdx)>,
}

impl<'a, R: Rng> Gen<'a, R> {
    fn count(&mut self, card: Cardinality, cap: usize) -> usize {
        let geo = (self.geo.sample(self.rng) as usize).min(cap);
        match card {
            Cardinality::One => 1,
            Cardinality::Optional => usize::from(self.rng.gen_bool(self.p.optional_p)),
            Cardinality::Star => geo,
            Cardinality::Plus => (geo + 1).min(cap.max(1)),
        }
    }

    fn value(&mut self, tag: &str) -> String {
        let mut pool: Vec<String> = match self.p.pools.get(tag) {
            Some(p) => p.clone(),
            None => {
                let base = tag.trim_start_matches('@');
                (0..self.p.default_values.max(1)).map(|k| format!("{base}{k}")).collect()
            }
        };
        if !self.p.pools.contains_key(tag) {
            pool.extend(self.p.extra.iter().cloned());
        }
        pool.choose(self.rng).cloned().unwrap_or_default()
    }

    fn element(&mut self, n: NodeIdx, parent: Option<usize>, depth: usize) -> usize {
        let tag = self.g.tag(n).to_string();
        let value = if self.g.node(n).valued && self.g.is_leaf(n) { Some(Value::Text(self.value(&tag))) } else { None };
        let id = NodeIdValue::Source(self.inst.len() as u64);
        let me = self.inst.add(parent, &tag, id, value);
        let edges: Vec<_> = self.g.children(n).copied().collect();
        for e in edges {
            let cap = if depth == 0 { self.p.root_cap } else { self.p.cap };
            let k = self.count(e.card, cap);
            for _ in 0..k {
                match self.g.node(e.child).kind {
                    NodeKind::Element => {
                        self.element(e.child, Some(me), depth + 1);
                    }
                    NodeKind::Attribute(kind) => {
                        let atag = self.g.tag(e.child).to_string();
                        let v = match kind {
                            AttrKind::Id => {
                                let list = self.ids.entry(n).or_default();
                                let v = format!("{}{}", tag.to_lowercase(), list.len() + 1);
                                list.push(v.clone());
                                v
                            }
                            AttrKind::IdRef => String::new(),
                            AttrKind::Plain => self.value(&atag),
                        };
                        let id = NodeIdValue::Source(self.inst.len() as u64);
                        let a = self.inst.add(Some(me), &atag, id, Some(Value::Text(v)));
                        if kind == AttrKind::IdRef {
                            self.refs.push((a, n, e.child));
                        }
                    }
                }
            }
        }
        me
    }
}

/// A seeded random instance of `g` respecting its cardinalities. ID values are unique;
/// IDREF values are drawn from the linked IDs, except for a dangling share.
pub fn random_instance<R: Rng>(g: &DtdGraph, p: &GenParams, rng: &mut R) -> XmlInstance {
    let geo = Geometric::new(1.0 / (1.0 + p.mean_fanout.max(0.0))).expect("valid probability");
    let mut gen = Gen { g, p, rng, geo, inst: XmlInstance::empty(&g.name), ids: BTreeMap::new(), refs: Vec::new() };
    gen.element(g.root, None, 0);
    let refs = std::mem::take(&mut gen.refs);
    for (k, (node, elem, attr)) in refs.into_iter().enumerate() {
        let targets: Vec<String> = g.links_from(elem, attr).flat_map(|l| gen.ids.get(&l.id_elem).cloned().unwrap_or_default()).collect();
        let v = if targets.is_empty() || gen.rng.gen_bool(p.dangling) {
            format!("dangling{}", k + 1)
        } else {
            targets.choose(gen.rng).cloned().unwrap()
        };
        gen.inst.set_value(node, Value::Text(v));
    }
    gen.inst
}
