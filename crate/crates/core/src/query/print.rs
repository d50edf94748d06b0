use std::collections::{BTreeMap, BTreeSet};

use super::{Axis, Operand, PatternNode, TagTest, TpQuery};

fn quote(s: &str) -> String {
    if s.contains('\'') {
        format!("\"{s}\"")
    } else {
        format!("'{s}'")
    }
}

fn step(axis: Axis, tag: &TagTest) -> String {
    format!("{}{}", axis.sep(), tag)
}

/// What a node is used for besides its children.
#[derive(Default)]
struct Uses {
    children: usize,
    selfs: usize,
}

struct Layout<'q> {
    q: &'q TpQuery,
    parent: BTreeMap<String, (String, Axis)>,
    node: BTreeMap<String, &'q PatternNode>,
    pattern: BTreeMap<String, usize>,
    bound: BTreeSet<String>,
    names: BTreeMap<String, String>,
}

impl<'q> Layout<'q> {
    fn new(q: &'q TpQuery) -> Self {
        let mut l = Layout {
            q,
            parent: BTreeMap::new(),
            node: BTreeMap::new(),
            pattern: BTreeMap::new(),
            bound: BTreeSet::new(),
            names: BTreeMap::new(),
        };
        let mut uses: BTreeMap<String, Uses> = BTreeMap::new();
        for (k, p) in q.patterns.iter().enumerate() {
            for n in p.root.preorder() {
                l.node.insert(n.var.clone(), n);
                l.pattern.insert(n.var.clone(), k);
                let u = uses.entry(n.var.clone()).or_default();
                u.children += n.children.len();
                for (ax, c) in &n.children {
                    l.parent.insert(c.var.clone(), (n.var.clone(), *ax));
                }
                for c in &n.constraints {
                    uses.entry(n.var.clone()).or_default().selfs += 1;
                    if let Operand::Var(o) = &c.operand {
                        uses.entry(o.clone()).or_default().selfs += 1;
                    }
                }
            }
            l.bound.insert(p.root.var.clone());
        }
        for (a, b) in &q.joins {
            uses.entry(a.clone()).or_default().selfs += 1;
            uses.entry(b.clone()).or_default().selfs += 1;
        }
        for r in &q.returns {
            uses.entry(r.clone()).or_default().selfs += 1;
        }
        for (v, u) in &uses {
            if u.children + u.selfs >= 2 {
                l.bound.insert(v.clone());
            }
        }
        let order = l.binding_order();
        let mut taken: BTreeSet<String> = BTreeSet::new();
        for v in &order {
            if !v.starts_with('_') && taken.insert(v.clone()) {
                l.names.insert(v.clone(), v.clone());
            }
        }
        for v in &order {
            if l.names.contains_key(v) {
                continue;
            }
            let base: String = match &l.node[v].tag {
                TagTest::Name(t) => {
                    t.trim_start_matches('@').chars().find(|c| c.is_alphabetic()).map_or("X".into(), |c| c.to_uppercase().to_string())
                }
                TagTest::Wildcard => "X".into(),
            };
            let mut name = base.clone();
            let mut k = 2;
            while taken.contains(&name) {
                name = format!("{base}{k}");
                k += 1;
            }
            taken.insert(name.clone());
            l.names.insert(v.clone(), name);
        }
        l
    }

    /// Bound variables, patterns in order, preorder within each.
    fn binding_order(&self) -> Vec<String> {
        self.q.patterns.iter().flat_map(|p| p.root.preorder()).filter(|n| self.bound.contains(&n.var)).map(|n| n.var.clone()).collect()
    }

    /// Nearest bound ancestor-or-self and the relative path from it.
    fn anchor(&self, var: &str) -> (String, String) {
        let mut path = String::new();
        let mut cur = var.to_string();
        while !self.bound.contains(&cur) {
            let (p, ax) = &self.parent[&cur];
            path = format!("{}{}", step(*ax, &self.node[&cur].tag), path);
            cur = p.clone();
        }
        (cur, path)
    }

    fn var_path(&self, var: &str) -> String {
        let (a, rel) = self.anchor(var);
        format!("${}{}", self.names[&a], rel)
    }

    /// Relative path from an anchor used inside a predicate.
    fn pred_path(rel: &str) -> String {
        match rel.strip_prefix("//") {
            Some(r) => format!(".//{r}"),
            None => rel.trim_start_matches('/').to_string(),
        }
    }

    fn rank(&self, var: &str) -> usize {
        self.binding_order().iter().position(|v| v == var).unwrap_or(usize::MAX)
    }
}

fn xpath_form(q: &TpQuery) -> Option<String> {
    if q.patterns.len() != 1 || !q.joins.is_empty() || q.returns.len() != 1 {
        return None;
    }
    let p = &q.patterns[0];
    let target = &q.returns[0];
    let mut spine: Vec<(Axis, &PatternNode)> = vec![(p.axis, &p.root)];
    while spine.last().unwrap().1.var != *target {
        let cur = spine.last().unwrap().1;
        let next = cur.children.iter().find(|(_, c)| c.find(target).is_some())?;
        spine.push((next.0, &next.1));
    }
    let on_spine: BTreeSet<&str> = spine.iter().map(|(_, n)| n.var.as_str()).collect();
    let mut out = String::new();
    for (ax, n) in &spine {
        if !n.constraints.is_empty() {
            return None;
        }
        out.push_str(&step(*ax, &n.tag));
        for (cax, c) in &n.children {
            if on_spine.contains(c.var.as_str()) {
                continue;
            }
            let mut rel = step(*cax, &c.tag);
            let mut cur = c;
            loop {
                if cur.children.is_empty() {
                    break;
                }
                if cur.children.len() > 1 || !cur.constraints.is_empty() {
                    return None;
                }
                let (a, nx) = &cur.children[0];
                rel.push_str(&step(*a, &nx.tag));
                cur = nx;
            }
            let cond = match cur.constraints.as_slice() {
                [] => String::new(),
                [c] => match &c.operand {
                    Operand::Lit(l) => format!("{}{}", c.op.symbol(), quote(l)),
                    Operand::Var(_) => return None,
                },
                _ => return None,
            };
            out.push_str(&format!("[{}{}]", Layout::pred_path(&rel), cond));
        }
    }
    Some(out)
}

/// Prints a query: an absolute path when it is a single pattern with one distinguished
/// node and simple predicates, `FOR ... WHERE ... RETURN {...}` otherwise.
pub fn print_query(q: &TpQuery) -> String {
    if let Some(x) = xpath_form(q) {
        return x;
    }
    let l = Layout::new(q);
    let order = l.binding_order();
    let mut preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut wheres: Vec<String> = Vec::new();

    for p in &q.patterns {
        for n in p.root.preorder() {
            if n.is_leaf() && !l.bound.contains(&n.var) {
                let used = !n.constraints.is_empty()
                    || q.is_distinguished(&n.var)
                    || q.joins.iter().any(|(a, b)| *a == n.var || *b == n.var)
                    || q.patterns
                        .iter()
                        .flat_map(|p| p.root.preorder())
                        .any(|m| m.constraints.iter().any(|c| c.operand == Operand::Var(n.var.clone())));
                if !used {
                    let (a, rel) = l.anchor(&n.var);
                    preds.entry(a).or_default().push(format!("[{}]", Layout::pred_path(&rel)));
                }
            }
            for c in &n.constraints {
                let rhs = match &c.operand {
                    Operand::Lit(lit) => quote(lit),
                    Operand::Var(o) => l.var_path(o),
                };
                wheres.push(format!("{}{}{}", l.var_path(&n.var), c.op.symbol(), rhs));
            }
        }
    }
    for (a, b) in &q.joins {
        let (aa, arel) = l.anchor(a);
        let (ba, brel) = l.anchor(b);
        let (host, hrel, other) = if l.rank(&aa) > l.rank(&ba) { (aa, arel, b) } else { (ba, brel, a) };
        let other_anchor = l.anchor(other).0;
        if hrel.is_empty() || other_anchor == host {
            wheres.push(format!("{}={}", l.var_path(a), l.var_path(b)));
        } else {
            preds.entry(host).or_default().push(format!("[{}={}]", Layout::pred_path(&hrel), l.var_path(other)));
        }
    }

    let mut bindings = Vec::new();
    for v in &order {
        let (src, rel) = match l.parent.get(v) {
            None => {
                let k = l.pattern[v];
                (String::new(), step(q.patterns[k].axis, &l.node[v].tag))
            }
            Some((p, ax)) => {
                let (a, rel) = l.anchor(p);
                (format!("${}", l.names[&a]), format!("{rel}{}", step(*ax, &l.node[v].tag)))
            }
        };
        let pr: String = preds.get(v).map(|p| p.concat()).unwrap_or_default();
        bindings.push(format!("${} IN {src}{rel}{pr}", l.names[v]));
    }
    let mut out = format!("FOR {}", bindings.join(", "));
    if !wheres.is_empty() {
        out.push_str(&format!(" WHERE {}", wheres.join(" AND ")));
    }
    let rets: Vec<String> = q.returns.iter().map(|r| l.var_path(r)).collect();
    out.push_str(&format!(" RETURN {{{}}}", rets.join(", ")));
    out
}

pub fn print_union(qs: &[TpQuery]) -> String {
    qs.iter().map(print_query).collect::<Vec<_>>().join(" UNION ")
}

/// A rendering invariant under variable renaming, pattern order and sibling order.
pub fn canonical_query(q: &TpQuery) -> String {
    let mut addr: BTreeMap<String, String> = BTreeMap::new();
    fn walk(n: &PatternNode, prefix: &str, axis: Axis, addr: &mut BTreeMap<String, String>) {
        let me = format!("{prefix}{}", step(axis, &n.tag));
        addr.insert(n.var.clone(), me.clone());
        for (ax, c) in &n.children {
            walk(c, &me, *ax, addr);
        }
    }
    for p in &q.patterns {
        walk(&p.root, "", p.axis, &mut addr);
    }
    let mut marks: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (a, b) in &q.joins {
        marks.entry(a.clone()).or_default().push(format!("={}", addr[b]));
        marks.entry(b.clone()).or_default().push(format!("={}", addr[a]));
    }
    for (k, r) in q.returns.iter().enumerate() {
        marks.entry(r.clone()).or_default().push(format!("#{k}"));
    }
    fn render(n: &PatternNode, axis: Axis, addr: &BTreeMap<String, String>, marks: &BTreeMap<String, Vec<String>>) -> String {
        let mut cs: Vec<String> = n
            .constraints
            .iter()
            .map(|c| match &c.operand {
                Operand::Lit(l) => format!("{}{}", c.op.symbol(), quote(l)),
                Operand::Var(o) => format!("{}@{}", c.op.symbol(), addr[o]),
            })
            .collect();
        cs.extend(marks.get(&n.var).cloned().unwrap_or_default());
        cs.sort();
        let mut kids: Vec<String> = n.children.iter().map(|(ax, c)| render(c, *ax, addr, marks)).collect();
        kids.sort();
        format!("{}{}{{{}}}[{}]", axis.sep(), n.tag, cs.join(","), kids.join(","))
    }
    let mut ps: Vec<String> = q.patterns.iter().map(|p| render(&p.root, p.axis, &addr, &marks)).collect();
    ps.sort();
    ps.join(" & ")
}
