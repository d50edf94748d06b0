use std::collections::BTreeSet;

use super::{DtdGraph, NodeIdx};

/// Tags of the nodes after the start node, up to and including the end node.
pub type LabelPath = Vec<String>;

/// All downward label paths from `from` to `to`.
pub fn dtd_paths(g: &DtdGraph, from: NodeIdx, to: NodeIdx) -> BTreeSet<LabelPath> {
    let mut out = BTreeSet::new();
    let mut cur = Vec::new();
    walk(g, from, to, &mut cur, &mut out);
    out
}

fn walk(g: &DtdGraph, at: NodeIdx, to: NodeIdx, cur: &mut LabelPath, out: &mut BTreeSet<LabelPath>) {
    if at == to {
        out.insert(cur.clone());
        return;
    }
    for e in g.children(at) {
        cur.push(g.tag(e.child).to_string());
        walk(g, e.child, to, cur, out);
        cur.pop();
    }
}

/// All downward node paths from `from` to `to`, excluding `from`.
pub fn node_paths(g: &DtdGraph, from: NodeIdx, to: NodeIdx) -> Vec<Vec<NodeIdx>> {
    fn go(g: &DtdGraph, at: NodeIdx, to: NodeIdx, cur: &mut Vec<NodeIdx>, out: &mut Vec<Vec<NodeIdx>>) {
        if at == to {
            out.push(cur.clone());
            return;
        }
        for e in g.children(at) {
            cur.push(e.child);
            go(g, e.child, to, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(g, from, to, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_dtd;

    #[test]
    fn self_path_is_empty_label_path() {
        let g = parse_dtd("<!ELEMENT a (b)><!ELEMENT b (#PCDATA)>").unwrap();
        let a = g.lookup("a").unwrap();
        assert_eq!(dtd_paths(&g, a, a), BTreeSet::from([vec![]]));
        assert!(dtd_paths(&g, g.lookup("b").unwrap(), a).is_empty());
    }
}
