use super::{MappingRule, TreeExpr};
use crate::schema::{node_paths, DtdGraph, NodeIdx};

fn path_expr(g: &DtdGraph, path: &[NodeIdx]) -> TreeExpr {
    let mut inner: Option<TreeExpr> = None;
    for &n in path.iter().rev() {
        let mut e = TreeExpr::leaf(g.tag(n), &format!("N{}", n.0));
        e.children.extend(inner.take());
        inner = Some(e);
    }
    inner.expect("paths start at the root")
}

/// Rules that copy every node of `source` to the same node of `target`, one rule per
/// root path. The two graphs must have the same shape, e.g. one is a renaming of the
/// other. Generated nodes take the identity of the node they copy, so the rules glue
/// into an isomorphic tree.
pub fn copy_rules(source: &DtdGraph, target: &DtdGraph) -> Vec<MappingRule> {
    assert_eq!(source.nodes.len(), target.nodes.len(), "copy rules need two graphs of the same shape");
    let mut out = Vec::new();
    for n in source.node_ids() {
        for p in node_paths(source, source.root, n) {
            let mut full = vec![source.root];
            full.extend(p);
            out.push(MappingRule { head: path_expr(target, &full), body: vec![path_expr(source, &full)], predicates: vec![] });
        }
    }
    out
}
