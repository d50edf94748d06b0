use std::collections::BTreeMap;

use super::{ExprId, ExprTag, MappingRule, Term, TreeExpr};

fn body_paths(e: &TreeExpr, prefix: &str, out: &mut BTreeMap<String, String>) {
    let tag = match &e.tag {
        ExprTag::Name(n) => n.clone(),
        other => other.to_string(),
    };
    let path = if prefix.is_empty() { tag } else { format!("{prefix}/{tag}") };
    if let ExprId::Var(v) = &e.id {
        out.entry(v.clone()).or_insert_with(|| path.clone());
    }
    for c in &e.children {
        body_paths(c, &path, out);
    }
}

/// A rendering of a rule that is invariant under variable renaming, functor renaming,
/// Skolem argument order and sibling order. Equalities whose one side is not bound in the
/// body are applied as substitutions first.
pub fn canonical_rule(rule: &MappingRule) -> String {
    let mut paths = BTreeMap::new();
    for b in &rule.body {
        body_paths(b, "", &mut paths);
    }
    let mut subst: BTreeMap<String, String> = BTreeMap::new();
    let mut preds = Vec::new();
    for p in &rule.predicates {
        let (l, r) = (&p.left.var, &p.right.var);
        match (paths.contains_key(l), paths.contains_key(r)) {
            (false, true) => {
                subst.insert(l.clone(), r.clone());
            }
            (true, false) => {
                subst.insert(r.clone(), l.clone());
            }
            _ => preds.push(p.clone()),
        }
    }
    let canon = |v: &str| -> String {
        let v = subst.get(v).map(String::as_str).unwrap_or(v);
        match paths.get(v) {
            Some(p) => format!("<{p}>"),
            None => format!("?{v}"),
        }
    };
    let term = |t: &Term| -> String {
        if t.text {
            format!("{}/text()", canon(&t.var))
        } else {
            canon(&t.var)
        }
    };
    fn render(e: &TreeExpr, canon: &dyn Fn(&str) -> String, term: &dyn Fn(&Term) -> String) -> String {
        let tag = match &e.tag {
            ExprTag::Name(n) => n.clone(),
            ExprTag::Var(_) => "$tag".into(),
            ExprTag::TextOf(v) => format!("{}/text()", canon(v)),
        };
        let id = match &e.id {
            ExprId::Var(v) => canon(v),
            ExprId::Skolem(s) => {
                let mut args: Vec<String> = s.args.iter().map(term).collect();
                args.sort();
                format!("f({})", args.join(","))
            }
            ExprId::Unknown => "??".into(),
        };
        let mut kids: Vec<String> = e.children.iter().map(|c| render(c, canon, term)).collect();
        kids.sort();
        if kids.is_empty() {
            format!("{tag}->{id}")
        } else {
            format!("{tag}->{id}[{}]", kids.join(","))
        }
    }
    let head = render(&rule.head, &canon, &term);
    let mut bodies: Vec<String> = rule.body.iter().map(|b| render(b, &canon, &term)).collect();
    bodies.sort();
    let mut eqs: Vec<String> = preds
        .iter()
        .map(|p| {
            let mut sides = [term(&p.left), term(&p.right)];
            sides.sort();
            format!("{}={}", sides[0], sides[1])
        })
        .collect();
    eqs.sort();
    eqs.dedup();
    format!("{head} <- {} ; {}", bodies.join(", "), eqs.join(", "))
}
