use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Ground, MarkedNull, NodeIdValue, Value, XmlInstance};
use crate::mapping::{ExprId, ExprTag, MappingRule, Term, TreeExpr};
use crate::schema::{Cardinality, DtdGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangeError {
    #[error("head variable `${0}` is not bound by the body")]
    UnboundHeadVariable(String),
    #[error("head node `{0}` has no id")]
    MissingId(String),
    #[error("tag variable `${0}` is not bound to a text value")]
    BadTagVariable(String),
    #[error("rule heads disagree on the root: `{0}` vs `{1}`")]
    MultipleRoots(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binding {
    Node(usize),
    Null(MarkedNull),
}

pub type Substitution = BTreeMap<String, Binding>;

fn source_id(inst: &XmlInstance, i: usize) -> u64 {
    match inst.node(i).id {
        NodeIdValue::Source(n) => n,
        _ => i as u64,
    }
}

/// Ground value of a bound variable: text for valued nodes, identity otherwise.
pub(crate) fn ground(inst: &XmlInstance, b: &Binding) -> Ground {
    match b {
        Binding::Null(m) => Ground::Null(m.clone()),
        Binding::Node(i) => match inst.value(*i) {
            Some(v) => v.as_ground(),
            None => Ground::Node(source_id(inst, *i)),
        },
    }
}

enum Task<'r> {
    At(&'r TreeExpr, usize),
    Under(&'r TreeExpr, usize),
}

struct Matcher<'a> {
    rule: &'a MappingRule,
    inst: &'a XmlInstance,
    schema: &'a DtdGraph,
    out: Vec<Substitution>,
}

impl<'a> Matcher<'a> {
    fn preds_hold(&self, s: &Substitution, var: &str) -> bool {
        self.rule.predicates.iter().all(|p| {
            if p.left.var != var && p.right.var != var {
                return true;
            }
            match (s.get(&p.left.var), s.get(&p.right.var)) {
                (Some(a), Some(b)) => ground(self.inst, a) == ground(self.inst, b),
                _ => true,
            }
        })
    }

    fn bind(&self, s: &mut Substitution, var: &str, b: Binding) -> bool {
        match s.get(var) {
            Some(old) => *old == b,
            None => {
                s.insert(var.to_string(), b);
                self.preds_hold(s, var)
            }
        }
    }

    fn optional_edge(&self, parent: usize, tag: &str) -> bool {
        let (Some(p), Some(c)) = (self.schema.lookup(self.inst.tag(parent)), self.schema.lookup(tag)) else {
            return false;
        };
        self.schema.edge(p, c).is_some_and(|e| e.card == Cardinality::Optional)
    }

    fn run(&mut self, mut tasks: Vec<Task<'a>>, s: Substitution) {
        let Some(task) = tasks.pop() else {
            let all_bound = self.rule.predicates.iter().all(|p| s.contains_key(&p.left.var) && s.contains_key(&p.right.var));
            if all_bound {
                self.out.push(s);
            }
            return;
        };
        match task {
            Task::At(e, n) => {
                if let ExprTag::Name(t) = &e.tag {
                    if self.inst.tag(n) != t {
                        return;
                    }
                }
                let mut s = s;
                if let ExprId::Var(v) = &e.id {
                    if !self.bind(&mut s, v, Binding::Node(n)) {
                        return;
                    }
                }
                for c in e.children.iter().rev() {
                    tasks.push(Task::Under(c, n));
                }
                self.run(tasks, s);
            }
            Task::Under(e, parent) => {
                let cands: Vec<usize> = self
                    .inst
                    .children(parent)
                    .iter()
                    .copied()
                    .filter(|&c| match &e.tag {
                        ExprTag::Name(t) => self.inst.tag(c) == t,
                        _ => true,
                    })
                    .collect();
                if cands.is_empty() {
                    if let (ExprTag::Name(t), ExprId::Var(v), true) = (&e.tag, &e.id, e.children.is_empty()) {
                        if self.optional_edge(parent, t) {
                            let mut origin: Vec<String> = Vec::new();
                            let mut cur = Some(parent);
                            while let Some(c) = cur {
                                origin.push(self.inst.tag(c).to_string());
                                cur = self.inst.node(c).parent;
                            }
                            origin.reverse();
                            origin.push(t.clone());
                            let null = MarkedNull { origin, parent: source_id(self.inst, parent) };
                            let mut s = s;
                            if self.bind(&mut s, v, Binding::Null(null)) {
                                self.run(tasks, s);
                            }
                        }
                    }
                    return;
                }
                for c in cands {
                    let mut t2: Vec<Task<'a>> = Vec::with_capacity(tasks.len() + 1);
                    t2.extend(tasks.iter().map(|t| match t {
                        Task::At(a, b) => Task::At(a, *b),
                        Task::Under(a, b) => Task::Under(a, *b),
                    }));
                    t2.push(Task::At(e, c));
                    self.run(t2, s.clone());
                }
            }
        }
    }
}

/// All assignments of instance nodes to body variables under which every body expression
/// embeds at the instance root and every equality holds. Leaf expressions under an optional
/// edge bind a marked null when the child is absent.
pub fn match_body(rule: &MappingRule, inst: &XmlInstance, schema: &DtdGraph) -> Vec<Substitution> {
    let Some(root) = inst.root() else { return vec![] };
    let mut m = Matcher { rule, inst, schema, out: Vec::new() };
    let tasks: Vec<Task> = rule.body.iter().rev().map(|b| Task::At(b, root)).collect();
    m.run(tasks, Substitution::new());
    m.out.sort();
    m.out.dedup();
    m.out
}

struct Builder<'a> {
    src: &'a XmlInstance,
    out: XmlInstance,
    index: HashMap<(Option<usize>, String, NodeIdValue), usize>,
}

impl<'a> Builder<'a> {
    fn lookup<'s>(&self, s: &'s Substitution, v: &str) -> Result<&'s Binding, ExchangeError> {
        s.get(v).ok_or_else(|| ExchangeError::UnboundHeadVariable(v.to_string()))
    }

    fn ground_term(&self, s: &Substitution, t: &Term) -> Result<Ground, ExchangeError> {
        Ok(ground(self.src, self.lookup(s, &t.var)?))
    }

    fn instantiate(&mut self, e: &TreeExpr, parent: Option<usize>, s: &Substitution) -> Result<(), ExchangeError> {
        let tag = match &e.tag {
            ExprTag::Name(t) => t.clone(),
            ExprTag::Var(v) | ExprTag::TextOf(v) => match self.ground_term(s, &Term::var(v))? {
                Ground::Text(t) if !t.is_empty() => t,
                _ => return Err(ExchangeError::BadTagVariable(v.clone())),
            },
        };
        let (id, value) = match &e.id {
            ExprId::Skolem(sk) => {
                let args = sk.args.iter().map(|a| self.ground_term(s, a)).collect::<Result<Vec<_>, _>>()?;
                (NodeIdValue::Skolem { functor: sk.functor.clone(), args }, None)
            }
            ExprId::Var(v) => {
                let b = self.lookup(s, v)?;
                let value = match b {
                    Binding::Node(i) => self.src.value(*i).cloned(),
                    Binding::Null(m) => Some(Value::Null(m.clone())),
                };
                let id = match b {
                    Binding::Node(i) if !tag.starts_with('@') => NodeIdValue::Source(source_id(self.src, *i)),
                    _ => NodeIdValue::Value(ground(self.src, b)),
                };
                (id, if e.children.is_empty() { value } else { None })
            }
            ExprId::Unknown => return Err(ExchangeError::MissingId(tag)),
        };
        let key = (parent, tag.clone(), id.clone());
        let me = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                if parent.is_none() {
                    if let Some(r) = self.out.root() {
                        return Err(ExchangeError::MultipleRoots(self.out.node(r).id.to_string(), id.to_string()));
                    }
                }
                let i = self.out.add(parent, &tag, id, value);
                self.index.insert(key, i);
                i
            }
        };
        for c in &e.children {
            self.instantiate(c, Some(me), s)?;
        }
        Ok(())
    }
}

/// Materializes every rule head under every body match and glues the generated nodes:
/// siblings with the same tag and the same node id are one node. The result is not
/// validated against the target schema.
pub fn apply_rules(rules: &[MappingRule], inst: &XmlInstance, schema: &DtdGraph) -> Result<XmlInstance, ExchangeError> {
    let name = rules
        .first()
        .map(|r| match &r.head.tag {
            ExprTag::Name(n) => n.clone(),
            other => other.to_string(),
        })
        .unwrap_or_default();
    let mut b = Builder { src: inst, out: XmlInstance::empty(&name), index: HashMap::new() };
    for r in rules {
        for s in match_body(r, inst, schema) {
            b.instantiate(&r.head, None, &s)?;
        }
    }
    Ok(b.out)
}
