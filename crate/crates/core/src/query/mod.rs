//! Tree-pattern queries: a FOR/WHERE/RETURN fragment and bare XPath, parsed into joins of
//! tree patterns and evaluated over instances.

mod eval;
mod parse;
mod print;

pub use eval::{evaluate, evaluate_union, node_answer, render_answers, AnswerSet, Tuple};
pub use parse::{parse_query, parse_union, QueryError};
pub use print::{canonical_query, print_query, print_union};

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Child,
    Descendant,
}

impl Axis {
    pub fn sep(self) -> &'static str {
        match self {
            Axis::Child => "/",
            Axis::Descendant => "//",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagTest {
    Name(String),
    /// Any element, never an attribute.
    Wildcard,
}

impl TagTest {
    pub fn matches(&self, tag: &str) -> bool {
        match self {
            TagTest::Name(n) => n == tag,
            TagTest::Wildcard => !tag.starts_with('@'),
        }
    }
}

impl fmt::Display for TagTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagTest::Name(n) => f.write_str(n),
            TagTest::Wildcard => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }

    /// `=` and `!=` compare strings; ordering compares numbers when both sides parse as
    /// decimals and strings otherwise.
    pub fn holds(self, a: &str, b: &str) -> bool {
        use std::cmp::Ordering;
        let ord = || -> Ordering {
            match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
                _ => a.cmp(b),
            }
        };
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => ord() == Ordering::Less,
            CmpOp::Le => ord() != Ordering::Greater,
            CmpOp::Gt => ord() == Ordering::Greater,
            CmpOp::Ge => ord() != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Lit(String),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueConstraint {
    pub op: CmpOp,
    pub operand: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternNode {
    /// Unique within a query. Names starting with `_` are generated.
    pub var: String,
    pub tag: TagTest,
    pub constraints: Vec<ValueConstraint>,
    pub children: Vec<(Axis, PatternNode)>,
}

impl PatternNode {
    pub fn new(var: &str, tag: TagTest) -> Self {
        PatternNode { var: var.to_string(), tag, constraints: vec![], children: vec![] }
    }

    pub fn preorder(&self) -> Vec<&PatternNode> {
        let mut out = vec![self];
        for (_, c) in &self.children {
            out.extend(c.preorder());
        }
        out
    }

    pub fn for_each_mut(&mut self, f: &mut dyn FnMut(&mut PatternNode)) {
        f(self);
        for (_, c) in &mut self.children {
            c.for_each_mut(f);
        }
    }

    pub fn find(&self, var: &str) -> Option<&PatternNode> {
        if self.var == var {
            return Some(self);
        }
        self.children.iter().find_map(|(_, c)| c.find(var))
    }

    pub fn find_mut(&mut self, var: &str) -> Option<&mut PatternNode> {
        if self.var == var {
            return Some(self);
        }
        self.children.iter_mut().find_map(|(_, c)| c.find_mut(var))
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted pattern; `axis` relates the root to the document node, so `//X` matches any
/// element and `/X` only the document element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePattern {
    pub axis: Axis,
    pub root: PatternNode,
}

impl TreePattern {
    pub fn vars(&self) -> Vec<String> {
        self.root.preorder().iter().map(|n| n.var.clone()).collect()
    }

    /// Parent variable and axis of `var`.
    pub fn parent_of(&self, var: &str) -> Option<(&PatternNode, Axis)> {
        fn go<'a>(n: &'a PatternNode, var: &str) -> Option<(&'a PatternNode, Axis)> {
            for (ax, c) in &n.children {
                if c.var == var {
                    return Some((n, *ax));
                }
                if let Some(r) = go(c, var) {
                    return Some(r);
                }
            }
            None
        }
        go(&self.root, var)
    }
}

/// Tree patterns joined by value equalities; `returns` lists the distinguished variables
/// in answer-column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TpQuery {
    pub patterns: Vec<TreePattern>,
    pub joins: Vec<(String, String)>,
    pub returns: Vec<String>,
}

impl TpQuery {
    pub fn node(&self, var: &str) -> Option<&PatternNode> {
        self.patterns.iter().find_map(|p| p.root.find(var))
    }

    pub fn node_mut(&mut self, var: &str) -> Option<&mut PatternNode> {
        self.patterns.iter_mut().find_map(|p| p.root.find_mut(var))
    }

    pub fn pattern_of(&self, var: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.root.find(var).is_some())
    }

    pub fn vars(&self) -> Vec<String> {
        self.patterns.iter().flat_map(|p| p.vars()).collect()
    }

    pub fn is_distinguished(&self, var: &str) -> bool {
        self.returns.iter().any(|r| r == var)
    }

    /// Number of join equalities plus cross-variable comparisons.
    pub fn join_count(&self) -> usize {
        let cross = self
            .patterns
            .iter()
            .flat_map(|p| p.root.preorder())
            .flat_map(|n| n.constraints.iter())
            .filter(|c| matches!(c.operand, Operand::Var(_)))
            .count();
        self.joins.len() + cross
    }

    /// Number of comparisons against literals.
    pub fn selection_count(&self) -> usize {
        self.patterns
            .iter()
            .flat_map(|p| p.root.preorder())
            .flat_map(|n| n.constraints.iter())
            .filter(|c| matches!(c.operand, Operand::Lit(_)))
            .count()
    }

    /// Literal constants mentioned anywhere.
    pub fn constants(&self) -> BTreeSet<String> {
        self.patterns
            .iter()
            .flat_map(|p| p.root.preorder())
            .flat_map(|n| n.constraints.iter())
            .filter_map(|c| match &c.operand {
                Operand::Lit(l) => Some(l.clone()),
                Operand::Var(_) => None,
            })
            .collect()
    }

    /// Checks variable uniqueness, join and return references.
    pub fn check(&self) -> Result<(), String> {
        let vars = self.vars();
        let set: BTreeSet<&String> = vars.iter().collect();
        if set.len() != vars.len() {
            return Err("duplicate pattern variable".into());
        }
        for (a, b) in &self.joins {
            for v in [a, b] {
                if !set.contains(v) {
                    return Err(format!("join on unknown variable `${v}`"));
                }
            }
        }
        for r in &self.returns {
            if !set.contains(r) {
                return Err(format!("return of unknown variable `${r}`"));
            }
        }
        for p in &self.patterns {
            for n in p.root.preorder() {
                for c in &n.constraints {
                    if let Operand::Var(v) = &c.operand {
                        if !set.contains(v) {
                            return Err(format!("comparison with unknown variable `${v}`"));
                        }
                    }
                }
            }
        }
        if self.returns.is_empty() {
            return Err("no distinguished node".into());
        }
        Ok(())
    }
}

impl fmt::Display for TpQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_query(self))
    }
}
