//! Mapping rules: groups, tree expressions, rule inference and the rule text format.

mod canon;
mod copy;
mod expr;
mod groups;
mod infer;
mod text;

pub use canon::canonical_rule;
pub use copy::copy_rules;
pub use expr::{build_tree_expression, Side};
pub use groups::{connected_pairs, detect_groups, qualified_name, Group, Position};
pub use infer::{infer_rules, InferenceError, Inferred, InferredRule};
pub use text::{parse_rules, serialize_rules, RuleParseError};

use std::collections::BTreeSet;
use std::fmt;

/// `$v` or `$v/text()`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub var: String,
    pub text: bool,
}

impl Term {
    pub fn var(v: &str) -> Term {
        Term { var: v.to_string(), text: false }
    }

    pub fn text(v: &str) -> Term {
        Term { var: v.to_string(), text: true }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.text {
            write!(f, "${}/text()", self.var)
        } else {
            write!(f, "${}", self.var)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkolemTerm {
    pub functor: String,
    pub args: Vec<Term>,
}

impl fmt::Display for SkolemTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(Term::to_string).collect();
        write!(f, "{}({})", self.functor, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprTag {
    Name(String),
    /// Unfilled tag variable of a box, e.g. `$Tag`.
    Var(String),
    /// Tag taken from the text of a bound variable, e.g. `$AP/text()`.
    TextOf(String),
}

impl fmt::Display for ExprTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprTag::Name(n) => f.write_str(n),
            ExprTag::Var(v) => write!(f, "${v}"),
            ExprTag::TextOf(v) => write!(f, "${v}/text()"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprId {
    Var(String),
    Skolem(SkolemTerm),
    Unknown,
}

impl fmt::Display for ExprId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprId::Var(v) => write!(f, "${v}"),
            ExprId::Skolem(s) => s.fmt(f),
            ExprId::Unknown => f.write_str("??"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeExpr {
    pub tag: ExprTag,
    pub id: ExprId,
    pub children: Vec<TreeExpr>,
}

impl TreeExpr {
    pub fn leaf(tag: &str, var: &str) -> TreeExpr {
        TreeExpr { tag: ExprTag::Name(tag.to_string()), id: ExprId::Var(var.to_string()), children: vec![] }
    }

    pub fn preorder(&self) -> Vec<&TreeExpr> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }

    /// Variables naming node ids in this expression.
    pub fn bound_vars(&self) -> BTreeSet<String> {
        self.preorder()
            .into_iter()
            .filter_map(|n| match &n.id {
                ExprId::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    /// Every variable mentioned anywhere, including Skolem arguments and tag variables.
    pub fn mentioned_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for n in self.preorder() {
            match &n.tag {
                ExprTag::TextOf(v) => {
                    out.insert(v.clone());
                }
                ExprTag::Var(_) | ExprTag::Name(_) => {}
            }
            match &n.id {
                ExprId::Var(v) => {
                    out.insert(v.clone());
                }
                ExprId::Skolem(s) => out.extend(s.args.iter().map(|a| a.var.clone())),
                ExprId::Unknown => {}
            }
        }
        out
    }
}

impl fmt::Display for TreeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.tag, self.id)?;
        if !self.children.is_empty() {
            f.write_str("[")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                c.fmt(f)?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Equality {
    pub left: Term,
    pub right: Term,
}

impl fmt::Display for Equality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub head: TreeExpr,
    pub body: Vec<TreeExpr>,
    pub predicates: Vec<Equality>,
}

impl MappingRule {
    /// Head variables missing from the body, if any.
    pub fn unsafe_vars(&self) -> BTreeSet<String> {
        let bound: BTreeSet<String> = self.body.iter().flat_map(|b| b.bound_vars()).collect();
        self.head.mentioned_vars().difference(&bound).cloned().collect()
    }

    pub fn is_safe(&self) -> bool {
        self.unsafe_vars().is_empty()
    }
}

impl fmt::Display for MappingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.head)?;
        let items: Vec<String> = self.body.iter().map(|b| b.to_string()).chain(self.predicates.iter().map(|p| p.to_string())).collect();
        for (i, it) in items.iter().enumerate() {
            let lead = if i == 0 { "  <- " } else { "     " };
            let sep = if i + 1 < items.len() { "," } else { "" };
            writeln!(f, "{lead}{it}{sep}")?;
        }
        Ok(())
    }
}
