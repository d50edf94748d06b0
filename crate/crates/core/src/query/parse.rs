use std::collections::BTreeSet;

use thiserror::Error;

use super::{Axis, CmpOp, Operand, PatternNode, TagTest, TpQuery, TreePattern, ValueConstraint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("invalid query: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Kw(&'static str),
    Var(String),
    Name(String),
    Attr(String),
    Lit(String),
    Star,
    Slash,
    DSlash,
    LBr,
    RBr,
    LBrace,
    RBrace,
    Comma,
    Op(CmpOp),
}

const KEYWORDS: [&str; 6] = ["FOR", "IN", "WHERE", "AND", "RETURN", "UNION"];
const UNSUPPORTED: [&str; 8] = ["OR", "NOT", "LET", "ORDER", "SOME", "EVERY", "IF", "COUNT"];

fn is_name_char(c: char) -> bool {
    !(c.is_whitespace() || "/[]{},=!<>$'\"()*|@".contains(c))
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, QueryError> {
    let cs: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |pos: usize, msg: &str| QueryError::Syntax { pos, msg: msg.to_string() };
    while i < cs.len() {
        let (pos, c) = cs[i];
        let next = cs.get(i + 1).map(|x| x.1);
        let mut push = |t: Tok, n: usize| {
            out.push((t, pos));
            n
        };
        let step = match c {
            c if c.is_whitespace() => 1,
            '/' if next == Some('/') => push(Tok::DSlash, 2),
            '/' => push(Tok::Slash, 1),
            '[' => push(Tok::LBr, 1),
            ']' => push(Tok::RBr, 1),
            '{' => push(Tok::LBrace, 1),
            '}' => push(Tok::RBrace, 1),
            ',' => push(Tok::Comma, 1),
            '*' => push(Tok::Star, 1),
            '=' => push(Tok::Op(CmpOp::Eq), 1),
            '!' if next == Some('=') => push(Tok::Op(CmpOp::Ne), 2),
            '<' if next == Some('=') => push(Tok::Op(CmpOp::Le), 2),
            '<' => push(Tok::Op(CmpOp::Lt), 1),
            '>' if next == Some('=') => push(Tok::Op(CmpOp::Ge), 2),
            '>' => push(Tok::Op(CmpOp::Gt), 1),
            '|' => return Err(QueryError::UnsupportedFeature("path union `|`".into())),
            '(' | ')' => return Err(QueryError::UnsupportedFeature("function calls and parentheses".into())),
            '\'' | '"' => {
                let mut j = i + 1;
                while j < cs.len() && cs[j].1 != c {
                    j += 1;
                }
                if j == cs.len() {
                    return Err(syntax(pos, "unterminated string literal"));
                }
                let s: String = cs[i + 1..j].iter().map(|x| x.1).collect();
                out.push((Tok::Lit(s), pos));
                j + 1 - i
            }
            '$' | '@' => {
                let mut j = i + 1;
                while j < cs.len() && is_name_char(cs[j].1) {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(syntax(pos, "expected a name"));
                }
                let s: String = cs[i + 1..j].iter().map(|x| x.1).collect();
                out.push((if c == '$' { Tok::Var(s) } else { Tok::Attr(s) }, pos));
                j - i
            }
            c if is_name_char(c) => {
                let mut j = i;
                while j < cs.len() && is_name_char(cs[j].1) {
                    j += 1;
                }
                let s: String = cs[i..j].iter().map(|x| x.1).collect();
                let upper = s.to_ascii_uppercase();
                if cs.get(j).map(|x| x.1) == Some('(') {
                    return Err(QueryError::UnsupportedFeature(format!("function `{s}()`")));
                }
                if let Some(k) = KEYWORDS.iter().find(|k| **k == upper) {
                    out.push((Tok::Kw(k), pos));
                } else if UNSUPPORTED.contains(&upper.as_str()) && s == upper {
                    return Err(QueryError::UnsupportedFeature(format!("`{s}`")));
                } else if s != "." && (c.is_ascii_digit() || c == '-' || c == '.') {
                    out.push((Tok::Lit(s), pos));
                } else {
                    out.push((Tok::Name(s), pos));
                }
                j - i
            }
            _ => return Err(syntax(pos, &format!("unexpected `{c}`"))),
        };
        i += step;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    q: TpQuery,
    bound: BTreeSet<String>,
    fresh: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn err<T>(&self, msg: &str) -> Result<T, QueryError> {
        Err(QueryError::Syntax { pos: self.pos(), msg: msg.to_string() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), QueryError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(&format!("expected {what}"))
        }
    }

    fn fresh_var(&mut self) -> String {
        self.fresh += 1;
        format!("_{}", self.fresh)
    }

    fn axis(&mut self) -> Option<Axis> {
        if self.eat(&Tok::Slash) {
            Some(Axis::Child)
        } else if self.eat(&Tok::DSlash) {
            Some(Axis::Descendant)
        } else {
            None
        }
    }

    fn attach(&mut self, parent: Option<&str>, axis: Axis, node: PatternNode) {
        match parent {
            Some(p) => self.q.node_mut(p).expect("parent exists").children.push((axis, node)),
            None => self.q.patterns.push(TreePattern { axis, root: node }),
        }
    }

    fn tag_test(&mut self) -> Result<TagTest, QueryError> {
        match self.peek().cloned() {
            Some(Tok::Name(n)) => {
                self.at += 1;
                Ok(TagTest::Name(n))
            }
            Some(Tok::Attr(a)) => {
                self.at += 1;
                Ok(TagTest::Name(format!("@{a}")))
            }
            Some(Tok::Star) => {
                self.at += 1;
                Ok(TagTest::Wildcard)
            }
            _ => self.err("expected a tag, `@attribute` or `*`"),
        }
    }

    /// Parses steps under `parent` starting with `axis`; returns the variable of the last step.
    fn steps(&mut self, parent: Option<&str>, mut axis: Axis) -> Result<String, QueryError> {
        let mut parent = parent.map(str::to_string);
        loop {
            let tag = self.tag_test()?;
            let var = self.fresh_var();
            if let (Some(p), TagTest::Name(t)) = (&parent, &tag) {
                if t.starts_with('@') && self.q.node(p).is_some_and(|n| matches!(&n.tag, TagTest::Name(x) if x.starts_with('@'))) {
                    return self.err("attribute steps must be last");
                }
            }
            self.attach(parent.as_deref(), axis, PatternNode::new(&var, tag.clone()));
            while self.eat(&Tok::LBr) {
                self.predicate(&var)?;
                self.expect(Tok::RBr, "`]`")?;
            }
            match self.axis() {
                Some(a) => {
                    if matches!(&tag, TagTest::Name(t) if t.starts_with('@')) {
                        return self.err("attribute steps must be last");
                    }
                    axis = a;
                    parent = Some(var);
                }
                None => return Ok(var),
            }
        }
    }

    fn predicate(&mut self, ctx: &str) -> Result<(), QueryError> {
        if self.peek() == Some(&Tok::Name(".".into())) {
            self.at += 1;
            if !matches!(self.peek(), Some(Tok::Slash | Tok::DSlash)) {
                return self.err("expected `/` or `//` after `.`");
            }
        }
        let axis = self.axis().unwrap_or(Axis::Child);
        let lhs = self.steps(Some(ctx), axis)?;
        if let Some(Tok::Op(op)) = self.peek().cloned() {
            self.at += 1;
            self.compare_rhs(&lhs, op)?;
        }
        Ok(())
    }

    fn var_path(&mut self) -> Result<String, QueryError> {
        let Some(Tok::Var(v)) = self.peek().cloned() else {
            return self.err("expected a variable");
        };
        if !self.bound.contains(&v) {
            return self.err(&format!("`${v}` is not bound"));
        }
        self.at += 1;
        match self.axis() {
            Some(a) => self.steps(Some(&v), a),
            None => Ok(v),
        }
    }

    fn compare_rhs(&mut self, lhs: &str, op: CmpOp) -> Result<(), QueryError> {
        match self.peek().cloned() {
            Some(Tok::Lit(l)) => {
                self.at += 1;
                self.q.node_mut(lhs).unwrap().constraints.push(ValueConstraint { op, operand: Operand::Lit(l) });
                Ok(())
            }
            Some(Tok::Var(_)) => {
                let rhs = self.var_path()?;
                if op == CmpOp::Eq {
                    self.q.joins.push((lhs.to_string(), rhs));
                } else {
                    self.q.node_mut(lhs).unwrap().constraints.push(ValueConstraint { op, operand: Operand::Var(rhs) });
                }
                Ok(())
            }
            _ => self.err("expected a literal or a variable path"),
        }
    }

    fn condition(&mut self) -> Result<(), QueryError> {
        if let Some(Tok::Lit(l)) = self.peek().cloned() {
            self.at += 1;
            let Some(Tok::Op(op)) = self.peek().cloned() else {
                return self.err("expected a comparison");
            };
            self.at += 1;
            if matches!(self.peek(), Some(Tok::Lit(_))) {
                return Err(QueryError::UnsupportedFeature("comparison of two literals".into()));
            }
            let rhs = self.var_path()?;
            self.q.node_mut(&rhs).unwrap().constraints.push(ValueConstraint { op: op.flip(), operand: Operand::Lit(l) });
            return Ok(());
        }
        let lhs = self.var_path()?;
        let Some(Tok::Op(op)) = self.peek().cloned() else {
            return Err(QueryError::UnsupportedFeature("existence tests in WHERE; use a predicate".into()));
        };
        self.at += 1;
        self.compare_rhs(&lhs, op)
    }

    fn flwr(&mut self) -> Result<(), QueryError> {
        self.expect(Tok::Kw("FOR"), "FOR")?;
        loop {
            let Some(Tok::Var(name)) = self.peek().cloned() else {
                return self.err("expected `$variable`");
            };
            if name.starts_with('_') {
                return self.err("variables starting with `_` are reserved");
            }
            if self.bound.contains(&name) {
                return self.err(&format!("`${name}` bound twice"));
            }
            self.at += 1;
            self.expect(Tok::Kw("IN"), "IN")?;
            let last = match self.peek().cloned() {
                Some(Tok::Var(_)) => {
                    let before = self.at;
                    let v = self.var_path()?;
                    if self.bound.contains(&v) {
                        self.at = before;
                        return self.err("a binding needs at least one step");
                    }
                    v
                }
                _ => {
                    let Some(axis) = self.axis() else {
                        return self.err("expected `//`, `/` or `$variable`");
                    };
                    self.steps(None, axis)?
                }
            };
            self.q.node_mut(&last).unwrap().var = name.clone();
            self.rename(&last, &name);
            self.bound.insert(name);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if self.eat(&Tok::Kw("WHERE")) {
            loop {
                self.condition()?;
                if !self.eat(&Tok::Kw("AND")) {
                    break;
                }
            }
        }
        self.expect(Tok::Kw("RETURN"), "RETURN")?;
        let braced = self.eat(&Tok::LBrace);
        loop {
            let v = self.var_path()?;
            if !self.q.returns.contains(&v) {
                self.q.returns.push(v);
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if braced {
            self.expect(Tok::RBrace, "`}`")?;
        }
        Ok(())
    }

    fn rename(&mut self, from: &str, to: &str) {
        for (a, b) in &mut self.q.joins {
            for x in [a, b] {
                if x == from {
                    *x = to.to_string();
                }
            }
        }
        for p in &mut self.q.patterns {
            p.root.for_each_mut(&mut |n| {
                for c in &mut n.constraints {
                    if c.operand == Operand::Var(from.to_string()) {
                        c.operand = Operand::Var(to.to_string());
                    }
                }
            });
        }
    }

    fn xpath(&mut self) -> Result<(), QueryError> {
        let Some(axis) = self.axis() else {
            return self.err("expected `//` or `/`");
        };
        let last = self.steps(None, axis)?;
        self.q.returns.push(last);
        Ok(())
    }
}

fn parse_tokens(toks: &[(Tok, usize)], end: usize) -> Result<TpQuery, QueryError> {
    let mut p = Parser {
        toks: toks.to_vec(),
        at: 0,
        end,
        q: TpQuery { patterns: vec![], joins: vec![], returns: vec![] },
        bound: BTreeSet::new(),
        fresh: 0,
    };
    match p.peek() {
        Some(Tok::Kw("FOR")) => p.flwr()?,
        Some(Tok::Slash | Tok::DSlash) => p.xpath()?,
        _ => return p.err("expected FOR or a path"),
    }
    if p.at != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    p.q.check().map_err(QueryError::Invalid)?;
    Ok(p.q)
}

/// Parses one query: `FOR ... [WHERE ...] RETURN {...}` or an absolute path.
pub fn parse_query(text: &str) -> Result<TpQuery, QueryError> {
    let mut u = parse_union(text)?;
    if u.len() != 1 {
        return Err(QueryError::UnsupportedFeature("UNION in a single query".into()));
    }
    Ok(u.remove(0))
}

/// Parses queries separated by `UNION`.
pub fn parse_union(text: &str) -> Result<Vec<TpQuery>, QueryError> {
    let toks = lex(text)?;
    let mut out = Vec::new();
    for part in toks.split(|t| t.0 == Tok::Kw("UNION")) {
        let end = part.last().map_or(text.len(), |t| t.1 + 1);
        out.push(parse_tokens(part, end)?);
    }
    Ok(out)
}
