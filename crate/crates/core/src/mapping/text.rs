use thiserror::Error;

use super::{Equality, ExprId, ExprTag, MappingRule, SkolemTerm, Term, TreeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct RuleParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    To,
    From,
    LBr,
    RBr,
    LPar,
    RPar,
    Comma,
    Eq,
    Unknown,
    Var(String),
    VarText(String),
    Name(String),
}

fn lex(text: &str, first_line: usize) -> Result<Vec<(Tok, usize)>, RuleParseError> {
    let mut out = Vec::new();
    let mut line = first_line;
    let cs: Vec<char> = text.chars().collect();
    let mut i = 0;
    let stop = |c: char| c.is_whitespace() || "[](),=$".contains(c);
    while i < cs.len() {
        let c = cs[i];
        let rest: String = cs[i..cs.len().min(i + 7)].iter().collect();
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if rest.starts_with("->") {
            out.push((Tok::To, line));
            i += 2;
        } else if rest.starts_with("<-") {
            out.push((Tok::From, line));
            i += 2;
        } else if rest.starts_with("??") {
            out.push((Tok::Unknown, line));
            i += 2;
        } else if let Some(t) = match c {
            '[' => Some(Tok::LBr),
            ']' => Some(Tok::RBr),
            '(' => Some(Tok::LPar),
            ')' => Some(Tok::RPar),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            _ => None,
        } {
            out.push((t, line));
            i += 1;
        } else if c == '$' {
            let start = i + 1;
            i = start;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            if i == start {
                return Err(RuleParseError { line, msg: "empty variable name".into() });
            }
            let name: String = cs[start..i].iter().collect();
            let tail: String = cs[i..cs.len().min(i + 7)].iter().collect();
            if tail == "/text()" {
                i += 7;
                out.push((Tok::VarText(name), line));
            } else {
                out.push((Tok::Var(name), line));
            }
        } else {
            let start = i;
            while i < cs.len() && !stop(cs[i]) && !(cs[i] == '-' && cs.get(i + 1) == Some(&'>')) && cs[i] != '<' {
                i += 1;
            }
            if i == start {
                return Err(RuleParseError { line, msg: format!("unexpected `{c}`") });
            }
            out.push((Tok::Name(cs[start..i].iter().collect()), line));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.at).map_or(self.end_line, |t| t.1)
    }

    fn err<T>(&self, msg: &str) -> Result<T, RuleParseError> {
        Err(RuleParseError { line: self.line(), msg: msg.to_string() })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.0.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), RuleParseError> {
        if self.peek() == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            self.err(&format!("expected {what}"))
        }
    }

    fn term(&mut self) -> Result<Term, RuleParseError> {
        match self.next() {
            Some(Tok::Var(v)) => Ok(Term::var(&v)),
            Some(Tok::VarText(v)) => Ok(Term::text(&v)),
            _ => {
                self.at -= 1;
                self.err("expected a variable")
            }
        }
    }

    fn expr(&mut self) -> Result<TreeExpr, RuleParseError> {
        let tag = match self.next() {
            Some(Tok::Name(n)) => ExprTag::Name(n),
            Some(Tok::Var(v)) => ExprTag::Var(v),
            Some(Tok::VarText(v)) => ExprTag::TextOf(v),
            _ => {
                self.at -= 1;
                return self.err("expected a tag");
            }
        };
        self.expect(Tok::To, "`->`")?;
        let id = match self.next() {
            Some(Tok::Var(v)) => ExprId::Var(v),
            Some(Tok::Unknown) => ExprId::Unknown,
            Some(Tok::Name(f)) => {
                self.expect(Tok::LPar, "`(`")?;
                let mut args = vec![self.term()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.at += 1;
                    args.push(self.term()?);
                }
                self.expect(Tok::RPar, "`)`")?;
                ExprId::Skolem(SkolemTerm { functor: f, args })
            }
            _ => {
                self.at -= 1;
                return self.err("expected a node id");
            }
        };
        let mut children = Vec::new();
        if self.peek() == Some(&Tok::LBr) {
            self.at += 1;
            children.push(self.expr()?);
            while self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                children.push(self.expr()?);
            }
            self.expect(Tok::RBr, "`]`")?;
        }
        Ok(TreeExpr { tag, id, children })
    }

    fn rule(&mut self) -> Result<MappingRule, RuleParseError> {
        let head = self.expr()?;
        self.expect(Tok::From, "`<-`")?;
        let mut body = Vec::new();
        let mut predicates = Vec::new();
        loop {
            let is_pred = matches!(self.peek(), Some(Tok::Var(_)) | Some(Tok::VarText(_)))
                && self.toks.get(self.at + 1).map(|t| &t.0) == Some(&Tok::Eq);
            if is_pred {
                let left = self.term()?;
                self.expect(Tok::Eq, "`=`")?;
                let right = self.term()?;
                predicates.push(Equality { left, right });
            } else {
                body.push(self.expr()?);
            }
            match self.peek() {
                Some(Tok::Comma) => self.at += 1,
                None => break,
                Some(_) => return self.err("expected `,` or end of rule"),
            }
        }
        Ok(MappingRule { head, body, predicates })
    }
}

/// Parses rules separated by blank lines; `#` starts a comment line.
pub fn parse_rules(text: &str) -> Result<Vec<MappingRule>, RuleParseError> {
    let mut rules = Vec::new();
    let mut para = String::new();
    let mut para_line = 0;
    let lines: Vec<&str> = text.lines().collect();
    for (i, l) in lines.iter().enumerate() {
        let t = l.trim();
        if t.starts_with('#') {
            if !para.is_empty() {
                para.push('\n');
            }
            continue;
        }
        if t.is_empty() {
            if !para.trim().is_empty() {
                rules.push(parse_one(&para, para_line)?);
            }
            para.clear();
            para_line = i + 2;
            continue;
        }
        if para.is_empty() {
            para_line = i + 1;
        }
        para.push_str(l);
        para.push('\n');
    }
    if !para.trim().is_empty() {
        rules.push(parse_one(&para, para_line)?);
    }
    Ok(rules)
}

fn parse_one(text: &str, line: usize) -> Result<MappingRule, RuleParseError> {
    let line = line.max(1);
    let toks = lex(text, line)?;
    let end_line = line + text.lines().count().saturating_sub(1);
    let mut p = Parser { toks, at: 0, end_line };
    p.rule()
}

pub fn serialize_rules(rules: &[MappingRule]) -> String {
    rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_single_rule() {
        let src = "MassGeneral -> f1($Mgh)[Progress -> f2($ID)[@PatRef -> $PR]]\n  <- MonGenHosp -> $Mgh[Admission -> $A[Problem -> $AP, @PatRef -> $PR]],\n     $PR = $ID\n";
        let rules = parse_rules(src).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(serialize_rules(&rules), src);
    }

    #[test]
    fn tag_variables_and_text_terms() {
        let rules = parse_rules("A -> f1($X)[$T/text() -> f2($T/text(), $Y)[B -> $Y]] <- R -> $X[C -> $T, D -> $Y]").unwrap();
        let box_node = &rules[0].head.children[0];
        assert_eq!(box_node.tag, ExprTag::TextOf("T".into()));
        assert!(rules[0].is_safe());
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_rules("# c\n\nA -> f1($X)\n  <- R -> \n").unwrap_err();
        assert_eq!(err.line, 4);
    }
}
