//! Reader and writer for the element-only XML subset used by instances.
//!
//! Tag names may contain any character except whitespace, `/`, `>`, `=` and quotes, so
//! schema tags such as `MedCr#` round-trip unchanged.

use super::InstanceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawElem {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub text: Option<String>,
    pub children: Vec<RawElem>,
    pub line: usize,
}

struct Reader<'a> {
    s: &'a [u8],
    src: &'a str,
    at: usize,
}

fn xml_err(line: usize, msg: impl Into<String>) -> InstanceError {
    InstanceError::Xml { line, msg: msg.into() }
}

impl<'a> Reader<'a> {
    fn line(&self) -> usize {
        self.src[..self.at].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, InstanceError> {
        Err(xml_err(self.line(), msg))
    }

    fn rest(&self) -> &str {
        &self.src[self.at..]
    }

    fn skip_ws(&mut self) {
        while self.at < self.s.len() && self.s[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn skip_until(&mut self, end: &str) -> Result<(), InstanceError> {
        match self.rest().find(end) {
            Some(i) => {
                self.at += i + end.len();
                Ok(())
            }
            None => self.err(format!("unterminated construct, expected `{end}`")),
        }
    }

    /// Skips whitespace, comments, declarations and the prolog.
    fn skip_misc(&mut self) -> Result<(), InstanceError> {
        loop {
            self.skip_ws();
            let r = self.rest();
            if r.starts_with("<!--") {
                self.skip_until("-->")?;
            } else if r.starts_with("<?") {
                self.skip_until("?>")?;
            } else if r.starts_with("<!") {
                self.skip_until(">")?;
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, InstanceError> {
        let start = self.at;
        while self.at < self.s.len() {
            let c = self.s[self.at];
            if c.is_ascii_whitespace() || b"/>=\"'<".contains(&c) {
                break;
            }
            self.at += 1;
        }
        if start == self.at {
            return self.err("expected a name");
        }
        Ok(self.src[start..self.at].to_string())
    }

    fn element(&mut self) -> Result<RawElem, InstanceError> {
        let line = self.line();
        if !self.rest().starts_with('<') {
            return self.err("expected `<`");
        }
        self.at += 1;
        let tag = self.name()?;
        let mut attrs: Vec<(String, String)> = Vec::new();
        loop {
            self.skip_ws();
            let r = self.rest();
            if r.starts_with("/>") {
                self.at += 2;
                return Ok(RawElem { tag, attrs, text: None, children: vec![], line });
            }
            if r.starts_with('>') {
                self.at += 1;
                break;
            }
            let name = self.name()?;
            self.skip_ws();
            if !self.rest().starts_with('=') {
                return self.err(format!("attribute `{name}` without a value"));
            }
            self.at += 1;
            self.skip_ws();
            let q = match self.s.get(self.at) {
                Some(&q @ (b'"' | b'\'')) => q as char,
                _ => return self.err("expected a quoted attribute value"),
            };
            self.at += 1;
            let end = self.rest().find(q).ok_or_else(|| xml_err(self.line(), "unterminated attribute value"))?;
            let raw = &self.src[self.at..self.at + end];
            let value = unescape(raw).map_err(|m| xml_err(self.line(), m))?;
            self.at += end + 1;
            if attrs.iter().any(|(n, _)| *n == name) {
                return self.err(format!("attribute `{name}` repeated"));
            }
            attrs.push((name, value));
        }

        let mut children = Vec::new();
        let mut text = String::new();
        loop {
            let r = self.rest();
            if r.is_empty() {
                return self.err(format!("unclosed element `{tag}`"));
            }
            if r.starts_with("</") {
                self.at += 2;
                let close = self.name()?;
                if close != tag {
                    return self.err(format!("`</{close}>` closes `<{tag}>`"));
                }
                self.skip_ws();
                if !self.rest().starts_with('>') {
                    return self.err("expected `>`");
                }
                self.at += 1;
                break;
            } else if r.starts_with("<!--") {
                self.skip_until("-->")?;
            } else if r.starts_with("<![CDATA[") {
                self.at += 9;
                let end = self.rest().find("]]>").ok_or_else(|| xml_err(self.line(), "unterminated CDATA"))?;
                text.push_str(&self.src[self.at..self.at + end]);
                self.at += end + 3;
            } else if r.starts_with("<?") {
                return self.err("processing instructions are not supported");
            } else if r.starts_with('<') {
                children.push(self.element()?);
            } else {
                let end = r.find('<').unwrap_or(r.len());
                let chunk = unescape(&r[..end]).map_err(|m| xml_err(self.line(), m))?;
                text.push_str(&chunk);
                self.at += end;
            }
        }
        let trimmed = text.trim();
        if !children.is_empty() && !trimmed.is_empty() {
            return Err(xml_err(line, format!("mixed content in `{tag}`")));
        }
        let text = if children.is_empty() && !text.is_empty() { Some(trimmed.to_string()) } else { None };
        Ok(RawElem { tag, attrs, text, children, line })
    }
}

fn unescape(s: &str) -> Result<String, String> {
    if !s.contains('&') {
        return Ok(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let end = tail.find(';').ok_or_else(|| "unterminated entity".to_string())?;
        let ent = &tail[1..end];
        match ent {
            "lt" => out.push('<'),
            "gt" => out.push('>'),
            "amp" => out.push('&'),
            "quot" => out.push('"'),
            "apos" => out.push('\''),
            _ => {
                let code = if let Some(h) = ent.strip_prefix("#x") {
                    u32::from_str_radix(h, 16).ok()
                } else if let Some(d) = ent.strip_prefix('#') {
                    d.parse().ok()
                } else {
                    None
                };
                out.push(code.and_then(char::from_u32).ok_or_else(|| format!("unknown entity `&{ent};`"))?);
            }
        }
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub(crate) fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Parses a document; `Ok(None)` for a document without a root element.
pub(crate) fn read_document(text: &str) -> Result<Option<RawElem>, InstanceError> {
    let mut r = Reader { s: text.as_bytes(), src: text, at: 0 };
    r.skip_misc()?;
    if r.rest().is_empty() {
        return Ok(None);
    }
    let root = r.element()?;
    r.skip_misc()?;
    if !r.rest().is_empty() {
        return r.err("content after the root element");
    }
    Ok(Some(root))
}
