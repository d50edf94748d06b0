//! Query translation along mapping rules, in either direction.
//!
//! `Forward` rewrites a query over the rule bodies' schema into one over the heads'
//! schema; its answers on the exchanged instance are contained in the original answers.
//! `Backward` rewrites a query over the heads' schema into one over the bodies' schema
//! that returns exactly the answers the original returns on the exchanged instance.

mod backward;
pub(crate) mod cq;
mod forward;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::instance::match_body;
use crate::mapping::MappingRule;
use crate::query::{canonical_query, print_query, print_union, TpQuery};
use crate::schema::DtdGraph;
use cq::Cq;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Body schema to head schema.
    Forward,
    /// Head schema to body schema.
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("untranslatable query: {0}")]
    Untranslatable(String),
    #[error("invalid query: {0}")]
    Invalid(String),
}

/// The two schemas and the rules between them; rule bodies range over `source`.
#[derive(Debug, Clone)]
pub struct MappingContext {
    pub source: DtdGraph,
    pub target: DtdGraph,
    pub rules: Vec<MappingRule>,
}

impl MappingContext {
    pub fn new(source: DtdGraph, target: DtdGraph, rules: Vec<MappingRule>) -> Self {
        MappingContext { source, target, rules }
    }

    /// Schema a query must range over for the given direction.
    pub fn input_schema(&self, dir: Direction) -> &DtdGraph {
        match dir {
            Direction::Forward => &self.source,
            Direction::Backward => &self.target,
        }
    }

    pub fn output_schema(&self, dir: Direction) -> &DtdGraph {
        match dir {
            Direction::Forward => &self.target,
            Direction::Backward => &self.source,
        }
    }
}

/// One member of a translated union, before and after dummy nodes are removed.
#[derive(Debug, Clone)]
pub struct Branch {
    pub uncontracted: TpQuery,
    pub contracted: TpQuery,
}

#[derive(Debug, Clone)]
pub struct TraceStage {
    pub pattern: usize,
    pub rule: usize,
    pub expanded: String,
    pub translated: String,
    pub contracted: String,
}

#[derive(Debug, Clone, Default)]
pub struct TranslationTrace {
    pub stages: Vec<TraceStage>,
    pub notes: Vec<String>,
}

impl TranslationTrace {
    /// Contracted stage queries of one pattern.
    pub fn contracted_stages(&self, pattern: usize) -> Vec<&str> {
        self.stages.iter().filter(|s| s.pattern == pattern).map(|s| s.contracted.as_str()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub direction: Direction,
    pub branches: Vec<Branch>,
    pub trace: TranslationTrace,
}

impl Translation {
    pub fn queries(&self) -> Vec<TpQuery> {
        self.branches.iter().map(|b| b.contracted.clone()).collect()
    }

    pub fn uncontracted(&self) -> Vec<TpQuery> {
        self.branches.iter().map(|b| b.uncontracted.clone()).collect()
    }

    /// The contracted union in query syntax.
    pub fn text(&self) -> String {
        print_union(&self.queries())
    }

    pub fn render_trace(&self) -> String {
        let mut s = format!("direction: {}\n", self.direction);
        for st in &self.trace.stages {
            s.push_str(&format!(
                "stage pattern={} rule={}\n  expanded:   {}\n  translated: {}\n  contracted: {}\n",
                st.pattern + 1,
                st.rule + 1,
                st.expanded,
                st.translated,
                st.contracted
            ));
        }
        for (i, b) in self.branches.iter().enumerate() {
            s.push_str(&format!(
                "branch {}\n  uncontracted: {}\n  contracted:   {}\n",
                i + 1,
                print_query(&b.uncontracted),
                print_query(&b.contracted)
            ));
        }
        for n in &self.trace.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s.push_str(&format!("result: {}\n", self.text()));
        s
    }
}

fn dedupe(pairs: Vec<(Cq, Cq)>) -> Vec<Branch> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (u, c) in pairs {
        let contracted = c.to_query();
        if seen.insert(canonical_query(&contracted)) {
            out.push(Branch { uncontracted: u.to_query(), contracted });
        }
    }
    out
}

/// Translates `q` along the rules. The result is a union of tree-pattern queries.
pub fn translate(q: &TpQuery, ctx: &MappingContext, dir: Direction) -> Result<Translation, TranslateError> {
    q.check().map_err(TranslateError::Invalid)?;
    match dir {
        Direction::Backward => translate_backward(q, ctx),
        Direction::Forward => translate_forward(q, ctx),
    }
}

fn translate_backward(q: &TpQuery, ctx: &MappingContext) -> Result<Translation, TranslateError> {
    let (cqs, combos) = backward::backward_cqs(ctx, q)?;
    if cqs.is_empty() {
        return Err(TranslateError::Untranslatable("no rule head embeds the query".into()));
    }
    let mut trace = TranslationTrace::default();
    for combo in &combos {
        for e in &combo.embs {
            let head = backward::Head::new(&ctx.rules[e.rule]);
            let images: Vec<String> = e.images.iter().map(|(v, h)| format!("${v}:{}", head.nodes[*h].tag)).collect();
            trace.notes.push(format!("rule {} hosts {}", e.rule + 1, images.join(" ")));
        }
    }
    let pairs = cqs.into_iter().map(|c| {
        let k = backward::contract_source(ctx, &c);
        (c, k)
    });
    let branches = dedupe(pairs.collect());
    for (i, b) in branches.iter().enumerate() {
        trace.stages.push(TraceStage {
            pattern: 0,
            rule: i,
            expanded: String::new(),
            translated: print_query(&b.uncontracted),
            contracted: print_query(&b.contracted),
        });
    }
    trace.stages.clear();
    Ok(Translation { direction: Direction::Backward, branches, trace })
}

/// Whether the exact source image of a target candidate lies inside `q`.
fn sound(ctx: &MappingContext, q: &Cq, candidate: &TpQuery) -> bool {
    match backward::backward_cqs(ctx, candidate) {
        Ok((cqs, _)) => cqs.into_iter().all(|mut b| {
            b.complete(&ctx.source);
            b.contained_in(q)
        }),
        Err(_) => false,
    }
}

fn translate_forward(q: &TpQuery, ctx: &MappingContext) -> Result<Translation, TranslateError> {
    let (consts, scens) = forward::scenarios(ctx, q);
    let consts = consts.ok_or_else(|| TranslateError::Untranslatable("the query compares one value with two different literals".into()))?;
    if scens.is_empty() {
        return Err(TranslateError::Untranslatable("the query does not fit the schema".into()));
    }
    let (qcq, _) = Cq::from_query(q);
    let mut trace = TranslationTrace::default();
    let mut accepted = Vec::new();
    for (si, s) in scens.iter().enumerate() {
        let valued = |v: &String| s.at.get(v).is_some_and(|&i| s.inst.value(i).is_some());
        if let Some(r) = q.returns.iter().find(|r| !valued(r)) {
            return Err(TranslateError::Untranslatable(format!("`${r}` returns element content")));
        }
        let relevant: BTreeSet<String> = q.vars().iter().filter(|v| valued(v)).map(|v| consts.of_var[v].clone()).collect();
        let shown: Vec<String> = q.returns.iter().map(|r| consts.of_var[r].clone()).collect();
        let exchanged = forward::exchange(&ctx.rules, s, &ctx.source)?;
        let mut cands = Vec::new();
        for link_all in [false, true] {
            let focus = forward::Focus { relevant: relevant.clone(), witness: &s.witness, shown: shown.clone(), link_all };
            cands.extend(forward::extract(ctx, &exchanged, &consts, &focus));
        }
        for cand in cands {
            let Some((u, mut c)) = forward::finish(ctx, cand) else { continue };
            let cq_text = c.to_query();
            if sound(ctx, &qcq, &cq_text) {
                for r in c.idle_roots() {
                    let smaller = c.without(r);
                    if sound(ctx, &qcq, &smaller.to_query()) {
                        c = smaller;
                    }
                }
                accepted.push((u, c));
            } else {
                trace.notes.push(format!("scenario {}: rejected {}", si + 1, print_query(&cq_text)));
            }
        }
        if si == 0 {
            trace.stages = forward_stages(ctx, q, &consts, s)?;
        }
    }
    // drop candidates contained in another
    let mut keep = vec![true; accepted.len()];
    for i in 0..accepted.len() {
        for j in 0..accepted.len() {
            if i != j
                && keep[i]
                && keep[j]
                && accepted[i].1.contained_in(&accepted[j].1)
                && (!accepted[j].1.contained_in(&accepted[i].1) || j < i)
            {
                keep[i] = false;
            }
        }
    }
    let accepted: Vec<(Cq, Cq)> = accepted.into_iter().zip(keep).filter(|(_, k)| *k).map(|(a, _)| a).collect();
    if accepted.is_empty() {
        return Err(TranslateError::Untranslatable("no target query preserves every condition of the query".into()));
    }
    Ok(Translation { direction: Direction::Forward, branches: dedupe(accepted), trace })
}

/// Per pattern and rule: the body matches, and the target pattern that rule alone yields
/// for that pattern's values.
fn forward_stages(
    ctx: &MappingContext,
    q: &TpQuery,
    consts: &forward::Constants,
    s: &forward::Scenario,
) -> Result<Vec<TraceStage>, TranslateError> {
    let mut out = Vec::new();
    for (pi, p) in q.patterns.iter().enumerate() {
        let vars: Vec<String> = p.vars();
        let valued = |v: &String| s.at.get(v).is_some_and(|&i| s.inst.value(i).is_some());
        let relevant: BTreeSet<String> = vars.iter().filter(|v| valued(v)).map(|v| consts.of_var[v].clone()).collect();
        let mut shown: Vec<String> = q.returns.iter().filter(|r| vars.contains(r)).map(|r| consts.of_var[r].clone()).collect();
        if shown.is_empty() {
            shown = q
                .joins
                .iter()
                .flat_map(|(a, b)| [a, b])
                .filter(|v| vars.contains(v) && valued(v))
                .map(|v| consts.of_var[v].clone())
                .take(1)
                .collect();
        }
        for (ri, rule) in ctx.rules.iter().enumerate() {
            let matches = match_body(rule, &s.inst, &ctx.source);
            let hits: Vec<String> = matches
                .iter()
                .take(1)
                .flat_map(|m| {
                    m.iter().filter_map(|(rv, b)| match b {
                        crate::instance::Binding::Node(i) => {
                            s.at.iter().find(|(_, &n)| n == *i).filter(|(qv, _)| vars.contains(qv)).map(|(qv, _)| format!("${rv}=${qv}"))
                        }
                        _ => None,
                    })
                })
                .collect();
            if hits.is_empty() {
                continue;
            }
            let exchanged = forward::exchange(std::slice::from_ref(rule), s, &ctx.source)?;
            let focus = forward::Focus { relevant: relevant.clone(), witness: &s.witness, shown: shown.clone(), link_all: true };
            for cand in forward::extract(ctx, &exchanged, consts, &focus) {
                if cand.returns.is_empty() && !cand.nodes.iter().any(|n| n.keep) {
                    continue;
                }
                let Some((u, c)) = forward::finish(ctx, cand) else { continue };
                if u.returns.is_empty() {
                    continue;
                }
                out.push(TraceStage {
                    pattern: pi,
                    rule: ri,
                    expanded: hits.join(" "),
                    translated: print_query(&u.to_query()),
                    contracted: print_query(&c.to_query()),
                });
            }
        }
    }
    Ok(out)
}
