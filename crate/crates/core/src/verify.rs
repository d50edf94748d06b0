//! Empirical checks of translations on seeded random source instances.
//!
//! A backward translation must return exactly the answers of the original query on the
//! exchanged instance. A forward translation's answers on the exchanged instance must be
//! contained in the original answers. Either way the contracted and uncontracted forms of
//! every branch must agree.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{apply_rules, random_instance, GenParams, XmlInstance};
use crate::mapping::ExprTag;
use crate::query::{evaluate, evaluate_union, print_query, AnswerSet, Operand, TagTest, TpQuery};
use crate::translate::{Direction, MappingContext, Translation};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub params: GenParams,
    /// Larger samples are redrawn.
    pub max_nodes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let params = GenParams { root_cap: 4, cap: 3, default_values: 3, ..GenParams::default() };
        VerifyConfig { instances: 100, seed: 7, params, max_nodes: 120 }
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub what: String,
    pub instance: String,
    pub expected: Vec<String>,
    pub got: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub query: String,
    pub translation: String,
    pub direction: Direction,
    pub instances: usize,
    /// Instances on which the original query had answers.
    pub nonempty: usize,
    pub failures: Vec<Counterexample>,
    pub contraction_checks: usize,
    pub contraction_failures: Vec<Counterexample>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.contraction_failures.is_empty()
    }
}

/// Literals compared against in the queries, so samples hit selections.
pub fn query_constants(queries: &[&TpQuery]) -> Vec<String> {
    let mut out = BTreeSet::new();
    for q in queries {
        for p in &q.patterns {
            for n in p.root.preorder() {
                for c in &n.constraints {
                    if let Operand::Lit(l) = &c.operand {
                        out.insert(l.clone());
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Distinct element tags compared by a value join, so that the sampled values can meet.
fn joined_tags(queries: &[&TpQuery]) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for q in queries {
        let mut tag_of = std::collections::BTreeMap::new();
        for p in &q.patterns {
            for n in p.root.preorder() {
                if let TagTest::Name(t) = &n.tag {
                    tag_of.insert(n.var.clone(), t.clone());
                }
            }
        }
        for (a, b) in &q.joins {
            if let (Some(x), Some(y)) = (tag_of.get(a), tag_of.get(b)) {
                if x != y && !x.starts_with('@') && !y.starts_with('@') {
                    out.insert((x.clone().min(y.clone()), x.clone().max(y.clone())));
                }
            }
        }
    }
    out
}

/// Generator settings for a mapping: source values that become target tags are drawn from
/// the tags the target schema allows there, and query literals join every other pool.
pub fn params_for(ctx: &MappingContext, base: &GenParams, queries: &[&TpQuery]) -> GenParams {
    let mut p = base.clone();
    for rule in &ctx.rules {
        let mut tag_of_var = std::collections::BTreeMap::new();
        for b in &rule.body {
            for e in b.preorder() {
                if let (ExprTag::Name(t), crate::mapping::ExprId::Var(v)) = (&e.tag, &e.id) {
                    tag_of_var.insert(v.clone(), t.clone());
                }
            }
        }
        let mut stack = vec![(&rule.head, None::<&str>)];
        while let Some((e, parent)) = stack.pop() {
            if let (ExprTag::TextOf(v) | ExprTag::Var(v), Some(pt)) = (&e.tag, parent) {
                if let (Some(src_tag), Some(pn)) = (tag_of_var.get(v), ctx.target.lookup(pt)) {
                    let tags: Vec<String> =
                        ctx.target.children(pn).map(|c| ctx.target.tag(c.child).to_string()).filter(|t| !t.starts_with('@')).collect();
                    p.pools.insert(src_tag.clone(), tags);
                }
            }
            let me = match &e.tag {
                ExprTag::Name(n) => Some(n.as_str()),
                _ => None,
            };
            for c in &e.children {
                stack.push((c, me));
            }
        }
    }
    for (a, b) in joined_tags(queries) {
        let shared = match (p.pools.get(&a), p.pools.get(&b)) {
            (Some(_), Some(_)) => continue,
            (Some(x), None) | (None, Some(x)) => x.clone(),
            (None, None) => (0..p.default_values.max(1)).map(|k| format!("{a}{k}")).collect(),
        };
        p.pools.entry(a).or_insert_with(|| shared.clone());
        p.pools.entry(b).or_insert(shared);
    }
    let mut extra: BTreeSet<String> = p.extra.iter().cloned().collect();
    extra.extend(query_constants(queries));
    p.extra = extra.into_iter().collect();
    p
}

/// Seeded source instances, each paired with its exchanged instance.
pub fn sample(ctx: &MappingContext, cfg: &VerifyConfig, params: &GenParams) -> Vec<(XmlInstance, XmlInstance)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    while out.len() < cfg.instances {
        let d = random_instance(&ctx.source, params, &mut rng);
        if d.len() > cfg.max_nodes {
            continue;
        }
        let m = apply_rules(&ctx.rules, &d, &ctx.source).expect("rules apply to valid instances");
        out.push((d, m));
    }
    out
}

fn lines(a: &AnswerSet) -> Vec<String> {
    a.iter().map(|t| t.join("\t")).collect()
}

/// Checks a translation of `q` on the given samples.
pub fn verify_on(q: &TpQuery, t: &Translation, samples: &[(XmlInstance, XmlInstance)]) -> VerifyReport {
    let contracted = t.queries();
    let uncontracted = t.uncontracted();
    let mut r = VerifyReport {
        query: print_query(q),
        translation: t.text(),
        direction: t.direction,
        instances: samples.len(),
        nonempty: 0,
        failures: vec![],
        contraction_checks: 0,
        contraction_failures: vec![],
    };
    for (d, m) in samples {
        let (orig_on, trans_on) = match t.direction {
            Direction::Backward => (m, d),
            Direction::Forward => (d, m),
        };
        let expected = evaluate(q, orig_on);
        let got = evaluate_union(&contracted, trans_on);
        if !expected.is_empty() {
            r.nonempty += 1;
        }
        let ok = match t.direction {
            Direction::Backward => got == expected,
            Direction::Forward => got.is_subset(&expected),
        };
        if !ok {
            r.failures.push(Counterexample {
                what: match t.direction {
                    Direction::Backward => "answers differ".into(),
                    Direction::Forward => "translated answers not contained".into(),
                },
                instance: d.to_xml(),
                expected: lines(&expected),
                got: lines(&got),
            });
        }
        for (u, c) in uncontracted.iter().zip(&contracted) {
            r.contraction_checks += 1;
            let (a, b) = (evaluate(u, trans_on), evaluate(c, trans_on));
            if a != b {
                r.contraction_failures.push(Counterexample {
                    what: format!("contraction of {}", print_query(u)),
                    instance: trans_on.to_xml(),
                    expected: lines(&a),
                    got: lines(&b),
                });
            }
        }
    }
    r
}

pub fn verify(q: &TpQuery, t: &Translation, ctx: &MappingContext, cfg: &VerifyConfig) -> VerifyReport {
    let translated = t.queries();
    let mut qs = vec![q];
    qs.extend(translated.iter());
    let params = params_for(ctx, &cfg.params, &qs);
    let samples = sample(ctx, cfg, &params);
    verify_on(q, t, &samples)
}
