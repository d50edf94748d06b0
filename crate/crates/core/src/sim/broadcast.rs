use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use super::{Network, SchemaCatalog, SimError};
use crate::query::{canonical_query, evaluate_union, print_union, TpQuery};
use crate::translate::{translate, TranslateError};

/// What one peer did with the request.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerOutcome {
    pub peer: usize,
    pub schema: usize,
    pub hops: usize,
    /// Translations applied on the way from the origin.
    pub chain: usize,
    /// The query in the peer's schema; `None` once a hop could not translate it.
    pub query: Option<Vec<TpQuery>>,
    /// Answers on the peer's own instance, when it has one.
    pub answers: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub origin: usize,
    /// One entry per reached peer, by peer id.
    pub per_peer: Vec<PeerOutcome>,
    pub aspl: f64,
    pub hop_histogram: BTreeMap<usize, usize>,
    pub messages: usize,
    /// Requests that reached an already processed peer and were dropped.
    pub duplicates_suppressed: usize,
    /// Translation calls made while forwarding, one per message crossing schemas.
    pub translations: usize,
    /// Calls that were not answered from the cache.
    pub distinct_translations: usize,
    pub untranslatable: usize,
}

impl SimReport {
    /// Mean hop count over the reached peers other than the origin.
    pub fn mean_hops(&self) -> f64 {
        let others: Vec<usize> = self.per_peer.iter().filter(|p| p.peer != self.origin).map(|p| p.hops).collect();
        if others.is_empty() {
            0.0
        } else {
            others.iter().sum::<usize>() as f64 / others.len() as f64
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "peer\tschema\thops\tchain\tanswers\tquery");
        for p in &self.per_peer {
            let answers = p.answers.map_or("-".to_string(), |a| a.to_string());
            let query = match (&p.query, &p.note) {
                (Some(q), _) => print_union(q),
                (None, Some(n)) => format!("untranslatable: {n}"),
                (None, None) => "untranslatable".to_string(),
            };
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", p.peer, p.schema, p.hops, p.chain, answers, query);
        }
        let _ = writeln!(s, "reached\t{}", self.per_peer.len());
        let _ = writeln!(s, "mean_hops\t{:.3}", self.mean_hops());
        let _ = writeln!(s, "aspl\t{:.3}", self.aspl);
        let hist: Vec<String> = self.hop_histogram.iter().map(|(h, n)| format!("{h}:{n}")).collect();
        let _ = writeln!(s, "hop_histogram\t{}", hist.join(" "));
        let _ = writeln!(s, "messages\t{}", self.messages);
        let _ = writeln!(s, "duplicates_suppressed\t{}", self.duplicates_suppressed);
        let _ = writeln!(s, "translations\t{}", self.translations);
        let _ = writeln!(s, "distinct_translations\t{}", self.distinct_translations);
        let _ = writeln!(s, "untranslatable\t{}", self.untranslatable);
        s
    }
}

struct Message {
    from: Option<usize>,
    to: usize,
    query: Result<Vec<TpQuery>, String>,
    hops: usize,
    chain: usize,
}

type Cache = HashMap<(String, usize, usize), Result<Vec<TpQuery>, String>>;

/// Translates every branch of a union; failed branches are dropped.
fn translate_union(qs: &[TpQuery], catalog: &SchemaCatalog, from: usize, to: usize) -> Result<Vec<TpQuery>, String> {
    let (ctx, dir) = catalog.mapping(from, to).ok_or_else(|| format!("no rules between schemas {from} and {to}"))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut last_err = None;
    for q in qs {
        match translate(q, ctx, dir) {
            Ok(t) => {
                for b in t.queries() {
                    if seen.insert(canonical_query(&b)) {
                        out.push(b);
                    }
                }
            }
            Err(e @ TranslateError::Untranslatable(_)) | Err(e @ TranslateError::Invalid(_)) => last_err = Some(e.to_string()),
        }
    }
    if out.is_empty() {
        Err(last_err.unwrap_or_else(|| "empty query".into()))
    } else {
        Ok(out)
    }
}

/// Floods `q` from `origin` in breadth order. Every peer handles the first request it
/// receives, translates it for each acquaintance with another schema, and forwards it to
/// all acquaintances but the sender; later copies are dropped.
pub fn broadcast(net: &Network, catalog: &SchemaCatalog, origin: usize, q: &TpQuery) -> Result<SimReport, SimError> {
    if origin >= net.peers.len() {
        return Err(SimError::UnknownPeer(origin));
    }
    q.check().map_err(SimError::BadQuery)?;
    let mut cache: Cache = HashMap::new();
    let mut outcomes: BTreeMap<usize, PeerOutcome> = BTreeMap::new();
    let mut report = SimReport {
        origin,
        per_peer: vec![],
        aspl: net.aspl(),
        hop_histogram: BTreeMap::new(),
        messages: 0,
        duplicates_suppressed: 0,
        translations: 0,
        distinct_translations: 0,
        untranslatable: 0,
    };
    let mut queue = VecDeque::from([Message { from: None, to: origin, query: Ok(vec![q.clone()]), hops: 0, chain: 0 }]);
    while let Some(m) = queue.pop_front() {
        if outcomes.contains_key(&m.to) {
            report.duplicates_suppressed += 1;
            continue;
        }
        let peer = &net.peers[m.to];
        let answers = match (&peer.instance, &m.query) {
            (Some(d), Ok(qs)) => Some(evaluate_union(qs, d).len()),
            (Some(_), Err(_)) => Some(0),
            _ => None,
        };
        let (query, note) = match &m.query {
            Ok(qs) => (Some(qs.clone()), None),
            Err(e) => (None, Some(e.clone())),
        };
        outcomes.insert(m.to, PeerOutcome { peer: m.to, schema: peer.schema, hops: m.hops, chain: m.chain, query, answers, note });
        for a in &peer.acquaintances {
            if Some(a.peer) == m.from {
                continue;
            }
            report.messages += 1;
            let theirs = net.peers[a.peer].schema;
            let (query, chain) = match (&m.query, a.mapping) {
                (Ok(qs), Some(_)) => {
                    report.translations += 1;
                    let key = (print_union(qs), peer.schema, theirs);
                    let t = cache
                        .entry(key)
                        .or_insert_with(|| {
                            report.distinct_translations += 1;
                            translate_union(qs, catalog, peer.schema, theirs)
                        })
                        .clone();
                    if t.is_err() {
                        report.untranslatable += 1;
                    }
                    (t, m.chain + 1)
                }
                (q, _) => (q.clone(), m.chain),
            };
            queue.push_back(Message { from: Some(m.to), to: a.peer, query, hops: m.hops + 1, chain });
        }
    }
    report.per_peer = outcomes.into_values().collect();
    for p in &report.per_peer {
        *report.hop_histogram.entry(p.hops).or_default() += 1;
    }
    Ok(report)
}
