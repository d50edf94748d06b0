//! Deterministic simulation of query propagation through a network of peers with
//! heterogeneous schemas: every hop translates the request into the next peer's schema.

mod broadcast;
mod catalog;
mod network;

pub use broadcast::{broadcast, PeerOutcome, SimReport};
pub use catalog::SchemaCatalog;
pub use network::{assign_schemas, build_network, Acquaintance, Network, Peer, SimConfig};

use thiserror::Error;

use crate::query::{print_query, TpQuery};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no rule set between schemas {0} and {1}")]
    MissingRuleSet(usize, usize),
    #[error("degree {degree} is impossible with {peers} peers")]
    BadDegree { degree: usize, peers: usize },
    #[error("{schemas} schemas requested, at most {available} usable")]
    BadSchemaCount { schemas: usize, available: usize },
    #[error("no connected topology found")]
    Disconnected,
    #[error("unknown schema {0}")]
    UnknownSchema(usize),
    #[error("unknown peer {0}")]
    UnknownPeer(usize),
    #[error("bad edge {0}-{1}")]
    BadEdge(usize, usize),
    #[error("invalid query: {0}")]
    BadQuery(String),
}

/// One cell of a scaling table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingRow {
    pub query: String,
    pub schemas: usize,
    pub translations: usize,
    pub distinct_translations: usize,
    pub untranslatable: usize,
}

/// Broadcasts one query on the network `template` describes, with `schemas` schemas.
pub fn scaling_point(template: &SimConfig, catalog: &SchemaCatalog, schemas: usize, q: &TpQuery) -> Result<ScalingRow, SimError> {
    let cfg = SimConfig { schemas, instances: false, ..template.clone() };
    let net = build_network(&cfg, catalog)?;
    let r = broadcast(&net, catalog, net.origin, q)?;
    Ok(ScalingRow {
        query: print_query(q),
        schemas,
        translations: r.translations,
        distinct_translations: r.distinct_translations,
        untranslatable: r.untranslatable,
    })
}

/// Translation counts for every query and schema count, query-major.
pub fn scaling_run(
    template: &SimConfig,
    catalog: &SchemaCatalog,
    counts: &[usize],
    queries: &[TpQuery],
) -> Result<Vec<ScalingRow>, SimError> {
    let mut out = Vec::new();
    for q in queries {
        for &k in counts {
            out.push(scaling_point(template, catalog, k, q)?);
        }
    }
    Ok(out)
}

pub fn scaling_table(rows: &[ScalingRow]) -> String {
    let mut s = String::from("schemas\ttranslations\tdistinct\tuntranslatable\tquery\n");
    for r in rows {
        s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.schemas, r.translations, r.distinct_translations, r.untranslatable, r.query));
    }
    s
}
