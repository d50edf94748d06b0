use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SchemaCatalog, SimError};
use crate::instance::{random_instance, GenParams, XmlInstance};
use crate::translate::Direction;

const TOPOLOGY_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub peers: usize,
    /// Minimum number of acquaintances per peer.
    pub degree: usize,
    /// Distinct schemas in the network.
    pub schemas: usize,
    pub seed: u64,
    /// Give every peer a seeded random instance of its schema.
    pub instances: bool,
    /// Directory with `peer-<id>.xml` files; read by the command line tool.
    pub instance_dir: Option<String>,
    /// Peer the query starts from; the first peer with schema 0 when unset.
    pub origin: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { peers: 128, degree: 4, schemas: 10, seed: 42, instances: false, instance_dir: None, origin: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acquaintance {
    pub peer: usize,
    /// Catalog pair and direction; `None` between peers of the same schema.
    pub mapping: Option<((usize, usize), Direction)>,
}

#[derive(Debug, Clone)]
pub struct Peer {
    pub id: usize,
    pub schema: usize,
    pub instance: Option<XmlInstance>,
    pub acquaintances: Vec<Acquaintance>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub peers: Vec<Peer>,
    /// Default starting peer; it keeps schema 0 under every schema count.
    pub origin: usize,
    pub seed: u64,
    pub degree: usize,
    pub schema_count: usize,
}

impl Network {
    /// A network over an explicit topology. Edges are undirected.
    pub fn from_edges(catalog: &SchemaCatalog, schemas: &[usize], edges: &[(usize, usize)]) -> Result<Network, SimError> {
        let n = schemas.len();
        let mut adj = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(SimError::BadEdge(a, b));
            }
            adj[a].insert(b);
            adj[b].insert(a);
        }
        let degree = adj.iter().map(BTreeSet::len).min().unwrap_or(0);
        let count = schemas.iter().collect::<BTreeSet<_>>().len();
        let origin = schemas.iter().position(|&s| s == 0).unwrap_or(0);
        assemble(catalog, schemas, &adj, origin, 0, degree, count)
    }

    pub fn edge_count(&self) -> usize {
        self.peers.iter().map(|p| p.acquaintances.len()).sum::<usize>() / 2
    }

    pub fn min_degree(&self) -> usize {
        self.peers.iter().map(|p| p.acquaintances.len()).min().unwrap_or(0)
    }

    /// Hop distances from `origin`; `None` for unreachable peers.
    pub fn distances(&self, origin: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.peers.len()];
        dist[origin] = Some(0);
        let mut queue = VecDeque::from([origin]);
        while let Some(p) = queue.pop_front() {
            for a in &self.peers[p].acquaintances {
                if dist[a.peer].is_none() {
                    dist[a.peer] = Some(dist[p].unwrap() + 1);
                    queue.push_back(a.peer);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.peers.is_empty() || self.distances(0).iter().all(Option::is_some)
    }

    /// Mean shortest-path length over ordered pairs of distinct connected peers.
    pub fn aspl(&self) -> f64 {
        let (mut sum, mut pairs) = (0usize, 0usize);
        for p in 0..self.peers.len() {
            for d in self.distances(p).into_iter().flatten().filter(|&d| d > 0) {
                sum += d;
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            sum as f64 / pairs as f64
        }
    }

    /// Acquaintance pairs whose peers have different schemas.
    pub fn heterogeneous_edges(&self) -> usize {
        self.peers.iter().flat_map(|p| p.acquaintances.iter()).filter(|a| a.mapping.is_some()).count() / 2
    }
}

fn assemble(
    catalog: &SchemaCatalog,
    schemas: &[usize],
    adj: &[BTreeSet<usize>],
    origin: usize,
    seed: u64,
    degree: usize,
    schema_count: usize,
) -> Result<Network, SimError> {
    let mut peers = Vec::with_capacity(schemas.len());
    for (id, &schema) in schemas.iter().enumerate() {
        if schema >= catalog.len() {
            return Err(SimError::UnknownSchema(schema));
        }
        let mut acquaintances = Vec::new();
        for &other in &adj[id] {
            let theirs = schemas[other];
            let mapping = if theirs == schema {
                None
            } else {
                let (_, dir) = catalog.mapping(schema, theirs).ok_or(SimError::MissingRuleSet(schema, theirs))?;
                Some(((schema.min(theirs), schema.max(theirs)), dir))
            };
            acquaintances.push(Acquaintance { peer: other, mapping });
        }
        peers.push(Peer { id, schema, instance: None, acquaintances });
    }
    Ok(Network { peers, origin, seed, degree, schema_count })
}

/// Each peer in turn picks random acquaintances until it has `degree` of them. Redrawn
/// until the graph is connected.
fn topology(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<Vec<BTreeSet<usize>>, SimError> {
    if n <= 1 {
        return Ok(vec![BTreeSet::new(); n]);
    }
    if degree == 0 || degree >= n {
        return Err(SimError::BadDegree { degree, peers: n });
    }
    for _ in 0..TOPOLOGY_ATTEMPTS {
        let mut adj = vec![BTreeSet::new(); n];
        for p in 0..n {
            while adj[p].len() < degree {
                let q = rng.gen_range(0..n);
                if q != p {
                    adj[p].insert(q);
                    adj[q].insert(p);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            for &q in &adj[p] {
                if !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            return Ok(adj);
        }
    }
    Err(SimError::Disconnected)
}

/// Schema of every peer, and the first peer of the shuffle. Peers are shuffled once; then,
/// for each schema after the first, the largest class (by shuffled position) gives its
/// second half to the new schema. A network with more schemas thus refines the assignment
/// of one with fewer, and the first peer always keeps schema 0.
pub fn assign_schemas(n: usize, count: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let first = order.first().copied().unwrap_or(0);
    let mut classes: Vec<Vec<usize>> = vec![order];
    for _ in 1..count.max(1) {
        let (big, _) = classes.iter().enumerate().max_by_key(|(i, c)| (c.len(), std::cmp::Reverse(*i))).unwrap();
        if classes[big].len() < 2 {
            break;
        }
        let half = classes[big].len() / 2;
        let moved = classes[big].split_off(half);
        classes.push(moved);
    }
    let mut out = vec![0; n];
    for (k, c) in classes.iter().enumerate() {
        for &p in c {
            out[p] = k;
        }
    }
    (out, first)
}

/// A seeded random network. The topology and the peer order depend on the seed only, so
/// networks that differ in their schema count share their acquaintance graph.
pub fn build_network(cfg: &SimConfig, catalog: &SchemaCatalog) -> Result<Network, SimError> {
    if cfg.schemas == 0 || cfg.schemas > catalog.len() || cfg.schemas > cfg.peers.max(1) {
        return Err(SimError::BadSchemaCount { schemas: cfg.schemas, available: catalog.len().min(cfg.peers) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adj = topology(cfg.peers, cfg.degree, &mut rng)?;
    let (schemas, first) = assign_schemas(cfg.peers, cfg.schemas, &mut rng);
    let origin = match cfg.origin {
        Some(o) if o >= cfg.peers => return Err(SimError::UnknownPeer(o)),
        Some(o) => o,
        None => first,
    };
    let mut net = assemble(catalog, &schemas, &adj, origin, cfg.seed, cfg.degree, cfg.schemas)?;
    if cfg.instances {
        let params = GenParams { root_cap: 4, cap: 3, ..GenParams::default() };
        for p in &mut net.peers {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed ^ (p.id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            p.instance = Some(random_instance(&catalog.schemas[p.schema], &params, &mut r));
        }
    }
    Ok(net)
}
