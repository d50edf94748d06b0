use std::collections::{BTreeMap, BTreeSet};

use crate::mapping::{copy_rules, infer_rules};
use crate::schema::{CorrespondenceSet, DtdGraph};
use crate::translate::{Direction, MappingContext};

/// Numbered schemas and a rule set for every pair of them.
#[derive(Debug, Clone)]
pub struct SchemaCatalog {
    pub schemas: Vec<DtdGraph>,
    /// Keyed by `(lower, higher)` index; the value names the rule source.
    mappings: BTreeMap<(usize, usize), (usize, MappingContext)>,
}

impl SchemaCatalog {
    /// `count` schemas alternating between the shapes of `a` and `b`. The first two are `a`
    /// and `b` themselves, later ones are renamed with a `_k` suffix on every tag but the
    /// box members of `b`. Pairs of
    /// different shape use the rules inferred from `corr` (which is stated against `a` and
    /// `b`), pairs of the same shape use copy rules from the lower to the higher index.
    pub fn alternating(a: &DtdGraph, b: &DtdGraph, corr: &CorrespondenceSet, count: usize) -> SchemaCatalog {
        // box members are named by source data, so they keep their tags
        let boxed: BTreeSet<String> = corr.boxes.iter().flat_map(|x| x.members.iter().map(|&m| b.tag(m).to_string())).collect();
        let schemas: Vec<DtdGraph> = (0..count)
            .map(|k| {
                let (base, keep) = if k % 2 == 0 { (a, &BTreeSet::new()) } else { (b, &boxed) };
                if k < 2 {
                    base.clone()
                } else {
                    base.renamed(&format!("{}_{k}", base.name), |t| if keep.contains(t) { t.to_string() } else { format!("{t}_{k}") })
                }
            })
            .collect();
        let mut mappings = BTreeMap::new();
        for i in 0..count {
            for j in i + 1..count {
                let (si, sj) = (&schemas[i], &schemas[j]);
                let entry = if i % 2 == j % 2 {
                    (i, MappingContext::new(si.clone(), sj.clone(), copy_rules(si, sj)))
                } else {
                    let (src, tgt, from) = if i % 2 == 0 { (si, sj, i) } else { (sj, si, j) };
                    let mut c = corr.clone();
                    c.source = src.name.clone();
                    c.target = tgt.name.clone();
                    let rules = infer_rules(src, tgt, &c).mapping_rules();
                    (from, MappingContext::new(src.clone(), tgt.clone(), rules))
                };
                mappings.insert((i, j), entry);
            }
        }
        SchemaCatalog { schemas, mappings }
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    /// Rule set and direction for sending a query from schema `from` to schema `to`.
    pub fn mapping(&self, from: usize, to: usize) -> Option<(&MappingContext, Direction)> {
        let (source, ctx) = self.mappings.get(&(from.min(to), from.max(to)))?;
        let dir = if *source == from { Direction::Forward } else { Direction::Backward };
        Some((ctx, dir))
    }
}
