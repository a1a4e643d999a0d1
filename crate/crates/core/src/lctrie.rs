//! Recursive α-level compression.
//!
//! A group of two or more keys is scanned level by level until the fill
//! fraction of the group's own subtrie drops below `alpha`. Everything above
//! that level collapses into one node that consumes `F + 1` bits, where `F`
//! is the group's α-fillup level, and each nonempty `(F + 1)`-bit extension
//! becomes a child group. `alpha = 1` gives the classic LC trie.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::source::{BitString, KeySet};
use crate::trie::{check_alpha, DEFAULT_DEPTH_CAP};

/// Widest node the builder will allocate, in consumed bits.
pub const MAX_CONSUMED: usize = 24;

const EMPTY: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub enum AlcNode {
    External {
        key: usize,
    },
    Compressed {
        /// Bit position of the first bit this node dispatches on.
        offset: usize,
        consumed: usize,
        /// Smallest key id anywhere below this node.
        min_key: usize,
        /// `2^consumed` slots, `u32::MAX` for empty.
        children: Vec<u32>,
    },
}

impl AlcNode {
    pub fn consumed(&self) -> usize {
        match self {
            AlcNode::External { .. } => 0,
            AlcNode::Compressed { consumed, .. } => *consumed,
        }
    }

    /// Child node index in slot `slot`, if occupied.
    pub fn child(&self, slot: usize) -> Option<usize> {
        match self {
            AlcNode::External { .. } => None,
            AlcNode::Compressed { children, .. } => match children.get(slot) {
                Some(&c) if c != EMPTY => Some(c as usize),
                _ => None,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DepthSample {
    pub key: usize,
    /// Compressed nodes on the path from the root.
    pub depth: usize,
    /// Trie levels consumed along that path.
    pub consumed_total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Match {
    pub key: usize,
    pub prefix_len: usize,
}

#[derive(Clone, Debug)]
pub struct AlcTrie {
    alpha: f64,
    keys: KeySet,
    nodes: Vec<AlcNode>,
    samples: Vec<DepthSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlcStats {
    pub keys: usize,
    pub compressed_nodes: usize,
    pub external_nodes: usize,
    pub total_slots: usize,
    pub empty_slots: usize,
    pub empty_slot_fraction: f64,
    /// Mean number of nonempty slots per compressed node.
    pub mean_degree: f64,
    pub mean_consumed: f64,
    pub consumed_histogram: BTreeMap<usize, usize>,
    pub max_depth: usize,
    pub mean_depth: f64,
}

pub fn compress(keys: &KeySet, alpha: f64) -> Result<AlcTrie> {
    compress_with_cap(keys, alpha, DEFAULT_DEPTH_CAP)
}

struct Pending {
    node: usize,
    offset: usize,
    depth: usize,
    consumed_total: usize,
    group: Vec<usize>,
}

pub fn compress_with_cap(keys: &KeySet, alpha: f64, depth_cap: usize) -> Result<AlcTrie> {
    check_alpha(alpha)?;
    let n = keys.len();
    let mut alc = AlcTrie {
        alpha,
        keys: keys.clone(),
        nodes: Vec::new(),
        samples: (0..n)
            .map(|key| DepthSample {
                key,
                depth: 0,
                consumed_total: 0,
            })
            .collect(),
    };
    if n == 0 {
        return Ok(alc);
    }

    alc.nodes.push(AlcNode::External { key: 0 });
    let mut stack = vec![Pending {
        node: 0,
        offset: 0,
        depth: 0,
        consumed_total: 0,
        group: (0..n).collect(),
    }];

    while let Some(job) = stack.pop() {
        if let [key] = job.group[..] {
            alc.nodes[job.node] = AlcNode::External { key };
            alc.samples[key].depth = job.depth;
            alc.samples[key].consumed_total = job.consumed_total;
            continue;
        }

        let (consumed, prefixes) = split_level(keys, &job.group, job.offset, alpha, depth_cap)?;
        let mut order: Vec<usize> = (0..job.group.len()).collect();
        order.sort_unstable_by_key(|&i| (prefixes[i], job.group[i]));

        let mut children = vec![EMPTY; 1 << consumed];
        let mut start = 0;
        while start < order.len() {
            let slot = prefixes[order[start]];
            let end = start + order[start..].partition_point(|&i| prefixes[i] == slot);
            let child = alc.nodes.len();
            alc.nodes.push(AlcNode::External { key: 0 });
            children[slot as usize] = child as u32;
            stack.push(Pending {
                node: child,
                offset: job.offset + consumed,
                depth: job.depth + 1,
                consumed_total: job.consumed_total + consumed,
                group: order[start..end].iter().map(|&i| job.group[i]).collect(),
            });
            start = end;
        }
        alc.nodes[job.node] = AlcNode::Compressed {
            offset: job.offset,
            consumed,
            min_key: *job.group.iter().min().expect("group has two keys"),
            children,
        };
    }
    Ok(alc)
}

/// Scans `group` from bit `offset` until the fill fraction of level `F + 1`
/// falls below `alpha`. Returns `F + 1` and each key's `(F + 1)`-bit prefix.
fn split_level(
    keys: &KeySet,
    group: &[usize],
    offset: usize,
    alpha: f64,
    depth_cap: usize,
) -> Result<(usize, Vec<u64>)> {
    let mut prefixes = vec![0u64; group.len()];
    let mut scratch = Vec::with_capacity(group.len());
    let mut level = 0;
    loop {
        if offset + level >= depth_cap {
            return Err(Error::DepthCapExceeded { cap: depth_cap });
        }
        if level == MAX_CONSUMED {
            return Err(Error::NodeTooWide {
                consumed: level + 1,
                limit: MAX_CONSUMED,
            });
        }
        for (prefix, &key) in prefixes.iter_mut().zip(group) {
            *prefix = (*prefix << 1) | keys.bit(key, offset + level)? as u64;
        }
        level += 1;

        scratch.clear();
        scratch.extend_from_slice(&prefixes);
        scratch.sort_unstable();
        let filled = count_shared(&scratch);
        if (filled as f64) * 2f64.powi(-(level as i32)) < alpha {
            return Ok((level, prefixes));
        }
    }
}

/// Number of values occurring at least twice in a sorted slice.
fn count_shared(sorted: &[u64]) -> u64 {
    let mut count = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i >= 2 {
            count += 1;
        }
        i = j;
    }
    count
}

impl AlcTrie {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn keys(&self) -> &KeySet {
        &self.keys
    }

    pub fn root(&self) -> Option<&AlcNode> {
        self.nodes.first()
    }

    pub fn nodes(&self) -> &[AlcNode] {
        &self.nodes
    }

    pub fn depth(&self, key: usize) -> Result<DepthSample> {
        self.samples.get(key).copied().ok_or(Error::UnknownKey(key))
    }

    pub fn depths(&self) -> &[DepthSample] {
        &self.samples
    }

    /// Key ids stored at the external nodes, in node order.
    pub fn leaf_keys(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                AlcNode::External { key } => Some(*key),
                AlcNode::Compressed { .. } => None,
            })
            .collect()
    }

    /// Stored key sharing the longest common prefix with `query`; ties go to
    /// the smallest key id.
    pub fn longest_prefix_match(&self, query: &BitString) -> Option<Match> {
        let mut node = self.root()?;
        let key = loop {
            match node {
                AlcNode::External { key } => break *key,
                AlcNode::Compressed {
                    offset,
                    consumed,
                    min_key,
                    children,
                } => {
                    let avail = query.len().saturating_sub(*offset).min(*consumed);
                    let mut target = 0usize;
                    for i in 0..avail {
                        target = (target << 1) | query.get(offset + i).unwrap() as usize;
                    }
                    if avail == *consumed && children[target] != EMPTY {
                        node = &self.nodes[children[target] as usize];
                        continue;
                    }
                    if avail == 0 {
                        break *min_key;
                    }
                    // Best slots agree with the query on the most leading bits.
                    let mut best = (0usize, *min_key);
                    for (slot, &child) in children.iter().enumerate() {
                        if child == EMPTY {
                            continue;
                        }
                        let top = slot >> (*consumed - avail);
                        let diff = top ^ target;
                        let lcp = if diff == 0 {
                            avail
                        } else {
                            avail - (usize::BITS - diff.leading_zeros()) as usize
                        };
                        let candidate = self.min_key_of(child as usize);
                        if lcp > best.0 || (lcp == best.0 && candidate < best.1) {
                            best = (lcp, candidate);
                        }
                    }
                    break best.1;
                }
            }
        };
        Some(Match {
            key,
            prefix_len: common_prefix_len(&self.keys, key, query),
        })
    }

    fn min_key_of(&self, node: usize) -> usize {
        match &self.nodes[node] {
            AlcNode::External { key } => *key,
            AlcNode::Compressed { min_key, .. } => *min_key,
        }
    }

    pub fn stats(&self) -> AlcStats {
        let mut stats = AlcStats {
            keys: self.keys.len(),
            compressed_nodes: 0,
            external_nodes: 0,
            total_slots: 0,
            empty_slots: 0,
            empty_slot_fraction: 0.0,
            mean_degree: 0.0,
            mean_consumed: 0.0,
            consumed_histogram: BTreeMap::new(),
            max_depth: self.samples.iter().map(|s| s.depth).max().unwrap_or(0),
            mean_depth: 0.0,
        };
        let mut consumed_sum = 0;
        for node in &self.nodes {
            match node {
                AlcNode::External { .. } => stats.external_nodes += 1,
                AlcNode::Compressed {
                    consumed, children, ..
                } => {
                    stats.compressed_nodes += 1;
                    stats.total_slots += children.len();
                    stats.empty_slots += children.iter().filter(|&&c| c == EMPTY).count();
                    consumed_sum += consumed;
                    *stats.consumed_histogram.entry(*consumed).or_default() += 1;
                }
            }
        }
        if stats.compressed_nodes > 0 {
            let nodes = stats.compressed_nodes as f64;
            stats.empty_slot_fraction = stats.empty_slots as f64 / stats.total_slots as f64;
            stats.mean_degree = (stats.total_slots - stats.empty_slots) as f64 / nodes;
            stats.mean_consumed = consumed_sum as f64 / nodes;
        }
        if !self.samples.is_empty() {
            let total: usize = self.samples.iter().map(|s| s.depth).sum();
            stats.mean_depth = total as f64 / self.samples.len() as f64;
        }
        stats
    }
}

pub fn depth(alc: &AlcTrie, key: usize) -> Result<DepthSample> {
    alc.depth(key)
}

pub fn longest_prefix_match(alc: &AlcTrie, query: &BitString) -> Option<Match> {
    alc.longest_prefix_match(query)
}

pub fn structure_stats(alc: &AlcTrie) -> AlcStats {
    alc.stats()
}

/// Length of the common prefix of key `key` and `query`, bounded by both.
pub fn common_prefix_len(keys: &KeySet, key: usize, query: &BitString) -> usize {
    (0..query.len())
        .take_while(|&i| keys.bit(key, i).ok() == query.get(i))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{generate_keys, parse_keys, SourceParams};
    use crate::trie;

    #[test]
    fn two_keys() {
        let keys = parse_keys("0\n1").unwrap();
        for alpha in [0.1, 0.5, 1.0] {
            let alc = compress(&keys, alpha).unwrap();
            assert_eq!(alc.root().unwrap().consumed(), 1);
            assert_eq!(alc.depth(0).unwrap().depth, 1);
            assert_eq!(alc.depth(1).unwrap().depth, 1);
            let stats = alc.stats();
            assert_eq!(stats.compressed_nodes, 1);
            assert_eq!(stats.empty_slots, 0);
            assert_eq!(stats.consumed_histogram, BTreeMap::from([(1, 1)]));
        }
    }

    #[test]
    fn four_full_prefixes_one_node() {
        let keys = parse_keys("00\n01\n10\n11").unwrap();
        let alc = compress(&keys, 1.0).unwrap();
        assert_eq!(alc.root().unwrap().consumed(), 2);
        assert_eq!(alc.stats().compressed_nodes, 1);
        for k in 0..4 {
            let s = alc.depth(k).unwrap();
            assert_eq!((s.depth, s.consumed_total), (1, 2));
            assert_eq!(alc.root().unwrap().child(k).map(|c| alc.min_key_of(c)), Some(k));
        }
    }

    #[test]
    fn single_and_empty() {
        let one = compress(&parse_keys("1").unwrap(), 0.5).unwrap();
        assert_eq!(one.depth(0).unwrap().depth, 0);
        assert_eq!(one.stats().compressed_nodes, 0);
        assert!(one.depth(1).is_err());

        let none = compress(&parse_keys("").unwrap(), 0.5).unwrap();
        assert!(none.root().is_none());
        assert_eq!(none.longest_prefix_match(&"0101".parse().unwrap()), None);
    }

    #[test]
    fn root_consumes_fillup_plus_one() {
        let keys = generate_keys(SourceParams::new(0.7, 11).unwrap(), 300);
        let profile = trie::build(&keys).unwrap().level_profile();
        for alpha in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let alc = compress(&keys, alpha).unwrap();
            let f = profile.alpha_fillup_level(alpha).unwrap();
            assert_eq!(alc.root().unwrap().consumed(), f + 1, "alpha={alpha}");
        }
    }

    #[test]
    fn lpm_prefers_longer_route() {
        // 10/8 extended so both keys stay distinguishable, and 10.1/16.
        let keys = parse_keys("000010101111\n10.1.0.0/16").unwrap();
        let alc = compress(&keys, 0.5).unwrap();
        let m = alc.longest_prefix_match(&"10.0.0.1".parse().unwrap()).unwrap();
        assert_eq!(m, Match { key: 1, prefix_len: 15 });
    }

    #[test]
    fn lpm_short_query_ties_to_smallest_id() {
        let keys = parse_keys("110\n100\n000\n011").unwrap();
        let alc = compress(&keys, 1.0).unwrap();
        let m = alc.longest_prefix_match(&"1".parse().unwrap()).unwrap();
        assert_eq!(m, Match { key: 0, prefix_len: 1 });
        let m = alc.longest_prefix_match(&BitString::new()).unwrap();
        assert_eq!(m, Match { key: 0, prefix_len: 0 });
    }

    #[test]
    fn too_wide() {
        let shared = "0".repeat(40);
        let keys = parse_keys(&format!("{shared}0\n{shared}1")).unwrap();
        assert!(matches!(
            compress(&keys, 1e-12),
            Err(Error::NodeTooWide { .. })
        ));
    }

    #[test]
    fn shared_counting() {
        assert_eq!(count_shared(&[]), 0);
        assert_eq!(count_shared(&[1, 1, 2, 3, 3, 3, 4]), 2);
    }
}
