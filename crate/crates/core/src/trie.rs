//! Uncompressed binary trie with per-level occupancy.
//!
//! Unary internal nodes are kept, so the number of internal nodes at level
//! `k` is exactly the number of length-`k` prefixes shared by two or more
//! keys.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::source::KeySet;

pub const DEFAULT_DEPTH_CAP: usize = 4096;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Internal { children: [Option<NodeId>; 2] },
    External { key: usize },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub level: usize,
}

/// Binary trie over a [`KeySet`]. Empty subtrees are absent children.
#[derive(Clone, Debug)]
pub struct Trie {
    nodes: Vec<Node>,
    root: Option<NodeId>,
    filled: Vec<u64>,
    external_depth: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelProfile {
    counts: Vec<u64>,
}

pub fn build(keys: &KeySet) -> Result<Trie> {
    build_with_cap(keys, DEFAULT_DEPTH_CAP)
}

/// Builds the trie level by level, reading bit `k` of a key only while it
/// still shares its length-`k` prefix with another key.
pub fn build_with_cap(keys: &KeySet, depth_cap: usize) -> Result<Trie> {
    let n = keys.len();
    let mut trie = Trie {
        nodes: Vec::new(),
        root: None,
        filled: Vec::new(),
        external_depth: vec![0; n],
    };
    if n == 0 {
        return Ok(trie);
    }

    trie.root = Some(0);
    trie.nodes.push(placeholder(0));
    let mut frontier: Vec<(NodeId, Vec<usize>)> = vec![(0, (0..n).collect())];
    let mut level = 0;

    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (node, group) in frontier {
            if let [key] = group[..] {
                trie.nodes[node].kind = NodeKind::External { key };
                trie.external_depth[key] = level;
                continue;
            }
            if level >= depth_cap {
                return Err(Error::DepthCapExceeded { cap: depth_cap });
            }
            if trie.filled.len() <= level {
                trie.filled.resize(level + 1, 0);
            }
            trie.filled[level] += 1;

            let (mut zeros, mut ones) = (Vec::new(), Vec::new());
            for &key in &group {
                if keys.bit(key, level)? {
                    ones.push(key);
                } else {
                    zeros.push(key);
                }
            }
            let mut children = [None, None];
            for (slot, part) in [zeros, ones].into_iter().enumerate() {
                if !part.is_empty() {
                    let id = trie.nodes.len();
                    trie.nodes.push(placeholder(level + 1));
                    children[slot] = Some(id);
                    next.push((id, part));
                }
            }
            trie.nodes[node].kind = NodeKind::Internal { children };
        }
        frontier = next;
        level += 1;
    }
    Ok(trie)
}

fn placeholder(level: usize) -> Node {
    Node {
        kind: NodeKind::Internal {
            children: [None, None],
        },
        level,
    }
}

impl Trie {
    pub fn root(&self) -> Option<&Node> {
        self.root.map(|id| &self.nodes[id])
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn key_count(&self) -> usize {
        self.external_depth.len()
    }

    pub fn external_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::External { .. }))
            .count()
    }

    /// Deepest level holding an internal node, `None` for fewer than two keys.
    pub fn internal_height(&self) -> Option<usize> {
        self.filled.len().checked_sub(1)
    }

    pub fn level_profile(&self) -> LevelProfile {
        if self.filled.is_empty() {
            LevelProfile { counts: vec![0] }
        } else {
            LevelProfile {
                counts: self.filled.clone(),
            }
        }
    }

    pub fn external_depth(&self, key: usize) -> Result<usize> {
        self.external_depth
            .get(key)
            .copied()
            .ok_or(Error::UnknownKey(key))
    }
}

pub fn level_profile(trie: &Trie) -> LevelProfile {
    trie.level_profile()
}

pub fn external_depth(trie: &Trie, key: usize) -> Result<usize> {
    trie.external_depth(key)
}

impl LevelProfile {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        LevelProfile { counts }
    }

    /// `X_k` for `k = 0..len`; levels past the end are empty.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    /// `X_k / 2^k`.
    pub fn fraction(&self, k: usize) -> f64 {
        match self.counts.get(k) {
            Some(&c) if c > 0 => c as f64 * 2f64.powi(-(k as i32)),
            _ => 0.0,
        }
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.fraction(k)).collect()
    }

    /// Deepest level whose fill fraction is at least `alpha`.
    pub fn alpha_fillup_level(&self, alpha: f64) -> Result<usize> {
        check_alpha(alpha)?;
        if self.fraction(0) < alpha {
            return Err(Error::TooFewKeys);
        }
        let first_short = (1..=self.counts.len())
            .find(|&k| self.fraction(k) < alpha)
            .unwrap_or(self.counts.len());
        Ok(first_short - 1)
    }

    /// CSV rows `level,count,fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,count,fraction\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{k},{c},{}", self.fraction(k));
        }
        out
    }
}

pub fn alpha_fillup_level(profile: &LevelProfile, alpha: f64) -> Result<usize> {
    profile.alpha_fillup_level(alpha)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", alpha, "must lie in (0, 1]"))
    }
}

/// Number of distinct length-`k` prefixes carried by at least two keys,
/// tabulated directly from the keys.
pub fn count_filled_oracle(keys: &KeySet, k: usize) -> Result<u64> {
    let mut tally: HashMap<Vec<bool>, u32> = HashMap::new();
    for id in 0..keys.len() {
        let prefix = (0..k)
            .map(|i| keys.bit(id, i))
            .collect::<Result<Vec<_>>>()?;
        *tally.entry(prefix).or_default() += 1;
    }
    Ok(tally.values().filter(|&&c| c >= 2).count() as u64)
}

/// Length of the shortest prefix of key `id` that no other key shares,
/// found by comparing against every other key.
pub fn unique_prefix_len_scan(keys: &KeySet, id: usize) -> Result<usize> {
    if id >= keys.len() {
        return Err(Error::UnknownKey(id));
    }
    let mut longest_shared = None;
    for other in (0..keys.len()).filter(|&o| o != id) {
        let mut i = 0;
        while keys.bit(id, i)? == keys.bit(other, i)? {
            i += 1;
        }
        longest_shared = longest_shared.max(Some(i));
    }
    Ok(longest_shared.map_or(0, |l| l + 1))
}
