//! Binary keys: seeded memoryless streams and finite user-supplied strings.
//!
//! Random keys are never stored. Bit `i` of key `id` is a pure function of
//! `(seed, id, i)`, so a key set can be shared across threads and queried in
//! any order with identical results.

use std::collections::HashMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a memoryless binary source: `P(1) = p`, `P(0) = 1 - p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    p: f64,
    pub seed: u64,
}

impl SourceParams {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        Ok(SourceParams { p, seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", p, "must lie strictly between 0 and 1"))
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed counter-mode hash of `(seed, stream, counter)`.
#[inline]
pub fn derive_seed(seed: u64, stream: u64, counter: u64) -> u64 {
    let a = splitmix(seed);
    let b = splitmix(a ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix(b ^ counter.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

#[inline]
fn stream_bit(params: &SourceParams, id: usize, bit: usize) -> bool {
    let h = derive_seed(params.seed, id as u64, bit as u64);
    let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < params.p
}

/// A finite bit string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bits of an IPv4 prefix `addr/len`.
    pub fn from_ipv4_prefix(addr: Ipv4Addr, len: usize) -> Result<Self> {
        if len > 32 {
            return Err(Error::param("prefix length", len as f64, "must be at most 32"));
        }
        let word = u32::from(addr);
        Ok((0..len).map(|i| (word >> (31 - i)) & 1 == 1).collect())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().collect())
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString(bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = String;

    /// Accepts a string of `0`/`1`, an IPv4 CIDR `a.b.c.d/len`, or a bare
    /// dotted quad (treated as `/32`).
    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains('.') {
            let (addr, len) = match s.split_once('/') {
                Some((a, l)) => {
                    let len = l
                        .parse::<usize>()
                        .map_err(|_| format!("bad prefix length {l:?}"))?;
                    (a, len)
                }
                None => (s, 32),
            };
            let addr = addr
                .parse::<Ipv4Addr>()
                .map_err(|_| format!("bad IPv4 address {addr:?}"))?;
            return BitString::from_ipv4_prefix(addr, len).map_err(|e| e.to_string());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("unexpected character {c:?} in bit string")),
            })
            .collect()
    }
}

/// Where the keys of a [`KeySet`] came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Random { params: SourceParams, n: usize },
    Finite { path: Option<PathBuf> },
}

/// An ordered collection of keys, addressed by id `0..len`.
#[derive(Clone, Debug)]
pub struct KeySet {
    origin: Origin,
    finite: Vec<BitString>,
}

/// Borrowed view of one key.
#[derive(Clone, Copy, Debug)]
pub struct Key<'a> {
    pub id: usize,
    set: &'a KeySet,
}

impl Key<'_> {
    /// `None` once a finite key is exhausted.
    pub fn bit(&self, i: usize) -> Option<bool> {
        match &self.set.origin {
            Origin::Random { params, .. } => Some(stream_bit(params, self.id, i)),
            Origin::Finite { .. } => self.set.finite[self.id].get(i),
        }
    }

    /// Available length; `None` for lazily extendable keys.
    pub fn len(&self) -> Option<usize> {
        match &self.set.origin {
            Origin::Random { .. } => None,
            Origin::Finite { .. } => Some(self.set.finite[self.id].len()),
        }
    }

    pub fn prefix(&self, len: usize) -> Option<BitString> {
        (0..len).map(|i| self.bit(i)).collect()
    }
}

/// `n` keys drawn from the memoryless source described by `params`.
pub fn generate_keys(params: SourceParams, n: usize) -> KeySet {
    KeySet {
        origin: Origin::Random { params, n },
        finite: Vec::new(),
    }
}

/// Reads a key file: one key per line, `#` comments and blank lines ignored.
pub fn load_keys(path: impl AsRef<Path>) -> Result<KeySet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut set = parse_keys(&text)?;
    set.origin = Origin::Finite {
        path: Some(path.to_path_buf()),
    };
    Ok(set)
}

/// Parses key-file text. Duplicate keys are rejected.
pub fn parse_keys(text: &str) -> Result<KeySet> {
    let mut seen: HashMap<BitString, usize> = HashMap::new();
    let mut keys = Vec::new();
    for (line, bits) in parse_lines(text)? {
        if let Some(&first) = seen.get(&bits) {
            return Err(Error::DuplicateKey { line, first });
        }
        seen.insert(bits.clone(), line);
        keys.push(bits);
    }
    Ok(KeySet::from_bit_strings(keys))
}

/// Parses a query file (same syntax as key files; duplicates allowed).
pub fn parse_queries(text: &str) -> Result<Vec<BitString>> {
    Ok(parse_lines(text)?.into_iter().map(|(_, b)| b).collect())
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<BitString>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_queries(&text)
}

fn parse_lines(text: &str) -> Result<Vec<(usize, BitString)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let bits = s
            .parse::<BitString>()
            .map_err(|msg| Error::Parse { line, msg })?;
        out.push((line, bits));
    }
    Ok(out)
}

impl KeySet {
    pub fn from_bit_strings(keys: Vec<BitString>) -> Self {
        KeySet {
            origin: Origin::Finite { path: None },
            finite: keys,
        }
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        match &self.origin {
            Origin::Random { n, .. } => *n,
            Origin::Finite { .. } => self.finite.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self, id: usize) -> Option<Key<'_>> {
        (id < self.len()).then_some(Key { id, set: self })
    }

    pub fn keys(&self) -> impl Iterator<Item = Key<'_>> {
        (0..self.len()).map(move |id| Key { id, set: self })
    }

    /// Bit `i` of key `id`, or [`Error::KeyExhausted`] past the end of a
    /// finite key. `id` must be in range.
    #[inline]
    pub fn bit(&self, id: usize, i: usize) -> Result<bool> {
        match &self.origin {
            Origin::Random { params, .. } => Ok(stream_bit(params, id, i)),
            Origin::Finite { .. } => self.finite[id]
                .get(i)
                .ok_or(Error::KeyExhausted { key: id, bit: i }),
        }
    }
}

/// Probability that a random key starts with `r`: `p^ones(r) q^(|r|-ones(r))`.
pub fn prefix_probability(params: &SourceParams, r: &BitString) -> f64 {
    let ones = r.ones() as i32;
    let zeros = r.len() as i32 - ones;
    params.p().powi(ones) * params.q().powi(zeros)
}

/// Natural log of [`prefix_probability`], usable for long prefixes.
pub fn ln_prefix_probability(params: &SourceParams, r: &BitString) -> f64 {
    let ones = r.ones() as f64;
    let zeros = r.len() as f64 - ones;
    ones * params.p().ln() + zeros * params.q().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn empty_keyset() {
        let set = generate_keys(SourceParams::new(0.5, 7).unwrap(), 0);
        assert!(set.is_empty());
        assert!(set.key(0).is_none());
    }

    #[test]
    fn rejects_degenerate_p() {
        assert!(SourceParams::new(0.0, 1).is_err());
        assert!(SourceParams::new(1.0, 1).is_err());
        assert!(SourceParams::new(f64::NAN, 1).is_err());
    }

    #[test]
    fn near_one_p_gives_ones() {
        let set = generate_keys(SourceParams::new(1.0 - 1e-12, 3).unwrap(), 4);
        for key in set.keys() {
            let ones = (0..10_000).filter(|&i| key.bit(i).unwrap()).count();
            assert!(ones >= 9_999);
        }
    }

    #[test]
    fn bits_are_pure() {
        let params = SourceParams::new(0.3, 99).unwrap();
        let a = generate_keys(params, 10);
        let b = generate_keys(params, 10);
        for id in (0..10).rev() {
            for i in [500, 3, 0, 64, 65] {
                assert_eq!(a.bit(id, i).unwrap(), b.bit(id, i).unwrap());
                assert_eq!(a.bit(id, i).unwrap(), a.key(id).unwrap().bit(i).unwrap());
            }
        }
    }

    #[test]
    fn load_simple_keys() {
        let set = parse_keys("0\n1\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.key(0).unwrap().len(), Some(1));
        assert!(set.bit(1, 0).unwrap());
        assert!(matches!(
            set.bit(1, 1),
            Err(Error::KeyExhausted { key: 1, bit: 1 })
        ));
    }

    #[test]
    fn cidr_expands_to_prefix() {
        let set = parse_keys("10.0.0.0/8").unwrap();
        assert_eq!(set.key(0).unwrap().prefix(8).unwrap(), bs("00001010"));
        assert_eq!(set.key(0).unwrap().len(), Some(8));
        assert_eq!(bs("10.0.0.1").len(), 32);
    }

    #[test]
    fn duplicates_rejected() {
        match parse_keys("01\n# comment\n01\n") {
            Err(Error::DuplicateKey { line: 3, first: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_has_line() {
        match parse_keys("01\n\n0x1\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_keys("10.0.0.0/33").is_err());
        assert!(parse_keys("300.0.0.0/8").is_err());
    }

    #[test]
    fn prefix_probability_examples() {
        let p7 = SourceParams::new(0.7, 0).unwrap();
        assert_eq!(prefix_probability(&p7, &BitString::new()), 1.0);
        assert!((prefix_probability(&p7, &bs("10")) - 0.21).abs() < 1e-15);
        let half = SourceParams::new(0.5, 0).unwrap();
        let r = bs("0110100111");
        assert_eq!(prefix_probability(&half, &r), 2f64.powi(-10));
    }

    #[test]
    fn prefix_probabilities_sum_to_one() {
        let params = SourceParams::new(0.7, 0).unwrap();
        for k in 0..=12usize {
            let total: f64 = (0..1u32 << k)
                .map(|v| {
                    let r: BitString = (0..k).map(|i| (v >> i) & 1 == 1).collect();
                    prefix_probability(&params, &r)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "k={k} total={total}");
        }
    }

    #[test]
    fn log_space_agrees() {
        let params = SourceParams::new(0.83, 0).unwrap();
        for len in 0..=64usize {
            let r: BitString = (0..len).map(|i| i % 3 == 0).collect();
            let lin = prefix_probability(&params, &r);
            let log = ln_prefix_probability(&params, &r).exp();
            assert!((lin - log).abs() <= 1e-12 * lin, "len={len}");
        }
    }
}
