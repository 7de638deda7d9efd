//! Seeded random variates with one independent stream per
//! `(node, item, purpose)`.
//!
//! Every stream's generator state is a pure function of the master seed and
//! its key, so two runs that start from the same seed draw the same uniforms
//! on every stream no matter how the scenario parameters differ. That is
//! what makes common-random-number comparisons line up.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Interarrival,
    Quantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamKey {
    pub node: u32,
    pub item: u32,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(node: u32, item: u32, purpose: Purpose) -> Self {
        StreamKey {
            node,
            item,
            purpose,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("mean inter-arrival time must be positive and finite, got {0}")]
    NonPositiveMean(f64),
    #[error("invalid triangular support min={min} mode={mode} max={max}")]
    InvalidSupport { min: u32, mode: u32, max: u32 },
}

/// Hash `(master seed, key)` into a 256-bit generator seed.
fn stream_seed(master_seed: u64, key: StreamKey) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"supsim-stream");
    h.update(master_seed.to_le_bytes());
    h.update(key.node.to_le_bytes());
    h.update(key.item.to_le_bytes());
    h.update([key.purpose as u8]);
    h.finalize().into()
}

/// Derive a 64-bit seed from a list of words; used to mix replication and
/// scenario identifiers into a run seed.
pub fn mix_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"supsim-run");
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
    drawn: u64,
    log_limit: usize,
    log: Vec<f64>,
}

impl RngStream {
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        RngStream {
            key,
            rng: ChaCha8Rng::from_seed(stream_seed(master_seed, key)),
            drawn: 0,
            log_limit: 0,
            log: Vec::new(),
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    /// Keep the first `limit` uniforms this stream produces.
    pub fn log_first(&mut self, limit: usize) {
        self.log_limit = limit;
    }

    pub fn logged(&self) -> &[f64] {
        &self.log
    }

    /// Next uniform on (0, 1].
    pub fn uniform(&mut self) -> f64 {
        let u = 1.0 - self.rng.random::<f64>();
        self.drawn += 1;
        if self.log.len() < self.log_limit {
            self.log.push(u);
        }
        u
    }
}

/// Inverse-transform exponential: `mean * (-ln u)`.
pub fn exponential_from_uniform(u: f64, mean: f64) -> f64 {
    -mean * u.ln()
}

/// Inverse CDF of the continuous triangular distribution on `[min, max]`.
pub fn triangular_from_uniform(u: f64, min: f64, mode: f64, max: f64) -> f64 {
    let width = max - min;
    if width <= 0.0 {
        return min;
    }
    let split = (mode - min) / width;
    if u < split {
        min + (u * width * (mode - min)).sqrt()
    } else {
        max - ((1.0 - u) * width * (max - mode)).sqrt()
    }
}

/// Exponential inter-arrival time with the given mean (working hours).
pub fn interarrival(stream: &mut RngStream, mean: f64) -> Result<f64, SamplingError> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(SamplingError::NonPositiveMean(mean));
    }
    Ok(exponential_from_uniform(stream.uniform(), mean))
}

pub fn check_support(min: u32, mode: u32, max: u32) -> Result<(), SamplingError> {
    if min == 0 || min > mode || mode > max {
        return Err(SamplingError::InvalidSupport { min, mode, max });
    }
    Ok(())
}

/// Triangular demand quantity rounded half-up to whole items and clamped to
/// the support.
pub fn demand_quantity(
    stream: &mut RngStream,
    min: u32,
    mode: u32,
    max: u32,
) -> Result<u32, SamplingError> {
    check_support(min, mode, max)?;
    let x = triangular_from_uniform(
        stream.uniform(),
        f64::from(min),
        f64::from(mode),
        f64::from(max),
    );
    let rounded = (x + 0.5).floor() as u32;
    Ok(rounded.clamp(min, max))
}

/// All streams of one simulation instance, created lazily on first use.
pub struct StreamSet {
    master_seed: u64,
    log_limit: usize,
    streams: BTreeMap<StreamKey, RngStream>,
}

impl StreamSet {
    pub fn new(master_seed: u64) -> Self {
        StreamSet {
            master_seed,
            log_limit: 0,
            streams: BTreeMap::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Log the first `limit` uniforms of every stream.
    pub fn log_uniforms(&mut self, limit: usize) {
        self.log_limit = limit;
        for s in self.streams.values_mut() {
            s.log_first(limit);
        }
    }

    /// Rewind every stream to the state implied by `master_seed`.
    pub fn reset(&mut self, master_seed: u64) {
        self.master_seed = master_seed;
        self.streams.clear();
    }

    pub fn stream(&mut self, key: StreamKey) -> &mut RngStream {
        let (seed, limit) = (self.master_seed, self.log_limit);
        self.streams.entry(key).or_insert_with(|| {
            let mut s = RngStream::new(seed, key);
            s.log_first(limit);
            s
        })
    }

    pub fn uniform_log(&self) -> BTreeMap<StreamKey, Vec<f64>> {
        self.streams
            .iter()
            .map(|(k, s)| (*k, s.logged().to_vec()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> StreamKey {
        StreamKey::new(0, 0, Purpose::Interarrival)
    }

    #[test]
    fn exponential_mean_matches() {
        let mut s = RngStream::new(7, key());
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| interarrival(&mut s, 5.0).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 5.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn exponential_scales_with_mean_for_same_uniform() {
        let mut a = RngStream::new(11, key());
        let mut b = RngStream::new(11, key());
        let x3 = interarrival(&mut a, 3.0).unwrap();
        let x8 = interarrival(&mut b, 8.0).unwrap();
        let mut c = RngStream::new(11, key());
        let u = c.uniform();
        assert_eq!(x3, 3.0 * -u.ln());
        assert_eq!(x8, 8.0 * -u.ln());
    }

    #[test]
    fn zero_mean_rejected() {
        let mut s = RngStream::new(1, key());
        assert_eq!(interarrival(&mut s, 0.0), Err(SamplingError::NonPositiveMean(0.0)));
        assert!(interarrival(&mut s, f64::NAN).is_err());
        assert_eq!(s.drawn(), 0);
    }

    #[test]
    fn quantity_stays_in_support() {
        let mut s = RngStream::new(3, StreamKey::new(1, 2, Purpose::Quantity));
        for _ in 0..10_000 {
            let q = demand_quantity(&mut s, 18, 20, 22).unwrap();
            assert!((18..=22).contains(&q));
        }
    }

    #[test]
    fn degenerate_support_is_constant() {
        let mut s = RngStream::new(3, StreamKey::new(1, 2, Purpose::Quantity));
        assert!((0..100).all(|_| demand_quantity(&mut s, 20, 20, 20).unwrap() == 20));
    }

    #[test]
    fn wide_triangle_mean_is_twenty() {
        let mut s = RngStream::new(5, StreamKey::new(4, 1, Purpose::Quantity));
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| u64::from(demand_quantity(&mut s, 14, 20, 26).unwrap())).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 20.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn invalid_support_rejected() {
        let mut s = RngStream::new(3, key());
        assert!(demand_quantity(&mut s, 0, 1, 2).is_err());
        assert!(demand_quantity(&mut s, 5, 4, 6).is_err());
        assert!(demand_quantity(&mut s, 5, 7, 6).is_err());
    }

    #[test]
    fn different_keys_diverge_same_key_repeats() {
        let mut a = RngStream::new(9, StreamKey::new(0, 0, Purpose::Quantity));
        let mut b = RngStream::new(9, StreamKey::new(0, 1, Purpose::Quantity));
        let mut c = RngStream::new(9, StreamKey::new(0, 0, Purpose::Quantity));
        let xa: Vec<f64> = (0..10).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..10).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..10).map(|_| c.uniform()).collect();
        assert_ne!(xa, xb);
        assert_eq!(xa, xc);
    }

    #[test]
    fn reset_rewinds_streams() {
        let mut set = StreamSet::new(42);
        set.log_uniforms(5);
        let k = StreamKey::new(3, 0, Purpose::Interarrival);
        let first: Vec<f64> = (0..5).map(|_| set.stream(k).uniform()).collect();
        set.reset(42);
        let again: Vec<f64> = (0..5).map(|_| set.stream(k).uniform()).collect();
        assert_eq!(first, again);
        assert_eq!(set.uniform_log()[&k], again);
        set.reset(43);
        assert_ne!(set.stream(k).uniform(), first[0]);
    }

    #[test]
    fn uniform_is_in_half_open_unit_interval() {
        let mut s = RngStream::new(0, key());
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
