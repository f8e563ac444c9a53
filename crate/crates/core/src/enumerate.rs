//! Exact and Monte Carlo expectations over finite product spaces.
//!
//! Configurations are visited in mixed-radix lexicographic order, position 0
//! most significant. Sums are accumulated in fixed-size chunks and the chunk
//! totals are added in order, so results do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default cap on the number of enumerated configurations.
pub const DEFAULT_CONFIG_CAP: u64 = 1 << 16;

const CHUNK: u64 = 512;

/// A product of finite laws, one per position.
#[derive(Clone, Debug)]
pub struct ProductSpace<'a> {
    weights: Vec<&'a [f64]>,
}

impl<'a> ProductSpace<'a> {
    pub fn new(weights: Vec<&'a [f64]>) -> Self {
        Self { weights }
    }

    /// `len` copies of the same law.
    pub fn iid(probs: &'a [f64], len: usize) -> Self {
        Self {
            weights: vec![probs; len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn count(&self) -> u128 {
        self.weights
            .iter()
            .fold(1u128, |acc, w| acc.saturating_mul(w.len() as u128))
    }

    pub fn check_cap(&self, cap: u64) -> Result<u64> {
        let needed = self.count();
        if needed > cap as u128 {
            Err(Error::Capacity { needed, cap })
        } else {
            Ok(needed as u64)
        }
    }

    /// Writes the digits of configuration `c` into `out`; returns its weight.
    pub fn decode(&self, mut c: u64, out: &mut [usize]) -> f64 {
        let mut w = 1.0;
        for pos in (0..self.weights.len()).rev() {
            let r = self.weights[pos].len() as u64;
            let digit = (c % r) as usize;
            c /= r;
            out[pos] = digit;
            w *= self.weights[pos][digit];
        }
        w
    }

    /// `E f` by exhaustive enumeration.
    pub fn expect<F>(&self, cap: u64, f: F) -> Result<f64>
    where
        F: Fn(&[usize]) -> f64 + Sync,
    {
        let total = self.check_cap(cap)?;
        let chunks = total.div_ceil(CHUNK);
        let len = self.len();
        let partial: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut idx = vec![0usize; len];
                let mut acc = 0.0;
                for c in k * CHUNK..((k + 1) * CHUNK).min(total) {
                    let w = self.decode(c, &mut idx);
                    if w != 0.0 {
                        acc += w * f(&idx);
                    }
                }
                acc
            })
            .collect();
        Ok(partial.iter().sum())
    }

    /// Like [`expect`](Self::expect) for `K` functionals evaluated together.
    pub fn expect_many<F, const K: usize>(&self, cap: u64, f: F) -> Result<[f64; K]>
    where
        F: Fn(&[usize]) -> [f64; K] + Sync,
    {
        let total = self.check_cap(cap)?;
        let chunks = total.div_ceil(CHUNK);
        let len = self.len();
        let partial: Vec<[f64; K]> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut idx = vec![0usize; len];
                let mut acc = [0.0; K];
                for c in k * CHUNK..((k + 1) * CHUNK).min(total) {
                    let w = self.decode(c, &mut idx);
                    if w != 0.0 {
                        let v = f(&idx);
                        for (a, x) in acc.iter_mut().zip(v) {
                            *a += w * x;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = [0.0; K];
        for p in partial {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        Ok(out)
    }

    /// Draws one configuration.
    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [usize]) {
        for (pos, w) in self.weights.iter().enumerate() {
            out[pos] = sample_index(w, rng);
        }
    }

    /// Per-replica values of `f` on independently drawn configurations.
    /// Replica `k` uses [`replica_rng`]`(seed, k)`.
    pub fn sample_values<F>(&self, replicas: u64, seed: u64, f: F) -> Vec<f64>
    where
        F: Fn(&[usize]) -> f64 + Sync,
    {
        let len = self.len();
        (0..replicas)
            .into_par_iter()
            .map(|k| {
                let mut rng = replica_rng(seed, k);
                let mut idx = vec![0usize; len];
                self.sample(&mut rng, &mut idx);
                f(&idx)
            })
            .collect()
    }
}

/// Inverse-CDF draw from a finite law.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // roundoff in the cumulative sum: fall back to the last atom with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Counter-based generator: the master seed picks the key, the replica index
/// picks the stream, so replica `k` is the same regardless of scheduling.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of integers (suite, cell, instance ...).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Estimate of `(E V)^exponent` from i.i.d. draws of `V >= 0`, with a
/// jackknife standard error. Returns `(value, stderr)`.
pub fn power_of_mean(values: &[f64], exponent: f64) -> (f64, f64) {
    let r = values.len();
    assert!(r >= 1, "need at least one replica");
    let sum: f64 = values.iter().sum();
    let value = (sum / r as f64).max(0.0).powf(exponent);
    if r == 1 {
        return (value, 0.0);
    }
    let rf = r as f64;
    let loo: Vec<f64> = values
        .iter()
        .map(|v| ((sum - v) / (rf - 1.0)).max(0.0).powf(exponent))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / rf;
    let var = loo.iter().map(|t| (t - mean_loo).powi(2)).sum::<f64>() * (rf - 1.0) / rf;
    (value, var.sqrt())
}

/// `E max_i V_i` for independent finite-support scalars `V_i`, computed
/// exactly from the product of marginal CDFs. Each law is `(values, probs)`.
pub fn expect_max_independent(laws: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    if laws.is_empty() {
        return 0.0;
    }
    let mut atoms: Vec<f64> = laws.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    let cdf = |t: f64| -> f64 {
        laws.iter()
            .map(|(v, p)| {
                v.iter()
                    .zip(p)
                    .filter(|(x, _)| **x <= t)
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    .min(1.0)
            })
            .product()
    };
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &t in &atoms {
        let f = cdf(t);
        acc += t * (f - prev);
        prev = f;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let w = [0.5, 0.5];
        let w3 = [0.2, 0.3, 0.5];
        let space = ProductSpace::new(vec![&w, &w3]);
        assert_eq!(space.count(), 6);
        let mut idx = [0usize; 2];
        let seen: Vec<[usize; 2]> = (0..6)
            .map(|c| {
                space.decode(c, &mut idx);
                idx
            })
            .collect();
        assert_eq!(seen, vec![[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]);
    }

    #[test]
    fn exact_expectation_and_cap() {
        let w = [0.25, 0.75];
        let space = ProductSpace::iid(&w, 3);
        let e = space
            .expect(8, |idx| idx.iter().sum::<usize>() as f64)
            .unwrap();
        assert!((e - 2.25).abs() < 1e-15);
        assert!(matches!(
            space.expect(7, |_| 0.0),
            Err(Error::Capacity { needed: 8, cap: 7 })
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let w = [0.1, 0.2, 0.7];
        let space = ProductSpace::iid(&w, 4);
        let f = |idx: &[usize]| idx.iter().map(|&i| i as f64).sum::<f64>();
        assert_eq!(
            space.sample_values(100, 9, f),
            space.sample_values(100, 9, f)
        );
        assert_ne!(
            space.sample_values(100, 9, f),
            space.sample_values(100, 10, f)
        );
    }

    #[test]
    fn expect_max_matches_enumeration() {
        let laws = vec![
            (vec![0.0, 1.0, 3.0], vec![0.5, 0.25, 0.25]),
            (vec![2.0, 0.5], vec![0.4, 0.6]),
            (vec![1.0], vec![1.0]),
        ];
        let probs: Vec<&[f64]> = laws.iter().map(|(_, p)| p.as_slice()).collect();
        let space = ProductSpace::new(probs);
        let brute = space
            .expect(1000, |idx| {
                idx.iter()
                    .enumerate()
                    .map(|(i, &k)| laws[i].0[k])
                    .fold(f64::MIN, f64::max)
            })
            .unwrap();
        assert!((expect_max_independent(&laws) - brute).abs() < 1e-14);
    }

    #[test]
    fn jackknife_of_constant_is_zero() {
        let (v, se) = power_of_mean(&[4.0; 10], 0.5);
        assert!((v - 2.0).abs() < 1e-15);
        assert!(se.abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }
}
