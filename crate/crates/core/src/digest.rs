//! Short content digests identifying the inputs of a bound evaluation.

use sha2::{Digest, Sha256};

use crate::chaos::ChaosCoefficients;
use crate::linalg::HermMatrix;
use crate::ustat::{DiscreteDistribution, KernelTable};

#[derive(Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn new(tag: &str) -> Self {
        let mut d = Self::default();
        d.str(tag);
        d
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.hasher.update(s.as_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.hasher.update(v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.hasher.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn herm(&mut self, m: &HermMatrix) -> &mut Self {
        self.u64(m.dim() as u64);
        for z in m.matrix().iter() {
            self.f64(z.re).f64(z.im);
        }
        self
    }

    pub fn law(&mut self, law: &DiscreteDistribution) -> &mut Self {
        self.u64(law.size() as u64);
        for (p, &w) in law.points().iter().zip(law.probs()) {
            self.str(&p.label).f64(w);
            for &v in &p.payload {
                self.f64(v);
            }
        }
        self
    }

    pub fn kernel(&mut self, h: &KernelTable) -> &mut Self {
        self.u64(h.n() as u64)
            .u64(h.d() as u64)
            .u64(h.support_size() as u64);
        let pairs: Vec<_> = h.pairs().collect();
        for (i1, i2) in pairs {
            for x in 0..h.support_size() {
                for y in 0..h.support_size() {
                    self.herm(h.get(i1, i2, x, y));
                }
            }
        }
        self
    }

    pub fn coefficients(&mut self, a: &ChaosCoefficients) -> &mut Self {
        self.u64(a.n() as u64);
        for b in a.blocks() {
            self.herm(b);
        }
        self
    }

    /// First 16 hex digits of the SHA-256.
    pub fn finish(&self) -> String {
        let out = self.hasher.clone().finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable_and_sensitive() {
        let a = InputDigest::new("x").f64(1.0).finish();
        assert_eq!(a, InputDigest::new("x").f64(1.0).finish());
        assert_ne!(a, InputDigest::new("x").f64(1.0 + 1e-16 * 2.0).finish());
        assert_eq!(a.len(), 16);
    }
}
