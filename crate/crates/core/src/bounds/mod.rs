//! Moment and tail bound evaluators. Every evaluator returns a
//! [`BoundReport`] that can be compared against an oracle value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chaos::MomentEstimate;
use crate::error::{Error, Result};

pub mod bernstein;
pub mod rosenthal;
pub mod theorem;
pub mod tools;

pub use bernstein::{
    bernstein_moment_bound, bernstein_moment_report, bernstein_tail_bound, TailBound,
};
pub use rosenthal::{rosenthal_moment_bound, rosenthal_psd_bound, SummandLaw};
pub use theorem::{
    concentration_tail, lower_bound_terms, theorem_moment_bound, KernelTerms, OracleSpec, Variant,
};
pub use tools::{moment_to_tail, sum_max_bound, tail_to_moment, ScalarLaw};

/// Relative slack allowed when comparing a bound with an exact oracle.
pub const COMPARE_RTOL: f64 = 1e-9;

/// `r = max(q, ln d)`.
pub fn r_log_d(q: f64, d: usize) -> f64 {
    q.max((d as f64).ln())
}

/// `r = max(q, ln(e d)) = max(q, 1 + ln d)`.
pub fn r_log_ed(q: f64, d: usize) -> f64 {
    q.max(1.0 + (d as f64).ln())
}

pub const R_LOG_D: &str = "r=max(q,log d)";
pub const R_LOG_ED: &str = "r=max(q,log(ed))";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// `value >= oracle` is the claim.
    Upper,
    /// `value <= oracle` is the claim.
    Lower,
    /// Probability bound at a threshold; the oracle is an exceedance frequency.
    Tail,
    /// No inequality is claimed (unspecified constant); the ratio is recorded.
    Recorded,
    /// `value == oracle` within `atol + rtol * scale`, read from the
    /// `atol` and `rtol` constants (defaults `0` and [`COMPARE_RTOL`]).
    Equal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Verified,
    Estimated,
    Violated,
    Recorded,
    Unchecked,
}

/// One evaluated bound, optionally compared against an oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub q_or_t: f64,
    pub value: f64,
    pub constituent_terms: BTreeMap<String, f64>,
    pub r_convention: String,
    pub oracle_value: Option<f64>,
    pub ratio: Option<f64>,
    pub kind: BoundKind,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Constants used, by name.
    pub constants: BTreeMap<String, f64>,
    pub inputs_digest: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub oracle_detail: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(name: &str, q_or_t: f64, kind: BoundKind) -> Self {
        Self {
            bound_name: name.to_string(),
            q_or_t,
            value: 0.0,
            constituent_terms: BTreeMap::new(),
            r_convention: String::new(),
            oracle_value: None,
            ratio: None,
            kind,
            verdict: Verdict::Unchecked,
            variant: None,
            constants: BTreeMap::new(),
            inputs_digest: String::new(),
            oracle_detail: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn term(&mut self, name: &str, v: f64) -> &mut Self {
        self.constituent_terms.insert(name.to_string(), v);
        self
    }

    pub fn constant(&mut self, name: &str, v: f64) -> &mut Self {
        self.constants.insert(name.to_string(), v);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn get_term(&self, name: &str) -> f64 {
        self.constituent_terms[name]
    }

    /// Compares against `oracle`; `stderr > 0` marks a Monte Carlo oracle,
    /// which is accepted within three standard errors and downgrades the
    /// verdict to estimated.
    pub fn attach_oracle(&mut self, oracle: f64, stderr: f64) -> &mut Self {
        self.oracle_value = Some(oracle);
        self.ratio = (oracle > 0.0).then(|| self.value / oracle);
        let slack = COMPARE_RTOL * self.value.max(oracle) + 3.0 * stderr;
        let holds = match self.kind {
            BoundKind::Upper => self.value >= oracle - slack,
            BoundKind::Lower => self.value <= oracle + slack,
            BoundKind::Tail => oracle <= self.value + slack,
            BoundKind::Recorded => true,
            BoundKind::Equal => {
                let atol = self.constants.get("atol").copied().unwrap_or(0.0);
                let rtol = self.constants.get("rtol").copied().unwrap_or(COMPARE_RTOL);
                let scale = self.value.abs().max(oracle.abs());
                (self.value - oracle).abs() <= atol + rtol * scale + 3.0 * stderr
            }
        };
        self.verdict = match (self.kind, holds, stderr > 0.0) {
            (BoundKind::Recorded, _, _) => Verdict::Recorded,
            (_, false, _) => Verdict::Violated,
            (_, true, true) => Verdict::Estimated,
            (_, true, false) => Verdict::Verified,
        };
        self
    }

    pub fn attach_moment(&mut self, m: &MomentEstimate) -> &mut Self {
        self.oracle_detail
            .insert("oracle_replicas".into(), m.replicas as f64);
        if m.stderr > 0.0 {
            self.oracle_detail.insert("oracle_stderr".into(), m.stderr);
        }
        self.attach_oracle(m.value, m.stderr)
    }

    /// Marks the report violated if `value` fails against a secondary oracle.
    pub fn check_secondary(&mut self, name: &str, oracle: f64, stderr: f64) -> &mut Self {
        self.oracle_detail.insert(name.to_string(), oracle);
        let slack = COMPARE_RTOL * self.value.max(oracle) + 3.0 * stderr;
        let holds = match self.kind {
            BoundKind::Upper => self.value >= oracle - slack,
            BoundKind::Lower => self.value <= oracle + slack,
            _ => true,
        };
        if !holds {
            self.verdict = Verdict::Violated;
        } else if stderr > 0.0 && self.verdict == Verdict::Verified {
            self.verdict = Verdict::Estimated;
        }
        self
    }
}

/// Named values for the constants the bounds leave unspecified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// `C` in the tail-to-moment conversion.
    pub tail_to_moment_c: f64,
    /// `C` in the lower bound.
    pub lower_bound_c: f64,
    /// `C` in the Adamczak assembly.
    pub adamczak_c: f64,
    /// `C_2` of the Bernstein moment bound; `None` composes it from
    /// `tail_to_moment_c` as `2 sqrt 2 * tail_to_moment_c`.
    pub bernstein_c2: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            tail_to_moment_c: 4.0,
            lower_bound_c: 1.0,
            adamczak_c: 1.0,
            bernstein_c2: None,
        }
    }
}

impl Constants {
    pub const NAMES: [&'static str; 4] = [
        "tail_to_moment_c",
        "lower_bound_c",
        "adamczak_c",
        "bernstein_c2",
    ];

    pub fn with_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut c = Self::default();
        for (k, &v) in overrides {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "constant {k} must be positive, got {v}"
                )));
            }
            match k.as_str() {
                "tail_to_moment_c" => c.tail_to_moment_c = v,
                "lower_bound_c" => c.lower_bound_c = v,
                "adamczak_c" => c.adamczak_c = v,
                "bernstein_c2" => c.bernstein_c2 = Some(v),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown constant `{k}`; known: {}",
                        Self::NAMES.join(", ")
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn bernstein_c2(&self) -> f64 {
        self.bernstein_c2
            .unwrap_or(2.0 * std::f64::consts::SQRT_2 * self.tail_to_moment_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        let mut r = BoundReport::new("x", 1.0, BoundKind::Upper);
        r.value = 2.0;
        r.attach_oracle(1.0, 0.0);
        assert_eq!((r.verdict, r.ratio), (Verdict::Verified, Some(2.0)));
        r.attach_oracle(3.0, 0.0);
        assert_eq!(r.verdict, Verdict::Violated);
        r.attach_oracle(2.1, 0.05);
        assert_eq!(r.verdict, Verdict::Estimated);
        r.attach_oracle(0.0, 0.0);
        assert_eq!(r.ratio, None);

        let mut l = BoundReport::new("y", 1.0, BoundKind::Lower);
        l.value = 2.0;
        l.attach_oracle(2.0 * (1.0 + 1e-12), 0.0);
        assert_eq!(l.verdict, Verdict::Verified);
        l.attach_oracle(1.0, 0.0);
        assert_eq!(l.verdict, Verdict::Violated);

        let mut e = BoundReport::new("z", 1.0, BoundKind::Equal);
        e.value = 1.0;
        e.constant("rtol", 1e-12);
        e.attach_oracle(1.0 + 5e-13, 0.0);
        assert_eq!(e.verdict, Verdict::Verified);
        e.attach_oracle(1.0 + 1e-11, 0.0);
        assert_eq!(e.verdict, Verdict::Violated);
        e.constant("atol", 1e-9);
        e.attach_oracle(1.0 + 1e-11, 0.0);
        assert_eq!(e.verdict, Verdict::Verified);
    }

    #[test]
    fn constant_overrides() {
        let mut m = BTreeMap::new();
        m.insert("tail_to_moment_c".to_string(), 2.0);
        let c = Constants::with_overrides(&m).unwrap();
        assert_eq!(c.bernstein_c2(), 4.0 * std::f64::consts::SQRT_2);
        m.insert("nope".to_string(), 1.0);
        assert!(matches!(
            Constants::with_overrides(&m),
            Err(Error::Config(_))
        ));
    }
}
