//! Auxiliary inequalities: moment/tail conversions, the sum-max inequality,
//! and Khintchine-type bounds for Rademacher series and chaos.

use std::f64::consts::{E, SQRT_2};

use crate::bounds::{BoundKind, BoundReport};
use crate::chaos::{sign_of, ChaosCoefficients};
use crate::digest::InputDigest;
use crate::enumerate::{expect_max_independent, ProductSpace, DEFAULT_CONFIG_CAP};
use crate::error::{Error, Result};
use crate::linalg::{assemble_block_g, HermMatrix};

/// `e (a4 u^2 + a3 u^(3/2) + a2 u + a1 sqrt u + a0)` for `u >= 2`, where
/// `a = [a0, a1, a2, a3, a4]`.
pub fn moment_to_tail(a: [f64; 5], u: f64) -> Result<f64> {
    if !(u >= 2.0) {
        return Err(Error::invalid(format!(
            "moment-to-tail needs u >= 2, got {u}"
        )));
    }
    if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(
            "coefficients must be finite and nonnegative",
        ));
    }
    let [a0, a1, a2, a3, a4] = a;
    Ok(E * (a4 * u * u + a3 * u.powf(1.5) + a2 * u + a1 * u.sqrt() + a0))
}

/// `C (a0 + a1 sqrt p + a2 p)` for `p >= 1`.
pub fn tail_to_moment(a0: f64, a1: f64, a2: f64, p: f64, c: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!(
            "tail-to-moment needs p >= 1, got {p}"
        )));
    }
    if [a0, a1, a2].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(
            "coefficients must be finite and nonnegative",
        ));
    }
    Ok(c * (a0 + a1 * p.sqrt() + a2 * p))
}

/// Finite-support law of a real random variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ScalarLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::invalid(
                "scalar law needs matching nonempty values and probabilities",
            ));
        }
        if values.iter().any(|v| !v.is_finite())
            || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::invalid(
                "scalar law entries must be finite, probabilities nonnegative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { values, probs })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn abs_moment(&self, q: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * v.abs().powf(q))
            .sum()
    }
}

/// Both sides of `q^(aq) sum E|xi|^q <= 2 (1 + q^a) max(q^(aq) E max |xi|^q, (sum E|xi|)^q)`.
/// `value` is the right side, the oracle the left side.
pub fn sum_max_bound(xi: &[ScalarLaw], q: f64, alpha: f64) -> Result<BoundReport> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::invalid(format!("sum-max needs q > 1, got {q}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "sum-max needs alpha >= 0, got {alpha}"
        )));
    }
    if xi.is_empty() {
        return Err(Error::invalid("need at least one variable"));
    }
    let qa = q.powf(alpha * q);
    let lhs = qa * xi.iter().map(|x| x.abs_moment(q)).sum::<f64>();
    let laws: Vec<_> = xi
        .iter()
        .map(|x| {
            (
                x.values.iter().map(|v| v.abs().powf(q)).collect(),
                x.probs.clone(),
            )
        })
        .collect();
    let emax = expect_max_independent(&laws);
    let mean_sum: f64 = xi.iter().map(|x| x.abs_moment(1.0)).sum();
    let coef = 2.0 * (1.0 + q.powf(alpha));
    let mut rep = BoundReport::new("sum_max", q, BoundKind::Upper);
    rep.value = coef * (qa * emax).max(mean_sum.powf(q));
    rep.term("max_term", qa * emax)
        .term("mean_term", mean_sum.powf(q))
        .term("alpha", alpha)
        .constant("coef", coef);
    rep.r_convention = "none".into();
    let mut dg = InputDigest::new("sum_max");
    dg.f64(q).f64(alpha);
    for x in xi {
        for (v, p) in x.values.iter().zip(&x.probs) {
            dg.f64(*v).f64(*p);
        }
    }
    rep.inputs_digest = dg.finish();
    rep.attach_oracle(lhs, 0.0);
    Ok(rep)
}

/// `(E ||sum e_i A_i||^2)^(1/2) <= sqrt(e (1 + 2 ln d)) ||sum A_i^2||^(1/2)`,
/// with the left side enumerated over `2^n` signs.
pub fn khintchine_series_bound(a: &[HermMatrix]) -> Result<BoundReport> {
    let d = a
        .first()
        .map(HermMatrix::dim)
        .ok_or_else(|| Error::invalid("need at least one matrix"))?;
    if a.iter().any(|m| m.dim() != d) {
        return Err(Error::invalid("matrices must share one dimension"));
    }
    let mut sq = HermMatrix::zeros(d);
    for m in a {
        sq += &m.square();
    }
    let coef = (E * (1.0 + 2.0 * (d as f64).ln())).sqrt();
    let mut rep = BoundReport::new("khintchine_series", 1.0, BoundKind::Upper);
    rep.value = coef * sq.spectral_norm().sqrt();
    rep.term("sum_sq_norm", sq.spectral_norm())
        .constant("coef", coef);
    rep.r_convention = "1+2log d".into();
    let mut dg = InputDigest::new("khintchine_series");
    for m in a {
        dg.herm(m);
    }
    rep.inputs_digest = dg.finish();
    let space = ProductSpace::iid(&[0.5, 0.5], a.len());
    let m2 = space.expect(DEFAULT_CONFIG_CAP, |idx| {
        let mut s = HermMatrix::zeros(d);
        for (m, &k) in a.iter().zip(idx) {
            s += &m.scaled(sign_of(k));
        }
        s.spectral_norm().powi(2)
    })?;
    rep.attach_oracle(m2.sqrt(), 0.0);
    Ok(rep)
}

/// Schatten-`2p` chaos bound
/// `E ||X||_{S_2p}^{2p} <= 2 (2 sqrt 2 p / e)^{2p} max(tr (GG*)^p, tr (sum A^2)^p)`,
/// reported after taking `1/(2p)`-th roots of both sides.
pub fn schatten_chaos_bound(a: &ChaosCoefficients, p: u32) -> Result<BoundReport> {
    if p == 0 {
        return Err(Error::invalid("Schatten exponent p must be >= 1"));
    }
    let pf = p as f64;
    let n = a.n();
    let gg = assemble_block_g(a).gram();
    let mut sq = HermMatrix::zeros(a.d());
    for b in a.blocks() {
        sq += &b.square();
    }
    let tg = gg.trace_power(pf);
    let ts = sq.trace_power(pf);
    let coef = 2.0 * (2.0 * SQRT_2 * pf / E).powf(2.0 * pf);
    let mut rep = BoundReport::new("schatten_chaos", pf, BoundKind::Upper);
    rep.value = (coef * tg.max(ts)).powf(1.0 / (2.0 * pf));
    rep.term("trace_gg_p", tg)
        .term("trace_sum_sq_p", ts)
        .constant("coef", coef);
    rep.r_convention = "p".into();
    rep.inputs_digest = InputDigest::new("schatten_chaos")
        .coefficients(a)
        .u64(p as u64)
        .finish();
    let space = ProductSpace::iid(&[0.5, 0.5], 2 * n);
    let m = space.expect(DEFAULT_CONFIG_CAP, |idx| {
        let signs: Vec<f64> = idx.iter().map(|&k| sign_of(k)).collect();
        a.evaluate(&signs[..n], &signs[n..])
            .schatten_norm(2.0 * pf)
            .powf(2.0 * pf)
    })?;
    rep.attach_oracle(m.powf(1.0 / (2.0 * pf)), 0.0);
    Ok(rep)
}
