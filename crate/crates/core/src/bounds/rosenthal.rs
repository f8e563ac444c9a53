//! Rosenthal-type moment bounds for sums of independent random matrices.

use std::f64::consts::{E, SQRT_2};

use crate::bounds::{r_log_d, BoundKind, BoundReport, R_LOG_D};
use crate::chaos::check_q;
use crate::digest::InputDigest;
use crate::enumerate::{expect_max_independent, ProductSpace, DEFAULT_CONFIG_CAP};
use crate::error::{Error, Result};
use crate::linalg::HermMatrix;

/// Finite-support law of one Hermitian summand.
#[derive(Clone, Debug, PartialEq)]
pub struct SummandLaw {
    values: Vec<HermMatrix>,
    probs: Vec<f64>,
}

impl SummandLaw {
    pub fn new(values: Vec<HermMatrix>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::invalid(
                "summand law needs matching nonempty values and probabilities",
            ));
        }
        let d = values[0].dim();
        if values.iter().any(|v| v.dim() != d) {
            return Err(Error::invalid("summand values must share one dimension"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "probabilities must be finite and nonnegative",
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

    pub fn constant(value: HermMatrix) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    /// `e A` with `e` a fair sign.
    pub fn rademacher(a: HermMatrix) -> Self {
        Self {
            values: vec![a.clone(), a.scaled(-1.0)],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn values(&self) -> &[HermMatrix] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> HermMatrix {
        let mut m = HermMatrix::zeros(self.dim());
        for (v, &p) in self.values.iter().zip(&self.probs) {
            m += &v.scaled(p);
        }
        m
    }

    pub fn centered(&self) -> Self {
        let m = self.mean();
        Self {
            values: self.values.iter().map(|v| v - &m).collect(),
            probs: self.probs.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.scaled(c)).collect(),
            probs: self.probs.clone(),
        }
    }

    /// `E Y^2`.
    pub fn second_moment(&self) -> HermMatrix {
        let mut m = HermMatrix::zeros(self.dim());
        for (v, &p) in self.values.iter().zip(&self.probs) {
            m += &v.square().scaled(p);
        }
        m
    }

    /// Law of `||Y||^power` as `(values, probs)`.
    pub fn norm_power_law(&self, power: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.values
                .iter()
                .map(|v| v.spectral_norm().powf(power))
                .collect(),
            self.probs.clone(),
        )
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.is_psd(tol))
    }
}

pub(crate) fn check_summands(ys: &[SummandLaw]) -> Result<usize> {
    let d = ys
        .first()
        .map(SummandLaw::dim)
        .ok_or_else(|| Error::invalid("need at least one summand"))?;
    if ys.iter().any(|y| y.dim() != d) {
        return Err(Error::invalid("summands must share one dimension"));
    }
    Ok(d)
}

pub(crate) fn summands_digest(tag: &str, ys: &[SummandLaw], q: f64) -> String {
    let mut dg = InputDigest::new(tag);
    dg.f64(q).u64(ys.len() as u64);
    for y in ys {
        dg.u64(y.values.len() as u64);
        for (v, &p) in y.values.iter().zip(&y.probs) {
            dg.herm(v).f64(p);
        }
    }
    dg.finish()
}

/// `E f(||sum_i Y_i||)` by enumerating the product of the summand supports.
pub(crate) fn expect_sum_norm(
    ys: &[SummandLaw],
    cap: u64,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<(f64, u64)> {
    let d = check_summands(ys)?;
    let space = ProductSpace::new(ys.iter().map(|y| y.probs.as_slice()).collect());
    let configs = space.check_cap(cap)?;
    let mean = space.expect(cap, |idx| {
        let mut s = HermMatrix::zeros(d);
        for (y, &k) in ys.iter().zip(idx) {
            s += &y.values[k];
        }
        f(s.spectral_norm())
    })?;
    Ok((mean, configs))
}

fn integer_note(report: &mut BoundReport, q: f64) {
    if q.fract() != 0.0 {
        report.note(format!(
            "stated for integer q; evaluated at non-integer q={q}"
        ));
    }
}

pub fn rosenthal_moment_bound(ys: &[SummandLaw], q: f64) -> Result<BoundReport> {
    rosenthal_moment_bound_capped(ys, q, DEFAULT_CONFIG_CAP)
}

/// `2 sqrt(e r) ||sum E Z_i^2||^(1/2) + 4 sqrt 2 e r (E max ||Z_i||^(2q))^(1/(2q))`
/// with `Z_i = Y_i - E Y_i`, compared with the enumerated
/// `(E ||sum Z_i||^(2q))^(1/(2q))`.
pub fn rosenthal_moment_bound_capped(ys: &[SummandLaw], q: f64, cap: u64) -> Result<BoundReport> {
    check_q(q)?;
    let d = check_summands(ys)?;
    let zs: Vec<SummandLaw> = ys.iter().map(SummandLaw::centered).collect();
    let r = r_log_d(q, d);
    let mut var = HermMatrix::zeros(d);
    for z in &zs {
        var += &z.second_moment();
    }
    let sigma = var.spectral_norm().sqrt();
    let laws: Vec<_> = zs.iter().map(|z| z.norm_power_law(2.0 * q)).collect();
    let max_term = expect_max_independent(&laws).powf(1.0 / (2.0 * q));
    let c1 = 2.0 * (E * r).sqrt();
    let c2 = 4.0 * SQRT_2 * E * r;

    let mut rep = BoundReport::new("rosenthal_moment", q, BoundKind::Upper);
    rep.term("variance", sigma)
        .term("max", max_term)
        .term("r", r)
        .constant("variance_coef", c1)
        .constant("max_coef", c2);
    rep.value = c1 * sigma + c2 * max_term;
    rep.r_convention = R_LOG_D.into();
    rep.inputs_digest = summands_digest("rosenthal_moment", ys, q);
    integer_note(&mut rep, q);

    let (mean, configs) = expect_sum_norm(&zs, cap, |x| x.powf(2.0 * q))?;
    rep.oracle_detail
        .insert("oracle_configs".into(), configs as f64);
    rep.attach_oracle(mean.powf(1.0 / (2.0 * q)), 0.0);
    Ok(rep)
}

pub fn rosenthal_psd_bound(ys: &[SummandLaw], q: f64) -> Result<BoundReport> {
    rosenthal_psd_bound_capped(ys, q, DEFAULT_CONFIG_CAP)
}

/// `||sum E Y_j||^(1/2) + 2 sqrt(2 e r) (E max ||Y_j||^q)^(1/(2q))` for PSD
/// summands, compared with the enumerated `(E ||sum Y_j||^q)^(1/(2q))`.
pub fn rosenthal_psd_bound_capped(ys: &[SummandLaw], q: f64, cap: u64) -> Result<BoundReport> {
    check_q(q)?;
    let d = check_summands(ys)?;
    if let Some(k) = ys.iter().position(|y| !y.is_psd(1e-12)) {
        return Err(Error::invalid(format!(
            "summand {k} has a support point that is not PSD"
        )));
    }
    let r = r_log_d(q, d);
    let mut mean = HermMatrix::zeros(d);
    for y in ys {
        mean += &y.mean();
    }
    let mean_term = mean.spectral_norm().sqrt();
    let laws: Vec<_> = ys.iter().map(|y| y.norm_power_law(q)).collect();
    let max_term = expect_max_independent(&laws).powf(1.0 / (2.0 * q));
    let coef = 2.0 * (2.0 * E * r).sqrt();

    let mut rep = BoundReport::new("rosenthal_psd", q, BoundKind::Upper);
    rep.term("mean", mean_term)
        .term("max", max_term)
        .term("r", r)
        .constant("max_coef", coef);
    rep.value = mean_term + coef * max_term;
    rep.r_convention = R_LOG_D.into();
    rep.inputs_digest = summands_digest("rosenthal_psd", ys, q);

    let (m, configs) = expect_sum_norm(ys, cap, |x| x.powf(q))?;
    rep.oracle_detail
        .insert("oracle_configs".into(), configs as f64);
    rep.attach_oracle(m.powf(1.0 / (2.0 * q)), 0.0);
    Ok(rep)
}
