//! Matrix Bernstein tail bound and the moment bound obtained from it
//! through the tail-to-moment conversion.

use serde::{Deserialize, Serialize};

use crate::bounds::rosenthal::{check_summands, expect_sum_norm, summands_digest, SummandLaw};
use crate::bounds::tools::tail_to_moment;
use crate::bounds::{BoundKind, BoundReport, Constants};
use crate::chaos::check_q;
use crate::enumerate::DEFAULT_CONFIG_CAP;
use crate::error::{Error, Result};
use crate::linalg::HermMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub threshold: f64,
    /// Clamped to `[0, 1]`.
    pub prob: f64,
}

fn check_scale(sigma2: f64, b: f64, d: usize) -> Result<()> {
    if !(sigma2 >= 0.0 && b >= 0.0 && sigma2.is_finite() && b.is_finite()) {
        return Err(Error::invalid(
            "sigma^2 and B must be finite and nonnegative",
        ));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    Ok(())
}

/// `P(||sum Z_i|| >= 2 sigma sqrt u + (4/3) B u) <= 2 d e^-u`.
pub fn bernstein_tail_bound(sigma2: f64, b: f64, d: usize, u: f64) -> Result<TailBound> {
    check_scale(sigma2, b, d)?;
    if !(u > 0.0) {
        return Err(Error::invalid(format!("u must be positive, got {u}")));
    }
    Ok(TailBound {
        threshold: 2.0 * sigma2.sqrt() * u.sqrt() + 4.0 / 3.0 * b * u,
        prob: (2.0 * d as f64 * (-u).exp()).min(1.0),
    })
}

/// `C_2 (sqrt(q + ln 2d) sigma + (q + ln 2d) B)` bounding
/// `(E ||sum Z_i||^q)^(1/q)`.
///
/// Setting `u = v + ln 2d` in the tail bound gives a tail
/// `a0 + a1 sqrt v + a2 v` with `a0 = 2 sigma sqrt(ln 2d) + (4/3) B ln 2d`,
/// `a1 = 2 sigma`, `a2 = (4/3) B`. The conversion with constant `C` yields
/// at most `2 sqrt 2 C (sqrt(q + ln 2d) sigma + (q + ln 2d) B)`, so the
/// composed default is `C_2 = 2 sqrt 2 C`. The report carries the tighter
/// intermediate `C (a0 + a1 sqrt q + a2 q)` as a term.
pub fn bernstein_moment_bound(
    sigma2: f64,
    b: f64,
    d: usize,
    q: f64,
    constants: &Constants,
) -> Result<BoundReport> {
    check_scale(sigma2, b, d)?;
    check_q(q)?;
    let sigma = sigma2.sqrt();
    let l = (2.0 * d as f64).ln();
    let c2 = constants.bernstein_c2();
    let composed = tail_to_moment(
        2.0 * sigma * l.sqrt() + 4.0 / 3.0 * b * l,
        2.0 * sigma,
        4.0 / 3.0 * b,
        q,
        constants.tail_to_moment_c,
    )?;
    let mut rep = BoundReport::new("bernstein_moment", q, BoundKind::Upper);
    rep.value = c2 * ((q + l).sqrt() * sigma + (q + l) * b);
    rep.term("sigma", sigma)
        .term("B", b)
        .term("log2d", l)
        .term("composed", composed)
        .constant("C2", c2)
        .constant("tail_to_moment_c", constants.tail_to_moment_c);
    rep.r_convention = "q+log(2d)".into();
    if constants.bernstein_c2.is_none() {
        rep.note(format!(
            "C2 composed as 2*sqrt(2)*C with C={}",
            constants.tail_to_moment_c
        ));
    }
    Ok(rep)
}

/// `sigma^2 = ||sum E Z_i^2||` and `B = max ||Z_i||` over the support.
pub fn bernstein_parameters(ys: &[SummandLaw]) -> Result<(f64, f64, usize)> {
    let d = check_summands(ys)?;
    let mut var = HermMatrix::zeros(d);
    let mut b: f64 = 0.0;
    for y in ys {
        let z = y.centered();
        var += &z.second_moment();
        for (v, &p) in z.values().iter().zip(z.probs()) {
            if p > 0.0 {
                b = b.max(v.spectral_norm());
            }
        }
    }
    Ok((var.spectral_norm(), b, d))
}

/// [`bernstein_moment_bound`] with parameters read off the summands and the
/// enumerated `(E ||sum Z_i||^q)^(1/q)` attached as oracle.
pub fn bernstein_moment_report(
    ys: &[SummandLaw],
    q: f64,
    constants: &Constants,
) -> Result<BoundReport> {
    let (sigma2, b, d) = bernstein_parameters(ys)?;
    let mut rep = bernstein_moment_bound(sigma2, b, d, q, constants)?;
    rep.inputs_digest = summands_digest("bernstein_moment", ys, q);
    let zs: Vec<SummandLaw> = ys.iter().map(SummandLaw::centered).collect();
    let (m, configs) = expect_sum_norm(&zs, DEFAULT_CONFIG_CAP, |x| x.powf(q))?;
    rep.oracle_detail
        .insert("oracle_configs".into(), configs as f64);
    let oracle = m.powf(1.0 / q);
    rep.attach_oracle(oracle, 0.0);
    if rep.get_term("composed") < oracle * (1.0 - 1e-9) {
        rep.note("composed intermediate bound fell below the oracle");
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Verdict;

    #[test]
    fn tail_arithmetic() {
        let t = bernstein_tail_bound(1.0, 1.0, 2, 1.0).unwrap();
        assert!((t.threshold - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.prob, 1.0);
        let mut last = 1.0;
        for u in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let p = bernstein_tail_bound(1.0, 1.0, 2, u).unwrap().prob;
            assert!(p <= last);
            last = p;
        }
        assert!(last < 1e-12);
        assert!(bernstein_tail_bound(1.0, 1.0, 2, 0.0).is_err());
    }

    #[test]
    fn moment_zero_and_monotone() {
        let c = Constants::default();
        assert_eq!(
            bernstein_moment_bound(0.0, 0.0, 3, 2.0, &c).unwrap().value,
            0.0
        );
        let base = bernstein_moment_bound(1.0, 0.5, 2, 1.0, &c).unwrap().value;
        assert!(bernstein_moment_bound(1.0, 0.5, 2, 2.0, &c).unwrap().value > base);
        assert!(bernstein_moment_bound(2.0, 0.5, 2, 1.0, &c).unwrap().value > base);
        assert!(bernstein_moment_bound(1.0, 0.6, 2, 1.0, &c).unwrap().value > base);
        assert!(bernstein_moment_bound(1.0, 0.5, 3, 1.0, &c).unwrap().value > base);
    }

    #[test]
    fn composed_constant() {
        let c = Constants::default();
        let r = bernstein_moment_bound(1.0, 1.0, 1, 1.0, &c).unwrap();
        assert!((r.constants["C2"] - 2.0 * std::f64::consts::SQRT_2 * 4.0).abs() < 1e-15);
        assert!(r.get_term("composed") <= r.value);
    }

    #[test]
    fn three_summand_oracle() {
        let a = HermMatrix::from_real_rows(2, &[1.0, 0.5, 0.5, 0.0]).unwrap();
        let ys: Vec<_> = (0..3)
            .map(|k| SummandLaw::rademacher(a.scaled(0.5 + k as f64)))
            .collect();
        for q in [1.0, 2.0, 3.0] {
            let r = bernstein_moment_report(&ys, q, &Constants::default()).unwrap();
            assert_eq!(r.verdict, Verdict::Verified, "{r:?}");
        }
    }
}
