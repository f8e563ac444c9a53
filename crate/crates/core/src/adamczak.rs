//! Adamczak-type moment and tail inequality for degenerate order-2 matrix
//! U-statistics: the terms `A, B, Gamma, D`, their simplified forms, and the
//! supremum over the unit sphere that `B` requires.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::theorem::{u_moment, KernelTerms, OracleSpec};
use crate::bounds::{BoundKind, BoundReport, Constants, Verdict, R_LOG_ED};
use crate::chaos::check_q;
use crate::digest::InputDigest;
use crate::enumerate::replica_rng;
use crate::error::{Error, Result};
use crate::linalg::{CVector, HermMatrix, C64};
use crate::ustat::{
    require_degenerate, DiscreteDistribution, KernelTable, Mode, DEFAULT_DEGENERACY_TOL,
};

pub const DEFAULT_RESTARTS: usize = 32;
const MAX_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-10;

/// `f(phi) = sum_k w_k (phi* M_k phi)^2` over unit vectors `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereObjective {
    d: usize,
    terms: Vec<(f64, HermMatrix)>,
}

impl SphereObjective {
    pub fn new(d: usize, terms: Vec<(f64, HermMatrix)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if terms
            .iter()
            .any(|(w, m)| m.dim() != d || !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::invalid(
                "objective terms need dimension d and nonnegative weights",
            ));
        }
        Ok(Self { d, terms })
    }

    /// `sum_{I_n^2} E (phi* H(X1, X2) phi)^2` for independent arguments.
    pub fn from_kernel(h: &KernelTable, law: &DiscreteDistribution) -> Result<Self> {
        h.check_law(law)?;
        let s = h.support_size();
        let p = law.probs();
        let mut terms = Vec::new();
        for (i1, i2) in h.pairs() {
            for x in 0..s {
                for y in 0..s {
                    let w = p[x] * p[y];
                    if w > 0.0 {
                        terms.push((w, h.get(i1, i2, x, y).clone()));
                    }
                }
            }
        }
        Self::new(h.d(), terms)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn value(&self, phi: &CVector) -> f64 {
        self.terms
            .iter()
            .map(|(w, m)| w * m.quadratic_form(phi).powi(2))
            .sum()
    }

    /// `sum_k w_k M_k^2`, whose norm bounds the supremum.
    pub fn relaxation_matrix(&self) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.d);
        for (w, m) in &self.terms {
            acc += &m.square().scaled(*w);
        }
        acc
    }

    fn gradient(&self, phi: &CVector) -> CVector {
        let mut g = CVector::zeros(self.d);
        for (w, m) in &self.terms {
            let mv = m.matrix() * phi;
            let a = phi.dotc(&mv).re;
            g += mv * C64::new(4.0 * w * a, 0.0);
        }
        g
    }

    /// Coefficients of `f` along the great circle `cos(t) phi + sin(t) u`
    /// as a trigonometric polynomial in `psi = 2t`:
    /// `c0 + c1 cos psi + s1 sin psi + c2 cos 2psi + s2 sin 2psi`.
    fn circle_coefficients(&self, phi: &CVector, u: &CVector) -> [f64; 5] {
        let mut c = [0.0; 5];
        for (w, m) in &self.terms {
            let a = m.quadratic_form(phi);
            let b = m.quadratic_form(u);
            let g = phi.dotc(&(m.matrix() * u)).re;
            let (al, be) = ((a + b) / 2.0, (a - b) / 2.0);
            c[0] += w * (al * al + (be * be + g * g) / 2.0);
            c[1] += w * 2.0 * al * be;
            c[2] += w * 2.0 * al * g;
            c[3] += w * (be * be - g * g) / 2.0;
            c[4] += w * be * g;
        }
        c
    }
}

fn trig_eval(c: &[f64; 5], psi: f64) -> f64 {
    c[0] + c[1] * psi.cos() + c[2] * psi.sin() + c[3] * (2.0 * psi).cos() + c[4] * (2.0 * psi).sin()
}

/// Global maximizer of the trigonometric polynomial on `[0, 2 pi)`.
fn trig_argmax(c: &[f64; 5]) -> f64 {
    const GRID: usize = 64;
    let mut best = (0.0, trig_eval(c, 0.0));
    for k in 1..GRID {
        let psi = 2.0 * PI * k as f64 / GRID as f64;
        let v = trig_eval(c, psi);
        if v > best.1 {
            best = (psi, v);
        }
    }
    let mut psi = best.0;
    for _ in 0..30 {
        let d1 = -c[1] * psi.sin() + c[2] * psi.cos() - 2.0 * c[3] * (2.0 * psi).sin()
            + 2.0 * c[4] * (2.0 * psi).cos();
        let d2 = -c[1] * psi.cos()
            - c[2] * psi.sin()
            - 4.0 * c[3] * (2.0 * psi).cos()
            - 4.0 * c[4] * (2.0 * psi).sin();
        if d2 >= 0.0 {
            break;
        }
        let step = d1 / d2;
        psi -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    if trig_eval(c, psi) >= best.1 {
        psi
    } else {
        best.0
    }
}

fn normalized(v: CVector) -> Option<CVector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / C64::new(n, 0.0))
}

/// Projected gradient ascent from `phi`, stepping by exact line search along
/// great circles.
fn ascend(obj: &SphereObjective, mut phi: CVector) -> f64 {
    let mut f = obj.value(&phi);
    for _ in 0..MAX_ITERS {
        let g = obj.gradient(&phi);
        let radial = phi.dotc(&g).re;
        let t = &g - &phi * C64::new(radial, 0.0);
        if t.norm() <= GRAD_TOL * f.max(1.0) {
            break;
        }
        let Some(u) = normalized(t) else { break };
        let c = obj.circle_coefficients(&phi, &u);
        let theta = trig_argmax(&c) / 2.0;
        let next = normalized(&phi * C64::new(theta.cos(), 0.0) + &u * C64::new(theta.sin(), 0.0));
        let Some(next) = next else { break };
        let fnext = obj.value(&next);
        if fnext <= f * (1.0 + 1e-15) {
            f = f.max(fnext);
            break;
        }
        phi = next;
        f = fnext;
    }
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSup {
    pub sup_estimate: f64,
    /// `||sum_k w_k M_k^2||`.
    pub relaxation: f64,
}

/// Estimates `sup_{|phi|=1} f(phi)` by ascent from the top eigenvector of
/// the relaxation matrix and from `restarts` seeded random starts; the
/// result is the largest value reached.
pub fn sphere_sup_estimate(obj: &SphereObjective, restarts: usize) -> SphereSup {
    let relax = obj.relaxation_matrix();
    let relaxation = relax.spectral_norm();
    let d = obj.dim();
    let eig = relax.matrix().clone().symmetric_eigen();
    let top = (0..d)
        .max_by(|&i, &j| {
            eig.eigenvalues[i]
                .abs()
                .total_cmp(&eig.eigenvalues[j].abs())
        })
        .unwrap_or(0);
    let mut starts = vec![eig.eigenvectors.column(top).into_owned()];
    for k in 0..d {
        let mut e = CVector::zeros(d);
        e[k] = C64::new(1.0, 0.0);
        starts.push(e);
    }
    for r in 0..restarts {
        let mut rng = replica_rng(0x5eed_5fe7e, r as u64);
        let v = CVector::from_fn(d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        if let Some(v) = normalized(v) {
            starts.push(v);
        }
    }
    let sup_estimate = starts
        .into_par_iter()
        .filter_map(normalized)
        .map(|phi| ascend(obj, phi))
        .reduce(|| 0.0, f64::max);
    SphereSup {
        sup_estimate,
        relaxation,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdamczakVariant {
    Full,
    Simplified,
}

impl AdamczakVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AdamczakVariant::Full => "full",
            AdamczakVariant::Simplified => "simplified",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamczakTerms {
    pub q: f64,
    pub d: usize,
    pub variant: AdamczakVariant,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d_term: f64,
    /// `E ||U_n||` proxy assembled from the same ingredients.
    pub mean_norm_estimate: f64,
    /// `||sum E H^2||^(1/2)`, the closed-form bound on `B`.
    pub b_relaxation: f64,
    /// `Gamma` with the outer expectation inside the `q`-th power.
    pub gamma_jensen: f64,
    pub exact: bool,
}

/// `log(de) (T_G + T_var + sqrt(log(de)) T_max)` at `q = 1`: the mean-norm
/// estimate with `log d` read as `log(de)` so that it stays positive at `d = 1`.
pub fn mean_norm_estimate(terms_q1: &KernelTerms) -> f64 {
    let l = 1.0 + (terms_q1.d as f64).ln();
    l * (terms_q1.t_g + terms_q1.t_var + l.sqrt() * terms_q1.t_max)
}

/// Row-sum counterpart of [`mean_norm_estimate`].
pub fn mean_norm_row_estimate(terms_q1: &KernelTerms) -> f64 {
    let l = 1.0 + (terms_q1.d as f64).ln();
    l * (terms_q1.t_row + l.sqrt() * terms_q1.t_rowmax)
}

pub fn adamczak_terms(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    variant: AdamczakVariant,
    spec: &OracleSpec,
) -> Result<AdamczakTerms> {
    check_q(q)?;
    require_degenerate(h, law, DEFAULT_DEGENERACY_TOL)?;
    let tq = KernelTerms::compute(h, law, q, spec)?;
    let t1 = if q == 1.0 {
        tq.clone()
    } else {
        KernelTerms::compute(h, law, 1.0, spec)?
    };
    let sup = sphere_sup_estimate(&SphereObjective::from_kernel(h, law)?, DEFAULT_RESTARTS);
    Ok(assemble_terms(&tq, &t1, sup, variant))
}

/// Terms from kernel functionals at `q` and at `q = 1`.
pub fn assemble_terms(
    tq: &KernelTerms,
    t1: &KernelTerms,
    sup: SphereSup,
    variant: AdamczakVariant,
) -> AdamczakTerms {
    let q = tq.q;
    let l = 1.0 + (tq.d as f64).ln();
    let fac = 1.0 + (tq.d as f64).ln() / q;
    let root = 1.0 / (2.0 * q);
    let inner = (t1.t_g.powi(2) + t1.t_var.powi(2)).sqrt();
    let (a, g_pre, d_term) = match variant {
        AdamczakVariant::Full => (
            l.sqrt() * inner + l * t1.t_max,
            fac.sqrt(),
            tq.d_sum.powf(root) + fac * tq.t_rowmax,
        ),
        AdamczakVariant::Simplified => (l * inner, l.powf(1.5), l * tq.d_sum.powf(root)),
    };
    AdamczakTerms {
        q,
        d: tq.d,
        variant,
        a,
        b: sup.sup_estimate.max(0.0).sqrt(),
        gamma: g_pre * tq.gamma_inner.powf(root),
        d_term,
        mean_norm_estimate: mean_norm_estimate(t1),
        b_relaxation: sup.relaxation.sqrt(),
        gamma_jensen: g_pre * tq.gamma_inner_jensen.powf(root),
        exact: tq.exact && t1.exact,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdamczakForm {
    Moment,
    Tail,
}

/// `C (mean + sqrt(q) A + q B + q^(3/2) Gamma + q^2 D)`; in the tail form
/// `q` is `t >= 2` and the value is a threshold exceeded with probability at
/// most `e^-t`. `C` is unspecified, so the report is recorded, not asserted.
pub fn adamczak_moment_tail(
    terms: &AdamczakTerms,
    mean: f64,
    q_or_t: f64,
    form: AdamczakForm,
    constants: &Constants,
) -> Result<BoundReport> {
    match form {
        AdamczakForm::Moment => check_q(q_or_t)?,
        AdamczakForm::Tail if !(q_or_t >= 2.0 && q_or_t.is_finite()) => {
            return Err(Error::invalid(format!(
                "tail form needs t >= 2, got {q_or_t}"
            )))
        }
        AdamczakForm::Tail => {}
    }
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid("mean must be finite and nonnegative"));
    }
    let x = q_or_t;
    let c = constants.adamczak_c;
    let name = match form {
        AdamczakForm::Moment => "adamczak_moment",
        AdamczakForm::Tail => "adamczak_tail",
    };
    let kind = match form {
        AdamczakForm::Moment => BoundKind::Recorded,
        AdamczakForm::Tail => BoundKind::Tail,
    };
    let mut rep = BoundReport::new(name, x, kind);
    rep.variant = Some(terms.variant.name().into());
    rep.value = c
        * (mean
            + x.sqrt() * terms.a
            + x * terms.b
            + x.powf(1.5) * terms.gamma
            + x * x * terms.d_term);
    rep.term("mean", mean)
        .term("A", terms.a)
        .term("B", terms.b)
        .term("Gamma", terms.gamma)
        .term("D", terms.d_term)
        .term("B_relaxation", terms.b_relaxation)
        .term("Gamma_jensen", terms.gamma_jensen)
        .constant("C", c);
    if form == AdamczakForm::Tail {
        rep.term("prob", (-x).exp());
    }
    rep.r_convention = R_LOG_ED.into();
    if (terms.gamma - terms.gamma_jensen).abs() > 1e-12 * terms.gamma.max(1.0) {
        rep.note(format!(
            "Gamma with the expectation inside the power is {:.6e} against {:.6e}",
            terms.gamma_jensen, terms.gamma
        ));
    }
    if !terms.exact {
        rep.note("kernel terms estimated by Monte Carlo");
    }
    Ok(rep)
}

/// Terms, assembly with the mean-norm estimate, and the coupled moment as
/// oracle. The ratio is what calibrates `C`.
pub fn adamczak_report(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    variant: AdamczakVariant,
    spec: &OracleSpec,
    constants: &Constants,
) -> Result<BoundReport> {
    let terms = adamczak_terms(h, law, q, variant, spec)?;
    let mut rep = adamczak_moment_tail(
        &terms,
        terms.mean_norm_estimate,
        q,
        AdamczakForm::Moment,
        constants,
    )?;
    rep.inputs_digest = InputDigest::new(&format!("adamczak_{}", variant.name()))
        .kernel(h)
        .law(law)
        .f64(q)
        .finish();
    let m = u_moment(h, law, q, Mode::Coupled, spec)?;
    rep.attach_moment(&m);
    Ok(rep)
}

/// Smallest `C` making every recorded Adamczak moment assembly dominate its
/// oracle: `max oracle / (value / C)`. Infinite if some assembly vanishes
/// while its oracle does not.
pub fn calibrate_constant<'a>(reports: impl IntoIterator<Item = &'a BoundReport>) -> f64 {
    let mut c: f64 = 0.0;
    for r in reports {
        if r.bound_name != "adamczak_moment" {
            continue;
        }
        let Some(oracle) = r.oracle_value else {
            continue;
        };
        let used = r.constants.get("C").copied().unwrap_or(1.0);
        let base = r.value / used;
        if oracle > 0.0 {
            c = c.max(if base > 0.0 {
                oracle / base
            } else {
                f64::INFINITY
            });
        }
    }
    c
}

/// Re-evaluates a recorded Adamczak report with constant `c`; the verdict
/// then asserts the upper bound.
pub fn with_constant(rep: &BoundReport, c: f64) -> BoundReport {
    let mut out = rep.clone();
    let used = rep.constants.get("C").copied().unwrap_or(1.0);
    out.value = rep.value / used * c;
    out.constants.insert("C".into(), c);
    out.kind = BoundKind::Upper;
    out.verdict = Verdict::Unchecked;
    if let Some(o) = rep.oracle_value {
        let stderr = rep
            .oracle_detail
            .get("oracle_stderr")
            .copied()
            .unwrap_or(0.0);
        out.attach_oracle(o, stderr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::ChaosCoefficients;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_dimensional_sphere() {
        let obj = SphereObjective::new(
            1,
            vec![
                (0.5, HermMatrix::diag(&[2.0])),
                (0.5, HermMatrix::diag(&[-1.0])),
            ],
        )
        .unwrap();
        let s = sphere_sup_estimate(&obj, 4);
        assert_abs_diff_eq!(s.sup_estimate, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.relaxation, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn trig_argmax_finds_global() {
        let c = [0.0, 0.1, 0.0, -1.0, 0.0];
        let psi = trig_argmax(&c);
        for k in 0..1000 {
            assert!(trig_eval(&c, psi) >= trig_eval(&c, k as f64 * 2.0 * PI / 1000.0) - 1e-14);
        }
    }

    #[test]
    fn zero_kernel() {
        let law = DiscreteDistribution::rademacher();
        let h = KernelTable::zeros(3, 2, 2).unwrap();
        for v in [AdamczakVariant::Full, AdamczakVariant::Simplified] {
            let t = adamczak_terms(&h, &law, 1.0, v, &OracleSpec::default()).unwrap();
            assert_eq!(
                (t.a, t.b, t.gamma, t.d_term, t.mean_norm_estimate),
                (0.0, 0.0, 0.0, 0.0, 0.0)
            );
            let r = adamczak_moment_tail(&t, 0.0, 1.0, AdamczakForm::Moment, &Constants::default())
                .unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn tail_needs_t_at_least_two() {
        let law = DiscreteDistribution::rademacher();
        let h = KernelTable::zeros(2, 1, 2).unwrap();
        let t =
            adamczak_terms(&h, &law, 1.0, AdamczakVariant::Full, &OracleSpec::default()).unwrap();
        let c = Constants::default();
        assert!(adamczak_moment_tail(&t, 0.0, 1.5, AdamczakForm::Tail, &c).is_err());
        assert!(adamczak_moment_tail(&t, 0.0, 2.0, AdamczakForm::Tail, &c).is_ok());
    }

    #[test]
    fn product_kernel_report() {
        let law = DiscreteDistribution::rademacher();
        let a = ChaosCoefficients::from_fn(3, 2, |i, j| {
            HermMatrix::from_real_rows(2, &[1.0, (i * j) as f64, (i * j) as f64, 0.5])
        })
        .unwrap();
        let h = KernelTable::product(&a, &law).unwrap();
        let r = adamczak_report(
            &h,
            &law,
            1.0,
            AdamczakVariant::Full,
            &OracleSpec::default(),
            &Constants::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Recorded);
        let c = calibrate_constant([&r]);
        assert!(c.is_finite() && c > 0.0);
        let cal = with_constant(&r, c);
        assert_eq!(cal.verdict, Verdict::Verified);
        assert!(r.get_term("B") <= r.get_term("B_relaxation") + 1e-8);
    }
}
