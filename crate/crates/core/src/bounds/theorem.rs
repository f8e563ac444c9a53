//! Moment bounds for degenerate order-2 matrix U-statistics, the matching
//! lower bound, and the concentration tail derived from them.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::bounds::bernstein::TailBound;
use crate::bounds::tools::moment_to_tail;
use crate::bounds::{r_log_ed, BoundKind, BoundReport, Constants, Verdict, R_LOG_ED};
use crate::chaos::{check_q, MomentEstimate};
use crate::digest::InputDigest;
use crate::enumerate::{expect_max_independent, power_of_mean, ProductSpace, DEFAULT_CONFIG_CAP};
use crate::error::{Error, Result};
use crate::linalg::HermMatrix;
use crate::ustat::{
    e2_gg_star_unchecked, exact_u_moment_capped, mc_u_moment, require_degenerate,
    DiscreteDistribution, KernelTable, Mode, DEFAULT_DEGENERACY_TOL,
};

/// How expectations are evaluated: exhaustively up to `cap` configurations,
/// otherwise by Monte Carlo with `mc_replicas` draws from `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub cap: u64,
    pub mc_replicas: u64,
    pub seed: u64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CONFIG_CAP,
            mc_replicas: 20_000,
            seed: 0,
        }
    }
}

impl OracleSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// `(E f)^(1/(2q))`: exact if the space fits under the cap, else Monte Carlo.
/// Returns `(value, stderr)`.
fn root_of_mean<F>(
    space: &ProductSpace<'_>,
    q: f64,
    spec: &OracleSpec,
    salt: u64,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let expo = 1.0 / (2.0 * q);
    if space.count() <= spec.cap as u128 {
        Ok((space.expect(spec.cap, f)?.max(0.0).powf(expo), 0.0))
    } else {
        if spec.mc_replicas == 0 {
            return Err(Error::Capacity {
                needed: space.count(),
                cap: spec.cap,
            });
        }
        let vals = space.sample_values(spec.mc_replicas, spec.seed ^ salt, f);
        Ok(power_of_mean(&vals, expo))
    }
}

/// `T_max = (E max_{i1} ||sum_{i2} H^2(X1_{i1}, X2_{i2})||^q)^(1/(2q))` over
/// the `s^(2n)` decoupled configurations, as `(value, stderr)`.
pub fn t_max_term(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    spec: &OracleSpec,
) -> Result<(f64, f64)> {
    check_q(q)?;
    h.check_law(law)?;
    let (n, s, d) = (h.n(), h.support_size(), h.d());
    let mut sq = vec![HermMatrix::zeros(d); n * n * s * s];
    for (i1, i2) in h.pairs() {
        for x in 0..s {
            for y in 0..s {
                sq[((i1 * n + i2) * s + x) * s + y] = h.get(i1, i2, x, y).square();
            }
        }
    }
    let space = ProductSpace::iid(law.probs(), 2 * n);
    root_of_mean(&space, q, spec, 0x11, |idx| {
        let (x1, x2) = idx.split_at(n);
        (0..n)
            .map(|i1| {
                let mut acc = HermMatrix::zeros(d);
                for i2 in (0..n).filter(|&i2| i2 != i1) {
                    acc += &sq[((i1 * n + i2) * s + x1[i1]) * s + x2[i2]];
                }
                acc.spectral_norm()
            })
            .fold(0.0, f64::max)
            .powf(q)
    })
}

/// `T_G = (E ||E_2 G~ G~*||^q)^(1/(2q))` over the `s^n` first-sample
/// configurations, as `(value, stderr)`.
pub fn t_g_term(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    spec: &OracleSpec,
) -> Result<(f64, f64)> {
    check_q(q)?;
    h.check_law(law)?;
    let space = ProductSpace::iid(law.probs(), h.n());
    root_of_mean(&space, q, spec, 0x22, |x1| {
        e2_gg_star_unchecked(h, law, x1).spectral_norm().powf(q)
    })
}

/// `T_row = (sum_{i1} E ||sum_{i2} E_2 H^2(X_{i1}, .)||)^(1/2)`, always exact.
pub fn t_row_term(h: &KernelTable, law: &DiscreteDistribution) -> Result<f64> {
    h.check_law(law)?;
    let (n, s, d) = (h.n(), h.support_size(), h.d());
    let mut row_sum = 0.0;
    for i1 in 0..n {
        for x in 0..s {
            let mut acc = HermMatrix::zeros(d);
            for i2 in (0..n).filter(|&i2| i2 != i1) {
                acc += &h.e2_square(law, i1, i2, x);
            }
            row_sum += law.probs()[x] * acc.spectral_norm();
        }
    }
    Ok(row_sum.sqrt())
}

/// The kernel functionals entering the bounds, evaluated at one `q`.
/// Names follow the reports: `t_*` terms already carry their outer roots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTerms {
    pub q: f64,
    pub n: usize,
    pub d: usize,
    /// `(E max_{i1} ||sum_{i2} H^2(X1_{i1}, X2_{i2})||^q)^(1/(2q))`.
    pub t_max: f64,
    pub t_max_stderr: f64,
    /// `||sum E H^2||^(1/2)`.
    pub t_var: f64,
    /// `(E ||E_2 G~ G~*||^q)^(1/(2q))`.
    pub t_g: f64,
    pub t_g_stderr: f64,
    /// `(E ||sum_{I_n^2} E_2 H^2(X1_{i1}, .)||^q)^(1/(2q))`.
    pub t_e2sum: f64,
    pub t_e2sum_stderr: f64,
    /// `(sum_{i1} E ||sum_{i2} E_2 H^2(X_{i1}, .)||)^(1/2)`.
    pub t_row: f64,
    /// `(E max_{i1} ||sum_{i2} E_2 H^2(X_{i1}, .)||^q)^(1/(2q))`.
    pub t_max_e2: f64,
    /// `(sum_{i1} E max_{i2} ||H^2(X1_{i1}, X2_{i2})||^q)^(1/(2q))`.
    pub t_rowmax: f64,
    /// `sum_{i1} E_1 ||sum_{i2} E_2 H^2(X_{i1}, .)||^q`.
    pub gamma_inner: f64,
    /// `sum_{i1} (E_1 ||sum_{i2} E_2 H^2(X_{i1}, .)||)^q`, the same sum with
    /// the outer expectation moved inside the power.
    pub gamma_inner_jensen: f64,
    /// `sum_{I_n^2} E ||H^2||^q`.
    pub d_sum: f64,
    /// All expectations were exact.
    pub exact: bool,
}

struct Tables {
    sq_norm: Vec<f64>,
    e2sq: Vec<HermMatrix>,
}

fn tables(h: &KernelTable, law: &DiscreteDistribution) -> Tables {
    let (n, s, d) = (h.n(), h.support_size(), h.d());
    let idx = |i1: usize, i2: usize, x: usize, y: usize| ((i1 * n + i2) * s + x) * s + y;
    let mut sq_norm = vec![0.0; n * n * s * s];
    let mut e2sq = vec![HermMatrix::zeros(d); n * n * s];
    for (i1, i2) in h.pairs() {
        for x in 0..s {
            for y in 0..s {
                let m = h.get(i1, i2, x, y).square();
                sq_norm[idx(i1, i2, x, y)] = m.spectral_norm();
                e2sq[(i1 * n + i2) * s + x] += &m.scaled(law.probs()[y]);
            }
        }
    }
    Tables { sq_norm, e2sq }
}

impl KernelTerms {
    pub fn compute(
        h: &KernelTable,
        law: &DiscreteDistribution,
        q: f64,
        spec: &OracleSpec,
    ) -> Result<Self> {
        check_q(q)?;
        h.check_law(law)?;
        let (n, s, d) = (h.n(), h.support_size(), h.d());
        let p = law.probs();
        let t = tables(h, law);
        let e2 = |i1: usize, i2: usize, x: usize| &t.e2sq[(i1 * n + i2) * s + x];
        let others = |i: usize| (0..n).filter(move |&j| j != i);

        let (t_max, t_max_stderr) = t_max_term(h, law, q, spec)?;
        let first = ProductSpace::iid(p, n);
        let (t_g, t_g_stderr) = t_g_term(h, law, q, spec)?;
        let (t_e2sum, t_e2sum_stderr) = root_of_mean(&first, q, spec, 0x33, |x1| {
            let mut acc = HermMatrix::zeros(d);
            for (i1, i2) in h.pairs() {
                acc += e2(i1, i2, x1[i1]);
            }
            acc.spectral_norm().powf(q)
        })?;

        let mut var = HermMatrix::zeros(d);
        for (i1, i2) in h.pairs() {
            for x in 0..s {
                var += &e2(i1, i2, x).scaled(p[x]);
            }
        }
        let row_norm = |i1: usize, x: usize| {
            let mut acc = HermMatrix::zeros(d);
            for i2 in others(i1) {
                acc += e2(i1, i2, x);
            }
            acc.spectral_norm()
        };
        let mut row_sum = 0.0;
        let mut gamma_inner = 0.0;
        let mut gamma_inner_jensen = 0.0;
        let mut row_laws = Vec::with_capacity(n);
        for i in 0..n {
            let norms: Vec<f64> = (0..s).map(|x| row_norm(i, x)).collect();
            let mean: f64 = norms.iter().zip(p).map(|(v, w)| w * v).sum();
            row_sum += mean;
            gamma_inner_jensen += mean.powf(q);
            gamma_inner += norms.iter().zip(p).map(|(v, w)| w * v.powf(q)).sum::<f64>();
            row_laws.push((norms.iter().map(|v| v.powf(q)).collect(), p.to_vec()));
        }
        let t_max_e2 = expect_max_independent(&row_laws).powf(1.0 / (2.0 * q));

        let mut rowmax = 0.0;
        let mut d_sum = 0.0;
        for i1 in 0..n {
            for x in 0..s {
                let laws: Vec<(Vec<f64>, Vec<f64>)> = others(i1)
                    .map(|i2| {
                        let v = (0..s)
                            .map(|y| t.sq_norm[((i1 * n + i2) * s + x) * s + y].powf(q))
                            .collect();
                        (v, p.to_vec())
                    })
                    .collect();
                rowmax += p[x] * expect_max_independent(&laws);
                for (v, pv) in &laws {
                    d_sum += p[x] * v.iter().zip(pv).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }

        Ok(Self {
            q,
            n,
            d,
            t_max,
            t_max_stderr,
            t_var: var.spectral_norm().sqrt(),
            t_g,
            t_g_stderr,
            t_e2sum,
            t_e2sum_stderr,
            t_row: row_sum.sqrt(),
            t_max_e2,
            t_rowmax: rowmax.powf(1.0 / (2.0 * q)),
            gamma_inner,
            gamma_inner_jensen,
            d_sum,
            exact: ProductSpace::iid(p, 2 * n).count() <= spec.cap as u128,
        })
    }

    /// `r^(3/2) T_max` replaced by the three-term refinement.
    pub fn refined_remainder(&self, r: f64) -> f64 {
        let pre = 4.0 * E * SQRT_2 * (1.0 + (self.d as f64).ln() / self.q).sqrt();
        pre * (r * self.t_row + r.powf(1.5) * self.t_max_e2 + r * r * self.t_rowmax)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Corollary,
    Refined,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Corollary => "corollary",
            Variant::Refined => "refined",
        }
    }

    pub const ALL: [Variant; 3] = [Variant::Full, Variant::Corollary, Variant::Refined];
}

pub const THEOREM_OUTER: f64 = 128.0;
pub const COROLLARY_OUTER: f64 = 256.0;

/// Assembles the bound from precomputed terms.
pub fn assemble(terms: &KernelTerms, variant: Variant) -> f64 {
    let r = r_log_ed(terms.q, terms.d);
    let se = E.sqrt();
    match variant {
        Variant::Full => {
            THEOREM_OUTER / se
                * (16.0 * r.powf(1.5) * terms.t_max + r * terms.t_var + r * terms.t_g)
        }
        Variant::Corollary => {
            COROLLARY_OUTER / se * (r * terms.t_row + 11.0 * r.powf(1.5) * terms.t_max)
        }
        Variant::Refined => {
            COROLLARY_OUTER / se * (r * terms.t_row + 11.0 * terms.refined_remainder(r))
        }
    }
}

fn kernel_digest(tag: &str, h: &KernelTable, law: &DiscreteDistribution, q: f64) -> String {
    InputDigest::new(tag).kernel(h).law(law).f64(q).finish()
}

/// Exact moment when enumerable under `spec.cap`, else Monte Carlo.
pub fn u_moment(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    mode: Mode,
    spec: &OracleSpec,
) -> Result<MomentEstimate> {
    match exact_u_moment_capped(h, law, q, mode, spec.cap) {
        Err(Error::Capacity { .. }) if spec.mc_replicas > 0 => {
            mc_u_moment(h, law, q, mode, spec.mc_replicas, spec.seed)
        }
        other => other,
    }
}

fn attach_u_oracles(
    rep: &mut BoundReport,
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    spec: &OracleSpec,
    decoupled: bool,
) -> Result<()> {
    let coupled = u_moment(h, law, q, Mode::Coupled, spec)?;
    rep.attach_moment(&coupled);
    if decoupled {
        let dec = u_moment(h, law, q, Mode::Decoupled, spec)?;
        rep.check_secondary("decoupled", dec.value, dec.stderr);
        rep.check_secondary("decoupled_x4", 4.0 * dec.value, 4.0 * dec.stderr);
    }
    Ok(())
}

fn downgrade_if_estimated(rep: &mut BoundReport, terms: &KernelTerms) {
    if !terms.exact {
        rep.note("kernel terms estimated by Monte Carlo");
        if rep.verdict == Verdict::Verified {
            rep.verdict = Verdict::Estimated;
        }
    }
}

fn put_terms(rep: &mut BoundReport, terms: &KernelTerms, variant: Variant) {
    match variant {
        Variant::Full => {
            rep.term("T_max", terms.t_max)
                .term("T_var", terms.t_var)
                .term("T_G", terms.t_g);
        }
        Variant::Corollary => {
            rep.term("T_row", terms.t_row).term("T_max", terms.t_max);
        }
        Variant::Refined => {
            rep.term("T_row", terms.t_row)
                .term("T_max_E2", terms.t_max_e2)
                .term("T_rowmax", terms.t_rowmax)
                .term(
                    "remainder",
                    terms.refined_remainder(r_log_ed(terms.q, terms.d)),
                );
        }
    }
}

/// Bound on `(E ||U_n||^(2q))^(1/(2q))` for a degenerate kernel, compared
/// with the coupled moment and with four times the decoupled moment.
pub fn theorem_moment_bound(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    variant: Variant,
    spec: &OracleSpec,
) -> Result<BoundReport> {
    check_q(q)?;
    require_degenerate(h, law, DEFAULT_DEGENERACY_TOL)?;
    let terms = KernelTerms::compute(h, law, q, spec)?;
    let mut rep = theorem_report(&terms, variant);
    rep.inputs_digest = kernel_digest(&format!("theorem_{}", variant.name()), h, law, q);
    attach_u_oracles(&mut rep, h, law, q, spec, true)?;
    downgrade_if_estimated(&mut rep, &terms);
    Ok(rep)
}

/// The report for precomputed terms, without oracles.
pub fn theorem_report(terms: &KernelTerms, variant: Variant) -> BoundReport {
    let r = r_log_ed(terms.q, terms.d);
    let mut rep = BoundReport::new("theorem_moment", terms.q, BoundKind::Upper);
    rep.variant = Some(variant.name().into());
    rep.value = assemble(terms, variant);
    put_terms(&mut rep, terms, variant);
    rep.term("r", r);
    let outer = match variant {
        Variant::Full => THEOREM_OUTER,
        _ => COROLLARY_OUTER,
    };
    rep.constant("outer", outer / E.sqrt());
    match variant {
        Variant::Full => rep.constant("max_coef", 16.0),
        Variant::Corollary => rep.constant("max_coef", 11.0),
        Variant::Refined => rep.constant("max_coef", 11.0).constant(
            "remainder_coef",
            4.0 * E * SQRT_2 * (1.0 + (terms.d as f64).ln() / terms.q).sqrt(),
        ),
    };
    rep.r_convention = R_LOG_ED.into();
    rep
}

/// `C` times the sum of the three lower-bound terms; no inequality is
/// asserted, the ratio to the coupled moment is recorded.
pub fn lower_bound_terms(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    spec: &OracleSpec,
    constants: &Constants,
) -> Result<BoundReport> {
    check_q(q)?;
    require_degenerate(h, law, DEFAULT_DEGENERACY_TOL)?;
    let terms = KernelTerms::compute(h, law, q, spec)?;
    let mut rep = BoundReport::new("lower_bound", q, BoundKind::Recorded);
    rep.term("T_max", terms.t_max)
        .term("T_G", terms.t_g)
        .term("T_E2sum", terms.t_e2sum);
    rep.value = constants.lower_bound_c * (terms.t_max + terms.t_g + terms.t_e2sum);
    rep.constant("C", constants.lower_bound_c);
    rep.r_convention = "none".into();
    rep.inputs_digest = kernel_digest("lower_bound", h, law, q);
    attach_u_oracles(&mut rep, h, law, q, spec, false)?;
    if !terms.exact {
        rep.note("kernel terms estimated by Monte Carlo");
    }
    Ok(rep)
}

/// Threshold and probability of the concentration tail, with the pieces of
/// its derivation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTail {
    pub t: f64,
    pub threshold: f64,
    pub prob: f64,
    /// The `u >= 2` at which the moment-to-tail conversion was applied.
    pub u: f64,
    pub a0: f64,
    pub a2: f64,
    pub a3: f64,
    pub t_row: f64,
    pub max_bound: f64,
}

impl ConcentrationTail {
    pub fn tail(&self) -> TailBound {
        TailBound {
            threshold: self.threshold,
            prob: self.prob,
        }
    }
}

fn check_identical(h: &KernelTable) -> Result<()> {
    let s = h.support_size();
    for (i1, i2) in h.pairs() {
        for x in 0..s {
            for y in 0..s {
                if (h.get(i1, i2, x, y) - h.get(0, 1, x, y)).max_abs_entry() > 1e-12 {
                    return Err(Error::invalid(
                        "concentration tail needs the same kernel for every pair",
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Composes the corollary moment bound at `p = 2q` with the moment-to-tail
/// conversion. With `L = 1 + ln d`, `r <= p/2 + L`,
/// `r^(3/2) <= sqrt 2 ((p/2)^(3/2) + L^(3/2))` and `T_max <= M sqrt(n-1)`,
/// the moment of order `p` is at most `a3 p^(3/2) + a2 p + a0`. The
/// conversion is applied at `u = max(t, 2)`, so the stated `e^-t` holds.
pub fn concentration_tail(
    h: &KernelTable,
    law: &DiscreteDistribution,
    m: f64,
    t: f64,
) -> Result<ConcentrationTail> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::invalid(format!(
            "concentration tail needs t >= 1, got {t}"
        )));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::invalid("M must be finite and nonnegative"));
    }
    h.check_law(law)?;
    check_identical(h)?;
    let worst = h.max_norm();
    if worst > m * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "kernel norm {worst} exceeds M = {m} on the support"
        )));
    }
    require_degenerate(h, law, DEFAULT_DEGENERACY_TOL)?;
    let (n, d) = (h.n(), h.d());
    let t_row = t_row_term(h, law)?;
    let tm = m * ((n - 1) as f64).sqrt();
    let k = COROLLARY_OUTER / E.sqrt();
    let l = 1.0 + (d as f64).ln();
    let a2 = k * t_row / 2.0;
    let a3 = k * 11.0 * tm / 2.0;
    let a0 = k * (l * t_row + 11.0 * SQRT_2 * l.powf(1.5) * tm);
    let u = t.max(2.0);
    let threshold = moment_to_tail([a0, 0.0, a2, a3, 0.0], u)?;
    Ok(ConcentrationTail {
        t,
        threshold,
        prob: (-t).exp(),
        u,
        a0,
        a2,
        a3,
        t_row,
        max_bound: tm,
    })
}
