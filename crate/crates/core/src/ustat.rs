//! Order-2 matrix U-statistics over finite sample spaces.
//!
//! Kernels are tables indexed by `(i1, i2, x, y)` with `x`, `y` support
//! indices, so every expectation is a finite weighted sum.

use serde::{Deserialize, Serialize};

use crate::chaos::{check_q, ChaosCoefficients, MomentEstimate};
use crate::enumerate::{ProductSpace, DEFAULT_CONFIG_CAP};
use crate::error::{Error, Result};
use crate::linalg::{BlockHermMatrix, CMatrix, HermMatrix};

/// Absolute tolerance after normalizing the kernel to unit max norm.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Tolerance for `H_{i1,i2}(x,y) = H_{i2,i1}(y,x)`, relative to `max(1, |entry|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A support point: an opaque label with the numbers kernels may read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub label: String,
    pub payload: Vec<f64>,
}

/// A finite-support probability law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    points: Vec<Point>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<Point>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("distribution needs at least one point"));
        }
        if points.len() != probs.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} probabilities", points.len()),
                got: format!("{}", probs.len()),
            });
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
        Ok(Self { points, probs })
    }

    /// Scalar-valued law; labels are the formatted values.
    pub fn from_values(values: &[f64], probs: &[f64]) -> Result<Self> {
        let points = values
            .iter()
            .map(|&v| Point {
                label: format!("{v}"),
                payload: vec![v],
            })
            .collect();
        Self::new(points, probs.to_vec())
    }

    /// Uniform on `{+1, -1}`, in that order.
    pub fn rademacher() -> Self {
        Self::from_values(&[1.0, -1.0], &[0.5, 0.5]).expect("valid law")
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// First payload coordinate of point `i` (0 if the payload is empty).
    pub fn value(&self, i: usize) -> f64 {
        self.points[i].payload.first().copied().unwrap_or(0.0)
    }

    /// `E f(value)` over the first payload coordinate.
    pub fn expect_value(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.size())
            .map(|i| self.probs[i] * f(self.value(i)))
            .sum()
    }
}

/// `H_{i1,i2}(x, y)` for `i1 != i2` and support indices `x`, `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    n: usize,
    d: usize,
    s: usize,
    table: Vec<HermMatrix>,
}

impl KernelTable {
    fn index(&self, i1: usize, i2: usize, x: usize, y: usize) -> usize {
        ((i1 * self.n + i2) * self.s + x) * self.s + y
    }

    fn validate_shape(n: usize, d: usize, s: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::invalid(format!("kernel needs n >= 2, got {n}")));
        }
        if d == 0 || s == 0 {
            return Err(Error::invalid("kernel needs d >= 1 and a nonempty support"));
        }
        Ok(())
    }

    /// Builds the table from `f(i1, i2, x, y)` and checks permutation symmetry.
    pub fn from_fn<F>(n: usize, d: usize, s: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> Result<HermMatrix>,
    {
        Self::validate_shape(n, d, s)?;
        let mut table = Vec::with_capacity(n * n * s * s);
        for i1 in 0..n {
            for i2 in 0..n {
                for x in 0..s {
                    for y in 0..s {
                        let h = if i1 == i2 {
                            HermMatrix::zeros(d)
                        } else {
                            f(i1, i2, x, y)?
                        };
                        if h.dim() != d {
                            return Err(Error::ShapeMismatch {
                                expected: format!("kernel values of dim {d}"),
                                got: format!("dim {} at ({i1},{i2},{x},{y})", h.dim()),
                            });
                        }
                        table.push(h);
                    }
                }
            }
        }
        let k = Self { n, d, s, table };
        k.check_symmetry()?;
        Ok(k)
    }

    /// Builds the table from `f` on pairs `i1 < i2` and fills the rest by
    /// `H_{i2,i1}(y,x) = H_{i1,i2}(x,y)`.
    pub fn from_upper_fn<F>(n: usize, d: usize, s: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> Result<HermMatrix>,
    {
        Self::validate_shape(n, d, s)?;
        let mut table = vec![HermMatrix::zeros(d); n * n * s * s];
        let mut k = Self {
            n,
            d,
            s,
            table: Vec::new(),
        };
        for i1 in 0..n {
            for i2 in i1 + 1..n {
                for x in 0..s {
                    for y in 0..s {
                        let h = f(i1, i2, x, y)?;
                        if h.dim() != d {
                            return Err(Error::ShapeMismatch {
                                expected: format!("kernel values of dim {d}"),
                                got: format!("dim {} at ({i1},{i2},{x},{y})", h.dim()),
                            });
                        }
                        table[k.index(i2, i1, y, x)] = h.clone();
                        table[k.index(i1, i2, x, y)] = h;
                    }
                }
            }
        }
        k.table = table;
        Ok(k)
    }

    pub fn zeros(n: usize, d: usize, s: usize) -> Result<Self> {
        Self::from_upper_fn(n, d, s, |_, _, _, _| Ok(HermMatrix::zeros(d)))
    }

    /// `H_{i1,i2}(x, y) = x y A_{i1,i2}` on a scalar law; `A` must be symmetric.
    pub fn product(a: &ChaosCoefficients, law: &DiscreteDistribution) -> Result<Self> {
        Self::from_fn(a.n(), a.d(), law.size(), |i1, i2, x, y| {
            Ok(a.get(i1, i2).scaled(law.value(x) * law.value(y)))
        })
    }

    /// The same kernel `h(x, y)` for every pair; `h` must satisfy `h(x,y) = h(y,x)`.
    pub fn identical<F>(n: usize, d: usize, s: usize, mut h: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<HermMatrix>,
    {
        Self::from_fn(n, d, s, |_, _, x, y| h(x, y))
    }

    fn check_symmetry(&self) -> Result<()> {
        for i1 in 0..self.n {
            for i2 in i1 + 1..self.n {
                for x in 0..self.s {
                    for y in 0..self.s {
                        let a = self.get(i1, i2, x, y);
                        let b = self.get(i2, i1, y, x);
                        let scale = a.max_abs_entry().max(b.max_abs_entry()).max(1.0);
                        if (a - b).max_abs_entry() > SYMMETRY_TOL * scale {
                            return Err(Error::invalid(format!(
                                "kernel is not permutation-symmetric: H_{i1},{i2}({x},{y}) != H_{i2},{i1}({y},{x})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support_size(&self) -> usize {
        self.s
    }

    pub fn get(&self, i1: usize, i2: usize, x: usize, y: usize) -> &HermMatrix {
        &self.table[self.index(i1, i2, x, y)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            table: self.table.iter().map(|h| h.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// Largest spectral norm over the table.
    pub fn max_norm(&self) -> f64 {
        self.table
            .iter()
            .map(HermMatrix::spectral_norm)
            .fold(0.0, f64::max)
    }

    pub fn check_law(&self, law: &DiscreteDistribution) -> Result<()> {
        if law.size() != self.s {
            return Err(Error::ShapeMismatch {
                expected: format!("law on {} points", self.s),
                got: format!("{} points", law.size()),
            });
        }
        Ok(())
    }

    /// Off-diagonal index pairs `(i1, i2)`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// `E_2 H_{i1,i2}(x, X)`.
    pub fn e2(&self, law: &DiscreteDistribution, i1: usize, i2: usize, x: usize) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.d);
        for (y, &p) in law.probs().iter().enumerate() {
            if p != 0.0 {
                acc += &self.get(i1, i2, x, y).scaled(p);
            }
        }
        acc
    }

    /// `E_2 H^2_{i1,i2}(x, X)`.
    pub fn e2_square(
        &self,
        law: &DiscreteDistribution,
        i1: usize,
        i2: usize,
        x: usize,
    ) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.d);
        for (y, &p) in law.probs().iter().enumerate() {
            if p != 0.0 {
                acc += &self.get(i1, i2, x, y).square().scaled(p);
            }
        }
        acc
    }

    /// `E H^2_{i1,i2}(X, Y)` for independent `X`, `Y`.
    pub fn expected_square(&self, law: &DiscreteDistribution, i1: usize, i2: usize) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.d);
        for (x, &p) in law.probs().iter().enumerate() {
            if p != 0.0 {
                acc += &self.e2_square(law, i1, i2, x).scaled(p);
            }
        }
        acc
    }

    /// `sum_{i1 != i2} E H^2_{i1,i2}`.
    pub fn sum_expected_square(&self, law: &DiscreteDistribution) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.d);
        for (i1, i2) in self.pairs() {
            acc += &self.expected_square(law, i1, i2);
        }
        acc
    }
}

/// Sample indices for one evaluation; `x2 = None` means coupled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub x1: Vec<usize>,
    pub x2: Option<Vec<usize>>,
}

impl SampleConfig {
    pub fn coupled(x1: Vec<usize>) -> Self {
        Self { x1, x2: None }
    }

    pub fn decoupled(x1: Vec<usize>, x2: Vec<usize>) -> Self {
        Self { x1, x2: Some(x2) }
    }

    fn validate(&self, h: &KernelTable) -> Result<()> {
        let ok = |v: &Vec<usize>| v.len() == h.n() && v.iter().all(|&i| i < h.support_size());
        if !ok(&self.x1) || !self.x2.as_ref().is_none_or(ok) {
            return Err(Error::invalid(format!(
                "sample configuration needs {} indices below {}",
                h.n(),
                h.support_size()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coupled,
    Decoupled,
}

/// Hoeffding decomposition of an order-2 kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    n: usize,
    s: usize,
    /// `E H_{i1,i2}`, row-major over pairs (zero on the diagonal).
    pub mean: Vec<HermMatrix>,
    /// `E_2 H_{i1,i2}(x, .) - E H_{i1,i2}`, indexed `(i1 * n + i2) * s + x`.
    pub pi1: Vec<HermMatrix>,
    /// The completely degenerate part.
    pub pi2: KernelTable,
}

impl Projection {
    pub fn mean(&self, i1: usize, i2: usize) -> &HermMatrix {
        &self.mean[i1 * self.n + i2]
    }

    /// First-argument projection of `H_{i1,i2}` at `x`.
    pub fn pi1(&self, i1: usize, i2: usize, x: usize) -> &HermMatrix {
        &self.pi1[(i1 * self.n + i2) * self.s + x]
    }

    /// `mean + pi1(x) + pi1'(y) + pi2(x, y)`; the second-argument projection
    /// of `H_{i1,i2}` is the first-argument projection of `H_{i2,i1}`.
    pub fn reconstruct(&self, i1: usize, i2: usize, x: usize, y: usize) -> HermMatrix {
        let mut h = self.mean(i1, i2) + self.pi1(i1, i2, x);
        h += self.pi1(i2, i1, y);
        h += self.pi2.get(i1, i2, x, y);
        h
    }
}

pub fn pi_project(h: &KernelTable, law: &DiscreteDistribution) -> Result<Projection> {
    h.check_law(law)?;
    let (n, d, s) = (h.n(), h.d(), h.support_size());
    let mut mean = vec![HermMatrix::zeros(d); n * n];
    let mut cond = vec![HermMatrix::zeros(d); n * n * s];
    for (i1, i2) in h.pairs() {
        let mut m = HermMatrix::zeros(d);
        for x in 0..s {
            let e = h.e2(law, i1, i2, x);
            m += &e.scaled(law.probs()[x]);
            cond[(i1 * n + i2) * s + x] = e;
        }
        mean[i1 * n + i2] = m;
    }
    let pi1: Vec<HermMatrix> = (0..n * n * s).map(|k| &cond[k] - &mean[k / s]).collect();
    let pi2 = KernelTable::from_upper_fn(n, d, s, |i1, i2, x, y| {
        let mut r = h.get(i1, i2, x, y) - &cond[(i1 * n + i2) * s + x];
        r = &r - &cond[(i2 * n + i1) * s + y];
        r += &mean[i1 * n + i2];
        Ok(r)
    })?;
    Ok(Projection {
        n,
        s,
        mean,
        pi1,
        pi2,
    })
}

/// `max_{i1,i2,x} ||E_2 H_{i1,i2}(x, .)||`, divided by the kernel's max norm.
pub fn degeneracy_residual(h: &KernelTable, law: &DiscreteDistribution) -> Result<f64> {
    h.check_law(law)?;
    let scale = h.max_norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for (i1, i2) in h.pairs() {
        for x in 0..h.support_size() {
            worst = worst.max(h.e2(law, i1, i2, x).spectral_norm());
        }
    }
    Ok(worst / scale)
}

pub fn degeneracy_check(h: &KernelTable, law: &DiscreteDistribution, tol: f64) -> Result<bool> {
    Ok(degeneracy_residual(h, law)? <= tol)
}

/// Errors unless the kernel passes [`degeneracy_check`] at `tol`.
pub fn require_degenerate(h: &KernelTable, law: &DiscreteDistribution, tol: f64) -> Result<()> {
    let residual = degeneracy_residual(h, law)?;
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::NotDegenerate { residual, tol })
    }
}

fn u_sum(h: &KernelTable, x1: &[usize], x2: &[usize]) -> HermMatrix {
    let mut u = HermMatrix::zeros(h.d());
    for (i1, i2) in h.pairs() {
        u += h.get(i1, i2, x1[i1], x2[i2]);
    }
    u
}

/// Coupled `sum H_{i1,i2}(x1[i1], x1[i2])` or decoupled `sum H_{i1,i2}(x1[i1], x2[i2])`.
pub fn evaluate_u(h: &KernelTable, cfg: &SampleConfig) -> Result<HermMatrix> {
    cfg.validate(h)?;
    let x2 = cfg.x2.as_deref().unwrap_or(&cfg.x1);
    Ok(u_sum(h, &cfg.x1, x2))
}

fn u_norm_power(h: &KernelTable, mode: Mode, idx: &[usize], q: f64) -> f64 {
    let n = h.n();
    let u = match mode {
        Mode::Coupled => u_sum(h, idx, idx),
        Mode::Decoupled => u_sum(h, &idx[..n], &idx[n..]),
    };
    u.spectral_norm().powf(2.0 * q)
}

fn space_for<'a>(h: &KernelTable, law: &'a DiscreteDistribution, mode: Mode) -> ProductSpace<'a> {
    let len = match mode {
        Mode::Coupled => h.n(),
        Mode::Decoupled => 2 * h.n(),
    };
    ProductSpace::iid(law.probs(), len)
}

pub fn exact_u_moment(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    mode: Mode,
) -> Result<MomentEstimate> {
    exact_u_moment_capped(h, law, q, mode, DEFAULT_CONFIG_CAP)
}

/// `(E ||U||^(2q))^(1/(2q))` over all `s^n` (coupled) or `s^(2n)` (decoupled)
/// configurations, visited in lexicographic order.
pub fn exact_u_moment_capped(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    mode: Mode,
    cap: u64,
) -> Result<MomentEstimate> {
    check_q(q)?;
    h.check_law(law)?;
    let space = space_for(h, law, mode);
    let configs = space.check_cap(cap)?;
    let mean = space.expect(cap, |idx| u_norm_power(h, mode, idx, q))?;
    Ok(MomentEstimate::exact(q, mean, configs))
}

pub fn mc_u_moment(
    h: &KernelTable,
    law: &DiscreteDistribution,
    q: f64,
    mode: Mode,
    replicas: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    check_q(q)?;
    h.check_law(law)?;
    if replicas == 0 {
        return Err(Error::invalid("replicas must be >= 1"));
    }
    let space = space_for(h, law, mode);
    let powers = space.sample_values(replicas, seed, |idx| u_norm_power(h, mode, idx, q));
    Ok(MomentEstimate::monte_carlo(q, &powers))
}

/// Block matrix with `(i, j)` block `H_{i,j}(x1[i], x2[j])` and zero diagonal.
pub fn assemble_gtilde(h: &KernelTable, cfg: &SampleConfig) -> Result<BlockHermMatrix> {
    cfg.validate(h)?;
    let x2 = cfg
        .x2
        .as_ref()
        .ok_or_else(|| Error::invalid("the block matrix needs a decoupled configuration"))?;
    let n = h.n();
    let blocks = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                HermMatrix::zeros(h.d())
            } else {
                h.get(i, j, cfg.x1[i], x2[j]).clone()
            }
        })
        .collect();
    BlockHermMatrix::new(n, blocks)
}

/// `E_2 G~ G~*` given the first sample: block `(i, j)` is
/// `sum_{k != i, j} E_2 [H_{i,k}(x1[i], X_k) H_{j,k}(x1[j], X_k)]`.
pub fn e2_gg_star(h: &KernelTable, law: &DiscreteDistribution, x1: &[usize]) -> Result<HermMatrix> {
    h.check_law(law)?;
    SampleConfig::coupled(x1.to_vec()).validate(h)?;
    Ok(e2_gg_star_unchecked(h, law, x1))
}

pub(crate) fn e2_gg_star_unchecked(
    h: &KernelTable,
    law: &DiscreteDistribution,
    x1: &[usize],
) -> HermMatrix {
    let (n, d) = (h.n(), h.d());
    let mut flat = CMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in i..n {
            let mut block = CMatrix::zeros(d, d);
            for k in (0..n).filter(|&k| k != i && k != j) {
                for (z, &p) in law.probs().iter().enumerate() {
                    if p != 0.0 {
                        block += (h.get(i, k, x1[i], z).matrix() * h.get(j, k, x1[j], z).matrix())
                            .map(|c| c * p);
                    }
                }
            }
            flat.view_mut((i * d, j * d), (d, d)).copy_from(&block);
            if i != j {
                flat.view_mut((j * d, i * d), (d, d))
                    .copy_from(&block.adjoint());
            }
        }
    }
    HermMatrix::from_computed(flat)
}

/// Kernel on the support `{(x, e)}` with `e` a sign, probabilities `p_x / 2`,
/// and values `e f H(x, y)`. Its decoupled U-statistic is the
/// Rademacher-symmetrized decoupled U-statistic of `h`. Point `(x, e)` has
/// index `2x + e` with `e = 0` for `+1`.
pub fn signed_extension(
    h: &KernelTable,
    law: &DiscreteDistribution,
) -> Result<(KernelTable, DiscreteDistribution)> {
    h.check_law(law)?;
    let s = h.support_size();
    let mut points = Vec::with_capacity(2 * s);
    let mut probs = Vec::with_capacity(2 * s);
    for (p, &w) in law.points().iter().zip(law.probs()) {
        for sign in [1.0, -1.0] {
            let mut payload = p.payload.clone();
            payload.push(sign);
            points.push(Point {
                label: format!("{}{}", p.label, if sign > 0.0 { "+" } else { "-" }),
                payload,
            });
            probs.push(w * 0.5);
        }
    }
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let ext = KernelTable::from_upper_fn(h.n(), h.d(), 2 * s, |i1, i2, a, b| {
        Ok(h.get(i1, i2, a / 2, b / 2).scaled(sign(a) * sign(b)))
    })?;
    Ok((ext, DiscreteDistribution::new(points, probs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn a2() -> HermMatrix {
        HermMatrix::from_real_rows(2, &[1.0, 0.5, 0.5, -2.0]).unwrap()
    }

    #[test]
    fn rejects_asymmetric_kernels() {
        let r = KernelTable::from_fn(2, 1, 2, |i1, _, x, _| {
            Ok(HermMatrix::diag(&[(i1 + x) as f64]))
        });
        assert!(r.is_err());
    }

    #[test]
    fn constant_kernel_projection() {
        let law = DiscreteDistribution::rademacher();
        let h = KernelTable::identical(3, 2, 2, |_, _| Ok(a2())).unwrap();
        let p = pi_project(&h, &law).unwrap();
        assert_eq!(p.mean(0, 1), &a2());
        assert!(p.pi1.iter().all(|m| m.max_abs_entry() < 1e-15));
        assert!(p.pi2.max_norm() < 1e-15);
        assert!(!degeneracy_check(&h, &law, 1e-9).unwrap());
    }

    #[test]
    fn product_kernel_is_canonical() {
        let law = DiscreteDistribution::rademacher();
        let h =
            KernelTable::identical(2, 2, 2, |x, y| Ok(a2().scaled(law.value(x) * law.value(y))))
                .unwrap();
        assert!(degeneracy_check(&h, &law, 1e-9).unwrap());
        let p = pi_project(&h, &law).unwrap();
        assert!(p.pi1.iter().all(|m| m.max_abs_entry() < 1e-15));
        for x in 0..2 {
            for y in 0..2 {
                assert!((p.pi2.get(0, 1, x, y) - h.get(0, 1, x, y)).max_abs_entry() < 1e-15);
            }
        }
    }

    #[test]
    fn additive_kernel_projection() {
        let law = DiscreteDistribution::rademacher();
        let h =
            KernelTable::identical(2, 2, 2, |x, y| Ok(a2().scaled(law.value(x) + law.value(y))))
                .unwrap();
        let p = pi_project(&h, &law).unwrap();
        for x in 0..2 {
            assert!((p.pi1(0, 1, x) - &a2().scaled(law.value(x))).max_abs_entry() < 1e-15);
        }
        assert!(p.pi2.max_norm() < 1e-15);
    }

    #[test]
    fn small_u_evaluations() {
        let law = DiscreteDistribution::rademacher();
        let h =
            KernelTable::identical(2, 2, 2, |x, y| Ok(a2().scaled(law.value(x) * law.value(y))))
                .unwrap();
        let u = evaluate_u(&h, &SampleConfig::coupled(vec![0, 1])).unwrap();
        assert!((&u - &a2().scaled(-2.0)).max_abs_entry() < 1e-15);
        let u = evaluate_u(&h, &SampleConfig::decoupled(vec![0, 0], vec![0, 0])).unwrap();
        assert!((&u - &a2().scaled(2.0)).max_abs_entry() < 1e-15);
        assert!(evaluate_u(&h, &SampleConfig::coupled(vec![0, 2])).is_err());

        let m = exact_u_moment(&h, &law, 1.0, Mode::Coupled).unwrap();
        assert_abs_diff_eq!(m.value, 2.0 * a2().spectral_norm(), epsilon = 1e-13);
        assert_eq!(m.replicas, 4);
    }

    #[test]
    fn zero_kernel_moments() {
        let law = DiscreteDistribution::rademacher();
        let h = KernelTable::zeros(3, 2, 2).unwrap();
        assert_eq!(
            exact_u_moment(&h, &law, 1.5, Mode::Decoupled)
                .unwrap()
                .value,
            0.0
        );
        let mc = mc_u_moment(&h, &law, 1.0, Mode::Coupled, 10, 3).unwrap();
        assert_eq!((mc.value, mc.stderr), (0.0, 0.0));
        assert!(e2_gg_star(&h, &law, &[0, 1, 0]).unwrap().max_abs_entry() == 0.0);
    }

    #[test]
    fn gtilde_needs_decoupled_config() {
        let h = KernelTable::zeros(2, 1, 2).unwrap();
        assert!(assemble_gtilde(&h, &SampleConfig::coupled(vec![0, 1])).is_err());
        assert!(assemble_gtilde(&h, &SampleConfig::decoupled(vec![0, 1], vec![1, 1])).is_ok());
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::from_values(&[0.0, 1.0], &[0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::from_values(&[0.0], &[1.0, 0.0]).is_err());
        assert!(DiscreteDistribution::from_values(&[], &[]).is_err());
        assert!(DiscreteDistribution::from_values(&[0.0, 1.0], &[-0.5, 1.5]).is_err());
    }

    #[test]
    fn signed_extension_law() {
        let law = DiscreteDistribution::from_values(&[0.0, 2.0], &[0.25, 0.75]).unwrap();
        let h = KernelTable::identical(2, 1, 2, |x, y| Ok(HermMatrix::diag(&[(x + y) as f64])))
            .unwrap();
        let (ext, elaw) = signed_extension(&h, &law).unwrap();
        assert_eq!(elaw.size(), 4);
        assert_eq!(elaw.probs(), &[0.125, 0.125, 0.375, 0.375]);
        assert_eq!(ext.get(0, 1, 3, 2).get(0, 0).re, -2.0);
        assert!(degeneracy_check(&ext, &elaw, 1e-12).unwrap());
    }
}
