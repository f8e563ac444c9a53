//! Matrix Rademacher chaos of order 2,
//! `X = sum_{i1 != i2} A_{i1,i2} e1_{i1} e2_{i2}` with independent sign
//! vectors `e1`, `e2`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::enumerate::{power_of_mean, ProductSpace};
use crate::error::{Error, Result};
use crate::linalg::{variance_proxies, HermMatrix, RectMatrix, VarianceProxies};

/// Largest `n` enumerated by [`exact_chaos_moment`] (`2^(2n)` sign patterns).
pub const DEFAULT_CHAOS_N_CAP: usize = 7;

const RADEMACHER: [f64; 2] = [0.5, 0.5];

/// Maps an enumeration digit to a sign: 0 -> +1, 1 -> -1.
pub fn sign_of(digit: usize) -> f64 {
    if digit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// An `n x n` array of `d x d` Hermitian coefficients with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosCoefficients {
    n: usize,
    d: usize,
    blocks: Vec<HermMatrix>,
}

impl ChaosCoefficients {
    /// `blocks` is row-major with `n * n` entries; diagonal blocks must vanish.
    pub fn new(n: usize, blocks: Vec<HermMatrix>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("chaos needs n >= 2, got {n}")));
        }
        if blocks.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: format!("{} blocks", n * n),
                got: format!("{} blocks", blocks.len()),
            });
        }
        let d = blocks[0].dim();
        if let Some(b) = blocks.iter().find(|b| b.dim() != d) {
            return Err(Error::ShapeMismatch {
                expected: format!("blocks of dim {d}"),
                got: format!("block of dim {}", b.dim()),
            });
        }
        for i in 0..n {
            if blocks[i * n + i].max_abs_entry() != 0.0 {
                return Err(Error::invalid(format!(
                    "diagonal block A_{i},{i} is nonzero"
                )));
            }
        }
        Ok(Self { n, d, blocks })
    }

    /// Calls `f(i1, i2)` for every off-diagonal pair; diagonal blocks are zero.
    pub fn from_fn<F>(n: usize, d: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<HermMatrix>,
    {
        let mut blocks = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                blocks.push(if i1 == i2 {
                    HermMatrix::zeros(d)
                } else {
                    f(i1, i2)?
                });
            }
        }
        Self::new(n, blocks)
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self::from_fn(n, d, |_, _| Ok(HermMatrix::zeros(d))).expect("n >= 2")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i1: usize, i2: usize) -> &HermMatrix {
        &self.blocks[i1 * self.n + i2]
    }

    /// Row-major blocks, diagonal included.
    pub fn blocks(&self) -> &[HermMatrix] {
        &self.blocks
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            (i + 1..self.n).all(|j| (self.get(i, j) - self.get(j, i)).max_abs_entry() <= tol)
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            d: self.d,
            blocks: self.blocks.iter().map(|b| b.scaled(c)).collect(),
        }
    }

    /// Replaces `A_{i1,i2}` and `A_{i2,i1}` by their average.
    pub fn symmetrized(&self) -> Self {
        let n = self.n;
        let blocks = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                (self.get(i, j) + self.get(j, i)).scaled(0.5)
            })
            .collect();
        Self {
            n,
            d: self.d,
            blocks,
        }
    }

    /// Relabels indices: the new `A_{i,j}` is the old `A_{perm[i],perm[j]}`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::invalid("not a permutation of 0..n"));
        }
        let blocks = (0..n * n)
            .map(|k| self.get(perm[k / n], perm[k % n]).clone())
            .collect();
        Ok(Self {
            n,
            d: self.d,
            blocks,
        })
    }

    /// `sum_{i1 != i2} A_{i1,i2} e1_{i1} e2_{i2}` for sign vectors `e1`, `e2`.
    pub fn evaluate(&self, e1: &[f64], e2: &[f64]) -> HermMatrix {
        let mut x = HermMatrix::zeros(self.d);
        for i1 in 0..self.n {
            for i2 in (0..self.n).filter(|&i2| i2 != i1) {
                x += &self.get(i1, i2).scaled(e1[i1] * e2[i2]);
            }
        }
        x
    }

    pub fn variance_proxies(&self) -> VarianceProxies {
        variance_proxies(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEnumeration,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactEnumeration => "exact-enumeration",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

/// An estimate of `(E ||X||^(2q))^(1/(2q))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub q: f64,
    pub value: f64,
    pub method: Method,
    /// Zero for exact enumeration.
    pub stderr: f64,
    /// Number of configurations (exact) or replicas (Monte Carlo).
    pub replicas: u64,
}

impl MomentEstimate {
    pub(crate) fn exact(q: f64, mean_power: f64, configs: u64) -> Self {
        Self {
            q,
            value: mean_power.max(0.0).powf(1.0 / (2.0 * q)),
            method: Method::ExactEnumeration,
            stderr: 0.0,
            replicas: configs,
        }
    }

    pub(crate) fn monte_carlo(q: f64, powers: &[f64]) -> Self {
        let (value, stderr) = power_of_mean(powers, 1.0 / (2.0 * q));
        Self {
            q,
            value,
            method: Method::MonteCarlo,
            stderr,
            replicas: powers.len() as u64,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.method == Method::ExactEnumeration
    }
}

impl fmt::Display for MomentEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "method={} q={} value={:.17e} stderr={:.17e} replicas={}",
            self.method, self.q, self.value, self.stderr, self.replicas
        )
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "moment order q must be >= 1, got {q}"
        )))
    }
}

/// `||X||` for one draw of the two sign vectors from a generator seeded by `seed`.
pub fn sample_chaos_norm(a: &ChaosCoefficients, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_norm_with(a, &mut rng)
}

fn sample_norm_with<R: Rng>(a: &ChaosCoefficients, rng: &mut R) -> f64 {
    let n = a.n();
    let mut signs = vec![0.0; 2 * n];
    for s in signs.iter_mut() {
        *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    a.evaluate(&signs[..n], &signs[n..]).spectral_norm()
}

/// Exact moment by enumerating all `2^(2n)` sign patterns, `n <= 7`.
pub fn exact_chaos_moment(a: &ChaosCoefficients, q: f64) -> Result<MomentEstimate> {
    exact_chaos_moment_capped(a, q, DEFAULT_CHAOS_N_CAP)
}

pub fn exact_chaos_moment_capped(
    a: &ChaosCoefficients,
    q: f64,
    max_n: usize,
) -> Result<MomentEstimate> {
    check_q(q)?;
    let n = a.n();
    let space = ProductSpace::iid(&RADEMACHER, 2 * n);
    let cap = 1u64 << (2 * max_n.min(31));
    let configs = space.check_cap(cap)?;
    let mean = space.expect(cap, |idx| {
        let signs: Vec<f64> = idx.iter().map(|&k| sign_of(k)).collect();
        a.evaluate(&signs[..n], &signs[n..])
            .spectral_norm()
            .powf(2.0 * q)
    })?;
    Ok(MomentEstimate::exact(q, mean, configs))
}

/// Monte Carlo moment; replica `k` draws from stream `k` of `seed`.
pub fn mc_chaos_moment(
    a: &ChaosCoefficients,
    q: f64,
    replicas: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    check_q(q)?;
    if replicas == 0 {
        return Err(Error::invalid("replicas must be >= 1"));
    }
    let n = a.n();
    let space = ProductSpace::iid(&RADEMACHER, 2 * n);
    let powers = space.sample_values(replicas, seed, |idx| {
        let signs: Vec<f64> = idx.iter().map(|&k| sign_of(k)).collect();
        a.evaluate(&signs[..n], &signs[n..])
            .spectral_norm()
            .powf(2.0 * q)
    });
    Ok(MomentEstimate::monte_carlo(q, &powers))
}

/// Lower and upper estimates for `(E ||X||^(2q))^(1/(2q))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhintchineBounds {
    pub q: f64,
    /// `max(||GG*||, ||sum A^2||)^(1/2)`.
    pub lower: f64,
    /// `(4/sqrt e) * r * lower` with `r = max(q, ln d)`.
    pub upper: f64,
    /// Same constant with `r = max(q, ln(nd))`.
    pub naive_upper: f64,
    pub r: f64,
    pub r_naive: f64,
    pub proxies: VarianceProxies,
}

pub fn khintchine_constant() -> f64 {
    4.0 / std::f64::consts::E.sqrt()
}

pub fn khintchine_bounds(a: &ChaosCoefficients, q: f64) -> Result<KhintchineBounds> {
    check_q(q)?;
    let proxies = a.variance_proxies();
    let lower = proxies.gg_star_norm.max(proxies.sum_sq_norm).sqrt();
    let r = q.max((a.d() as f64).ln());
    let r_naive = q.max(((a.n() * a.d()) as f64).ln());
    let c = khintchine_constant();
    Ok(KhintchineBounds {
        q,
        lower,
        upper: c * r * lower,
        naive_upper: c * r_naive * lower,
        r,
        r_naive,
        proxies,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenCompare {
    /// `|tr sum M*M - tr sum MM*|`.
    pub trace_gap: f64,
    /// `tr sum MM*`, the scale for `trace_gap`.
    pub trace: f64,
    /// `max eig(sum M*M) <= tr(sum MM*) / d`.
    pub condition_met: bool,
    /// `tr (sum MM*)^p >= tr (sum M*M)^p`, up to relative roundoff.
    pub schatten_ok: bool,
    pub p: u32,
    pub schatten_small: f64,
    pub schatten_large: f64,
}

/// Compares the spectra of `sum M_j* M_j` (`nd x nd`) and `sum M_j M_j*`
/// (`d x d`) for a list of `d x nd` matrices.
pub fn eigen_compare_check(ms: &[RectMatrix], p: u32) -> Result<EigenCompare> {
    let first = ms
        .first()
        .ok_or_else(|| Error::invalid("need at least one matrix"))?;
    let (d, nd) = (first.rows(), first.cols());
    if let Some(m) = ms.iter().find(|m| m.rows() != d || m.cols() != nd) {
        return Err(Error::ShapeMismatch {
            expected: format!("{d}x{nd}"),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    if p < 2 {
        return Err(Error::invalid(
            "Schatten exponent p must be an integer >= 2",
        ));
    }
    let mut big = HermMatrix::zeros(nd);
    let mut small = HermMatrix::zeros(d);
    for m in ms {
        big += &m.gram_cols();
        small += &m.gram_rows();
    }
    let lambda = big.eigenvalues();
    let trace = small.trace();
    let trace_gap = (big.trace() - trace).abs();
    let lambda_max = lambda.last().copied().unwrap_or(0.0);
    let condition_met = lambda_max <= trace / d as f64;
    let schatten_small = small.trace_power(p as f64);
    let schatten_large = big.trace_power(p as f64);
    let slack = 1e-10 * schatten_small.max(schatten_large);
    Ok(EigenCompare {
        trace_gap,
        trace,
        condition_met,
        schatten_ok: schatten_small >= schatten_large - slack,
        p,
        schatten_small,
        schatten_large,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair(a: HermMatrix) -> ChaosCoefficients {
        let d = a.dim();
        ChaosCoefficients::from_fn(2, d, |_, _| Ok(a.clone())).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ChaosCoefficients::from_fn(1, 1, |_, _| Ok(HermMatrix::identity(1))).is_err());
        let blocks = vec![HermMatrix::identity(1); 4];
        assert!(ChaosCoefficients::new(2, blocks).is_err());
    }

    #[test]
    fn scalar_pair_moment() {
        let a = pair(HermMatrix::identity(1));
        let m = exact_chaos_moment(&a, 1.0).unwrap();
        assert_abs_diff_eq!(m.value, 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(m.replicas, 16);
        let k = khintchine_bounds(&a, 1.0).unwrap();
        assert_abs_diff_eq!(k.lower, 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            k.upper,
            4.0 / std::f64::consts::E.sqrt() * 2f64.sqrt(),
            epsilon = 1e-13
        );
        assert!((k.upper - 3.431).abs() < 1e-3);
    }

    #[test]
    fn sample_norm_values() {
        let a = HermMatrix::diag(&[1.0, -3.0]);
        let c = pair(a);
        for seed in 0..50 {
            let v = sample_chaos_norm(&c, seed);
            assert!(v.abs() < 1e-12 || (v - 6.0).abs() < 1e-12);
            assert_eq!(v, sample_chaos_norm(&c, seed));
        }
        assert_eq!(sample_chaos_norm(&ChaosCoefficients::zeros(3, 2), 4), 0.0);
    }

    #[test]
    fn capacity_error_above_cap() {
        let a = ChaosCoefficients::zeros(8, 1);
        assert!(matches!(
            exact_chaos_moment(&a, 1.0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn display_is_one_line() {
        let m = exact_chaos_moment(&ChaosCoefficients::zeros(2, 1), 1.0).unwrap();
        let s = m.to_string();
        assert!(s.starts_with("method=exact-enumeration q=1 value="));
        assert!(!s.contains('\n'));
    }

    #[test]
    fn eigen_compare_hand_case() {
        let m = RectMatrix::from_real_rows(1, 2, &[1.0, 0.0]).unwrap();
        let r = eigen_compare_check(&[m], 2).unwrap();
        assert!(r.trace_gap < 1e-15);
        assert!(r.condition_met);
        assert!(r.schatten_ok);
        assert_abs_diff_eq!(r.schatten_small, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.schatten_large, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_compare_shape_mismatch() {
        let a = RectMatrix::from_real_rows(1, 2, &[1.0, 0.0]).unwrap();
        let b = RectMatrix::from_real_rows(1, 3, &[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            eigen_compare_check(&[a, b], 2),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
