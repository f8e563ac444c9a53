//! Closed-form constructions used as exact regression fixtures.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::r_log_ed;
use crate::bounds::theorem::{t_g_term, t_max_term, t_row_term, OracleSpec};
use crate::chaos::ChaosCoefficients;
use crate::enumerate::expect_max_independent;
use crate::error::{Error, Result};
use crate::io::{write_coefficients, write_kernel};
use crate::linalg::{variance_proxies, CMatrix, CVector, HermMatrix, C64};
use crate::ustat::{DiscreteDistribution, KernelTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleName {
    Example1,
    Example2,
    PolynomialChaos,
}

impl ExampleName {
    pub const ALL: [ExampleName; 3] = [
        ExampleName::Example1,
        ExampleName::Example2,
        ExampleName::PolynomialChaos,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::Example1 => "example1",
            ExampleName::Example2 => "example2",
            ExampleName::PolynomialChaos => "polynomial-chaos",
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown example `{s}`; known: example1, example2, polynomial-chaos"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExampleData {
    Coefficients(ChaosCoefficients),
    Kernel {
        table: KernelTable,
        law: DiscreteDistribution,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExampleInstance {
    pub name: ExampleName,
    pub n: usize,
    pub d: usize,
    pub data: ExampleData,
    /// Closed-form values. Keys ending in `_lower` are lower bounds, keys
    /// ending in `_upper` upper bounds, the rest equalities.
    pub expected: BTreeMap<String, f64>,
}

impl ExampleInstance {
    pub fn coefficients(&self) -> Option<&ChaosCoefficients> {
        match &self.data {
            ExampleData::Coefficients(a) => Some(a),
            ExampleData::Kernel { .. } => None,
        }
    }

    pub fn kernel(&self) -> Option<(&KernelTable, &DiscreteDistribution)> {
        match &self.data {
            ExampleData::Kernel { table, law } => Some((table, law)),
            ExampleData::Coefficients(_) => None,
        }
    }

    /// Coefficient directory for the chaos examples, kernel directory for
    /// the polynomial chaos.
    pub fn export(&self, dir: &Path) -> Result<()> {
        match &self.data {
            ExampleData::Coefficients(a) => write_coefficients(dir, a),
            ExampleData::Kernel { table, law } => write_kernel(dir, table, law),
        }
    }

    /// Compares the variance proxies with `expected` at absolute tolerance
    /// `tol`, returning the failures.
    pub fn check_proxies(&self, tol: f64) -> Vec<String> {
        let Some(a) = self.coefficients() else {
            return Vec::new();
        };
        let p = variance_proxies(a);
        let got = [
            ("gg_star_norm", p.gg_star_norm),
            ("sum_sq_norm", p.sum_sq_norm),
            ("row_sum_total", p.row_sum_total),
        ];
        let mut bad = Vec::new();
        for (k, want) in &self.expected {
            let (base, rel) = match k.strip_suffix("_lower") {
                Some(b) => (b, 1),
                None => (k.as_str(), 0),
            };
            let Some(&(_, v)) = got.iter().find(|(name, _)| *name == base) else {
                continue;
            };
            let ok = if rel == 1 {
                v >= want - tol
            } else {
                (v - want).abs() <= tol
            };
            if !ok {
                bad.push(format!("{}: {k} expected {want}, got {v}", self.name));
            }
        }
        bad
    }
}

fn check_basis(basis: &CMatrix, d: usize) -> Result<()> {
    if basis.nrows() != d || basis.ncols() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("{d}x{d}"),
            got: format!("{}x{}", basis.nrows(), basis.ncols()),
        });
    }
    let gram = basis.adjoint() * basis;
    let dev = (gram - CMatrix::identity(d, d))
        .iter()
        .fold(0.0_f64, |m, z| m.max(z.norm()));
    if dev > 1e-10 {
        return Err(Error::invalid(format!(
            "basis is not orthonormal (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// `c (a_i a_j* + a_j a_i*)` for columns `a_i`, `a_j` of `basis`.
fn sym_outer(basis: &CMatrix, i: usize, j: usize, c: f64) -> Result<HermMatrix> {
    let ai: CVector = basis.column(i).into_owned();
    let aj: CVector = basis.column(j).into_owned();
    let m = (&ai * aj.adjoint() + &aj * ai.adjoint()) * C64::new(c, 0.0);
    HermMatrix::new(m)
}

fn check_sizes(n: usize, d: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    if d < n {
        return Err(Error::invalid(format!("need d >= n, got d={d} < n={n}")));
    }
    Ok(())
}

pub fn build_example1(n: usize, d: usize) -> Result<ExampleInstance> {
    check_sizes(n, d)?;
    build_example1_in_basis(n, &CMatrix::identity(d, d))
}

/// Example 1 with `a_i` the columns of a unitary `basis`.
pub fn build_example1_in_basis(n: usize, basis: &CMatrix) -> Result<ExampleInstance> {
    let d = basis.nrows();
    check_sizes(n, d)?;
    check_basis(basis, d)?;
    let a = ChaosCoefficients::from_fn(n, d, |i, j| sym_outer(basis, i, j, 1.0))?;
    let mut expected = BTreeMap::new();
    expected.insert("gg_star_norm_lower".into(), ((n - 2) * n) as f64);
    expected.insert("sum_sq_norm".into(), 2.0 * (n - 1) as f64);
    Ok(ExampleInstance {
        name: ExampleName::Example1,
        n,
        d,
        data: ExampleData::Coefficients(a),
        expected,
    })
}

/// The pair-swap permutation: `c_{2k,2k+1} = c_{2k+1,2k} = 1`, zero elsewhere.
pub fn pair_swap(i: usize, j: usize) -> f64 {
    if i ^ 1 == j {
        1.0
    } else {
        0.0
    }
}

pub fn build_example2(n: usize, d: usize) -> Result<ExampleInstance> {
    check_sizes(n, d)?;
    build_example2_in_basis(n, &CMatrix::identity(d, d))
}

pub fn build_example2_in_basis(n: usize, basis: &CMatrix) -> Result<ExampleInstance> {
    if n % 2 != 0 {
        return Err(Error::invalid(format!("example2 needs even n, got {n}")));
    }
    let d = basis.nrows();
    check_sizes(n, d)?;
    check_basis(basis, d)?;
    let a = ChaosCoefficients::from_fn(n, d, |i, j| sym_outer(basis, i, j, pair_swap(i, j)))?;
    let mut expected = BTreeMap::new();
    expected.insert("gg_star_norm".into(), 1.0);
    expected.insert("sum_sq_norm".into(), 2.0);
    expected.insert("row_sum_total".into(), n as f64);
    Ok(ExampleInstance {
        name: ExampleName::Example2,
        n,
        d,
        data: ExampleData::Coefficients(a),
        expected,
    })
}

/// `H_{i,j}(x, y) = A_{i,j} x y` for Example 2 with Rademacher marginals.
pub fn example2_kernel(n: usize, d: usize) -> Result<(KernelTable, DiscreteDistribution)> {
    let ex = build_example2(n, d)?;
    let law = DiscreteDistribution::rademacher();
    let a = ex.coefficients().expect("example2 carries coefficients");
    Ok((KernelTable::product(a, &law)?, law))
}

/// The two `E ||U_n||` assemblies on one kernel: the one through `T_G` and
/// `T_var`, and the row-sum one. `ratio = t_row / t_g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomSeparation {
    pub n: usize,
    pub t_g: f64,
    pub t_row: f64,
    pub t_var: f64,
    pub t_max: f64,
    pub t_rowmax: f64,
    /// `L (t_g + t_var + sqrt(L) t_max)`, `L = log(de)`.
    pub mom1: f64,
    /// `L (t_row + sqrt(L) t_rowmax)`.
    pub mom3: f64,
    pub ratio: f64,
    pub exact: bool,
}

pub fn mom_separation(
    h: &KernelTable,
    law: &DiscreteDistribution,
    spec: &OracleSpec,
) -> Result<MomSeparation> {
    let (n, s, d) = (h.n(), h.support_size(), h.d());
    let (t_g, g_err) = t_g_term(h, law, 1.0, spec)?;
    let (t_max, m_err) = t_max_term(h, law, 1.0, spec)?;
    let t_row = t_row_term(h, law)?;
    let t_var = h.sum_expected_square(law).spectral_norm().sqrt();
    let p = law.probs();
    let mut rowmax = 0.0;
    for i1 in 0..n {
        for x in 0..s {
            let laws: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
                .filter(|&i2| i2 != i1)
                .map(|i2| {
                    (
                        (0..s)
                            .map(|y| h.get(i1, i2, x, y).spectral_norm().powi(2))
                            .collect(),
                        p.to_vec(),
                    )
                })
                .collect();
            rowmax += p[x] * expect_max_independent(&laws);
        }
    }
    let t_rowmax = rowmax.sqrt();
    let l = 1.0 + (d as f64).ln();
    let exact = (s as u128).pow(2 * n as u32) <= spec.cap as u128;
    Ok(MomSeparation {
        n,
        t_g,
        t_row,
        t_var,
        t_max,
        t_rowmax,
        mom1: l * (t_g + t_var + l.sqrt() * t_max),
        mom3: l * (t_row + l.sqrt() * t_rowmax),
        ratio: if t_g > 0.0 {
            t_row / t_g
        } else {
            f64::INFINITY
        },
        exact: exact && g_err == 0.0 && m_err == 0.0,
    })
}

/// Checks that `law` has mean 0 and variance 1 to `1e-12`.
pub fn check_standardized(law: &DiscreteDistribution) -> Result<()> {
    let mean = law.expect_value(|x| x);
    let var = law.expect_value(|x| x * x);
    if mean.abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "law must be centered, mean is {mean}"
        )));
    }
    if (var - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "law must have unit variance, variance is {var}"
        )));
    }
    Ok(())
}

/// `E max_{i <= n} |X_i|^p` for i.i.d. `X_i` with law `law`.
pub fn expect_max_abs_power(law: &DiscreteDistribution, n: usize, p: f64) -> f64 {
    let vals: Vec<f64> = (0..law.size())
        .map(|k| law.value(k).abs().powf(p))
        .collect();
    let laws = vec![(vals, law.probs().to_vec()); n];
    expect_max_independent(&laws)
}

/// The terms of the polynomial-chaos bound at `q`:
/// `var_term = ||sum A^2||^(1/2)`,
/// `g_term = (E max |X_i|^(2q))^(1/(2q)) ||GG*||^(1/2)`,
/// `max_term = max_i ||sum_j A_{ij}^2||^(1/2) (E max |X_i|^(2q))^(1/q)`,
/// and their assembly `r (var_term + g_term) + r^(3/2) max_term` with the
/// absolute constant set to 1.
pub fn polynomial_terms(
    a: &ChaosCoefficients,
    law: &DiscreteDistribution,
    q: f64,
) -> BTreeMap<String, f64> {
    let p = variance_proxies(a);
    let emax = expect_max_abs_power(law, a.n(), 2.0 * q);
    let row_max = p.row_sq_norms.iter().copied().fold(0.0, f64::max);
    let var_term = p.sum_sq_norm.sqrt();
    let g_term = emax.powf(1.0 / (2.0 * q)) * p.gg_star_norm.sqrt();
    let max_term = row_max.sqrt() * emax.powf(1.0 / q);
    let r = r_log_ed(q, a.d());
    let mut m = BTreeMap::new();
    m.insert("emax_2q".into(), emax);
    m.insert("var_term".into(), var_term);
    m.insert("g_term".into(), g_term);
    m.insert("max_term".into(), max_term);
    m.insert(
        "assembly".into(),
        r * (var_term + g_term) + r.powf(1.5) * max_term,
    );
    m
}

/// Kernel `H_{i,j}(x, y) = A_{i,j} x y` realizing
/// `Y = sum_{i != j} A_{i,j} X_i X_j`. `expected` holds
/// [`polynomial_terms`] at `q = 1` and `q = 2`, keys suffixed `_q1`, `_q2`.
pub fn build_polynomial_chaos(
    a: &ChaosCoefficients,
    law: &DiscreteDistribution,
) -> Result<ExampleInstance> {
    check_standardized(law)?;
    if !a.is_symmetric(1e-12) {
        return Err(Error::invalid("polynomial chaos needs A_{i,j} = A_{j,i}"));
    }
    let table = KernelTable::product(a, law)?;
    let mut expected = BTreeMap::new();
    for q in [1u32, 2] {
        for (k, v) in polynomial_terms(a, law, q as f64) {
            expected.insert(format!("{k}_q{q}"), v);
        }
    }
    Ok(ExampleInstance {
        name: ExampleName::PolynomialChaos,
        n: a.n(),
        d: a.d(),
        data: ExampleData::Kernel {
            table,
            law: law.clone(),
        },
        expected,
    })
}

/// The law `{-sqrt 2, 0, sqrt 2}` with probabilities `{1/4, 1/2, 1/4}`.
pub fn three_point_law() -> DiscreteDistribution {
    let r = std::f64::consts::SQRT_2;
    DiscreteDistribution::from_values(&[-r, 0.0, r], &[0.25, 0.5, 0.25]).expect("valid law")
}

/// CLI entry: Example 1 or 2 by name, or the polynomial chaos built on
/// Example 2 coefficients (Example 1 for odd `n`) with the three-point law.
pub fn build_named(name: ExampleName, n: usize, d: usize) -> Result<ExampleInstance> {
    match name {
        ExampleName::Example1 => build_example1(n, d),
        ExampleName::Example2 => build_example2(n, d),
        ExampleName::PolynomialChaos => {
            let base = if n % 2 == 0 {
                build_example2(n, d)?
            } else {
                build_example1(n, d)?
            };
            let a = base
                .coefficients()
                .expect("chaos examples carry coefficients")
                .clone();
            build_polynomial_chaos(&a, &three_point_law())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_small() {
        let e = build_example1(4, 4).unwrap();
        assert!(e.check_proxies(1e-9).is_empty());
        let p = variance_proxies(e.coefficients().unwrap());
        assert_abs_diff_eq!(p.sum_sq_norm, 6.0, epsilon = 1e-12);
        assert!(build_example1(4, 3).is_err());
        assert_eq!(
            build_example1(2, 2).unwrap().expected["gg_star_norm_lower"],
            0.0
        );
    }

    #[test]
    fn example2_values() {
        let e = build_example2(4, 4).unwrap();
        assert!(
            e.check_proxies(1e-9).is_empty(),
            "{:?}",
            e.check_proxies(1e-9)
        );
        assert!(build_example2(5, 6).is_err());
    }

    #[test]
    fn names_round_trip() {
        for e in ExampleName::ALL {
            assert_eq!(e.as_str().parse::<ExampleName>().unwrap(), e);
        }
        assert!("example3".parse::<ExampleName>().is_err());
    }

    #[test]
    fn polynomial_validation() {
        let a = build_example2(4, 4)
            .unwrap()
            .coefficients()
            .unwrap()
            .clone();
        let bad = DiscreteDistribution::from_values(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(build_polynomial_chaos(&a, &bad).is_err());
        let e = build_polynomial_chaos(&a, &DiscreteDistribution::rademacher()).unwrap();
        assert_eq!(e.expected["emax_2q_q1"], 1.0);
        assert_eq!(e.expected["emax_2q_q2"], 1.0);
        let z = ChaosCoefficients::zeros(3, 2);
        let ez = build_polynomial_chaos(&z, &three_point_law()).unwrap();
        assert_eq!(ez.expected["assembly_q2"], 0.0);
    }
}
