//! Dense Hermitian and rectangular matrix primitives.
//!
//! Every norm in the crate goes through one kernel: the Hermitian
//! eigendecomposition. Rectangular spectral norms and singular values are
//! read off the Hermitian dilation `[[0, A], [A*, 0]]`.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosCoefficients;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Asymmetry (relative to `max(1, max |entry|)`) absorbed by symmetrization.
pub const HERMITIAN_TOL: f64 = 1e-12;

fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// A dense self-adjoint `d x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix {
    data: CMatrix,
}

impl HermMatrix {
    /// Builds a Hermitian matrix, absorbing asymmetry up to [`HERMITIAN_TOL`]
    /// by replacing `M` with `(M + M*)/2`. Larger asymmetry is an error.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix with dim >= 1".into(),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if !all_finite(&m) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let scale = max_abs_entry(&m).max(1.0);
        let asym = max_abs_entry(&(&m - m.adjoint()));
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::invalid(format!(
                "matrix is not self-adjoint (max |M - M*| = {asym:.3e})"
            )));
        }
        Ok(Self {
            data: symmetrize(&m),
        })
    }

    /// Symmetrizes without the tolerance check. Used for products that are
    /// Hermitian in exact arithmetic (squares, Gram matrices, sums of those).
    pub(crate) fn from_computed(m: CMatrix) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows() > 0);
        Self {
            data: symmetrize(&m),
        }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    /// Row-major real entries.
    pub fn from_real_rows(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", d * d),
                got: format!("{} entries", entries.len()),
            });
        }
        Self::from_real(&DMatrix::from_row_slice(d, d, entries))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self {
            data: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self {
            data: CMatrix::identity(d, d),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        assert!(d >= 1, "dimension must be positive");
        let mut data = CMatrix::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            data[(i, i)] = C64::new(v, 0.0);
        }
        Self { data }
    }

    /// `v v*`.
    pub fn rank_one(v: &CVector) -> Self {
        Self::from_computed(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.data.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `max |eigenvalue|`.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim() == 1 {
            return self.data[(0, 0)].re.abs();
        }
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
    }

    /// `(sum |lambda|^p)^(1/p)`; `p = 1` is the nuclear norm.
    pub fn schatten_norm(&self, p: f64) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|l| l.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// `tr(M^p)` with negative roundoff eigenvalues clamped to zero; for PSD
    /// `M` this equals `||M^(1/2)||_{S_2p}^{2p}`.
    pub fn trace_power(&self, p: f64) -> f64 {
        self.eigenvalues().iter().map(|l| l.max(0.0).powf(p)).sum()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn square(&self) -> Self {
        Self::from_computed(&self.data * &self.data)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.map(|z| z * c),
        }
    }

    /// `v* M v`, real for Hermitian `M`.
    pub fn quadratic_form(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.data * v)[(0, 0)].re
    }

    pub fn max_abs_entry(&self) -> f64 {
        max_abs_entry(&self.data)
    }

    /// Smallest eigenvalue is at least `-tol * max(1, ||M||)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let ev = self.eigenvalues();
        let scale = ev.iter().fold(1.0_f64, |a, l| a.max(l.abs()));
        ev[0] >= -tol * scale
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }
}

impl Add<&HermMatrix> for &HermMatrix {
    type Output = HermMatrix;
    fn add(self, rhs: &HermMatrix) -> HermMatrix {
        HermMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub<&HermMatrix> for &HermMatrix {
    type Output = HermMatrix;
    fn sub(self, rhs: &HermMatrix) -> HermMatrix {
        HermMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

impl AddAssign<&HermMatrix> for HermMatrix {
    fn add_assign(&mut self, rhs: &HermMatrix) {
        self.data += &rhs.data;
    }
}

impl Mul<f64> for &HermMatrix {
    type Output = HermMatrix;
    fn mul(self, c: f64) -> HermMatrix {
        self.scaled(c)
    }
}

/// A dense complex `d1 x d2` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RectMatrix {
    data: CMatrix,
}

impl RectMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::ShapeMismatch {
                expected: "positive dimensions".into(),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if !all_finite(&m) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(Self { data: m })
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", entries.len()),
            });
        }
        Self::from_real(&DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn adjoint(&self) -> RectMatrix {
        RectMatrix {
            data: self.data.adjoint(),
        }
    }

    /// Singular values in descending order, read off the dilation spectrum.
    pub fn singular_values(&self) -> Vec<f64> {
        let k = self.rows().min(self.cols());
        let mut ev = hermitian_dilation(self).eigenvalues();
        ev.reverse();
        ev.truncate(k);
        ev.into_iter().map(|s| s.max(0.0)).collect()
    }

    pub fn spectral_norm(&self) -> f64 {
        hermitian_dilation(self).spectral_norm()
    }

    /// `A A*` (rows x rows).
    pub fn gram_rows(&self) -> HermMatrix {
        HermMatrix::from_computed(&self.data * self.data.adjoint())
    }

    /// `A* A` (cols x cols).
    pub fn gram_cols(&self) -> HermMatrix {
        HermMatrix::from_computed(self.data.adjoint() * &self.data)
    }
}

/// Spectral norm of either matrix kind.
pub trait SpectralNorm {
    fn spectral_norm(&self) -> f64;
}

impl SpectralNorm for HermMatrix {
    fn spectral_norm(&self) -> f64 {
        HermMatrix::spectral_norm(self)
    }
}

impl SpectralNorm for RectMatrix {
    fn spectral_norm(&self) -> f64 {
        RectMatrix::spectral_norm(self)
    }
}

pub fn spectral_norm<M: SpectralNorm + ?Sized>(m: &M) -> f64 {
    m.spectral_norm()
}

/// Spectral norm of an unvalidated complex matrix.
pub fn matrix_spectral_norm(m: &CMatrix) -> Result<f64> {
    Ok(RectMatrix::new(m.clone())?.spectral_norm())
}

/// `[[0, A], [A*, 0]]`, of dimension `d1 + d2`.
pub fn hermitian_dilation(a: &RectMatrix) -> HermMatrix {
    let (r, c) = (a.rows(), a.cols());
    let mut m = CMatrix::zeros(r + c, r + c);
    m.view_mut((0, r), (r, c)).copy_from(&a.data);
    m.view_mut((r, 0), (c, r)).copy_from(&a.data.adjoint());
    HermMatrix { data: m }
}

/// An `n x n` array of Hermitian `d x d` blocks. The flat `(nd) x (nd)`
/// matrix is self-adjoint exactly when `blocks[i][j] = blocks[j][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockHermMatrix {
    n: usize,
    d: usize,
    blocks: Vec<HermMatrix>,
}

impl BlockHermMatrix {
    /// `blocks` is row-major, `n * n` entries.
    pub fn new(n: usize, blocks: Vec<HermMatrix>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("block matrix needs n >= 2"));
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
        Ok(Self { n, d, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_dim(&self) -> usize {
        self.d
    }

    pub fn block(&self, i: usize, j: usize) -> &HermMatrix {
        &self.blocks[i * self.n + j]
    }

    pub fn flat(&self) -> CMatrix {
        let (n, d) = (self.n, self.d);
        let mut m = CMatrix::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                m.view_mut((i * d, j * d), (d, d))
                    .copy_from(self.block(i, j).matrix());
            }
        }
        m
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                max_abs_entry(&(self.block(i, j).matrix() - self.block(j, i).matrix())) <= tol
            })
        })
    }

    /// `G G*` as an `(nd) x (nd)` Hermitian matrix.
    pub fn gram(&self) -> HermMatrix {
        let g = self.flat();
        HermMatrix::from_computed(&g * g.adjoint())
    }

    pub fn spectral_norm(&self) -> f64 {
        let g = self.flat();
        RectMatrix { data: g }.spectral_norm()
    }
}

/// Extracts the `(i, j)` `d x d` block of a flat matrix.
pub fn block_of(m: &CMatrix, d: usize, i: usize, j: usize) -> CMatrix {
    m.view((i * d, j * d), (d, d)).into_owned()
}

/// The variance proxies that govern the norm of the order-2 chaos.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProxies {
    /// `||G G*||`.
    pub gg_star_norm: f64,
    /// `||sum_{i1 != i2} A_{i1,i2}^2||`.
    pub sum_sq_norm: f64,
    /// `||sum_{i2 != i1} A_{i1,i2}^2||` for each row `i1`.
    pub row_sq_norms: Vec<f64>,
    /// Sum of `row_sq_norms`; upper bound for `gg_star_norm`.
    pub row_sum_total: f64,
}

/// The block matrix `G` with off-diagonal blocks `A_{i1,i2}` and zero
/// diagonal. Zero diagonals are enforced when `ChaosCoefficients` is built.
pub fn assemble_block_g(a: &ChaosCoefficients) -> BlockHermMatrix {
    let n = a.n();
    let blocks = (0..n * n).map(|k| a.get(k / n, k % n).clone()).collect();
    BlockHermMatrix::new(n, blocks).expect("chaos coefficients have n >= 2 and a common dim")
}

pub fn variance_proxies(a: &ChaosCoefficients) -> VarianceProxies {
    let (n, d) = (a.n(), a.d());
    let mut total = HermMatrix::zeros(d);
    let mut row_sq_norms = Vec::with_capacity(n);
    for i1 in 0..n {
        let mut row = HermMatrix::zeros(d);
        for i2 in (0..n).filter(|&i2| i2 != i1) {
            row += &a.get(i1, i2).square();
        }
        row_sq_norms.push(row.spectral_norm());
        total += &row;
    }
    let gg_star_norm = assemble_block_g(a).gram().spectral_norm();
    VarianceProxies {
        gg_star_norm,
        sum_sq_norm: total.spectral_norm(),
        row_sum_total: row_sq_norms.iter().sum(),
        row_sq_norms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_norm() {
        assert_abs_diff_eq!(
            HermMatrix::diag(&[3.0, -4.0]).spectral_norm(),
            4.0,
            epsilon = 1e-14
        );
        for d in 1..6 {
            assert_abs_diff_eq!(
                HermMatrix::identity(d).spectral_norm(),
                1.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(
            HermMatrix::new(m.clone()),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            RectMatrix::new(m.clone()),
            Err(Error::InvalidInput(_))
        ));
        assert!(matrix_spectral_norm(&m).is_err());

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(HermMatrix::from_real(&asym).is_err());
    }

    #[test]
    fn absorbs_tiny_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5 + 1e-14, 0.5, 2.0]);
        let h = HermMatrix::from_real(&m).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0));
    }

    #[test]
    fn dilation_small_cases() {
        let a = RectMatrix::from_real_rows(1, 1, &[1.0]).unwrap();
        let da = hermitian_dilation(&a);
        assert_eq!(
            da.matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(|x| C64::new(x, 0.0))
        );
        assert_abs_diff_eq!(da.spectral_norm(), 1.0, epsilon = 1e-14);

        let b = RectMatrix::from_real_rows(1, 2, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(b.spectral_norm(), 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            hermitian_dilation(&b).spectral_norm(),
            2f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn dilation_square_is_block_diagonal() {
        let a = RectMatrix::new(CMatrix::from_fn(2, 3, |i, j| {
            C64::new(i as f64 - j as f64, 0.5 * j as f64)
        }))
        .unwrap();
        let d2 = hermitian_dilation(&a).square();
        let aa = a.gram_rows();
        let ata = a.gram_cols();
        let m = d2.matrix();
        assert!((block_view(m, 0, 0, 2, 2) - aa.matrix()).norm() < 1e-12);
        assert!((block_view(m, 2, 2, 3, 3) - ata.matrix()).norm() < 1e-12);
        assert!(block_view(m, 0, 2, 2, 3).norm() < 1e-12);
    }

    fn block_view(m: &CMatrix, r: usize, c: usize, h: usize, w: usize) -> CMatrix {
        m.view((r, c), (h, w)).into_owned()
    }

    #[test]
    fn n2_block_g() {
        let a = HermMatrix::from_real_rows(2, &[1.0, 2.0, 2.0, -1.0]).unwrap();
        let coeffs = ChaosCoefficients::from_fn(2, 2, |_, _| Ok(a.clone())).unwrap();
        let g = assemble_block_g(&coeffs);
        assert!(g.is_self_adjoint(0.0));
        let gg = g.gram();
        let a2 = a.square();
        let flat = gg.matrix();
        assert!((block_of(flat, 2, 0, 0) - a2.matrix()).norm() < 1e-12);
        assert!((block_of(flat, 2, 1, 1) - a2.matrix()).norm() < 1e-12);
        assert!(block_of(flat, 2, 0, 1).norm() < 1e-12);
    }

    #[test]
    fn zero_coefficients_have_zero_proxies() {
        let coeffs = ChaosCoefficients::zeros(4, 3);
        let v = variance_proxies(&coeffs);
        assert_eq!(v.gg_star_norm, 0.0);
        assert_eq!(v.sum_sq_norm, 0.0);
        assert_eq!(v.row_sum_total, 0.0);
        assert!(v.row_sq_norms.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn block_matrix_requires_common_dim() {
        let blocks = vec![
            HermMatrix::zeros(2),
            HermMatrix::zeros(2),
            HermMatrix::zeros(3),
            HermMatrix::zeros(2),
        ];
        assert!(BlockHermMatrix::new(2, blocks).is_err());
        assert!(BlockHermMatrix::new(1, vec![HermMatrix::zeros(1)]).is_err());
    }

    #[test]
    fn singular_values_of_diagonal_rectangle() {
        let a = RectMatrix::from_real_rows(2, 3, &[3.0, 0.0, 0.0, 0.0, -2.0, 0.0]).unwrap();
        let s = a.singular_values();
        assert_eq!(s.len(), 2);
        assert_abs_diff_eq!(s[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 2.0, epsilon = 1e-12);
    }
}
