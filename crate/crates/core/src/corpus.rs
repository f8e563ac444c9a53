//! Seeded random instances for verification corpora.

use rand::Rng;

use crate::chaos::ChaosCoefficients;
use crate::error::Result;
use crate::linalg::{CMatrix, HermMatrix, RectMatrix, C64};
use crate::ustat::{pi_project, DiscreteDistribution, KernelTable};

fn entry<R: Rng>(rng: &mut R, complex: bool) -> C64 {
    let re = rng.random_range(-1.0..1.0);
    let im = if complex {
        rng.random_range(-1.0..1.0)
    } else {
        0.0
    };
    C64::new(re, im)
}

/// Hermitian matrix with entries uniform on `[-1, 1]` (real and imaginary
/// parts off the diagonal when `complex`).
pub fn random_herm<R: Rng>(rng: &mut R, d: usize, complex: bool) -> HermMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..d {
            let z = entry(rng, complex);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermMatrix::new(m).expect("constructed Hermitian")
}

pub fn random_rect<R: Rng>(rng: &mut R, rows: usize, cols: usize, complex: bool) -> RectMatrix {
    let m = CMatrix::from_fn(rows, cols, |_, _| entry(rng, complex));
    RectMatrix::new(m).expect("nonempty shape")
}

/// Unitary factor of the QR decomposition of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let m = CMatrix::from_fn(d, d, |_, _| entry(rng, true));
    m.qr().q()
}

/// Coefficients with `A_{i,j} = A_{j,i}` and zero diagonal.
pub fn random_coefficients<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    complex: bool,
) -> ChaosCoefficients {
    let mut blocks = vec![HermMatrix::zeros(d); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let a = random_herm(rng, d, complex);
            blocks[j * n + i] = a.clone();
            blocks[i * n + j] = a;
        }
    }
    ChaosCoefficients::new(n, blocks).expect("valid shape")
}

/// Law on `s` labelled points with scalar payloads in `[-2, 2]` and
/// probabilities bounded below by `0.2 / s`.
pub fn random_law<R: Rng>(rng: &mut R, s: usize) -> DiscreteDistribution {
    let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let head: f64 = probs[..s - 1].iter().sum();
    probs[s - 1] = 1.0 - head;
    let values: Vec<f64> = (0..s).map(|_| rng.random_range(-2.0..2.0)).collect();
    DiscreteDistribution::from_values(&values, &probs).expect("valid law")
}

/// Permutation-symmetric kernel with independent random entries for
/// `i1 < i2`.
pub fn random_kernel<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    s: usize,
    complex: bool,
) -> KernelTable {
    KernelTable::from_upper_fn(n, d, s, |_, _, _, _| Ok(random_herm(rng, d, complex)))
        .expect("valid shape")
}

/// A random kernel and law, with the kernel replaced by its completely
/// degenerate part.
pub fn random_degenerate_kernel<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    s: usize,
    complex: bool,
) -> Result<(KernelTable, DiscreteDistribution)> {
    let law = random_law(rng, s);
    let h = random_kernel(rng, n, d, s, complex);
    Ok((pi_project(&h, &law)?.pi2, law))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::replica_rng;
    use crate::ustat::degeneracy_check;

    #[test]
    fn seeded_and_degenerate() {
        let a = random_coefficients(&mut replica_rng(7, 0), 3, 2, true);
        let b = random_coefficients(&mut replica_rng(7, 0), 3, 2, true);
        assert_eq!(a, b);
        assert!(a.is_symmetric(0.0));
        let (h, law) = random_degenerate_kernel(&mut replica_rng(9, 1), 3, 2, 3, true).unwrap();
        assert!(degeneracy_check(&h, &law, 1e-12).unwrap());
        let u = random_unitary(&mut replica_rng(1, 1), 3);
        let dev = (u.adjoint() * &u - CMatrix::identity(3, 3)).norm();
        assert!(dev < 1e-12);
    }
}
