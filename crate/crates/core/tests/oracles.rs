//! Library values against independent brute-force oracles. Norms here come
//! from nalgebra's SVD rather than the Hermitian eigensolver the library
//! uses, and expectations from plain nested loops.

use approx::assert_relative_eq;
use matconc::bounds::theorem::{t_g_term, KernelTerms, OracleSpec};
use matconc::chaos::{exact_chaos_moment, khintchine_bounds, ChaosCoefficients};
use matconc::corpus::{random_coefficients, random_degenerate_kernel, random_herm};
use matconc::enumerate::replica_rng;
use matconc::linalg::{CMatrix, HermMatrix, C64};
use matconc::ustat::{exact_u_moment, DiscreteDistribution, KernelTable, Mode};

fn svd_norm(m: &CMatrix) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn signs(mask: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

fn brute_chaos_moment(a: &ChaosCoefficients, q: f64) -> f64 {
    let (n, d) = (a.n(), a.d());
    let mut acc = 0.0;
    for m1 in 0..1usize << n {
        for m2 in 0..1usize << n {
            let (e1, e2) = (signs(m1, n), signs(m2, n));
            let mut x = CMatrix::zeros(d, d);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        x += a.get(i, j).matrix() * C64::new(e1[i] * e2[j], 0.0);
                    }
                }
            }
            acc += svd_norm(&x).powf(2.0 * q);
        }
    }
    (acc / (1u64 << (2 * n)) as f64).powf(1.0 / (2.0 * q))
}

/// Visits every `x in [0, s)^len` with its product probability.
fn for_each_config(probs: &[f64], len: usize, mut f: impl FnMut(&[usize], f64)) {
    let s = probs.len();
    let mut idx = vec![0usize; len];
    loop {
        let w: f64 = idx.iter().map(|&k| probs[k]).product();
        f(&idx, w);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < s {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn brute_u_moment(h: &KernelTable, law: &DiscreteDistribution, q: f64, decoupled: bool) -> f64 {
    let (n, d) = (h.n(), h.d());
    let len = if decoupled { 2 * n } else { n };
    let mut acc = 0.0;
    for_each_config(law.probs(), len, |idx, w| {
        let (x1, x2) = if decoupled {
            idx.split_at(n)
        } else {
            (idx, idx)
        };
        let mut u = CMatrix::zeros(d, d);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    u += h.get(i, j, x1[i], x2[j]).matrix();
                }
            }
        }
        acc += w * svd_norm(&u).powf(2.0 * q);
    });
    acc.powf(1.0 / (2.0 * q))
}

#[test]
fn chaos_moment_matches_brute_force() {
    for (k, &(n, d)) in [(2usize, 1usize), (3, 2), (4, 3)].iter().enumerate() {
        let a = random_coefficients(&mut replica_rng(11, k as u64), n, d, k % 2 == 1);
        for q in [1.0, 2.0, 1.5] {
            let got = exact_chaos_moment(&a, q).unwrap();
            assert!(got.is_exact());
            assert_relative_eq!(got.value, brute_chaos_moment(&a, q), max_relative = 1e-10);
        }
    }
}

#[test]
fn chaos_n2_scalar_example() {
    let one = HermMatrix::diag(&[1.0]);
    let a = ChaosCoefficients::from_fn(2, 1, |_, _| Ok(one.clone())).unwrap();
    let m = exact_chaos_moment(&a, 1.0).unwrap();
    assert_relative_eq!(m.value, 2f64.sqrt(), max_relative = 1e-14);
    let kb = khintchine_bounds(&a, 1.0).unwrap();
    assert_relative_eq!(kb.lower, 2f64.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(
        kb.upper,
        4.0 / 1f64.exp().sqrt() * 2f64.sqrt(),
        max_relative = 1e-14
    );
    assert!((kb.upper - 3.431).abs() < 1e-3);
}

#[test]
fn u_moments_match_brute_force() {
    for (k, &(n, d, s)) in [(2usize, 1usize, 2usize), (3, 2, 3), (4, 2, 2)]
        .iter()
        .enumerate()
    {
        let (h, law) =
            random_degenerate_kernel(&mut replica_rng(21, k as u64), n, d, s, true).unwrap();
        for q in [1.0, 2.0] {
            let c = exact_u_moment(&h, &law, q, Mode::Coupled).unwrap();
            assert_relative_eq!(
                c.value,
                brute_u_moment(&h, &law, q, false),
                max_relative = 1e-10
            );
            let dd = exact_u_moment(&h, &law, q, Mode::Decoupled).unwrap();
            assert_relative_eq!(
                dd.value,
                brute_u_moment(&h, &law, q, true),
                max_relative = 1e-10
            );
        }
    }
}

#[test]
fn product_kernel_equals_chaos() {
    let law = DiscreteDistribution::rademacher();
    for k in 0..6u64 {
        let a = random_coefficients(
            &mut replica_rng(31, k),
            2 + (k as usize % 3),
            1 + (k as usize % 3),
            k % 2 == 0,
        );
        let h = KernelTable::product(&a, &law).unwrap();
        for q in [1.0, 2.0] {
            let u = exact_u_moment(&h, &law, q, Mode::Decoupled).unwrap().value;
            let c = exact_chaos_moment(&a, q).unwrap().value;
            assert_relative_eq!(u, c, max_relative = 1e-12);
        }
    }
}

/// `E_2 G~ G~*` assembled entry by entry from its definition
/// `sum_k E_z H_{ik}(x_i, z) H_{jk}(x_j, z)`.
fn brute_e2_gg(h: &KernelTable, law: &DiscreteDistribution, x1: &[usize]) -> CMatrix {
    let (n, d, s) = (h.n(), h.d(), h.support_size());
    let mut g = CMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let mut blk = CMatrix::zeros(d, d);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                for z in 0..s {
                    blk += h.get(i, k, x1[i], z).matrix()
                        * h.get(j, k, x1[j], z).matrix()
                        * C64::new(law.probs()[z], 0.0);
                }
            }
            g.view_mut((i * d, j * d), (d, d)).copy_from(&blk);
        }
    }
    g
}

#[test]
fn kernel_terms_match_brute_force() {
    let spec = OracleSpec::default();
    for (k, &(n, d, s)) in [(3usize, 2usize, 2usize), (3, 1, 3), (4, 2, 2)]
        .iter()
        .enumerate()
    {
        let (h, law) =
            random_degenerate_kernel(&mut replica_rng(41, k as u64), n, d, s, true).unwrap();
        for q in [1.0, 2.0] {
            let t = KernelTerms::compute(&h, &law, q, &spec).unwrap();
            let p = law.probs();

            let mut tmax = 0.0;
            for_each_config(p, 2 * n, |idx, w| {
                let (x1, x2) = idx.split_at(n);
                let mut best: f64 = 0.0;
                for i in 0..n {
                    let mut acc = CMatrix::zeros(d, d);
                    for j in (0..n).filter(|&j| j != i) {
                        let m = h.get(i, j, x1[i], x2[j]).matrix();
                        acc += m * m;
                    }
                    best = best.max(svd_norm(&acc));
                }
                tmax += w * best.powf(q);
            });
            assert_relative_eq!(t.t_max, tmax.powf(0.5 / q), max_relative = 1e-10);

            let mut tg = 0.0;
            for_each_config(p, n, |x1, w| {
                tg += w * svd_norm(&brute_e2_gg(&h, &law, x1)).powf(q)
            });
            assert_relative_eq!(t.t_g, tg.powf(0.5 / q), max_relative = 1e-10);
            assert_relative_eq!(
                t_g_term(&h, &law, q, &spec).unwrap().0,
                t.t_g,
                max_relative = 1e-14
            );

            let mut var = CMatrix::zeros(d, d);
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    for x in 0..s {
                        for y in 0..s {
                            let m = h.get(i, j, x, y).matrix();
                            var += m * m * C64::new(p[x] * p[y], 0.0);
                        }
                    }
                }
            }
            assert_relative_eq!(t.t_var, svd_norm(&var).sqrt(), max_relative = 1e-10);

            // T_rowmax by enumerating the other row entries jointly
            let mut rowmax = 0.0;
            for i in 0..n {
                for x in 0..s {
                    for_each_config(p, n, |ys, w| {
                        let best = (0..n)
                            .filter(|&j| j != i)
                            .map(|j| svd_norm(h.get(i, j, x, ys[j]).matrix()).powf(2.0 * q))
                            .fold(0.0, f64::max);
                        rowmax += p[x] * w * best;
                    });
                }
            }
            assert_relative_eq!(t.t_rowmax, rowmax.powf(0.5 / q), max_relative = 1e-10);
        }
    }
}

#[test]
fn random_herm_norms_agree_with_svd() {
    let mut rng = replica_rng(51, 0);
    for d in 1..6 {
        let m = random_herm(&mut rng, d, true);
        assert_relative_eq!(
            m.spectral_norm(),
            svd_norm(m.matrix()),
            max_relative = 1e-12
        );
    }
}
