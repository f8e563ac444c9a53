use matconc::adamczak::{sphere_sup_estimate, SphereObjective};
use matconc::bounds::theorem::{assemble, KernelTerms, OracleSpec, Variant};
use matconc::chaos::{exact_chaos_moment, khintchine_bounds};
use matconc::corpus::{
    random_coefficients, random_degenerate_kernel, random_herm, random_kernel, random_law,
    random_rect,
};
use matconc::enumerate::replica_rng;
use matconc::linalg::{hermitian_dilation, HermMatrix};
use matconc::ustat::{degeneracy_check, e2_gg_star, pi_project};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dilation_preserves_norm(seed in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let a = random_rect(&mut replica_rng(seed, 0), r, c, true);
        let dn = hermitian_dilation(&a).spectral_norm();
        prop_assert!((dn - a.gram_rows().spectral_norm().sqrt()).abs() <= 1e-10 * dn.max(1.0));
    }

    #[test]
    fn khintchine_sandwich(seed in any::<u64>(), n in 2usize..5, d in 1usize..4, q in 1.0f64..3.0) {
        let a = random_coefficients(&mut replica_rng(seed, 0), n, d, seed % 2 == 0);
        let kb = khintchine_bounds(&a, q).unwrap();
        let m = exact_chaos_moment(&a, q).unwrap().value;
        prop_assert!(kb.lower <= m * (1.0 + 1e-12));
        prop_assert!(m <= kb.upper * (1.0 + 1e-12));
        prop_assert!(kb.proxies.gg_star_norm <= kb.proxies.row_sum_total * (1.0 + 1e-12));
    }

    #[test]
    fn chaos_moment_is_permutation_invariant(seed in any::<u64>(), n in 2usize..5, d in 1usize..3) {
        let a = random_coefficients(&mut replica_rng(seed, 0), n, d, true);
        let perm: Vec<usize> = (0..n).rev().collect();
        let m1 = exact_chaos_moment(&a, 2.0).unwrap().value;
        let m2 = exact_chaos_moment(&a.permuted(&perm).unwrap(), 2.0).unwrap().value;
        prop_assert!((m1 - m2).abs() <= 1e-12 * m1.max(1e-300));
    }

    #[test]
    fn hoeffding_reconstructs(seed in any::<u64>(), n in 2usize..5, d in 1usize..4, s in 2usize..4) {
        let mut rng = replica_rng(seed, 0);
        let law = random_law(&mut rng, s);
        let h = random_kernel(&mut rng, n, d, s, true);
        let p = pi_project(&h, &law).unwrap();
        let scale = h.max_norm().max(1.0);
        for (i1, i2) in h.pairs() {
            for x in 0..s {
                for y in 0..s {
                    let r = (&p.reconstruct(i1, i2, x, y) - h.get(i1, i2, x, y)).max_abs_entry();
                    prop_assert!(r <= 1e-12 * scale);
                }
            }
        }
        prop_assert!(degeneracy_check(&p.pi2, &law, 1e-9).unwrap());
    }

    #[test]
    fn e2_gg_star_below_row_sums(seed in any::<u64>(), n in 2usize..5, d in 1usize..4, s in 2usize..4) {
        let (h, law) = random_degenerate_kernel(&mut replica_rng(seed, 0), n, d, s, true).unwrap();
        let x1: Vec<usize> = (0..n).map(|i| (seed as usize >> i) % s).collect();
        let lhs = e2_gg_star(&h, &law, &x1).unwrap().spectral_norm();
        let mut rhs = 0.0;
        for i1 in 0..n {
            let mut acc = HermMatrix::zeros(d);
            for i2 in (0..n).filter(|&j| j != i1) {
                acc += &h.e2_square(&law, i1, i2, x1[i1]);
            }
            rhs += acc.spectral_norm();
        }
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn sphere_sup_below_relaxation(seed in any::<u64>(), d in 1usize..5, k in 1usize..6) {
        let mut rng = replica_rng(seed, 0);
        let terms = (0..k).map(|j| (1.0 / (j + 1) as f64, random_herm(&mut rng, d, true))).collect();
        let s = sphere_sup_estimate(&SphereObjective::new(d, terms).unwrap(), 8);
        prop_assert!(s.sup_estimate <= s.relaxation + 1e-8);
        prop_assert!(s.sup_estimate >= 0.0);
    }

    #[test]
    fn theorem_bounds_are_homogeneous(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (h, law) = random_degenerate_kernel(&mut replica_rng(seed, 0), 3, 2, 2, true).unwrap();
        let spec = OracleSpec::default();
        let a = KernelTerms::compute(&h, &law, 1.0, &spec).unwrap();
        let b = KernelTerms::compute(&h.scaled(c), &law, 1.0, &spec).unwrap();
        for v in Variant::ALL {
            let (x, y) = (assemble(&a, v), assemble(&b, v));
            prop_assert!((y - c * x).abs() <= 1e-10 * y.max(1e-300));
        }
    }
}
