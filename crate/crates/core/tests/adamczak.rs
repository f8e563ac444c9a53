use approx::assert_relative_eq;
use matconc::adamczak::{
    adamczak_terms, sphere_sup_estimate, AdamczakVariant, SphereObjective, DEFAULT_RESTARTS,
};
use matconc::bounds::theorem::OracleSpec;
use matconc::chaos::ChaosCoefficients;
use matconc::corpus::{random_coefficients, random_degenerate_kernel, random_herm};
use matconc::enumerate::replica_rng;
use matconc::linalg::{CVector, HermMatrix, C64};
use matconc::ustat::{DiscreteDistribution, KernelTable};

#[test]
fn diagonal_objective_attains_relaxation() {
    let terms = vec![
        (0.3, HermMatrix::diag(&[1.0, -2.0, 0.5])),
        (0.7, HermMatrix::diag(&[0.5, 1.0, -1.5])),
    ];
    let obj = SphereObjective::new(3, terms).unwrap();
    let s = sphere_sup_estimate(&obj, DEFAULT_RESTARTS);
    let want = [
        0.3 * 1.0 + 0.7 * 0.25,
        0.3 * 4.0 + 0.7,
        0.3 * 0.25 + 0.7 * 2.25,
    ];
    let max = want.iter().copied().fold(0.0, f64::max);
    assert_relative_eq!(s.sup_estimate, max, max_relative = 1e-12);
    assert_relative_eq!(s.relaxation, max, max_relative = 1e-12);
}

/// Grid over `phi = (cos a, e^{ib} sin a)`, which covers the unit sphere of
/// `C^2` up to phase, then a finer grid around the best cell.
fn grid_sup(obj: &SphereObjective) -> f64 {
    let eval = |a: f64, b: f64| {
        let phi = CVector::from_vec(vec![C64::new(a.cos(), 0.0), C64::from_polar(a.sin(), b)]);
        obj.value(&phi)
    };
    let (na, nb) = (400, 800);
    let (ha, hb) = (
        std::f64::consts::FRAC_PI_2 / na as f64,
        2.0 * std::f64::consts::PI / nb as f64,
    );
    let mut best = (0.0, 0.0, f64::MIN);
    for i in 0..=na {
        for j in 0..nb {
            let (a, b) = (i as f64 * ha, j as f64 * hb);
            let v = eval(a, b);
            if v > best.2 {
                best = (a, b, v);
            }
        }
    }
    for _ in 0..4 {
        let (a0, b0, _) = best;
        let (fa, fb) = (ha / 50.0, hb / 50.0);
        for i in -100..=100 {
            for j in -100..=100 {
                let (a, b) = (a0 + i as f64 * fa, b0 + j as f64 * fb);
                let v = eval(a, b);
                if v > best.2 {
                    best = (a, b, v);
                }
            }
        }
    }
    best.2
}

#[test]
fn ascent_matches_grid_search_in_two_dimensions() {
    for k in 0..6u64 {
        let mut rng = replica_rng(80, k);
        let terms = (0..5)
            .map(|j| (0.1 + 0.2 * j as f64, random_herm(&mut rng, 2, true)))
            .collect();
        let obj = SphereObjective::new(2, terms).unwrap();
        let s = sphere_sup_estimate(&obj, DEFAULT_RESTARTS);
        let g = grid_sup(&obj);
        assert!(
            (s.sup_estimate - g).abs() <= 1e-6,
            "ascent {} grid {}",
            s.sup_estimate,
            g
        );
        assert!(s.sup_estimate <= s.relaxation + 1e-8);
    }
}

#[test]
fn b_never_exceeds_relaxation() {
    for k in 0..20u64 {
        let (h, law) =
            random_degenerate_kernel(&mut replica_rng(81, k), 3, 3, 2, k % 2 == 0).unwrap();
        let t =
            adamczak_terms(&h, &law, 1.0, AdamczakVariant::Full, &OracleSpec::default()).unwrap();
        assert!(t.b <= t.b_relaxation + 1e-8);
        assert!([t.a, t.b, t.gamma, t.d_term, t.mean_norm_estimate]
            .iter()
            .all(|v| *v >= 0.0));
    }
}

#[test]
fn d_term_on_product_kernel() {
    let law = DiscreteDistribution::rademacher();
    let a = random_coefficients(&mut replica_rng(82, 0), 3, 2, false);
    let h = KernelTable::product(&a, &law).unwrap();
    let t = adamczak_terms(&h, &law, 1.0, AdamczakVariant::Full, &OracleSpec::default()).unwrap();
    // |x y| = 1, so every H^2 is A^2 and the expectations are deterministic
    let mut sum = 0.0;
    let mut rowmax = 0.0;
    for i in 0..3 {
        let mut m: f64 = 0.0;
        for j in (0..3).filter(|&j| j != i) {
            let v = a.get(i, j).square().spectral_norm();
            sum += v;
            m = m.max(v);
        }
        rowmax += m;
    }
    let l = 1.0 + 2f64.ln();
    let fac = 1.0 + 2f64.ln();
    assert_relative_eq!(
        t.d_term,
        sum.sqrt() + fac * rowmax.sqrt(),
        max_relative = 1e-12
    );
    let s = adamczak_terms(
        &h,
        &law,
        1.0,
        AdamczakVariant::Simplified,
        &OracleSpec::default(),
    )
    .unwrap();
    assert_relative_eq!(s.d_term, l * sum.sqrt(), max_relative = 1e-12);
}

#[test]
fn variants_agree_when_max_term_vanishes() {
    let law = DiscreteDistribution::rademacher();
    let z = ChaosCoefficients::zeros(3, 2);
    let h = KernelTable::product(&z, &law).unwrap();
    let f = adamczak_terms(&h, &law, 2.0, AdamczakVariant::Full, &OracleSpec::default()).unwrap();
    assert_eq!(f.a, 0.0);
    for k in 0..5u64 {
        let (h, law) = random_degenerate_kernel(&mut replica_rng(83, k), 3, 2, 2, true).unwrap();
        let f =
            adamczak_terms(&h, &law, 2.0, AdamczakVariant::Full, &OracleSpec::default()).unwrap();
        let s = adamczak_terms(
            &h,
            &law,
            2.0,
            AdamczakVariant::Simplified,
            &OracleSpec::default(),
        )
        .unwrap();
        let l = 1.0 + 2f64.ln();
        assert!(f.a >= s.a / l.sqrt() * (1.0 - 1e-12));
        assert_eq!(f.b, s.b);
    }
}
