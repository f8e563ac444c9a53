use matconc::corpus::{random_coefficients, random_degenerate_kernel, random_rect};
use matconc::enumerate::replica_rng;
use matconc::examples::{build_named, ExampleName};
use matconc::io::{
    format_matrix, parse_matrix, read_coefficients, read_kernel, write_coefficients, write_kernel,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_round_trip_bit_exact(seed in any::<u64>(), r in 1usize..5, c in 1usize..5, tiny in any::<bool>()) {
        let mut m = random_rect(&mut replica_rng(seed, 0), r, c, seed % 3 != 0).matrix().clone();
        if tiny {
            m.iter_mut().for_each(|z| *z *= 1e-300);
        }
        let back = parse_matrix(&format_matrix(&m), "mem").unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn coefficient_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = random_coefficients(&mut replica_rng(90, 0), 3, 2, true);
    write_coefficients(dir.path(), &a).unwrap();
    assert_eq!(read_coefficients(dir.path()).unwrap(), a);
    std::fs::remove_file(dir.path().join("A_1_2.mat")).unwrap();
    assert!(read_coefficients(dir.path()).is_err());
}

#[test]
fn kernel_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (h, law) = random_degenerate_kernel(&mut replica_rng(91, 0), 3, 2, 3, true).unwrap();
    write_kernel(dir.path(), &h, &law).unwrap();
    let (h2, law2) = read_kernel(dir.path()).unwrap();
    assert_eq!(h2, h);
    assert_eq!(law2, law);
}

#[test]
fn examples_export_and_reload() {
    for name in ExampleName::ALL {
        let dir = tempfile::tempdir().unwrap();
        let e = build_named(name, 4, 4).unwrap();
        e.export(dir.path()).unwrap();
        match e.coefficients() {
            Some(a) => assert_eq!(&read_coefficients(dir.path()).unwrap(), a),
            None => {
                let (h, law) = e.kernel().unwrap();
                let (h2, law2) = read_kernel(dir.path()).unwrap();
                assert_eq!((&h2, &law2), (h, law));
            }
        }
    }
}
