use matconc::bounds::Verdict;
use matconc::Error;
use matconc_harness::{
    render_report, run_verification_suite, with_threads, IntRange, Suite, SuiteConfig,
};

fn small(suite: Suite) -> SuiteConfig {
    SuiteConfig {
        n_range: IntRange::new(2, 3),
        d_range: IntRange::new(1, 2),
        s_range: IntRange::new(2, 2),
        instances_per_cell: 1,
        mc_replicas: 2000,
        master_seed: 11,
        ..SuiteConfig::new(suite)
    }
}

#[test]
fn examples_suite_has_no_violations() {
    let out = run_verification_suite(&SuiteConfig::new(Suite::Examples)).unwrap();
    assert_eq!(out.summary.overall.violated, 0);
    assert_eq!(out.summary.overall.errors, 0);
    assert!(out.reports("example1.sum_sq_norm").count() == 6);
    assert!(out
        .reports("example2.mom_separation")
        .all(|r| r.verdict == Verdict::Verified));
}

#[test]
fn khintchine_sandwich_on_small_cells() {
    let mut cfg = SuiteConfig::new(Suite::Khintchine);
    cfg.instances_per_cell = 3;
    let out = run_verification_suite(&cfg).unwrap();
    assert_eq!(out.summary.overall.violated, 0);
    assert_eq!(out.reports("khintchine_upper").count(), 3 * 3 * 3 * 2);
}

#[test]
fn empty_q_list_is_a_config_error() {
    let mut cfg = small(Suite::Theorem);
    cfg.q_list.clear();
    assert!(matches!(
        run_verification_suite(&cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn all_suite_covers_every_op() {
    let out = run_verification_suite(&small(Suite::All)).unwrap();
    let cov: Vec<_> = out.reports("coverage").collect();
    assert_eq!(cov.len(), 1);
    assert_eq!(cov[0].verdict, Verdict::Verified, "{:?}", cov[0].notes);
    assert!(!out.summary.has_violations());
    assert!(out
        .summary
        .adamczak_c
        .values()
        .all(|c| c.is_finite() && *c > 0.0));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let mut cfg = small(Suite::Tools);
    cfg.suite = Suite::All;
    cfg.n_range = IntRange::new(2, 2);
    let one = with_threads(Some(1), || run_verification_suite(&cfg))
        .unwrap()
        .unwrap();
    let four = with_threads(Some(4), || run_verification_suite(&cfg))
        .unwrap()
        .unwrap();
    assert_eq!(
        render_report(&one.records).unwrap(),
        render_report(&four.records).unwrap()
    );
    cfg.master_seed += 1;
    let other = run_verification_suite(&cfg).unwrap();
    assert_ne!(
        render_report(&one.records).unwrap(),
        render_report(&other.records).unwrap()
    );
}

#[test]
fn report_is_written_when_path_is_set() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Suite::Theorem);
    cfg.output_path = Some(dir.path().join("r.ndjson"));
    let out = run_verification_suite(&cfg).unwrap();
    let back = matconc_harness::load_report(cfg.output_path.as_ref().unwrap()).unwrap();
    assert_eq!(back, out.records);
}
