use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use matconc::adamczak::{
    adamczak_moment_tail, adamczak_report, adamczak_terms, AdamczakForm, AdamczakVariant,
};
use matconc::bounds::theorem::{OracleSpec, Variant};
use matconc::bounds::{
    concentration_tail, lower_bound_terms, theorem_moment_bound, BoundReport, Constants, Verdict,
};
use matconc::chaos::{exact_chaos_moment, khintchine_bounds};
use matconc::examples::{build_named, ExampleData, ExampleName};
use matconc::io::{read_coefficients, read_kernel};
use matconc::linalg::variance_proxies;
use matconc::Error;
use matconc_harness::{
    parse_override, run_verification_suite, threads_from_env, with_threads, IntRange, Suite,
    SuiteConfig,
};

#[derive(Parser)]
#[command(
    name = "matconc",
    version,
    about = "Numerical verification of matrix concentration bounds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite and write an NDJSON report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Inclusive range `a..b` or a single value.
        #[arg(long)]
        n: Option<IntRange>,
        #[arg(long)]
        d: Option<IntRange>,
        /// Support sizes of the random laws.
        #[arg(long)]
        s: Option<IntRange>,
        /// Comma-separated moment orders.
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        /// Constant override `name=value`; repeatable.
        #[arg(long = "set", value_parser = parse_set)]
        set: Vec<(String, f64)>,
    },
    /// Build a worked example, print its closed-form values and optionally export it.
    Example {
        name: ExampleName,
        #[arg(long)]
        n: usize,
        /// Defaults to `n`.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Evaluate one bound on a stored kernel or coefficient directory.
    Bound {
        name: BoundName,
        #[arg(long, required_unless_present = "coefficients")]
        kernel: Option<PathBuf>,
        /// Coefficient directory, for `khintchine`.
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Moment order, or `t` for the tail bounds.
        #[arg(long)]
        q: f64,
        /// Almost-sure kernel bound for `concentration`; defaults to the table maximum.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, default_value_t = 20_000)]
        replicas: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "set", value_parser = parse_set)]
        set: Vec<(String, f64)>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundName {
    TheoremFull,
    TheoremCorollary,
    TheoremRefined,
    LowerBound,
    AdamczakFull,
    AdamczakSimplified,
    AdamczakTail,
    Concentration,
    Khintchine,
}

fn parse_set(s: &str) -> Result<(String, f64), String> {
    parse_override(s).map_err(|e| e.to_string())
}

fn constants_from(set: &[(String, f64)]) -> matconc::Result<Constants> {
    let map: BTreeMap<String, f64> = set.iter().cloned().collect();
    Constants::with_overrides(&map)
}

fn print_report(r: &BoundReport) -> matconc::Result<()> {
    let line = serde_json::to_string(r).map_err(|e| Error::Config(e.to_string()))?;
    println!("{line}");
    Ok(())
}

fn verify(cfg: SuiteConfig) -> matconc::Result<ExitCode> {
    let threads = threads_from_env()?;
    let out = with_threads(threads, || run_verification_suite(&cfg))??;
    print!("{}", out.summary.table());
    if let Some(p) = &cfg.output_path {
        eprintln!("wrote {} records to {}", out.records.len(), p.display());
    }
    Ok(if out.summary.has_violations() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn example(
    name: ExampleName,
    n: usize,
    d: Option<usize>,
    export: Option<&Path>,
) -> matconc::Result<ExitCode> {
    let e = build_named(name, n, d.unwrap_or(n))?;
    println!("# {} n={} d={}", e.name, e.n, e.d);
    for (k, v) in &e.expected {
        println!("expected {k} {v:.17e}");
    }
    let mut code = ExitCode::SUCCESS;
    match &e.data {
        ExampleData::Coefficients(a) => {
            let p = variance_proxies(a);
            println!("computed gg_star_norm {:.17e}", p.gg_star_norm);
            println!("computed sum_sq_norm {:.17e}", p.sum_sq_norm);
            println!("computed row_sum_total {:.17e}", p.row_sum_total);
            let bad = e.check_proxies(1e-9);
            for b in &bad {
                eprintln!("mismatch: {b}");
            }
            if !bad.is_empty() {
                code = ExitCode::from(1);
            }
        }
        ExampleData::Kernel { table, law } => {
            println!(
                "kernel n={} d={} support={}",
                table.n(),
                table.d(),
                law.size()
            );
        }
    }
    if let Some(dir) = export {
        std::fs::create_dir_all(dir)?;
        e.export(dir)?;
        eprintln!("exported to {}", dir.display());
    }
    Ok(code)
}

#[allow(clippy::too_many_arguments)]
fn bound(
    name: BoundName,
    kernel: Option<&Path>,
    coefficients: Option<&Path>,
    q: f64,
    m: Option<f64>,
    replicas: u64,
    seed: u64,
    set: &[(String, f64)],
) -> matconc::Result<ExitCode> {
    let constants = constants_from(set)?;
    let spec = OracleSpec {
        mc_replicas: replicas,
        seed,
        ..OracleSpec::default()
    };
    let rep = if let BoundName::Khintchine = name {
        let dir = coefficients
            .ok_or_else(|| Error::Config("khintchine needs --coefficients <dir>".into()))?;
        let a = read_coefficients(dir)?;
        let kb = khintchine_bounds(&a, q)?;
        let mut r = BoundReport::new("khintchine_upper", q, matconc::bounds::BoundKind::Upper);
        r.value = kb.upper;
        r.term("lower", kb.lower)
            .term("naive_upper", kb.naive_upper)
            .term("r", kb.r);
        r.r_convention = matconc::bounds::R_LOG_D.into();
        if let Ok(mom) = exact_chaos_moment(&a, q) {
            r.attach_moment(&mom);
        }
        r
    } else {
        let dir = kernel.ok_or_else(|| Error::Config("this bound needs --kernel <dir>".into()))?;
        let (h, law) = read_kernel(dir)?;
        match name {
            BoundName::TheoremFull => theorem_moment_bound(&h, &law, q, Variant::Full, &spec)?,
            BoundName::TheoremCorollary => {
                theorem_moment_bound(&h, &law, q, Variant::Corollary, &spec)?
            }
            BoundName::TheoremRefined => {
                theorem_moment_bound(&h, &law, q, Variant::Refined, &spec)?
            }
            BoundName::LowerBound => lower_bound_terms(&h, &law, q, &spec, &constants)?,
            BoundName::AdamczakFull => {
                adamczak_report(&h, &law, q, AdamczakVariant::Full, &spec, &constants)?
            }
            BoundName::AdamczakSimplified => {
                adamczak_report(&h, &law, q, AdamczakVariant::Simplified, &spec, &constants)?
            }
            BoundName::AdamczakTail => {
                let t = adamczak_terms(&h, &law, q, AdamczakVariant::Full, &spec)?;
                adamczak_moment_tail(&t, t.mean_norm_estimate, q, AdamczakForm::Tail, &constants)?
            }
            BoundName::Concentration => {
                let c = concentration_tail(&h, &law, m.unwrap_or_else(|| h.max_norm()), q)?;
                let mut r =
                    BoundReport::new("concentration_tail", q, matconc::bounds::BoundKind::Tail);
                r.value = c.prob;
                r.term("threshold", c.threshold)
                    .term("u", c.u)
                    .term("a0", c.a0)
                    .term("a2", c.a2)
                    .term("a3", c.a3);
                r.r_convention = "none".into();
                r
            }
            BoundName::Khintchine => unreachable!("handled above"),
        }
    };
    print_report(&rep)?;
    Ok(if rep.verdict == Verdict::Violated {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> matconc::Result<ExitCode> {
    match cli.cmd {
        Cmd::Verify {
            suite,
            seed,
            out,
            n,
            d,
            s,
            q,
            replicas,
            instances,
            set,
        } => {
            let mut cfg = SuiteConfig::new(suite);
            cfg.master_seed = seed;
            cfg.output_path = Some(out);
            if let Some(n) = n {
                cfg.n_range = n;
            }
            if let Some(d) = d {
                cfg.d_range = d;
            }
            if let Some(s) = s {
                cfg.s_range = s;
            }
            if let Some(q) = q {
                cfg.q_list = q;
            }
            if let Some(r) = replicas {
                cfg.mc_replicas = r;
            }
            if let Some(k) = instances {
                cfg.instances_per_cell = k;
            }
            cfg.constants_overrides = set.into_iter().collect();
            verify(cfg)
        }
        Cmd::Example { name, n, d, export } => example(name, n, d, export.as_deref()),
        Cmd::Bound {
            name,
            kernel,
            coefficients,
            q,
            m,
            replicas,
            seed,
            set,
        } => bound(
            name,
            kernel.as_deref(),
            coefficients.as_deref(),
            q,
            m,
            replicas,
            seed,
            &set,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
