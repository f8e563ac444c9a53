use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use matconc::bounds::Constants;
use matconc::chaos::DEFAULT_CHAOS_N_CAP;
use matconc::enumerate::DEFAULT_CONFIG_CAP;
use matconc::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Khintchine,
    Theorem,
    Adamczak,
    Examples,
    Tools,
    All,
}

impl Suite {
    /// The suites `All` expands to, in run order.
    pub const EACH: [Suite; 5] = [
        Suite::Khintchine,
        Suite::Theorem,
        Suite::Adamczak,
        Suite::Examples,
        Suite::Tools,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Khintchine => "khintchine",
            Suite::Theorem => "theorem",
            Suite::Adamczak => "adamczak",
            Suite::Examples => "examples",
            Suite::Tools => "tools",
            Suite::All => "all",
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        match self {
            Suite::Khintchine => 1,
            Suite::Theorem => 2,
            Suite::Adamczak => 3,
            Suite::Examples => 4,
            Suite::Tools => 5,
            Suite::All => 0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::All]
            .into_iter()
            .chain(Suite::EACH)
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown suite `{s}`; expected one of khintchine, theorem, adamczak, examples, tools, all"
                ))
            })
    }
}

/// Inclusive integer range, written `a` or `a..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn values(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for IntRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad range `{s}`; expected `a` or `a..b`"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        Ok(Self { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub n_range: IntRange,
    pub d_range: IntRange,
    /// Support sizes of the random laws.
    pub s_range: IntRange,
    pub q_list: Vec<f64>,
    pub instances_per_cell: usize,
    pub master_seed: u64,
    pub mc_replicas: u64,
    pub constants_overrides: BTreeMap<String, f64>,
    pub output_path: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            n_range: IntRange::new(2, 4),
            d_range: IntRange::new(1, 3),
            s_range: IntRange::new(2, 3),
            q_list: vec![1.0, 2.0],
            instances_per_cell: 2,
            master_seed: 0,
            mc_replicas: 20_000,
            constants_overrides: BTreeMap::new(),
            output_path: None,
        }
    }
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            ..Self::default()
        }
    }

    pub fn constants(&self) -> Result<Constants> {
        Constants::with_overrides(&self.constants_overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.q_list.is_empty() {
            return err("q_list is empty".into());
        }
        if let Some(q) = self.q_list.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
            return err(format!("moment orders must be >= 1, got {q}"));
        }
        if self.instances_per_cell == 0 {
            return err("instances_per_cell must be >= 1".into());
        }
        if self.mc_replicas == 0 {
            return err("mc_replicas must be >= 1".into());
        }
        if self.n_range.lo < 2 {
            return err(format!("n must be >= 2, got {}", self.n_range));
        }
        if self.d_range.lo < 1 {
            return err(format!("d must be >= 1, got {}", self.d_range));
        }
        if self.s_range.lo < 2 {
            return err(format!("support size must be >= 2, got {}", self.s_range));
        }
        let suites: Vec<Suite> = match self.suite {
            Suite::All => Suite::EACH.to_vec(),
            s => vec![s],
        };
        let n = self.n_range.hi;
        if suites.contains(&Suite::Khintchine) && n > DEFAULT_CHAOS_N_CAP {
            return err(format!(
                "khintchine enumerates 4^n sign patterns; n <= {DEFAULT_CHAOS_N_CAP} required, got {}",
                self.n_range
            ));
        }
        let exact_kernel = suites
            .iter()
            .any(|s| matches!(s, Suite::Theorem | Suite::Adamczak | Suite::Tools));
        if exact_kernel {
            let configs = (self.s_range.hi as u128).pow(2 * n as u32);
            if configs > DEFAULT_CONFIG_CAP as u128 {
                return err(format!(
                    "decoupled enumeration needs s^(2n) = {configs} configurations for n={n}, s={}; the cap is {DEFAULT_CONFIG_CAP}",
                    self.s_range.hi
                ));
            }
        }
        self.constants()?;
        Ok(())
    }
}

/// Parses `name=value` for a constant override.
pub fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected name=value, got `{s}`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value in `{s}`")))?;
    Ok((k.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!("2..4".parse::<IntRange>().unwrap(), IntRange::new(2, 4));
        assert_eq!("2..=4".parse::<IntRange>().unwrap(), IntRange::new(2, 4));
        assert_eq!("3".parse::<IntRange>().unwrap(), IntRange::new(3, 3));
        assert!("4..2".parse::<IntRange>().is_err());
        assert!("x".parse::<IntRange>().is_err());
    }

    #[test]
    fn validation() {
        assert!(SuiteConfig::default().validate().is_ok());
        let mut c = SuiteConfig::default();
        c.q_list.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = SuiteConfig::new(Suite::Khintchine);
        c.n_range = IntRange::new(2, 9);
        assert!(c.validate().is_err());
        let mut c = SuiteConfig::new(Suite::Theorem);
        c.n_range = IntRange::new(2, 6);
        assert!(c.validate().is_err());
        let mut c = SuiteConfig::default();
        c.instances_per_cell = 0;
        assert!(c.validate().is_err());
        c = SuiteConfig::default();
        c.constants_overrides.insert("nope".into(), 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(
            parse_override("adamczak_c=2.5").unwrap(),
            ("adamczak_c".into(), 2.5)
        );
    }
}
