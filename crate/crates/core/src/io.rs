//! Plain-text matrix records and the directory layouts built on them.
//!
//! A record is a header line `d1 d2` followed by `d1 * d2` row-major entries,
//! each `re` or `re+imI` / `re-imI`. Coefficient arrays are directories of
//! `A_i1_i2.mat` records; kernel tables are directories holding
//! `manifest.json` and `kernel_i1_i2/x_y.mat`. Pair indices `i1`, `i2` in
//! file names are 1-based; support indices `x`, `y` are 0-based positions in
//! the manifest's support list.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chaos::ChaosCoefficients;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermMatrix, C64};
use crate::ustat::{DiscreteDistribution, KernelTable, Point};

pub const MANIFEST: &str = "manifest.json";

fn parse_scalar(tok: &str) -> Option<C64> {
    let Some(body) = tok.strip_suffix(['I', 'i']) else {
        return tok.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    // split before the sign of the imaginary part, skipping exponent signs
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| {
        (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E')
    })?;
    let re = body[..split].parse::<f64>().ok()?;
    let im = body[split..].parse::<f64>().ok()?;
    Some(C64::new(re, im))
}

fn format_scalar(z: C64, out: &mut String) {
    if z.im == 0.0 {
        let _ = write!(out, "{}", z.re);
    } else if z.im.is_sign_negative() {
        let _ = write!(out, "{}{}I", z.re, z.im);
    } else {
        let _ = write!(out, "{}+{}I", z.re, z.im);
    }
}

/// Parses one record; `location` names the source in errors.
pub fn parse_matrix(text: &str, location: &str) -> Result<CMatrix> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(location, format!("header needs a positive {what}")))
    };
    let (r, c) = (dim("row count")?, dim("column count")?);
    let mut entries = Vec::with_capacity(r * c);
    for tok in tokens {
        let z = parse_scalar(tok)
            .ok_or_else(|| Error::parse(location, format!("bad entry `{tok}`")))?;
        entries.push(z);
    }
    if entries.len() != r * c {
        return Err(Error::parse(
            location,
            format!(
                "expected {} entries for a {r}x{c} matrix, found {}",
                r * c,
                entries.len()
            ),
        ));
    }
    Ok(CMatrix::from_row_slice(r, c, &entries))
}

/// One record, one matrix row per line, shortest round-trip float formatting.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            format_scalar(m[(i, j)], &mut out);
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn read_herm(path: &Path) -> Result<HermMatrix> {
    HermMatrix::new(read_matrix(path)?)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

fn parse_pair(name: &str, prefix: &str, suffix: &str) -> Option<(usize, usize)> {
    let body = name.strip_prefix(prefix)?.strip_suffix(suffix)?;
    let (a, b) = body.split_once('_')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Writes every block `A_{i1,i2}`, `i1 != i2`, as `A_i1_i2.mat`.
pub fn write_coefficients(dir: &Path, a: &ChaosCoefficients) -> Result<()> {
    fs::create_dir_all(dir)?;
    for i1 in 0..a.n() {
        for i2 in (0..a.n()).filter(|&i2| i2 != i1) {
            write_matrix(
                &dir.join(format!("A_{}_{}.mat", i1 + 1, i2 + 1)),
                a.get(i1, i2).matrix(),
            )?;
        }
    }
    Ok(())
}

/// Reads a coefficient directory. `n` is the largest index present; every
/// off-diagonal block must be present, diagonal blocks may be omitted.
pub fn read_coefficients(dir: &Path) -> Result<ChaosCoefficients> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some((i, j)) = parse_pair(&name, "A_", ".mat") {
            if i == 0 || j == 0 {
                return Err(Error::parse(name, "block indices are 1-based"));
            }
            found.push((i - 1, j - 1));
        }
    }
    let n = found.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
    if n < 2 {
        return Err(Error::parse(
            dir.display().to_string(),
            "no A_i1_i2.mat blocks with n >= 2",
        ));
    }
    let mut blocks: Vec<Option<HermMatrix>> = vec![None; n * n];
    for (i, j) in found {
        let path = dir.join(format!("A_{}_{}.mat", i + 1, j + 1));
        blocks[i * n + j] = Some(read_herm(&path)?);
    }
    let d = blocks
        .iter()
        .flatten()
        .next()
        .map(HermMatrix::dim)
        .unwrap_or(1);
    let mut out = Vec::with_capacity(n * n);
    for (k, b) in blocks.into_iter().enumerate() {
        let (i, j) = (k / n, k % n);
        match b {
            Some(b) => out.push(b),
            None if i == j => out.push(HermMatrix::zeros(d)),
            None => {
                return Err(Error::parse(
                    dir.display().to_string(),
                    format!("missing block A_{}_{}.mat", i + 1, j + 1),
                ))
            }
        }
    }
    ChaosCoefficients::new(n, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub label: String,
    pub payload: Vec<f64>,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelManifest {
    pub n: usize,
    pub d: usize,
    pub support: Vec<ManifestPoint>,
}

impl KernelManifest {
    pub fn distribution(&self) -> Result<DiscreteDistribution> {
        let points = self
            .support
            .iter()
            .map(|p| Point {
                label: p.label.clone(),
                payload: p.payload.clone(),
            })
            .collect();
        DiscreteDistribution::new(points, self.support.iter().map(|p| p.prob).collect())
    }
}

pub fn write_kernel(dir: &Path, h: &KernelTable, law: &DiscreteDistribution) -> Result<()> {
    h.check_law(law)?;
    fs::create_dir_all(dir)?;
    let manifest = KernelManifest {
        n: h.n(),
        d: h.d(),
        support: law
            .points()
            .iter()
            .zip(law.probs())
            .map(|(p, &prob)| ManifestPoint {
                label: p.label.clone(),
                payload: p.payload.clone(),
                prob,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json + "\n")?;
    for (i1, i2) in h.pairs() {
        let sub = dir.join(format!("kernel_{}_{}", i1 + 1, i2 + 1));
        fs::create_dir_all(&sub)?;
        for x in 0..h.support_size() {
            for y in 0..h.support_size() {
                write_matrix(
                    &sub.join(format!("{x}_{y}.mat")),
                    h.get(i1, i2, x, y).matrix(),
                )?;
            }
        }
    }
    Ok(())
}

/// Reads a kernel directory; symmetry is validated, not imposed.
pub fn read_kernel(dir: &Path) -> Result<(KernelTable, DiscreteDistribution)> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath)?;
    let manifest: KernelManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(mpath.display().to_string(), e.to_string()))?;
    let law = manifest.distribution()?;
    let h = KernelTable::from_fn(manifest.n, manifest.d, law.size(), |i1, i2, x, y| {
        let path = dir
            .join(format!("kernel_{}_{}", i1 + 1, i2 + 1))
            .join(format!("{x}_{y}.mat"));
        let m = read_herm(&path)?;
        if m.dim() != manifest.d {
            return Err(Error::parse(
                path.display().to_string(),
                format!("expected a {0}x{0} matrix", manifest.d),
            ));
        }
        Ok(m)
    })?;
    Ok((h, law))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_tokens() {
        assert_eq!(parse_scalar("1.5"), Some(C64::new(1.5, 0.0)));
        assert_eq!(parse_scalar("1+2I"), Some(C64::new(1.0, 2.0)));
        assert_eq!(parse_scalar("-1e-3-2.5e+2I"), Some(C64::new(-1e-3, -250.0)));
        assert_eq!(parse_scalar("0.5-1i"), Some(C64::new(0.5, -1.0)));
        assert_eq!(parse_scalar("abc"), None);
        assert_eq!(parse_scalar("2I"), None);
    }

    #[test]
    fn record_round_trip() {
        let m = CMatrix::from_row_slice(
            2,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.1, -0.2),
                C64::new(-3e-20, 4.0),
                C64::new(0.0, 0.0),
                C64::new(1.0 / 3.0, 0.0),
                C64::new(-7.0, 1e10),
            ],
        );
        let text = format_matrix(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(parse_matrix(&text, "mem").unwrap(), m);
    }

    #[test]
    fn record_errors() {
        assert!(parse_matrix("2 2\n1 2 3", "mem").is_err());
        assert!(parse_matrix("0 2\n", "mem").is_err());
        assert!(parse_matrix("1 1\nx", "mem").is_err());
    }
}
