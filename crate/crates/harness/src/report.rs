use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use matconc::bounds::{BoundKind, BoundReport, Verdict};
use matconc::{Error, Result};
use serde::{Deserialize, Serialize};

pub const REPORT_HEADER: &str = "# matconc report v1";

/// One line of a report: a bound evaluation, or the error that stopped it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: String,
    pub instance: String,
    pub seed: u64,
    /// Library operations exercised.
    pub ops: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<BoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Record {
    pub fn verdict(&self) -> Option<Verdict> {
        self.report.as_ref().map(|r| r.verdict)
    }

    pub fn bound_name(&self) -> Option<&str> {
        self.report.as_ref().map(|r| r.bound_name.as_str())
    }

    /// `bound_name/variant`, the key of the summary table.
    pub fn key(&self) -> String {
        match &self.report {
            Some(r) => match &r.variant {
                Some(v) => format!("{}/{v}", r.bound_name),
                None => r.bound_name.clone(),
            },
            None => format!(
                "error:{}",
                self.ops.first().map(String::as_str).unwrap_or("?")
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundSummary {
    pub kind: Option<BoundKind>,
    pub total: usize,
    pub verified: usize,
    pub estimated: usize,
    pub violated: usize,
    pub recorded: usize,
    pub unchecked: usize,
    pub errors: usize,
    /// Smallest `value / oracle`; largest for lower bounds.
    pub worst_ratio: Option<f64>,
}

impl BoundSummary {
    fn add(&mut self, rec: &Record) {
        self.total += 1;
        let Some(r) = &rec.report else {
            self.errors += 1;
            return;
        };
        self.kind = Some(r.kind);
        match r.verdict {
            Verdict::Verified => self.verified += 1,
            Verdict::Estimated => self.estimated += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::Recorded => self.recorded += 1,
            Verdict::Unchecked => self.unchecked += 1,
        }
        if let Some(x) = r.ratio.filter(|x| x.is_finite()) {
            let lower = r.kind == BoundKind::Lower;
            self.worst_ratio = Some(match self.worst_ratio {
                None => x,
                Some(w) if lower => w.max(x),
                Some(w) => w.min(x),
            });
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub overall: BoundSummary,
    pub by_bound: BTreeMap<String, BoundSummary>,
    /// Calibrated Adamczak constant per variant.
    pub adamczak_c: BTreeMap<String, f64>,
}

impl Summary {
    pub fn from_records(records: &[Record]) -> Self {
        let mut s = Summary::default();
        for rec in records {
            s.overall.add(rec);
            s.by_bound.entry(rec.key()).or_default().add(rec);
            if let Some(r) = &rec.report {
                if r.bound_name == CALIBRATION_NAME {
                    let v = r.variant.clone().unwrap_or_default();
                    s.adamczak_c.insert(v, r.value);
                }
            }
        }
        s
    }

    pub fn has_violations(&self) -> bool {
        self.overall.violated > 0
    }

    /// The summary table, every line prefixed with `# `.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {:<40} {:<9} {:>6} {:>8} {:>9} {:>8} {:>8} {:>9} {:>6} {:>13}",
            "bound",
            "kind",
            "total",
            "verified",
            "estimated",
            "violated",
            "recorded",
            "unchecked",
            "errors",
            "worst_ratio"
        );
        let row = |out: &mut String, name: &str, b: &BoundSummary| {
            let kind = b.kind.map(kind_name).unwrap_or("-");
            let ratio = b
                .worst_ratio
                .map(|x| format!("{x:.6e}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "# {:<40} {:<9} {:>6} {:>8} {:>9} {:>8} {:>8} {:>9} {:>6} {:>13}",
                name,
                kind,
                b.total,
                b.verified,
                b.estimated,
                b.violated,
                b.recorded,
                b.unchecked,
                b.errors,
                ratio
            );
        };
        for (k, b) in &self.by_bound {
            row(&mut out, k, b);
        }
        let mut total = self.overall.clone();
        total.kind = None;
        total.worst_ratio = None;
        row(&mut out, "TOTAL", &total);
        out
    }
}

/// Bound name of the per-variant Adamczak calibration record.
pub const CALIBRATION_NAME: &str = "adamczak_calibrated_c";

fn kind_name(k: BoundKind) -> &'static str {
    match k {
        BoundKind::Upper => "upper",
        BoundKind::Lower => "lower",
        BoundKind::Tail => "tail",
        BoundKind::Recorded => "recorded",
        BoundKind::Equal => "equal",
    }
}

/// The report text: header, calibrated constants, one JSON record per line,
/// and the summary table. An empty list gives the header alone.
pub fn render_report(records: &[Record]) -> Result<String> {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    if records.is_empty() {
        return Ok(out);
    }
    let summary = Summary::from_records(records);
    if !summary.adamczak_c.is_empty() {
        let parts: Vec<String> = summary
            .adamczak_c
            .iter()
            .map(|(v, c)| format!("{v}={c:e}"))
            .collect();
        let _ = writeln!(out, "# adamczak_calibrated_c {}", parts.join(" "));
    }
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::Config(format!("cannot serialize record: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("# summary\n");
    out.push_str(&summary.table());
    Ok(out)
}

pub fn write_report(records: &[Record], path: &Path) -> Result<()> {
    fs::write(path, render_report(records)?)?;
    Ok(())
}

/// Reads the records back, skipping header, comment and summary lines.
pub fn load_report(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(REPORT_HEADER) => {}
        other => {
            return Err(Error::Parse {
                location: format!("{}:1", path.display()),
                message: format!("expected `{REPORT_HEADER}`, got {other:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            location: format!("{}:{}", path.display(), i + 2),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
