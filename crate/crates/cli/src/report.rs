//! Structured run reports (JSON).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Comparison {
    /// `measured < limit`.
    Below { limit: f64 },
    /// `measured <= limit`.
    AtMost { limit: f64 },
    /// `measured >= limit`.
    AtLeast { limit: f64 },
    /// `|measured - target| <= tolerance`.
    Within { target: f64, tolerance: f64 },
}

impl Comparison {
    pub fn holds(&self, measured: f64) -> bool {
        match *self {
            Comparison::Below { limit } => measured < limit,
            Comparison::AtMost { limit } => measured <= limit,
            Comparison::AtLeast { limit } => measured >= limit,
            Comparison::Within { target, tolerance } => (measured - target).abs() <= tolerance,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Comparison::Below { limit } => format!("< {limit:.4e}"),
            Comparison::AtMost { limit } => format!("<= {limit:.4e}"),
            Comparison::AtLeast { limit } => format!(">= {limit:.4e}"),
            Comparison::Within { target, tolerance } => format!("{target:.4} +/- {tolerance:.2e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The statement being checked.
    pub anchor: String,
    pub measured: f64,
    pub threshold: Comparison,
    pub passed: bool,
    pub runtime_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub name: String,
    /// Relative change of the final error value.
    pub measured: f64,
    pub limit: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub curve: String,
    pub exponent: f64,
    pub log_constant: f64,
    pub residual: f64,
    pub points_used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dimension: usize,
    pub half_length: f64,
    pub points: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub shape: String,
    pub radius: f64,
    pub diffusivity: f64,
    pub discrete_diffusivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
    pub grid: GridInfo,
    pub kernel: KernelInfo,
    pub audits: Vec<AuditRecord>,
    /// Audits count as failures only in strict mode.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
    pub fits: Vec<FitRecord>,
    pub artifacts: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub config: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    /// One row per check: config, check, measured, threshold, status, anchor.
    pub fn summary_table(&self) -> String {
        let mut rows = vec![[
            "config".to_string(),
            "check".to_string(),
            "measured".to_string(),
            "threshold".to_string(),
            "status".to_string(),
            "statement".to_string(),
        ]];
        for entry in &self.entries {
            match (&entry.report, &entry.error) {
                (Some(report), _) => {
                    for c in &report.checks {
                        rows.push([
                            report.name.clone(),
                            c.name.clone(),
                            format!("{:.4e}", c.measured),
                            c.threshold.describe(),
                            if c.passed { "PASS" } else { "FAIL" }.to_string(),
                            c.anchor.clone(),
                        ]);
                    }
                    for a in &report.provenance.audits {
                        let status = match (a.passed, report.provenance.strict) {
                            (true, _) => "PASS",
                            (false, true) => "FAIL",
                            (false, false) => "WARN",
                        };
                        rows.push([
                            report.name.clone(),
                            format!("audit:{}", a.name),
                            format!("{:.4e}", a.measured),
                            format!("<= {:.2e}", a.limit),
                            status.to_string(),
                            "numerical audit".to_string(),
                        ]);
                    }
                }
                (None, error) => rows.push([
                    entry.config.clone(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "ERROR".to_string(),
                    error.clone().unwrap_or_default(),
                ]),
            }
        }
        let widths: Vec<usize> = (0..5)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            for (c, w) in widths.iter().enumerate() {
                out.push_str(&format!("{:<w$}  ", row[c], w = w));
            }
            out.push_str(&row[5]);
            out.push('\n');
        }
        out
    }
}
