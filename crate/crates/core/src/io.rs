//! File formats: profile JSON, CSV tables with `#` comment lines, and the
//! `%.17g` number formatting used in every CSV.

use serde::{Deserialize, Serialize};

use crate::berger::BergerReport;
use crate::conformal::AxisymProfile;
use crate::equidist::EquidistTrace;
use crate::error::{invalid, Result};
use crate::yamabe::StepMonitor;

pub const BERGER_HEADER: [&str; 6] = [
    "rho",
    "scalar_curvature",
    "ricci_positive",
    "volume",
    "width",
    "normalized_width",
];

pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "volume",
    "r_avg",
    "energy",
    "width_bound",
    "max_theta",
    "sup_R_minus_r",
];

pub const CESARO_HEADER: [&str; 2] = ["k", "error"];

/// Profile file: `{ "n": int, "u": [...], "description": optional }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub n: usize,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ProfileFile {
    pub fn from_profile(p: &AxisymProfile<f64>, description: Option<String>) -> Self {
        Self {
            n: p.n(),
            u: p.values().to_vec(),
            description,
        }
    }

    pub fn to_profile(&self) -> Result<AxisymProfile<f64>> {
        if self.u.len() != self.n {
            return invalid(format!("profile declares n = {} but has {} values", self.n, self.u.len()));
        }
        AxisymProfile::from_values(self.u.clone())
    }
}

/// C's `%.17g`: 17 significant digits, fixed notation for exponents in
/// `[-4, 17)`, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes comment lines (each prefixed `# `), the header and the rows.
pub fn write_csv(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn berger_rows(reports: &[BergerReport<f64>]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                fmt_g17(r.rho),
                fmt_g17(r.scalar_curvature),
                r.ricci_positive.to_string(),
                fmt_g17(r.volume),
                fmt_g17(r.width),
                fmt_g17(r.normalized_width),
            ]
        })
        .collect()
}

/// Every `every`-th monitor record, plus the last one.
pub fn trace_rows(monitors: &[StepMonitor<f64>], every: usize) -> Vec<Vec<String>> {
    let every = every.max(1);
    let last = monitors.len().saturating_sub(1);
    monitors
        .iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i == last)
        .map(|(_, m)| {
            [m.t, m.volume, m.r_avg, m.energy, m.width_bound, m.max_theta, m.sup_r_minus_r]
                .iter()
                .map(|&v| fmt_g17(v))
                .collect()
        })
        .collect()
}

pub fn cesaro_rows(trace: &EquidistTrace) -> Vec<Vec<String>> {
    trace
        .cesaro_errors
        .iter()
        .enumerate()
        .map(|(k, e)| vec![(k + 1).to_string(), fmt_g17(*e)])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a numeric column.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let Some(c) = self.column(name) else {
            return invalid(format!("no column named {name}"));
        };
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .or_else(|_| invalid(format!("non-numeric entry {:?} in column {name}", r[c])))
            })
            .collect()
    }
}

/// Parses the CSV dialect written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut comments = Vec::new();
    let mut lines = text.lines();
    let header = loop {
        match lines.next() {
            Some(l) if l.starts_with('#') => comments.push(l.trim_start_matches('#').trim_start().to_string()),
            Some(l) => break l.split(',').map(str::to_string).collect::<Vec<_>>(),
            None => return invalid("CSV has no header line"),
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        if l.is_empty() {
            continue;
        }
        let r: Vec<String> = l.split(',').map(str::to_string).collect();
        if r.len() != header.len() {
            return invalid(format!("row {i} has {} fields, header has {}", r.len(), header.len()));
        }
        rows.push(r);
    }
    Ok(CsvTable {
        comments,
        header,
        rows,
    })
}
