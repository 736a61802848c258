//! CSV series and `key: value` reports.

use std::fmt::{self, Display, Write as _};
use std::io;
use std::path::Path;

use csflock_core::dynamics::Trajectory;

/// Columns of `series.csv`.
pub const SERIES_HEADER: &str = "t,A,B,D,R,gamma,gamma2d,margin";

/// Twelve significant digits in plain positional notation; `nan` for
/// non-finite values.
pub fn fmt_sig12(v: f64) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let decimals = |x: f64| (11 - x.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(v);
    let s = format!("{v:.d$}");
    // rounding may carry into a new leading digit (9.99.. -> 10.0..)
    let rounded: f64 = s.parse().unwrap_or(v);
    let d2 = decimals(rounded);
    if d2 < d {
        format!("{v:.d2$}")
    } else {
        s
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), fmt_sig12)
}

pub fn render_series(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * traj.samples.len());
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let Some(f) = s.frame else { continue };
        let cols = [
            fmt_sig12(s.t),
            fmt_sig12(f.a),
            fmt_sig12(f.b),
            fmt_sig12(f.d),
            fmt_opt(f.r),
            fmt_opt(f.gamma),
            fmt_opt(f.gamma2d),
            fmt_opt(f.margin),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Ordered `key: value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_sig12(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_string())
    }

    /// Parses text written by [`Report::write`].
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(": "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Report { entries }
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}

/// Comma-joined numbers, for vector-valued report entries.
pub fn fmt_list(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", fmt_sig12(*v));
    }
    s
}
