use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::run::VerificationReport;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Table,
}

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn report_to_json(r: &VerificationReport) -> String {
    let mut v = serde_json::to_value(r).expect("report serializes");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

pub fn report_to_table(r: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} ({} {})", r.scenario, r.tool, r.version);
    let _ = writeln!(
        out,
        "quadrature: order {} x {} panels, plane R = {}, {} points per axis",
        r.quadrature.order, r.quadrature.panels, r.quadrature.plane_trunc_radius, r.quadrature.plane_points_per_axis
    );
    let _ = writeln!(
        out,
        "{:<22} {:<6} {:<9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "check", "result", "condition", "lhs", "rhs", "rel_error", "tolerance", "margin", "ms"
    );
    for c in &r.checks {
        let condition = match (c.outcome, c.expect_fail) {
            (true, _) => "holds",
            (false, true) => "fails*",
            (false, false) => "fails",
        };
        let _ = writeln!(
            out,
            "{:<22} {:<6} {:<9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9.1}",
            c.check.as_str(),
            if c.pass { "PASS" } else { "FAIL" },
            condition,
            cell(c.lhs),
            cell(c.rhs),
            cell(c.rel_error),
            cell(c.tolerance),
            cell(c.margin),
            c.runtime_ms
        );
        if let Some(e) = &c.error {
            let _ = writeln!(out, "    error: {e}");
        } else if !c.detail.is_empty() {
            let _ = writeln!(out, "    {}", c.detail);
        }
    }
    if r.checks.iter().any(|c| c.expect_fail) {
        let _ = writeln!(out, "* expected to fail");
    }
    let _ = writeln!(out, "overall: {}", if r.overall_pass { "PASS" } else { "FAIL" });
    out
}

pub fn render_report(r: &VerificationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report_to_json(r),
        ReportFormat::Table => report_to_table(r),
    }
}

/// Writes the report to `out`, or to stdout when `out` is `None`.
pub fn emit_report(r: &VerificationReport, format: ReportFormat, out: Option<&Path>) -> std::io::Result<()> {
    let text = render_report(r, format);
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(0.1 + 0.2), 0.3);
        assert_eq!(round_significant(1.234567890123456e-7), 1.23456789012e-7);
        assert_eq!(round_significant(-2.0 / 3.0), -0.666666666667);
        assert_eq!(round_significant(0.0), 0.0);
        assert!(round_significant(f64::NAN).is_nan());
    }

    #[test]
    fn nested_numbers_are_rounded() {
        let mut v = serde_json::json!({"a": [1.0 / 3.0, {"b": 2.0f64.sqrt()}], "n": 7});
        round_value(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.333333333333,{"b":1.41421356237}],"n":7}"#);
    }
}
