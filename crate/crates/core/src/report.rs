//! Deterministic rendering of reports as CSV and aligned text.
//!
//! All numbers go through one 6-significant-digit formatter with a `.`
//! decimal point and no grouping, so identical inputs always produce
//! byte-identical output. Unavailable values render as `NA`.

use crate::dataio::{AnalysisRow, CovariateSummary};
use crate::kernels::MomentReport;
use crate::mcharness::{MonteCarloReport, SweepCell};
use std::fmt::Write as _;

/// Default significant digits for emitted tables.
pub const SIG_DIGITS: usize = 6;

/// Round to `sig` significant digits and render in the shortest plain form,
/// switching to scientific notation outside [1e-4, 10^sig) as usual for
/// general formatting. Not-finite values render as `NA`.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig > 0, "need at least one significant digit");
    if !x.is_finite() {
        return "NA".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let negative = x < 0.0;
    // "d.dddddde±exp" carries exactly the significant digits we keep.
    let exp_form = format!("{:.*e}", sig - 1, x.abs());
    let (mantissa, exp) = exp_form.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();

    let body = if exp < -4 || exp >= sig as i32 {
        let trimmed = trim_zeros(&digits);
        let mut s = String::new();
        s.push(trimmed.as_bytes()[0] as char);
        if trimmed.len() > 1 {
            s.push('.');
            s.push_str(&trimmed[1..]);
        }
        let _ = write!(s, "e{exp}");
        s
    } else if exp >= 0 {
        let point = exp as usize + 1;
        let int_part = &digits[..point];
        let frac = trim_zeros_back(&digits[point..]);
        if frac.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = trim_zeros_back(&digits);
        format!("0.{zeros}{frac}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Drop trailing zeros but keep at least the leading digit.
fn trim_zeros(digits: &str) -> String {
    let trimmed = digits.trim_end_matches('0');
    if trimmed.is_empty() {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn trim_zeros_back(digits: &str) -> String {
    digits.trim_end_matches('0').to_string()
}

fn fmt(x: f64) -> String {
    format_sig(x, SIG_DIGITS)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_else(|| "NA".to_string())
}

/// One row per method, with the run metadata repeated per row so the file
/// stands alone.
pub fn mc_report_csv(report: &MonteCarloReport) -> String {
    let mut out = String::from(
        "scenario,n,reps,bootstrap_b,method,estimand,bias,sd,rmse,aw,cp,failures,failed\n",
    );
    for m in &report.methods {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            report.scenario,
            report.n,
            report.reps,
            report.bootstrap_b,
            m.label,
            m.estimand,
            fmt(m.bias),
            fmt(m.sd),
            fmt(m.rmse),
            fmt_opt(m.aw),
            fmt_opt(m.cp),
            m.failures,
            m.failed,
        );
    }
    out
}

/// Aligned panel in the usual simulation-table layout: one row per method,
/// Bias / SD / RMSE / AW / CP columns.
pub fn mc_report_text(report: &MonteCarloReport) -> String {
    let mut out = format!(
        "scenario {}  N={}  R={}  B={}  truth: ATE {} / ATT {}\n\n",
        report.scenario,
        report.n,
        report.reps,
        report.bootstrap_b,
        fmt(report.true_ate),
        fmt(report.true_att),
    );
    let header = ["Method", "Estimand", "Bias", "SD", "RMSE", "AW", "CP", "Fail"];
    let rows: Vec<[String; 8]> = report
        .methods
        .iter()
        .map(|m| {
            [
                m.label.clone(),
                m.estimand.to_string(),
                fmt(m.bias),
                fmt(m.sd),
                fmt(m.rmse),
                fmt_opt(m.aw),
                fmt_opt(m.cp),
                if m.failed {
                    format!("{}!", m.failures)
                } else {
                    m.failures.to_string()
                },
            ]
        })
        .collect();
    out.push_str(&aligned(&header, &rows));
    out
}

/// Long-format sweep table, one row per (N, h, kernel) cell.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("n,h,kernel,estimand,bias,rmse,failures\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.n,
            fmt(c.h),
            c.kernel,
            c.estimand,
            fmt(c.bias),
            fmt(c.rmse),
            c.failures,
        );
    }
    out
}

pub fn analysis_csv(rows: &[AnalysisRow]) -> String {
    let mut out = String::from("method,estimand,point,se,ci_lo,ci_hi\n");
    for row in rows {
        let (lo, hi) = match row.estimate.ci {
            Some((lo, hi)) => (Some(lo), Some(hi)),
            None => (None, None),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.label,
            row.estimate.estimand,
            fmt(row.estimate.point),
            fmt_opt(row.estimate.se),
            fmt_opt(lo),
            fmt_opt(hi),
        );
    }
    out
}

/// Text table in the conventional estimate (SE) and interval layout of
/// program-evaluation reports.
pub fn analysis_text(rows: &[AnalysisRow]) -> String {
    let header = ["Method", "Estimate (SE)", "95% C.I."];
    let body: Vec<[String; 3]> = rows
        .iter()
        .map(|row| {
            let point_se = match row.estimate.se {
                Some(se) => format!("{} ({})", fmt(row.estimate.point), fmt(se)),
                None => fmt(row.estimate.point),
            };
            let ci = match row.estimate.ci {
                Some((lo, hi)) => format!("({}, {})", fmt(lo), fmt(hi)),
                None => "NA".to_string(),
            };
            [row.label.clone(), point_se, ci]
        })
        .collect();
    aligned(&header, &body)
}

pub fn summary_csv(rows: &[CovariateSummary]) -> String {
    let mut out = String::from(
        "variable,treated_mean,treated_sd,control_mean,control_sd,p_value\n",
    );
    for r in rows {
        let s = r.display_scale;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            fmt(r.treated_mean / s),
            fmt(r.treated_sd / s),
            fmt(r.control_mean / s),
            fmt(r.control_sd / s),
            fmt(r.p_value),
        );
    }
    out
}

/// Balance table with mean (SD) cells; earnings columns are scaled to
/// thousands by their display scale.
pub fn summary_text(rows: &[CovariateSummary]) -> String {
    let header = ["Variable", "Treated", "Control", "p-value"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let s = r.display_scale;
            [
                r.name.to_string(),
                format!("{} ({})", fmt(r.treated_mean / s), fmt(r.treated_sd / s)),
                format!("{} ({})", fmt(r.control_mean / s), fmt(r.control_sd / s)),
                fmt(r.p_value),
            ]
        })
        .collect();
    aligned(&header, &body)
}

/// Numeric kernel moment check: zeroth/second moments, squared-kernel mass,
/// and absolute third moment.
pub fn moment_report_text(family: &str, report: &MomentReport<f64>) -> String {
    format!(
        "kernel {}\nm0    {}\nm2    {}\nk2    {}\nm3abs {}\n",
        family,
        fmt(report.m0),
        fmt(report.m2),
        fmt(report.k2),
        fmt(report.m3abs),
    )
}

/// Column-aligned text table: left-aligned first column, right-aligned rest.
fn aligned<const W: usize>(header: &[&str; W], rows: &[[String; W]]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "{cell:>w$}");
            }
        }
        // Trailing spaces from the last pad are unwanted.
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    let header_cells: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    render(&mut out, &header_cells);
    for row in rows {
        render(&mut out, row.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Estimand;
    use crate::mcharness::MethodReport;

    #[test]
    fn significant_digit_formatting_is_stable() {
        assert_eq!(format_sig(1858.2, 6), "1858.2");
        assert_eq!(format_sig(0.0769, 6), "0.0769");
        assert_eq!(format_sig(5.0, 6), "5");
        assert_eq!(format_sig(-0.5, 6), "-0.5");
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(0.951, 6), "0.951");
        assert_eq!(format_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(format_sig(123456789.0, 6), "1.23457e8");
        assert_eq!(format_sig(0.00001, 6), "1e-5");
        assert_eq!(format_sig(999999.0, 6), "999999");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(f64::NAN, 6), "NA");
        assert_eq!(format_sig(2.0 / 3.0, 3), "0.667");
    }

    fn tiny_report() -> MonteCarloReport {
        MonteCarloReport {
            scenario: "s1".to_string(),
            n: 1000,
            reps: 4,
            bootstrap_b: 400,
            true_ate: 5.0,
            true_att: 5.388414528624568,
            methods: vec![
                MethodReport {
                    label: "Proposed".to_string(),
                    estimand: Estimand::Ate,
                    bias: 0.0038,
                    sd: 0.0769,
                    rmse: 0.077,
                    aw: Some(0.323),
                    cp: Some(0.951),
                    failures: 0,
                    failed: false,
                },
                MethodReport {
                    label: "IPW".to_string(),
                    estimand: Estimand::Ate,
                    bias: -0.001,
                    sd: 0.08,
                    rmse: 0.08,
                    aw: None,
                    cp: None,
                    failures: 3,
                    failed: true,
                },
            ],
        }
    }

    #[test]
    fn emission_is_byte_identical_across_calls() {
        let report = tiny_report();
        assert_eq!(mc_report_csv(&report), mc_report_csv(&report));
        assert_eq!(mc_report_text(&report), mc_report_text(&report));
    }

    #[test]
    fn csv_rows_carry_all_method_fields() {
        let csv = mc_report_csv(&tiny_report());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "scenario,n,reps,bootstrap_b,method,estimand,bias,sd,rmse,aw,cp,failures,failed"
        );
        assert_eq!(lines[1], "s1,1000,4,400,Proposed,ate,0.0038,0.0769,0.077,0.323,0.951,0,false");
        assert_eq!(lines[2], "s1,1000,4,400,IPW,ate,-0.001,0.08,0.08,NA,NA,3,true");
    }

    #[test]
    fn empty_panels_emit_header_only() {
        let mut report = tiny_report();
        report.methods.clear();
        let csv = mc_report_csv(&report);
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn csv_numbers_parse_back_to_emitted_precision() {
        let report = tiny_report();
        let csv = mc_report_csv(&report);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let bias: f64 = row[6].parse().unwrap();
        // Re-formatting the parsed value reproduces the cell exactly.
        assert_eq!(format_sig(bias, SIG_DIGITS), row[6]);
        assert_eq!(bias, 0.0038);
    }

    #[test]
    fn text_table_is_aligned_and_flags_failed_rows() {
        let text = mc_report_text(&tiny_report());
        assert!(text.contains("truth: ATE 5 / ATT 5.38841"));
        let lines: Vec<&str> = text.lines().collect();
        let header = lines[2];
        assert!(header.starts_with("Method"));
        assert!(text.contains("3!"), "failed row marker missing:\n{text}");
        assert!(lines.iter().all(|l| !l.ends_with(' ')), "trailing padding left in:\n{text}");
    }
}
