use std::fmt::Write;

use super::ols::RegressionReport;

pub const SIGNIFICANCE_FOOTNOTE: &str = "* denotes 5% significance and ** 10% significance.";

/// Plain-text coefficient table: Mean, STD, p-value, [0.025 0.975].
///
/// The intercept is always shown; `rows` restricts the remaining rows to the
/// given names (in report order). Values are printed to two decimals with
/// significance markers on the p-value.
pub fn render_table(report: &RegressionReport, label: &str, rows: Option<&[String]>) -> String {
    let shown: Vec<_> = report
        .rows
        .iter()
        .enumerate()
        .filter(|(k, r)| *k == 0 || rows.is_none_or(|names| names.contains(&r.name)))
        .map(|(_, r)| r)
        .collect();
    let width = shown
        .iter()
        .map(|r| r.name.len())
        .chain([label.len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    writeln!(
        out,
        "{label:<width$}  {:>7}  {:>7}  {:<8}  {:>7}  {:>7}",
        "Mean", "STD", "p-value", "[0.025", "0.975]"
    )
    .unwrap();
    for r in shown {
        let p = format!("{:.2}{}", r.p_value, r.significance.marker());
        writeln!(
            out,
            "{:<width$}  {:>7.2}  {:>7.2}  {:<8}  {:>7.2}  {:>7.2}",
            r.name, r.mean, r.std, p, r.ci_low, r.ci_high
        )
        .unwrap();
    }
    writeln!(out, "{SIGNIFICANCE_FOOTNOTE}").unwrap();
    out
}
