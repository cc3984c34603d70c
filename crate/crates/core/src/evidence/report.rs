use std::fmt::Write;

use super::{EvidenceEstimate, KGridResult};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt_rmse)
}

fn fmt_rmse(v: f64) -> String {
    if !v.is_finite() {
        "inf".to_string()
    } else if v != 0.0 && (v >= 1e6 || v < 1e-4) {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

/// Aligned text table with one row per estimator.
pub fn render_estimates(estimates: &[EvidenceEstimate]) -> String {
    let header = [
        "method",
        "log_c",
        "rmse",
        "rmse_mc",
        "rmse_boot",
        "rmse_ess",
        "ci",
    ];
    let rows: Vec<[String; 7]> = estimates
        .iter()
        .map(|e| {
            [
                e.method.label().to_string(),
                format!("{:.4}", e.log_c),
                fmt_rmse(e.rmse_delta),
                opt(e.rmse_mc),
                opt(e.rmse_boot),
                fmt_rmse(e.rmse_delta_ess),
                format!("[{:.3}, {:.3}]", e.ci_low, e.ci_high),
            ]
        })
        .collect();
    align(&header, &rows)
}

/// Aligned text table of a k-grid search; the selected row is starred.
pub fn render_k_grid(grid: &KGridResult) -> String {
    let header = ["", "k", "log_c", "rmse", "rmse_ess", "ci"];
    let rows: Vec<[String; 6]> = grid
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                if i == grid.selected_index {
                    "(*)".into()
                } else {
                    String::new()
                },
                format!("{:.0e}", r.k),
                format!("{:.4}", r.log_c),
                fmt_rmse(r.rmse_delta),
                fmt_rmse(r.rmse_delta_ess),
                format!("[{:.3}, {:.3}]", r.ci_low, r.ci_high),
            ]
        })
        .collect();
    let mut out = align(&header, &rows);
    for (k, why) in &grid.failures {
        let _ = writeln!(out, "k = {k:e} skipped: {why}");
    }
    out
}

pub(crate) fn align<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths = header.map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
