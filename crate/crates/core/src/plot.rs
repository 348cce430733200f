//! Deterministic figure and table emitters: a grouped SVG bar chart of
//! per-task accuracy and kappa, CSV tables with methods as rows and tasks as
//! columns, and a 2-D principal-component scatter of latent codes.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::pipeline::labels::TaskId;
use crate::pipeline::report::EvalReport;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const BAR: f64 = 18.0;
const BAR_GAP: f64 = 3.0;
const GROUP_GAP: f64 = 28.0;
const LEFT: f64 = 56.0;
const TOP: f64 = 40.0;
const HEIGHT: f64 = 240.0;
/// Room for the title and legend.
const MIN_WIDTH: f64 = 420.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tasks_of(reports: &[(String, EvalReport)]) -> Vec<TaskId> {
    TaskId::ALL
        .into_iter()
        .filter(|t| reports.iter().any(|(_, r)| r.tasks.iter().any(|x| x.task == *t)))
        .collect()
}

fn metric(report: &EvalReport, task: TaskId, kappa: bool) -> Option<f64> {
    let t = report.tasks.iter().find(|x| x.task == task)?;
    if kappa {
        t.kappa.map(|k| k.value)
    } else {
        t.accuracy
    }
}

fn check(reports: &[(String, EvalReport)]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to plot"));
    }
    if reports.iter().all(|(_, r)| r.tasks.is_empty()) {
        return Err(Error::invalid("reports contain no tasks"));
    }
    Ok(())
}

/// Grouped bars: one group per task, an accuracy and a kappa bar per report.
pub fn bar_chart_svg(reports: &[(String, EvalReport)]) -> Result<String> {
    check(reports)?;
    let tasks = tasks_of(reports);
    let values: Vec<f64> = tasks
        .iter()
        .flat_map(|&t| reports.iter().flat_map(move |(_, r)| [metric(r, t, false), metric(r, t, true)]))
        .flatten()
        .collect();
    let lo = (values.iter().copied().fold(0.0, f64::min) * 4.0).floor() / 4.0;
    let y = |v: f64| TOP + HEIGHT * (1.0 - (v - lo) / (1.0 - lo));
    let group_w = reports.len() as f64 * 2.0 * (BAR + BAR_GAP);
    let width = (LEFT + tasks.len() as f64 * (group_w + GROUP_GAP) + 20.0).max(MIN_WIDTH);
    let legend_y = TOP + HEIGHT + 48.0;
    let height = legend_y + 18.0 * reports.len() as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18" font-size="13">Per-task test accuracy and Cohen's kappa</text>"#);
    let mut tick = lo;
    while tick <= 1.0 + 1e-9 {
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{yy:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{yy2:.1}" text-anchor="end">{tick:.2}</text>"##,
            width - 20.0,
            LEFT - 6.0,
            yy = y(tick),
            yy2 = y(tick) + 3.0
        );
        tick += 0.25;
    }
    for (g, &task) in tasks.iter().enumerate() {
        let x0 = LEFT + GROUP_GAP / 2.0 + g as f64 * (group_w + GROUP_GAP);
        for (r, (label, report)) in reports.iter().enumerate() {
            let colour = PALETTE[r % PALETTE.len()];
            for (m, name) in ["accuracy", "kappa"].into_iter().enumerate() {
                let Some(v) = metric(report, task, m == 1) else { continue };
                let x = x0 + (2 * r + m) as f64 * (BAR + BAR_GAP);
                let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
                let opacity = if m == 0 { "1" } else { "0.45" };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{top:.1}" width="{BAR}" height="{:.1}" fill="{colour}" fill-opacity="{opacity}"/>"#,
                    bottom - top
                );
                let _ = writeln!(
                    s,
                    r#"<text class="value" data-task="{task}" data-series="{}" data-metric="{name}" x="{:.1}" y="{:.1}" text-anchor="middle" font-size="8">{v:.2}</text>"#,
                    escape(label),
                    x + BAR / 2.0,
                    top - 3.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{task}</text>"#,
            x0 + group_w / 2.0,
            y(lo) + 16.0
        );
    }
    let _ = writeln!(s, r#"<line x1="{LEFT}" x2="{:.1}" y1="{z:.1}" y2="{z:.1}" stroke="black"/>"#, width - 20.0, z = y(0.0));
    for (r, (label, _)) in reports.iter().enumerate() {
        let ly = legend_y + 18.0 * r as f64;
        let colour = PALETTE[r % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{:.1}" width="10" height="10" fill="{colour}"/><rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{colour}" fill-opacity="0.45"/><text x="{:.1}" y="{:.1}">{} (solid: accuracy, light: kappa)</text>"#,
            ly - 9.0,
            LEFT + 12.0,
            ly - 9.0,
            LEFT + 28.0,
            ly,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn table_csv(reports: &[(String, EvalReport)], kappa: bool) -> Result<String> {
    check(reports)?;
    let tasks = tasks_of(reports);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("method".to_string()).chain(tasks.iter().map(|t| t.to_string())).collect();
    w.write_record(&header).map_err(|e| Error::data(e.to_string()))?;
    for (label, report) in reports {
        let row: Vec<String> = std::iter::once(label.clone())
            .chain(tasks.iter().map(|&t| match metric(report, t, kappa) {
                Some(v) if kappa => format!("{v:.4}"),
                Some(v) => format!("{:.2}", 100.0 * v),
                None => String::new(),
            }))
            .collect();
        w.write_record(&row).map_err(|e| Error::data(e.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::data(e.to_string()))?).expect("csv is utf-8"))
}

/// Accuracy in percent, methods × tasks.
pub fn accuracy_table_csv(reports: &[(String, EvalReport)]) -> Result<String> {
    table_csv(reports, false)
}

pub fn kappa_table_csv(reports: &[(String, EvalReport)]) -> Result<String> {
    table_csv(reports, true)
}

/// Coordinates of each point on the two leading principal axes. Axis signs
/// are fixed so the largest-magnitude loading is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let d = points.first().map_or(0, Vec::len);
    if points.len() < 2 || d < 2 || points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("projection needs at least 2 points of equal dimension >= 2"));
    }
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for p in points {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order[..2]
        .iter()
        .map(|&k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let pivot = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
            v.iter().map(|x| if pivot < 0.0 { -x } else { *x }).collect()
        })
        .collect();
    Ok(points
        .iter()
        .map(|p| {
            let proj = |a: &[f64]| (0..d).map(|j| (p[j] - mean[j]) * a[j]).sum::<f64>();
            [proj(&axes[0]), proj(&axes[1])]
        })
        .collect())
}

/// Scatter of the principal-component projection, coloured by label.
pub fn projection_svg(points: &[Vec<f64>], labels: &[usize], title: &str) -> Result<String> {
    if points.len() != labels.len() {
        return Err(Error::shape("one label per point is required"));
    }
    let xy = pca_2d(points)?;
    let span = |k: usize| {
        let lo = xy.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = xy.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let ((x_lo, x_span), (y_lo, y_span)) = (span(0), span(1));
    let size = 360.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#,
        w = size + 40.0,
        h = size + 60.0
    );
    let _ = writeln!(s, r#"<text x="20" y="18" font-size="13">{}</text>"#, escape(title));
    for (p, &l) in xy.iter().zip(labels) {
        let cx = 20.0 + size * (p[0] - x_lo) / x_span;
        let cy = 30.0 + size * (1.0 - (p[1] - y_lo) / y_span);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            PALETTE[l % PALETTE.len()]
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.0}">PC1 horizontal, PC2 vertical; class 0 blue, class 1 red</text>"#,
        size + 50.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pca_recovers_dominant_axis() {
        // The second coordinate is symmetric about the centre, so uncorrelated with the first.
        let points: Vec<Vec<f64>> = (0..20usize).map(|i| vec![i as f64, 0.1 * (i.min(19 - i) % 3) as f64, 0.0]).collect();
        let xy = pca_2d(&points).unwrap();
        // The first axis is the x coordinate up to centring.
        for (p, q) in points.iter().zip(&xy) {
            assert!((q[0] - (p[0] - 9.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(bar_chart_svg(&[]).is_err());
        assert!(accuracy_table_csv(&[]).is_err());
        assert!(pca_2d(&[vec![1.0, 2.0]]).is_err());
    }
}
