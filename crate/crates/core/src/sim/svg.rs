//! Minimal SVG line charts for study output.

use std::fmt::Write;

use super::MetricsRow;

const WIDTH: f64 = 420.0;
const HEIGHT: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Panel<'a> {
    title: &'a str,
    x_labels: Vec<String>,
    /// (name, y per x position; None leaves a gap)
    series: Vec<(String, Vec<Option<f64>>)>,
    y_range: (f64, f64),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel(out: &mut String, p: &Panel<'_>, x0: f64) {
    let (lo, hi) = p.y_range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let k = p.x_labels.len().max(2) - 1;
    let px = |i: usize| x0 + MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / k as f64;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / span;
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + WIDTH / 2.0,
        escape(p.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x0 + MARGIN,
        MARGIN,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (v, anchor) in [(lo, "end"), (hi, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#,
            x0 + MARGIN - 4.0,
            py(v) + 3.0
        );
    }
    for (i, label) in p.x_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="8">{}</text>"#,
            px(i),
            HEIGHT - MARGIN + 12.0,
            escape(label)
        );
    }
    for (s, (name, ys)) in p.series.iter().enumerate() {
        let color = COLORS[s % COLORS.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| format!("{:.1},{:.1}", px(i), py(y))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{color}">{}</text>"#,
            x0 + WIDTH - MARGIN + 4.0,
            MARGIN + 12.0 * s as f64,
            escape(name)
        );
    }
}

fn document(panels: &[Panel<'_>]) -> String {
    let total = WIDTH * panels.len() as f64 + 80.0 * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total:.0}" height="{HEIGHT:.0}" viewBox="0 0 {total:.0} {HEIGHT:.0}">"#
    );
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, i as f64 * (WIDTH + 80.0));
    }
    out.push_str("</svg>\n");
    out
}

fn estimators(rows: &[MetricsRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.estimator) {
            names.push(r.estimator.clone());
        }
    }
    names
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Power and coverage against trial size, one polyline per estimator.
pub fn sweep_svg(rows: &[MetricsRow]) -> String {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let names = estimators(rows);
    let series = |f: fn(&MetricsRow) -> Option<f64>| -> Vec<(String, Vec<Option<f64>>)> {
        names
            .iter()
            .map(|e| {
                let ys = ns
                    .iter()
                    .map(|&n| rows.iter().find(|r| &r.estimator == e && r.n == n).and_then(f))
                    .collect();
                (e.clone(), ys)
            })
            .collect()
    };
    let labels: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
    document(&[
        Panel {
            title: "power",
            x_labels: labels.clone(),
            series: series(|r| r.power),
            y_range: (0.0, 1.0),
        },
        Panel {
            title: "coverage",
            x_labels: labels,
            series: series(|r| r.coverage),
            y_range: (0.8, 1.0),
        },
    ])
}

/// Mean estimated and empirical standard error per scenario.
pub fn scenario_svg(rows: &[MetricsRow]) -> String {
    let mut scenarios: Vec<String> = Vec::new();
    for r in rows {
        if !scenarios.contains(&r.scenario) {
            scenarios.push(r.scenario.clone());
        }
    }
    let names = estimators(rows);
    let series = |f: fn(&MetricsRow) -> Option<f64>| -> Vec<(String, Vec<Option<f64>>)> {
        names
            .iter()
            .map(|e| {
                let ys = scenarios
                    .iter()
                    .map(|s| rows.iter().find(|r| &r.estimator == e && &r.scenario == s).and_then(f))
                    .collect();
                (e.clone(), ys)
            })
            .collect()
    };
    let (lo, hi) = range(
        rows.iter()
            .flat_map(|r| [r.mean_est_se, r.empirical_se])
            .flatten(),
    );
    let y_range = if lo.is_finite() { (0.0, hi * 1.1) } else { (0.0, 1.0) };
    document(&[
        Panel {
            title: "mean estimated SE",
            x_labels: scenarios.clone(),
            series: series(|r| r.mean_est_se),
            y_range,
        },
        Panel {
            title: "empirical SE",
            x_labels: scenarios.clone(),
            series: series(|r| r.empirical_se),
            y_range,
        },
    ])
}
