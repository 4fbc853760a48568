//! Static SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One curve: a label, its values at `k = 1..=len` and an optional
/// symmetric band (e.g. the standard error).
pub struct Curve<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    pub band: Option<&'a [f64]>,
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Renders curves against the episode index. Non-finite points are skipped.
pub fn line_chart(title: &str, y_label: &str, curves: &[Curve<'_>]) -> String {
    let finite = |x: &f64| x.is_finite();
    let len = curves.iter().map(|c| c.values.len()).max().unwrap_or(0).max(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in curves {
        for (i, v) in c.values.iter().enumerate().filter(|(_, v)| finite(v)) {
            let b = c.band.and_then(|b| b.get(i)).copied().filter(finite).unwrap_or(0.0);
            lo = lo.min(v - b);
            hi = hi.max(v + b);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let x_of = |k: f64| MARGIN_LEFT + plot_w * (k - 1.0) / (len.max(2) - 1) as f64;
    let y_of = |v: f64| MARGIN_Y + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (MARGIN_LEFT, MARGIN_Y + plot_h, MARGIN_LEFT + plot_w, MARGIN_Y);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    for v in ticks(lo, hi, 5) {
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    for k in ticks(1.0, len as f64, 5) {
        let x = x_of(k);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            k.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">episode k</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_Y + plot_h / 2.0,
        MARGIN_Y + plot_h / 2.0,
        escape(y_label)
    );

    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = c
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| finite(v))
            .map(|(j, &v)| (j as f64 + 1.0, v))
            .collect();
        if let Some(band) = c.band {
            let upper = pts
                .iter()
                .map(|&(k, v)| (k, v + band.get(k as usize - 1).copied().filter(finite).unwrap_or(0.0)));
            let lower = pts
                .iter()
                .rev()
                .map(|&(k, v)| (k, v - band.get(k as usize - 1).copied().filter(finite).unwrap_or(0.0)));
            let d = path(upper.chain(lower).map(|(k, v)| (x_of(k), y_of(v))));
            if !d.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<path d="{d} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#
                );
            }
        }
        let d = path(pts.iter().map(|&(k, v)| (x_of(k), y_of(v))));
        if !d.is_empty() {
            let _ = writeln!(
                svg,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            );
        }
        let ly = MARGIN_Y + 10.0 + 18.0 * i as f64;
        let lx = x1 + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(c.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn path(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.enumerate() {
        let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
    }
    d.trim_end().to_string()
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_path_per_curve_and_band() {
        let a = [1.0, 2.0, 3.0];
        let b = [0.5, 0.5, f64::NAN];
        let se = [0.1, 0.1, 0.1];
        let svg = line_chart(
            "regret <demo>",
            "Delta",
            &[
                Curve {
                    label: "ucssp",
                    values: &a,
                    band: Some(&se),
                },
                Curve {
                    label: "ucrl2",
                    values: &b,
                    band: None,
                },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
        assert_eq!(svg.matches("fill-opacity").count(), 1);
        assert!(svg.contains("regret &lt;demo&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn degenerate_inputs_still_render() {
        let svg = line_chart("empty", "y", &[]);
        assert!(svg.contains("</svg>"));
        let flat = [2.0; 4];
        let svg = line_chart(
            "flat",
            "y",
            &[Curve {
                label: "c",
                values: &flat,
                band: None,
            }],
        );
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
