//! Static line plots as standalone SVG.

use std::fmt::Write as _;

use crate::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let step = nice_step(hi - lo, 6);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    (start, end, (0..=n).map(|i| start + i as f64 * step).collect())
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn emit_plot_svg(series: &[Series], title: &str, y_label: &str) -> Result<String, CliError> {
    let first = series.first().ok_or(CliError::EmptySeries("no series given".into()))?;
    for s in series {
        if s.times.is_empty() {
            return Err(CliError::EmptySeries(format!("series {:?} has no samples", s.label)));
        }
        if s.values.len() != s.times.len() {
            return Err(CliError::GridMismatch(format!("series {:?} has unequal lengths", s.label)));
        }
        if s.times != first.times {
            return Err(CliError::GridMismatch(format!(
                "series {:?} and {:?} are on different grids",
                first.label, s.label
            )));
        }
    }
    let finite = series.iter().flat_map(|s| &s.values).copied().filter(|v| v.is_finite());
    let (ymin, ymax) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !ymin.is_finite() {
        return Err(CliError::EmptySeries("no finite values to plot".into()));
    }
    let (x0, x1, xt) = ticks(first.times[0], *first.times.last().unwrap());
    let (y0, y1, yt) = ticks(ymin, ymax);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(w, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(w, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#);
    for &t in &xt {
        let x = px(t);
        let _ = writeln!(w, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#, TOP + ph, TOP + ph + 5.0);
    }
    for &t in &yt {
        let y = py(t);
        let _ = writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}"/>"#, LEFT - 5.0);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<g class="ticks">"#);
    for &t in &xt {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(t),
            TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    for &t in &yt {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py(t) + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time [s]</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::with_capacity(s.times.len() * 16);
        for (&t, &v) in s.times.iter().zip(&s.values) {
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(t), py(v));
            }
        }
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
    }
    let _ = writeln!(w, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + i as f64 * 20.0;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(w, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, y + 4.0, escape(&s.label));
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(label: &str, v: f64) -> Series {
        Series {
            label: label.into(),
            times: (0..50).map(f64::from).collect(),
            values: vec![v; 50],
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let svg = emit_plot_svg(&[constant("a", 1.0), constant("b", 2.0)], "t", "y").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn deterministic() {
        let s = [constant("a", 1.0), constant("b", -3.5)];
        assert_eq!(emit_plot_svg(&s, "x", "y").unwrap(), emit_plot_svg(&s, "x", "y").unwrap());
    }

    #[test]
    fn errors() {
        assert_eq!(emit_plot_svg(&[], "t", "y").unwrap_err().code(), "EMPTY_SERIES");
        let mut b = constant("b", 2.0);
        b.times[3] = 3.5;
        assert_eq!(emit_plot_svg(&[constant("a", 1.0), b], "t", "y").unwrap_err().code(), "GRID_MISMATCH");
        let empty = Series { label: "e".into(), times: vec![], values: vec![] };
        assert_eq!(emit_plot_svg(&[empty], "t", "y").unwrap_err().code(), "EMPTY_SERIES");
    }

    #[test]
    fn tick_steps() {
        assert_eq!(nice_step(3000.0, 6), 500.0);
        assert_eq!(nice_step(10.0, 6), 2.0);
        let (lo, hi, t) = ticks(39.7, 50.2);
        assert!(lo <= 39.7 && hi >= 50.2);
        assert_eq!(t.first(), Some(&lo));
        assert_eq!(fmt_tick(-0.0), "0");
        assert_eq!(fmt_tick(2.5), "2.5");
    }

    #[test]
    fn labels_are_escaped() {
        let svg = emit_plot_svg(&[constant("a<b&c", 1.0)], "x", "y").unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
    }
}
