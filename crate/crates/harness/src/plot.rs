//! Static SVG line plots with a shaded ±1 std band per series.
//!
//! The output is plain text assembled in a fixed order with fixed-precision
//! coordinates, so equal inputs give byte-identical files.

use std::fmt::Write;

use crate::output::AggregateRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, mean, std)`, increasing in `x`.
    pub points: Vec<(f64, f64, f64)>,
}

/// Which aggregate column to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    EvalReturn,
    CumulativeRegret,
}

impl PlotMetric {
    pub fn axis_label(self) -> &'static str {
        match self {
            PlotMetric::EvalReturn => "mean evaluation return",
            PlotMetric::CumulativeRegret => "cumulative regret",
        }
    }

    /// The series for `label`, skipping episodes without the column.
    pub fn series(self, label: &str, rows: &[AggregateRow]) -> Series {
        let points = rows
            .iter()
            .filter_map(|r| {
                let (m, s) = match self {
                    PlotMetric::EvalReturn => (Some(r.eval_return_mean), Some(r.eval_return_std)),
                    PlotMetric::CumulativeRegret => (r.cumulative_regret_mean, r.cumulative_regret_std),
                };
                Some((r.episode as f64, m?, s?))
            })
            .collect();
        Series {
            label: label.to_string(),
            points,
        }
    }
}

// Tick step of 1, 2 or 5 times a power of ten giving about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(px, m, sd) in &s.points {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(m - sd), y.1.max(m + sd));
        }
    }
    if !x.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x.1 <= x.0 {
        x.1 = x.0 + 1.0;
    }
    if y.1 <= y.0 {
        y = (y.0 - 0.5, y.1 + 0.5);
    }
    (x.0, x.1, y.0, y.1)
}

/// Renders the series as an SVG document.
pub fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1, raw_y0, raw_y1) = bounds(series);
    let step = tick_step(raw_y1 - raw_y0);
    let y0 = (raw_y0 / step).floor() * step;
    let y1 = (raw_y1 / step).ceil() * step;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // y grid and ticks
    let ticks = ((y1 - y0) / step).round() as usize;
    for i in 0..=ticks {
        let v = y0 + i as f64 * step;
        let y = sy(v);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            LEFT + plot_w
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 6.0,
            y + 4.0,
            tick_label(v, step)
        );
    }
    // x ticks
    let xstep = tick_step(x1 - x0);
    let mut v = (x0 / xstep).ceil() * xstep;
    while v <= x1 + 1e-9 * xstep {
        let x = sx(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            TOP + plot_h + 18.0,
            tick_label(v, xstep)
        );
        v += xstep;
    }
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if s.points.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(x, m, sd) in &s.points {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(m + sd));
        }
        for &(x, m, sd) in s.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(m - sd));
        }
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
            band.trim_end()
        );
        let line: Vec<String> = s.points.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", sx(x), sy(m))).collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            line.join(" ")
        );
        if let [(x, m, _)] = s.points[..] {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                sx(x),
                sy(m)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            out,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"3\"/>",
            lx + 20.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Vec<Series> {
        vec![
            Series {
                label: "robust <0.1>".into(),
                points: vec![(1.0, 0.5, 0.1), (10.0, 1.5, 0.2), (20.0, 2.0, 0.1)],
            },
            Series {
                label: "nominal".into(),
                points: vec![(1.0, 0.4, 0.0), (20.0, 1.0, 0.3)],
            },
        ]
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = render("t", "episode", "return", &demo());
        assert_eq!(a, render("t", "episode", "return", &demo()));
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("robust &lt;0.1&gt;"));
    }

    #[test]
    fn ticks() {
        assert_eq!(tick_step(10.0), 2.0);
        assert_eq!(tick_step(0.3), 0.1);
        assert_eq!(tick_step(3000.0), 1000.0);
        assert_eq!(tick_label(0.30000000000000004, 0.1), "0.3");
        assert_eq!(tick_label(-0.0, 1.0), "0");
    }

    #[test]
    fn single_point_gets_a_marker() {
        let s = render(
            "one",
            "x",
            "y",
            &[Series {
                label: "a".into(),
                points: vec![(1.0, 2.0, 0.0)],
            }],
        );
        assert_eq!(s.matches("<circle").count(), 1);
    }

    #[test]
    fn empty_input_still_renders() {
        let s = render("empty", "x", "y", &[]);
        assert!(s.contains("</svg>"));
    }
}
