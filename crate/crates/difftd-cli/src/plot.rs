//! Self-contained SVG rendering of sweep summaries: one curve per (n, η)
//! cell with a shaded ±1-stderr band, linear axes, and a legend. Output is
//! a pure function of the summary, so identical summaries give
//! byte-identical files.

use std::fmt::Write;

use difftd::{Error, Result};

use crate::experiment::{SweepSeries, SweepSummary};

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 64.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn series_label(series: &SweepSeries, vary_n: bool, vary_eta: bool) -> String {
    match (vary_n, vary_eta) {
        (true, false) => format!("n = {}", series.n),
        (false, true) => format!("eta = {}", series.eta),
        _ => format!("n = {}, eta = {}", series.n, series.eta),
    }
}

/// Renders the summary to an SVG document.
pub fn render_svg(summary: &SweepSummary) -> Result<String> {
    if summary.series.is_empty() || summary.series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Input("nothing to plot: summary is empty".into()));
    }

    let x_max = summary
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.step))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_max = summary
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.mean + p.stderr.unwrap_or(0.0)))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.05;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_x = |step: u64| MARGIN_LEFT + (step as f64 / x_max) * plot_w;
    let to_y = |v: f64| MARGIN_TOP + plot_h - (v.max(0.0) / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);

    // Axes with 6 ticks each.
    let _ = writeln!(
        svg,
        r##"<g stroke="#333333" stroke-width="1" fill="none"><path d="M {:.3} {:.3} L {:.3} {:.3} L {:.3} {:.3}"/></g>"##,
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(svg, r##"<g font-family="sans-serif" font-size="12" fill="#333333">"##);
    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let x = MARGIN_LEFT + frac * plot_w;
        let step = (frac * x_max).round();
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}" stroke="#333333"/>"##,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP + plot_h + 20.0,
            step as u64
        );
        let y = MARGIN_TOP + plot_h - frac * plot_h;
        let value = frac * y_max;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#333333"/>"##,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.3}" y="{:.3}" text-anchor="end">{value:.3}</text>"##,
            MARGIN_LEFT - 9.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.3}" y="{:.3}" text-anchor="middle">environment step</text>"##,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="18" y="{:.3}" text-anchor="middle" transform="rotate(-90 18 {:.3})">RMSVE (TVR)</text>"##,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    let _ = writeln!(svg, "</g>");

    let n_set: Vec<usize> = {
        let mut v: Vec<usize> = summary.series.iter().map(|s| s.n).collect();
        v.dedup();
        v
    };
    let eta_set: Vec<u64> = {
        let mut v: Vec<u64> = summary.series.iter().map(|s| s.eta.to_bits()).collect();
        v.dedup();
        v
    };
    let vary_n = n_set.len() > 1;
    let vary_eta = eta_set.len() > 1;

    // Shaded ±1-stderr bands first, curves on top.
    for (i, series) in summary.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if series.points.iter().any(|p| p.stderr.is_some()) {
            let mut band = String::new();
            for p in &series.points {
                let _ = write!(
                    band,
                    "{:.3},{:.3} ",
                    to_x(p.step),
                    to_y(p.mean + p.stderr.unwrap_or(0.0))
                );
            }
            for p in series.points.iter().rev() {
                let _ = write!(
                    band,
                    "{:.3},{:.3} ",
                    to_x(p.step),
                    to_y(p.mean - p.stderr.unwrap_or(0.0))
                );
            }
            let _ = writeln!(
                svg,
                r##"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"##,
                band.trim_end()
            );
        }
    }
    for (i, series) in summary.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for p in &series.points {
            let _ = write!(path, "{:.3},{:.3} ", to_x(p.step), to_y(p.mean));
        }
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
            path.trim_end()
        );
    }

    // Legend.
    let legend_x = MARGIN_LEFT + plot_w + 24.0;
    let _ = writeln!(svg, r##"<g font-family="sans-serif" font-size="13" fill="#333333">"##);
    for (i, series) in summary.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 14.0 + i as f64 * 22.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{legend_x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="{color}" stroke-width="3"/>"##,
            legend_x + 26.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.3}" y="{:.3}">{}</text>"##,
            legend_x + 34.0,
            y + 4.0,
            series_label(series, vary_n, vary_eta)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::SweepPoint;

    fn summary(values: &[(usize, f64)]) -> SweepSummary {
        SweepSummary {
            series: values
                .iter()
                .map(|&(n, eta)| SweepSeries {
                    n,
                    eta,
                    points: (1..=5)
                        .map(|i| SweepPoint {
                            step: i * 100,
                            mean: 1.0 / i as f64,
                            stderr: Some(0.05),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn renders_curves_bands_and_legend() {
        let svg = render_svg(&summary(&[(3, 0.1), (3, 0.5), (3, 1.0), (3, 2.0)])).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<polygon").count(), 4);
        assert!(svg.contains("eta = 0.5"));
        assert!(!svg.contains("n = 3,"), "only eta varies, legend should not repeat n");
    }

    #[test]
    fn single_series_has_no_legend_collision() {
        let svg = render_svg(&summary(&[(2, 0.1)])).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("n = 2, eta = 0.1"));
    }

    #[test]
    fn output_is_deterministic() {
        let s = summary(&[(1, 0.1), (2, 0.1)]);
        assert_eq!(render_svg(&s).unwrap(), render_svg(&s).unwrap());
    }

    #[test]
    fn empty_summary_is_rejected() {
        assert!(render_svg(&SweepSummary::default()).is_err());
    }
}
