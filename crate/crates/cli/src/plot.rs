//! Self-contained SVG summary plot: error rate versus coupling strength,
//! one curve per scheme and code width, logarithmic error axis.

use std::fmt::Write as _;

/// One plotted curve; points are (coupling, error) ordered by coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 240.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Renders the curves as one standalone SVG document. Error values of zero
/// (exact separation on the test split) cannot sit on a log axis; they are
/// drawn clamped to the axis floor, which the footnote states.
pub fn epsilon_vs_alpha(curves: &[Curve]) -> String {
    let (x_lo, x_hi) = x_domain(curves);
    let (decade_lo, decade_hi) = y_decades(curves);
    let y_floor = 10f64.powi(decade_lo);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_pos = |alpha: f64| MARGIN_LEFT + (alpha - x_lo) / (x_hi - x_lo) * plot_w;
    let y_pos = |eps: f64| {
        let v = eps.max(y_floor).log10();
        MARGIN_TOP + (decade_hi as f64 - v) / (decade_hi - decade_lo) as f64 * plot_h
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">\
         Decision error vs coupling strength</text>\n",
        MARGIN_LEFT + plot_w / 2.0
    );

    // Horizontal decade gridlines with labels.
    for decade in decade_lo..=decade_hi {
        let y = y_pos(10f64.powi(decade));
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{decade}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }

    // Vertical gridlines at the plotted coupling values (thinned when dense).
    let mut alphas: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let stride = alphas.len().div_ceil(12).max(1);
    for alpha in alphas.iter().step_by(stride) {
        let x = x_pos(*alpha);
        let _ = write!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
             stroke=\"#eeeeee\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = write!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{alpha}</text>\n",
            MARGIN_TOP + plot_h + 18.0
        );
    }

    // Axes frame and labels.
    let _ = write!(
        svg,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        MARGIN_LEFT, MARGIN_TOP
    );
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">coupling strength</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">error rate</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // Curves with point markers, colors cycling through the palette.
    let mut clamped = false;
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(alpha, eps) in &curve.points {
            if eps < y_floor {
                clamped = true;
            }
            let _ = write!(path, "{:.1},{:.1} ", x_pos(alpha), y_pos(eps));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.trim_end()
        );
        for &(alpha, eps) in &curve.points {
            let _ = write!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                x_pos(alpha),
                y_pos(eps)
            );
        }
        let legend_y = MARGIN_TOP + 14.0 + i as f64 * 18.0;
        let legend_x = WIDTH - MARGIN_RIGHT + 24.0;
        let _ = write!(
            svg,
            "<line x1=\"{legend_x:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            legend_y - 4.0,
            legend_x + 24.0,
            legend_y - 4.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{legend_y:.1}\">{}</text>\n",
            legend_x + 32.0,
            escape(&curve.label)
        );
    }

    if clamped {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#555555\">zero error drawn at the \
             1e{decade_lo} axis floor</text>\n",
            MARGIN_LEFT,
            MARGIN_TOP + plot_h + 38.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn x_domain(curves: &[Curve]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for curve in curves {
        for &(alpha, _) in &curve.points {
            lo = lo.min(alpha);
            hi = hi.max(alpha);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.05, hi + 0.05);
    }
    (lo, hi)
}

/// Decade bounds of the error axis: from the decade below the smallest
/// positive plotted value up to the decade above the largest.
fn y_decades(curves: &[Curve]) -> (i32, i32) {
    let mut min_pos = f64::INFINITY;
    let mut max_val = f64::NEG_INFINITY;
    for curve in curves {
        for &(_, eps) in &curve.points {
            if eps > 0.0 {
                min_pos = min_pos.min(eps);
            }
            max_val = max_val.max(eps);
        }
    }
    if !min_pos.is_finite() {
        return (-4, 0);
    }
    let lo = min_pos.log10().floor() as i32;
    let hi = (max_val.log10().ceil() as i32).min(0).max(lo + 1);
    (lo, hi)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
