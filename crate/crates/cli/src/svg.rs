//! Minimal self-contained SVG line plots for ROC and PR curves.
//!
//! Both curve families live on the unit square, so the plotter assumes
//! axes in `[0, 1]` with gridlines at the quarters. Output is plain SVG
//! text with fixed-precision coordinates, deterministic for a given curve.

/// Canvas edge in SVG units.
const SIZE: f64 = 480.0;
/// Margin around the plot area, leaving room for labels.
const MARGIN: f64 = 48.0;

fn x_pos(v: f64) -> f64 {
    MARGIN + v.clamp(0.0, 1.0) * (SIZE - 2.0 * MARGIN)
}

fn y_pos(v: f64) -> f64 {
    // SVG y grows downward; plot y grows upward.
    SIZE - MARGIN - v.clamp(0.0, 1.0) * (SIZE - 2.0 * MARGIN)
}

/// Renders `points` (x, y in [0,1]) as a polyline plot titled `title`.
pub fn curve_svg(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" \
         viewBox=\"0 0 {s} {s}\">\n",
        s = SIZE
    ));
    out.push_str(&format!(
        "  <rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n",
        s = SIZE
    ));

    // Quarter gridlines with tick labels.
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let (gx, gy) = (x_pos(v), y_pos(v));
        out.push_str(&format!(
            "  <line x1=\"{gx:.1}\" y1=\"{top:.1}\" x2=\"{gx:.1}\" y2=\"{bottom:.1}\" \
             stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            top = y_pos(1.0),
            bottom = y_pos(0.0),
        ));
        out.push_str(&format!(
            "  <line x1=\"{left:.1}\" y1=\"{gy:.1}\" x2=\"{right:.1}\" y2=\"{gy:.1}\" \
             stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            left = x_pos(0.0),
            right = x_pos(1.0),
        ));
        out.push_str(&format!(
            "  <text x=\"{gx:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"middle\" \
             fill=\"#444\">{v}</text>\n",
            y = y_pos(0.0) + 18.0,
        ));
        out.push_str(&format!(
            "  <text x=\"{x:.1}\" y=\"{gy:.1}\" font-size=\"12\" text-anchor=\"end\" \
             dominant-baseline=\"middle\" fill=\"#444\">{v}</text>\n",
            x = x_pos(0.0) - 8.0,
        ));
    }

    // Axes box.
    out.push_str(&format!(
        "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" \
         fill=\"none\" stroke=\"#222\" stroke-width=\"1.5\"/>\n",
        x = x_pos(0.0),
        y = y_pos(1.0),
        w = SIZE - 2.0 * MARGIN,
        h = SIZE - 2.0 * MARGIN,
    ));

    // The curve itself.
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", x_pos(x), y_pos(y)))
        .collect();
    out.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n",
        coords.join(" ")
    ));

    // Title and axis labels.
    out.push_str(&format!(
        "  <text x=\"{x:.1}\" y=\"26\" font-size=\"16\" text-anchor=\"middle\" \
         fill=\"#111\">{title}</text>\n",
        x = SIZE / 2.0,
    ));
    out.push_str(&format!(
        "  <text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         fill=\"#111\">{x_label}</text>\n",
        x = SIZE / 2.0,
        y = SIZE - 10.0,
    ));
    out.push_str(&format!(
        "  <text x=\"14\" y=\"{y:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {y:.1})\" fill=\"#111\">{y_label}</text>\n",
        y = SIZE / 2.0,
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_hold_one_polyline_with_every_point() {
        let points = vec![(0.0, 0.0), (0.25, 0.75), (1.0, 1.0)];
        let svg = curve_svg(&points, "roc", "false positive rate", "true positive rate");
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let polyline_line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        assert_eq!(polyline_line.split(' ').filter(|t| t.contains(',')).count(), 3);
        assert!(svg.contains(">roc</text>"));
        assert!(svg.contains("false positive rate"));
    }

    #[test]
    fn identical_curves_render_identical_svg() {
        let points = vec![(0.0, 0.1), (0.5, 0.5), (1.0, 0.9)];
        let a = curve_svg(&points, "t", "x", "y");
        let b = curve_svg(&points, "t", "x", "y");
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_points_are_clamped_into_the_plot_area() {
        let svg = curve_svg(&[(-1.0, 2.0), (2.0, -1.0)], "t", "x", "y");
        let polyline_line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        for token in polyline_line.split('"').nth(1).unwrap().split(' ') {
            let (x, y) = token.split_once(',').unwrap();
            let x: f64 = x.parse().unwrap();
            let y: f64 = y.parse().unwrap();
            assert!((MARGIN..=SIZE - MARGIN).contains(&x));
            assert!((MARGIN..=SIZE - MARGIN).contains(&y));
        }
    }
}
