//! Minimal SVG emission for overhead trajectory plots: one panel per
//! palm, planned path in blue, baseline in red, goals as green stars.

use dls_core::frames::PlanarPose;

/// One polyline per palm frame.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    /// (x, y) positions of the object relative to the left palm.
    pub left: Vec<(f64, f64)>,
    /// Same for the right palm.
    pub right: Vec<(f64, f64)>,
}

const PANEL: f64 = 340.0;
const MARGIN: f64 = 45.0;

/// Render the two palm panels side by side.
pub fn trajectory_svg(
    title: &str,
    palm_radius: f64,
    series: &[Series],
    goals_left: &[PlanarPose],
    goals_right: &[PlanarPose],
) -> String {
    let width = 2.0 * PANEL + 3.0 * MARGIN;
    let height = PANEL + 2.0 * MARGIN + 20.0;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    out.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    ));

    for (panel, (goals, side)) in [(goals_left, "left palm"), (goals_right, "right palm")]
        .into_iter()
        .enumerate()
    {
        let x0 = MARGIN + panel as f64 * (PANEL + MARGIN);
        let y0 = MARGIN + 10.0;
        out.push_str(&panel_svg(x0, y0, side, palm_radius, series, goals, panel));
    }

    // Legend.
    let ly = height - 12.0;
    let mut lx = MARGIN;
    for s in series {
        let dash = if s.dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        out.push_str(&format!(
            "  <line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" \
             stroke-width=\"2\"{dash}/>\n",
            ly - 4.0,
            lx + 26.0,
            ly - 4.0,
            s.color
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{ly:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 32.0,
            xml_escape(s.label)
        ));
        lx += 150.0;
    }
    out.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{ly:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         fill=\"#2ca02c\">&#9733; goal</text>\n",
        lx + 10.0
    ));

    out.push_str("</svg>\n");
    out
}

fn panel_svg(
    x0: f64,
    y0: f64,
    side: &str,
    palm_radius: f64,
    series: &[Series],
    goals: &[PlanarPose],
    panel_index: usize,
) -> String {
    // Data bounds over every series and goal, padded.
    fn extend(min: &mut (f64, f64), max: &mut (f64, f64), x: f64, y: f64) {
        min.0 = min.0.min(x);
        min.1 = min.1.min(y);
        max.0 = max.0.max(x);
        max.1 = max.1.max(y);
    }
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in series {
        let pts = if panel_index == 0 { &s.left } else { &s.right };
        for &(x, y) in pts {
            extend(&mut min, &mut max, x, y);
        }
    }
    for g in goals {
        extend(&mut min, &mut max, g.x, g.y);
    }
    if !min.0.is_finite() {
        extend(&mut min, &mut max, -0.01, -0.01);
        extend(&mut min, &mut max, 0.01, 0.01);
    }
    let span = (max.0 - min.0).max(max.1 - min.1).max(1e-3);
    let pad = 0.15 * span;
    let cx = 0.5 * (min.0 + max.0);
    let cy = 0.5 * (min.1 + max.1);
    let half = 0.5 * span + pad;
    let scale = PANEL / (2.0 * half);

    let map = |x: f64, y: f64| -> (f64, f64) {
        (
            x0 + (x - (cx - half)) * scale,
            // Flip y so up on the palm is up on the page.
            y0 + PANEL - (y - (cy - half)) * scale,
        )
    };

    let mut out = String::new();
    out.push_str(&format!(
        "  <rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL:.1}\" height=\"{PANEL:.1}\" \
         fill=\"#fcfcfc\" stroke=\"#999\"/>\n"
    ));
    out.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">object in {side} frame</text>\n",
        x0 + PANEL / 2.0,
        y0 - 6.0
    ));

    // Workspace disc (may extend beyond the panel; clip to it).
    let (ccx, ccy) = map(0.0, 0.0);
    out.push_str(&format!(
        "  <clipPath id=\"clip{panel_index}\"><rect x=\"{x0:.1}\" y=\"{y0:.1}\" \
         width=\"{PANEL:.1}\" height=\"{PANEL:.1}\"/></clipPath>\n"
    ));
    out.push_str(&format!(
        "  <circle cx=\"{ccx:.1}\" cy=\"{ccy:.1}\" r=\"{:.1}\" fill=\"none\" stroke=\"#ccc\" \
         stroke-width=\"1\" clip-path=\"url(#clip{panel_index})\"/>\n",
        palm_radius * scale
    ));

    for s in series {
        let pts = if panel_index == 0 { &s.left } else { &s.right };
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let dash = if s.dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        out.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{dash}/>\n",
            path.join(" "),
            s.color
        ));
        // Start marker.
        let (sx, sy) = map(pts[0].0, pts[0].1);
        out.push_str(&format!(
            "  <circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"3\" fill=\"{}\"/>\n",
            s.color
        ));
    }

    for g in goals {
        let (gx, gy) = map(g.x, g.y);
        out.push_str(&format!(
            "  <text x=\"{gx:.2}\" y=\"{:.2}\" font-size=\"16\" fill=\"#2ca02c\" \
             text-anchor=\"middle\">&#9733;</text>\n",
            gy + 5.0
        ));
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
