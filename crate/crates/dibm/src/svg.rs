//! Minimal SVG line plots: axes with ticks, polylines with optional dash
//! patterns, and vertical markers. Enough for the diagrams this crate emits
//! without an external plotting dependency.

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const TICKS: usize = 6;

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
    vlines: Vec<(f64, String)>,
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
            vlines: Vec::new(),
        }
    }

    pub fn add_series(&mut self, points: Vec<(f64, f64)>, color: &str, dashed: bool) {
        if !points.is_empty() {
            self.series.push(Series {
                points,
                color: color.to_string(),
                dashed,
            });
        }
    }

    /// Vertical reference marker at `x`.
    pub fn add_vline(&mut self, x: f64, color: &str) {
        self.vlines.push((x, color.to_string()));
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        xs.extend(self.vlines.iter().map(|v| v.0));
        let ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .collect();
        let span = |v: &[f64]| -> (f64, f64) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi.is_finite() && hi > lo {
                let pad = 0.04 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (0.0, 1.0)
            }
        };
        (span(&xs), span(&ys))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"16\">{}</text>\n",
            WIDTH / 2.0,
            self.title
        ));

        // axes box
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            MARGIN_L,
            MARGIN_T,
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        ));

        for i in 0..TICKS {
            let fx = x0 + (x1 - x0) * i as f64 / (TICKS - 1) as f64;
            let fy = y0 + (y1 - y0) * i as f64 / (TICKS - 1) as f64;
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n\
                 <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
                 font-size=\"11\">{4:.4}</text>\n",
                px(fx),
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0,
                HEIGHT - MARGIN_B + 18.0,
                fx
            ));
            out.push_str(&format!(
                "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n\
                 <text x=\"{3}\" y=\"{4}\" text-anchor=\"end\" font-family=\"sans-serif\" \
                 font-size=\"11\">{5:.4}</text>\n",
                py(fy),
                MARGIN_L - 5.0,
                MARGIN_L,
                MARGIN_L - 8.0,
                py(fy) + 4.0,
                fy
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\">{}</text>\n",
            MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            self.x_label
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
            MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
            self.y_label
        ));

        for (x, color) in &self.vlines {
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\" \
                 stroke-width=\"1.5\"/>\n",
                px(*x),
                MARGIN_T,
                HEIGHT - MARGIN_B,
                color
            ));
        }

        for s in &self.series {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let dash = if s.dashed {
                " stroke-dasharray=\"6,4\""
            } else {
                ""
            };
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{}/>\n",
                pts.join(" "),
                s.color,
                dash
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_dashes_and_marker() {
        let mut plot = LinePlot::new("test", "x", "y");
        plot.add_series(vec![(0.0, 0.0), (1.0, 1.0)], "black", false);
        plot.add_series(vec![(0.0, 1.0), (1.0, 0.0)], "blue", true);
        plot.add_vline(0.5, "green");
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("green"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
