//! Minimal SVG 1.1 emission: one polyline per curve, viewBox fitted to the
//! data with a 5% margin. Coordinates stay in data space (y negated so the
//! mathematical orientation is preserved under SVG's y-down convention).

use num_complex::Complex64;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub fn render(curves: &[Vec<Complex64>]) -> String {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for c in curves {
        for p in c {
            min_x = min_x.min(p.re);
            max_x = max_x.max(p.re);
            min_y = min_y.min(-p.im);
            max_y = max_y.max(-p.im);
        }
    }
    if curves.iter().all(|c| c.is_empty()) {
        (min_x, max_x, min_y, max_y) = (-1.0, 1.0, -1.0, 1.0);
    }
    let margin_x = 0.05 * (max_x - min_x).max(1e-12);
    let margin_y = 0.05 * (max_y - min_y).max(1e-12);
    let (x0, y0) = (min_x - margin_x, min_y - margin_y);
    let (w, h) = (
        max_x - min_x + 2.0 * margin_x,
        max_y - min_y + 2.0 * margin_y,
    );
    let stroke_width = 0.004 * w.max(h);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         viewBox=\"{x0:.6e} {y0:.6e} {w:.6e} {h:.6e}\" width=\"640\" height=\"640\" \
         preserveAspectRatio=\"xMidYMid meet\">\n"
    ));
    for (i, curve) in curves.iter().enumerate() {
        if curve.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.6e},{:.6e}", p.re, -p.im))
            .collect();
        out.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke_width:.6e}\" \
             points=\"{}\"/>\n",
            points.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}
