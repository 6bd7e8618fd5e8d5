//! Minimal self-contained SVG line plots.

use std::fmt::Write;

use crate::curve::Table;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// One polyline per non-`t` column; NaN values break the line.
pub fn render_svg(table: &Table, title: &str) -> String {
    let finite = |v: f64| v.is_finite();
    let xs: Vec<f64> = table.rows.iter().map(|r| r[0]).filter(|v| finite(*v)).collect();
    let ys: Vec<f64> = table.rows.iter().flat_map(|r| r[1..].iter().copied()).filter(|v| finite(*v)).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} L{PAD},{b} L{r},{b}" stroke="black" fill="none"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for (v, anchor, x, y) in [
        (x0, "start", PAD, H - PAD + 18.0),
        (x1, "end", W - PAD, H - PAD + 18.0),
        (y0, "end", PAD - 4.0, H - PAD),
        (y1, "end", PAD - 4.0, PAD + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="11" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    for j in 1..table.columns.len() {
        let color = COLORS[(j - 1) % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for r in &table.rows {
            let (x, y) = (r[0], r[j]);
            if finite(x) && finite(y) {
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, d.trim_end());
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * j as f64,
            escape(&table.columns[j])
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
