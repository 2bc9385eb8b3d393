//! Minimal SVG bar charts and heatmaps. Coordinates use six significant digits.

use std::fmt::Write;

use super::output::{fmt_sig, Meta};

fn n(x: f64) -> String {
    fmt_sig(x, 6)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(svg: &mut String, width: f64, height: f64, title: &str, meta: &Meta) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        n(width),
        n(height),
        n(width),
        n(height)
    );
    let _ = writeln!(svg, "<!-- {} -->", escape(&meta.header_line()));
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(svg, "<desc>{}</desc>", escape(&meta.header_line()));
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, n(width / 2.0), escape(title));
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    /// Half-length of the error whisker.
    pub err: Option<f64>,
}

/// Rounded tick step giving roughly five intervals over `span`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    }
}

pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar], meta: &Meta) -> String {
    let (width, height) = (120.0 + 70.0 * bars.len().max(1) as f64, 360.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 90.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
    let hi = bars.iter().map(|b| finite(b.value) + finite(b.err.unwrap_or(0.0))).fold(0.0, f64::max);
    let lo = bars.iter().map(|b| finite(b.value) - finite(b.err.unwrap_or(0.0))).fold(0.0, f64::min);
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let step = tick_step(span);
    let (y_min, y_max) = ((lo / step).floor() * step, (hi / step).ceil() * step);
    let y_max = if y_max > y_min { y_max } else { y_min + step };
    let y = |v: f64| top + plot_h * (y_max - v) / (y_max - y_min);

    let mut svg = String::new();
    open(&mut svg, width, height, title, meta);
    let mut t = y_min;
    while t <= y_max + step * 1e-9 {
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"##,
            n(left),
            n(y(t)),
            n(left + plot_w),
            n(y(t)),
            n(left - 6.0),
            n(y(t) + 3.0),
            n(t)
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" font-size="11">{}</text>"#,
        n(top + plot_h / 2.0),
        n(top + plot_h / 2.0),
        escape(y_label)
    );
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, b) in bars.iter().enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        let v = finite(b.value);
        let (y0, y1) = (y(0.0_f64.max(y_min)), y(v));
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#4c78a8"/>"##,
            n(cx - slot * 0.3),
            n(y0.min(y1)),
            n(slot * 0.6),
            n((y0 - y1).abs())
        );
        if let Some(e) = b.err.filter(|e| e.is_finite() && *e > 0.0) {
            let _ = writeln!(
                svg,
                r#"<path d="M{} {}V{}M{} {}H{}M{} {}H{}" stroke="black" fill="none"/>"#,
                n(cx),
                n(y(v - e)),
                n(y(v + e)),
                n(cx - 5.0),
                n(y(v - e)),
                n(cx + 5.0),
                n(cx - 5.0),
                n(y(v + e)),
                n(cx + 5.0)
            );
        }
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" transform="rotate(35 {} {})" font-size="10">{}</text>"#,
            n(cx),
            n(ly),
            n(cx),
            n(ly),
            escape(&b.label)
        );
    }
    let _ = writeln!(svg, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, n(left), n(top), n(left), n(top + plot_h));
    svg.push_str("</svg>\n");
    svg
}

/// Diverging map over [−1, 1]: blue through white to red.
pub fn diverging_color(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let (end, w) = if t < 0.0 { ((33.0, 102.0, 172.0), -t) } else { ((178.0, 24.0, 43.0), t) };
    let mix = |c: f64| (255.0 + (c - 255.0) * w).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(end.0), mix(end.1), mix(end.2))
}

pub fn heatmap(title: &str, row_label: &str, col_label: &str, rows: &[Vec<f64>], meta: &Meta) -> String {
    let (nr, nc) = (rows.len().max(1), rows.first().map_or(1, Vec::len).max(1));
    let cell = (360.0 / nr.max(nc) as f64).clamp(6.0, 40.0);
    let (left, top) = (60.0, 40.0);
    let width = left + cell * nc as f64 + 90.0;
    let height = top + cell * nr as f64 + 50.0;
    let mut svg = String::new();
    open(&mut svg, width, height, title, meta);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{}</title></rect>"#,
                n(left + cell * j as f64),
                n(top + cell * i as f64),
                n(cell),
                n(cell),
                diverging_color(v),
                n(v)
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
        n(left + cell * nc as f64 / 2.0),
        n(top + cell * nr as f64 + 20.0),
        escape(col_label)
    );
    let cy = top + cell * nr as f64 / 2.0;
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle" font-size="11">{}</text>"#,
        n(cy),
        n(cy),
        escape(row_label)
    );
    let lx = left + cell * nc as f64 + 20.0;
    for k in 0..=10 {
        let v = 1.0 - 0.2 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="14" height="12" fill="{}"/>"#,
            n(lx),
            n(top + 12.0 * k as f64),
            diverging_color(v)
        );
        if k % 5 == 0 {
            let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, n(lx + 18.0), n(top + 12.0 * k as f64 + 10.0), n(v));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
