//! Small deterministic SVG charts for evaluation reports. Output depends
//! only on the input data, so reruns produce identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 72.0;
const PALETTE: &[&str] = &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, mean, sd)`, ascending in x.
    pub points: Vec<(f64, f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
        escape(y_label)
    );
}

/// Maps `[lo, hi]` onto the plot's vertical extent.
struct YScale {
    lo: f64,
    hi: f64,
}

impl YScale {
    fn new(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Self { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + h * (1.0 - (v - self.lo) / (self.hi - self.lo))
    }

    fn axis(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
            HEIGHT - BOTTOM
        );
        for k in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"##,
                LEFT,
                WIDTH - RIGHT,
                LEFT - 6.0,
                y + 4.0
            );
        }
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Bars of mean value with ±1 sd whiskers.
pub fn bar_chart_svg(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let mut out = String::new();
    header(&mut out, title, y_label);
    let hi = bars
        .iter()
        .map(|b| finite_or_zero(b.mean) + finite_or_zero(b.sd))
        .fold(0.0f64, f64::max);
    let lo = bars
        .iter()
        .map(|b| finite_or_zero(b.mean) - finite_or_zero(b.sd))
        .fold(0.0f64, f64::min);
    let scale = YScale::new(lo, hi);
    scale.axis(&mut out);
    let slot = (WIDTH - LEFT - RIGHT) / bars.len().max(1) as f64;
    let zero = scale.y(0.0);
    for (i, b) in bars.iter().enumerate() {
        let (mean, sd) = (finite_or_zero(b.mean), finite_or_zero(b.sd));
        let cx = LEFT + slot * (i as f64 + 0.5);
        let w = slot * 0.6;
        let top = scale.y(mean).min(zero);
        let h = (scale.y(mean) - zero).abs();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{top:.1}" width="{w:.1}" height="{h:.1}" fill="{color}"/>"#,
            cx - w / 2.0
        );
        let (y1, y2) = (scale.y(mean + sd), scale.y(mean - sd));
        let _ = writeln!(
            out,
            r#"<path d="M{:.1} {y1:.1}H{:.1}M{cx:.1} {y1:.1}V{y2:.1}M{:.1} {y2:.1}H{:.1}" stroke="black" fill="none"/>"#,
            cx - 6.0,
            cx + 6.0,
            cx - 6.0,
            cx + 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(&b.label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="10">{mean:.3}±{sd:.3}</text>"#,
            HEIGHT - BOTTOM + 34.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Lines of mean value over x with shaded ±1 sd bands.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title, y_label);
    let pts = || series.iter().flat_map(|s| s.points.iter());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, sd) in pts() {
        let (m, sd) = (finite_or_zero(m), finite_or_zero(sd));
        lo = lo.min(m - sd);
        hi = hi.max(m + sd);
        xlo = xlo.min(x);
        xhi = xhi.max(x);
    }
    if !lo.is_finite() {
        (lo, hi, xlo, xhi) = (0.0, 1.0, 0.0, 1.0);
    }
    if xhi - xlo < 1e-12 {
        xlo -= 0.5;
        xhi += 0.5;
    }
    let scale = YScale::new(lo, hi);
    scale.axis(&mut out);
    let px = |x: f64| LEFT + (WIDTH - LEFT - RIGHT) * (x - xlo) / (xhi - xlo);
    let base = HEIGHT - BOTTOM;
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    let mut xs: Vec<f64> = pts().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            px(x),
            base + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        base + 40.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for (k, &(x, m, sd)) in s.points.iter().enumerate() {
            let _ = write!(
                band,
                "{}{:.1} {:.1}",
                if k == 0 { "M" } else { "L" },
                px(x),
                scale.y(finite_or_zero(m) + finite_or_zero(sd))
            );
        }
        for &(x, m, sd) in s.points.iter().rev() {
            let _ = write!(band, "L{:.1} {:.1}", px(x), scale.y(finite_or_zero(m) - finite_or_zero(sd)));
        }
        let _ = writeln!(out, r#"<path d="{band}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
        let line: Vec<String> = s
            .points
            .iter()
            .map(|&(x, m, _)| format!("{:.1},{:.1}", px(x), scale.y(finite_or_zero(m))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            LEFT + 8.0,
            TOP + 14.0 * (i as f64 + 1.0),
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_chart_is_deterministic_and_escaped() {
        let bars = vec![
            Bar { label: "vne".into(), mean: 0.42, sd: 0.02 },
            Bar { label: "a<b".into(), mean: 0.1, sd: f64::NAN },
        ];
        let a = bar_chart_svg("R²", "R²", &bars);
        assert_eq!(a, bar_chart_svg("R²", "R²", &bars));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a&lt;b") && !a.contains("NaN"));
        assert_eq!(a.matches("<rect x=").count(), 2);
    }

    #[test]
    fn line_chart_has_band_per_series() {
        let s = vec![
            Series { name: "vne".into(), points: vec![(2.0, 0.1, 0.05), (5.0, 0.3, 0.02), (10.0, 0.4, 0.01)] },
            Series { name: "frobenius".into(), points: vec![(2.0, 0.1, 0.05)] },
        ];
        let svg = line_chart_svg("t", "N", "R²", &s);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("fill-opacity").count(), 2);
        assert!(line_chart_svg("t", "N", "R²", &[]).ends_with("</svg>\n"));
    }
}
