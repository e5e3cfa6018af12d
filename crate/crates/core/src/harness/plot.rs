use std::fmt::Write;

use super::metrics::CurvePoint;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

/// Static line plot of seed-averaged learning curves.
pub fn svg(title: &str, lines: &[(&str, &str, &[CurvePoint])]) -> String {
    let pts = lines.iter().flat_map(|l| l.2.iter());
    let (mut x1, mut y0, mut y1) = (1u64, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x1 = x1.max(p.step);
        y0 = y0.min(p.score);
        y1 = y1.max(p.score);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let sx = |s: u64| PAD + (W - 2.0 * PAD) * s as f64 / x1 as f64;
    let sy = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - y0) / (y1 - y0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<polyline points="{PAD},{} {PAD},{} {},{}" fill="none" stroke="black"/>"#,
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#, W - PAD, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.1}</text>"#, PAD - 4.0, PAD + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.1}</text>"#, PAD - 4.0, H - PAD);
    for (i, (name, color, curve)) in lines.iter().enumerate() {
        let points: Vec<String> = curve.iter().map(|p| format!("{:.1},{:.1}", sx(p.step), sy(p.score))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            W - PAD - 90.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines() {
        let a = [CurvePoint { step: 10, score: 1.0 }, CurvePoint { step: 20, score: 2.0 }];
        let b = [CurvePoint { step: 10, score: 3.0 }];
        let s = svg("t<1>", &[("baseline", "gray", &a), ("assisted", "blue", &b)]);
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("stroke-width=\"2\"").count(), 2);
        assert!(s.contains("t&lt;1&gt;"));
    }

    #[test]
    fn empty_curves_still_render() {
        assert!(svg("empty", &[("baseline", "gray", &[])]).ends_with("</svg>\n"));
    }
}
