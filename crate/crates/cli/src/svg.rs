//! Static scatter of the normalized objectives.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Point in the drawing plane plus fill color.
struct Mark {
    x: f64,
    y: f64,
    fill: String,
    converged: bool,
}

fn red_blue(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}30{b:02x}")
}

/// Isometric view of the first three coordinates.
fn isometric(p: &[f64]) -> (f64, f64) {
    let c = 30f64.to_radians().cos();
    let s = 30f64.to_radians().sin();
    ((p[0] - p[1]) * c, p[2] - (p[0] + p[1]) * s)
}

/// Renders `fnorm` rows as SVG. Two objectives plot directly, three or more
/// use an isometric projection of the first three with the fourth as a
/// red-blue fill.
pub fn render(fnorm: &[Vec<f64>], converged: &[bool], title: &str) -> String {
    let k = fnorm.first().map_or(2, Vec::len);
    let project = |p: &[f64]| if k >= 3 { isometric(p) } else { (p[0], p[1]) };
    let marks: Vec<Mark> = fnorm
        .iter()
        .zip(converged)
        .filter(|(p, _)| p.iter().all(|v| v.is_finite()))
        .map(|(p, &ok)| {
            let (x, y) = project(p);
            let fill = if k >= 4 { red_blue(p[3]) } else { "#3060c0".to_string() };
            Mark { x, y, fill, converged: ok }
        })
        .collect();

    // Frame: the unit axes plus every mark.
    let axes: Vec<(f64, f64)> = if k >= 3 {
        vec![(0.0, 0.0), isometric(&[1.0, 0.0, 0.0]), isometric(&[0.0, 1.0, 0.0]), isometric(&[0.0, 0.0, 1.0])]
    } else {
        vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    };
    let all = axes.iter().copied().chain(marks.iter().map(|m| (m.x, m.y)));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let scale = (SIZE - 2.0 * MARGIN) / (x1 - x0).max(y1 - y0).max(1e-12);
    let to_px = |x: f64, y: f64| (MARGIN + (x - x0) * scale, SIZE - MARGIN - (y - y0) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let (ox, oy) = to_px(0.0, 0.0);
    for (i, &(ax, ay)) in axes.iter().skip(1).enumerate() {
        let (px, py) = to_px(ax, ay);
        let _ = writeln!(
            out,
            r##"<line x1="{ox:.2}" y1="{oy:.2}" x2="{px:.2}" y2="{py:.2}" stroke="#999" stroke-width="1"/>"##
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="#555">f{}</text>"##,
            px + 4.0,
            py - 4.0,
            i + 1
        );
    }
    for m in &marks {
        let (px, py) = to_px(m.x, m.y);
        if m.converged {
            let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"/>"#, m.fill);
        } else {
            let _ = writeln!(
                out,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="none" stroke="#888"/>"##
            );
        }
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
    fn one_circle_per_finite_point() {
        let pts = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![f64::NAN, 0.0]];
        let svg = render(&pts, &[true, false, true], "t");
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains(r#"fill="none""#));
    }

    #[test]
    fn fourth_objective_sets_the_fill() {
        let pts = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]];
        let svg = render(&pts, &[true, true], "k4");
        assert!(svg.contains(&red_blue(0.0)));
        assert!(svg.contains(&red_blue(1.0)));
        assert_eq!(red_blue(1.0), "#ff3000");
    }
}
