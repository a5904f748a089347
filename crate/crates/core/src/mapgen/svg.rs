use std::fmt::Write;

use super::MapFrame;

const SIZE: f64 = 800.0;
const PAD: f64 = 20.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Standalone SVG rendering of a frame: country fills, edges, node dots and
/// a label at each country's first ring centroid. Output is deterministic.
pub fn render_svg(frame: &MapFrame) -> String {
    let mut xs: Vec<f64> = frame.nodes.iter().map(|n| n.x).collect();
    let mut ys: Vec<f64> = frame.nodes.iter().map(|n| n.y).collect();
    for c in &frame.countries {
        for r in &c.rings {
            xs.extend(r.iter().map(|p| p[0]));
            ys.extend(r.iter().map(|p| p[1]));
        }
    }
    let lo_x = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo_y = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi_x - lo_x).max(hi_y - lo_y);
    let scale = if span.is_finite() && span > 0.0 { (SIZE - 2.0 * PAD) / span } else { 1.0 };
    let (ox, oy) = if lo_x.is_finite() { (lo_x, lo_y) } else { (0.0, 0.0) };
    // flip y so the map reads with +y up
    let tx = |x: f64| PAD + (x - ox) * scale;
    let ty = |y: f64| SIZE - PAD - (y - oy) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for c in &frame.countries {
        let mut d = String::new();
        for r in &c.rings {
            for (i, p) in r.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { 'M' } else { 'L' }, tx(p[0]), ty(p[1]));
            }
            d.push_str("Z ");
        }
        let _ = writeln!(
            s,
            r##"<path data-cluster="{}" d="{}" fill="{}" fill-rule="evenodd" stroke="#555555" stroke-width="1"/>"##,
            escape(&c.cluster_id),
            d.trim_end(),
            escape(&c.color)
        );
    }
    let index: std::collections::HashMap<&str, (f64, f64)> =
        frame.nodes.iter().map(|n| (n.id.as_str(), (n.x, n.y))).collect();
    for e in &frame.edges {
        if let (Some(a), Some(b)) = (index.get(e.src.as_str()), index.get(e.dst.as_str())) {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-opacity="{:.2}"/>"##,
                tx(a.0),
                ty(a.1),
                tx(b.0),
                ty(b.1),
                e.w.clamp(0.1, 1.0)
            );
        }
    }
    for n in &frame.nodes {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#222222"><title>{}</title></circle>"##,
            tx(n.x),
            ty(n.y),
            escape(&n.text)
        );
    }
    for c in &frame.countries {
        let Some(ring) = c.rings.first() else { continue };
        let k = (ring.len() - 1).max(1) as f64;
        let cx = ring.iter().take(ring.len() - 1).map(|p| p[0]).sum::<f64>() / k;
        let cy = ring.iter().take(ring.len() - 1).map(|p| p[1]).sum::<f64>() / k;
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"##,
            tx(cx),
            ty(cy),
            escape(&c.label.iter().take(3).cloned().collect::<Vec<_>>().join(" "))
        );
    }
    s.push_str("</svg>\n");
    s
}
