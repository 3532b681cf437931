//! Minimal SVG rendering of the enrichment curves.

use std::fmt::Write;

use ifm_core::protocol::EnrichmentPoint;
use ifm_core::Estimate;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn x(f: f64) -> f64 {
    MARGIN + f * (WIDTH - 2.0 * MARGIN)
}

fn y(v: f64) -> f64 {
    HEIGHT - MARGIN - v.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN)
}

/// Runs of consecutive defined points.
fn segments(
    points: &[EnrichmentPoint],
    pick: fn(&EnrichmentPoint) -> Option<Estimate>,
) -> Vec<Vec<(f64, Estimate)>> {
    let mut out: Vec<Vec<(f64, Estimate)>> = vec![Vec::new()];
    for p in points {
        match pick(p) {
            Some(e) => out.last_mut().unwrap().push((p.f_original, e)),
            None if !out.last().unwrap().is_empty() => out.push(Vec::new()),
            None => {}
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

fn draw_curve(svg: &mut String, segs: &[Vec<(f64, Estimate)>], colour: &str) {
    for seg in segs {
        let upper = seg.iter().map(|(f, e)| (x(*f), y(e.value + e.sigma)));
        let lower = seg.iter().rev().map(|(f, e)| (x(*f), y(e.value - e.sigma)));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(a, b)| format!("{a:.2},{b:.2}"))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{colour}" fill-opacity="0.25" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = seg
            .iter()
            .map(|(f, e)| format!("{:.2},{:.2}", x(*f), y(e.value)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            line.join(" ")
        );
    }
}

pub fn enrichment_plot(points: &[EnrichmentPoint]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for i in 0..=10 {
        let v = f64::from(i) / 10.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#,
            x(v),
            HEIGHT - MARGIN + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="6,4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    draw_curve(&mut svg, &segments(points, |p| p.f_black_in_ii), "#c0392b");
    draw_curve(&mut svg, &segments(points, |p| p.f_trans_in_i), "#2471a3");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">original black fraction</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" fill="#c0392b">black share of group ii</text>"##,
        MARGIN + 10.0,
        MARGIN + 20.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" fill="#2471a3">transparent share of group i</text>"##,
        MARGIN + 10.0,
        MARGIN + 38.0
    );
    svg.push_str("</svg>\n");
    svg
}
