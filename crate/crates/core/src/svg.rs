//! Minimal standalone SVG rendering for the analysis figures.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Plot area maps x, y ∈ [0, 1] to pixels.
fn px(x: f64, y: f64) -> (f64, f64) {
    let w = WIDTH - 2.0 * MARGIN;
    let h = HEIGHT - 2.0 * MARGIN;
    (MARGIN + x * w, HEIGHT - MARGIN - y * h)
}

fn axes(out: &mut String, x_label: &str, y_label: &str, y_min: f64) {
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (_, y) = px(0.0, t);
        let value = y_min + t * (1.0 - y_min);
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{value:.1}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Grouped bars: one group per category, one bar per series. `None` values
/// are drawn as an "n/a" marker.
pub fn bar_chart(title: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "", "failure rate", 0.0);
    let groups = categories.len().max(1) as f64;
    let bars = series.len().max(1) as f64;
    let group_w = 1.0 / groups;
    let bar_w = group_w * 0.8 / bars;
    for (g, cat) in categories.iter().enumerate() {
        let gx = g as f64 * group_w + group_w * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let x = gx + s as f64 * bar_w;
            let color = PALETTE[s % PALETTE.len()];
            match values.get(g).copied().flatten() {
                Some(v) => {
                    let (px0, py0) = px(x, v.clamp(0.0, 1.0));
                    let (px1, py1) = px(x + bar_w, 0.0);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                        px1 - px0,
                        py1 - py0
                    );
                }
                None => {
                    let (cx, cy) = px(x + bar_w / 2.0, 0.02);
                    let _ = writeln!(out, r#"<text x="{cx:.2}" y="{cy:.2}" text-anchor="middle">n/a</text>"#);
                }
            }
        }
        let (cx, cy) = px(gx + group_w * 0.4, 0.0);
        let _ = writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, cy + 16.0, escape(cat));
    }
    legend(&mut out, series.iter().map(|(n, _)| n.as_str()));
    out.push_str("</svg>\n");
    out
}

/// One polyline per series over `(x, y)` points in `[0, 1]²`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, y_label, 0.0);
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (a, b) = px(x.clamp(0.0, 1.0), y.clamp(0.0, 1.0));
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
    }
    legend(&mut out, series.iter().map(|(n, _)| n.as_str()));
    out.push_str("</svg>\n");
    out
}

fn legend<'a>(out: &mut String, names: impl Iterator<Item = &'a str>) {
    for (i, name) in names.enumerate() {
        let y = 44.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{y}">{}</text>"#,
            y - 9.0,
            x + 14.0,
            escape(name)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let bars = bar_chart(
            "rates",
            &["near_bowl".into(), "near_door".into()],
            &[("A<B".into(), vec![Some(1.0), None])],
        );
        assert!(bars.starts_with("<svg") && bars.trim_end().ends_with("</svg>"));
        assert!(bars.contains("A&lt;B"));
        assert!(bars.contains("n/a"));
        let lines = line_chart("c", "coverage", "acc", &[("m".into(), vec![(0.5, 1.0), (1.0, 0.5)])]);
        assert!(lines.contains("<polyline"));
    }
}
