//! Static bar charts with fixed geometry and number formatting, so the same
//! values always render to the same bytes.

use std::fmt::Write;

const BAR: f64 = 28.0;
const GAP: f64 = 12.0;
const LEFT: f64 = 56.0;
const TOP: f64 = 40.0;
const PLOT_H: f64 = 240.0;
const LABEL_H: f64 = 230.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per entry on a fixed [0, 1] axis. Missing values are marked "n/a".
pub fn bar_chart(title: &str, bars: &[(String, Option<f64>)]) -> String {
    let width = LEFT + GAP + bars.len() as f64 * (BAR + GAP) + 20.0;
    let height = TOP + PLOT_H + LABEL_H;
    let base = TOP + PLOT_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT:.0}" y="22" font-size="15">{}</text>"#, escape(title));
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = base - v * PLOT_H;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.0}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.0}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            width - 20.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<line x1="{LEFT:.0}" y1="{TOP:.0}" x2="{LEFT:.0}" y2="{base:.0}" stroke="black"/>"#);
    for (i, (label, value)) in bars.iter().enumerate() {
        let x = LEFT + GAP + i as f64 * (BAR + GAP);
        let cx = x + BAR / 2.0;
        match value {
            Some(v) => {
                let h = v.clamp(0.0, 1.0) * PLOT_H;
                let _ = writeln!(
                    s,
                    r##"<rect x="{x:.1}" y="{:.1}" width="{BAR:.0}" height="{h:.1}" fill="#4a78b5"/><text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="9">{v:.3}</text>"##,
                    base - h,
                    base - h - 4.0
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="9">n/a</text>"#,
                    base - 4.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" transform="rotate(60 {cx:.1} {:.1})">{}</text>"#,
            base + 12.0,
            base + 12.0,
            escape(label)
        );
    }
    let _ =
        writeln!(s, r#"<line x1="{LEFT:.0}" y1="{base:.0}" x2="{:.1}" y2="{base:.0}" stroke="black"/>"#, width - 20.0);
    s.push_str("</svg>\n");
    s
}
