//! Minimal static SVG charts. Coordinates are printed with two decimals so
//! output bytes depend only on the data.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

/// Value range padded so flat data still gets a visible band.
fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    (lo, hi)
}

struct Frame {
    lo: f64,
    hi: f64,
    slots: usize,
}

impl Frame {
    fn x(&self, i: usize) -> f64 {
        let span = WIDTH - LEFT - RIGHT;
        if self.slots <= 1 {
            LEFT + span / 2.0
        } else {
            LEFT + span * i as f64 / (self.slots - 1) as f64
        }
    }

    fn y(&self, v: f64) -> f64 {
        let span = HEIGHT - TOP - BOTTOM;
        TOP + span * (self.hi - v) / (self.hi - self.lo)
    }

    fn axes(&self, out: &mut String) {
        let bottom = HEIGHT - BOTTOM;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{bottom}" stroke="#333"/>"##
        );
        let zero = self.y(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#999"/>"##,
            WIDTH - RIGHT
        );
        for v in [self.lo, (self.lo + self.hi) / 2.0, self.hi] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                self.y(v) + 4.0,
                trendpulse::fmt_real(v).trim_end_matches('0').trim_end_matches('.')
            );
        }
    }
}

fn polyline(points: &[(f64, f64)], style: &str) -> String {
    let coords = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ");
    format!("<polyline points=\"{coords}\" fill=\"none\" {style}/>\n")
}

/// Observed values as a solid line, forecast as a dotted continuation.
/// `labels` names every slot, observed first.
pub fn line_chart(title: &str, labels: &[String], observed: &[f64], forecast: &[f64]) -> String {
    let slots = observed.len() + forecast.len();
    let (lo, hi) = y_range(observed.iter().chain(forecast).copied());
    let frame = Frame { lo, hi, slots };
    let mut out = header(title);
    frame.axes(&mut out);

    let obs: Vec<(f64, f64)> = observed.iter().enumerate().map(|(i, v)| (frame.x(i), frame.y(*v))).collect();
    out.push_str(&polyline(&obs, r##"stroke="#1f77b4" stroke-width="2""##));
    if !forecast.is_empty() {
        let start = observed.len();
        let mut fc: Vec<(f64, f64)> = obs.last().copied().into_iter().collect();
        fc.extend(forecast.iter().enumerate().map(|(i, v)| (frame.x(start + i), frame.y(*v))));
        out.push_str(&polyline(&fc, r##"stroke="#d62728" stroke-width="2" stroke-dasharray="2,4""##));
        for (x, y) in &fc[1..] {
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#d62728"/>"##);
        }
    }

    // label roughly ten evenly spaced slots
    let step = slots.div_ceil(10).max(1);
    for (i, label) in labels.iter().enumerate().take(slots).step_by(step) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.x(i),
            HEIGHT - BOTTOM + 18.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let (lo, hi) = y_range(bars.iter().map(|(_, v)| *v));
    let frame = Frame {
        lo,
        hi,
        slots: bars.len() + 2,
    };
    let mut out = header(title);
    frame.axes(&mut out);
    let width = (WIDTH - LEFT - RIGHT) / (bars.len() + 2) as f64 * 0.6;
    for (i, (label, v)) in bars.iter().enumerate() {
        let cx = frame.x(i + 1);
        let (y0, y1) = (frame.y(0.0), frame.y(*v));
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{width:.2}" height="{:.2}" fill="#4c72b0"/>"##,
            cx - width / 2.0,
            y0.min(y1),
            (y0 - y1).abs()
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
