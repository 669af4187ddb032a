//! Plain SVG charts. Every coordinate is printed with fixed decimals and no
//! metadata is embedded, so equal inputs give byte-equal files.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
    /// 0 source, 1 target.
    pub domain: usize,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        Self {
            x: padded(range(xs)),
            y: padded(range(ys)),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .unwrap_or((0.0, 1.0))
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{H:.0}" viewBox="0 0 {W:.0} {H:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{W:.0}" height="{H:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

/// Five evenly spaced ticks, or whole decades on a log axis.
fn x_ticks(f: &Frame, log: bool) -> Vec<f64> {
    if log {
        let decades: Vec<f64> = (f.x.0.ceil() as i32..=f.x.1.floor() as i32)
            .map(f64::from)
            .collect();
        if decades.len() >= 2 {
            return decades;
        }
    }
    (0..=4)
        .map(|i| f.x.0 + i as f64 / 4.0 * (f.x.1 - f.x.0))
        .collect()
}

fn axes(
    out: &mut String,
    f: &Frame,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    x_tick: impl Fn(f64) -> String,
) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for &xv in xs {
        let px = f.px(xv);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            x_tick(xv)
        );
    }
    for i in 0..=4 {
        let yv = f.y.0 + i as f64 / 4.0 * (f.y.1 - f.y.0);
        let py = f.py(yv);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Line chart; with `log_x` the x values are plotted on a log10 axis and
/// nonpositive ones are dropped.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let keep = |&(x, y): &(f64, f64)| y.is_finite() && x.is_finite() && (!log_x || x > 0.0);
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .copied()
                .filter(keep)
                .map(|(x, y)| (tx(x), y))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let f = Frame::new(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title);
    let xs = x_ticks(&f, log_x);
    axes(&mut out, &f, x_label, y_label, &xs, |v| {
        if log_x {
            tick(10f64.powf(v))
        } else {
            tick(v)
        }
    });
    for (i, (s, p)) in series.iter().zip(&pts).enumerate() {
        let c = color(i);
        let d: Vec<String> = p
            .iter()
            .enumerate()
            .map(|(j, &(x, y))| {
                format!(
                    "{}{:.2},{:.2}",
                    if j == 0 { "M" } else { "L" },
                    f.px(x),
                    f.py(y)
                )
            })
            .collect();
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                d.join(" ")
            );
        }
        for &(x, y) in p {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                f.px(x),
                f.py(y)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter with one color per label; source points are circles, target
/// points squares.
pub fn scatter(title: &str, points: &[ScatterPoint]) -> String {
    let f = Frame::new(points.iter().map(|p| p.x), points.iter().map(|p| p.y));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "z0", "z1", &x_ticks(&f, false), tick);
    for p in points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
        let (x, y, c) = (f.px(p.x), f.py(p.y), color(p.label));
        if p.domain == 0 {
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{c}" fill-opacity="0.7"/>"#
            );
        } else {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="none" stroke="{c}"/>"#,
                x - 3.0,
                y - 3.0
            );
        }
    }
    let mut labels: Vec<usize> = points.iter().map(|p| p.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let lx = W - RIGHT + 12.0;
    let mut ly = TOP + 10.0;
    for (name, domain) in [("source", 0), ("target", 1)] {
        if domain == 0 {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{ly:.1}" r="4" fill="black"/>"#,
                lx + 6.0
            );
        } else {
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="none" stroke="black"/>"#,
                lx + 2.0,
                ly - 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{name}</text>"#,
            lx + 18.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    for l in labels {
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">class {l}</text>"#,
            lx + 1.0,
            ly - 5.0,
            color(l),
            lx + 18.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> Vec<Series> {
        ["rhs", "source risk", "lambda"]
            .iter()
            .enumerate()
            .map(|(i, n)| Series {
                name: n.to_string(),
                points: vec![(0.01, i as f64), (1.0, 0.5), (100.0, 2.0)],
            })
            .collect()
    }

    #[test]
    fn line_chart_shape() {
        let svg = line_chart("t", "K", "value", &curve(), true);
        assert_eq!(svg.matches("<path d=\"M").count(), 1 + 3);
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg, line_chart("t", "K", "value", &curve(), true));
    }

    #[test]
    fn log_axis_drops_nonpositive() {
        let s = [Series {
            name: "a".into(),
            points: vec![(0.0, 1.0), (1.0, f64::NAN), (10.0, 2.0)],
        }];
        let svg = line_chart("t", "K", "v", &s, true);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn scatter_markers() {
        let pts: Vec<ScatterPoint> = (0..6)
            .map(|i| ScatterPoint {
                x: i as f64,
                y: -(i as f64),
                label: i % 3,
                domain: i % 2,
            })
            .collect();
        let svg = scatter("latent", &pts);
        // 3 source circles plus the legend circle; 3 target squares plus legend.
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("fill=\"none\" stroke=\"#").count(), 3);
        assert!(svg.contains("class 2"));
    }
}
