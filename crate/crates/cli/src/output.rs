//! CSV and SVG emission.

use std::fmt::Write as _;
use std::io::{self, Write};

/// Optional bound columns evaluated at each sample time.
pub struct BoundColumns<'a> {
    pub fast: Option<&'a dyn Fn(f64) -> f64>,
    pub slow: Option<&'a dyn Fn(f64) -> f64>,
}

impl BoundColumns<'_> {
    pub fn none() -> Self {
        BoundColumns {
            fast: None,
            slow: None,
        }
    }
}

pub fn csv_header(n: usize, m: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=n {
        let _ = write!(h, ",x{i}");
    }
    for j in 1..=m {
        let _ = write!(h, ",z{j}");
    }
    h.push_str(",u,fast_bound,slow_bound");
    h
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

/// Writes `t,x..,z..,u,fast_bound,slow_bound` rows. Bound cells are empty
/// where no bound applies.
pub fn write_trajectory_csv(
    w: &mut dyn Write,
    n: usize,
    m: usize,
    times: &[f64],
    states: &[Vec<f64>],
    inputs: &[f64],
    bounds: &BoundColumns<'_>,
) -> io::Result<()> {
    writeln!(w, "{}", csv_header(n, m))?;
    for ((t, s), u) in times.iter().zip(states).zip(inputs) {
        let mut line = format!("{t:.16e}");
        for v in s {
            let _ = write!(line, ",{v:.16e}");
        }
        let _ = write!(
            line,
            ",{u:.16e},{},{}",
            cell(bounds.fast.map(|f| f(*t))),
            cell(bounds.slow.map(|f| f(*t)))
        );
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_truncation_marker(w: &mut dyn Write, t_last: f64) -> io::Result<()> {
    writeln!(w, "# truncated at t = {t_last:.16e}: integration diverged")
}

/// Generic CSV table with a header and numeric rows.
pub fn write_table_csv(w: &mut dyn Write, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn r4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + hi.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Line chart of each series against `t`, autoscaled, with axes and a
/// legend. Coordinates are rounded to 4 decimals.
pub fn line_chart(title: &str, t: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let (t0, t1) = range(t.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |v: f64| LEFT + (v - t0) / (t1 - t0) * pw;
    let py = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        r4(LEFT + pw / 2.0),
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r4(LEFT),
        r4(TOP),
        r4(pw),
        r4(ph)
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let tv = t0 + f * (t1 - t0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            r4(px(tv)),
            r4(H - BOTTOM + 16.0),
            r4(tv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            r4(LEFT - 6.0),
            r4(py(yv) + 4.0),
            r4(yv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#dddddd"/>"##,
            r4(LEFT),
            r4(py(yv)),
            r4(LEFT + pw)
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#888888"/>"##,
            r4(LEFT),
            r4(py(0.0)),
            r4(LEFT + pw)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">t</text>"#,
        r4(LEFT + pw / 2.0),
        r4(H - 12.0)
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = t
            .iter()
            .zip(values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| format!("{},{}", r4(px(*a)), r4(py(*b))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            r4(W - RIGHT + 12.0),
            r4(W - RIGHT + 34.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            r4(W - RIGHT + 40.0),
            r4(ly + 4.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
