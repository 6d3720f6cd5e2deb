//! WSR-versus-SNR line plot of a result CSV, as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::table::HEADER;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d68910", "#17a589"];
const DASHES: [&str; 4] = ["", "6 3", "2 3", "8 3 2 3"];

/// One plotted line: a (scheme, strategy, R_th) cell across SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub scheme: String,
    pub strategy: String,
    pub r_th: f64,
    /// (SNR dB, mean WSR) sorted by SNR.
    pub points: Vec<(f64, f64)>,
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Parse a result CSV into series; rows with a NaN mean are left out.
pub fn read_series(text: &str) -> Result<Vec<Series>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut cells: BTreeMap<(String, String, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx as u64 + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 {
            if record.iter().ne(HEADER) {
                return Err(parse_err(line, format!("expected header '{}'", HEADER.join(","))));
            }
            continue;
        }
        if record.len() != HEADER.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", HEADER.len(), record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("{} '{}' is not a number", HEADER[i], &record[i])))
        };
        let (snr, r_th, wsr) = (num(0)?, num(3)?, num(4)?);
        num(5)?;
        num(6)?;
        record[7]
            .parse::<usize>()
            .map_err(|_| parse_err(line, format!("infeasible '{}' is not a count", &record[7])))?;
        if !snr.is_finite() {
            return Err(parse_err(line, "snr_db must be finite"));
        }
        let points = cells
            .entry((record[1].to_string(), record[2].to_string(), r_th.to_bits()))
            .or_default();
        if !wsr.is_nan() {
            points.push((snr, wsr));
        }
    }
    Ok(cells
        .into_iter()
        .map(|((scheme, strategy, r_th), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                scheme,
                strategy,
                r_th: f64::from_bits(r_th),
                points,
            }
        })
        .collect())
}

/// Tick positions covering `[lo, hi]` with a 1-2-5 step.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !(x0 < x1) {
        (x0, x1) = if x0.is_finite() { (x0 - 1.0, x0 + 1.0) } else { (0.0, 1.0) };
    }
    let y_max = ys.filter(|y| y.is_finite()).fold(0.0f64, f64::max);
    let (y0, y1) = (0.0, if y_max > 0.0 { y_max * 1.05 } else { 1.0 });

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{TOP:.2}" stroke="#e5e5e5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 18.0,
            label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">WSR (bps/Hz)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let schemes: Vec<&str> = dedup(series.iter().map(|s| s.scheme.as_str()));
    let strategies: Vec<&str> = dedup(series.iter().map(|s| s.strategy.as_str()));
    let several_floors = series.windows(2).any(|w| w[0].r_th != w[1].r_th);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[schemes.iter().position(|k| *k == s.scheme).unwrap_or(0) % PALETTE.len()];
        let dash = DASHES[strategies.iter().position(|k| *k == s.strategy).unwrap_or(0) % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let mut name = format!("{} / {}", s.scheme, s.strategy);
        if several_floors {
            let _ = write!(name, " / R_th={}", label(s.r_th));
        }
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash_attr}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn dedup<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen: Vec<&str> = Vec::new();
    for s in items {
        if !seen.contains(&s) {
            seen.push(s);
        }
    }
    seen
}

pub fn plot_file(csv_path: &Path, out_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let svg = render(&read_series(&text)?);
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))
}
