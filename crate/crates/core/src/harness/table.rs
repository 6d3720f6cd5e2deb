//! CSV form of the result table.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::sweep::{row_order, Record, SweepRow};

pub const HEADER: [&str; 8] = [
    "snr_db",
    "scheme",
    "strategy",
    "r_th",
    "mean_wsr",
    "stderr",
    "mean_iters",
    "infeasible",
];

/// C `%.9g`: nine significant digits, trailing zeros dropped, exponent
/// form outside `[1e-4, 1e9)`.
pub fn format_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rows sorted by (SNR, scheme, strategy, R_th) under the fixed header.
pub fn render(rows: &[SweepRow]) -> String {
    let mut rows: Vec<&SweepRow> = rows.iter().collect();
    rows.sort_by(|a, b| row_order(a, b));
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            format_g9(r.snr_db),
            r.scheme.to_string(),
            r.strategy.to_string(),
            format_g9(r.r_th),
            format_g9(r.mean_wsr),
            format_g9(r.stderr),
            format_g9(r.mean_iters),
            r.infeasible.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(render(rows).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub const RECORD_HEADER: [&str; 11] = [
    "realization",
    "fingerprint",
    "snr_db",
    "scheme",
    "strategy",
    "r_th",
    "x",
    "y",
    "z",
    "wsr",
    "iterations",
];

/// Per-realization log; infeasible cells leave `wsr` empty. Floats use
/// the shortest representation that parses back exactly.
pub fn render_records(records: &[Record]) -> String {
    let mut out = RECORD_HEADER.join(",");
    out.push('\n');
    for r in records {
        let fields = [
            r.realization.to_string(),
            format!("{:016x}", r.fingerprint),
            format!("{:?}", r.snr_db),
            r.scheme.to_string(),
            r.strategy.to_string(),
            format!("{:?}", r.r_th),
            format!("{:?}", r.position[0]),
            format!("{:?}", r.position[1]),
            format!("{:?}", r.position[2]),
            r.wsr.map(|w| format!("{w:?}")).unwrap_or_default(),
            r.iterations.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_records(records: &[Record], path: &Path) -> Result<()> {
    std::fs::write(path, render_records(records)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Scheme;
    use crate::placement::Strategy;

    #[test]
    fn matches_printf_g9() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (9.9999999996, "10"),
            (999999999.5, "1e+09"),
            (0.000099999999996, "0.0001"),
            (6.02214076e23, "6.02214076e+23"),
            (1e-300, "1e-300"),
            (f64::NAN, "nan"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g9(v), want, "{v:e}");
        }
    }

    fn row(snr: f64, scheme: Scheme, strategy: Strategy, r_th: f64) -> SweepRow {
        SweepRow {
            snr_db: snr,
            scheme,
            strategy,
            r_th,
            mean_wsr: 1.5,
            stderr: 0.25,
            mean_iters: 7.0,
            infeasible: 0,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(render(&[]), format!("{}\n", HEADER.join(",")));
    }

    #[test]
    fn single_row_is_two_lines() {
        let text = render(&[row(20.0, Scheme::Rsma, Strategy::DistAvg, 0.5)]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "20,RSMA,dist_avg,0.5,1.5,0.25,7,0");
    }

    #[test]
    fn rows_are_sorted() {
        let a = row(5.0, Scheme::Sdma, Strategy::DistAvg, 0.0);
        let b = row(5.0, Scheme::Noma, Strategy::RandomOnSegment, 0.5);
        let c = row(-5.0, Scheme::Rsma, Strategy::DistAvg, 0.0);
        let text = render(&[a, b, c]);
        let keys: Vec<&str> = text.lines().skip(1).map(|l| l.splitn(3, ',').take(2).last().unwrap()).collect();
        assert_eq!(keys, ["RSMA", "NOMA", "SDMA"]);
    }

    #[test]
    fn unwritable_path_reports_it() {
        let err = write(&[], Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"), "{err}");
    }
}
