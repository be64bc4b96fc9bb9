use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{LogRow, SimLog, LOG_COLUMNS};

use super::fmt_sig;

/// File names written by [`emit_plots`], in order.
pub const PLOT_FILES: [&str; 8] = [
    "wind_speed.svg",
    "power_coefficient.svg",
    "active_power.svg",
    "power_factor.svg",
    "rotor_speed.svg",
    "rotor_speed_zoom.svg",
    "rotor_voltage.svg",
    "pitch.svg",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
/// Columns kept per series after min/max decimation.
const MAX_BUCKETS: usize = 1500;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

pub fn write_results(log: &SimLog, path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(LOG_COLUMNS).map_err(csv_err)?;
    for row in &log.rows {
        w.write_record(row.to_values().iter().map(|&x| fmt_sig(x)))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<SimLog> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(LOG_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected results header".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 28];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot read number '{field}'"),
            })?;
        }
        rows.push(LogRow::from_values(&v));
    }
    Ok(SimLog { rows })
}

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

/// Keep the first, min and max of each bucket so spikes survive.
fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= 2 * MAX_BUCKETS {
        return points.to_vec();
    }
    let per = points.len().div_ceil(MAX_BUCKETS);
    let mut out = Vec::with_capacity(2 * MAX_BUCKETS + 1);
    for chunk in points.chunks(per) {
        let lo = chunk.iter().min_by(|a, b| a.1.total_cmp(&b.1)).copied();
        let hi = chunk.iter().max_by(|a, b| a.1.total_cmp(&b.1)).copied();
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if lo.0 <= hi.0 {
                out.extend([lo, hi]);
            } else {
                out.extend([hi, lo]);
            }
        }
    }
    out
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in series.iter().flat_map(|s| s.points.iter()) {
        if x.is_finite() && y.is_finite() {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 <= b.0 {
        b.1 = b.0 + 1.0;
    }
    let pad = 0.05 * (b.3 - b.2).abs().max(1e-9 + 1e-3 * b.3.abs());
    (b.0, b.1, b.2 - pad, b.3 + pad)
}

fn render(title: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_L - 4.0,
            sy(yv) + 4.0,
            fmt_tick(yv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            WIDTH - MARGIN_R,
            sy(yv),
            sy(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - MARGIN_R - 110.0,
            WIDTH - MARGIN_R - 90.0,
            WIDTH - MARGIN_R - 85.0,
            ly + 4.0,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{:.3}", v)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn series<'a>(log: &SimLog, label: &'a str, f: impl Fn(&LogRow) -> f64) -> Series<'a> {
    let pts: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.t, f(r))).collect();
    Series {
        label,
        points: decimate(&pts),
    }
}

/// Write the standard set of SVG plots into `dir`, returning their paths.
///
/// The zoomed speed plot covers 30 % to 40 % of the logged time span.
pub fn emit_plots(log: &SimLog, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t_end = log.rows.last().map_or(0.0, |r| r.t);
    let zoom = SimLog {
        rows: log.window(0.3 * t_end, 0.4 * t_end).copied().collect(),
    };
    let plots = [
        render("Wind speed", "m/s", &[series(log, "V_w", |r| r.v_w)]),
        render("Power coefficient", "C_p", &[series(log, "C_p", |r| r.cp)]),
        render(
            "Active power",
            "pu",
            &[series(log, "P_d", |r| r.p_d), series(log, "P", |r| r.p)],
        ),
        render(
            "Power factor",
            "PF",
            &[
                series(log, "PF_d", |r| crate::plant::power_factor(r.p_d, r.q_d)),
                series(log, "PF", |r| r.pf),
            ],
        ),
        render(
            "Rotor speed",
            "pu",
            &[series(log, "omega_rd", |r| r.omega_rd), series(log, "omega_r", |r| r.omega_r)],
        ),
        render(
            "Rotor speed (zoom)",
            "pu",
            &[
                series(&zoom, "omega_rd", |r| r.omega_rd),
                series(&zoom, "omega_r", |r| r.omega_r),
            ],
        ),
        render(
            "Rotor voltage",
            "pu",
            &[series(log, "v_dr", |r| r.v_dr), series(log, "v_qr", |r| r.v_qr)],
        ),
        render("Pitch angle", "deg", &[series(log, "beta", |r| r.beta)]),
    ];
    let mut paths = Vec::with_capacity(PLOT_FILES.len());
    for (name, svg) in PLOT_FILES.iter().zip(plots) {
        let path = dir.join(name);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_log() -> SimLog {
        let rows = (0..50)
            .map(|k| LogRow {
                t: k as f64,
                v_w: 10.0 + 0.1 * k as f64,
                omega_r: 0.5,
                omega_rd: 0.5,
                p: 0.3,
                p_d: 0.3,
                q_d: 0.03,
                pf: 0.99,
                phi: [1.0 / 3.0, -2.0, 1e-7, 123456.789],
                ..LogRow::default()
            })
            .collect();
        SimLog { rows }
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let log = sample_log();
        write_results(&log, &path).unwrap();
        let back = read_results(&path).unwrap();
        assert_eq!(back.len(), log.len());
        for (a, b) in log.rows.iter().zip(&back.rows) {
            for (x, y) in a.to_values().iter().zip(b.to_values()) {
                assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300), "{x} vs {y}");
            }
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,v_w,phi_ds"));
    }

    #[test]
    fn plots_are_wellformed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plots(&sample_log(), dir.path()).unwrap();
        assert_eq!(paths.len(), 8);
        for p in paths {
            let text = std::fs::read_to_string(&p).unwrap();
            let doc = roxmltree::Document::parse(&text).unwrap();
            assert_eq!(doc.root_element().tag_name().name(), "svg");
            assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
        }
    }

    #[test]
    fn decimation_keeps_extremes() {
        let mut pts: Vec<(f64, f64)> = (0..100_000).map(|k| (k as f64, 0.0)).collect();
        pts[54_321].1 = 7.0;
        pts[7].1 = -3.0;
        let d = decimate(&pts);
        assert!(d.len() <= 2 * MAX_BUCKETS);
        assert!(d.iter().any(|p| p.1 == 7.0));
        assert!(d.iter().any(|p| p.1 == -3.0));
        assert!(d.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn empty_log_still_plots() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_plots(&SimLog::default(), dir.path()).unwrap().len(), 8);
    }
}
