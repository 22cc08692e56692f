//! Static SVG line charts for sweep results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mac;
use crate::sim::SweepResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Lower and upper band edge per point.
    pub band: Option<Vec<(f64, f64)>>,
    pub dashed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Round-number ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let count = |s: f64| (hi / s).floor() - (lo / s).ceil() + 1.0;
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| count(s) <= 7.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_num(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

impl Chart {
    fn bounds(&self) -> Option<((f64, f64), (f64, f64))> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
            for &(lo, hi) in s.band.iter().flatten() {
                ys.push(lo);
                ys.push(hi);
            }
        }
        let fin = |v: &Vec<f64>| {
            let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            (lo <= hi).then_some((lo, hi))
        };
        Some((fin(&xs)?, fin(&ys)?))
    }

    pub fn to_svg(&self) -> Result<String> {
        let ((x0, x1), (y0, y1)) = self.bounds().ok_or_else(|| Error::Schema("chart has no finite points".into()))?;
        let (x0, x1) = padded(x0, x1);
        let (y0, y1) = padded(y0, y1);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(o, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
            let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, fmt_num(t));
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(o, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
            let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_num(t));
        }
        let _ = writeln!(o, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if let Some(band) = &s.band {
                let mut pts: Vec<String> =
                    s.points.iter().zip(band).map(|(&(x, _), &(_, hi))| format!("{:.2},{:.2}", sx(x), sy(hi))).collect();
                pts.extend(s.points.iter().zip(band).rev().map(|(&(x, _), &(lo, _))| format!("{:.2},{:.2}", sx(x), sy(lo))));
                let _ = writeln!(o, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, pts.join(" "));
            }
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(o, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, pts.join(" "));
            for &(x, y) in &s.points {
                let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
            let ly = TOP + 16.0 + 18.0 * i as f64;
            let lx = LEFT + 12.0;
            let _ = writeln!(o, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0);
            let _ = writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.name));
        }
        o.push_str("</svg>\n");
        Ok(o)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_label(param: &str) -> &str {
    match param {
        "n" => "number of ports N",
        "u" => "number of users U",
        "m" => "number of BS antennas M",
        "t" => "retained singular vectors t",
        "snr_db" => "SNR (dB)",
        "k" => "active ports K",
        _ => "point",
    }
}

/// Rate, sum-rate and collision charts for one sweep.
///
/// With `config`, the collision chart also carries the uniform-selection curve.
pub fn sweep_charts(result: &SweepResult, config: Option<&ExperimentConfig>) -> Result<Vec<(&'static str, Chart)>> {
    let first = result.rows.first().ok_or_else(|| Error::Schema("CSV has no data rows".into()))?;
    let param = first.sweep_param.as_str();
    if result.rows.iter().any(|r| r.sweep_param != param) {
        return Err(Error::Schema("rows mix several sweep parameters".into()));
    }
    let mut rows = result.rows.clone();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    let x_label = axis_label(param).to_owned();
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();

    let line = |name: &str, ys: Vec<f64>, ci: Option<Vec<f64>>| Series {
        name: name.to_owned(),
        points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        band: ci.map(|c| ys.iter().zip(c).map(|(y, h)| (y - h, y + h)).collect()),
        dashed: false,
    };

    let rate = Chart {
        title: "Average rate per user".into(),
        x_label: x_label.clone(),
        y_label: "rate (bit/s/Hz)".into(),
        series: vec![line(
            "simulation (95% CI)",
            rows.iter().map(|r| r.mean_rate_per_user).collect(),
            Some(rows.iter().map(|r| r.ci95).collect()),
        )],
    };
    let sum = Chart {
        title: "Sum rate".into(),
        x_label: x_label.clone(),
        y_label: "sum rate (bit/s/Hz)".into(),
        series: vec![line(
            "simulation (95% CI)",
            rows.iter().map(|r| r.mean_sum_rate).collect(),
            Some(rows.iter().map(|r| r.sum_ci95).collect()),
        )],
    };
    let mut coll_series = vec![line("simulation", rows.iter().map(|r| r.collision_rate).collect(), None)];
    if let Some(cfg) = config {
        let analytic = rows
            .iter()
            .map(|r| {
                let point = if param == "none" { cfg.clone() } else { cfg.at_sweep_point(param.parse()?, r.value)? };
                Ok(mac::collision_prob_exact(point.m, point.u))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut s = line("uniform selection 1 - P_unique", analytic, None);
        s.dashed = true;
        coll_series.push(s);
    }
    let coll = Chart {
        title: "Codeword collision rate".into(),
        x_label,
        y_label: "collision rate".into(),
        series: coll_series,
    };
    Ok(vec![("rate", rate), ("sum_rate", sum), ("collision", coll)])
}

/// Render every chart first, then write `<stem>_<kind>.svg` into `out_dir`.
/// Nothing is written if any chart fails.
pub fn write_sweep_charts(
    result: &SweepResult,
    config: Option<&ExperimentConfig>,
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let rendered = sweep_charts(result, config)?
        .into_iter()
        .map(|(kind, chart)| Ok((out_dir.join(format!("{stem}_{kind}.svg")), chart.to_svg()?)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir)?;
    for (path, svg) in &rendered {
        std::fs::write(path, svg)?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}
