//! Strategy comparison tables and the figure files behind them. Every
//! figure is written as an SVG plus the CSV it was drawn from.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spider_core::{Bucket, Error, Result};
use spider_policy::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub bucket: Bucket,
    pub n: usize,
    pub mean_count: Option<f64>,
    pub mean_nmae: Option<f64>,
}

/// Per-bucket count and NMAE for each strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn from_evaluations(evals: &[(&str, &EvalReport)]) -> Self {
        let rows = evals
            .iter()
            .flat_map(|(name, e)| {
                e.buckets.iter().map(move |b| ReportRow { strategy: name.to_string(), bucket: b.bucket, n: b.n, mean_count: b.mean_count, mean_nmae: b.mean_nmae })
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, strategy: &str, bucket: Bucket) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.bucket == bucket)
    }

    /// `strategy,bucket,count,nmae`; counts rounded to whole cells, empty
    /// buckets left blank.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["strategy", "bucket", "count", "nmae"]).map_err(csv_err)?;
        for r in &self.rows {
            let count = r.mean_count.map(|c| format!("{}", c.round() as i64)).unwrap_or_default();
            let nmae = r.mean_nmae.map(|v| format!("{v:.6}")).unwrap_or_default();
            w.write_record([r.strategy.as_str(), r.bucket.name(), &count, &nmae]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let bad = || Error::Format { path: path.to_path_buf(), message: format!("bad report row {rec:?}") };
            let bucket = Bucket::ALL.into_iter().find(|b| b.name() == &rec[1]).ok_or_else(bad)?;
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { s.parse::<f64>().map(Some).map_err(|_| bad()) };
            rows.push(ReportRow { strategy: rec[0].to_string(), bucket, n: 0, mean_count: opt(&rec[2])?, mean_nmae: opt(&rec[3])? });
        }
        Ok(Self { rows })
    }

    /// Markdown table with one row per bucket and a count/NMAE column pair
    /// per strategy.
    pub fn to_markdown(&self) -> String {
        let mut strategies: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !strategies.contains(&r.strategy.as_str()) {
                strategies.push(&r.strategy);
            }
        }
        let mut s = String::from("| bucket |");
        for st in &strategies {
            let _ = write!(s, " {st} count | {st} NMAE |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|---|".repeat(strategies.len()));
        s.push('\n');
        for b in Bucket::ALL {
            let _ = write!(s, "| {} |", b.name());
            for st in &strategies {
                let r = self.row(st, b);
                let c = r.and_then(|r| r.mean_count).map(|c| format!("{}", c.round() as i64)).unwrap_or_else(|| "-".into());
                let e = r.and_then(|r| r.mean_nmae).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                let _ = write!(s, " {c} | {e} |");
            }
            s.push('\n');
        }
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes a CSV with a header row; values formatted with 6 decimals.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| if v.fract() == 0.0 && v.abs() < 1e15 { format!("{}", *v as i64) } else { format!("{v:.6}") })).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart of several named series over a shared x axis.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    y0 = y0.min(0.0);
    let (xs, ys) = ((x1 - x0).max(1e-12), (y1 - y0).max(1e-12));
    let px = |x: f64| m + (x - x0) / xs * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / ys * (h - 2.0 * m);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>", w / 2.0);
    let _ = writeln!(s, "<line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", h - m, w - m, h - m);
    let _ = writeln!(s, "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>", h - m);
    for k in 0..=4 {
        let fx = x0 + xs * k as f64 / 4.0;
        let fy = y0 + ys * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>", px(fx), h - m + 16.0, tick(fx));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", m - 6.0, py(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>", w / 2.0, h - 16.0);
    let _ = writeln!(s, "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>", h / 2.0, h / 2.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", path.join(" "));
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{ly:.1}\" fill=\"{color}\">{name}</text>", w - m - 100.0);
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Grayscale heatmap of a row-major grid, darker for larger values.
pub fn heatmap_svg(title: &str, rows: usize, cols: usize, values: &[f64]) -> String {
    let cell = (480.0 / rows.max(cols) as f64).floor().max(2.0);
    let (w, h) = (cols as f64 * cell + 40.0, rows as f64 * cell + 60.0);
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"13\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"22\" text-anchor=\"middle\">{title} (max {hi:.3})</text>", w / 2.0);
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j];
            let shade = if hi > 0.0 && v.is_finite() { 255 - (v / hi * 255.0).round().clamp(0.0, 255.0) as u8 } else { 255 };
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},{shade})\"/>",
                20.0 + j as f64 * cell,
                40.0 + i as f64 * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
