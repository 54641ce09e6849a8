//! Center-error precision curves, IoU and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::io::{format_trajectory_csv, TrajectoryRow};

/// Precision thresholds in pixels, inclusive.
pub const MAX_THRESHOLD: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub frames: usize,
    pub center_errors: Vec<f64>,
    pub thresholds: Vec<u32>,
    /// Fraction of frames with center error strictly below each threshold.
    pub precision: Vec<f64>,
    pub ious: Vec<f64>,
    pub mean_iou: f64,
    pub mean_center_error: f64,
    pub precision_at_20: f64,
}

impl EvalReport {
    /// Precision is a non-decreasing curve in [0, 1].
    pub fn check_invariants(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.precision.iter().all(|&p| in_unit(p)) || !in_unit(self.mean_iou) {
            return Err(Error::Validation("precision or IoU outside [0, 1]".into()));
        }
        if self.precision.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("precision decreases with the threshold".into()));
        }
        Ok(())
    }
}

pub fn evaluate(predicted: &[BBox], truth: &[BBox]) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let n = predicted.len();
    let center_errors: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| p.center_distance(t)).collect();
    let ious: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| p.iou(t)).collect();
    let thresholds: Vec<u32> = (0..=MAX_THRESHOLD).collect();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let precision: Vec<f64> = thresholds
        .iter()
        .map(|&t| frac(center_errors.iter().filter(|&&e| e < t as f64).count()))
        .collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let report = EvalReport {
        frames: n,
        precision_at_20: precision[20],
        mean_iou: mean(&ious),
        mean_center_error: mean(&center_errors),
        center_errors,
        thresholds,
        precision,
        ious,
    };
    report.check_invariants()?;
    Ok(report)
}

pub fn format_metrics_csv(report: &EvalReport) -> String {
    let mut s = String::from("threshold,precision\n");
    for (t, p) in report.thresholds.iter().zip(&report.precision) {
        let _ = writeln!(s, "{t},{p}");
    }
    s
}

/// Precision curve as a standalone SVG document.
pub fn format_precision_svg(report: &EvalReport, title: &str) -> String {
    let (w, h, m) = (480.0, 360.0, 48.0);
    let x = |t: f64| m + t / MAX_THRESHOLD as f64 * (w - 2.0 * m);
    let y = |p: f64| h - m - p * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2}" fill="none" stroke="black"/>"#,
        x(0.0),
        y(1.0),
        x(0.0),
        y(0.0),
        x(MAX_THRESHOLD as f64),
        y(0.0)
    );
    for t in (0..=MAX_THRESHOLD).step_by(10) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{t}</text>"#, x(t as f64), h - m + 16.0);
    }
    for p in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{p:.1}</text>"#, m - 6.0, y(p) + 4.0);
    }
    let points: Vec<String> = report
        .thresholds
        .iter()
        .zip(&report.precision)
        .map(|(&t, &p)| format!("{:.2},{:.2}", x(t as f64), y(p)))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, points.join(" "));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">center error threshold (px)</text>"#, w / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">precision</text>"#, h / 2.0, h / 2.0);
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    frames: usize,
    mean_iou: f64,
    mean_center_error: f64,
    precision_at_20: f64,
    loss_events: &'a [usize],
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub trajectory: Option<PathBuf>,
    pub metrics: PathBuf,
    pub plot: PathBuf,
    pub summary: PathBuf,
}

/// Writes `trajectory.csv` (when rows are given), `metrics.csv`,
/// `precision.svg` and `summary.json` into `out_dir`.
pub fn emit_report(report: &EvalReport, rows: Option<&[TrajectoryRow]>, loss_events: &[usize], out_dir: &Path) -> Result<ReportPaths> {
    std::fs::create_dir_all(out_dir)?;
    let trajectory = match rows {
        Some(rows) => {
            let p = out_dir.join("trajectory.csv");
            std::fs::write(&p, format_trajectory_csv(rows))?;
            Some(p)
        }
        None => None,
    };
    let metrics = out_dir.join("metrics.csv");
    std::fs::write(&metrics, format_metrics_csv(report))?;
    let plot = out_dir.join("precision.svg");
    std::fs::write(&plot, format_precision_svg(report, "Precision vs. center error"))?;
    let summary = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&Summary {
        frames: report.frames,
        mean_iou: report.mean_iou,
        mean_center_error: report.mean_center_error,
        precision_at_20: report.precision_at_20,
        loss_events,
    })?;
    text.push('\n');
    std::fs::write(&summary, text)?;
    Ok(ReportPaths {
        trajectory,
        metrics,
        plot,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction() {
        let gt: Vec<BBox> = (0..5).map(|i| BBox::new(i as f64, 3.0, 10.0, 20.0)).collect();
        let r = evaluate(&gt, &gt).unwrap();
        assert!(r.center_errors.iter().all(|&e| e == 0.0));
        // error 0 is not below threshold 0
        assert_eq!(r.precision[0], 0.0);
        assert!(r.precision[1..].iter().all(|&p| p == 1.0));
        assert_eq!(r.mean_iou, 1.0);
    }

    #[test]
    fn constant_offset_is_a_step() {
        let gt: Vec<BBox> = (0..7).map(|i| BBox::new(5.0 * i as f64, 0.0, 30.0, 30.0)).collect();
        let pred: Vec<BBox> = gt.iter().map(|b| BBox::new(b.x + 10.0, b.y, b.w, b.h)).collect();
        let r = evaluate(&pred, &gt).unwrap();
        for (t, p) in r.thresholds.iter().zip(&r.precision) {
            assert_eq!(*p, if *t > 10 { 1.0 } else { 0.0 }, "threshold {t}");
        }
    }

    #[test]
    fn precision_matches_histogram_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(1..60);
            let gt: Vec<BBox> = (0..n).map(|_| BBox::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 20.0, 20.0)).collect();
            let pred: Vec<BBox> = gt
                .iter()
                .map(|b| BBox::new(b.x + rng.gen_range(-40.0..40.0), b.y + rng.gen_range(-40.0..40.0), 20.0, 20.0))
                .collect();
            let r = evaluate(&pred, &gt).unwrap();
            // errors in [k - 1, k) land in bucket k and fall below every threshold >= k
            let mut hist = vec![0usize; 53];
            for (p, g) in pred.iter().zip(&gt) {
                let (a, b) = (p.center(), g.center());
                let e = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                hist[(e.floor() as usize + 1).min(52)] += 1;
            }
            let mut below = 0usize;
            for t in 0..=50usize {
                below += hist[t];
                assert_eq!(r.precision[t], below as f64 / n as f64, "threshold {t}");
            }
        }
    }

    #[test]
    fn length_mismatch() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert!(matches!(evaluate(&[b], &[b, b]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn report_files() {
        let gt: Vec<BBox> = (0..4).map(|i| BBox::new(i as f64, 0.0, 8.0, 8.0)).collect();
        let r = evaluate(&gt, &gt).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, Some(&[]), &[], dir.path()).unwrap();
        let metrics = std::fs::read_to_string(&paths.metrics).unwrap();
        assert_eq!(metrics.lines().count(), 1 + r.thresholds.len());
        let svg = std::fs::read_to_string(&paths.plot).unwrap();
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches('<').count(), svg.matches('>').count());
    }
}
