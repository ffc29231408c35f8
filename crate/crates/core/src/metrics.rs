//! Hit/extra counting, hotspot accuracy, false-alarm ratio and Ψ.
//!
//! The false-alarm ratio is normalized by the number of real hotspots, so a
//! ratio of 5 means five wrongly flagged fragments per actual hotspot.

use std::fmt::Write as _;

use crate::error::{EpicError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PsiWeights {
    fn default() -> Self {
        PsiWeights { alpha: 1.0, beta: -0.02 }
    }
}

impl PsiWeights {
    pub fn psi(&self, accuracy: f64, false_alarm_ratio: f64) -> f64 {
        self.alpha * accuracy + self.beta * false_alarm_ratio
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub actual_hotspots: usize,
    pub hit: usize,
    pub extra: usize,
    pub accuracy: f64,
    pub false_alarm_ratio: f64,
    pub psi: f64,
    pub theta_used: Option<f64>,
    /// No real hotspots: accuracy is 1 by convention and the ratio is the
    /// raw extra count.
    pub degenerate: bool,
}

impl DetectionReport {
    pub fn from_counts(actual: usize, hit: usize, extra: usize, psi: PsiWeights) -> Self {
        let degenerate = actual == 0;
        let (accuracy, ratio) = if degenerate {
            (1.0, extra as f64)
        } else {
            (hit as f64 / actual as f64, extra as f64 / actual as f64)
        };
        DetectionReport {
            actual_hotspots: actual,
            hit,
            extra,
            accuracy,
            false_alarm_ratio: ratio,
            psi: psi.psi(accuracy, ratio),
            theta_used: None,
            degenerate,
        }
    }

    pub fn miss(&self) -> usize {
        self.actual_hotspots - self.hit
    }
}

pub fn compute_report(predictions: &[f64], labels: &[f64], psi: PsiWeights) -> Result<DetectionReport> {
    if predictions.len() != labels.len() {
        return Err(EpicError::DimensionMismatch { expected: labels.len(), actual: predictions.len() });
    }
    let mut actual = 0;
    let mut hit = 0;
    let mut extra = 0;
    for (&p, &t) in predictions.iter().zip(labels) {
        let hot = t > 0.0;
        actual += usize::from(hot);
        if p > 0.0 {
            if hot {
                hit += 1;
            } else {
                extra += 1;
            }
        }
    }
    Ok(DetectionReport::from_counts(actual, hit, extra, psi))
}

/// One report per threshold, flagging every score `>= theta`.
pub fn sweep_tradeoff(
    scores: &[f64],
    labels: &[f64],
    theta_grid: &[f64],
    psi: PsiWeights,
) -> Result<Vec<DetectionReport>> {
    if scores.len() != labels.len() {
        return Err(EpicError::DimensionMismatch { expected: labels.len(), actual: scores.len() });
    }
    if theta_grid.is_empty() {
        return Err(EpicError::InvalidInput("threshold grid is empty".into()));
    }
    let mut hot: Vec<f64> = Vec::new();
    let mut cold: Vec<f64> = Vec::new();
    for (&s, &t) in scores.iter().zip(labels) {
        if t > 0.0 { hot.push(s) } else { cold.push(s) }
    }
    hot.sort_by(f64::total_cmp);
    cold.sort_by(f64::total_cmp);
    let at_least = |sorted: &[f64], theta: f64| sorted.len() - sorted.partition_point(|&s| s < theta);
    Ok(theta_grid
        .iter()
        .map(|&theta| {
            let mut r = DetectionReport::from_counts(hot.len(), at_least(&hot, theta), at_least(&cold, theta), psi);
            r.theta_used = Some(theta);
            r
        })
        .collect())
}

pub const REPORT_HEADER: &str = "theta,hit,extra,actual,accuracy,false_alarm_ratio,psi";

fn report_row(out: &mut String, label: Option<&str>, r: &DetectionReport) {
    if let Some(l) = label {
        write!(out, "{l},").unwrap();
    }
    let theta = r.theta_used.map_or_else(|| "nan".to_string(), |t| format!("{t:?}"));
    writeln!(
        out,
        "{theta},{},{},{},{:?},{:?},{:?}",
        r.hit, r.extra, r.actual_hotspots, r.accuracy, r.false_alarm_ratio, r.psi
    )
    .unwrap();
}

/// Report CSV with `# ` comment lines first.
pub fn reports_to_csv(reports: &[DetectionReport], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        report_row(&mut out, None, r);
    }
    out
}

/// Same columns with a leading `classifier` name column.
pub fn named_reports_to_csv(reports: &[(String, DetectionReport)], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    writeln!(out, "classifier,{REPORT_HEADER}").unwrap();
    for (name, r) in reports {
        report_row(&mut out, Some(name), r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(actual: usize, hit: usize, extra: usize) -> DetectionReport {
        DetectionReport::from_counts(actual, hit, extra, PsiWeights::default())
    }

    #[test]
    fn table_arithmetic() {
        let r = counts(9, 9, 48);
        assert_eq!(r.accuracy, 1.0);
        assert!((r.false_alarm_ratio - 5.33).abs() < 5e-3);
        assert_eq!(format!("{:.3}", counts(9, 6, 0).accuracy), "0.667");
        assert_eq!(counts(10, 0, 50).false_alarm_ratio, 5.0);
    }

    #[test]
    fn report_from_predictions() {
        let r = compute_report(&[1.0, 1.0, -1.0, 1.0], &[1.0, -1.0, 1.0, -1.0], PsiWeights::default()).unwrap();
        assert_eq!((r.actual_hotspots, r.hit, r.extra, r.miss()), (2, 1, 2, 1));
        assert!((r.psi - (0.5 - 0.02)).abs() < 1e-15);
        assert!(compute_report(&[1.0], &[], PsiWeights::default()).is_err());
    }

    #[test]
    fn no_hotspots_is_degenerate() {
        let r = compute_report(&[1.0, -1.0], &[-1.0, -1.0], PsiWeights::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.false_alarm_ratio, 1.0);
    }

    #[test]
    fn sweep_extremes() {
        let scores = [0.1, 0.5, 0.9, -0.3];
        let labels = [1.0, -1.0, 1.0, -1.0];
        let rows = sweep_tradeoff(&scores, &labels, &[-1.0, 2.0], PsiWeights::default()).unwrap();
        assert_eq!((rows[0].accuracy, rows[0].false_alarm_ratio), (1.0, 1.0));
        assert_eq!((rows[1].accuracy, rows[1].false_alarm_ratio), (0.0, 0.0));
    }

    #[test]
    fn csv_layout() {
        let mut r = counts(2, 1, 3);
        r.theta_used = Some(0.5);
        let text = reports_to_csv(&[r], &["k=v".into()]);
        assert_eq!(text, "# k=v\ntheta,hit,extra,actual,accuracy,false_alarm_ratio,psi\n0.5,1,3,2,0.5,1.5,0.47\n");
    }
}
