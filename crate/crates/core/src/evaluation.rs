//! ROC curves, AUC values, and class separability of score maps.

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruthMask, ScoreMap};
use crate::error::{Error, Result};

/// Percentiles reported per class.
pub const PERCENTILES: [f64; 5] = [1.0, 10.0, 50.0, 90.0, 99.0];

/// ROC curve of a score map. Index 0 of `pd` and `pf` is the `(0, 0)`
/// endpoint at an infinite threshold; entry `i + 1` belongs to
/// `thresholds[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    /// Unique scores, descending.
    pub thresholds: Vec<f64>,
    pub pd: Vec<f64>,
    pub pf: Vec<f64>,
    pub auc_pd_pf: f64,
    pub auc_pf_tau: f64,
}

impl RocReport {
    /// `(tau, pf, pd)` rows, one per finite threshold.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.thresholds
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, self.pf[i + 1], self.pd[i + 1]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,pf,pd\n");
        for (t, pf, pd) in self.rows() {
            out.push_str(&format!("{t},{pf},{pd}\n"));
        }
        out
    }
}

fn split_classes(
    scores: &ScoreMap,
    truth: &GroundTruthMask,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !truth.matches(scores.width(), scores.height()) {
        return Err(Error::Mismatch(format!(
            "score map is {}x{}, mask {}x{}",
            scores.width(),
            scores.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut anomaly = Vec::new();
    let mut background = Vec::new();
    for (&s, &label) in scores.scores().iter().zip(truth.labels()) {
        if label {
            anomaly.push(s);
        } else {
            background.push(s);
        }
    }
    if anomaly.is_empty() || background.is_empty() {
        return Err(Error::InvalidParameter(
            "ground truth needs both anomaly and background pixels".into(),
        ));
    }
    Ok((anomaly, background))
}

/// Trapezoidal area under the polyline through `(x[i], y[i])`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) * 0.5)
        .sum()
}

/// ROC curve with the rule "score >= tau detects".
pub fn roc(scores: &ScoreMap, truth: &GroundTruthMask) -> Result<RocReport> {
    split_classes(scores, truth)?;
    let mut order: Vec<(f64, bool)> = scores
        .scores()
        .iter()
        .copied()
        .zip(truth.labels().iter().copied())
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_anomaly = truth.anomaly_count() as f64;
    let n_background = (order.len() - truth.anomaly_count()) as f64;

    let mut thresholds = Vec::new();
    let mut pd = vec![0.0];
    let mut pf = vec![0.0];
    let (mut hits, mut false_alarms) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let tau = order[i].0;
        while i < order.len() && order[i].0 == tau {
            if order[i].1 {
                hits += 1;
            } else {
                false_alarms += 1;
            }
            i += 1;
        }
        thresholds.push(tau);
        pd.push(hits as f64 / n_anomaly);
        pf.push(false_alarms as f64 / n_background);
    }
    let auc_pd_pf = trapezoid(&pf, &pd);
    let auc_pf_tau = pf_tau_area(&thresholds, &pf[1..]);
    Ok(RocReport {
        thresholds,
        pd,
        pf,
        auc_pd_pf,
        auc_pf_tau,
    })
}

/// Area under `pf` against min-max normalized thresholds. A single
/// threshold spans no width, so the area is 0.
fn pf_tau_area(thresholds: &[f64], pf: &[f64]) -> f64 {
    let hi = thresholds[0];
    let lo = thresholds[thresholds.len() - 1];
    if hi == lo {
        return 0.0;
    }
    let range = hi - lo;
    let tau: Vec<f64> = thresholds.iter().rev().map(|t| (t - lo) / range).collect();
    let pf: Vec<f64> = pf.iter().rev().copied().collect();
    trapezoid(&tau, &pf)
}

/// Percentiles of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPercentiles {
    pub p1: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl ClassPercentiles {
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let at = |p: f64| percentile_sorted(&values, p);
        Self {
            p1: at(1.0),
            p10: at(10.0),
            p50: at(50.0),
            p90: at(90.0),
            p99: at(99.0),
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [self.p1, self.p10, self.p50, self.p90, self.p99]
    }
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Class-conditional percentiles of normalized scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityStats {
    pub background: ClassPercentiles,
    pub anomaly: ClassPercentiles,
}

impl SeparabilityStats {
    /// Anomaly p10 minus background p90; positive when the boxes separate.
    pub fn gap(&self) -> f64 {
        self.anomaly.p10 - self.background.p90
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,p1,p10,p50,p90,p99\n");
        for (name, c) in [("background", &self.background), ("anomaly", &self.anomaly)] {
            let v = c.values();
            out.push_str(&format!("{name},{},{},{},{},{}\n", v[0], v[1], v[2], v[3], v[4]));
        }
        out
    }
}

/// Percentiles of `scores` (expected normalized) split by `truth`.
pub fn separability(scores: &ScoreMap, truth: &GroundTruthMask) -> Result<SeparabilityStats> {
    let (anomaly, background) = split_classes(scores, truth)?;
    Ok(SeparabilityStats {
        background: ClassPercentiles::of(background),
        anomaly: ClassPercentiles::of(anomaly),
    })
}

/// SVG with the ROC curve on the left and the two class boxes on the right.
pub fn report_svg(report: &RocReport, stats: &SeparabilityStats) -> String {
    const SIZE: f64 = 240.0;
    const PAD: f64 = 30.0;
    let mut path = String::new();
    for (i, (&x, &y)) in report.pf.iter().zip(&report.pd).enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        path.push_str(&format!(
            "{cmd}{:.2} {:.2}",
            PAD + x * SIZE,
            PAD + (1.0 - y) * SIZE
        ));
    }
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
        w = 2.0 * SIZE + 4.0 * PAD,
        h = SIZE + 2.0 * PAD
    );
    svg.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<path d=\"{path}\" fill=\"none\" stroke=\"blue\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">AUC {:.4}</text>\n",
        PAD - 8.0,
        report.auc_pd_pf
    ));
    let left = SIZE + 3.0 * PAD;
    let y = |v: f64| PAD + (1.0 - v.clamp(0.0, 1.0)) * SIZE;
    for (k, (name, c, colour)) in [
        ("background", &stats.background, "green"),
        ("anomaly", &stats.anomaly, "red"),
    ]
    .into_iter()
    .enumerate()
    {
        let x = left + k as f64 * SIZE / 2.0 + SIZE / 8.0;
        let w = SIZE / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"{colour}\"/>\n",
            y(c.p1),
            y(c.p99),
            cx = x + w / 2.0
        ));
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"{colour}\"/>\n",
            y(c.p90),
            y(c.p10) - y(c.p90)
        ));
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{m:.2}\" x2=\"{:.2}\" y2=\"{m:.2}\" stroke=\"{colour}\"/>\n",
            x + w,
            m = y(c.p50)
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\">{name}</text>\n",
            PAD + SIZE + 18.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
