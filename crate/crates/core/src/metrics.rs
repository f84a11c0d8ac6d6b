//! ROC analysis: AUC, the Youden operating point and confusion-matrix
//! statistics including Cohen's kappa.
//!
//! A row is predicted positive iff its score is `>= threshold`.

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("labels contain a single class ({positives} positive of {n})")]
    SingleClass { positives: usize, n: usize },
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite { index });
    }
    let p = labels.iter().filter(|&&b| b).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(MetricsError::SingleClass { positives: p, n: labels.len() });
    }
    Ok((p, n))
}

/// Indices sorted by descending score; ties keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann–Whitney AUC with half credit for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let (p, n) = check(scores, labels)?;
    let order = descending(scores);
    // Walk tie groups from the top: each positive beats the negatives below it.
    let mut neg_above = 0usize;
    let mut numerator2 = 0u128; // twice the concordance count
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut gp, mut gn) = (0usize, 0usize);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] { gp += 1 } else { gn += 1 }
            j += 1;
        }
        let neg_below = n - neg_above - gn;
        numerator2 += 2 * (gp as u128) * (neg_below as u128) + (gp as u128) * (gn as u128);
        neg_above += gn;
        i = j;
    }
    Ok(numerator2 as f64 / (2.0 * p as f64 * n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
    positives: usize,
    negatives: usize,
}

impl RocCurve {
    /// Thresholds: `+∞`, each midpoint between adjacent distinct scores, then the minimum score.
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MetricsError> {
        let (p, n) = check(scores, labels)?;
        let order = descending(scores);
        let mut points = vec![RocPoint { threshold: f64::INFINITY, tp: 0, fp: 0 }];
        let (mut tp, mut fp) = (0, 0);
        let mut i = 0;
        while i < order.len() {
            let s = scores[order[i]];
            while i < order.len() && scores[order[i]] == s {
                if labels[order[i]] { tp += 1 } else { fp += 1 }
                i += 1;
            }
            let threshold = if i < order.len() {
                let lo = scores[order[i]];
                let mid = 0.5 * (lo + s);
                if mid > lo { mid } else { s }
            } else {
                s
            };
            points.push(RocPoint { threshold, tp, fp });
        }
        Ok(RocCurve { points, positives: p, negatives: n })
    }

    /// Points in order of decreasing threshold.
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn negatives(&self) -> usize {
        self.negatives
    }

    pub fn sensitivity(&self, k: usize) -> f64 {
        self.points[k].tp as f64 / self.positives as f64
    }

    pub fn specificity(&self, k: usize) -> f64 {
        (self.negatives - self.points[k].fp) as f64 / self.negatives as f64
    }

    pub fn youden(&self, k: usize) -> f64 {
        self.sensitivity(k) + self.specificity(k) - 1.0
    }

    /// `J · P · N` as an exact integer.
    fn scaled_j(&self, k: usize) -> i128 {
        let (p, n) = (self.positives as i128, self.negatives as i128);
        let pt = &self.points[k];
        pt.tp as i128 * n + (n - pt.fp as i128) * p - p * n
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,sensitivity,specificity")?;
        for k in 0..self.points.len() {
            let t = self.points[k].threshold;
            let t = if t.is_infinite() { "Inf".to_string() } else { format!("{t:?}") };
            writeln!(w, "{t},{:?},{:?}", self.sensitivity(k), self.specificity(k))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YoudenPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub j: f64,
}

/// Maximum `J`; ties go to higher sensitivity, then lower threshold.
pub fn youden_point(curve: &RocCurve) -> YoudenPoint {
    let mut best = 0;
    for k in 1..curve.points.len() {
        let (jk, jb) = (curve.scaled_j(k), curve.scaled_j(best));
        let better = jk > jb
            || (jk == jb && curve.points[k].tp > curve.points[best].tp)
            || (jk == jb && curve.points[k].tp == curve.points[best].tp && curve.points[k].threshold < curve.points[best].threshold);
        if better {
            best = k;
        }
    }
    YoudenPoint {
        threshold: curve.points[best].threshold,
        sensitivity: curve.sensitivity(best),
        specificity: curve.specificity(best),
        j: curve.youden(best),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.n() as f64
    }

    pub fn kappa(&self) -> f64 {
        let n = self.n() as f64;
        let po = self.accuracy();
        let pe = ((self.tp + self.fn_) as f64 * (self.tp + self.fp) as f64
            + (self.tn + self.fp) as f64 * (self.tn + self.fn_) as f64)
            / (n * n);
        if pe >= 1.0 {
            0.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion, MetricsError> {
    check(scores, labels)?;
    let mut c = Confusion { tp: 0, fn_: 0, tn: 0, fp: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsSummary {
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub threshold: f64,
}

impl MetricsSummary {
    pub const STATISTICS: [&'static str; 5] = ["AUC", "Sensitivity", "Specificity", "Accuracy", "Kappa"];

    pub fn values(&self) -> [f64; 5] {
        [self.auc, self.sensitivity, self.specificity, self.accuracy, self.kappa]
    }
}

/// Statistics at a fixed threshold, with AUC over all scores.
pub fn metrics_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsSummary, MetricsError> {
    let c = confusion_at(scores, labels, threshold)?;
    Ok(MetricsSummary {
        auc: auc(scores, labels)?,
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        accuracy: c.accuracy(),
        kappa: c.kappa(),
        threshold,
    })
}

/// Full summary at the Youden point.
pub fn summarize(scores: &[f64], labels: &[bool]) -> Result<MetricsSummary, MetricsError> {
    let curve = RocCurve::from_scores(scores, labels)?;
    metrics_at_threshold(scores, labels, youden_point(&curve).threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: bool = true;
    const N: bool = false;

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        assert_eq!(auc(&s, &[P, P, N, N]).unwrap(), 1.0);
        assert_eq!(auc(&s, &[P, N, P, N]).unwrap(), 0.75);
        assert_eq!(auc(&[0.5, 0.5], &[P, N]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[P, P]), Err(MetricsError::SingleClass { .. })));
    }

    #[test]
    fn youden_examples() {
        let c = RocCurve::from_scores(&[0.9, 0.8, 0.3, 0.2], &[P, P, N, N]).unwrap();
        let y = youden_point(&c);
        assert_eq!((y.j, y.sensitivity, y.specificity), (1.0, 1.0, 1.0));
        assert!((y.threshold - 0.55).abs() < 1e-12);

        let c = RocCurve::from_scores(&[0.4; 6], &[P, N, P, N, N, P]).unwrap();
        let y = youden_point(&c);
        assert_eq!(y.j, 0.0);
        assert_eq!(c.points().len(), 2);
    }

    #[test]
    fn curve_endpoints() {
        let c = RocCurve::from_scores(&[0.1, 0.7, 0.7, 0.3], &[N, P, N, P]).unwrap();
        let last = c.points().len() - 1;
        assert_eq!((c.sensitivity(0), c.specificity(0)), (0.0, 1.0));
        assert_eq!((c.sensitivity(last), c.specificity(last)), (1.0, 0.0));
        assert_eq!(c.points()[last].threshold, 0.1);
    }

    #[test]
    fn confusion_examples() {
        let c = Confusion { tp: 40, fn_: 10, tn: 40, fp: 10 };
        assert!((c.accuracy() - 0.8).abs() < 1e-15);
        assert!((c.kappa() - 0.6).abs() < 1e-12);
        assert_eq!(Confusion { tp: 5, fn_: 0, tn: 5, fp: 0 }.kappa(), 1.0);
        let all_pos = confusion_at(&[1.0; 4], &[P, N, P, N], 0.5).unwrap();
        assert_eq!((all_pos.sensitivity(), all_pos.specificity(), all_pos.kappa()), (1.0, 0.0, 0.0));
    }

    #[test]
    fn csv_export() {
        let c = RocCurve::from_scores(&[0.2, 0.8], &[N, P]).unwrap();
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "threshold,sensitivity,specificity\nInf,0.0,1.0\n0.5,1.0,1.0\n0.2,1.0,0.0\n");
    }
}
