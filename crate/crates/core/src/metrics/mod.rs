//! Gross AUPRC/AUROC over pooled per-sample probabilities, with non-scored
//! samples removed, and the per-record breakdown.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::prep::ScoreStream;

/// Scored samples of one or more records, non-scored ones already removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPool {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl ScoredPool {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<ScoredPool> {
        if scores.len() != labels.len() {
            return Err(Error::shape("scored pool", labels.len(), scores.len()));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!(
                "scored pool label {} at {i} is not binary",
                labels[i]
            )));
        }
        if let Some(i) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::NonFinite {
                context: format!("score at pooled sample {i}"),
            });
        }
        let n_pos = labels.iter().filter(|&&l| l == 1).count();
        let n_neg = labels.len() - n_pos;
        Ok(ScoredPool {
            scores,
            labels,
            n_pos,
            n_neg,
        })
    }

    /// Keeps the samples labeled 0 or 1.
    pub fn from_labeled(scores: &[f64], labels: &[i8]) -> Result<ScoredPool> {
        if scores.len() != labels.len() {
            return Err(Error::shape("labeled scores", labels.len(), scores.len()));
        }
        let (s, l) = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l != -1)
            .map(|(&s, &l)| (s, l as u8))
            .unzip();
        ScoredPool::new(s, l)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn prevalence(&self) -> f64 {
        self.n_pos as f64 / self.len() as f64
    }

    /// Appends another pool; pooling is associative.
    pub fn merge(&mut self, other: ScoredPool) {
        self.scores.extend(other.scores);
        self.labels.extend(other.labels);
        self.n_pos += other.n_pos;
        self.n_neg += other.n_neg;
    }
}

/// Concatenates all streams and drops samples labeled −1.
pub fn pool_scores(streams: &[ScoreStream]) -> Result<ScoredPool> {
    let mut pool = ScoredPool::new(Vec::new(), Vec::new())?;
    for s in streams {
        let scores: Vec<f64> = s.probs.iter().map(|&p| p as f64).collect();
        pool.merge(ScoredPool::from_labeled(&scores, &s.labels)?);
    }
    if pool.is_empty() {
        return Err(Error::invalid("no scored samples after excluding label -1"));
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per distinct score, thresholds descending (`score >= threshold`
/// counts as positive), so recall rises along the list and reaches 1 at
/// the lowest threshold.
pub fn pr_curve(pool: &ScoredPool) -> Result<Vec<PrPoint>> {
    if pool.n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.scores[b].total_cmp(&pool.scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = pool.scores[order[i]];
        while i < order.len() && pool.scores[order[i]].total_cmp(&threshold) == Ordering::Equal {
            if pool.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / pool.n_pos as f64,
        });
    }
    Ok(points)
}

/// `Σ_j p_j·(r_j − r_{j−1})` over descending distinct thresholds, `r_0 = 0`.
/// Tied scores form one threshold; no interpolation between points.
pub fn gross_auprc(pool: &ScoredPool) -> Result<f64> {
    let mut area = 0.0;
    let mut prev = 0.0;
    for p in pr_curve(pool)? {
        area += p.precision * (p.recall - prev);
        prev = p.recall;
    }
    Ok(area)
}

/// Mann–Whitney form: `P(s_pos > s_neg) + ½·P(s_pos = s_neg)` from mid-ranks.
/// Ranks are kept doubled so the rank sum is exact in integers.
pub fn gross_auroc(pool: &ScoredPool) -> Result<f64> {
    if pool.n_pos == 0 {
        return Err(Error::NoPositives);
    }
    if pool.n_neg == 0 {
        return Err(Error::EmptyClass("AUROC needs non-arousal samples".into()));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.scores[a].total_cmp(&pool.scores[b]));
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len()
            && pool.scores[order[j]].total_cmp(&pool.scores[order[i]]) == Ordering::Equal
        {
            j += 1;
        }
        // 1-based ranks i+1..=j share the mid-rank (i+1+j)/2.
        let doubled_mid = (i + 1 + j) as u128;
        let pos = order[i..j].iter().filter(|&&k| pool.labels[k] == 1).count() as u128;
        doubled_rank_sum += doubled_mid * pos;
        i = j;
    }
    let (np, nn) = (pool.n_pos as u128, pool.n_neg as u128);
    // 2U = 2R − n_pos(n_pos + 1).
    let doubled_u = doubled_rank_sum - np * (np + 1);
    Ok(doubled_u as f64 / (2 * np * nn) as f64)
}

/// AUPRC of each stream alone; `None` when it has no scored positives.
pub fn per_record_auprc(streams: &[ScoreStream]) -> Result<Vec<(String, Option<f64>)>> {
    streams
        .iter()
        .map(|s| {
            let scores: Vec<f64> = s.probs.iter().map(|&p| p as f64).collect();
            let pool = ScoredPool::from_labeled(&scores, &s.labels)?;
            let v = if pool.n_pos == 0 {
                None
            } else {
                Some(gross_auprc(&pool)?)
            };
            Ok((s.record_id.clone(), v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub record_id: String,
    pub auprc: Option<f64>,
    pub scored: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<RecordRow>,
    pub gross_auprc: f64,
    pub gross_auroc: f64,
    pub scored: usize,
    pub positives: usize,
}

impl EvalReport {
    /// Mean over records with a defined AUPRC.
    pub fn mean_record_auprc(&self) -> Option<f64> {
        let defined: Vec<f64> = self.records.iter().filter_map(|r| r.auprc).collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// Per-record rows (when asked) followed by the gross row, 6 decimals.
    pub fn to_text(&self, per_record: bool) -> String {
        let mut s = String::new();
        if per_record {
            for r in &self.records {
                let v = r
                    .auprc
                    .map_or("undefined".to_string(), |v| format!("{v:.6}"));
                let _ = writeln!(
                    s,
                    "record {} auprc {} scored {} positives {}",
                    r.record_id, v, r.scored, r.positives
                );
            }
        }
        let _ = writeln!(
            s,
            "gross auprc {:.6} auroc {:.6} scored {} positives {}",
            self.gross_auprc, self.gross_auroc, self.scored, self.positives
        );
        s
    }
}

pub fn evaluate(streams: &[ScoreStream]) -> Result<EvalReport> {
    let pool = pool_scores(streams)?;
    let per = per_record_auprc(streams)?;
    let records = streams
        .iter()
        .zip(per)
        .map(|(s, (record_id, auprc))| RecordRow {
            record_id,
            auprc,
            scored: s.labels.iter().filter(|&&l| l != -1).count(),
            positives: s.labels.iter().filter(|&&l| l == 1).count(),
        })
        .collect();
    Ok(EvalReport {
        records,
        gross_auprc: gross_auprc(&pool)?,
        gross_auroc: gross_auroc(&pool)?,
        scored: pool.len(),
        positives: pool.n_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(scores: &[f64], labels: &[u8]) -> ScoredPool {
        ScoredPool::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn hand_traced_pool() {
        let p = pool(&[0.9, 0.8, 0.7, 0.1], &[1, 0, 1, 0]);
        assert!((gross_auprc(&p).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(gross_auroc(&p).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_tied_pools() {
        let p = pool(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(
            (gross_auprc(&p).unwrap(), gross_auroc(&p).unwrap()),
            (1.0, 1.0)
        );
        let t = pool(&[0.5; 6], &[1, 0, 0, 1, 0, 0]);
        assert_eq!(gross_auroc(&t).unwrap(), 0.5);
        assert!((gross_auprc(&t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_classes_are_errors() {
        let p = pool(&[0.1, 0.2], &[0, 0]);
        assert!(matches!(gross_auprc(&p), Err(Error::NoPositives)));
        assert_eq!(Error::NoPositives.to_string(), "no target arousal samples");
        assert!(gross_auroc(&pool(&[0.1], &[1])).is_err());
    }

    #[test]
    fn unscored_samples_are_dropped() {
        let a = ScoreStream::new("a", vec![0.5; 10], vec![1, 0, -1, -1, 0, 1, 0, 0, 1, 0]).unwrap();
        let b = ScoreStream::new("b", vec![0.2; 10], vec![0, 0, 0, 1, -1, -1, 0, 1, 0, 0]).unwrap();
        let p = pool_scores(&[a, b]).unwrap();
        assert_eq!(p.len(), 16);
        assert_eq!((p.n_pos, p.n_neg), (5, 11));
    }

    #[test]
    fn record_without_positives_is_undefined() {
        let a = ScoreStream::new("neg", vec![0.3, 0.4], vec![0, 0]).unwrap();
        let b = ScoreStream::new("pos", vec![0.3, 0.4], vec![0, 1]).unwrap();
        let rows = per_record_auprc(&[a, b]).unwrap();
        assert_eq!(rows[0], ("neg".to_string(), None));
        assert_eq!(rows[1], ("pos".to_string(), Some(1.0)));
    }

    #[test]
    fn report_text() {
        let a = ScoreStream::new("r1", vec![0.9, 0.8, 0.7, 0.1], vec![1, 0, 1, 0]).unwrap();
        let r = evaluate(&[a]).unwrap();
        assert_eq!(
            r.to_text(true),
            "record r1 auprc 0.833333 scored 4 positives 2\ngross auprc 0.833333 auroc 0.750000 scored 4 positives 2\n"
        );
    }
}
