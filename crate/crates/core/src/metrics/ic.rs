use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcSummary {
    pub ic_mean: f64,
    /// `ic_mean / std(IC)`; a signed infinity when every period has the
    /// same IC.
    pub ir: f64,
    /// Periods skipped because predictions or truths were constant.
    pub excluded_periods: usize,
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = rank);
        start = end;
    }
    ranks
}

/// Spearman correlation with average ranks for ties; `None` when either
/// side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Mean per-period rank IC and its information ratio.
pub fn ic_ir(predictions: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<IcSummary> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            found: truths.len(),
            context: "IC periods",
        });
    }
    if predictions.len() < 2 {
        return Err(Error::Metric("IC needs at least two periods".into()));
    }
    let mut ics = Vec::with_capacity(predictions.len());
    let mut excluded = 0;
    for (p, t) in predictions.iter().zip(truths) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: t.len(), context: "IC period" });
        }
        if p.len() < 3 {
            return Err(Error::Metric("each IC period needs at least three samples".into()));
        }
        match spearman(p, t) {
            Some(ic) => ics.push(ic),
            None => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} IC period(s) excluded: constant predictions or truths");
    }
    if ics.len() < 2 {
        return Err(Error::Metric(format!("only {} IC period(s) usable", ics.len())));
    }
    let n = ics.len() as f64;
    let ic_mean = ics.iter().sum::<f64>() / n;
    let std = (ics.iter().map(|ic| (ic - ic_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let ir = if std > 0.0 {
        ic_mean / std
    } else if ic_mean == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(ic_mean)
    };
    Ok(IcSummary { ic_mean, ir, excluded_periods: excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_spearman() {
        assert_eq!(spearman(&[2.0, 1.0, 3.0], &[1.0, 2.0, 3.0]), Some(0.5));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn perfect_and_reversed() {
        let t = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.1, 0.3]];
        let s = ic_ir(&t, &t).unwrap();
        assert_eq!((s.ic_mean, s.ir), (1.0, f64::INFINITY));
        let rev: Vec<Vec<f64>> = t.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let s = ic_ir(&rev, &t).unwrap();
        assert_eq!((s.ic_mean, s.ir), (-1.0, f64::NEG_INFINITY));
    }

    #[test]
    fn constant_period_excluded() {
        let p = vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0], vec![5.0, 5.0, 5.0]];
        let t = vec![vec![1.0, 2.0, 3.0]; 3];
        let s = ic_ir(&p, &t).unwrap();
        assert_eq!(s.excluded_periods, 1);
        assert_eq!(s.ic_mean, 0.75);
    }

    #[test]
    fn needs_two_periods_of_three() {
        assert!(ic_ir(&[vec![1.0, 2.0, 3.0]], &[vec![1.0, 2.0, 3.0]]).is_err());
        assert!(ic_ir(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    }
}
