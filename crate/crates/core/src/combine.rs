//! Plaintext server-side Combine strategies and a centralized DBSCAN.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpdata::{minmax_scale, select_top_fraction, ClientReport, HpSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombineError {
    #[error("no records to combine")]
    NoRecords,
    #[error("invalid strategy parameter: {0}")]
    InvalidParam(String),
    #[error("trimming {k} values per tail leaves nothing out of {n}")]
    OverTrimmed { k: usize, n: usize },
    #[error("every point is noise")]
    AllNoise,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CombineStrategy {
    Mean,
    Median,
    TrimmedMean { trim_fraction: f64 },
    TopMean { fraction: f64 },
    TopMedian { fraction: f64 },
    /// `eps` is in scaled units; clients contribute their top `top_fraction`.
    Dbscan { eps: f64, min_pts: usize, top_fraction: f64 },
}

impl CombineStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Median => "median",
            Self::TrimmedMean { .. } => "trimmed-mean",
            Self::TopMean { .. } => "top-mean",
            Self::TopMedian { .. } => "top-median",
            Self::Dbscan { .. } => "dbscan",
        }
    }

    pub fn validate(&self) -> Result<(), CombineError> {
        let frac = |f: f64| {
            if f > 0.0 && f <= 1.0 {
                Ok(())
            } else {
                Err(CombineError::InvalidParam(format!("fraction {f} not in (0, 1]")))
            }
        };
        match *self {
            Self::Mean | Self::Median => Ok(()),
            Self::TrimmedMean { trim_fraction } => {
                if (0.0..0.5).contains(&trim_fraction) {
                    Ok(())
                } else {
                    Err(CombineError::InvalidParam(format!("trim fraction {trim_fraction} not in [0, 0.5)")))
                }
            }
            Self::TopMean { fraction } | Self::TopMedian { fraction } => frac(fraction),
            Self::Dbscan {
                eps,
                min_pts,
                top_fraction,
            } => {
                if !(eps > 0.0) {
                    return Err(CombineError::InvalidParam(format!("eps {eps} must be positive")));
                }
                if min_pts == 0 {
                    return Err(CombineError::InvalidParam("min_pts must be at least 1".into()));
                }
                frac(top_fraction)
            }
        }
    }
}

/// Global hyperparameters in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalHp {
    pub values: Vec<f64>,
    pub provenance: String,
    pub mean_accuracy: Option<f64>,
    /// Winning cluster id for clustering strategies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

impl GlobalHp {
    fn plain(values: Vec<f64>, provenance: &str) -> Self {
        Self {
            values,
            provenance: provenance.into(),
            mean_accuracy: None,
            cluster: None,
        }
    }
}

/// Per-coordinate columns over the union of all records.
fn columns(reports: &[ClientReport]) -> Result<Vec<Vec<f64>>, CombineError> {
    let d = reports
        .iter()
        .flat_map(|r| r.records.first())
        .map(|r| r.values.len())
        .next()
        .ok_or(CombineError::NoRecords)?;
    let mut cols = vec![Vec::new(); d];
    for rec in reports.iter().flat_map(|r| &r.records) {
        for (c, &v) in cols.iter_mut().zip(&rec.values) {
            c.push(v);
        }
    }
    Ok(cols)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn combine_mean(reports: &[ClientReport]) -> Result<GlobalHp, CombineError> {
    let cols = columns(reports)?;
    // Sorted summation makes the result independent of record order.
    Ok(GlobalHp::plain(cols.into_iter().map(|c| mean(&sorted(c))).collect(), "mean"))
}

pub fn combine_median(reports: &[ClientReport]) -> Result<GlobalHp, CombineError> {
    let cols = columns(reports)?;
    Ok(GlobalHp::plain(
        cols.into_iter().map(|c| median_sorted(&sorted(c))).collect(),
        "median",
    ))
}

/// Drops floor(trim_fraction·n) values from each tail per coordinate.
pub fn combine_trimmed_mean(reports: &[ClientReport], trim_fraction: f64) -> Result<GlobalHp, CombineError> {
    CombineStrategy::TrimmedMean { trim_fraction }.validate()?;
    let cols = columns(reports)?;
    let n = cols[0].len();
    let k = (trim_fraction * n as f64 + 1e-9).floor() as usize;
    if 2 * k >= n {
        return Err(CombineError::OverTrimmed { k, n });
    }
    Ok(GlobalHp::plain(
        cols.into_iter().map(|c| mean(&sorted(c)[k..n - k])).collect(),
        "trimmed-mean",
    ))
}

/// Top fraction of every client, then the mean or median of the union.
pub fn combine_top(reports: &[ClientReport], fraction: f64, center: Center) -> Result<GlobalHp, CombineError> {
    CombineStrategy::TopMean { fraction }.validate()?;
    let top: Vec<ClientReport> = reports.iter().map(|r| select_top_fraction(r, fraction)).collect();
    let mut out = match center {
        Center::Mean => combine_mean(&top)?,
        Center::Median => combine_median(&top)?,
    };
    out.provenance = match center {
        Center::Mean => "top-mean",
        Center::Median => "top-median",
    }
    .into();
    Ok(out)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// DBSCAN labels: `Some(cluster)` or `None` for noise.
///
/// Neighborhoods are closed balls and include the point itself. A border
/// point joins the cluster of its nearest core neighbor (ties to the
/// lexicographically smaller core point). Clusters are numbered by their
/// smallest point index.
pub fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    // Components of the core graph.
    let mut comp = vec![usize::MAX; n];
    let mut n_comp = 0;
    for s in 0..n {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = n_comp;
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if core[j] && comp[j] == usize::MAX {
                    comp[j] = n_comp;
                    queue.push_back(j);
                }
            }
        }
        n_comp += 1;
    }

    let mut raw: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if core[i] {
            raw[i] = Some(comp[i]);
            continue;
        }
        raw[i] = neighbors[i]
            .iter()
            .filter(|&&j| core[j])
            .min_by(|&&a, &&b| {
                dist2(&points[i], &points[a])
                    .total_cmp(&dist2(&points[i], &points[b]))
                    .then_with(|| {
                        points[a]
                            .iter()
                            .zip(&points[b])
                            .map(|(x, y)| x.total_cmp(y))
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            })
            .map(|&j| comp[j]);
    }

    // Renumber by smallest member index.
    let mut rename = vec![usize::MAX; n_comp];
    let mut next = 0;
    for c in raw.iter().flatten() {
        if rename[*c] == usize::MAX {
            rename[*c] = next;
            next += 1;
        }
    }
    raw.into_iter().map(|c| c.map(|c| rename[c])).collect()
}

/// DBSCAN over the pooled scaled top records; returns the centroid of the
/// cluster with the highest mean accuracy (ties to the lower id).
pub fn combine_dbscan(
    reports: &[ClientReport],
    space: &HpSpace,
    eps: f64,
    min_pts: usize,
    top_fraction: f64,
) -> Result<GlobalHp, CombineError> {
    CombineStrategy::Dbscan {
        eps,
        min_pts,
        top_fraction,
    }
    .validate()?;
    let mut points = Vec::new();
    let mut accs = Vec::new();
    for r in reports {
        for rec in minmax_scale(&select_top_fraction(r, top_fraction), space).records {
            points.push(rec.values);
            accs.push(rec.accuracy);
        }
    }
    if points.is_empty() {
        return Err(CombineError::NoRecords);
    }
    let labels = reference_dbscan(&points, eps, min_pts);
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if k == 0 {
        return Err(CombineError::AllNoise);
    }
    let d = space.d();
    let mut sums = vec![vec![0.0; d]; k];
    let mut acc = vec![0.0; k];
    let mut count = vec![0usize; k];
    for ((p, a), l) in points.iter().zip(&accs).zip(&labels) {
        if let Some(c) = *l {
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
            acc[c] += a;
            count[c] += 1;
        }
    }
    let mut best = 0;
    for c in 1..k {
        if acc[c] / count[c] as f64 > acc[best] / count[best] as f64 {
            best = c;
        }
    }
    let centroid: Vec<f64> = sums[best].iter().map(|s| s / count[best] as f64).collect();
    Ok(GlobalHp {
        values: space.unscale_point(&centroid),
        provenance: "dbscan".into(),
        mean_accuracy: Some(acc[best] / count[best] as f64),
        cluster: Some(best),
    })
}

/// Sorted distances from each point to its k-th nearest other point.
pub fn k_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..points.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| dist2(&points[i], &points[j]).sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// min_pts = 2·d; eps = the sorted k-distance (k = min_pts + 1) at the
/// index of the largest second difference, first index on ties. When that
/// distance is zero (duplicate points) the next positive one is used.
pub fn suggest_dbscan_params(points: &[Vec<f64>], d: usize) -> Result<(f64, usize), CombineError> {
    let min_pts = 2 * d;
    let k = min_pts + 1;
    if points.len() < k + 1 {
        return Err(CombineError::TooFewPoints {
            needed: k + 1,
            got: points.len(),
        });
    }
    let s = k_distances(points, k);
    let positive = |from: usize| s[from..].iter().copied().find(|&x| x > 0.0).unwrap_or(f64::EPSILON);
    if s.len() < 3 {
        return Ok((positive(0), min_pts));
    }
    let mut knee = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 1..s.len() - 1 {
        let dd = s[i - 1] - 2.0 * s[i] + s[i + 1];
        if dd > best {
            best = dd;
            knee = i;
        }
    }
    Ok((positive(knee), min_pts))
}

pub fn combine(
    strategy: &CombineStrategy,
    reports: &[ClientReport],
    space: &HpSpace,
) -> Result<GlobalHp, CombineError> {
    strategy.validate()?;
    match *strategy {
        CombineStrategy::Mean => combine_mean(reports),
        CombineStrategy::Median => combine_median(reports),
        CombineStrategy::TrimmedMean { trim_fraction } => combine_trimmed_mean(reports, trim_fraction),
        CombineStrategy::TopMean { fraction } => combine_top(reports, fraction, Center::Mean),
        CombineStrategy::TopMedian { fraction } => combine_top(reports, fraction, Center::Median),
        CombineStrategy::Dbscan {
            eps,
            min_pts,
            top_fraction,
        } => combine_dbscan(reports, space, eps, min_pts, top_fraction),
    }
}
