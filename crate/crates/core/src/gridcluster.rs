//! Grid-partitioned federated DBSCAN in the clear: discretization,
//! closest-cell maps, dense masks, merging and per-cluster summaries.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combine::GlobalHp;
use crate::hpdata::{HpSpace, ScaledReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{clusters} clusters exceed the slot budget of {k_max}")]
    ClusterOverflow { clusters: usize, k_max: usize },
    #[error("no non-empty cluster")]
    NoCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub granularity: f64,
    pub d: usize,
    pub cells_per_dim: usize,
}

impl GridSpec {
    pub fn new(granularity: f64, d: usize) -> Result<Self, GridError> {
        if !(granularity > 0.0 && granularity <= 1.0) {
            return Err(GridError::InvalidGrid(format!("granularity {granularity} not in (0, 1]")));
        }
        if d == 0 {
            return Err(GridError::InvalidGrid("d must be at least 1".into()));
        }
        let cells_per_dim = (1.0 / granularity - 1e-9).ceil() as usize;
        if cells_per_dim.checked_pow(d as u32).is_none_or(|c| c > 1 << 24) {
            return Err(GridError::InvalidGrid("too many cells".into()));
        }
        Ok(Self {
            granularity,
            d,
            cells_per_dim,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_dim.pow(self.d as u32)
    }

    /// Cell coordinates of a scaled point, clamped at the upper boundary.
    pub fn cell_coords(&self, point: &[f64]) -> Vec<usize> {
        point
            .iter()
            .map(|&v| ((v / self.granularity).floor().max(0.0) as usize).min(self.cells_per_dim - 1))
            .collect()
    }

    /// Row-major index, dimension 0 most significant.
    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.cells_per_dim + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for j in (0..self.d).rev() {
            c[j] = index % self.cells_per_dim;
            index /= self.cells_per_dim;
        }
        c
    }

    pub fn cell_of(&self, point: &[f64]) -> usize {
        self.index(&self.cell_coords(point))
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.coords(index)
            .into_iter()
            .map(|c| (c as f64 + 0.5) * self.granularity)
            .collect()
    }

    /// Axis neighbors in the order −dim0, +dim0, −dim1, +dim1, ...
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let c = self.coords(index);
        let mut out = Vec::with_capacity(2 * self.d);
        for j in 0..self.d {
            if c[j] > 0 {
                let mut n = c.clone();
                n[j] -= 1;
                out.push(self.index(&n));
            }
            if c[j] + 1 < self.cells_per_dim {
                let mut n = c.clone();
                n[j] += 1;
                out.push(self.index(&n));
            }
        }
        out
    }
}

/// Per-cell point counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub spec: GridSpec,
    pub counts: Vec<u64>,
}

impl CellGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            counts: vec![0; spec.num_cells()],
        }
    }

    pub fn add(&mut self, other: &CellGrid) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn aggregate(grids: &[CellGrid]) -> Option<CellGrid> {
    let mut out = CellGrid::empty(grids.first()?.spec);
    for g in grids {
        out.add(g);
    }
    Some(out)
}

pub fn discretize(report: &ScaledReport, spec: &GridSpec) -> CellGrid {
    let mut grid = CellGrid::empty(*spec);
    for r in &report.records {
        grid.counts[spec.cell_of(&r.values)] += 1;
    }
    grid
}

/// Per point, the nearest axis-adjacent cell, or `None` on a 1-cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestCellMap {
    pub cells: Vec<Option<usize>>,
}

pub fn closest_cells(report: &ScaledReport, spec: &GridSpec) -> ClosestCellMap {
    let cells = report
        .records
        .iter()
        .map(|r| {
            let mut best: Option<(usize, f64)> = None;
            for n in spec.neighbors(spec.cell_of(&r.values)) {
                let d: f64 = spec
                    .center(n)
                    .iter()
                    .zip(&r.values)
                    .map(|(c, v)| (c - v).powi(2))
                    .sum();
                if best.is_none_or(|(_, bd)| d < bd - 1e-12) {
                    best = Some((n, d));
                }
            }
            best.map(|(n, _)| n)
        })
        .collect();
    ClosestCellMap { cells }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMask {
    pub dense: Vec<bool>,
}

impl DenseMask {
    pub fn dense_cells(&self) -> Vec<usize> {
        (0..self.dense.len()).filter(|&i| self.dense[i]).collect()
    }

    pub fn any(&self) -> bool {
        self.dense.iter().any(|&b| b)
    }
}

/// Dense iff the aggregate count is at least `min_pts`.
pub fn dense_mask(aggregate: &CellGrid, min_pts: usize) -> DenseMask {
    DenseMask {
        dense: aggregate.counts.iter().map(|&c| c >= min_pts as u64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedPoint {
    /// Scaled values; a relocated point takes its new cell's center.
    pub values: Vec<f64>,
    pub accuracy: f64,
    pub cell: usize,
}

pub fn relocate_points(
    report: &ScaledReport,
    spec: &GridSpec,
    map: &ClosestCellMap,
    mask: &DenseMask,
) -> Vec<RetainedPoint> {
    let mut out = Vec::new();
    for (r, target) in report.records.iter().zip(&map.cells) {
        let cell = spec.cell_of(&r.values);
        if mask.dense[cell] {
            out.push(RetainedPoint {
                values: r.values.clone(),
                accuracy: r.accuracy,
                cell,
            });
        } else if let Some(t) = target.filter(|&t| mask.dense[t]) {
            out.push(RetainedPoint {
                values: spec.center(t),
                accuracy: r.accuracy,
                cell: t,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLabels {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

/// Connected components of dense cells under axis adjacency, numbered in
/// row-major discovery order.
pub fn merge_cells(mask: &DenseMask, spec: &GridSpec) -> CellLabels {
    let mut labels = vec![None; mask.dense.len()];
    let mut next = 0;
    for s in 0..mask.dense.len() {
        if !mask.dense[s] || labels[s].is_some() {
            continue;
        }
        labels[s] = Some(next);
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            for n in spec.neighbors(c) {
                if mask.dense[n] && labels[n].is_none() {
                    labels[n] = Some(next);
                    queue.push_back(n);
                }
            }
        }
        next += 1;
    }
    CellLabels {
        labels,
        n_clusters: next,
    }
}

/// Fixed-length per-cluster slot vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub k_max: usize,
    pub n_clusters: usize,
    /// One length-`k_max` vector per HP dimension.
    pub hp_sums: Vec<Vec<f64>>,
    pub acc_sum: Vec<f64>,
    pub count: Vec<f64>,
}

impl ClusterSummary {
    pub fn zero(d: usize, k_max: usize, n_clusters: usize) -> Self {
        Self {
            k_max,
            n_clusters,
            hp_sums: vec![vec![0.0; k_max]; d],
            acc_sum: vec![0.0; k_max],
            count: vec![0.0; k_max],
        }
    }

    pub fn add(&mut self, other: &ClusterSummary) {
        for (a, b) in self.hp_sums.iter_mut().zip(&other.hp_sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.acc_sum.iter_mut().zip(&other.acc_sum) {
            *x += y;
        }
        for (x, y) in self.count.iter_mut().zip(&other.count) {
            *x += y;
        }
    }

    /// Per-cluster means with exact division; empty slots stay zero.
    pub fn means(&self) -> ClusterMeans {
        let div = |s: f64, c: f64| if c > 0.0 { s / c } else { 0.0 };
        ClusterMeans {
            n_clusters: self.n_clusters,
            hp: self
                .hp_sums
                .iter()
                .map(|v| v.iter().zip(&self.count).map(|(&s, &c)| div(s, c)).collect())
                .collect(),
            acc: self.acc_sum.iter().zip(&self.count).map(|(&s, &c)| div(s, c)).collect(),
        }
    }
}

pub fn summarize(
    points: &[RetainedPoint],
    labels: &CellLabels,
    d: usize,
    k_max: usize,
) -> Result<ClusterSummary, GridError> {
    if labels.n_clusters > k_max {
        return Err(GridError::ClusterOverflow {
            clusters: labels.n_clusters,
            k_max,
        });
    }
    let mut s = ClusterSummary::zero(d, k_max, labels.n_clusters);
    for p in points {
        if let Some(c) = labels.labels[p.cell] {
            for (j, v) in p.values.iter().enumerate() {
                s.hp_sums[j][c] += v;
            }
            s.acc_sum[c] += p.accuracy;
            s.count[c] += 1.0;
        }
    }
    Ok(s)
}

/// Averaged per-cluster HP vectors (scaled) and accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMeans {
    pub n_clusters: usize,
    pub hp: Vec<Vec<f64>>,
    pub acc: Vec<f64>,
}

/// The cluster with the highest mean accuracy (lowest id on ties), its HP
/// means mapped back to raw units.
pub fn finalize(means: &ClusterMeans, space: &HpSpace) -> Result<GlobalHp, GridError> {
    let mut best: Option<usize> = None;
    for c in 0..means.n_clusters {
        if best.is_none_or(|b| means.acc[c] > means.acc[b]) {
            best = Some(c);
        }
    }
    let c = best.ok_or(GridError::NoCluster)?;
    let scaled: Vec<f64> = means.hp.iter().map(|v| v[c].clamp(0.0, 1.0)).collect();
    Ok(GlobalHp {
        values: space.unscale_point(&scaled),
        provenance: "grid-dbscan".into(),
        mean_accuracy: Some(means.acc[c]),
        cluster: Some(c),
    })
}

/// Selection on exact sums; skips clusters that received no points.
pub fn finalize_summary(summary: &ClusterSummary, space: &HpSpace) -> Result<GlobalHp, GridError> {
    let mut means = summary.means();
    let live: Vec<usize> = (0..summary.n_clusters).filter(|&c| summary.count[c] > 0.0).collect();
    if live.is_empty() {
        return Err(GridError::NoCluster);
    }
    for c in 0..summary.n_clusters {
        if summary.count[c] == 0.0 {
            means.acc[c] = f64::NEG_INFINITY;
        }
    }
    finalize(&means, space)
}

/// Output of the plaintext federated pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub mask: DenseMask,
    pub labels: CellLabels,
    pub retained: Vec<Vec<RetainedPoint>>,
    pub summary: ClusterSummary,
    pub global: GlobalHp,
}

/// discretize → aggregate → dense_mask → relocate → merge → summarize →
/// finalize over already-scaled client reports.
pub fn federated_pipeline(
    reports: &[ScaledReport],
    spec: &GridSpec,
    space: &HpSpace,
    min_pts: usize,
    k_max: usize,
) -> Result<GridOutcome, GridError> {
    let grids: Vec<CellGrid> = reports.iter().map(|r| discretize(r, spec)).collect();
    let agg = aggregate(&grids).unwrap_or_else(|| CellGrid::empty(*spec));
    let mask = dense_mask(&agg, min_pts);
    let labels = merge_cells(&mask, spec);
    let mut summary = ClusterSummary::zero(spec.d, k_max, labels.n_clusters);
    let mut retained = Vec::with_capacity(reports.len());
    for r in reports {
        let pts = relocate_points(r, spec, &closest_cells(r, spec), &mask);
        summary.add(&summarize(&pts, &labels, spec.d, k_max)?);
        retained.push(pts);
    }
    let global = finalize_summary(&summary, space)?;
    Ok(GridOutcome {
        mask,
        labels,
        retained,
        summary,
        global,
    })
}
