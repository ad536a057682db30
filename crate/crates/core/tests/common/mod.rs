//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hpfed::hpdata::{HpRecord, ScaledReport};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// DBSCAN from the definitions: core points by neighbor count, density
/// reachability by Warshall closure, borders to the nearest core point.
/// Cluster ids by first appearance.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let d = |i: usize, j: usize| euclid(&points[i], &points[j]);
    let within = |i: usize, j: usize| d(i, j) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| within(i, j)).count() >= min_pts).collect();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || (core[i] && core[j] && within(i, j));
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let rep: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let anchor = if core[i] {
                i
            } else {
                (0..n)
                    .filter(|&j| core[j] && within(i, j))
                    .min_by(|&a, &b| d(i, a).partial_cmp(&d(i, b)).unwrap())?
            };
            (0..n).find(|&j| core[j] && reach[anchor][j])
        })
        .collect();
    let mut ids: Vec<usize> = Vec::new();
    rep.iter()
        .map(|r| {
            r.map(|r| match ids.iter().position(|&x| x == r) {
                Some(p) => p,
                None => {
                    ids.push(r);
                    ids.len() - 1
                }
            })
        })
        .collect()
}

pub fn flat_mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

pub fn flat_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Trimmed mean dropping `percent·n/100` values per tail (integer division).
pub fn flat_trimmed(v: &[f64], percent: usize) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = percent * s.len() / 100;
    flat_mean(&s[k..s.len() - k])
}

/// The best `ceil(percent·n/100)` records of one client.
pub fn flat_top(records: &[HpRecord], percent: usize) -> Vec<HpRecord> {
    let mut r = records.to_vec();
    r.sort_by(|a, b| b.accuracy.partial_cmp(&a.accuracy).unwrap());
    r.truncate((percent * records.len()).div_ceil(100).max(1));
    r
}

/// Pooled grid clustering written cell by cell.
pub struct GridOracle {
    pub dense: Vec<bool>,
    /// Component per cell, numbered by smallest member cell.
    pub cell_labels: Vec<Option<usize>>,
    /// Cluster of every point in pooled order, `None` when dropped.
    pub point_labels: Vec<Option<usize>>,
    pub best: Option<(usize, Vec<f64>)>,
}

pub fn grid_cluster(reports: &[ScaledReport], g: f64, d: usize, min_pts: usize) -> GridOracle {
    let m = (1.0 / g - 1e-9).ceil() as usize;
    let cells: Vec<Vec<usize>> = (0..m.pow(d as u32))
        .map(|mut i| {
            let mut c = vec![0; d];
            for j in (0..d).rev() {
                c[j] = i % m;
                i /= m;
            }
            c
        })
        .collect();
    let contains = |c: &[usize], v: &[f64]| {
        c.iter().zip(v).all(|(&k, &x)| {
            let lo = k as f64 * g;
            let hi = (k + 1) as f64 * g;
            (x >= lo || k == 0) && (x < hi || k == m - 1)
        })
    };
    let home = |v: &[f64]| cells.iter().position(|c| contains(c, v)).unwrap();
    let center = |c: &[usize]| c.iter().map(|&k| (k as f64 + 0.5) * g).collect::<Vec<f64>>();
    let adjacent = |a: &[usize], b: &[usize]| a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).sum::<usize>() == 1;
    let all: Vec<&HpRecord> = reports.iter().flat_map(|r| &r.records).collect();
    let dense: Vec<bool> = (0..cells.len())
        .map(|i| all.iter().filter(|r| home(&r.values) == i).count() >= min_pts)
        .collect();

    let mut comp: Vec<usize> = (0..cells.len()).collect();
    loop {
        let mut changed = false;
        for a in 0..cells.len() {
            for b in 0..cells.len() {
                if dense[a] && dense[b] && adjacent(&cells[a], &cells[b]) && comp[b] < comp[a] {
                    comp[a] = comp[b];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let roots: Vec<usize> = (0..cells.len()).filter(|&c| dense[c] && comp[c] == c).collect();
    let cell_labels: Vec<Option<usize>> = (0..cells.len())
        .map(|c| dense[c].then(|| roots.iter().position(|&r| r == comp[c]).unwrap()))
        .collect();

    let mut sums: BTreeMap<usize, (Vec<f64>, f64, f64)> = BTreeMap::new();
    let mut point_labels = Vec::with_capacity(all.len());
    for r in &all {
        let h = home(&r.values);
        let target = if dense[h] {
            Some((h, r.values.clone()))
        } else {
            let dist = |c: usize| euclid(&center(&cells[c]), &r.values);
            (0..cells.len())
                .filter(|&c| adjacent(&cells[c], &cells[h]))
                .min_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap())
                .filter(|&t| dense[t])
                .map(|t| (t, center(&cells[t])))
        };
        let Some((cell, values)) = target else {
            point_labels.push(None);
            continue;
        };
        let k = cell_labels[cell].unwrap();
        point_labels.push(Some(k));
        let e = sums.entry(k).or_insert((vec![0.0; d], 0.0, 0.0));
        for j in 0..d {
            e.0[j] += values[j];
        }
        e.1 += r.accuracy;
        e.2 += 1.0;
    }
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for (&k, (hp, acc, n)) in &sums {
        let a = acc / n;
        if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
            best = Some((a, k, hp.iter().map(|s| (s / n).clamp(0.0, 1.0)).collect()));
        }
    }
    GridOracle {
        dense,
        cell_labels,
        point_labels,
        best: best.map(|(_, k, hp)| (k, hp)),
    }
}
