//! Hyperparameter spaces, per-client LHO reports, MinMax scaling and a
//! synthetic LHO generator.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpDataError {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("client {client}: malformed report: {msg}")]
    Malformed { client: String, msg: String },
    #[error("client {client}: field {field}: {msg}")]
    Range { client: String, field: String, msg: String },
    #[error("client {client}: empty record list")]
    Empty { client: String },
    #[error("client {client}: space does not match the expected space")]
    SpaceMismatch { client: String },
    #[error("duplicate client id {0}")]
    DuplicateClient(String),
    #[error("no report files in {0}")]
    NoReports(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpDim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct HpSpace {
    dims: Vec<HpDim>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    dims: Vec<HpDim>,
}

impl TryFrom<RawSpace> for HpSpace {
    type Error = HpDataError;
    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        HpSpace::new(raw.dims)
    }
}

impl From<HpSpace> for RawSpace {
    fn from(s: HpSpace) -> Self {
        RawSpace { dims: s.dims }
    }
}

impl HpSpace {
    pub fn new(dims: Vec<HpDim>) -> Result<Self, HpDataError> {
        if dims.is_empty() {
            return Err(HpDataError::InvalidSpace("at least one dimension required".into()));
        }
        let mut names = BTreeSet::new();
        for d in &dims {
            if !names.insert(d.name.as_str()) {
                return Err(HpDataError::InvalidSpace(format!("duplicate dimension {}", d.name)));
            }
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(HpDataError::InvalidSpace(format!(
                    "dimension {} needs finite lower < upper, got [{}, {}]",
                    d.name, d.lower, d.upper
                )));
            }
        }
        Ok(Self { dims })
    }

    /// Learning rate in [0.001, 0.5] and momentum in [0, 0.99].
    pub fn default_2d() -> Self {
        Self::new(vec![
            HpDim {
                name: "lr".into(),
                lower: 0.001,
                upper: 0.5,
            },
            HpDim {
                name: "momentum".into(),
                lower: 0.0,
                upper: 0.99,
            },
        ])
        .expect("valid default space")
    }

    pub fn dims(&self) -> &[HpDim] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn scale_point(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.dims)
            .map(|(v, d)| (v - d.lower) / (d.upper - d.lower))
            .collect()
    }

    pub fn unscale_point(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .zip(&self.dims)
            .map(|(s, d)| d.lower + s * (d.upper - d.lower))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpRecord {
    pub values: Vec<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientReport {
    pub client_id: String,
    pub records: Vec<HpRecord>,
}

impl ClientReport {
    pub fn validate(&self, space: &HpSpace) -> Result<(), HpDataError> {
        let client = || self.client_id.clone();
        if self.records.is_empty() {
            return Err(HpDataError::Empty { client: client() });
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.values.len() != space.d() {
                return Err(HpDataError::Range {
                    client: client(),
                    field: format!("records[{i}].values"),
                    msg: format!("expected {} values, got {}", space.d(), r.values.len()),
                });
            }
            for (v, d) in r.values.iter().zip(space.dims()) {
                if !(v.is_finite() && *v >= d.lower && *v <= d.upper) {
                    return Err(HpDataError::Range {
                        client: client(),
                        field: format!("records[{i}].{}", d.name),
                        msg: format!("{v} outside [{}, {}]", d.lower, d.upper),
                    });
                }
            }
            if !(0.0..=1.0).contains(&r.accuracy) {
                return Err(HpDataError::Range {
                    client: client(),
                    field: format!("records[{i}].accuracy"),
                    msg: format!("{} outside [0, 1]", r.accuracy),
                });
            }
        }
        Ok(())
    }
}

/// Report with every value MinMax-mapped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledReport {
    pub client_id: String,
    pub records: Vec<HpRecord>,
}

impl ScaledReport {
    pub fn unscale(&self, space: &HpSpace) -> ClientReport {
        ClientReport {
            client_id: self.client_id.clone(),
            records: self
                .records
                .iter()
                .map(|r| HpRecord {
                    values: space.unscale_point(&r.values),
                    accuracy: r.accuracy,
                })
                .collect(),
        }
    }
}

pub fn minmax_scale(report: &ClientReport, space: &HpSpace) -> ScaledReport {
    ScaledReport {
        client_id: report.client_id.clone(),
        records: report
            .records
            .iter()
            .map(|r| HpRecord {
                values: space.scale_point(&r.values),
                accuracy: r.accuracy,
            })
            .collect(),
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Number of records kept for a fraction of `n`.
pub fn top_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// The ceil(fraction·n) most accurate records. Accuracy ties go to the
/// lexicographically smaller HP vector, then to the earlier record.
pub fn select_top_fraction(report: &ClientReport, fraction: f64) -> ClientReport {
    let mut order: Vec<usize> = (0..report.records.len()).collect();
    let recs = &report.records;
    order.sort_by(|&i, &j| {
        recs[j]
            .accuracy
            .total_cmp(&recs[i].accuracy)
            .then_with(|| lex_cmp(&recs[i].values, &recs[j].values))
            .then(i.cmp(&j))
    });
    order.truncate(top_count(recs.len(), fraction));
    ClientReport {
        client_id: report.client_id.clone(),
        records: order.into_iter().map(|i| recs[i].clone()).collect(),
    }
}

// File format.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LhoFile {
    pub client_id: String,
    pub space: HpSpace,
    pub records: Vec<HpRecord>,
}

impl LhoFile {
    pub fn new(space: &HpSpace, report: &ClientReport) -> Self {
        Self {
            client_id: report.client_id.clone(),
            space: space.clone(),
            records: report.records.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HpDataError {
    HpDataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Parses one report file. The stem of the file name stands in for the
/// client id when the JSON itself cannot be read.
pub fn read_report_file(path: &Path) -> Result<LhoFile, HpDataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HpDataError::Malformed {
        client: fallback.clone(),
        msg: e.to_string(),
    })?;
    let client = value
        .get("client_id")
        .and_then(|v| v.as_str())
        .map(str::to_owned)
        .unwrap_or(fallback);
    serde_json::from_value(value).map_err(|e| HpDataError::Malformed {
        client,
        msg: e.to_string(),
    })
}

/// The `.json` files of a directory in name order, or the path itself.
pub fn report_paths(path: &Path) -> Result<Vec<PathBuf>, HpDataError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(HpDataError::NoReports(path.display().to_string()));
    }
    Ok(out)
}

/// The space declared by the first report under `path`.
pub fn read_space(path: &Path) -> Result<HpSpace, HpDataError> {
    let first = report_paths(path)?.remove(0);
    Ok(read_report_file(&first)?.space)
}

pub fn load_reports(path: &Path, space: &HpSpace) -> Result<Vec<ClientReport>, HpDataError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in report_paths(path)? {
        let file = read_report_file(&p)?;
        if &file.space != space {
            return Err(HpDataError::SpaceMismatch {
                client: file.client_id,
            });
        }
        let report = ClientReport {
            client_id: file.client_id,
            records: file.records,
        };
        report.validate(space)?;
        if !seen.insert(report.client_id.clone()) {
            return Err(HpDataError::DuplicateClient(report.client_id));
        }
        out.push(report);
    }
    Ok(out)
}

pub fn write_reports(dir: &Path, space: &HpSpace, reports: &[ClientReport]) -> Result<Vec<PathBuf>, HpDataError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut paths = Vec::with_capacity(reports.len());
    for r in reports {
        let p = dir.join(format!("{}.json", r.client_id));
        fs::write(&p, LhoFile::new(space, r).to_json()).map_err(|e| io_err(&p, e))?;
        paths.push(p);
    }
    Ok(paths)
}

// Synthetic LHO.

pub const GRID_POINTS_PER_DIM: usize = 7;
/// Width of the accuracy peak in scaled units.
pub const PEAK_WIDTH: f64 = 0.25;
pub const BASE_ACCURACY: f64 = 0.5;
pub const PEAK_HEIGHT: f64 = 0.45;

/// Accuracy of a scaled point for a peak at `optimum`.
pub fn peak_accuracy(scaled: &[f64], optimum: &[f64]) -> f64 {
    let sq: f64 = scaled.iter().zip(optimum).map(|(x, o)| (x - o).powi(2)).sum();
    BASE_ACCURACY + PEAK_HEIGHT * (-sq / (2.0 * PEAK_WIDTH * PEAK_WIDTH)).exp()
}

/// Scaled grid points, dimension 0 varying slowest.
pub fn scaled_grid(d: usize) -> Vec<Vec<f64>> {
    let k = GRID_POINTS_PER_DIM;
    let total = k.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for j in (0..d).rev() {
                p[j] = (idx % k) as f64 / (k - 1) as f64;
                idx /= k;
            }
            p
        })
        .collect()
}

/// Each client grid-searches the space; its accuracy landscape peaks at the
/// shared optimum plus N(0, (0.5·heterogeneity)²) noise per scaled
/// coordinate, clipped to [0, 1].
pub fn generate_synthetic_lho(
    space: &HpSpace,
    n_clients: usize,
    heterogeneity: f64,
    seed: u64,
) -> Vec<ClientReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = space.d();
    let global: Vec<f64> = (0..d).map(|_| rng.random_range(0.25..0.75)).collect();
    let noise = Normal::new(0.0, 0.5 * heterogeneity.max(0.0)).expect("finite sigma");
    let grid = scaled_grid(d);
    let width = n_clients.max(1).to_string().len().max(3);
    (0..n_clients)
        .map(|c| {
            let optimum: Vec<f64> = global
                .iter()
                .map(|g| (g + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            let records = grid
                .iter()
                .map(|p| HpRecord {
                    values: space
                        .unscale_point(p)
                        .into_iter()
                        .zip(space.dims())
                        .map(|(v, dim)| v.clamp(dim.lower, dim.upper))
                        .collect(),
                    accuracy: peak_accuracy(p, &optimum),
                })
                .collect();
            ClientReport {
                client_id: format!("client_{c:0width$}"),
                records,
            }
        })
        .collect()
}
