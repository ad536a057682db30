//! Python bindings for the federated tuning library.
//!
//! Reports cross the boundary as plain lists: one list per client, each
//! record a `(values, accuracy)` pair in the default two-dimensional space.

use pyo3::prelude::*;

#[pymodule]
mod hpfed_py {
    use std::sync::Arc;

    use hpfed::ckks::{Ciphertext as RawCiphertext, CkksContext, CkksParams, Preset, PublicKey, RelinKey, SecretKey};
    use hpfed::cli::run_bench;
    use hpfed::combine::{combine as combine_plain, CombineStrategy};
    use hpfed::hpdata::{generate_synthetic_lho, ClientReport, HpRecord, HpSpace};
    use hpfed::protocols::{run, ProtocolConfig, Session, TuningOutcome};
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type Records = Vec<Vec<(Vec<f64>, f64)>>;

    fn value_err(e: impl std::fmt::Display) -> PyErr {
        PyValueError::new_err(e.to_string())
    }

    fn runtime_err(e: impl std::fmt::Display) -> PyErr {
        PyRuntimeError::new_err(e.to_string())
    }

    fn to_reports(records: Records) -> Vec<ClientReport> {
        records
            .into_iter()
            .enumerate()
            .map(|(i, recs)| ClientReport {
                client_id: format!("client-{i}"),
                records: recs
                    .into_iter()
                    .map(|(values, accuracy)| HpRecord { values, accuracy })
                    .collect(),
            })
            .collect()
    }

    fn parse_preset(name: &str) -> PyResult<Preset> {
        name.parse().map_err(value_err)
    }

    /// Synthetic per-client search histories over (learning rate, momentum).
    #[pyfunction]
    #[pyo3(signature = (clients, heterogeneity=0.1, seed=0))]
    fn generate(clients: usize, heterogeneity: f64, seed: u64) -> Records {
        generate_synthetic_lho(&HpSpace::default_2d(), clients, heterogeneity, seed)
            .into_iter()
            .map(|r| r.records.into_iter().map(|x| (x.values, x.accuracy)).collect())
            .collect()
    }

    /// Plaintext combine: mean, median, trimmed-mean, top-mean or top-median.
    #[pyfunction]
    #[pyo3(signature = (strategy, reports, fraction=0.1))]
    fn combine(strategy: &str, reports: Records, fraction: f64) -> PyResult<Vec<f64>> {
        let s = match strategy {
            "mean" => CombineStrategy::Mean,
            "median" => CombineStrategy::Median,
            "trimmed-mean" => CombineStrategy::TrimmedMean { trim_fraction: fraction },
            "top-mean" => CombineStrategy::TopMean { fraction },
            "top-median" => CombineStrategy::TopMedian { fraction },
            other => return Err(value_err(format!("unknown strategy {other:?}"))),
        };
        Ok(combine_plain(&s, &to_reports(reports), &HpSpace::default_2d())
            .map_err(value_err)?
            .values)
    }

    #[pyclass(frozen, get_all)]
    struct Outcome {
        global_hp: Vec<f64>,
        plaintext_reference: Vec<f64>,
        mse: f64,
        bootstraps: usize,
        total_bytes: usize,
        rounds: Vec<String>,
        json: String,
    }

    impl From<TuningOutcome> for Outcome {
        fn from(o: TuningOutcome) -> Self {
            Self {
                json: serde_json::to_string(&o).unwrap_or_default(),
                global_hp: o.global_hp.values,
                plaintext_reference: o.plaintext_reference.values,
                mse: o.mse,
                bootstraps: o.transcript.bootstrap_count,
                total_bytes: o.transcript.total_bytes,
                rounds: o.transcript.rounds.into_iter().map(|r| r.name).collect(),
            }
        }
    }

    /// Runs pf-mean or pf-dbscan over encrypted client reports.
    #[pyfunction]
    #[pyo3(signature = (strategy, reports, seed=0, preset="test", min_pts=None, granularity=None, top_fraction=None))]
    fn tune(
        py: Python<'_>,
        strategy: &str,
        reports: Records,
        seed: u64,
        preset: &str,
        min_pts: Option<usize>,
        granularity: Option<f64>,
        top_fraction: Option<f64>,
    ) -> PyResult<Outcome> {
        let mut cfg = match strategy {
            "pf-mean" => ProtocolConfig::pf_mean(),
            "pf-dbscan" => ProtocolConfig::pf_dbscan(),
            other => return Err(value_err(format!("unknown protocol {other:?}"))),
        };
        cfg.preset = parse_preset(preset)?;
        cfg.min_pts = min_pts.unwrap_or(cfg.min_pts);
        cfg.granularity = granularity.unwrap_or(cfg.granularity);
        cfg.top_fraction = top_fraction.unwrap_or(cfg.top_fraction);
        let reports = to_reports(reports);
        py.detach(|| {
            let mut session = Session::new(cfg.preset, reports.len(), seed)?;
            run(&reports, &HpSpace::default_2d(), &cfg, &mut session)
        })
        .map(Outcome::from)
        .map_err(runtime_err)
    }

    /// Operation timing table as printed by `hpfed bench`.
    #[pyfunction]
    #[pyo3(signature = (clients=2, reps=2, seed=0, preset="test"))]
    fn bench(py: Python<'_>, clients: usize, reps: usize, seed: u64, preset: &str) -> PyResult<String> {
        let preset = parse_preset(preset)?;
        py.detach(|| run_bench(preset, clients, reps, seed))
            .map(|r| r.table())
            .map_err(|e| runtime_err(e.message))
    }

    #[pyclass(frozen)]
    struct Ciphertext {
        inner: RawCiphertext,
    }

    #[pymethods]
    impl Ciphertext {
        #[getter]
        fn level(&self) -> usize {
            self.inner.level()
        }
    }

    /// Single-key CKKS context with its own keys.
    #[pyclass]
    struct Ckks {
        ctx: Arc<CkksContext>,
        sk: SecretKey,
        pk: PublicKey,
        rlk: RelinKey,
        rng: ChaCha20Rng,
    }

    #[pymethods]
    impl Ckks {
        #[new]
        #[pyo3(signature = (preset="test", seed=0))]
        fn new(preset: &str, seed: u64) -> PyResult<Self> {
            let ctx = CkksContext::new(CkksParams::preset(parse_preset(preset)?)).map_err(value_err)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let sk = SecretKey::generate(&ctx, &mut rng);
            let pk = PublicKey::generate(&ctx, &sk, &mut rng);
            let rlk = RelinKey::generate(&ctx, &sk, &mut rng);
            Ok(Self { ctx, sk, pk, rlk, rng })
        }

        #[getter]
        fn slots(&self) -> usize {
            self.ctx.slots()
        }

        #[getter]
        fn max_level(&self) -> usize {
            self.ctx.max_level()
        }

        fn encrypt(&mut self, values: Vec<f64>) -> PyResult<Ciphertext> {
            let inner = self.ctx.encrypt_values(&self.pk, &values, &mut self.rng).map_err(value_err)?;
            Ok(Ciphertext { inner })
        }

        fn decrypt(&self, ct: &Ciphertext) -> Vec<f64> {
            self.ctx.decrypt_values(&self.sk, &ct.inner)
        }

        fn add(&self, a: &Ciphertext, b: &Ciphertext) -> PyResult<Ciphertext> {
            let inner = self.ctx.add(&a.inner, &b.inner).map_err(value_err)?;
            Ok(Ciphertext { inner })
        }

        fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> PyResult<Ciphertext> {
            let inner = self.ctx.sub(&a.inner, &b.inner).map_err(value_err)?;
            Ok(Ciphertext { inner })
        }

        fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> PyResult<Ciphertext> {
            let inner = self.ctx.mul(&a.inner, &b.inner, &self.rlk).map_err(value_err)?;
            Ok(Ciphertext { inner })
        }

        fn mul_const(&self, a: &Ciphertext, c: f64) -> PyResult<Ciphertext> {
            let inner = self.ctx.mul_const(&a.inner, c).map_err(value_err)?;
            Ok(Ciphertext { inner })
        }
    }
}
