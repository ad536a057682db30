//! End-to-end PF-Mean and PF-DBSCAN runs over simulated parties, with a
//! transcript of every message and a plaintext reference run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{compare, divide, ApproxError, CompareConfig, DivideConfig, Refresh, Threshold};
use crate::ckks::{Ciphertext, CkksContext, CkksError, CkksParams, Preset, PublicKey, RelinKey};
use crate::combine::{combine_mean, CombineError, GlobalHp};
use crate::gridcluster::{
    closest_cells, discretize, federated_pipeline, finalize, merge_cells, relocate_points, summarize,
    ClusterMeans, DenseMask, GridError, GridSpec,
};
use crate::hpdata::{minmax_scale, select_top_fraction, top_count, ClientReport, HpSpace, ScaledReport};
use crate::mhe::{
    aggregate_key_messages, aggregate_pk, aggregate_rlk, apply_masks, combine_decryption, finish_refresh,
    partial_decrypt, pk_share, refresh_masks, rlk_round1, rlk_round2, sec_key_gen, CommonReference, KeyMessage,
    MheError, PolyMessage, SecretKeyShare,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("divisor range violated: {got} outside [{lo}, {hi}]")]
    DivisorRange { got: f64, lo: f64, hi: f64 },
    #[error("no dense cells: every point is noise")]
    AllNoise,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Mhe(#[from] MheError),
    #[error(transparent)]
    Ckks(#[from] CkksError),
}

// Transcript.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Server,
    Client(usize),
    AllClients,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Server => write!(f, "server"),
            Party::Client(i) => write!(f, "client-{i}"),
            Party::AllClients => write!(f, "all-clients"),
        }
    }
}

impl FromStr for Party {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "server" => Ok(Party::Server),
            "all-clients" => Ok(Party::AllClients),
            _ => s
                .strip_prefix("client-")
                .and_then(|i| i.parse().ok())
                .map(Party::Client)
                .ok_or_else(|| format!("unknown party {s}")),
        }
    }
}

impl Serialize for Party {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    KeyShare,
    PublicKey,
    /// A client's input ciphertext.
    Upload,
    /// A ciphertext sent from the server to a client.
    Result,
    DecryptionShare,
    /// Sum of decryption shares relayed to the clients.
    Opening,
    BootstrapMask,
    BootstrapShare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: Party,
    pub receiver: Party,
    pub kind: MessageKind,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub name: String,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<Round>,
    pub total_bytes: usize,
    pub bootstrap_count: usize,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Transcript {
    pub fn begin_round(&mut self, name: impl Into<String>) {
        self.rounds.push(Round {
            name: name.into(),
            messages: Vec::new(),
        });
    }

    pub fn send(&mut self, sender: Party, receiver: Party, kind: MessageKind, bytes: usize) {
        if self.rounds.is_empty() {
            self.begin_round("unnamed");
        }
        self.total_bytes += bytes;
        self.rounds.last_mut().unwrap().messages.push(Message {
            sender,
            receiver,
            kind,
            bytes,
        });
    }

    pub fn time<T>(&mut self, op: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings_ms.entry(op.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.rounds.iter().flat_map(|r| &r.messages)
    }

    /// Messages of `kind` sent by each client.
    pub fn per_client(&self, kind: MessageKind, n_clients: usize) -> Vec<usize> {
        let mut out = vec![0; n_clients];
        for m in self.messages().filter(|m| m.kind == kind) {
            if let Party::Client(i) = m.sender {
                out[i] += 1;
            }
        }
        out
    }

    fn add_time(&mut self, op: &str, ms: f64) {
        *self.timings_ms.entry(op.to_string()).or_default() += ms;
    }
}

// Session.

pub struct SessionKeys {
    pub shares: Vec<SecretKeyShare>,
    pub pk: PublicKey,
    pub rlk: RelinKey,
}

/// Key material and randomness for one group of clients. Key generation is
/// recorded in its own transcript.
pub struct Session {
    ctx: Arc<CkksContext>,
    keys: Arc<SessionKeys>,
    n_clients: usize,
    keygen: Transcript,
    rng: ChaCha20Rng,
}

impl Session {
    pub fn new(preset: Preset, n_clients: usize, seed: u64) -> Result<Self, ProtocolError> {
        Self::with_params(CkksParams::preset(preset), n_clients, seed)
    }

    pub fn with_params(params: CkksParams, n_clients: usize, seed: u64) -> Result<Self, ProtocolError> {
        if n_clients == 0 {
            return Err(ProtocolError::Input("at least one client required".into()));
        }
        let ctx = CkksContext::new(params)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let crs = CommonReference::new(seed ^ 0x5eed_c0de);
        let mut tr = Transcript::default();

        let shares: Vec<SecretKeyShare> = tr.time("sec_key_gen", || {
            (0..n_clients).map(|i| sec_key_gen(&ctx, i, &mut rng)).collect()
        });

        tr.begin_round("keygen-pk");
        let msgs: Vec<PolyMessage> = tr.time("keygen_pk", || {
            shares.iter().map(|s| pk_share(&ctx, s, &crs, &mut rng)).collect()
        });
        for m in &msgs {
            tr.send(Party::Client(m.party_id), Party::Server, MessageKind::KeyShare, m.serialized_len());
        }
        let pk = tr.time("keygen_pk", || aggregate_pk(&ctx, &crs, &msgs, n_clients))?;
        let pk_len = PolyMessage {
            party_id: 0,
            polys: vec![pk.b().clone()],
        }
        .serialized_len();
        for i in 0..n_clients {
            tr.send(Party::Server, Party::Client(i), MessageKind::PublicKey, pk_len);
        }

        tr.begin_round("keygen-ek-1");
        let (ephs, r1): (Vec<_>, Vec<KeyMessage>) = tr.time("keygen_ek", || {
            shares.iter().map(|s| rlk_round1(&ctx, s, &crs, &mut rng)).unzip()
        });
        for m in &r1 {
            tr.send(Party::Client(m.party_id), Party::Server, MessageKind::KeyShare, m.serialized_len());
        }
        let agg1 = tr.time("keygen_ek", || aggregate_key_messages(&ctx, &r1, n_clients))?;
        for i in 0..n_clients {
            tr.send(Party::Server, Party::Client(i), MessageKind::KeyShare, r1[0].serialized_len());
        }
        tr.begin_round("keygen-ek-2");
        let r2: Vec<KeyMessage> = tr.time("keygen_ek", || {
            shares
                .iter()
                .zip(&ephs)
                .map(|(s, e)| rlk_round2(&ctx, s, e, &agg1, &mut rng))
                .collect()
        });
        for m in &r2 {
            tr.send(Party::Client(m.party_id), Party::Server, MessageKind::KeyShare, m.serialized_len());
        }
        let rlk = tr.time("keygen_ek", || aggregate_rlk(&ctx, &agg1, &r2, n_clients))?;

        Ok(Self {
            ctx,
            keys: Arc::new(SessionKeys { shares, pk, rlk }),
            n_clients,
            keygen: tr,
            rng,
        })
    }

    pub fn ctx(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn keys(&self) -> &SessionKeys {
        &self.keys
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn keygen_transcript(&self) -> &Transcript {
        &self.keygen
    }
}

/// One collective decryption: the server sends `ct` to every client, each
/// returns a smudged share, the server relays the summed shares back.
fn decrypt_round(
    ctx: &CkksContext,
    keys: &SessionKeys,
    ct: &Ciphertext,
    rng: &mut ChaCha20Rng,
    tr: &mut Transcript,
    name: &str,
) -> Result<Vec<f64>, ProtocolError> {
    let n = keys.shares.len();
    tr.begin_round(name);
    for i in 0..n {
        tr.send(Party::Server, Party::Client(i), MessageKind::Result, ct.serialized_len());
    }
    let shares: Vec<PolyMessage> = tr.time("decrypt", || {
        keys.shares.iter().map(|s| partial_decrypt(ctx, s, ct, rng)).collect()
    });
    for m in &shares {
        tr.send(Party::Client(m.party_id), Party::Server, MessageKind::DecryptionShare, m.serialized_len());
    }
    for i in 0..n {
        tr.send(Party::Server, Party::Client(i), MessageKind::Opening, shares[0].serialized_len());
    }
    let pt = tr.time("decrypt", || combine_decryption(ctx, ct, &shares, n))?;
    Ok(ctx.decode(&pt))
}

/// Collective refresh, recorded as its own round.
pub struct Bootstrapper<'a> {
    ctx: &'a CkksContext,
    keys: &'a SessionKeys,
    rng: &'a mut ChaCha20Rng,
    tr: &'a mut Transcript,
}

impl Refresh for Bootstrapper<'_> {
    fn refresh(&mut self, ct: &Ciphertext) -> Result<Ciphertext, ApproxError> {
        let (ctx, keys) = (self.ctx, self.keys);
        let n = keys.shares.len();
        let start = Instant::now();
        self.tr.bootstrap_count += 1;
        self.tr.begin_round(format!("bootstrap-{}", self.tr.bootstrap_count));
        let masks = keys
            .shares
            .iter()
            .map(|s| refresh_masks(ctx, &keys.pk, s.party_id, ct.level(), self.rng))
            .collect::<Result<Vec<_>, _>>()?;
        for m in &masks {
            self.tr.send(
                Party::Client(m.party_id),
                Party::Server,
                MessageKind::BootstrapMask,
                m.low.serialized_len() + m.high.serialized_len(),
            );
        }
        let masked = apply_masks(ctx, ct, &masks, n)?;
        for i in 0..n {
            self.tr
                .send(Party::Server, Party::Client(i), MessageKind::Result, masked.serialized_len());
        }
        let shares: Vec<PolyMessage> = keys
            .shares
            .iter()
            .map(|s| partial_decrypt(ctx, s, &masked, self.rng))
            .collect();
        for m in &shares {
            self.tr.send(
                Party::Client(m.party_id),
                Party::Server,
                MessageKind::BootstrapShare,
                m.serialized_len(),
            );
        }
        let opened = combine_decryption(ctx, &masked, &shares, n)?;
        let out = finish_refresh(ctx, &opened, &masks, n)?;
        self.tr.add_time("bootstrap", start.elapsed().as_secs_f64() * 1e3);
        Ok(out)
    }
}

// Configuration.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    PfMean,
    PfDbscan,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PfMean => "pf-mean",
            Self::PfDbscan => "pf-dbscan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub strategy: ProtocolKind,
    pub preset: Preset,
    pub granularity: f64,
    pub min_pts: usize,
    /// Share of each client's records it contributes.
    pub top_fraction: f64,
    /// Public cap on the records any client holds before selection.
    pub max_records: usize,
    /// Public bound on any aggregate count; derived from `max_records`
    /// when absent.
    pub count_cap: Option<usize>,
    /// Cluster slots per segment; the number of grid cells when absent.
    pub k_max: Option<usize>,
    /// Regularizer added to cluster counts before division.
    pub epsilon: f64,
    /// Target relative error of the division circuit.
    pub divide_tolerance: f64,
    /// Fixed Goldschmidt iteration count; derived from the range when absent.
    pub divide_iterations: Option<usize>,
    pub compare: CompareConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            strategy: ProtocolKind::PfMean,
            preset: Preset::Test,
            granularity: 0.15,
            min_pts: 4,
            top_fraction: 1.0,
            max_records: 64,
            count_cap: None,
            k_max: None,
            epsilon: 1e-3,
            divide_tolerance: 1e-5,
            divide_iterations: None,
            compare: CompareConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn pf_mean() -> Self {
        Self::default()
    }

    /// Clients contribute their best 5% of records.
    pub fn pf_dbscan() -> Self {
        Self {
            strategy: ProtocolKind::PfDbscan,
            top_fraction: 0.05,
            ..Self::default()
        }
    }

    pub fn count_cap(&self, n_clients: usize) -> usize {
        self.count_cap
            .unwrap_or(n_clients * top_count(self.max_records, self.top_fraction))
    }

    pub fn grid(&self, d: usize) -> Result<GridSpec, ProtocolError> {
        Ok(GridSpec::new(self.granularity, d)?)
    }

    pub fn k_max(&self, grid: &GridSpec) -> usize {
        self.k_max.unwrap_or(grid.num_cells())
    }

    fn divide_config(&self, range: (f64, f64)) -> DivideConfig {
        match self.divide_iterations {
            Some(iterations) => DivideConfig {
                iterations,
                input_range: range,
            },
            None => DivideConfig::for_range(range, self.divide_tolerance),
        }
    }

    /// Divisor range and circuit for PF-Mean's total record count.
    pub fn mean_divide(&self, n_clients: usize) -> DivideConfig {
        self.divide_config((n_clients as f64, self.count_cap(n_clients).max(n_clients) as f64))
    }

    /// Divisor range and circuit for regularized cluster counts.
    pub fn cluster_divide(&self, n_clients: usize) -> DivideConfig {
        let cap = self.count_cap(n_clients) as f64;
        self.divide_config((1.0 + self.epsilon, cap.max(1.0) + self.epsilon))
    }

    /// Compare threshold for aggregate counts scaled by 1/count_cap.
    pub fn scaled_threshold(&self, n_clients: usize) -> f64 {
        (self.min_pts as f64 - 0.5) / self.count_cap(n_clients) as f64
    }

    pub fn validate(&self, n_clients: usize, d: usize, slots: usize) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Config(m));
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return bad(format!("top fraction {} not in (0, 1]", self.top_fraction));
        }
        if self.min_pts == 0 {
            return bad("min_pts must be at least 1".into());
        }
        if self.max_records == 0 {
            return bad("max_records must be at least 1".into());
        }
        if self.count_cap(n_clients) < n_clients {
            return bad(format!(
                "count cap {} below the number of clients {n_clients}",
                self.count_cap(n_clients)
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} not in (0, 1)", self.epsilon));
        }
        if !(self.divide_tolerance > 0.0) {
            return bad("divide tolerance must be positive".into());
        }
        self.compare.validate()?;
        if self.strategy == ProtocolKind::PfDbscan {
            let grid = self.grid(d)?;
            let k = self.k_max(&grid);
            if k == 0 {
                return bad("k_max must be positive".into());
            }
            if grid.num_cells() > slots || (d + 1) * k > slots {
                return bad(format!(
                    "{} cells and {} cluster slots do not fit {slots} slots",
                    grid.num_cells(),
                    (d + 1) * k
                ));
            }
            if self.min_pts as f64 - 0.5 > self.count_cap(n_clients) as f64 {
                return bad("min_pts above the count cap".into());
            }
        } else if d > slots {
            return bad(format!("{d} dimensions do not fit {slots} slots"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub global_hp: GlobalHp,
    pub plaintext_reference: GlobalHp,
    /// Mean squared error between the two HP vectors in scaled units.
    pub mse: f64,
    pub transcript: Transcript,
    /// Dense cells chosen by the encrypted and plaintext paths (PF-DBSCAN).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_cells: Option<(Vec<usize>, Vec<usize>)>,
}

pub fn scaled_mse(space: &HpSpace, a: &GlobalHp, b: &GlobalHp) -> f64 {
    let sa = space.scale_point(&a.values);
    let sb = space.scale_point(&b.values);
    sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / sa.len() as f64
}

fn check_reports(reports: &[ClientReport], space: &HpSpace, n: usize) -> Result<(), ProtocolError> {
    if reports.len() != n {
        return Err(ProtocolError::Input(format!(
            "session has {n} clients but {} reports were given",
            reports.len()
        )));
    }
    for r in reports {
        r.validate(space).map_err(|e| ProtocolError::Input(e.to_string()))?;
    }
    Ok(())
}

fn selected(reports: &[ClientReport], fraction: f64) -> Vec<ClientReport> {
    reports.iter().map(|r| select_top_fraction(r, fraction)).collect()
}

fn check_max_records(reports: &[ClientReport], cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
    for r in reports {
        if r.records.len() > cfg.max_records {
            return Err(ProtocolError::Input(format!(
                "client {} holds {} records, above the public cap of {}",
                r.client_id,
                r.records.len(),
                cfg.max_records
            )));
        }
    }
    Ok(())
}

// PF-Mean.

/// Each client encrypts its per-dimension sums of scaled HPs and its record
/// count; the server adds and divides; the clients decrypt.
pub fn run_pf_mean(
    reports: &[ClientReport],
    space: &HpSpace,
    config: &ProtocolConfig,
    session: &mut Session,
) -> Result<TuningOutcome, ProtocolError> {
    let n = session.n_clients;
    let d = space.d();
    check_reports(reports, space, n)?;
    check_max_records(reports, config)?;
    config.validate(n, d, session.ctx.slots())?;
    let reference = run_plaintext_reference(reports, space, config)?;
    let ctx = session.ctx.clone();
    let keys = session.keys.clone();
    let rng = &mut session.rng;
    let mut tr = Transcript::default();

    let dcfg = config.mean_divide(n);
    let top = selected(reports, config.top_fraction);
    let total: usize = top.iter().map(|r| r.records.len()).sum();
    let (lo, hi) = dcfg.input_range;
    if (total as f64) < lo || (total as f64) > hi {
        return Err(ProtocolError::DivisorRange {
            got: total as f64,
            lo,
            hi,
        });
    }

    tr.begin_round("upload");
    let mut uploads = Vec::with_capacity(n);
    for (i, r) in top.iter().enumerate() {
        let scaled = minmax_scale(r, space);
        let mut sums = vec![0.0; d];
        for rec in &scaled.records {
            for (s, v) in sums.iter_mut().zip(&rec.values) {
                *s += v;
            }
        }
        let count = vec![scaled.records.len() as f64; d];
        let (cs, cc) = tr.time("encrypt", || {
            Ok::<_, CkksError>((
                ctx.encrypt_values(&keys.pk, &sums, rng)?,
                ctx.encrypt_values(&keys.pk, &count, rng)?,
            ))
        })?;
        tr.send(Party::Client(i), Party::Server, MessageKind::Upload, cs.serialized_len());
        tr.send(Party::Client(i), Party::Server, MessageKind::Upload, cc.serialized_len());
        uploads.push((cs, cc));
    }

    let (sum, cnt) = tr.time("add", || {
        let mut it = uploads.iter();
        let (mut s, mut c) = it.next().cloned().expect("at least one client");
        for (a, b) in it {
            s = ctx.add(&s, a)?;
            c = ctx.add(&c, b)?;
        }
        Ok::<_, CkksError>((s, c))
    })?;
    let mean_ct = {
        let start = Instant::now();
        let before = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0);
        let mut boot = Bootstrapper {
            ctx: &ctx,
            keys: &keys,
            rng: &mut *rng,
            tr: &mut tr,
        };
        let out = divide(&ctx, &sum, &cnt, &dcfg, &keys.rlk, &mut boot)?;
        let boot_ms = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0) - before;
        tr.add_time("divide", start.elapsed().as_secs_f64() * 1e3 - boot_ms);
        out
    };
    let out = decrypt_round(&ctx, &keys, &mean_ct, rng, &mut tr, "result")?;
    let scaled: Vec<f64> = out[..d].iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let global = GlobalHp {
        values: space.unscale_point(&scaled),
        provenance: "pf-mean".into(),
        mean_accuracy: None,
        cluster: None,
    };
    Ok(TuningOutcome {
        mse: scaled_mse(space, &global, &reference),
        global_hp: global,
        plaintext_reference: reference,
        transcript: tr,
        dense_cells: None,
    })
}

// PF-DBSCAN.

/// Grid setup, encrypted dense-mask round, local clustering and encrypted
/// averaging round.
pub fn run_pf_dbscan(
    reports: &[ClientReport],
    space: &HpSpace,
    config: &ProtocolConfig,
    session: &mut Session,
) -> Result<TuningOutcome, ProtocolError> {
    let n = session.n_clients;
    let d = space.d();
    check_reports(reports, space, n)?;
    check_max_records(reports, config)?;
    config.validate(n, d, session.ctx.slots())?;
    let ctx = session.ctx.clone();
    let keys = session.keys.clone();
    let rng = &mut session.rng;
    let mut tr = Transcript::default();

    let grid = config.grid(d)?;
    let k_max = config.k_max(&grid);
    let cap = config.count_cap(n);
    let scaled: Vec<ScaledReport> = selected(reports, config.top_fraction)
        .iter()
        .map(|r| minmax_scale(r, space))
        .collect();
    let total: usize = scaled.iter().map(|r| r.records.len()).sum();
    if total > cap {
        return Err(ProtocolError::DivisorRange {
            got: total as f64,
            lo: 0.0,
            hi: cap as f64,
        });
    }

    // Grid setup.
    tr.begin_round("aggregation-1");
    let mut uploads = Vec::with_capacity(n);
    let mut maps = Vec::with_capacity(n);
    for (i, r) in scaled.iter().enumerate() {
        let (cells, map) = tr.time("client_local", || (discretize(r, &grid), closest_cells(r, &grid)));
        let counts: Vec<f64> = cells.counts.iter().map(|&c| c as f64).collect();
        let ct = tr.time("encrypt", || ctx.encrypt_values(&keys.pk, &counts, rng))?;
        tr.send(Party::Client(i), Party::Server, MessageKind::Upload, ct.serialized_len());
        uploads.push(ct);
        maps.push(map);
    }

    // Aggregation round 1: dense mask.
    let agg = tr.time("add", || {
        uploads[1..]
            .iter()
            .try_fold(uploads[0].clone(), |acc, c| ctx.add(&acc, c))
    })?;
    let cmp = {
        let start = Instant::now();
        let before = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0);
        let scaled_counts = ctx.mul_const(&agg, 1.0 / cap as f64)?;
        let mut boot = Bootstrapper {
            ctx: &ctx,
            keys: &keys,
            rng: &mut *rng,
            tr: &mut tr,
        };
        let out = compare(
            &ctx,
            &scaled_counts,
            Threshold::Const(config.scaled_threshold(n)),
            &config.compare,
            &keys.rlk,
            &mut boot,
        )?;
        let boot_ms = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0) - before;
        tr.add_time("compare", start.elapsed().as_secs_f64() * 1e3 - boot_ms);
        out
    };
    let signs = decrypt_round(&ctx, &keys, &cmp, rng, &mut tr, "mask")?;
    let mask = DenseMask {
        dense: signs[..grid.num_cells()].iter().map(|&v| v > 0.0).collect(),
    };
    let reference = reference_dbscan_path(&scaled, &grid, space, config.min_pts, k_max);
    if !mask.any() {
        return Err(ProtocolError::AllNoise);
    }

    // Local clustering.
    let labels = merge_cells(&mask, &grid);
    if labels.n_clusters > k_max {
        return Err(GridError::ClusterOverflow {
            clusters: labels.n_clusters,
            k_max,
        }
        .into());
    }
    tr.begin_round("aggregation-2");
    let mut hp_cts = Vec::with_capacity(n);
    let mut t_cts = Vec::with_capacity(n);
    for (i, (r, map)) in scaled.iter().zip(&maps).enumerate() {
        let summary = tr.time("client_local", || {
            let pts = relocate_points(r, &grid, map, &mask);
            summarize(&pts, &labels, d, k_max)
        })?;
        let mut packed = Vec::with_capacity((d + 1) * k_max);
        for v in &summary.hp_sums {
            packed.extend_from_slice(v);
        }
        packed.extend_from_slice(&summary.acc_sum);
        let counts: Vec<f64> = (0..=d).flat_map(|_| summary.count.iter().copied()).collect();
        let (hc, tc) = tr.time("encrypt", || {
            Ok::<_, CkksError>((
                ctx.encrypt_values(&keys.pk, &packed, rng)?,
                ctx.encrypt_values(&keys.pk, &counts, rng)?,
            ))
        })?;
        tr.send(Party::Client(i), Party::Server, MessageKind::Upload, hc.serialized_len());
        tr.send(Party::Client(i), Party::Server, MessageKind::Upload, tc.serialized_len());
        hp_cts.push(hc);
        t_cts.push(tc);
    }

    // Aggregation round 2: per-cluster means.
    let (hp, t) = tr.time("add", || {
        let hp = hp_cts[1..].iter().try_fold(hp_cts[0].clone(), |a, c| ctx.add(&a, c))?;
        let t = t_cts[1..].iter().try_fold(t_cts[0].clone(), |a, c| ctx.add(&a, c))?;
        Ok::<_, CkksError>((hp, ctx.add_const(&t, config.epsilon)?))
    })?;
    let quotient = {
        let start = Instant::now();
        let before = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0);
        let mut boot = Bootstrapper {
            ctx: &ctx,
            keys: &keys,
            rng: &mut *rng,
            tr: &mut tr,
        };
        let out = divide(&ctx, &hp, &t, &config.cluster_divide(n), &keys.rlk, &mut boot)?;
        let boot_ms = tr.timings_ms.get("bootstrap").copied().unwrap_or(0.0) - before;
        tr.add_time("divide", start.elapsed().as_secs_f64() * 1e3 - boot_ms);
        out
    };
    let out = decrypt_round(&ctx, &keys, &quotient, rng, &mut tr, "result")?;
    let seg = |j: usize| out[j * k_max..(j + 1) * k_max].to_vec();
    let means = ClusterMeans {
        n_clusters: labels.n_clusters,
        hp: (0..d).map(seg).collect(),
        acc: seg(d),
    };
    let mut global = finalize(&means, space)?;
    global.provenance = "pf-dbscan".into();
    let (reference, ref_mask) = reference?;
    Ok(TuningOutcome {
        mse: scaled_mse(space, &global, &reference),
        global_hp: global,
        plaintext_reference: reference,
        transcript: tr,
        dense_cells: Some((mask.dense_cells(), ref_mask.dense_cells())),
    })
}

fn reference_dbscan_path(
    scaled: &[ScaledReport],
    grid: &GridSpec,
    space: &HpSpace,
    min_pts: usize,
    k_max: usize,
) -> Result<(GlobalHp, DenseMask), ProtocolError> {
    let out = federated_pipeline(scaled, grid, space, min_pts, k_max).map_err(|e| match e {
        GridError::NoCluster => ProtocolError::AllNoise,
        e => e.into(),
    })?;
    let mut hp = out.global;
    hp.provenance = "pf-dbscan-reference".into();
    Ok((hp, out.mask))
}

/// The protocol's dataflow with exact arithmetic: true division and a true
/// threshold test.
pub fn run_plaintext_reference(
    reports: &[ClientReport],
    space: &HpSpace,
    config: &ProtocolConfig,
) -> Result<GlobalHp, ProtocolError> {
    let top = selected(reports, config.top_fraction);
    match config.strategy {
        ProtocolKind::PfMean => {
            let mut hp = combine_mean(&top)?;
            hp.provenance = "pf-mean-reference".into();
            Ok(hp)
        }
        ProtocolKind::PfDbscan => {
            let grid = config.grid(space.d())?;
            let scaled: Vec<ScaledReport> = top.iter().map(|r| minmax_scale(r, space)).collect();
            Ok(reference_dbscan_path(&scaled, &grid, space, config.min_pts, config.k_max(&grid))?.0)
        }
    }
}

pub fn run(
    reports: &[ClientReport],
    space: &HpSpace,
    config: &ProtocolConfig,
    session: &mut Session,
) -> Result<TuningOutcome, ProtocolError> {
    match config.strategy {
        ProtocolKind::PfMean => run_pf_mean(reports, space, config, session),
        ProtocolKind::PfDbscan => run_pf_dbscan(reports, space, config, session),
    }
}
