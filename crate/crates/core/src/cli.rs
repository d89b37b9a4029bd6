//! Job configuration, JSON documents and the workflows behind the
//! `gaussprep` binary.
//!
//! # Documents
//!
//! All documents are JSON. Matrices are `{"rows", "cols", "data"}` with
//! `data` row-major; complex entries are `[re, im]` pairs. Mode labels in
//! documents and reports start at 1.
//!
//! - graph: `{"n_modes", "X", "Y"}`
//! - covariance: `{"n_modes", "V"}`
//! - family: `{"n_modes", "zbar": [re, im], "perm", "q_seed" | "q_explicit", "block_signs"}`
//!   where `perm[a]` is the mode slot `a` of the reduced form maps to (so
//!   `perm[0]` is the reservoir mode) and `block_signs` are `±1`
//! - gains: `{"taus", "rs", "tau_p": [re, im]}`
//!
//! A job config holds any of the [`JobConfig`] fields; command-line flags
//! override it. Relative paths in a config resolve against its directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{
    self, entanglement_map, frobenius_distance, AnalysisError, EntanglementMap, DEFAULT_PHYSICALITY_TOL,
    ENTANGLED_THRESHOLD,
};
use crate::controllability::DEFAULT_CONTROLLABILITY_TOL;
use crate::dynamics::{
    self, convergence_report, integrate, steady_state, DriftDiffusion, DynamicsError, IntegrationSettings,
    TrajectoryRecord, DEFAULT_STABILITY_MARGIN,
};
use crate::gaussian_states::{cov_from_graph, purity, CovarianceMatrix, GraphMatrix, StateError};
use crate::linalg;
use crate::state_family::{
    self, build_graph, BlockSign, FamilyError, FamilyParams, MembershipCertificate, DEFAULT_MEMBERSHIP_TOL,
};
use crate::synthesis::{
    self, five_mode_chain, synthesize_with_params, Gains, SynthesisError, SystemRealization, DEFAULT_SYNTHESIS_TOL,
};
use crate::{CMat, Complex64, RMat};

/// Environment variable read for the log filter.
pub const LOG_ENV: &str = "GAUSSPREP_LOG";

/// Tolerance on agreement between a steady state and its target.
pub const DEFAULT_STEADY_STATE_TOL: f64 = 1e-8;
/// Tolerance on `|purity − 1|`.
pub const DEFAULT_PURITY_TOL: f64 = 1e-9;
/// Horizon `t_final · |spectral abscissa|` used when no `t_final` is given.
pub const DEFAULT_HORIZON: f64 = 20.0;
/// Samples kept per trajectory when no stride is given.
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

// ---------------------------------------------------------------------------
// documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_rmat(m: &RMat) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.transpose().as_slice().to_vec() }
    }

    pub fn to_rmat(&self) -> Result<RMat, CliError> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::Config(format!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(RMat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl ComplexMatrixDoc {
    pub fn from_cmat(m: &CMat) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.transpose().iter().map(|c| [c.re, c.im]).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub n_modes: usize,
    #[serde(rename = "X")]
    pub x: MatrixDoc,
    #[serde(rename = "Y")]
    pub y: MatrixDoc,
}

impl GraphDoc {
    pub fn from_graph(z: &GraphMatrix) -> Self {
        Self { n_modes: z.n_modes(), x: MatrixDoc::from_rmat(z.x()), y: MatrixDoc::from_rmat(z.y()) }
    }

    pub fn to_graph(&self) -> Result<GraphMatrix, CliError> {
        let (x, y) = (self.x.to_rmat()?, self.y.to_rmat()?);
        if x.shape() != (self.n_modes, self.n_modes) || y.shape() != (self.n_modes, self.n_modes) {
            return Err(CliError::Config(format!("X and Y must be {0}x{0}", self.n_modes)));
        }
        Ok(GraphMatrix::new(x, y)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceDoc {
    pub n_modes: usize,
    #[serde(rename = "V")]
    pub v: MatrixDoc,
}

impl CovarianceDoc {
    pub fn from_covariance(v: &CovarianceMatrix) -> Self {
        Self { n_modes: v.n_modes(), v: MatrixDoc::from_rmat(v.matrix()) }
    }

    pub fn to_covariance(&self) -> Result<CovarianceMatrix, CliError> {
        let v = self.v.to_rmat()?;
        if v.shape() != (2 * self.n_modes, 2 * self.n_modes) {
            return Err(CliError::Config(format!("V must be {0}x{0}", 2 * self.n_modes)));
        }
        Ok(CovarianceMatrix::new(v)?)
    }
}

/// A state file: either a graph matrix or a covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateDoc {
    Graph(GraphDoc),
    Covariance(CovarianceDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub n_modes: usize,
    pub zbar: [f64; 2],
    /// 1-based.
    pub perm: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_explicit: Option<MatrixDoc>,
    pub block_signs: Vec<i64>,
}

impl FamilyDoc {
    pub fn from_params(p: &FamilyParams) -> Self {
        Self {
            n_modes: p.n_modes,
            zbar: [p.zbar.re, p.zbar.im],
            perm: p.perm.iter().map(|k| k + 1).collect(),
            q_seed: None,
            q_explicit: Some(MatrixDoc::from_rmat(&p.q_orth)),
            block_signs: p.block_signs.iter().map(|s| i64::from(s.as_i8())).collect(),
        }
    }

    pub fn to_params(&self) -> Result<FamilyParams, CliError> {
        if self.perm.len() != self.n_modes {
            return Err(CliError::Config(format!("perm must list {} modes", self.n_modes)));
        }
        if self.perm.contains(&0) {
            return Err(CliError::Config("perm is 1-based".into()));
        }
        let perm = self.perm.iter().map(|k| k - 1).collect();
        let m = self.n_modes.saturating_sub(1);
        let q_orth = match (&self.q_explicit, self.q_seed) {
            (Some(_), Some(_)) => return Err(CliError::Config("give q_seed or q_explicit, not both".into())),
            (Some(q), None) => q.to_rmat()?,
            (None, Some(seed)) => linalg::random_orthogonal(m, &mut ChaCha8Rng::seed_from_u64(seed)),
            (None, None) => RMat::identity(m, m),
        };
        let block_signs = self
            .block_signs
            .iter()
            .map(|&s| BlockSign::from_i64(s).ok_or_else(|| CliError::Config(format!("block sign {s} is not ±1"))))
            .collect::<Result<_, _>>()?;
        Ok(FamilyParams::new(Complex64::new(self.zbar[0], self.zbar[1]), perm, q_orth, block_signs)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsDoc {
    pub taus: Vec<f64>,
    pub rs: Vec<f64>,
    pub tau_p: [f64; 2],
}

impl GainsDoc {
    pub fn from_gains(g: &Gains) -> Self {
        Self { taus: g.taus.clone(), rs: g.rs.clone(), tau_p: [g.tau_p.re, g.tau_p.im] }
    }

    pub fn to_gains(&self) -> Gains {
        Gains { taus: self.taus.clone(), rs: self.rs.clone(), tau_p: Complex64::new(self.tau_p[0], self.tau_p[1]) }
    }
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FamilyBuild,
    Check,
    Synthesize,
    Simulate,
    Analyze,
    Demo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FamilyBuild => "family-build",
            Command::Check => "check",
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Demo => "demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub membership: f64,
    pub synthesis: f64,
    pub controllability: f64,
    pub stability_margin: f64,
    pub steady_state: f64,
    pub purity: f64,
    pub entanglement: f64,
    pub physicality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            membership: DEFAULT_MEMBERSHIP_TOL,
            synthesis: DEFAULT_SYNTHESIS_TOL,
            controllability: DEFAULT_CONTROLLABILITY_TOL,
            stability_margin: DEFAULT_STABILITY_MARGIN,
            steady_state: DEFAULT_STEADY_STATE_TOL,
            purity: DEFAULT_PURITY_TOL,
            entanglement: ENTANGLED_THRESHOLD,
            physicality: DEFAULT_PHYSICALITY_TOL,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), CliError> {
        let all = [
            self.membership,
            self.synthesis,
            self.controllability,
            self.stability_margin,
            self.steady_state,
            self.purity,
            self.entanglement,
            self.physicality,
        ];
        if all.iter().all(|t| *t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(CliError::Config("tolerances must be positive and finite".into()))
        }
    }
}

/// Everything a run needs. Missing values take module defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<Command>,
    /// Graph or covariance file.
    pub input: Option<PathBuf>,
    pub family: Option<FamilyDoc>,
    /// Size of a random family member when neither `input` nor `family` is set.
    pub n_modes: Option<usize>,
    pub gains: Option<GainsDoc>,
    pub alpha: f64,
    pub seed: u64,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub stride: Option<usize>,
    pub tol: Tolerances,
    pub out_report: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
    pub out_dot: Option<PathBuf>,
    pub out_graph: Option<PathBuf>,
    /// Append the flattened covariance to each CSV row.
    pub csv_covariance: bool,
    /// Include wall-clock timings in the report (breaks byte-for-byte
    /// reproducibility).
    pub timings: bool,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            family: None,
            n_modes: None,
            gains: None,
            alpha: 0.3,
            seed: 0,
            t_final: None,
            dt: None,
            stride: None,
            tol: Tolerances::default(),
            out_report: None,
            out_csv: None,
            out_dot: None,
            out_graph: None,
            csv_covariance: false,
            timings: false,
        }
    }
}

impl JobConfig {
    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: JobConfig = read_json(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.input, &mut cfg.out_report, &mut cfg.out_csv, &mut cfg.out_dot, &mut cfg.out_graph]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.tol.validate()?;
        if let Some(input) = &self.input {
            if !input.exists() {
                return Err(CliError::Config(format!("input {} does not exist", input.display())));
            }
        }
        if self.t_final.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            return Err(CliError::Config("t_final must be finite and non-negative".into()));
        }
        if self.dt.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return Err(CliError::Config("dt must be positive".into()));
        }
        if self.stride == Some(0) {
            return Err(CliError::Config("stride must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(CliError::Config("alpha must be finite".into()));
        }
        Ok(())
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("documents always serialize");
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

// ---------------------------------------------------------------------------
// report

/// One pass/fail judgement with the tolerance it was made at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub tol: f64,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub success: bool,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realization: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_purity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    fn new(command: Command, seed: u64) -> Self {
        Self { command: command.name().into(), seed, success: true, ..Self::default() }
    }

    fn verdict(&mut self, name: &str, passed: bool, tol: f64, detail: Value) {
        if !passed {
            log::warn!("verdict {name} failed: {detail}");
        }
        self.success &= passed;
        self.verdicts.push(Verdict { name: name.into(), passed, tol, detail });
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }
}

struct Clock {
    enabled: bool,
    start: Instant,
    laps: BTreeMap<String, f64>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Self { enabled, start: Instant::now(), laps: BTreeMap::new() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.laps.insert(name.into(), (now - self.start).as_secs_f64() * 1e3);
        self.start = now;
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.laps)
    }
}

// ---------------------------------------------------------------------------
// serialization helpers

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn certificate_json(cert: &MembershipCertificate) -> Value {
    json!({
        "ell": cert.ell + 1,
        "zbar": c2(cert.zbar),
        "decoupled_modes": cert.decoupled_modes.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "unique": cert.decoupled_modes.len() == 1,
        "spectrum": cert.spectrum.iter().map(|&z| c2(z)).collect::<Vec<_>>(),
    })
}

pub fn realization_json(real: &SystemRealization) -> Value {
    json!({
        "n_modes": real.n_modes,
        "reservoir_mode": real.ell + 1,
        "R": MatrixDoc::from_rmat(&real.r),
        "Gamma": MatrixDoc::from_rmat(&real.gamma),
        "P": ComplexMatrixDoc::from_cmat(&real.p),
        "G": MatrixDoc::from_rmat(&real.g),
        "C": ComplexMatrixDoc::from_cmat(&real.c),
        "gains": GainsDoc::from_gains(&real.gains),
        "krylov_rank": real.controllability.rank,
        "pbh_min_singular_value": real.controllability.pbh_min_sv,
    })
}

pub fn entanglement_json(map: &EntanglementMap, threshold: f64) -> Value {
    let n = map.n_modes;
    let pairs: Vec<Value> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .map(|(j, k)| json!({"modes": [j + 1, k + 1], "value": map.value(j, k)}))
        .collect();
    let entangled = map.entangled_pairs(threshold);
    let isolated: Vec<usize> = (0..n).filter(|&j| map.row_max(j) <= threshold).map(|j| j + 1).collect();
    json!({
        "threshold": threshold,
        "pairs": pairs,
        "summary": {
            "entangled_pairs": entangled.iter().map(|&(j, k, _)| [j + 1, k + 1]).collect::<Vec<_>>(),
            "entangled_count": entangled.len(),
            "unentangled_modes": isolated,
        },
    })
}

/// DOT graph of the coupling pattern: an edge `j -- k` for every
/// `|R_jk| > tol`, plus a reservoir node on mode `ell` (0-based).
pub fn topology_dot(r: &RMat, ell: usize, tol: f64) -> String {
    let n = r.nrows();
    let mut out = String::from("graph topology {\n    node [shape=circle];\n");
    for j in 0..n {
        let _ = writeln!(out, "    {};", j + 1);
    }
    for j in 0..n {
        for k in j + 1..n {
            if r[(j, k)].abs() > tol {
                let _ = writeln!(out, "    {} -- {};", j + 1, k + 1);
            }
        }
    }
    out.push_str("    reservoir [shape=box];\n");
    let _ = writeln!(out, "    reservoir -- {} [style=dashed];", ell + 1);
    out.push_str("}\n");
    out
}

pub fn emit_topology(real: &SystemRealization, tol: f64) -> String {
    topology_dot(&real.r, real.ell, tol)
}

/// Writes `t, distance, purity` rows, optionally followed by the covariance
/// entries in row-major order.
pub fn write_trajectory_csv<W: Write>(traj: &TrajectoryRecord, with_covariance: bool, out: &mut W) -> std::io::Result<()> {
    let dim = traj.covariances.first().map_or(0, |v| v.matrix().nrows());
    let mut header = String::from("t,distance,purity");
    if with_covariance {
        for a in 0..dim {
            for b in 0..dim {
                let _ = write!(header, ",v_{}_{}", a + 1, b + 1);
            }
        }
    }
    writeln!(out, "{header}")?;
    let purities = traj.purities();
    for (i, (t, v)) in traj.times.iter().zip(&traj.covariances).enumerate() {
        let d = traj.distances_to_target.as_ref().map_or(f64::NAN, |d| d[i]);
        let mut line = format!("{t},{d},{}", purities[i]);
        if with_covariance {
            for a in 0..dim {
                for b in 0..dim {
                    let _ = write!(line, ",{}", v.matrix()[(a, b)]);
                }
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// workflows

/// Runs one job, writes its side-effect files and returns the report.
/// Verdict failures are reported through [`Report::success`]; errors are
/// configuration, I/O or module failures.
pub fn run(config: &JobConfig) -> Result<Report, CliError> {
    config.validate()?;
    let command = config.command.ok_or_else(|| CliError::Config("no command given".into()))?;
    log::info!("running {}", command.name());
    let mut clock = Clock::new(config.timings);
    let mut report = Report::new(command, config.seed);
    match command {
        Command::FamilyBuild => family_build(config, &mut report, &mut clock)?,
        Command::Check => check(config, &mut report, &mut clock)?,
        Command::Synthesize => {
            synthesize_job(config, &mut report, &mut clock)?;
        }
        Command::Simulate => simulate(config, &mut report, &mut clock)?,
        Command::Analyze => analyze(config, &mut report, &mut clock)?,
        Command::Demo => demo(config, &mut report, &mut clock)?,
    }
    report.timings_ms = clock.finish();
    if let Some(path) = &config.out_report {
        write_json(path, &report)?;
    }
    Ok(report)
}

fn rng_for(config: &JobConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

/// The family parameters named by the config, if any.
fn configured_params(config: &JobConfig) -> Result<Option<FamilyParams>, CliError> {
    if let Some(doc) = &config.family {
        return Ok(Some(doc.to_params()?));
    }
    if config.input.is_none() {
        if let Some(n) = config.n_modes {
            if n == 0 {
                return Err(CliError::Config("n_modes must be positive".into()));
            }
            return Ok(Some(FamilyParams::random(n, &mut rng_for(config))));
        }
    }
    Ok(None)
}

fn load_state(config: &JobConfig) -> Result<Option<StateDoc>, CliError> {
    config.input.as_deref().map(read_json).transpose()
}

/// Graph matrix from `input`, else from the configured family.
fn load_graph(config: &JobConfig) -> Result<(GraphMatrix, Option<FamilyParams>), CliError> {
    match load_state(config)? {
        Some(StateDoc::Graph(doc)) => Ok((doc.to_graph()?, config.family.as_ref().map(|f| f.to_params()).transpose()?)),
        Some(StateDoc::Covariance(_)) => Err(CliError::Config("this command needs a graph file, not a covariance".into())),
        None => match configured_params(config)? {
            Some(p) => Ok((build_graph(&p)?, Some(p))),
            None => Err(CliError::Config("give an input graph file, a family or n_modes".into())),
        },
    }
}

fn family_build(config: &JobConfig, report: &mut Report, clock: &mut Clock) -> Result<(), CliError> {
    let params = configured_params(config)?
        .ok_or_else(|| CliError::Config("family-build needs a family section or n_modes".into()))?;
    let z = build_graph(&params)?;
    clock.lap("build");
    let tol = config.tol.membership;
    let cert = state_family::certify_mode(&z, params.ell(), tol);
    let detail = match &cert {
        Ok(c) => json!({"zbar_error": (c.zbar - params.zbar).norm()}),
        Err(r) => json!({"code": r.code(), "message": r.to_string()}),
    };
    let recovered = cert.as_ref().is_ok_and(|c| (c.zbar - params.zbar).norm() <= tol * params.zbar.norm().max(1.0));
    report.verdict("membership", recovered, tol, detail);
    report.family = Some(FamilyDoc::from_params(&params));
    if let Ok(c) = &cert {
        report.certificate = Some(certificate_json(c));
    }
    if let Some(path) = &config.out_graph {
        write_json(path, &GraphDoc::from_graph(&z))?;
    }
    clock.lap("check");
    Ok(())
}

fn check(config: &JobConfig, report: &mut Report, clock: &mut Clock) -> Result<(), CliError> {
    let (z, _) = load_graph(config)?;
    let tol = config.tol.membership;
    match state_family::membership(&z, tol) {
        Ok(cert) => {
            report.verdict("membership", true, tol, json!({"reservoir_mode": cert.ell + 1}));
            report.family = cert.family_params().ok().map(|p| FamilyDoc::from_params(&p));
            report.certificate = Some(certificate_json(&cert));
        }
        Err(rej) => {
            report.verdict("membership", false, tol, json!({"code": rej.code(), "message": rej.to_string()}));
        }
    }
    clock.lap("membership");
    Ok(())
}

/// Certifies (unless a family is configured), synthesizes and records the
/// structural verdicts. Returns `None` when membership fails.
fn synthesize_job(
    config: &JobConfig,
    report: &mut Report,
    clock: &mut Clock,
) -> Result<Option<(GraphMatrix, SystemRealization, DriftDiffusion)>, CliError> {
    let (z, params) = load_graph(config)?;
    let tol = config.tol;
    let params = match params {
        Some(p) => p,
        None => match state_family::membership(&z, tol.membership) {
            Ok(cert) => {
                report.certificate = Some(certificate_json(&cert));
                report.verdict("membership", true, tol.membership, json!({"reservoir_mode": cert.ell + 1}));
                cert.family_params()?
            }
            Err(rej) => {
                report.verdict("membership", false, tol.membership, json!({"code": rej.code(), "message": rej.to_string()}));
                return Ok(None);
            }
        },
    };
    clock.lap("membership");
    let gains = config.gains.as_ref().map_or_else(|| Gains::default_for(z.n_modes()), GainsDoc::to_gains);
    let real = synthesize_with_params(&z, &params, &gains, tol.synthesis)?;
    clock.lap("synthesis");
    report.family = Some(FamilyDoc::from_params(&params));
    structural_verdicts(report, &real, &tol);
    let dd = DriftDiffusion::assemble(&real.g, &real.c)?;
    report.verdict(
        "stability",
        dynamics::is_strictly_stable(&dd, tol.stability_margin),
        tol.stability_margin,
        json!({"spectral_abscissa": dd.spectral_abscissa}),
    );
    report.realization = Some(realization_json(&real));
    if let Some(path) = &config.out_dot {
        write_text(path, &emit_topology(&real, tol.synthesis))?;
    }
    Ok(Some((z, real, dd)))
}

fn structural_verdicts(report: &mut Report, real: &SystemRealization, tol: &Tolerances) {
    let scale = linalg::max_abs(&real.r).max(1.0);
    report.verdict("passivity", synthesis::is_passive(&real.g, tol.synthesis * scale), tol.synthesis, json!({}));
    let local = synthesis::is_local_single(&real.c, tol.synthesis);
    report.verdict(
        "locality",
        local == Some(real.ell),
        tol.synthesis,
        json!({"reservoir_mode": local.map(|k| k + 1)}),
    );
    report.verdict(
        "controllability",
        real.controllability.controllable,
        tol.controllability,
        json!({
            "krylov_rank": real.controllability.rank,
            "pbh_min_singular_value": real.controllability.pbh_min_sv,
            "tests_agree": real.controllability.tests.agree(),
        }),
    );
}

fn simulate(config: &JobConfig, report: &mut Report, clock: &mut Clock) -> Result<(), CliError> {
    let Some((z, _, dd)) = synthesize_job(config, report, clock)? else {
        return Ok(());
    };
    if !dd.is_strictly_stable() {
        return Ok(());
    }
    let target = cov_from_graph(&z);
    let (traj, _) = relax_to_target(config, report, clock, &dd, &target)?;
    if let Some(path) = &config.out_csv {
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, config.csv_covariance, &mut buf).expect("writing to memory");
        write_text(path, std::str::from_utf8(&buf).expect("csv is ascii"))?;
    }
    Ok(())
}

/// Lyapunov solve plus RK4 integration from the vacuum with a random mean.
/// Records the steady-state and purity verdicts and the convergence summary.
fn relax_to_target(
    config: &JobConfig,
    report: &mut Report,
    clock: &mut Clock,
    dd: &DriftDiffusion,
    target: &CovarianceMatrix,
) -> Result<(TrajectoryRecord, CovarianceMatrix), CliError> {
    let tol = config.tol;
    let v_ss = steady_state(dd)?;
    clock.lap("steady_state");
    let dist = frobenius_distance(&v_ss, target);
    report.verdict("steady_state", dist <= tol.steady_state, tol.steady_state, json!({"distance": dist}));
    let p = purity(&v_ss)?;
    report.steady_state_purity = Some(p);
    report.verdict("purity", (p - 1.0).abs() <= tol.purity, tol.purity, json!({"purity": p}));

    let n = dd.dim();
    let mut rng = rng_for(config);
    let mean0 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let t_final = config.t_final.unwrap_or(DEFAULT_HORIZON / dd.spectral_abscissa.abs());
    let dt = config.dt.unwrap_or_else(|| dd.default_dt());
    let steps = (t_final / dt).round().max(1.0) as usize;
    let stride = config.stride.unwrap_or((steps / DEFAULT_SAMPLES).max(1));
    let settings = IntegrationSettings { t_final, dt, stride };
    let traj = integrate(dd, &CovarianceMatrix::vacuum(n / 2), &mean0, settings, Some(target))?;
    clock.lap("integrate");
    let summary = convergence_report(&traj)?;
    report.final_distance = Some(summary.final_distance);
    report.convergence = Some(json!({
        "t_final": t_final,
        "dt": dt,
        "steps": steps,
        "final_distance": summary.final_distance,
        "final_mean_norm": traj.final_mean().norm(),
        "ode_vs_lyapunov": frobenius_distance(traj.final_covariance(), &v_ss),
        "time_to_threshold": summary
            .time_to_threshold
            .iter()
            .map(|(thr, t)| json!({"threshold": thr, "time": t}))
            .collect::<Vec<_>>(),
        "fitted_rate": summary.fitted_rate,
    }));
    Ok((traj, v_ss))
}

fn analyze(config: &JobConfig, report: &mut Report, clock: &mut Clock) -> Result<(), CliError> {
    let v = match load_state(config)? {
        Some(StateDoc::Graph(doc)) => cov_from_graph(&doc.to_graph()?),
        Some(StateDoc::Covariance(doc)) => doc.to_covariance()?,
        None => match configured_params(config)? {
            Some(p) => cov_from_graph(&build_graph(&p)?),
            None => return Err(CliError::Config("give an input file, a family or n_modes".into())),
        },
    };
    let tol = config.tol;
    let p = purity(&v).ok();
    report.steady_state_purity = p;
    let nu = analysis::symplectic_eigenvalues(&v)[0];
    let physical = nu >= 0.5 * (1.0 - tol.physicality);
    report.verdict("physical", physical, tol.physicality, json!({"min_symplectic_eigenvalue": nu}));
    if physical && v.n_modes() >= 2 {
        let map = entanglement_map(&v, tol.physicality)?;
        report.entanglement = Some(entanglement_json(&map, tol.entanglement));
    }
    clock.lap("analyze");
    Ok(())
}

/// Five-mode chain pipeline with every published value checked.
fn demo(config: &JobConfig, report: &mut Report, clock: &mut Clock) -> Result<(), CliError> {
    let alpha = config.alpha;
    let tol = config.tol;
    let (params, gains) = five_mode_chain(alpha);
    let z = build_graph(&params)?;
    clock.lap("build");

    let cert = state_family::membership(&z, tol.membership);
    let cert_ok = cert.as_ref().is_ok_and(|c| c.ell == 2);
    report.verdict(
        "membership",
        cert_ok,
        tol.membership,
        json!({"reservoir_mode": cert.as_ref().ok().map(|c| c.ell + 1)}),
    );
    if let Ok(c) = &cert {
        report.certificate = Some(certificate_json(c));
    }

    let real = synthesize_with_params(&z, &params, &gains, tol.synthesis)?;
    clock.lap("synthesis");
    report.family = Some(FamilyDoc::from_params(&params));
    #[rustfmt::skip]
    let expected_r = RMat::from_row_slice(5, 5, &[
        -1.0, 2.0, 0.0, 0.0, 0.0,
        2.0, -1.0, 2.0, 0.0, 0.0,
        0.0, 2.0, 0.0, 2.0, 0.0,
        0.0, 0.0, 2.0, 1.0, 2.0,
        0.0, 0.0, 0.0, 2.0, 1.0,
    ]);
    const EXACT: f64 = 1e-12;
    let r_err = linalg::max_abs(&(&real.r - &expected_r));
    report.verdict("chain_hamiltonian", r_err <= EXACT, EXACT, json!({"max_error": r_err}));
    let gamma_err = linalg::max_abs(&real.gamma);
    report.verdict("gamma_zero", gamma_err <= EXACT, EXACT, json!({"max_error": gamma_err}));
    structural_verdicts(report, &real, &tol);
    let (ch, sh) = (alpha.cosh(), alpha.sinh());
    let c_err = coupling_error(&real.c, 2, ch, sh);
    report.verdict("coupling_operator", c_err <= EXACT, EXACT, json!({"max_error": c_err}));
    report.verdict(
        "krylov_rank",
        real.controllability.rank == 5,
        tol.controllability,
        json!({"rank": real.controllability.rank}),
    );

    let dd = DriftDiffusion::assemble(&real.g, &real.c)?;
    let stable = dynamics::is_strictly_stable(&dd, tol.stability_margin);
    report.verdict("stability", stable, tol.stability_margin, json!({"spectral_abscissa": dd.spectral_abscissa}));
    report.realization = Some(realization_json(&real));
    if let Some(path) = &config.out_dot {
        write_text(path, &emit_topology(&real, tol.synthesis))?;
    }
    if !stable {
        return Ok(());
    }

    let target = cov_from_graph(&z);
    let (traj, v_ss) = relax_to_target(config, report, clock, &dd, &target)?;
    const CONVERGED: f64 = 1e-6;
    let final_distance = report.final_distance.unwrap_or(f64::INFINITY);
    report.verdict("convergence", final_distance <= CONVERGED, CONVERGED, json!({"final_distance": final_distance}));
    let mean_norm = traj.final_mean().norm();
    report.verdict("mean_decay", mean_norm <= CONVERGED, CONVERGED, json!({"final_mean_norm": mean_norm}));

    let map = entanglement_map(&v_ss, tol.physicality)?;
    clock.lap("entanglement");
    let expected = 2.0 * alpha.abs();
    const E_TOL: f64 = 1e-9;
    let e15 = map.value(0, 4);
    let e24 = map.value(1, 3);
    let others = (0..5)
        .flat_map(|j| (j + 1..5).map(move |k| (j, k)))
        .filter(|p| *p != (0, 4) && *p != (1, 3))
        .map(|(j, k)| map.value(j, k))
        .fold(0.0, f64::max);
    report.verdict(
        "entanglement_pairs",
        (e15 - expected).abs() <= E_TOL && (e24 - expected).abs() <= E_TOL,
        E_TOL,
        json!({"E_1_5": e15, "E_2_4": e24, "expected": expected}),
    );
    report.verdict("entanglement_others", others < E_TOL, E_TOL, json!({"max_other": others}));
    report.entanglement = Some(entanglement_json(&map, tol.entanglement));

    if let Some(path) = &config.out_csv {
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, config.csv_covariance, &mut buf).expect("writing to memory");
        write_text(path, std::str::from_utf8(&buf).expect("csv is ascii"))?;
    }
    Ok(())
}

/// Distance of the single coupling row from a unit multiple of
/// `cosh(α)a + sinh(α)a*` on mode `ell`, with `a = (q + ip)/√2`.
pub fn coupling_error(c: &CMat, ell: usize, cosh: f64, sinh: f64) -> f64 {
    let n = c.ncols() / 2;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut expected = CMat::zeros(1, 2 * n);
    expected[(0, ell)] = Complex64::new((cosh + sinh) * h, 0.0);
    expected[(0, ell + n)] = Complex64::new(0.0, (cosh - sinh) * h);
    let phase = c[(0, ell)] / expected[(0, ell)];
    let phase = phase / phase.norm();
    linalg::cmax_abs(&(c - expected * phase))
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "gaussprep", version, about = "Prepare pure Gaussian states with one local reservoir")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Build a family member's graph matrix.
    FamilyBuild(CommonArgs),
    /// Decide family membership of a graph matrix.
    Check(CommonArgs),
    /// Synthesize a passive, single-reservoir realization.
    Synthesize(CommonArgs),
    /// Synthesize, solve the steady state and integrate the dynamics.
    Simulate(CommonArgs),
    /// Purity and pairwise entanglement of a state.
    Analyze(CommonArgs),
    /// Five-mode chain pipeline, checked against its known values.
    Demo {
        #[command(flatten)]
        common: CommonArgs,
        /// Squeezing parameter.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON job config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph or covariance file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Random family member of this size when no input or family is given.
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Samples between recorded trajectory points.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Membership tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
    #[arg(long)]
    pub out_graph: Option<PathBuf>,
    /// Add flattened covariance columns to the CSV.
    #[arg(long)]
    pub csv_covariance: bool,
    /// Record wall-clock timings in the report.
    #[arg(long)]
    pub timings: bool,
}

impl Cli {
    /// Merges the config file (if any) with the flags.
    pub fn into_config(self) -> Result<JobConfig, CliError> {
        let (command, args, alpha) = match self.command {
            CliCommand::FamilyBuild(a) => (Command::FamilyBuild, a, None),
            CliCommand::Check(a) => (Command::Check, a, None),
            CliCommand::Synthesize(a) => (Command::Synthesize, a, None),
            CliCommand::Simulate(a) => (Command::Simulate, a, None),
            CliCommand::Analyze(a) => (Command::Analyze, a, None),
            CliCommand::Demo { common, alpha } => (Command::Demo, common, alpha),
        };
        let mut cfg = match &args.config {
            Some(path) => JobConfig::load(path)?,
            None => JobConfig::default(),
        };
        cfg.command = Some(command);
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = Some(v); })* };
        }
        set!(input, n_modes, t_final, dt, stride, out_report, out_csv, out_dot, out_graph);
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(tol) = args.tol {
            cfg.tol.membership = tol;
        }
        if let Some(alpha) = alpha {
            cfg.alpha = alpha;
        }
        cfg.csv_covariance |= args.csv_covariance;
        cfg.timings |= args.timings;
        Ok(cfg)
    }
}

/// Entry point of the binary. Returns the process exit code: 0 when every
/// verdict passed, 1 when one failed, 2 on an error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = cli.into_config().and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match outcome {
        Ok((cfg, report)) => {
            if cfg.out_report.is_none() {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            for v in report.failures() {
                eprintln!("FAILED {}: {} (tol {:e})", v.name, v.detail, v.tol);
            }
            if report.success {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
