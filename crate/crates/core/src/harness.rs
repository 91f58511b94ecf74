//! Experiment configuration, deterministic seeding, task orchestration and
//! result files.
//!
//! A run expands the parameter grid into tasks numbered in grid order
//! (`N`, then `k`, then `ε`, then `β`), evaluates them in parallel, and
//! emits rows in task order. Task `i` uses the seed `derive_seed(seed, i)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::events::{EventContext, EventKind};
use crate::geometry::{eta, Geometry};
use crate::ising::{ModelParams, RateFamily, BETA_C};
use crate::spectral::{self, GeneratorMatrix, McConfig, StartState, MATRIX_FREE_CAP};
use crate::tension::{self, DirectionalTension};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// `splitmix64(master + ordinal * 0x9e3779b97f4a7c15)`. For a fixed master
/// the map is injective in `ordinal`: the affine step is a bijection mod
/// `2^64` (odd multiplier) and so is the finalizer.
pub fn derive_seed(master: u64, ordinal: u64) -> u64 {
    let mut z = master.wrapping_add(ordinal.wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Build identifier stamped on rows; `CORNERGAP_BUILD_ID` at compile time overrides it.
pub fn build_id() -> String {
    option_env!("CORNERGAP_BUILD_ID")
        .map(str::to_string)
        .unwrap_or_else(|| format!("cornergap-{}", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExactGapScan,
    BoundScan,
    SwSample,
    Tension,
    CrossoverDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ExactGapScan => "exact-gap-scan",
            ExperimentKind::BoundScan => "bound-scan",
            ExperimentKind::SwSample => "sw-sample",
            ExperimentKind::Tension => "tension",
            ExperimentKind::CrossoverDemo => "crossover-demo",
        }
    }
}

/// Parameter grids. `β` is given either directly or in units of `β_c`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Option<Vec<i64>>,
    pub k: Option<Vec<i64>>,
    pub eps: Option<Vec<i8>>,
    pub beta: Option<Vec<f64>>,
    pub beta_over_beta_c: Option<Vec<f64>>,
}

/// Chain schedule; `sweeps` counts every sweep including burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub sweeps: u64,
    pub burn_in: u64,
    #[serde(default = "one")]
    pub thin: u64,
    #[serde(default = "twenty")]
    pub batches: usize,
    #[serde(default)]
    pub start: StartState,
}

fn one() -> u64 {
    1
}

fn twenty() -> usize {
    20
}

impl ChainConfig {
    pub fn mc(&self, seed: u64) -> McConfig {
        McConfig {
            burn_in: self.burn_in,
            samples: (self.sweeps - self.burn_in) / self.thin,
            thin: self.thin,
            batches: self.batches,
            seed,
            start: self.start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensionConfig {
    /// Half-width of the wired box.
    pub m: i64,
    pub ladder_e1: Vec<u32>,
    pub ladder_diag: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Output directory for `results.csv`, `results.json` and extras.
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub family: RateFamily,
    pub chain: Option<ChainConfig>,
    pub tension: Option<TensionConfig>,
    /// Registry event names sampled by `sw-sample` (default `D`, `dinD`).
    pub events: Option<Vec<String>>,
    /// Rate bound in the indicator bound (default 1).
    pub c0: Option<f64>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn required<'a, T>(v: &'a Option<Vec<T>>, name: &str) -> Result<&'a [T]> {
    match v {
        Some(v) if !v.is_empty() => Ok(v),
        Some(_) => Err(cfg_err(format!("grid.{name} is empty"))),
        None => Err(cfg_err(format!("grid.{name} is required"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        let b = match (&self.grid.beta, &self.grid.beta_over_beta_c) {
            (Some(_), Some(_)) => return Err(cfg_err("give grid.beta or grid.beta_over_beta_c, not both")),
            (Some(_), None) => required(&self.grid.beta, "beta")?.to_vec(),
            (None, Some(_)) => required(&self.grid.beta_over_beta_c, "beta_over_beta_c")?
                .iter()
                .map(|r| r * BETA_C)
                .collect(),
            (None, None) => return Err(cfg_err("grid.beta (or grid.beta_over_beta_c) is required")),
        };
        for &x in &b {
            ModelParams::new(x)?;
        }
        Ok(b)
    }

    fn needs_box_grid(&self) -> bool {
        !matches!(self.kind, ExperimentKind::Tension)
    }

    pub fn validate(&self) -> Result<()> {
        self.betas()?;
        if self.needs_box_grid() {
            required(&self.grid.n, "n")?;
            required(&self.grid.k, "k")?;
            let eps = required(&self.grid.eps, "eps")?;
            if let Some(e) = eps.iter().find(|&&e| e != 0 && e != -1) {
                return Err(cfg_err(format!("grid.eps entries must be 0 or -1, got {e}")));
            }
        }
        let needs_chain = matches!(
            self.kind,
            ExperimentKind::SwSample | ExperimentKind::Tension | ExperimentKind::CrossoverDemo
        );
        if needs_chain {
            let c = self.chain.ok_or_else(|| cfg_err(format!("[chain] is required for {}", self.kind.name())))?;
            if c.burn_in >= c.sweeps {
                return Err(cfg_err("chain.burn_in must be smaller than chain.sweeps"));
            }
            if c.thin == 0 {
                return Err(cfg_err("chain.thin must be at least 1"));
            }
        }
        if matches!(self.kind, ExperimentKind::Tension | ExperimentKind::CrossoverDemo) {
            let t = self
                .tension
                .as_ref()
                .ok_or_else(|| cfg_err(format!("[tension] is required for {}", self.kind.name())))?;
            if t.ladder_e1.is_empty() || t.ladder_diag.is_empty() {
                return Err(cfg_err("tension ladders must be nonempty"));
            }
        }
        for name in self.events.iter().flatten() {
            name.parse::<EventKind>()?;
        }
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(cfg_err(format!("c0 must be positive, got {c0}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Skipped,
    Error,
}

/// One self-describing output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ordinal: usize,
    pub kind: String,
    pub stage: String,
    #[serde(rename = "N")]
    pub n: Option<i64>,
    pub k: Option<i64>,
    pub eps: Option<i8>,
    pub beta: f64,
    pub beta_over_beta_c: f64,
    pub family: String,
    pub seed: u64,
    pub status: RowStatus,
    pub reason: String,
    pub outputs: BTreeMap<String, Value>,
    pub build: String,
}

#[derive(Debug, Clone, Copy)]
struct Task {
    ordinal: usize,
    stage: Stage,
    n: Option<i64>,
    k: Option<i64>,
    eps: Option<i8>,
    beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Main,
    Tension,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub build: String,
    pub rows: Vec<ResultRow>,
    pub tensions: Vec<DirectionalTension>,
    pub summaries: Vec<Value>,
}

impl ExperimentOutput {
    pub fn n_errors(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Error).count()
    }

    pub fn n_skipped(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Skipped).count()
    }

    /// Output columns in first-appearance order.
    fn output_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for r in &self.rows {
            for k in r.outputs.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let cols = self.output_columns();
        let mut header: Vec<String> = [
            "ordinal", "kind", "stage", "N", "k", "eps", "beta", "beta_over_beta_c", "family", "seed",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(cols.iter().cloned());
        header.extend(["status", "reason", "build"].iter().map(|s| s.to_string()));
        w.write_record(&header).map_err(io)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.ordinal.to_string(),
                r.kind.clone(),
                r.stage.clone(),
                opt(r.n.map(|v| v.to_string())),
                opt(r.k.map(|v| v.to_string())),
                opt(r.eps.map(|v| v.to_string())),
                r.beta.to_string(),
                r.beta_over_beta_c.to_string(),
                r.family.clone(),
                r.seed.to_string(),
            ];
            for c in &cols {
                rec.push(match r.outputs.get(c) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                });
            }
            rec.push(
                match r.status {
                    RowStatus::Ok => "ok",
                    RowStatus::Skipped => "skipped",
                    RowStatus::Error => "error",
                }
                .to_string(),
            );
            rec.push(r.reason.clone());
            rec.push(r.build.clone());
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `results.csv`, `results.json`, and `tension_ladder.csv` when tensions were estimated.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join("results.csv");
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        written.push(csv_path);
        let json_path = dir.join("results.json");
        self.write_json(std::fs::File::create(&json_path)?)?;
        written.push(json_path);
        if !self.tensions.is_empty() {
            let p = dir.join("tension_ladder.csv");
            tension::write_tension_csv(std::fs::File::create(&p)?, &self.tensions)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn grid_tasks(cfg: &ExperimentConfig, betas: &[f64], first: usize) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for &n in required(&cfg.grid.n, "n")? {
        for &k in required(&cfg.grid.k, "k")? {
            for &e in required(&cfg.grid.eps, "eps")? {
                for &b in betas {
                    tasks.push(Task {
                        ordinal: first + tasks.len(),
                        stage: Stage::Main,
                        n: Some(n),
                        k: Some(k),
                        eps: Some(e),
                        beta: b,
                    });
                }
            }
        }
    }
    Ok(tasks)
}

enum Outcome {
    Done(BTreeMap<String, Value>),
    Skip(String),
}

type TaskResult = Result<(Outcome, Vec<DirectionalTension>)>;

fn f(v: f64) -> Value {
    json!(v)
}

/// Box geometry, boundary and feasibility for a grid task.
fn box_setup(task: &Task) -> Result<std::result::Result<(Geometry, crate::geometry::BoundarySpec), String>> {
    let (n, k, e) = (task.n.unwrap(), task.k.unwrap(), task.eps.unwrap());
    if n < 1 {
        return Err(Error::InvalidBoxSize(n));
    }
    if k < 1 || k > n {
        return Ok(Err(format!("k={k} outside [1, N={n}]")));
    }
    let g = Geometry::build_box(n)?;
    let b = eta(&g, k, e)?;
    Ok(Ok((g, b)))
}

fn exact_task(cfg: &ExperimentConfig, task: &Task, with_bound: bool) -> TaskResult {
    let (g, b) = match box_setup(task)? {
        Ok(v) => v,
        Err(reason) => return Ok((Outcome::Skip(reason), vec![])),
    };
    if g.n_sites() > MATRIX_FREE_CAP {
        return Ok((
            Outcome::Skip(format!(
                "|Λ|={} exceeds the enumeration cap of {MATRIX_FREE_CAP} sites",
                g.n_sites()
            )),
            vec![],
        ));
    }
    let params = ModelParams::new(task.beta)?;
    let gen = GeneratorMatrix::build(&g, &b, params, cfg.family)?;
    let gap = spectral::exact_gap(&gen)?;
    let mut out = BTreeMap::new();
    out.insert("gap".into(), f(gap.gap));
    out.insert("solver".into(), json!(gap.solver.name()));
    out.insert("residual".into(), f(gap.residual));
    out.insert("dim".into(), json!(gap.dim));
    if with_bound {
        let ctx = EventContext::new(&g, task.k.unwrap())?;
        let mask = gen.indicator(|s| ctx.in_d(s, &b).expect("geometry fixed by context"));
        let c0 = cfg.c0.unwrap_or(1.0);
        match spectral::indicator_bound(&gen, &mask, c0) {
            Ok(ib) => {
                let f1: Vec<f64> = mask.iter().map(|&m| m as u8 as f64).collect();
                let ray = spectral::rayleigh_bound(&gen, &f1)?;
                out.insert("mu_D".into(), f(ib.mu_s));
                out.insert("mu_inner_D".into(), f(ib.mu_inner));
                out.insert("inner_ratio".into(), f(ib.mu_inner / ib.mu_s));
                out.insert("rayleigh_D".into(), f(ray));
                out.insert("indicator_bound".into(), f(ib.value));
                out.insert("c0".into(), f(c0));
                out.insert("dominates".into(), json!(ib.value >= gap.gap - 1e-8 && ray >= gap.gap - 1e-8));
            }
            Err(Error::DegenerateEvent(p)) => {
                out.insert("mu_D".into(), f(p));
                return Ok((Outcome::Skip(format!("event D is degenerate (μ(D) = {p})")), vec![]));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((Outcome::Done(out), vec![]))
}

fn sample_task(cfg: &ExperimentConfig, task: &Task, seed: u64, events: &[EventKind]) -> TaskResult {
    let (g, b) = match box_setup(task)? {
        Ok(v) => v,
        Err(reason) => return Ok((Outcome::Skip(reason), vec![])),
    };
    let ctx = EventContext::new(&g, task.k.unwrap())?;
    let params = ModelParams::new(task.beta)?;
    let mc = cfg.chain.expect("validated").mc(seed);
    let est = spectral::mc_registry_probabilities(&ctx, &b, params, events, &mc)?;
    let mut out = BTreeMap::new();
    for (e, x) in events.iter().zip(&est) {
        let name = e.name();
        out.insert(format!("p_{name}"), f(x.mean));
        out.insert(format!("se_{name}"), f(x.stderr));
        out.insert(format!("ub_{name}"), x.upper_bound.map_or(Value::Null, f));
        out.insert(format!("autocorr_{name}"), f(x.batch_autocorr));
    }
    out.insert("samples".into(), json!(mc.samples));
    let pos = |k: EventKind| events.iter().position(|&e| e == k);
    if let (Some(i), Some(j)) = (pos(EventKind::D), pos(EventKind::InnerD)) {
        let c0 = cfg.c0.unwrap_or(1.0);
        match spectral::indicator_bound_from_estimates(&est[i], &est[j], g.n_sites(), c0) {
            Ok(bd) => {
                out.insert("bound".into(), bd.value.map_or(Value::Null, f));
                out.insert("bound_se".into(), if bd.stderr.is_finite() { f(bd.stderr) } else { Value::Null });
                out.insert("bound_ub".into(), bd.upper_bound.map_or(Value::Null, f));
            }
            Err(Error::DegenerateEvent(_)) => {
                out.insert("bound".into(), Value::Null);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((Outcome::Done(out), vec![]))
}

fn tension_task(cfg: &ExperimentConfig, task: &Task, seed: u64) -> TaskResult {
    let t = cfg.tension.as_ref().expect("validated");
    let params = ModelParams::new(task.beta)?;
    let mc = cfg.chain.expect("validated").mc(seed);
    let dirs = [((1, 0), t.ladder_e1.clone()), ((1, 1), t.ladder_diag.clone())];
    let res = tension::estimate_taus(params, &dirs, t.m, &mc)?;
    let (e1, d) = (&res[0], &res[1]);
    let eq = tension::check_equivnorm((e1.tau, e1.tau_se), (d.tau, d.tau_se))?;
    let (r1, r2) = (tension::ladder_report(e1), tension::ladder_report(d));
    let mut out = BTreeMap::new();
    out.insert("M".into(), json!(t.m));
    out.insert("tau_e1".into(), f(e1.tau));
    out.insert("tau_e1_se".into(), f(e1.tau_se));
    out.insert("tau_diag".into(), f(d.tau));
    out.insert("tau_diag_se".into(), f(d.tau_se));
    out.insert("equivnorm_ratio".into(), f(eq.ratio));
    out.insert("equivnorm_ratio_se".into(), f(eq.ratio_se));
    out.insert("equivnorm_ok".into(), json!(eq.within_norm_bracket));
    out.insert("ladder_ok".into(), json!(r1.all() && r2.all()));
    Ok((Outcome::Done(out), res))
}

fn row(cfg: &ExperimentConfig, task: &Task, seed: u64, res: TaskResult) -> (ResultRow, Vec<DirectionalTension>) {
    let (status, reason, outputs, tens) = match res {
        Ok((Outcome::Done(o), t)) => (RowStatus::Ok, String::new(), o, t),
        Ok((Outcome::Skip(r), t)) => (RowStatus::Skipped, r, BTreeMap::new(), t),
        Err(e) => (RowStatus::Error, e.to_string(), BTreeMap::new(), vec![]),
    };
    (
        ResultRow {
            ordinal: task.ordinal,
            kind: cfg.kind.name().into(),
            stage: match task.stage {
                Stage::Main => "main".into(),
                Stage::Tension => "tension".into(),
            },
            n: task.n,
            k: task.k,
            eps: task.eps,
            beta: task.beta,
            beta_over_beta_c: task.beta / BETA_C,
            family: cfg.family.name().into(),
            seed,
            status,
            reason,
            outputs,
            build: build_id(),
        },
        tens,
    )
}

fn run_tasks(
    cfg: &ExperimentConfig,
    tasks: &[Task],
    f: impl Fn(&Task, u64) -> TaskResult + Sync,
) -> Vec<(ResultRow, Vec<DirectionalTension>)> {
    tasks
        .par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.seed, t.ordinal as u64);
            row(cfg, t, seed, f(t, seed))
        })
        .collect()
}

fn mean_of(row: &ResultRow, key: &str) -> Option<f64> {
    row.outputs.get(key).and_then(Value::as_f64)
}

/// Crossover summary for one `(N, ε, β)` group of rows sorted by `k`.
fn crossover_summary(n: i64, eps: i8, beta: f64, rows: &[&ResultRow], tension_row: Option<&ResultRow>) -> Value {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.k? as f64, mean_of(r, "p_D")?)))
        .collect();
    let nondecreasing = pts.windows(2).all(|w| w[1].1 >= w[0].1);
    let nonincreasing = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    let crossing = pts.windows(2).find_map(|w| {
        let ((k0, p0), (k1, p1)) = (w[0], w[1]);
        ((p0 - 0.5) * (p1 - 0.5) <= 0.0 && p0 != p1).then(|| k0 + (0.5 - p0) * (k1 - k0) / (p1 - p0))
    });
    let kstar = tension_row.and_then(|t| {
        let t1 = (mean_of(t, "tau_e1")?, mean_of(t, "tau_e1_se")?);
        let t2 = (mean_of(t, "tau_diag")?, mean_of(t, "tau_diag_se")?);
        tension::crossover_k_estimate(n as f64, t1, t2).ok()
    });
    let within = match (crossing, kstar) {
        (Some(c), Some((k, _))) => Some((c - k).abs() <= 4.0),
        _ => None,
    };
    json!({
        "N": n,
        "eps": eps,
        "beta": beta,
        "beta_over_beta_c": beta / BETA_C,
        "k_star": kstar.map(|k| k.0),
        "k_star_se": kstar.map(|k| k.1),
        "k_cross": crossing,
        "within_window": within,
        "monotone_nondecreasing": nondecreasing,
        "monotone_nonincreasing": nonincreasing,
        "flagged": within != Some(true) || !nondecreasing,
        "points": pts,
    })
}

/// Run a validated configuration. Task failures become `error` rows; the
/// returned error is reserved for invalid configurations.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let betas = cfg.betas()?;
    let events: Vec<EventKind> = match &cfg.events {
        Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        None => vec![EventKind::D, EventKind::InnerD],
    };
    let mut summaries = Vec::new();
    let results: Vec<(ResultRow, Vec<DirectionalTension>)> = match cfg.kind {
        ExperimentKind::ExactGapScan => run_tasks(cfg, &grid_tasks(cfg, &betas, 0)?, |t, _| exact_task(cfg, t, false)),
        ExperimentKind::BoundScan => run_tasks(cfg, &grid_tasks(cfg, &betas, 0)?, |t, _| exact_task(cfg, t, true)),
        ExperimentKind::SwSample => run_tasks(cfg, &grid_tasks(cfg, &betas, 0)?, |t, s| sample_task(cfg, t, s, &events)),
        ExperimentKind::Tension => {
            let tasks: Vec<Task> = betas
                .iter()
                .enumerate()
                .map(|(i, &b)| Task {
                    ordinal: i,
                    stage: Stage::Tension,
                    n: None,
                    k: None,
                    eps: None,
                    beta: b,
                })
                .collect();
            run_tasks(cfg, &tasks, |t, s| tension_task(cfg, t, s))
        }
        ExperimentKind::CrossoverDemo => {
            let mut tasks: Vec<Task> = betas
                .iter()
                .enumerate()
                .map(|(i, &b)| Task {
                    ordinal: i,
                    stage: Stage::Tension,
                    n: None,
                    k: None,
                    eps: None,
                    beta: b,
                })
                .collect();
            tasks.extend(grid_tasks(cfg, &betas, betas.len())?);
            let d_only = [EventKind::D];
            let res = run_tasks(cfg, &tasks, |t, s| match t.stage {
                Stage::Tension => tension_task(cfg, t, s),
                Stage::Main => sample_task(cfg, t, s, &d_only),
            });
            for &n in required(&cfg.grid.n, "n")? {
                for &e in required(&cfg.grid.eps, "eps")? {
                    for &b in &betas {
                        let tension_row = res
                            .iter()
                            .map(|(r, _)| r)
                            .find(|r| r.stage == "tension" && r.beta == b && r.status == RowStatus::Ok);
                        let mut group: Vec<&ResultRow> = res
                            .iter()
                            .map(|(r, _)| r)
                            .filter(|r| r.stage == "main" && r.n == Some(n) && r.eps == Some(e) && r.beta == b)
                            .filter(|r| r.status == RowStatus::Ok)
                            .collect();
                        group.sort_by_key(|r| r.k);
                        summaries.push(crossover_summary(n, e, b, &group, tension_row));
                    }
                }
            }
            res
        }
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut tensions = Vec::new();
    for (r, t) in results {
        rows.push(r);
        tensions.extend(t);
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        build: build_id(),
        rows,
        tensions,
        summaries,
    })
}
