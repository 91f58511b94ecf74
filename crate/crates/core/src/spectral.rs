//! Glauber generator on enumerable boxes, its exact spectral gap, and the
//! Rayleigh-quotient and indicator upper bounds.
//!
//! The generator is `(Af)(σ) = Σ_x c(x,σ) (f(σ^x) - f(σ))`. The gap is the
//! second-smallest eigenvalue of `S = D_μ^{1/2} (-A) D_μ^{-1/2}`, whose
//! off-diagonal entries are `-sqrt(c(x,σ) c(x,σ^x))`. The Dirichlet energy
//! `E(f) = ½ Σ_σ Σ_x μ(σ) c(x,σ) (f(σ^x) - f(σ))^2` is nonnegative.

pub mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventKind;
use crate::fk::{BondConfig, SwendsenWang};
use crate::geometry::{BoundarySpec, Geometry};
use crate::ising::{boundary_field, gibbs_table_with_cap, interior_neighbors, ModelParams, RateFamily, RateTable, SpinConfig};
use crate::stats::{BatchMeans, Estimate};

pub use lanczos::LanczosOptions;

/// Largest box handled by the matrix-free generator.
pub const MATRIX_FREE_CAP: usize = 24;
/// Largest state space solved densely under [`Solver::Auto`].
pub const DENSE_MAX_DIM: usize = 1 << 10;
/// Hard limit for an explicitly requested dense solve.
pub const DENSE_HARD_CAP: usize = 1 << 12;

/// Generator of the Glauber dynamics on `{-1,+1}^Λ`, states bit-packed by
/// site ordinal (`+1` is bit 1).
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    dim: usize,
    mu: Vec<f64>,
    sqrt_mu: Vec<f64>,
    nbrs: Vec<Vec<usize>>,
    bfield: Vec<i32>,
    rates: RateTable,
    family: RateFamily,
    params: ModelParams,
    eta: BoundarySpec,
}

impl GeneratorMatrix {
    pub fn build(geom: &Geometry, eta: &BoundarySpec, params: ModelParams, family: RateFamily) -> Result<Self> {
        let n = geom.n_sites();
        if n > MATRIX_FREE_CAP {
            return Err(Error::TooLargeForEnumeration {
                sites: n,
                cap: MATRIX_FREE_CAP,
            });
        }
        let mu = gibbs_table_with_cap(geom, eta, params, MATRIX_FREE_CAP)?;
        let sqrt_mu = mu.iter().map(|m| m.sqrt()).collect();
        Ok(GeneratorMatrix {
            n,
            dim: 1 << n,
            mu,
            sqrt_mu,
            nbrs: interior_neighbors(geom),
            bfield: boundary_field(geom, eta),
            rates: RateTable::new(params, family),
            family,
            params,
            eta: eta.clone(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gibbs weights `μ(σ)`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn family(&self) -> RateFamily {
        self.family
    }

    pub fn eta(&self) -> &BoundarySpec {
        &self.eta
    }

    /// `c(x, σ)` for the packed state `s`.
    #[inline]
    pub fn rate(&self, s: usize, x: usize) -> f64 {
        let spin = |i: usize| if s >> i & 1 == 1 { 1i32 } else { -1 };
        let field = self.bfield[x] + self.nbrs[x].iter().map(|&y| spin(y)).sum::<i32>();
        self.rates.get(spin(x) as i8, field)
    }

    /// `A(σ, σ) = -Σ_x c(x, σ)`.
    pub fn diagonal(&self, s: usize) -> f64 {
        -(0..self.n).map(|x| self.rate(s, x)).sum::<f64>()
    }

    /// Largest rate over all states and sites.
    pub fn max_rate(&self) -> f64 {
        (0..self.dim)
            .into_par_iter()
            .map(|s| (0..self.n).map(|x| self.rate(s, x)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// `out = A f`.
    pub fn apply_generator(&self, f: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(s, o)| {
            *o = (0..self.n).map(|x| self.rate(s, x) * (f[s ^ 1 << x] - f[s])).sum();
        });
    }

    /// `out = S v`.
    pub fn apply_symmetrized(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(s, o)| {
            let mut acc = 0.0;
            for x in 0..self.n {
                let t = s ^ 1 << x;
                let c = self.rate(s, x);
                acc += c * v[s] - (c * self.rate(t, x)).sqrt() * v[t];
            }
            *o = acc;
        });
    }

    /// Unit ground state `√μ` of `S`.
    pub fn ground_state(&self) -> Vec<f64> {
        self.sqrt_mu.clone()
    }

    fn check_dense(&self, cap: usize) -> Result<()> {
        if self.dim > cap {
            return Err(Error::TooLargeForEnumeration { sites: self.n, cap: cap.trailing_zeros() as usize });
        }
        Ok(())
    }

    /// Dense `A`.
    pub fn dense_generator(&self) -> Result<DMatrix<f64>> {
        self.check_dense(DENSE_HARD_CAP)?;
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for s in 0..self.dim {
            for x in 0..self.n {
                let c = self.rate(s, x);
                a[(s, s ^ 1 << x)] = c;
                a[(s, s)] -= c;
            }
        }
        Ok(a)
    }

    /// Dense `S`, assembled from the `μ^{±1/2}` scaling of `-A`.
    pub fn dense_symmetrized(&self) -> Result<DMatrix<f64>> {
        self.check_dense(DENSE_HARD_CAP)?;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for s in 0..self.dim {
            for x in 0..self.n {
                let t = s ^ 1 << x;
                let c = self.rate(s, x);
                m[(s, s)] += c;
                m[(s, t)] = -(c * self.rate(t, x)).sqrt();
            }
        }
        Ok(m)
    }

    /// Sorted eigenvalues of `-A`.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.dense_symmetrized()?);
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Membership vector of a spin predicate over all states.
    pub fn indicator(&self, pred: impl Fn(&SpinConfig) -> bool + Sync) -> Vec<bool> {
        (0..self.dim)
            .into_par_iter()
            .map(|s| pred(&SpinConfig::from_index(self.n, s as u64)))
            .collect()
    }

    /// `μ(S)`.
    pub fn probability(&self, mask: &[bool]) -> f64 {
        mask.iter().zip(&self.mu).filter(|(&m, _)| m).map(|(_, p)| p).sum()
    }

    /// `∂_in S`: states of `S` with some single flip leaving `S`.
    pub fn inner_boundary(&self, mask: &[bool]) -> Vec<bool> {
        (0..self.dim)
            .map(|s| mask[s] && (0..self.n).any(|x| !mask[s ^ 1 << x]))
            .collect()
    }

    /// `E(f)`.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        // each unordered pair is counted from both ends
        0.5 * (0..self.dim)
            .into_par_iter()
            .map(|s| {
                (0..self.n)
                    .map(|x| self.mu[s] * self.rate(s, x) * (f[s ^ 1 << x] - f[s]).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
    }

    /// `var_μ(f)`.
    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean: f64 = f.iter().zip(&self.mu).map(|(a, p)| a * p).sum();
        f.iter().zip(&self.mu).map(|(a, p)| p * (a - mean).powi(2)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Auto => "auto",
            Solver::Dense => "dense",
            Solver::Lanczos => "lanczos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub gap: f64,
    /// Solver actually used (never `Auto`).
    pub solver: Solver,
    /// `‖S v - Δ v‖` for the unit eigenvector `v`.
    pub residual: f64,
    pub dim: usize,
    pub iterations: usize,
}

/// Exact gap: dense up to [`DENSE_MAX_DIM`] states, deflated Lanczos above.
pub fn exact_gap(gen: &GeneratorMatrix) -> Result<GapResult> {
    exact_gap_with(gen, Solver::Auto, &LanczosOptions::default())
}

pub fn exact_gap_with(gen: &GeneratorMatrix, solver: Solver, opts: &LanczosOptions) -> Result<GapResult> {
    let solver = match solver {
        Solver::Auto if gen.dim() <= DENSE_MAX_DIM => Solver::Dense,
        Solver::Auto => Solver::Lanczos,
        s => s,
    };
    match solver {
        Solver::Dense => dense_gap(gen),
        _ => {
            let out = lanczos::smallest_deflated(
                |v, o| gen.apply_symmetrized(v, o),
                gen.dim(),
                &gen.sqrt_mu,
                opts,
            )?;
            Ok(GapResult {
                gap: out.value,
                solver: Solver::Lanczos,
                residual: out.residual,
                dim: gen.dim(),
                iterations: out.iterations,
            })
        }
    }
}

fn dense_gap(gen: &GeneratorMatrix) -> Result<GapResult> {
    if gen.dim() < 2 {
        return Err(Error::InvalidParameter("gap needs at least two states".into()));
    }
    let s = gen.dense_symmetrized()?;
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..gen.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let idx = order[1];
    let gap = eig.eigenvalues[idx];
    let v = eig.eigenvectors.column(idx);
    let residual = (&s * v - v * gap).norm() / v.norm();
    Ok(GapResult {
        gap,
        solver: Solver::Dense,
        residual,
        dim: gen.dim(),
        iterations: 0,
    })
}

/// `E(f) / var_μ(f)`.
pub fn rayleigh_bound(gen: &GeneratorMatrix, f: &[f64]) -> Result<f64> {
    if f.len() != gen.dim() {
        return Err(Error::GeometryMismatch {
            expected: gen.dim(),
            got: f.len(),
        });
    }
    let var = gen.variance(f);
    let scale = f.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if var <= 1e-14 * scale * scale || var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(gen.dirichlet_energy(f) / var)
}

/// Indicator bound with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorBound {
    pub value: f64,
    pub mu_s: f64,
    pub mu_inner: f64,
    pub c0: f64,
    pub n_sites: usize,
}

/// `c0 |Λ| μ(∂_in S) / (μ(S)(1 - μ(S)))` by enumeration.
pub fn indicator_bound(gen: &GeneratorMatrix, mask: &[bool], c0: f64) -> Result<IndicatorBound> {
    if mask.len() != gen.dim() {
        return Err(Error::GeometryMismatch {
            expected: gen.dim(),
            got: mask.len(),
        });
    }
    let mu_s = gen.probability(mask);
    if mu_s <= 0.0 || mu_s >= 1.0 {
        return Err(Error::DegenerateEvent(mu_s));
    }
    let mu_inner = gen.probability(&gen.inner_boundary(mask));
    Ok(IndicatorBound {
        value: c0 * gen.n_sites() as f64 * mu_inner / (mu_s * (1.0 - mu_s)),
        mu_s,
        mu_inner,
        c0,
        n_sites: gen.n_sites(),
    })
}

/// Indicator bound from Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    /// Point value; `None` when the numerator had no hits.
    pub value: Option<f64>,
    pub stderr: f64,
    /// One-sided upper bound, reported when the numerator had no hits.
    pub upper_bound: Option<f64>,
}

/// Delta-method propagation treating the two estimates as independent.
pub fn indicator_bound_from_estimates(
    mu_s: &Estimate,
    mu_inner: &Estimate,
    n_sites: usize,
    c0: f64,
) -> Result<BoundEstimate> {
    let b = mu_s.mean;
    if b <= 0.0 || b >= 1.0 {
        return Err(Error::DegenerateEvent(b));
    }
    let k = c0 * n_sites as f64 / (b * (1.0 - b));
    if mu_inner.mean == 0.0 {
        let ub = mu_inner
            .upper_bound
            .ok_or(Error::ZeroHits(0))?;
        return Ok(BoundEstimate {
            value: None,
            stderr: f64::NAN,
            upper_bound: Some(k * ub),
        });
    }
    let a = mu_inner.mean;
    let da = k;
    let db = -k * a * (1.0 - 2.0 * b) / (b * (1.0 - b));
    let stderr = ((da * mu_inner.stderr).powi(2) + (db * mu_s.stderr).powi(2)).sqrt();
    Ok(BoundEstimate {
        value: Some(k * a),
        stderr,
        upper_bound: None,
    })
}

/// Initial spin configuration of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StartState {
    #[default]
    Plus,
    Minus,
    /// Each site copies the boundary spin nearest in graph distance, ties to
    /// the lowest boundary ordinal among the first sites reached; `η = 0` reads as `+1`.
    Boundary,
}

impl StartState {
    pub fn initial(self, geom: &Geometry, eta: &BoundarySpec) -> SpinConfig {
        let n = geom.n_sites();
        match self {
            StartState::Plus => SpinConfig::uniform(n, 1),
            StartState::Minus => SpinConfig::uniform(n, -1),
            StartState::Boundary => {
                let mut value = vec![0i8; n];
                let mut queue = std::collections::VecDeque::new();
                for (i, v) in value.iter_mut().enumerate() {
                    let b = geom.neighbors(i).iter().filter(|&&w| w >= n).map(|&w| w - n).min();
                    if let Some(b) = b {
                        *v = if eta.get(b) < 0 { -1 } else { 1 };
                        queue.push_back(i);
                    }
                }
                while let Some(v) = queue.pop_front() {
                    for &w in geom.neighbors(v) {
                        if w < n && value[w] == 0 {
                            value[w] = value[v];
                            queue.push_back(w);
                        }
                    }
                }
                SpinConfig::from_vec(value).expect("spins are ±1")
            }
        }
    }
}

/// Swendsen–Wang sampling schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub burn_in: u64,
    /// Recorded samples (after thinning).
    pub samples: u64,
    /// Sweeps per recorded sample.
    pub thin: u64,
    pub batches: usize,
    pub seed: u64,
    #[serde(default)]
    pub start: StartState,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            burn_in: 1000,
            samples: 100_000,
            thin: 1,
            batches: 20,
            seed: 0,
            start: StartState::Plus,
        }
    }
}

/// Predicate on a joint `(σ, ω)` sample.
pub type JointPredicate<'a> = dyn Fn(&SpinConfig, &BondConfig) -> Result<bool> + 'a;

/// Batch-means probabilities of several joint events along one SW chain
/// started from `cfg.start`. Each sample is the relabeled `σ` with the bonds it was drawn from.
pub fn mc_event_probabilities(
    geom: &Geometry,
    eta: &BoundarySpec,
    params: ModelParams,
    events: &[&JointPredicate<'_>],
    cfg: &McConfig,
) -> Result<Vec<Estimate>> {
    if cfg.thin == 0 {
        return Err(Error::InvalidParameter("thin must be at least 1".into()));
    }
    let mut acc = events
        .iter()
        .map(|_| BatchMeans::new(cfg.batches, cfg.samples))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sw = SwendsenWang::new(geom, eta, params)?;
    let mut sigma = cfg.start.initial(geom, eta);
    for _ in 0..cfg.burn_in {
        sw.sweep(&mut sigma, &mut rng)?;
    }
    for _ in 0..cfg.samples {
        for _ in 0..cfg.thin {
            sw.sweep(&mut sigma, &mut rng)?;
        }
        for (a, ev) in acc.iter_mut().zip(events) {
            a.push(ev(&sigma, sw.bonds())? as u8 as f64);
        }
    }
    acc.into_iter().map(|a| a.finish()).collect()
}

/// Single-event form of [`mc_event_probabilities`].
pub fn mc_event_probability(
    geom: &Geometry,
    eta: &BoundarySpec,
    params: ModelParams,
    event: &JointPredicate<'_>,
    cfg: &McConfig,
) -> Result<Estimate> {
    Ok(mc_event_probabilities(geom, eta, params, &[event], cfg)?.remove(0))
}

/// Registry events evaluated through an [`crate::events::EventContext`].
pub fn mc_registry_probabilities(
    ctx: &crate::events::EventContext,
    eta: &BoundarySpec,
    params: ModelParams,
    kinds: &[EventKind],
    cfg: &McConfig,
) -> Result<Vec<Estimate>> {
    let preds: Vec<Box<JointPredicate<'_>>> = kinds
        .iter()
        .map(|&k| Box::new(move |s: &SpinConfig, w: &BondConfig| ctx.eval(k, s, eta, w)) as Box<JointPredicate<'_>>)
        .collect();
    let refs: Vec<&JointPredicate<'_>> = preds.iter().map(|b| b.as_ref()).collect();
    mc_event_probabilities(ctx.geometry(), eta, params, &refs, cfg)
}

/// JSON record of a gap computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    #[serde(rename = "N")]
    pub n: Option<i32>,
    pub k: Option<i32>,
    pub eps: Option<i8>,
    pub beta: f64,
    pub family: RateFamily,
    pub gap: f64,
    pub solver: Solver,
    pub residual: f64,
}

impl GapRecord {
    pub fn new(geom: &Geometry, gen: &GeneratorMatrix, result: &GapResult) -> Self {
        let tag = gen.eta().tag();
        GapRecord {
            n: geom.half_width(),
            k: tag.map(|t| t.k),
            eps: tag.map(|t| t.eps),
            beta: gen.params().beta,
            family: gen.family(),
            gap: result.gap,
            solver: result.solver,
            residual: result.residual,
        }
    }
}

/// JSON record of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub bound_kind: String,
    pub value: f64,
    pub stderr: f64,
}
