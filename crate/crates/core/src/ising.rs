//! Ising Hamiltonian with boundary terms, exact Gibbs tables on small boxes,
//! heat-bath / Metropolis flip rates and the random-scan Glauber chain.
//!
//! `β` is calibrated to the random-cluster side: the FK bond density of the
//! corresponding model is `p = 1 - e^{-β}` and the critical point satisfies
//! `1 - e^{-β_c} = p_c = √2/(1+√2)`. With the integer Hamiltonian
//! `H = -Σ σ_x σ_y - Σ σ_x η_y` this means Boltzmann weights are
//! `exp(-β H / 2)`; see [`ModelParams::boltzmann`].

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, Geometry};

/// `β_c = ln(1 + √2)`.
pub const BETA_C: f64 = 0.881_373_587_019_543_f64;

/// `p_c = √2 / (1 + √2)`, the self-dual point of the `q = 2` random-cluster model.
pub fn p_c() -> f64 {
    std::f64::consts::SQRT_2 / (1.0 + std::f64::consts::SQRT_2)
}

/// Default cap for exhaustive enumeration of `{-1, 1}^Λ`.
pub const ENUMERATION_CAP: usize = 20;

/// Spin assignment over the sites of `Λ`, indexed by site ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn uniform(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        SpinConfig { spins: vec![value; n] }
    }

    pub fn from_vec(spins: Vec<i8>) -> Result<Self> {
        if let Some(v) = spins.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidParameter(format!("spin value {v} not in {{-1,1}}")));
        }
        Ok(SpinConfig { spins })
    }

    /// Decode a bit-packed state: bit `i` set means site `i` is `+1`.
    pub fn from_index(n: usize, index: u64) -> Self {
        SpinConfig {
            spins: (0..n).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect(),
        }
    }

    pub fn to_index(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        SpinConfig {
            spins: (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn set(&mut self, i: usize, v: i8) {
        debug_assert!(v == 1 || v == -1);
        self.spins[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.flip(i);
        s
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    pub(crate) fn check(&self, geom: &Geometry) -> Result<()> {
        if self.spins.len() != geom.n_sites() {
            return Err(Error::GeometryMismatch {
                expected: geom.n_sites(),
                got: self.spins.len(),
            });
        }
        Ok(())
    }
}

/// Inverse temperature and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
}

impl ModelParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(ModelParams { beta })
    }

    /// FK bond density `p = 1 - e^{-β}`.
    pub fn p(&self) -> f64 {
        -(-self.beta).exp_m1()
    }

    /// Coefficient of the Hamiltonian in the Boltzmann exponent.
    pub fn coupling(&self) -> f64 {
        0.5 * self.beta
    }

    /// `exp(-β H / 2)`.
    pub fn boltzmann(&self, energy: f64) -> f64 {
        (-self.coupling() * energy).exp()
    }
}

/// Sum of neighbouring spins of site `i`, boundary values included.
pub fn local_field(geom: &Geometry, sigma: &SpinConfig, eta: &BoundarySpec, i: usize) -> i32 {
    let n = geom.n_sites();
    geom.neighbors(i)
        .iter()
        .map(|&v| {
            if v < n {
                sigma.get(v) as i32
            } else {
                eta.get(v - n) as i32
            }
        })
        .sum()
}

/// `H_{Λ,η}(σ)`.
pub fn energy(geom: &Geometry, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<i64> {
    sigma.check(geom)?;
    eta.check(geom)?;
    let n = geom.n_sites();
    let e = geom
        .bonds()
        .iter()
        .map(|b| {
            let sa = if b.a < n { sigma.get(b.a) } else { eta.get(b.a - n) };
            let sb = if b.b < n { sigma.get(b.b) } else { eta.get(b.b - n) };
            -(sa as i64) * (sb as i64)
        })
        .sum();
    Ok(e)
}

/// Per-site boundary field `Σ_{y ∈ ∂Λ, y ~ x} η_y`.
pub(crate) fn boundary_field(geom: &Geometry, eta: &BoundarySpec) -> Vec<i32> {
    let n = geom.n_sites();
    (0..n)
        .map(|i| {
            geom.neighbors(i)
                .iter()
                .filter(|&&v| v >= n)
                .map(|&v| eta.get(v - n) as i32)
                .sum()
        })
        .collect()
}

/// Interior neighbours of each site (ordinals in `Λ`).
pub(crate) fn interior_neighbors(geom: &Geometry) -> Vec<Vec<usize>> {
    let n = geom.n_sites();
    (0..n)
        .map(|i| geom.neighbors(i).iter().copied().filter(|&v| v < n).collect())
        .collect()
}

/// Enumerated Gibbs probabilities, indexed by bit-packed state.
pub fn gibbs_table(geom: &Geometry, eta: &BoundarySpec, params: ModelParams) -> Result<Vec<f64>> {
    gibbs_table_with_cap(geom, eta, params, ENUMERATION_CAP)
}

pub fn gibbs_table_with_cap(
    geom: &Geometry,
    eta: &BoundarySpec,
    params: ModelParams,
    cap: usize,
) -> Result<Vec<f64>> {
    eta.check(geom)?;
    let n = geom.n_sites();
    if n > cap || n > 30 {
        return Err(Error::TooLargeForEnumeration { sites: n, cap });
    }
    let dim = 1usize << n;
    let bf = boundary_field(geom, eta);
    let inner: Vec<(usize, usize)> = geom
        .bonds()
        .iter()
        .filter(|b| b.a < n && b.b < n)
        .map(|b| (b.a, b.b))
        .collect();
    let spin = |s: usize, i: usize| if s >> i & 1 == 1 { 1i64 } else { -1 };
    let energies: Vec<f64> = (0..dim)
        .map(|s| {
            let bulk: i64 = inner.iter().map(|&(a, b)| spin(s, a) * spin(s, b)).sum();
            let edge: i64 = (0..n).map(|i| spin(s, i) * bf[i] as i64).sum();
            -(bulk + edge) as f64
        })
        .collect();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = energies.iter().map(|&e| params.boltzmann(e - e_min)).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// Flip-rate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateFamily {
    #[default]
    HeatBath,
    Metropolis,
}

impl RateFamily {
    /// Rate for an energy change `ΔH = H(σ^x) - H(σ)`.
    pub fn rate(self, params: ModelParams, delta_h: f64) -> f64 {
        let a = params.coupling() * delta_h;
        match self {
            RateFamily::HeatBath => 1.0 / (1.0 + a.exp()),
            RateFamily::Metropolis => (-a).exp().min(1.0),
        }
    }

    /// Uniform bounds `(c0', c0)` over all sites and configurations when the
    /// local field is bounded by `max_field` (4 on `Z^2`).
    pub fn bounds(self, params: ModelParams, max_field: i32) -> (f64, f64) {
        let worst = 2.0 * max_field as f64;
        match self {
            RateFamily::HeatBath => (self.rate(params, worst), self.rate(params, -worst)),
            RateFamily::Metropolis => (self.rate(params, worst), 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateFamily::HeatBath => "heat-bath",
            RateFamily::Metropolis => "metropolis",
        }
    }
}

impl std::str::FromStr for RateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat-bath" | "heatbath" => Ok(RateFamily::HeatBath),
            "metropolis" => Ok(RateFamily::Metropolis),
            other => Err(Error::InvalidParameter(format!("unknown rate family {other}"))),
        }
    }
}

/// `c(x, σ)`.
pub fn flip_rate(
    geom: &Geometry,
    x: usize,
    sigma: &SpinConfig,
    eta: &BoundarySpec,
    params: ModelParams,
    family: RateFamily,
) -> f64 {
    let h = local_field(geom, sigma, eta, x);
    let delta_h = 2.0 * sigma.get(x) as f64 * h as f64;
    family.rate(params, delta_h)
}

/// Rates tabulated by `(σ_x, local field)`; field ranges over `-4..=4`.
#[derive(Debug, Clone)]
pub(crate) struct RateTable {
    table: [[f64; 9]; 2],
}

impl RateTable {
    pub fn new(params: ModelParams, family: RateFamily) -> Self {
        let mut table = [[0.0; 9]; 2];
        for (si, s) in [-1.0f64, 1.0].into_iter().enumerate() {
            for h in -4..=4 {
                table[si][(h + 4) as usize] = family.rate(params, 2.0 * s * h as f64);
            }
        }
        RateTable { table }
    }

    #[inline]
    pub fn get(&self, spin: i8, field: i32) -> f64 {
        self.table[(spin > 0) as usize][(field + 4) as usize]
    }
}

/// Per-sweep observables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: u64,
    pub energy: i64,
    pub magnetization: i64,
    pub events: Vec<bool>,
}

/// A named spin-configuration indicator recorded alongside energy and magnetization.
pub struct SpinObservable<'a> {
    pub name: String,
    pub eval: Box<dyn Fn(&SpinConfig) -> bool + Send + Sync + 'a>,
}

impl<'a> SpinObservable<'a> {
    pub fn new(name: impl Into<String>, eval: impl Fn(&SpinConfig) -> bool + Send + Sync + 'a) -> Self {
        SpinObservable {
            name: name.into(),
            eval: Box::new(eval),
        }
    }
}

/// Random-scan Glauber chain. One sweep is `|Λ|` single-site proposals; the
/// discrete kernel `P` relates to the generator by `A = |Λ| (P - I)`.
pub struct GlauberChain<'g> {
    geom: &'g Geometry,
    eta: BoundarySpec,
    boundary_field: Vec<i32>,
    rates: RateTable,
    state: SpinConfig,
    sweeps: u64,
    rng: ChaCha8Rng,
}

impl<'g> GlauberChain<'g> {
    pub fn new(
        geom: &'g Geometry,
        eta: &BoundarySpec,
        params: ModelParams,
        family: RateFamily,
        initial: SpinConfig,
        seed: u64,
    ) -> Result<Self> {
        eta.check(geom)?;
        initial.check(geom)?;
        Ok(GlauberChain {
            geom,
            eta: eta.clone(),
            boundary_field: boundary_field(geom, eta),
            rates: RateTable::new(params, family),
            state: initial,
            sweeps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state(&self) -> &SpinConfig {
        &self.state
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn eta(&self) -> &BoundarySpec {
        &self.eta
    }

    pub fn sweep(&mut self) {
        let n = self.geom.n_sites();
        for _ in 0..n {
            let x = self.rng.gen_range(0..n);
            let field = self.boundary_field[x]
                + self
                    .geom
                    .neighbors(x)
                    .iter()
                    .filter(|&&v| v < n)
                    .map(|&v| self.state.get(v) as i32)
                    .sum::<i32>();
            let c = self.rates.get(self.state.get(x), field);
            if self.rng.gen::<f64>() < c {
                self.state.flip(x);
            }
        }
        self.sweeps += 1;
    }
}

/// Output of [`run_chain`].
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub state: SpinConfig,
    pub sweeps: u64,
    pub event_names: Vec<String>,
    pub series: Vec<SweepRecord>,
}

impl ChainRun {
    /// CSV with columns `sweep, energy, magnetization, <events...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series_csv(out, &self.event_names, &self.series)
    }
}

pub(crate) fn write_series_csv<W: Write>(out: W, names: &[String], series: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sweep".to_string(), "energy".into(), "magnetization".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for r in series {
        let mut row = vec![r.sweep.to_string(), r.energy.to_string(), r.magnetization.to_string()];
        row.extend(r.events.iter().map(|&b| (b as u8).to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Run `sweeps` sweeps from `initial`, recording observables after each sweep.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    geom: &Geometry,
    eta: &BoundarySpec,
    params: ModelParams,
    family: RateFamily,
    initial: SpinConfig,
    seed: u64,
    sweeps: u64,
    observables: &[SpinObservable<'_>],
) -> Result<ChainRun> {
    if sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
    }
    let mut chain = GlauberChain::new(geom, eta, params, family, initial, seed)?;
    let mut series = Vec::with_capacity(sweeps as usize);
    for _ in 0..sweeps {
        chain.sweep();
        let s = chain.state();
        series.push(SweepRecord {
            sweep: chain.sweeps(),
            energy: energy(geom, s, eta)?,
            magnetization: s.magnetization(),
            events: observables.iter().map(|o| (o.eval)(s)).collect(),
        });
    }
    Ok(ChainRun {
        state: chain.state().clone(),
        sweeps: chain.sweeps(),
        event_names: observables.iter().map(|o| o.name.clone()).collect(),
        series,
    })
}
