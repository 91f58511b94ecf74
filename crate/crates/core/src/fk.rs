//! Random-cluster (FK) model on `B̄(Λ)`: weights under wired, free, site and
//! bond boundary conditions, cluster decomposition, planar duality, the
//! Edwards–Sokal coupling in both directions and Swendsen–Wang sweeps.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, DualSite, Geometry, Site};
use crate::ising::{ModelParams, SpinConfig};
use crate::union_find::UnionFind;

/// Open/closed state per bond of `B̄(Λ)`, indexed by bond ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BondConfig {
    open: Vec<bool>,
}

impl BondConfig {
    pub fn all_open(n: usize) -> Self {
        BondConfig { open: vec![true; n] }
    }

    pub fn all_closed(n: usize) -> Self {
        BondConfig { open: vec![false; n] }
    }

    pub fn from_vec(open: Vec<bool>) -> Self {
        BondConfig { open }
    }

    /// Bit `e` of `index` opens bond `e`.
    pub fn from_index(n: usize, index: u64) -> Self {
        BondConfig {
            open: (0..n).map(|e| index >> e & 1 == 1).collect(),
        }
    }

    pub fn to_index(&self) -> u64 {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .fold(0, |acc, (e, _)| acc | 1 << e)
    }

    pub fn random<R: Rng>(n: usize, density: f64, rng: &mut R) -> Self {
        BondConfig {
            open: (0..n).map(|_| rng.gen::<f64>() < density).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.open[e]
    }

    pub fn set(&mut self, e: usize, open: bool) {
        self.open[e] = open;
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.open
    }

    fn check(&self, geom: &Geometry) -> Result<()> {
        if self.open.len() != geom.n_bonds() {
            return Err(Error::GeometryMismatch {
                expected: geom.n_bonds(),
                got: self.open.len(),
            });
        }
        Ok(())
    }
}

/// Exterior bond configuration `ρ` given by its (finite) set of open bonds
/// outside `B̄(Λ)`; every other exterior bond is closed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BondBoundary {
    pub open: Vec<(Site, Site)>,
}

/// Boundary convention for cluster counting.
#[derive(Debug, Clone, PartialEq)]
pub enum FkBoundary {
    /// `C(ω)` = clusters not meeting `∂Λ`.
    Wired,
    /// Site condition `η ≡ 0`: every bond to `∂Λ` is closed.
    Free,
    /// Site condition `η`: weights restricted to `V(Λ, η)`.
    Site(BoundarySpec),
    /// Bond condition `ρ`: `C(ω | ρ)` = clusters of `(ωρ)` meeting `Λ`.
    Bond(BondBoundary),
}

/// Clusters of an open subgraph under a boundary convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDecomposition {
    /// Component label of each site of `Λ` (numbered by smallest site ordinal).
    pub labels: Vec<u32>,
    /// Whether a component meets the (fused) boundary.
    pub touches_boundary: Vec<bool>,
    /// The cluster count `C` entering the FK weight for this convention.
    pub count: usize,
    /// `ω ∈ V(Λ, η)` for site conditions; always `true` otherwise.
    pub admissible: bool,
}

impl ClusterDecomposition {
    pub fn n_components(&self) -> usize {
        self.touches_boundary.len()
    }
}

fn relabel_sites(uf: &mut UnionFind, n: usize, fused: &[usize]) -> (Vec<u32>, Vec<bool>) {
    let fused_roots: Vec<usize> = fused.iter().map(|&f| uf.find(f)).collect();
    let mut root_label: HashMap<usize, u32> = HashMap::new();
    let mut labels = Vec::with_capacity(n);
    let mut touches = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        let next = root_label.len() as u32;
        let l = *root_label.entry(r).or_insert_with(|| {
            touches.push(fused_roots.contains(&r));
            next
        });
        labels.push(l);
    }
    (labels, touches)
}

/// Connected components of the open subgraph with boundary fusing per `bc`.
pub fn clusters(geom: &Geometry, omega: &BondConfig, bc: &FkBoundary) -> Result<ClusterDecomposition> {
    omega.check(geom)?;
    let n = geom.n_sites();
    match bc {
        FkBoundary::Wired => {
            let mut uf = UnionFind::new(n + 1);
            for (e, b) in geom.bonds().iter().enumerate() {
                if omega.is_open(e) {
                    uf.union(b.a.min(n), b.b.min(n));
                }
            }
            let (labels, touches) = relabel_sites(&mut uf, n, &[n]);
            let count = touches.iter().filter(|&&t| !t).count();
            Ok(ClusterDecomposition {
                labels,
                touches_boundary: touches,
                count,
                admissible: true,
            })
        }
        FkBoundary::Free => {
            let eta = BoundarySpec::uniform(geom, 0)?;
            clusters(geom, omega, &FkBoundary::Site(eta))
        }
        FkBoundary::Site(eta) => {
            eta.check(geom)?;
            let (plus, minus) = (n, n + 1);
            let mut uf = UnionFind::new(n + 2);
            let mut admissible = true;
            for (e, b) in geom.bonds().iter().enumerate() {
                if !omega.is_open(e) {
                    continue;
                }
                let map = |v: usize| -> Option<usize> {
                    if v < n {
                        Some(v)
                    } else {
                        match eta.get(v - n) {
                            1 => Some(plus),
                            -1 => Some(minus),
                            _ => None,
                        }
                    }
                };
                match (map(b.a), map(b.b)) {
                    (Some(a), Some(b)) => {
                        uf.union(a, b);
                    }
                    _ => admissible = false,
                }
            }
            if uf.connected(plus, minus) {
                admissible = false;
            }
            let (labels, touches) = relabel_sites(&mut uf, n, &[plus, minus]);
            let count = touches.iter().filter(|&&t| !t).count();
            Ok(ClusterDecomposition {
                labels,
                touches_boundary: touches,
                count,
                admissible,
            })
        }
        FkBoundary::Bond(rho) => {
            let nodes = geom.n_nodes();
            let mut extra: HashMap<Site, usize> = HashMap::new();
            let mut pairs = Vec::new();
            for &(s, t) in &rho.open {
                if s.neighbors().iter().all(|&u| u != t) {
                    return Err(Error::InvalidParameter(format!("{s:?}-{t:?} is not a bond")));
                }
                if geom.bond_between(s, t).is_some() {
                    return Err(Error::InvalidParameter(format!("{s:?}-{t:?} lies in B̄(Λ)")));
                }
                let mut id = |u: Site| -> usize {
                    geom.node_of(u).unwrap_or_else(|| {
                        let next = nodes + extra.len();
                        *extra.entry(u).or_insert(next)
                    })
                };
                let (a, b) = (id(s), id(t));
                pairs.push((a, b));
            }
            let mut uf = UnionFind::new(nodes + extra.len());
            for (e, b) in geom.bonds().iter().enumerate() {
                if omega.is_open(e) {
                    uf.union(b.a, b.b);
                }
            }
            for (a, b) in pairs {
                uf.union(a, b);
            }
            let outside: Vec<usize> = (n..nodes + extra.len()).collect();
            let (labels, touches) = relabel_sites(&mut uf, n, &outside);
            let count = touches.len();
            Ok(ClusterDecomposition {
                labels,
                touches_boundary: touches,
                count,
                admissible: true,
            })
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    Ok(())
}

/// `W(ω) = p^{|ω|} (1-p)^{|B̄(Λ)| - |ω|} q^C`, zero outside `V(Λ, η)` for site conditions.
pub fn fk_weight(geom: &Geometry, omega: &BondConfig, bc: &FkBoundary, p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    check_q(q)?;
    let dec = clusters(geom, omega, bc)?;
    if !dec.admissible {
        return Ok(0.0);
    }
    let open = omega.n_open() as i32;
    let closed = geom.n_bonds() as i32 - open;
    Ok(p.powi(open) * (1.0 - p).powi(closed) * q.powi(dec.count as i32))
}

/// Normalized FK law over all `2^{|B̄(Λ)|}` configurations, indexed by [`BondConfig::to_index`].
pub fn fk_law(geom: &Geometry, bc: &FkBoundary, p: f64, q: f64) -> Result<Vec<f64>> {
    let m = geom.n_bonds();
    if m > 24 {
        return Err(Error::TooLargeForEnumeration { sites: m, cap: 24 });
    }
    let mut w = (0..1u64 << m)
        .map(|i| fk_weight(geom, &BondConfig::from_index(m, i), bc, p, q))
        .collect::<Result<Vec<f64>>>()?;
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// `α(p, q) = p / (p + q(1-p))`.
pub fn alpha(p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    check_q(q)?;
    Ok(p / (p + q * (1.0 - p)))
}

/// The value dual to `p` at level `q`: `p / (q(1-p)) = (1-p*) / p*`.
pub fn dual_p(p: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    // p* = q(1-p) / (p + q(1-p))
    Ok(q * (1.0 - p) / (p + q * (1.0 - p)))
}

/// Dual configuration: `e*` is open exactly when `e` is closed. Indexed by
/// primal bond ordinal; endpoints via [`Geometry::dual_bond`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DualConfig {
    open: Vec<bool>,
}

impl DualConfig {
    pub fn is_open(&self, e: usize) -> bool {
        self.open[e]
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn to_index(&self) -> u64 {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .fold(0, |acc, (e, _)| acc | 1 << e)
    }

    /// Number of components of the open dual subgraph on all dual sites (free count).
    pub fn free_cluster_count(&self, geom: &Geometry) -> usize {
        let mut uf = UnionFind::new(geom.n_dual_sites());
        for e in 0..self.open.len() {
            if self.open[e] {
                let (a, b) = geom.dual_bond(e);
                uf.union(a, b);
            }
        }
        uf.labels().1
    }
}

pub fn dual_config(geom: &Geometry, omega: &BondConfig) -> Result<DualConfig> {
    omega.check(geom)?;
    Ok(DualConfig {
        open: omega.as_slice().iter().map(|&o| !o).collect(),
    })
}

/// Union-find over the dual grid using open dual bonds whose endpoints both
/// satisfy `allowed`.
pub fn dual_components(
    geom: &Geometry,
    omega: &BondConfig,
    allowed: impl Fn(DualSite) -> bool,
) -> UnionFind {
    let mut uf = UnionFind::new(geom.n_dual_sites());
    let mask: Vec<bool> = geom.dual_sites().map(&allowed).collect();
    for e in 0..geom.n_bonds() {
        if !omega.is_open(e) {
            let (a, b) = geom.dual_bond(e);
            if mask[a] && mask[b] {
                uf.union(a, b);
            }
        }
    }
    uf
}

/// `ω ∈ V(Λ, η)`.
pub fn in_v(geom: &Geometry, omega: &BondConfig, eta: &BoundarySpec) -> Result<bool> {
    Ok(clusters(geom, omega, &FkBoundary::Site(eta.clone()))?.admissible)
}

/// Swendsen–Wang sampler with preallocated buffers. Boundary sites are fused
/// into one super-node per spin value; bonds to `η = 0` sites are never opened.
pub struct SwendsenWang<'g> {
    geom: &'g Geometry,
    eta: BoundarySpec,
    p: f64,
    uf: UnionFind,
    omega: BondConfig,
    label: Vec<i8>,
}

impl<'g> SwendsenWang<'g> {
    pub fn new(geom: &'g Geometry, eta: &BoundarySpec, params: ModelParams) -> Result<Self> {
        eta.check(geom)?;
        Ok(SwendsenWang {
            geom,
            eta: eta.clone(),
            p: params.p(),
            uf: UnionFind::new(geom.n_sites() + 2),
            omega: BondConfig::all_closed(geom.n_bonds()),
            label: vec![0; geom.n_sites() + 2],
        })
    }

    pub fn geometry(&self) -> &Geometry {
        self.geom
    }

    pub fn eta(&self) -> &BoundarySpec {
        &self.eta
    }

    /// Bond configuration drawn in the most recent sweep.
    pub fn bonds(&self) -> &BondConfig {
        &self.omega
    }

    /// Percolation step into the internal bond buffer.
    pub fn percolate<R: Rng>(&mut self, sigma: &SpinConfig, rng: &mut R) {
        percolate_into(self.geom, sigma, &self.eta, self.p, rng, &mut self.omega);
    }

    /// Labeling step from the internal bond buffer.
    pub fn label<R: Rng>(&mut self, sigma: &mut SpinConfig, rng: &mut R) -> Result<()> {
        label_into(self.geom, &self.omega, &self.eta, rng, &mut self.uf, &mut self.label, sigma)
    }

    /// One sweep: percolate on agreeing bonds, then relabel clusters.
    pub fn sweep<R: Rng>(&mut self, sigma: &mut SpinConfig, rng: &mut R) -> Result<()> {
        self.percolate(sigma, rng);
        self.label(sigma, rng)
    }
}

fn percolate_into<R: Rng>(
    geom: &Geometry,
    sigma: &SpinConfig,
    eta: &BoundarySpec,
    p: f64,
    rng: &mut R,
    out: &mut BondConfig,
) {
    let n = geom.n_sites();
    let spin = |v: usize| if v < n { sigma.get(v) } else { eta.get(v - n) };
    for (e, b) in geom.bonds().iter().enumerate() {
        let (sa, sb) = (spin(b.a), spin(b.b));
        let open = sa != 0 && sa == sb && rng.gen::<f64>() < p;
        out.open[e] = open;
    }
}

fn label_into<R: Rng>(
    geom: &Geometry,
    omega: &BondConfig,
    eta: &BoundarySpec,
    rng: &mut R,
    uf: &mut UnionFind,
    label: &mut [i8],
    sigma: &mut SpinConfig,
) -> Result<()> {
    let n = geom.n_sites();
    let (plus, minus) = (n, n + 1);
    uf.reset();
    for (e, b) in geom.bonds().iter().enumerate() {
        if !omega.is_open(e) {
            continue;
        }
        let map = |v: usize| -> Result<usize> {
            if v < n {
                return Ok(v);
            }
            match eta.get(v - n) {
                1 => Ok(plus),
                -1 => Ok(minus),
                _ => Err(Error::BoundaryConflict(format!(
                    "open bond {e} meets a free boundary site {:?}",
                    geom.node_site(v)
                ))),
            }
        };
        uf.union(map(b.a)?, map(b.b)?);
    }
    let (rp, rm) = (uf.find(plus), uf.find(minus));
    if rp == rm {
        return Err(Error::BoundaryConflict(
            "an open cluster joins plus and minus boundary sites".into(),
        ));
    }
    label.fill(0);
    label[rp] = 1;
    label[rm] = -1;
    for i in 0..n {
        let r = uf.find(i);
        if label[r] == 0 {
            label[r] = if rng.gen::<bool>() { 1 } else { -1 };
        }
        sigma.set(i, label[r]);
    }
    Ok(())
}

/// Percolation construction: independent density-`p` percolation on bonds
/// whose endpoint spins agree (boundary spins from `η`; `η = 0` bonds stay closed).
pub fn es_percolation<R: Rng>(
    geom: &Geometry,
    sigma: &SpinConfig,
    eta: &BoundarySpec,
    p: f64,
    rng: &mut R,
) -> Result<BondConfig> {
    check_p(p)?;
    eta.check(geom)?;
    if sigma.len() != geom.n_sites() {
        return Err(Error::GeometryMismatch {
            expected: geom.n_sites(),
            got: sigma.len(),
        });
    }
    let mut out = BondConfig::all_closed(geom.n_bonds());
    percolate_into(geom, sigma, eta, p, rng, &mut out);
    Ok(out)
}

/// Cluster-labeling construction: boundary clusters inherit the boundary
/// spin, other clusters get independent uniform labels.
pub fn es_label<R: Rng>(
    geom: &Geometry,
    omega: &BondConfig,
    eta: &BoundarySpec,
    rng: &mut R,
) -> Result<SpinConfig> {
    omega.check(geom)?;
    eta.check(geom)?;
    let n = geom.n_sites();
    let mut uf = UnionFind::new(n + 2);
    let mut label = vec![0i8; n + 2];
    let mut sigma = SpinConfig::uniform(n, 1);
    label_into(geom, omega, eta, rng, &mut uf, &mut label, &mut sigma)?;
    Ok(sigma)
}

/// One Swendsen–Wang sweep; returns the new spins and the intermediate bonds.
pub fn sw_sweep<R: Rng>(
    geom: &Geometry,
    sigma: &SpinConfig,
    eta: &BoundarySpec,
    params: ModelParams,
    rng: &mut R,
) -> Result<(SpinConfig, BondConfig)> {
    let omega = es_percolation(geom, sigma, eta, params.p(), rng)?;
    let next = es_label(geom, &omega, eta, rng)?;
    Ok((next, omega))
}

// ---- snapshots -------------------------------------------------------------

/// Magic bytes opening a snapshot file.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CGSNAP01";

/// Fixed-width header of a `(σ, ω)` snapshot stream.
///
/// Layout (little endian): magic `[u8; 8]`, `N: u32`, `k: u32`, `eps: i32`,
/// `beta: f64`, `seed: u64`, `n_sites: u32`, `n_bonds: u32`, four reserved zero bytes (48 in all).
/// Each record is `ceil(n_sites / 8)` bytes of spins (bit `i` of the stream
/// set iff site `i` is `+1`, least significant bit first) followed by
/// `ceil(n_bonds / 8)` bytes of bonds (bit `e` set iff bond `e` is open).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: u32,
    pub k: u32,
    pub eps: i32,
    pub beta: f64,
    pub seed: u64,
    pub n_sites: u32,
    pub n_bonds: u32,
}

impl SnapshotHeader {
    pub const BYTES: usize = 48;

    pub fn record_bytes(&self) -> usize {
        (self.n_sites as usize).div_ceil(8) + (self.n_bonds as usize).div_ceil(8)
    }
}

fn pack(bits: impl Iterator<Item = bool>, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len.div_ceil(8)];
    for (i, b) in bits.enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

pub struct SnapshotWriter<W: Write> {
    out: W,
    header: SnapshotHeader,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut out: W, header: SnapshotHeader) -> Result<Self> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&header.n.to_le_bytes())?;
        out.write_all(&header.k.to_le_bytes())?;
        out.write_all(&header.eps.to_le_bytes())?;
        out.write_all(&header.beta.to_le_bytes())?;
        out.write_all(&header.seed.to_le_bytes())?;
        out.write_all(&header.n_sites.to_le_bytes())?;
        out.write_all(&header.n_bonds.to_le_bytes())?;
        out.write_all(&[0u8; 4])?;
        Ok(SnapshotWriter { out, header })
    }

    pub fn write(&mut self, sigma: &SpinConfig, omega: &BondConfig) -> Result<()> {
        if sigma.len() != self.header.n_sites as usize || omega.len() != self.header.n_bonds as usize {
            return Err(Error::GeometryMismatch {
                expected: self.header.n_sites as usize,
                got: sigma.len(),
            });
        }
        self.out
            .write_all(&pack(sigma.spins().iter().map(|&s| s == 1), sigma.len()))?;
        self.out
            .write_all(&pack(omega.as_slice().iter().copied(), omega.len()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Read a whole snapshot stream.
pub fn read_snapshots<R: Read>(mut input: R) -> Result<(SnapshotHeader, Vec<(SpinConfig, BondConfig)>)> {
    let mut head = [0u8; SnapshotHeader::BYTES];
    input.read_exact(&mut head)?;
    if &head[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Io("bad snapshot magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let header = SnapshotHeader {
        n: u32_at(8),
        k: u32_at(12),
        eps: i32::from_le_bytes(head[16..20].try_into().unwrap()),
        beta: f64::from_le_bytes(head[20..28].try_into().unwrap()),
        seed: u64::from_le_bytes(head[28..36].try_into().unwrap()),
        n_sites: u32_at(36),
        n_bonds: u32_at(40),
    };
    // bytes 44..48 reserved
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    let rb = header.record_bytes();
    if rb == 0 || rest.len() % rb != 0 {
        return Err(Error::Io("truncated snapshot record".into()));
    }
    let ns = header.n_sites as usize;
    let sb = ns.div_ceil(8);
    let records = rest
        .chunks(rb)
        .map(|r| {
            let spins = unpack(&r[..sb], ns).into_iter().map(|b| if b { 1 } else { -1 }).collect();
            let bonds = unpack(&r[sb..], header.n_bonds as usize);
            (
                SpinConfig::from_vec(spins).expect("unpacked spins are ±1"),
                BondConfig::from_vec(bonds),
            )
        })
        .collect();
    Ok((header, records))
}

impl<W: Write> SnapshotWriter<W> {
    #[doc(hidden)]
    pub fn header(&self) -> &SnapshotHeader {
        &self.header
    }
}
