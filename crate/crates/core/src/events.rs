//! Connectivity events on spin and bond configurations: plus/minus/bond
//! clusters, `D`, `∂_in D`, `D̂`, the dual crossings `E_i` and `F_{i,i+1}`,
//! and the strip-connectivity set `A_N`.
//!
//! Side-indexed objects follow [`crate::geometry::region`]: side 1 bottom,
//! 2 left, 3 top, 4 right. Corner region `c` (`Γ_{c,c+1}`) sits between
//! sides `c` and `c+1`; square `c` is the quarter-turn image of the
//! lower-right square `[m, N+1] x [-N-1, -m]` and contains corner region `c-1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::BondConfig;
use crate::geometry::{region, BoundarySpec, DualSite, Geometry, HalfInt, Region, Site};
use crate::ising::SpinConfig;
use crate::union_find::UnionFind;

#[inline]
fn node_spin(n: usize, sigma: &SpinConfig, eta: &BoundarySpec, v: usize) -> i8 {
    if v < n {
        sigma.get(v)
    } else {
        eta.get(v - n)
    }
}

fn check_config(geom: &Geometry, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<()> {
    if sigma.len() != geom.n_sites() {
        return Err(Error::GeometryMismatch {
            expected: geom.n_sites(),
            got: sigma.len(),
        });
    }
    if eta.len() != geom.n_boundary() {
        return Err(Error::GeometryMismatch {
            expected: geom.n_boundary(),
            got: eta.len(),
        });
    }
    Ok(())
}

/// Components of the subgraph of `B̄(Λ)` whose bonds join two nodes of spin `s`.
fn sign_components(geom: &Geometry, sigma: &SpinConfig, eta: &BoundarySpec, s: i8) -> UnionFind {
    let n = geom.n_sites();
    let mut uf = UnionFind::new(geom.n_nodes());
    for b in geom.bonds() {
        if node_spin(n, sigma, eta, b.a) == s && node_spin(n, sigma, eta, b.b) == s {
            uf.union(b.a, b.b);
        }
    }
    uf
}

fn cluster_from(geom: &Geometry, uf: &mut UnionFind, seeds: impl Iterator<Item = usize>) -> Vec<Site> {
    let roots: std::collections::HashSet<usize> = seeds.map(|v| uf.find(v)).collect();
    (0..geom.n_sites())
        .filter(|&i| roots.contains(&uf.find(i)))
        .map(|i| geom.sites()[i])
        .collect()
}

fn signed_cluster(geom: &Geometry, phi: &[Site], sigma: &SpinConfig, eta: &BoundarySpec, s: i8) -> Result<Vec<Site>> {
    check_config(geom, sigma, eta)?;
    let n = geom.n_sites();
    let mut uf = sign_components(geom, sigma, eta, s);
    let seeds: Vec<usize> = phi
        .iter()
        .filter_map(|&p| geom.node_of(p))
        .filter(|&v| node_spin(n, sigma, eta, v) == s)
        .collect();
    Ok(cluster_from(geom, &mut uf, seeds.into_iter()))
}

/// Sites of `Λ` joined to `Φ` by paths of `+1` spins in `B̄(Λ)`, boundary
/// sites carrying their `η` value. Points of `Φ` outside `Λ ∪ ∂Λ` are ignored.
pub fn plus_cluster(geom: &Geometry, phi: &[Site], sigma: &SpinConfig, eta: &BoundarySpec) -> Result<Vec<Site>> {
    signed_cluster(geom, phi, sigma, eta, 1)
}

pub fn minus_cluster(geom: &Geometry, phi: &[Site], sigma: &SpinConfig, eta: &BoundarySpec) -> Result<Vec<Site>> {
    signed_cluster(geom, phi, sigma, eta, -1)
}

/// Sites of `Λ` joined to `Φ` by open bonds of `ω`.
pub fn bond_cluster(geom: &Geometry, phi: &[Site], omega: &BondConfig) -> Result<Vec<Site>> {
    if omega.len() != geom.n_bonds() {
        return Err(Error::GeometryMismatch {
            expected: geom.n_bonds(),
            got: omega.len(),
        });
    }
    let mut uf = UnionFind::new(geom.n_nodes());
    for (e, b) in geom.bonds().iter().enumerate() {
        if omega.is_open(e) {
            uf.union(b.a, b.b);
        }
    }
    let seeds: Vec<usize> = phi.iter().filter_map(|&p| geom.node_of(p)).collect();
    Ok(cluster_from(geom, &mut uf, seeds.into_iter()))
}

/// Named events for the registry and CSV headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    D,
    /// `∂_in D`.
    InnerD,
    Dhat,
    /// `E_i`, `i ∈ 1..=4`.
    E(u8),
    /// `F_{c,c+1}`, `c ∈ 1..=4`.
    F(u8),
    /// Indicator of `A_N = J` (every pair of strips plus-connected).
    AN,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::D,
        EventKind::InnerD,
        EventKind::Dhat,
        EventKind::E(1),
        EventKind::E(2),
        EventKind::E(3),
        EventKind::E(4),
        EventKind::F(1),
        EventKind::F(2),
        EventKind::F(3),
        EventKind::F(4),
        EventKind::AN,
    ];

    pub fn name(self) -> String {
        match self {
            EventKind::D => "D".into(),
            EventKind::InnerD => "dinD".into(),
            EventKind::Dhat => "Dhat".into(),
            EventKind::E(i) => format!("E{i}"),
            EventKind::F(c) => format!("F{}{}", c, c % 4 + 1),
            EventKind::AN => "AN".into(),
        }
    }

    /// Whether the event reads the bond configuration rather than the spins.
    pub fn uses_bonds(self) -> bool {
        matches!(self, EventKind::E(_) | EventKind::F(_))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown event {s}")))
    }
}

/// Precomputed masks for the events at `(N, k)` on `Λ_N`.
#[derive(Debug, Clone)]
pub struct EventContext {
    geom: Geometry,
    n: i32,
    k: i32,
    j: i32,
    /// Node ordinals of `Γ_i`.
    strips: [Vec<usize>; 4],
    /// Node ordinals of `Γ_{c,c+1}` (corner site excluded: it is not a node).
    corners: [Vec<usize>; 4],
    /// Bit `i-1` set iff the site lies outside `T^i_{N,k+3j}`.
    outside_triangle: Vec<u8>,
    /// Bit `c-1` set iff the site lies outside square `c` with `m = ⌊k/4⌋`.
    outside_square: Vec<u8>,
    dual_triangle: [Vec<bool>; 4],
    dual_corners: [Vec<usize>; 4],
    dual_square: [Vec<bool>; 4],
    square_ends: [(usize, usize); 4],
}

impl EventContext {
    /// Requires a square box `Λ_N` and `1 ≤ k ≤ N`.
    pub fn new(geom: &Geometry, k: i64) -> Result<Self> {
        let n = geom.require_half_width()?;
        if k < 1 || k > n as i64 {
            return Err(Error::InvalidStripParameter { k, n: n as i64 });
        }
        let k = k as i32;
        let j = (n - k) / 4;
        let m = k / 4;
        let nodes = |sites: Vec<Site>| -> Vec<usize> { sites.into_iter().filter_map(|s| geom.node_of(s)).collect() };
        let dual_ords = |ds: Vec<DualSite>| -> Vec<usize> {
            ds.into_iter()
                .map(|d| geom.dual_site_ordinal(d).expect("rim dual sites lie in the dual grid"))
                .collect()
        };
        let side = |i: usize| (i + 1) as u8;

        let mut strips: [Vec<usize>; 4] = Default::default();
        let mut corners: [Vec<usize>; 4] = Default::default();
        let mut dual_corners: [Vec<usize>; 4] = Default::default();
        let mut dual_triangle: [Vec<bool>; 4] = Default::default();
        let mut dual_square: [Vec<bool>; 4] = Default::default();
        let mut outside_triangle = vec![0u8; geom.n_sites()];
        let mut outside_square = vec![0u8; geom.n_sites()];
        let mut square_ends = [(0usize, 0usize); 4];

        for i in 0..4 {
            strips[i] = nodes(region(geom, Region::Strip { k }, side(i))?.sites());
            corners[i] = nodes(region(geom, Region::CornerStrip { k }, side(i))?.sites());
            dual_corners[i] = dual_ords(region(geom, Region::DualCornerStrip { k }, side(i))?.dual_sites());

            let tri = region(
                geom,
                Region::Triangle {
                    height: HalfInt::int(n as i64),
                    half_base: HalfInt::int((k + 3 * j) as i64),
                },
                side(i),
            )?;
            let sq = region(geom, Region::Square { m }, side(i))?;
            for (s, site) in geom.sites().iter().enumerate() {
                if !tri.contains(site.half_point()) {
                    outside_triangle[s] |= 1 << i;
                }
                if !sq.contains(site.half_point()) {
                    outside_square[s] |= 1 << i;
                }
            }

            let dtri = region(
                geom,
                Region::DualTriangle {
                    height: HalfInt::plus_half(n as i64),
                    half_base: HalfInt::plus_half((k + j) as i64),
                },
                side(i),
            )?;
            let dsq = region(geom, Region::DualSquare { m }, side(i))?;
            dual_triangle[i] = geom.dual_sites().map(|d| dtri.contains(d.half_point())).collect();
            dual_square[i] = geom.dual_sites().map(|d| dsq.contains(d.half_point())).collect();

            // ends of the strips meeting in square i: right end of the bottom
            // strip and lower end of the right strip, rotated
            let a = DualSite::new(k, -n - 1).rotate_n(i as u8);
            let b = DualSite::new(n, -k - 1).rotate_n(i as u8);
            square_ends[i] = (
                geom.dual_site_ordinal(a).expect("strip end in dual grid"),
                geom.dual_site_ordinal(b).expect("strip end in dual grid"),
            );
        }

        Ok(EventContext {
            geom: geom.clone(),
            n,
            k,
            j,
            strips,
            corners,
            outside_triangle,
            outside_square,
            dual_triangle,
            dual_corners,
            dual_square,
            square_ends,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn half_width(&self) -> i32 {
        self.n
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    /// `j = ⌊(N - k) / 4⌋`.
    pub fn j(&self) -> i32 {
        self.j
    }

    /// Square parameter `⌊k/4⌋`.
    pub fn m(&self) -> i32 {
        self.k / 4
    }

    /// Dual-site ordinals joined by `F` in square `c`.
    pub fn square_ends(&self, c: u8) -> (DualSite, DualSite) {
        let (a, b) = self.square_ends[(c - 1) as usize];
        (self.geom.dual_site(a), self.geom.dual_site(b))
    }

    fn check(&self, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<()> {
        check_config(&self.geom, sigma, eta)
    }

    /// Per component root: bits of sources it contains and of regions it escapes.
    fn source_escape(
        &self,
        uf: &mut UnionFind,
        sigma: &SpinConfig,
        eta: &BoundarySpec,
        s: i8,
        sources: &[Vec<usize>; 4],
        outside: &[u8],
    ) -> (Vec<u8>, Vec<u8>) {
        let n = self.geom.n_sites();
        let mut src = vec![0u8; self.geom.n_nodes()];
        let mut esc = vec![0u8; self.geom.n_nodes()];
        for (i, out) in outside.iter().enumerate() {
            if sigma.get(i) == s {
                let r = uf.find(i);
                esc[r] |= out;
            }
        }
        for (i, nodes) in sources.iter().enumerate() {
            for &v in nodes {
                if node_spin(n, sigma, eta, v) == s {
                    let r = uf.find(v);
                    src[r] |= 1 << i;
                }
            }
        }
        (src, esc)
    }

    /// `D`: no plus path from `Γ_i` to a site of `Λ` outside `T^i_{N,k+3j}`, for all `i`.
    pub fn in_d(&self, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<bool> {
        self.check(sigma, eta)?;
        let mut uf = sign_components(&self.geom, sigma, eta, 1);
        let (src, esc) = self.source_escape(&mut uf, sigma, eta, 1, &self.strips, &self.outside_triangle);
        Ok(src.iter().zip(&esc).all(|(s, e)| s & e == 0))
    }

    /// `∂_in D`: `σ ∈ D` and some single flip leaves `D`. Since `D` is
    /// decreasing only minus-to-plus flips can leave it; the flipped site
    /// merges its plus neighbours' clusters.
    pub fn in_inner_boundary_d(&self, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<bool> {
        self.check(sigma, eta)?;
        let n = self.geom.n_sites();
        let mut uf = sign_components(&self.geom, sigma, eta, 1);
        let (src, esc) = self.source_escape(&mut uf, sigma, eta, 1, &self.strips, &self.outside_triangle);
        if src.iter().zip(&esc).any(|(s, e)| s & e != 0) {
            return Ok(false);
        }
        for x in 0..n {
            if sigma.get(x) == 1 {
                continue;
            }
            let (mut s, mut e) = (0u8, self.outside_triangle[x]);
            for &v in self.geom.neighbors(x) {
                if node_spin(n, sigma, eta, v) == 1 {
                    let r = uf.find(v);
                    s |= src[r];
                    e |= esc[r];
                }
            }
            if s & e != 0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `D̂`: the minus cluster of each corner region stays in the square containing it.
    pub fn in_dhat(&self, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<bool> {
        self.check(sigma, eta)?;
        let mut uf = sign_components(&self.geom, sigma, eta, -1);
        // square c holds corner region c-1
        let sources: [Vec<usize>; 4] = std::array::from_fn(|c| self.corners[(c + 3) % 4].clone());
        let (src, esc) = self.source_escape(&mut uf, sigma, eta, -1, &sources, &self.outside_square);
        Ok(src.iter().zip(&esc).all(|(s, e)| s & e == 0))
    }

    /// Pairs `(i, j)`, `i < j`, with `Γ_i` and `Γ_j` plus-connected in `B̄(Λ)`.
    pub fn strip_connectivity(&self, sigma: &SpinConfig, eta: &BoundarySpec) -> Result<Vec<(u8, u8)>> {
        self.check(sigma, eta)?;
        let n = self.geom.n_sites();
        let mut uf = sign_components(&self.geom, sigma, eta, 1);
        let mut src = vec![0u8; self.geom.n_nodes()];
        for (i, nodes) in self.strips.iter().enumerate() {
            for &v in nodes {
                if node_spin(n, sigma, eta, v) == 1 {
                    let r = uf.find(v);
                    src[r] |= 1 << i;
                }
            }
        }
        let mut joined = 0u16;
        for bits in src.into_iter().filter(|&b| b != 0) {
            for a in 0..4 {
                for b in a + 1..4 {
                    if bits >> a & 1 == 1 && bits >> b & 1 == 1 {
                        joined |= 1 << (a * 4 + b);
                    }
                }
            }
        }
        let mut pairs = Vec::new();
        for a in 0..4u8 {
            for b in a + 1..4 {
                if joined >> (a * 4 + b) & 1 == 1 {
                    pairs.push((a + 1, b + 1));
                }
            }
        }
        Ok(pairs)
    }

    fn dual_uf(&self, omega: &BondConfig, mask: &[bool]) -> Result<UnionFind> {
        if omega.len() != self.geom.n_bonds() {
            return Err(Error::GeometryMismatch {
                expected: self.geom.n_bonds(),
                got: omega.len(),
            });
        }
        let mut uf = UnionFind::new(self.geom.n_dual_sites());
        for e in 0..omega.len() {
            if !omega.is_open(e) {
                let (a, b) = self.geom.dual_bond(e);
                if mask[a] && mask[b] {
                    uf.union(a, b);
                }
            }
        }
        Ok(uf)
    }

    /// `E_i`: `Γ*_{i-1,i}` and `Γ*_{i,i+1}` joined by open dual bonds inside
    /// `T^i_{N+½, k+j+½}`.
    pub fn dual_crossing_e(&self, omega: &BondConfig, i: u8) -> Result<bool> {
        if !(1..=4).contains(&i) {
            return Err(Error::InvalidSide(i));
        }
        let t = (i - 1) as usize;
        let mask = &self.dual_triangle[t];
        let mut uf = self.dual_uf(omega, mask)?;
        let from = &self.dual_corners[(t + 3) % 4];
        let to = &self.dual_corners[t];
        let roots: std::collections::HashSet<usize> =
            from.iter().filter(|&&d| mask[d]).map(|&d| uf.find(d)).collect();
        Ok(to.iter().filter(|&&d| mask[d]).any(|&d| roots.contains(&uf.find(d))))
    }

    /// `F` in square `c`: the two strip ends inside it joined by open dual bonds within the square.
    pub fn square_crossing_f(&self, omega: &BondConfig, c: u8) -> Result<bool> {
        if !(1..=4).contains(&c) {
            return Err(Error::InvalidSide(c));
        }
        let t = (c - 1) as usize;
        let mut uf = self.dual_uf(omega, &self.dual_square[t])?;
        let (a, b) = self.square_ends[t];
        Ok(uf.connected(a, b))
    }

    /// Evaluate a registry event on a joint configuration.
    pub fn eval(&self, kind: EventKind, sigma: &SpinConfig, eta: &BoundarySpec, omega: &BondConfig) -> Result<bool> {
        match kind {
            EventKind::D => self.in_d(sigma, eta),
            EventKind::InnerD => self.in_inner_boundary_d(sigma, eta),
            EventKind::Dhat => self.in_dhat(sigma, eta),
            EventKind::E(i) => self.dual_crossing_e(omega, i),
            EventKind::F(c) => self.square_crossing_f(omega, c),
            EventKind::AN => Ok(self.strip_connectivity(sigma, eta)?.len() == 6),
        }
    }
}
