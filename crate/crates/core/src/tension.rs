//! Dual surface tension from two-point dual connectivity in a wired box,
//! norm checks, the brute-force geometric inequality for strip-to-strip
//! paths, and the crossover point `k*`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::SwendsenWang;
use crate::geometry::{BoundarySpec, DualSite, Geometry};
use crate::ising::ModelParams;
use crate::spectral::McConfig;
use crate::stats::{BatchMeans, Estimate};
use crate::union_find::UnionFind;

/// Dual two-point connectivities along one SW chain with `η ≡ +1`
/// (wired FK, free dual). Pairs are dual-site ordinals of `geom`.
pub fn dual_pair_connectivities(
    geom: &Geometry,
    params: ModelParams,
    pairs: &[(DualSite, DualSite)],
    cfg: &McConfig,
) -> Result<Vec<Estimate>> {
    if cfg.thin == 0 {
        return Err(Error::InvalidParameter("thin must be at least 1".into()));
    }
    let ords = pairs
        .iter()
        .map(|&(a, b)| {
            let o = |d: DualSite| {
                geom.dual_site_ordinal(d)
                    .ok_or_else(|| Error::NearBoundary(format!("{d:?} outside the dual grid")))
            };
            Ok((o(a)?, o(b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = ords
        .iter()
        .map(|_| BatchMeans::new(cfg.batches, cfg.samples))
        .collect::<Result<Vec<_>>>()?;
    let eta = BoundarySpec::uniform(geom, 1)?;
    let mut sw = SwendsenWang::new(geom, &eta, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sigma = cfg.start.initial(geom, &eta);
    let mut uf = UnionFind::new(geom.n_dual_sites());
    for _ in 0..cfg.burn_in {
        sw.sweep(&mut sigma, &mut rng)?;
    }
    for _ in 0..cfg.samples {
        for _ in 0..cfg.thin {
            sw.sweep(&mut sigma, &mut rng)?;
        }
        uf.reset();
        let omega = sw.bonds();
        for e in 0..geom.n_bonds() {
            if !omega.is_open(e) {
                let (a, b) = geom.dual_bond(e);
                uf.union(a, b);
            }
        }
        for (a, &(s, t)) in acc.iter_mut().zip(&ords) {
            a.push(uf.connected(s, t) as u8 as f64);
        }
    }
    acc.into_iter().map(|a| a.finish()).collect()
}

/// Centred dual endpoints `0*` and `(n v)*` in `Λ_M`, at least `M/4` from the dual rim.
pub fn centred_pair(m: i32, displacement: (i32, i32)) -> Result<(DualSite, DualSite)> {
    let (dx, dy) = displacement;
    let a = DualSite::new(-(dx + 1).div_euclid(2), -(dy + 1).div_euclid(2));
    let b = DualSite::new(a.x + dx, a.y + dy);
    // distance to the rim at ±(M + ½), in doubled units
    let rim = 2 * m as i64 + 1;
    let guard = (m as i64 * 2) / 4;
    for d in [a, b] {
        let p = d.half_point();
        if rim - p.x.abs().max(p.y.abs()) < guard {
            return Err(Error::NearBoundary(format!(
                "displacement ({dx}, {dy}) reaches within M/4 of the boundary of Λ_{m}"
            )));
        }
    }
    Ok((a, b))
}

/// `P(0* ↔* x*)` for a centred displacement `x` in the wired box `Λ_M`.
pub fn connectivity_probability(params: ModelParams, m: i64, displacement: (i32, i32), cfg: &McConfig) -> Result<Estimate> {
    let geom = Geometry::build_box(m)?;
    let pair = centred_pair(m as i32, displacement)?;
    if pair.0 == pair.1 {
        return Ok(Estimate::exact(1.0));
    }
    Ok(dual_pair_connectivities(&geom, params, &[pair], cfg)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub n: u32,
    pub p_hat: f64,
    pub se: f64,
    pub tau_n: f64,
    pub tau_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalTension {
    pub beta: f64,
    pub direction: (i32, i32),
    pub box_m: i64,
    pub boundary: String,
    pub ladder: Vec<LadderPoint>,
    /// Last ladder value.
    pub tau: f64,
    /// Last-point s.e. widened by the spread of the last two points.
    pub tau_se: f64,
    /// Ladder pairs `(n, n')`, `n < n'`, with `τ̂_{n'}` above `τ̂_n` beyond 3 s.e.
    pub non_monotone: Vec<(u32, u32)>,
}

impl DirectionalTension {
    pub fn from_estimates(beta: f64, direction: (i32, i32), box_m: i64, points: &[(u32, Estimate)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty ladder".into()));
        }
        let mut ladder = Vec::with_capacity(points.len());
        for &(n, e) in points {
            if e.mean <= 0.0 {
                return Err(Error::ZeroHits(n));
            }
            ladder.push(LadderPoint {
                n,
                p_hat: e.mean,
                se: e.stderr,
                tau_n: -e.mean.ln() / n as f64,
                tau_se: e.stderr / (e.mean * n as f64),
            });
        }
        ladder.sort_by_key(|p| p.n);
        let last = ladder[ladder.len() - 1];
        let spread = if ladder.len() > 1 {
            (last.tau_n - ladder[ladder.len() - 2].tau_n).abs()
        } else {
            0.0
        };
        let mut non_monotone = Vec::new();
        for (i, a) in ladder.iter().enumerate() {
            for b in &ladder[i + 1..] {
                if b.tau_n > a.tau_n + 3.0 * a.tau_se.hypot(b.tau_se) {
                    non_monotone.push((a.n, b.n));
                }
            }
        }
        Ok(DirectionalTension {
            beta,
            direction,
            box_m,
            boundary: "wired".into(),
            ladder,
            tau: last.tau_n,
            tau_se: last.tau_se.hypot(spread),
            non_monotone,
        })
    }

    pub fn direction_label(&self) -> String {
        format!("{}:{}", self.direction.0, self.direction.1)
    }
}

/// Tensions for several directions from one chain on `Λ_M`.
pub fn estimate_taus(
    params: ModelParams,
    directions: &[((i32, i32), Vec<u32>)],
    m: i64,
    cfg: &McConfig,
) -> Result<Vec<DirectionalTension>> {
    let geom = Geometry::build_box(m)?;
    let mut pairs = Vec::new();
    for (dir, ladder) in directions {
        if *dir == (0, 0) {
            return Err(Error::InvalidParameter("zero direction".into()));
        }
        for &n in ladder {
            if n == 0 {
                return Err(Error::InvalidParameter("ladder entries must be positive".into()));
            }
            pairs.push(centred_pair(m as i32, (dir.0 * n as i32, dir.1 * n as i32))?);
        }
    }
    let est = dual_pair_connectivities(&geom, params, &pairs, cfg)?;
    let mut it = est.into_iter();
    directions
        .iter()
        .map(|(dir, ladder)| {
            let pts: Vec<(u32, Estimate)> = ladder.iter().map(|&n| (n, it.next().expect("one estimate per pair"))).collect();
            DirectionalTension::from_estimates(params.beta, *dir, m, &pts)
        })
        .collect()
}

pub fn estimate_tau(params: ModelParams, direction: (i32, i32), ladder: &[u32], m: i64, cfg: &McConfig) -> Result<DirectionalTension> {
    Ok(estimate_taus(params, &[(direction, ladder.to_vec())], m, cfg)?.remove(0))
}

/// Internal-consistency checks on one ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    /// `τ̂_{2n} ≤ τ̂_n + 3 s.e.` for every doubling pair in the ladder.
    pub subadditive: bool,
    /// `P̂_n ≤ exp(-n τ_lower) + 3 s.e.` with `τ_lower = τ̂ - 3 s.e.`.
    pub upper_bound: bool,
    /// `τ̂_n ≥ τ̂ - 3 s.e.` for every ladder point.
    pub above_limit: bool,
    /// `τ̂ > 3 s.e.`.
    pub positive: bool,
}

impl LadderReport {
    pub fn all(&self) -> bool {
        self.subadditive && self.upper_bound && self.above_limit && self.positive
    }
}

pub fn ladder_report(t: &DirectionalTension) -> LadderReport {
    let find = |n: u32| t.ladder.iter().find(|p| p.n == n);
    let subadditive = t
        .ladder
        .iter()
        .filter_map(|a| find(2 * a.n).map(|b| (a, b)))
        .all(|(a, b)| b.tau_n <= a.tau_n + 3.0 * a.tau_se.hypot(b.tau_se));
    let lower = t.tau - 3.0 * t.tau_se;
    let upper_bound = t
        .ladder
        .iter()
        .all(|p| p.p_hat <= (-(p.n as f64) * lower).exp() + 3.0 * p.se);
    let above_limit = t
        .ladder
        .iter()
        .all(|p| p.tau_n >= t.tau - 3.0 * p.tau_se.hypot(t.tau_se));
    LadderReport {
        subadditive,
        upper_bound,
        above_limit,
        positive: t.tau > 3.0 * t.tau_se,
    }
}

/// Norm-equivalence ratio `τ(e1+e2) / (√2 τ(e1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivnormReport {
    pub ratio: f64,
    pub ratio_se: f64,
    /// Within `[1/√2, √2]` up to 3 s.e.
    pub within_norm_bracket: bool,
    /// Within `[1/2, 2]` up to 3 s.e.
    pub within_loose_bracket: bool,
}

pub fn check_equivnorm(tau_e1: (f64, f64), tau_diag: (f64, f64)) -> Result<EquivnormReport> {
    let ((a, sa), (b, sb)) = (tau_e1, tau_diag);
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("tensions must be positive, got {a} and {b}")));
    }
    let r = b / (std::f64::consts::SQRT_2 * a);
    let se = r * (sa / a).hypot(sb / b);
    let inside = |lo: f64, hi: f64| r + 3.0 * se >= lo && r - 3.0 * se <= hi;
    Ok(EquivnormReport {
        ratio: r,
        ratio_se: se,
        within_norm_bracket: inside(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::SQRT_2),
        within_loose_bracket: inside(0.5, 2.0),
    })
}

/// Convex, positively homogeneous gauge with axis and diagonal symmetry,
/// given by its unit ball polygon as facets `n · v ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonNorm {
    normals: Vec<(f64, f64)>,
    vertices: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl PolygonNorm {
    /// From directional values `τ(v)`; each sample is copied to its 8 images.
    pub fn from_samples(samples: &[((f64, f64), f64)]) -> Result<Self> {
        let mut pts = Vec::new();
        for &((x, y), t) in samples {
            if !(t > 0.0 && t.is_finite()) || (x == 0.0 && y == 0.0) {
                return Err(Error::InvalidParameter(format!("bad norm sample ({x}, {y}) -> {t}")));
            }
            let (px, py) = (x / t, y / t);
            for (a, b) in [(px, py), (py, px)] {
                for (sa, sb) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                    pts.push((sa * a, sb * b));
                }
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::InvalidParameter("degenerate norm samples".into()));
        }
        // monotone chain, counter-clockwise
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-15 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        let normals = (0..hull.len())
            .map(|i| {
                let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
                let det = p.0 * q.1 - q.0 * p.1;
                ((q.1 - p.1) / det, (p.0 - q.0) / det)
            })
            .collect();
        Ok(PolygonNorm { normals, vertices: hull })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn eval(&self, v: (f64, f64)) -> f64 {
        self.normals
            .iter()
            .map(|n| n.0 * v.0 + n.1 * v.1)
            .fold(0.0, f64::max)
    }
}

/// A symmetric norm on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NormModel {
    L1,
    L2,
    LInf,
    /// `a |v|_1 + b |v|_2 + c |v|_∞` with nonnegative weights, not all zero.
    Weighted { l1: f64, l2: f64, linf: f64 },
    Polygon(PolygonNorm),
}

impl NormModel {
    /// Polygon model through Monte Carlo tensions in the `e1` and `e1+e2` directions.
    pub fn from_tensions(tau_e1: f64, tau_diag: f64) -> Result<Self> {
        Ok(NormModel::Polygon(PolygonNorm::from_samples(&[
            ((1.0, 0.0), tau_e1),
            ((1.0, 1.0), tau_diag),
        ])?))
    }

    pub fn eval(&self, v: (f64, f64)) -> f64 {
        let (a, b) = (v.0.abs(), v.1.abs());
        match self {
            NormModel::L1 => a + b,
            NormModel::L2 => a.hypot(b),
            NormModel::LInf => a.max(b),
            NormModel::Weighted { l1, l2, linf } => l1 * (a + b) + l2 * a.hypot(b) + linf * a.max(b),
            NormModel::Polygon(p) => p.eval(v),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormModel::L1 => "l1",
            NormModel::L2 => "l2",
            NormModel::LInf => "linf",
            NormModel::Weighted { .. } => "weighted",
            NormModel::Polygon(_) => "polygon",
        }
    }
}

fn check_normprop(n: i64, k: i64, m: i64) -> Result<()> {
    if !(0 < k && k < k + 2 * m && k + 2 * m < n) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k < k + 2m < N, got N={n}, k={k}, m={m}"
        )));
    }
    Ok(())
}

/// `z` in the closed upper half-plane `z2 ≥ -N-½` and outside the closed
/// triangle `T_{N+½, k+2m+½}`.
fn z_admissible(n: i64, k: i64, m: i64, z: (f64, f64)) -> bool {
    let (h, b) = (n as f64 + 0.5, (k + 2 * m) as f64 + 0.5);
    let inside = z.1 >= -h && z.0.abs() + z.1 <= b - h;
    z.1 >= -h && !inside
}

/// `(τ(z-x) + τ(y-z) - 2k τ(e1)) / m` for one admissible triple.
pub fn normprop_value(norm: &NormModel, n: i64, k: i64, m: i64, x1: f64, y1: f64, z: (f64, f64)) -> Result<f64> {
    check_normprop(n, k, m)?;
    if x1 > -(k as f64) || y1 < k as f64 {
        return Err(Error::Inadmissible(format!("endpoints x1={x1}, y1={y1}")));
    }
    if !z_admissible(n, k, m, z) {
        return Err(Error::Inadmissible(format!("z={z:?} lies in the excluded triangle or below the line")));
    }
    let base = -(n as f64) - 0.5;
    let t1 = norm.eval((1.0, 0.0));
    Ok((norm.eval((z.0 - x1, z.1 - base)) + norm.eval((y1 - z.0, base - z.1)) - 2.0 * k as f64 * t1) / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormpropResult {
    pub min_excess: f64,
    pub x1: f64,
    pub y1: f64,
    pub z: (f64, f64),
    pub evaluated: usize,
}

/// Grid minimum of the normalized excess. Grid points: `x1 ∈ -k - hZ`,
/// `y1 ∈ k + hZ`, `z ∈ (½ + hZ) x (-N-½ + hZ)`, inside the window
/// `|x1|, |y1|, |z1| ≤ 2N`, `z2 ≤ N + ½`. Halving `h` refines the grid.
pub fn normprop_excess(norm: &NormModel, n: i64, k: i64, m: i64, step: f64) -> Result<NormpropResult> {
    check_normprop(n, k, m)?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step must lie in (0, 1], got {step}")));
    }
    let w = 2.0 * n as f64;
    let base = -(n as f64) - 0.5;
    let count = |span: f64| (span / step + 1e-9).floor() as i64;
    let xs: Vec<f64> = (0..=count(w - k as f64)).map(|i| -(k as f64) - i as f64 * step).collect();
    let ys: Vec<f64> = xs.iter().map(|x| -x).collect();
    let zx_lo = -((w - 0.5) / step + 1e-9).floor() as i64;
    let zx_hi = ((w - 0.5) / step + 1e-9).floor() as i64;
    let zy_hi = count(2.0 * n as f64 + 1.0);
    let t1 = norm.eval((1.0, 0.0));
    let mut best = NormpropResult {
        min_excess: f64::INFINITY,
        x1: 0.0,
        y1: 0.0,
        z: (0.0, 0.0),
        evaluated: 0,
    };
    for iz in zx_lo..=zx_hi {
        let z1 = 0.5 + iz as f64 * step;
        for jz in 0..=zy_hi {
            let z = (z1, base + jz as f64 * step);
            if !z_admissible(n, k, m, z) {
                continue;
            }
            // the objective separates in x and y
            let (bx, vx) = xs
                .iter()
                .map(|&x| (x, norm.eval((z.0 - x, z.1 - base))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty grid");
            let (by, vy) = ys
                .iter()
                .map(|&y| (y, norm.eval((y - z.0, base - z.1))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty grid");
            best.evaluated += xs.len() * ys.len();
            let v = (vx + vy - 2.0 * k as f64 * t1) / m as f64;
            if v < best.min_excess {
                best = NormpropResult {
                    min_excess: v,
                    x1: bx,
                    y1: by,
                    z,
                    evaluated: best.evaluated,
                };
            }
        }
    }
    Ok(best)
}

/// `k* = N τ(e1+e2) / (2 τ(e1) + τ(e1+e2))`.
pub fn crossover_k(n: f64, tau_e1: f64, tau_diag: f64) -> Result<f64> {
    if !(tau_e1 > 0.0 && tau_diag > 0.0 && n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "crossover needs positive inputs, got N={n}, τ(e1)={tau_e1}, τ(e1+e2)={tau_diag}"
        )));
    }
    Ok(n * tau_diag / (2.0 * tau_e1 + tau_diag))
}

/// `k*` with delta-method error from independent tension errors.
pub fn crossover_k_estimate(n: f64, tau_e1: (f64, f64), tau_diag: (f64, f64)) -> Result<(f64, f64)> {
    let k = crossover_k(n, tau_e1.0, tau_diag.0)?;
    let d = (2.0 * tau_e1.0 + tau_diag.0).powi(2);
    let g1 = -2.0 * n * tau_diag.0 / d;
    let g2 = 2.0 * n * tau_e1.0 / d;
    Ok((k, (g1 * tau_e1.1).hypot(g2 * tau_diag.1)))
}

/// CSV with columns `beta, direction, n, p_hat, se, tau_n, tau_extrap, tau_se`.
pub fn write_tension_csv<W: Write>(out: W, tensions: &[DirectionalTension]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["beta", "direction", "n", "p_hat", "se", "tau_n", "tau_extrap", "tau_se"])
        .map_err(io)?;
    for t in tensions {
        for p in &t.ladder {
            w.write_record([
                t.beta.to_string(),
                t.direction_label(),
                p.n.to_string(),
                p.p_hat.to_string(),
                p.se.to_string(),
                p.tau_n.to_string(),
                t.tau.to_string(),
                t.tau_se.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
