//! Independent oracles: brute-force enumeration, depth-first search and a
//! cyclic Jacobi eigensolver. None of them call into the library's
//! cluster, event or spectral code.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use cornergap::geometry::{BoundarySpec, Geometry, Site};
use cornergap::ising::{ModelParams, RateFamily};

/// Spin of node `v` in state `s` (bit set means `+1`); boundary nodes read `η`.
pub fn node_spin(geom: &Geometry, eta: &BoundarySpec, s: u64, v: usize) -> i8 {
    let n = geom.n_sites();
    if v < n {
        if s >> v & 1 == 1 {
            1
        } else {
            -1
        }
    } else {
        eta.get(v - n)
    }
}

/// `H(σ) = -Σ σ_a σ_b` over every bond, boundary spins from `η`.
pub fn energy(geom: &Geometry, eta: &BoundarySpec, s: u64) -> f64 {
    -geom
        .bonds()
        .iter()
        .map(|b| node_spin(geom, eta, s, b.a) as f64 * node_spin(geom, eta, s, b.b) as f64)
        .sum::<f64>()
}

/// Gibbs law `∝ exp(-β H / 2)` by enumeration.
pub fn gibbs(geom: &Geometry, eta: &BoundarySpec, beta: f64) -> Vec<f64> {
    let dim = 1u64 << geom.n_sites();
    let w: Vec<f64> = (0..dim).map(|s| (-0.5 * beta * energy(geom, eta, s)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Heat-bath rate of flipping site `x` in state `s`.
pub fn heat_bath_rate(geom: &Geometry, eta: &BoundarySpec, beta: f64, s: u64, x: usize) -> f64 {
    let e0 = energy(geom, eta, s);
    let e1 = energy(geom, eta, s ^ (1 << x));
    1.0 / (1.0 + (0.5 * beta * (e1 - e0)).exp())
}

pub fn rate(geom: &Geometry, eta: &BoundarySpec, beta: f64, family: RateFamily, s: u64, x: usize) -> f64 {
    let d = energy(geom, eta, s ^ (1 << x)) - energy(geom, eta, s);
    match family {
        RateFamily::HeatBath => 1.0 / (1.0 + (0.5 * beta * d).exp()),
        RateFamily::Metropolis => (-0.5 * beta * d).exp().min(1.0),
    }
}

/// Dense `-A` symmetrized in `L²(μ)`.
pub fn symmetrized(geom: &Geometry, eta: &BoundarySpec, beta: f64, family: RateFamily) -> Vec<Vec<f64>> {
    let n = geom.n_sites();
    let dim = 1usize << n;
    let mut m = vec![vec![0.0; dim]; dim];
    for s in 0..dim {
        for x in 0..n {
            let t = s ^ (1 << x);
            let c_s = rate(geom, eta, beta, family, s as u64, x);
            let c_t = rate(geom, eta, beta, family, t as u64, x);
            m[s][s] += c_s;
            m[s][t] = -(c_s * c_t).sqrt();
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn oracle_gap(geom: &Geometry, eta: &BoundarySpec, beta: f64, family: RateFamily) -> f64 {
    jacobi_eigenvalues(symmetrized(geom, eta, beta, family))[1]
}

/// Component label of every node of a graph given by an edge list.
pub fn components(n_nodes: usize, edges: &[(usize, usize)]) -> (Vec<usize>, usize) {
    let mut adj = vec![Vec::new(); n_nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n_nodes];
    let mut count = 0;
    for start in 0..n_nodes {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = count;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn open_edges(geom: &Geometry, omega: u64) -> Vec<(usize, usize)> {
    geom.bonds()
        .iter()
        .enumerate()
        .filter(|(e, _)| omega >> e & 1 == 1)
        .map(|(_, b)| (b.a, b.b))
        .collect()
}

/// Random-cluster weight with boundary spins `η` and `q = 2`: zero when an
/// open path joins opposite signs or an open bond touches `η = 0`;
/// otherwise `p^o (1-p)^c 2^{#clusters with no boundary node}`.
pub fn fk_site_weight(geom: &Geometry, eta: &BoundarySpec, p: f64, omega: u64) -> f64 {
    let n = geom.n_sites();
    let edges = open_edges(geom, omega);
    for &(a, b) in &edges {
        for v in [a, b] {
            if v >= n && eta.get(v - n) == 0 {
                return 0.0;
            }
        }
    }
    let (label, count) = components(geom.n_nodes(), &edges);
    let mut sign = vec![0i8; count];
    for v in n..geom.n_nodes() {
        let s = eta.get(v - n);
        let l = label[v];
        if sign[l] != 0 && sign[l] != s {
            return 0.0;
        }
        sign[l] = s;
    }
    let free = (0..count)
        .filter(|&l| (n..geom.n_nodes()).all(|v| label[v] != l))
        .count();
    let o = edges.len() as i32;
    let c = geom.n_bonds() as i32 - o;
    p.powi(o) * (1.0 - p).powi(c) * 2f64.powi(free as i32)
}

pub fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Law of `ω` when `σ ~ Gibbs` and `ω | σ` is density-`p` percolation on agreeing bonds.
pub fn percolation_pushforward(geom: &Geometry, eta: &BoundarySpec, beta: f64) -> Vec<f64> {
    let p = 1.0 - (-beta).exp();
    let mu = gibbs(geom, eta, beta);
    let nb = geom.n_bonds();
    let mut law = vec![0.0; 1 << nb];
    for (s, &ms) in mu.iter().enumerate() {
        let agree: Vec<bool> = geom
            .bonds()
            .iter()
            .map(|b| {
                let (x, y) = (node_spin(geom, eta, s as u64, b.a), node_spin(geom, eta, s as u64, b.b));
                x != 0 && x == y
            })
            .collect();
        for (w, slot) in law.iter_mut().enumerate() {
            let mut pr = ms;
            for (e, &ok) in agree.iter().enumerate() {
                let open = w >> e & 1 == 1;
                pr *= match (ok, open) {
                    (true, true) => p,
                    (true, false) => 1.0 - p,
                    (false, true) => 0.0,
                    (false, false) => 1.0,
                };
            }
            *slot += pr;
        }
    }
    law
}

/// Law of `σ` when `ω ~ FK` and `σ | ω` labels clusters: boundary clusters
/// take their boundary sign, free clusters a fair coin.
pub fn labeling_pushforward(geom: &Geometry, eta: &BoundarySpec, beta: f64) -> Vec<f64> {
    let p = 1.0 - (-beta).exp();
    let n = geom.n_sites();
    let phi = normalize((0..1u64 << geom.n_bonds()).map(|w| fk_site_weight(geom, eta, p, w)).collect());
    let mut law = vec![0.0; 1 << n];
    for (w, &pw) in phi.iter().enumerate() {
        if pw == 0.0 {
            continue;
        }
        let (label, count) = components(geom.n_nodes(), &open_edges(geom, w as u64));
        let mut forced = vec![0i8; count];
        for v in n..geom.n_nodes() {
            forced[label[v]] = eta.get(v - n);
        }
        let free = (0..count).filter(|&l| forced[l] == 0 && (0..n).any(|x| label[x] == l)).count();
        for (s, slot) in law.iter_mut().enumerate() {
            let ok = (0..n).all(|x| {
                let sp = if s >> x & 1 == 1 { 1 } else { -1 };
                let f = forced[label[x]];
                f == 0 || f == sp
            }) && (0..n).all(|x| {
                (0..n).all(|y| label[x] != label[y] || (s >> x & 1) == (s >> y & 1))
            });
            if ok {
                *slot += pw / 2f64.powi(free as i32);
            }
        }
    }
    law
}

/// Wired random-cluster law (`q = 2`) by enumeration, indexed by bond bits.
pub fn fk_wired_law(geom: &Geometry, p: f64) -> Vec<f64> {
    let n = geom.n_sites();
    let ghost = geom.n_nodes();
    normalize(
        (0..1u64 << geom.n_bonds())
            .map(|w| {
                let mut edges = open_edges(geom, w);
                // all boundary nodes share one vertex
                edges.extend((n..geom.n_nodes()).map(|v| (v, ghost)));
                let (_, count) = components(ghost + 1, &edges);
                let o = w.count_ones() as i32;
                p.powi(o) * (1.0 - p).powi(geom.n_bonds() as i32 - o) * 2f64.powi(count as i32)
            })
            .collect(),
    )
}

/// Free random-cluster law (`q = 2`) on the dual graph, indexed by dual-bond bits.
pub fn fk_free_dual_law(geom: &Geometry, p_star: f64) -> Vec<f64> {
    let nd = geom.n_dual_sites();
    let nb = geom.n_bonds();
    normalize(
        (0..1u64 << nb)
            .map(|w| {
                let edges: Vec<(usize, usize)> = (0..nb).filter(|e| w >> e & 1 == 1).map(|e| geom.dual_bond(e)).collect();
                let (_, count) = components(nd, &edges);
                let o = w.count_ones() as i32;
                p_star.powi(o) * (1.0 - p_star).powi(nb as i32 - o) * 2f64.powi(count as i32)
            })
            .collect(),
    )
}

/// `Γ_i` of `Λ_N`: the `i-1` quarter-turn image of `[-k, k] x {-N-1}`.
pub fn strip(n: i32, k: i32, i: u8) -> Vec<Site> {
    (-k..=k).map(|x| Site::new(x, -n - 1).rotate_n(i - 1)).collect()
}

/// Whether `s` lies in the closed triangle with base on side `i`, base
/// line `y = -h`, half-base `b`, apex `(0, b - h)` (before rotation).
pub fn in_triangle(s: Site, h: i32, b: i32, i: u8) -> bool {
    let q = s.rotate_n((5 - i) % 4);
    q.y >= -h && q.x.abs() + q.y + h <= b
}

/// Breadth-first search through `+1` sites of `Λ ∪ ∂Λ`, starting from the `+1` points of `from`.
pub fn plus_reach(geom: &Geometry, eta: &BoundarySpec, s: u64, from: &[Site]) -> HashSet<Site> {
    let spin = |t: Site| geom.node_of(t).map(|v| node_spin(geom, eta, s, v));
    let mut seen: HashSet<Site> = HashSet::new();
    let mut queue: VecDeque<Site> = from.iter().copied().filter(|&t| spin(t) == Some(1)).collect();
    seen.extend(queue.iter().copied());
    while let Some(t) = queue.pop_front() {
        for u in t.neighbors() {
            // boundary-to-boundary steps are not bonds
            let interior = |x: Site| geom.site_ordinal(x).is_some();
            if !(interior(t) || interior(u)) {
                continue;
            }
            if spin(u) == Some(1) && seen.insert(u) {
                queue.push_back(u);
            }
        }
    }
    seen
}

/// `D` by search: no plus path from `Γ_i` reaches a site of `Λ` outside `T^i_{N, k+3j}`.
pub fn oracle_d(geom: &Geometry, eta: &BoundarySpec, n: i32, k: i32, s: u64) -> bool {
    let j = (n - k) / 4;
    (1..=4u8).all(|i| {
        plus_reach(geom, eta, s, &strip(n, k, i))
            .into_iter()
            .filter(|&t| geom.site_ordinal(t).is_some())
            .all(|t| in_triangle(t, n, k + 3 * j, i))
    })
}

/// Random boundary values in `{-1, 0, 1}`.
pub fn random_eta<R: rand::Rng>(geom: &Geometry, rng: &mut R) -> BoundarySpec {
    BoundarySpec::from_fn(geom, |_| rng.gen_range(-1..=1)).unwrap()
}

pub fn params(beta: f64) -> ModelParams {
    ModelParams::new(beta).unwrap()
}
