//! Acceptance suite: one PASS/FAIL line per criterion. Criterion 10 is a
//! demonstration and reports FLAG instead of failing.

mod common;

use std::io::Write;
use std::time::Instant;

use cornergap::events::{EventContext, EventKind};
use cornergap::fk::{self, fk_law, BondConfig, FkBoundary, SwendsenWang};
use cornergap::geometry::{eta, BoundarySpec, Geometry};
use cornergap::harness::{run_experiment, ChainConfig, ExperimentConfig, ExperimentKind, Grid, RowStatus};
use cornergap::ising::{flip_rate, gibbs_table, p_c, ModelParams, RateFamily, SpinConfig, BETA_C};
use cornergap::spectral::{
    exact_gap, indicator_bound, mc_registry_probabilities, rayleigh_bound, GeneratorMatrix, McConfig, StartState,
};
use cornergap::tension::{
    check_equivnorm, crossover_k_estimate, estimate_taus, ladder_report, normprop_excess, write_tension_csv,
    DirectionalTension, NormModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass,
    Fail,
    Flag,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn params(beta: f64) -> ModelParams {
    ModelParams::new(beta).unwrap()
}

fn constants() -> Outcome {
    let exact = 2f64.sqrt() / (1.0 + 2f64.sqrt());
    let a = (p_c() - exact).abs();
    let b = (1.0 - (-BETA_C).exp() - exact).abs();
    judge(a < 1e-12 && b < 1e-12, format!("|p_c - √2/(1+√2)| = {a:.1e}, |1-e^-β_c - p_c| = {b:.1e}"))
}

fn reversibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut rate_ok, mut checked) = (0.0f64, true, 0usize);
    for (w, h) in [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (2, 3), (3, 2)] {
        let g = Geometry::rectangle(w, h).unwrap();
        let n = g.n_sites();
        for _ in 0..20 {
            let beta = rng.gen_range(0.0..3.0);
            let e = common::random_eta(&g, &mut rng);
            let p = params(beta);
            let mu = gibbs_table(&g, &e, p).unwrap();
            for s in 0..1u64 << n {
                for x in 0..n {
                    let t = s ^ (1 << x);
                    let cs = flip_rate(&g, x, &SpinConfig::from_index(n, s), &e, p, RateFamily::HeatBath);
                    let ct = flip_rate(&g, x, &SpinConfig::from_index(n, t), &e, p, RateFamily::HeatBath);
                    rate_ok &= cs > 0.0 && cs <= 1.0;
                    let (l, r) = (mu[s as usize] * cs, mu[t as usize] * ct);
                    worst = worst.max((l - r).abs() / l.max(r));
                    checked += 1;
                }
            }
        }
    }
    judge(
        worst <= 1e-12 && rate_ok,
        format!("{checked} flip pairs, worst relative imbalance {worst:.1e}, rates in (0,1]: {rate_ok}"),
    )
}

fn gap_of(g: &Geometry, e: &BoundarySpec, beta: f64) -> f64 {
    exact_gap(&GeneratorMatrix::build(g, e, params(beta), RateFamily::HeatBath).unwrap())
        .unwrap()
        .gap
}

fn exact_gap_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let one = Geometry::rectangle(1, 1).unwrap();
    let single = (0..20)
        .map(|_| {
            let e = common::random_eta(&one, &mut rng);
            (gap_of(&one, &e, rng.gen_range(0.0..4.0)) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let mut hot = 0.0f64;
    for (w, h) in [(1, 2), (2, 2), (2, 3), (3, 3)] {
        let g = Geometry::rectangle(w, h).unwrap();
        let e = common::random_eta(&g, &mut rng);
        hot = hot.max((gap_of(&g, &e, 0.0) - 1.0).abs());
    }
    let g = Geometry::rectangle(2, 2).unwrap();
    let mut jac = 0.0f64;
    for _ in 0..10 {
        let e = common::random_eta(&g, &mut rng);
        let beta = rng.gen_range(0.0..3.0);
        jac = jac.max((gap_of(&g, &e, beta) - common::oracle_gap(&g, &e, beta, RateFamily::HeatBath)).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    judge(
        single < 1e-12 && hot < 1e-10 && jac < 1e-8 && secs < 10.0,
        format!("single-site |gap-1| ≤ {single:.1e}; β=0 |gap-1| ≤ {hot:.1e}; 2x2 vs Jacobi ≤ {jac:.1e}; {secs:.2}s"),
    )
}

fn variational_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut fs, mut events, mut violations) = (0usize, 0usize, 0usize);
    for (w, h) in [(2, 2), (3, 3)] {
        let g = Geometry::rectangle(w, h).unwrap();
        for beta in [0.3, BETA_C, 1.6] {
            let e = common::random_eta(&g, &mut rng);
            let gm = GeneratorMatrix::build(&g, &e, params(beta), RateFamily::HeatBath).unwrap();
            let gap = exact_gap(&gm).unwrap().gap;
            let (mut nf, mut ne) = (0, 0);
            while nf < 50 {
                let f: Vec<f64> = (0..gm.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if let Ok(r) = rayleigh_bound(&gm, &f) {
                    violations += (r < gap - 1e-8) as usize;
                    nf += 1;
                }
            }
            while ne < 25 {
                let density = rng.gen_range(0.05..0.95);
                let mask: Vec<bool> = (0..gm.dim()).map(|_| rng.gen_bool(density)).collect();
                let ind: Vec<f64> = mask.iter().map(|&m| m as u8 as f64).collect();
                if let (Ok(r), Ok(ib)) = (rayleigh_bound(&gm, &ind), indicator_bound(&gm, &mask, 1.0)) {
                    violations += (r < gap - 1e-8 || ib.value < r - 1e-8) as usize;
                    ne += 1;
                }
            }
            fs += nf;
            events += ne;
        }
    }
    judge(
        violations == 0,
        format!("{fs} test functions, {events} events over 2x2/3x3 x 3 β; {violations} violations"),
    )
}

fn es_coupling() -> Outcome {
    let t0 = Instant::now();
    // sampled chain on the 3x3 box
    let g = Geometry::build_box(1).unwrap();
    let e = eta(&g, 1, 0).unwrap();
    let beta = 1.2;
    let mu = gibbs_table(&g, &e, params(beta)).unwrap();
    let mut sw = SwendsenWang::new(&g, &e, params(beta)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sigma = SpinConfig::uniform(9, 1);
    let sweeps = 1_000_000;
    let mut hist = vec![0.0; 512];
    for _ in 0..sweeps {
        sw.sweep(&mut sigma, &mut rng).unwrap();
        hist[sigma.to_index() as usize] += 1.0 / sweeps as f64;
    }
    let tv_chain = common::tv(&hist, &mu);

    // both directions on 2x2, exact and sampled
    let g2 = Geometry::rectangle(2, 2).unwrap();
    let e2 = BoundarySpec::from_fn(&g2, |s| match (s.x + s.y).rem_euclid(3) {
        0 => 1,
        1 => -1,
        _ => 0,
    })
    .unwrap();
    let p = 1.0 - (-beta as f64).exp();
    let phi = fk_law(&g2, &FkBoundary::Site(e2.clone()), p, 2.0).unwrap();
    let mu2 = gibbs_table(&g2, &e2, params(beta)).unwrap();
    let exact_perc = common::tv(&phi, &common::percolation_pushforward(&g2, &e2, beta));
    let exact_label = common::tv(&mu2, &common::labeling_pushforward(&g2, &e2, beta));
    let draw = |law: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &w) in law.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        law.len() - 1
    };
    let draws = 2_000_000;
    let mut omega_hist = vec![0.0; phi.len()];
    let mut sigma_hist = vec![0.0; mu2.len()];
    for _ in 0..draws {
        let s = SpinConfig::from_index(4, draw(&mu2, &mut rng) as u64);
        let w = fk::es_percolation(&g2, &s, &e2, p, &mut rng).unwrap();
        omega_hist[w.to_index() as usize] += 1.0 / draws as f64;
        let w = BondConfig::from_index(g2.n_bonds(), draw(&phi, &mut rng) as u64);
        let s = fk::es_label(&g2, &w, &e2, &mut rng).unwrap();
        sigma_hist[s.to_index() as usize] += 1.0 / draws as f64;
    }
    let tv_perc = common::tv(&omega_hist, &phi);
    let tv_label = common::tv(&sigma_hist, &mu2);
    let secs = t0.elapsed().as_secs_f64();
    judge(
        tv_chain <= 0.02 && exact_perc <= 1e-10 && exact_label <= 1e-10 && tv_perc <= 0.02 && tv_label <= 0.02 && secs < 300.0,
        format!(
            "3x3 chain TV {tv_chain:.4} over {sweeps} sweeps; 2x2 exact TV {exact_perc:.1e}/{exact_label:.1e}; \
             sampled TV {tv_perc:.4}/{tv_label:.4}; {secs:.1}s"
        ),
    )
}

fn duality() -> Outcome {
    let g = Geometry::rectangle(2, 2).unwrap();
    let mut worst = 0.0f64;
    for p in [0.3, p_c(), 0.8] {
        let wired = fk_law(&g, &FkBoundary::Wired, p, 2.0).unwrap();
        let mut pushed = vec![0.0; wired.len()];
        for (w, &pw) in wired.iter().enumerate() {
            let d = fk::dual_config(&g, &BondConfig::from_index(g.n_bonds(), w as u64)).unwrap();
            pushed[d.to_index() as usize] += pw;
        }
        let free = common::fk_free_dual_law(&g, fk::dual_p(p, 2.0).unwrap());
        worst = worst.max(common::tv(&pushed, &free));
    }
    judge(worst <= 1e-10, format!("max TV over p ∈ {{0.3, p_c, 0.8}}: {worst:.1e}"))
}

fn bound_machinery() -> Outcome {
    let g = Geometry::build_box(1).unwrap();
    let ctx = EventContext::new(&g, 1).unwrap();
    let e = eta(&g, 1, -1).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for (beta, samples, seed) in [(0.6, 1_000_000u64, 71u64), (BETA_C, 2_000_000, 72)] {
        let gm = GeneratorMatrix::build(&g, &e, params(beta), RateFamily::HeatBath).unwrap();
        let gap = exact_gap(&gm).unwrap().gap;
        let mask = gm.indicator(|s| ctx.in_d(s, &e).unwrap());
        let ib = indicator_bound(&gm, &mask, 1.0).unwrap();
        let cfg = McConfig {
            burn_in: 1000,
            samples,
            thin: 1,
            batches: 20,
            seed,
            start: StartState::Plus,
        };
        let est = mc_registry_probabilities(&ctx, &e, params(beta), &[EventKind::D, EventKind::InnerD], &cfg).unwrap();
        let agree = est[0].agrees_with(ib.mu_s, 3.0) && est[1].agrees_with(ib.mu_inner, 3.0);
        ok &= ib.mu_s > 0.0 && ib.mu_inner > 0.0 && ib.value >= gap && agree;
        lines.push(format!(
            "β={beta:.3}: μ(D)={:.3e} (MC {:.3e}±{:.1e}), μ(∂D)={:.3e} (MC {:.3e}±{:.1e}), bound {:.3} ≥ gap {:.3}",
            ib.mu_s, est[0].mean, est[0].stderr, ib.mu_inner, est[1].mean, est[1].stderr, ib.value, gap
        ));
    }
    judge(ok, lines.join("; "))
}

struct TensionRun {
    beta_ratio: f64,
    e1: DirectionalTension,
    diag: DirectionalTension,
}

fn surface_tension(runs: &mut Vec<TensionRun>) -> Outcome {
    let t0 = Instant::now();
    let m = 64;
    let mut ok = true;
    let mut lines = Vec::new();
    for (ratio, seed) in [(1.2, 81u64), (1.3, 82)] {
        let cfg = McConfig {
            burn_in: 1000,
            samples: 100_000,
            thin: 1,
            batches: 20,
            seed,
            start: StartState::Plus,
        };
        let dirs = [((1, 0), vec![4u32, 8, 12, 16]), ((1, 1), vec![2u32, 4, 6, 8])];
        match estimate_taus(params(ratio * BETA_C), &dirs, m, &cfg) {
            Ok(mut t) => {
                let diag = t.pop().unwrap();
                let e1 = t.pop().unwrap();
                let (r1, r2) = (ladder_report(&e1), ladder_report(&diag));
                let eq = check_equivnorm((e1.tau, e1.tau_se), (diag.tau, diag.tau_se)).unwrap();
                let pass = r1.positive && eq.within_norm_bracket && r1.all() && r2.all();
                ok &= pass;
                lines.push(format!(
                    "{ratio}β_c: τ(e1)={:.4}±{:.4}, τ(e1+e2)={:.4}±{:.4}, ratio {:.3}±{:.3}, ladder e1 {:?} diag {:?}",
                    e1.tau, e1.tau_se, diag.tau, diag.tau_se, eq.ratio, eq.ratio_se, r1, r2
                ));
                runs.push(TensionRun {
                    beta_ratio: ratio,
                    e1,
                    diag,
                });
            }
            Err(err) => {
                ok = false;
                lines.push(format!("{ratio}β_c: {err}"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("tension_ladder.csv");
    let all: Vec<DirectionalTension> = runs.iter().flat_map(|r| [r.e1.clone(), r.diag.clone()]).collect();
    if let Ok(f) = std::fs::File::create(&path) {
        let _ = write_tension_csv(f, &all);
    }
    judge(ok && secs < 1800.0, format!("{}; {secs:.0}s; ladder CSV {}", lines.join("; "), path.display()))
}

fn normprop(runs: &[TensionRun]) -> Outcome {
    let mut norms = vec![NormModel::L1, NormModel::L2, NormModel::LInf];
    match runs.iter().find(|r| r.beta_ratio == 1.3) {
        Some(r) => norms.push(NormModel::from_tensions(r.e1.tau, r.diag.tau).unwrap()),
        None => return judge(false, "no Monte Carlo tensions at 1.3β_c".into()),
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for norm in &norms {
        let res = normprop_excess(norm, 20, 5, 2, 1.0).unwrap();
        ok &= res.min_excess > 0.0;
        parts.push(format!("{} {:.4} at z={:?}", norm.name(), res.min_excess, res.z));
    }
    judge(ok, format!("N=20, k=5, m=2 minimal excess: {}", parts.join(", ")))
}

struct Curve {
    start: StartState,
    pts: Vec<(f64, f64, f64)>,
    crossing: Option<f64>,
    nondecreasing: bool,
    nonincreasing: bool,
}

fn crossover_curve(n: i64, ks: &[i64], start: StartState) -> Result<Curve, String> {
    let cfg = ExperimentConfig {
        kind: ExperimentKind::SwSample,
        seed: 1010,
        output: None,
        grid: Grid {
            n: Some(vec![n]),
            k: Some(ks.to_vec()),
            eps: Some(vec![-1]),
            beta: None,
            beta_over_beta_c: Some(vec![1.3]),
        },
        family: RateFamily::HeatBath,
        chain: Some(ChainConfig {
            sweeps: 5_500,
            burn_in: 500,
            thin: 1,
            batches: 20,
            start,
        }),
        tension: None,
        events: Some(vec!["D".into()]),
        c0: None,
    };
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64, f64)> = out
        .rows
        .iter()
        .filter(|row| row.status == RowStatus::Ok)
        .map(|row| {
            (
                row.k.unwrap() as f64,
                row.outputs["p_D"].as_f64().unwrap(),
                row.outputs["se_D"].as_f64().unwrap(),
            )
        })
        .collect();
    let crossing = pts.windows(2).find_map(|w| {
        let ((k0, p0, _), (k1, p1, _)) = (w[0], w[1]);
        ((p0 - 0.5) * (p1 - 0.5) <= 0.0 && p0 != p1).then(|| k0 + (0.5 - p0) * (k1 - k0) / (p1 - p0))
    });
    Ok(Curve {
        start,
        nondecreasing: pts.windows(2).all(|w| w[1].1 >= w[0].1),
        nonincreasing: pts.windows(2).all(|w| w[1].1 <= w[0].1),
        pts,
        crossing,
    })
}

/// SW at this size and temperature does not tunnel between the two phases in
/// any affordable run, so the curve depends on the start. Both extremal starts
/// are reported; the equilibrium curve lies between them by attractivity.
fn crossover(runs: &[TensionRun]) -> Outcome {
    let Some(r) = runs.iter().find(|r| r.beta_ratio == 1.3) else {
        return Outcome {
            verdict: Verdict::Flag,
            detail: "no tensions at 1.3β_c".into(),
        };
    };
    let n = 32;
    let ks: Vec<i64> = (1..=15).map(|i| 2 * i).collect();
    let (kstar, kstar_se) = crossover_k_estimate(n as f64, (r.e1.tau, r.e1.tau_se), (r.diag.tau, r.diag.tau_se)).unwrap();
    let mut curves = Vec::new();
    for start in [StartState::Minus, StartState::Plus] {
        match crossover_curve(n, &ks, start) {
            Ok(c) => curves.push(c),
            Err(e) => return judge(false, format!("crossover run failed: {e}")),
        }
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("crossover.csv");
    if let Ok(mut f) = std::fs::File::create(&path) {
        let _ = writeln!(f, "N,start,k,mu_D,se,k_star,k_star_se");
        for c in &curves {
            for (k, p, se) in &c.pts {
                let _ = writeln!(f, "{n},{:?},{k},{p},{se},{kstar},{kstar_se}", c.start);
            }
        }
    }
    let mut parts = vec![format!("k*={kstar:.2}±{kstar_se:.2}")];
    let mut ok = true;
    for c in &curves {
        let within = c.crossing.is_some_and(|x| (x - kstar).abs() <= 4.0);
        ok &= c.nondecreasing && within;
        let curve: Vec<String> = c.pts.iter().map(|(k, p, _)| format!("{k}:{p:.2}")).collect();
        parts.push(format!(
            "{:?} start: ½-crossing {}, nondecreasing {}, nonincreasing {}, within ±4 {within}, μ̂(D) {}",
            c.start,
            c.crossing.map_or("none".into(), |x| format!("{x:.2}")),
            c.nondecreasing,
            c.nonincreasing,
            curve.join(" ")
        ));
    }
    let lo = curves.iter().filter_map(|c| c.crossing).fold(f64::INFINITY, f64::min);
    let hi = curves.iter().filter_map(|c| c.crossing).fold(f64::NEG_INFINITY, f64::max);
    parts.push(format!("k* inside start bracket [{lo:.2}, {hi:.2}]: {}", lo <= kstar && kstar <= hi));
    parts.push(format!("CSV {}", path.display()));
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Flag },
        detail: parts.join("; "),
    }
}

fn gap_table() -> Outcome {
    let mut ok = true;
    let mut rows = Vec::new();
    for (w, h) in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)] {
        let g = Geometry::rectangle(w, h).unwrap();
        for (label, v) in [("plus", 1i8), ("free", 0)] {
            let e = BoundarySpec::uniform(&g, v).unwrap();
            let gaps: Vec<String> = [0.5, BETA_C, 1.5].iter().map(|&b| format!("{:.4}", gap_of(&g, &e, b))).collect();
            rows.push(format!("{w}x{h} {label} [{}]", gaps.join(" ")));
        }
    }
    let g = Geometry::build_box(1).unwrap();
    let ctx = EventContext::new(&g, 1).unwrap();
    let mut ratios = Vec::new();
    for eps in [0i8, -1] {
        let e = eta(&g, 1, eps).unwrap();
        for beta in [0.4, 0.6, BETA_C, 1.2] {
            let gm = GeneratorMatrix::build(&g, &e, params(beta), RateFamily::HeatBath).unwrap();
            let gap = exact_gap(&gm).unwrap().gap;
            let mask = gm.indicator(|s| ctx.in_d(s, &e).unwrap());
            let ib = indicator_bound(&gm, &mask, 1.0).unwrap();
            ok &= ib.value >= gap;
            ratios.push(format!("ε={eps} β={beta:.3}: gap {gap:.4}, μ(∂D)/μ(D) {:.4}", ib.mu_inner / ib.mu_s));
        }
    }
    judge(ok, format!("gaps at β∈{{0.5,β_c,1.5}}: {}; N=1, k=1: {}", rows.join(", "), ratios.join("; ")))
}

fn performance() -> Outcome {
    let g = Geometry::rectangle(256, 256).unwrap();
    let e = BoundarySpec::uniform(&g, 1).unwrap();
    let mut sw = SwendsenWang::new(&g, &e, params(1.2 * BETA_C)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut sigma = SpinConfig::uniform(g.n_sites(), 1);
    sw.sweep(&mut sigma, &mut rng).unwrap();
    let t0 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        sw.sweep(&mut sigma, &mut rng).unwrap();
    }
    let per_sweep = t0.elapsed().as_secs_f64() / reps as f64 * 1e3;

    let g = Geometry::build_box(64).unwrap();
    let ctx = EventContext::new(&g, 16).unwrap();
    let e = eta(&g, 16, -1).unwrap();
    let cfg = McConfig {
        burn_in: 0,
        samples: 10_000,
        thin: 1,
        batches: 20,
        seed: 13,
        start: StartState::Plus,
    };
    let t0 = Instant::now();
    let est = mc_registry_probabilities(&ctx, &e, params(1.3 * BETA_C), &[EventKind::D, EventKind::InnerD], &cfg);
    let run = t0.elapsed().as_secs_f64();
    judge(
        per_sweep <= 100.0 && run <= 120.0 && est.is_ok(),
        format!("256x256 sweep {per_sweep:.2} ms; 10^4 sweeps at N=64 with D, ∂D: {run:.1}s"),
    )
}

fn main() {
    let mut runs = Vec::new();
    let criteria: Vec<(u32, Box<dyn FnOnce(&mut Vec<TensionRun>) -> Outcome>)> = vec![
        (1, Box::new(|_| constants())),
        (2, Box::new(|_| reversibility())),
        (3, Box::new(|_| exact_gap_oracles())),
        (4, Box::new(|_| variational_dominance())),
        (5, Box::new(|_| es_coupling())),
        (6, Box::new(|_| duality())),
        (7, Box::new(|_| bound_machinery())),
        (8, Box::new(surface_tension)),
        (9, Box::new(|r| normprop(r))),
        (10, Box::new(|r| crossover(r))),
        (11, Box::new(|_| gap_table())),
        (12, Box::new(|_| performance())),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        let o = f(&mut runs);
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed.push(id);
                "FAIL"
            }
            Verdict::Flag => "FLAG",
        };
        println!("criterion {id:>2}: {tag}  {}", o.detail);
        let _ = std::io::stdout().flush();
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
