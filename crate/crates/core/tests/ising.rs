mod common;

use cornergap::geometry::{eta, BoundarySpec, Geometry};
use cornergap::ising::{flip_rate, gibbs_table, p_c, ModelParams, RateFamily, SpinConfig, BETA_C};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn critical_point() {
    assert!((p_c() - 2f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!((1.0 - (-BETA_C).exp() - p_c()).abs() < 1e-12);
    assert!((BETA_C - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-15);
}

#[test]
fn gibbs_matches_enumeration_on_2x2() {
    let g = Geometry::rectangle(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for beta in [0.0, 0.4, BETA_C, 1.7] {
        let eta = common::random_eta(&g, &mut rng);
        let ours = gibbs_table(&g, &eta, ModelParams::new(beta).unwrap()).unwrap();
        let oracle = common::gibbs(&g, &eta, beta);
        assert!(common::tv(&ours, &oracle) < 1e-13, "beta {beta}");
    }
}

#[test]
fn box_boundary_all_plus_at_k_equals_n() {
    let g = Geometry::build_box(3).unwrap();
    for e in [0, -1] {
        assert_eq!(eta(&g, 3, e).unwrap().count(1), g.n_boundary());
    }
}

fn rect() -> impl Strategy<Value = (i64, i64)> {
    (1i64..=3, 1i64..=3).prop_filter("at most 6 sites", |(w, h)| w * h <= 6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn detailed_balance((w, h) in rect(), beta in 0.0f64..3.0, seed in any::<u64>(), metro in any::<bool>()) {
        let g = Geometry::rectangle(w, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = common::random_eta(&g, &mut rng);
        let params = ModelParams::new(beta).unwrap();
        let family = if metro { RateFamily::Metropolis } else { RateFamily::HeatBath };
        let mu = gibbs_table(&g, &eta, params).unwrap();
        let n = g.n_sites();
        for s in 0..1u64 << n {
            let sigma = SpinConfig::from_index(n, s);
            for x in 0..n {
                let t = s ^ (1 << x);
                let c_s = flip_rate(&g, x, &sigma, &eta, params, family);
                let c_t = flip_rate(&g, x, &SpinConfig::from_index(n, t), &eta, params, family);
                prop_assert!(c_s > 0.0 && c_s <= 1.0);
                let (l, r) = (mu[s as usize] * c_s, mu[t as usize] * c_t);
                prop_assert!((l - r).abs() <= 1e-12 * l.max(r));
            }
        }
    }

    #[test]
    fn heat_bath_attractive(beta in 0.0f64..3.0, seed in any::<u64>()) {
        // σ ≤ σ' pointwise: rate of turning x plus is smaller under σ.
        let g = Geometry::rectangle(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = common::random_eta(&g, &mut rng);
        let params = ModelParams::new(beta).unwrap();
        let n = g.n_sites();
        let lo = SpinConfig::random(n, &mut rng);
        let mut hi = lo.clone();
        for i in 0..n {
            if rand::Rng::gen_bool(&mut rng, 0.5) {
                hi.set(i, 1);
            }
        }
        for x in 0..n {
            let up = |s: &SpinConfig| {
                let mut m = s.clone();
                m.set(x, -1);
                flip_rate(&g, x, &m, &eta, params, RateFamily::HeatBath)
            };
            prop_assert!(up(&lo) <= up(&hi) + 1e-15);
        }
    }

    #[test]
    fn rates_match_oracle(seed in any::<u64>(), beta in 0.0f64..2.5) {
        let g = Geometry::rectangle(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta: BoundarySpec = common::random_eta(&g, &mut rng);
        let params = ModelParams::new(beta).unwrap();
        for s in 0..16u64 {
            for x in 0..4 {
                let ours = flip_rate(&g, x, &SpinConfig::from_index(4, s), &eta, params, RateFamily::HeatBath);
                prop_assert!((ours - common::heat_bath_rate(&g, &eta, beta, s, x)).abs() < 1e-13);
            }
        }
    }
}
