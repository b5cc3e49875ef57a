mod common;

use common::{c, gaussian, random_matrix, random_vector, rng};
use pass_cr::channel::ChannelSet;
use pass_cr::config::ScenarioConfig;
use pass_cr::harness::generate_scenario;
use pass_cr::metrics::sinr_and_rates;
use pass_cr::schemes::{solve_scheme, SchemeId};
use pass_cr::wmmse::{
    mse, optimal_pair, reformulated_objective, update_alphas, update_etas, utility, wmmse_g, AlgoParams,
    AuxiliaryState, LemmaForm,
};
use pass_cr::{CMatrix, C64};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn lemma_identity_on_random_triples() {
    let mut r = rng(11);
    for _ in 0..1000 {
        let n = r.gen_range(1..6);
        let cv = random_vector(&mut r, n);
        let dv = random_vector(&mut r, n);
        let e: f64 = 10f64.powf(r.gen_range(-3.0..2.0));
        let s = cv.dotc(&dv);
        let (alpha, eta) = optimal_pair(e, s);
        let g = wmmse_g(eta, alpha, e, &cv, &dv).unwrap();
        let rate = (1.0 + s.norm_sqr() / e).ln();
        assert!((g - rate).abs() <= 1e-9 * rate.max(1.0), "g {g} vs rate {rate}");
        let printed = utility(eta, alpha, e, s, LemmaForm::Printed).unwrap();
        assert!((g - printed - 1.0).abs() <= 4.0 * f64::EPSILON * g.abs().max(1.0));
    }
}

#[test]
fn alpha_beats_a_fine_grid() {
    let mut r = rng(12);
    for _ in 0..100 {
        let s = gaussian(&mut r) * 2.0;
        let e: f64 = r.gen_range(0.1..5.0);
        let eta: f64 = r.gen_range(0.2..5.0);
        let (alpha, _) = optimal_pair(e, s);
        let at = |a: C64| utility(eta, a, e, s, LemmaForm::Corrected).unwrap();
        let best = at(alpha);
        // Coarse grid over a box around the origin, then a fine grid around
        // the coarse winner.
        let span = 2.0 * alpha.norm().max(0.1);
        let mut center = c(0.0, 0.0);
        let mut half = span;
        let mut grid_best = f64::NEG_INFINITY;
        for _ in 0..3 {
            let steps = 200;
            let mut arg = center;
            for i in 0..=steps {
                for j in 0..=steps {
                    let a = center + c(
                        -half + 2.0 * half * i as f64 / steps as f64,
                        -half + 2.0 * half * j as f64 / steps as f64,
                    );
                    let v = at(a);
                    if v > grid_best {
                        grid_best = v;
                        arg = a;
                    }
                }
            }
            center = arg;
            half *= 4.0 / steps as f64;
        }
        assert!(best >= grid_best - 1e-12, "closed form {best} below grid {grid_best}");
        assert!((center - alpha).norm() <= 1e-4 * span, "grid argmax {center} vs {alpha}");
    }
}

#[test]
fn eta_is_stationary() {
    let mut r = rng(13);
    for _ in 0..100 {
        let s = gaussian(&mut r);
        let e: f64 = r.gen_range(0.1..5.0);
        let alpha = gaussian(&mut r) * 0.3;
        let eta = 1.0 / mse(alpha, e, s);
        let f = |x: f64| utility(x, alpha, e, s, LemmaForm::Corrected).unwrap();
        let h = 1e-5 * eta;
        let d1 = (f(eta + h) - f(eta - h)) / (2.0 * h);
        let d2 = (f(eta + h) - 2.0 * f(eta) + f(eta - h)) / (h * h);
        assert!(d1.abs() <= 1e-6 * (1.0 + mse(alpha, e, s)), "derivative {d1}");
        assert!(d2 < 0.0);
    }
}

fn random_channels(r: &mut impl Rng, n: usize, k: usize, p: usize) -> ChannelSet {
    let h = random_matrix(r, n, k);
    let g = random_matrix(r, n, p);
    ChannelSet::from_slices(vec![h], vec![g], 1.0).unwrap()
}

#[test]
fn objective_equals_rate_after_aux_updates() {
    let mut r = rng(14);
    for _ in 0..50 {
        let (n, k) = (r.gen_range(1..5), r.gen_range(1..4));
        let ch = random_channels(&mut r, n, k, 1);
        let w = random_matrix(&mut r, n, k);
        let noise: f64 = r.gen_range(0.1..2.0);
        let mut aux = AuxiliaryState::initial(k);
        update_alphas(&mut aux, &w, &ch, noise);
        update_etas(&mut aux, &w, &ch, noise).unwrap();
        let obj = reformulated_objective(&aux, &w, &ch, noise, LemmaForm::Corrected).unwrap();
        let rate = sinr_and_rates(&w, &ch, noise).sum_rate;
        assert!((obj - rate).abs() <= 1e-9 * rate.max(1.0));
    }
}

#[test]
fn zero_precoder_has_zero_objective() {
    let mut r = rng(15);
    let ch = random_channels(&mut r, 3, 2, 1);
    let w = CMatrix::zeros(3, 2);
    let mut aux = AuxiliaryState::initial(2);
    update_alphas(&mut aux, &w, &ch, 1.0);
    update_etas(&mut aux, &w, &ch, 1.0).unwrap();
    assert_eq!(reformulated_objective(&aux, &w, &ch, 1.0, LemmaForm::Corrected).unwrap(), 0.0);
}

#[test]
fn lemma_form_does_not_change_iterates() {
    let cfg = ScenarioConfig::paper_default();
    let layout = generate_scenario(&cfg, 3).unwrap();
    let mut p = AlgoParams {
        max_outer_iters: 4,
        grid_points: 50,
        ..AlgoParams::default()
    };
    let a = solve_scheme(SchemeId::ContinuousPass, &cfg, &layout, &p).unwrap();
    p.lemma_form = LemmaForm::Printed;
    let b = solve_scheme(SchemeId::ContinuousPass, &cfg, &layout, &p).unwrap();
    assert_eq!(a.w, b.w);
    assert_eq!(a.deployment, b.deployment);
    assert_eq!(a.sum_rate_trace, b.sum_rate_trace);
}

proptest! {
    #[test]
    fn suboptimal_aux_never_exceeds_rate(
        re in -3.0f64..3.0, im in -3.0f64..3.0, e in 0.01f64..10.0,
        ar in -2.0f64..2.0, ai in -2.0f64..2.0, eta in 0.01f64..20.0,
    ) {
        let s = c(re, im);
        let rate = (1.0 + s.norm_sqr() / e).ln();
        let v = utility(eta, c(ar, ai), e, s, LemmaForm::Corrected).unwrap();
        prop_assert!(v <= rate + 1e-12);
    }

    #[test]
    fn optimal_pair_attains_rate(re in -30.0f64..30.0, im in -30.0f64..30.0, e in 1e-3f64..1e3) {
        let s = c(re, im);
        let (alpha, eta) = optimal_pair(e, s);
        let v = utility(eta, alpha, e, s, LemmaForm::Corrected).unwrap();
        let rate = (1.0 + s.norm_sqr() / e).ln();
        prop_assert!((v - rate).abs() <= 1e-9 * rate.max(1.0));
    }
}
