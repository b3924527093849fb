mod common;

use dma_wpt::dma::{b_from_q, build_quadratic_form, q_from_b, reduced_channels, DmaState, QuadraticForm};
use dma_wpt::linalg;
use dma_wpt::manifold::{euclidean_gradient, objective};
use dma_wpt::model::LinkModel;
use dma_wpt::precoder::{precoder_for, EigenOptions};
use dma_wpt::propagation::waveguide_matrix;
use dma_wpt::scenario::{Receiver, Scenario};
use dma_wpt::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn state_strategy() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_form_matches_dense((side, seed) in state_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(frequency_for_side(side), 1.2, 827.67);
        let n = g.element_count();
        let a = random_vector(&mut rng, n);
        let w = random_vector(&mut rng, g.microstrips);
        let phases = random_phases(&mut rng, n);
        let state = DmaState::new(g.microstrips, g.elements_per_microstrip, phases.clone()).unwrap();
        let reduced = reduced_channels(&w, &[&a], &waveguide_matrix(&g), g.elements_per_microstrip).unwrap();
        let got = reduced[0].amplitude(&state.weights());
        let want = dense_amplitude(&g, &phases, &a, &w);
        prop_assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
    }

    #[test]
    fn dma_adjoint_identity((side, seed) in state_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(frequency_for_side(side), 1.2, 827.67);
        let n = g.element_count();
        let state = DmaState::new(g.microstrips, g.elements_per_microstrip, random_phases(&mut rng, n)).unwrap();
        let w = random_vector(&mut rng, g.microstrips);
        let v = random_vector(&mut rng, n);
        let lhs = linalg::inner(&v, &state.apply(&w).unwrap());
        let rhs = linalg::inner(&state.apply_adjoint(&v).unwrap(), &w);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn circle_round_trip(phases in proptest::collection::vec(0.0..std::f64::consts::TAU, 1..32)) {
        let q: Vec<Complex64> = phases.iter().map(|&p| lorentzian(p)).collect();
        let b = b_from_q(&q);
        for bl in &b {
            prop_assert!((bl.norm() - 1.0).abs() <= 1e-12);
        }
        for (x, y) in q_from_b(&b).iter().zip(&q) {
            prop_assert!((x - y).norm() <= 1e-15);
        }
    }

    #[test]
    fn quadratic_form_is_non_positive(seed in any::<u64>(), n in 1usize..12, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors = (0..m).map(|_| random_vector(&mut rng, n)).collect();
        let coefficients = (0..m).map(|k| k as f64 * 0.3).collect();
        let form = QuadraticForm::new(factors, coefficients).unwrap();
        let x = random_vector(&mut rng, n);
        prop_assert!(form.value(&x) <= 0.0);
    }

    #[test]
    fn gradient_is_directional_derivative(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let form = QuadraticForm::new(vec![random_vector(&mut rng, n)], vec![1.0]).unwrap();
        let b: Vec<Complex64> = random_phases(&mut rng, n).iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let d = random_vector(&mut rng, n);
        let h = 1e-6;
        let step = |s: f64| -> Vec<Complex64> { b.iter().zip(&d).map(|(x, y)| x + y * s).collect() };
        let numeric = (objective(&form, &step(h)) - objective(&form, &step(-h))) / (2.0 * h);
        let analytic = linalg::real_inner(&euclidean_gradient(&form, &b), &d);
        prop_assert!((numeric - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3));
    }

    #[test]
    fn precoder_phase_gauge(seed in any::<u64>()) {
        // energies are invariant under a common phase on w
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng);
        let model = LinkModel::new(&scenario).unwrap();
        let g = &scenario.geometry;
        let state = DmaState::new(g.microstrips, g.elements_per_microstrip, random_phases(&mut rng, g.element_count())).unwrap();
        let w = random_vector(&mut rng, g.microstrips);
        let rotated: Vec<Complex64> = w.iter().map(|x| x * Complex64::from_polar(1.0, 1.234)).collect();
        let e1 = model.harvested_energies(&state, &w).unwrap();
        let e2 = model.harvested_energies(&state, &rotated).unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(f64::MIN_POSITIVE));
        }
    }
}

fn random_state(rng: &mut ChaCha8Rng, scenario: &Scenario) -> DmaState {
    let g = &scenario.geometry;
    DmaState::new(g.microstrips, g.elements_per_microstrip, random_phases(rng, g.element_count())).unwrap()
}

#[test]
fn precoder_attains_weighted_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let scenario = random_scenario(&mut rng);
        let model = LinkModel::new(&scenario).unwrap();
        let state = random_state(&mut rng, &scenario);
        let out = precoder_for(&state, &model, EigenOptions::default()).unwrap();
        assert!((out.precoder.power() - scenario.max_power).abs() <= 1e-12 * scenario.max_power);
        // w^H G w = sum alpha E = P * lambda
        let obj = model.weighted_objective(&state, &out.precoder.weights).unwrap();
        assert!((obj - scenario.max_power * out.eigenvalue).abs() <= 1e-9 * obj);
    }
}

#[test]
fn precoder_single_receiver_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut scenario = random_scenario(&mut rng);
        scenario.receivers.truncate(1);
        let model = LinkModel::new(&scenario).unwrap();
        let state = random_state(&mut rng, &scenario);
        let out = precoder_for(&state, &model, EigenOptions::default()).unwrap();
        let v = dense_effective_channel(&scenario.geometry, state.phases(), &model.channels[0].entries);
        let rx = scenario.receivers[0];
        let want = scenario.conversion_efficiency * rx.weight * scenario.max_power * linalg::norm_sqr(&v);
        let got = model.weighted_objective(&state, &out.precoder.weights).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
    }
}

#[test]
fn precoder_invariant_to_weight_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let scenario = random_scenario(&mut rng);
        let mut scaled = scenario.clone();
        for rx in &mut scaled.receivers {
            rx.weight *= 3.7;
        }
        let state = random_state(&mut rng, &scenario);
        let a = precoder_for(&state, &LinkModel::new(&scenario).unwrap(), EigenOptions::default()).unwrap();
        let b = precoder_for(&state, &LinkModel::new(&scaled).unwrap(), EigenOptions::default()).unwrap();
        // same direction up to a common phase
        let overlap = linalg::inner(&a.precoder.weights, &b.precoder.weights).norm();
        assert!((overlap - scenario.max_power).abs() <= 1e-8 * scenario.max_power);
    }
}

#[test]
fn zero_weight_receiver_is_ignored_by_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = geometry(frequency_for_side(3), 1.2, 827.67);
    let n = g.element_count();
    let a1 = random_vector(&mut rng, n);
    let a2 = random_vector(&mut rng, n);
    let w = random_vector(&mut rng, g.microstrips);
    let wg = waveguide_matrix(&g);
    let both = reduced_channels(&w, &[&a1, &a2], &wg, g.elements_per_microstrip).unwrap();
    let one = reduced_channels(&w, &[&a1], &wg, g.elements_per_microstrip).unwrap();
    let f2 = build_quadratic_form(&both, &[0.4, 0.0], 0.5).unwrap();
    let f1 = build_quadratic_form(&one, &[0.4], 0.5).unwrap();
    let x = random_vector(&mut rng, n);
    assert!((f1.value(&x) - f2.value(&x)).abs() <= 1e-14 * f1.value(&x).abs());
}

#[test]
fn single_receiver_scenario_helper_is_consistent() {
    let g = geometry(frequency_for_side(2), 1.2, 827.67);
    let rx = Receiver { position: [0.0, 0.0, 1.0], weight: 1.0 };
    let scenario = Scenario::new(g, vec![rx], 1.0, 0.5).unwrap();
    let model = LinkModel::new(&scenario).unwrap();
    let optimum = brute_force_single(&scenario, &model.channels[0].entries, 4);
    assert!(optimum > 0.0);
}
