use fim_core::capacity::equal_power_covariance;
use fim_core::channel::{FimChannel, PathAngles, ScatteringEnvironment};
use fim_core::geometry::{ArrayGeometry, LinkGeometry, OrientationFrame, SurfaceShape};
use fim_core::gradcheck::{random_instance, InstanceLimits};
use fim_core::morphing::{ascent_step, capacity_at, inner_morph_loop, shape_gradients};
use fim_core::{InnerLoopSettings, LineSearch};
use nalgebra::{DVector, Vector3};
use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const LAMBDA: f64 = 299_792_458.0 / 28e9;

/// Line arrays along the frame's x axis, facing each other across 50 m.
fn line_link(tx: usize, rx: usize) -> LinkGeometry<f64> {
    let t = ArrayGeometry::uniform(tx, 1, LAMBDA / 2.0, OrientationFrame::identity()).unwrap();
    let r = ArrayGeometry::uniform(rx, 1, LAMBDA / 2.0, OrientationFrame::identity())
        .unwrap()
        .with_reference_position(Vector3::new(0.0, 0.0, 50.0));
    LinkGeometry::new(t, r, LAMBDA).unwrap()
}

fn random_env(rng: &mut ChaCha8Rng, clusters: usize, per: usize, tx_elevation: Option<f64>) -> ScatteringEnvironment<f64> {
    let n = clusters * per;
    let mut angles = |fixed: Option<f64>| PathAngles {
        azimuth: (0..n).map(|_| rng.gen_range(0.0..PI)).collect(),
        elevation: (0..n).map(|_| fixed.unwrap_or_else(|| rng.gen_range(0.0..PI))).collect(),
    };
    let departure = angles(tx_elevation);
    let arrival = angles(None);
    let gains = (0..n).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    ScatteringEnvironment::new(clusters, per, departure, arrival, gains, 1.0).unwrap()
}

fn grid(bound: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| -bound + 2.0 * bound * i as f64 / (points - 1) as f64).collect()
}

fn shape(values: &[f64], bound: f64) -> SurfaceShape<f64> {
    SurfaceShape::new(DVector::from_column_slice(values), bound).unwrap()
}

/// Best point of a tensor grid over `(ζ, ξ)` for a 2+2 element problem.
fn grid_search_2x2(
    channel: &FimChannel<f64>,
    cov: &fim_core::TransmitCovariance<f64>,
    bound: f64,
    points: usize,
) -> (f64, [f64; 4]) {
    let g = grid(bound, points);
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for &a in &g {
        for &b in &g {
            let z = shape(&[a, b], bound);
            for &c in &g {
                for &d in &g {
                    let cap = capacity_at(channel, &z, &shape(&[c, d], bound), cov).unwrap();
                    if cap > best.0 {
                        best = (cap, [a, b, c, d]);
                    }
                }
            }
        }
    }
    best
}

#[test]
fn single_element_ascent_reaches_one_dimensional_optimum() {
    // In-plane departures make the transmit shape irrelevant; only ξ matters.
    let link = line_link(1, 1);
    let bound = LAMBDA / 4.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = random_env(&mut rng, 2, 2, Some(PI / 2.0));
        let channel = FimChannel::new(&env, &link);
        let cov = equal_power_covariance(1, 10.0, 1.0).unwrap();
        let zeta = SurfaceShape::flat(1, bound);
        let eval = |x: f64| capacity_at(&channel, &zeta, &shape(&[x], bound), &cov).unwrap();
        let fine = grid(bound, 2001).into_iter().map(eval).fold(f64::NEG_INFINITY, f64::max);
        let start = grid(bound, 11).into_iter().max_by(|a, b| eval(*a).total_cmp(&eval(*b))).unwrap();
        let out = inner_morph_loop(&channel, &zeta, &shape(&[start], bound), &cov, &InnerLoopSettings::default()).unwrap();
        assert!(out.capacity >= 0.99 * fine, "seed {seed}: {} vs grid {fine}", out.capacity);
    }
}

#[test]
fn two_by_two_ascent_matches_fine_grid() {
    let link = line_link(2, 2);
    let bound = LAMBDA / 4.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let env = random_env(&mut rng, 2, 1, None);
        let channel = FimChannel::new(&env, &link);
        let cov = equal_power_covariance(2, 10.0, 1.0).unwrap();
        let (fine, _) = grid_search_2x2(&channel, &cov, bound, 21);
        let (_, s) = grid_search_2x2(&channel, &cov, bound, 5);
        let out = inner_morph_loop(
            &channel,
            &shape(&s[..2], bound),
            &shape(&s[2..], bound),
            &cov,
            &InnerLoopSettings::default(),
        )
        .unwrap();
        assert!(out.capacity >= 0.98 * fine, "seed {seed}: {} vs grid {fine}", out.capacity);
        assert!(out.zeta.is_feasible() && out.xi.is_feasible());
    }
}

#[test]
fn common_arrival_projection_makes_receive_shape_irrelevant() {
    // Every arrival shares one normal projection, so the receive morphing factor
    // is a diagonal unitary applied on the left of H and cannot change capacity.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut env = random_env(&mut rng, 3, 2, None);
    env.arrival.elevation = vec![0.7; env.num_paths()];
    let link = line_link(3, 3);
    let channel = FimChannel::new(&env, &link);
    let cov = equal_power_covariance(3, 5.0, 1.0).unwrap();
    let bound = LAMBDA / 2.0;
    let zeta = shape(&[0.01 * LAMBDA, -0.2 * LAMBDA, 0.1 * LAMBDA], bound);
    let xi = shape(&[0.05 * LAMBDA, 0.3 * LAMBDA, -0.1 * LAMBDA], bound);
    let base = capacity_at(&channel, &zeta, &xi, &cov).unwrap();
    for other in [[0.0, 0.0, 0.0], [0.4, -0.4, 0.1], [-0.25, 0.5, 0.3]] {
        let moved = shape(&other.map(|v| v * LAMBDA), bound);
        let c = capacity_at(&channel, &zeta, &moved, &cov).unwrap();
        assert!((c - base).abs() < 1e-10 * base, "{c} vs {base}");
    }
    let (g_t, g_r) = shape_gradients(&channel, &zeta, &xi, &cov).unwrap();
    assert!(g_t.amax() > 0.0);
    assert!(g_r.amax() < 1e-9 * g_t.amax(), "receive gradient {} vs transmit {}", g_r.amax(), g_t.amax());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ascent_steps_are_monotone_and_feasible(seed in any::<u64>()) {
        let inst = random_instance(seed, &InstanceLimits::default()).unwrap();
        let channel = FimChannel::new(&inst.env, &inst.link);
        let before = capacity_at(&channel, &inst.zeta, &inst.xi, &inst.cov).unwrap();
        let step = ascent_step(&channel, &inst.zeta, &inst.xi, &inst.cov, &LineSearch::default()).unwrap();
        prop_assert!(step.capacity >= before);
        prop_assert!(step.zeta.is_feasible() && step.xi.is_feasible());
        let recomputed = capacity_at(&channel, &step.zeta, &step.xi, &inst.cov).unwrap();
        prop_assert!((recomputed - step.capacity).abs() <= 1e-12 * recomputed.max(1.0));
        if !step.accepted {
            prop_assert_eq!(&step.zeta, &inst.zeta);
            prop_assert_eq!(&step.xi, &inst.xi);
        }
    }

    #[test]
    fn inner_loop_never_loses_capacity(seed in any::<u64>()) {
        let inst = random_instance(seed, &InstanceLimits::default()).unwrap();
        let channel = FimChannel::new(&inst.env, &inst.link);
        let before = capacity_at(&channel, &inst.zeta, &inst.xi, &inst.cov).unwrap();
        let out = inner_morph_loop(&channel, &inst.zeta, &inst.xi, &inst.cov, &InnerLoopSettings::default()).unwrap();
        prop_assert!(out.capacity >= before);
        prop_assert!(out.steps <= 100);
        prop_assert!(out.zeta.is_feasible() && out.xi.is_feasible());
    }
}
