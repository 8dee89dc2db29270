mod common;

use dkcf_core::detection::Detection;
use dkcf_core::local_tracker::{
    associate, hungarian, kf_predict, kf_update, mahalanobis_sq, LocalTracker, ModelParams, StateEstimate, Track,
    TrackId, TrackStatus, TrackerConfig,
};
use dkcf_core::{Point2, RobotId};
use nalgebra::{Matrix4, Vector2, Vector4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn model(q: f64, r: f64) -> ModelParams {
    ModelParams::new(
        0.1,
        &TrackerConfig {
            process_noise_intensity: q,
            measurement_noise: [[r, 0.0], [0.0, r]],
            gate_threshold: 9.21,
            init_pos_var: 0.25,
            init_vel_var: 1.0,
            max_misses: 5,
            confirm_hits: 3,
        },
    )
}

fn spd() -> impl Strategy<Value = Matrix4<f64>> {
    prop::collection::vec(-2.0..2.0f64, 16).prop_map(|v| {
        let a = Matrix4::from_vec(v);
        a * a.transpose() + Matrix4::identity() * 0.05
    })
}

fn state() -> impl Strategy<Value = Vector4<f64>> {
    prop::collection::vec(-10.0..10.0f64, 4).prop_map(Vector4::from_vec)
}

proptest! {
    #[test]
    fn predict_update_keep_covariance_healthy(x in state(), p in spd(), z in (-10.0..10.0f64, -10.0..10.0f64), q in 0.0..5.0f64, r in 0.001..2.0f64) {
        let m = model(q, r);
        let pred = kf_predict(&StateEstimate::new(x, p), &m);
        prop_assert!(common::is_symmetric_psd(&pred.p, 1e-10, 1e-9));
        let upd = kf_update(&pred, &Vector2::new(z.0, z.1), &m).unwrap();
        prop_assert!(common::is_symmetric_psd(&upd.p, 1e-10, 1e-9));
        prop_assert!(upd.position_trace() <= pred.position_trace() + 1e-12);
    }

    #[test]
    fn hungarian_matches_brute_force(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let a = hungarian(&cost);
        prop_assert!((a.total_cost - common::brute_force_assignment(&cost)).abs() < 1e-9);
        let mut seen_r = vec![false; rows];
        let mut seen_c = vec![false; cols];
        for &(i, j) in &a.pairs {
            prop_assert!(!seen_r[i] && !seen_c[j]);
            seen_r[i] = true;
            seen_c[j] = true;
        }
    }

    #[test]
    fn accepted_associations_are_gated(
        tracks in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 0..6),
        dets in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 0..6),
    ) {
        let m = model(1.0, 0.05);
        let tracks: Vec<Track> = tracks.iter().enumerate().map(|(k, &(x, y))| Track {
            id: TrackId { robot: RobotId(0), seq: k as u32 },
            estimate: StateEstimate::new(Vector4::new(x, 0.0, y, 0.0), m.initial_covariance()),
            hits: 0,
            consecutive_misses: 0,
            status: TrackStatus::Tentative,
            last_update_tick: 0,
            last_measurement: None,
            mistrack_strikes: 0,
        }).collect();
        let dets: Vec<Detection> = dets.iter().map(|&(x, y)| Detection { centroid: Point2::new(x, y), frame: RobotId(0), tick: 0, support: 3 }).collect();
        let a = associate(&tracks, &dets, &m).unwrap();
        for &(i, j) in &a.matches {
            prop_assert!(mahalanobis_sq(&tracks[i].estimate, &dets[j].centroid, &m).unwrap() <= m.gate_threshold);
        }
        prop_assert_eq!(a.matches.len() + a.unmatched_tracks.len(), tracks.len());
        prop_assert_eq!(a.matches.len() + a.unmatched_detections.len(), dets.len());
    }
}

#[test]
fn filter_beats_raw_measurements() {
    let noise = 0.1;
    let mut tracker = LocalTracker::new(RobotId(0), model(1e-3, noise * noise));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sq_f, mut sq_z, mut n) = (0.0, 0.0, 0);
    for tick in 1..=400u64 {
        let truth = Point2::new(1.0, -2.0) + Vector2::new(0.5, 0.25) * (tick as f64 * 0.1);
        let e: Vector2<f64> = Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * noise;
        let z = truth + e;
        tracker.step(&[Detection { centroid: z, frame: RobotId(0), tick, support: 4 }], tick).unwrap();
        if tick > 100 {
            let best = tracker.confirmed().map(|t| (t.estimate.position() - truth).norm()).fold(f64::INFINITY, f64::min);
            sq_f += best * best;
            sq_z += e.norm_squared();
            n += 1;
        }
    }
    let (rf, rz) = ((sq_f / n as f64).sqrt(), (sq_z / n as f64).sqrt());
    assert!(rf < rz, "filtered {rf} vs raw {rz}");
}
