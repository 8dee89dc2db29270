mod common;

use dkcf_core::detection::{dbscan, extract_detections, polar_to_cartesian, transform_to_global, DbscanParams, Label};
use dkcf_core::geometry::Pose2D;
use dkcf_core::scenario_sim::ScanBeam;
use dkcf_core::{Point2, RobotId};
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Point2::new(x, y)), 0..120)
}

fn core_flags(pts: &[Point2], eps: f64, min_pts: usize) -> Vec<bool> {
    (0..pts.len())
        .map(|i| pts.iter().filter(|q| (*q - pts[i]).norm_squared() <= eps * eps).count() >= min_pts)
        .collect()
}

proptest! {
    #[test]
    fn matches_naive_reference(pts in points(), eps in 0.1..2.0f64, min_pts in 1usize..8) {
        let params = DbscanParams { epsilon: eps, min_pts, max_cluster_extent: 100.0 };
        prop_assert_eq!(
            common::canonical(&dbscan(&pts, &params)),
            common::canonical(&common::naive_dbscan(&pts, eps, min_pts))
        );
    }

    #[test]
    fn cluster_members_touch_a_core_of_their_cluster(pts in points(), eps in 0.1..2.0f64, min_pts in 1usize..8) {
        let labels = dbscan(&pts, &DbscanParams { epsilon: eps, min_pts, max_cluster_extent: 100.0 });
        let core = core_flags(&pts, eps, min_pts);
        for (i, l) in labels.iter().enumerate() {
            match l {
                Label::Cluster(c) => prop_assert!((0..pts.len()).any(|j| core[j]
                    && labels[j] == Label::Cluster(*c)
                    && (pts[j] - pts[i]).norm_squared() <= eps * eps)),
                Label::Noise => {
                    prop_assert!(!core[i]);
                    prop_assert!((0..pts.len()).all(|j| !core[j] || (pts[j] - pts[i]).norm_squared() > eps * eps));
                }
            }
        }
    }

    #[test]
    fn centroids_lie_in_the_cluster_hull(pts in points(), eps in 0.2..1.5f64, min_pts in 1usize..6) {
        let params = DbscanParams { epsilon: eps, min_pts, max_cluster_extent: 100.0 };
        let labels = dbscan(&pts, &params);
        for det in extract_detections(&labels, &pts, &params, 0, RobotId(0)) {
            // Inside the hull implies inside every bounding half-plane; the
            // axis-aligned and diagonal ones are checked here.
            let members: Vec<&Point2> = pts.iter().zip(&labels)
                .filter(|(_, l)| matches!(l, Label::Cluster(_)))
                .map(|(p, _)| p)
                .filter(|p| (*p - det.centroid).norm() <= params.max_cluster_extent)
                .collect();
            for dir in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0), Point2::new(1.0, -1.0)] {
                for sign in [1.0, -1.0] {
                    let d = dir * sign;
                    let max = members.iter().map(|p| p.dot(&d)).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(det.centroid.dot(&d) <= max + 1e-9);
                }
            }
        }
    }

    #[test]
    fn global_transform_round_trips(
        x in -50.0..50.0f64, y in -50.0..50.0f64, h in -4.0..4.0f64,
        beams in prop::collection::vec((0.1..30.0f64, -3.1..3.1f64), 0..50),
    ) {
        let pose = Pose2D::new(x, y, h);
        let scan: Vec<ScanBeam> = beams.iter().map(|&(range, bearing)| ScanBeam { range, bearing }).collect();
        let local = polar_to_cartesian(&scan);
        let global = transform_to_global(&local, &pose);
        for (l, g) in local.iter().zip(&global) {
            prop_assert!((pose.inverse_transform_point(g) - l.cartesian).norm() < 1e-12 * (1.0 + g.norm()));
        }
    }
}
