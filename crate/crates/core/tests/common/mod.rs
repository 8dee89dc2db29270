//! Independent reference implementations used by the test suites.
#![allow(dead_code)]

use dkcf_core::detection::Label;
use dkcf_core::Point2;
use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

/// Information-form Kalman filter: the state is carried as `(Y, y)` with
/// `Y = P^-1`, `y = P^-1 x`, using plain LU inverses throughout.
pub struct InfoFilter {
    pub y_mat: Matrix4<f64>,
    pub y_vec: Vector4<f64>,
}

impl InfoFilter {
    pub fn from_moments(x: &Vector4<f64>, p: &Matrix4<f64>) -> Self {
        let y_mat = p.try_inverse().expect("invertible prior");
        Self { y_vec: y_mat * x, y_mat }
    }

    pub fn predict(&mut self, f: &Matrix4<f64>, q: &Matrix4<f64>) {
        let p = self.y_mat.try_inverse().expect("invertible information");
        let x = p * self.y_vec;
        let p_pred = f * p * f.transpose() + q;
        self.y_mat = p_pred.try_inverse().expect("invertible prediction");
        self.y_vec = self.y_mat * (f * x);
    }

    pub fn update(&mut self, h: &Matrix2x4<f64>, r: &Matrix2<f64>, z: &Vector2<f64>) {
        let r_inv = r.try_inverse().expect("invertible R");
        self.y_mat += h.transpose() * r_inv * h;
        self.y_vec += h.transpose() * r_inv * z;
    }

    pub fn moments(&self) -> (Vector4<f64>, Matrix4<f64>) {
        let p = self.y_mat.try_inverse().expect("invertible information");
        (p * self.y_vec, p)
    }
}

/// Minimum assignment cost by exhaustive search over injective maps from
/// the smaller side into the larger.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = if rows == 0 { 0 } else { cost[0].len() };
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let (small, big, at): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if rows <= cols {
        (rows, cols, Box::new(|i, j| cost[i][j]))
    } else {
        (cols, rows, Box::new(|i, j| cost[j][i]))
    };
    fn rec(i: usize, small: usize, big: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64, at: &dyn Fn(usize, usize) -> f64) {
        if i == small {
            *best = best.min(acc);
            return;
        }
        for j in 0..big {
            if !used[j] {
                used[j] = true;
                rec(i + 1, small, big, used, acc + at(i, j), best, at);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, small, big, &mut vec![false; big], 0.0, &mut best, &*at);
    best
}

/// O(n^2) DBSCAN: core points by exhaustive counting, clusters as
/// connected components of the core graph numbered by lowest core index,
/// border points given to the lowest-numbered adjacent cluster.
pub fn naive_dbscan(points: &[Point2], eps: f64, min_pts: usize) -> Vec<Label> {
    let n = points.len();
    let eps_sq = eps * eps;
    let near = |i: usize, j: usize| (points[i] - points[j]).norm_squared() <= eps_sq;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    // Roots are the smallest index in each component; number components
    // in order of their smallest core index.
    let mut cluster_of_root = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            if cluster_of_root[r] == usize::MAX {
                cluster_of_root[r] = next;
                next += 1;
            }
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                return Label::Cluster(cluster_of_root[find(&mut parent, i)]);
            }
            (0..n)
                .filter(|&j| core[j] && near(i, j))
                .map(|j| cluster_of_root[find(&mut parent, j)])
                .min()
                .map_or(Label::Noise, Label::Cluster)
        })
        .collect()
}

/// Relabels clusters in order of first appearance so two labelings can be
/// compared up to renaming.
pub fn canonical(labels: &[Label]) -> Vec<Option<usize>> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| match l {
            Label::Noise => None,
            Label::Cluster(c) => {
                let next = map.len();
                Some(*map.entry(*c).or_insert(next))
            }
        })
        .collect()
}

/// One-sided sign-test p-value for `positives` successes out of `n`
/// non-tied trials under p = 1/2.
pub fn sign_test_p(positives: u64, n: u64) -> f64 {
    let mut total = 0.0;
    for k in positives..=n {
        total += binomial(n, k);
    }
    total / 2f64.powi(n as i32)
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn is_symmetric_psd(p: &Matrix4<f64>, sym_tol: f64, eig_tol: f64) -> bool {
    if (p - p.transpose()).abs().max() > sym_tol {
        return false;
    }
    let eig = nalgebra::SymmetricEigen::new((p + p.transpose()) * 0.5).eigenvalues;
    eig.min() >= -eig_tol
}
