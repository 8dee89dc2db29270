use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State `[x, vx, y, vy]` with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

impl StateEstimate {
    pub fn new(x: Vector4<f64>, p: Matrix4<f64>) -> Self {
        Self { x, p }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x[0], self.x[2])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.x[1], self.x[3])
    }

    /// Trace of the 2x2 position block of P.
    pub fn position_trace(&self) -> f64 {
        self.p[(0, 0)] + self.p[(2, 2)]
    }
}

/// Tracker settings as they appear in configuration files. The matrices
/// of [`ModelParams`] are derived from these and the tick period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    /// Variance of the white acceleration noise, (m/s^2)^2.
    pub process_noise_intensity: f64,
    /// 2x2 measurement noise covariance R, m^2.
    pub measurement_noise: [[f64; 2]; 2],
    #[serde(default = "default_gate")]
    pub gate_threshold: f64,
    pub init_pos_var: f64,
    pub init_vel_var: f64,
    #[serde(default = "default_max_misses")]
    pub max_misses: u32,
    #[serde(default = "default_confirm_hits")]
    pub confirm_hits: u32,
}

fn default_gate() -> f64 {
    // chi-square, 2 dof, 99%
    9.21
}

fn default_max_misses() -> u32 {
    5
}

fn default_confirm_hits() -> u32 {
    3
}

impl TrackerConfig {
    pub fn collect_violations(&self, out: &mut Vec<String>) {
        if !(self.process_noise_intensity >= 0.0) {
            out.push("model.process_noise_intensity: must be >= 0".into());
        }
        let r = Matrix2::from_row_slice(&[
            self.measurement_noise[0][0],
            self.measurement_noise[0][1],
            self.measurement_noise[1][0],
            self.measurement_noise[1][1],
        ]);
        if (r - r.transpose()).abs().max() > 1e-12 || r.cholesky().is_none() {
            out.push("model.measurement_noise: must be symmetric positive definite".into());
        }
        if !(self.gate_threshold > 0.0) {
            out.push("model.gate_threshold: must be > 0".into());
        }
        if !(self.init_pos_var > 0.0) {
            out.push("model.init_pos_var: must be > 0".into());
        }
        if !(self.init_vel_var > 0.0) {
            out.push("model.init_vel_var: must be > 0".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tick_period: f64,
    pub f: Matrix4<f64>,
    pub h: Matrix2x4<f64>,
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
    pub gate_threshold: f64,
    pub init_pos_var: f64,
    pub init_vel_var: f64,
    pub max_misses: u32,
    pub confirm_hits: u32,
}

impl ModelParams {
    pub fn new(tick_period: f64, cfg: &TrackerConfig) -> Self {
        let m = cfg.measurement_noise;
        Self {
            tick_period,
            f: transition(tick_period),
            h: measurement_matrix(),
            q: process_noise(tick_period, cfg.process_noise_intensity),
            r: Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
            gate_threshold: cfg.gate_threshold,
            init_pos_var: cfg.init_pos_var,
            init_vel_var: cfg.init_vel_var,
            max_misses: cfg.max_misses,
            confirm_hits: cfg.confirm_hits,
        }
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(
            self.init_pos_var,
            self.init_vel_var,
            self.init_pos_var,
            self.init_vel_var,
        ))
    }
}

pub fn transition(t: f64) -> Matrix4<f64> {
    #[rustfmt::skip]
    let f = Matrix4::new(
        1.0, t,   0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, t,
        0.0, 0.0, 0.0, 1.0,
    );
    f
}

pub fn measurement_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

/// Discrete white-noise-acceleration covariance, one block per axis.
pub fn process_noise(t: f64, intensity: f64) -> Matrix4<f64> {
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
    let mut q = Matrix4::zeros();
    for axis in [0, 2] {
        q[(axis, axis)] = t4 / 4.0;
        q[(axis, axis + 1)] = t3 / 2.0;
        q[(axis + 1, axis)] = t3 / 2.0;
        q[(axis + 1, axis + 1)] = t2;
    }
    q * intensity
}

pub(crate) fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

pub fn kf_predict(est: &StateEstimate, model: &ModelParams) -> StateEstimate {
    let f = &model.f;
    StateEstimate {
        x: f * est.x,
        p: symmetrize(&(f * est.p * f.transpose() + model.q)),
    }
}

/// Kalman update with a Joseph-form covariance.
pub fn kf_update(est: &StateEstimate, z: &Vector2<f64>, model: &ModelParams) -> Result<StateEstimate> {
    let h = &model.h;
    let s = h * est.p * h.transpose() + model.r;
    let s_inv = s.cholesky().ok_or(Error::SingularInnovation)?.inverse();
    let k = est.p * h.transpose() * s_inv;
    let innovation = z - h * est.x;
    let ikh = Matrix4::identity() - k * h;
    let p = ikh * est.p * ikh.transpose() + k * model.r * k.transpose();
    Ok(StateEstimate { x: est.x + k * innovation, p: symmetrize(&p) })
}

/// Squared Mahalanobis distance of `z` from the predicted measurement.
pub fn mahalanobis_sq(est: &StateEstimate, z: &Vector2<f64>, model: &ModelParams) -> Result<f64> {
    let h = &model.h;
    let s = h * est.p * h.transpose() + model.r;
    let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    let residual = z - h * est.x;
    Ok(residual.dot(&chol.solve(&residual)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(t: f64, q: f64, r: f64) -> ModelParams {
        ModelParams::new(
            t,
            &TrackerConfig {
                process_noise_intensity: q,
                measurement_noise: [[r, 0.0], [0.0, r]],
                gate_threshold: 9.21,
                init_pos_var: 1.0,
                init_vel_var: 1.0,
                max_misses: 5,
                confirm_hits: 3,
            },
        )
    }

    #[test]
    fn transition_matches_cv_model() {
        let m = model(0.1, 0.0, 1.0);
        assert_eq!(m.f[(0, 1)], 0.1);
        assert_eq!(m.f[(2, 3)], 0.1);
        assert_eq!(m.f.trace(), 4.0);
        assert_eq!(m.h, Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn predict_moves_position_by_velocity() {
        let m = model(0.1, 0.0, 1.0);
        let est = StateEstimate::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Matrix4::identity());
        let out = kf_predict(&est, &m);
        assert!((out.x - Vector4::new(0.1, 1.0, 0.0, 0.0)).norm() < 1e-15);
        // F F^T per axis: [[1.01, 0.1], [0.1, 1]]
        for a in [0, 2] {
            assert!((out.p[(a, a)] - 1.01).abs() < 1e-15);
            assert!((out.p[(a, a + 1)] - 0.1).abs() < 1e-15);
            assert!((out.p[(a + 1, a)] - 0.1).abs() < 1e-15);
            assert!((out.p[(a + 1, a + 1)] - 1.0).abs() < 1e-15);
        }
        assert_eq!(out.p[(0, 2)], 0.0);
    }

    #[test]
    fn zero_velocity_keeps_position() {
        let m = model(0.37, 0.0, 1.0);
        let est = StateEstimate::new(Vector4::new(5.0, 0.0, 7.0, 0.0), Matrix4::identity());
        let out = kf_predict(&est, &m);
        assert_eq!(out.position(), Vector2::new(5.0, 7.0));
    }

    #[test]
    fn update_halfway_with_equal_noise() {
        let m = model(0.1, 0.0, 1.0);
        let est = StateEstimate::new(Vector4::zeros(), Matrix4::identity());
        let out = kf_update(&est, &Vector2::new(1.0, 1.0), &m).unwrap();
        assert!((out.position() - Vector2::new(0.5, 0.5)).norm() < 1e-15);
        assert_eq!(out.velocity(), Vector2::zeros());
    }

    #[test]
    fn zero_innovation_shrinks_covariance() {
        let m = model(0.1, 0.0, 0.5);
        let est = StateEstimate::new(Vector4::new(1.0, 2.0, 3.0, 4.0), Matrix4::identity() * 2.0);
        let out = kf_update(&est, &Vector2::new(1.0, 3.0), &m).unwrap();
        assert_eq!(out.x, est.x);
        assert!(out.position_trace() < est.position_trace());
    }

    #[test]
    fn huge_measurement_noise_leaves_prior() {
        let m = model(0.1, 0.0, 1e12);
        let est = StateEstimate::new(Vector4::new(1.0, 2.0, 3.0, 4.0), Matrix4::identity());
        let out = kf_update(&est, &Vector2::new(100.0, -50.0), &m).unwrap();
        assert!((out.x - est.x).norm() / est.x.norm() < 1e-6);
        assert!((out.p - est.p).norm() / est.p.norm() < 1e-6);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let mut m = model(0.1, 0.0, 1.0);
        m.r = Matrix2::zeros();
        let est = StateEstimate::new(Vector4::zeros(), Matrix4::zeros());
        assert!(matches!(kf_update(&est, &Vector2::new(1.0, 0.0), &m), Err(Error::SingularInnovation)));
        assert!(mahalanobis_sq(&est, &Vector2::new(1.0, 0.0), &m).is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        // S = I
        let m = model(0.1, 0.0, 1.0);
        let est = StateEstimate::new(Vector4::zeros(), Matrix4::zeros());
        assert!((mahalanobis_sq(&est, &Vector2::new(3.0, 4.0), &m).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(mahalanobis_sq(&est, &Vector2::zeros(), &m).unwrap(), 0.0);
        // S = diag(4, 1)
        let mut m = model(0.1, 0.0, 1.0);
        m.r = Matrix2::new(4.0, 0.0, 0.0, 1.0);
        assert!((mahalanobis_sq(&est, &Vector2::new(2.0, 1.0), &m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn process_noise_blocks() {
        let q = process_noise(0.1, 2.0);
        assert!((q[(0, 0)] - 2.0 * 1e-4 / 4.0).abs() < 1e-18);
        assert!((q[(1, 1)] - 0.02).abs() < 1e-15);
        assert_eq!(q[(0, 2)], 0.0);
        assert_eq!(q, q.transpose());
    }
}
