//! Plant, control law and Lyapunov certificate, fixed-step RK4 integration,
//! and the sampled estimators for `φ_max`, `F`, `M` and `U`.
//!
//! All norms are infinity norms.

mod catalog;
mod estimators;
mod models;

pub use catalog::{lookup, names, ControlSystem};
pub use estimators::{
    check_certificate, gain_bound_m, input_bound_u, lipschitz_estimate, phi_max, CertificateReport,
    Estimate, PhiMaxGrid, PhiMaxTracker, SamplingPlan,
};
pub use models::{CubicPlant, FnPlant, LinearPlant, QuadraticCertificate};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integration fault at t = {time}: non-finite derivative at state {state:?}")]
    IntegrationFault { time: f64, state: Vec<f64> },
    #[error("open-loop solution escaped to non-finite values at t = {escape_time}")]
    Divergence { escape_time: f64 },
    #[error("invalid estimator configuration: {0}")]
    Config(String),
}

/// `ẋ = f(x, u)` with `f(0, 0) = 0`.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64>;

    /// A row-major `n × n` matrix `G` with `f(y + e, u) − f(y, u) = G e`.
    ///
    /// The closed-loop simulator integrates the estimation error through
    /// this form so the error keeps full relative precision when it is many
    /// orders of magnitude below the state. The default is the rank-one
    /// secant `Δf eᵀ / |e|²`, falling back to a central-difference Jacobian
    /// when `e` is too small to difference. Plants with a closed-form
    /// factorization should override it.
    fn secant(&self, y: &[f64], e: &[f64], u: &[f64]) -> Vec<f64> {
        let n = y.len();
        let scale = 1.0 + norm_inf(y);
        let mut g = vec![0.0; n * n];
        if norm_inf(e) > 1e-7 * scale {
            let shifted: Vec<f64> = y.iter().zip(e).map(|(a, b)| a + b).collect();
            let hi = self.vector_field(&shifted, u);
            let lo = self.vector_field(y, u);
            let ee: f64 = e.iter().map(|v| v * v).sum();
            for i in 0..n {
                let df = hi[i] - lo[i];
                for j in 0..n {
                    g[i * n + j] = df * e[j] / ee;
                }
            }
        } else {
            let step = 1e-6 * scale;
            let base: Vec<f64> = y.iter().zip(e).map(|(a, b)| a + 0.5 * b).collect();
            for j in 0..n {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[j] += step;
                minus[j] -= step;
                let fp = self.vector_field(&plus, u);
                let fm = self.vector_field(&minus, u);
                for i in 0..n {
                    g[i * n + j] = (fp[i] - fm[i]) / (2.0 * step);
                }
            }
        }
        g
    }
}

/// Control law `u = k(x)` together with a Lyapunov function `V` and the
/// comparison functions `α₁(|x|) ≤ V(x) ≤ α₂(|x|)`, `∇V·f(x, k(x)) ≤ −α(|x|)`.
pub trait LyapunovCertificate: Send + Sync {
    fn control(&self, x: &[f64]) -> Vec<f64>;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn alpha1(&self, s: f64) -> f64;
    fn alpha1_inv(&self, v: f64) -> f64;
    fn alpha2(&self, s: f64) -> f64;
    fn alpha2_inv(&self, v: f64) -> f64;
    fn alpha(&self, s: f64) -> f64;
}

/// Origin-centred hypercube `B(radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypercube {
    radius: f64,
}

impl Hypercube {
    pub fn new(radius: f64) -> Result<Self, DynamicsError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(DynamicsError::Config(format!(
                "hypercube radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        norm_inf(x) <= self.radius
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One classical RK4 step of `ẋ = f(x, u)` with `u` held constant.
///
/// `t` only labels the fault if a derivative evaluates to a non-finite
/// value.
pub fn integrate_step(
    model: &dyn PlantModel,
    t: f64,
    x: &[f64],
    u: &[f64],
    h: f64,
) -> Result<Vec<f64>, DynamicsError> {
    debug_assert!(h > 0.0);
    let fault = |state: &[f64]| DynamicsError::IntegrationFault {
        time: t,
        state: state.to_vec(),
    };
    let k1 = model.vector_field(x, u);
    if !all_finite(&k1) {
        return Err(fault(x));
    }
    let x2 = axpy(x, 0.5 * h, &k1);
    let k2 = model.vector_field(&x2, u);
    if !all_finite(&k2) {
        return Err(fault(&x2));
    }
    let x3 = axpy(x, 0.5 * h, &k2);
    let k3 = model.vector_field(&x3, u);
    if !all_finite(&k3) {
        return Err(fault(&x3));
    }
    let x4 = axpy(x, h, &k3);
    let k4 = model.vector_field(&x4, u);
    if !all_finite(&k4) {
        return Err(fault(&x4));
    }
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if !all_finite(&next) {
        return Err(fault(&next));
    }
    Ok(next)
}

/// The four RK4 stage points of the estimate dynamics `x̄̇ = f(x̄, k(x̄))`,
/// the control evaluated at each, and the resulting next estimate.
#[derive(Debug, Clone)]
pub struct EstimateStages {
    pub points: [Vec<f64>; 4],
    pub inputs: [Vec<f64>; 4],
    pub next: Vec<f64>,
}

/// One RK4 step of the closed estimate dynamics, keeping the stages so the
/// plant error can be integrated against exactly the same estimate path.
pub fn estimate_step(
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    t: f64,
    xhat: &[f64],
    h: f64,
) -> Result<EstimateStages, DynamicsError> {
    let fault = |state: &[f64]| DynamicsError::IntegrationFault {
        time: t,
        state: state.to_vec(),
    };
    let eval = |p: &[f64]| -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        let u = cert.control(p);
        let d = model.vector_field(p, &u);
        if !all_finite(&d) || !all_finite(&u) {
            return Err(fault(p));
        }
        Ok((u, d))
    };
    let p1 = xhat.to_vec();
    let (u1, k1) = eval(&p1)?;
    let p2 = axpy(xhat, 0.5 * h, &k1);
    let (u2, k2) = eval(&p2)?;
    let p3 = axpy(xhat, 0.5 * h, &k2);
    let (u3, k3) = eval(&p3)?;
    let p4 = axpy(xhat, h, &k3);
    let (u4, k4) = eval(&p4)?;
    let next: Vec<f64> = (0..xhat.len())
        .map(|i| xhat[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if !all_finite(&next) {
        return Err(fault(&next));
    }
    Ok(EstimateStages {
        points: [p1, p2, p3, p4],
        inputs: [u1, u2, u3, u4],
        next,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero;
    impl PlantModel for Zero {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn vector_field(&self, _x: &[f64], _u: &[f64]) -> Vec<f64> {
            vec![0.0, 0.0]
        }
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x = vec![0.3, -1.7];
        let next = integrate_step(&Zero, 0.0, &x, &[5.0], 0.1).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let plant = LinearPlant::new(1, vec![-1.0]);
        let mut x = vec![1.0];
        for i in 0..100 {
            x = integrate_step(&plant, i as f64 * 0.01, &x, &[0.0], 0.01).unwrap();
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn non_finite_field_reports_fault() {
        let plant = FnPlant::new(1, 1, |x: &[f64], _u: &[f64]| vec![1.0 / (x[0] - x[0])]);
        let err = integrate_step(&plant, 2.5, &[1.0], &[0.0], 0.1).unwrap_err();
        match err {
            DynamicsError::IntegrationFault { time, state } => {
                assert_eq!(time, 2.5);
                assert_eq!(state, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_secant_reproduces_difference() {
        let plant = FnPlant::new(2, 1, |x: &[f64], u: &[f64]| {
            vec![x[0] * x[1] + u[0], x[0].sin() - x[1] * x[1] * x[1]]
        });
        let y = [0.4, -0.2];
        let e = [0.05, 0.03];
        let g = plant.secant(&y, &e, &[0.1]);
        let hi = plant.vector_field(&[y[0] + e[0], y[1] + e[1]], &[0.1]);
        let lo = plant.vector_field(&y, &[0.1]);
        for i in 0..2 {
            let ge = g[i * 2] * e[0] + g[i * 2 + 1] * e[1];
            assert!((ge - (hi[i] - lo[i])).abs() < 1e-14);
        }
        // tiny error: falls back to the Jacobian
        let g = plant.secant(&y, &[0.0, 0.0], &[0.1]);
        assert!((g[0] - y[1]).abs() < 1e-8);
        assert!((g[1] - y[0]).abs() < 1e-8);
        assert!((g[2] - y[0].cos()).abs() < 1e-8);
        assert!((g[3] + 3.0 * y[1] * y[1]).abs() < 1e-8);
    }

    #[test]
    fn hypercube_rejects_negative_radius() {
        assert!(Hypercube::new(-1.0).is_err());
        assert!(Hypercube::new(f64::NAN).is_err());
        let b = Hypercube::new(1.0).unwrap();
        assert!(b.contains(&[1.0, -0.5]));
        assert!(!b.contains(&[1.0001]));
    }
}
