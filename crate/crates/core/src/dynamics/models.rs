use std::sync::Arc;

use super::{LyapunovCertificate, PlantModel};

/// Scalar plant `ẋ = x² − x³ + u`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CubicPlant;

impl PlantModel for CubicPlant {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let x = x[0];
        vec![x * x - x * x * x + u[0]]
    }

    // (y+e)² − y² − (y+e)³ + y³ = e·[(2y + e) − (3y² + 3ye + e²)]
    fn secant(&self, y: &[f64], e: &[f64], _u: &[f64]) -> Vec<f64> {
        let (y, e) = (y[0], e[0]);
        vec![(2.0 * y + e) - (3.0 * y * y + 3.0 * y * e + e * e)]
    }
}

/// `ẋ = A x + u` with `u ∈ ℝⁿ`; `a` is row-major.
#[derive(Debug, Clone)]
pub struct LinearPlant {
    n: usize,
    a: Vec<f64>,
}

impl LinearPlant {
    pub fn new(n: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), n * n, "A must be n × n");
        Self { n, a }
    }

    /// Maximum absolute row sum, the induced infinity norm of `A`.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i * self.n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl PlantModel for LinearPlant {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.n
    }

    fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.a[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + u[i]
            })
            .collect()
    }

    fn secant(&self, _y: &[f64], _e: &[f64], _u: &[f64]) -> Vec<f64> {
        self.a.clone()
    }
}

type FieldFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// A plant given by a closure, for programmatic custom systems.
#[derive(Clone)]
pub struct FnPlant {
    n: usize,
    m: usize,
    field: Arc<FieldFn>,
}

impl FnPlant {
    pub fn new<F>(n: usize, m: usize, field: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            n,
            m,
            field: Arc::new(field),
        }
    }
}

impl std::fmt::Debug for FnPlant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPlant")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl PlantModel for FnPlant {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.field)(x, u)
    }
}

type LawFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// `V(x) = ½|x|₂²` with quadratic comparison functions `αᵢ(s) = cᵢ s²` and
/// an arbitrary control law.
#[derive(Clone)]
pub struct QuadraticCertificate {
    alpha1_coef: f64,
    alpha2_coef: f64,
    alpha_coef: f64,
    law: Arc<LawFn>,
}

impl QuadraticCertificate {
    pub fn new<K>(alpha1_coef: f64, alpha2_coef: f64, alpha_coef: f64, law: K) -> Self
    where
        K: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(alpha1_coef > 0.0 && alpha2_coef > 0.0 && alpha_coef >= 0.0);
        Self {
            alpha1_coef,
            alpha2_coef,
            alpha_coef,
            law: Arc::new(law),
        }
    }

    /// Linear feedback `u = −gain · x`.
    pub fn linear_feedback(alpha1_coef: f64, alpha2_coef: f64, alpha_coef: f64, gain: f64) -> Self {
        Self::new(alpha1_coef, alpha2_coef, alpha_coef, move |x: &[f64]| {
            x.iter().map(|v| -gain * v).collect()
        })
    }
}

impl std::fmt::Debug for QuadraticCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraticCertificate")
            .field("alpha1_coef", &self.alpha1_coef)
            .field("alpha2_coef", &self.alpha2_coef)
            .field("alpha_coef", &self.alpha_coef)
            .finish()
    }
}

impl LyapunovCertificate for QuadraticCertificate {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        (self.law)(x)
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn alpha1(&self, s: f64) -> f64 {
        self.alpha1_coef * s * s
    }

    fn alpha1_inv(&self, v: f64) -> f64 {
        (v / self.alpha1_coef).sqrt()
    }

    fn alpha2(&self, s: f64) -> f64 {
        self.alpha2_coef * s * s
    }

    fn alpha2_inv(&self, v: f64) -> f64 {
        (v / self.alpha2_coef).sqrt()
    }

    fn alpha(&self, s: f64) -> f64 {
        self.alpha_coef * s * s
    }
}
