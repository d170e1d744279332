//! Sampled maximizations standing in for the analytic constants.
//!
//! Every estimator evaluates a deterministic uniform grid (endpoints
//! included, so box corners are always sampled) followed by a seeded
//! uniform-random refinement, takes the maximum, and multiplies it by a
//! safety factor. Ratio estimators skip pairs closer than [`MIN_SEPARATION`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    integrate_step, norm_inf, DynamicsError, Hypercube, LyapunovCertificate, PlantModel,
};

/// Pairs with `|x − x̄|∞` below this are excluded from ratio estimates.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Cap on the number of grid points in one estimator call; the per-axis
/// resolution is lowered for high-dimensional sample spaces to respect it.
pub const MAX_GRID_POINTS: usize = 250_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub grid_per_dim: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub safety_factor: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            grid_per_dim: 21,
            random_samples: 20_000,
            seed: 0,
            safety_factor: 1.02,
        }
    }
}

impl SamplingPlan {
    fn check(&self) -> Result<(), DynamicsError> {
        if self.grid_per_dim == 0 && self.random_samples == 0 {
            return Err(DynamicsError::Config("empty sampling plan".into()));
        }
        if self.grid_per_dim == 1 {
            return Err(DynamicsError::Config(
                "grid needs at least 2 points per dimension".into(),
            ));
        }
        if !(self.safety_factor.is_finite() && self.safety_factor >= 1.0) {
            return Err(DynamicsError::Config(format!(
                "safety factor must be >= 1, got {}",
                self.safety_factor
            )));
        }
        Ok(())
    }

    /// Visit every sample of the box with the given per-coordinate radii.
    fn for_each_sample(&self, radii: &[f64], mut visit: impl FnMut(&[f64])) {
        let d = radii.len();
        if self.grid_per_dim >= 2 {
            let g = effective_grid(self.grid_per_dim, d);
            let total = g.pow(d as u32);
            let mut point = vec![0.0; d];
            for mut idx in 0..total {
                for (j, r) in radii.iter().enumerate() {
                    let i = idx % g;
                    idx /= g;
                    point[j] = -r + 2.0 * r * i as f64 / (g - 1) as f64;
                }
                visit(&point);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut point = vec![0.0; d];
        for _ in 0..self.random_samples {
            for (j, r) in radii.iter().enumerate() {
                point[j] = if *r > 0.0 {
                    rng.random_range(-r..=*r)
                } else {
                    0.0
                };
            }
            visit(&point);
        }
    }
}

fn effective_grid(g: usize, d: usize) -> usize {
    let mut g = g;
    while g > 2 && (g as f64).powi(d as i32) > MAX_GRID_POINTS as f64 {
        g -= 1;
    }
    g
}

/// A sampled maximum and its safety-adjusted value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub raw: f64,
    pub value: f64,
}

impl Estimate {
    fn new(raw: f64, safety: f64) -> Self {
        Self {
            raw,
            value: raw * safety,
        }
    }
}

/// `max |f(x,u) − f(x̄,u)|∞ / |x − x̄|∞` over `B(W) × B(O) × B(U)`.
pub fn lipschitz_estimate(
    model: &dyn PlantModel,
    w: Hypercube,
    o: Hypercube,
    u: Hypercube,
    plan: &SamplingPlan,
) -> Result<Estimate, DynamicsError> {
    plan.check()?;
    let n = model.state_dim();
    let m = model.input_dim();
    let mut radii = vec![w.radius(); n];
    radii.extend(std::iter::repeat_n(o.radius(), n));
    radii.extend(std::iter::repeat_n(u.radius(), m));
    let mut best = 0.0f64;
    plan.for_each_sample(&radii, |s| {
        let (x, rest) = s.split_at(n);
        let (xb, u) = rest.split_at(n);
        let sep = sep_inf(x, xb);
        if sep < MIN_SEPARATION {
            return;
        }
        let fa = model.vector_field(x, u);
        let fb = model.vector_field(xb, u);
        let diff = fa.iter().zip(&fb).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        best = best.max(diff / sep);
    });
    Ok(Estimate::new(best, plan.safety_factor))
}

/// `max |∇V(x)·(f(x, k(x̄)) − f(x, k(x)))| / |x − x̄|∞` over `B(W) × B(O)`.
pub fn gain_bound_m(
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    w: Hypercube,
    o: Hypercube,
    plan: &SamplingPlan,
) -> Result<Estimate, DynamicsError> {
    plan.check()?;
    let n = model.state_dim();
    let mut radii = vec![w.radius(); n];
    radii.extend(std::iter::repeat_n(o.radius(), n));
    let mut best = 0.0f64;
    plan.for_each_sample(&radii, |s| {
        let (x, xb) = s.split_at(n);
        let sep = sep_inf(x, xb);
        if sep < MIN_SEPARATION {
            return;
        }
        let grad = cert.gradient(x);
        let fa = model.vector_field(x, &cert.control(xb));
        let fb = model.vector_field(x, &cert.control(x));
        let dot: f64 = grad
            .iter()
            .zip(fa.iter().zip(&fb))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        best = best.max(dot.abs() / sep);
    });
    Ok(Estimate::new(best, plan.safety_factor))
}

/// `max |k(x)|∞` over `B(O)`.
pub fn input_bound_u(
    cert: &dyn LyapunovCertificate,
    n: usize,
    o: Hypercube,
    plan: &SamplingPlan,
) -> Result<Estimate, DynamicsError> {
    plan.check()?;
    let radii = vec![o.radius(); n];
    let mut best = 0.0f64;
    plan.for_each_sample(&radii, |x| {
        best = best.max(norm_inf(&cert.control(x)));
    });
    Ok(Estimate::new(best, plan.safety_factor))
}

fn sep_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

/// Grid of initial states and integration step for `φ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiMaxGrid {
    pub points_per_dim: usize,
    pub step: f64,
}

impl PhiMaxGrid {
    pub fn new(points_per_dim: usize, step: f64) -> Self {
        Self {
            points_per_dim,
            step,
        }
    }
}

/// Running maximum of `|φ(x₀, t', 0)|∞` over a grid of `x₀ ∈ B(X)` and
/// `t' ∈ [0, t]` under zero input, advanced in lockstep with a simulation
/// clock.
#[derive(Debug, Clone)]
pub struct PhiMaxTracker {
    states: Vec<Vec<f64>>,
    time: f64,
    value: f64,
    zero_input: Vec<f64>,
}

impl PhiMaxTracker {
    pub fn new(
        model: &dyn PlantModel,
        x_bound: f64,
        points_per_dim: usize,
    ) -> Result<Self, DynamicsError> {
        if points_per_dim < 2 {
            return Err(DynamicsError::Config(
                "phi_max grid needs at least 2 points per dimension".into(),
            ));
        }
        if !(x_bound.is_finite() && x_bound >= 0.0) {
            return Err(DynamicsError::Config(format!(
                "initial-state radius must be finite and nonnegative, got {x_bound}"
            )));
        }
        let n = model.state_dim();
        let mut states = Vec::new();
        if x_bound == 0.0 {
            states.push(vec![0.0; n]);
        } else {
            let g = effective_grid(points_per_dim, n);
            let mut p = vec![0.0; n];
            for mut idx in 0..g.pow(n as u32) {
                for pj in p.iter_mut() {
                    let i = idx % g;
                    idx /= g;
                    *pj = -x_bound + 2.0 * x_bound * i as f64 / (g - 1) as f64;
                }
                states.push(p.clone());
            }
        }
        let value = states.iter().map(|s| norm_inf(s)).fold(0.0, f64::max);
        Ok(Self {
            states,
            time: 0.0,
            value,
            zero_input: vec![0.0; model.input_dim()],
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Advance every grid trajectory by one RK4 step of length `h`.
    pub fn advance(&mut self, model: &dyn PlantModel, h: f64) -> Result<f64, DynamicsError> {
        let escape_time = self.time + h;
        for s in &mut self.states {
            let next = integrate_step(model, self.time, s, &self.zero_input, h)
                .map_err(|_| DynamicsError::Divergence { escape_time })?;
            *s = next;
            self.value = self.value.max(norm_inf(s));
        }
        self.time = escape_time;
        Ok(self.value)
    }
}

/// `φ_max(t)` over a grid of initial states in `B(X)`.
///
/// The horizon is split into `⌈t/step⌉` equal RK4 steps.
pub fn phi_max(
    model: &dyn PlantModel,
    x_bound: f64,
    t: f64,
    grid: &PhiMaxGrid,
) -> Result<f64, DynamicsError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(DynamicsError::Config(format!("phi_max time must be >= 0, got {t}")));
    }
    if !(grid.step > 0.0) {
        return Err(DynamicsError::Config("phi_max step must be positive".into()));
    }
    let mut tracker = PhiMaxTracker::new(model, x_bound, grid.points_per_dim)?;
    if t == 0.0 || x_bound == 0.0 {
        return Ok(tracker.value());
    }
    let steps = (t / grid.step - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    for _ in 0..steps {
        tracker.advance(model, h)?;
    }
    Ok(tracker.value())
}

/// Sampled consistency checks for a certificate on `B(radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `α₁(s) ≤ α₂(s)` on every sampled `s`.
    pub comparison_ordered: bool,
    /// Worst relative error of `α₁⁻¹∘α₁` and `α₂⁻¹∘α₂`.
    pub inverse_error: f64,
    /// Largest `∇V·f(x, k(x)) + α(|x|∞)` over the grid; must stay `≤ 1e-9`.
    pub worst_decrease: f64,
    /// `α₁(|x|) ≤ V(x) ≤ α₂(|x|)` on every grid point.
    pub sandwich_holds: bool,
}

impl CertificateReport {
    pub fn is_valid(&self) -> bool {
        self.comparison_ordered
            && self.inverse_error <= 1e-9
            && self.worst_decrease <= 1e-9
            && self.sandwich_holds
    }
}

pub fn check_certificate(
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    radius: Hypercube,
    plan: &SamplingPlan,
) -> Result<CertificateReport, DynamicsError> {
    plan.check()?;
    let mut comparison_ordered = true;
    let mut inverse_error = 0.0f64;
    let samples = 1000;
    for i in 1..=samples {
        let s = radius.radius() * i as f64 / samples as f64;
        if cert.alpha1(s) > cert.alpha2(s) {
            comparison_ordered = false;
        }
        for inv in [
            cert.alpha1_inv(cert.alpha1(s)),
            cert.alpha2_inv(cert.alpha2(s)),
        ] {
            inverse_error = inverse_error.max(((inv - s) / s).abs());
        }
    }
    let n = model.state_dim();
    let radii = vec![radius.radius(); n];
    let mut worst_decrease = f64::NEG_INFINITY;
    let mut sandwich_holds = true;
    plan.for_each_sample(&radii, |x| {
        let s = norm_inf(x);
        let v = cert.value(x);
        let tol = 1e-12 * (1.0 + v.abs());
        if cert.alpha1(s) > v + tol || v > cert.alpha2(s) + tol {
            sandwich_holds = false;
        }
        let grad = cert.gradient(x);
        let f = model.vector_field(x, &cert.control(x));
        let vdot: f64 = grad.iter().zip(&f).map(|(g, f)| g * f).sum();
        worst_decrease = worst_decrease.max(vdot + cert.alpha(s));
    });
    Ok(CertificateReport {
        comparison_ordered,
        inverse_error,
        worst_decrease,
        sandwich_holds,
    })
}
