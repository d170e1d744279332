//! Derived constants and bit-rate bounds.
//!
//! Starting from a DoS budget, a sampling period `Δ` and an initial radius
//! `X`, the pipeline computes
//!
//! ```text
//! σ = 1 − 1/T − Δ/τ_D        z̄₀ = (κ + ηΔ)/σ        l = α₂(φ_max(z̄₀))
//! W = α₁⁻¹(l + δ)            O = α₁⁻¹(α₂(2W))       U = sup_{B(O)} |k|
//! F, M sampled on B(W) × B(O) (× B(U))               γ = W e^{F(κ+ηΔ)/σ}
//! K = max{δσ/(MγΔ) − κ/Δ − η, 1}
//! ```
//!
//! and from those the two bit thresholds: containment of the state in the
//! quantization region,
//!
//! ```text
//! R > max{FΔ, F(κ + ηΔ)} / (σ ln 2),
//! ```
//!
//! and convergence into the level set `Γ_ρ`,
//!
//! ```text
//! R ≥ FΔ/(σ ln 2) + ln(Mγ / α(α₂⁻¹(ρ))) / (K ln 2).
//! ```

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dos::DoSBudget;
use crate::dynamics::{
    gain_bound_m, input_bound_u, lipschitz_estimate, phi_max, DynamicsError, Hypercube,
    LyapunovCertificate, PhiMaxGrid, PlantModel, SamplingPlan,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("infeasible DoS budget: sigma = {sigma} (must be > 0)")]
    Infeasible { sigma: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("open-loop solution escaped by t = {escape_time}; no finite phi_max")]
    Divergence { escape_time: f64 },
    #[error(transparent)]
    Estimator(DynamicsError),
}

impl From<DynamicsError> for BoundsError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Divergence { escape_time } => Self::Divergence { escape_time },
            other => Self::Estimator(other),
        }
    }
}

/// Smallest integer `R ≥ 1` with `R > threshold`.
pub fn minimal_strict(threshold: f64) -> u32 {
    let r = threshold.floor() + 1.0;
    r.max(1.0) as u32
}

/// Smallest integer `R ≥ 1` with `R ≥ threshold`.
pub fn minimal_nonstrict(threshold: f64) -> u32 {
    threshold.ceil().max(1.0) as u32
}

fn check_sigma(sigma: f64) -> Result<(), BoundsError> {
    if sigma > 0.0 {
        Ok(())
    } else {
        Err(BoundsError::Infeasible { sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub threshold: f64,
    pub minimal: u32,
}

/// `R > max{FΔ, F(κ + ηΔ)} / (σ ln 2)`.
pub fn rate_bound_prop1(
    f_lip: f64,
    delta: f64,
    sigma: f64,
    kappa: f64,
    eta: f64,
) -> Result<RateBound, BoundsError> {
    check_sigma(sigma)?;
    let threshold = (f_lip * delta).max(f_lip * (kappa + eta * delta)) / (sigma * LN_2);
    Ok(RateBound {
        threshold,
        minimal: minimal_strict(threshold),
    })
}

/// `FΔ/(σ ln 2) + ln(γ/ε)/(K ln 2)`: bits after which the error bound
/// drops below `ε` within one worst-case success.
pub fn rate_bound_lemma5(
    f_lip: f64,
    delta: f64,
    sigma: f64,
    gamma: f64,
    k_gain: f64,
    eps: f64,
) -> Result<f64, BoundsError> {
    check_sigma(sigma)?;
    if !(eps > 0.0 && k_gain > 0.0 && gamma > 0.0) {
        return Err(BoundsError::Argument(format!(
            "need eps, K, gamma > 0 (eps = {eps}, K = {k_gain}, gamma = {gamma})"
        )));
    }
    Ok(f_lip * delta / (sigma * LN_2) + (gamma / eps).ln() / (k_gain * LN_2))
}

/// `γ = W e^{F(κ+ηΔ)/σ}`.
pub fn gamma(w: f64, f_lip: f64, budget: &DoSBudget, delta: f64) -> Result<f64, BoundsError> {
    let sigma = budget.sigma(delta);
    check_sigma(sigma)?;
    Ok(w * (f_lip * (budget.kappa + budget.eta * delta) / sigma).exp())
}

/// `K = max{δσ/(MγΔ) − κ/Δ − η, 1}`. Returns `1` for `M = 0`, where
/// [`rate_bound_thm`] skips the convergence display anyway.
pub fn gain_k(
    level_margin: f64,
    sigma: f64,
    m_gain: f64,
    gamma: f64,
    delta: f64,
    kappa: f64,
    eta: f64,
) -> f64 {
    if m_gain <= 0.0 {
        return 1.0;
    }
    (level_margin * sigma / (m_gain * gamma * delta) - kappa / delta - eta).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    /// The containment condition sets the bit count.
    Containment,
    /// The level-set convergence condition sets the bit count.
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThmInputs {
    #[serde(rename = "F")]
    pub f_lip: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub eta: f64,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m_gain: f64,
    #[serde(rename = "K")]
    pub k_gain: f64,
    /// `α(α₂⁻¹(ρ))`.
    pub alpha_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThmBound {
    pub containment_threshold: f64,
    /// `None` when `M = 0`: the quantization error never enters `V̇`.
    pub convergence_threshold: Option<f64>,
    #[serde(rename = "R")]
    pub minimal: u32,
    pub binding: Binding,
}

/// Smallest `R` meeting both the containment and the convergence display.
pub fn rate_bound_thm(p: &ThmInputs) -> Result<ThmBound, BoundsError> {
    if !(p.alpha_rho > 0.0) {
        return Err(BoundsError::Argument(format!(
            "alpha(alpha2_inv(rho)) must be > 0, got {}",
            p.alpha_rho
        )));
    }
    let first = rate_bound_prop1(p.f_lip, p.delta, p.sigma, p.kappa, p.eta)?;
    let second = if p.m_gain > 0.0 {
        Some(rate_bound_lemma5(
            p.f_lip,
            p.delta,
            p.sigma,
            p.gamma,
            p.k_gain,
            p.alpha_rho / p.m_gain,
        )?)
    } else {
        None
    };
    let second_min = second.map(minimal_nonstrict).unwrap_or(1);
    let (minimal, binding) = if second_min > first.minimal {
        (second_min, Binding::Convergence)
    } else {
        (first.minimal, Binding::Containment)
    };
    Ok(ThmBound {
        containment_threshold: first.threshold,
        convergence_threshold: second,
        minimal,
        binding,
    })
}

/// Decay constants at a given bit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "R")]
    pub bits: u32,
    pub gamma: f64,
    pub lambda: f64,
    pub ln_lambda: f64,
    pub c: f64,
    pub ln_c: f64,
    pub omega: f64,
}

impl Envelope {
    /// Whether the success-indexed and time envelopes decay.
    pub fn decaying(&self) -> bool {
        self.lambda < 1.0 && self.omega > 0.0
    }

    /// `γ λ^{ℓ+1}`.
    pub fn by_success(&self, ell: u64) -> f64 {
        error_envelope_by_success(self.gamma, self.lambda, ell)
    }

    pub fn ln_by_success(&self, ell: u64) -> f64 {
        self.gamma.ln() + (ell as f64 + 1.0) * self.ln_lambda
    }

    /// `c e^{−ωt}`.
    pub fn by_time(&self, t: f64) -> f64 {
        (self.ln_c - self.omega * t).exp()
    }

    pub fn ln_by_time(&self, t: f64) -> f64 {
        self.ln_c - self.omega * t
    }
}

/// `λ = e^{FΔ/σ − R ln 2}`, `c = W e^{(2R ln 2 − FΔ/σ)(κ/Δ + η)}`,
/// `ω = (σR ln 2 − FΔ)/Δ`.
pub fn envelope(
    bits: u32,
    w: f64,
    f_lip: f64,
    budget: &DoSBudget,
    delta: f64,
) -> Result<Envelope, BoundsError> {
    let sigma = budget.sigma(delta);
    check_sigma(sigma)?;
    let r = bits as f64;
    let ln_lambda = f_lip * delta / sigma - r * LN_2;
    let ln_c = w.ln()
        + (2.0 * LN_2 * r - f_lip * delta / sigma) * (budget.kappa / delta + budget.eta);
    Ok(Envelope {
        bits,
        gamma: gamma(w, f_lip, budget, delta)?,
        lambda: ln_lambda.exp(),
        ln_lambda,
        c: ln_c.exp(),
        ln_c,
        omega: (LN_2 * sigma * r - f_lip * delta) / delta,
    })
}

pub fn error_envelope_by_success(gamma: f64, lambda: f64, ell: u64) -> f64 {
    gamma * lambda.powf(ell as f64 + 1.0)
}

pub fn error_envelope_by_time(env: &Envelope, t: f64) -> f64 {
    env.by_time(t)
}

/// Target level `ρ`, either absolute or as a fraction of `l + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoSpec {
    Absolute(f64),
    Fraction(f64),
}

impl Default for RhoSpec {
    fn default() -> Self {
        Self::Fraction(0.999)
    }
}

impl RhoSpec {
    pub fn resolve(&self, level: f64) -> Result<f64, BoundsError> {
        let rho = match *self {
            Self::Absolute(v) => v,
            Self::Fraction(f) => f * level,
        };
        if !(rho > 0.0 && rho < level) {
            return Err(BoundsError::Argument(format!(
                "rho must lie in (0, l + delta) = (0, {level}), got {rho}"
            )));
        }
        Ok(rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeriveSettings {
    /// `δ`, the margin between `l` and the level defining `W`.
    pub level_margin: f64,
    pub rho: RhoSpec,
    pub plan: SamplingPlan,
    pub phimax_grid: PhiMaxGrid,
    /// Bits at which `λ`, `c`, `ω` are reported; defaults to `R_thm`.
    pub bits: Option<u32>,
}

impl Default for DeriveSettings {
    fn default() -> Self {
        Self {
            level_margin: 1e-4,
            rho: RhoSpec::default(),
            plan: SamplingPlan::default(),
            phimax_grid: PhiMaxGrid::new(201, 1e-3),
            bits: None,
        }
    }
}

/// Every intermediate of the pipeline. Field names are the symbols.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub kappa: f64,
    pub eta: f64,
    pub T: f64,
    pub tauD: f64,
    pub Delta: f64,
    pub X: f64,
    pub sigma: f64,
    pub zbar0: f64,
    pub phimax_zbar0: f64,
    pub l: f64,
    pub delta: f64,
    pub W: f64,
    pub O: f64,
    pub U: f64,
    pub U_raw: f64,
    pub F: f64,
    pub F_raw: f64,
    pub M: f64,
    pub M_raw: f64,
    pub gamma: f64,
    pub K: f64,
    pub rho: f64,
    pub alpha_rho: f64,
    pub R: u32,
    pub lambda: f64,
    pub c: f64,
    pub omega: f64,
    pub R_prop1: u32,
    pub R_prop1_threshold: f64,
    pub R_thm: u32,
    pub R_thm_bound: ThmBound,
}

impl DerivedParams {
    pub fn budget(&self) -> DoSBudget {
        DoSBudget {
            kappa: self.kappa,
            eta: self.eta,
            t_dur: self.T,
            tau_d: self.tauD,
        }
    }

    /// Envelope constants at another bit count.
    pub fn envelope_at(&self, bits: u32) -> Envelope {
        envelope(bits, self.W, self.F, &self.budget(), self.Delta)
            .expect("sigma was checked during derivation")
    }

    pub fn thm_inputs(&self) -> ThmInputs {
        ThmInputs {
            f_lip: self.F,
            delta: self.Delta,
            sigma: self.sigma,
            kappa: self.kappa,
            eta: self.eta,
            gamma: self.gamma,
            m_gain: self.M,
            k_gain: self.K,
            alpha_rho: self.alpha_rho,
        }
    }
}

/// Sampled or exact ingredients once `φ_max`, `F`, `M` are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainInputs {
    pub budget: DoSBudget,
    pub delta: f64,
    pub w: f64,
    pub f_lip: f64,
    pub m_gain: f64,
    pub level_margin: f64,
    pub alpha_rho: f64,
}

/// `(R_prop1, R_thm)` straight from the chain inputs, computing `γ` and `K`
/// along the way.
pub fn bits_for(c: &ChainInputs) -> Result<(RateBound, ThmBound), BoundsError> {
    let sigma = c.budget.sigma(c.delta);
    check_sigma(sigma)?;
    let g = gamma(c.w, c.f_lip, &c.budget, c.delta)?;
    let k = gain_k(
        c.level_margin,
        sigma,
        c.m_gain,
        g,
        c.delta,
        c.budget.kappa,
        c.budget.eta,
    );
    let prop1 = rate_bound_prop1(c.f_lip, c.delta, sigma, c.budget.kappa, c.budget.eta)?;
    let thm = rate_bound_thm(&ThmInputs {
        f_lip: c.f_lip,
        delta: c.delta,
        sigma,
        kappa: c.budget.kappa,
        eta: c.budget.eta,
        gamma: g,
        m_gain: c.m_gain,
        k_gain: k,
        alpha_rho: c.alpha_rho,
    })?;
    Ok((prop1, thm))
}

/// Run the full pipeline.
pub fn derive(
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    budget: &DoSBudget,
    delta: f64,
    x_bound: f64,
    settings: &DeriveSettings,
) -> Result<DerivedParams, BoundsError> {
    budget
        .check()
        .map_err(|e| BoundsError::Argument(e.to_string()))?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(BoundsError::Argument(format!("Delta must be > 0, got {delta}")));
    }
    if !(x_bound > 0.0 && x_bound.is_finite()) {
        return Err(BoundsError::Argument(format!("X must be > 0, got {x_bound}")));
    }
    let level_margin = settings.level_margin;
    if !(level_margin > 0.0 && level_margin.is_finite()) {
        return Err(BoundsError::Argument(format!(
            "level margin delta must be > 0, got {level_margin}"
        )));
    }
    let sigma = budget.sigma(delta);
    check_sigma(sigma)?;
    let zbar0 = (budget.kappa + budget.eta * delta) / sigma;
    let phimax = phi_max(model, x_bound, zbar0, &settings.phimax_grid)?;
    let l = cert.alpha2(phimax);
    let w = cert.alpha1_inv(l + level_margin);
    if !(w > phimax) {
        return Err(BoundsError::Argument(format!(
            "W = {w} does not exceed phi_max(zbar0) = {phimax}; check the comparison functions"
        )));
    }
    let o = cert.alpha1_inv(cert.alpha2(2.0 * w));
    let n = model.state_dim();
    let u_est = input_bound_u(cert, n, Hypercube::new(o)?, &settings.plan)?;
    let f_est = lipschitz_estimate(
        model,
        Hypercube::new(w)?,
        Hypercube::new(o)?,
        Hypercube::new(u_est.value)?,
        &settings.plan,
    )?;
    let m_est = gain_bound_m(model, cert, Hypercube::new(w)?, Hypercube::new(o)?, &settings.plan)?;
    let rho = settings.rho.resolve(l + level_margin)?;
    let alpha_rho = cert.alpha(cert.alpha2_inv(rho));
    let chain = ChainInputs {
        budget: *budget,
        delta,
        w,
        f_lip: f_est.value,
        m_gain: m_est.value,
        level_margin,
        alpha_rho,
    };
    let (prop1, thm) = bits_for(&chain)?;
    let g = gamma(w, f_est.value, budget, delta)?;
    let k = gain_k(level_margin, sigma, m_est.value, g, delta, budget.kappa, budget.eta);
    let bits = settings.bits.unwrap_or(thm.minimal);
    let env = envelope(bits, w, f_est.value, budget, delta)?;
    Ok(DerivedParams {
        kappa: budget.kappa,
        eta: budget.eta,
        T: budget.t_dur,
        tauD: budget.tau_d,
        Delta: delta,
        X: x_bound,
        sigma,
        zbar0,
        phimax_zbar0: phimax,
        l,
        delta: level_margin,
        W: w,
        O: o,
        U: u_est.value,
        U_raw: u_est.raw,
        F: f_est.value,
        F_raw: f_est.raw,
        M: m_est.value,
        M_raw: m_est.raw,
        gamma: g,
        K: k,
        rho,
        alpha_rho,
        R: bits,
        lambda: env.lambda,
        c: env.c,
        omega: env.omega,
        R_prop1: prop1.minimal,
        R_prop1_threshold: prop1.threshold,
        R_thm: thm.minimal,
        R_thm_bound: thm,
    })
}

/// Published constants for the cubic example (`γ`, `z̄₀` as reported), used
/// to show how the final bit count depends on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub zbar0: f64,
    pub inputs: ThmInputs,
}

pub fn reference_constants() -> ReferenceConstants {
    ReferenceConstants {
        zbar0: 0.8985,
        inputs: ThmInputs {
            f_lip: 7.0,
            delta: 0.1,
            sigma: 0.41,
            kappa: 0.3,
            eta: 1.3,
            gamma: 4311.1,
            m_gain: 1.0,
            k_gain: 1.0,
            alpha_rho: 0.64,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lookup;

    fn budget() -> DoSBudget {
        DoSBudget::new(0.3, 1.3, 2.222, 0.714).unwrap()
    }

    #[test]
    fn minimal_integer_conventions() {
        assert_eq!(minimal_strict(10.594), 11);
        assert_eq!(minimal_strict(11.0), 12);
        assert_eq!(minimal_strict(0.0), 1);
        assert_eq!(minimal_nonstrict(11.0), 11);
        assert_eq!(minimal_nonstrict(13.4), 14);
        assert_eq!(minimal_nonstrict(-3.0), 1);
    }

    #[test]
    fn prop1_examples() {
        let b = rate_bound_prop1(7.0, 0.1, 0.4099, 0.3, 1.3).unwrap();
        let expect = 3.01 / (0.4099 * LN_2);
        assert!((b.threshold - expect).abs() < 1e-12);
        assert!((b.threshold - 10.594).abs() < 1e-3);
        assert_eq!(b.minimal, 11);
        let free = rate_bound_prop1(7.0, 0.1, 0.4099, 0.0, 0.0).unwrap();
        assert!((free.threshold - 0.7 / (0.4099 * LN_2)).abs() < 1e-12);
        let zero = rate_bound_prop1(0.0, 0.1, 0.4099, 0.3, 1.3).unwrap();
        assert_eq!((zero.threshold, zero.minimal), (0.0, 1));
        assert!(matches!(
            rate_bound_prop1(7.0, 0.1, 0.0, 0.3, 1.3),
            Err(BoundsError::Infeasible { .. })
        ));
    }

    #[test]
    fn lemma5_examples() {
        let base = 0.7 / (0.41 * LN_2);
        let at_gamma = rate_bound_lemma5(7.0, 0.1, 0.41, 1234.0, 1.0, 1234.0).unwrap();
        assert!((at_gamma - base).abs() < 1e-12);
        let half = rate_bound_lemma5(7.0, 0.1, 0.41, 1234.0, 1.0, 617.0).unwrap();
        assert!((half - base - 1.0).abs() < 1e-12);
        assert!(rate_bound_lemma5(7.0, 0.1, 0.41, 1234.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn thm_with_reference_constants() {
        let r = reference_constants();
        let b = rate_bound_thm(&r.inputs).unwrap();
        let second = b.convergence_threshold.unwrap();
        assert!((0.7 / (0.41 * LN_2) - 2.463).abs() < 1e-3);
        assert!((second - 15.18).abs() < 5e-3, "{second}");
        assert_eq!(b.minimal, 16);
        assert_eq!(b.binding, Binding::Convergence);
    }

    #[test]
    fn thm_with_formula_gamma() {
        let mut p = reference_constants().inputs;
        p.sigma = 0.4099;
        p.gamma = 0.8 * (7.0 * 0.43 / 0.4099f64).exp();
        assert!((p.gamma / 1234.0 - 1.0).abs() < 0.01, "{}", p.gamma);
        let b = rate_bound_thm(&p).unwrap();
        assert!((b.convergence_threshold.unwrap() - 13.4).abs() < 0.1);
        assert_eq!(b.minimal, 14);
    }

    #[test]
    fn thm_log_term_vanishes() {
        let mut p = reference_constants().inputs;
        p.alpha_rho = p.m_gain * p.gamma;
        let b = rate_bound_thm(&p).unwrap();
        let base = p.f_lip * p.delta / (p.sigma * LN_2);
        assert!((b.convergence_threshold.unwrap() - base).abs() < 1e-12);
        p.alpha_rho = 0.0;
        assert!(matches!(rate_bound_thm(&p), Err(BoundsError::Argument(_))));
    }

    #[test]
    fn envelope_examples() {
        let env = envelope(16, 0.8, 7.0, &budget(), 0.1).unwrap();
        let sigma = budget().sigma(0.1);
        let expect = (LN_2 * sigma * 16.0 - 0.7) / 0.1;
        assert!((env.omega - expect).abs() < 1e-9);
        assert!((env.omega - 38.45).abs() < 0.1, "{}", env.omega);
        assert!((env.by_time(0.0) / env.c - 1.0).abs() < 1e-12);
        assert!(env.decaying());
        let below = envelope(2, 0.8, 7.0, &budget(), 0.1).unwrap();
        assert!(below.omega <= 0.0 && !below.decaying());
        let seq: Vec<f64> = (0..=10).map(|l| env.by_success(l)).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn success_envelope_trivial() {
        assert_eq!(error_envelope_by_success(1.0, 0.5, 3), 1.0 / 16.0);
        assert_eq!(error_envelope_by_success(2.0, 0.25, 0), 0.5);
    }

    #[test]
    fn lambda_threshold_is_tight() {
        let b = budget();
        let r = rate_bound_prop1(7.0, 0.1, b.sigma(0.1), 0.0, 0.0).unwrap();
        let free = DoSBudget::new(0.0, 0.0, b.t_dur, b.tau_d).unwrap();
        assert!(envelope(r.minimal, 0.8, 7.0, &free, 0.1).unwrap().lambda < 1.0);
        assert!(envelope(r.minimal - 1, 0.8, 7.0, &free, 0.1).unwrap().lambda >= 1.0);
    }

    #[test]
    fn rho_resolution() {
        assert!((RhoSpec::default().resolve(0.32).unwrap() - 0.999 * 0.32).abs() < 1e-15);
        assert_eq!(RhoSpec::Absolute(0.1).resolve(0.32).unwrap(), 0.1);
        assert!(RhoSpec::Absolute(0.32).resolve(0.32).is_err());
        assert!(RhoSpec::Fraction(0.0).resolve(0.32).is_err());
    }

    #[test]
    fn derive_cubic_example() {
        let sys = lookup("paper-example").unwrap();
        let p = derive(&*sys.plant, &*sys.cert, &budget(), 0.1, 0.65, &DeriveSettings::default())
            .unwrap();
        assert!((p.sigma - 0.4099).abs() < 5e-3);
        assert!((p.phimax_zbar0 - 0.8).abs() < 0.05);
        assert!((p.l - 0.32).abs() < 0.04);
        assert!((6.8..=7.1).contains(&p.F), "{}", p.F);
        assert!((1.0..=1.05).contains(&p.M), "{}", p.M);
        assert!((p.U - 2.0).abs() < 0.1, "{}", p.U);
        // internal consistency of the chain
        assert!(p.W > p.phimax_zbar0);
        assert!((sys.cert.alpha2(p.phimax_zbar0) - p.l).abs() < 1e-9);
        assert!((sys.cert.alpha1_inv(p.l + p.delta) - p.W).abs() < 1e-9);
        assert!((sys.cert.alpha1_inv(sys.cert.alpha2(2.0 * p.W)) - p.O).abs() < 1e-9);
        assert!(p.rho > 0.0 && p.rho < p.l + p.delta);
        assert_eq!(p.R_prop1, 11);
        assert_eq!(p.R_thm, 14);
        assert_eq!(p.K, 1.0);
        assert!(p.lambda < 1.0);
    }

    #[test]
    fn derive_attack_free_reduces() {
        let sys = lookup("paper-example").unwrap();
        let free = DoSBudget::new(0.0, 0.0, 1e12, 1e12).unwrap();
        let p = derive(&*sys.plant, &*sys.cert, &free, 0.1, 0.65, &DeriveSettings::default())
            .unwrap();
        assert_eq!(p.zbar0, 0.0);
        assert!((p.l - sys.cert.alpha2(0.65)).abs() < 1e-12);
    }

    #[test]
    fn derive_errors() {
        let sys = lookup("paper-example").unwrap();
        let bad = DoSBudget::new(0.3, 1.3, 2.0, 0.2).unwrap();
        assert!(matches!(
            derive(&*sys.plant, &*sys.cert, &bad, 0.1, 0.65, &DeriveSettings::default()),
            Err(BoundsError::Infeasible { .. })
        ));
        let settings = DeriveSettings {
            rho: RhoSpec::Absolute(0.32),
            ..DeriveSettings::default()
        };
        assert!(matches!(
            derive(&*sys.plant, &*sys.cert, &budget(), 0.1, 0.65, &settings),
            Err(BoundsError::Argument(_))
        ));
    }
}
