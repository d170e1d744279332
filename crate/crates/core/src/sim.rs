//! Closed-loop simulation: plant, channel attempts under DoS, paired
//! encoder/decoder, trace recording and audits against the derived bounds.
//!
//! The plant is integrated as the pair `(x̄, e)` with `x = x̄ + e`. The
//! estimate follows `x̄̇ = f(x̄, k(x̄))` and the error follows
//! `ė = f(x̄ + e, u) − f(x̄, u) = G(x̄, e, u) e` with `u = k(x̄)`, both by RK4
//! over the same stage points. Carried in scaled form, `e` keeps full relative
//! precision while the range `L` contracts by thousands of binary orders of
//! magnitude over a run. As a consequence the control input is evaluated at
//! every RK4 stage rather than held over the step.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::DerivedParams;
use crate::codec::{self, CodecError, CodecState, Phase};
use crate::dos::{self, AttackStyle, DoSBudget, DoSSequence, DosError, TransmissionLog};
use crate::dynamics::{
    integrate_step, norm_inf, ControlSystem, DynamicsError, EstimateStages, PhiMaxTracker,
};
use crate::scaled::{Magnitude, ScaledVec};

/// Relative slack used by the audit clauses.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// `|x(horizon)|∞` below which a run counts as stabilized.
pub const STABILIZED_NORM: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Dos(#[from] DosError),
    #[error(transparent)]
    Codec(CodecError),
    #[error(transparent)]
    Dynamics(DynamicsError),
    #[error("encoder and decoder diverged at t = {time}")]
    Desync { time: f64 },
    #[error("trace output: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Sequence(DoSSequence),
    Generated { style: AttackStyle, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub system: ControlSystem,
    pub budget: DoSBudget,
    pub attack: AttackSpec,
    /// Sampling period `Δ`.
    pub delta: f64,
    pub bits: u32,
    pub x_bound: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Integration step; must divide `Δ`.
    pub h: f64,
    /// Growth rate of `L` after the first success.
    pub f_lip: f64,
    /// `|x|∞` above which the run is declared divergent.
    pub divergence_radius: f64,
    /// Grid resolution for the running `φ_max(t)`.
    pub phimax_points: usize,
    /// `δ/(Mγ)`, to report `θ = z₀ + δ/(Mγ)`.
    pub theta_offset: Option<f64>,
}

impl SimConfig {
    /// Config with `F`, the divergence radius `10·O` and `θ` taken from a
    /// derivation.
    #[allow(clippy::too_many_arguments)]
    pub fn from_params(
        system: ControlSystem,
        params: &DerivedParams,
        attack: AttackSpec,
        bits: u32,
        x0: Vec<f64>,
        horizon: f64,
        h: f64,
        phimax_points: usize,
    ) -> Self {
        let theta_offset = (params.M > 0.0).then(|| params.delta / (params.M * params.gamma));
        Self {
            system,
            budget: params.budget(),
            attack,
            delta: params.Delta,
            bits,
            x_bound: params.X,
            x0,
            horizon,
            h,
            f_lip: params.F,
            divergence_radius: 10.0 * params.O,
            phimax_points,
            theta_offset,
        }
    }

    /// Steps per sampling period.
    fn steps_per_period(&self) -> Result<usize, SimError> {
        let ratio = self.delta / self.h;
        let spp = ratio.round();
        if !(spp >= 1.0) || (spp * self.h - self.delta).abs() > 1e-12 * self.delta.max(1.0) {
            return Err(SimError::Config(format!(
                "h = {} does not divide Delta = {}",
                self.h, self.delta
            )));
        }
        Ok(spp as usize)
    }

    fn check(&self) -> Result<(), SimError> {
        let n = self.system.state_dim();
        if self.x0.len() != n {
            return Err(SimError::Config(format!(
                "x0 has {} entries, plant has dimension {n}",
                self.x0.len()
            )));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(SimError::Config("x0 must be finite".into()));
        }
        if norm_inf(&self.x0) > self.x_bound {
            return Err(SimError::Config(format!(
                "|x0| = {} exceeds X = {}",
                norm_inf(&self.x0),
                self.x_bound
            )));
        }
        let positive = [
            ("Delta", self.delta),
            ("h", self.h),
            ("X", self.x_bound),
            ("divergence radius", self.divergence_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(SimError::Config(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.f_lip.is_finite() && self.f_lip >= 0.0) {
            return Err(SimError::Config(format!("F must be >= 0, got {}", self.f_lip)));
        }
        self.budget.check()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    None,
    AttemptFail,
    Success { packed: u64 },
    Overflow,
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::None => Ok(()),
            Self::AttemptFail => f.write_str("attempt-fail"),
            Self::Success { packed } => write!(f, "success:{packed}"),
            Self::Overflow => f.write_str("overflow"),
        }
    }
}

/// One integration step, recorded after any event at that instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub range: Magnitude,
    pub u: Vec<f64>,
    pub event: Event,
    pub phase: Phase,
    /// `|e|∞ / L`.
    pub error_ratio: f64,
    /// `ln |e|∞`, finite even when `|e|` underflows an `f64`.
    pub ln_error: f64,
    /// Running `φ_max(t)` before the first success.
    pub phimax: Option<f64>,
    pub lyapunov: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRecord {
    pub time: f64,
    pub ell: u64,
    pub packed: u64,
    /// `L(z_ℓ⁻)` and `L(z_ℓ)`.
    pub range_before: Magnitude,
    pub range_after: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Overflow { time: f64, dim: usize, ratio: f64 },
    Divergence { time: f64, norm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub z0: Option<f64>,
    /// `θ = z₀ + δ/(Mγ)`.
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<SimRow>,
    pub log: TransmissionLog,
    pub successes: Vec<SuccessRecord>,
    pub outcome: Outcome,
    pub attack: DoSSequence,
    pub bits: u32,
    pub delta: f64,
    pub f_lip: f64,
    pub diagnostics: Diagnostics,
}

impl SimTrace {
    pub fn final_norm(&self) -> f64 {
        self.rows.last().map(|r| norm_inf(&r.x)).unwrap_or(f64::NAN)
    }

    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    pub fn stabilized(&self) -> bool {
        self.completed() && self.final_norm() <= STABILIZED_NORM
    }
}

fn resolve_attack(cfg: &SimConfig) -> Result<DoSSequence, SimError> {
    Ok(match &cfg.attack {
        AttackSpec::Sequence(s) => s.clone(),
        AttackSpec::Generated { style, seed } => {
            dos::generate(&cfg.budget, cfg.delta, cfg.horizon, *seed, *style)?
        }
    })
}

fn mat_vec(g: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| g[i * n + j] * v[j]).sum())
        .collect()
}

/// RK4 for `ė = G e` along the estimate stages, in the mantissa space of `e`.
fn error_step(cfg: &SimConfig, stages: &EstimateStages, e: &ScaledVec, h: f64) -> ScaledVec {
    let plant = &*cfg.system.plant;
    let m = e.mantissa();
    let scale = e.exp2();
    let coef = [0.0, 0.5 * h, 0.5 * h, h];
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(4);
    for (s, c) in coef.iter().enumerate() {
        let ms: Vec<f64> = match ks.last() {
            None => m.to_vec(),
            Some(k) => m.iter().zip(k).map(|(a, b)| a + c * b).collect(),
        };
        let es = ScaledVec::from_parts(ms.clone(), scale).to_f64();
        let g = plant.secant(&stages.points[s], &es, &stages.inputs[s]);
        ks.push(mat_vec(&g, &ms));
    }
    let next: Vec<f64> = (0..m.len())
        .map(|i| m[i] + h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]))
        .collect();
    ScaledVec::from_parts(next, scale)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

struct Loop<'a> {
    cfg: &'a SimConfig,
    enc: CodecState,
    dec: CodecState,
    error: ScaledVec,
    tracker: PhiMaxTracker,
    rows: Vec<SimRow>,
    successes: Vec<SuccessRecord>,
}

impl Loop<'_> {
    fn record(&mut self, t: f64, event: Event) {
        let cert = &*self.cfg.system.cert;
        let xhat = self.enc.xhat.clone();
        let x = add(&xhat, &self.error.to_f64());
        let u = match self.enc.phase {
            Phase::PreFirstSuccess => vec![0.0; self.cfg.system.input_dim()],
            Phase::PostFirstSuccess => cert.control(&xhat),
        };
        let err = self.error.norm_inf();
        let error_ratio = if self.enc.range.is_zero() {
            if err.is_zero() { 0.0 } else { f64::INFINITY }
        } else {
            err.ratio(&self.enc.range)
        };
        let phimax = (self.enc.phase == Phase::PreFirstSuccess).then(|| self.tracker.value());
        self.rows.push(SimRow {
            t,
            lyapunov: cert.value(&x),
            x,
            xhat,
            range: self.enc.range,
            u,
            event,
            phase: self.enc.phase,
            error_ratio,
            ln_error: err.ln(),
            phimax,
        });
    }
}

/// Simulate the closed loop over `[0, horizon]`.
pub fn run(cfg: &SimConfig) -> Result<SimTrace, SimError> {
    cfg.check()?;
    let spp = cfg.steps_per_period()?;
    let attack = resolve_attack(cfg)?;
    let log = dos::resolve_transmissions(&attack, cfg.delta, cfg.horizon);
    let n = cfg.system.state_dim();
    let plant = &*cfg.system.plant;
    let cert = &*cfg.system.cert;
    let zero_u = vec![0.0; cfg.system.input_dim()];
    let steps = (cfg.horizon / cfg.h + 1e-9).floor() as usize;

    let enc = codec::init(cfg.x_bound, cfg.bits, n).map_err(SimError::Codec)?;
    let tracker = PhiMaxTracker::new(plant, cfg.x_bound, cfg.phimax_points)
        .map_err(SimError::Dynamics)?;
    let mut lp = Loop {
        cfg,
        dec: enc.clone(),
        enc,
        error: ScaledVec::from_f64(&cfg.x0),
        tracker,
        rows: Vec::with_capacity(steps + 1),
        successes: Vec::new(),
    };
    let mut outcome = Outcome::Completed;

    'steps: for k in 0..=steps {
        let t = k as f64 * cfg.h;
        let mut event = Event::None;
        if k % spp == 0 && k / spp < log.attempts.len() {
            let i = k / spp;
            if log.succeeded(i) {
                let before = lp.enc.range;
                match codec::encode_error(&lp.enc, &lp.error) {
                    Ok((index, next, offset)) => {
                        let packed = index.pack(cfg.bits);
                        let decoded = codec::decode_packed(&lp.dec, packed).map_err(SimError::Codec)?;
                        if decoded != next {
                            return Err(SimError::Desync { time: t });
                        }
                        lp.error = lp.error.sub(&offset);
                        lp.enc = next;
                        lp.dec = decoded;
                        lp.successes.push(SuccessRecord {
                            time: log.attempts[i],
                            ell: lp.successes.len() as u64,
                            packed,
                            range_before: before,
                            range_after: lp.enc.range,
                        });
                        event = Event::Success { packed };
                    }
                    Err(CodecError::Overflow { dim, ratio }) => {
                        lp.record(t, Event::Overflow);
                        outcome = Outcome::Overflow { time: t, dim, ratio };
                        break 'steps;
                    }
                    Err(other) => return Err(SimError::Codec(other)),
                }
            } else {
                event = Event::AttemptFail;
            }
        }
        lp.record(t, event);
        if k == steps {
            break;
        }

        let diverged = |x: &[f64]| !x.iter().all(|v| v.is_finite()) || norm_inf(x) > cfg.divergence_radius;
        match lp.enc.phase {
            Phase::PreFirstSuccess => {
                let x = lp.error.to_f64();
                let next = match integrate_step(plant, t, &x, &zero_u, cfg.h) {
                    Ok(v) => v,
                    Err(_) => {
                        outcome = Outcome::Divergence { time: t + cfg.h, norm: f64::INFINITY };
                        break;
                    }
                };
                let phimax = match lp.tracker.advance(plant, cfg.h) {
                    Ok(v) => v,
                    Err(_) => {
                        outcome = Outcome::Divergence { time: t + cfg.h, norm: norm_inf(&next) };
                        break;
                    }
                };
                lp.enc = codec::evolve_pre(&lp.enc, t + cfg.h, phimax).map_err(SimError::Codec)?;
                lp.dec = codec::evolve_pre(&lp.dec, t + cfg.h, phimax).map_err(SimError::Codec)?;
                lp.error = ScaledVec::from_f64(&next);
                if diverged(&next) {
                    outcome = Outcome::Divergence { time: t + cfg.h, norm: norm_inf(&next) };
                    lp.record(t + cfg.h, Event::None);
                    break;
                }
            }
            Phase::PostFirstSuccess => {
                let step = codec::evolve_post_step(&lp.enc, cfg.f_lip, plant, cert, t, cfg.h);
                let (enc, stages) = match step {
                    Ok(v) => v,
                    Err(CodecError::Dynamics(_)) => {
                        outcome = Outcome::Divergence { time: t + cfg.h, norm: f64::INFINITY };
                        break;
                    }
                    Err(other) => return Err(SimError::Codec(other)),
                };
                let dec = codec::evolve_post_step(&lp.dec, cfg.f_lip, plant, cert, t, cfg.h)
                    .map_err(SimError::Codec)?
                    .0;
                lp.error = error_step(cfg, &stages, &lp.error, cfg.h);
                lp.enc = enc;
                lp.dec = dec;
                let x = add(&lp.enc.xhat, &lp.error.to_f64());
                if !lp.error.is_finite() || diverged(&x) {
                    outcome = Outcome::Divergence { time: t + cfg.h, norm: norm_inf(&x) };
                    if lp.error.is_finite() {
                        lp.record(t + cfg.h, Event::None);
                    }
                    break;
                }
            }
        }
    }

    let z0 = lp.successes.first().map(|s| s.time);
    let theta = z0.zip(cfg.theta_offset).map(|(z, off)| z + off);
    Ok(SimTrace {
        rows: lp.rows,
        log,
        successes: lp.successes,
        outcome,
        attack,
        bits: cfg.bits,
        delta: cfg.delta,
        f_lip: cfg.f_lip,
        diagnostics: Diagnostics { z0, theta },
    })
}

/// Write the trace as `t,x_1..x_n,xhat_1..xhat_n,L,u_1..u_m,event`. `L` is
/// written as the nearest `f64` and reads `0` once it underflows.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<(), SimError> {
    let io = |e: csv::Error| SimError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let (n, m) = trace
        .rows
        .first()
        .map(|r| (r.x.len(), r.u.len()))
        .unwrap_or((0, 0));
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=n).map(|i| format!("xhat_{i}")));
    header.push("L".into());
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.push("event".into());
    w.write_record(&header).map_err(io)?;
    for r in &trace.rows {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(r.t.to_string());
        rec.extend(r.x.iter().map(f64::to_string));
        rec.extend(r.xhat.iter().map(f64::to_string));
        rec.push(r.range.to_f64().to_string());
        rec.extend(r.u.iter().map(f64::to_string));
        rec.push(r.event.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    /// Smallest slack `bound − measured` (log domain for the envelopes).
    pub worst_margin: Option<f64>,
    /// Time of the worst margin.
    pub worst_time: Option<f64>,
}

#[derive(Default)]
struct Clause {
    checked: usize,
    violations: usize,
    worst: Option<(f64, f64)>,
}

impl Clause {
    fn check(&mut self, t: f64, margin: f64, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
        if self.worst.is_none_or(|(m, _)| margin < m) {
            self.worst = Some((margin, t));
        }
    }

    fn finish(self) -> ClauseResult {
        ClauseResult {
            passed: self.violations == 0,
            checked: self.checked,
            violations: self.violations,
            worst_margin: self.worst.map(|w| w.0),
            worst_time: self.worst.map(|w| w.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bits: u32,
    pub outcome: Outcome,
    /// `R ≥ R_prop1`: the envelope clauses are guaranteed only then.
    pub envelope_applicable: bool,
    pub stabilized: bool,
    pub final_norm: f64,
    pub z0: Option<f64>,
    pub theta: Option<f64>,
    /// (i) `|e| ≤ L/2`.
    pub containment: ClauseResult,
    /// (ii) `|e| ≤ φ_max(t) < W` before the first success.
    pub pre_first_success: ClauseResult,
    /// (iii) `|e| ≤ γ λ^{ℓ+1}` on `[z_ℓ, z_{ℓ+1})`.
    pub success_envelope: ClauseResult,
    /// (iv) `|e| ≤ c e^{−ωt}`.
    pub time_envelope: ClauseResult,
    /// (v) `V(x) ≤ l + δ`.
    pub level_set: ClauseResult,
    /// (vi) first-success and success-spacing bounds.
    pub transmission_timing: ClauseResult,
    /// `L(z_ℓ) = e^{F(z_ℓ − z₀)} L(z₀⁻) / 2^{R(ℓ+1)}`.
    pub contraction: ClauseResult,
}

impl AuditReport {
    pub fn clauses(&self) -> [(&'static str, &ClauseResult); 7] {
        [
            ("containment", &self.containment),
            ("pre_first_success", &self.pre_first_success),
            ("success_envelope", &self.success_envelope),
            ("time_envelope", &self.time_envelope),
            ("level_set", &self.level_set),
            ("transmission_timing", &self.transmission_timing),
            ("contraction", &self.contraction),
        ]
    }

    pub fn passed_count(&self) -> usize {
        self.clauses().iter().filter(|(_, c)| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed_count() == self.clauses().len()
    }
}

/// Check every recorded step against the derived bounds at bit count
/// `trace.bits`.
pub fn audit(trace: &SimTrace, params: &DerivedParams) -> AuditReport {
    let tol = AUDIT_TOLERANCE;
    let env = params.envelope_at(trace.bits);
    let ln_w = params.W.ln();
    let mut containment = Clause::default();
    let mut pre = Clause::default();
    let mut by_success = Clause::default();
    let mut by_time = Clause::default();
    let mut level = Clause::default();
    let mut timing = Clause::default();
    let mut contraction = Clause::default();

    let z0 = trace.successes.first().map(|s| s.time);
    let mut ell: Option<u64> = None;
    let mut next_success = 0usize;
    for r in &trace.rows {
        if r.event == Event::Overflow {
            continue;
        }
        while next_success < trace.successes.len() && trace.successes[next_success].time <= r.t + 1e-12 {
            ell = Some(next_success as u64);
            next_success += 1;
        }
        containment.check(r.t, 0.5 - r.error_ratio, r.error_ratio <= 0.5 * (1.0 + tol));
        if let Some(phi) = r.phimax {
            let bound = phi.ln();
            let margin = (bound - r.ln_error).min(ln_w - bound);
            pre.check(r.t, margin, r.ln_error <= bound + tol && phi < params.W);
        }
        if let Some(l) = ell {
            let bound = env.ln_by_success(l);
            by_success.check(r.t, bound - r.ln_error, r.ln_error <= bound + tol);
        }
        let bound = env.ln_by_time(r.t);
        by_time.check(r.t, bound - r.ln_error, r.ln_error <= bound + tol);
        let cap = params.l + params.delta;
        level.check(r.t, cap - r.lyapunov, r.lyapunov <= cap + tol);
    }

    let budget = params.budget();
    if let Some(z0) = z0 {
        let (zbar0, _) = budget
            .lemma1_bounds(params.Delta, 0)
            .expect("sigma was checked during derivation");
        timing.check(z0, zbar0 - z0, z0 <= zbar0 + tol);
        let base = trace.successes[0].range_before;
        for s in &trace.successes {
            let (_, off) = budget
                .lemma1_bounds(params.Delta, s.ell)
                .expect("sigma was checked during derivation");
            let gap = s.time - z0;
            timing.check(s.time, off - gap, gap <= off + tol);
            let expect = base.ln() + trace.f_lip * gap
                - (trace.bits as f64) * (s.ell as f64 + 1.0) * std::f64::consts::LN_2;
            let got = s.range_after.ln();
            let rel = (got - expect).abs();
            contraction.check(s.time, 1e-9 - rel, rel <= 1e-9);
        }
    }

    AuditReport {
        bits: trace.bits,
        outcome: trace.outcome.clone(),
        envelope_applicable: trace.bits >= params.R_prop1,
        stabilized: trace.stabilized(),
        final_norm: trace.final_norm(),
        z0,
        theta: trace.diagnostics.theta,
        containment: containment.finish(),
        pre_first_success: pre.finish(),
        success_envelope: by_success.finish(),
        time_envelope: by_time.finish(),
        level_set: level.finish(),
        transmission_timing: timing.finish(),
        contraction: contraction.finish(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "R")]
    pub bits: u32,
    pub stabilized: bool,
    pub final_norm: f64,
    pub outcome: String,
    pub clauses_passed: usize,
    pub clauses_total: usize,
    pub envelope_applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Smallest `R` in the range whose run stabilized.
    pub minimal_stabilizing: Option<u32>,
    #[serde(rename = "R_thm")]
    pub r_thm: u32,
}

fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Completed => "completed",
        Outcome::Overflow { .. } => "overflow",
        Outcome::Divergence { .. } => "divergence",
    }
}

/// Run the template at every `R` in `bits`, in parallel, with the same
/// attack.
pub fn sweep_r(
    template: &SimConfig,
    params: &DerivedParams,
    bits: std::ops::RangeInclusive<u32>,
) -> Result<SweepResult, SimError> {
    if bits.is_empty() {
        return Err(SimError::Config("empty R range".into()));
    }
    let rows: Vec<Result<SweepRow, SimError>> = bits
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig {
                bits: r,
                ..template.clone()
            };
            let trace = run(&cfg)?;
            let report = audit(&trace, params);
            Ok(SweepRow {
                bits: r,
                stabilized: trace.stabilized(),
                final_norm: trace.final_norm(),
                outcome: outcome_label(&trace.outcome).into(),
                clauses_passed: report.passed_count(),
                clauses_total: report.clauses().len(),
                envelope_applicable: report.envelope_applicable,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let minimal_stabilizing = rows.iter().find(|r| r.stabilized).map(|r| r.bits);
    Ok(SweepResult {
        rows,
        minimal_stabilizing,
        r_thm: params.R_thm,
    })
}

/// Sweep table with `R_thm` and the minimal stabilizing `R` as footer rows.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), SimError> {
    let io = |e: csv::Error| SimError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "R",
        "stabilized",
        "final_norm",
        "outcome",
        "clauses_passed",
        "clauses_total",
        "envelope_applicable",
    ])
    .map_err(io)?;
    for r in &result.rows {
        w.write_record([
            r.bits.to_string(),
            r.stabilized.to_string(),
            r.final_norm.to_string(),
            r.outcome.clone(),
            r.clauses_passed.to_string(),
            r.clauses_total.to_string(),
            r.envelope_applicable.to_string(),
        ])
        .map_err(io)?;
    }
    let blank = || String::new();
    w.write_record([
        "R_thm".to_string(),
        result.r_thm.to_string(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
    ])
    .map_err(io)?;
    let min = result
        .minimal_stabilizing
        .map(|r| r.to_string())
        .unwrap_or_else(|| "none".into());
    w.write_record(["R_min_stabilizing".to_string(), min, blank(), blank(), blank(), blank(), blank()])
        .map_err(io)?;
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}
