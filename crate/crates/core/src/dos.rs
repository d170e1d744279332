//! Time-constrained Denial-of-Service.
//!
//! Attack interval `k` is `H_k = {h_k} ∪ [h_k, h_k + τ_k)`: closed on the
//! left, open on the right, and a zero-length entry is a pulse that blocks
//! exactly its own instant. A budget `(κ, η, T, τ_D)` admits a sequence when
//! for all `τ ≤ t`
//!
//! ```text
//! k(τ, t) ≤ η + (t − τ)/τ_D        (onsets in [τ, t])
//! Ξ(τ, t) ≤ κ + (t − τ)/T          (attacked length in [τ, t])
//! ```

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack applied to both budget inequalities in floating point.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DosError {
    #[error("invalid DoS budget: {0}")]
    Budget(String),
    #[error("malformed DoS sequence at interval {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("window start {tau} exceeds window end {t}")]
    Window { tau: f64, t: f64 },
    #[error("infeasible DoS budget: sigma = {sigma} (must be > 0)")]
    Infeasible { sigma: f64 },
    #[error("attack CSV row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("attack CSV I/O: {0}")]
    Io(String),
}

/// Frequency `(η, τ_D)` and duration `(κ, T)` limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoSBudget {
    pub kappa: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t_dur: f64,
    #[serde(rename = "tauD")]
    pub tau_d: f64,
}

impl DoSBudget {
    pub fn new(kappa: f64, eta: f64, t_dur: f64, tau_d: f64) -> Result<Self, DosError> {
        let b = Self {
            kappa,
            eta,
            t_dur,
            tau_d,
        };
        b.check()?;
        Ok(b)
    }

    /// A budget admitting no attack at all.
    pub fn attack_free() -> Self {
        Self {
            kappa: 0.0,
            eta: 0.0,
            t_dur: 1e12,
            tau_d: 1e12,
        }
    }

    pub fn check(&self) -> Result<(), DosError> {
        let all = [self.kappa, self.eta, self.t_dur, self.tau_d];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DosError::Budget("all budget fields must be finite".into()));
        }
        if self.kappa < 0.0 || self.eta < 0.0 {
            return Err(DosError::Budget(format!(
                "kappa and eta must be >= 0 (kappa = {}, eta = {})",
                self.kappa, self.eta
            )));
        }
        if self.t_dur <= 0.0 || self.tau_d <= 0.0 {
            return Err(DosError::Budget(format!(
                "T and tauD must be > 0 (T = {}, tauD = {})",
                self.t_dur, self.tau_d
            )));
        }
        Ok(())
    }

    /// `σ = 1 − 1/T − Δ/τ_D`; may be nonpositive.
    pub fn sigma(&self, delta: f64) -> f64 {
        1.0 - 1.0 / self.t_dur - delta / self.tau_d
    }

    /// `((κ + ηΔ)/σ, (ℓΔ + κ + ηΔ)/σ)`: worst-case first success time and
    /// worst-case offset `z_ℓ − z₀`.
    pub fn lemma1_bounds(&self, delta: f64, ell: u64) -> Result<(f64, f64), DosError> {
        let sigma = self.sigma(delta);
        if sigma <= 0.0 {
            return Err(DosError::Infeasible { sigma });
        }
        let offset = self.kappa + self.eta * delta;
        Ok((offset / sigma, (ell as f64 * delta + offset) / sigma))
    }
}

pub fn sigma(budget: &DoSBudget, delta: f64) -> f64 {
    budget.sigma(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoSInterval {
    pub start: f64,
    pub length: f64,
}

impl DoSInterval {
    pub fn new(start: f64, length: f64) -> Self {
        Self { start, length }
    }

    pub fn pulse(start: f64) -> Self {
        Self { start, length: 0.0 }
    }

    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    pub fn contains(&self, t: f64) -> bool {
        t == self.start || (t >= self.start && t < self.end())
    }
}

/// Ordered interval list with cumulative lengths for `O(log K)` window
/// queries.
#[derive(Debug, Clone, Default, PartialEq)]
struct Timeline {
    intervals: Vec<DoSInterval>,
    // prefix[k] = total length of intervals[..k]
    prefix: Vec<f64>,
}

impl Timeline {
    fn new() -> Self {
        Self {
            intervals: Vec::new(),
            prefix: vec![0.0],
        }
    }

    fn push(&mut self, iv: DoSInterval) {
        let total = self.prefix.last().copied().unwrap_or(0.0) + iv.length;
        self.intervals.push(iv);
        self.prefix.push(total);
    }

    fn pop(&mut self) {
        self.intervals.pop();
        self.prefix.pop();
    }

    /// Attacked length inside `[0, s]`.
    fn cumulative(&self, s: f64) -> f64 {
        let p = self.intervals.partition_point(|iv| iv.start < s);
        if p == 0 {
            return 0.0;
        }
        let last = self.intervals[p - 1];
        self.prefix[p] - (last.end() - s).max(0.0)
    }

    fn duration(&self, tau: f64, t: f64) -> f64 {
        (self.cumulative(t) - self.cumulative(tau)).max(0.0)
    }

    fn onsets(&self, tau: f64, t: f64) -> usize {
        let upto = self.intervals.partition_point(|iv| iv.start <= t);
        let before = self.intervals.partition_point(|iv| iv.start < tau);
        upto.saturating_sub(before)
    }

    fn blocked(&self, t: f64) -> bool {
        let p = self.intervals.partition_point(|iv| iv.start <= t);
        p > 0 && self.intervals[p - 1].contains(t)
    }

    fn critical_points(&self, horizon: f64) -> Vec<f64> {
        let mut pts = Vec::with_capacity(2 * self.intervals.len() + 2);
        pts.push(0.0);
        for iv in &self.intervals {
            pts.push(iv.start);
            pts.push(iv.end());
        }
        pts.push(horizon);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn check_pair(&self, budget: &DoSBudget, tau: f64, t: f64, out: &mut Vec<Violation>) {
        let span = t - tau;
        let count = self.onsets(tau, t);
        let allowed = budget.eta + span / budget.tau_d;
        if count as f64 > allowed + BUDGET_TOLERANCE {
            out.push(Violation {
                kind: ViolationKind::Frequency,
                tau,
                t,
                observed: count as f64,
                allowed,
            });
        }
        let measure = self.duration(tau, t);
        let allowed = budget.kappa + span / budget.t_dur;
        if measure > allowed + BUDGET_TOLERANCE {
            out.push(Violation {
                kind: ViolationKind::Duration,
                tau,
                t,
                observed: measure,
                allowed,
            });
        }
    }

    /// True when the last interval keeps the budget given the rest already
    /// did: only windows ending at its start, its end, or the horizon change.
    fn admits_last(&self, budget: &DoSBudget, horizon: f64) -> bool {
        let Some(last) = self.intervals.last().copied() else {
            return true;
        };
        let mut scratch = Vec::new();
        let rights = [last.start, last.end(), horizon.max(last.end())];
        for tau in self.critical_points(horizon) {
            for &t in &rights {
                if t >= tau {
                    self.check_pair(budget, tau, t, &mut scratch);
                    if !scratch.is_empty() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// A concrete attack: disjoint ordered intervals with onsets in `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoSSequence {
    timeline: Timeline,
    horizon: f64,
}

impl DoSSequence {
    pub fn new(intervals: Vec<DoSInterval>, horizon: f64) -> Result<Self, DosError> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(DosError::Malformed {
                index: 0,
                reason: format!("horizon must be finite and >= 0, got {horizon}"),
            });
        }
        let mut timeline = Timeline::new();
        for (index, iv) in intervals.into_iter().enumerate() {
            let bad = |reason: String| DosError::Malformed { index, reason };
            if !(iv.start.is_finite() && iv.length.is_finite()) {
                return Err(bad("non-finite field".into()));
            }
            if iv.length < 0.0 {
                return Err(bad(format!("negative length {}", iv.length)));
            }
            if iv.start < 0.0 || iv.start > horizon {
                return Err(bad(format!(
                    "onset {} outside [0, {horizon}]",
                    iv.start
                )));
            }
            if let Some(prev) = timeline.intervals.last() {
                if iv.start <= prev.start {
                    return Err(bad("onsets must be strictly increasing".into()));
                }
                if prev.end() > iv.start {
                    return Err(bad(format!(
                        "overlaps previous interval ending at {}",
                        prev.end()
                    )));
                }
            }
            timeline.push(iv);
        }
        Ok(Self { timeline, horizon })
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            timeline: Timeline::new(),
            horizon,
        }
    }

    pub fn intervals(&self) -> &[DoSInterval] {
        &self.timeline.intervals
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.timeline.intervals.is_empty()
    }

    /// Whether `t` lies in some `H_k`.
    pub fn is_blocked(&self, t: f64) -> bool {
        self.timeline.blocked(t)
    }

    /// `Ξ(τ, t)`: Lebesgue length of the attacked part of `[τ, t]`.
    pub fn duration_measure(&self, tau: f64, t: f64) -> Result<f64, DosError> {
        if tau > t {
            return Err(DosError::Window { tau, t });
        }
        Ok(self.timeline.duration(tau, t))
    }

    /// `k(τ, t)`: onsets `h_k ∈ [τ, t]` (closed window).
    pub fn frequency_count(&self, tau: f64, t: f64) -> Result<usize, DosError> {
        if tau > t {
            return Err(DosError::Window { tau, t });
        }
        Ok(self.timeline.onsets(tau, t))
    }

    /// `{0, h_k, h_k + τ_k, horizon}`, sorted without duplicates.
    pub fn critical_points(&self) -> Vec<f64> {
        self.timeline.critical_points(self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Frequency,
    Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tau: f64,
    pub t: f64,
    pub observed: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub windows_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check both budget inequalities on every window whose endpoints come from
/// the critical set.
///
/// `Ξ` and `k` are piecewise linear / constant in each endpoint with breaks
/// only at interval endpoints, so the worst windows are among these pairs.
pub fn validate(seq: &DoSSequence, budget: &DoSBudget) -> ValidationReport {
    let pts = seq.critical_points();
    let mut violations = Vec::new();
    let mut windows_checked = 0;
    for (i, &tau) in pts.iter().enumerate() {
        for &t in &pts[i..] {
            windows_checked += 1;
            seq.timeline.check_pair(budget, tau, t, &mut violations);
        }
    }
    ValidationReport {
        windows_checked,
        violations,
    }
}

/// Attempt instants `t_i = iΔ ≤ horizon` and the subsequence that succeeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLog {
    pub delta: f64,
    pub attempts: Vec<f64>,
    /// Indices into `attempts` of the successful transmissions, increasing.
    pub successes: Vec<usize>,
}

impl TransmissionLog {
    pub fn success_times(&self) -> Vec<f64> {
        self.successes.iter().map(|&i| self.attempts[i]).collect()
    }

    pub fn succeeded(&self, attempt: usize) -> bool {
        self.successes.binary_search(&attempt).is_ok()
    }

    /// First success instant `z₀`, if any.
    pub fn first_success(&self) -> Option<f64> {
        self.successes.first().map(|&i| self.attempts[i])
    }
}

/// Number of attempts `iΔ` with `iΔ ≤ horizon`.
pub fn attempt_count(delta: f64, horizon: f64) -> usize {
    (horizon / delta + 1e-9).floor() as usize + 1
}

pub fn resolve_transmissions(seq: &DoSSequence, delta: f64, horizon: f64) -> TransmissionLog {
    assert!(delta > 0.0, "sampling period must be positive");
    let count = attempt_count(delta, horizon);
    let attempts: Vec<f64> = (0..count).map(|i| i as f64 * delta).collect();
    let successes = attempts
        .iter()
        .enumerate()
        .filter(|(_, &t)| !seq.is_blocked(t))
        .map(|(i, _)| i)
        .collect();
    TransmissionLog {
        delta,
        attempts,
        successes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStyle {
    /// Exponential gaps, uniform lengths, rejection of anything over budget.
    Random,
    /// Greedy longest runs of blocked attempts, as early as allowed.
    WorstCase,
}

impl std::str::FromStr for AttackStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "worst-case" => Ok(Self::WorstCase),
            other => Err(format!("unknown attack style '{other}' (random | worst-case)")),
        }
    }
}

impl std::fmt::Display for AttackStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::WorstCase => "worst-case",
        })
    }
}

/// Mean gap between a random interval's end and the next onset.
pub fn random_mean_gap(budget: &DoSBudget) -> f64 {
    budget.tau_d
}

/// Upper end of the uniform length draw for random intervals.
pub fn random_max_length(budget: &DoSBudget, delta: f64) -> f64 {
    (2.0 * budget.kappa).max(delta)
}

/// Draw an attack that satisfies `budget` over `[0, horizon]`.
pub fn generate(
    budget: &DoSBudget,
    delta: f64,
    horizon: f64,
    seed: u64,
    style: AttackStyle,
) -> Result<DoSSequence, DosError> {
    budget.check()?;
    if !(delta > 0.0) {
        return Err(DosError::Budget(format!("sampling period must be > 0, got {delta}")));
    }
    let timeline = match style {
        AttackStyle::Random => generate_random(budget, delta, horizon, seed),
        AttackStyle::WorstCase => {
            let sigma = budget.sigma(delta);
            if sigma <= 0.0 {
                return Err(DosError::Infeasible { sigma });
            }
            generate_worst_case(budget, delta, horizon)
        }
    };
    Ok(DoSSequence { timeline, horizon })
}

fn generate_random(budget: &DoSBudget, delta: f64, horizon: f64, seed: u64) -> Timeline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(1.0 / random_mean_gap(budget)).expect("positive rate");
    let max_len = random_max_length(budget, delta);
    let mut timeline = Timeline::new();
    let mut cursor = 0.0;
    loop {
        let start = cursor + gap.sample(&mut rng);
        if start > horizon {
            break;
        }
        let length = rng.random_range(0.0..=max_len);
        timeline.push(DoSInterval::new(start, length));
        if timeline.admits_last(budget, horizon) {
            cursor = start + length;
        } else {
            timeline.pop();
            cursor = start;
        }
    }
    timeline
}

// Covering j consecutive attempts from t_i takes a pulse (j = 1) or an
// interval just past t_{i+j-1}.
fn run_length(j: usize, delta: f64) -> f64 {
    if j <= 1 {
        0.0
    } else {
        (j - 1) as f64 * delta + 1e-6 * delta
    }
}

fn generate_worst_case(budget: &DoSBudget, delta: f64, horizon: f64) -> Timeline {
    let count = attempt_count(delta, horizon);
    let mut timeline = Timeline::new();
    let try_run = |timeline: &mut Timeline, start: f64, j: usize| -> bool {
        timeline.push(DoSInterval::new(start, run_length(j, delta)));
        let ok = timeline.admits_last(budget, horizon);
        timeline.pop();
        ok
    };
    let mut i = 0;
    while i < count {
        let start = i as f64 * delta;
        if !try_run(&mut timeline, start, 1) {
            i += 1;
            continue;
        }
        // admissibility is monotone in the run length
        let (mut lo, mut hi) = (1, count - i);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if try_run(&mut timeline, start, mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        timeline.push(DoSInterval::new(start, run_length(lo, delta)));
        i += lo;
    }
    timeline
}

/// Write `h,tau` rows with round-trip float formatting.
pub fn write_csv<W: Write>(seq: &DoSSequence, out: W) -> Result<(), DosError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "tau"]).map_err(io_err)?;
    for iv in seq.intervals() {
        w.write_record([iv.start.to_string(), iv.length.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| DosError::Io(e.to_string()))
}

fn io_err(e: csv::Error) -> DosError {
    DosError::Io(e.to_string())
}

/// Read an `h,tau` CSV. Without an explicit horizon the last interval end
/// (or 0 for an empty file) is used. Row numbers in errors count data rows
/// from 1.
pub fn read_csv<R: Read>(input: R, horizon: Option<f64>) -> Result<DoSSequence, DosError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut intervals = Vec::new();
    let mut records = reader.records();
    match records.next() {
        None => {}
        Some(Err(e)) => return Err(DosError::Csv { row: 0, message: e.to_string() }),
        Some(Ok(header)) if header.len() != 2 || &header[0] != "h" || &header[1] != "tau" => {
            return Err(DosError::Csv {
                row: 0,
                message: format!("expected header 'h,tau', found {:?}", header),
            });
        }
        Some(Ok(_)) => {}
    }
    for (k, rec) in records.enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| DosError::Csv {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(DosError::Csv {
                row,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let parse = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|_| DosError::Csv {
                row,
                message: format!("field {name} is not a number: '{s}'"),
            })
        };
        intervals.push(DoSInterval::new(parse(&rec[0], "h")?, parse(&rec[1], "tau")?));
    }
    let horizon = horizon.unwrap_or_else(|| {
        intervals
            .iter()
            .map(|iv| iv.end())
            .fold(0.0, f64::max)
    });
    DoSSequence::new(intervals, horizon).map_err(|e| match e {
        DosError::Malformed { index, reason } => DosError::Csv {
            row: index + 1,
            message: reason,
        },
        other => other,
    })
}
