//! Dynamic quantizer shared by the encoder and the decoder.
//!
//! Both ends hold the same [`CodecState`]: an estimate `x̄`, a range `L` and
//! the phase. Before the first success the range tracks `2φ_max(t)` and the
//! estimate stays at the origin. Afterwards `x̄` follows the closed estimate
//! dynamics and `L` grows as `e^{F t}`. A success splits every edge of the
//! region `x̄ + B(L/2)` into `2^R` cells, sends the cell digits, and moves
//! `x̄` to the centroid of the chosen cell with `L ← L / 2^R`.
//!
//! Cell `d` of dimension `j` covers offsets `e_j/L ∈ [d/2^R − ½, (d+1)/2^R − ½)`;
//! a point on the upper face goes to the top cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{estimate_step, DynamicsError, EstimateStages, LyapunovCertificate, PlantModel};
use crate::scaled::{ldexp, Magnitude, ScaledVec};

/// Relative slack on the containment precondition, covering rounding in the
/// error bookkeeping.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("overflow: |e_{dim}|/L = {ratio} exceeds 1/2, state outside the quantization region")]
    Overflow { dim: usize, ratio: f64 },
    #[error("operation requires phase {expected:?}, codec is in {found:?}")]
    Phase { expected: Phase, found: Phase },
    #[error("protocol error: index {packed} outside [0, 2^{bits})")]
    Protocol { packed: u64, bits: u32 },
    #[error("invalid codec configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    PreFirstSuccess,
    PostFirstSuccess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecState {
    pub xhat: Vec<f64>,
    pub range: Magnitude,
    pub phase: Phase,
    pub bits: u32,
    pub n: usize,
}

impl CodecState {
    /// `L` as an `f64`; underflows to zero deep into a run.
    pub fn range_f64(&self) -> f64 {
        self.range.to_f64()
    }

    /// Number of cells per dimension, `2^R`.
    pub fn cells(&self) -> f64 {
        ldexp(1.0, self.bits as i64)
    }
}

/// Per-dimension cell digits `d_j ∈ [0, 2^R)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizationIndex {
    pub digits: Vec<u64>,
}

fn digit_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

impl QuantizationIndex {
    /// `Σ_j d_j · 2^{R j}`, dimension 0 least significant.
    pub fn pack(&self, bits: u32) -> u64 {
        assert!(self.digits.len() as u64 * bits as u64 <= 64, "nR must be <= 64");
        let mask = digit_mask(bits);
        self.digits.iter().enumerate().fold(0u64, |acc, (j, &d)| {
            assert!(d <= mask, "digit {d} does not fit in {bits} bits");
            acc | (d << (bits as usize * j))
        })
    }

    pub fn unpack(packed: u64, n: usize, bits: u32) -> Result<Self, CodecError> {
        let total = n as u64 * bits as u64;
        if total > 64 {
            return Err(CodecError::Config(format!("nR = {total} exceeds 64")));
        }
        if total < 64 && packed >> total != 0 {
            return Err(CodecError::Protocol {
                packed,
                bits: total as u32,
            });
        }
        let mask = digit_mask(bits);
        let digits = (0..n)
            .map(|j| (packed >> (bits as usize * j)) & mask)
            .collect();
        Ok(Self { digits })
    }
}

/// Fresh state with `x̄ = 0`, `L = 2X`.
pub fn init(x_bound: f64, bits: u32, n: usize) -> Result<CodecState, CodecError> {
    if !(x_bound.is_finite() && x_bound > 0.0) {
        return Err(CodecError::Config(format!("X must be finite and > 0, got {x_bound}")));
    }
    if bits == 0 || n == 0 {
        return Err(CodecError::Config("R and n must be >= 1".into()));
    }
    if n as u64 * bits as u64 > 64 {
        return Err(CodecError::Config(format!(
            "nR = {} exceeds the 64-bit packet",
            n as u64 * bits as u64
        )));
    }
    Ok(CodecState {
        xhat: vec![0.0; n],
        range: Magnitude::from_f64(2.0 * x_bound),
        phase: Phase::PreFirstSuccess,
        bits,
        n,
    })
}

fn expect_phase(state: &CodecState, expected: Phase) -> Result<(), CodecError> {
    if state.phase != expected {
        return Err(CodecError::Phase {
            expected,
            found: state.phase,
        });
    }
    Ok(())
}

/// Zoom-out bookkeeping before the first success: `L(t) = 2φ_max(t)`.
pub fn evolve_pre(state: &CodecState, t: f64, phimax_at_t: f64) -> Result<CodecState, CodecError> {
    expect_phase(state, Phase::PreFirstSuccess)?;
    if !(phimax_at_t.is_finite() && phimax_at_t >= 0.0) {
        return Err(CodecError::Dynamics(DynamicsError::Divergence { escape_time: t }));
    }
    let mut next = state.clone();
    next.range = Magnitude::from_f64(2.0 * phimax_at_t);
    Ok(next)
}

/// One RK4 step of length `h` after the first success. The stages are
/// returned so the caller can drive the plant with exactly the same
/// estimate path.
pub fn evolve_post_step(
    state: &CodecState,
    f_lip: f64,
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    t: f64,
    h: f64,
) -> Result<(CodecState, EstimateStages), CodecError> {
    expect_phase(state, Phase::PostFirstSuccess)?;
    let stages = estimate_step(model, cert, t, &state.xhat, h)?;
    let next = CodecState {
        xhat: stages.next.clone(),
        range: state.range.scale((f_lip * h).exp()),
        ..state.clone()
    };
    Ok((next, stages))
}

/// Advance by `dt` with steps no longer than `h`; `L` follows the closed
/// form `L e^{F dt}`.
pub fn evolve_post(
    state: &CodecState,
    dt: f64,
    f_lip: f64,
    model: &dyn PlantModel,
    cert: &dyn LyapunovCertificate,
    h: f64,
) -> Result<CodecState, CodecError> {
    expect_phase(state, Phase::PostFirstSuccess)?;
    if !(dt >= 0.0 && h > 0.0) {
        return Err(CodecError::Config(format!("need dt >= 0 and h > 0 (dt = {dt}, h = {h})")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let steps = (dt / h).ceil().max(1.0) as usize;
    let step = dt / steps as f64;
    let mut xhat = state.xhat.clone();
    for i in 0..steps {
        xhat = estimate_step(model, cert, i as f64 * step, &xhat, step)?.next;
    }
    Ok(CodecState {
        xhat,
        range: state.range.scale((f_lip * dt).exp()),
        ..state.clone()
    })
}

/// Centroid offset `((d + ½)/2^R − ½) L` per dimension and the post-success
/// state. Shared by both ends so they stay bit-identical.
fn apply_index(state: &CodecState, digits: &[u64]) -> (CodecState, ScaledVec) {
    let cells = state.cells();
    let mantissa: Vec<f64> = digits
        .iter()
        .map(|&d| ((d as f64 + 0.5) / cells - 0.5) * state.range.mantissa())
        .collect();
    let offset = ScaledVec::from_parts(mantissa, state.range.exp2());
    let xhat = state
        .xhat
        .iter()
        .zip(offset.to_f64())
        .map(|(a, b)| a + b)
        .collect();
    let next = CodecState {
        xhat,
        range: state.range.shift_down(state.bits),
        phase: Phase::PostFirstSuccess,
        ..state.clone()
    };
    (next, offset)
}

/// Encode the estimation error `e = x − x̄`.
///
/// Returns the index, the post-success state and the centroid offset, so
/// the new error is `e − offset`.
pub fn encode_error(
    state: &CodecState,
    error: &ScaledVec,
) -> Result<(QuantizationIndex, CodecState, ScaledVec), CodecError> {
    if error.len() != state.n {
        return Err(CodecError::Config(format!(
            "error has dimension {}, codec has {}",
            error.len(),
            state.n
        )));
    }
    let cells = state.cells();
    let top = digit_mask(state.bits);
    let mut digits = Vec::with_capacity(state.n);
    for dim in 0..state.n {
        let ratio = if state.range.is_zero() {
            if error.mantissa()[dim] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            error.entry_ratio(dim, &state.range)
        };
        if !(ratio.abs() <= 0.5 * (1.0 + CONTAINMENT_TOLERANCE)) {
            return Err(CodecError::Overflow { dim, ratio });
        }
        let cell = ((ratio + 0.5) * cells).floor().max(0.0);
        digits.push((cell as u64).min(top));
    }
    let (next, offset) = apply_index(state, &digits);
    Ok((QuantizationIndex { digits }, next, offset))
}

/// Encode a true state `x` (the error `x − x̄` is formed in `f64`).
pub fn encode(state: &CodecState, x: &[f64]) -> Result<(QuantizationIndex, CodecState), CodecError> {
    if x.len() != state.n {
        return Err(CodecError::Config(format!(
            "state has dimension {}, codec has {}",
            x.len(),
            state.n
        )));
    }
    let e: Vec<f64> = x.iter().zip(&state.xhat).map(|(a, b)| a - b).collect();
    let (index, next, _) = encode_error(state, &ScaledVec::from_f64(&e))?;
    Ok((index, next))
}

pub fn decode(state: &CodecState, index: &QuantizationIndex) -> Result<CodecState, CodecError> {
    if index.digits.len() != state.n {
        return Err(CodecError::Protocol {
            packed: u64::MAX,
            bits: state.n as u32 * state.bits,
        });
    }
    let top = digit_mask(state.bits);
    if let Some(&d) = index.digits.iter().find(|&&d| d > top) {
        return Err(CodecError::Protocol {
            packed: d,
            bits: state.bits,
        });
    }
    Ok(apply_index(state, &index.digits).0)
}

pub fn decode_packed(state: &CodecState, packed: u64) -> Result<CodecState, CodecError> {
    let index = QuantizationIndex::unpack(packed, state.n, state.bits)?;
    decode(state, &index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lookup;

    #[test]
    fn init_examples() {
        let s = init(0.65, 2, 1).unwrap();
        assert_eq!(s.range_f64(), 1.3);
        assert_eq!(s.xhat, vec![0.0]);
        assert_eq!(s.phase, Phase::PreFirstSuccess);
        let s = init(1.0, 3, 2).unwrap();
        assert_eq!(s.range_f64(), 2.0);
        assert_eq!(s.xhat, vec![0.0, 0.0]);
        assert!(init(1.0, 33, 2).is_err());
        assert!(init(0.0, 2, 1).is_err());
    }

    #[test]
    fn evolve_pre_examples() {
        let s = init(0.65, 2, 1).unwrap();
        assert_eq!(evolve_pre(&s, 1.0, 0.8).unwrap().range_f64(), 1.6);
        assert_eq!(evolve_pre(&s, 0.0, 0.65).unwrap(), s);
        let post = encode(&s, &[0.1]).unwrap().1;
        assert!(matches!(evolve_pre(&post, 1.0, 0.8), Err(CodecError::Phase { .. })));
    }

    #[test]
    fn evolve_post_examples() {
        let sys = lookup("paper-example").unwrap();
        let mut s = init(0.5, 2, 1).unwrap();
        s.range = Magnitude::from_f64(1.0);
        s.phase = Phase::PostFirstSuccess;
        let same = evolve_post(&s, 0.0, 7.0, &*sys.plant, &*sys.cert, 1e-3).unwrap();
        assert_eq!(same, s);
        let grown = evolve_post(&s, 0.1, 7.0, &*sys.plant, &*sys.cert, 1e-3).unwrap();
        assert!((grown.range_f64() - 0.7f64.exp()).abs() < 1e-9);
        assert_eq!(grown.xhat, vec![0.0]);
        assert!(matches!(
            evolve_post(&init(0.5, 2, 1).unwrap(), 0.1, 7.0, &*sys.plant, &*sys.cert, 1e-3),
            Err(CodecError::Phase { .. })
        ));
    }

    fn post_state(xhat: f64, l: f64, bits: u32) -> CodecState {
        CodecState {
            xhat: vec![xhat],
            range: Magnitude::from_f64(l),
            phase: Phase::PostFirstSuccess,
            bits,
            n: 1,
        }
    }

    #[test]
    fn encode_hand_partition() {
        let s = post_state(0.0, 4.0, 2);
        let (idx, next) = encode(&s, &[1.3]).unwrap();
        assert_eq!(idx.digits, vec![3]);
        assert_eq!(next.xhat, vec![1.5]);
        assert_eq!(next.range_f64(), 1.0);
        assert!((1.3f64 - 1.5).abs() <= 0.5);
        assert_eq!(decode(&s, &idx).unwrap(), next);
    }

    #[test]
    fn encode_midpoint_and_faces() {
        let s = post_state(0.25, 2.0, 3);
        let (idx, next) = encode(&s, &[0.25]).unwrap();
        assert_eq!(idx.digits, vec![4]);
        assert!((0.25 - next.xhat[0]).abs() <= 2.0 / 16.0);

        let (idx, next) = encode(&s, &[1.25]).unwrap();
        assert_eq!(idx.digits, vec![7]);
        assert!((1.25 - next.xhat[0]).abs() <= next.range_f64() / 2.0);

        let (idx, _) = encode(&s, &[-0.75]).unwrap();
        assert_eq!(idx.digits, vec![0]);

        assert!(matches!(
            encode(&s, &[1.26]),
            Err(CodecError::Overflow { dim: 0, .. })
        ));
    }

    #[test]
    fn pack_layout_is_little_endian_by_dimension() {
        let idx = QuantizationIndex {
            digits: vec![5, 2, 7],
        };
        let packed = idx.pack(3);
        assert_eq!(packed, 5 | (2 << 3) | (7 << 6));
        assert_eq!(QuantizationIndex::unpack(packed, 3, 3).unwrap(), idx);
        assert!(matches!(
            QuantizationIndex::unpack(1 << 9, 3, 3),
            Err(CodecError::Protocol { .. })
        ));
        let full = QuantizationIndex { digits: vec![u64::MAX] };
        assert_eq!(QuantizationIndex::unpack(full.pack(64), 1, 64).unwrap(), full);
    }

    #[test]
    fn exhaustive_round_trip_n2_r3() {
        let mut s = init(1.0, 3, 2).unwrap();
        s.phase = Phase::PostFirstSuccess;
        for packed in 0..64u64 {
            let idx = QuantizationIndex::unpack(packed, 2, 3).unwrap();
            assert_eq!(idx.pack(3), packed);
            assert_eq!(decode_packed(&s, packed).unwrap(), decode(&s, &idx).unwrap());
        }
        assert!(matches!(decode_packed(&s, 64), Err(CodecError::Protocol { .. })));
    }

    #[test]
    fn decoded_estimate_contains_state() {
        let s = post_state(0.1, 1.0, 4);
        for k in 0..=100 {
            let x = 0.1 - 0.5 + k as f64 / 100.0;
            let (idx, next) = encode(&s, &[x]).unwrap();
            let dec = decode(&s, &idx).unwrap();
            assert_eq!(dec, next);
            assert!((x - dec.xhat[0]).abs() <= dec.range_f64() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn error_encoding_survives_underflow() {
        // range far below the f64 normal range
        let mut s = post_state(0.0, 1.0, 16);
        s.range = Magnitude::from_f64(1.0).shift_down(5000);
        let e = ScaledVec::from_parts(vec![0.3], s.range.exp2());
        let (idx, next, offset) = encode_error(&s, &e).unwrap();
        let remaining = e.sub(&offset);
        assert!(remaining.norm_inf().ratio(&next.range) <= 0.5);
        assert_eq!(idx.digits, vec![((0.3 + 0.5) * 65536.0f64).floor() as u64]);
    }
}
