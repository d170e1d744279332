//! Built-in plant/certificate pairs keyed by name.

use std::sync::Arc;

use super::{CubicPlant, LinearPlant, LyapunovCertificate, PlantModel, QuadraticCertificate};

/// A plant with a certificate for its stabilizing law.
#[derive(Clone)]
pub struct ControlSystem {
    pub name: String,
    pub plant: Arc<dyn PlantModel>,
    pub cert: Arc<dyn LyapunovCertificate>,
}

impl ControlSystem {
    pub fn new(
        name: impl Into<String>,
        plant: Arc<dyn PlantModel>,
        cert: Arc<dyn LyapunovCertificate>,
    ) -> Self {
        Self {
            name: name.into(),
            plant,
            cert,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.plant.input_dim()
    }
}

impl std::fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlSystem")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

const NAMES: &[&str] = &["paper-example", "linear-contracting", "linear-contracting-2d"];

pub fn names() -> &'static [&'static str] {
    NAMES
}

/// Look up a catalog entry.
///
/// * `paper-example`: `ẋ = x² − x³ + u`, `u = −(5/4)x`, `V = x²/2`,
///   `α₁ = α₂ = s²/2`, `α = s²`.
/// * `linear-contracting`: `ẋ = −x + u`, `u = 0`, `V = x²/2`, `α = s²`.
/// * `linear-contracting-2d`: `ẋ = −x + u` in ℝ², `u = 0`, `V = |x|₂²/2`,
///   `α₁ = s²/2`, `α₂ = s²`, `α = s²`.
pub fn lookup(name: &str) -> Option<ControlSystem> {
    let system = match name {
        "paper-example" => ControlSystem::new(
            name,
            Arc::new(CubicPlant),
            Arc::new(QuadraticCertificate::linear_feedback(0.5, 0.5, 1.0, 1.25)),
        ),
        "linear-contracting" => ControlSystem::new(
            name,
            Arc::new(LinearPlant::new(1, vec![-1.0])),
            Arc::new(QuadraticCertificate::new(0.5, 0.5, 1.0, |_x: &[f64]| {
                vec![0.0]
            })),
        ),
        "linear-contracting-2d" => ControlSystem::new(
            name,
            Arc::new(LinearPlant::new(2, vec![-1.0, 0.0, 0.0, -1.0])),
            Arc::new(QuadraticCertificate::new(0.5, 1.0, 1.0, |_x: &[f64]| {
                vec![0.0, 0.0]
            })),
        ),
        _ => return None,
    };
    Some(system)
}
