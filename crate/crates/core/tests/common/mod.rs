#![allow(dead_code)]

use std::sync::OnceLock;

use dosq::bounds::{derive, DeriveSettings, DerivedParams};
use dosq::dos::{AttackStyle, DoSBudget};
use dosq::dynamics::lookup;
use dosq::sim::{AttackSpec, SimConfig};

pub fn example_budget() -> DoSBudget {
    DoSBudget::new(0.3, 1.3, 2.222, 0.714).unwrap()
}

pub fn example_params() -> &'static DerivedParams {
    static P: OnceLock<DerivedParams> = OnceLock::new();
    P.get_or_init(|| {
        let sys = lookup("paper-example").unwrap();
        derive(&*sys.plant, &*sys.cert, &example_budget(), 0.1, 0.65, &DeriveSettings::default())
            .unwrap()
    })
}

pub fn example_config(bits: u32, style: AttackStyle, seed: u64, horizon: f64) -> SimConfig {
    SimConfig::from_params(
        lookup("paper-example").unwrap(),
        example_params(),
        AttackSpec::Generated { style, seed },
        bits,
        vec![0.5],
        horizon,
        1e-3,
        201,
    )
}
