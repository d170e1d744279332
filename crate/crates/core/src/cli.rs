//! The `dosq` command line: scenario files and the `derive`, `simulate`,
//! `validate-dos` and `sweep` subcommands.
//!
//! Exit codes: 0 ok, 1 invalid input or failed validation, 2 infeasible DoS
//! budget, 3 codec overflow, 4 divergence, 5 I/O failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundsError, DeriveSettings, DerivedParams, RhoSpec, ThmBound};
use crate::dos::{self, AttackStyle, DoSBudget, DosError};
use crate::dynamics::{self, ControlSystem, PhiMaxGrid, SamplingPlan};
use crate::sim::{self, AttackSpec, Outcome, SimConfig, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{}: {err}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        let code = match e {
            BoundsError::Infeasible { .. } => EXIT_INFEASIBLE,
            BoundsError::Divergence { .. } => EXIT_DIVERGENCE,
            _ => EXIT_INVALID,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DosError> for CliError {
    fn from(e: DosError) -> Self {
        let code = match e {
            DosError::Infeasible { .. } => EXIT_INFEASIBLE,
            DosError::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Self::new(code, e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::Dos(d) => return d.clone().into(),
            SimError::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Self::new(code, e.to_string())
    }
}

fn default_level_margin() -> f64 {
    1e-4
}
fn default_rho_fraction() -> f64 {
    0.999
}
fn default_horizon() -> f64 {
    20.0
}
fn default_grid_per_dim() -> usize {
    SamplingPlan::default().grid_per_dim
}
fn default_random_samples() -> usize {
    SamplingPlan::default().random_samples
}
fn default_safety_factor() -> f64 {
    SamplingPlan::default().safety_factor
}
fn default_phimax_points() -> usize {
    201
}
fn default_phimax_step() -> f64 {
    1e-3
}
fn default_attack() -> AttackStyle {
    AttackStyle::Random
}

/// A scenario file. Keys are flat; Greek symbols are spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Catalog key, see [`dynamics::names`].
    pub plant: String,
    pub kappa: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t_dur: f64,
    #[serde(rename = "tauD")]
    pub tau_d: f64,
    /// Sampling period `Δ`.
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "X")]
    pub x_bound: f64,
    pub x0: Vec<f64>,
    /// `δ`.
    #[serde(default = "default_level_margin")]
    pub level_margin: f64,
    /// Absolute target level; overrides `rho_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "default_rho_fraction")]
    pub rho_fraction: f64,
    #[serde(rename = "R")]
    pub bits: u32,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Integration step, `Δ/100` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attack")]
    pub attack: AttackStyle,
    /// `h,tau` file replacing the generated attack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_csv: Option<PathBuf>,
    #[serde(default = "default_grid_per_dim")]
    pub grid_per_dim: usize,
    #[serde(default = "default_random_samples")]
    pub random_samples: usize,
    #[serde(default)]
    pub estimator_seed: u64,
    #[serde(default = "default_safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "default_phimax_points")]
    pub phimax_points: usize,
    #[serde(default = "default_phimax_step")]
    pub phimax_step: f64,
}

const BUILTIN_NAMES: &[&str] = &["paper-example", "linear-contracting"];

impl Scenario {
    fn base(plant: &str, budget: DoSBudget, x_bound: f64, x0: Vec<f64>, bits: u32) -> Self {
        Self {
            plant: plant.into(),
            kappa: budget.kappa,
            eta: budget.eta,
            t_dur: budget.t_dur,
            tau_d: budget.tau_d,
            delta: 0.1,
            x_bound,
            x0,
            level_margin: default_level_margin(),
            rho: None,
            rho_fraction: default_rho_fraction(),
            bits,
            horizon: default_horizon(),
            h: None,
            seed: 0,
            attack: AttackStyle::Random,
            attack_csv: None,
            grid_per_dim: default_grid_per_dim(),
            random_samples: default_random_samples(),
            estimator_seed: 0,
            safety_factor: default_safety_factor(),
            phimax_points: default_phimax_points(),
            phimax_step: default_phimax_step(),
        }
    }

    /// Built-in scenarios.
    ///
    /// * `paper-example`: cubic plant, budget `(0.3, 1.3, 2.222, 0.714)`,
    ///   `Δ = 0.1`, `X = 0.65`, `x₀ = 0.5`, `R = 2`.
    /// * `linear-contracting`: `ẋ = −x + u` with no attack.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-example" => Some(Self::base(
                name,
                DoSBudget {
                    kappa: 0.3,
                    eta: 1.3,
                    t_dur: 2.222,
                    tau_d: 0.714,
                },
                0.65,
                vec![0.5],
                2,
            )),
            "linear-contracting" => Some(Self::base(
                name,
                DoSBudget {
                    kappa: 0.0,
                    eta: 0.0,
                    t_dur: 1e9,
                    tau_d: 1e9,
                },
                1.0,
                vec![0.8],
                2,
            )),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        BUILTIN_NAMES
    }

    /// Parse and validate. Errors carry the 1-based line of the offending
    /// key whenever it appears in `src`.
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        let scenario: Self = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_at(src, s.start));
            match line {
                Some(l) => CliError::invalid(format!(
                    "scenario line {l}: {}",
                    e.message()
                )),
                None => CliError::invalid(format!("scenario: {}", e.message())),
            }
        })?;
        scenario.validate(Some(src))?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn budget(&self) -> DoSBudget {
        DoSBudget {
            kappa: self.kappa,
            eta: self.eta,
            t_dur: self.t_dur,
            tau_d: self.tau_d,
        }
    }

    pub fn step(&self) -> f64 {
        self.h.unwrap_or(self.delta / 100.0)
    }

    /// Semantic checks; `src` is used to point at the offending line.
    pub fn validate(&self, src: Option<&str>) -> Result<(), CliError> {
        let fail = |key: &str, msg: String| {
            let line = src.and_then(|s| line_of_key(s, key));
            CliError::invalid(match line {
                Some(l) => format!("scenario line {l}: {key}: {msg}"),
                None => format!("scenario: {key}: {msg}"),
            })
        };
        if dynamics::lookup(&self.plant).is_none() {
            return Err(fail(
                "plant",
                format!(
                    "unknown plant '{}' (known: {})",
                    self.plant,
                    dynamics::names().join(", ")
                ),
            ));
        }
        let mut numbers = vec![
            ("kappa", self.kappa),
            ("eta", self.eta),
            ("T", self.t_dur),
            ("tauD", self.tau_d),
            ("Delta", self.delta),
            ("X", self.x_bound),
            ("level_margin", self.level_margin),
            ("rho_fraction", self.rho_fraction),
            ("horizon", self.horizon),
            ("safety_factor", self.safety_factor),
            ("phimax_step", self.phimax_step),
        ];
        if let Some(r) = self.rho {
            numbers.push(("rho", r));
        }
        if let Some(h) = self.h {
            numbers.push(("h", h));
        }
        for (key, v) in &numbers {
            if !v.is_finite() {
                return Err(fail(key, format!("must be finite, got {v}")));
            }
        }
        if let Some(v) = self.x0.iter().find(|v| !v.is_finite()) {
            return Err(fail("x0", format!("must be finite, got {v}")));
        }
        for (key, v) in [("kappa", self.kappa), ("eta", self.eta), ("horizon", self.horizon)] {
            if v < 0.0 {
                return Err(fail(key, format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("T", self.t_dur),
            ("tauD", self.tau_d),
            ("Delta", self.delta),
            ("X", self.x_bound),
            ("level_margin", self.level_margin),
            ("phimax_step", self.phimax_step),
            ("h", self.step()),
        ] {
            if v <= 0.0 {
                return Err(fail(key, format!("must be > 0, got {v}")));
            }
        }
        let n = dynamics::lookup(&self.plant).map(|s| s.state_dim()).unwrap_or(0);
        if self.x0.len() != n {
            return Err(fail(
                "x0",
                format!("has {} entries, plant '{}' has dimension {n}", self.x0.len(), self.plant),
            ));
        }
        if dynamics::norm_inf(&self.x0) > self.x_bound {
            return Err(fail(
                "x0",
                format!("|x0| = {} exceeds X = {}", dynamics::norm_inf(&self.x0), self.x_bound),
            ));
        }
        if self.bits == 0 || self.bits as u64 * n as u64 > 64 {
            return Err(fail("R", format!("need 1 <= R and n*R <= 64, got R = {}", self.bits)));
        }
        let spp = (self.delta / self.step()).round();
        if spp < 1.0 || (spp * self.step() - self.delta).abs() > 1e-12 * self.delta.max(1.0) {
            return Err(fail("h", format!("{} does not divide Delta = {}", self.step(), self.delta)));
        }
        Ok(())
    }

    pub fn system(&self) -> ControlSystem {
        dynamics::lookup(&self.plant).expect("plant validated")
    }

    pub fn derive_settings(&self) -> DeriveSettings {
        DeriveSettings {
            level_margin: self.level_margin,
            rho: match self.rho {
                Some(r) => RhoSpec::Absolute(r),
                None => RhoSpec::Fraction(self.rho_fraction),
            },
            plan: SamplingPlan {
                grid_per_dim: self.grid_per_dim,
                random_samples: self.random_samples,
                seed: self.estimator_seed,
                safety_factor: self.safety_factor,
            },
            phimax_grid: PhiMaxGrid::new(self.phimax_points, self.phimax_step),
            bits: Some(self.bits),
        }
    }

    pub fn derive(&self) -> Result<DerivedParams, CliError> {
        let sys = self.system();
        Ok(bounds::derive(
            &*sys.plant,
            &*sys.cert,
            &self.budget(),
            self.delta,
            self.x_bound,
            &self.derive_settings(),
        )?)
    }

    pub fn sim_config(&self, params: &DerivedParams) -> Result<SimConfig, CliError> {
        let attack = match &self.attack_csv {
            Some(path) => {
                let file = File::open(path).map_err(|e| CliError::io(path, e))?;
                let seq = dos::read_csv(file, Some(self.horizon))?;
                let report = dos::validate(&seq, &self.budget());
                if !report.is_valid() {
                    eprintln!(
                        "warning: {} violates the scenario DoS budget in {} window(s)",
                        path.display(),
                        report.violations.len()
                    );
                }
                AttackSpec::Sequence(seq)
            }
            None => AttackSpec::Generated {
                style: self.attack,
                seed: self.seed,
            },
        };
        Ok(SimConfig::from_params(
            self.system(),
            params,
            attack,
            self.bits,
            self.x0.clone(),
            self.horizon,
            self.step(),
            self.phimax_points,
        ))
    }

    /// Apply a `KEY=VALUE` override. `VALUE` is read as a TOML value,
    /// falling back to a bare string.
    pub fn apply_set(&self, assignment: &str) -> Result<Self, CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("--set expects KEY=VALUE, got '{assignment}'")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut table = toml::Table::try_from(self).expect("scenario is a table");
        // integers given for float keys are fine, TOML keeps them distinct
        let value = match (table.get(key), value) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(key.to_string(), value);
        let next: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::invalid(format!("--set {key}: {}", e.message())))?;
        next.validate(None)?;
        Ok(next)
    }
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn line_of_key(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

/// A built-in name or a path to a scenario file.
pub fn load_scenario(name: &str) -> Result<Scenario, CliError> {
    let path = Path::new(name);
    if path.is_file() {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Scenario::from_toml(&src)
            .map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)));
    }
    Scenario::builtin(name).ok_or_else(|| {
        CliError::invalid(format!(
            "no scenario file '{name}' and no built-in of that name (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        ))
    })
}

#[derive(Debug, Parser)]
#[command(name = "dosq", version, about = "Quantized control under Denial-of-Service: bounds and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario name or path to a TOML scenario file
    #[arg(long, default_value = "paper-example")]
    pub scenario: String,
    /// Override a scenario key, e.g. --set R=16
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Write the effective scenario (after overrides) to this path
    #[arg(long, value_name = "PATH")]
    pub dump_scenario: Option<PathBuf>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario, CliError> {
        let mut s = load_scenario(&self.scenario)?;
        for a in &self.set {
            s = s.apply_set(a)?;
        }
        if let Some(path) = &self.dump_scenario {
            std::fs::write(path, s.to_toml()).map_err(|e| CliError::io(path, e))?;
        }
        Ok(s)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the derivation pipeline and print every intermediate as JSON
    Derive {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Simulate the closed loop; optionally write the trace CSV and audit JSON
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        audit: Option<PathBuf>,
    },
    /// Check an h,tau attack file against a DoS budget
    ValidateDos {
        #[arg(long, value_name = "PATH")]
        attack: PathBuf,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long = "T")]
        t_dur: f64,
        #[arg(long = "tauD")]
        tau_d: f64,
        /// Defaults to the last interval end
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Simulate every R in a range with identical attacks
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        r_min: u32,
        #[arg(long, default_value_t = 16)]
        r_max: u32,
        /// CSV output, standard output when absent
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// Bit counts obtained from the published constants for the cubic example,
/// next to those from the formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub reference_gamma: f64,
    pub reference_zbar0: f64,
    pub reference_bound: ThmBound,
    #[serde(rename = "pipeline_R_thm")]
    pub pipeline_r_thm: u32,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeriveReport {
    #[serde(flatten)]
    pub params: DerivedParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_comparison: Option<ReferenceComparison>,
}

pub fn derive_report(scenario: &Scenario) -> Result<DeriveReport, CliError> {
    let params = scenario.derive()?;
    let reference_comparison = (scenario.plant == "paper-example").then(|| {
        let r = bounds::reference_constants();
        let bound = bounds::rate_bound_thm(&r.inputs).expect("reference constants are valid");
        ReferenceComparison {
            reference_gamma: r.inputs.gamma,
            reference_zbar0: r.zbar0,
            reference_bound: bound,
            pipeline_r_thm: params.R_thm,
            note: format!(
                "reference constants gamma = {}, zbar0 = {} give R = {}; direct evaluation here gives \
                 gamma = {:.1}, zbar0 = {:.4} and R = {}",
                r.inputs.gamma, r.zbar0, bound.minimal, params.gamma, params.zbar0, params.R_thm
            ),
        }
    });
    Ok(DeriveReport {
        params,
        reference_comparison,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| CliError::new(EXIT_IO, format!("stdout: {e}")))
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    #[serde(rename = "R")]
    bits: u32,
    outcome: &'a Outcome,
    final_norm: f64,
    stabilized: bool,
    successes: usize,
    attempts: usize,
    z0: Option<f64>,
    theta: Option<f64>,
    audit_clauses_passed: usize,
    audit_clauses_total: usize,
}

/// Execute one parsed command, writing reports to `out`. Returns the exit
/// code for a completed command.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Derive { scenario } => {
            let s = scenario.resolve()?;
            print_json(out, &derive_report(&s)?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            scenario,
            trace,
            audit,
        } => {
            let s = scenario.resolve()?;
            let params = s.derive()?;
            let cfg = s.sim_config(&params)?;
            let result = sim::run(&cfg)?;
            let report = sim::audit(&result, &params);
            if let Some(path) = &trace {
                let file = create(path)?;
                sim::write_trace_csv(&result, file).map_err(|e| CliError::io(path, e))?;
            }
            if let Some(path) = &audit {
                let mut file = create(path)?;
                let text = serde_json::to_string_pretty(&report).expect("audit serializes");
                writeln!(file, "{text}")
                    .and_then(|_| file.flush())
                    .map_err(|e| CliError::io(path, e))?;
            }
            print_json(
                out,
                &SimulateSummary {
                    bits: result.bits,
                    outcome: &result.outcome,
                    final_norm: result.final_norm(),
                    stabilized: result.stabilized(),
                    successes: result.successes.len(),
                    attempts: result.log.attempts.len(),
                    z0: result.diagnostics.z0,
                    theta: result.diagnostics.theta,
                    audit_clauses_passed: report.passed_count(),
                    audit_clauses_total: report.clauses().len(),
                },
            )?;
            Ok(match result.outcome {
                Outcome::Completed => EXIT_OK,
                Outcome::Overflow { .. } => EXIT_OVERFLOW,
                Outcome::Divergence { .. } => EXIT_DIVERGENCE,
            })
        }
        Command::ValidateDos {
            attack,
            kappa,
            eta,
            t_dur,
            tau_d,
            horizon,
        } => {
            let budget = DoSBudget::new(kappa, eta, t_dur, tau_d)?;
            let file = File::open(&attack).map_err(|e| CliError::io(&attack, e))?;
            let seq = dos::read_csv(file, horizon)
                .map_err(|e| CliError::new(CliError::from(e.clone()).code, format!("{}: {e}", attack.display())))?;
            let report = dos::validate(&seq, &budget);
            print_json(out, &report)?;
            Ok(if report.is_valid() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Sweep {
            scenario,
            r_min,
            r_max,
            out: path,
        } => {
            let s = scenario.resolve()?;
            if r_min == 0 || r_min > r_max {
                return Err(CliError::invalid(format!("need 1 <= r-min <= r-max, got {r_min}..{r_max}")));
            }
            let n = s.x0.len() as u64;
            if r_max as u64 * n > 64 {
                return Err(CliError::invalid(format!("r-max = {r_max} exceeds the 64-bit packet for n = {n}")));
            }
            let params = s.derive()?;
            let cfg = s.sim_config(&params)?;
            let result = sim::sweep_r(&cfg, &params, r_min..=r_max)?;
            match path {
                Some(p) => {
                    let file = create(&p)?;
                    sim::write_sweep_csv(&result, file).map_err(|e| CliError::io(&p, e))?;
                }
                None => sim::write_sweep_csv(&result, &mut *out)?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parse `args` (program name first) and run; returns the process exit
/// code. Usage errors exit with 1, help and version with 0.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trips() {
        for name in Scenario::builtin_names() {
            let s = Scenario::builtin(name).unwrap();
            s.validate(None).unwrap();
            assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut src = Scenario::builtin("paper-example").unwrap().to_toml();
        src.push_str("bogus = 1\n");
        let err = Scenario::from_toml(&src).unwrap_err();
        assert_eq!(err.code, EXIT_INVALID);
        let line = src.lines().count();
        assert!(err.message.contains(&format!("line {line}")), "{}", err.message);

        let src = Scenario::builtin("paper-example")
            .unwrap()
            .to_toml()
            .replace("X = 0.65", "X = 0.1");
        let err = Scenario::from_toml(&src).unwrap_err();
        let line = line_of_key(&src, "x0").unwrap();
        assert!(err.message.contains(&format!("line {line}: x0")), "{}", err.message);

        let src = Scenario::builtin("paper-example")
            .unwrap()
            .to_toml()
            .replace("kappa = 0.3", "kappa = nan");
        let err = Scenario::from_toml(&src).unwrap_err();
        assert!(err.message.contains("kappa: must be finite"), "{}", err.message);
    }

    #[test]
    fn set_overrides() {
        let s = Scenario::builtin("paper-example").unwrap();
        assert_eq!(s.apply_set("R=16").unwrap().bits, 16);
        assert_eq!(s.apply_set("T=2").unwrap().t_dur, 2.0);
        assert_eq!(s.apply_set("attack=worst-case").unwrap().attack, AttackStyle::WorstCase);
        assert_eq!(s.apply_set("x0=[0.1]").unwrap().x0, vec![0.1]);
        assert!(s.apply_set("nope=1").is_err());
        assert!(s.apply_set("R").is_err());
        assert!(s.apply_set("R=0").is_err());
    }

    #[test]
    fn derive_report_compares_reference_constants() {
        let s = Scenario::builtin("paper-example").unwrap();
        let r = derive_report(&s).unwrap();
        let cmp = r.reference_comparison.unwrap();
        assert_eq!(cmp.reference_bound.minimal, 16);
        assert_eq!(cmp.pipeline_r_thm, 14);
        let json = serde_json::to_value(derive_report(&s).unwrap()).unwrap();
        for key in [
            "sigma", "zbar0", "phimax_zbar0", "l", "delta", "W", "O", "U", "F", "M", "gamma",
            "lambda", "c", "omega", "K", "rho", "R_prop1", "R_thm",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn infeasible_budget_maps_to_exit_2() {
        let s = Scenario::builtin("paper-example")
            .unwrap()
            .apply_set("T=2")
            .unwrap()
            .apply_set("tauD=0.2")
            .unwrap();
        let err = derive_report(&s).unwrap_err();
        assert_eq!(err.code, EXIT_INFEASIBLE);
        assert!(err.message.contains("sigma = 0"), "{}", err.message);
    }
}
