//! Scenario files: one TOML document describing plant, controller,
//! factorization, harmonic target, parameter structure, spectrum window and
//! simulation staging. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::factorization::{
    factorize_by_shift, factorize_delayed_first_order, factorize_pi, CoprimeFactorization,
    FirDelayParameter,
};
use crate::quasipoly::{DelayRational, Polynomial, Quasipolynomial};
use crate::simulator::{FourierSignal, SimScenario};
use crate::spectrum::RegionSpec;
use crate::synthesis::{
    design_qm, evaluate_design, harmonic_frequencies, DesignResult, HarmonicTarget,
};
use crate::Error;

const EXAMPLE1: &str = include_str!("../presets/example1.toml");
const EXAMPLE2: &str = include_str!("../presets/example2.toml");
const EXAMPLE3: &str = include_str!("../presets/example3.toml");

/// Names and sources of the bundled scenarios.
pub const PRESETS: [(&str, &str); 3] = [
    ("example1", EXAMPLE1),
    ("example2", EXAMPLE2),
    ("example3", EXAMPLE3),
];

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Io { path: String, message: String },
    /// Syntax or schema error; the message carries the line and column.
    Parse(String),
    /// Semantic error at a known line, when one can be found.
    Invalid { line: Option<usize>, message: String },
    UnknownPreset(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            ScenarioError::Parse(msg) => write!(f, "{}", msg.trim_end()),
            ScenarioError::Invalid {
                line: Some(line),
                message,
            } => write!(f, "line {line}: {message}"),
            ScenarioError::Invalid { line: None, message } => write!(f, "{message}"),
            ScenarioError::UnknownPreset(name) => write!(
                f,
                "unknown preset or missing file '{name}' (presets: example1, example2, example3)"
            ),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default)]
    pub delay: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub num: Vec<TermSpec>,
    pub den: Vec<TermSpec>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub kp: f64,
    pub ki: f64,
    #[serde(default = "default_pole")]
    pub pole: f64,
}

fn default_pole() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PlantScheme {
    /// `e^{−sτ}/(s − a)` over `s² + 2√μ·s + μ`.
    FirstOrderMu,
    /// Numerator and denominator over `(s + c)^m`.
    GenericShift,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerScheme {
    /// `(kp·s + ki)/(s + c)` over `s/(s + c)`.
    PidShift,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorizationSpec {
    pub plant: PlantScheme,
    #[serde(default = "default_controller_scheme")]
    pub controller: ControllerScheme,
    pub mu: Option<f64>,
    pub shift_pole: Option<f64>,
}

fn default_controller_scheme() -> ControllerScheme {
    ControllerScheme::PidShift
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub f_hz: Option<f64>,
    pub period: Option<f64>,
    pub harmonics: usize,
    #[serde(default = "default_true")]
    pub include_dc: bool,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QmSpec {
    pub spacing: f64,
    pub count: usize,
    pub gains: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub grid_step: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub phases: Vec<f64>,
    /// Defaults to the target period.
    pub period: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub step: f64,
    pub t_end: f64,
    pub t_disturbance_on: f64,
    pub t_augmentation_on: f64,
    #[serde(default)]
    pub initial_output: f64,
    pub gate_ramp: Option<f64>,
    pub disturbance: Option<SignalSpec>,
    pub reference: Option<SignalSpec>,
}

/// Raw file contents.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub factorization: FactorizationSpec,
    pub target: TargetSpec,
    pub qm: QmSpec,
    pub spectrum: SpectrumSpec,
    pub simulation: SimulationSpec,
}

/// A validated scenario with all factorizations built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub plant: DelayRational,
    pub plant_factors: CoprimeFactorization,
    pub controller_factors: CoprimeFactorization,
    pub target: HarmonicTarget,
    pub region: RegionSpec,
}

/// Line of the first `key =` inside `[table]` (or a dotted sub-table of it).
fn find_line(source: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let in_table = current == table || current.starts_with(&format!("{table}."));
        if in_table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn terms_to_qp(terms: &[TermSpec]) -> Result<Quasipolynomial, String> {
    Quasipolynomial::new(
        terms
            .iter()
            .map(|t| (t.delay, Polynomial::new(t.coeffs.clone())))
            .collect(),
    )
    .map_err(|e| e.to_string())
}

fn signal(spec: Option<&SignalSpec>, default_period: f64) -> Result<FourierSignal, String> {
    let Some(spec) = spec else {
        return Ok(FourierSignal::zero());
    };
    if !spec.phases.is_empty() && spec.phases.len() != spec.amplitudes.len() {
        return Err(format!(
            "{} phases for {} amplitudes",
            spec.phases.len(),
            spec.amplitudes.len()
        ));
    }
    let harmonics = spec
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, spec.phases.get(i).copied().unwrap_or(0.0)))
        .collect();
    Ok(FourierSignal {
        c0: spec.c0,
        harmonics,
        period: spec.period.unwrap_or(default_period),
    })
}

/// Extracts `(a, τ)` from a plant of the form `e^{−sτ}/(s − a)`.
fn first_order_parameters(plant: &PlantSpec) -> Option<(f64, f64)> {
    let [num] = plant.num.as_slice() else {
        return None;
    };
    let [den] = plant.den.as_slice() else {
        return None;
    };
    let num_poly = Polynomial::new(num.coeffs.clone());
    let den_poly = Polynomial::new(den.coeffs.clone());
    if num_poly.degree() != Some(0) || den.delay != 0.0 || den_poly.degree() != Some(1) {
        return None;
    }
    let scale = den_poly.leading();
    if num_poly.coeff(0) != scale {
        return None;
    }
    Some((-den_poly.coeff(0) / scale, num.delay))
}

impl Scenario {
    pub fn from_toml_str(source: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_file(file, source)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let source = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&source)
    }

    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let (_, src) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
        Self::from_toml_str(src)
    }

    /// A bundled preset name, or else a path to a scenario file.
    pub fn load(arg: &str) -> Result<Self, ScenarioError> {
        if PRESETS.iter().any(|(n, _)| *n == arg) {
            return Self::preset(arg);
        }
        let path = Path::new(arg);
        if path.exists() {
            Self::from_path(path)
        } else {
            Err(ScenarioError::UnknownPreset(arg.to_string()))
        }
    }

    fn from_file(file: ScenarioFile, source: &str) -> Result<Self, ScenarioError> {
        let invalid = |table: &str, key: &str, message: String| ScenarioError::Invalid {
            line: find_line(source, table, key),
            message: format!("{table}.{key}: {message}"),
        };

        let num = terms_to_qp(&file.plant.num).map_err(|m| invalid("plant", "num", m))?;
        let den = terms_to_qp(&file.plant.den).map_err(|m| invalid("plant", "den", m))?;
        let plant = DelayRational::new(num, den)
            .ok_or_else(|| invalid("plant", "den", "denominator is identically zero".into()))?;
        if !plant.is_proper() {
            return Err(invalid("plant", "den", "plant is not proper".into()));
        }

        let c = &file.controller;
        if !(c.pole > 0.0 && c.pole.is_finite()) {
            return Err(invalid("controller", "pole", format!("must be positive, got {}", c.pole)));
        }
        let controller_factors = if c.kp == 0.0 && c.ki == 0.0 {
            CoprimeFactorization::zero_controller()
        } else {
            factorize_pi(c.kp, c.ki, c.pole).map_err(|e| invalid("controller", "kp", e.to_string()))?
        };

        let fs = &file.factorization;
        let plant_factors = match fs.plant {
            PlantScheme::FirstOrderMu => {
                let mu = fs
                    .mu
                    .ok_or_else(|| invalid("factorization", "plant", "first-order-mu needs mu".into()))?;
                let (a, tau) = first_order_parameters(&file.plant).ok_or_else(|| {
                    invalid(
                        "factorization",
                        "plant",
                        "first-order-mu needs a plant of the form e^(-s*tau)/(s - a)".into(),
                    )
                })?;
                factorize_delayed_first_order(a, tau, mu)
                    .map_err(|e| invalid("factorization", "mu", e.to_string()))?
            }
            PlantScheme::GenericShift => {
                let pole = fs.shift_pole.unwrap_or(1.0);
                factorize_by_shift(&plant, pole)
                    .map_err(|e| invalid("factorization", "shift_pole", e.to_string()))?
            }
        };

        let t = &file.target;
        let period = match (t.f_hz, t.period) {
            (Some(f), None) => {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(invalid("target", "f_hz", format!("must be positive, got {f}")));
                }
                1.0 / f
            }
            (None, Some(p)) => p,
            _ => {
                return Err(ScenarioError::Invalid {
                    line: find_line(source, "target", "f_hz")
                        .or_else(|| find_line(source, "target", "period")),
                    message: "target: give exactly one of f_hz and period".into(),
                })
            }
        };
        let target = HarmonicTarget::new(period, t.harmonics, t.include_dc)
            .map_err(|e| invalid("target", "period", e.to_string()))?;

        let q = &file.qm;
        if !(q.spacing > 0.0 && q.spacing.is_finite()) {
            return Err(invalid("qm", "spacing", format!("must be positive, got {}", q.spacing)));
        }
        if let Some(g) = &q.gains {
            if g.len() != q.count + 1 {
                return Err(invalid(
                    "qm",
                    "gains",
                    format!("expected {} gains (count + 1), got {}", q.count + 1, g.len()),
                ));
            }
        }

        let sp = &file.spectrum;
        let mut region = RegionSpec::new(sp.re_min, sp.re_max, sp.im_min, sp.im_max)
            .map_err(|e| invalid("spectrum", "re_min", e.to_string()))?;
        if let Some(step) = sp.grid_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(invalid("spectrum", "grid_step", format!("must be positive, got {step}")));
            }
            region = region.with_step(step);
        }

        let sim = &file.simulation;
        if !(sim.step > 0.0 && sim.step.is_finite()) {
            return Err(invalid("simulation", "step", format!("must be positive, got {}", sim.step)));
        }
        if !(sim.t_end >= 0.0 && sim.t_end.is_finite()) {
            return Err(invalid("simulation", "t_end", format!("must be nonnegative, got {}", sim.t_end)));
        }
        if !(0.0 <= sim.t_disturbance_on && sim.t_disturbance_on <= sim.t_augmentation_on) {
            return Err(invalid(
                "simulation",
                "t_disturbance_on",
                "need 0 <= t_disturbance_on <= t_augmentation_on".into(),
            ));
        }
        signal(sim.disturbance.as_ref(), period)
            .map_err(|m| invalid("simulation", "phases", m))?;
        signal(sim.reference.as_ref(), period).map_err(|m| invalid("simulation", "phases", m))?;

        Ok(Scenario {
            name: file.name.clone().unwrap_or_else(|| "scenario".into()),
            plant,
            plant_factors,
            controller_factors,
            target,
            region,
            file,
        })
    }

    pub fn omegas(&self) -> Vec<f64> {
        harmonic_frequencies(&self.target)
    }

    pub fn spacing(&self) -> f64 {
        self.file.qm.spacing
    }

    pub fn count(&self) -> usize {
        self.file.qm.count
    }

    pub fn fixed_gains(&self) -> Option<&[f64]> {
        self.file.qm.gains.as_deref()
    }

    /// Designs `Q_M`, or evaluates the fixed gains from the file.
    pub fn design(&self) -> Result<DesignResult, Error> {
        match self.fixed_gains() {
            Some(g) => {
                let qm = FirDelayParameter::new(self.spacing(), g.to_vec())?;
                Ok(evaluate_design(
                    &self.plant_factors,
                    &self.controller_factors,
                    &self.target,
                    qm,
                )?)
            }
            None => Ok(design_qm(
                &self.plant_factors,
                &self.controller_factors,
                &self.target,
                self.spacing(),
                self.count(),
            )?),
        }
    }

    pub fn disturbance(&self) -> FourierSignal {
        signal(self.file.simulation.disturbance.as_ref(), self.target.period())
            .expect("validated at load")
    }

    pub fn reference(&self) -> FourierSignal {
        signal(self.file.simulation.reference.as_ref(), self.target.period())
            .expect("validated at load")
    }

    pub fn sim_scenario(&self, qm: FirDelayParameter) -> SimScenario {
        let sim = &self.file.simulation;
        SimScenario {
            plant: self.plant_factors.clone(),
            controller: self.controller_factors.clone(),
            qm,
            disturbance: self.disturbance(),
            reference: self.reference(),
            t_disturbance_on: sim.t_disturbance_on,
            t_augmentation_on: sim.t_augmentation_on,
            t_end: sim.t_end,
            step: sim.step,
            initial_output: sim.initial_output,
            gate_ramp: sim.gate_ramp,
        }
    }
}
