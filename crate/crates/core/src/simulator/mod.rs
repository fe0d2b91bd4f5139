//! Time-domain simulation of the augmented closed loop.
//!
//! The loop is wired from the individual factors rather than from the
//! assembled controller:
//!
//! ```text
//! v = r − y + N_G·q          w = D_p⁻¹·v          q = Q_M·(g(t)·w)
//! u = N_p·w + D_G·q          y = G·u + d
//! ```
//!
//! where `g(t)` is the activation gate. With `g = 0` this is the plain
//! stabilizing controller `N_p/D_p`; with `g = 1` it is the augmented one.

mod diagram;
mod realization;

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

pub use diagram::{
    BlockSpec, Connection, Diagram, DiagramRun, ExternalSignal, Gate, PreHistory, Source,
    STEP_ALIGNMENT_REL,
};
pub use realization::{realize_dde, DdeRealization, RealizationTerm};

use crate::factorization::{CoprimeFactorization, FirDelayParameter};

#[derive(Clone, Debug, PartialEq)]
pub enum SimulationError {
    NotRealizable(String),
    /// Blocks caught in a cycle of feedthrough edges.
    AlgebraicLoop(Vec<String>),
    StepMismatch { block: String, delay: f64, step: f64 },
    InvalidScenario(String),
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulationError::NotRealizable(msg) => write!(f, "block is not realizable: {msg}"),
            SimulationError::AlgebraicLoop(names) => {
                write!(f, "algebraic loop through blocks {}", names.join(", "))
            }
            SimulationError::StepMismatch { block, delay, step } => write!(
                f,
                "delay {delay} in block {block} is not an integer multiple of the step {step}"
            ),
            SimulationError::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
        }
    }
}

impl std::error::Error for SimulationError {}

/// `c0/2 + Σ cₗ·cos(2πl·t/T − φₗ)`
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSignal {
    pub c0: f64,
    /// `(cₗ, φₗ)` for `l = 1, 2, …`
    pub harmonics: Vec<(f64, f64)>,
    pub period: f64,
}

impl FourierSignal {
    pub fn zero() -> Self {
        FourierSignal {
            c0: 0.0,
            harmonics: Vec::new(),
            period: 1.0,
        }
    }

    /// `count` unit harmonics with zero phase.
    pub fn unit_harmonics(period: f64, count: usize) -> Self {
        FourierSignal {
            c0: 0.0,
            harmonics: vec![(1.0, 0.0); count],
            period,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let base = 2.0 * PI * t / self.period;
        self.c0 / 2.0
            + self
                .harmonics
                .iter()
                .enumerate()
                .map(|(i, &(c, phi))| c * ((i + 1) as f64 * base - phi).cos())
                .sum::<f64>()
    }

    /// Sampled `max |value|` over one period.
    pub fn peak(&self) -> f64 {
        let samples = 512 * (self.harmonics.len() + 1);
        (0..samples)
            .map(|i| self.value(self.period * i as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FourierSignal {
            c0: self.c0 * factor,
            harmonics: self.harmonics.iter().map(|&(c, p)| (c * factor, p)).collect(),
            period: self.period,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.harmonics.iter().all(|(c, _)| *c == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimScenario {
    pub plant: CoprimeFactorization,
    pub controller: CoprimeFactorization,
    pub qm: FirDelayParameter,
    pub disturbance: FourierSignal,
    pub reference: FourierSignal,
    pub t_disturbance_on: f64,
    pub t_augmentation_on: f64,
    pub t_end: f64,
    pub step: f64,
    /// Constant pre-history of the plant output.
    pub initial_output: f64,
    /// Gate rise time; `None` switches instantly.
    pub gate_ramp: Option<f64>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidScenario(m.to_string()));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if !(self.t_end.is_finite() && self.t_disturbance_on >= 0.0) {
            return bad("times must be finite and nonnegative");
        }
        if self.t_disturbance_on > self.t_augmentation_on {
            return bad("disturbance must start no later than the augmentation");
        }
        if !self.initial_output.is_finite() {
            return bad("initial output must be finite");
        }
        for sig in [&self.disturbance, &self.reference] {
            if !(sig.period > 0.0 && sig.period.is_finite()) {
                return bad("signal period must be positive");
            }
        }
        if let Some(r) = self.gate_ramp {
            if !(r >= 0.0 && r.is_finite()) {
                return bad("gate ramp must be nonnegative");
            }
        }
        Ok(())
    }

    fn gate(&self) -> Gate {
        match self.gate_ramp {
            Some(duration) if duration > 0.0 => Gate::Ramp {
                at: self.t_augmentation_on,
                duration,
            },
            _ => Gate::Step {
                at: self.t_augmentation_on,
            },
        }
    }
}

/// Plant output, control, disturbance and error on the simulation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.t.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    /// Header `t,y,u,d,e`, 17 significant digits.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,y,u,d,e")?;
        for i in 0..self.t.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[i], self.y[i], self.u[i], self.d[i], self.e[i]
            )?;
        }
        Ok(())
    }
}

/// A closed-loop run with the internal `Q_M` signals kept alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopTrace {
    pub series: TimeSeries,
    /// Gated `Q_M` input `g(t)·w(t)`.
    pub qm_input: Vec<f64>,
    pub qm_output: Vec<f64>,
    /// Ungated `D_p⁻¹` output `w(t)`.
    pub w: Vec<f64>,
}

fn switched(signal: FourierSignal, on: f64, h: f64) -> ExternalSignal {
    let eps = 1e-9 * h;
    Box::new(move |t| {
        if t >= on - eps {
            signal.value(t)
        } else {
            0.0
        }
    })
}

/// Builds the block diagram of the augmented loop.
pub fn closed_loop_diagram(sc: &SimScenario) -> Result<Diagram, SimulationError> {
    sc.validate()?;
    let dp_inv = sc
        .controller
        .d()
        .recip()
        .ok_or_else(|| SimulationError::NotRealizable("D_p is identically zero".into()))?;
    let plant = sc.plant.original();
    let plant_gain = plant.num().eval(num_complex::Complex64::new(0.0, 0.0)).re;
    let plant_pre = if sc.initial_output == 0.0 {
        0.0
    } else if plant_gain.abs() > 0.0 {
        sc.initial_output / plant_gain
    } else {
        return Err(SimulationError::InvalidScenario(
            "plant numerator vanishes at s = 0; a nonzero initial output cannot be held".into(),
        ));
    };

    let mut d = Diagram::new();
    let r = d.add_external(switched(sc.reference.clone(), 0.0, sc.step));
    let dist = d.add_external(switched(sc.disturbance.clone(), sc.t_disturbance_on, sc.step));
    let zero = PreHistory::default();
    let g = d.add_block("plant", realize_dde(plant)?, PreHistory { value: plant_pre });
    let dpi = d.add_block("dp_inv", realize_dde(&dp_inv)?, zero);
    let np = d.add_block("n_p", realize_dde(sc.controller.n())?, zero);
    let qm = d.add_block("q_m", realize_dde(&sc.qm.to_rational())?, zero);
    let ng = d.add_block("n_g", realize_dde(sc.plant.n())?, zero);
    let dg = d.add_block("d_g", realize_dde(sc.plant.d())?, zero);

    let c = Connection::new;
    d.connect(dpi, c(Source::External(r), 1.0));
    d.connect(dpi, c(Source::Block(g), -1.0));
    d.connect(dpi, c(Source::External(dist), -1.0));
    d.connect(dpi, c(Source::Block(ng), 1.0));
    d.connect(np, c(Source::Block(dpi), 1.0));
    d.connect(qm, Connection::gated(Source::Block(dpi), 1.0));
    d.connect(ng, c(Source::Block(qm), 1.0));
    d.connect(dg, c(Source::Block(qm), 1.0));
    d.connect(g, c(Source::Block(np), 1.0));
    d.connect(g, c(Source::Block(dg), 1.0));
    d.set_gate(sc.gate());

    d.add_probe("y", vec![c(Source::Block(g), 1.0), c(Source::External(dist), 1.0)]);
    d.add_probe("u", vec![c(Source::Block(np), 1.0), c(Source::Block(dg), 1.0)]);
    d.add_probe("d", vec![c(Source::External(dist), 1.0)]);
    d.add_probe(
        "e",
        vec![
            c(Source::External(r), 1.0),
            c(Source::Block(g), -1.0),
            c(Source::External(dist), -1.0),
        ],
    );
    d.add_probe("qm_input", vec![Connection::gated(Source::Block(dpi), 1.0)]);
    d.add_probe("qm_output", vec![c(Source::Block(qm), 1.0)]);
    d.add_probe("w", vec![c(Source::Block(dpi), 1.0)]);
    Ok(d)
}

pub fn simulate_closed_loop_trace(sc: &SimScenario) -> Result<ClosedLoopTrace, SimulationError> {
    let run = closed_loop_diagram(sc)?.simulate(sc.step, sc.t_end)?;
    let take = |name: &str| run.probe(name).expect("probe wired").to_vec();
    Ok(ClosedLoopTrace {
        series: TimeSeries {
            y: take("y"),
            u: take("u"),
            d: take("d"),
            e: take("e"),
            t: run.t.clone(),
        },
        qm_input: take("qm_input"),
        qm_output: take("qm_output"),
        w: take("w"),
    })
}

pub fn simulate_closed_loop(sc: &SimScenario) -> Result<TimeSeries, SimulationError> {
    simulate_closed_loop_trace(sc).map(|tr| tr.series)
}

/// `max |y|` over `[t_start, t_stop]`.
pub fn window_residual(ts: &TimeSeries, t_start: f64, t_stop: f64) -> f64 {
    let eps = 1e-9 * ts.step().max(f64::MIN_POSITIVE);
    ts.t.iter()
        .zip(&ts.y)
        .filter(|(t, _)| **t >= t_start - eps && **t <= t_stop + eps)
        .map(|(_, y)| y.abs())
        .fold(0.0, f64::max)
}

/// `max |y|` over the final `window` seconds.
pub fn steady_state_residual(ts: &TimeSeries, window: f64) -> f64 {
    match ts.t.last() {
        Some(&end) => window_residual(ts, end - window, end),
        None => 0.0,
    }
}

/// Residuals before and after activation, each over `window` seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuppressionSummary {
    pub before: f64,
    pub after: f64,
    pub window: f64,
}

pub fn suppression_summary(ts: &TimeSeries, t_augmentation_on: f64, window: f64) -> SuppressionSummary {
    SuppressionSummary {
        before: window_residual(ts, t_augmentation_on - window, t_augmentation_on),
        after: steady_state_residual(ts, window),
        window,
    }
}
