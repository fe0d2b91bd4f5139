//! Periodic regulation of SISO time-delay systems.
//!
//! A known stabilizing controller is augmented with a lumped-delay
//! Youla-Kučera parameter `Q_M(s) = Σ aₖ e^{−s·k·ϑ}` whose gains are chosen so
//! that the closed-loop sensitivity vanishes at the harmonics of a periodic
//! disturbance. The crate covers the algebra of quasipolynomials, the
//! factorizations, the gain synthesis, a spectrum root finder and a
//! fixed-step closed-loop simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

pub mod cli;
pub mod factorization;
pub mod quasipoly;
pub mod scenario;
pub mod simulator;
pub mod spectrum;
pub mod synthesis;

pub use factorization::{CoprimeFactorization, FactorizationError, FirDelayParameter};
pub use quasipoly::{DelayRational, Polynomial, Quasipolynomial};
pub use spectrum::{RegionSpec, RootSet, SpectrumError};
pub use synthesis::{DesignResult, HarmonicTarget, SynthesisError};

/// Any failure raised by the library.
#[derive(Debug)]
pub enum Error {
    Algebra(quasipoly::AlgebraError),
    Pole(quasipoly::PoleProximity),
    Factorization(FactorizationError),
    Synthesis(SynthesisError),
    Spectrum(SpectrumError),
    Simulation(simulator::SimulationError),
    Scenario(scenario::ScenarioError),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Algebra(e) => write!(f, "{e}"),
            Error::Pole(e) => write!(f, "{e}"),
            Error::Factorization(e) => write!(f, "{e}"),
            Error::Synthesis(e) => write!(f, "{e}"),
            Error::Spectrum(e) => write!(f, "{e}"),
            Error::Simulation(e) => write!(f, "{e}"),
            Error::Scenario(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Algebra(e) => Some(e),
            Error::Pole(e) => Some(e),
            Error::Factorization(e) => Some(e),
            Error::Synthesis(e) => Some(e),
            Error::Spectrum(e) => Some(e),
            Error::Simulation(e) => Some(e),
            Error::Scenario(e) => Some(e),
        }
    }
}

macro_rules! from_error {
    ($($src:ty => $variant:ident),* $(,)?) => {
        $(impl From<$src> for Error {
            fn from(e: $src) -> Self {
                Error::$variant(e)
            }
        })*
    };
}

from_error! {
    quasipoly::AlgebraError => Algebra,
    quasipoly::PoleProximity => Pole,
    FactorizationError => Factorization,
    SynthesisError => Synthesis,
    SpectrumError => Spectrum,
    simulator::SimulationError => Simulation,
    scenario::ScenarioError => Scenario,
}
