//! Gain synthesis for the lumped-delay parameter.
//!
//! Placing sensitivity zeros at `0` and at `jωₗ` is equivalent to the
//! interpolation conditions `Q_M(jωₗ) = D_p(jωₗ)/N_G(jωₗ)`. With
//! `Q_M(s) = Σ aₖ e^{−s·k·ϑ}` these are linear in the gains, giving `A·x = B`
//! with one DC row, `M_d` cosine rows and `M_d` sine rows.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::factorization::{
    assemble_sensitivity, CoprimeFactorization, FactorizationError, FirDelayParameter,
};
use crate::quasipoly::{DelayRational, PoleProximity};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Default pass threshold on `|S(jωₗ)|`.
pub const DEFAULT_REGULATION_TOL: f64 = 1e-8;

/// `|N_G(jω)|` below this fraction of its term magnitude counts as a zero.
const PLANT_ZERO_REL: f64 = 1e-13;

/// Angle tolerance used when naming aliased harmonics.
const ALIAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum SynthesisError {
    InvalidTarget(String),
    InvalidSystem(String),
    /// `N_G(jω) = 0`: no gain choice can place a sensitivity zero there.
    PlantZeroAtHarmonic(f64),
    Pole(PoleProximity),
    Factorization(FactorizationError),
    Solver(String),
}

impl fmt::Display for SynthesisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthesisError::InvalidTarget(msg) => write!(f, "invalid harmonic target: {msg}"),
            SynthesisError::InvalidSystem(msg) => write!(f, "invalid linear system: {msg}"),
            SynthesisError::PlantZeroAtHarmonic(w) => write!(
                f,
                "plant numerator factor vanishes at omega = {w}; regulation is impossible there"
            ),
            SynthesisError::Pole(e) => write!(f, "{e}"),
            SynthesisError::Factorization(e) => write!(f, "{e}"),
            SynthesisError::Solver(msg) => write!(f, "solver failed: {msg}"),
        }
    }
}

impl std::error::Error for SynthesisError {}

impl From<PoleProximity> for SynthesisError {
    fn from(e: PoleProximity) -> Self {
        SynthesisError::Pole(e)
    }
}

impl From<FactorizationError> for SynthesisError {
    fn from(e: FactorizationError) -> Self {
        SynthesisError::Factorization(e)
    }
}

/// Non-fatal findings of a design.
#[derive(Clone, Debug, PartialEq)]
pub enum SynthesisWarning {
    /// Numerical rank below the row count. `aliased` lists harmonic indices
    /// `l` whose rows collapse because `ωₗ·ϑ` is a multiple of `π` or
    /// coincides with another harmonic modulo `2π`.
    RankDeficient {
        rank: usize,
        rows: usize,
        aliased: Vec<usize>,
    },
    /// Fewer gains than equations.
    TooFewTaps { taps: usize, rows: usize },
}

impl fmt::Display for SynthesisWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthesisWarning::RankDeficient {
                rank,
                rows,
                aliased,
            } => {
                write!(f, "rank deficient: rank {rank} < {rows} rows")?;
                if !aliased.is_empty() {
                    let names: Vec<String> = aliased.iter().map(|l| format!("l={l}")).collect();
                    write!(
                        f,
                        "; delay spacing aliases harmonic {} (choose a spacing with omega_l*spacing away from multiples of pi)",
                        names.join(", ")
                    )?;
                }
                Ok(())
            }
            SynthesisWarning::TooFewTaps { taps, rows } => write!(
                f,
                "only {taps} gains for {rows} equations; increase the tap count"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTarget {
    period: f64,
    harmonic_count: usize,
    include_dc: bool,
}

impl HarmonicTarget {
    pub fn new(period: f64, harmonic_count: usize, include_dc: bool) -> Result<Self, SynthesisError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(SynthesisError::InvalidTarget(format!(
                "period must be positive, got {period}"
            )));
        }
        if harmonic_count == 0 && !include_dc {
            return Err(SynthesisError::InvalidTarget(
                "no harmonics and no DC condition".into(),
            ));
        }
        Ok(HarmonicTarget {
            period,
            harmonic_count,
            include_dc,
        })
    }

    pub fn from_frequency(f_hz: f64, harmonic_count: usize, include_dc: bool) -> Result<Self, SynthesisError> {
        if !(f_hz > 0.0 && f_hz.is_finite()) {
            return Err(SynthesisError::InvalidTarget(format!(
                "frequency must be positive, got {f_hz}"
            )));
        }
        Self::new(1.0 / f_hz, harmonic_count, include_dc)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn harmonic_count(&self) -> usize {
        self.harmonic_count
    }

    pub fn include_dc(&self) -> bool {
        self.include_dc
    }
}

/// `ωₗ = 2πl/T` for `l = 1..M_d`.
pub fn harmonic_frequencies(target: &HarmonicTarget) -> Vec<f64> {
    (1..=target.harmonic_count)
        .map(|l| 2.0 * PI * l as f64 / target.period)
        .collect()
}

fn interpolation_value(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    omega: f64,
) -> Result<Complex64, SynthesisError> {
    let s = Complex64::new(0.0, omega);
    let ng = plant.n();
    let num = ng.num().eval(s);
    if !(num.norm() > PLANT_ZERO_REL * ng.num().magnitude_scale(s)) {
        return Err(SynthesisError::PlantZeroAtHarmonic(omega));
    }
    let dp = ctrl.d().eval(s)?;
    let value = dp / ng.eval(s)?;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(SynthesisError::PlantZeroAtHarmonic(omega));
    }
    Ok(value)
}

/// `D_p(jωₗ)/N_G(jωₗ)` for each frequency, with the DC value first when requested.
pub fn rhs_targets(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    omegas: &[f64],
    include_dc: bool,
) -> Result<Vec<Complex64>, SynthesisError> {
    let dc = include_dc.then_some(0.0);
    dc.into_iter()
        .chain(omegas.iter().copied())
        .map(|w| interpolation_value(plant, ctrl, w))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegulationSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub omegas: Vec<f64>,
    pub rhs_values: Vec<Complex64>,
    pub include_dc: bool,
    pub spacing: f64,
}

impl RegulationSystem {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn taps(&self) -> usize {
        self.a.ncols()
    }

    /// Harmonic indices whose rows are degenerate for this spacing.
    pub fn aliased_harmonics(&self) -> Vec<usize> {
        let wrap = |x: f64| x.rem_euclid(2.0 * PI);
        let near = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) <= ALIAS_TOL * (1.0 + a.abs().max(b.abs()))
        };
        let angles: Vec<f64> = self.omegas.iter().map(|w| wrap(w * self.spacing)).collect();
        let mut out = Vec::new();
        for (i, &x) in angles.iter().enumerate() {
            let self_degenerate = near(x, 0.0) || near(x, PI);
            let collides = angles
                .iter()
                .enumerate()
                .any(|(j, &y)| j != i && (near(x, y) || near(x, -y)));
            if self_degenerate || collides {
                out.push(i + 1);
            }
        }
        out
    }
}

/// Assembles `A·x = B`. Row order: DC (optional), cosines `l = 1..M_d`, sines `l = 1..M_d`.
/// `targets` must carry the DC value first when `include_dc` is set.
pub fn build_linear_system(
    targets: &[Complex64],
    omegas: &[f64],
    spacing: f64,
    count: usize,
    include_dc: bool,
) -> Result<RegulationSystem, SynthesisError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(SynthesisError::InvalidSystem(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let offset = usize::from(include_dc);
    if targets.len() != omegas.len() + offset {
        return Err(SynthesisError::InvalidSystem(format!(
            "{} targets for {} frequencies",
            targets.len(),
            omegas.len()
        )));
    }
    let m = omegas.len();
    let rows = 2 * m + offset;
    let cols = count + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    if include_dc {
        a.row_mut(0).fill(1.0);
        b[0] = targets[0].re;
    }
    for (l, &w) in omegas.iter().enumerate() {
        let target = targets[l + offset];
        for k in 0..cols {
            let phase = w * k as f64 * spacing;
            a[(offset + l, k)] = phase.cos();
            a[(offset + m + l, k)] = phase.sin();
        }
        b[offset + l] = target.re;
        b[offset + m + l] = -target.im;
    }
    Ok(RegulationSystem {
        a,
        b,
        omegas: omegas.to_vec(),
        rhs_values: targets.to_vec(),
        include_dc,
        spacing,
    })
}

/// Gains plus solve diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSolution {
    pub gains: Vec<f64>,
    pub residual_inf: f64,
    pub rank: usize,
    /// `σ_max/σ_min` over all singular values; infinite when one vanishes.
    pub condition: f64,
    pub warnings: Vec<SynthesisWarning>,
}

/// Any routine that produces gains satisfying `A·x = B` (possibly under extra constraints).
pub trait GainSolver {
    fn solve(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, SynthesisError>;
}

/// Minimum-norm least squares via the singular value decomposition.
#[derive(Clone, Copy, Debug, Default)]
pub struct MinNormSolver;

impl GainSolver for MinNormSolver {
    fn solve(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, SynthesisError> {
        let svd = a.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        svd.solve(b, RANK_CUTOFF * sigma_max)
            .map_err(|e| SynthesisError::Solver(e.to_string()))
    }
}

fn singular_value_stats(a: &DMatrix<f64>) -> (usize, f64) {
    let sv = a.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return (0, f64::INFINITY);
    }
    let rank = sv.iter().filter(|&&v| v > RANK_CUTOFF * max).count();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    (rank, condition)
}

pub fn solve_gains(system: &RegulationSystem) -> Result<GainSolution, SynthesisError> {
    solve_gains_with(system, &MinNormSolver)
}

pub fn solve_gains_with(
    system: &RegulationSystem,
    solver: &dyn GainSolver,
) -> Result<GainSolution, SynthesisError> {
    let x = solver.solve(&system.a, &system.b)?;
    let residual = &system.a * &x - &system.b;
    let residual_inf = residual.amax();
    let (rank, condition) = singular_value_stats(&system.a);
    let mut warnings = Vec::new();
    if system.taps() < system.rows() {
        warnings.push(SynthesisWarning::TooFewTaps {
            taps: system.taps(),
            rows: system.rows(),
        });
    }
    if rank < system.rows() {
        warnings.push(SynthesisWarning::RankDeficient {
            rank,
            rows: system.rows(),
            aliased: system.aliased_harmonics(),
        });
    }
    Ok(GainSolution {
        gains: x.iter().copied().collect(),
        residual_inf,
        rank,
        condition,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub qm: FirDelayParameter,
    pub residual_inf: f64,
    pub rank: usize,
    pub condition: f64,
    pub omegas: Vec<f64>,
    pub include_dc: bool,
    /// `|S(0)|` first when DC is included, then `|S(jωₗ)|`.
    pub sensitivity_at_harmonics: Vec<f64>,
    pub warnings: Vec<SynthesisWarning>,
}

impl DesignResult {
    pub fn passes(&self, tol: f64) -> bool {
        self.sensitivity_at_harmonics.iter().all(|v| *v <= tol)
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, SynthesisWarning::RankDeficient { .. }))
    }
}

pub fn design_qm(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    target: &HarmonicTarget,
    spacing: f64,
    count: usize,
) -> Result<DesignResult, SynthesisError> {
    design_qm_with(plant, ctrl, target, spacing, count, &MinNormSolver)
}

pub fn design_qm_with(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    target: &HarmonicTarget,
    spacing: f64,
    count: usize,
    solver: &dyn GainSolver,
) -> Result<DesignResult, SynthesisError> {
    let omegas = harmonic_frequencies(target);
    let targets = rhs_targets(plant, ctrl, &omegas, target.include_dc)?;
    let system = build_linear_system(&targets, &omegas, spacing, count, target.include_dc)?;
    let solution = solve_gains_with(&system, solver)?;
    let qm = FirDelayParameter::new(spacing, solution.gains)?;
    let sensitivity = assemble_sensitivity(plant, ctrl, &qm)?;
    let report = verify_regulation(&sensitivity, &omegas, target.include_dc, DEFAULT_REGULATION_TOL);
    Ok(DesignResult {
        qm,
        residual_inf: solution.residual_inf,
        rank: solution.rank,
        condition: solution.condition,
        omegas,
        include_dc: target.include_dc,
        sensitivity_at_harmonics: report.magnitudes,
        warnings: solution.warnings,
    })
}

/// Diagnostics for a given parameter against the target, without solving.
pub fn evaluate_design(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    target: &HarmonicTarget,
    qm: FirDelayParameter,
) -> Result<DesignResult, SynthesisError> {
    let omegas = harmonic_frequencies(target);
    let targets = rhs_targets(plant, ctrl, &omegas, target.include_dc)?;
    let system = build_linear_system(&targets, &omegas, qm.spacing(), qm.count(), target.include_dc)?;
    let x = DVector::from_column_slice(qm.gains());
    let residual_inf = (&system.a * &x - &system.b).amax();
    let (rank, condition) = singular_value_stats(&system.a);
    let mut warnings = Vec::new();
    if rank < system.rows() {
        warnings.push(SynthesisWarning::RankDeficient {
            rank,
            rows: system.rows(),
            aliased: system.aliased_harmonics(),
        });
    }
    let sensitivity = assemble_sensitivity(plant, ctrl, &qm)?;
    let report = verify_regulation(&sensitivity, &omegas, target.include_dc, DEFAULT_REGULATION_TOL);
    Ok(DesignResult {
        qm,
        residual_inf,
        rank,
        condition,
        omegas,
        include_dc: target.include_dc,
        sensitivity_at_harmonics: report.magnitudes,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegulationReport {
    pub magnitudes: Vec<f64>,
    pub tol: f64,
    pub passed: bool,
}

/// `|S(0)|` (optional) and `|S(jωₗ)|`; a pole at a checked frequency reads as infinite.
pub fn verify_regulation(
    sensitivity: &DelayRational,
    omegas: &[f64],
    include_dc: bool,
    tol: f64,
) -> RegulationReport {
    let dc = include_dc.then_some(0.0);
    let magnitudes: Vec<f64> = dc
        .into_iter()
        .chain(omegas.iter().copied())
        .map(|w| {
            sensitivity
                .eval(Complex64::new(0.0, w))
                .map_or(f64::INFINITY, |v| v.norm())
        })
        .collect();
    let passed = magnitudes.iter().all(|m| *m <= tol);
    RegulationReport {
        magnitudes,
        tol,
        passed,
    }
}
