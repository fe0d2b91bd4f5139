//! Stable-proper coprime factorizations and controller/sensitivity assembly.
//!
//! A plant is written `G = N_G / D_G` and the stabilizing controller
//! `C_p = N_p / D_p`, all four factors stable and proper. With
//! `U_p = D_G·D_p + N_G·N_p` and a stable proper parameter `Q_M`, the family
//!
//! ```text
//! C = (N_p + D_G·Q_M) / (D_p − N_G·Q_M)
//! S = D_G·(D_p − N_G·Q_M) / U_p
//! ```
//!
//! covers every controller that keeps the loop stable, and `S` is affine in `Q_M`.

use std::fmt;

use num_complex::Complex64;

use crate::quasipoly::{DelayRational, Polynomial, Quasipolynomial};
use crate::spectrum::{find_roots, RegionSpec, SpectrumError};

#[derive(Clone, Debug, PartialEq)]
pub enum FactorizationError {
    InvalidPole(f64),
    InvalidMu(f64),
    ZeroController,
    ImproperPlant,
    InvalidParameter(String),
    /// A factor denominator has a root with `Re ≥ 0` inside the check window.
    UnstableFactor { factor: &'static str, root: Complex64 },
    /// A quotient in the assembly vanished identically.
    Degenerate(&'static str),
    Spectrum(SpectrumError),
}

impl fmt::Display for FactorizationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorizationError::InvalidPole(p) => {
                write!(f, "factorization pole must be positive, got {p}")
            }
            FactorizationError::InvalidMu(m) => write!(f, "mu must be positive, got {m}"),
            FactorizationError::ZeroController => write!(f, "kp and ki are both zero"),
            FactorizationError::ImproperPlant => write!(f, "plant is not proper"),
            FactorizationError::InvalidParameter(msg) => write!(f, "{msg}"),
            FactorizationError::UnstableFactor { factor, root } => write!(
                f,
                "factor {factor} has a denominator root at {:.6}{:+.6}j in the closed right half-plane",
                root.re, root.im
            ),
            FactorizationError::Degenerate(what) => write!(f, "{what} vanishes identically"),
            FactorizationError::Spectrum(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FactorizationError {}

impl From<SpectrumError> for FactorizationError {
    fn from(e: SpectrumError) -> Self {
        FactorizationError::Spectrum(e)
    }
}

/// `(n, d)` with `n/d` equal to `original`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoprimeFactorization {
    n: DelayRational,
    d: DelayRational,
    original: DelayRational,
}

impl CoprimeFactorization {
    /// Accepts a user-supplied pair; no checks beyond what the types enforce.
    pub fn new(n: DelayRational, d: DelayRational, original: DelayRational) -> Self {
        CoprimeFactorization { n, d, original }
    }

    /// `n = G`, `d = 1` for an already stable plant.
    pub fn stable_plant(plant: DelayRational) -> Self {
        CoprimeFactorization {
            n: plant.clone(),
            d: DelayRational::constant(1.0),
            original: plant,
        }
    }

    /// `n = 0`, `d = 1`: no controller at all.
    pub fn zero_controller() -> Self {
        CoprimeFactorization {
            n: DelayRational::zero(),
            d: DelayRational::constant(1.0),
            original: DelayRational::zero(),
        }
    }

    pub fn n(&self) -> &DelayRational {
        &self.n
    }

    pub fn d(&self) -> &DelayRational {
        &self.d
    }

    pub fn original(&self) -> &DelayRational {
        &self.original
    }

    pub fn is_proper(&self) -> bool {
        self.n.is_proper() && self.d.is_proper()
    }

    /// Checks properness and that neither factor's denominator has a root
    /// with `Re ≥ 0` inside `window`.
    pub fn check_stability(&self, window: &RegionSpec) -> Result<(), FactorizationError> {
        if !self.is_proper() {
            return Err(FactorizationError::ImproperPlant);
        }
        for (name, factor) in [("n", &self.n), ("d", &self.d)] {
            let den = factor.den();
            if den.max_degree() == Some(0) && den.terms().len() == 1 {
                continue;
            }
            let roots = find_roots(den, window)?;
            if let Some(r) = roots.roots.iter().find(|r| r.s.re >= 0.0) {
                return Err(FactorizationError::UnstableFactor {
                    factor: name,
                    root: r.s,
                });
            }
        }
        Ok(())
    }
}

/// Window used when validating factor stability: `[−50, 50] × [0, 500]`.
pub fn default_stability_window() -> RegionSpec {
    RegionSpec::new(-50.0, 50.0, 0.0, 500.0).expect("static window")
}

/// PI controller `(kp·s + ki)/s` as `N_p = (kp·s + ki)/(s + pole)`, `D_p = s/(s + pole)`.
pub fn factorize_pi(kp: f64, ki: f64, pole: f64) -> Result<CoprimeFactorization, FactorizationError> {
    if !(pole > 0.0 && pole.is_finite()) {
        return Err(FactorizationError::InvalidPole(pole));
    }
    if !(kp.is_finite() && ki.is_finite()) {
        return Err(FactorizationError::InvalidParameter("kp and ki must be finite".into()));
    }
    if kp == 0.0 && ki == 0.0 {
        return Err(FactorizationError::ZeroController);
    }
    let shift = Polynomial::linear(pole, 1.0);
    let num = Polynomial::linear(ki, kp);
    let s = Polynomial::linear(0.0, 1.0);
    Ok(CoprimeFactorization {
        n: DelayRational::from_polys(num.clone(), shift.clone()).expect("nonzero"),
        d: DelayRational::from_polys(s.clone(), shift).expect("nonzero"),
        original: DelayRational::from_polys(num, s).expect("nonzero"),
    })
}

/// `G = e^{−sτ}/(s − a)` factored over `P(s) = s² + 2√μ·s + μ`:
/// `n = μ·e^{−sτ}/P`, `d = μ·(s − a)/P`. The delay stays in `n`.
pub fn factorize_delayed_first_order(
    a: f64,
    tau: f64,
    mu: f64,
) -> Result<CoprimeFactorization, FactorizationError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(FactorizationError::InvalidMu(mu));
    }
    if !(tau >= 0.0 && tau.is_finite() && a.is_finite()) {
        return Err(FactorizationError::InvalidParameter(
            "tau must be nonnegative and a finite".into(),
        ));
    }
    let p = Quasipolynomial::from_poly(Polynomial::new(vec![mu, 2.0 * mu.sqrt(), 1.0]));
    let delayed = Quasipolynomial::delayed_constant(tau, 1.0);
    let pole_poly = Quasipolynomial::from_poly(Polynomial::linear(-a, 1.0));
    Ok(CoprimeFactorization {
        n: DelayRational::new(delayed.scale(mu), p.clone()).expect("nonzero"),
        d: DelayRational::new(pole_poly.scale(mu), p).expect("nonzero"),
        original: DelayRational::new(delayed, pole_poly).expect("nonzero"),
    })
}

/// Divides numerator and denominator by `(s + shift_pole)^m`, where `m` is the
/// largest polynomial degree appearing in the plant.
pub fn factorize_by_shift(
    plant: &DelayRational,
    shift_pole: f64,
) -> Result<CoprimeFactorization, FactorizationError> {
    if !(shift_pole > 0.0 && shift_pole.is_finite()) {
        return Err(FactorizationError::InvalidPole(shift_pole));
    }
    if !plant.is_proper() {
        return Err(FactorizationError::ImproperPlant);
    }
    let m = plant
        .num()
        .max_degree()
        .unwrap_or(0)
        .max(plant.den().max_degree().unwrap_or(0));
    let shift = Quasipolynomial::from_poly(Polynomial::shifted_power(shift_pole, m));
    Ok(CoprimeFactorization {
        n: DelayRational::new(plant.num().clone(), shift.clone()).expect("nonzero"),
        d: DelayRational::new(plant.den().clone(), shift).expect("nonzero"),
        original: plant.clone(),
    })
}

/// `U_p = D_G·D_p + N_G·N_p`, uncancelled.
pub fn compute_up(plant: &CoprimeFactorization, ctrl: &CoprimeFactorization) -> DelayRational {
    plant.d.mul(&ctrl.d).add(&plant.n.mul(&ctrl.n))
}

/// `Q_M(s) = Σₖ aₖ·e^{−s·k·ϑ}`, `k = 0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirDelayParameter {
    spacing: f64,
    gains: Vec<f64>,
}

impl FirDelayParameter {
    pub fn new(spacing: f64, gains: Vec<f64>) -> Result<Self, FactorizationError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(FactorizationError::InvalidParameter(format!(
                "delay spacing must be positive, got {spacing}"
            )));
        }
        if gains.is_empty() {
            return Err(FactorizationError::InvalidParameter(
                "at least one gain (a_0) is required".into(),
            ));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(FactorizationError::InvalidParameter("gains must be finite".into()));
        }
        Ok(FirDelayParameter { spacing, gains })
    }

    /// All-zero parameter with `count + 1` gains.
    pub fn zero(spacing: f64, count: usize) -> Result<Self, FactorizationError> {
        Self::new(spacing, vec![0.0; count + 1])
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `N`, the index of the last tap.
    pub fn count(&self) -> usize {
        self.gains.len() - 1
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// `T_D = ϑ·N`
    pub fn span(&self) -> f64 {
        self.spacing * self.count() as f64
    }

    /// `τₖ = k·ϑ`
    pub fn delay(&self, k: usize) -> f64 {
        k as f64 * self.spacing
    }

    pub fn is_zero(&self) -> bool {
        self.gains.iter().all(|g| *g == 0.0)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.gains
            .iter()
            .enumerate()
            .map(|(k, &a)| a * (-s * self.delay(k)).exp())
            .sum()
    }

    /// Numerator `{(τₖ, [aₖ])}` over denominator 1.
    pub fn to_rational(&self) -> DelayRational {
        let terms = self
            .gains
            .iter()
            .enumerate()
            .map(|(k, &a)| (self.delay(k), Polynomial::constant(a)))
            .collect();
        DelayRational::from_qp(Quasipolynomial::new(terms).expect("validated gains"))
    }

    /// Gainwise `α·self + β·other`; both must share spacing and tap count.
    pub fn combine(&self, alpha: f64, other: &FirDelayParameter, beta: f64) -> Option<Self> {
        if self.spacing != other.spacing || self.gains.len() != other.gains.len() {
            return None;
        }
        let gains = self
            .gains
            .iter()
            .zip(&other.gains)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Some(FirDelayParameter {
            spacing: self.spacing,
            gains,
        })
    }
}

/// `C = (N_p + D_G·Q_M) / (D_p − N_G·Q_M)`.
pub fn assemble_controller(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    qm: &FirDelayParameter,
) -> Result<DelayRational, FactorizationError> {
    let q = qm.to_rational();
    let num = ctrl.n.add(&plant.d.mul(&q));
    let den = ctrl.d.sub(&plant.n.mul(&q));
    num.div(&den)
        .ok_or(FactorizationError::Degenerate("D_p - N_G·Q_M"))
}

/// `S = D_G·(D_p − N_G·Q_M) / U_p`.
pub fn assemble_sensitivity(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    qm: &FirDelayParameter,
) -> Result<DelayRational, FactorizationError> {
    let q = qm.to_rational();
    let inner = plant.d.mul(&ctrl.d.sub(&plant.n.mul(&q)));
    inner
        .div(&compute_up(plant, ctrl))
        .ok_or(FactorizationError::Degenerate("U_p"))
}
