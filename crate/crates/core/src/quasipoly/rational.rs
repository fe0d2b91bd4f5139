use std::fmt;

use num_complex::Complex64;

use super::{Polynomial, Quasipolynomial};

/// Relative tolerance used to detect structurally identical denominators.
const SAME_DENOMINATOR_REL: f64 = 1e-13;

/// Absolute floor on `|den(s)|`, scaled by the denominator's term magnitude.
const POLE_FLOOR: f64 = 1e-300;

/// Evaluation landed on (or numerically at) a denominator zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleProximity {
    pub s: Complex64,
    pub magnitude: f64,
}

impl fmt::Display for PoleProximity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "denominator vanishes at s = {}{:+}j (|den| = {:e})",
            self.s.re, self.s.im, self.magnitude
        )
    }
}

impl std::error::Error for PoleProximity {}

/// Ratio of two quasipolynomials. Never cancels common factors.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayRational {
    num: Quasipolynomial,
    den: Quasipolynomial,
}

impl DelayRational {
    /// Returns `None` when `den` is identically zero.
    pub fn new(num: Quasipolynomial, den: Quasipolynomial) -> Option<Self> {
        if den.is_zero() {
            None
        } else {
            Some(DelayRational { num, den })
        }
    }

    pub fn from_qp(num: Quasipolynomial) -> Self {
        DelayRational {
            num,
            den: Quasipolynomial::one(),
        }
    }

    pub fn from_polys(num: Polynomial, den: Polynomial) -> Option<Self> {
        Self::new(Quasipolynomial::from_poly(num), Quasipolynomial::from_poly(den))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_qp(Quasipolynomial::from_poly(Polynomial::constant(c)))
    }

    pub fn zero() -> Self {
        Self::from_qp(Quasipolynomial::zero())
    }

    pub fn num(&self) -> &Quasipolynomial {
        &self.num
    }

    pub fn den(&self) -> &Quasipolynomial {
        &self.den
    }

    /// Max numerator degree ≤ degree of the undelayed denominator term, which must exist.
    pub fn is_proper(&self) -> bool {
        let Some(lead) = self.den.zero_delay_poly() else {
            return false;
        };
        let den_deg = lead.degree().unwrap_or(0);
        self.num.max_degree().is_none_or(|d| d <= den_deg)
    }

    /// Proper, and no numerator term reaches the undelayed denominator degree.
    pub fn is_strictly_proper(&self) -> bool {
        let Some(lead) = self.den.zero_delay_poly() else {
            return false;
        };
        let den_deg = lead.degree().unwrap_or(0);
        self.num.max_degree().is_none_or(|d| d < den_deg)
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64, PoleProximity> {
        let d = self.den.eval(s);
        let floor = POLE_FLOOR * self.den.magnitude_scale(s).max(1.0);
        if !(d.norm() > floor) {
            return Err(PoleProximity {
                s,
                magnitude: d.norm(),
            });
        }
        Ok(self.num.eval(s) / d)
    }

    pub fn mul(&self, other: &DelayRational) -> DelayRational {
        DelayRational {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
        }
    }

    pub fn add(&self, other: &DelayRational) -> DelayRational {
        if self.den.approx_eq(&other.den, SAME_DENOMINATOR_REL) {
            return DelayRational {
                num: &self.num + &other.num,
                den: self.den.clone(),
            };
        }
        DelayRational {
            num: &(&self.num * &other.den) + &(&other.num * &self.den),
            den: &self.den * &other.den,
        }
    }

    pub fn sub(&self, other: &DelayRational) -> DelayRational {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DelayRational {
        DelayRational {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    /// `self / other`; `None` when `other` has a zero numerator.
    pub fn div(&self, other: &DelayRational) -> Option<DelayRational> {
        if other.num.is_zero() {
            return None;
        }
        if self.den.approx_eq(&other.den, SAME_DENOMINATOR_REL) {
            return Some(DelayRational {
                num: self.num.clone(),
                den: other.num.clone(),
            });
        }
        Some(DelayRational {
            num: &self.num * &other.den,
            den: &self.den * &other.num,
        })
    }

    /// Swaps numerator and denominator; `None` for the zero function.
    pub fn recip(&self) -> Option<DelayRational> {
        DelayRational::new(self.den.clone(), self.num.clone())
    }

    pub fn scale(&self, factor: f64) -> DelayRational {
        DelayRational {
            num: self.num.scale(factor),
            den: self.den.clone(),
        }
    }

    /// Largest delay over numerator and denominator.
    pub fn max_delay(&self) -> f64 {
        self.num.max_delay().max(self.den.max_delay())
    }
}

impl fmt::Display for DelayRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] / [{}]", self.num, self.den)
    }
}

/// Evaluates `f(jω)` on each frequency in order.
pub fn frequency_response(
    f: &DelayRational,
    omegas: &[f64],
) -> Result<Vec<Complex64>, PoleProximity> {
    omegas
        .iter()
        .map(|&w| f.eval(Complex64::new(0.0, w)))
        .collect()
}
