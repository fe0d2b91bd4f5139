//! Quasipolynomials `Σ pᵢ(s)·e^{−sθᵢ}` and ratios of them.
//!
//! Everything in the toolkit (plants, controllers, coprime factors, the
//! sensitivity) is a [`DelayRational`]. Values are immutable once built and
//! arithmetic always returns canonical forms.

mod polynomial;
mod rational;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub use polynomial::{Polynomial, TRIM_RELATIVE};
pub use rational::{frequency_response, DelayRational, PoleProximity};

/// Two delays coalesce when they differ by at most this much, relative to
/// `max(1, θ_max)`.
pub const DELAY_MERGE_RELATIVE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraError {
    NegativeDelay(f64),
    NonFinite,
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::NegativeDelay(d) => write!(f, "delay {d} is negative"),
            AlgebraError::NonFinite => write!(f, "delay or coefficient is not finite"),
        }
    }
}

impl std::error::Error for AlgebraError {}

/// One `p(s)·e^{−s·delay}` term.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub delay: f64,
    pub poly: Polynomial,
}

/// Finite sum of delayed polynomial terms.
///
/// Invariants: delays strictly increasing with no two inside the merge
/// tolerance, and no term carries the zero polynomial. The empty term list
/// is the zero quasipolynomial.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Quasipolynomial {
    terms: Vec<Term>,
}

impl Quasipolynomial {
    /// Builds a canonical quasipolynomial from arbitrary `(delay, poly)` pairs.
    pub fn new(terms: Vec<(f64, Polynomial)>) -> Result<Self, AlgebraError> {
        for (delay, poly) in &terms {
            if !delay.is_finite() || poly.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(AlgebraError::NonFinite);
            }
            if *delay < 0.0 {
                return Err(AlgebraError::NegativeDelay(*delay));
            }
        }
        Ok(Self::from_raw(
            terms
                .into_iter()
                .map(|(delay, poly)| Term { delay, poly })
                .collect(),
        ))
    }

    /// Convenience for `(delay, coeffs)` literals; panics on invalid input.
    pub fn from_terms(terms: &[(f64, &[f64])]) -> Self {
        Self::new(
            terms
                .iter()
                .map(|(d, c)| (*d, Polynomial::new(c.to_vec())))
                .collect(),
        )
        .expect("valid quasipolynomial literal")
    }

    pub fn zero() -> Self {
        Quasipolynomial { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_poly(Polynomial::constant(1.0))
    }

    pub fn from_poly(poly: Polynomial) -> Self {
        Self::from_raw(vec![Term { delay: 0.0, poly }])
    }

    /// `c·e^{−s·delay}`
    pub fn delayed_constant(delay: f64, c: f64) -> Self {
        Self::from_raw(vec![Term {
            delay,
            poly: Polynomial::constant(c),
        }])
    }

    fn from_raw(mut terms: Vec<Term>) -> Self {
        terms.retain(|t| !t.poly.is_zero());
        terms.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        let max_delay = terms.last().map_or(0.0, |t| t.delay);
        let tol = DELAY_MERGE_RELATIVE * max_delay.max(1.0);
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for term in terms {
            match merged.last_mut() {
                Some(last) if (term.delay - last.delay).abs() <= tol => {
                    last.poly = last.poly.add(&term.poly);
                }
                _ => merged.push(term),
            }
        }
        merged.retain(|t| !t.poly.is_zero());
        Quasipolynomial { terms: merged }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.delay)
    }

    /// True when no term is delayed.
    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.delay == 0.0)
    }

    /// The undelayed polynomial, if that term exists.
    pub fn zero_delay_poly(&self) -> Option<&Polynomial> {
        self.terms
            .first()
            .filter(|t| t.delay == 0.0)
            .map(|t| &t.poly)
    }

    /// Largest polynomial degree over all terms (`None` for zero).
    pub fn max_degree(&self) -> Option<usize> {
        self.terms.iter().filter_map(|t| t.poly.degree()).max()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.poly.eval(s) * delay_factor(t.delay, s))
            .sum()
    }

    /// Value and derivative at `s` without building the derivative explicitly.
    pub fn eval_with_derivative(&self, s: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        self.terms.iter().fold((zero, zero), |(v, d), t| {
            let e = delay_factor(t.delay, s);
            let (p, dp) = t.poly.eval_with_derivative(s);
            (v + p * e, d + (dp - t.delay * p) * e)
        })
    }

    /// `Σ|pᵢ|(|s|)·|e^{−sθᵢ}|`, a backward-error scale for values at `s`.
    pub fn magnitude_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.terms
            .iter()
            .map(|t| t.poly.eval_abs(r) * (-s.re * t.delay).exp())
            .sum()
    }

    /// Termwise d/ds: `(pᵢ′ − θᵢ·pᵢ)·e^{−sθᵢ}`.
    pub fn derivative(&self) -> Quasipolynomial {
        Self::from_raw(
            self.terms
                .iter()
                .map(|t| Term {
                    delay: t.delay,
                    poly: t.poly.derivative().sub(&t.poly.scale(t.delay)),
                })
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Quasipolynomial {
        Self::from_raw(
            self.terms
                .iter()
                .map(|t| Term {
                    delay: t.delay,
                    poly: t.poly.scale(factor),
                })
                .collect(),
        )
    }

    pub fn mul_poly(&self, p: &Polynomial) -> Quasipolynomial {
        Self::from_raw(
            self.terms
                .iter()
                .map(|t| Term {
                    delay: t.delay,
                    poly: t.poly.mul(p),
                })
                .collect(),
        )
    }

    pub fn add_qp(&self, other: &Quasipolynomial) -> Quasipolynomial {
        Self::from_raw(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn sub_qp(&self, other: &Quasipolynomial) -> Quasipolynomial {
        self.add_qp(&other.scale(-1.0))
    }

    pub fn mul_qp(&self, other: &Quasipolynomial) -> Quasipolynomial {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push(Term {
                    delay: a.delay + b.delay,
                    poly: a.poly.mul(&b.poly),
                });
            }
        }
        Self::from_raw(out)
    }

    /// Structural equality up to `rel` on coefficients and the merge tolerance on delays.
    pub fn approx_eq(&self, other: &Quasipolynomial, rel: f64) -> bool {
        if self.terms.len() != other.terms.len() {
            return false;
        }
        let tol = DELAY_MERGE_RELATIVE * self.max_delay().max(other.max_delay()).max(1.0);
        self.terms
            .iter()
            .zip(&other.terms)
            .all(|(a, b)| (a.delay - b.delay).abs() <= tol && a.poly.approx_eq(&b.poly, rel))
    }
}

#[inline]
fn delay_factor(delay: f64, s: Complex64) -> Complex64 {
    if delay == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        (-s * delay).exp()
    }
}

impl fmt::Display for Quasipolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t.delay == 0.0 {
                write!(f, "({})", t.poly)?;
            } else {
                write!(f, "({})·e^(-{}s)", t.poly, t.delay)?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $impl:ident) => {
        impl $trait<&Quasipolynomial> for &Quasipolynomial {
            type Output = Quasipolynomial;
            fn $method(self, rhs: &Quasipolynomial) -> Quasipolynomial {
                self.$impl(rhs)
            }
        }
        impl $trait for Quasipolynomial {
            type Output = Quasipolynomial;
            fn $method(self, rhs: Quasipolynomial) -> Quasipolynomial {
                (&self).$impl(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_qp);
forward_binop!(Sub, sub, sub_qp);
forward_binop!(Mul, mul, mul_qp);

impl Neg for &Quasipolynomial {
    type Output = Quasipolynomial;
    fn neg(self) -> Quasipolynomial {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let one = Quasipolynomial::from_terms(&[(0.0, &[1.0])]);
        assert_eq!(one.eval(c(3.0, 4.0)), c(1.0, 0.0));

        let s_delayed = Quasipolynomial::from_terms(&[(1.0, &[0.0, 1.0])]);
        assert_eq!(s_delayed.eval(c(0.0, 0.0)), c(0.0, 0.0));

        // s − 2 − e^{−s} at jπ: e^{−jπ} = −1
        let qp = Quasipolynomial::from_terms(&[(0.0, &[-2.0, 1.0]), (1.0, &[-1.0])]);
        let v = qp.eval(c(0.0, PI));
        assert!((v - c(-1.0, PI)).norm() < 1e-14);
    }

    #[test]
    fn add_examples() {
        let a = Quasipolynomial::from_terms(&[(0.0, &[1.0])]);
        let b = Quasipolynomial::from_terms(&[(0.0, &[-1.0])]);
        assert!((&a + &b).is_zero());

        let d = Quasipolynomial::from_terms(&[(1.0, &[1.0])]);
        let sum = &a + &d;
        assert_eq!(sum.terms().len(), 2);
        assert_eq!(sum.terms()[0].delay, 0.0);
        assert_eq!(sum.terms()[1].delay, 1.0);

        let x = Quasipolynomial::from_terms(&[(0.5, &[0.0, 1.0])]);
        let y = Quasipolynomial::from_terms(&[(0.5, &[3.0])]);
        let merged = &x + &y;
        assert_eq!(merged.terms().len(), 1);
        assert_eq!(merged.terms()[0].delay, 0.5);
        assert_eq!(merged.terms()[0].poly.coeffs(), &[3.0, 1.0]);
    }

    #[test]
    fn mul_examples() {
        let s = Quasipolynomial::from_terms(&[(0.0, &[0.0, 1.0])]);
        let e = Quasipolynomial::from_terms(&[(1.0, &[1.0])]);
        let p = &s * &e;
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.terms()[0].delay, 1.0);
        assert_eq!(p.terms()[0].poly.coeffs(), &[0.0, 1.0]);

        assert!((&Quasipolynomial::zero() * &s).is_zero());

        let sp1 = Quasipolynomial::from_terms(&[(0.0, &[1.0, 1.0])]);
        let sq = &sp1 * &sp1;
        assert_eq!(sq.terms()[0].poly.coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn mul_coalesces_float_noise_in_delays() {
        let a = Quasipolynomial::from_terms(&[(0.0, &[1.0]), (0.1, &[1.0])]);
        let b = Quasipolynomial::from_terms(&[(0.2, &[1.0]), (0.3, &[1.0])]);
        // 0.1 + 0.2 != 0.3 in binary; both products must land in one term.
        let p = &a * &b;
        assert_eq!(p.terms().len(), 3);
        assert_eq!(p.terms()[1].poly.coeffs(), &[2.0]);
    }

    #[test]
    fn derivative_examples() {
        let s2 = Quasipolynomial::from_terms(&[(0.0, &[0.0, 0.0, 1.0])]);
        assert_eq!(s2.derivative().terms()[0].poly.coeffs(), &[0.0, 2.0]);

        let e = Quasipolynomial::from_terms(&[(1.0, &[1.0])]);
        let de = e.derivative();
        assert_eq!(de.terms()[0].delay, 1.0);
        assert_eq!(de.terms()[0].poly.coeffs(), &[-1.0]);

        let se = Quasipolynomial::from_terms(&[(1.0, &[0.0, 1.0])]);
        assert_eq!(se.derivative().terms()[0].poly.coeffs(), &[1.0, -1.0]);
    }

    #[test]
    fn rejects_negative_delay() {
        let err = Quasipolynomial::new(vec![(-0.1, Polynomial::constant(1.0))]).unwrap_err();
        assert_eq!(err, AlgebraError::NegativeDelay(-0.1));
        assert!(Quasipolynomial::new(vec![(0.0, Polynomial::constant(f64::NAN))]).is_err());
    }

    #[test]
    fn eval_with_derivative_agrees_with_derivative() {
        let qp = Quasipolynomial::from_terms(&[
            (0.0, &[-3.0, 1.0]),
            (1.0, &[0.0, -0.5]),
            (1.5, &[-2.0]),
        ]);
        let s = c(0.4, 2.3);
        let (v, d) = qp.eval_with_derivative(s);
        assert!((v - qp.eval(s)).norm() < 1e-13);
        assert!((d - qp.derivative().eval(s)).norm() < 1e-13);
    }
}
