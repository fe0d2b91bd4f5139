use crate::quasipoly::DelayRational;

use super::SimulationError;

/// One `coeff · z^{(order)}(t − delay)` term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealizationTerm {
    pub delay: f64,
    pub order: usize,
    pub coeff: f64,
}

/// Scalar delay-differential realization of `num(s)/den(s)`.
///
/// An internal signal `z` obeys `den(D) z = u`, solved for its highest
/// undelayed derivative:
///
/// ```text
/// z^{(n)}(t) = input_gain · u(t) + Σ coeff · z^{(order)}(t − delay)     (recurrence)
/// y(t)       = Σ coeff · z^{(order)}(t − delay)                          (output)
/// ```
///
/// Recurrence terms with `order = n` and positive delay are the neutral terms.
/// When `num = 1` the output is `z` itself and the recurrence reads directly as
/// the input-output equation, e.g. `y' = 2y + y(t−1) + u` for `1/(s − 2 − e^{−s})`.
#[derive(Clone, Debug, PartialEq)]
pub struct DdeRealization {
    pub order: usize,
    pub recurrence: Vec<RealizationTerm>,
    pub output: Vec<RealizationTerm>,
    pub input_gain: f64,
    /// Instantaneous `∂y/∂u`; nonzero iff the undelayed numerator reaches order `n`.
    pub feedthrough: f64,
}

impl DdeRealization {
    /// Largest delay appearing anywhere in the realization.
    pub fn max_delay(&self) -> f64 {
        self.recurrence
            .iter()
            .chain(&self.output)
            .map(|t| t.delay)
            .fold(0.0, f64::max)
    }

    /// `true` when some recurrence term reads a delayed `z^{(n)}`.
    pub fn is_neutral(&self) -> bool {
        self.recurrence
            .iter()
            .any(|t| t.order == self.order && t.delay > 0.0)
    }
}

pub fn realize_dde(block: &DelayRational) -> Result<DdeRealization, SimulationError> {
    let den = block.den();
    let lead_poly = den.zero_delay_poly().ok_or_else(|| {
        SimulationError::NotRealizable("denominator has no undelayed term".into())
    })?;
    let n = lead_poly.degree().unwrap_or(0);
    let lead = lead_poly.leading();
    for term in den.terms() {
        if term.poly.degree().unwrap_or(0) > n {
            return Err(SimulationError::NotRealizable(format!(
                "denominator term with delay {} has degree above {n} (advanced type)",
                term.delay
            )));
        }
    }
    for term in block.num().terms() {
        if term.poly.degree().unwrap_or(0) > n {
            return Err(SimulationError::NotRealizable(format!(
                "numerator term with delay {} has degree above {n} (improper)",
                term.delay
            )));
        }
    }

    let mut recurrence = Vec::new();
    for term in den.terms() {
        for (k, &q) in term.poly.coeffs().iter().enumerate() {
            if q == 0.0 || (term.delay == 0.0 && k == n) {
                continue;
            }
            recurrence.push(RealizationTerm {
                delay: term.delay,
                order: k,
                coeff: -q / lead,
            });
        }
    }
    let mut output = Vec::new();
    let mut direct = 0.0;
    for term in block.num().terms() {
        for (k, &p) in term.poly.coeffs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if term.delay == 0.0 && k == n {
                direct = p;
            }
            output.push(RealizationTerm {
                delay: term.delay,
                order: k,
                coeff: p,
            });
        }
    }
    Ok(DdeRealization {
        order: n,
        recurrence,
        output,
        input_gain: 1.0 / lead,
        feedthrough: direct / lead,
    })
}
