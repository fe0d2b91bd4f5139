//! Root location for quasipolynomials inside a rectangle of the complex plane.
//!
//! [`find_roots`] follows the mapping-based recipe: sample the function on a
//! grid, trace the zero-level contours of its real and imaginary parts with
//! marching squares, seed at the contour crossings and polish each seed with
//! Newton's method. [`count_roots_argument_principle`] counts roots by the
//! winding number along the rectangle boundary and shares no code with the
//! contour path, so the two can check each other.

mod contour;

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::factorization::{assemble_sensitivity, CoprimeFactorization, FirDelayParameter};
use crate::quasipoly::Quasipolynomial;
use contour::{cell_segments, intersect, near_miss, Cell};

/// Grids larger than this are coarsened (with a warning) to bound memory.
pub const MAX_GRID_NODES: usize = 2_000_000;

/// Default distance under which a pole and a zero are reported as coincident.
pub const COINCIDENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumError {
    InvalidRegion(String),
    ZeroFunction,
    /// The boundary passes through (or numerically at) a root.
    BoundaryRoot { s: Complex64 },
}

impl fmt::Display for SpectrumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumError::InvalidRegion(msg) => write!(f, "invalid region: {msg}"),
            SpectrumError::ZeroFunction => write!(f, "quasipolynomial is identically zero"),
            SpectrumError::BoundaryRoot { s } => {
                write!(f, "root on the region boundary near {}{:+}j", s.re, s.im)
            }
        }
    }
}

impl std::error::Error for SpectrumError {}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumWarning {
    /// More than one polished root landed in one grid cell; halve `grid_step`.
    GridTooCoarse { cell_centre: Complex64, roots: usize },
    /// Newton only converged linearly here; the root is likely multiple.
    MultipleRoot { s: Complex64 },
    /// The requested step would exceed [`MAX_GRID_NODES`]; a coarser one was used.
    StepEnlarged { requested: f64, used: f64 },
    /// Located-root count disagrees with the argument-principle count.
    CountMismatch { located: usize, winding: i64 },
}

impl fmt::Display for SpectrumWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumWarning::GridTooCoarse { cell_centre, roots } => write!(
                f,
                "grid too coarse: {roots} roots share the cell at {:.6}{:+.6}j; halve grid_step",
                cell_centre.re, cell_centre.im
            ),
            SpectrumWarning::MultipleRoot { s } => {
                write!(f, "root near {:.6}{:+.6}j looks multiple", s.re, s.im)
            }
            SpectrumWarning::StepEnlarged { requested, used } => {
                write!(f, "grid step enlarged from {requested} to {used}")
            }
            SpectrumWarning::CountMismatch { located, winding } => write!(
                f,
                "located {located} roots but the argument principle counts {winding}; grid too coarse"
            ),
        }
    }
}

/// Search rectangle and polishing parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// `None` picks [`default_grid_step`] for the function being searched.
    pub grid_step: Option<f64>,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl RegionSpec {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self, SpectrumError> {
        let region = RegionSpec {
            re_min,
            re_max,
            im_min,
            im_max,
            grid_step: None,
            newton_tol: 1e-12,
            max_newton_iters: 50,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.grid_step = Some(step);
        self
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SpectrumError::InvalidRegion("bounds must be finite".into()));
        }
        if !(self.re_min < self.re_max) {
            return Err(SpectrumError::InvalidRegion("re_min must be < re_max".into()));
        }
        if !(self.im_min <= self.im_max) {
            return Err(SpectrumError::InvalidRegion("im_min must be <= im_max".into()));
        }
        if let Some(h) = self.grid_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(SpectrumError::InvalidRegion("grid_step must be positive".into()));
            }
        }
        if !(self.newton_tol > 0.0) {
            return Err(SpectrumError::InvalidRegion("newton_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.contains_with_margin(s, 0.0)
    }

    pub fn contains_with_margin(&self, s: Complex64, margin: f64) -> bool {
        s.re >= self.re_min - margin
            && s.re <= self.re_max + margin
            && s.im >= self.im_min - margin
            && s.im <= self.im_max + margin
    }

    fn step_for(&self, qp: &Quasipolynomial) -> f64 {
        self.grid_step.unwrap_or_else(|| default_grid_step(qp))
    }
}

/// `min(0.1, π/(8·(1+θ_max)))`: at least 16 samples per oscillation of the
/// slowest-decaying exponential along the imaginary axis.
pub fn default_grid_step(qp: &Quasipolynomial) -> f64 {
    (PI / (8.0 * (1.0 + qp.max_delay()))).min(0.1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub s: Complex64,
    /// `|qp(s)|` at the polished location.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Root>,
    pub region: RegionSpec,
    /// Grid step actually used.
    pub grid_step: f64,
    /// Acceptance threshold applied to residuals.
    pub residual_bound: f64,
    pub warnings: Vec<SpectrumWarning>,
}

impl RootSet {
    fn empty(region: &RegionSpec, grid_step: f64) -> Self {
        RootSet {
            roots: Vec::new(),
            region: region.clone(),
            grid_step,
            residual_bound: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Roots strictly inside the un-inflated region.
    pub fn inside(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| self.region.contains(r.s))
    }

    pub fn count_inside(&self) -> usize {
        self.inside().count()
    }

    pub fn nearest(&self, target: Complex64) -> Option<&Root> {
        self.roots
            .iter()
            .min_by(|a, b| (a.s - target).norm().total_cmp(&(b.s - target).norm()))
    }

    pub fn has_grid_warning(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, SpectrumWarning::GridTooCoarse { .. } | SpectrumWarning::CountMismatch { .. }))
    }
}

struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<Complex64>,
}

impl Grid {
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.xs.len() + i]
    }
}

/// Node coordinates covering `[lo − h, hi + h]` with spacing close to `h`,
/// aligned so that `lo` and `hi` are nodes.
fn axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let cells = ((hi - lo) / h).ceil().max(1.0) as usize;
    let dh = (hi - lo) / cells as f64;
    (0..cells + 3)
        .map(|k| lo + (k as f64 - 1.0) * dh)
        .collect()
}

fn evaluate_grid(qp: &Quasipolynomial, xs: Vec<f64>, ys: Vec<f64>) -> Grid {
    let nx = xs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); nx * ys.len()];
    for term in qp.terms() {
        let ex: Vec<f64> = xs.iter().map(|x| (-x * term.delay).exp()).collect();
        for (j, &y) in ys.iter().enumerate() {
            let ey = Complex64::from_polar(1.0, -y * term.delay);
            let row = &mut values[j * nx..(j + 1) * nx];
            for (i, &x) in xs.iter().enumerate() {
                let s = Complex64::new(x, y);
                row[i] += term.poly.eval(s) * ey * ex[i];
            }
        }
    }
    Grid { xs, ys, values }
}

/// Locate the roots of `qp` inside `region`.
pub fn find_roots(qp: &Quasipolynomial, region: &RegionSpec) -> Result<RootSet, SpectrumError> {
    region.validate()?;
    if qp.is_zero() {
        return Err(SpectrumError::ZeroFunction);
    }
    let requested = region.step_for(qp);
    if region.im_min == region.im_max {
        return Ok(RootSet::empty(region, requested));
    }

    let mut warnings = Vec::new();
    let width = region.re_max - region.re_min;
    let height = region.im_max - region.im_min;
    let nodes = |h: f64| ((width / h).ceil() + 3.0) * ((height / h).ceil() + 3.0);
    let mut step = requested;
    if nodes(step) > MAX_GRID_NODES as f64 {
        step = (width * height / MAX_GRID_NODES as f64).sqrt() * 1.05;
        while nodes(step) > MAX_GRID_NODES as f64 {
            step *= 1.05;
        }
        warnings.push(SpectrumWarning::StepEnlarged {
            requested,
            used: step,
        });
    }

    let grid = evaluate_grid(
        qp,
        axis(region.re_min, region.re_max, step),
        axis(region.im_min, region.im_max, step),
    );
    let grid_max = grid.values.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    let residual_bound = region.newton_tol * (1.0 + grid_max);
    let margin = step;

    let seeds = contour_seeds(&grid);
    let derivative = qp.derivative();
    let mut found: Vec<(Complex64, bool)> = seeds
        .into_iter()
        .filter_map(|seed| polish(qp, &derivative, seed, region, margin))
        .filter(|(s, _)| qp.eval(*s).norm() <= residual_bound)
        .collect();

    found.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    let mut roots: Vec<Root> = Vec::new();
    let mut multiple = Vec::new();
    for (s, linear) in found {
        let dedup = 1e-7 * s.norm().max(1.0);
        if roots.iter().any(|r| (r.s - s).norm() <= dedup) {
            continue;
        }
        if linear {
            multiple.push(s);
        }
        roots.push(Root {
            s,
            residual: qp.eval(s).norm(),
        });
    }
    warnings.extend(multiple.into_iter().map(|s| SpectrumWarning::MultipleRoot { s }));

    // Crowded cells.
    let x0 = grid.xs[0];
    let y0 = grid.ys[0];
    let dx = grid.xs[1] - grid.xs[0];
    let dy = grid.ys[1] - grid.ys[0];
    let mut cells: Vec<(i64, i64)> = roots
        .iter()
        .map(|r| (((r.s.re - x0) / dx).floor() as i64, ((r.s.im - y0) / dy).floor() as i64))
        .collect();
    cells.sort_unstable();
    let mut k = 0;
    while k < cells.len() {
        let run = cells[k..].iter().take_while(|c| **c == cells[k]).count();
        if run > 1 {
            let (ci, cj) = cells[k];
            warnings.push(SpectrumWarning::GridTooCoarse {
                cell_centre: Complex64::new(x0 + (ci as f64 + 0.5) * dx, y0 + (cj as f64 + 0.5) * dy),
                roots: run,
            });
        }
        k += run;
    }

    Ok(RootSet {
        roots,
        region: region.clone(),
        grid_step: step,
        residual_bound,
        warnings,
    })
}

fn contour_seeds(grid: &Grid) -> Vec<Complex64> {
    let mut seeds = Vec::new();
    for j in 0..grid.ys.len() - 1 {
        for i in 0..grid.xs.len() - 1 {
            let corners = [
                grid.at(i, j),
                grid.at(i + 1, j),
                grid.at(i + 1, j + 1),
                grid.at(i, j + 1),
            ];
            let cell = Cell {
                x0: grid.xs[i],
                x1: grid.xs[i + 1],
                y0: grid.ys[j],
                y1: grid.ys[j + 1],
            };
            let re = cell_segments(&cell, corners.map(|v| v.re));
            if re.is_empty() {
                continue;
            }
            let im = cell_segments(&cell, corners.map(|v| v.im));
            for a in &re {
                for b in &im {
                    let p = intersect(a, b, 0.1).unwrap_or_else(|| near_miss(a, b));
                    seeds.push(Complex64::new(p.x, p.y));
                }
            }
        }
    }
    seeds
}

/// Newton polish; falls back to Newton on `f/f′` when convergence is only
/// linear (multiple roots). Returns the root and whether the fallback was used.
fn polish(
    qp: &Quasipolynomial,
    derivative: &Quasipolynomial,
    seed: Complex64,
    region: &RegionSpec,
    margin: f64,
) -> Option<(Complex64, bool)> {
    let at_noise = |s: Complex64, f: Complex64| f.norm() <= 8.0 * f64::EPSILON * qp.magnitude_scale(s);
    let small_step = |s: Complex64, step: Complex64| step.norm() <= 1e-13 * s.norm().max(1.0);

    let mut s = seed;
    for _ in 0..region.max_newton_iters {
        let (f, fp) = qp.eval_with_derivative(s);
        if at_noise(s, f) {
            return Some((s, false));
        }
        if fp.norm() == 0.0 || !fp.is_finite() {
            return None;
        }
        let step = f / fp;
        s -= step;
        if !s.is_finite() || !region.contains_with_margin(s, margin) {
            return None;
        }
        if small_step(s, step) {
            return Some((s, false));
        }
    }

    // Modified Newton: iterate on u = f/f′, whose roots are all simple.
    for _ in 0..region.max_newton_iters {
        let (f, fp) = qp.eval_with_derivative(s);
        if at_noise(s, f) {
            return Some((s, true));
        }
        let (_, fpp) = derivative.eval_with_derivative(s);
        let denom = fp * fp - f * fpp;
        if denom.norm() == 0.0 || !denom.is_finite() {
            return None;
        }
        let step = f * fp / denom;
        s -= step;
        if !s.is_finite() || !region.contains_with_margin(s, margin) {
            return None;
        }
        if small_step(s, step) {
            return Some((s, true));
        }
    }
    None
}

/// Winding number of `qp` along the counter-clockwise boundary of `region`.
///
/// Each edge is sampled at `boundary_samples` points; any step whose phase
/// change exceeds π/4 is bisected until it does not.
pub fn count_roots_argument_principle(
    qp: &Quasipolynomial,
    region: &RegionSpec,
    boundary_samples: usize,
) -> Result<i64, SpectrumError> {
    region.validate()?;
    if qp.is_zero() {
        return Err(SpectrumError::ZeroFunction);
    }
    if region.im_min == region.im_max {
        return Ok(0);
    }
    let n = boundary_samples.max(4);
    let corners = [
        Complex64::new(region.re_min, region.im_min),
        Complex64::new(region.re_max, region.im_min),
        Complex64::new(region.re_max, region.im_max),
        Complex64::new(region.re_min, region.im_max),
    ];
    let mut path = Vec::with_capacity(4 * n);
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        for i in 0..n {
            path.push(a + (b - a) * (i as f64 / n as f64));
        }
    }
    let values: Vec<Complex64> = path.iter().map(|&z| qp.eval(z)).collect();
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    let (imin, min) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bm), (i, v)| if v.norm() < bm { (i, v.norm()) } else { (bi, bm) });
    if !(min > 1e-8 * max) {
        return Err(SpectrumError::BoundaryRoot { s: path[imin] });
    }

    let mut total = 0.0;
    for k in 0..path.len() {
        let next = (k + 1) % path.len();
        total += phase_change(qp, path[k], values[k], path[next], values[next], 24)
            .ok_or(SpectrumError::BoundaryRoot { s: path[k] })?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn phase_change(
    qp: &Quasipolynomial,
    za: Complex64,
    fa: Complex64,
    zb: Complex64,
    fb: Complex64,
    depth: u32,
) -> Option<f64> {
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 || depth == 0 {
        return Some(d);
    }
    let zm = 0.5 * (za + zb);
    let fm = qp.eval(zm);
    if fm.norm() == 0.0 {
        return None;
    }
    Some(phase_change(qp, za, fa, zm, fm, depth - 1)? + phase_change(qp, zm, fm, zb, fb, depth - 1)?)
}

/// Cross-checks a [`RootSet`] against the winding number; on disagreement a
/// [`SpectrumWarning::CountMismatch`] is appended and `false` returned.
pub fn check_completeness(
    qp: &Quasipolynomial,
    roots: &mut RootSet,
    boundary_samples: usize,
) -> Result<bool, SpectrumError> {
    let winding = count_roots_argument_principle(qp, &roots.region, boundary_samples)?;
    let located = roots.count_inside();
    if winding == located as i64 {
        Ok(true)
    } else {
        roots
            .warnings
            .push(SpectrumWarning::CountMismatch { located, winding });
        Ok(false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootKind {
    Zero,
    Pole,
}

impl RootKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RootKind::Zero => "zero",
            RootKind::Pole => "pole",
        }
    }
}

/// Sensitivity zeros and poles in one region.
#[derive(Clone, Debug)]
pub struct SensitivitySpectrum {
    pub zeros: RootSet,
    pub poles: RootSet,
    /// Pole/zero pairs closer than [`COINCIDENT_TOL`]; reported at the zero.
    pub coincident: Vec<Complex64>,
}

impl SensitivitySpectrum {
    pub fn is_coincident(&self, s: Complex64) -> bool {
        let tol = COINCIDENT_TOL * s.norm().max(1.0);
        self.coincident.iter().any(|c| (c - s).norm() <= tol)
    }
}

/// Zeros (roots of the numerator) and poles (roots of the denominator) of the
/// sensitivity assembled from the given factorizations and parameter.
pub fn sensitivity_spectrum(
    plant: &CoprimeFactorization,
    ctrl: &CoprimeFactorization,
    qm: &FirDelayParameter,
    region: &RegionSpec,
) -> Result<SensitivitySpectrum, crate::Error> {
    let s = assemble_sensitivity(plant, ctrl, qm)?;
    let zeros = if s.num().is_zero() {
        RootSet::empty(region, region.step_for(s.den()))
    } else {
        find_roots(s.num(), region)?
    };
    let poles = find_roots(s.den(), region)?;
    let mut coincident = Vec::new();
    for z in &zeros.roots {
        let tol = COINCIDENT_TOL * z.s.norm().max(1.0);
        if poles.roots.iter().any(|p| (p.s - z.s).norm() <= tol) {
            coincident.push(z.s);
        }
    }
    Ok(SensitivitySpectrum {
        zeros,
        poles,
        coincident,
    })
}

/// Writes `re,im,residual,kind` rows with 17 significant digits.
pub fn write_roots_csv<W: Write + ?Sized>(out: &mut W, roots: &[(Root, RootKind)]) -> io::Result<()> {
    writeln!(out, "re,im,residual,kind")?;
    for (r, kind) in roots {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{}",
            r.s.re,
            r.s.im,
            r.residual,
            kind.as_str()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qp(terms: &[(f64, &[f64])]) -> Quasipolynomial {
        Quasipolynomial::from_terms(terms)
    }

    #[test]
    fn default_step_follows_largest_delay() {
        assert_eq!(default_grid_step(&qp(&[(0.0, &[1.0, 1.0])])), 0.1);
        let d = default_grid_step(&qp(&[(0.0, &[1.0]), (3.0, &[1.0])]));
        assert!((d - PI / 32.0).abs() < 1e-15);
    }

    #[test]
    fn unit_circle_pair_upper_half_only() {
        let f = qp(&[(0.0, &[1.0, 0.0, 1.0])]);
        let region = RegionSpec::new(-1.0, 1.0, 0.0, 2.0).unwrap();
        let roots = find_roots(&f, &region).unwrap();
        let inside: Vec<_> = roots.inside().collect();
        assert_eq!(inside.len(), 1);
        assert!((inside[0].s - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn winding_examples() {
        let f = qp(&[(0.0, &[1.0, 0.0, 1.0])]);
        let r = RegionSpec::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        assert_eq!(count_roots_argument_principle(&f, &r, 200).unwrap(), 2);

        let cube = qp(&[(0.0, &[1.0, 3.0, 3.0, 1.0])]);
        let r = RegionSpec::new(-2.0, 0.0, -1.0, 1.0).unwrap();
        assert_eq!(count_roots_argument_principle(&cube, &r, 200).unwrap(), 3);
    }

    #[test]
    fn boundary_root_rejected() {
        let f = qp(&[(0.0, &[1.0, 0.0, 1.0])]);
        let r = RegionSpec::new(-1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            count_roots_argument_principle(&f, &r, 100),
            Err(SpectrumError::BoundaryRoot { .. })
        ));
    }

    #[test]
    fn zero_function_and_bad_region() {
        let r = RegionSpec::new(-1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(
            find_roots(&Quasipolynomial::zero(), &r).unwrap_err(),
            SpectrumError::ZeroFunction
        );
        assert!(RegionSpec::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(RegionSpec::new(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_height_region_is_empty() {
        let r = RegionSpec::new(-1.0, 1.0, 0.0, 0.0).unwrap();
        let roots = find_roots(&qp(&[(0.0, &[1.0, 1.0])]), &r).unwrap();
        assert!(roots.is_empty());
    }

    #[test]
    fn triple_root_found_once_with_warning() {
        let cube = qp(&[(0.0, &[1.0, 3.0, 3.0, 1.0])]);
        let r = RegionSpec::new(-2.0, 0.0, -1.0, 1.0).unwrap().with_step(0.07);
        let roots = find_roots(&cube, &r).unwrap();
        assert!(!roots.is_empty());
        for root in &roots.roots {
            assert!((root.s - c(-1.0, 0.0)).norm() < 1e-4, "{:?}", root.s);
        }
    }

    #[test]
    fn csv_header_and_precision() {
        let mut buf = Vec::new();
        let root = Root {
            s: c(-1.0, 0.5),
            residual: 1e-15,
        };
        write_roots_csv(&mut buf, &[(root, RootKind::Pole)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("re,im,residual,kind\n"));
        assert!(text.contains("-1.0000000000000000e0,5.0000000000000000e-1,"));
        assert!(text.trim_end().ends_with(",pole"));
    }
}
