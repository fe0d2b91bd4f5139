//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints its own PASS/FAIL line.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ykreg::factorization::assemble_sensitivity;
use ykreg::scenario::Scenario;
use ykreg::simulator::{
    realize_dde, simulate_closed_loop, suppression_summary, Connection, Diagram, FourierSignal,
    PreHistory, Source,
};
use ykreg::spectrum::{count_roots_argument_principle, find_roots, sensitivity_spectrum};
use ykreg::synthesis::{build_linear_system, harmonic_frequencies, rhs_targets, solve_gains};
use ykreg::{DelayRational, FirDelayParameter, Polynomial, Quasipolynomial, RegionSpec};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit,
        format!("{what} took {:.3} s, limit {limit} s", elapsed.as_secs_f64()),
    )
}

fn preset(name: &str) -> Result<Scenario, String> {
    Scenario::preset(name).map_err(|e| e.to_string())
}

fn example2_gains() -> Outcome {
    let sc = preset("example2")?;
    let start = Instant::now();
    let d = sc.design().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = [0.0, -21.3792, 13.2131, -13.2131, 21.3792];
    let g = d.qm.gains();
    ensure(g.len() == expected.len(), format!("{} gains", g.len()))?;
    let worst = g
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 5e-4, format!("gains {g:?}, worst deviation {worst:e}"))?;
    within(elapsed, 1.0, "design")?;
    Ok(format!("max deviation {worst:.2e}, {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn regulation_zeros() -> Outcome {
    let mut parts = Vec::new();
    for (name, m) in [("example1", 1), ("example2", 2), ("example3", 8)] {
        let sc = preset(name)?;
        let start = Instant::now();
        let d = sc.design().map_err(|e| e.to_string())?;
        let s = assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, &d.qm)
            .map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for l in 0..=m {
            let w = 2.0 * PI * 4.0 * l as f64;
            let v = s.eval(c(0.0, w)).map(|z| z.norm()).unwrap_or(f64::INFINITY);
            worst = worst.max(v);
        }
        within(start.elapsed(), 1.0, name)?;
        ensure(worst <= 1e-8, format!("{name}: max |S| = {worst:e}"))?;
        parts.push(format!("{name} {worst:.1e}"));
    }
    Ok(parts.join(", "))
}

fn wide_solve() -> Outcome {
    let sc = preset("example3")?;
    let omegas = harmonic_frequencies(&sc.target);
    let targets = rhs_targets(&sc.plant_factors, &sc.controller_factors, &omegas, true)
        .map_err(|e| e.to_string())?;
    let system = build_linear_system(&targets, &omegas, 0.08, 25, true).map_err(|e| e.to_string())?;
    ensure(
        system.a.nrows() == 17 && system.a.ncols() == 26,
        format!("system is {}x{}", system.a.nrows(), system.a.ncols()),
    )?;
    let sol = solve_gains(&system).map_err(|e| e.to_string())?;
    let r = &system.a * nalgebra::DVector::from_vec(sol.gains.clone()) - &system.b;
    let inf = r.amax();
    ensure(inf < 1e-10, format!("residual {inf:e}"))?;
    ensure(sol.rank == 17, format!("rank {}", sol.rank))?;
    Ok(format!("17x26, residual {inf:.1e}, rank {}", sol.rank))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_qp(rng: &mut ChaCha8Rng) -> Quasipolynomial {
    let n = rng.random_range(1..=3usize);
    let mut lead: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    lead.push(1.0);
    let mut terms = vec![(0.0, Polynomial::new(lead))];
    for _ in 0..rng.random_range(1..=2usize) {
        let delay = rng.random_range(0.1..1.5);
        let deg = rng.random_range(0..n);
        let coeffs = (0..=deg).map(|_| rng.random_range(-2.0..2.0)).collect();
        terms.push((delay, Polynomial::new(coeffs)));
    }
    Quasipolynomial::new(terms).expect("finite coefficients")
}

fn root_finder_oracle() -> Outcome {
    let qp = Quasipolynomial::from_terms(&[(0.0, &[-2.0, 1.0]), (1.0, &[-1.0])]);
    let region = RegionSpec::new(0.0, 3.0, -1.0, 1.0).map_err(|e| e.to_string())?.with_step(0.05);
    let roots = find_roots(&qp, &region).map_err(|e| e.to_string())?;
    let inside: Vec<_> = roots.inside().collect();
    ensure(inside.len() == 1, format!("{} roots located", inside.len()))?;
    let oracle = bisect(|x| x - 2.0 - (-x).exp(), 2.0, 2.2);
    let r = inside[0];
    ensure(
        (r.s - c(oracle, 0.0)).norm() <= 1e-4 && (r.s.re - 2.12).abs() <= 1e-4,
        format!("root {} vs oracle {oracle}", r.s),
    )?;
    ensure(r.residual < 1e-10, format!("residual {:e}", r.residual))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let mut total = 0;
    for case in 0..20 {
        let qp = random_qp(&mut rng);
        let region = RegionSpec::new(-2.5, 1.5, -1.3, 12.7).map_err(|e| e.to_string())?;
        let located = find_roots(&qp, &region).map_err(|e| format!("case {case}: {e}"))?;
        let winding = count_roots_argument_principle(&qp, &region, 2048)
            .map_err(|e| format!("case {case}: {e}"))?;
        let n = located.count_inside();
        ensure(
            winding == n as i64,
            format!("case {case} ({qp}): winding {winding}, located {n}"),
        )?;
        total += n;
    }
    Ok(format!("s = {:.6}, 20 random cases agree ({total} roots)", r.s.re))
}

fn closed_loop_window() -> Outcome {
    let qp = Quasipolynomial::from_terms(&[(0.0, &[10.0, 8.0, 1.0]), (1.0, &[0.0, -1.0])]);
    let region = RegionSpec::new(0.0, 5.0, 0.0, 200.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let roots = find_roots(&qp, &region).map_err(|e| e.to_string())?;
    let winding = count_roots_argument_principle(&qp, &region, 4096).map_err(|e| e.to_string())?;
    within(start.elapsed(), 10.0, "search")?;
    ensure(roots.count_inside() == 0, format!("{} roots located", roots.count_inside()))?;
    ensure(winding == 0, format!("winding number {winding}"))?;
    Ok(format!("no roots, winding 0, {:.0} ms", start.elapsed().as_secs_f64() * 1e3))
}

fn harmonic_zero_placement() -> Outcome {
    let mut parts = Vec::new();
    for (name, m) in [("example2", 2usize), ("example3", 8)] {
        let sc = preset(name)?;
        let d = sc.design().map_err(|e| e.to_string())?;
        let spec = sensitivity_spectrum(&sc.plant_factors, &sc.controller_factors, &d.qm, &sc.region)
            .map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for l in 1..=m {
            let target = c(0.0, 2.0 * PI * 4.0 * l as f64);
            let dist = spec
                .zeros
                .nearest(target)
                .map(|r| (r.s - target).norm())
                .unwrap_or(f64::INFINITY);
            ensure(dist <= 1e-6, format!("{name}: no zero within 1e-6 of j{}", target.im))?;
            worst = worst.max(dist);
        }
        parts.push(format!("{name} {m} zeros, max offset {worst:.1e}"));
    }
    Ok(parts.join(", "))
}

fn delayed_decay(h: f64, t_end: f64) -> Result<Vec<f64>, String> {
    let g = DelayRational::new(
        Quasipolynomial::one(),
        Quasipolynomial::from_terms(&[(0.0, &[0.0, 1.0]), (1.0, &[1.0])]),
    )
    .ok_or("zero denominator")?;
    let mut d = Diagram::new();
    let b = d.add_block("g", realize_dde(&g).map_err(|e| e.to_string())?, PreHistory { value: 1.0 });
    d.add_probe("y", vec![Connection::new(Source::Block(b), 1.0)]);
    let run = d.simulate(h, t_end).map_err(|e| e.to_string())?;
    Ok(run.probe("y").ok_or("missing probe")?.to_vec())
}

/// Piecewise solution of `y' = −y(t−1)` with unit history, up to `t = 4`.
fn method_of_steps(t: f64) -> f64 {
    if t <= 1.0 {
        1.0 - t
    } else if t <= 2.0 {
        -(2.0 * t - t * t / 2.0) + 1.5
    } else if t <= 3.0 {
        let u = t - 2.0;
        -0.5 + u * u / 2.0 - u * u * u / 6.0
    } else {
        let v = t - 3.0;
        -1.0 / 6.0 + v / 2.0 - v * v * v / 6.0 + v.powi(4) / 24.0
    }
}

fn dde_oracle() -> Outcome {
    let coarse = delayed_decay(1e-3, 4.0)?;
    let fine = delayed_decay(5e-4, 4.0)?;
    let y2 = coarse[2000];
    ensure((y2 + 0.5).abs() <= 1e-6, format!("y(2) = {y2}"))?;
    let e_coarse = (coarse[4000] - method_of_steps(4.0)).abs();
    let e_fine = (fine[8000] - method_of_steps(4.0)).abs();
    let ratio = e_coarse / e_fine;
    ensure(ratio >= 3.0, format!("error ratio {ratio:.2} ({e_coarse:e} -> {e_fine:e})"))?;
    Ok(format!("y(2) = {y2:.9}, error ratio at t=4 {ratio:.2}"))
}

fn suppression() -> Outcome {
    let mut parts = Vec::new();
    for name in ["example1", "example2", "example3"] {
        let sc = preset(name)?;
        let d = sc.design().map_err(|e| e.to_string())?;
        let sim = sc.sim_scenario(d.qm);
        let start = Instant::now();
        let ts = simulate_closed_loop(&sim).map_err(|e| e.to_string())?;
        within(start.elapsed(), 30.0, name)?;
        let window = 2.0 * sim.disturbance.period;
        ensure(
            sim.t_end - window >= sim.t_augmentation_on + 5.0,
            format!("{name}: final window starts less than 5 s after activation"),
        )?;
        let peak = sim.disturbance.peak();
        let sum = suppression_summary(&ts, sim.t_augmentation_on, window);
        ensure(
            sum.before > 0.1 * peak && sum.after < 1e-2 * peak,
            format!("{name}: before {:.3e}, after {:.3e}, peak {peak}", sum.before, sum.after),
        )?;
        parts.push(format!("{name} {:.2e}/{peak}", sum.after));
    }
    Ok(format!("after/peak: {}", parts.join(", ")))
}

fn frequency_fidelity() -> Outcome {
    let sc = preset("example1")?;
    let d = sc.design().map_err(|e| e.to_string())?;
    let s = assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, &d.qm)
        .map_err(|e| e.to_string())?;
    let f = 2.0;
    let w = 2.0 * PI * f;
    let expected = s.eval(c(0.0, w)).map_err(|e| e.to_string())?.norm();

    let mut sim = sc.sim_scenario(d.qm);
    sim.disturbance = FourierSignal::unit_harmonics(1.0 / f, 1);
    sim.reference = FourierSignal::zero();
    sim.t_disturbance_on = 0.0;
    sim.t_augmentation_on = 0.0;
    sim.initial_output = 0.0;
    sim.t_end = 30.0;
    let ts = simulate_closed_loop(&sim).map_err(|e| e.to_string())?;

    // Least-squares fit of y over the last ten periods.
    let t0 = sim.t_end - 10.0 / f;
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, y) in ts.t.iter().zip(&ts.y).filter(|(t, _)| **t >= t0) {
        let (cw, sw) = ((w * t).cos(), (w * t).sin());
        cc += cw * cw;
        ss += sw * sw;
        cs += cw * sw;
        yc += y * cw;
        ys += y * sw;
    }
    let det = cc * ss - cs * cs;
    let a = (yc * ss - ys * cs) / det;
    let b = (ys * cc - yc * cs) / det;
    let measured = a.hypot(b);
    let rel = (measured - expected).abs() / expected;
    ensure(rel <= 0.01, format!("simulated {measured:.6}, |S(j{w:.3})| = {expected:.6}"))?;
    Ok(format!("simulated {measured:.6} vs |S| {expected:.6} ({:.3}%)", rel * 100.0))
}

fn affinity() -> Outcome {
    let sc = preset("example2")?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut gains = || (0..5).map(|_| rng.random_range(-20.0..20.0)).collect::<Vec<f64>>();
    let q1 = FirDelayParameter::new(0.05, gains()).map_err(|e| e.to_string())?;
    let q2 = FirDelayParameter::new(0.05, gains()).map_err(|e| e.to_string())?;
    let alpha = 0.3;
    let q = q1.combine(alpha, &q2, 1.0 - alpha).ok_or("incompatible parameters")?;
    let sens = |q: &FirDelayParameter| {
        assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, q).map_err(|e| e.to_string())
    };
    let (s, s1, s2) = (sens(&q)?, sens(&q1)?, sens(&q2)?);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let z = c(0.0, rng.random_range(0.01..200.0));
        let ev = |f: &DelayRational| f.eval(z).map_err(|e| e.to_string());
        let lhs = ev(&s)?;
        let rhs = alpha * ev(&s1)? + (1.0 - alpha) * ev(&s2)?;
        let rel = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300);
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-9, format!("max relative deviation {worst:e}"))?;
    Ok(format!("20 frequencies, max relative deviation {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("example 2 gains", example2_gains),
        ("regulation zeros", regulation_zeros),
        ("example 3 wide solve", wide_solve),
        ("root finder oracle", root_finder_oracle),
        ("closed-loop stability window", closed_loop_window),
        ("harmonic zero placement", harmonic_zero_placement),
        ("DDE integrator oracle", dde_oracle),
        ("end-to-end suppression", suppression),
        ("frequency response fidelity", frequency_fidelity),
        ("sensitivity affinity", affinity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
