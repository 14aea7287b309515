//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! terminal under `cargo test`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use npc_major::barycenter::{self, DiscreteMeasure, SolverOptions};
use npc_major::geometry::{Point, Space};
use npc_major::inequalities::{self, CheckReport, FuzzOptions, Suite};
use npc_major::linalg::SymMatrix;
use npc_major::sampling;
use npc_major::stochastic;
use npc_major::wasserstein::{self, PointCloud};
use rand::Rng;

const TOL: f64 = 1e-8;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn core_spaces() -> Vec<Space> {
    vec![
        Space::euclidean(2).unwrap(),
        Space::HalfPlane,
        Space::spd(2).unwrap(),
        Space::product(vec![Space::euclidean(1).unwrap(), Space::HalfPlane]).unwrap(),
    ]
}

fn fuzz(space: &Space, suites: &[Suite], trials: u64, seed: u64, tweak: impl FnOnce(&mut FuzzOptions)) -> Vec<CheckReport> {
    let mut opts = FuzzOptions::only(suites);
    tweak(&mut opts);
    inequalities::fuzz_suite(space, seed, trials, TOL, &opts).expect("fuzz run")
}

/// Pass iff every report is violation-free and nothing was skipped.
fn all_green(reports: &[CheckReport]) -> (bool, String) {
    let checks: u64 = reports.iter().map(|r| r.trials).sum();
    let bad: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{}@{} ({} violations, seeds {:?})", r.name(), r.space, r.violations, r.instances))
        .collect();
    let skipped: u64 = reports.iter().filter(|r| r.check != "entropy_product").map(|r| r.skipped).sum();
    let worst = reports.iter().filter_map(|r| r.worst_slack.map(|w| w / r.tol)).fold(f64::NEG_INFINITY, f64::max);
    if bad.is_empty() && skipped == 0 {
        (true, format!("{checks} checks, worst slack/tol {worst:.2e}"))
    } else {
        (false, format!("failures: {}; unexpected skips: {skipped}", bad.join(", ")))
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    match limit {
        Some(l) if elapsed > l => Verdict::new(false, format!("{} (took {elapsed:.1?}, limit {l:?})", v.detail)),
        _ => Verdict::new(v.passed, format!("{} in {elapsed:.1?}", v.detail)),
    }
}

fn npc_axioms() -> Verdict {
    let mut reports = Vec::new();
    for s in core_spaces() {
        reports.extend(fuzz(&s, &[Suite::Npc], 500, 1, |_| {}));
    }
    let (ok, detail) = all_green(&reports);
    Verdict::new(ok, detail)
}

/// 2×2 SPD square root, `(M + √det·I)/√(tr + 2√det)`.
fn sqrt2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let s = det.sqrt();
    let t = (m[0][0] + m[1][1] + 2.0 * s).sqrt();
    [[(m[0][0] + s) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + s) / t]]
}

fn inv2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn as2(p: &Point) -> [[f64; 2]; 2] {
    let Point::Spd(m) = p else { panic!("not an SPD point") };
    [[m.get(0, 0), m.get(0, 1)], [m.get(1, 0), m.get(1, 1)]]
}

/// `A^{1/2}(A^{-1/2}BA^{-1/2})^{1/2}A^{1/2}` with closed-form 2×2 roots.
fn geometric_mean_oracle(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let ah = sqrt2(a);
    let aih = inv2(&ah);
    let inner = mul2(&mul2(&aih, b), &aih);
    mul2(&mul2(&ah, &sqrt2(&inner)), &ah)
}

fn half_plane_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let num = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    (1.0 + num / (2.0 * a.1 * b.1)).acosh()
}

/// Minimizes `J(i·e^s)` over `s` by golden-section search; valid when the
/// instance is symmetric about the imaginary axis.
fn golden_section_height(atoms: &[(f64, f64)], weights: &[f64]) -> f64 {
    let j = |s: f64| -> f64 {
        let z = (0.0, s.exp());
        atoms.iter().zip(weights).map(|(a, w)| 0.5 * w * half_plane_distance(z, *a).powi(2)).sum()
    };
    let lo_h = atoms.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    let hi_h = atoms.iter().map(|a| a.1).fold(0.0, f64::max);
    let (mut a, mut b) = (lo_h.ln() - 3.0, hi_h.ln() + 3.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while b - a > 1e-13 {
        if j(c) < j(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    (0.5 * (a + b)).exp()
}

fn barycenter_oracles() -> Verdict {
    let mut rng = sampling::trial_rng(2, 0);
    let mut worst_e = 0.0_f64;
    let e3 = Space::euclidean(3).unwrap();
    let forced = SolverOptions {
        tol: 1e-12,
        force_iterative: true,
        ..SolverOptions::default()
    };
    for _ in 0..100 {
        let k = rng.random_range(2..=5);
        let atoms: Vec<Point> = (0..k).map(|_| sampling::random_point(&e3, &mut rng)).collect();
        let w = sampling::random_probability(k, &mut rng);
        let mut mean = [0.0; 3];
        for (p, wi) in atoms.iter().zip(&w) {
            let Point::Euclidean(v) = p else { unreachable!() };
            for c in 0..3 {
                mean[c] += wi * v[c];
            }
        }
        let refs: Vec<&Point> = atoms.iter().collect();
        let scale = barycenter::pairwise_scale(&e3, &refs).unwrap();
        let m = DiscreteMeasure::new(&e3, atoms, w).unwrap();
        let r = barycenter::barycenter_with(&e3, &m, forced).unwrap();
        let err = e3.distance(&r.point, &Point::euclidean(&mean)).unwrap() / scale;
        worst_e = worst_e.max(err);
    }

    let s2 = Space::spd(2).unwrap();
    let mut worst_spd = 0.0_f64;
    let mut pairs = vec![(Point::spd_diag(&[1.0, 1.0]), Point::spd_diag(&[4.0, 4.0]))];
    for _ in 0..100 {
        pairs.push((sampling::random_point(&s2, &mut rng), sampling::random_point(&s2, &mut rng)));
    }
    for (a, b) in &pairs {
        let expect = geometric_mean_oracle(&as2(a), &as2(b));
        let m = DiscreteMeasure::new(&s2, vec![a.clone(), b.clone()], vec![0.5, 0.5]).unwrap();
        for opts in [SolverOptions::with_tol(1e-12), forced] {
            let got = as2(&barycenter::barycenter_with(&s2, &m, opts).unwrap().point);
            for i in 0..2 {
                for j in 0..2 {
                    worst_spd = worst_spd.max((got[i][j] - expect[i][j]).abs());
                }
            }
        }
    }
    let commuting = barycenter::barycenter(
        &s2,
        &DiscreteMeasure::new(&s2, vec![pairs[0].0.clone(), pairs[0].1.clone()], vec![0.5, 0.5]).unwrap(),
        1e-12,
        10_000,
    )
    .unwrap();
    let Point::Spd(c) = &commuting.point else { unreachable!() };
    let commuting_ok = c.max_abs_diff(&SymMatrix::diag(&[2.0, 2.0])) <= 1e-8;

    let h = Space::HalfPlane;
    let mut worst_h = 0.0_f64;
    for _ in 0..50 {
        let a = rng.random_range(0.1..2.0);
        let b = rng.random_range(0.2..3.0);
        let c = rng.random_range(0.2..3.0);
        let w = rng.random_range(0.05..0.45);
        let atoms = [(-a, b), (a, b), (0.0, c)];
        let weights = [w, w, 1.0 - 2.0 * w];
        let t = golden_section_height(&atoms, &weights);
        let pts: Vec<Point> = atoms.iter().map(|&(x, y)| Point::half_plane(x, y)).collect();
        let m = DiscreteMeasure::new(&h, pts, weights.to_vec()).unwrap();
        let r = barycenter::barycenter(&h, &m, 1e-12, 10_000).unwrap();
        let Point::HalfPlane { re, im } = r.point else { unreachable!() };
        worst_h = worst_h.max(half_plane_distance((re, im), (0.0, t)));
    }
    let ok = worst_e <= 1e-10 && worst_spd <= 1e-8 && commuting_ok && worst_h <= 1e-6;
    Verdict::new(
        ok,
        format!(
            "euclidean {worst_e:.1e}·scale, spd {worst_spd:.1e}, diag(1,1)/diag(4,4)→2I {commuting_ok}, half-plane {worst_h:.1e}"
        ),
    )
}

fn line_points(v: &[f64]) -> Vec<Point> {
    v.iter().map(|&x| Point::euclidean(&[x])).collect()
}

fn hlp_consistency() -> Verdict {
    let mut rng = sampling::trial_rng(3, 0);
    let (mut agree, mut feasible) = (0, 0);
    let mut disagreements = Vec::new();
    for trial in 0..500 {
        let n = rng.random_range(2..=5);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
        let x: Vec<f64> = match trial % 3 {
            0 => {
                let (d, _) = sampling::random_doubly_stochastic(n, rng.random_range(1..=4), &mut rng);
                (0..n).map(|i| (0..n).map(|j| d[(i, j)] * y[j]).sum()).collect()
            }
            1 => {
                // Integer vector with the same total.
                let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
                let diff = y.iter().sum::<f64>() - x.iter().sum::<f64>();
                x[0] += diff;
                x
            }
            _ => {
                let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let shift = (y.iter().sum::<f64>() - x.iter().sum::<f64>()) / n as f64;
                x.iter_mut().for_each(|v| *v += shift);
                x
            }
        };
        let u = vec![1.0 / n as f64; n];
        let lp = stochastic::decide_majorization_euclidean(&line_points(&x), &u, &line_points(&y), &u, 1e-9)
            .unwrap()
            .is_feasible();
        let hlp = stochastic::hlp_majorizes(&x, &y).unwrap();
        if lp == hlp {
            agree += 1;
        } else {
            disagreements.push(trial);
        }
        feasible += usize::from(hlp);
    }
    Verdict::new(
        agree == 500,
        format!("{agree}/500 agree ({feasible} majorized), disagreements at {disagreements:?}"),
    )
}

fn suite_verdict(spaces: &[Space], suites: &[Suite], trials: u64, seed: u64, tweak: impl Fn(&mut FuzzOptions)) -> Verdict {
    let mut reports = Vec::new();
    for s in spaces {
        reports.extend(fuzz(s, suites, trials, seed, &tweak));
    }
    let (ok, detail) = all_green(&reports);
    Verdict::new(ok, detail)
}

fn birkhoff() -> Verdict {
    let mut rng = sampling::trial_rng(7, 0);
    let (mut worst_err, mut count_ok) = (0.0_f64, true);
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=12);
        let (d, _) = sampling::random_doubly_stochastic(n, k, &mut rng);
        let dec = stochastic::birkhoff_decompose(&d).unwrap();
        worst_err = worst_err.max(dec.reconstruction_error(&d));
        count_ok &= dec.terms.len() <= (n - 1) * (n - 1) + 1;
    }
    // Representations of a 3×3 matrix differ by multiples of this direction:
    // the even and the odd permutation matrices both sum to the all-ones matrix.
    let kernel = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    let mut worst_param = 0.0_f64;
    for _ in 0..50 {
        let w: [f64; 6] = sampling::random_probability(6, &mut rng).try_into().unwrap();
        let a = stochastic::three_by_three_from_weights(&w);
        let dec = stochastic::birkhoff_decompose(&a).unwrap();
        let Some(got) = stochastic::three_by_three_weights(&dec) else {
            return Verdict::new(false, "decomposition produced a non-permutation term");
        };
        let back = stochastic::three_by_three_from_weights(&got);
        let diff: Vec<f64> = got.iter().zip(&w).map(|(g, l)| g - l).collect();
        let c = diff.iter().zip(&kernel).map(|(d, k)| d * k).sum::<f64>() / 6.0;
        let off_kernel = diff.iter().zip(&kernel).fold(0.0_f64, |m, (d, k)| m.max((d - c * k).abs()));
        let sum_err = (got.iter().sum::<f64>() - 1.0).abs();
        let neg = got.iter().fold(0.0_f64, |m, g| m.max(-g));
        worst_param = worst_param.max(back.max_abs_diff(&a)).max(off_kernel).max(sum_err).max(neg);
    }
    Verdict::new(
        worst_err <= 1e-10 && count_ok && worst_param <= 1e-10,
        format!("reconstruction {worst_err:.1e}, term bound held {count_ok}, 3×3 weights recovered modulo kernel to {worst_param:.1e}"),
    )
}

fn wasserstein() -> Verdict {
    let mut rng = sampling::trial_rng(8, 0);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let mu = sampling::random_measure_1d(6, &mut rng);
        let nu = sampling::random_measure_1d(6, &mut rng);
        let q = wasserstein::w2_quantile(&mu, &nu);
        let cloud = |m: &wasserstein::DiscreteMeasure1D| {
            PointCloud::new(m.atoms().iter().map(|&a| vec![a]).collect(), m.weights().to_vec()).unwrap()
        };
        let (lp, _) = wasserstein::w2_lp(&cloud(&mu), &cloud(&nu)).unwrap();
        worst = worst.max((q - lp).abs());
    }
    let w = Space::wasserstein_1d(4).unwrap();
    let along = fuzz(&w, &[Suite::Barycentric], 200, 8, |_| {});
    let transfer = fuzz(
        &w,
        &[Suite::Majorization, Suite::Jensen, Suite::Schur, Suite::Dispersion, Suite::Weak],
        200,
        8,
        |_| {},
    );
    let (ok_a, da) = all_green(&along);
    let (ok_t, dt) = all_green(&transfer);
    Verdict::new(
        worst <= 1e-9 && ok_a && ok_t,
        format!("quantile vs LP {worst:.1e}; along barycenters: {da}; transferred suites: {dt}"),
    )
}

/// Injected concave functionals and corrupted certificates must be caught.
fn negative_controls() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    let mut spaces = core_spaces();
    spaces.push(Space::wasserstein_1d(4).unwrap());
    for s in &spaces {
        let reports = fuzz(s, &[Suite::Convexity, Suite::Majorization], 100, 10, |o| o.negative_controls = true);
        let neg: Vec<&CheckReport> = reports
            .iter()
            .filter(|r| r.check == "geodesic_convexity" && r.functional.starts_with("neg:"))
            .collect();
        let missed: Vec<String> = neg.iter().filter(|r| r.violations == 0).map(|r| r.functional.clone()).collect();
        let genuine_ok = reports.iter().filter(|r| !r.functional.starts_with("neg:")).all(CheckReport::passed);
        ok &= missed.is_empty() && !neg.is_empty() && genuine_ok;
        if !missed.is_empty() {
            details.push(format!("{}: missed {missed:?}", s.label()));
        }
    }

    // Corrupt synthesized certificates: move one x atom, or break the
    // pushforward by rescaling μ.
    let mut rng = sampling::trial_rng(10, 0);
    let (mut moved, mut reweighted, mut total) = (0, 0, 0);
    for s in &spaces {
        for _ in 0..50 {
            let n = rng.random_range(2..=4);
            let y: Vec<Point> = (0..n).map(|_| sampling::random_point(s, &mut rng)).collect();
            let a = sampling::random_row_stochastic(n, n, 0.3, &mut rng);
            let lambda = sampling::random_probability(n, &mut rng);
            let syn = stochastic::synthesize_majorized(s, &y, &lambda, &a, 1e-9).unwrap();
            total += 1;
            let mut x = syn.x_atoms.clone();
            let far = sampling::random_point(s, &mut rng);
            x[0] = s.geodesic_point(&x[0], &far, 0.2).unwrap();
            if s.distance(&x[0], &syn.x_atoms[0]).unwrap() < 1e-6 * syn.certificate.scale {
                // The random target coincided with the atom; nothing was perturbed.
                moved += 1;
            } else if !stochastic::verify_majorization(s, &x, &lambda, &y, &syn.mu, &a, 1e-9).unwrap().valid {
                moved += 1;
            }
            let mut mu = syn.mu.clone();
            let shift = 0.05_f64.min(mu[0]);
            mu[0] -= shift;
            mu[1] += shift;
            if shift == 0.0 || !stochastic::verify_majorization(s, &syn.x_atoms, &lambda, &y, &mu, &a, 1e-9).unwrap().valid
            {
                reweighted += 1;
            }
        }
    }
    ok &= moved == total && reweighted == total;
    details.push(format!(
        "concave controls caught in every space; corrupted certificates rejected: moved atom {moved}/{total}, shifted weights {reweighted}/{total}"
    ));
    Verdict::new(ok, details.join("; "))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("NPC comparison inequalities, 500 triples per space", Box::new(|| timed(Some(Duration::from_secs(10)), npc_axioms))),
        ("barycenter oracles", Box::new(|| timed(None, barycenter_oracles))),
        ("LP decision agrees with sorted partial sums on the line", Box::new(|| timed(None, hlp_consistency))),
        (
            "convex functionals monotone under majorization, 500 certificates per space",
            Box::new(|| {
                timed(Some(Duration::from_secs(60)), || suite_verdict(&core_spaces(), &[Suite::Majorization], 500, 4, |_| {}))
            }),
        ),
        (
            "symmetric tuple functionals and dispersion sums, 300 certificates per space",
            Box::new(|| timed(None, || suite_verdict(&core_spaces(), &[Suite::Schur, Suite::Dispersion], 300, 5, |_| {}))),
        ),
        (
            "distance vectors weakly majorized and gauges consistent, 300 certificates x 10 anchors",
            Box::new(|| timed(None, || suite_verdict(&core_spaces(), &[Suite::Weak], 300, 6, |o| o.anchors = 10))),
        ),
        ("Birkhoff decomposition", Box::new(|| timed(None, birkhoff))),
        ("Wasserstein distances, barycentric convexity and transferred suites", Box::new(|| timed(None, wasserstein))),
        (
            "permutation-barycenter reconstruction, 100 certificates per space",
            Box::new(|| timed(None, || suite_verdict(&core_spaces(), &[Suite::Rado], 100, 9, |o| o.max_n = 4))),
        ),
        ("negative controls detected", Box::new(|| timed(None, negative_controls))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        println!("criterion {:>2} {} : {} ({})", i + 1, if v.passed { "PASS" } else { "FAIL" }, name, v.detail);
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
