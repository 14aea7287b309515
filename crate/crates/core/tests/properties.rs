//! Randomized invariants of the geometry, barycenter, majorization and
//! Wasserstein layers. Points come from the seeded samplers so every space
//! is covered by the same properties.

use npc_major::barycenter::{self, DiscreteMeasure, SolverOptions};
use npc_major::geometry::{Point, Space};
use npc_major::inequalities;
use npc_major::sampling::{random_doubly_stochastic, random_point, random_probability, random_row_stochastic, trial_rng};
use npc_major::stochastic::{self, RowStochasticMatrix};
use npc_major::wasserstein::{self, DiscreteMeasure1D};
use proptest::prelude::*;
use rand::Rng;

fn spaces() -> Vec<Space> {
    vec![
        Space::euclidean(3).unwrap(),
        Space::HalfPlane,
        Space::spd(2).unwrap(),
        Space::spd(3).unwrap(),
        Space::product(vec![Space::euclidean(1).unwrap(), Space::HalfPlane]).unwrap(),
        Space::wasserstein_1d(4).unwrap(),
    ]
}

fn curved_spaces() -> Vec<Space> {
    spaces().into_iter().filter(|s| !matches!(s, Space::Wasserstein1D { .. })).collect()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: std::env::var("PROPTEST_CASES").ok().and_then(|v| v.parse().ok()).unwrap_or(48),
        ..ProptestConfig::default()
    }
}

fn objective(space: &Space, atoms: &[Point], w: &[f64], z: &Point) -> f64 {
    0.5 * atoms
        .iter()
        .zip(w)
        .map(|(a, wi)| wi * space.distance(a, z).unwrap().powi(2))
        .sum::<f64>()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn geodesics_have_constant_speed(seed in any::<u64>(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        for space in spaces() {
            let mut rng = trial_rng(seed, 0);
            let p = random_point(&space, &mut rng);
            let q = random_point(&space, &mut rng);
            let d = space.distance(&p, &q).unwrap();
            let gs = space.geodesic_point(&p, &q, s).unwrap();
            let gt = space.geodesic_point(&p, &q, t).unwrap();
            let dst = space.distance(&gs, &gt).unwrap();
            prop_assert!((dst - (s - t).abs() * d).abs() <= 1e-8 * (1.0 + d), "{}: {dst} vs {}", space.label(), (s - t).abs() * d);
        }
    }

    #[test]
    fn log_and_exp_are_inverse(seed in any::<u64>()) {
        for space in curved_spaces() {
            let mut rng = trial_rng(seed, 1);
            let p = random_point(&space, &mut rng);
            let q = random_point(&space, &mut rng);
            let v = space.log_map(&p, &q).unwrap();
            let d = space.distance(&p, &q).unwrap();
            prop_assert!((space.tangent_norm(&v).unwrap() - d).abs() <= 1e-9 * (1.0 + d));
            let back = space.exp_map(&p, &v).unwrap();
            prop_assert!(space.distance(&back, &q).unwrap() <= 1e-8 * (1.0 + d), "{}", space.label());
        }
    }

    #[test]
    fn product_metric_is_l2_of_factors(seed in any::<u64>()) {
        let factors = vec![Space::euclidean(2).unwrap(), Space::HalfPlane, Space::spd(2).unwrap()];
        let space = Space::product(factors.clone()).unwrap();
        let mut rng = trial_rng(seed, 2);
        let (p, q) = (random_point(&space, &mut rng), random_point(&space, &mut rng));
        let (Point::Product(ps), Point::Product(qs)) = (&p, &q) else { unreachable!() };
        let sq: f64 = factors.iter().zip(ps.iter().zip(qs)).map(|(f, (a, b))| f.distance(a, b).unwrap().powi(2)).sum();
        let d = space.distance(&p, &q).unwrap();
        prop_assert!((d * d - sq).abs() <= 1e-9 * (1.0 + sq));
    }

    #[test]
    fn npc_comparison_and_joint_convexity(seed in any::<u64>(), t in 0.0..1.0f64) {
        for space in spaces() {
            let mut rng = trial_rng(seed, 3);
            let pts: Vec<Point> = (0..4).map(|_| random_point(&space, &mut rng)).collect();
            let s = inequalities::npc_slack(&space, &pts[0], &pts[1], &pts[2], t).unwrap();
            prop_assert!(s.midpoint <= inequalities::NPC_TOL && s.interpolated <= inequalities::NPC_TOL, "{}: {s:?}", space.label());
            let j = inequalities::joint_convexity_slack(&space, &pts[0], &pts[1], &pts[2], &pts[3], t).unwrap();
            prop_assert!(j.ok, "{}: {j:?}", space.label());
        }
    }

    #[test]
    fn barycenter_satisfies_variance_inequality(seed in any::<u64>(), n in 1usize..5) {
        for space in curved_spaces() {
            let mut rng = trial_rng(seed, 4);
            let atoms: Vec<Point> = (0..n).map(|_| random_point(&space, &mut rng)).collect();
            let w = random_probability(n, &mut rng);
            let m = DiscreteMeasure::new(&space, atoms.clone(), w.clone()).unwrap();
            let b = barycenter::barycenter_with(&space, &m, SolverOptions::with_tol(1e-11)).unwrap();
            prop_assert!(b.converged, "{}", space.label());
            let jb = objective(&space, &atoms, &w, &b.point);
            for _ in 0..3 {
                let z = random_point(&space, &mut rng);
                let jz = objective(&space, &atoms, &w, &z);
                let gap = jz - jb - 0.5 * space.distance(&z, &b.point).unwrap().powi(2);
                prop_assert!(gap >= -1e-8 * (jz + b.scale * b.scale), "{}: {gap}", space.label());
            }
        }
    }

    #[test]
    fn barycenter_does_not_depend_on_atom_order(seed in any::<u64>()) {
        for space in curved_spaces() {
            let mut rng = trial_rng(seed, 5);
            let atoms: Vec<Point> = (0..4).map(|_| random_point(&space, &mut rng)).collect();
            let w = random_probability(4, &mut rng);
            let a = DiscreteMeasure::new(&space, atoms.clone(), w.clone()).unwrap();
            let rev = DiscreteMeasure::new(&space, atoms.into_iter().rev().collect(), w.into_iter().rev().collect()).unwrap();
            let ba = barycenter::barycenter_with(&space, &a, SolverOptions::with_tol(1e-12)).unwrap();
            let br = barycenter::barycenter_with(&space, &rev, SolverOptions::with_tol(1e-12)).unwrap();
            prop_assert!(space.distance(&ba.point, &br.point).unwrap() <= 1e-8 * ba.scale, "{}", space.label());
        }
    }

    #[test]
    fn objective_gradient_matches_finite_difference(seed in any::<u64>()) {
        for space in curved_spaces() {
            let mut rng = trial_rng(seed, 6);
            let atoms: Vec<Point> = (0..3).map(|_| random_point(&space, &mut rng)).collect();
            let w = random_probability(3, &mut rng);
            let z = random_point(&space, &mut rng);
            let dir = random_point(&space, &mut rng);
            let v = space.log_map(&z, &dir).unwrap();
            let norm = space.tangent_norm(&v).unwrap();
            prop_assume!(norm > 1e-6);
            let v = v.scale(1.0 / norm);
            let refs: Vec<&Point> = atoms.iter().collect();
            let mean = barycenter::tangent_mean(&space, &refs, &w, &z).unwrap();
            let analytic = -space.tangent_inner(&mean, &v).unwrap();
            let h = 1e-5;
            let f = |t: f64| objective(&space, &atoms, &w, &space.exp_map(&z, &v.scale(t)).unwrap());
            let numeric = (f(h) - f(-h)) / (2.0 * h);
            prop_assert!((analytic - numeric).abs() <= 1e-5 * (1.0 + analytic.abs()), "{}: {analytic} vs {numeric}", space.label());
        }
    }

    #[test]
    fn euclidean_barycenter_is_translation_equivariant(seed in any::<u64>(), c in prop::array::uniform3(-10.0..10.0f64)) {
        let space = Space::euclidean(3).unwrap();
        let mut rng = trial_rng(seed, 7);
        let atoms: Vec<Point> = (0..4).map(|_| random_point(&space, &mut rng)).collect();
        let shifted: Vec<Point> = atoms
            .iter()
            .map(|p| match p {
                Point::Euclidean(v) => Point::Euclidean(v.iter().zip(c).map(|(a, b)| a + b).collect()),
                _ => unreachable!(),
            })
            .collect();
        let w = random_probability(4, &mut rng);
        let opts = SolverOptions { force_iterative: true, ..SolverOptions::with_tol(1e-12) };
        let b0 = barycenter::barycenter_with(&space, &DiscreteMeasure::new(&space, atoms, w.clone()).unwrap(), opts).unwrap();
        let b1 = barycenter::barycenter_with(&space, &DiscreteMeasure::new(&space, shifted, w).unwrap(), opts).unwrap();
        let (Point::Euclidean(p0), Point::Euclidean(p1)) = (&b0.point, &b1.point) else { unreachable!() };
        for k in 0..3 {
            prop_assert!((p1[k] - p0[k] - c[k]).abs() <= 1e-9 * (1.0 + c[k].abs() + b0.scale));
        }
    }

    #[test]
    fn w2_is_a_metric_and_translation_equivariant(seed in any::<u64>(), c in -5.0..5.0f64) {
        let mut rng = trial_rng(seed, 8);
        let space = Space::wasserstein_1d(5).unwrap();
        let ms: Vec<DiscreteMeasure1D> = (0..3)
            .map(|_| match random_point(&space, &mut rng) {
                Point::Measure(m) => m,
                _ => unreachable!(),
            })
            .collect();
        let d = |a: &DiscreteMeasure1D, b: &DiscreteMeasure1D| wasserstein::w2_quantile(a, b);
        prop_assert_eq!(d(&ms[0], &ms[0]), 0.0);
        prop_assert!((d(&ms[0], &ms[1]) - d(&ms[1], &ms[0])).abs() <= 1e-12);
        prop_assert!(d(&ms[0], &ms[2]) <= d(&ms[0], &ms[1]) + d(&ms[1], &ms[2]) + 1e-12);
        let (a, b) = (ms[0].shifted(c), ms[1].shifted(c));
        prop_assert!((d(&a, &b) - d(&ms[0], &ms[1])).abs() <= 1e-9 * (1.0 + c.abs()));
        prop_assert!((d(&ms[0], &a) - c.abs()).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn w2_quantile_agrees_with_transport_lp(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 9);
        let space = Space::wasserstein_1d(4).unwrap();
        let mut pick = || match random_point(&space, &mut rng) {
            Point::Measure(m) => m,
            _ => unreachable!(),
        };
        let (a, b) = (pick(), pick());
        let cloud = |m: &DiscreteMeasure1D| {
            wasserstein::PointCloud::new(m.atoms().iter().map(|x| vec![*x]).collect(), m.weights().to_vec()).unwrap()
        };
        let (lp, _) = wasserstein::w2_lp(&cloud(&a), &cloud(&b)).unwrap();
        let q = wasserstein::w2_quantile(&a, &b);
        prop_assert!((lp - q).abs() <= 1e-7 * (1.0 + q), "{lp} vs {q}");
    }

    #[test]
    fn synthesized_certificates_verify(seed in any::<u64>(), m in 1usize..4, n in 1usize..4) {
        for space in curved_spaces() {
            let mut rng = trial_rng(seed, 10);
            let y: Vec<Point> = (0..n).map(|_| random_point(&space, &mut rng)).collect();
            let a = random_row_stochastic(m, n, 0.3, &mut rng);
            let lambda = random_probability(m, &mut rng);
            let s = stochastic::synthesize_majorized(&space, &y, &lambda, &a, 1e-8).unwrap();
            let cert = stochastic::verify_majorization(&space, &s.x_atoms, &lambda, &y, &s.mu, &a, 1e-8).unwrap();
            prop_assert!(cert.valid, "{}: {}", space.label(), cert.max_residual());
        }
    }

    #[test]
    fn doubly_stochastic_images_are_hlp_majorized(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = trial_rng(seed, 11);
        let (d, _) = random_doubly_stochastic(n, 3, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| d[(i, j)] * y[j]).sum::<f64>() / d.row(i).iter().sum::<f64>())
            .collect();
        prop_assert!(stochastic::hlp_majorizes(&x, &y).unwrap());
        let space = Space::euclidean(1).unwrap();
        let pts = |v: &[f64]| v.iter().map(|t| Point::euclidean(&[*t])).collect::<Vec<_>>();
        let u = vec![1.0 / n as f64; n];
        let a = RowStochasticMatrix::new(d).unwrap();
        let cert = stochastic::verify_majorization(&space, &pts(&x), &u, &pts(&y), &u, &a, 1e-9).unwrap();
        prop_assert!(cert.valid);
    }

    #[test]
    fn birkhoff_reconstructs_its_input(seed in any::<u64>(), n in 1usize..6, k in 1usize..5) {
        let mut rng = trial_rng(seed, 12);
        let (d, _) = random_doubly_stochastic(n, k, &mut rng);
        let dec = stochastic::birkhoff_decompose(&d).unwrap();
        prop_assert!(dec.reconstruction_error(&d) <= 1e-9);
        prop_assert!((dec.total_weight() - 1.0).abs() <= 1e-9);
        prop_assert!(dec.terms.len() <= n * n - n + 1);
    }
}
