//! Seeded random instances for the fuzz harness.
//!
//! Every trial draws from its own ChaCha stream, `(seed, trial)`, so trials
//! can run in any order or in parallel and still reproduce bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Result;
use crate::geometry::{Point, Space};
use crate::linalg::{Matrix, SymMatrix};
use crate::stochastic::{BirkhoffTerm, RowStochasticMatrix};
use crate::wasserstein::DiscreteMeasure1D;

/// Generator for trial `trial` of a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Random point with moderate spread: coordinates of order 1, half-plane
/// heights within `e^{±1.5}`, SPD spectra within roughly `e^{±2}`.
pub fn random_point<R: Rng + ?Sized>(space: &Space, rng: &mut R) -> Point {
    match space {
        Space::Euclidean { dim } => Point::Euclidean((0..*dim).map(|_| 2.0 * normal(rng)).collect()),
        Space::HalfPlane => Point::half_plane(rng.random_range(-2.0..2.0), rng.random_range(-1.5_f64..1.5).exp()),
        Space::Spd { order } => {
            let n = *order;
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = 0.6 * normal(rng);
                    rows[i][j] = v;
                    rows[j][i] = v;
                }
            }
            let s = SymMatrix::from_rows(&rows).expect("square");
            Point::Spd(s.map_spectrum(f64::exp))
        }
        Space::Product { factors } => Point::Product(factors.iter().map(|f| random_point(f, rng)).collect()),
        Space::Wasserstein1D { support_size } => Point::Measure(random_measure_1d(*support_size, rng)),
    }
}

/// Measure on ℝ with between 1 and `max_support` atoms.
pub fn random_measure_1d<R: Rng + ?Sized>(max_support: usize, rng: &mut R) -> DiscreteMeasure1D {
    let k = rng.random_range(1..=max_support.max(1));
    let atoms: Vec<f64> = (0..k).map(|_| 2.0 * normal(rng)).collect();
    DiscreteMeasure1D::new(atoms, random_probability(k, rng)).expect("valid by construction")
}

/// Uniform draw from the probability simplex. Entries are strictly positive.
pub fn random_probability<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Distribution::<f64>::sample(&Exp1, rng) + 1e-3).collect();
    normalize(raw)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    // Push the rounding residue into the largest entry so the sum is 1 to
    // within one ulp.
    let resid = 1.0 - v.iter().sum::<f64>();
    if let Some(k) = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])) {
        v[k] += resid;
    }
    v
}

/// Random row-stochastic matrix; each entry is zeroed with probability
/// `sparsity` (one entry per row always survives).
pub fn random_row_stochastic<R: Rng + ?Sized>(m: usize, n: usize, sparsity: f64, rng: &mut R) -> RowStochasticMatrix {
    let mut a = Matrix::zeros(m, n);
    for i in 0..m {
        let keep = rng.random_range(0..n);
        let mut row: Vec<f64> = (0..n)
            .map(|j| {
                let drop = j != keep && rng.random::<f64>() < sparsity;
                if drop {
                    0.0
                } else {
                    Distribution::<f64>::sample(&Exp1, rng) + 1e-3
                }
            })
            .collect();
        row = normalize(row);
        a.row_mut(i).copy_from_slice(&row);
    }
    RowStochasticMatrix::new(a).expect("valid by construction")
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Doubly stochastic matrix built as a random convex combination of `k`
/// random permutation matrices, together with the generating terms.
pub fn random_doubly_stochastic<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> (Matrix, Vec<BirkhoffTerm>) {
    let weights = random_probability(k, rng);
    let terms: Vec<BirkhoffTerm> = weights
        .into_iter()
        .map(|weight| BirkhoffTerm {
            weight,
            permutation: random_permutation(n, rng),
        })
        .collect();
    let mut d = Matrix::zeros(n, n);
    for t in &terms {
        for (i, &j) in t.permutation.iter().enumerate() {
            d[(i, j)] += t.weight;
        }
    }
    (d, terms)
}

/// Point at distance at most `radius` from `center`, found by walking from
/// `center` towards a random point.
pub fn random_anchor<R: Rng + ?Sized>(space: &Space, center: &Point, radius: f64, rng: &mut R) -> Result<Point> {
    let q = random_point(space, rng);
    let d = space.distance(center, &q)?;
    let r = radius * rng.random::<f64>();
    if d <= r {
        return Ok(q);
    }
    space.geodesic_point(center, &q, r / d)
}
