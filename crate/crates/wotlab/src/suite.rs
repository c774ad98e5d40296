//! Seeded random instances for the randomized suites. Everything here is
//! deterministic in the seed, so suites are reproducible across runs and
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costs::{CostModel, ThetaSpec};
use crate::measures::{DiscreteMeasure, Point};

/// The four built-in cost families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Classical,
    Barycentric,
    Entropic,
    MonopolyIcx,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Classical,
        Family::Barycentric,
        Family::Entropic,
        Family::MonopolyIcx,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Classical => "classical",
            Family::Barycentric => "barycentric",
            Family::Entropic => "entropic",
            Family::MonopolyIcx => "monopoly_icx",
        }
    }
}

/// A random measure with `2..=max_atoms` atoms in `[-2, 2]^dim`.
pub fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize, dim: usize) -> DiscreteMeasure {
    let n = rng.gen_range(2..=max_atoms.max(2));
    let points: Vec<Point> = (0..n)
        .map(|_| Point::new((0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()))
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    DiscreteMeasure::new(points, weights).expect("random measure is valid")
}

/// A full random weak-transport instance for the given family.
pub fn random_instance(
    family: Family,
    seed: u64,
    max_atoms: usize,
    dim: usize,
) -> (CostModel, DiscreteMeasure, DiscreteMeasure) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000);
    let mu = random_measure(&mut rng, max_atoms, dim);
    let nu = random_measure(&mut rng, max_atoms, dim);
    let model = match family {
        Family::Classical => {
            // Distance-based cost with mild random distortion; stays
            // nonnegative and Lipschitz-ish on the support.
            let cost: Vec<Vec<f64>> = mu
                .points
                .iter()
                .map(|x| {
                    nu.points
                        .iter()
                        .map(|y| x.sub(y).norm() + 0.25 * rng.gen_range(0.0..1.0))
                        .collect()
                })
                .collect();
            CostModel::Classical { cost }
        }
        Family::Barycentric => CostModel::Barycentric,
        Family::Entropic => {
            let gamma_rows: Vec<Vec<f64>> = (0..mu.len())
                .map(|_| {
                    let raw: Vec<f64> = (0..nu.len())
                        .map(|_| rng.gen_range(-1.0..1.0f64).exp())
                        .collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / total).collect()
                })
                .collect();
            CostModel::Entropic { gamma_rows }
        }
        Family::MonopolyIcx => CostModel::MonopolyIcx {
            theta: ThetaSpec::l1(),
        },
    };
    (model, mu, nu)
}

/// A pair `(mu, nu)` where `mu` is a barycentric coarsening of `nu`, so the
/// convex order holds by construction.
pub fn convex_ordered_pair(seed: u64, max_atoms: usize, dim: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0D3F_17EA);
    let nu = random_measure(&mut rng, max_atoms, dim);
    let groups = rng.gen_range(1..=nu.len());
    let mut sums = vec![(vec![0.0; dim], 0.0); groups];
    for (j, (p, w)) in nu.points.iter().zip(&nu.weights).enumerate() {
        let g = j % groups;
        for (s, c) in sums[g].0.iter_mut().zip(&p.coords) {
            *s += c * w;
        }
        sums[g].1 += w;
    }
    let (points, weights): (Vec<Point>, Vec<f64>) = sums
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(s, w)| (Point::new(s.iter().map(|v| v / w).collect()), w))
        .unzip();
    let mu = DiscreteMeasure::new(points, weights).expect("coarsening is valid");
    (mu, nu)
}
