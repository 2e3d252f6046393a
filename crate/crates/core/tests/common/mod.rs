//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pism::objective::{synthetic_facility_weights, FacilityLocation, Revenue, Tabulated, WeightedGraph};
use pism::{LatticeDomain, Objective, ProductCategorical};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed graph with each ordered pair present with probability 1/2 and
/// weight uniform in `(0, 2)`; at least one edge.
pub fn random_revenue(rng: &mut impl Rng, n: usize, k: usize) -> Revenue {
    let mut g = WeightedGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.5) {
                g.add_weight(i, j, 2.0 * rng.random::<f64>() + 1e-3).unwrap();
            }
        }
    }
    if g.total_weight() == 0.0 {
        g.add_weight(0, 1, 1.0).unwrap();
    }
    let q = rng.random_range(0.1..0.9);
    Revenue::new(g, q, k).unwrap()
}

pub fn random_facility(rng: &mut impl Rng, n: usize, k: usize) -> FacilityLocation {
    let m = rng.random_range(1..=5);
    FacilityLocation::new(synthetic_facility_weights(n, m, k, rng.random()).unwrap()).unwrap()
}

/// Arbitrary table with entries uniform in `[-scale, scale]`.
pub fn random_table(rng: &mut impl Rng, levels: Vec<usize>, scale: f64) -> Tabulated {
    let d = LatticeDomain::new(levels).unwrap();
    let size = d.cardinality().unwrap() as usize;
    let table = (0..size).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    Tabulated::new(d, table).unwrap()
}

/// Alternates revenue and facility instances.
pub fn random_instance(rng: &mut impl Rng, index: usize, n: usize, k: usize) -> Box<dyn Objective> {
    if index.is_multiple_of(2) {
        Box::new(random_revenue(rng, n, k))
    } else {
        Box::new(random_facility(rng, n, k))
    }
}

/// Marginals with every level probability, level 0 included, at least
/// `margin`.
pub fn interior_rho(rng: &mut impl Rng, domain: &LatticeDomain, margin: f64) -> ProductCategorical {
    let blocks = domain
        .levels()
        .iter()
        .map(|&k| {
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = w.iter().sum();
            let free = 1.0 - margin * k as f64;
            w[1..].iter().map(|v| margin + free * v / total).collect()
        })
        .collect();
    ProductCategorical::new(domain, blocks).unwrap()
}
