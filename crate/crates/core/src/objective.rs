//! Integer submodular energies.
//!
//! Everything downstream works through the [`Objective`] trait. Concrete
//! energies are the revenue objective over a social graph, the leveled
//! facility-location objective, and two small helpers for tests and
//! diagnostics ([`Modular`], [`Tabulated`]).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, LatticeDomain};

/// Closed interval containing every value of an objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    /// Width `hi - lo`, the range constant of Hoeffding's inequality.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - 1e-12 && v <= self.hi + 1e-12
    }
}

/// An energy `f` on a finite integer lattice.
///
/// Implementations hold read-only state after construction and are evaluated
/// concurrently from estimator workers.
pub trait Objective: Send + Sync {
    fn domain(&self) -> &LatticeDomain;

    /// `f(x)`. `x` must lie in the domain.
    fn evaluate(&self, x: &[usize]) -> f64;

    fn value_bound(&self) -> ValueRange;

    /// Short label used in reports.
    fn name(&self) -> &str;

    /// Whether `f` is known to be monotone non-decreasing.
    fn is_monotone(&self) -> bool {
        false
    }

    /// Fills `out[l] = f(x with x_i = l)` for every level `l` of coordinate `i`.
    fn coordinate_sweep(&self, x: &[usize], i: usize, out: &mut [f64]) {
        let mut y = x.to_vec();
        for (l, slot) in out.iter_mut().enumerate() {
            y[i] = l;
            *slot = self.evaluate(&y);
        }
    }

    /// Fills `out[offsets[i] + l] = f(x with x_i = l)` for every coordinate and
    /// level, where `offsets` is the running sum of level counts.
    fn full_sweep(&self, x: &[usize], out: &mut [f64]) {
        let mut offset = 0;
        for (i, &k) in self.domain().levels().iter().enumerate() {
            self.coordinate_sweep(x, i, &mut out[offset..offset + k]);
            offset += k;
        }
    }
}

pub type ObjectiveHandle = Arc<dyn Objective>;

/// Stored interval of an objective.
pub fn value_range(f: &dyn Objective) -> ValueRange {
    f.value_bound()
}

/// Non-negative weights `W_ij` with zero diagonal, stored as sorted
/// out-adjacency lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    out: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            n,
            out: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from `(i, j, w)` triples; repeated pairs are summed.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = WeightedGraph::new(n);
        for (i, j, w) in edges {
            g.add_weight(i, j, w)?;
        }
        Ok(g)
    }

    pub fn add_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidParameter(format!(
                "edge ({i}, {j}) outside a graph of {} nodes",
                self.n
            )));
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight {w} on ({i}, {j}) must be finite and non-negative"
            )));
        }
        let row = &mut self.out[i];
        match row.binary_search_by_key(&j, |&(t, _)| t) {
            Ok(pos) => row[pos].1 += w,
            Err(pos) => row.insert(pos, (j, w)),
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.out[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map(|pos| self.out[i][pos].1)
            .unwrap_or(0.0)
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    /// Stored ordered pairs `(i, j)` with a weight entry.
    pub fn directed_entries(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Unordered pairs `{i, j}` carrying weight in either direction.
    pub fn undirected_edges(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n {
            for &(j, _) in &self.out[i] {
                if i < j || !self.has_entry(j, i) {
                    count += 1;
                }
            }
        }
        count
    }

    fn has_entry(&self, i: usize, j: usize) -> bool {
        self.out[i].binary_search_by_key(&j, |&(t, _)| t).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.out[i].iter().all(|&(j, w)| self.weight(j, i) == w))
    }

    pub fn total_weight(&self) -> f64 {
        self.out.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// Seeded Erdős–Rényi-style graph with exactly `edges` undirected unit
    /// edges, stored symmetrically.
    pub fn random_undirected(n: usize, edges: usize, seed: u64) -> Result<Self> {
        let max = n * n.saturating_sub(1) / 2;
        if edges > max {
            return Err(Error::InvalidParameter(format!(
                "{edges} edges do not fit in a simple graph on {n} nodes"
            )));
        }
        use rand::seq::index::sample;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = WeightedGraph::new(n);
        for code in sample(&mut rng, max, edges).into_iter() {
            let (i, j) = unrank_pair(code);
            g.add_weight(i, j, 1.0)?;
            g.add_weight(j, i, 1.0)?;
        }
        Ok(g)
    }
}

/// Maps `0..n(n-1)/2` onto pairs `i < j` in colexicographic order.
fn unrank_pair(code: usize) -> (usize, usize) {
    let mut j = ((((8 * code + 1) as f64).sqrt() + 1.0) / 2.0) as usize;
    while j * (j - 1) / 2 > code {
        j -= 1;
    }
    while (j + 1) * j / 2 <= code {
        j += 1;
    }
    (code - j * (j - 1) / 2, j)
}

/// Expected revenue under the influence-and-exploit model with discrete free
/// assignments:
///
/// ```text
/// f(x) = Σ_i Σ_{j≠i} W_ij (1 - q^{x_i}) q^{x_j}
/// ```
///
/// Lattice submodular but neither monotone nor DR-submodular in general.
#[derive(Clone, Debug)]
pub struct Revenue {
    domain: LatticeDomain,
    graph: WeightedGraph,
    /// In-adjacency: for each j, every (i, W_ij).
    incoming: Vec<Vec<(usize, f64)>>,
    q: f64,
    /// `q^l` for `l < k`.
    q_pow: Vec<f64>,
    bound: ValueRange,
}

impl Revenue {
    pub fn new(graph: WeightedGraph, q: f64, k: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
        }
        if graph.n() == 0 {
            return Err(Error::EmptyGraph);
        }
        let domain = LatticeDomain::uniform(graph.n(), k)?;
        let mut incoming = vec![Vec::new(); graph.n()];
        for i in 0..graph.n() {
            for &(j, w) in graph.neighbors(i) {
                incoming[j].push((i, w));
            }
        }
        let q_pow = (0..k).map(|l| q.powi(l as i32)).collect();
        let bound = ValueRange {
            lo: 0.0,
            hi: graph.total_weight(),
        };
        Ok(Revenue {
            domain,
            graph,
            incoming,
            q,
            q_pow,
            bound,
        })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Σ_j W_ij q^{x_j}` and `Σ_j W_ji (1 - q^{x_j})` for node `i`.
    fn partial_sums(&self, x: &[usize], i: usize) -> (f64, f64) {
        let out: f64 = self.graph.neighbors(i).iter().map(|&(j, w)| w * self.q_pow[x[j]]).sum();
        let inc: f64 = self.incoming[i]
            .iter()
            .map(|&(j, w)| w * (1.0 - self.q_pow[x[j]]))
            .sum();
        (out, inc)
    }
}

impl Objective for Revenue {
    fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[usize]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.graph.n() {
            let advocate = 1.0 - self.q_pow[x[i]];
            if advocate == 0.0 {
                continue;
            }
            let reach: f64 = self.graph.neighbors(i).iter().map(|&(j, w)| w * self.q_pow[x[j]]).sum();
            total += advocate * reach;
        }
        total
    }

    fn value_bound(&self) -> ValueRange {
        self.bound
    }

    fn name(&self) -> &str {
        "revenue"
    }

    fn coordinate_sweep(&self, x: &[usize], i: usize, out: &mut [f64]) {
        let base = self.evaluate(x);
        let (reach, influenced) = self.partial_sums(x, i);
        let own = |l: usize| (1.0 - self.q_pow[l]) * reach + self.q_pow[l] * influenced;
        let rest = base - own(x[i]);
        for (l, slot) in out.iter_mut().enumerate() {
            *slot = rest + own(l);
        }
    }

    fn full_sweep(&self, x: &[usize], out: &mut [f64]) {
        let base = self.evaluate(x);
        let k = self.q_pow.len();
        for i in 0..self.graph.n() {
            let (reach, influenced) = self.partial_sums(x, i);
            let own = |l: usize| (1.0 - self.q_pow[l]) * reach + self.q_pow[l] * influenced;
            let rest = base - own(x[i]);
            for l in 0..k {
                out[i * k + l] = rest + own(l);
            }
        }
    }
}

/// Per-customer, per-facility monotone utility tables `w_ij(level)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacilityWeights {
    customers: usize,
    facilities: usize,
    levels: usize,
    /// Row-major `[customer][facility][level]`.
    table: Vec<f64>,
}

impl FacilityWeights {
    /// `table[c][j][l]` must satisfy `w(0) = 0` and be non-decreasing in `l`.
    pub fn new(table: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let customers = table.len();
        let facilities = table.first().map_or(0, Vec::len);
        let levels = table.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if customers == 0 || facilities == 0 || levels < 2 {
            return Err(Error::InvalidParameter(
                "facility weights need at least one customer, one facility and two levels".into(),
            ));
        }
        let mut flat = Vec::with_capacity(customers * facilities * levels);
        for (c, row) in table.iter().enumerate() {
            if row.len() != facilities {
                return Err(Error::InvalidParameter(format!(
                    "customer {c} has {} facilities",
                    row.len()
                )));
            }
            for (j, w) in row.iter().enumerate() {
                if w.len() != levels {
                    return Err(Error::InvalidParameter(format!(
                        "table ({c}, {j}) has {} levels, expected {levels}",
                        w.len()
                    )));
                }
                if w[0] != 0.0 {
                    return Err(Error::NonMonotoneTable {
                        customer: c,
                        facility: j,
                        level: 0,
                    });
                }
                for l in 1..levels {
                    if !(w[l] >= w[l - 1]) || !w[l].is_finite() {
                        return Err(Error::NonMonotoneTable {
                            customer: c,
                            facility: j,
                            level: l,
                        });
                    }
                }
                flat.extend_from_slice(w);
            }
        }
        Ok(FacilityWeights {
            customers,
            facilities,
            levels,
            table: flat,
        })
    }

    pub fn customers(&self) -> usize {
        self.customers
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn utility(&self, customer: usize, facility: usize, level: usize) -> f64 {
        self.table[(customer * self.facilities + facility) * self.levels + level]
    }
}

/// Random monotone utility tables.
///
/// For every level `l ∈ 1..k` a matrix `L_l` with standard normal entries and
/// `max(m, n)` rows by `n` columns is drawn; the level increment is the
/// top-left `m × n` block of `|(1/n) L_l L_lᵀ|`. Tables are the running sums of
/// these increments across levels, with level 0 fixed at zero.
pub fn synthetic_facility_weights(n: usize, m: usize, k: usize, seed: u64) -> Result<FacilityWeights> {
    if n == 0 || m == 0 || k < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic facility weights need n, m ≥ 1 and k ≥ 2 (got n={n}, m={m}, k={k})"
        )));
    }
    let rows = n.max(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = vec![vec![vec![0.0; k]; n]; m];
    for l in 1..k {
        let draw: Vec<f64> = (0..rows * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for c in 0..m {
            for j in 0..n {
                let dot: f64 = (0..n).map(|t| draw[c * n + t] * draw[j * n + t]).sum();
                table[c][j][l] = table[c][j][l - 1] + (dot / n as f64).abs();
            }
        }
    }
    FacilityWeights::new(table)
}

/// `f(x) = Σ_c max_j w_cj(x_j)`: monotone and lattice submodular.
#[derive(Clone, Debug)]
pub struct FacilityLocation {
    domain: LatticeDomain,
    weights: FacilityWeights,
    bound: ValueRange,
}

impl FacilityLocation {
    pub fn new(weights: FacilityWeights) -> Result<Self> {
        let domain = LatticeDomain::uniform(weights.facilities(), weights.levels())?;
        let top = weights.levels() - 1;
        let hi = (0..weights.customers())
            .map(|c| {
                (0..weights.facilities())
                    .map(|j| weights.utility(c, j, top))
                    .fold(0.0, f64::max)
            })
            .sum();
        Ok(FacilityLocation {
            domain,
            weights,
            bound: ValueRange { lo: 0.0, hi },
        })
    }

    pub fn weights(&self) -> &FacilityWeights {
        &self.weights
    }
}

impl Objective for FacilityLocation {
    fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[usize]) -> f64 {
        let w = &self.weights;
        (0..w.customers())
            .map(|c| {
                x.iter()
                    .enumerate()
                    .map(|(j, &l)| w.utility(c, j, l))
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    fn value_bound(&self) -> ValueRange {
        self.bound
    }

    fn name(&self) -> &str {
        "facility-location"
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn coordinate_sweep(&self, x: &[usize], i: usize, out: &mut [f64]) {
        let w = &self.weights;
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..w.customers() {
            let others = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &l)| w.utility(c, j, l))
                .fold(0.0, f64::max);
            for (l, slot) in out.iter_mut().enumerate() {
                *slot += others.max(w.utility(c, i, l));
            }
        }
    }

    fn full_sweep(&self, x: &[usize], out: &mut [f64]) {
        let w = &self.weights;
        let n = w.facilities();
        let k = w.levels();
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..w.customers() {
            // best and runner-up over facilities at their current levels
            let (mut best, mut best_at, mut second) = (0.0f64, usize::MAX, 0.0f64);
            for (j, &l) in x.iter().enumerate() {
                let u = w.utility(c, j, l);
                if u > best {
                    second = best;
                    best = u;
                    best_at = j;
                } else if u > second {
                    second = u;
                }
            }
            for i in 0..n {
                let others = if i == best_at { second } else { best };
                for l in 0..k {
                    out[i * k + l] += others.max(w.utility(c, i, l));
                }
            }
        }
    }
}

/// Separable energy `f(x) = Σ_i c_i(x_i)`.
#[derive(Clone, Debug)]
pub struct Modular {
    domain: LatticeDomain,
    values: Vec<Vec<f64>>,
    bound: ValueRange,
}

impl Modular {
    /// `values[i][l] = c_i(l)`; block `i` gets `values[i].len()` levels.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let domain = LatticeDomain::new(values.iter().map(Vec::len).collect())?;
        let fold = |pick: fn(f64, f64) -> f64, init: f64| -> f64 {
            values.iter().map(|v| v.iter().copied().fold(init, pick)).sum()
        };
        let bound = ValueRange {
            lo: fold(f64::min, f64::INFINITY),
            hi: fold(f64::max, f64::NEG_INFINITY),
        };
        Ok(Modular { domain, values, bound })
    }

    /// `f(x) = Σ_i c_i x_i` on `{0, …, k-1}^n`.
    pub fn linear(c: &[f64], k: usize) -> Result<Self> {
        Self::new(c.iter().map(|&ci| (0..k).map(|l| ci * l as f64).collect()).collect())
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

impl Objective for Modular {
    fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[usize]) -> f64 {
        x.iter().zip(&self.values).map(|(&l, c)| c[l]).sum()
    }

    fn value_bound(&self) -> ValueRange {
        self.bound
    }

    fn name(&self) -> &str {
        "modular"
    }

    fn is_monotone(&self) -> bool {
        self.values.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1]))
    }
}

/// An arbitrary function stored as a full lexicographic table.
#[derive(Clone, Debug)]
pub struct Tabulated {
    domain: LatticeDomain,
    table: Vec<f64>,
    bound: ValueRange,
    label: String,
}

impl Tabulated {
    pub fn new(domain: LatticeDomain, table: Vec<f64>) -> Result<Self> {
        let size = domain.ensure_enumerable(lattice::DEFAULT_ENUMERATION_CAP)?;
        if table.len() as u64 != size {
            return Err(Error::InvalidParameter(format!(
                "table has {} entries, domain has {size} points",
                table.len()
            )));
        }
        let lo = table.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Tabulated {
            domain,
            table,
            bound: ValueRange { lo, hi },
            label: "tabulated".into(),
        })
    }

    pub fn from_fn(domain: LatticeDomain, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let table = domain.enumerate()?.map(|x| f(x.coords())).collect();
        Self::new(domain, table)
    }

    /// Snapshot of another objective.
    pub fn of(f: &dyn Objective) -> Result<Self> {
        let mut t = Self::new(f.domain().clone(), lattice::tabulate(f)?)?;
        t.label = format!("tabulated {}", f.name());
        Ok(t)
    }
}

impl Objective for Tabulated {
    fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[usize]) -> f64 {
        self.table[self.domain.index_of(x) as usize]
    }

    fn value_bound(&self) -> ValueRange {
        self.bound
    }

    fn name(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{check_dr_submodular, check_lattice_submodular, check_monotone, IntegerPoint, Witness};

    fn pair_graph(w12: f64, w21: f64) -> WeightedGraph {
        let mut edges = Vec::new();
        if w12 > 0.0 {
            edges.push((0, 1, w12));
        }
        if w21 > 0.0 {
            edges.push((1, 0, w21));
        }
        WeightedGraph::from_edges(2, edges).unwrap()
    }

    #[test]
    fn revenue_examples() {
        let f = Revenue::new(pair_graph(1.0, 1.0), 0.5, 3).unwrap();
        assert_eq!(f.evaluate(&[0, 0]), 0.0);
        assert_eq!(f.evaluate(&[1, 0]), 0.5);
        assert_eq!(f.evaluate(&[1, 1]), 0.5);
        assert_eq!(f.evaluate(&[2, 0]), 0.75);
        assert_eq!(f.value_bound(), ValueRange { lo: 0.0, hi: 2.0 });
    }

    #[test]
    fn revenue_rejects_bad_q() {
        for q in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(Revenue::new(pair_graph(1.0, 1.0), q, 3).is_err());
        }
    }

    #[test]
    fn revenue_is_submodular_but_not_dr() {
        let f = Revenue::new(pair_graph(1.0, 0.0), 0.5, 3).unwrap();
        assert!(check_lattice_submodular(&f).unwrap().passed);
        let report = check_dr_submodular(&f).unwrap();
        assert!(!report.passed);
        assert_eq!(
            report.witness,
            Some(Witness::DiminishingReturns {
                x: IntegerPoint::new(vec![1, 0]),
                y: IntegerPoint::new(vec![1, 1]),
                coord: 1,
                deficit: -0.125,
            })
        );
    }

    #[test]
    fn revenue_sweeps_match_direct_evaluation() {
        let g = WeightedGraph::random_undirected(6, 9, 3).unwrap();
        let f = Revenue::new(g, 0.6, 4).unwrap();
        let x = [3, 0, 1, 2, 2, 0];
        let mut full = vec![0.0; 24];
        f.full_sweep(&x, &mut full);
        let mut y = x.to_vec();
        for i in 0..6 {
            let mut row = [0.0; 4];
            f.coordinate_sweep(&x, i, &mut row);
            for l in 0..4 {
                y[i] = l;
                let direct = f.evaluate(&y);
                assert!((row[l] - direct).abs() < 1e-12);
                assert!((full[i * 4 + l] - direct).abs() < 1e-12);
            }
            y[i] = x[i];
        }
    }

    fn small_facility() -> FacilityLocation {
        let w = FacilityWeights::new(vec![vec![vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 3.0]]]).unwrap();
        FacilityLocation::new(w).unwrap()
    }

    #[test]
    fn facility_examples() {
        let f = small_facility();
        assert_eq!(f.evaluate(&[0, 0]), 0.0);
        assert_eq!(f.evaluate(&[2, 1]), 2.0);
        assert_eq!(f.evaluate(&[2, 2]), 3.0);
        assert_eq!(value_range(&f), ValueRange { lo: 0.0, hi: 3.0 });
        assert!(check_lattice_submodular(&f).unwrap().passed);
        assert!(check_monotone(&f).unwrap().passed);
        // w_2 has increasing increments, so diminishing returns fails along x_2.
        assert!(!check_dr_submodular(&f).unwrap().passed);

        let concave = FacilityWeights::new(vec![
            vec![vec![0.0, 2.0, 3.0], vec![0.0, 1.5, 2.0]],
            vec![vec![0.0, 0.5, 0.9], vec![0.0, 2.5, 2.6]],
        ])
        .unwrap();
        let f = FacilityLocation::new(concave).unwrap();
        assert!(check_lattice_submodular(&f).unwrap().passed);
        // Concave tables are not enough once a max couples two facilities.
        let report = check_dr_submodular(&f).unwrap();
        assert!(!report.passed);
        assert!(matches!(
            report.witness,
            Some(Witness::DiminishingReturns { ref x, ref y, coord: 0, .. })
                if x.coords() == [0, 1] && y.coords() == [1, 1]
        ));

        let single = FacilityWeights::new(vec![vec![vec![0.0, 2.0, 3.0]], vec![vec![0.0, 1.0, 1.5]]]).unwrap();
        assert!(
            check_dr_submodular(&FacilityLocation::new(single).unwrap())
                .unwrap()
                .passed
        );
    }

    #[test]
    fn facility_rejects_non_monotone_tables() {
        let err = FacilityWeights::new(vec![vec![vec![0.0, 2.0, 1.0]]]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTable { level: 2, .. }));
        let err = FacilityWeights::new(vec![vec![vec![0.5, 2.0]]]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTable { level: 0, .. }));
    }

    #[test]
    fn facility_sweeps_match_direct_evaluation() {
        let f = FacilityLocation::new(synthetic_facility_weights(5, 7, 4, 11).unwrap()).unwrap();
        let x = [1, 3, 0, 2, 3];
        let mut full = vec![0.0; 20];
        f.full_sweep(&x, &mut full);
        let mut y = x.to_vec();
        for i in 0..5 {
            let mut row = [0.0; 4];
            f.coordinate_sweep(&x, i, &mut row);
            for l in 0..4 {
                y[i] = l;
                let direct = f.evaluate(&y);
                assert!((row[l] - direct).abs() < 1e-12);
                assert!((full[i * 4 + l] - direct).abs() < 1e-12);
            }
            y[i] = x[i];
        }
    }

    #[test]
    fn synthetic_weights_are_deterministic_and_monotone() {
        let a = synthetic_facility_weights(50, 50, 5, 9).unwrap();
        let b = synthetic_facility_weights(50, 50, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthetic_facility_weights(50, 50, 5, 10).unwrap());
        for c in 0..50 {
            for j in 0..50 {
                assert_eq!(a.utility(c, j, 0), 0.0);
                for l in 1..5 {
                    assert!(a.utility(c, j, l) >= a.utility(c, j, l - 1));
                }
            }
        }
        let k2 = synthetic_facility_weights(4, 3, 2, 1).unwrap();
        for c in 0..3 {
            for j in 0..4 {
                assert!(k2.utility(c, j, 1) >= 0.0);
            }
        }
    }

    #[test]
    fn modular_value_range() {
        let f = Modular::linear(&[1.0, 2.0], 2).unwrap();
        assert_eq!(f.value_bound(), ValueRange { lo: 0.0, hi: 3.0 });
        assert_eq!(f.evaluate(&[1, 1]), 3.0);
        assert!(f.is_monotone());
    }

    #[test]
    fn random_graph_has_requested_edges() {
        let g = WeightedGraph::random_undirected(35, 118, 1).unwrap();
        assert_eq!(g.undirected_edges(), 118);
        assert_eq!(g.directed_entries(), 236);
        assert!(g.is_symmetric());
        assert!(WeightedGraph::random_undirected(3, 4, 1).is_err());
        for code in 0..45 {
            let (i, j) = unrank_pair(code);
            assert!(i < j && j < 10);
        }
    }
}
