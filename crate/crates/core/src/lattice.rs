//! Integer-lattice algebra and brute-force structure checkers.
//!
//! A point of the lattice `X = ∏ {0, …, k_i - 1}` doubles as a multiset over
//! the ground set: coordinate `i` is the multiplicity of element `i`. Join and
//! meet are multiset union and intersection, and [`multiset_difference`] is the
//! clamped subtraction `(x - y) ∨ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::par;

/// Largest domain the exact (enumerating) code paths will touch.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Slack allowed on checker inequalities.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDomain {
    levels: Vec<usize>,
}

impl LatticeDomain {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("domain needs at least one coordinate".into()));
        }
        if let Some(i) = levels.iter().position(|&k| k < 2) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {i} has {} levels, need at least 2",
                levels[i]
            )));
        }
        Ok(LatticeDomain { levels })
    }

    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![k; n])
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn level_count(&self, i: usize) -> usize {
        self.levels[i]
    }

    pub fn max_levels(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// `Some(k)` when every coordinate has `k` levels.
    pub fn uniform_levels(&self) -> Option<usize> {
        let k = self.levels[0];
        self.levels.iter().all(|&l| l == k).then_some(k)
    }

    /// `∏ k_i`, or `None` on overflow.
    pub fn cardinality(&self) -> Option<u64> {
        self.levels.iter().try_fold(1u64, |acc, &k| acc.checked_mul(k as u64))
    }

    pub fn ensure_enumerable(&self, cap: u64) -> Result<u64> {
        match self.cardinality() {
            Some(size) if size <= cap => Ok(size),
            Some(size) => Err(Error::TooLargeToEnumerate {
                size: size.to_string(),
                cap,
            }),
            None => Err(Error::TooLargeToEnumerate {
                size: format!(
                    "∏ of {:?}",
                    if self.n() > 8 {
                        &self.levels[..8]
                    } else {
                        &self.levels[..]
                    }
                ),
                cap,
            }),
        }
    }

    pub fn zero(&self) -> IntegerPoint {
        IntegerPoint {
            coords: vec![0; self.n()],
        }
    }

    pub fn top(&self) -> IntegerPoint {
        IntegerPoint {
            coords: self.levels.iter().map(|&k| k - 1).collect(),
        }
    }

    pub fn contains(&self, x: &[usize]) -> bool {
        x.len() == self.n() && x.iter().zip(&self.levels).all(|(&v, &k)| v < k)
    }

    pub fn point(&self, coords: Vec<usize>) -> Result<IntegerPoint> {
        if coords.len() != self.n() {
            return Err(Error::DomainMismatch {
                expected: self.n(),
                got: coords.len(),
            });
        }
        for (index, (&value, &levels)) in coords.iter().zip(&self.levels).enumerate() {
            if value >= levels {
                return Err(Error::OutOfDomain { index, value, levels });
            }
        }
        Ok(IntegerPoint { coords })
    }

    /// Lexicographic rank of `x` (first coordinate most significant).
    pub fn index_of(&self, x: &[usize]) -> u64 {
        x.iter()
            .zip(&self.levels)
            .fold(0u64, |acc, (&v, &k)| acc * k as u64 + v as u64)
    }

    /// Inverse of [`index_of`](Self::index_of), written into `out`.
    pub fn point_at(&self, mut index: u64, out: &mut [usize]) {
        for (slot, &k) in out.iter_mut().zip(&self.levels).rev() {
            *slot = (index % k as u64) as usize;
            index /= k as u64;
        }
    }

    /// Every point once, in lexicographic order.
    pub fn enumerate(&self) -> Result<DomainIter<'_>> {
        self.enumerate_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_with_cap(&self, cap: u64) -> Result<DomainIter<'_>> {
        self.ensure_enumerable(cap)?;
        Ok(DomainIter {
            domain: self,
            next: Some(vec![0; self.n()]),
        })
    }
}

/// Odometer over a [`LatticeDomain`].
pub struct DomainIter<'a> {
    domain: &'a LatticeDomain,
    next: Option<Vec<usize>>,
}

impl Iterator for DomainIter<'_> {
    type Item = IntegerPoint;

    fn next(&mut self) -> Option<IntegerPoint> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if advance(&mut succ, self.domain.levels()) {
            self.next = Some(succ);
        }
        Some(IntegerPoint { coords: current })
    }
}

/// Steps `x` to its lexicographic successor; false when `x` was the top.
pub(crate) fn advance(x: &mut [usize], levels: &[usize]) -> bool {
    for i in (0..x.len()).rev() {
        x[i] += 1;
        if x[i] < levels[i] {
            return true;
        }
        x[i] = 0;
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegerPoint {
    coords: Vec<usize>,
}

impl IntegerPoint {
    /// A point without a domain check; the lattice operations only need equal lengths.
    pub fn new(coords: Vec<usize>) -> Self {
        IntegerPoint { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<usize> {
        self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Componentwise `self ≤ other` (sub-multiset).
    pub fn le(&self, other: &IntegerPoint) -> bool {
        self.coords.len() == other.coords.len() && self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b)
    }

    fn zip_with(&self, other: &IntegerPoint, op: impl Fn(usize, usize) -> usize) -> Result<IntegerPoint> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DomainMismatch {
                expected: self.coords.len(),
                got: other.coords.len(),
            });
        }
        Ok(IntegerPoint {
            coords: self.coords.iter().zip(&other.coords).map(|(&a, &b)| op(a, b)).collect(),
        })
    }
}

impl From<Vec<usize>> for IntegerPoint {
    fn from(coords: Vec<usize>) -> Self {
        IntegerPoint { coords }
    }
}

impl std::fmt::Display for IntegerPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Componentwise maximum (multiset union).
pub fn join(x: &IntegerPoint, y: &IntegerPoint) -> Result<IntegerPoint> {
    x.zip_with(y, usize::max)
}

/// Componentwise minimum (multiset intersection).
pub fn meet(x: &IntegerPoint, y: &IntegerPoint) -> Result<IntegerPoint> {
    x.zip_with(y, usize::min)
}

/// `max(x_i - y_i, 0)` per coordinate.
pub fn multiset_difference(x: &IntegerPoint, y: &IntegerPoint) -> Result<IntegerPoint> {
    x.zip_with(y, usize::saturating_sub)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// `f(x) + f(y) - f(x ∨ y) - f(x ∧ y) = deficit < 0`.
    Lattice {
        x: IntegerPoint,
        y: IntegerPoint,
        deficit: f64,
    },
    /// `x ≤ y` and `[f(x + e_i) - f(x)] - [f(y + e_i) - f(y)] = deficit < 0`.
    DiminishingReturns {
        x: IntegerPoint,
        y: IntegerPoint,
        coord: usize,
        deficit: f64,
    },
    /// `f(x + e_i) < f(x)`.
    Monotonicity {
        x: IntegerPoint,
        coord: usize,
        deficit: f64,
    },
    /// Positive mixed second derivative `∂²F/∂ρ_ij ∂ρ_kl`, or a nonzero
    /// same-block one.
    MixedSecondDerivative {
        block_a: usize,
        level_a: usize,
        block_b: usize,
        level_b: usize,
        value: f64,
    },
    /// Negative `∂F/∂ρ_ij` for an objective declared monotone.
    NegativeGradient { block: usize, level: usize, value: f64 },
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Witness::Lattice { x, y, deficit } => write!(f, "x={x} y={y} deficit={deficit:e}"),
            Witness::DiminishingReturns { x, y, coord, deficit } => {
                write!(f, "x={x} y={y} coordinate {coord} deficit={deficit:e}")
            }
            Witness::Monotonicity { x, coord, deficit } => write!(f, "x={x} coordinate {coord} deficit={deficit:e}"),
            Witness::MixedSecondDerivative {
                block_a,
                level_a,
                block_b,
                level_b,
                value,
            } => write!(f, "d2F/d({block_a},{level_a})d({block_b},{level_b}) = {value:e}"),
            Witness::NegativeGradient { block, level, value } => write!(f, "dF/d({block},{level}) = {value:e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    /// Number of inequalities evaluated before stopping.
    pub checks: u64,
    pub witness: Option<Witness>,
}

impl CheckReport {
    pub(crate) fn pass(checks: u64) -> Self {
        CheckReport {
            passed: true,
            checks,
            witness: None,
        }
    }

    pub(crate) fn fail(checks: u64, witness: Witness) -> Self {
        CheckReport {
            passed: false,
            checks,
            witness: Some(witness),
        }
    }
}

/// Values of `f` over the whole domain in lexicographic order.
pub fn tabulate(f: &dyn Objective) -> Result<Vec<f64>> {
    let domain = f.domain();
    let size = domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)? as usize;
    let mut values = Vec::with_capacity(size);
    let mut x = vec![0; domain.n()];
    loop {
        values.push(f.evaluate(&x));
        if !advance(&mut x, domain.levels()) {
            break;
        }
    }
    Ok(values)
}

/// Checks `f(x) + f(y) ≥ f(x ∨ y) + f(x ∧ y)` on every pair of points.
///
/// Pairs are scanned with `x` outer and `y > x` inner, both lexicographic; the
/// reported witness is the first violation in that order. Cost is quadratic in
/// the domain size.
pub fn check_lattice_submodular(f: &dyn Objective) -> Result<CheckReport> {
    let domain = f.domain();
    let table = tabulate(f)?;
    let size = table.len();
    let n = domain.n();

    let found = par::find_first(size, |a| {
        let mut x = vec![0; n];
        let mut y = vec![0; n];
        let mut hi = vec![0; n];
        let mut lo = vec![0; n];
        domain.point_at(a as u64, &mut x);
        for b in a + 1..size {
            domain.point_at(b as u64, &mut y);
            for i in 0..n {
                hi[i] = x[i].max(y[i]);
                lo[i] = x[i].min(y[i]);
            }
            let deficit =
                table[a] + table[b] - table[domain.index_of(&hi) as usize] - table[domain.index_of(&lo) as usize];
            if deficit < -CHECK_TOLERANCE {
                return Some(Witness::Lattice {
                    x: IntegerPoint::new(x),
                    y: IntegerPoint::new(y),
                    deficit,
                });
            }
        }
        None
    });

    let pairs = (size as u64) * (size as u64 - 1) / 2;
    Ok(match found {
        Some(w) => CheckReport::fail(pairs, w),
        None => CheckReport::pass(pairs),
    })
}

/// Checks diminishing returns: `f(x + e_i) - f(x) ≥ f(y + e_i) - f(y)` for all
/// `x ≤ y` and every `i` with `y + e_i` still in the domain.
///
/// Scan order is `x` (lexicographic), then `y` over the box `[x, top]`
/// (lexicographic), then `i`.
pub fn check_dr_submodular(f: &dyn Objective) -> Result<CheckReport> {
    let domain = f.domain();
    let table = tabulate(f)?;
    let n = domain.n();
    let levels = domain.levels();
    let strides = strides(levels);

    let found = par::find_first(table.len(), |a| {
        let mut x = vec![0; n];
        domain.point_at(a as u64, &mut x);
        let mut y = x.clone();
        loop {
            let b = domain.index_of(&y) as usize;
            for i in 0..n {
                if y[i] + 1 >= levels[i] {
                    continue;
                }
                let gain_x = table[a + strides[i]] - table[a];
                let gain_y = table[b + strides[i]] - table[b];
                let deficit = gain_x - gain_y;
                if deficit < -CHECK_TOLERANCE {
                    return Some(Witness::DiminishingReturns {
                        x: IntegerPoint::new(x),
                        y: IntegerPoint::new(y),
                        coord: i,
                        deficit,
                    });
                }
            }
            if !advance_in_box(&mut y, &x, levels) {
                return None;
            }
        }
    });

    Ok(match found {
        Some(w) => CheckReport::fail(table.len() as u64, w),
        None => CheckReport::pass(table.len() as u64),
    })
}

/// Checks `f(x) ≤ f(x + e_i)` everywhere, which is equivalent to monotonicity
/// on a product of chains. A failure doubles as a non-monotonicity witness.
pub fn check_monotone(f: &dyn Objective) -> Result<CheckReport> {
    let domain = f.domain();
    let table = tabulate(f)?;
    let n = domain.n();
    let levels = domain.levels();
    let strides = strides(levels);

    let found = par::find_first(table.len(), |a| {
        let mut x = vec![0; n];
        domain.point_at(a as u64, &mut x);
        (0..n).find_map(|i| {
            if x[i] + 1 >= levels[i] {
                return None;
            }
            let deficit = table[a + strides[i]] - table[a];
            (deficit < -CHECK_TOLERANCE).then(|| Witness::Monotonicity {
                x: IntegerPoint::new(x.clone()),
                coord: i,
                deficit,
            })
        })
    });

    Ok(match found {
        Some(w) => CheckReport::fail(table.len() as u64, w),
        None => CheckReport::pass(table.len() as u64),
    })
}

/// Lexicographic index stride of each coordinate.
fn strides(levels: &[usize]) -> Vec<usize> {
    let mut s = vec![1; levels.len()];
    for i in (0..levels.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * levels[i + 1];
    }
    s
}

/// Odometer restricted to `{y : floor ≤ y ≤ top}`.
fn advance_in_box(y: &mut [usize], floor: &[usize], levels: &[usize]) -> bool {
    for i in (0..y.len()).rev() {
        y[i] += 1;
        if y[i] < levels[i] {
            return true;
        }
        y[i] = floor[i];
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Modular, Tabulated};

    fn p(v: &[usize]) -> IntegerPoint {
        IntegerPoint::new(v.to_vec())
    }

    #[test]
    fn join_meet_difference_examples() {
        let x = p(&[1, 0, 2]);
        let y = p(&[0, 2, 1]);
        assert_eq!(join(&x, &y).unwrap(), p(&[1, 2, 2]));
        assert_eq!(meet(&x, &y).unwrap(), p(&[0, 0, 1]));
        assert_eq!(multiset_difference(&x, &y).unwrap(), p(&[1, 0, 1]));

        assert_eq!(join(&x, &x).unwrap(), x);
        assert_eq!(meet(&x, &x).unwrap(), x);
        assert_eq!(multiset_difference(&x, &x).unwrap(), p(&[0, 0, 0]));

        let d = LatticeDomain::uniform(3, 3).unwrap();
        assert_eq!(join(&d.zero(), &y).unwrap(), y);
        assert_eq!(meet(&x, &d.top()).unwrap(), x);
        assert_eq!(multiset_difference(&x, &d.zero()).unwrap(), x);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let err = join(&p(&[1, 2]), &p(&[1])).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch { expected: 2, got: 1 }));
        assert!(meet(&p(&[1]), &p(&[1, 2])).is_err());
        assert!(multiset_difference(&p(&[]), &p(&[0])).is_err());
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let d = LatticeDomain::uniform(1, 2).unwrap();
        let pts: Vec<_> = d.enumerate().unwrap().map(IntegerPoint::into_coords).collect();
        assert_eq!(pts, vec![vec![0], vec![1]]);

        let d = LatticeDomain::uniform(2, 2).unwrap();
        let pts: Vec<_> = d.enumerate().unwrap().map(IntegerPoint::into_coords).collect();
        assert_eq!(pts, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);

        let d = LatticeDomain::uniform(2, 3).unwrap();
        assert_eq!(d.enumerate().unwrap().count(), 9);

        let d = LatticeDomain::new(vec![2, 3, 4]).unwrap();
        for (rank, x) in d.enumerate().unwrap().enumerate() {
            assert_eq!(d.index_of(x.coords()), rank as u64);
            let mut back = vec![0; 3];
            d.point_at(rank as u64, &mut back);
            assert_eq!(back, x.coords());
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let d = LatticeDomain::uniform(30, 3).unwrap();
        assert!(matches!(d.enumerate(), Err(Error::TooLargeToEnumerate { .. })));
        let d = LatticeDomain::uniform(200, 10).unwrap();
        assert_eq!(d.cardinality(), None);
        assert!(matches!(d.enumerate(), Err(Error::TooLargeToEnumerate { .. })));
        let d = LatticeDomain::uniform(3, 3).unwrap();
        assert!(d.enumerate_with_cap(26).is_err());
        assert!(d.enumerate_with_cap(27).is_ok());
    }

    #[test]
    fn domain_validation() {
        assert!(LatticeDomain::new(vec![]).is_err());
        assert!(LatticeDomain::new(vec![2, 1]).is_err());
        let d = LatticeDomain::new(vec![2, 3]).unwrap();
        assert!(d.point(vec![1, 2]).is_ok());
        assert!(matches!(
            d.point(vec![2, 0]),
            Err(Error::OutOfDomain {
                index: 0,
                value: 2,
                levels: 2
            })
        ));
        assert!(d.point(vec![0]).is_err());
    }

    #[test]
    fn modular_function_is_tight() {
        let f = Modular::linear(&[1.5, -2.0, 0.25], 3).unwrap();
        let report = check_lattice_submodular(&f).unwrap();
        assert!(report.passed);
        for x in f.domain().enumerate().unwrap() {
            for y in f.domain().enumerate().unwrap() {
                let lhs = f.evaluate(x.coords()) + f.evaluate(y.coords());
                let rhs = f.evaluate(join(&x, &y).unwrap().coords()) + f.evaluate(meet(&x, &y).unwrap().coords());
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_is_supermodular() {
        let d = LatticeDomain::uniform(2, 2).unwrap();
        let f = Tabulated::from_fn(d, |x| (x[0] * x[1]) as f64).unwrap();
        let report = check_lattice_submodular(&f).unwrap();
        assert!(!report.passed);
        match report.witness.unwrap() {
            Witness::Lattice { x, y, deficit } => {
                assert_eq!(x, p(&[0, 1]));
                assert_eq!(y, p(&[1, 0]));
                assert_eq!(deficit, -1.0);
            }
            w => panic!("unexpected witness {w:?}"),
        }
        assert!(!check_dr_submodular(&f).unwrap().passed);
    }
}
