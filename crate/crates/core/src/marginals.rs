//! The mean-field family: products of independent categorical distributions.
//!
//! Block `i` stores the probabilities of levels `1..k_i`; level 0 carries the
//! residual mass `1 - Σ_j ρ_ij`. The feasible set is the product of the
//! down-closed simplexes `{ρ_i ≥ 0, Σ_j ρ_ij ≤ 1}`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gme::GradientMatrix;
use crate::lattice::{IntegerPoint, LatticeDomain};
use crate::rng::SeedStream;

/// Feasibility slack for stored parameters.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Default interior clip for [`ProductCategorical::entropy_gradient`].
pub const DEFAULT_ENTROPY_CLIP: f64 = 1e-6;

/// Replacement value for one block: the zero vertex or a unit vector `e_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vertex {
    Zero,
    /// `e_j` for a level `j ≥ 1`.
    Level(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductCategorical {
    levels: Vec<usize>,
    /// Start of block `i` in `rho`; `offsets[n]` is the total length.
    offsets: Vec<usize>,
    rho: Vec<f64>,
}

pub(crate) fn block_offsets(levels: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(levels.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for &k in levels {
        acc += k - 1;
        offsets.push(acc);
    }
    offsets
}

impl ProductCategorical {
    /// Builds from explicit blocks; `blocks[i]` holds levels `1..k_i`.
    pub fn new(domain: &LatticeDomain, blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.len() != domain.n() {
            return Err(Error::DomainMismatch {
                expected: domain.n(),
                got: blocks.len(),
            });
        }
        for (i, (b, &k)) in blocks.iter().zip(domain.levels()).enumerate() {
            if b.len() != k - 1 {
                return Err(Error::InvalidSimplex {
                    block: i,
                    reason: format!("expected {} entries, got {}", k - 1, b.len()),
                });
            }
        }
        let rho = blocks.into_iter().flatten().collect();
        Self::from_flat(domain.levels().to_vec(), rho)
    }

    pub fn from_flat(levels: Vec<usize>, rho: Vec<f64>) -> Result<Self> {
        let offsets = block_offsets(&levels);
        if rho.len() != offsets[levels.len()] {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                offsets[levels.len()],
                rho.len()
            )));
        }
        let out = ProductCategorical { levels, offsets, rho };
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn from_flat_unchecked(levels: Vec<usize>, rho: Vec<f64>) -> Self {
        let offsets = block_offsets(&levels);
        debug_assert_eq!(rho.len(), offsets[levels.len()]);
        ProductCategorical { levels, offsets, rho }
    }

    /// Every level of every block at probability `1/k_i`.
    pub fn uniform(domain: &LatticeDomain) -> Self {
        let rho = domain
            .levels()
            .iter()
            .flat_map(|&k| std::iter::repeat_n(1.0 / k as f64, k - 1))
            .collect();
        Self::from_flat_unchecked(domain.levels().to_vec(), rho)
    }

    /// All mass on level 0.
    pub fn zero(domain: &LatticeDomain) -> Self {
        let offsets = block_offsets(domain.levels());
        Self::from_flat_unchecked(domain.levels().to_vec(), vec![0.0; offsets[domain.n()]])
    }

    /// Point mass at `x`.
    pub fn point_mass(domain: &LatticeDomain, x: &[usize]) -> Result<Self> {
        let x = domain.point(x.to_vec())?;
        let mut rho = Self::zero(domain);
        for (i, &l) in x.coords().iter().enumerate() {
            if l > 0 {
                rho.block_mut(i)[l - 1] = 1.0;
            }
        }
        Ok(rho)
    }

    /// Each block drawn uniformly from the full simplex (flat Dirichlet).
    pub fn random(domain: &LatticeDomain, seed: u64) -> Self {
        let stream = SeedStream::new(seed);
        let mut rho = Vec::new();
        for (i, &k) in domain.levels().iter().enumerate() {
            let mut rng = stream.substream(i as u64);
            let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            rho.extend(draws[1..].iter().map(|d| d / total));
        }
        Self::from_flat_unchecked(domain.levels().to_vec(), rho)
    }

    /// Per-block softmax of level scores: `ρ_il ∝ exp(scores[i][l])`, level 0 included.
    pub fn softmax(domain: &LatticeDomain, scores: &[Vec<f64>]) -> Result<Self> {
        if scores.len() != domain.n() {
            return Err(Error::DomainMismatch {
                expected: domain.n(),
                got: scores.len(),
            });
        }
        let mut rho = Vec::new();
        for (s, &k) in scores.iter().zip(domain.levels()) {
            if s.len() != k {
                return Err(Error::InvalidParameter(format!("expected {k} scores, got {}", s.len())));
            }
            let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            rho.extend(e[1..].iter().map(|v| v / z));
        }
        Self::from_flat(domain.levels().to_vec(), rho)
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

    pub fn domain(&self) -> LatticeDomain {
        LatticeDomain::new(self.levels.clone()).expect("levels validated at construction")
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.rho
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.rho[self.offsets[i]..self.offsets[i + 1]]
    }

    pub(crate) fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rho[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Level-0 mass `1 - Σ_j ρ_ij`.
    pub fn residual(&self, i: usize) -> f64 {
        1.0 - self.block(i).iter().sum::<f64>()
    }

    /// Probability of level `l` (0 included) in block `i`.
    pub fn prob(&self, i: usize, l: usize) -> f64 {
        if l == 0 {
            self.residual(i)
        } else {
            self.block(i)[l - 1]
        }
    }

    /// Full distribution of block `i` over levels `0..k_i`.
    pub fn level_probs(&self, i: usize) -> Vec<f64> {
        (0..self.levels[i]).map(|l| self.prob(i, l)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(FEASIBILITY_TOLERANCE)
    }

    pub fn validate_with(&self, tol: f64) -> Result<()> {
        for i in 0..self.n() {
            let b = self.block(i);
            if let Some(j) = b.iter().position(|&v| !(v >= -tol) || !v.is_finite()) {
                return Err(Error::InvalidSimplex {
                    block: i,
                    reason: format!("entry {} = {}", j + 1, b[j]),
                });
            }
            let mass: f64 = b.iter().sum();
            if mass > 1.0 + tol {
                return Err(Error::InvalidSimplex {
                    block: i,
                    reason: format!("total mass {mass} exceeds 1"),
                });
            }
        }
        Ok(())
    }

    /// Draws one point: coordinate `i` is level `j` with probability `ρ_ij`,
    /// level 0 with the residual mass. One uniform per block, in block order.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.sample_block(i, rng.random::<f64>());
        }
    }

    /// Inverse-CDF draw for block `i` from a uniform `u ∈ [0, 1)`.
    #[inline]
    pub(crate) fn sample_block(&self, i: usize, u: f64) -> usize {
        let mut acc = 0.0;
        for (j, &p) in self.block(i).iter().enumerate() {
            acc += p;
            if u < acc {
                return j + 1;
            }
        }
        0
    }

    /// Sample number `index` of the stream `seed`.
    pub fn sample(&self, seed: &SeedStream, index: u64) -> IntegerPoint {
        let mut out = vec![0; self.n()];
        self.sample_into(&mut seed.substream(index), &mut out);
        IntegerPoint::new(out)
    }

    /// `H(ρ_i)` with `0 log 0 = 0`.
    pub fn block_entropy(&self, i: usize) -> f64 {
        let plogp = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        plogp(self.residual(i).max(0.0)) + self.block(i).iter().map(|&p| plogp(p)).sum::<f64>()
    }

    /// `Σ_i H(ρ_i)`.
    pub fn entropy(&self) -> f64 {
        (0..self.n()).map(|i| self.block_entropy(i)).sum()
    }

    /// `∂H/∂ρ_ij = log(ρ_i0 / ρ_ij)` with both probabilities clipped into
    /// `[eps, 1 - eps]` so the result stays finite on the simplex faces.
    pub fn entropy_gradient(&self, eps: f64) -> GradientMatrix {
        let clip = |p: f64| p.clamp(eps, 1.0 - eps);
        let mut g = GradientMatrix::zeros(&self.levels);
        for i in 0..self.n() {
            let base = clip(self.residual(i)).ln();
            for (slot, &p) in g.block_mut(i).iter_mut().zip(self.block(i)) {
                *slot = base - clip(p).ln();
            }
        }
        g
    }

    /// Copy with block `i` replaced by `v`.
    pub fn clamp_block(&self, i: usize, v: Vertex) -> Result<Self> {
        let mut out = self.clone();
        out.clamp_block_in_place(i, v)?;
        Ok(out)
    }

    pub(crate) fn clamp_block_in_place(&mut self, i: usize, v: Vertex) -> Result<()> {
        if i >= self.n() {
            return Err(Error::BlockOutOfRange {
                index: i,
                blocks: self.n(),
            });
        }
        let k = self.levels[i];
        let block = self.block_mut(i);
        block.iter_mut().for_each(|p| *p = 0.0);
        match v {
            Vertex::Zero => {}
            Vertex::Level(j) if (1..k).contains(&j) => block[j - 1] = 1.0,
            Vertex::Level(j) => {
                return Err(Error::InvalidParameter(format!(
                    "level {j} is not a vertex of a {k}-level block"
                )))
            }
        }
        Ok(())
    }

    /// Replaces block `i`, checking feasibility.
    pub fn set_block(&mut self, i: usize, values: &[f64]) -> Result<()> {
        if i >= self.n() {
            return Err(Error::BlockOutOfRange {
                index: i,
                blocks: self.n(),
            });
        }
        if values.len() != self.levels[i] - 1 {
            return Err(Error::InvalidSimplex {
                block: i,
                reason: format!("expected {} entries, got {}", self.levels[i] - 1, values.len()),
            });
        }
        let old: Vec<f64> = self.block(i).to_vec();
        self.block_mut(i).copy_from_slice(values);
        if let Err(e) = self.validate() {
            self.block_mut(i).copy_from_slice(&old);
            return Err(e);
        }
        Ok(())
    }

    /// Largest violation of the simplex constraints (0 when feasible).
    pub fn infeasibility(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for &p in self.block(i) {
                worst = worst.max(-p);
            }
            worst = worst.max(-self.residual(i));
        }
        worst
    }

    /// CSV with header `element,level,prob`, one row per element and level
    /// (level 0 included), probabilities to 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("element,level,prob\n");
        for i in 0..self.n() {
            for l in 0..self.levels[i] {
                let _ = writeln!(s, "{i},{l},{:.16e}", self.prob(i, l));
            }
        }
        s
    }

    /// Parses [`to_csv`](Self::to_csv) output. Level-0 rows are checked
    /// against the residual but otherwise ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "element,level,prob" => {}
            _ => {
                return Err(Error::InvalidParameter(
                    "marginal CSV must start with `element,level,prob`".into(),
                ))
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (no, line) in lines {
            let bad = || Error::InvalidParameter(format!("marginal CSV line {}: `{line}`", no + 1));
            let mut parts = line.split(',');
            let (Some(e), Some(l), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad());
            };
            let e: usize = e.trim().parse().map_err(|_| bad())?;
            let l: usize = l.trim().parse().map_err(|_| bad())?;
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            if e == rows.len() && l == 0 {
                rows.push(vec![p]);
            } else if e + 1 == rows.len() && l == rows[e].len() {
                rows[e].push(p);
            } else {
                return Err(bad());
            }
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter("marginal CSV has no rows".into()));
        }
        let levels: Vec<usize> = rows.iter().map(Vec::len).collect();
        let rho = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
        let out = Self::from_flat(levels, rho)?;
        for (i, r) in rows.iter().enumerate() {
            if (out.residual(i) - r[0]).abs() > 1e-9 {
                return Err(Error::InvalidSimplex {
                    block: i,
                    reason: format!("level-0 mass {} disagrees with residual {}", r[0], out.residual(i)),
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(n: usize, k: usize) -> LatticeDomain {
        LatticeDomain::uniform(n, k).unwrap()
    }

    #[test]
    fn rejects_infeasible_blocks() {
        let d = dom(2, 3);
        assert!(ProductCategorical::new(&d, vec![vec![0.5, 0.6], vec![0.0, 0.0]]).is_err());
        assert!(ProductCategorical::new(&d, vec![vec![-0.1, 0.2], vec![0.0, 0.0]]).is_err());
        assert!(ProductCategorical::new(&d, vec![vec![0.1], vec![0.0, 0.0]]).is_err());
        assert!(ProductCategorical::new(&d, vec![vec![0.5, 0.5], vec![0.0, 1.0]]).is_ok());
    }

    #[test]
    fn degenerate_blocks_sample_deterministically() {
        let d = dom(3, 4);
        let rho = ProductCategorical::new(&d, vec![vec![0.0, 1.0, 0.0], vec![0.0; 3], vec![0.0, 0.0, 1.0]]).unwrap();
        let s = SeedStream::new(5);
        for t in 0..200 {
            assert_eq!(rho.sample(&s, t).coords(), &[2, 0, 3]);
        }
    }

    #[test]
    fn sampling_frequencies_match_marginals() {
        let d = dom(1, 3);
        let rho = ProductCategorical::new(&d, vec![vec![1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        let s = SeedStream::new(99);
        let draws = 100_000u64;
        let mut counts = [0u64; 3];
        for t in 0..draws {
            counts[rho.sample(&s, t).coords()[0]] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn entropy_examples() {
        let d = dom(4, 3);
        assert_eq!(ProductCategorical::zero(&d).entropy(), 0.0);
        assert_eq!(
            ProductCategorical::point_mass(&d, &[1, 2, 0, 2]).unwrap().entropy(),
            0.0
        );
        let u = ProductCategorical::uniform(&d);
        assert!((u.block_entropy(0) - 3f64.ln()).abs() < 1e-15);
        assert!((u.block_entropy(0) - 1.0986).abs() < 1e-4);
        assert!((u.entropy() - 4.0 * 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn entropy_gradient_examples() {
        let d = dom(2, 3);
        let rho = ProductCategorical::new(&d, vec![vec![1.0 / 3.0, 1.0 / 3.0], vec![0.5, 0.25]]).unwrap();
        let g = rho.entropy_gradient(DEFAULT_ENTROPY_CLIP);
        assert!(g.block(0).iter().all(|v| v.abs() < 1e-15));
        assert!((g.get(1, 1) + 2f64.ln()).abs() < 1e-15);
        assert!(g.get(1, 2).abs() < 1e-15);

        let faces = ProductCategorical::point_mass(&d, &[1, 0])
            .unwrap()
            .entropy_gradient(1e-6);
        assert!(faces.as_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let d = LatticeDomain::new(vec![3, 5, 2]).unwrap();
        let rho = ProductCategorical::random(&d, 17);
        let g = rho.entropy_gradient(DEFAULT_ENTROPY_CLIP);
        let h = 1e-6;
        for i in 0..d.n() {
            for j in 0..d.level_count(i) - 1 {
                let mut plus = rho.clone();
                let mut minus = rho.clone();
                plus.block_mut(i)[j] += h;
                minus.block_mut(i)[j] -= h;
                let fd = (plus.entropy() - minus.entropy()) / (2.0 * h);
                assert!((fd - g.get(i, j + 1)).abs() < 1e-6, "block {i} level {}", j + 1);
            }
        }
    }

    #[test]
    fn clamp_block_behaviour() {
        let d = dom(3, 3);
        let rho = ProductCategorical::uniform(&d);
        let c = rho.clamp_block(1, Vertex::Level(2)).unwrap();
        assert_eq!(c.block(1), &[0.0, 1.0]);
        assert_eq!(c.block(0), rho.block(0));
        assert_eq!(c.block(2), rho.block(2));
        assert_eq!(c.clamp_block(1, Vertex::Level(2)).unwrap(), c);
        let s = SeedStream::new(1);
        for t in 0..100 {
            assert_eq!(c.sample(&s, t).coords()[1], 2);
        }
        let z = rho.clamp_block(0, Vertex::Zero).unwrap();
        for t in 0..100 {
            assert_eq!(z.sample(&s, t).coords()[0], 0);
        }
        assert!(matches!(
            rho.clamp_block(3, Vertex::Zero),
            Err(Error::BlockOutOfRange { index: 3, blocks: 3 })
        ));
        assert!(rho.clamp_block(0, Vertex::Level(3)).is_err());
        assert!(rho.clamp_block(0, Vertex::Level(0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = LatticeDomain::new(vec![2, 4, 3]).unwrap();
        let rho = ProductCategorical::random(&d, 3);
        let text = rho.to_csv();
        assert!(text.starts_with("element,level,prob\n0,0,"));
        assert_eq!(text.lines().count(), 1 + 2 + 4 + 3);
        let back = ProductCategorical::from_csv(&text).unwrap();
        assert_eq!(back.levels(), rho.levels());
        for (a, b) in back.as_flat().iter().zip(rho.as_flat()) {
            assert_eq!(a, b);
        }
        assert!(ProductCategorical::from_csv("element,level,prob\n0,1,0.5\n").is_err());
        assert!(ProductCategorical::from_csv("nope\n").is_err());
    }

    #[test]
    fn set_block_keeps_feasibility() {
        let d = dom(2, 3);
        let mut rho = ProductCategorical::uniform(&d);
        assert!(rho.set_block(0, &[0.7, 0.4]).is_err());
        assert_eq!(rho, ProductCategorical::uniform(&d));
        rho.set_block(0, &[0.7, 0.3]).unwrap();
        assert!(rho.residual(0).abs() < 1e-15);
    }
}
