//! The generalized multilinear extension `F(ρ) = E[f(R(ρ))]`.
//!
//! `R(ρ)` draws coordinate `i` from the categorical distribution `ρ_i`
//! independently of the others. `F` is affine in every single `ρ_ij`, so each
//! partial derivative is a difference of two clamped extensions:
//!
//! ```text
//! ∂F/∂ρ_ij = F(ρ_i = e_j) - F(ρ_i = 0)
//! ```
//!
//! Exact routines enumerate the `∏ k_i` lattice points and refuse domains
//! above [`DEFAULT_ENUMERATION_CAP`]. Monte Carlo routines draw sample `s`
//! from substream `s` of the supplied [`SeedStream`] and reduce in fixed
//! chunks, so their output does not depend on the worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{advance, CheckReport, Witness, CHECK_TOLERANCE, DEFAULT_ENUMERATION_CAP};
use crate::marginals::{block_offsets, ProductCategorical};
use crate::objective::Objective;
use crate::par;
use crate::rng::SeedStream;

/// `∂/∂ρ_ij` for every block `i` and level `j ∈ 1..k_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientMatrix {
    levels: Vec<usize>,
    offsets: Vec<usize>,
    entries: Vec<f64>,
}

impl GradientMatrix {
    pub fn zeros(levels: &[usize]) -> Self {
        let offsets = block_offsets(levels);
        GradientMatrix {
            levels: levels.to_vec(),
            entries: vec![0.0; offsets[levels.len()]],
            offsets,
        }
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Entry for block `i`, level `j ≥ 1`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.block(i)[j - 1]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// Entrywise sum; shapes must agree.
    pub fn add(&self, other: &GradientMatrix) -> GradientMatrix {
        assert_eq!(self.levels, other.levels, "gradient shapes differ");
        GradientMatrix {
            levels: self.levels.clone(),
            offsets: self.offsets.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Sample standard deviation over `√samples`.
    pub stderr: f64,
    pub samples: u64,
}

/// Sampled gradient with per-entry standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub mean: GradientMatrix,
    pub stderr: GradientMatrix,
    pub samples: u64,
}

pub(crate) fn check_shape(f: &dyn Objective, rho: &ProductCategorical) -> Result<()> {
    let levels = f.domain().levels();
    if levels.len() != rho.n() {
        return Err(Error::DomainMismatch {
            expected: levels.len(),
            got: rho.n(),
        });
    }
    if levels != rho.levels() {
        return Err(Error::InvalidParameter(format!(
            "marginal levels {:?} do not match domain levels {levels:?}",
            rho.levels()
        )));
    }
    Ok(())
}

/// Per-block level distributions, level 0 first.
fn level_tables(rho: &ProductCategorical) -> Vec<Vec<f64>> {
    (0..rho.n()).map(|i| rho.level_probs(i)).collect()
}

/// `Σ_x f(x) ∏_i probs[i][x_i]` over the whole domain.
///
/// `probs` need not be distributions; the sum is the multilinear polynomial
/// evaluated at arbitrary coefficients.
fn expectation(f: &dyn Objective, probs: &[Vec<f64>]) -> Result<f64> {
    let domain = f.domain();
    let size = domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)? as usize;
    let n = domain.n();
    let total = par::chunked_reduce(
        size,
        |start, end| {
            let mut x = vec![0; n];
            domain.point_at(start as u64, &mut x);
            let mut acc = 0.0;
            for _ in start..end {
                let w: f64 = x.iter().enumerate().map(|(i, &l)| probs[i][l]).product();
                if w != 0.0 {
                    acc += w * f.evaluate(&x);
                }
                advance(&mut x, domain.levels());
            }
            acc
        },
        |a, b| a + b,
    );
    Ok(total.unwrap_or(0.0))
}

/// Exact `F(ρ)` by enumeration.
pub fn gme_exact(f: &dyn Objective, rho: &ProductCategorical) -> Result<f64> {
    check_shape(f, rho)?;
    expectation(f, &level_tables(rho))
}

/// Sample mean of `f(R(ρ))` over `samples` draws.
pub fn gme_estimate(
    f: &dyn Objective,
    rho: &ProductCategorical,
    samples: u64,
    seed: &SeedStream,
) -> Result<EstimateWithError> {
    check_shape(f, rho)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let n = rho.n();
    let stats = par::chunked_reduce(
        samples as usize,
        |start, end| {
            let mut x = vec![0; n];
            let mut m = Moments::default();
            for s in start..end {
                rho.sample_into(&mut seed.substream(s as u64), &mut x);
                m.push(f.evaluate(&x));
            }
            m
        },
        Moments::merge,
    )
    .unwrap_or_default();
    Ok(EstimateWithError {
        value: stats.mean,
        stderr: stats.stderr(),
        samples,
    })
}

/// Exact gradient of `F`.
///
/// One pass over the domain accumulates `G_i(l) = F(ρ_i = e_l)` for every
/// block and level (with `e_0 = 0`) using leave-one-out probability products;
/// the gradient is `G_i(j) - G_i(0)`.
pub fn gradient_exact(f: &dyn Objective, rho: &ProductCategorical) -> Result<GradientMatrix> {
    check_shape(f, rho)?;
    let domain = f.domain();
    let size = domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)? as usize;
    let n = domain.n();
    let probs = level_tables(rho);
    let full_offsets: Vec<usize> = std::iter::once(0)
        .chain(domain.levels().iter().scan(0, |acc, &k| {
            *acc += k;
            Some(*acc)
        }))
        .collect();
    let width = full_offsets[n];

    let clamped = par::chunked_reduce(
        size,
        |start, end| {
            let mut acc = vec![0.0; width];
            let mut x = vec![0; n];
            let mut prefix = vec![1.0; n + 1];
            let mut suffix = vec![1.0; n + 1];
            domain.point_at(start as u64, &mut x);
            for _ in start..end {
                for i in 0..n {
                    prefix[i + 1] = prefix[i] * probs[i][x[i]];
                }
                for i in (0..n).rev() {
                    suffix[i] = suffix[i + 1] * probs[i][x[i]];
                }
                let mut value = None;
                for i in 0..n {
                    let w = prefix[i] * suffix[i + 1];
                    if w != 0.0 {
                        let v = *value.get_or_insert_with(|| f.evaluate(&x));
                        acc[full_offsets[i] + x[i]] += w * v;
                    }
                }
                advance(&mut x, domain.levels());
            }
            acc
        },
        |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        },
    )
    .unwrap_or_else(|| vec![0.0; width]);

    let mut g = GradientMatrix::zeros(domain.levels());
    for i in 0..n {
        let base = clamped[full_offsets[i]];
        for (j, slot) in g.block_mut(i).iter_mut().enumerate() {
            *slot = clamped[full_offsets[i] + j + 1] - base;
        }
    }
    Ok(g)
}

/// Exact `∂F/∂ρ_ij` for one block, by enumerating the other coordinates and
/// sweeping coordinate `i`.
pub fn gradient_block_exact(f: &dyn Objective, rho: &ProductCategorical, i: usize) -> Result<Vec<f64>> {
    check_shape(f, rho)?;
    if i >= rho.n() {
        return Err(Error::BlockOutOfRange {
            index: i,
            blocks: rho.n(),
        });
    }
    let domain = f.domain();
    domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)?;
    let n = domain.n();
    let k = domain.level_count(i);
    let probs = level_tables(rho);
    // Odometer over the other coordinates: coordinate i is pinned to 0 by
    // giving it a single level.
    let mut rest_levels = domain.levels().to_vec();
    rest_levels[i] = 1;
    let mut x = vec![0; n];
    let mut sweep = vec![0.0; k];
    let mut acc = vec![0.0; k];
    loop {
        let w: f64 = (0..n).filter(|&m| m != i).map(|m| probs[m][x[m]]).product();
        if w != 0.0 {
            f.coordinate_sweep(&x, i, &mut sweep);
            for l in 1..k {
                acc[l] += w * (sweep[l] - sweep[0]);
            }
        }
        if !advance(&mut x, &rest_levels) {
            break;
        }
    }
    Ok(acc[1..].to_vec())
}

/// Common-random-number estimate of the full gradient.
///
/// Sample `s` draws one point `R` and, for every block `i`, evaluates
/// `f(R_{-i}, x_i = j) - f(R_{-i}, x_i = 0)` for all `j` on the shared
/// remainder `R_{-i}`. The coordinate `R_i` itself is discarded, so each entry
/// is an unbiased average over independent draws of the other coordinates.
pub fn gradient_estimate(
    f: &dyn Objective,
    rho: &ProductCategorical,
    samples: u64,
    seed: &SeedStream,
) -> Result<GradientEstimate> {
    check_shape(f, rho)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let levels = rho.levels();
    let n = levels.len();
    let width: usize = levels.iter().sum();
    let grad_width = width - n;

    let stats = par::chunked_reduce(
        samples as usize,
        |start, end| {
            let mut x = vec![0; n];
            let mut sweep = vec![0.0; width];
            let mut diffs = vec![0.0; grad_width];
            let mut m = VecMoments::new(grad_width);
            for s in start..end {
                rho.sample_into(&mut seed.substream(s as u64), &mut x);
                f.full_sweep(&x, &mut sweep);
                let (mut src, mut dst) = (0, 0);
                for &k in levels {
                    for j in 1..k {
                        diffs[dst] = sweep[src + j] - sweep[src];
                        dst += 1;
                    }
                    src += k;
                }
                m.push(&diffs);
            }
            m
        },
        VecMoments::merge,
    )
    .expect("at least one sample");

    let mut mean = GradientMatrix::zeros(levels);
    let mut stderr = GradientMatrix::zeros(levels);
    mean.entries.copy_from_slice(&stats.mean);
    for (slot, m2) in stderr.entries.iter_mut().zip(&stats.m2) {
        *slot = stderr_of(*m2, stats.count);
    }
    Ok(GradientEstimate { mean, stderr, samples })
}

/// Common-random-number estimate of one gradient block; returns the means and
/// their standard errors.
pub fn gradient_block_estimate(
    f: &dyn Objective,
    rho: &ProductCategorical,
    i: usize,
    samples: u64,
    seed: &SeedStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shape(f, rho)?;
    if i >= rho.n() {
        return Err(Error::BlockOutOfRange {
            index: i,
            blocks: rho.n(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let n = rho.n();
    let k = rho.level_count(i);
    let stats = par::chunked_reduce(
        samples as usize,
        |start, end| {
            let mut x = vec![0; n];
            let mut sweep = vec![0.0; k];
            let mut diffs = vec![0.0; k - 1];
            let mut m = VecMoments::new(k - 1);
            for s in start..end {
                rho.sample_into(&mut seed.substream(s as u64), &mut x);
                f.coordinate_sweep(&x, i, &mut sweep);
                for j in 1..k {
                    diffs[j - 1] = sweep[j] - sweep[0];
                }
                m.push(&diffs);
            }
            m
        },
        VecMoments::merge,
    )
    .expect("at least one sample");
    let stderr = stats.m2.iter().map(|&m2| stderr_of(m2, stats.count)).collect();
    Ok((stats.mean, stderr))
}

/// Smallest `S` with `2 exp(-2 S ε² / B²) ≤ δ`, i.e. `⌈B² ln(2/δ) / (2ε²)⌉`.
pub fn hoeffding_samples(range: f64, eps: f64, delta: f64) -> Result<u64> {
    if !(range > 0.0) || !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Hoeffding bound needs B > 0, ε > 0, 0 < δ < 1 (got B={range}, ε={eps}, δ={delta})"
        )));
    }
    let s = (range * range * (2.0 / delta).ln() / (2.0 * eps * eps)).ceil();
    Ok(s.max(1.0) as u64)
}

/// Numerical certificate that `F` is DR-submodular at `ρ`.
///
/// For block pairs `i ≠ k` the mixed derivative is the exact four-point
/// identity
///
/// ```text
/// ∂²F/∂ρ_ij∂ρ_kl = F(e_j, e_l) + F(0, 0) - F(e_j, 0) - F(0, e_l)
/// ```
///
/// with blocks `i` and `k` clamped, which must be `≤ 1e-9`. Same-block second
/// derivatives are measured by second differences of the multilinear polynomial
/// and must vanish within `1e-9`. If `f` declares itself monotone, every
/// `∂F/∂ρ_ij` must also be `≥ -1e-9`.
///
/// All block pairs are checked when there are at most `trials` of them;
/// otherwise `trials` pairs are drawn from `seed`.
pub fn dr_certificate(
    f: &dyn Objective,
    rho: &ProductCategorical,
    trials: u64,
    seed: &SeedStream,
) -> Result<CheckReport> {
    check_shape(f, rho)?;
    let domain = f.domain();
    domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)?;
    let n = domain.n();
    let probs = level_tables(rho);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let all = (n * (n + 1) / 2) as u64;
    if all <= trials.max(1) {
        for a in 0..n {
            for b in a..n {
                pairs.push((a, b));
            }
        }
    } else {
        use rand::Rng;
        let mut rng = seed.substream(0);
        for _ in 0..trials {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            pairs.push((a.min(b), a.max(b)));
        }
    }

    let mut checks = 0u64;
    for (a, b) in pairs {
        if a == b {
            if let Some(w) = same_block_curvature(f, &probs, a, &mut checks)? {
                return Ok(CheckReport::fail(checks, w));
            }
            continue;
        }
        let table = pair_table(f, &probs, a, b)?;
        let (ka, kb) = (domain.level_count(a), domain.level_count(b));
        for j in 1..ka {
            for l in 1..kb {
                checks += 1;
                let value = table[j * kb + l] + table[0] - table[j * kb] - table[l];
                if value > CHECK_TOLERANCE {
                    return Ok(CheckReport::fail(
                        checks,
                        Witness::MixedSecondDerivative {
                            block_a: a,
                            level_a: j,
                            block_b: b,
                            level_b: l,
                            value,
                        },
                    ));
                }
            }
        }
    }

    if f.is_monotone() {
        let g = gradient_exact(f, rho)?;
        for i in 0..n {
            for (j, &value) in g.block(i).iter().enumerate() {
                checks += 1;
                if value < -CHECK_TOLERANCE {
                    return Ok(CheckReport::fail(
                        checks,
                        Witness::NegativeGradient {
                            block: i,
                            level: j + 1,
                            value,
                        },
                    ));
                }
            }
        }
    }
    Ok(CheckReport::pass(checks))
}

/// `H[x_a * k_b + x_b] = F` with blocks `a` and `b` clamped to levels
/// `x_a`, `x_b`.
fn pair_table(f: &dyn Objective, probs: &[Vec<f64>], a: usize, b: usize) -> Result<Vec<f64>> {
    let domain = f.domain();
    let (ka, kb) = (domain.level_count(a), domain.level_count(b));
    let mut table = vec![0.0; ka * kb];
    let mut x = vec![0; domain.n()];
    loop {
        let w: f64 = x
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != a && m != b)
            .map(|(m, &l)| probs[m][l])
            .product();
        if w != 0.0 {
            table[x[a] * kb + x[b]] += w * f.evaluate(&x);
        }
        if !advance(&mut x, domain.levels()) {
            break;
        }
    }
    Ok(table)
}

/// Second differences of `F` inside block `a`, step `h = 1/2` on the
/// polynomial (feasibility is irrelevant for a polynomial identity).
fn same_block_curvature(f: &dyn Objective, probs: &[Vec<f64>], a: usize, checks: &mut u64) -> Result<Option<Witness>> {
    const H: f64 = 0.5;
    let k = f.domain().level_count(a);
    let shifted = |steps: &[(usize, f64)]| -> Result<f64> {
        let mut p = probs.to_vec();
        for &(j, h) in steps {
            p[a][j] += h;
            p[a][0] -= h;
        }
        expectation(f, &p)
    };
    let base = shifted(&[])?;
    let single: Vec<f64> = (1..k).map(|j| shifted(&[(j, H)])).collect::<Result<_>>()?;
    for j in 1..k {
        for l in j..k {
            *checks += 1;
            let both = if j == l {
                shifted(&[(j, 2.0 * H)])?
            } else {
                shifted(&[(j, H), (l, H)])?
            };
            let value = (both - single[j - 1] - single[l - 1] + base) / (H * H);
            if value.abs() > CHECK_TOLERANCE {
                return Ok(Some(Witness::MixedSecondDerivative {
                    block_a: a,
                    level_a: j,
                    block_b: a,
                    level_b: l,
                    value,
                }));
            }
        }
    }
    Ok(None)
}

fn stderr_of(m2: f64, count: u64) -> f64 {
    if count < 2 {
        return 0.0;
    }
    let var = (m2 / (count - 1) as f64).max(0.0);
    (var / count as f64).sqrt()
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Moments {
            count,
            mean: a.mean + d * b.count as f64 / count as f64,
            m2: a.m2 + b.m2 + d * d * a.count as f64 * b.count as f64 / count as f64,
        }
    }

    fn stderr(&self) -> f64 {
        stderr_of(self.m2, self.count)
    }
}

/// [`Moments`] for a vector of statistics sharing one sample count.
#[derive(Clone, Debug)]
struct VecMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VecMoments {
    fn new(width: usize) -> Self {
        VecMoments {
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.count += 1;
        let c = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
            let d = x - *mean;
            *mean += d / c;
            *m2 += d * (x - *mean);
        }
    }

    fn merge(mut a: VecMoments, b: VecMoments) -> VecMoments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let (ca, cb) = (a.count as f64, b.count as f64);
        for i in 0..a.mean.len() {
            let d = b.mean[i] - a.mean[i];
            a.mean[i] += d * cb / count as f64;
            a.m2[i] += b.m2[i] + d * d * ca * cb / count as f64;
        }
        a.count = count;
        a
    }
}
