//! The mean-field ELBO and its maximizers.
//!
//! ```text
//! ELBO(ρ) = F(ρ) + Σ_i H(ρ_i) ≤ log Z
//! ```
//!
//! Three drivers are provided: [`block_ca`] (exact maximization over one
//! categorical block at a time through a closed-form softmax), and the two
//! Frank–Wolfe variants [`shrunken_fw`] and [`two_phase_fw`]. The Frank–Wolfe
//! drivers only touch the feasible set through [`lmo_simplex_block`] and
//! [`lmo_shrunken_block`].

mod block_ca;
mod frank_wolfe;
mod trajectory;

pub use block_ca::{block_ca, block_ca_observed, block_ca_update};
pub use frank_wolfe::{
    lmo_shrunken_block, lmo_simplex_block, shrunken_fw, shrunken_fw_observed, two_phase_fw, two_phase_fw_observed,
};
pub use trajectory::{parse_trajectory_csv, trajectory_csv, EvalKind, TrajectoryPoint, TrajectoryRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gme::{self, GradientMatrix};
use crate::lattice::{advance, DEFAULT_ENUMERATION_CAP};
use crate::marginals::{ProductCategorical, DEFAULT_ENTROPY_CLIP};
use crate::objective::Objective;
use crate::par;
use crate::rng::SeedStream;

/// How `F` (and its gradient) is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

impl EvalMode {
    pub fn kind(&self) -> EvalKind {
        match self {
            EvalMode::Exact => EvalKind::Exact,
            EvalMode::MonteCarlo { .. } => EvalKind::Estimated,
        }
    }
}

/// Order in which Block CA visits blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    #[default]
    Cyclic,
    /// A fresh random permutation of the blocks every sweep.
    Random { seed: u64 },
}

/// When drivers emit a trajectory point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Checkpoint {
    /// After every full gradient's worth of work.
    #[default]
    Epoch,
    /// After every iteration (every block update for Block CA).
    Iteration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElboConfig {
    /// Gradient computation.
    pub gradient: EvalMode,
    /// How trajectory ELBO values are computed.
    pub evaluation: EvalMode,
    /// Iteration budget: block updates for Block CA, FW steps per phase for
    /// the Frank–Wolfe drivers.
    pub iterations: usize,
    pub schedule: Schedule,
    pub entropy_clip: f64,
    pub checkpoint: Checkpoint,
}

impl ElboConfig {
    pub fn exact(iterations: usize) -> Self {
        ElboConfig {
            gradient: EvalMode::Exact,
            evaluation: EvalMode::Exact,
            iterations,
            schedule: Schedule::Cyclic,
            entropy_clip: DEFAULT_ENTROPY_CLIP,
            checkpoint: Checkpoint::Epoch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
        }
        for mode in [self.gradient, self.evaluation] {
            if let EvalMode::MonteCarlo { samples: 0, .. } = mode {
                return Err(Error::InvalidParameter(
                    "Monte Carlo sample count must be at least 1".into(),
                ));
            }
        }
        if !(self.entropy_clip > 0.0 && self.entropy_clip < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "entropy clip {} must lie in (0, 0.5)",
                self.entropy_clip
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElboValue {
    pub value: f64,
    /// Standard error of the Monte Carlo part; 0 in exact mode.
    pub stderr: f64,
    pub kind: EvalKind,
}

/// `F(ρ) + Σ_i H(ρ_i)`; the entropy is always exact.
pub fn elbo(f: &dyn Objective, rho: &ProductCategorical, mode: &EvalMode) -> Result<ElboValue> {
    let entropy = rho.entropy();
    match *mode {
        EvalMode::Exact => Ok(ElboValue {
            value: gme::gme_exact(f, rho)? + entropy,
            stderr: 0.0,
            kind: EvalKind::Exact,
        }),
        EvalMode::MonteCarlo { samples, seed } => {
            let est = gme::gme_estimate(f, rho, samples, &SeedStream::new(seed))?;
            Ok(ElboValue {
                value: est.value + entropy,
                stderr: est.stderr,
                kind: EvalKind::Estimated,
            })
        }
    }
}

/// `log Σ_x exp(f(x))` by enumeration with a max-shifted streaming sum.
pub fn log_partition_bruteforce(f: &dyn Objective) -> Result<f64> {
    let domain = f.domain();
    let size = domain.ensure_enumerable(DEFAULT_ENUMERATION_CAP)? as usize;
    let n = domain.n();
    let (max, sum) = par::chunked_reduce(
        size,
        |start, end| {
            let mut x = vec![0; n];
            domain.point_at(start as u64, &mut x);
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for _ in start..end {
                let v = f.evaluate(&x);
                if v > max {
                    sum = sum * (max - v).exp() + 1.0;
                    max = v;
                } else {
                    sum += (v - max).exp();
                }
                advance(&mut x, domain.levels());
            }
            (max, sum)
        },
        |(ma, sa), (mb, sb)| {
            if ma >= mb {
                (ma, sa + sb * (mb - ma).exp())
            } else {
                (mb, sb + sa * (ma - mb).exp())
            }
        },
    )
    .expect("domain is non-empty");
    Ok(max + sum.ln())
}

/// Gradient of `F` under `mode`; `tag` selects the Monte Carlo substream.
pub(crate) fn gme_gradient(
    f: &dyn Objective,
    rho: &ProductCategorical,
    mode: &EvalMode,
    tag: u64,
) -> Result<GradientMatrix> {
    match *mode {
        EvalMode::Exact => gme::gradient_exact(f, rho),
        EvalMode::MonteCarlo { samples, seed } => {
            Ok(gme::gradient_estimate(f, rho, samples, &SeedStream::new(seed).child(tag))?.mean)
        }
    }
}

/// Gradient of the full ELBO: GME gradient plus the clipped entropy gradient.
pub fn elbo_gradient(
    f: &dyn Objective,
    rho: &ProductCategorical,
    mode: &EvalMode,
    clip: f64,
    tag: u64,
) -> Result<GradientMatrix> {
    Ok(gme_gradient(f, rho, mode, tag)?.add(&rho.entropy_gradient(clip)))
}

/// Result of one driver run.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceRun {
    pub rho: ProductCategorical,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Total full-gradient evaluations spent.
    pub epochs: f64,
    /// Step sizes used, in order (Frank–Wolfe drivers only).
    pub step_sizes: Vec<f64>,
    /// Phase endpoints `z1`, `z2` and their ELBO values (Two-Phase FW only).
    pub phases: Option<TwoPhaseEndpoints>,
}

impl InferenceRun {
    pub fn final_elbo(&self) -> Option<f64> {
        self.trajectory.last().map(|p| p.elbo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhaseEndpoints {
    pub first: ProductCategorical,
    pub first_elbo: f64,
    pub second: ProductCategorical,
    pub second_elbo: f64,
}

/// Receives every trajectory point together with the iterate it describes.
pub type Observer<'a> = dyn FnMut(&TrajectoryPoint, &ProductCategorical) -> Result<()> + 'a;

/// Wall clock for trajectory timing; reports zero where no clock exists.
#[derive(Clone, Copy)]
pub(crate) struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    pub(crate) fn start() -> Self {
        Clock {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Shared bookkeeping for the drivers.
pub(crate) struct Recorder<'a, 'b> {
    f: &'a dyn Objective,
    algorithm: String,
    evaluation: EvalMode,
    clock: Clock,
    points: Vec<TrajectoryPoint>,
    observer: Option<&'a mut Observer<'b>>,
}

impl<'a, 'b> Recorder<'a, 'b> {
    pub(crate) fn new(
        f: &'a dyn Objective,
        algorithm: &str,
        evaluation: EvalMode,
        observer: Option<&'a mut Observer<'b>>,
    ) -> Self {
        Recorder {
            f,
            algorithm: algorithm.to_string(),
            evaluation,
            clock: Clock::start(),
            points: Vec::new(),
            observer,
        }
    }

    pub(crate) fn evaluate(&self, rho: &ProductCategorical) -> Result<ElboValue> {
        elbo(self.f, rho, &self.evaluation)
    }

    pub(crate) fn record(&mut self, epoch: f64, iteration: usize, rho: &ProductCategorical) -> Result<f64> {
        let value = self.evaluate(rho)?;
        self.record_value(epoch, iteration, rho, value)
    }

    pub(crate) fn record_value(
        &mut self,
        epoch: f64,
        iteration: usize,
        rho: &ProductCategorical,
        value: ElboValue,
    ) -> Result<f64> {
        let point = TrajectoryPoint {
            epoch,
            iteration,
            elbo: value.value,
            stderr: value.stderr,
            mode: value.kind,
            algorithm: self.algorithm.clone(),
            seconds: self.clock.seconds(),
        };
        if let Some(obs) = self.observer.as_mut() {
            obs(&point, rho)?;
        }
        self.points.push(point);
        Ok(value.value)
    }

    pub(crate) fn finish(self) -> Vec<TrajectoryPoint> {
        self.points
    }
}
