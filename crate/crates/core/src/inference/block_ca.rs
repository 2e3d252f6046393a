use rand::seq::SliceRandom;

use super::{Checkpoint, ElboConfig, EvalMode, InferenceRun, Observer, Recorder, Schedule};
use crate::error::Result;
use crate::gme;
use crate::marginals::ProductCategorical;
use crate::objective::Objective;
use crate::rng::SeedStream;

/// Maximizer of `Σ_j ∇_j ξ_j + H(ξ)` over one block simplex:
///
/// ```text
/// ξ_j = exp(∇_j) / (1 + Σ_j' exp(∇_j'))
/// ```
///
/// The level-0 mass is `1 / (1 + Σ_j' exp(∇_j'))`. Shifted by the largest
/// exponent so large gradients do not overflow.
pub fn block_ca_update(grad: &[f64]) -> Vec<f64> {
    let shift = grad.iter().copied().fold(0.0, f64::max);
    let base = (-shift).exp();
    let exps: Vec<f64> = grad.iter().map(|g| (g - shift).exp()).collect();
    let denom = base + exps.iter().sum::<f64>();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Block Coordinate Ascent from `rho0` with the configured schedule.
///
/// Iteration `t` computes the GME gradient of block `i_t` (exact or with
/// `config.gradient` samples from substream `t`) and replaces the block with
/// [`block_ca_update`]. With exact gradients every update is the exact
/// block maximizer, so the ELBO never decreases. `n` block updates count as
/// one epoch.
pub fn block_ca(f: &dyn Objective, rho0: &ProductCategorical, config: &ElboConfig) -> Result<InferenceRun> {
    run(f, rho0, config, "block-ca", None)
}

/// [`block_ca`] reporting each checkpoint to `observer`; `label` names the run
/// in the trajectory.
pub fn block_ca_observed(
    f: &dyn Objective,
    rho0: &ProductCategorical,
    config: &ElboConfig,
    label: &str,
    observer: &mut Observer<'_>,
) -> Result<InferenceRun> {
    run(f, rho0, config, label, Some(observer))
}

fn run(
    f: &dyn Objective,
    rho0: &ProductCategorical,
    config: &ElboConfig,
    label: &str,
    observer: Option<&mut Observer<'_>>,
) -> Result<InferenceRun> {
    config.validate()?;
    rho0.validate()?;
    gme::check_shape(f, rho0)?;

    let n = rho0.n();
    let mut rho = rho0.clone();
    let mut rec = Recorder::new(f, label, config.evaluation, observer);
    rec.record(0.0, 0, &rho)?;

    let mut order: Vec<usize> = (0..n).collect();
    for t in 0..config.iterations {
        let pos = t % n;
        if pos == 0 {
            if let Schedule::Random { seed } = config.schedule {
                order = (0..n).collect();
                order.shuffle(&mut SeedStream::new(seed).substream((t / n) as u64));
            }
        }
        let i = order[pos];
        let grad = match config.gradient {
            EvalMode::Exact => gme::gradient_block_exact(f, &rho, i)?,
            EvalMode::MonteCarlo { samples, seed } => {
                gme::gradient_block_estimate(f, &rho, i, samples, &SeedStream::new(seed).child(t as u64))?.0
            }
        };
        let update = block_ca_update(&grad);
        rho.block_mut(i).copy_from_slice(&update);

        let done = t + 1;
        let due = match config.checkpoint {
            Checkpoint::Iteration => true,
            Checkpoint::Epoch => done % n == 0 || done == config.iterations,
        };
        if due {
            rec.record(done as f64 / n as f64, done, &rho)?;
        }
    }

    Ok(InferenceRun {
        rho,
        trajectory: rec.finish(),
        epochs: config.iterations as f64 / n as f64,
        step_sizes: Vec::new(),
        phases: None,
    })
}
