//! Frank–Wolfe maximizers for the ELBO over the product of simplexes.
//!
//! Both drivers ascend the full ELBO gradient (GME part plus the clipped
//! entropy gradient) and count one full gradient as one epoch.

use super::{elbo_gradient, ElboConfig, InferenceRun, Observer, Recorder, TwoPhaseEndpoints};
use crate::error::Result;
use crate::gme;
use crate::marginals::{ProductCategorical, Vertex};
use crate::objective::Objective;

/// Linear maximization over one block simplex `{v ≥ 0, Σ v ≤ 1}`: `e_j*` for
/// the largest entry if it is positive, otherwise the zero vertex. Ties go to
/// the lowest level.
pub fn lmo_simplex_block(grad: &[f64]) -> Vertex {
    let mut best: Option<(usize, f64)> = None;
    for (j, &g) in grad.iter().enumerate() {
        if g > 0.0 && best.is_none_or(|(_, b)| g > b) {
            best = Some((j, g));
        }
    }
    match best {
        Some((j, _)) => Vertex::Level(j + 1),
        None => Vertex::Zero,
    }
}

/// Linear maximization over `{0 ≤ v ≤ caps, Σ v ≤ budget}`: fill the
/// positive-gradient coordinates in descending gradient order up to their caps
/// until the budget runs out.
pub fn lmo_shrunken_block(grad: &[f64], caps: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..grad.len()).filter(|&j| grad[j] > 0.0).collect();
    order.sort_by(|&a, &b| grad[b].total_cmp(&grad[a]).then(a.cmp(&b)));
    let mut v = vec![0.0; grad.len()];
    let mut left = budget.max(0.0);
    for j in order {
        if left <= 0.0 {
            break;
        }
        let take = caps[j].max(0.0).min(left);
        v[j] = take;
        left -= take;
    }
    v
}

/// Shrunken Frank–Wolfe from `x_0 = 0` with step `1/K`.
///
/// Step `t` solves, per block, the shrunken LMO with caps `1 - x_t` and budget
/// `1 - Σ_j x_t,ij` on the ELBO gradient and moves `x_{t+1} = x_t + v_t / K`.
pub fn shrunken_fw(f: &dyn Objective, config: &ElboConfig) -> Result<InferenceRun> {
    shrunken(f, config, "shrunken-fw", None)
}

pub fn shrunken_fw_observed(
    f: &dyn Objective,
    config: &ElboConfig,
    label: &str,
    observer: &mut Observer<'_>,
) -> Result<InferenceRun> {
    shrunken(f, config, label, Some(observer))
}

fn shrunken(
    f: &dyn Objective,
    config: &ElboConfig,
    label: &str,
    observer: Option<&mut Observer<'_>>,
) -> Result<InferenceRun> {
    config.validate()?;
    let k_steps = config.iterations;
    let step = 1.0 / k_steps as f64;
    let mut x = ProductCategorical::zero(f.domain());
    let mut rec = Recorder::new(f, label, config.evaluation, observer);
    rec.record(0.0, 0, &x)?;

    let mut steps = Vec::with_capacity(k_steps);
    for t in 0..k_steps {
        let grad = elbo_gradient(f, &x, &config.gradient, config.entropy_clip, t as u64)?;
        let mut next = x.clone();
        for i in 0..x.n() {
            let block = x.block(i);
            let caps: Vec<f64> = block.iter().map(|&p| (1.0 - p).max(0.0)).collect();
            let budget = (1.0 - block.iter().sum::<f64>()).max(0.0);
            let v = lmo_shrunken_block(grad.block(i), &caps, budget);
            for (slot, vj) in next.block_mut(i).iter_mut().zip(v) {
                *slot += step * vj;
            }
        }
        x = next;
        steps.push(step);
        rec.record((t + 1) as f64, t + 1, &x)?;
    }

    Ok(InferenceRun {
        rho: x,
        trajectory: rec.finish(),
        epochs: k_steps as f64,
        step_sizes: steps,
        phases: None,
    })
}

/// Two-Phase Frank–Wolfe.
///
/// Phase 1 runs `K` non-convex Frank–Wolfe steps `x ← x + γ_t (v_t - x)` with
/// `γ_t = 2/(t+2)` from `x0`, `v_t` from [`lmo_simplex_block`], giving `z1`.
/// Phase 2 repeats from 0 over the region `{y feasible, y ≤ 1 - z1}` (the
/// shrunken LMO with caps `1 - z1` and unit budget), giving `z2`. The result is
/// whichever of `z1`, `z2` has the larger ELBO under `config.evaluation`.
pub fn two_phase_fw(f: &dyn Objective, config: &ElboConfig, x0: &ProductCategorical) -> Result<InferenceRun> {
    two_phase(f, config, x0, "two-phase-fw", None)
}

pub fn two_phase_fw_observed(
    f: &dyn Objective,
    config: &ElboConfig,
    x0: &ProductCategorical,
    label: &str,
    observer: &mut Observer<'_>,
) -> Result<InferenceRun> {
    two_phase(f, config, x0, label, Some(observer))
}

fn two_phase(
    f: &dyn Objective,
    config: &ElboConfig,
    x0: &ProductCategorical,
    label: &str,
    observer: Option<&mut Observer<'_>>,
) -> Result<InferenceRun> {
    config.validate()?;
    x0.validate()?;
    gme::check_shape(f, x0)?;
    let k_steps = config.iterations;
    let mut rec = Recorder::new(f, label, config.evaluation, observer);
    let mut steps = Vec::with_capacity(2 * k_steps);

    let mut x = x0.clone();
    rec.record(0.0, 0, &x)?;
    for t in 0..k_steps {
        let grad = elbo_gradient(f, &x, &config.gradient, config.entropy_clip, t as u64)?;
        let gamma = 2.0 / (t as f64 + 2.0);
        for i in 0..x.n() {
            let vertex = lmo_simplex_block(grad.block(i));
            for (j, slot) in x.block_mut(i).iter_mut().enumerate() {
                let v = if vertex == Vertex::Level(j + 1) { 1.0 } else { 0.0 };
                *slot = (1.0 - gamma) * *slot + gamma * v;
            }
        }
        steps.push(gamma);
        rec.record((t + 1) as f64, t + 1, &x)?;
    }
    let z1 = x;
    let z1_elbo = rec.evaluate(&z1)?;

    let caps: Vec<Vec<f64>> = (0..z1.n())
        .map(|i| z1.block(i).iter().map(|&p| (1.0 - p).max(0.0)).collect())
        .collect();
    let mut y = ProductCategorical::zero(f.domain());
    for t in 0..k_steps {
        let grad = elbo_gradient(f, &y, &config.gradient, config.entropy_clip, (k_steps + t) as u64)?;
        let gamma = 2.0 / (t as f64 + 2.0);
        for (i, cap) in caps.iter().enumerate() {
            let v = lmo_shrunken_block(grad.block(i), cap, 1.0);
            for (slot, vj) in y.block_mut(i).iter_mut().zip(v) {
                *slot = (1.0 - gamma) * *slot + gamma * vj;
            }
        }
        steps.push(gamma);
        rec.record((k_steps + t + 1) as f64, k_steps + t + 1, &y)?;
    }
    let z2 = y;
    let z2_elbo = rec.evaluate(&z2)?;

    let (best, best_elbo) = if z2_elbo.value > z1_elbo.value {
        (z2.clone(), z2_elbo)
    } else {
        (z1.clone(), z1_elbo)
    };
    let epochs = 2 * k_steps;
    rec.record_value(epochs as f64, epochs, &best, best_elbo)?;

    Ok(InferenceRun {
        rho: best,
        trajectory: rec.finish(),
        epochs: epochs as f64,
        step_sizes: steps,
        phases: Some(TwoPhaseEndpoints {
            first: z1,
            first_elbo: z1_elbo.value,
            second: z2,
            second_elbo: z2_elbo.value,
        }),
    })
}
