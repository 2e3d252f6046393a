//! Browser front end: three operations exported to JavaScript, each returning
//! JSON. The plain Rust functions behind them are usable (and tested) natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pism::gme::gme_exact;
use pism::inference::{
    block_ca, block_ca_update, elbo, log_partition_bruteforce, shrunken_fw, two_phase_fw, ElboConfig, EvalMode,
    InferenceRun,
};
use pism::objective::{Revenue, WeightedGraph};
use pism::{Objective, ProductCategorical};

#[derive(Serialize)]
pub struct Landscape {
    /// `elbo[a][b]` at `ρ_1 = a/(res-1)`, `ρ_2 = b/(res-1)`.
    pub elbo: Vec<Vec<f64>>,
    pub gme: Vec<Vec<f64>>,
    pub log_z: f64,
    pub best: f64,
}

/// ELBO and GME of a two-node binary revenue model over the unit square of
/// marginals `(P[x_1 = 1], P[x_2 = 1])`.
pub fn landscape(w12: f64, w21: f64, q: f64, resolution: usize) -> Result<Landscape, String> {
    let res = resolution.clamp(2, 201);
    let mut g = WeightedGraph::new(2);
    g.add_weight(0, 1, w12).map_err(|e| e.to_string())?;
    g.add_weight(1, 0, w21).map_err(|e| e.to_string())?;
    let f = Revenue::new(g, q, 2).map_err(|e| e.to_string())?;
    let log_z = log_partition_bruteforce(&f).map_err(|e| e.to_string())?;
    let mut elbo_grid = vec![vec![0.0; res]; res];
    let mut gme_grid = vec![vec![0.0; res]; res];
    let mut best = f64::NEG_INFINITY;
    for a in 0..res {
        for b in 0..res {
            let p = [a as f64 / (res - 1) as f64, b as f64 / (res - 1) as f64];
            let rho = ProductCategorical::new(f.domain(), vec![vec![p[0]], vec![p[1]]]).map_err(|e| e.to_string())?;
            let v = elbo(&f, &rho, &EvalMode::Exact).map_err(|e| e.to_string())?.value;
            elbo_grid[a][b] = v;
            gme_grid[a][b] = gme_exact(&f, &rho).map_err(|e| e.to_string())?;
            best = best.max(v);
        }
    }
    Ok(Landscape {
        elbo: elbo_grid,
        gme: gme_grid,
        log_z,
        best,
    })
}

#[derive(Serialize)]
pub struct RunSummary {
    pub label: String,
    /// `(epoch, elbo)` pairs.
    pub trajectory: Vec<(f64, f64)>,
    /// `marginals[i][l]`, levels 0..k-1.
    pub marginals: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct Comparison {
    pub mode: String,
    pub log_z: Option<f64>,
    pub runs: Vec<RunSummary>,
}

/// Domains up to this size use exact gradients and ELBO values.
const EXACT_LIMIT: u64 = 1 << 14;
const MC_SAMPLES: u64 = 400;

fn summarize(label: &str, run: &InferenceRun) -> RunSummary {
    RunSummary {
        label: label.to_string(),
        trajectory: run.trajectory.iter().map(|p| (p.epoch, p.elbo)).collect(),
        marginals: (0..run.rho.n()).map(|i| run.rho.level_probs(i)).collect(),
    }
}

/// Runs Shrunken FW, Two-Phase FW and Block CA (from zero and from the Shrunken
/// FW output) on a random revenue instance for `epochs` epochs each.
pub fn compare_algorithms(
    nodes: usize,
    edges: usize,
    q: f64,
    k: usize,
    epochs: usize,
    seed: u64,
) -> Result<Comparison, String> {
    let err = |e: pism::Error| e.to_string();
    let g = WeightedGraph::random_undirected(nodes, edges, seed).map_err(err)?;
    let f = Revenue::new(g, q, k).map_err(err)?;
    let epochs = epochs.clamp(1, 200);
    let exact = f.domain().cardinality().is_some_and(|c| c <= EXACT_LIMIT);
    let (gradient, evaluation) = if exact {
        (EvalMode::Exact, EvalMode::Exact)
    } else {
        (
            EvalMode::MonteCarlo {
                samples: MC_SAMPLES,
                seed,
            },
            EvalMode::MonteCarlo {
                samples: 4 * MC_SAMPLES,
                seed: seed ^ 0x9e37_79b9,
            },
        )
    };
    let config = |iterations| ElboConfig {
        gradient,
        evaluation,
        iterations,
        ..ElboConfig::exact(iterations)
    };
    let n = f.domain().n();
    let zero = ProductCategorical::zero(f.domain());

    let sfw = shrunken_fw(&f, &config(epochs)).map_err(err)?;
    let tpfw = two_phase_fw(&f, &config((epochs / 2).max(1)), &zero).map_err(err)?;
    let ca0 = block_ca(&f, &zero, &config(epochs * n)).map_err(err)?;
    let ca_sfw = block_ca(&f, &sfw.rho, &config(epochs * n)).map_err(err)?;

    Ok(Comparison {
        mode: if exact { "exact" } else { "estimated" }.into(),
        log_z: if exact { log_partition_bruteforce(&f).ok() } else { None },
        runs: vec![
            summarize("shrunken-fw", &sfw),
            summarize("two-phase-fw", &tpfw),
            summarize("block-ca(init=zero)", &ca0),
            summarize("block-ca(init=shrunken-fw)", &ca_sfw),
        ],
    })
}

#[derive(Serialize)]
pub struct BlockUpdate {
    /// Probabilities of levels 0..k-1.
    pub probs: Vec<f64>,
    /// Block objective `∇·ξ + H(ξ)` at the update.
    pub value: f64,
}

/// Closed-form maximizer of `∇·ξ + H(ξ)` over one block simplex.
pub fn block_update(grad: &[f64]) -> Result<BlockUpdate, String> {
    if grad.is_empty() || grad.iter().any(|g| !g.is_finite()) {
        return Err("gradient must be a non-empty list of finite numbers".into());
    }
    let xi = block_ca_update(grad);
    let zero = 1.0 - xi.iter().sum::<f64>();
    let mut probs = vec![zero];
    probs.extend_from_slice(&xi);
    let entropy: f64 = probs.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
    let linear: f64 = grad.iter().zip(&xi).map(|(g, x)| g * x).sum();
    Ok(BlockUpdate {
        probs,
        value: linear + entropy,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = landscape)]
pub fn landscape_js(w12: f64, w21: f64, q: f64, resolution: usize) -> Result<String, JsError> {
    to_js(landscape(w12, w21, q, resolution))
}

#[wasm_bindgen(js_name = compareAlgorithms)]
pub fn compare_algorithms_js(
    nodes: usize,
    edges: usize,
    q: f64,
    k: usize,
    epochs: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(compare_algorithms(nodes, edges, q, k, epochs, seed))
}

#[wasm_bindgen(js_name = blockUpdate)]
pub fn block_update_js(grad: Vec<f64>) -> Result<String, JsError> {
    to_js(block_update(&grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landscape_stays_below_log_partition() {
        let l = landscape(1.0, 0.5, 0.5, 11).unwrap();
        assert_eq!(l.elbo.len(), 11);
        assert!(l.best <= l.log_z + 1e-9);
        assert_eq!(l.gme[0][0], 0.0);
        // Only x_1 raised: revenue W_12 (1 - q) q^0.
        assert!((l.gme[10][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn comparison_orders_block_ca_above_its_initializer() {
        let c = compare_algorithms(6, 8, 0.5, 3, 6, 2).unwrap();
        assert_eq!(c.mode, "exact");
        assert_eq!(c.runs.len(), 4);
        let last = |i: usize| c.runs[i].trajectory.last().unwrap().1;
        assert!(last(3) >= last(0) - 1e-9);
        assert!(last(2) <= c.log_z.unwrap() + 1e-9);
        for r in &c.runs {
            for m in &r.marginals {
                assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn larger_instances_switch_to_sampling() {
        let c = compare_algorithms(10, 15, 0.5, 4, 2, 2).unwrap();
        assert_eq!(c.mode, "estimated");
        assert!(c.log_z.is_none());
    }

    #[test]
    fn block_update_is_a_distribution() {
        let u = block_update(&[0.0, 0.0]).unwrap();
        for p in &u.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((u.value - 3f64.ln()).abs() < 1e-12);
        assert!(block_update(&[]).is_err());
        assert!(block_update(&[f64::NAN]).is_err());
    }
}
