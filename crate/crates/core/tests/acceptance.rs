//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantity and the runtime against its budget. Exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use common::{interior_rho, random_instance, random_revenue, random_table, rng};
use pism::gme::{dr_certificate, gme_estimate, gme_exact, gradient_estimate, gradient_exact, hoeffding_samples};
use pism::harness::{preset, run_experiment, Experiment};
use pism::inference::{
    block_ca, block_ca_update, elbo, log_partition_bruteforce, shrunken_fw_observed, two_phase_fw_observed, Checkpoint,
    ElboConfig, EvalMode,
};
use pism::lattice::check_dr_submodular;
use pism::objective::{value_range, Modular};
use pism::{LatticeDomain, Objective, ProductCategorical, SeedStream};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn criterion(id: usize, name: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = out.passed && in_time;
    let timing = format!("{:.2} s of {} s", elapsed.as_secs_f64(), budget.as_secs());
    let late = if in_time { "" } else { " [over time budget]" };
    println!(
        "[{}] {id:>2} {name}: {} ({timing}){late}",
        if passed { "PASS" } else { "FAIL" },
        out.detail
    );
    passed
}

fn rebuild(rho: &ProductCategorical, i: usize, j: usize, delta: f64) -> ProductCategorical {
    let blocks = (0..rho.n())
        .map(|b| {
            let mut v = rho.block(b).to_vec();
            if b == i {
                v[j] += delta;
            }
            v
        })
        .collect();
    ProductCategorical::new(&rho.domain(), blocks).unwrap()
}

fn max_violation(rho: &ProductCategorical) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..rho.n() {
        let b = rho.block(i);
        for &p in b {
            worst = worst.max(-p).max(p - 1.0);
        }
        worst = worst.max(b.iter().sum::<f64>() - 1.0);
    }
    worst
}

fn gme_nine_terms() -> Outcome {
    let d = LatticeDomain::uniform(2, 3).unwrap();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let f = random_table(&mut r, vec![3, 3], 10.0);
        let rho = ProductCategorical::random(&d, 1000 + t);
        let v = |a: usize, b: usize| f.evaluate(&[a, b]);
        let (p11, p12) = (rho.block(0)[0], rho.block(0)[1]);
        let (p21, p22) = (rho.block(1)[0], rho.block(1)[1]);
        let expansion = v(0, 0) * (1.0 - p11 - p12) * (1.0 - p21 - p22)
            + v(2, 2) * p12 * p22
            + v(1, 0) * p11 * (1.0 - p21 - p22)
            + v(0, 1) * (1.0 - p11 - p12) * p21
            + v(2, 0) * p12 * (1.0 - p21 - p22)
            + v(0, 2) * (1.0 - p11 - p12) * p22
            + v(1, 1) * p11 * p21
            + v(1, 2) * p11 * p22
            + v(2, 1) * p12 * p21;
        worst = worst.max((gme_exact(&f, &rho).unwrap() - expansion).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max |error| {worst:.2e} over 100 instances (tol 1e-12)"),
    )
}

fn certificates() -> Outcome {
    let mut r = rng(2);
    let mut failures = Vec::new();
    let mut revenue_not_dr = 0;
    let mut revenue_total = 0;
    for t in 0..50 {
        let n = r.random_range(2..=5);
        let k = r.random_range(2..=4);
        let f = random_instance(&mut r, t, n, k);
        for rho in [
            ProductCategorical::uniform(f.domain()),
            ProductCategorical::random(f.domain(), t as u64),
        ] {
            let rep = dr_certificate(f.as_ref(), &rho, 1000, &SeedStream::new(t as u64)).unwrap();
            if !rep.passed {
                failures.push(format!("instance {t} ({}): {}", f.name(), rep.witness.unwrap()));
            }
        }
        if t % 2 == 0 {
            revenue_total += 1;
            if !check_dr_submodular(f.as_ref()).unwrap().passed {
                revenue_not_dr += 1;
            }
        }
    }
    let detail = format!(
        "{} certificate failures over 50 instances at 2 points each; {revenue_not_dr}/{revenue_total} revenue objectives fail the DR check on f{}",
        failures.len(),
        failures.first().map(|s| format!("; first: {s}")).unwrap_or_default()
    );
    outcome(failures.is_empty() && revenue_not_dr > 0, detail)
}

fn elbo_bound() -> Outcome {
    let mut r = rng(3);
    let mut worst_gap = f64::INFINITY;
    for t in 0..50 {
        let n = r.random_range(2..=6);
        let k = r.random_range(2..=3);
        let f = random_instance(&mut r, t, n, k);
        let log_z = log_partition_bruteforce(f.as_ref()).unwrap();
        for s in 0..20 {
            let rho = ProductCategorical::random(f.domain(), (t * 20 + s) as u64);
            let e = elbo(f.as_ref(), &rho, &EvalMode::Exact).unwrap().value;
            worst_gap = worst_gap.min(log_z - e);
        }
    }
    let mut worst_eq = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(1..=6);
        let values: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let k = r.random_range(2..=3);
                (0..k).map(|_| 4.0 * r.random::<f64>() - 2.0).collect()
            })
            .collect();
        let f = Modular::new(values.clone()).unwrap();
        let rho = ProductCategorical::softmax(f.domain(), &values).unwrap();
        let e = elbo(&f, &rho, &EvalMode::Exact).unwrap().value;
        worst_eq = worst_eq.max((e - log_partition_bruteforce(&f).unwrap()).abs());
    }
    outcome(
        worst_gap >= -1e-9 && worst_eq <= 1e-9,
        format!(
            "min (log Z - ELBO) {worst_gap:.3e} over 1000 points; modular |ELBO - log Z| {worst_eq:.2e} (tol 1e-9)"
        ),
    )
}

/// Newton's method on `g·ξ + H(ξ)` in the free coordinates `ξ_1..ξ_{k-1}`.
fn newton_block_maximizer(g: &[f64]) -> Vec<f64> {
    let m = g.len();
    let value = |x: &[f64]| -> f64 {
        let x0 = 1.0 - x.iter().sum::<f64>();
        let ent = -x0 * x0.ln() - x.iter().map(|p| p * p.ln()).sum::<f64>();
        g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ent
    };
    let mut x = vec![1.0 / (m + 1) as f64; m];
    for _ in 0..200 {
        let x0 = 1.0 - x.iter().sum::<f64>();
        let grad: Vec<f64> = (0..m).map(|j| g[j] - x[j].ln() + x0.ln()).collect();
        if grad.iter().all(|v| v.abs() < 1e-14) {
            break;
        }
        // Solve (-H) d = grad by Gaussian elimination with partial pivoting.
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                let mut row: Vec<f64> = (0..m)
                    .map(|c| 1.0 / x0 + if r == c { 1.0 / x[r] } else { 0.0 })
                    .collect();
                row.push(grad[r]);
                row
            })
            .collect();
        for c in 0..m {
            let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for r in c + 1..m {
                let factor = a[r][c] / a[c][c];
                for cc in c..=m {
                    a[r][cc] -= factor * a[c][cc];
                }
            }
        }
        let mut d = vec![0.0; m];
        for r in (0..m).rev() {
            let s: f64 = (r + 1..m).map(|c| a[r][c] * d[c]).sum();
            d[r] = (a[r][m] - s) / a[r][r];
        }
        let base = value(&x);
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let inside = cand.iter().all(|&p| p > 0.0) && cand.iter().sum::<f64>() < 1.0;
            if inside && value(&cand) >= base - 1e-15 {
                x = cand;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return x;
            }
        }
    }
    x
}

fn closed_form_update() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let k = 2 + t % 5;
        let g: Vec<f64> = (0..k - 1).map(|_| 8.0 * r.random::<f64>() - 4.0).collect();
        let closed = block_ca_update(&g);
        let numeric = newton_block_maximizer(&g);
        for (a, b) in closed.iter().zip(&numeric) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |difference| {worst:.2e} over 100 gradients, k in 2..=6 (tol 1e-6)"),
    )
}

fn block_ca_ascent() -> Outcome {
    let mut r = rng(5);
    let mut worst_drop = 0.0f64;
    let mut points = 0;
    for t in 0..20 {
        let n = r.random_range(2..=6);
        let k = r.random_range(2..=4);
        let f = random_instance(&mut r, t, n, k);
        let rho0 = ProductCategorical::random(f.domain(), t as u64);
        let config = ElboConfig {
            checkpoint: Checkpoint::Iteration,
            ..ElboConfig::exact(10 * n)
        };
        let run = block_ca(f.as_ref(), &rho0, &config).unwrap();
        points += run.trajectory.len();
        for w in run.trajectory.windows(2) {
            worst_drop = worst_drop.max(w[0].elbo - w[1].elbo);
        }
    }
    outcome(
        worst_drop <= 1e-9,
        format!("largest decrease {worst_drop:.2e} across {points} checkpoints of 20 ten-sweep runs (tol 1e-9)"),
    )
}

fn gradient_fidelity() -> Outcome {
    let mut r = rng(6);
    let h = 1e-5;
    let mut worst_rel = 0.0f64;
    let mut worst_z = 0.0f64;
    for t in 0..20 {
        let n = r.random_range(2..=5);
        let k = r.random_range(2..=4);
        let f = random_instance(&mut r, t, n, k);
        let rho = interior_rho(&mut r, f.domain(), 0.01);
        let g = gradient_exact(f.as_ref(), &rho).unwrap();
        for i in 0..n {
            for j in 0..k - 1 {
                let up = gme_exact(f.as_ref(), &rebuild(&rho, i, j, h)).unwrap();
                let down = gme_exact(f.as_ref(), &rebuild(&rho, i, j, -h)).unwrap();
                let fd = (up - down) / (2.0 * h);
                worst_rel = worst_rel.max((g.block(i)[j] - fd).abs() / fd.abs().max(1.0));
            }
        }
        let est = gradient_estimate(f.as_ref(), &rho, 100_000, &SeedStream::new(600 + t as u64)).unwrap();
        for ((m, s), e) in est.mean.as_flat().iter().zip(est.stderr.as_flat()).zip(g.as_flat()) {
            let dev = (m - e).abs();
            let z = if *s > 0.0 {
                dev / s
            } else if dev <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_z = worst_z.max(z);
        }
    }
    outcome(
        worst_rel <= 1e-6 && worst_z <= 4.0,
        format!("max relative error vs finite differences {worst_rel:.2e} (tol 1e-6); max |estimate - exact| / stderr {worst_z:.2} (tol 4)"),
    )
}

fn hoeffding_coverage() -> Outcome {
    let mut r = rng(7);
    let f = random_revenue(&mut r, 6, 3);
    let rho = ProductCategorical::random(f.domain(), 7);
    let exact = gme_exact(&f, &rho).unwrap();
    let b = value_range(&f).width();
    let eps = 0.05 * b;
    let s = hoeffding_samples(b, eps, 0.05).unwrap();
    let misses = (0..200u64)
        .filter(|&t| (gme_estimate(&f, &rho, s, &SeedStream::new(t)).unwrap().value - exact).abs() > eps)
        .count();
    let frac = misses as f64 / 200.0;
    outcome(
        frac <= 0.05,
        format!("S = {s}; {misses}/200 trials off by more than eps (fraction {frac:.3}, limit 0.05)"),
    )
}

fn fw_feasibility() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    let mut iterates = 0usize;
    let mut steps_exact = true;
    for t in 0..12 {
        let n = r.random_range(2..=5);
        let k = r.random_range(2..=4);
        let f = random_instance(&mut r, t, n, k);
        let iterations = [1, 3, 10][t % 3];
        let gradient = if t < 8 {
            EvalMode::Exact
        } else {
            EvalMode::MonteCarlo {
                samples: 200,
                seed: t as u64,
            }
        };
        let config = ElboConfig {
            gradient,
            checkpoint: Checkpoint::Iteration,
            ..ElboConfig::exact(iterations)
        };
        let mut observe = |_: &pism::inference::TrajectoryPoint, rho: &ProductCategorical| {
            worst = worst.max(max_violation(rho));
            iterates += 1;
            Ok(())
        };
        shrunken_fw_observed(f.as_ref(), &config, "shrunken-fw", &mut observe).unwrap();
        for x0 in [
            ProductCategorical::zero(f.domain()),
            ProductCategorical::random(f.domain(), t as u64),
        ] {
            let run = two_phase_fw_observed(f.as_ref(), &config, &x0, "two-phase-fw", &mut observe).unwrap();
            let expected: Vec<f64> = (0..2)
                .flat_map(|_| (0..iterations).map(|s| 2.0 / (s as f64 + 2.0)))
                .collect();
            steps_exact &= run.step_sizes == expected;
        }
    }
    outcome(
        worst <= 1e-12 && steps_exact,
        format!(
            "max constraint violation {worst:.2e} over {iterates} iterates (tol 1e-12); two-phase steps equal 2/(t+2): {steps_exact}"
        ),
    )
}

fn run_preset(name: &str, dir: &Path, epochs: Option<usize>) -> BTreeMap<String, f64> {
    let mut config = preset(name).unwrap();
    if let Some(e) = epochs {
        config.epochs = e;
    }
    let exp = Experiment::from_text(&config.to_toml(), dir).unwrap();
    let out = run_experiment(&exp).unwrap();
    out.manifest
        .runs
        .iter()
        .map(|r| (r.label.clone(), r.final_elbo))
        .collect()
}

fn figure_ordering() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["football", "facility"] {
        let dir = tempfile::tempdir().unwrap();
        let v = run_preset(name, dir.path(), None);
        let sfw = v["shrunken-fw"];
        let tp = v["two-phase-fw"];
        let ca0 = v["block-ca(init=zero)"];
        let ca_sfw = v["block-ca(init=shrunken-fw)"];
        let ca_tp = v["block-ca(init=two-phase-fw)"];
        let best = ca0.max(ca_sfw).max(ca_tp);
        ok &= ca_sfw >= sfw && ca_tp >= tp && sfw.max(tp) <= best;
        lines.push(format!(
            "{name}: SFW {sfw:.3}, TPFW {tp:.3}, BCA(0) {ca0:.3}, BCA(SFW) {ca_sfw:.3}, BCA(TPFW) {ca_tp:.3}"
        ));
    }
    outcome(ok, lines.join("; "))
}

fn bundle_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir.join("runs/football"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let run = |threads: Option<usize>| {
        let dir = tempfile::tempdir().unwrap();
        let go = || run_preset("football", dir.path(), Some(4));
        match threads {
            None => go(),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(go),
        };
        bundle_files(dir.path())
    };
    let reference = run(None);
    let variants = [
        ("rerun", run(None)),
        ("1 thread", run(Some(1))),
        ("4 threads", run(Some(4))),
    ];
    let differing: Vec<&str> = variants
        .iter()
        .filter(|(_, files)| *files != reference)
        .map(|(label, _)| *label)
        .collect();
    outcome(
        differing.is_empty() && reference.len() == 10,
        format!(
            "{} CSV files compared across rerun, 1 and 4 worker threads; differing: {}",
            reference.len(),
            if differing.is_empty() {
                "none".to_string()
            } else {
                differing.join(", ")
            }
        ),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion(
            1,
            "GME matches the two-node, three-level expansion",
            secs(1),
            gme_nine_terms,
        ),
        criterion(2, "DR certificates for the expected energy", secs(60), certificates),
        criterion(3, "ELBO bounds log Z", secs(60), elbo_bound),
        criterion(4, "closed-form block update is optimal", secs(10), closed_form_update),
        criterion(5, "Block CA ascent", secs(60), block_ca_ascent),
        criterion(6, "gradient fidelity", secs(120), gradient_fidelity),
        criterion(7, "Hoeffding coverage", secs(120), hoeffding_coverage),
        criterion(8, "Frank-Wolfe feasibility and step sizes", secs(30), fw_feasibility),
        criterion(
            9,
            "trajectory ordering on the football and facility presets",
            secs(600),
            figure_ordering,
        ),
        criterion(
            10,
            "determinism across reruns and worker counts",
            secs(300),
            determinism,
        ),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
