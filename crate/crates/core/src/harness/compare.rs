//! Side-by-side summaries of finished bundles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::Manifest;
use crate::error::{Error, Result};
use crate::inference::{parse_trajectory_csv, TrajectoryRow};

/// Relative distance to the final value that counts as converged.
pub const CONVERGENCE_BAND: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub bundle: PathBuf,
    pub label: String,
    pub final_elbo: f64,
    pub mode: String,
    pub epochs: f64,
    /// First epoch after which the trajectory stays within 1% of its final value.
    pub epochs_to_band: f64,
    pub wall_seconds: f64,
    pub init: String,
    /// Final ELBO minus the final ELBO of the run this one started from, when
    /// that run is in the same bundle.
    pub delta_vs_init: Option<f64>,
}

/// First epoch from which every later point is within `band · |final|` of the
/// final value.
pub fn epochs_to_band(rows: &[TrajectoryRow], band: f64) -> f64 {
    let Some(last) = rows.last() else {
        return f64::NAN;
    };
    let tol = band * last.elbo.abs();
    let mut first = last.epoch;
    for row in rows.iter().rev() {
        if (row.elbo - last.elbo).abs() <= tol {
            first = row.epoch;
        } else {
            break;
        }
    }
    first
}

/// One row per run, in bundle order then configured order. All bundles must
/// share an objective hash.
pub fn compare_runs(bundles: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    if bundles.is_empty() {
        return Err(Error::Bundle("no bundles given".into()));
    }
    let mut hash: Option<(String, &Path)> = None;
    let mut rows = Vec::new();
    for bundle in bundles {
        let manifest = Manifest::load(bundle)?;
        match &hash {
            None => hash = Some((manifest.objective_hash.clone(), bundle)),
            Some((h, first)) if *h != manifest.objective_hash => {
                return Err(Error::Bundle(format!(
                    "{} and {} were run on different objectives",
                    first.display(),
                    bundle.display()
                )));
            }
            Some(_) => {}
        }
        let mut finals: Vec<(String, f64)> = Vec::new();
        for run in &manifest.runs {
            let path = bundle.join(&run.trajectory);
            let text =
                fs::read_to_string(&path).map_err(|e| Error::Bundle(format!("cannot read {}: {e}", path.display())))?;
            let traj = parse_trajectory_csv(&text)?;
            let last = traj
                .last()
                .ok_or_else(|| Error::Bundle(format!("{} has no rows", path.display())))?;
            let delta = finals.iter().find(|(l, _)| *l == run.init).map(|(_, v)| last.elbo - v);
            rows.push(ComparisonRow {
                bundle: bundle.clone(),
                label: run.label.clone(),
                final_elbo: last.elbo,
                mode: last.mode.as_str().to_string(),
                epochs: last.epoch,
                epochs_to_band: epochs_to_band(&traj, CONVERGENCE_BAND),
                wall_seconds: run.wall_seconds,
                init: run.init.clone(),
                delta_vs_init: delta,
            });
            finals.push((run.label.clone(), last.elbo));
        }
    }
    Ok(rows)
}

/// Plain-text table of `rows`.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let header = [
        "bundle",
        "algorithm",
        "final_elbo",
        "mode",
        "epochs",
        "epochs_to_1pct",
        "wall_s",
        "delta_vs_init",
    ];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.bundle.display().to_string(),
                r.label.clone(),
                format!("{:.6}", r.final_elbo),
                r.mode.clone(),
                format!("{}", r.epochs),
                format!("{}", r.epochs_to_band),
                format!("{:.3}", r.wall_seconds),
                r.delta_vs_init.map_or("-".into(), |d| format!("{d:+.6}")),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &header);
    for row in &body {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::EvalKind;

    fn row(epoch: f64, elbo: f64) -> TrajectoryRow {
        TrajectoryRow {
            epoch,
            elbo,
            mode: EvalKind::Exact,
            algorithm: "x".into(),
            seconds: None,
        }
    }

    #[test]
    fn band_is_measured_from_the_end() {
        let rows = [
            row(0.0, 1.0),
            row(1.0, 99.5),
            row(2.0, 50.0),
            row(3.0, 99.8),
            row(4.0, 100.0),
        ];
        assert_eq!(epochs_to_band(&rows, 0.01), 3.0);
        assert_eq!(epochs_to_band(&rows[..1], 0.01), 0.0);
        assert!(epochs_to_band(&[], 0.01).is_nan());
    }

    #[test]
    fn table_has_a_header_and_one_line_per_row() {
        let r = ComparisonRow {
            bundle: "b".into(),
            label: "block-ca".into(),
            final_elbo: 1.5,
            mode: "exact".into(),
            epochs: 3.0,
            epochs_to_band: 1.0,
            wall_seconds: 0.25,
            init: "uniform".into(),
            delta_vs_init: None,
        };
        let text = format_comparison(&[r.clone(), r]);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("bundle"));
    }
}
