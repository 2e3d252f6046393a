use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a value came from enumeration or sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalKind {
    Exact,
    Estimated,
}

impl EvalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalKind::Exact => "exact",
            EvalKind::Estimated => "estimated",
        }
    }
}

impl std::str::FromStr for EvalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EvalKind::Exact),
            "estimated" => Ok(EvalKind::Estimated),
            other => Err(Error::InvalidParameter(format!("unknown evaluation mode `{other}`"))),
        }
    }
}

/// One checkpoint of a driver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Full-gradient evaluations spent so far.
    pub epoch: f64,
    pub iteration: usize,
    pub elbo: f64,
    pub stderr: f64,
    pub mode: EvalKind,
    pub algorithm: String,
    /// Wall time since the driver started.
    pub seconds: f64,
}

const HEADER: [&str; 5] = ["epoch", "elbo", "mode", "algorithm", "seconds"];

/// CSV with header `epoch,elbo,mode,algorithm,seconds`.
///
/// With `with_seconds = false` the `seconds` column is left empty so the file
/// depends only on the configuration and seed.
pub fn trajectory_csv(points: &[TrajectoryPoint], with_seconds: bool) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for p in points {
        let seconds = if with_seconds {
            format!("{:.6}", p.seconds)
        } else {
            String::new()
        };
        w.write_record([
            p.epoch.to_string(),
            format!("{:.16e}", p.elbo),
            p.mode.as_str().to_string(),
            p.algorithm.clone(),
            seconds,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// Parsed row of [`trajectory_csv`] output.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub epoch: f64,
    pub elbo: f64,
    pub mode: EvalKind,
    pub algorithm: String,
    pub seconds: Option<f64>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header_ok = r.headers().map(|h| h.iter().eq(HEADER)).unwrap_or(false);
    if !header_ok {
        return Err(Error::InvalidParameter(
            "trajectory CSV must start with `epoch,elbo,mode,algorithm,seconds`".into(),
        ));
    }
    let mut rows = Vec::new();
    for (no, record) in r.records().enumerate() {
        let bad = |what: &str| Error::InvalidParameter(format!("trajectory CSV record {}: {what}", no + 1));
        let record = record.map_err(|e| bad(&e.to_string()))?;
        if record.len() != HEADER.len() {
            return Err(bad("expected 5 fields"));
        }
        let num = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| bad(&format!("`{}` is not a number", &record[i])))
        };
        rows.push(TrajectoryRow {
            epoch: num(0)?,
            elbo: num(1)?,
            mode: record[2].parse()?,
            algorithm: record[3].to_string(),
            seconds: if record[4].is_empty() { None } else { Some(num(4)?) },
        });
    }
    Ok(rows)
}
