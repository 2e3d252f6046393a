//! Ready-made experiment configs.

use std::path::PathBuf;

use super::config::{
    AlgorithmSpec, ExperimentConfig, GraphSource, Method, ObjectiveSpec, SamplingSpec, ScheduleSpec, DEFAULT_EPOCHS,
};
use crate::inference::Checkpoint;
use crate::marginals::DEFAULT_ENTROPY_CLIP;

/// Published parameters of a revenue dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetRow {
    pub preset: &'static str,
    pub name: &'static str,
    pub nodes: usize,
    /// Edge count as published; multi-edges counted separately.
    pub edges: usize,
    pub q: f64,
    pub k: usize,
}

pub const DATASETS: [DatasetRow; 5] = [
    DatasetRow {
        preset: "seventh-graders",
        name: "Seventh graders",
        nodes: 29,
        edges: 376,
        q: 0.7,
        k: 6,
    },
    DatasetRow {
        preset: "highschool",
        name: "Highschool",
        nodes: 70,
        edges: 366,
        q: 0.2,
        k: 10,
    },
    DatasetRow {
        preset: "reality-mining",
        name: "Reality Mining",
        nodes: 96,
        edges: 1_086_404,
        q: 0.75,
        k: 6,
    },
    DatasetRow {
        preset: "residence-hall",
        name: "Residence hall",
        nodes: 217,
        edges: 2_672,
        q: 0.75,
        k: 10,
    },
    DatasetRow {
        preset: "infectious",
        name: "Infectious",
        nodes: 410,
        edges: 17_298,
        q: 0.7,
        k: 6,
    },
];

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = [
    "football",
    "facility",
    "seventh-graders",
    "highschool",
    "reality-mining",
    "residence-hall",
    "infectious",
];

/// Same-sized random stand-in for the Football graph, whose edge list is not
/// bundled: 35 nodes, 118 edges, 5 levels. `q` is not published for it.
pub const FOOTBALL_Q: f64 = 0.75;

fn standard_algorithms() -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::new(Method::ShrunkenFw),
        AlgorithmSpec::new(Method::TwoPhaseFw),
        AlgorithmSpec::new(Method::BlockCa).with_init("zero"),
        AlgorithmSpec::new(Method::BlockCa).with_init("shrunken-fw"),
        AlgorithmSpec::new(Method::BlockCa).with_init("two-phase-fw"),
    ]
}

fn base(name: &str, objective: ObjectiveSpec) -> ExperimentConfig {
    ExperimentConfig {
        seed: 1,
        output: PathBuf::from(format!("runs/{name}")),
        epochs: DEFAULT_EPOCHS,
        algorithms: standard_algorithms(),
        schedule: ScheduleSpec::Cyclic,
        checkpoint: Checkpoint::Epoch,
        entropy_clip: DEFAULT_ENTROPY_CLIP,
        trajectory_seconds: false,
        objective,
        gradient: SamplingSpec::Auto,
        evaluation: SamplingSpec::Auto,
    }
}

/// The named preset. Dataset presets point at `data/<preset>.tsv`, which the
/// user supplies.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "football" => Some(base(
            name,
            ObjectiveSpec::Revenue {
                q: FOOTBALL_Q,
                k: 5,
                graph: GraphSource::Synthetic {
                    nodes: 35,
                    edges: 118,
                    seed: None,
                },
            },
        )),
        "facility" => Some(base(
            name,
            ObjectiveSpec::Facility {
                n: 50,
                m: None,
                k: 5,
                seed: None,
            },
        )),
        _ => {
            let row = DATASETS.iter().find(|r| r.preset == name)?;
            Some(base(
                name,
                ObjectiveSpec::Revenue {
                    q: row.q,
                    k: row.k,
                    graph: GraphSource::File {
                        path: PathBuf::from(format!("data/{name}.tsv")),
                        symmetrize: true,
                    },
                },
            ))
        }
    }
}
