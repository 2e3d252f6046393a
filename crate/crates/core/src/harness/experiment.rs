//! Building objectives from configs and running experiments to disk.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{
    AlgorithmSpec, ExperimentConfig, GraphSource, InitSpec, Method, ObjectiveSpec, SamplingSpec, ScheduleSpec,
    AUTO_EXACT_LIMIT,
};
use super::edgelist::{load_edge_list, LoadOptions};
use crate::error::{Error, Result};
use crate::gme::hoeffding_samples;
use crate::inference::{
    block_ca_observed, shrunken_fw_observed, trajectory_csv, two_phase_fw_observed, ElboConfig, EvalMode, InferenceRun,
    Schedule, TrajectoryPoint,
};
use crate::marginals::ProductCategorical;
use crate::objective::{synthetic_facility_weights, value_range, FacilityLocation, Objective, Revenue, WeightedGraph};
use crate::rng::SeedStream;

pub const MANIFEST_FILE: &str = "manifest.toml";
const LOCK_FILE: &str = ".lock";

// Seed-derivation tags under the root seed.
const TAG_GRADIENT: u64 = 1;
const TAG_EVALUATION: u64 = 2;
const TAG_SCHEDULE: u64 = 3;
const TAG_INIT: u64 = 4;

/// A config together with its source text and the directory relative paths
/// resolve against.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

impl Experiment {
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::from_toml(text)?;
        Ok(Experiment {
            config,
            text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// Loads either a config file or the manifest of an earlier bundle.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => fs::canonicalize(p)?,
            _ => std::env::current_dir()?,
        };
        if let Ok(manifest) = toml::from_str::<Manifest>(&text) {
            return Experiment::from_text(&manifest.config, Path::new(&manifest.base_dir));
        }
        Experiment::from_text(&text, &dir)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.output)
    }
}

/// A concrete objective built from an [`ObjectiveSpec`].
pub enum BuiltObjective {
    Revenue(Revenue),
    Facility(FacilityLocation),
}

impl BuiltObjective {
    pub fn build(spec: &ObjectiveSpec, root_seed: u64, base_dir: &Path) -> Result<Self> {
        match spec {
            ObjectiveSpec::Revenue { q, k, graph } => {
                let g = match graph {
                    GraphSource::File { path, symmetrize } => {
                        let opts = LoadOptions {
                            symmetrize: *symmetrize,
                            ..LoadOptions::default()
                        };
                        let (g, stats) = load_edge_list(&base_dir.join(path), opts)?;
                        log::info!(
                            "loaded {}: {} nodes, {} edge lines, {} self-loops dropped, {} repeats merged",
                            path.display(),
                            g.n(),
                            stats.edge_lines,
                            stats.self_loops,
                            stats.repeated
                        );
                        g
                    }
                    GraphSource::Synthetic { nodes, edges, seed } => {
                        WeightedGraph::random_undirected(*nodes, *edges, seed.unwrap_or(root_seed))?
                    }
                };
                Ok(BuiltObjective::Revenue(Revenue::new(g, *q, *k)?))
            }
            ObjectiveSpec::Facility { n, m, k, seed } => {
                let w = synthetic_facility_weights(*n, m.unwrap_or(*n), *k, seed.unwrap_or(root_seed))?;
                Ok(BuiltObjective::Facility(FacilityLocation::new(w)?))
            }
        }
    }

    pub fn objective(&self) -> &dyn Objective {
        match self {
            BuiltObjective::Revenue(r) => r,
            BuiltObjective::Facility(f) => f,
        }
    }

    /// SHA-256 over the resolved objective data (hex).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        match self {
            BuiltObjective::Revenue(r) => {
                h.update(b"revenue\0");
                h.update((r.domain().n() as u64).to_le_bytes());
                h.update((r.domain().max_levels() as u64).to_le_bytes());
                h.update(r.q().to_bits().to_le_bytes());
                let g = r.graph();
                for i in 0..g.n() {
                    for &(j, w) in g.neighbors(i) {
                        h.update((i as u64).to_le_bytes());
                        h.update((j as u64).to_le_bytes());
                        h.update(w.to_bits().to_le_bytes());
                    }
                }
            }
            BuiltObjective::Facility(f) => {
                let w = f.weights();
                h.update(b"facility\0");
                for d in [w.customers(), w.facilities(), w.levels()] {
                    h.update((d as u64).to_le_bytes());
                }
                for c in 0..w.customers() {
                    for j in 0..w.facilities() {
                        for l in 0..w.levels() {
                            h.update(w.utility(c, j, l).to_bits().to_le_bytes());
                        }
                    }
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn describe(&self) -> String {
        match self {
            BuiltObjective::Revenue(r) => format!(
                "revenue: n={}, k={}, q={}, {} undirected edges, total weight {}",
                r.domain().n(),
                r.domain().max_levels(),
                r.q(),
                r.graph().undirected_edges(),
                r.graph().total_weight()
            ),
            BuiltObjective::Facility(f) => format!(
                "facility: n={}, m={}, k={}",
                f.weights().facilities(),
                f.weights().customers(),
                f.weights().levels()
            ),
        }
    }
}

/// Resolves a sampling spec against an objective. `seed` is used in Monte
/// Carlo mode; `eps_fraction` sets the Hoeffding default.
pub fn resolve_sampling(spec: SamplingSpec, f: &dyn Objective, seed: u64, eps_fraction: f64) -> Result<EvalMode> {
    let exact = match spec {
        SamplingSpec::Exact => true,
        SamplingSpec::Auto => f.domain().cardinality().is_some_and(|c| c <= AUTO_EXACT_LIMIT),
        SamplingSpec::MonteCarlo { .. } => false,
    };
    if exact {
        f.domain().ensure_enumerable(crate::lattice::DEFAULT_ENUMERATION_CAP)?;
        return Ok(EvalMode::Exact);
    }
    let samples = match spec {
        SamplingSpec::MonteCarlo { samples: Some(s) } => s,
        _ => {
            let width = value_range(f).width().max(f64::MIN_POSITIVE);
            hoeffding_samples(width, eps_fraction * width, 0.05)?
        }
    };
    Ok(EvalMode::MonteCarlo { samples, seed })
}

/// Gradient estimates default to a 5% range error, trajectory evaluations to 1%.
const GRADIENT_EPS: f64 = 0.05;
const EVALUATION_EPS: f64 = 0.01;

/// Derived seeds are kept to 63 bits so they fit TOML integers.
fn derived_seed(stream: SeedStream) -> u64 {
    stream.seed() & i64::MAX as u64
}

/// Stable 64-bit tag of a run label.
fn label_tag(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub method: String,
    pub init: String,
    pub epochs: f64,
    pub iterations: usize,
    pub gradient: EvalMode,
    pub evaluation: EvalMode,
    pub schedule: Schedule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    pub trajectory: String,
    pub marginals: String,
    pub final_elbo: f64,
    pub wall_seconds: f64,
    /// Wall time at each trajectory checkpoint.
    pub checkpoint_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub objective_hash: String,
    pub objective: String,
    pub seed: u64,
    /// Directory relative config paths were resolved against.
    pub base_dir: String,
    /// Unix time the run started.
    pub started_unix: u64,
    pub wall_seconds: f64,
    /// The config file, verbatim.
    pub config: String,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    pub fn load(bundle: &Path) -> Result<Self> {
        let path = bundle.join(MANIFEST_FILE);
        let text =
            fs::read_to_string(&path).map_err(|e| Error::Bundle(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Bundle(format!("{}: {e}", path.display())))
    }
}

/// Exclusive hold on an output directory, released on drop.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Bundle(format!(
                "{} exists: another run is using this directory (remove the file if it is stale)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// File-name form of a label: `block-ca(init=shrunken-fw)` becomes
/// `block-ca_init-shrunken-fw`.
pub fn file_stem(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' => out.push(c),
            '(' | ',' => out.push('_'),
            '=' => out.push('-'),
            _ => {}
        }
    }
    out
}

/// Summary of a finished experiment.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub runs: Vec<InferenceRun>,
}

/// Runs every configured algorithm and writes the bundle: one trajectory CSV
/// and one marginal CSV per run, rewritten atomically at each checkpoint, and
/// `manifest.toml`.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentOutcome> {
    let cfg = &exp.config;
    cfg.validate(&exp.base_dir).map_err(|e| e.at_stage("config"))?;
    let built = BuiltObjective::build(&cfg.objective, cfg.seed, &exp.base_dir).map_err(|e| e.at_stage("objective"))?;
    let f = built.objective();
    let root = SeedStream::new(cfg.seed);

    let out_dir = exp.output_dir();
    fs::create_dir_all(&out_dir).map_err(|e| Error::from(e).at_stage("output"))?;
    let _lock = OutputLock::acquire(&out_dir).map_err(|e| e.at_stage("output"))?;

    let started_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = crate::inference::Clock::start();

    let evaluation = resolve_sampling(
        cfg.evaluation,
        f,
        derived_seed(root.child(TAG_EVALUATION)),
        EVALUATION_EPS,
    )
    .map_err(|e| e.at_stage("objective"))?;

    let mut runs: Vec<InferenceRun> = Vec::new();
    let mut records: Vec<RunRecord> = Vec::new();
    for spec in &cfg.algorithms {
        let label = spec.label();
        let (run, record) = run_one(exp, f, spec, &label, evaluation, &runs, &records, &out_dir)
            .map_err(|e| e.at_stage(label.clone()))?;
        log::info!(
            "{label}: final ELBO {:.6} after {} epochs",
            record.final_elbo,
            record.epochs
        );
        runs.push(run);
        records.push(record);
    }

    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        objective_hash: built.hash(),
        objective: built.describe(),
        seed: cfg.seed,
        base_dir: exp.base_dir.to_string_lossy().into_owned(),
        started_unix,
        wall_seconds: clock.seconds(),
        config: exp.text.clone(),
        runs: records,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Bundle(e.to_string()).at_stage("manifest"))?;
    write_atomic(&out_dir.join(MANIFEST_FILE), &text).map_err(|e| e.at_stage("manifest"))?;
    Ok(ExperimentOutcome {
        output_dir: out_dir,
        manifest,
        runs,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    exp: &Experiment,
    f: &dyn Objective,
    spec: &AlgorithmSpec,
    label: &str,
    evaluation: EvalMode,
    done: &[InferenceRun],
    done_records: &[RunRecord],
    out_dir: &Path,
) -> Result<(InferenceRun, RunRecord)> {
    let cfg = &exp.config;
    let root = SeedStream::new(cfg.seed);
    let tag = label_tag(label);
    let domain = f.domain();
    let epochs = cfg.epochs_for(spec);

    let gradient = resolve_sampling(
        cfg.gradient,
        f,
        derived_seed(root.child(TAG_GRADIENT).child(tag)),
        GRADIENT_EPS,
    )?;
    let schedule = match cfg.schedule {
        ScheduleSpec::Cyclic => Schedule::Cyclic,
        ScheduleSpec::Random => Schedule::Random {
            seed: derived_seed(root.child(TAG_SCHEDULE).child(tag)),
        },
    };
    let iterations = match spec.method {
        Method::BlockCa => epochs * domain.n(),
        Method::ShrunkenFw => epochs,
        Method::TwoPhaseFw => (epochs / 2).max(1),
    };
    let config = ElboConfig {
        gradient,
        evaluation,
        iterations,
        schedule,
        entropy_clip: cfg.entropy_clip,
        checkpoint: cfg.checkpoint,
    };

    let init = spec.effective_init();
    let mut init_seed = None;
    let rho0 = match &init {
        InitSpec::Zero => ProductCategorical::zero(domain),
        InitSpec::Uniform => ProductCategorical::uniform(domain),
        InitSpec::Random => {
            let s = derived_seed(root.child(TAG_INIT).child(tag));
            init_seed = Some(s);
            ProductCategorical::random(domain, s)
        }
        InitSpec::Run(name) => {
            let idx = done_records
                .iter()
                .position(|r| &r.label == name)
                .ok_or_else(|| Error::Config(format!("init run {name:?} has not run")))?;
            done[idx].rho.clone()
        }
    };

    let stem = file_stem(label);
    let trajectory_name = format!("trajectory-{stem}.csv");
    let marginals_name = format!("marginals-{stem}.csv");
    let trajectory_path = out_dir.join(&trajectory_name);
    let marginals_path = out_dir.join(&marginals_name);
    let with_seconds = cfg.trajectory_seconds;

    let mut points: Vec<TrajectoryPoint> = Vec::new();
    let mut observer = |point: &TrajectoryPoint, rho: &ProductCategorical| -> Result<()> {
        points.push(point.clone());
        write_atomic(&trajectory_path, &trajectory_csv(&points, with_seconds))?;
        write_atomic(&marginals_path, &rho.to_csv())
    };
    let clock = crate::inference::Clock::start();
    let run = match spec.method {
        Method::BlockCa => block_ca_observed(f, &rho0, &config, label, &mut observer)?,
        Method::ShrunkenFw => shrunken_fw_observed(f, &config, label, &mut observer)?,
        Method::TwoPhaseFw => two_phase_fw_observed(f, &config, &rho0, label, &mut observer)?,
    };
    let wall_seconds = clock.seconds();

    let record = RunRecord {
        label: label.to_string(),
        method: spec.method.as_str().to_string(),
        init: match spec.method {
            Method::ShrunkenFw => "zero".to_string(),
            _ => match &init {
                InitSpec::Zero => "zero".into(),
                InitSpec::Uniform => "uniform".into(),
                InitSpec::Random => "random".into(),
                InitSpec::Run(r) => r.clone(),
            },
        },
        epochs: run.epochs,
        iterations,
        gradient,
        evaluation,
        schedule,
        init_seed,
        trajectory: trajectory_name,
        marginals: marginals_name,
        final_elbo: run.final_elbo().unwrap_or(f64::NAN),
        wall_seconds,
        checkpoint_seconds: run.trajectory.iter().map(|p| p.seconds).collect(),
    };
    Ok((run, record))
}
