//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//! output = "runs/football"
//! epochs = 20
//! algorithms = ["shrunken-fw", "two-phase-fw", "block-ca(init=shrunken-fw)"]
//!
//! [objective]
//! kind = "revenue"
//! q = 0.75
//! k = 5
//! graph = { source = "synthetic", nodes = 35, edges = 118, seed = 1 }
//!
//! [gradient]
//! mode = "monte-carlo"
//! samples = 738
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::inference::Checkpoint;
use crate::marginals::DEFAULT_ENTROPY_CLIP;

pub const DEFAULT_EPOCHS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every other seed is derived from it.
    pub seed: u64,
    /// Bundle directory, relative to the config file.
    pub output: PathBuf,
    /// Default epoch budget for algorithms that do not set their own.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub checkpoint: Checkpoint,
    #[serde(default = "default_clip")]
    pub entropy_clip: f64,
    /// Fill the `seconds` column of trajectory CSVs. Off by default so that
    /// data files are byte-reproducible; wall times always go to the manifest.
    #[serde(default)]
    pub trajectory_seconds: bool,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub gradient: SamplingSpec,
    /// How trajectory ELBO values are computed.
    #[serde(default)]
    pub evaluation: SamplingSpec,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_clip() -> f64 {
    DEFAULT_ENTROPY_CLIP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Revenue {
        q: f64,
        k: usize,
        graph: GraphSource,
    },
    Facility {
        /// Facilities, i.e. lattice coordinates.
        n: usize,
        /// Customers; defaults to `n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        k: usize,
        /// Weight-table seed; defaults to the root seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSource {
    File {
        /// Edge list, relative to the config file.
        path: PathBuf,
        #[serde(default = "yes")]
        symmetrize: bool,
    },
    Synthetic {
        nodes: usize,
        edges: usize,
        /// Defaults to the root seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn yes() -> bool {
    true
}

/// Exact enumeration or Monte Carlo sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplingSpec {
    /// Exact when the domain has at most [`AUTO_EXACT_LIMIT`] points.
    #[default]
    Auto,
    Exact,
    MonteCarlo {
        /// Defaults to the Hoeffding count for a 5% range error at 95%.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
    },
}

/// Domains up to this size are evaluated exactly under [`SamplingSpec::Auto`].
pub const AUTO_EXACT_LIMIT: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    #[default]
    Cyclic,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    BlockCa,
    ShrunkenFw,
    TwoPhaseFw,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BlockCa => "block-ca",
            Method::ShrunkenFw => "shrunken-fw",
            Method::TwoPhaseFw => "two-phase-fw",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block-ca" => Ok(Method::BlockCa),
            "shrunken-fw" => Ok(Method::ShrunkenFw),
            "two-phase-fw" => Ok(Method::TwoPhaseFw),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected block-ca, shrunken-fw or two-phase-fw)"
            ))),
        }
    }
}

/// Starting point of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitSpec {
    Zero,
    Uniform,
    Random,
    /// Final iterate of the earlier run with this label.
    Run(String),
}

impl InitSpec {
    fn parse(s: &str) -> Self {
        match s {
            "zero" => InitSpec::Zero,
            "uniform" => InitSpec::Uniform,
            "random" => InitSpec::Random,
            other => InitSpec::Run(other.to_string()),
        }
    }

    fn as_str(&self) -> &str {
        match self {
            InitSpec::Zero => "zero",
            InitSpec::Uniform => "uniform",
            InitSpec::Random => "random",
            InitSpec::Run(label) => label,
        }
    }
}

/// One configured run, written `method` or `method(key=value, ...)` with keys
/// `init` and `epochs`, e.g. `block-ca(init=shrunken-fw, epochs=10)`.
///
/// The canonical text is the run's label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgorithmSpec {
    pub method: Method,
    pub init: Option<InitSpec>,
    pub epochs: Option<usize>,
}

impl AlgorithmSpec {
    pub fn new(method: Method) -> Self {
        AlgorithmSpec {
            method,
            init: None,
            epochs: None,
        }
    }

    pub fn with_init(mut self, init: &str) -> Self {
        self.init = Some(InitSpec::parse(init));
        self
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// The initializer, with the method's default filled in.
    pub fn effective_init(&self) -> InitSpec {
        match (&self.init, self.method) {
            (Some(init), _) => init.clone(),
            (None, Method::BlockCa) => InitSpec::Uniform,
            (None, _) => InitSpec::Zero,
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method.as_str())?;
        let mut args = Vec::new();
        if let Some(init) = &self.init {
            args.push(format!("init={}", init.as_str()));
        }
        if let Some(e) = self.epochs {
            args.push(format!("epochs={e}"));
        }
        if !args.is_empty() {
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.find('(') {
            None => (s, None),
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in {s:?}")))?;
                (s[..open].trim(), Some(inner))
            }
        };
        let mut spec = AlgorithmSpec::new(head.parse()?);
        for arg in args.into_iter().flat_map(|a| a.split(',')) {
            let arg = arg.trim();
            if arg.is_empty() {
                continue;
            }
            let (key, value) = arg
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {arg:?} in {s:?}")))?;
            let value = value.trim();
            match key.trim() {
                "init" if spec.init.is_none() => spec.init = Some(InitSpec::parse(value)),
                "epochs" if spec.epochs.is_none() => {
                    spec.epochs = Some(
                        value
                            .parse()
                            .map_err(|_| Error::Config(format!("epochs {value:?} is not a count in {s:?}")))?,
                    )
                }
                other => {
                    return Err(Error::Config(format!(
                        "unexpected or repeated argument {other:?} in {s:?}"
                    )))
                }
            }
        }
        Ok(spec)
    }
}

impl Serialize for AlgorithmSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlgorithmSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Epoch budget of `spec`.
    pub fn epochs_for(&self, spec: &AlgorithmSpec) -> usize {
        spec.epochs.unwrap_or(self.epochs)
    }

    /// Checks ranges and run references. Files are checked against `base`.
    pub fn validate(&self, base: &Path) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.algorithms.is_empty() {
            return cfg("at least one algorithm is required".into());
        }
        if !(self.entropy_clip > 0.0 && self.entropy_clip < 0.5) {
            return cfg(format!("entropy_clip {} must lie in (0, 0.5)", self.entropy_clip));
        }
        for mode in [self.gradient, self.evaluation] {
            if let SamplingSpec::MonteCarlo { samples: Some(0) } = mode {
                return cfg("Monte Carlo sample count must be at least 1".into());
            }
        }
        match &self.objective {
            ObjectiveSpec::Revenue { q, k, graph } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return cfg(format!("q = {q} must lie in (0, 1)"));
                }
                if *k < 2 {
                    return cfg(format!("k = {k} must be at least 2"));
                }
                match graph {
                    GraphSource::File { path, .. } => {
                        let full = base.join(path);
                        if !full.is_file() {
                            return cfg(format!("edge list {} does not exist", full.display()));
                        }
                    }
                    GraphSource::Synthetic { nodes, edges, .. } => {
                        if *nodes < 2 || *edges == 0 || *edges > nodes * (nodes - 1) / 2 {
                            return cfg(format!("synthetic graph with {nodes} nodes cannot have {edges} edges"));
                        }
                    }
                }
            }
            ObjectiveSpec::Facility { n, m, k, .. } => {
                if *n == 0 || m.is_some_and(|m| m == 0) || *k < 2 {
                    return cfg(format!("facility needs n, m ≥ 1 and k ≥ 2 (got n={n}, m={m:?}, k={k})"));
                }
            }
        }

        let mut seen: Vec<String> = Vec::new();
        for spec in &self.algorithms {
            let label = spec.label();
            if seen.contains(&label) {
                return cfg(format!("algorithm {label} is listed twice"));
            }
            if self.epochs_for(spec) == 0 {
                return cfg(format!("{label}: epoch budget must be at least 1"));
            }
            match (&spec.init, spec.method) {
                (Some(_), Method::ShrunkenFw) => {
                    return cfg(format!(
                        "{label}: shrunken-fw always starts from zero and takes no init"
                    ));
                }
                (Some(InitSpec::Run(r)), _) if !seen.contains(r) => {
                    return cfg(format!("{label}: init run {r:?} must be listed earlier"));
                }
                _ => {}
            }
            seen.push(label);
        }
        Ok(())
    }
}
