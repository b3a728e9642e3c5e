use std::path::{Path, PathBuf};

use hashlab::datasets::{
    cifar10_paths, load_cifar10, load_feature_file, load_label_file, load_mnist, mnist_paths, split_query, FeatureKind, ImageShape,
    LabeledDataset, Split, DATA_DIR_ENV,
};
use hashlab::deep::TrainConfig;
use hashlab::model::{FitOptions, Method};
use hashlab::numerics::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Mnist,
    Cifar10,
    /// Feature and label files. `test_*` are needed for the test-split
    /// query policy; `image` marks the features as raw pixels.
    Features {
        features: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        test_features: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        #[serde(default)]
        image: Option<ImageShape>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryPolicy {
    /// Queries from the test split, database from the training split.
    TestSplit,
    /// Queries held out of the training split; the rest is the database.
    Holdout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub policy: QueryPolicy,
    pub count: usize,
    /// Random database subset; the whole database when absent.
    pub database_size: Option<usize>,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            policy: QueryPolicy::TestSplit,
            count: 1000,
            database_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub radii: Vec<usize>,
    /// Precision within every radius 0..=bits (overrides `radii`).
    pub radius_sweep: bool,
    pub pr_curve: bool,
    pub diagnostics: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 10, 50, 100, 500, 1000],
            radii: vec![2],
            radius_sweep: false,
            pr_curve: true,
            diagnostics: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    pub method: OneOrMany<Method>,
    pub bits: OneOrMany<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub query: QueryConfig,
    #[serde(default = "default_itq_iterations")]
    pub itq_iterations: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_itq_iterations() -> usize {
    hashlab::baselines::DEFAULT_ITQ_ITERS
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub method: Option<Vec<Method>>,
    pub bits: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub query_policy: Option<QueryPolicy>,
    pub query_count: Option<usize>,
    pub database_size: Option<usize>,
    pub epochs: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<serde_json::Value>(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
            }
            None => serde_json::json!({}),
        };
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::usage("config must be a JSON object"))?;
        let mut set = |key: &str, v: serde_json::Value| {
            obj.insert(key.to_string(), v);
        };
        if let Some(d) = &overrides.dataset {
            set("dataset", serde_json::json!({ "kind": d }));
        }
        if let Some(d) = &overrides.data_dir {
            set("data_dir", serde_json::json!(d));
        }
        if let Some(m) = &overrides.method {
            set("method", serde_json::json!(m));
        }
        if let Some(b) = &overrides.bits {
            set("bits", serde_json::json!(b));
        }
        if let Some(s) = overrides.seed {
            set("seed", serde_json::json!(s));
        }
        if let Some(o) = &overrides.output {
            set("output", serde_json::json!(o));
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        if let Some(p) = overrides.query_policy {
            cfg.query.policy = p;
        }
        if let Some(c) = overrides.query_count {
            cfg.query.count = c;
        }
        if overrides.database_size.is_some() {
            cfg.query.database_size = overrides.database_size;
        }
        if let Some(e) = overrides.epochs {
            cfg.train.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let methods = self.method.to_vec();
        let bits = self.bits.to_vec();
        if methods.is_empty() || bits.is_empty() {
            return Err(CliError::usage("config needs at least one method and one bit width"));
        }
        if let Some(&b) = bits.iter().find(|&&b| b == 0 || b > hashlab::codes::MAX_BITS) {
            return Err(CliError::usage(format!("bits must lie in 1..={}, got {b}", hashlab::codes::MAX_BITS)));
        }
        if self.query.count == 0 {
            return Err(CliError::usage("query count must be positive"));
        }
        if self.query.database_size == Some(0) {
            return Err(CliError::usage("database size must be positive"));
        }
        if self.itq_iterations == 0 {
            return Err(CliError::usage("itq_iterations must be positive"));
        }
        if self.eval.ks.contains(&0) {
            return Err(CliError::usage("precision@k needs k >= 1"));
        }
        self.train.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if let DatasetConfig::Features { test_features, test_labels, .. } = &self.dataset {
            if self.query.policy == QueryPolicy::TestSplit && (test_features.is_none() || test_labels.is_none()) {
                return Err(CliError::usage("the test-split query policy needs test_features and test_labels"));
            }
        }
        Ok(())
    }

    /// The only method and bit width, for commands that train one model.
    pub fn single(&self) -> CliResult<(Method, usize)> {
        match (self.method.to_vec().as_slice(), self.bits.to_vec().as_slice()) {
            ([m], [b]) => Ok((*m, *b)),
            _ => Err(CliError::usage("this command needs exactly one method and one bit width; use sweep for lists")),
        }
    }

    pub fn data_root(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(hashlab::datasets::data_dir)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            itq_iterations: self.itq_iterations,
            train: self.train.clone(),
            ..FitOptions::default()
        }
    }

    /// Seed for one labelled sub-step.
    pub fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    /// Training and test splits as configured.
    pub fn load_splits(&self) -> CliResult<(LabeledDataset, Option<LabeledDataset>)> {
        let root = self.data_root();
        let missing = |p: &Path| {
            if !p.exists() {
                Err(CliError::usage(format!(
                    "{} not found (data root {}; set {DATA_DIR_ENV} or data_dir)",
                    p.display(),
                    root.display()
                )))
            } else {
                Ok(())
            }
        };
        match &self.dataset {
            DatasetConfig::Mnist => {
                let load = |split| -> CliResult<LabeledDataset> {
                    let (img, lab) = mnist_paths(&root, split);
                    missing(&img)?;
                    missing(&lab)?;
                    Ok(load_mnist(img, lab)?)
                };
                Ok((load(Split::Train)?, Some(load(Split::Test)?)))
            }
            DatasetConfig::Cifar10 => {
                let load = |split| -> CliResult<LabeledDataset> {
                    let paths = cifar10_paths(&root, split);
                    for p in &paths {
                        missing(p)?;
                    }
                    Ok(load_cifar10(&paths)?)
                };
                Ok((load(Split::Train)?, Some(load(Split::Test)?)))
            }
            DatasetConfig::Features { features, labels, test_features, test_labels, image } => {
                let load = |f: &Path, l: &Path| -> CliResult<LabeledDataset> {
                    missing(f)?;
                    missing(l)?;
                    let x = load_feature_file(f)?;
                    let y = load_label_file(l)?;
                    let kind = if image.is_some() { FeatureKind::RawPixels } else { FeatureKind::Precomputed };
                    if let Some(s) = image {
                        if s.len() != x.cols() {
                            return Err(CliError::usage(format!("image {s:?} needs {} features, {} has {}", s.len(), f.display(), x.cols())));
                        }
                    }
                    Ok(LabeledDataset::new(x, y, kind, *image)?)
                };
                let train = load(features, labels)?;
                let test = match (test_features, test_labels) {
                    (Some(f), Some(l)) => Some(load(f, l)?),
                    _ => None,
                };
                Ok((train, test))
            }
        }
    }

    /// Database and query sets under the configured policy.
    pub fn protocol(&self) -> CliResult<Protocol> {
        let (train, test) = self.load_splits()?;
        let q = self.query.count;
        let (database, queries) = match self.query.policy {
            QueryPolicy::TestSplit => {
                let test = test.ok_or_else(|| CliError::usage("dataset has no test split"))?;
                if q > test.len() {
                    return Err(CliError::usage(format!("{q} queries requested from a test split of {}", test.len())));
                }
                let qi = if q == test.len() {
                    (0..q).collect()
                } else {
                    split_query(test.len(), q, self.seed_for("query"))?.query_indices
                };
                (train, test.subset(&qi))
            }
            QueryPolicy::Holdout => {
                if q >= train.len() {
                    return Err(CliError::usage(format!("{q} held-out queries leave no database of {}", train.len())));
                }
                let s = split_query(train.len(), q, self.seed_for("query"))?;
                (train.subset(&s.database_indices), train.subset(&s.query_indices))
            }
        };
        let database = match self.query.database_size {
            Some(k) if k < database.len() => {
                let idx = split_query(database.len(), k, self.seed_for("database"))?.query_indices;
                database.subset(&idx)
            }
            Some(k) if k > database.len() => {
                return Err(CliError::usage(format!("database size {k} exceeds the {} available items", database.len())));
            }
            _ => database,
        };
        Ok(Protocol { database, queries })
    }
}

pub struct Protocol {
    pub database: LabeledDataset,
    pub queries: LabeledDataset,
}
