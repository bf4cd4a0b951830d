use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::curriculum::CurriculumConfig;
use crate::data::Tokenization;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Synthetic tasks divide the 8000-update warmup (and the default
/// curriculum length) by this factor.
pub const SYNTH_SCALE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    SynthCopy,
    SynthReverse,
    SynthDigits,
    SynthLm,
    Files,
}

impl TaskKind {
    pub fn is_synthetic(self) -> bool {
        self != TaskKind::Files
    }
}

/// Where the corpus comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Synthetic training pairs.
    pub size: usize,
    /// Synthetic dev pairs, generated after the training pairs.
    pub dev_size: usize,
    /// Content symbols of copy, reverse and language-model tasks.
    pub vocab: usize,
    /// Longest sentence; longer file lines are dropped.
    pub max_len: usize,
    /// Seed of the synthetic generator; defaults to the run seed.
    pub data_seed: Option<u64>,
    /// Keep this fraction of the training pairs.
    pub subsample: Option<f64>,
    pub train_source: Option<PathBuf>,
    pub train_target: Option<PathBuf>,
    pub dev_source: Option<PathBuf>,
    pub dev_target: Option<PathBuf>,
    pub tokenization: Tokenization,
    pub min_freq: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::SynthCopy,
            size: 2000,
            dev_size: 200,
            vocab: 20,
            max_len: 12,
            data_seed: None,
            subsample: None,
            train_source: None,
            train_target: None,
            dev_source: None,
            dev_target: None,
            tokenization: Tokenization::Word,
            min_freq: 1,
        }
    }
}

/// Model hyperparameters; vocabulary sizes, mode and seed come from the
/// corpus and the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub label_smoothing: f64,
    pub dropout: f64,
    pub max_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            embed: 64,
            hidden: 64,
            layers: 2,
            label_smoothing: 0.1,
            dropout: 0.0,
            max_len: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam: usize,
    pub length_penalty: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam: 5,
            length_penalty: 1.0,
        }
    }
}

/// Everything a command needs, as resolved from defaults, the config file
/// and command-line overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub task: TaskConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub curriculum: CurriculumConfig,
    pub decode: DecodeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::defaults_for(TaskKind::SynthCopy)
    }
}

impl RunConfig {
    /// Defaults for a task. Synthetic tasks get a smaller model, a larger
    /// rate and warmup and curriculum length divided by [`SYNTH_SCALE`].
    pub fn defaults_for(kind: TaskKind) -> Self {
        let mut c = Self {
            seed: 1,
            task: TaskConfig {
                kind,
                ..TaskConfig::default()
            },
            model: ModelSection::default(),
            train: TrainConfig::default(),
            curriculum: CurriculumConfig::default(),
            decode: DecodeConfig::default(),
        };
        if kind.is_synthetic() {
            c.model.embed = 32;
            c.model.hidden = 32;
            c.model.layers = 1;
            c.train.peak_lr = 3e-3;
            c.train.warmup = 8000 / SYNTH_SCALE;
            c.train.max_steps = 3000;
            c.train.batch_tokens = 256;
            c.train.eval_interval = 100;
            c.curriculum.steps = 8000 / SYNTH_SCALE;
        }
        if kind == TaskKind::SynthLm {
            c.train.dev_metric = crate::train::DevMetric::Perplexity;
        }
        c
    }

    /// Defaults, overlaid by the TOML file, overlaid by `overrides`
    /// (dotted key paths). The task kind picks the default set and is read
    /// with the same precedence.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let file_value = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let table: toml::Table = toml::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
                serde_json::to_value(table)?
            }
            None => Value::Object(Default::default()),
        };
        let kind_value = overrides
            .iter()
            .find(|(k, _)| k == "task.kind")
            .map(|(_, v)| v.clone())
            .or_else(|| file_value.pointer("/task/kind").cloned());
        let kind: TaskKind = match kind_value {
            Some(v) => serde_json::from_value(v).map_err(|e| Error::config("task.kind", e.to_string()))?,
            None => TaskKind::SynthCopy,
        };
        let mut merged = serde_json::to_value(Self::defaults_for(kind))?;
        merge(&mut merged, file_value);
        for (key, value) in overrides {
            set_path(&mut merged, key, value.clone());
        }
        let config: RunConfig = serde_json::from_value(merged).map_err(|e| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.task;
        if t.kind.is_synthetic() {
            if t.size == 0 {
                return Err(Error::config("task.size", "must be at least 1"));
            }
            if t.kind != TaskKind::SynthDigits && t.vocab == 0 {
                return Err(Error::config("task.vocab", "must be at least 1"));
            }
        } else if t.train_target.is_none() {
            return Err(Error::config("task.train_target", "file tasks need training text"));
        }
        if t.max_len == 0 {
            return Err(Error::config("task.max_len", "must be at least 1"));
        }
        if let Some(f) = t.subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("task.subsample", format!("must lie in (0, 1], got {f}")));
            }
        }
        if self.model.max_len <= t.max_len {
            return Err(Error::config("model.max_len", "must exceed task.max_len to leave room for the end marker"));
        }
        if self.decode.beam == 0 {
            return Err(Error::config("decode.beam", "must be at least 1"));
        }
        if !(self.decode.length_penalty >= 0.0) {
            return Err(Error::config("decode.length_penalty", "must be non-negative"));
        }
        let mut train = self.train.clone();
        train.curriculum = self.curriculum.clone();
        train.validate()
    }

    /// Trainer settings with the curriculum and seed filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            curriculum: self.curriculum.clone(),
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.task.data_seed.unwrap_or(self.seed)
    }

    /// First 8 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash8(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        Ok(hex::encode(Sha256::digest(json.as_bytes()))[..8].to_string())
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) {
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return;
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::Variant;
    use serde_json::json;
    use std::io::Write;

    #[test]
    fn precedence_is_cli_then_file_then_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed = 4\n[curriculum]\nvariant = \"tc-hard\"\nlambda0 = 0.2\n[train]\nmax_steps = 77").unwrap();
        let c = RunConfig::resolve(Some(f.path()), &[("curriculum.lambda0".into(), json!(0.3))]).unwrap();
        assert_eq!(c.curriculum.variant, Variant::TcHard);
        assert_eq!(c.curriculum.lambda0, 0.3);
        assert_eq!(c.train.max_steps, 77);
        assert_eq!(c.seed, 4);
        assert_eq!(c.curriculum.gamma0, 0.7);
        assert_eq!(c.train.warmup, 400);
    }

    #[test]
    fn task_kind_picks_defaults() {
        let c = RunConfig::resolve(None, &[("task.kind".into(), json!("files")), ("task.train_target".into(), json!("t.txt"))]).unwrap();
        assert_eq!(c.train.warmup, 8000);
        assert_eq!(c.model.hidden, 64);
    }

    #[test]
    fn field_level_errors() {
        let err = RunConfig::resolve(None, &[("curriculum.gamma0".into(), json!(1.5))]).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "gamma0"), "{err}");
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "[train]\nwarmpu = 3").unwrap();
        let err = RunConfig::resolve(Some(f.path()), &[]).unwrap_err();
        assert!(err.to_string().contains("warmpu"), "{err}");
    }

    #[test]
    fn hash_survives_reserialization() {
        let c = RunConfig::default();
        let again: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c.hash8().unwrap(), again.hash8().unwrap());
        let mut d = c.clone();
        d.seed = 2;
        assert_ne!(c.hash8().unwrap(), d.hash8().unwrap());
    }
}
