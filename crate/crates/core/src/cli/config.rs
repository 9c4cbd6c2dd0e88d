//! Config files, `--set` overrides and the resolved experiment description.
//!
//! A config is one TOML document. `kind`, `seed` and `out` are reserved
//! top-level keys; every other key belongs to the experiment's parameter
//! block. Defaults are serialized first and the file is merged over them, so
//! the resolved config always lists every parameter.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::params::{
    spectrum_default, BoundaryParams, ElboSweepParams, EscapeParams, HeatmapParams, HistogramParams,
    QuadTrajectoryParams, SmoothingParams, VonCompareParams,
};
use crate::training::TrainConfig;
use crate::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "EOSLAB_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    QuadHeatmap,
    StabilityBoundary,
    QuadHistogram,
    QuadTrajectory,
    Smoothing,
    Escape,
    Train,
    Spectrum,
    VonCompare,
    ElboSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::QuadHeatmap,
        ExperimentKind::StabilityBoundary,
        ExperimentKind::QuadHistogram,
        ExperimentKind::QuadTrajectory,
        ExperimentKind::Smoothing,
        ExperimentKind::Escape,
        ExperimentKind::Train,
        ExperimentKind::Spectrum,
        ExperimentKind::VonCompare,
        ExperimentKind::ElboSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::QuadHeatmap => "quad-heatmap",
            ExperimentKind::StabilityBoundary => "stability-boundary",
            ExperimentKind::QuadHistogram => "quad-histogram",
            ExperimentKind::QuadTrajectory => "quad-trajectory",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::Escape => "escape",
            ExperimentKind::Train => "train",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::VonCompare => "von-compare",
            ExperimentKind::ElboSweep => "elbo-sweep",
        }
    }

    pub fn default_params(self) -> Params {
        match self {
            ExperimentKind::QuadHeatmap => Params::QuadHeatmap(HeatmapParams::default()),
            ExperimentKind::StabilityBoundary => Params::StabilityBoundary(BoundaryParams::default()),
            ExperimentKind::QuadHistogram => Params::QuadHistogram(HistogramParams::default()),
            ExperimentKind::QuadTrajectory => Params::QuadTrajectory(QuadTrajectoryParams::default()),
            ExperimentKind::Smoothing => Params::Smoothing(SmoothingParams::default()),
            ExperimentKind::Escape => Params::Escape(EscapeParams::default()),
            ExperimentKind::Train => Params::Train(TrainConfig::default()),
            ExperimentKind::Spectrum => Params::Spectrum(spectrum_default()),
            ExperimentKind::VonCompare => Params::VonCompare(VonCompareParams::default()),
            ExperimentKind::ElboSweep => Params::ElboSweep(ElboSweepParams::default()),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment kind \"{s}\", expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Params {
    QuadHeatmap(HeatmapParams),
    StabilityBoundary(BoundaryParams),
    QuadHistogram(HistogramParams),
    QuadTrajectory(QuadTrajectoryParams),
    Smoothing(SmoothingParams),
    Escape(EscapeParams),
    Train(TrainConfig),
    Spectrum(TrainConfig),
    VonCompare(VonCompareParams),
    ElboSweep(ElboSweepParams),
}

impl Params {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Params::QuadHeatmap(_) => ExperimentKind::QuadHeatmap,
            Params::StabilityBoundary(_) => ExperimentKind::StabilityBoundary,
            Params::QuadHistogram(_) => ExperimentKind::QuadHistogram,
            Params::QuadTrajectory(_) => ExperimentKind::QuadTrajectory,
            Params::Smoothing(_) => ExperimentKind::Smoothing,
            Params::Escape(_) => ExperimentKind::Escape,
            Params::Train(_) => ExperimentKind::Train,
            Params::Spectrum(_) => ExperimentKind::Spectrum,
            Params::VonCompare(_) => ExperimentKind::VonCompare,
            Params::ElboSweep(_) => ExperimentKind::ElboSweep,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match self {
            Params::QuadHeatmap(p) => p.violations(),
            Params::StabilityBoundary(p) => p.violations(),
            Params::QuadHistogram(p) => p.violations(),
            Params::QuadTrajectory(p) => p.violations(),
            Params::Smoothing(p) => p.violations(),
            Params::Escape(p) => p.violations(),
            Params::Train(p) | Params::Spectrum(p) => p.violations(),
            Params::VonCompare(p) => p.violations(),
            Params::ElboSweep(p) => p.violations(),
        }
    }

    fn to_table(&self) -> Result<Table> {
        let value = match self {
            Params::QuadHeatmap(p) => Value::try_from(p),
            Params::StabilityBoundary(p) => Value::try_from(p),
            Params::QuadHistogram(p) => Value::try_from(p),
            Params::QuadTrajectory(p) => Value::try_from(p),
            Params::Smoothing(p) => Value::try_from(p),
            Params::Escape(p) => Value::try_from(p),
            Params::Train(p) | Params::Spectrum(p) => Value::try_from(p),
            Params::VonCompare(p) => Value::try_from(p),
            Params::ElboSweep(p) => Value::try_from(p),
        }
        .map_err(|e| Error::Config(format!("cannot serialize parameters: {e}")))?;
        match value {
            Value::Table(t) => Ok(t),
            _ => Err(Error::Config("parameters did not serialize to a table".into())),
        }
    }

    fn from_text(kind: ExperimentKind, text: &str) -> std::result::Result<Params, toml::de::Error> {
        Ok(match kind {
            ExperimentKind::QuadHeatmap => Params::QuadHeatmap(toml::from_str(text)?),
            ExperimentKind::StabilityBoundary => Params::StabilityBoundary(toml::from_str(text)?),
            ExperimentKind::QuadHistogram => Params::QuadHistogram(toml::from_str(text)?),
            ExperimentKind::QuadTrajectory => Params::QuadTrajectory(toml::from_str(text)?),
            ExperimentKind::Smoothing => Params::Smoothing(toml::from_str(text)?),
            ExperimentKind::Escape => Params::Escape(toml::from_str(text)?),
            ExperimentKind::Train => Params::Train(toml::from_str(text)?),
            ExperimentKind::Spectrum => Params::Spectrum(toml::from_str(text)?),
            ExperimentKind::VonCompare => Params::VonCompare(toml::from_str(text)?),
            ExperimentKind::ElboSweep => Params::ElboSweep(toml::from_str(text)?),
        })
    }
}

/// A fully resolved experiment: every parameter is explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn new(seed: u64, params: Params) -> Self {
        Self { seed, params }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.params.kind()
    }

    pub fn violations(&self) -> Vec<String> {
        self.params.violations()
    }

    /// `kind`, `seed` and every parameter as one table.
    pub fn to_table(&self) -> Result<Table> {
        let mut t = Table::new();
        t.insert("kind".into(), Value::String(self.kind().name().into()));
        t.insert("seed".into(), seed_value(self.seed)?);
        t.extend(self.params.to_table()?);
        Ok(t)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_table()?).map_err(|e| Error::Config(format!("cannot render config: {e}")))
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self.to_table()?)?)
    }

    /// Parses a resolved or partial TOML document with no overrides.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(load(&ConfigRequest {
            text: Some((PathBuf::from("<string>"), text.to_string())),
            ..ConfigRequest::default()
        })?
        .config)
    }
}

fn seed_value(seed: u64) -> Result<Value> {
    i64::try_from(seed)
        .map(Value::Integer)
        .map_err(|_| Error::Config(format!("seed {seed} does not fit a TOML integer")))
}

/// Inputs to [`load`], in precedence order flag > file > default.
#[derive(Clone, Debug, Default)]
pub struct ConfigRequest {
    /// Kind named on the command line.
    pub kind: Option<ExperimentKind>,
    /// Config file path and contents.
    pub text: Option<(PathBuf, String)>,
    /// `key=value` overrides, applied after the file.
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ConfigRequest {
    pub fn with_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.text = Some((path.to_path_buf(), text));
        Ok(self)
    }
}

#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    /// Output directory from the flag or file, if either set one.
    pub out: Option<PathBuf>,
}

/// Resolves a config, reporting syntax and unknown-key errors with the file
/// line where possible.
pub fn load(req: &ConfigRequest) -> Result<Loaded> {
    let mut doc = match &req.text {
        Some((path, text)) => text.parse::<Table>().map_err(|e| syntax_error(path, text, &e))?,
        None => Table::new(),
    };
    for set in &req.sets {
        apply_set(&mut doc, set)?;
    }

    let file_kind = match doc.remove("kind") {
        Some(Value::String(s)) => Some(s.parse::<ExperimentKind>().map_err(|e| locate(req, "kind", e))?),
        Some(other) => return Err(locate(req, "kind", Error::Config(format!("kind must be a string, got {other}")))),
        None => None,
    };
    let kind = match (req.kind, file_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(locate(
                req,
                "kind",
                Error::Config(format!("config is for \"{b}\" but the command is \"{a}\"")),
            ))
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(Error::Config("no experiment kind given".into())),
    };
    let file_seed = match doc.remove("seed") {
        Some(Value::Integer(s)) if s >= 0 => Some(s as u64),
        Some(other) => {
            return Err(locate(
                req,
                "seed",
                Error::Config(format!("seed must be a non-negative integer, got {other}")),
            ))
        }
        None => None,
    };
    let file_out = match doc.remove("out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => return Err(locate(req, "out", Error::Config(format!("out must be a string, got {other}")))),
        None => None,
    };

    let mut table = kind.default_params().to_table()?;
    merge(&mut table, doc);
    // Deserializing the rendered document gives error spans, which name the
    // offending key even for type errors.
    let merged = toml::to_string(&table).map_err(|e| Error::Config(format!("cannot render config: {e}")))?;
    let params = Params::from_text(kind, &merged).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span().and_then(|s| key_at(&merged, s.start)).or_else(|| offending_key(&msg)) {
            Some(key) => locate(req, &key, Error::Config(format!("{key}: {msg}"))),
            None => Error::Config(msg),
        }
    })?;
    Ok(Loaded {
        config: ExperimentConfig {
            seed: req.seed.or(file_seed).unwrap_or(0),
            params,
        },
        out: req.out.clone().or(file_out),
    })
}

/// Deep merge: tables merge key by key, anything else replaces.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `a.b.c=value`, where `value` is a TOML literal or else a bare string.
fn apply_set(doc: &mut Table, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got \"{set}\"")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("--set has an empty key segment in \"{set}\"")));
    }
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or(key);
    let mut cur = doc;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("--set {key}: \"{p}\" is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn syntax_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.message().trim().to_string(),
    }
}

fn line_of_offset(text: &str, offset: usize) -> u64 {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count() as u64 + 1
}

/// Dotted key of the `key = value` line containing `offset`, qualified by
/// the enclosing `[table]` header.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let line_no = line_of_offset(text, offset) as usize;
    let mut table = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            table = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if i + 1 == line_no {
            let key = l.split('=').next()?.trim().trim_matches('"');
            if key.is_empty() || l.starts_with('[') {
                return None;
            }
            return Some(if table.is_empty() { key.to_string() } else { format!("{table}.{key}") });
        }
    }
    None
}

/// The field named in a serde message such as "unknown field `foo`, ...".
fn offending_key(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Attaches the line of `key = ...` in the config file, if the key is
/// written there; overrides from `--set` are reported without a line.
fn locate(req: &ConfigRequest, key: &str, err: Error) -> Error {
    let message = match &err {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    };
    if let Some((path, text)) = &req.text {
        let last = key.rsplit('.').next().unwrap_or(key);
        for (i, line) in text.lines().enumerate() {
            let l = line.trim_start();
            let head = l.split('=').next().unwrap_or("").trim().trim_matches('"');
            let head_last = head.rsplit('.').next().unwrap_or(head).trim();
            if l.contains('=') && !l.starts_with('#') && (head == key || head_last == last) {
                return Error::Parse {
                    path: path.clone(),
                    line: i as u64 + 1,
                    message,
                };
            }
        }
    }
    if req.sets.iter().any(|s| s.split('=').next().map(str::trim).is_some_and(|k| k.ends_with(key))) {
        return Error::Config(format!("--set: {message}"));
    }
    Error::Config(message)
}

/// Deserializes any parameter block from a TOML string over its defaults.
pub fn params_from_toml<T: DeserializeOwned + Serialize + Default>(text: &str) -> Result<T> {
    let mut table = match Value::try_from(T::default()) {
        Ok(Value::Table(t)) => t,
        _ => return Err(Error::Config("parameters did not serialize to a table".into())),
    };
    let over = text.parse::<Table>().map_err(|e| syntax_error(Path::new("<string>"), text, &e))?;
    merge(&mut table, over);
    Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))
}
