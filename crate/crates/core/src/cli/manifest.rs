//! JSON world-model manifests.

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Deserializer};

use super::CliError;
use crate::infer::{load_observations, InferenceSpec};
use crate::num;
use crate::prism::{parse_model, ModelKind};
use crate::solve::Domain;
use crate::worldmodel::{Dependency, External, ModelEntry, WorldError, WorldModel};

/// A rational read from a JSON number or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq)]
pub struct Number(pub BigRational);

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::infer::rational_text::deserialize(d).map(Number)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub dependencies: Vec<DependencySpec>,
    #[serde(default)]
    pub external: Vec<ExternalSpec>,
    pub verify: Option<QuerySpec>,
    #[serde(default)]
    pub sweeps: Vec<SweepAxis>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub path: PathBuf,
    pub kind: Option<ModelKind>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencySpec {
    pub model: String,
    pub param: String,
    pub source: String,
    pub property: String,
    pub domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub model: String,
    pub param: String,
    pub method: String,
    pub value: Option<Number>,
    pub observations: Option<Vec<Number>>,
    /// CSV file of observations, one per line.
    pub data: Option<PathBuf>,
    pub prior: Option<Vec<Number>>,
    pub counts: Option<Vec<u64>>,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub model: String,
    pub property: String,
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Model owning the constant; omitted to set it in every model.
    pub model: Option<String>,
    pub param: String,
    pub values: Option<Vec<Number>>,
    /// `[lo, hi]`, walked with `step`.
    pub range: Option<[Number; 2]>,
    pub step: Option<Number>,
}

impl SweepAxis {
    /// `model.param`, or the bare name.
    pub fn target(&self) -> String {
        match &self.model {
            Some(m) => format!("{m}.{}", self.param),
            None => self.param.clone(),
        }
    }

    pub fn points(&self) -> Result<Vec<BigRational>, String> {
        match (&self.values, &self.range, &self.step) {
            (Some(v), None, None) if !v.is_empty() => Ok(v.iter().map(|n| n.0.clone()).collect()),
            (None, Some([lo, hi]), Some(step)) => range_points(&lo.0, &hi.0, &step.0),
            _ => Err(format!("sweep axis `{}` needs a non-empty `values` list or `range` with `step`", self.target())),
        }
    }
}

/// `lo, lo + step, ...` up to and including `hi`, in exact arithmetic.
pub fn range_points(lo: &BigRational, hi: &BigRational, step: &BigRational) -> Result<Vec<BigRational>, String> {
    if *step <= BigRational::zero() {
        return Err("sweep step must be positive".into());
    }
    if hi < lo {
        return Err("sweep range is empty".into());
    }
    let mut out = Vec::new();
    let mut x = lo.clone();
    while x <= *hi {
        out.push(x.clone());
        x += step;
    }
    Ok(out)
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), detail: e.to_string() })?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Manifest { path: path.display().to_string(), errors: vec![e.to_string()] })?;
        m.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Reads the model files and observation data and validates the world
    /// model, reporting every problem found.
    pub fn world_model(&self) -> Result<WorldModel, CliError> {
        let mut errors = Vec::new();
        let mut models = Vec::new();
        let mut unreadable = Vec::new();
        for spec in &self.models {
            let path = self.resolve(&spec.path);
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    errors.push(format!("model `{}`: cannot read {}: {e}", spec.id, path.display()));
                    unreadable.push(format!("`{}`", spec.id));
                    continue;
                }
            };
            match parse_model(&text) {
                Ok(source) => {
                    if let Some(kind) = spec.kind {
                        if kind != source.kind {
                            errors.push(format!("model `{}`: declared {kind} but the file is a {}", spec.id, source.kind));
                        }
                    }
                    let mut entry = ModelEntry::new(spec.id.clone(), source);
                    entry.path = Some(path);
                    models.push(entry);
                }
                Err(e) => {
                    errors.push(format!("model `{}` ({}): {e}", spec.id, path.display()));
                    unreadable.push(format!("`{}`", spec.id));
                }
            }
        }
        let mut dependencies = Vec::new();
        for d in &self.dependencies {
            let mut dep = Dependency::new(&d.model, &d.param, &d.source, &d.property);
            if let Some([lo, hi]) = d.domain {
                match Domain::new(lo, hi) {
                    Ok(dom) => dep = dep.with_domain(dom),
                    Err(e) => errors.push(format!("dependency `{}.{}`: {e}", d.model, d.param)),
                }
            }
            dependencies.push(dep);
        }
        let mut externals = Vec::new();
        for e in &self.external {
            match self.inference_spec(e) {
                Ok(spec) => externals.push(External::new(&e.model, &e.param, spec)),
                Err(msg) => errors.push(format!("external `{}.{}`: {msg}", e.model, e.param)),
            }
        }
        if let Some(q) = &self.verify {
            if !self.models.iter().any(|m| m.id == q.model) {
                errors.push(format!("verify: unknown model `{}`", q.model));
            }
        }
        for axis in &self.sweeps {
            if let Err(msg) = axis.points() {
                errors.push(msg);
            }
        }
        if errors.is_empty() {
            return WorldModel::new(models, dependencies, externals).map_err(|e| self.invalid(e));
        }
        // Still validate what could be read, so that every problem is listed.
        if let Err(WorldError::Invalid(more)) = WorldModel::new(models, dependencies, externals) {
            errors.extend(more.into_iter().filter(|m| !unreadable.iter().any(|id| m.contains(id.as_str()))));
        }
        Err(CliError::Manifest { path: self.base.display().to_string(), errors })
    }

    fn invalid(&self, e: WorldError) -> CliError {
        match e {
            WorldError::Invalid(errors) => CliError::Manifest { path: self.base.display().to_string(), errors },
            other => CliError::Manifest { path: self.base.display().to_string(), errors: vec![other.to_string()] },
        }
    }

    fn inference_spec(&self, e: &ExternalSpec) -> Result<InferenceSpec, String> {
        let observations = || -> Result<Vec<BigRational>, String> {
            match (&e.observations, &e.data) {
                (Some(o), None) => Ok(o.iter().map(|n| n.0.clone()).collect()),
                (None, Some(p)) => load_observations(&self.resolve(p)).map_err(|err| err.to_string()),
                _ => Err(format!("{} needs exactly one of `observations` or `data`", e.method)),
            }
        };
        match e.method.as_str() {
            "fixed" | "predefined" => {
                let v = e.value.as_ref().ok_or("fixed needs `value`")?;
                Ok(InferenceSpec::Fixed { value: v.0.clone() })
            }
            "mean" => Ok(InferenceSpec::Mean { observations: observations()? }),
            "mean_rate" => Ok(InferenceSpec::MeanRate { observations: observations()? }),
            "bayes" => {
                let prior = e.prior.as_ref().ok_or("bayes needs `prior`")?.iter().map(|n| n.0.clone()).collect();
                let counts = e.counts.clone().ok_or("bayes needs `counts`")?;
                let target = e.target.ok_or("bayes needs `target`")?;
                Ok(InferenceSpec::Bayes { prior, counts, target })
            }
            other => Err(format!("unknown method `{other}` (expected fixed, mean, mean_rate or bayes)")),
        }
    }
}

/// Parses `name=value` with an exact decimal or `p/q` value.
pub fn parse_assignment(text: &str) -> Result<(String, BigRational), String> {
    let (name, value) = text.split_once('=').ok_or_else(|| format!("`{text}` is not name=value"))?;
    let value = num::parse_rational(value.trim()).ok_or_else(|| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), value))
}
