//! Multi-model systems: models, the dependencies between their
//! parameters, and external parameters estimated from data.
//!
//! A dependency `(m_i, d, m_j, phi)` sets parameter `d` of model `m_i` to
//! the value of property `phi` on model `m_j`. The dependency graph has an
//! edge `m_j -> m_i` for each, from the model supplying a value to the
//! model consuming it. Strongly connected components of that graph are
//! verified in dependency order; components with internal cycles are
//! solved as systems of equations ([`verify_scc`]).

mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_rational::BigRational;
use thiserror::Error;

pub use verify::{
    verify, verify_scc, verify_with, Method, PolicyRecord, ResolvedParam, SccDiagnostic, SccSolution, ValueSource,
    VerifyOptions, WorldResult,
};

use crate::engines::EngineError;
use crate::expr::Binding;
use crate::graph;
use crate::infer::{InferError, InferenceSpec};
use crate::parametric::ParametricError;
use crate::prism::{ModelError, ModelKind, SourceModel};
use crate::props::{parse_property, Operator, Property};
use crate::solve::{Domain, SolveError};

/// Default domain of reward- and rate-valued dependency parameters.
pub const DEFAULT_REWARD_DOMAIN: Domain = Domain { lo: 0.0, hi: 1e6 };

#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub id: String,
    pub source: SourceModel,
    pub path: Option<PathBuf>,
}

impl ModelEntry {
    pub fn new(id: impl Into<String>, source: SourceModel) -> Self {
        Self { id: id.into(), source, path: None }
    }

    pub fn kind(&self) -> ModelKind {
        self.source.kind
    }
}

/// `param` of `model` takes the value of `property` checked on `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependency {
    pub model: String,
    pub param: String,
    pub source: String,
    pub property: String,
    pub domain: Option<Domain>,
}

impl Dependency {
    pub fn new(model: &str, param: &str, source: &str, property: &str) -> Self {
        Self {
            model: model.to_string(),
            param: param.to_string(),
            source: source.to_string(),
            property: property.to_string(),
            domain: None,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct External {
    pub model: String,
    pub param: String,
    pub spec: InferenceSpec,
}

impl External {
    pub fn new(model: &str, param: &str, spec: InferenceSpec) -> Self {
        Self { model: model.to_string(), param: param.to_string(), spec }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("invalid world model:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("property `{property}` on model `{model}`: {detail}")]
    Property { model: String, property: String, detail: String },
    #[error("model `{model}`: {source}")]
    Model { model: String, source: ModelError },
    #[error("model `{model}`{}: {source}", chain_text(.chain))]
    Engine { model: String, chain: Vec<String>, source: EngineError },
    #[error("parametric check of `{model}`: {source}")]
    Parametric { model: String, source: ParametricError },
    #[error("external parameter `{model}.{param}`: {source}")]
    Infer { model: String, param: String, source: InferError },
    #[error("model `{model}` still has unresolved parameters: {}", .params.join(", "))]
    Unresolved { model: String, params: Vec<String> },
    #[error("dependency `{model}.{param}` got {value}, which cannot be a parameter value")]
    BadValue { model: String, param: String, value: String },
    #[error("solving the cycle {{{}}}: {source}", .models.join(", "))]
    Solve { models: Vec<String>, source: SolveError },
    #[error("solution for `{param}` is {value}, outside its domain [{lo}, {hi}]")]
    OutOfDomain { param: String, value: f64, lo: f64, hi: f64 },
}

fn chain_text(chain: &[String]) -> String {
    if chain.is_empty() {
        String::new()
    } else {
        format!(" (while resolving {})", chain.join(" <- "))
    }
}

/// A validated multi-model system.
#[derive(Debug, Clone)]
pub struct WorldModel {
    models: Vec<ModelEntry>,
    dependencies: Vec<Dependency>,
    properties: Vec<Property>,
    externals: Vec<External>,
    overrides: BTreeMap<String, Binding>,
}

impl WorldModel {
    /// Validates and assembles a world model; every problem found is
    /// reported in one [`WorldError::Invalid`].
    pub fn new(models: Vec<ModelEntry>, dependencies: Vec<Dependency>, externals: Vec<External>) -> Result<Self, WorldError> {
        Self::assemble(models, dependencies, externals, BTreeMap::new())
    }

    fn assemble(
        models: Vec<ModelEntry>,
        dependencies: Vec<Dependency>,
        externals: Vec<External>,
        overrides: BTreeMap<String, Binding>,
    ) -> Result<Self, WorldError> {
        let mut errors = Vec::new();
        let mut ids = BTreeSet::new();
        for m in &models {
            if !ids.insert(m.id.as_str()) {
                errors.push(format!("duplicate model id `{}`", m.id));
            }
        }
        let find = |id: &str| models.iter().find(|m| m.id == id);
        let overridden = |model: &str, param: &str| overrides.get(model).is_some_and(|b| b.contains(param));

        // Overridden parameters are fixed; their dependencies and
        // estimators no longer apply.
        let dependencies: Vec<Dependency> =
            dependencies.into_iter().filter(|d| !overridden(&d.model, &d.param)).collect();
        let externals: Vec<External> = externals.into_iter().filter(|e| !overridden(&e.model, &e.param)).collect();

        let mut assigned: BTreeMap<(String, String), &'static str> = BTreeMap::new();
        let mut properties = Vec::new();
        for d in &dependencies {
            let target = find(&d.model);
            let source = find(&d.source);
            if target.is_none() {
                errors.push(format!("dependency `{}.{}` names unknown model `{}`", d.model, d.param, d.model));
            }
            if source.is_none() {
                errors.push(format!("dependency `{}.{}` names unknown source model `{}`", d.model, d.param, d.source));
            }
            if let Some(t) = target {
                check_parameter(t, &d.param, "dependency", true, &mut errors);
            }
            if let Some(dom) = d.domain {
                if !(dom.lo <= dom.hi) {
                    errors.push(format!("dependency `{}.{}` has an empty domain", d.model, d.param));
                }
            }
            if let Some(s) = source {
                match parse_property(&d.property, s.kind()) {
                    Ok(p) => {
                        match p.as_query() {
                            Some(q) if q.bound.is_some() => errors.push(format!(
                                "dependency `{}.{}`: `{}` must be a numeric query (=?), not a bounded one",
                                d.model, d.param, d.property
                            )),
                            _ => {}
                        }
                        properties.push(p);
                    }
                    Err(e) => {
                        errors.push(format!("dependency `{}.{}`: property `{}`: {e}", d.model, d.param, d.property));
                        properties.push(Property::Num(f64::NAN));
                    }
                }
            } else {
                properties.push(Property::Num(f64::NAN));
            }
            if assigned.insert((d.model.clone(), d.param.clone()), "dependency").is_some() {
                errors.push(format!("parameter `{}.{}` has more than one dependency", d.model, d.param));
            }
        }
        for e in &externals {
            match find(&e.model) {
                None => errors.push(format!("external parameter `{}.{}` names unknown model `{}`", e.model, e.param, e.model)),
                Some(m) => check_parameter(m, &e.param, "external parameter", false, &mut errors),
            }
            match assigned.insert((e.model.clone(), e.param.clone()), "external") {
                Some("dependency") => errors.push(format!(
                    "parameter `{}.{}` is both a dependency and an external parameter",
                    e.model, e.param
                )),
                Some(_) => errors.push(format!("parameter `{}.{}` has more than one estimator", e.model, e.param)),
                None => {}
            }
        }
        for m in &models {
            for p in m.source.list_parameters() {
                if !assigned.contains_key(&(m.id.clone(), p.clone())) && !overridden(&m.id, &p) {
                    errors.push(format!(
                        "parameter `{}.{p}` is neither a dependency nor an external parameter",
                        m.id
                    ));
                }
            }
        }
        let world = Self { models, dependencies, properties, externals, overrides };
        if errors.is_empty() {
            world.check_cycles(&mut errors);
        }
        if errors.is_empty() {
            Ok(world)
        } else {
            Err(WorldError::Invalid(errors))
        }
    }

    /// Dependencies inside a cycle must come from dtmcs or ctmcs: optimal
    /// policies make mdp values jump as parameters move.
    fn check_cycles(&self, errors: &mut Vec<String>) {
        let partition = compute_sccs(&build_dependency_graph(self));
        for d in &self.dependencies {
            let (Some(i), Some(j)) = (self.index(&d.model), self.index(&d.source)) else { continue };
            if partition.component[i] == partition.component[j] && self.models[j].kind().is_nondeterministic() {
                errors.push(format!(
                    "dependency `{}.{}` lies on a cycle but its source `{}` is a {}; cyclic dependencies need a dtmc or ctmc source",
                    d.model,
                    d.param,
                    d.source,
                    self.models[j].kind()
                ));
            }
        }
    }

    /// Returns a copy with the given values fixed. A name `model.param`
    /// targets one model; a bare name applies to every model declaring a
    /// constant of that name.
    pub fn with_overrides(&self, overrides: &[(String, BigRational)]) -> Result<Self, WorldError> {
        let mut table = self.overrides.clone();
        let mut errors = Vec::new();
        for (name, value) in overrides {
            let targets: Vec<(&str, &str)> = match name.split_once('.') {
                Some((model, param)) if self.index(model).is_some() => vec![(model, param)],
                _ => self
                    .models
                    .iter()
                    .filter(|m| m.source.constant(name).is_some())
                    .map(|m| (m.id.as_str(), name.as_str()))
                    .collect(),
            };
            if targets.is_empty() {
                errors.push(format!("override `{name}` matches no model constant"));
            }
            for (model, param) in targets {
                let m = &self.models[self.index(model).expect("known model")];
                if m.source.constant(param).is_none() {
                    errors.push(format!("model `{model}` has no constant `{param}`"));
                    continue;
                }
                table.entry(model.to_string()).or_default().set(param, value.clone());
            }
        }
        if !errors.is_empty() {
            return Err(WorldError::Invalid(errors));
        }
        Self::assemble(self.models.clone(), self.dependencies.clone(), self.externals.clone(), table)
    }

    pub fn models(&self) -> &[ModelEntry] {
        &self.models
    }

    pub fn dependencies(&self) -> &[Dependency] {
        &self.dependencies
    }

    /// Parsed property of each dependency, in [`WorldModel::dependencies`]
    /// order.
    pub fn dependency_properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn externals(&self) -> &[External] {
        &self.externals
    }

    pub fn overrides(&self, model: &str) -> Binding {
        self.overrides.get(model).cloned().unwrap_or_default()
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.id == id)
    }

    pub fn model(&self, id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.id == id)
    }

    /// Domain of a dependency parameter: declared, else `[0,1]` for
    /// probabilities and `[0, 1e6]` for rewards.
    pub fn domain(&self, dependency: usize) -> Domain {
        if let Some(d) = self.dependencies[dependency].domain {
            return d;
        }
        let probability = self.properties[dependency].leaves().iter().all(|q| !matches!(q.operator, Operator::R { .. }));
        if probability {
            Domain::UNIT
        } else {
            DEFAULT_REWARD_DOMAIN
        }
    }
}

/// External parameters are bound before the state space is built, so only
/// dependency parameters are kept out of the model structure.
fn check_parameter(m: &ModelEntry, param: &str, what: &str, weights_only: bool, errors: &mut Vec<String>) {
    if !m.source.list_parameters().contains(param) {
        errors.push(format!("{what} `{}.{param}`: model `{}` has no unbound constant `{param}`", m.id, m.id));
    } else if weights_only && m.source.structural_identifiers().contains(param) {
        errors.push(format!(
            "{what} `{}.{param}` appears in a guard, update, range or label; parameters may only set weights and rewards",
            m.id
        ));
    }
}

/// Vertices are model indices; edge `(j, i)` when model `i` depends on `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub vertices: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    /// Parameter names carried by each edge.
    pub labels: BTreeMap<(usize, usize), Vec<String>>,
}

impl DependencyGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }
}

pub fn build_dependency_graph(u: &WorldModel) -> DependencyGraph {
    let mut edges = BTreeSet::new();
    let mut labels: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for d in &u.dependencies {
        let (Some(i), Some(j)) = (u.index(&d.model), u.index(&d.source)) else { continue };
        edges.insert((j, i));
        labels.entry((j, i)).or_default().push(d.param.clone());
    }
    DependencyGraph { vertices: u.models.iter().map(|m| m.id.clone()).collect(), edges, labels }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccPartition {
    /// Components in reverse topological order of the condensation; each
    /// lists model indices in ascending order.
    pub sccs: Vec<Vec<usize>>,
    /// Component index of each model.
    pub component: Vec<usize>,
    /// Dependency level of each model: the longest path into its component.
    pub level: Vec<usize>,
}

pub fn compute_sccs(g: &DependencyGraph) -> SccPartition {
    let adj = g.adjacency();
    let sccs = graph::tarjan_scc(&adj);
    let component = graph::component_map(adj.len(), &sccs);
    let levels = graph::condensation_levels(&adj, &sccs);
    let level = component.iter().map(|&c| levels[c]).collect();
    SccPartition { sccs, component, level }
}
