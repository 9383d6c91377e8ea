use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_rational::BigRational;
use serde::Serialize;

use super::{compute_sccs, build_dependency_graph, SccPartition, WorldError, WorldModel};
use crate::engines::{self, EngineOptions, Policy, ResultValue, VerificationResult};
use crate::expr::Binding;
use crate::infer::infer;
use crate::num;
use crate::parametric::{eliminate_states, ParametricError, RationalFunction};
use crate::prism::{build_state_space_with, BuildOptions, ExplicitModel, ModelError};
use crate::props::{parametric_feasible, parse_property, Property};
use crate::solve::{
    newton_with_restarts, powell_minimize, Domain, EquationSystem, NewtonOptions, PowellOptions, SolveError,
};

/// Back-end for cyclic components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Newton when every property is parametric-feasible, else Powell.
    #[default]
    Auto,
    Newton,
    Powell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub method: Method,
    pub newton: NewtonOptions,
    pub powell: PowellOptions,
    /// Largest sum of squared residuals accepted from Powell.
    pub powell_accept: f64,
    pub engine: EngineOptions,
    pub build: BuildOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            newton: NewtonOptions::default(),
            powell: PowellOptions::default(),
            powell_accept: 1e-8,
            engine: EngineOptions::default(),
            build: BuildOptions::default(),
        }
    }
}

impl VerifyOptions {
    /// Sets the Newton residual tolerance and the Powell objective tolerance.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.newton.tolerance = tol;
        self.powell.f_tolerance = tol * tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSource {
    Dependency,
    External,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedParam {
    pub model: String,
    pub param: String,
    pub value: f64,
    pub source: ValueSource,
}

/// How one cyclic component was solved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SccDiagnostic {
    pub models: Vec<String>,
    pub method: Method,
    pub iterations: usize,
    /// Max-norm residual (Newton) or sum of squared residuals (Powell).
    pub residual: f64,
    /// Objective evaluations (Powell) or starts (Newton).
    pub evaluations: usize,
    /// Closed forms used by Newton, as `model.param = f`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub equations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRecord {
    pub model: String,
    pub property: String,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldResult {
    pub result: VerificationResult,
    pub resolved: Vec<ResolvedParam>,
    pub sccs: Vec<SccDiagnostic>,
    pub policies: Vec<PolicyRecord>,
    /// Engine runs performed (memoized repeats excluded).
    pub checks: usize,
}

/// Solution of one cyclic component.
#[derive(Debug, Clone, PartialEq)]
pub struct SccSolution {
    /// `(model, param, value)` per intra-component dependency.
    pub values: Vec<(String, String, f64)>,
    pub diagnostic: SccDiagnostic,
}

pub fn verify(u: &WorldModel, model: &str, property: &str) -> Result<WorldResult, WorldError> {
    verify_with(u, model, property, &VerifyOptions::default())
}

/// Checks `property` on `model` after resolving, in dependency order, every
/// parameter it transitively needs.
pub fn verify_with(u: &WorldModel, model: &str, property: &str, options: &VerifyOptions) -> Result<WorldResult, WorldError> {
    let entry = u.model(model).ok_or_else(|| WorldError::UnknownModel(model.to_string()))?;
    let prop = parse_property(property, entry.kind()).map_err(|e| WorldError::Property {
        model: model.to_string(),
        property: property.to_string(),
        detail: e.to_string(),
    })?;
    let mut session = Session::new(u, options);
    let result = session.check(model, &prop)?;
    let mut resolved: Vec<ResolvedParam> = session.resolved.into_values().collect();
    resolved.sort_by(|a, b| (&a.model, &a.param).cmp(&(&b.model, &b.param)));
    Ok(WorldResult { result, resolved, sccs: session.diagnostics, policies: session.policies, checks: session.checks })
}

/// Solves the intra-component dependencies of component `scc` given the
/// bindings of every other parameter of its models.
pub fn verify_scc(
    u: &WorldModel,
    scc: &[usize],
    bindings: &BTreeMap<String, Binding>,
    options: &VerifyOptions,
) -> Result<SccSolution, WorldError> {
    let members: Vec<String> = scc.iter().map(|&i| u.models()[i].id.clone()).collect();
    let intra: Vec<usize> = (0..u.dependencies().len())
        .filter(|&k| {
            let d = &u.dependencies()[k];
            members.contains(&d.model) && members.contains(&d.source)
        })
        .collect();
    let unknowns: Vec<String> = intra.iter().map(|&k| qualified(&u.dependencies()[k].model, &u.dependencies()[k].param)).collect();
    let domains: Vec<Domain> = intra.iter().map(|&k| u.domain(k)).collect();
    let solve_error = |source: SolveError| WorldError::Solve { models: members.clone(), source };

    // Each source model built once with its intra-component parameters free.
    let mut parametric: BTreeMap<String, ExplicitModel> = BTreeMap::new();
    for &k in &intra {
        let src = &u.dependencies()[k].source;
        if !parametric.contains_key(src) {
            let entry = u.model(src).expect("validated");
            let binding = bindings.get(src).cloned().unwrap_or_default();
            let m = build_state_space_with(&entry.source, &binding, &options.build)
                .map_err(|source| WorldError::Model { model: src.clone(), source })?;
            parametric.insert(src.clone(), m);
        }
    }

    let feasible = {
        let pairs: Vec<(&Property, crate::prism::ModelKind)> = intra
            .iter()
            .map(|&k| (&u.dependency_properties()[k], u.model(&u.dependencies()[k].source).expect("validated").kind()))
            .collect();
        parametric_feasible(&pairs)
    };
    let want_newton = match options.method {
        Method::Newton => true,
        Method::Powell => false,
        Method::Auto => feasible,
    };

    if want_newton {
        match closed_forms(u, &intra, &parametric) {
            Ok(functions) => {
                let equations: Vec<String> =
                    unknowns.iter().zip(&functions).map(|(x, f)| format!("{x} = {f}")).collect();
                let sys = EquationSystem::new(unknowns.clone(), functions, domains.clone()).map_err(solve_error)?;
                let x0: Vec<f64> = domains.iter().map(Domain::midpoint).collect();
                let report = newton_with_restarts(&sys, &x0, &options.newton).map_err(solve_error)?;
                let values = intra
                    .iter()
                    .zip(&report.x)
                    .map(|(&k, &v)| (u.dependencies()[k].model.clone(), u.dependencies()[k].param.clone(), v))
                    .collect();
                return Ok(SccSolution {
                    values,
                    diagnostic: SccDiagnostic {
                        models: members,
                        method: Method::Newton,
                        iterations: report.iterations,
                        residual: report.residual,
                        evaluations: report.attempts,
                        equations,
                    },
                });
            }
            Err(WorldError::Parametric { source: ParametricError::NotFeasible(_), .. })
                if options.method == Method::Auto => {}
            Err(e) => return Err(e),
        }
    }

    // Black-box residuals: sum over dependencies of (x_d - pmc_d(x))^2.
    let objective = |x: &[f64]| -> Result<f64, SolveError> {
        let mut total = 0.0;
        for (&k, xk) in intra.iter().zip(x) {
            let d = &u.dependencies()[k];
            let src = &parametric[&d.source];
            let mut b = Binding::new();
            for (&j, xj) in intra.iter().zip(x) {
                let dj = &u.dependencies()[j];
                if dj.model == d.source {
                    b.set(dj.param.clone(), num::from_f64(*xj).ok_or_else(|| SolveError::Evaluation("non-finite point".into()))?);
                }
            }
            // Box domains cannot express constraints such as a + b <= 1;
            // points where some distribution breaks are simply infeasible.
            let m = match src.instantiate(&b) {
                Ok(m) => m,
                Err(ModelError::ProbabilitySum { .. } | ModelError::NegativeRate { .. }) => return Ok(f64::INFINITY),
                Err(e) => return Err(SolveError::Evaluation(e.to_string())),
            };
            let r = engines::check_with(&m, &u.dependency_properties()[k], &options.engine)
                .map_err(|e| SolveError::Evaluation(format!("{}: {e}", d.source)))?;
            let v = r.value.as_f64().ok_or_else(|| SolveError::Evaluation("non-numeric dependency".into()))?;
            total += (xk - v).powi(2);
        }
        Ok(total)
    };
    let x0: Vec<f64> = domains.iter().map(Domain::midpoint).collect();
    let report = powell_minimize(objective, &x0, &domains, &options.powell).map_err(solve_error)?;
    if report.value > options.powell_accept {
        return Err(solve_error(SolveError::NoConvergence { iterations: report.iterations, residual: report.value }));
    }
    let values = intra
        .iter()
        .zip(&report.x)
        .map(|(&k, &v)| (u.dependencies()[k].model.clone(), u.dependencies()[k].param.clone(), v))
        .collect();
    Ok(SccSolution {
        values,
        diagnostic: SccDiagnostic {
            models: members,
            method: Method::Powell,
            iterations: report.iterations,
            residual: report.value,
            evaluations: report.evaluations,
            equations: Vec::new(),
        },
    })
}

fn qualified(model: &str, param: &str) -> String {
    format!("{model}.{param}")
}

/// `d = f(params)` per intra-component dependency, with the source model's
/// parameters renamed to qualified unknowns.
fn closed_forms(
    u: &WorldModel,
    intra: &[usize],
    parametric: &BTreeMap<String, ExplicitModel>,
) -> Result<Vec<RationalFunction>, WorldError> {
    intra
        .iter()
        .map(|&k| {
            let d = &u.dependencies()[k];
            let f = eliminate_states(&parametric[&d.source], &u.dependency_properties()[k])
                .map_err(|source| WorldError::Parametric { model: d.source.clone(), source })?;
            Ok(f.rename(&|p: &str| qualified(&d.source, p)))
        })
        .collect()
}

struct Session<'a> {
    u: &'a WorldModel,
    options: &'a VerifyOptions,
    partition: SccPartition,
    /// Complete bindings per model, filled component by component.
    bindings: HashMap<String, Binding>,
    built: HashMap<(String, String), Arc<ExplicitModel>>,
    memo: HashMap<(String, String, String), VerificationResult>,
    resolved: BTreeMap<(String, String), ResolvedParam>,
    diagnostics: Vec<SccDiagnostic>,
    policies: Vec<PolicyRecord>,
    chain: Vec<String>,
    checks: usize,
}

impl<'a> Session<'a> {
    fn new(u: &'a WorldModel, options: &'a VerifyOptions) -> Self {
        Self {
            u,
            options,
            partition: compute_sccs(&build_dependency_graph(u)),
            bindings: HashMap::new(),
            built: HashMap::new(),
            memo: HashMap::new(),
            resolved: BTreeMap::new(),
            diagnostics: Vec::new(),
            policies: Vec::new(),
            chain: Vec::new(),
            checks: 0,
        }
    }

    fn check(&mut self, model: &str, prop: &Property) -> Result<VerificationResult, WorldError> {
        let index = self.u.index(model).ok_or_else(|| WorldError::UnknownModel(model.to_string()))?;
        self.resolve_component(self.partition.component[index])?;
        let binding = self.bindings[model].clone();
        let key = (model.to_string(), prop.to_string(), binding.fingerprint());
        if let Some(r) = self.memo.get(&key) {
            return Ok(r.clone());
        }
        let m = self.build(model, &binding)?;
        if m.is_parametric() {
            return Err(WorldError::Unresolved { model: model.to_string(), params: m.parameters.iter().cloned().collect() });
        }
        let result = engines::check_with(&m, prop, &self.options.engine).map_err(|source| WorldError::Engine {
            model: model.to_string(),
            chain: self.chain.clone(),
            source,
        })?;
        self.checks += 1;
        if let Some(policy) = &result.policy {
            self.policies.push(PolicyRecord { model: model.to_string(), property: prop.to_string(), policy: policy.clone() });
        }
        self.memo.insert(key, result.clone());
        Ok(result)
    }

    fn build(&mut self, model: &str, binding: &Binding) -> Result<Arc<ExplicitModel>, WorldError> {
        let key = (model.to_string(), binding.fingerprint());
        if let Some(m) = self.built.get(&key) {
            return Ok(m.clone());
        }
        let entry = self.u.model(model).expect("known model");
        let m = build_state_space_with(&entry.source, binding, &self.options.build)
            .map_err(|source| WorldError::Model { model: model.to_string(), source })?;
        let m = Arc::new(m);
        self.built.insert(key, m.clone());
        Ok(m)
    }

    fn record(&mut self, model: &str, param: &str, value: f64, source: ValueSource) {
        self.resolved.insert(
            (model.to_string(), param.to_string()),
            ResolvedParam { model: model.to_string(), param: param.to_string(), value, source },
        );
    }

    /// Binds every parameter of the component's models: overrides,
    /// estimators, values from other components, then the component's own
    /// cycle.
    fn resolve_component(&mut self, c: usize) -> Result<(), WorldError> {
        let members: Vec<usize> = self.partition.sccs[c].clone();
        let first = &self.u.models()[members[0]].id;
        if self.bindings.contains_key(first) {
            return Ok(());
        }
        let ids: Vec<String> = members.iter().map(|&i| self.u.models()[i].id.clone()).collect();
        let mut partial: BTreeMap<String, Binding> = BTreeMap::new();
        for id in &ids {
            let mut b = self.u.overrides(id);
            let entry = self.u.model(id).expect("member");
            for (name, v) in b.iter() {
                if entry.source.list_parameters().contains(name) {
                    self.record(id, name, num::to_f64(v), ValueSource::Override);
                }
            }
            for e in self.u.externals().iter().filter(|e| &e.model == id) {
                let v = infer(&e.spec).map_err(|source| WorldError::Infer {
                    model: e.model.clone(),
                    param: e.param.clone(),
                    source,
                })?;
                self.record(id, &e.param, num::to_f64(&v), ValueSource::External);
                b.set(e.param.clone(), v);
            }
            for k in 0..self.u.dependencies().len() {
                let d = &self.u.dependencies()[k];
                if &d.model != id || ids.contains(&d.source) {
                    continue;
                }
                let (param, source) = (d.param.clone(), d.source.clone());
                self.chain.push(format!("{id}.{param}"));
                let prop = self.u.dependency_properties()[k].clone();
                let r = self.check(&source, &prop);
                self.chain.pop();
                let v = numeric(id, &param, r?.value)?;
                self.record(id, &param, v, ValueSource::Dependency);
                b.set(param, to_rational(id, &d.param, v)?);
            }
            partial.insert(id.clone(), b);
        }
        let cyclic = self
            .u
            .dependencies()
            .iter()
            .any(|d| ids.contains(&d.model) && ids.contains(&d.source));
        if cyclic {
            let solution = verify_scc(self.u, &members, &partial, self.options)?;
            for (model, param, v) in &solution.values {
                let k = self
                    .u
                    .dependencies()
                    .iter()
                    .position(|d| &d.model == model && &d.param == param)
                    .expect("intra dependency");
                let dom = self.u.domain(k);
                if !dom.contains(*v) {
                    return Err(WorldError::OutOfDomain { param: format!("{model}.{param}"), value: *v, lo: dom.lo, hi: dom.hi });
                }
                self.record(model, param, *v, ValueSource::Dependency);
                partial.get_mut(model).expect("member").set(param.clone(), to_rational(model, param, *v)?);
            }
            self.diagnostics.push(solution.diagnostic);
        }
        for (id, b) in partial {
            self.bindings.insert(id, b);
        }
        Ok(())
    }
}

fn numeric(model: &str, param: &str, value: ResultValue) -> Result<f64, WorldError> {
    match value {
        ResultValue::Number(v) if v.is_finite() => Ok(v),
        other => Err(WorldError::BadValue { model: model.to_string(), param: param.to_string(), value: other.to_string() }),
    }
}

fn to_rational(model: &str, param: &str, v: f64) -> Result<BigRational, WorldError> {
    num::from_f64(v).ok_or_else(|| WorldError::BadValue { model: model.to_string(), param: param.to_string(), value: v.to_string() })
}
