use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EnsembleSpec, InstanceSpec, NoiseKind, NoiseSpec, ProblemInstance, StructureKind, StructureSpec,
};
use crate::regularizer::Regularizer;
use crate::solver::{Procedure, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Sweep,
    Geometry,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<usize>>,
    /// `(s, k)` pairs overriding the sparsity of `signal` and `corruption`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity_grid: Option<Vec<[usize; 2]>>,
    pub signal: StructureSpec,
    pub corruption: StructureSpec,
    pub ensemble: EnsembleSpec,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    Bounded,
    Subgaussian,
}

/// The program to run. Omitted budgets default to the true values `f(x⋆)`, `g(v⋆)` of
/// each trial; omitted `delta` defaults to the noise model's `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcedureConfig {
    Full {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau2: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recipe: Option<RecipeKind>,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Partial {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    ConstrainedF {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_budget: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    ConstrainedG {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f_budget: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

fn default_beta() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    /// Plug-in lemma bounds from widths and squared distances.
    Lemma,
    /// Direct Monte Carlo over the (convex) cone.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub samples: usize,
    /// Fitted deviation constant; estimated from the reference set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_fit: Option<f64>,
    /// Scale at which squared distances are reported by the geometry experiment.
    pub tau: f64,
    pub gamma: GammaSource,
    pub epsilon_design: f64,
    /// Trials of the reference deviation fit.
    pub calibration_trials: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            c_fit: None,
            tau: 1.0,
            gamma: GammaSource::Lemma,
            epsilon_design: 1.0,
            calibration_trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub t_grid: Vec<f64>,
    pub deviation_trials: usize,
    pub sup_ip_trials: usize,
    pub assumption_trials: usize,
    pub beta: f64,
    /// Required pass rate of the regularization recipe.
    pub assumption_rate: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            t_grid: vec![1.0, 2.0, 3.0],
            deviation_trials: 10_000,
            sup_ip_trials: 10_000,
            assumption_trials: 10_000,
            beta: 2.0,
            assumption_rate: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<ProcedureConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Relative joint error at or below which a trial counts as a recovery.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_trials() -> usize {
    1
}

fn default_success_tol() -> f64 {
    1e-4
}

/// Grid cell: measurement count and sparsity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub s: usize,
    pub k: usize,
}

impl RunConfig {
    /// Parse and validate; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let keyed = |key: &str| {
            let key = key.to_string();
            move |e: Error| match e {
                Error::Config { .. } => e,
                other => Error::config(key.clone(), other.to_string()),
            }
        };
        let md = &self.model;
        if md.n == 0 {
            return Err(Error::config("model.n", "must be at least 1"));
        }
        match (&md.m, &md.m_grid) {
            (None, None) => return Err(Error::config("model.m", "set `m` or `m_grid`")),
            (_, Some(g)) if g.is_empty() => {
                return Err(Error::config("model.m_grid", "grid is empty"))
            }
            (_, Some(g)) if g.contains(&0) => {
                return Err(Error::config("model.m_grid", "m must be at least 1"))
            }
            (Some(0), _) => return Err(Error::config("model.m", "must be at least 1")),
            _ => {}
        }
        if let Some(g) = &md.sparsity_grid {
            if g.is_empty() {
                return Err(Error::config("model.sparsity_grid", "grid is empty"));
            }
        }
        md.ensemble.validate().map_err(keyed("model.ensemble"))?;
        md.noise.validate().map_err(|e| match e {
            Error::InvalidParameter { name, .. } => {
                let field = if name == "L" { "l" } else { name };
                Error::config(format!("model.noise.{field}"), e.to_string())
            }
            other => Error::config("model.noise", other.to_string()),
        })?;
        self.solver.validate().map_err(|e| match e {
            Error::InvalidParameter { name, .. } => {
                Error::config(format!("solver.{name}"), e.to_string())
            }
            other => Error::config("solver", other.to_string()),
        })?;
        for cell in self.cells() {
            self.instance_spec(&cell)
                .validate()
                .map_err(keyed("model"))?;
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !(self.success_tol > 0.0 && self.success_tol.is_finite()) {
            return Err(Error::config("success_tol", "must be finite and positive"));
        }
        if self.geometry.samples < crate::geometry::MIN_SAMPLES {
            return Err(Error::config("geometry.samples", "must be at least 100"));
        }
        if let Some(c) = self.geometry.c_fit {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(
                    "geometry.c_fit",
                    "must be finite and positive",
                ));
            }
        }
        if self.geometry.calibration_trials == 0 {
            return Err(Error::config(
                "geometry.calibration_trials",
                "must be at least 1",
            ));
        }
        if self.geometry.epsilon_design.is_nan() || self.geometry.epsilon_design < 0.0 {
            return Err(Error::config(
                "geometry.epsilon_design",
                "must be nonnegative",
            ));
        }
        let v = &self.validate;
        if v.t_grid.is_empty() || v.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::config(
                "validate.t_grid",
                "must be non-empty with finite t ≥ 0",
            ));
        }
        if !(v.beta > 1.0 && v.beta.is_finite()) {
            return Err(Error::config("validate.beta", "must be > 1"));
        }
        if v.deviation_trials == 0 || v.sup_ip_trials == 0 || v.assumption_trials == 0 {
            return Err(Error::config("validate", "trial counts must be at least 1"));
        }
        match (self.experiment, &self.procedure) {
            (ExperimentKind::Solve | ExperimentKind::Sweep, None) => {
                return Err(Error::config("procedure", "required for solve and sweep"))
            }
            (_, Some(p)) => self.validate_procedure(p)?,
            _ => {}
        }
        Ok(())
    }

    fn validate_procedure(&self, p: &ProcedureConfig) -> Result<()> {
        let nonneg = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x >= 0.0 && x.is_finite()) => Err(Error::config(
                format!("procedure.{key}"),
                format!("must be finite and nonnegative, got {x}"),
            )),
            _ => Ok(()),
        };
        match *p {
            ProcedureConfig::Full {
                tau1,
                tau2,
                recipe,
                beta,
            } => {
                if !(beta > 1.0 && beta.is_finite()) {
                    return Err(Error::config(
                        "procedure.beta",
                        format!("must be > 1, got {beta}"),
                    ));
                }
                match (tau1, tau2, recipe) {
                    (Some(a), Some(b), None) => {
                        for (key, v) in [("tau1", a), ("tau2", b)] {
                            if !(v > 0.0 && v.is_finite()) {
                                return Err(Error::config(
                                    format!("procedure.{key}"),
                                    format!("must be positive, got {v}"),
                                ));
                            }
                        }
                    }
                    (None, None, Some(r)) => {
                        let want = match r {
                            RecipeKind::Bounded => NoiseKind::Bounded,
                            RecipeKind::Subgaussian => NoiseKind::Subgaussian,
                        };
                        if self.model.noise.kind != want {
                            return Err(Error::config(
                                "procedure.recipe",
                                "recipe does not match the noise model",
                            ));
                        }
                    }
                    _ => {
                        return Err(Error::config(
                            "procedure.tau1",
                            "give both tau1 and tau2, or a recipe",
                        ))
                    }
                }
            }
            ProcedureConfig::Partial { lambda, delta } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::config(
                        "procedure.lambda",
                        format!("must be positive, got {lambda}"),
                    ));
                }
                nonneg("delta", delta)?;
                self.check_default_delta(delta)?;
            }
            ProcedureConfig::ConstrainedF { g_budget, delta } => {
                nonneg("g_budget", g_budget)?;
                nonneg("delta", delta)?;
                self.check_default_delta(delta)?;
            }
            ProcedureConfig::ConstrainedG { f_budget, delta } => {
                nonneg("f_budget", f_budget)?;
                nonneg("delta", delta)?;
                self.check_default_delta(delta)?;
            }
        }
        Ok(())
    }

    fn check_default_delta(&self, delta: Option<f64>) -> Result<()> {
        if delta.is_none() && self.model.noise.kind == NoiseKind::Subgaussian {
            return Err(Error::config(
                "procedure.delta",
                "required under sub-Gaussian noise",
            ));
        }
        Ok(())
    }

    /// All grid cells in row-major order: sparsity pairs outer, measurement counts inner.
    pub fn cells(&self) -> Vec<Cell> {
        let md = &self.model;
        let ms: Vec<usize> = md
            .m_grid
            .clone()
            .unwrap_or_else(|| md.m.into_iter().collect());
        let sk: Vec<[usize; 2]> = md
            .sparsity_grid
            .clone()
            .unwrap_or_else(|| vec![[md.signal.sparsity, md.corruption.sparsity]]);
        sk.iter()
            .flat_map(|&[s, k]| ms.iter().map(move |&m| Cell { m, s, k }))
            .collect()
    }

    pub fn instance_spec(&self, cell: &Cell) -> InstanceSpec {
        let md = &self.model;
        InstanceSpec {
            n: md.n,
            m: cell.m,
            signal: StructureSpec {
                sparsity: cell.s,
                ..md.signal
            },
            corruption: StructureSpec {
                sparsity: cell.k,
                ..md.corruption
            },
            ensemble: md.ensemble,
            noise: md.noise,
        }
    }

    /// Norms matching the structure of signal and corruption.
    pub fn regularizers(&self, cell: &Cell) -> Result<(Regularizer, Regularizer)> {
        let reg = |spec: &StructureSpec, dim: usize| match spec.kind {
            StructureKind::Sparse => Ok(Regularizer::l1(dim)),
            StructureKind::BlockSparse => Regularizer::block_l1l2(dim, spec.block_size),
        };
        Ok((
            reg(&self.model.signal, self.model.n)?,
            reg(&self.model.corruption, cell.m)?,
        ))
    }

    /// Noise budget used when a procedure leaves `delta` unset.
    pub fn default_delta(&self) -> f64 {
        match self.model.noise.kind {
            NoiseKind::None => 0.0,
            _ => self.model.noise.delta,
        }
    }

    /// Concrete program for one trial; `taus` supplies recipe values for the full program.
    pub fn resolve_procedure(
        &self,
        inst: &ProblemInstance<f64>,
        f: &Regularizer,
        g: &Regularizer,
        taus: Option<(f64, f64)>,
    ) -> Result<Procedure> {
        let p = self
            .procedure
            .ok_or_else(|| Error::config("procedure", "required for solve and sweep"))?;
        let dd = self.default_delta();
        Ok(match p {
            ProcedureConfig::Full { tau1, tau2, .. } => {
                let (t1, t2) = match (tau1, tau2, taus) {
                    (Some(a), Some(b), _) => (a, b),
                    (_, _, Some(t)) => t,
                    _ => return Err(Error::config("procedure.recipe", "recipe values missing")),
                };
                Procedure::Full { tau1: t1, tau2: t2 }
            }
            ProcedureConfig::Partial { lambda, delta } => Procedure::Partial {
                lambda,
                delta: delta.unwrap_or(dd),
            },
            ProcedureConfig::ConstrainedF { g_budget, delta } => Procedure::ConstrainedF {
                g_budget: match g_budget {
                    Some(b) => b,
                    None => g.value(&inst.corruption)?,
                },
                delta: delta.unwrap_or(dd),
            },
            ProcedureConfig::ConstrainedG { f_budget, delta } => Procedure::ConstrainedG {
                f_budget: match f_budget {
                    Some(b) => b,
                    None => f.value(&inst.signal)?,
                },
                delta: delta.unwrap_or(dd),
            },
        })
    }
}
