use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, GammaSource, ProcedureConfig, RecipeKind, RunConfig};
use super::{svg, Outputs, Status};
use crate::bounds::{
    assumption1_check, joint_error, joint_relative_error, tau_recipe_bounded,
    tau_recipe_subgaussian, BoundContext, BoundReport, RecipeInputs,
};
use crate::error::{Error, Result};
use crate::geometry::{
    check_deviation_inequality, check_sup_ip, config_hash, gamma_bound_c1, gamma_bound_c2,
    gamma_bound_c3, mc_eta_sq, mc_eta_sq_pair_best, mc_gamma_cone, mc_width_tangent,
    rad_and_gamma_ball, ConeKind, ConeSpec, DeviationSet, GeometryEstimate, InnerConfig,
    ViolationReport,
};
use crate::linalg::norm2;
use crate::model::{EnsembleSpec, NoiseKind, ProblemInstance};
use crate::regularizer::Regularizer;
use crate::rng::{derive_seed, stream_rng};
use crate::solver::{solve, Procedure};
use crate::stats::{binomial_se, isotonic_increasing, mean};

const SALT_CALIBRATION: u64 = 0x63616c;
const SALT_GEOMETRY: u64 = 0x67656f;
const SALT_RECIPE: u64 = 0x726563;
const SALT_VALIDATE: u64 = 0x76616c;
const SALT_ASSUMPTION: u64 = 0x617331;
const SALT_REFERENCE: u64 = 0x726566;

/// Dimensions of the reference set used to fit the deviation constant.
pub const REFERENCE_DIMS: (usize, usize) = (10, 40);

/// Seed of trial `trial`; shared by every grid cell so cells differ only in their parameters.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    derive_seed(base_seed, trial as u64)
}

/// A fixed two-dimensional subspace of `Rⁿ × Rᵐ`.
pub fn reference_set(n: usize, m: usize) -> Result<DeviationSet> {
    let mut rng = stream_rng(SALT_REFERENCE, (n * 1_000_003 + m) as u64);
    let spanning: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            (0..n + m)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();
    DeviationSet::subspace(n, &spanning)
}

/// Fit the deviation constant on [`reference_set`] at [`REFERENCE_DIMS`].
pub fn reference_fit(
    ensemble: &EnsembleSpec,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    let (n, m) = REFERENCE_DIMS;
    check_deviation_inequality(&reference_set(n, m)?, ensemble, t_grid, trials, seed)
}

/// Deviation constants used by bounds and recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Constant for the cone deviation inequality.
    pub c_fit: f64,
    /// `"config"` or `"reference_fit"`.
    pub source: String,
    pub report: Option<ViolationReport>,
}

pub fn calibrate(cfg: &RunConfig) -> Result<Calibration> {
    if let Some(c) = cfg.geometry.c_fit {
        return Ok(Calibration {
            c_fit: c,
            source: "config".into(),
            report: None,
        });
    }
    let report = reference_fit(
        &cfg.model.ensemble,
        &cfg.validate.t_grid,
        cfg.geometry.calibration_trials,
        derive_seed(cfg.base_seed, SALT_CALIBRATION),
    )?;
    Ok(Calibration {
        c_fit: report.fitted_c,
        source: "reference_fit".into(),
        report: Some(report),
    })
}

/// A fixed unit vector in `Rᵐ` for the inner-product deviation check.
fn probe_direction(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let w: Vec<f64> = (0..m)
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect();
    let nrm = norm2(&w);
    w.into_iter().map(|v| v / nrm).collect()
}

/// Inner-product deviation fit for the signal ball at the cell's dimensions.
pub fn sup_ip_fit(
    cfg: &RunConfig,
    cell: &Cell,
    f: &Regularizer,
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    let w = probe_direction(cell.m, derive_seed(seed, 1));
    check_sup_ip(
        &cfg.model.ensemble,
        &w,
        f,
        &cfg.validate.t_grid,
        trials,
        derive_seed(seed, 2),
    )
}

/// Recipe regularization parameters and what went into them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeValues {
    pub recipe: RecipeKind,
    pub tau1: f64,
    pub tau2: f64,
    pub inputs: RecipeInputs,
}

/// Parameters of a recipe at one cell, with `c_fit` from the config or an inner-product fit.
pub fn recipe_values(
    cfg: &RunConfig,
    cell: &Cell,
    recipe: RecipeKind,
    beta: f64,
    f: &Regularizer,
    g: &Regularizer,
    seed: u64,
) -> Result<RecipeValues> {
    let samples = cfg.geometry.samples;
    let (r_f, gf) = rad_and_gamma_ball(f, samples, derive_seed(seed, 1))?;
    let (r_g, gg) = rad_and_gamma_ball(g, samples, derive_seed(seed, 2))?;
    let c_fit = match cfg.geometry.c_fit {
        Some(c) => c,
        None => {
            sup_ip_fit(
                cfg,
                cell,
                f,
                cfg.geometry.calibration_trials,
                derive_seed(seed, 3),
            )?
            .fitted_c
        }
    };
    let inputs = RecipeInputs {
        k: cfg.model.ensemble.k(),
        beta,
        c_fit,
        gamma_ball_f: gf.mean,
        r_f,
        gamma_ball_g: gg.mean,
        r_g,
    };
    let noise = &cfg.model.noise;
    let (tau1, tau2) = match recipe {
        RecipeKind::Bounded => tau_recipe_bounded(noise.delta, cell.m, &inputs)?,
        RecipeKind::Subgaussian => tau_recipe_subgaussian(noise.l, cell.m, &inputs)?,
    };
    Ok(RecipeValues {
        recipe,
        tau1,
        tau2,
        inputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: GeometryEstimate,
}

fn named(name: &str, estimate: GeometryEstimate) -> NamedEstimate {
    NamedEstimate {
        name: name.into(),
        estimate,
    }
}

/// Complexity estimate of a procedure's recovery cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeComplexity {
    pub gamma_hat: f64,
    pub source: GammaSource,
    /// Penalty scale `λ₁` chosen for the partially penalized bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    pub estimates: Vec<NamedEstimate>,
}

/// Estimate the complexity of the cone matching `procedure` at the instance's truth.
pub fn cone_complexity(
    procedure: &Procedure,
    source: GammaSource,
    beta: f64,
    inst: &ProblemInstance<f64>,
    (f, g): (&Regularizer, &Regularizer),
    samples: usize,
    seed: u64,
) -> Result<ConeComplexity> {
    let af = f.anchor(&inst.signal)?;
    let ag = g.anchor(&inst.corruption)?;
    let direct = |kind: ConeKind| -> Result<ConeComplexity> {
        let spec = ConeSpec::new(kind, *f, *g, &inst.signal, &inst.corruption)?;
        let est = mc_gamma_cone(&spec, samples, seed, &InnerConfig::default())?;
        Ok(ConeComplexity {
            gamma_hat: est.mean,
            source,
            lambda1: None,
            estimates: vec![named("gamma_cone", est)],
        })
    };
    match (*procedure, source) {
        (Procedure::ConstrainedF { .. } | Procedure::ConstrainedG { .. }, GammaSource::Lemma) => {
            let wf = mc_width_tangent(f, &af, samples, derive_seed(seed, 1))?;
            let wg = mc_width_tangent(g, &ag, samples, derive_seed(seed, 2))?;
            Ok(ConeComplexity {
                gamma_hat: gamma_bound_c1(&wf, &wg),
                source,
                lambda1: None,
                estimates: vec![named("width_f", wf), named("width_g", wg)],
            })
        }
        (Procedure::ConstrainedF { .. } | Procedure::ConstrainedG { .. }, GammaSource::Direct) => {
            direct(ConeKind::C1)
        }
        (Procedure::Partial { lambda, .. }, GammaSource::Lemma) => {
            let (l1, ef, eg) = mc_eta_sq_pair_best(f, g, &af, &ag, lambda, samples, seed)?;
            Ok(ConeComplexity {
                gamma_hat: gamma_bound_c2(&ef, &eg),
                source,
                lambda1: Some(l1),
                estimates: vec![named("eta_sq_f", ef), named("eta_sq_g", eg)],
            })
        }
        (Procedure::Partial { lambda, .. }, GammaSource::Direct) => direct(ConeKind::C2 { lambda }),
        (Procedure::Full { tau1, tau2 }, GammaSource::Lemma) => {
            let ef = mc_eta_sq(f, tau1, &af, samples, derive_seed(seed, 1))?;
            let eg = mc_eta_sq(g, tau2, &ag, samples, derive_seed(seed, 2))?;
            let gamma = gamma_bound_c3(
                &ef,
                &eg,
                tau1,
                tau2,
                f.compatibility_alpha(),
                g.compatibility_alpha(),
                beta,
            )?;
            Ok(ConeComplexity {
                gamma_hat: gamma,
                source,
                lambda1: None,
                estimates: vec![named("eta_sq_f", ef), named("eta_sq_g", eg)],
            })
        }
        (Procedure::Full { tau1, tau2 }, GammaSource::Direct) => {
            direct(ConeKind::C3 { tau1, tau2, beta })
        }
    }
}

/// One solved trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub procedure: Procedure,
    pub converged: bool,
    pub iters: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub joint_error: f64,
    pub relative_error: f64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_hat: Option<Vec<f64>>,
}

/// All trials of one grid cell together with its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub cell: Cell,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipe: Option<RecipeValues>,
    pub complexity: ConeComplexity,
    pub context: BoundContext,
    pub trials: Vec<TrialRecord>,
}

fn procedure_beta(cfg: &RunConfig) -> f64 {
    match cfg.procedure {
        Some(ProcedureConfig::Full { beta, .. }) => beta,
        _ => cfg.validate.beta,
    }
}

/// Solve every trial of one cell; `keep_estimates` retains the recovered vectors.
pub fn run_cell(
    cfg: &RunConfig,
    index: usize,
    cell: &Cell,
    keep_estimates: bool,
) -> Result<CellRun> {
    let spec = cfg.instance_spec(cell);
    let (f, g) = cfg.regularizers(cell)?;
    let cell_seed = derive_seed(derive_seed(cfg.base_seed, SALT_GEOMETRY), index as u64);
    let beta = procedure_beta(cfg);
    let recipe = match cfg.procedure {
        Some(ProcedureConfig::Full {
            recipe: Some(r),
            tau1: None,
            ..
        }) => Some(recipe_values(
            cfg,
            cell,
            r,
            beta,
            &f,
            &g,
            derive_seed(cell_seed, SALT_RECIPE),
        )?),
        _ => None,
    };
    let taus = recipe.as_ref().map(|r| (r.tau1, r.tau2));

    let trials: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialRecord> {
            let seed = trial_seed(cfg.base_seed, t);
            let inst: ProblemInstance<f64> = spec.generate(seed)?;
            let procedure = cfg.resolve_procedure(&inst, &f, &g, taus)?;
            let res = solve(&inst, &f, &g, &procedure, &cfg.solver)?;
            let rel = joint_relative_error(&res.x_hat, &res.v_hat, &inst);
            Ok(TrialRecord {
                trial: t,
                seed,
                procedure,
                converged: res.converged,
                iters: res.iters,
                objective: res.objective,
                primal_residual: res.primal_residual,
                dual_residual: res.dual_residual,
                joint_error: joint_error(&res.x_hat, &res.v_hat, &inst),
                relative_error: rel,
                success: rel <= cfg.success_tol,
                x_hat: keep_estimates.then(|| res.x_hat.clone()),
                v_hat: keep_estimates.then(|| res.v_hat.clone()),
            })
        })
        .collect::<Result<_>>()?;

    // Geometry is evaluated at the truth of the first trial.
    let first: ProblemInstance<f64> = spec.generate(trial_seed(cfg.base_seed, 0))?;
    let complexity = cone_complexity(
        &trials[0].procedure,
        cfg.geometry.gamma,
        beta,
        &first,
        (&f, &g),
        cfg.geometry.samples,
        cell_seed,
    )?;
    let context = BoundContext {
        n: cfg.model.n,
        m: cell.m,
        s: cell.s,
        k: cell.k,
        delta: cfg.default_delta(),
        gamma_hat: complexity.gamma_hat,
        c_fit: 0.0,
        k_psi2: cfg.model.ensemble.k(),
        beta,
        alpha_f: f.compatibility_alpha(),
        alpha_g: g.compatibility_alpha(),
        epsilon_design: cfg.geometry.epsilon_design,
    };
    Ok(CellRun {
        cell: *cell,
        recipe,
        complexity,
        context,
        trials,
    })
}

/// Trials of every cell, with the deviation constant filled into each bound context.
pub fn run_cells(cfg: &RunConfig, keep_estimates: bool) -> Result<(Calibration, Vec<CellRun>)> {
    let cal = calibrate(cfg)?;
    let mut runs = Vec::new();
    for (i, cell) in cfg.cells().iter().enumerate() {
        let mut run = run_cell(cfg, i, cell, keep_estimates)?;
        run.context.c_fit = cal.c_fit;
        runs.push(run);
    }
    Ok((cal, runs))
}

fn status_of(runs: &[CellRun]) -> Status {
    if runs.iter().flat_map(|r| &r.trials).all(|t| t.converged) {
        Status::Ok
    } else {
        Status::NotConverged
    }
}

fn reports_csv(reports: &[BoundReport]) -> Result<String> {
    let mut buf = Vec::new();
    BoundReport::write_csv(reports, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub config_hash: String,
    pub calibration: Calibration,
    pub cells: Vec<CellRun>,
    pub reports: Vec<BoundReport>,
}

pub fn solve_result(cfg: &RunConfig) -> Result<SolveResult> {
    let (calibration, cells) = run_cells(cfg, cfg.trials == 1)?;
    let mut reports = Vec::new();
    for run in &cells {
        for t in &run.trials {
            reports.push(BoundReport::evaluate(
                &t.procedure,
                &run.context,
                t.joint_error,
            )?);
        }
    }
    Ok(SolveResult {
        config_hash: config_hash(cfg)?,
        calibration,
        cells,
        reports,
    })
}

/// `results.json` with every trial, `results.csv` with one bound row per trial.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Outputs> {
    let res = solve_result(cfg)?;
    Ok(Outputs {
        status: status_of(&res.cells),
        files: vec![
            ("results.json".into(), serde_json::to_string_pretty(&res)?),
            ("results.csv".into(), reports_csv(&res.reports)?),
        ],
    })
}

/// Aggregate of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub m: usize,
    pub s: usize,
    pub k: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub success_se: f64,
    /// Success rate after isotonic smoothing along `m` within the sparsity row.
    pub smoothed_rate: f64,
    pub mean_error: f64,
    pub mean_relative_error: f64,
    pub mean_iters: f64,
    pub converged: usize,
    pub gamma_hat: f64,
    pub bound: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub m_grid: Vec<usize>,
    pub sparsity_grid: Vec<[usize; 2]>,
    pub calibration: Calibration,
    /// Row-major: sparsity pairs outer, measurement counts inner.
    pub cells: Vec<CellSummary>,
}

impl SweepResult {
    /// Cells of the sparsity row `row`.
    pub fn row(&self, row: usize) -> &[CellSummary] {
        let w = self.m_grid.len();
        &self.cells[row * w..(row + 1) * w]
    }
}

fn summarize(run: &CellRun) -> Result<CellSummary> {
    let ts = &run.trials;
    let col = |f: fn(&TrialRecord) -> f64| mean(&ts.iter().map(f).collect::<Vec<_>>());
    let successes = ts.iter().filter(|t| t.success).count();
    let rate = successes as f64 / ts.len() as f64;
    let mean_error = col(|t| t.joint_error);
    Ok(CellSummary {
        m: run.cell.m,
        s: run.cell.s,
        k: run.cell.k,
        trials: ts.len(),
        successes,
        success_rate: rate,
        success_se: binomial_se(rate, ts.len()),
        smoothed_rate: rate,
        mean_error,
        mean_relative_error: col(|t| t.relative_error),
        mean_iters: col(|t| t.iters as f64),
        converged: ts.iter().filter(|t| t.converged).count(),
        gamma_hat: run.complexity.gamma_hat,
        bound: BoundReport::evaluate(&ts[0].procedure, &run.context, mean_error)?,
    })
}

pub fn sweep_result(cfg: &RunConfig) -> Result<(SweepResult, Status)> {
    let (calibration, runs) = run_cells(cfg, false)?;
    let status = status_of(&runs);
    let mut cells = runs.iter().map(summarize).collect::<Result<Vec<_>>>()?;
    let m_grid: Vec<usize> = cfg
        .model
        .m_grid
        .clone()
        .unwrap_or_else(|| cfg.model.m.into_iter().collect());
    let sparsity_grid = cfg
        .model
        .sparsity_grid
        .clone()
        .unwrap_or_else(|| vec![[cfg.model.signal.sparsity, cfg.model.corruption.sparsity]]);
    for row in cells.chunks_mut(m_grid.len()) {
        let rates: Vec<f64> = row.iter().map(|c| c.success_rate).collect();
        let weights: Vec<f64> = row.iter().map(|c| c.trials as f64).collect();
        for (c, s) in row.iter_mut().zip(isotonic_increasing(&rates, &weights)) {
            c.smoothed_rate = s;
        }
    }
    Ok((
        SweepResult {
            config_hash: config_hash(cfg)?,
            m_grid,
            sparsity_grid,
            calibration,
            cells,
        },
        status,
    ))
}

fn curve_csv(row: &[CellSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = crate::bounds::csv_err;
    w.write_record([
        "m",
        "success_rate",
        "smoothed_rate",
        "success_se",
        "mean_error",
    ])
    .map_err(err)?;
    for c in row {
        w.write_record([
            c.m.to_string(),
            c.success_rate.to_string(),
            c.smoothed_rate.to_string(),
            c.success_se.to_string(),
            c.mean_error.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// `results.json` with per-cell aggregates, `results.csv` with one bound row per cell,
/// and a success-rate curve per sparsity row under `curves/`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outputs> {
    let (res, status) = sweep_result(cfg)?;
    let reports: Vec<BoundReport> = res.cells.iter().map(|c| c.bound.clone()).collect();
    let mut files = vec![
        (
            "results.json".to_string(),
            serde_json::to_string_pretty(&res)?,
        ),
        ("results.csv".to_string(), reports_csv(&reports)?),
    ];
    for (i, &[s, k]) in res.sparsity_grid.iter().enumerate() {
        let row = res.row(i);
        let stem = format!("curves/success_s{s}_k{k}");
        files.push((format!("{stem}.csv"), curve_csv(row)?));
        let points: Vec<(f64, f64)> = row.iter().map(|c| (c.m as f64, c.success_rate)).collect();
        files.push((
            format!("{stem}.svg"),
            svg::success_curve_svg(&points, &format!("success rate, s = {s}, k = {k}")),
        ));
    }
    Ok(Outputs { files, status })
}

/// Geometry estimates at one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub cell: Cell,
    pub tau: f64,
    pub estimates: Vec<NamedEstimate>,
    /// Plug-in complexity bounds of the constrained and partially penalized cones.
    pub gamma_bound_c1: f64,
    pub gamma_bound_c2: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryResult {
    pub config_hash: String,
    pub cells: Vec<CellGeometry>,
}

pub fn geometry_result(cfg: &RunConfig) -> Result<GeometryResult> {
    let samples = cfg.geometry.samples;
    let tau = cfg.geometry.tau;
    let lambda = match cfg.procedure {
        Some(ProcedureConfig::Partial { lambda, .. }) => lambda,
        _ => 1.0,
    };
    let mut cells = Vec::new();
    for (i, cell) in cfg.cells().iter().enumerate() {
        let seed = derive_seed(derive_seed(cfg.base_seed, SALT_GEOMETRY), i as u64);
        let (f, g) = cfg.regularizers(cell)?;
        let inst: ProblemInstance<f64> = cfg
            .instance_spec(cell)
            .generate(trial_seed(cfg.base_seed, 0))?;
        let af = f.anchor(&inst.signal)?;
        let ag = g.anchor(&inst.corruption)?;
        let eta_f = mc_eta_sq(&f, tau, &af, samples, derive_seed(seed, 1))?;
        let eta_g = mc_eta_sq(&g, tau, &ag, samples, derive_seed(seed, 2))?;
        let wf = mc_width_tangent(&f, &af, samples, derive_seed(seed, 3))?;
        let wg = mc_width_tangent(&g, &ag, samples, derive_seed(seed, 4))?;
        let (_, bf) = rad_and_gamma_ball(&f, samples, derive_seed(seed, 5))?;
        let (_, bg) = rad_and_gamma_ball(&g, samples, derive_seed(seed, 6))?;
        let (_, pf, pg) =
            mc_eta_sq_pair_best(&f, &g, &af, &ag, lambda, samples, derive_seed(seed, 7))?;
        cells.push(CellGeometry {
            cell: *cell,
            tau,
            gamma_bound_c1: gamma_bound_c1(&wf, &wg),
            gamma_bound_c2: gamma_bound_c2(&pf, &pg),
            lambda,
            estimates: vec![
                named("eta_sq_f", eta_f),
                named("eta_sq_g", eta_g),
                named("width_f", wf),
                named("width_g", wg),
                named("gamma_ball_f", bf),
                named("gamma_ball_g", bg),
            ],
        });
    }
    Ok(GeometryResult {
        config_hash: config_hash(cfg)?,
        cells,
    })
}

/// `results.json` with the estimate set, `results.csv` with one row per estimate.
pub fn cmd_geometry(cfg: &RunConfig) -> Result<Outputs> {
    let res = geometry_result(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = crate::bounds::csv_err;
    w.write_record([
        "m",
        "s",
        "k",
        "name",
        "kind",
        "mean",
        "std_error",
        "samples",
        "config_hash",
    ])
    .map_err(err)?;
    for c in &res.cells {
        for e in &c.estimates {
            let kind = serde_json::to_value(e.estimate.kind)?;
            w.write_record([
                c.cell.m.to_string(),
                c.cell.s.to_string(),
                c.cell.k.to_string(),
                e.name.clone(),
                kind.as_str().unwrap_or_default().to_string(),
                e.estimate.mean.to_string(),
                e.estimate.std_error.to_string(),
                e.estimate.samples.to_string(),
                res.config_hash.clone(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let csv = String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(Outputs {
        status: Status::Ok,
        files: vec![
            ("results.json".into(), serde_json::to_string_pretty(&res)?),
            ("results.csv".into(), csv),
        ],
    })
}

/// Pass rate of the regularization recipe on fresh noise draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub recipe: Option<RecipeValues>,
    pub trials: usize,
    pub pass_rate: f64,
    pub required: f64,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.pass_rate >= self.required
    }
}

/// Fraction of trials in which the recipe parameters dominate the realized noise.
pub fn assumption_pass_rate(
    cfg: &RunConfig,
    cell: &Cell,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    let (f, g) = cfg.regularizers(cell)?;
    let recipe = match cfg.model.noise.kind {
        NoiseKind::None => None,
        NoiseKind::Bounded => Some(recipe_values(
            cfg,
            cell,
            RecipeKind::Bounded,
            beta,
            &f,
            &g,
            seed,
        )?),
        NoiseKind::Subgaussian => Some(recipe_values(
            cfg,
            cell,
            RecipeKind::Subgaussian,
            beta,
            &f,
            &g,
            seed,
        )?),
    };
    let (tau1, tau2) = recipe.as_ref().map_or((0.0, 0.0), |r| (r.tau1, r.tau2));
    let spec = cfg.instance_spec(cell);
    let trial_base = derive_seed(seed, SALT_ASSUMPTION);
    let passes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let inst: ProblemInstance<f64> = spec.generate(derive_seed(trial_base, t as u64))?;
            Ok(assumption1_check(&inst, &f, &g, tau1, tau2, beta)?.pass)
        })
        .collect::<Result<_>>()?;
    Ok(AssumptionReport {
        recipe,
        trials,
        pass_rate: passes.iter().filter(|p| **p).count() as f64 / trials as f64,
        required: cfg.validate.assumption_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub config_hash: String,
    pub cell: Cell,
    pub deviation: ViolationReport,
    pub sup_ip: ViolationReport,
    pub assumption: AssumptionReport,
    pub pass: bool,
}

/// Deviation inequality on a fixed subspace, inner-product deviation over the signal ball,
/// and recipe validity, all at the first grid cell.
pub fn validate_result(cfg: &RunConfig) -> Result<ValidateResult> {
    let cell = cfg.cells()[0];
    let v = &cfg.validate;
    let seed = derive_seed(cfg.base_seed, SALT_VALIDATE);
    let (f, _) = cfg.regularizers(&cell)?;
    let deviation = check_deviation_inequality(
        &reference_set(cfg.model.n, cell.m)?,
        &cfg.model.ensemble,
        &v.t_grid,
        v.deviation_trials,
        derive_seed(seed, 1),
    )?;
    let sup_ip = sup_ip_fit(cfg, &cell, &f, v.sup_ip_trials, derive_seed(seed, 2))?;
    let mut recipe_cfg = cfg.clone();
    recipe_cfg.geometry.c_fit = Some(cfg.geometry.c_fit.unwrap_or(sup_ip.fitted_c));
    let assumption = assumption_pass_rate(
        &recipe_cfg,
        &cell,
        v.beta,
        v.assumption_trials,
        derive_seed(seed, 3),
    )?;
    let pass = [&deviation, &sup_ip]
        .iter()
        .all(|r| r.within_tail_bound() && r.non_increasing())
        && assumption.passes();
    Ok(ValidateResult {
        config_hash: config_hash(cfg)?,
        cell,
        deviation,
        sup_ip,
        assumption,
        pass,
    })
}

/// `results.json` with the full reports, `results.csv` with one row per check.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Outputs> {
    let res = validate_result(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = crate::bounds::csv_err;
    w.write_record(["check", "t", "rate", "allowed", "pass"])
        .map_err(err)?;
    for (name, rep) in [("deviation", &res.deviation), ("sup_ip", &res.sup_ip)] {
        for r in &rep.rates {
            w.write_record([
                name.to_string(),
                r.t.to_string(),
                r.rate.to_string(),
                r.allowed.to_string(),
                (r.rate <= r.allowed).to_string(),
            ])
            .map_err(err)?;
        }
    }
    let a = &res.assumption;
    w.write_record([
        "assumption".to_string(),
        String::new(),
        a.pass_rate.to_string(),
        a.required.to_string(),
        a.passes().to_string(),
    ])
    .map_err(err)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let csv = String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(Outputs {
        status: if res.pass {
            Status::Ok
        } else {
            Status::ChecksFailed
        },
        files: vec![
            ("results.json".into(), serde_json::to_string_pretty(&res)?),
            ("results.csv".into(), csv),
        ],
    })
}
