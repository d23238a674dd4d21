//! SOLVE → ESTIMATE → MARK → REFINE loops, uniform studies and observed rates.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, SaddleSystem};
use crate::estimate::{dorfler_mark, local_indicators, ErrorReport, EstimateError, MarkingSum};
use crate::mesh::{Mesh, MeshError};
use crate::problem::ProblemSpec;
use crate::solver::{block_residuals, solve_direct, solve_iterative, IterativeOptions, SolveResult, SolverError, WarmStart};
use crate::spaces::{CgSpace, DgSpace, SpaceError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementMode {
    Uniform,
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub degree: usize,
    /// Number of solves (meshes) in the study.
    pub levels: usize,
    pub mode: RefinementMode,
    pub theta: f64,
    pub marking: MarkingSum,
    pub solver: SolverKind,
    pub iterative: IterativeOptions,
    /// Start the iterative solver from the prolongated previous solution.
    pub warm_start: bool,
    /// Relative KKT residual accepted by the direct solver.
    pub direct_tol: f64,
    /// Subdivisions of the initial structured mesh; the problem default if unset.
    pub initial_resolution: Option<usize>,
    /// Stop once the estimator drops below this value.
    pub estimator_threshold: Option<f64>,
    /// Stop once a level has at least this many total DOFs.
    pub max_dofs: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            degree: 1,
            levels: 5,
            mode: RefinementMode::Adaptive,
            theta: 0.5,
            marking: MarkingSum::Plain,
            solver: SolverKind::Direct,
            iterative: IterativeOptions::default(),
            warm_start: true,
            direct_tol: 1e-11,
            initial_resolution: None,
            estimator_threshold: None,
            max_dofs: None,
        }
    }
}

/// One row of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptRecord {
    pub level: usize,
    pub elements: usize,
    pub dofs_trial: usize,
    pub dofs_test: usize,
    pub dofs_total: usize,
    pub h_max: f64,
    pub estimator: f64,
    pub err_l2: Option<f64>,
    pub err_vh: Option<f64>,
    pub err_vh_beta: Option<f64>,
    pub effectivity: Option<f64>,
    /// Elements marked for the next refinement.
    pub marked: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub warm_started: bool,
    pub solver_residual: f64,
    /// `|Bᵀε| / |L|`
    pub orthogonality: f64,
    pub seconds: f64,
}

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("levels must be at least 1")]
    NoLevels,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("solver did not converge (relative residual {0:e})")]
    NotConverged(f64),
    #[error("level callback failed: {0}")]
    Callback(String),
}

/// A failed study: the error plus every level completed before it.
#[derive(Debug, Error)]
#[error("level {level}: {source}")]
pub struct StudyError {
    pub level: usize,
    pub records: Vec<AdaptRecord>,
    #[source]
    pub source: AdaptError,
}

/// Everything computed on one level, handed to the study callback.
pub struct LevelView<'a> {
    pub level: usize,
    pub mesh: &'a Mesh,
    pub dg: &'a DgSpace,
    pub cg: &'a CgSpace,
    pub system: &'a SaddleSystem,
    pub solution: &'a SolveResult,
    /// `u_h` in broken coefficients.
    pub u_dg: &'a [f64],
    pub report: &'a ErrorReport,
    pub marked: &'a [usize],
    pub record: &'a AdaptRecord,
}

pub type CallbackResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Adaptive study with default options apart from those given.
pub fn run_adaptive(
    problem: &ProblemSpec,
    degree: usize,
    levels: usize,
    theta: f64,
    solver: SolverKind,
) -> Result<Vec<AdaptRecord>, StudyError> {
    let opts = StudyOptions { degree, levels, theta, solver, mode: RefinementMode::Adaptive, ..Default::default() };
    run_study(problem, &opts, |_| Ok(()))
}

/// Uniform study: each level halves h (two bisections of every element).
pub fn run_uniform(
    problem: &ProblemSpec,
    degree: usize,
    levels: usize,
    solver: SolverKind,
) -> Result<Vec<AdaptRecord>, StudyError> {
    let opts = StudyOptions { degree, levels, solver, mode: RefinementMode::Uniform, ..Default::default() };
    run_study(problem, &opts, |_| Ok(()))
}

/// Runs the study, calling `on_level` after each level is estimated and marked.
pub fn run_study<F>(problem: &ProblemSpec, opts: &StudyOptions, mut on_level: F) -> Result<Vec<AdaptRecord>, StudyError>
where
    F: FnMut(&LevelView<'_>) -> CallbackResult,
{
    let mut records = Vec::new();
    let fail = |level, records, source| StudyError { level, records, source };
    if opts.levels == 0 {
        return Err(fail(0, records, AdaptError::NoLevels));
    }
    if opts.mode == RefinementMode::Adaptive {
        if let Err(e) = dorfler_mark(&[], opts.theta, opts.marking) {
            return Err(fail(0, records, e.into()));
        }
    }
    let n0 = opts.initial_resolution.unwrap_or(problem.default_resolution);
    let mut mesh = match Mesh::structured(&problem.domain, n0, &problem.interfaces) {
        Ok(m) => m,
        Err(e) => return Err(fail(0, records, e.into())),
    };
    let mut previous: Option<(Mesh, DgSpace, Vec<f64>, Vec<f64>)> = None;

    for level in 0..opts.levels {
        let step = run_level(problem, opts, level, &mesh, previous.as_ref(), &mut on_level);
        let (record, dg, marked, eps, u_dg) = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(level, records, e)),
        };
        let stop = record.estimator == 0.0
            || opts.estimator_threshold.is_some_and(|t| record.estimator < t)
            || opts.max_dofs.is_some_and(|d| record.dofs_total >= d)
            || (opts.mode == RefinementMode::Adaptive && marked.is_empty());
        records.push(record);
        if stop || level + 1 == opts.levels {
            break;
        }
        let fine = match opts.mode {
            RefinementMode::Uniform => mesh.refine_uniform(),
            RefinementMode::Adaptive => mesh.bisect(&marked),
        };
        previous = Some((std::mem::replace(&mut mesh, fine), dg, eps, u_dg));
    }
    Ok(records)
}

type LevelOutput = (AdaptRecord, DgSpace, Vec<usize>, Vec<f64>, Vec<f64>);

fn run_level<F>(
    problem: &ProblemSpec,
    opts: &StudyOptions,
    level: usize,
    mesh: &Mesh,
    previous: Option<&(Mesh, DgSpace, Vec<f64>, Vec<f64>)>,
    on_level: &mut F,
) -> Result<LevelOutput, AdaptError>
where
    F: FnMut(&LevelView<'_>) -> CallbackResult,
{
    let start = Instant::now();
    let dg = DgSpace::new(mesh, opts.degree)?;
    let cg = CgSpace::new(mesh, opts.degree)?;
    let system = SaddleSystem::assemble(mesh, &dg, &cg, problem)?;

    let (solution, warm_started) = match opts.solver {
        SolverKind::Direct => (solve_direct(&system, opts.direct_tol)?, false),
        SolverKind::Iterative => {
            let warm = match (opts.warm_start, previous) {
                (true, Some((coarse, coarse_dg, eps, u_dg))) => {
                    let eps = coarse_dg.prolongate(coarse, eps, mesh, &dg);
                    let u = cg.from_broken(&coarse_dg.prolongate(coarse, u_dg, mesh, &dg));
                    Some(WarmStart { eps, u })
                }
                _ => None,
            };
            (solve_iterative(&system, &opts.iterative, warm.as_ref())?, warm.is_some())
        }
    };
    if !solution.converged {
        return Err(AdaptError::NotConverged(solution.relative_residual));
    }

    let u_dg = cg.inject(&solution.u);
    let report = local_indicators(mesh, problem, &dg, &solution.eps, Some(&u_dg))?;
    let marked = match opts.mode {
        RefinementMode::Uniform => (0..mesh.num_elements()).collect(),
        RefinementMode::Adaptive => dorfler_mark(&report.indicators, opts.theta, opts.marking)?,
    };
    let (_, orthogonality) = block_residuals(&system, &solution.eps, &solution.u);
    let record = AdaptRecord {
        level,
        elements: mesh.num_elements(),
        dofs_trial: cg.dim(),
        dofs_test: dg.dim(),
        dofs_total: cg.dim() + dg.dim(),
        h_max: mesh.max_diameter(),
        estimator: report.estimator,
        err_l2: report.errors.map(|e| e.l2),
        err_vh: report.errors.map(|e| e.vh),
        err_vh_beta: report.errors.map(|e| e.vh_beta),
        effectivity: report.effectivity,
        marked: marked.len(),
        outer_iterations: solution.iterations,
        inner_iterations: solution.inner_iterations,
        warm_started,
        solver_residual: solution.relative_residual,
        orthogonality,
        seconds: start.elapsed().as_secs_f64(),
    };
    on_level(&LevelView {
        level,
        mesh,
        dg: &dg,
        cg: &cg,
        system: &system,
        solution: &solution,
        u_dg: &u_dg,
        report: &report,
        marked: &marked,
        record: &record,
    })
    .map_err(|e| AdaptError::Callback(e.to_string()))?;
    Ok((record, dg, marked, solution.eps, u_dg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateAxis {
    Dofs,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateQuantity {
    ErrL2,
    ErrVh,
    ErrVhBeta,
    Estimator,
}

impl RateQuantity {
    pub fn of(self, r: &AdaptRecord) -> Option<f64> {
        match self {
            RateQuantity::ErrL2 => r.err_l2,
            RateQuantity::ErrVh => r.err_vh,
            RateQuantity::ErrVhBeta => r.err_vh_beta,
            RateQuantity::Estimator => Some(r.estimator),
        }
    }
}

impl RateAxis {
    pub fn of(self, r: &AdaptRecord) -> f64 {
        match self {
            RateAxis::Dofs => r.dofs_total as f64,
            RateAxis::H => r.h_max,
        }
    }
}

/// Slopes `log(y₁/y₀) / log(x₁/x₀)` between consecutive records. An interval
/// is `None` when a value is missing or not positive, or x does not change.
pub fn observed_rates(records: &[AdaptRecord], x: RateAxis, y: RateQuantity) -> Vec<Option<f64>> {
    records
        .windows(2)
        .map(|w| {
            let (x0, x1) = (x.of(&w[0]), x.of(&w[1]));
            let (y0, y1) = (y.of(&w[0])?, y.of(&w[1])?);
            if !(x0 > 0.0 && x1 > 0.0 && y0 > 0.0 && y1 > 0.0) || x0 == x1 {
                return None;
            }
            Some((y1 / y0).ln() / (x1 / x0).ln())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::catalog;

    fn record(dofs: usize, h: f64, err: f64) -> AdaptRecord {
        AdaptRecord {
            level: 0,
            elements: 0,
            dofs_trial: 0,
            dofs_test: dofs,
            dofs_total: dofs,
            h_max: h,
            estimator: err,
            err_l2: Some(err),
            err_vh: Some(err),
            err_vh_beta: None,
            effectivity: None,
            marked: 0,
            outer_iterations: 0,
            inner_iterations: 0,
            warm_started: false,
            solver_residual: 0.0,
            orthogonality: 0.0,
            seconds: 0.0,
        }
    }

    #[test]
    fn rates_of_simple_sequences() {
        let rs = [record(100, 0.5, 1.0), record(400, 0.25, 0.5), record(1600, 0.125, 0.125)];
        let h = observed_rates(&rs, RateAxis::H, RateQuantity::ErrVh);
        assert!((h[0].unwrap() - 1.0).abs() < 1e-14);
        assert!((h[1].unwrap() - 2.0).abs() < 1e-14);
        let d = observed_rates(&rs, RateAxis::Dofs, RateQuantity::ErrL2);
        assert!((d[1].unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(observed_rates(&rs, RateAxis::H, RateQuantity::ErrVhBeta), vec![None, None]);
        let zero = [record(10, 0.5, 0.0), record(40, 0.25, 1.0)];
        assert_eq!(observed_rates(&zero, RateAxis::H, RateQuantity::Estimator), vec![None]);
    }

    #[test]
    fn uniform_levels_quadruple_elements() {
        let p = catalog("hetero-interface").unwrap();
        let rs = run_uniform(&p, 1, 3, SolverKind::Direct).unwrap();
        assert_eq!(rs.len(), 3);
        for w in rs.windows(2) {
            assert_eq!(w[1].elements, 4 * w[0].elements);
            assert!(w[1].dofs_total > w[0].dofs_total);
            assert!((w[1].h_max - 0.5 * w[0].h_max).abs() < 1e-12);
        }
        for r in &rs {
            assert_eq!(r.dofs_total, r.dofs_trial + r.dofs_test);
            assert!(r.estimator >= 0.0);
            assert!(r.err_vh.unwrap() > 0.0);
        }
    }

    #[test]
    fn full_marking_matches_uniform_counts() {
        let p = catalog("lshape").unwrap();
        let opts = StudyOptions { levels: 5, theta: 1.0 - 1e-12, ..Default::default() };
        let adaptive = run_study(&p, &opts, |v| {
            assert_eq!(v.marked.len(), v.mesh.num_elements());
            Ok(())
        })
        .unwrap();
        let uniform = run_uniform(&p, 1, 3, SolverKind::Direct).unwrap();
        for (k, u) in uniform.iter().enumerate() {
            assert_eq!(adaptive[2 * k].elements, u.elements);
            assert_eq!(adaptive[2 * k].dofs_total, u.dofs_total);
        }
    }

    #[test]
    fn studies_are_reproducible() {
        let p = catalog("lshape").unwrap();
        let opts = StudyOptions { levels: 4, degree: 2, ..Default::default() };
        let a = run_study(&p, &opts, |_| Ok(())).unwrap();
        let b = run_study(&p, &opts, |_| Ok(())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.elements, x.dofs_total, x.marked), (y.elements, y.dofs_total, y.marked));
            assert!((x.estimator - y.estimator).abs() <= 1e-12 * x.estimator);
            assert!((x.err_vh.unwrap() - y.err_vh.unwrap()).abs() <= 1e-12 * x.err_vh.unwrap());
        }
    }

    #[test]
    fn lshape_refines_towards_corner() {
        let p = catalog("lshape").unwrap();
        let opts = StudyOptions { levels: 15, theta: 0.5, ..Default::default() };
        let mut hits = 0;
        let rs = run_study(&p, &opts, |v| {
            let corner = (0..v.mesh.num_elements())
                .filter(|&e| v.mesh.contains(e, [0.0, 0.0]))
                .any(|e| v.marked.binary_search(&e).is_ok());
            hits += corner as usize;
            Ok(())
        })
        .unwrap();
        assert_eq!(rs.len(), 15);
        assert!(hits as f64 >= 0.8 * rs.len() as f64, "corner marked on {hits} levels");
    }

    #[test]
    fn iterative_warm_start_and_direct_agree() {
        let p = catalog("hetero-interface").unwrap();
        let base = StudyOptions { levels: 3, degree: 2, ..Default::default() };
        let direct = run_study(&p, &base, |_| Ok(())).unwrap();
        let it = StudyOptions { solver: SolverKind::Iterative, ..base.clone() };
        let iterative = run_study(&p, &it, |_| Ok(())).unwrap();
        assert!(!iterative[0].warm_started && iterative[1].warm_started);
        for (d, i) in direct.iter().zip(&iterative) {
            assert_eq!(d.elements, i.elements);
            assert!((d.estimator - i.estimator).abs() < 1e-7 * d.estimator.max(1.0));
        }
    }

    #[test]
    fn failures_keep_partial_records() {
        let p = catalog("lshape").unwrap();
        let opts = StudyOptions { levels: 3, ..Default::default() };
        let err = run_study(&p, &opts, |v| if v.level == 1 { Err("disk full".into()) } else { Ok(()) }).unwrap_err();
        assert_eq!(err.level, 1);
        assert_eq!(err.records.len(), 1);
        assert!(matches!(err.source, AdaptError::Callback(_)));
        let bad = StudyOptions { theta: 1.5, ..Default::default() };
        assert!(matches!(run_study(&p, &bad, |_| Ok(())).unwrap_err().source, AdaptError::Estimate(_)));
    }
}
