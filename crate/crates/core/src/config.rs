//! JSON run configuration shared by the command-line tool and the demo.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{RefinementMode, SolverKind, StudyOptions};
use crate::estimate::MarkingSum;
use crate::problem::{catalog, CustomProblem, ProblemError, ProblemSpec};
use crate::solver::IterativeOptions;
use crate::spaces::MAX_DEGREE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// Catalog name, inline custom problem, or a path to a custom problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSelector {
    Catalog(String),
    Custom {
        custom: CustomProblem,
    },
    File {
        file: PathBuf,
    },
}

impl Default for ProblemSelector {
    fn default() -> Self {
        ProblemSelector::Catalog("lshape".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub direct_tol: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub restart: usize,
    pub augment: usize,
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let it = IterativeOptions::default();
        let study = StudyOptions::default();
        SolverConfig {
            kind: SolverKind::Direct,
            direct_tol: study.direct_tol,
            outer_tol: it.outer_tol,
            max_outer: it.max_outer,
            inner_tol: it.inner_tol,
            max_inner: it.max_inner,
            restart: it.restart,
            augment: it.augment,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSelector,
    pub degree: usize,
    pub mode: RefinementMode,
    pub levels: usize,
    pub theta: f64,
    pub marking: MarkingSum,
    /// Initial structured subdivisions; the problem default when absent.
    pub resolution: Option<usize>,
    pub estimator_threshold: Option<f64>,
    pub max_dofs: Option<usize>,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub vtk: bool,
    /// Write G, B and the load of every level in Matrix Market format.
    pub dump_matrices: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemSelector::default(),
            degree: 1,
            mode: RefinementMode::Adaptive,
            levels: 5,
            theta: 0.5,
            marking: MarkingSum::Plain,
            resolution: None,
            estimator_threshold: None,
            max_dofs: None,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("resmin-out"),
            vtk: false,
            dump_matrices: false,
        }
    }
}

impl RunConfig {
    /// Parses and validates. Relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        if let Some(base) = base {
            if cfg.output_dir.is_relative() {
                cfg.output_dir = base.join(&cfg.output_dir);
            }
            if let ProblemSelector::File { file } = &mut cfg.problem {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_json(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, message: String| Err(ConfigError::Invalid { field, message });
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            return invalid("degree", format!("{} is outside 1..={MAX_DEGREE}", self.degree));
        }
        if self.levels == 0 {
            return invalid("levels", "must be at least 1".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return invalid("theta", format!("{} is outside the open interval (0, 1)", self.theta));
        }
        if self.resolution == Some(0) {
            return invalid("resolution", "must be positive".into());
        }
        if let Some(t) = self.estimator_threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return invalid("estimator_threshold", format!("{t} is not a finite nonnegative number"));
            }
        }
        let s = &self.solver;
        for (field, v) in [
            ("solver.direct_tol", s.direct_tol),
            ("solver.outer_tol", s.outer_tol),
            ("solver.inner_tol", s.inner_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return invalid(field, format!("{v} is outside (0, 1)"));
            }
        }
        for (field, v) in [
            ("solver.max_outer", s.max_outer),
            ("solver.max_inner", s.max_inner),
            ("solver.restart", s.restart),
        ] {
            if v == 0 {
                return invalid(field, "must be at least 1".into());
            }
        }
        if let ProblemSelector::Catalog(name) = &self.problem {
            if catalog(name).is_err() {
                return invalid("problem", format!("unknown catalog problem `{name}`"));
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        match &self.problem {
            ProblemSelector::Catalog(name) => Ok(catalog(name)?),
            ProblemSelector::Custom { custom } => Ok(custom.build()?),
            ProblemSelector::File { file } => {
                let text = std::fs::read_to_string(file).map_err(|source| ConfigError::Read { path: file.clone(), source })?;
                let custom: CustomProblem = serde_json::from_str(&text)?;
                Ok(custom.build()?)
            }
        }
    }

    pub fn study_options(&self) -> StudyOptions {
        let s = &self.solver;
        StudyOptions {
            degree: self.degree,
            levels: self.levels,
            mode: self.mode,
            theta: self.theta,
            marking: self.marking,
            solver: s.kind,
            iterative: IterativeOptions {
                outer_tol: s.outer_tol,
                max_outer: s.max_outer,
                inner_tol: s.inner_tol,
                max_inner: s.max_inner,
                restart: s.restart,
                augment: s.augment,
            },
            warm_start: s.warm_start,
            direct_tol: s.direct_tol,
            initial_resolution: self.resolution,
            estimator_threshold: self.estimator_threshold,
            max_dofs: self.max_dofs,
        }
    }
}
