//! Per-respondent ordered-probit estimation of utilitarian, extended-Gini
//! and grid weighting-function models.

mod model;
pub mod normal;
mod optim;
mod summary;

pub use model::*;
pub use optim::*;
pub use summary::*;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::catalog::Catalog;
use crate::survey::ResponseRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("incomes must be positive for the utilitarian model")]
    NonPositiveIncome,
    #[error("thresholds must satisfy tau1 <= 0 <= tau2, got ({tau1}, {tau2})")]
    InvalidThresholds { tau1: f64, tau2: f64 },
    #[error("parameter constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("data mismatch: {0}")]
    DataMismatch(String),
    #[error("respondent has no usable answers")]
    NoData,
    #[error("fit is not parametric")]
    NotParametric,
    #[error("all values are identical; density is a point mass at {0}")]
    ZeroBandwidth(f64),
    #[error("need at least {0} values")]
    TooFewValues(usize),
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Optimizer {
    #[serde(rename = "SANN")]
    Sann,
    #[serde(rename = "BFGS")]
    Bfgs,
}

impl Optimizer {
    pub const ALL: [Optimizer; 2] = [Optimizer::Sann, Optimizer::Bfgs];

    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sann => "SANN",
            Optimizer::Bfgs => "BFGS",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Optimizer {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SANN" => Ok(Optimizer::Sann),
            "BFGS" => Ok(Optimizer::Bfgs),
            _ => Err(EstimationError::Parse(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `None` selects [`AlphaMode::default_for`] the model.
    pub alpha_mode: Option<AlphaMode>,
    pub bfgs: BfgsConfig,
    pub sann: SannConfig,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            alpha_mode: None,
            bfgs: BfgsConfig::default(),
            sann: SannConfig::default(),
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub session_id: String,
    pub optimizer: Optimizer,
    pub params: ProbitParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn model(&self) -> ModelKind {
        self.params.model.kind()
    }
}

/// Maximum-likelihood fit of one model to one respondent.
pub fn fit_mle(
    kind: ModelKind,
    data: &RespondentData,
    optimizer: Optimizer,
    options: &FitOptions,
) -> Result<FitResult, EstimationError> {
    let mode = options.alpha_mode.unwrap_or_else(|| AlphaMode::default_for(kind));
    let obj = Objective::new(data, kind, mode)?;
    let x0 = obj.initial();
    let m = match optimizer {
        Optimizer::Bfgs => bfgs(|x, g| obj.value_grad(x, g), &x0, &options.bfgs),
        Optimizer::Sann => sann(|x| obj.value(x), &x0, &options.sann, options.seed),
    };
    Ok(FitResult {
        session_id: data.session_id.clone(),
        optimizer,
        params: obj.params(&m.x),
        log_likelihood: -m.value,
        converged: m.converged && m.value.is_finite(),
        iterations: m.iterations,
    })
}

/// Groups exported response rows into one data set per session, in order
/// of first appearance; repeated rows for a question add to its counts.
pub fn respondents_from_rows(catalog: &Catalog, rows: &[ResponseRow]) -> Result<Vec<RespondentData>, EstimationError> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<RespondentData> = Vec::new();
    for r in rows {
        let q = catalog
            .get(&r.question_id)
            .ok_or_else(|| EstimationError::DataMismatch(format!("unknown question {}", r.question_id)))?;
        if q.label.is_test() {
            continue;
        }
        let k = *index.entry(r.session_id.as_str()).or_insert_with(|| {
            out.push(RespondentData::new(&r.session_id));
            out.len() - 1
        });
        out[k].push(QuestionDelta::new(&q.id, &q.distribution_b, &q.distribution_a)?, r.choice);
    }
    Ok(out)
}

/// Fits every requested model and optimizer to every respondent, spreading
/// respondents over the available cores. Output order is respondent, then
/// model, then optimizer, independent of scheduling.
pub fn fit_batch(
    data: &[RespondentData],
    kinds: &[ModelKind],
    optimizers: &[Optimizer],
    options: &FitOptions,
) -> Result<Vec<FitResult>, EstimationError> {
    let fit_one = |d: &RespondentData| -> Result<Vec<FitResult>, EstimationError> {
        let mut v = Vec::with_capacity(kinds.len() * optimizers.len());
        for &k in kinds {
            for &o in optimizers {
                v.push(fit_mle(k, d, o, options)?);
            }
        }
        Ok(v)
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(data.len().max(1));
    let chunk = data.len().div_ceil(threads).max(1);
    let parts: Vec<Result<Vec<FitResult>, EstimationError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = data
            .chunks(chunk)
            .map(|c| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for d in c {
                        out.extend(fit_one(d)?);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fit thread panicked")).collect()
    });
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Tolerance around 1 within which a power parameter counts as linear.
pub const SHAPE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Concave,
    Linear,
    Convex,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Concave, Shape::Linear, Shape::Convex];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Concave => "concave",
            Shape::Linear => "linear",
            Shape::Convex => "convex",
        }
    }
}

/// Curvature of `u_ε` or `f_η` implied by a parametric fit.
pub fn classify_shape(params: &ModelParams) -> Result<Shape, EstimationError> {
    let v = match params {
        ModelParams::Utilitarian { epsilon } => *epsilon,
        ModelParams::ExtendedGini { eta } => *eta,
        ModelParams::NonParametric { .. } => return Err(EstimationError::NotParametric),
    };
    Ok(if v < 1.0 - SHAPE_TOL {
        Shape::Concave
    } else if v > 1.0 + SHAPE_TOL {
        Shape::Convex
    } else {
        Shape::Linear
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AicWinner {
    Utilitarian,
    ExtendedGini,
    Tie,
}

/// Number of estimated parameters counted by [`aic`] for both parametric models.
pub const PARAMETRIC_K: usize = 4;

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// Lower AIC wins; ties within 1e-9.
pub fn aic_compare(fit_u: &FitResult, fit_g: &FitResult) -> Result<AicWinner, EstimationError> {
    if fit_u.session_id != fit_g.session_id {
        return Err(EstimationError::DataMismatch("fits come from different respondents".into()));
    }
    if fit_u.model() != ModelKind::Utilitarian || fit_g.model() != ModelKind::ExtendedGini {
        return Err(EstimationError::DataMismatch("expected a utilitarian and an extended-Gini fit".into()));
    }
    Ok(aic_winner(fit_u.log_likelihood, fit_g.log_likelihood))
}

pub fn aic_winner(loglik_u: f64, loglik_g: f64) -> AicWinner {
    let (a, b) = (aic(loglik_u, PARAMETRIC_K), aic(loglik_g, PARAMETRIC_K));
    if (a - b).abs() <= 1e-9 {
        AicWinner::Tie
    } else if a < b {
        AicWinner::Utilitarian
    } else {
        AicWinner::ExtendedGini
    }
}
