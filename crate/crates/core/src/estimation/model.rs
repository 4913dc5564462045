//! Welfare differences, ordered-probit likelihood and its gradient in the
//! unconstrained parameterization.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::normal;
use super::EstimationError;
use crate::catalog::Catalog;
use crate::inequality::{IncomeDistribution, WeightingFunction};
use crate::survey::Choice;

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Utilitarian,
    ExtendedGini,
    NonParametric,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Utilitarian, ModelKind::ExtendedGini, ModelKind::NonParametric];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Utilitarian => "util",
            ModelKind::ExtendedGini => "egini",
            ModelKind::NonParametric => "nonparam",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EstimationError::Parse(format!("unknown model {s:?}")))
    }
}

/// Preference parameters of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Utilitarian { epsilon: f64 },
    ExtendedGini { eta: f64 },
    /// `grid[j-1] = f(j/n)` for `j = 1..n-1`.
    NonParametric { grid: Vec<f64> },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Utilitarian { .. } => ModelKind::Utilitarian,
            ModelParams::ExtendedGini { .. } => ModelKind::ExtendedGini,
            ModelParams::NonParametric { .. } => ModelKind::NonParametric,
        }
    }

    /// The parameter values written to fits files.
    pub fn values(&self) -> Vec<f64> {
        match self {
            ModelParams::Utilitarian { epsilon } => vec![*epsilon],
            ModelParams::ExtendedGini { eta } => vec![*eta],
            ModelParams::NonParametric { grid } => grid.clone(),
        }
    }

    pub fn from_values(kind: ModelKind, values: &[f64]) -> Result<Self, EstimationError> {
        match (kind, values) {
            (ModelKind::Utilitarian, [e]) => Ok(ModelParams::Utilitarian { epsilon: *e }),
            (ModelKind::ExtendedGini, [eta]) => Ok(ModelParams::ExtendedGini { eta: *eta }),
            (ModelKind::NonParametric, g) if !g.is_empty() => Ok(ModelParams::NonParametric { grid: g.to_vec() }),
            _ => Err(EstimationError::Parse(format!("{} values do not fit model {kind}", values.len()))),
        }
    }

    /// Weighting function implied by a rank-dependent model.
    pub fn weighting(&self) -> Option<WeightingFunction> {
        match self {
            ModelParams::NonParametric { grid } => WeightingFunction::grid(grid.clone()).ok(),
            ModelParams::ExtendedGini { eta } => WeightingFunction::power(*eta).ok(),
            ModelParams::Utilitarian { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitParams {
    pub alpha: f64,
    pub model: ModelParams,
    pub tau1: f64,
    pub tau2: f64,
}

impl ProbitParams {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(EstimationError::ConstraintViolation("alpha must be positive".into()));
        }
        if !(self.tau1 <= 0.0 && self.tau2 >= 0.0) {
            return Err(EstimationError::InvalidThresholds { tau1: self.tau1, tau2: self.tau2 });
        }
        match &self.model {
            ModelParams::ExtendedGini { eta } if eta.is_nan() || *eta <= 0.0 => {
                Err(EstimationError::ConstraintViolation("eta must be positive".into()))
            }
            ModelParams::NonParametric { grid } => check_grid(grid),
            _ => Ok(()),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), EstimationError> {
    let ok = grid.iter().all(|v| (0.0..=1.0).contains(v)) && grid.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(EstimationError::ConstraintViolation(
            "grid values must be non-decreasing within [0, 1]".into(),
        ))
    }
}

/// Rank weights `w_i = (n-i+1)/n`, `i = 1..n`.
pub fn rank_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|i| (n - i + 1) as f64 / n as f64).collect()
}

/// Converts a grid `f(j/n)`, `j = 1..n-1` into `β_i = f(w_i) - w_i`, `i = 2..n`.
pub fn grid_to_betas(grid: &[f64]) -> Vec<f64> {
    let n = grid.len() + 1;
    (2..=n)
        .map(|i| {
            let j = n - i + 1;
            grid[j - 1] - j as f64 / n as f64
        })
        .collect()
}

pub fn betas_to_grid(betas: &[f64]) -> Vec<f64> {
    let n = betas.len() + 1;
    (1..n).map(|j| betas[n - j - 1] + j as f64 / n as f64).collect()
}

/// One question prepared for estimation: `x` is the post-transfer
/// distribution (B), `y` the pre-transfer one (A).
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionDelta {
    pub question_id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `d_i = (x_i - x_{i-1}) - (y_i - y_{i-1})`, `x_0 = y_0 = 0`.
    pub d: Vec<f64>,
    ln_x: Vec<f64>,
    ln_y: Vec<f64>,
}

impl QuestionDelta {
    pub fn new(question_id: &str, x: &IncomeDistribution, y: &IncomeDistribution) -> Result<Self, EstimationError> {
        if x.len() != y.len() {
            return Err(EstimationError::DataMismatch("distributions differ in length".into()));
        }
        let (xs, ys) = (x.incomes(), y.incomes());
        let d = (0..xs.len())
            .map(|i| {
                let (px, py) = if i == 0 { (0.0, 0.0) } else { (xs[i - 1], ys[i - 1]) };
                (xs[i] - px) - (ys[i] - py)
            })
            .collect();
        Ok(Self {
            question_id: question_id.to_string(),
            x: xs.to_vec(),
            y: ys.to_vec(),
            d,
            ln_x: xs.iter().map(|v| v.ln()).collect(),
            ln_y: ys.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn has_nonpositive(&self) -> bool {
        self.x.iter().chain(&self.y).any(|&v| v <= 0.0)
    }

    /// Welfare difference divided by α.
    fn unit_delta(&self, model: &ModelParams) -> Result<f64, EstimationError> {
        match model {
            ModelParams::Utilitarian { epsilon } => {
                if self.has_nonpositive() {
                    return Err(EstimationError::NonPositiveIncome);
                }
                Ok(util_core(&self.ln_x, &self.ln_y, *epsilon).0)
            }
            ModelParams::ExtendedGini { eta } => Ok(gini_core(&self.d, *eta).0),
            ModelParams::NonParametric { grid } => {
                if grid.len() + 1 != self.len() {
                    return Err(EstimationError::DataMismatch("grid size does not match n".into()));
                }
                Ok(grid_to_betas(grid).iter().zip(&self.d[1..]).map(|(b, d)| b * d).sum())
            }
        }
    }
}

/// `(e^{εL} - 1)/ε` and its ε-derivative, with the ε → 0 limit.
fn power_term(eps: f64, l: f64) -> (f64, f64) {
    let z = eps * l;
    if z.abs() < 1e-4 {
        let (l2, l3, l4, l5) = (l * l, l * l * l, l * l * l * l, l * l * l * l * l);
        let h = l + eps * l2 / 2.0 + eps * eps * l3 / 6.0 + eps * eps * eps * l4 / 24.0;
        let dh = l2 / 2.0 + eps * l3 / 3.0 + eps * eps * l4 / 8.0 + eps * eps * eps * l5 / 30.0;
        (h, dh)
    } else {
        let em1 = z.exp_m1();
        let h = em1 / eps;
        let dh = (l * (em1 + 1.0) * eps - em1) / (eps * eps);
        (h, dh)
    }
}

/// `(1/n) Σ [u_ε(x_i) - u_ε(y_i)]` and its ε-derivative.
fn util_core(ln_x: &[f64], ln_y: &[f64], eps: f64) -> (f64, f64) {
    let n = ln_x.len() as f64;
    let (mut v, mut dv) = (0.0, 0.0);
    for (&a, &b) in ln_x.iter().zip(ln_y) {
        if a == b {
            continue;
        }
        let (ha, dha) = power_term(eps, a);
        let (hb, dhb) = power_term(eps, b);
        v += ha - hb;
        dv += dha - dhb;
    }
    (v / n, dv / n)
}

/// `Σ_{i≥2} (w_i^η - w_i) d_i` and its derivative with respect to `ln η`.
fn gini_core(d: &[f64], eta: f64) -> (f64, f64) {
    let n = d.len();
    let (mut v, mut dg) = (0.0, 0.0);
    for (i, &di) in d.iter().enumerate().skip(1) {
        if di == 0.0 {
            continue;
        }
        let w = (n - i) as f64 / n as f64;
        let lw = w.ln();
        let p = (eta * lw).exp();
        v += (p - w) * di;
        dg += p * lw * eta * di;
    }
    (v, dg)
}

fn check_alpha(alpha: f64) -> Result<(), EstimationError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(EstimationError::ConstraintViolation("alpha must be positive".into()))
    }
}

/// `(α/n) Σ [u_ε(x_i) - u_ε(y_i)]`.
pub fn delta_utilitarian(
    x: &IncomeDistribution,
    y: &IncomeDistribution,
    alpha: f64,
    epsilon: f64,
) -> Result<f64, EstimationError> {
    check_alpha(alpha)?;
    let q = QuestionDelta::new("", x, y)?;
    Ok(alpha * q.unit_delta(&ModelParams::Utilitarian { epsilon })?)
}

/// `α Σ_{i≥2} (w_i^η - w_i) d_i`.
pub fn delta_extended_gini(
    x: &IncomeDistribution,
    y: &IncomeDistribution,
    alpha: f64,
    eta: f64,
) -> Result<f64, EstimationError> {
    check_alpha(alpha)?;
    if eta.is_nan() || eta <= 0.0 {
        return Err(EstimationError::ConstraintViolation("eta must be positive".into()));
    }
    let q = QuestionDelta::new("", x, y)?;
    Ok(alpha * gini_core(&q.d, eta).0)
}

/// `α Σ_{i≥2} β_i d_i`, with `betas[k]` holding `β_{k+2}`.
pub fn delta_nonparametric(
    x: &IncomeDistribution,
    y: &IncomeDistribution,
    alpha: f64,
    betas: &[f64],
) -> Result<f64, EstimationError> {
    check_alpha(alpha)?;
    let q = QuestionDelta::new("", x, y)?;
    if betas.len() + 1 != q.len() {
        return Err(EstimationError::DataMismatch("need n-1 betas".into()));
    }
    check_grid(&betas_to_grid(betas))?;
    Ok(alpha * betas.iter().zip(&q.d[1..]).map(|(b, d)| b * d).sum::<f64>())
}

/// `[P(A), P(Equivalent), P(B)]` under the ordered probit.
pub fn category_probabilities(delta: f64, tau1: f64, tau2: f64) -> [f64; 3] {
    [
        normal::cdf(tau1 - delta),
        normal::interval(tau1 - delta, tau2 - delta),
        normal::sf(tau2 - delta),
    ]
}

/// Answers of one respondent aggregated as counts per question and
/// category (replicated presentations simply add up).
#[derive(Debug, Clone, PartialEq)]
pub struct RespondentData {
    pub session_id: String,
    pub questions: Vec<QuestionDelta>,
    /// Counts of `[A, Equivalent, B]` per question.
    pub counts: Vec<[f64; 3]>,
}

impl RespondentData {
    pub fn new(session_id: &str) -> Self {
        Self {
            session_id: session_id.to_string(),
            questions: Vec::new(),
            counts: Vec::new(),
        }
    }

    pub fn push(&mut self, q: QuestionDelta, choice: Choice) {
        self.push_count(q, choice, 1.0);
    }

    pub fn push_count(&mut self, q: QuestionDelta, choice: Choice, count: f64) {
        let k = match self.questions.iter().position(|e| e.question_id == q.question_id) {
            Some(k) => k,
            None => {
                self.questions.push(q);
                self.counts.push([0.0; 3]);
                self.questions.len() - 1
            }
        };
        self.counts[k][choice.category()] += count;
    }

    /// Builds the data from catalog question ids; test questions are skipped.
    pub fn from_answers<'a>(
        catalog: &Catalog,
        session_id: &str,
        answers: impl IntoIterator<Item = (&'a str, Choice)>,
    ) -> Result<Self, EstimationError> {
        let mut out = Self::new(session_id);
        for (id, choice) in answers {
            let q = catalog
                .get(id)
                .ok_or_else(|| EstimationError::DataMismatch(format!("unknown question {id}")))?;
            if q.label.is_test() {
                continue;
            }
            out.push(QuestionDelta::new(id, &q.distribution_b, &q.distribution_a)?, choice);
        }
        Ok(out)
    }

    pub fn n_obs(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn n_questions(&self) -> usize {
        self.questions.len()
    }

    /// Common distribution size `n`.
    pub fn size(&self) -> Option<usize> {
        self.questions.first().map(QuestionDelta::len)
    }

    /// All answers fall in one category.
    pub fn is_degenerate(&self) -> bool {
        let totals = (0..3).map(|c| self.counts.iter().map(|k| k[c]).sum::<f64>());
        totals.filter(|&t| t > 0.0).count() <= 1
    }
}

/// `Σ_q Σ_c n_qc ln P_c(Δ_q)`.
pub fn ordered_probit_loglik(params: &ProbitParams, data: &RespondentData) -> Result<f64, EstimationError> {
    if params.tau1 > params.tau2 {
        return Err(EstimationError::InvalidThresholds { tau1: params.tau1, tau2: params.tau2 });
    }
    let mut ll = 0.0;
    for (q, counts) in data.questions.iter().zip(&data.counts) {
        let delta = params.alpha * q.unit_delta(&params.model)?;
        let p = category_probabilities(delta, params.tau1, params.tau2);
        for c in 0..3 {
            if counts[c] > 0.0 {
                ll += counts[c] * p[c].max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(ll)
}

/// How α enters the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    Free,
    Fixed(f64),
}

impl AlphaMode {
    /// Free for the parametric models, fixed at 1 for the grid model, where
    /// α and the β scale trade off along a ridge.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::NonParametric => AlphaMode::Fixed(1.0),
            _ => AlphaMode::Free,
        }
    }
}

/// Negative log-likelihood over the unconstrained vector
/// `θ = [a?] ++ model ++ [s1, s2]` with `α = e^a`, `η = e^g`,
/// `τ1 = -e^{s1}`, `τ2 = e^{s2}` and grid values from a softmax cumulative
/// share of `n` logits.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub data: &'a RespondentData,
    pub kind: ModelKind,
    pub alpha_mode: AlphaMode,
    n: usize,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a RespondentData, kind: ModelKind, alpha_mode: AlphaMode) -> Result<Self, EstimationError> {
        let n = data.size().ok_or(EstimationError::NoData)?;
        if data.questions.iter().any(|q| q.len() != n) {
            return Err(EstimationError::DataMismatch("questions differ in size".into()));
        }
        if kind == ModelKind::Utilitarian && data.questions.iter().any(QuestionDelta::has_nonpositive) {
            return Err(EstimationError::NonPositiveIncome);
        }
        if let AlphaMode::Fixed(a) = alpha_mode {
            check_alpha(a)?;
        }
        Ok(Self { data, kind, alpha_mode, n })
    }

    fn alpha_offset(&self) -> usize {
        usize::from(self.alpha_mode == AlphaMode::Free)
    }

    fn model_dim(&self) -> usize {
        match self.kind {
            ModelKind::NonParametric => self.n,
            _ => 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha_offset() + self.model_dim() + 2
    }

    /// Starting point: α = 1, ε = 0.5, η = 2, f(t) = t², τ = (-0.1, 0.1).
    pub fn initial(&self) -> Vec<f64> {
        let mut th = Vec::with_capacity(self.dim());
        if self.alpha_mode == AlphaMode::Free {
            th.push(0.0);
        }
        match self.kind {
            ModelKind::Utilitarian => th.push(0.5),
            ModelKind::ExtendedGini => th.push(2f64.ln()),
            ModelKind::NonParametric => {
                let n2 = (self.n * self.n) as f64;
                th.extend((1..=self.n).map(|m| ((2 * m - 1) as f64 / n2).ln()));
            }
        }
        th.push(0.1f64.ln());
        th.push(0.1f64.ln());
        th
    }

    fn alpha(&self, theta: &[f64]) -> f64 {
        match self.alpha_mode {
            AlphaMode::Free => theta[0].exp(),
            AlphaMode::Fixed(a) => a,
        }
    }

    fn softmax(z: &[f64]) -> Vec<f64> {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    /// Maps θ to constrained parameters.
    pub fn params(&self, theta: &[f64]) -> ProbitParams {
        let o = self.alpha_offset();
        let md = &theta[o..o + self.model_dim()];
        let model = match self.kind {
            ModelKind::Utilitarian => ModelParams::Utilitarian { epsilon: md[0] },
            ModelKind::ExtendedGini => ModelParams::ExtendedGini { eta: md[0].exp() },
            ModelKind::NonParametric => {
                let p = Self::softmax(md);
                let mut acc = 0.0;
                let grid = p[..self.n - 1]
                    .iter()
                    .map(|v| {
                        acc += v;
                        acc.min(1.0)
                    })
                    .collect();
                ModelParams::NonParametric { grid }
            }
        };
        let k = theta.len();
        ProbitParams {
            alpha: self.alpha(theta),
            model,
            tau1: -theta[k - 2].exp(),
            tau2: theta[k - 1].exp(),
        }
    }

    /// Inverse of [`Self::params`] (α ignored when fixed); grid values must
    /// be strictly increasing inside (0, 1).
    pub fn theta(&self, p: &ProbitParams) -> Vec<f64> {
        let mut th = Vec::with_capacity(self.dim());
        if self.alpha_mode == AlphaMode::Free {
            th.push(p.alpha.ln());
        }
        match &p.model {
            ModelParams::Utilitarian { epsilon } => th.push(*epsilon),
            ModelParams::ExtendedGini { eta } => th.push(eta.ln()),
            ModelParams::NonParametric { grid } => {
                let mut prev = 0.0;
                for &g in grid.iter().chain(std::iter::once(&1.0)) {
                    th.push((g - prev).max(1e-300).ln());
                    prev = g;
                }
            }
        }
        th.push((-p.tau1).max(1e-300).ln());
        th.push(p.tau2.max(1e-300).ln());
        th
    }

    /// Negative log-likelihood; `+∞` where the model overflows.
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.eval(theta, None)
    }

    /// Negative log-likelihood and its gradient.
    pub fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(theta, Some(grad))
    }

    fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let o = self.alpha_offset();
        let k = theta.len();
        let alpha = self.alpha(theta);
        let (s1, s2) = (theta[k - 2], theta[k - 1]);
        let tau1 = -s1.exp();
        let tau2 = s2.exp();
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }

        let n = self.n;
        let (eps, eta) = match self.kind {
            ModelKind::Utilitarian => (theta[o], 0.0),
            ModelKind::ExtendedGini => (0.0, theta[o].exp()),
            ModelKind::NonParametric => (0.0, 0.0),
        };
        // Grid model: cumulative shares F_j and softmax probabilities p_m.
        let (p, cum) = if self.kind == ModelKind::NonParametric {
            let p = Self::softmax(&theta[o..o + n]);
            let mut acc = 0.0;
            let cum: Vec<f64> = p
                .iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect();
            (p, cum)
        } else {
            (Vec::new(), Vec::new())
        };

        let mut ll = 0.0;
        let (mut g_a, mut g_s1, mut g_s2) = (0.0, 0.0, 0.0);
        let mut g_model = vec![0.0; self.model_dim()];
        let mut e = vec![0.0; n];
        for (q, counts) in self.data.questions.iter().zip(&self.data.counts) {
            let (unit, d_unit) = match self.kind {
                ModelKind::Utilitarian => util_core(&q.ln_x, &q.ln_y, eps),
                ModelKind::ExtendedGini => gini_core(&q.d, eta),
                ModelKind::NonParametric => {
                    // e_j = d_{n-j+1}: coefficient of F_j.
                    let mut v = 0.0;
                    for j in 1..n {
                        e[j] = q.d[n - j];
                        v += (cum[j - 1] - j as f64 / n as f64) * e[j];
                    }
                    (v, 0.0)
                }
            };
            let delta = alpha * unit;
            if !delta.is_finite() {
                return f64::INFINITY;
            }
            let (x1, x2) = (tau1 - delta, tau2 - delta);
            let probs = category_probabilities(delta, tau1, tau2);
            let (f1, f2) = (normal::pdf(x1), normal::pdf(x2));
            let (mut dl_delta, mut dl_t1, mut dl_t2) = (0.0, 0.0, 0.0);
            for c in 0..3 {
                let cnt = counts[c];
                if cnt == 0.0 {
                    continue;
                }
                let pc = probs[c];
                ll += cnt * pc.max(PROB_FLOOR).ln();
                if grad.is_none() || pc <= PROB_FLOOR {
                    continue;
                }
                match c {
                    0 => {
                        dl_delta -= cnt * f1 / pc;
                        dl_t1 += cnt * f1 / pc;
                    }
                    1 => {
                        dl_delta += cnt * (f1 - f2) / pc;
                        dl_t1 -= cnt * f1 / pc;
                        dl_t2 += cnt * f2 / pc;
                    }
                    _ => {
                        dl_delta += cnt * f2 / pc;
                        dl_t2 -= cnt * f2 / pc;
                    }
                }
            }
            if grad.is_some() {
                g_a += dl_delta * delta;
                g_s1 += dl_t1 * tau1;
                g_s2 += dl_t2 * tau2;
                match self.kind {
                    ModelKind::NonParametric => {
                        // dΔ/dz_m = α Σ_j e_j (p_m 1{m≤j} - p_m F_j), 1-based m, j.
                        let se: f64 = (1..n).map(|j| e[j] * cum[j - 1]).sum();
                        let mut tail = 0.0;
                        let mut suffix = vec![0.0; n + 1];
                        for j in (1..n).rev() {
                            tail += e[j];
                            suffix[j] = tail;
                        }
                        for m in 1..=n {
                            let s = if m < n { suffix[m] } else { 0.0 };
                            g_model[m - 1] += dl_delta * alpha * p[m - 1] * (s - se);
                        }
                    }
                    _ => g_model[0] += dl_delta * alpha * d_unit,
                }
            }
        }
        if !ll.is_finite() {
            return f64::INFINITY;
        }
        if let Some(g) = grad {
            if o == 1 {
                g[0] = -g_a;
            }
            for (slot, v) in g[o..o + self.model_dim()].iter_mut().zip(&g_model) {
                *slot = -v;
            }
            g[k - 2] = -g_s1;
            g[k - 1] = -g_s2;
        }
        -ll
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> IncomeDistribution {
        IncomeDistribution::new(v.to_vec()).unwrap()
    }

    fn pair() -> (IncomeDistribution, IncomeDistribution) {
        (dist(&[3.0, 6.0, 10.0, 14.0, 17.0]), dist(&[2.0, 6.0, 10.0, 14.0, 18.0]))
    }

    #[test]
    fn gini_delta_example() {
        let (x, y) = pair();
        assert!((delta_extended_gini(&x, &y, 1.0, 2.0).unwrap() - 0.32).abs() < 1e-12);
        let betas: Vec<f64> = rank_weights(5)[1..].iter().map(|w| w * w - w).collect();
        assert!((delta_nonparametric(&x, &y, 1.0, &betas).unwrap() - 0.32).abs() < 1e-12);
    }

    #[test]
    fn log_utility_delta_example() {
        let (x, y) = pair();
        let want = (3f64.ln() - 2f64.ln() + 17f64.ln() - 18f64.ln()) / 5.0;
        let got = delta_utilitarian(&x, &y, 1.0, 0.0).unwrap();
        assert!((got - want).abs() < 1e-15 && got > 0.0);
        // The series branch agrees with the closed form near the switch point.
        let eps = 0.99e-4 / 18f64.ln();
        let closed = [3.0, 17.0, 2.0, 18.0].map(|v: f64| (v.powf(eps) - 1.0) / eps);
        let want = (closed[0] + closed[1] - closed[2] - closed[3]) / 5.0;
        assert!((delta_utilitarian(&x, &y, 1.0, eps).unwrap() - want).abs() < 1e-10);
        assert_eq!(
            delta_utilitarian(&dist(&[0.0, 1.0]), &dist(&[0.5, 0.5]), 1.0, 0.5),
            Err(EstimationError::NonPositiveIncome)
        );
    }

    #[test]
    fn probit_probabilities() {
        let mut data = RespondentData::new("s");
        let (x, y) = pair();
        let q = QuestionDelta::new("q", &x, &y).unwrap();
        data.push(q.clone(), Choice::A);
        let p = |t1, t2| ProbitParams { alpha: 1e-12, model: ModelParams::ExtendedGini { eta: 1.0 }, tau1: t1, tau2: t2 };
        assert!((ordered_probit_loglik(&p(0.0, 0.0), &data).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        let mut mid = RespondentData::new("s");
        mid.push(q, Choice::Equivalent);
        let ll = ordered_probit_loglik(&p(-1.0, 1.0), &mid).unwrap();
        assert!((ll - 0.682_689_492_137_085_9f64.ln()).abs() < 1e-12);
        let c = category_probabilities(0.4, -0.2, 0.3);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(ordered_probit_loglik(&p(1.0, -1.0), &mid).is_err());
    }

    fn sample_data() -> RespondentData {
        let cat = Catalog::standard();
        let answers: Vec<(&str, Choice)> = cat
            .questions()
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.as_str(), Choice::ALL[(i * 7) % 3]))
            .collect();
        RespondentData::from_answers(&cat, "s", answers).unwrap()
    }

    #[test]
    fn from_answers_skips_tests() {
        let d = sample_data();
        assert_eq!(d.n_questions(), 50);
        assert_eq!(d.n_obs(), 50.0);
        assert!(!d.is_degenerate());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = sample_data();
        for kind in ModelKind::ALL {
            for mode in [AlphaMode::Free, AlphaMode::Fixed(1.3)] {
                let obj = Objective::new(&data, kind, mode).unwrap();
                let mut th = obj.initial();
                for (i, v) in th.iter_mut().enumerate() {
                    *v += 0.1 * ((i as f64) * 1.7).sin();
                }
                let mut g = vec![0.0; th.len()];
                obj.value_grad(&th, &mut g);
                for i in 0..th.len() {
                    let h = 1e-6;
                    let (mut up, mut dn) = (th.clone(), th.clone());
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{kind} {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn theta_round_trips() {
        let data = sample_data();
        for kind in ModelKind::ALL {
            let obj = Objective::new(&data, kind, AlphaMode::Free).unwrap();
            let th = obj.initial();
            let p = obj.params(&th);
            p.validate().unwrap();
            let back = obj.theta(&p);
            for (a, b) in th.iter().zip(&back) {
                if kind == ModelKind::NonParametric {
                    continue;
                }
                assert!((a - b).abs() < 1e-12);
            }
            assert!((obj.params(&back).model.values()[0] - p.model.values()[0]).abs() < 1e-12);
            let ll = ordered_probit_loglik(&p, &data).unwrap();
            assert!((ll + obj.value(&th)).abs() < 1e-9);
        }
        let obj = Objective::new(&data, ModelKind::NonParametric, AlphaMode::Free).unwrap();
        assert_eq!(obj.params(&obj.initial()).model.values().len(), 4);
        let grid = obj.params(&obj.initial()).model.values();
        for (j, g) in grid.iter().enumerate() {
            let w = (j + 1) as f64 / 5.0;
            assert!((g - w * w).abs() < 1e-12);
        }
    }
}
