//! Synthetic respondents with known preferences and ordered-probit noise,
//! response files in the export schema, and parameter-recovery experiments.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::catalog::Catalog;
use crate::estimation::{
    category_probabilities, delta_extended_gini, delta_nonparametric, delta_utilitarian, fit_batch, grid_to_betas,
    respondents_from_rows, EstimationError, FitOptions, FitResult, ModelKind, ModelParams, Optimizer, ProbitParams,
};
use crate::inequality::{classify_weighting, ClassCell, WeightingFunction};
use crate::survey::{
    create_session, write_responses_csv, write_sessions_csv, AgeGroup, Children, Choice, Education, EmploymentStatus,
    Gender, IncomeBracket, MaritalStatus, Occupation, PoliticalView, RespondentProfile, ResponseRow, SessionRow,
    Statement, StoreError, Voted,
};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid population spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parameter that is either fixed or drawn per respondent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Value(f64),
    Dist(ParamDist),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDist {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl ParamSpec {
    fn check(&self, name: &str) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::Spec(format!("{name}: {m}")));
        match *self {
            ParamSpec::Value(v) if !v.is_finite() => bad("must be finite"),
            ParamSpec::Dist(ParamDist::Uniform { low, high }) if !(low.is_finite() && high.is_finite() && low < high) => {
                bad("uniform needs finite low < high")
            }
            ParamSpec::Dist(ParamDist::Normal { mean, sd }) if !(mean.is_finite() && sd.is_finite() && sd > 0.0) => {
                bad("normal needs finite mean and sd > 0")
            }
            ParamSpec::Dist(ParamDist::LogNormal { mu, sigma })
                if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) =>
            {
                bad("lognormal needs finite mu and sigma > 0")
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ParamSpec::Value(v) => v,
            ParamSpec::Dist(ParamDist::Uniform { low, high }) => Uniform::new(low, high).expect("checked").sample(rng),
            ParamSpec::Dist(ParamDist::Normal { mean, sd }) => Normal::new(mean, sd).expect("checked").sample(rng),
            ParamSpec::Dist(ParamDist::LogNormal { mu, sigma }) => LogNormal::new(mu, sigma).expect("checked").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Utilitarian { epsilon: ParamSpec },
    ExtendedGini { eta: ParamSpec },
    /// Interior values `f(1/n) … f((n-1)/n)`.
    NonParametric { grid: Vec<f64> },
}

fn default_alpha() -> ParamSpec {
    ParamSpec::Value(1.0)
}

fn default_tau1() -> ParamSpec {
    ParamSpec::Value(-0.1)
}

fn default_tau2() -> ParamSpec {
    ParamSpec::Value(0.1)
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: usize,
    pub model: ModelSpec,
    #[serde(default = "default_alpha")]
    pub alpha: ParamSpec,
    #[serde(default = "default_tau1")]
    pub tau1: ParamSpec,
    #[serde(default = "default_tau2")]
    pub tau2: ParamSpec,
}

/// Population file read by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Test questions go through the probit too instead of always B.
    #[serde(default)]
    pub noise_on_tests: bool,
    pub groups: Vec<GroupSpec>,
}

impl PopulationSpec {
    pub fn single(count: usize, model: ModelSpec, seed: u64) -> Self {
        Self {
            seed,
            replicates: 1,
            noise_on_tests: false,
            groups: vec![GroupSpec {
                count,
                model,
                alpha: default_alpha(),
                tau1: default_tau1(),
                tau2: default_tau2(),
            }],
        }
    }

    pub fn size(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.replicates == 0 {
            return Err(SimulationError::Spec("replicates must be at least 1".into()));
        }
        for (i, g) in self.groups.iter().enumerate() {
            let at = |n: &str| format!("groups[{i}].{n}");
            g.alpha.check(&at("alpha"))?;
            g.tau1.check(&at("tau1"))?;
            g.tau2.check(&at("tau2"))?;
            match &g.model {
                ModelSpec::Utilitarian { epsilon } => epsilon.check(&at("epsilon"))?,
                ModelSpec::ExtendedGini { eta } => eta.check(&at("eta"))?,
                ModelSpec::NonParametric { grid } => {
                    WeightingFunction::grid(grid.clone())
                        .map_err(|e| SimulationError::Spec(format!("{}: {e}", at("grid"))))?;
                }
            }
        }
        Ok(())
    }
}

pub fn parse_population_spec(text: &str) -> Result<PopulationSpec, SimulationError> {
    let spec: PopulationSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRespondent {
    pub id: String,
    pub group: usize,
    pub params: ProbitParams,
    pub seed: u64,
}

impl SyntheticRespondent {
    /// Welfare difference `W(B) - W(A)` for one catalog question.
    pub fn delta(&self, catalog: &Catalog, question_id: &str) -> Result<f64, SimulationError> {
        let q = catalog
            .get(question_id)
            .ok_or_else(|| SimulationError::Spec(format!("unknown question {question_id}")))?;
        let (x, y, a) = (&q.distribution_b, &q.distribution_a, self.params.alpha);
        Ok(match &self.params.model {
            ModelParams::Utilitarian { epsilon } => delta_utilitarian(x, y, a, *epsilon)?,
            ModelParams::ExtendedGini { eta } => delta_extended_gini(x, y, a, *eta)?,
            ModelParams::NonParametric { grid } => delta_nonparametric(x, y, a, &grid_to_betas(grid))?,
        })
    }

    /// Class cell of the true weighting function, `None` for utilitarian.
    pub fn true_cell(&self, n: usize) -> Option<ClassCell> {
        self.params.model.weighting().map(|f| classify_weighting(&f, n).cell())
    }

    fn accepts(&self, statement: Statement) -> bool {
        match &self.params.model {
            ModelParams::Utilitarian { epsilon } => *epsilon < 1.0,
            m => {
                let c = classify_weighting(&m.weighting().expect("rank-dependent"), 5);
                match statement {
                    Statement::Pt => c.in_pt,
                    Statement::Ul => c.in_ul,
                    Statement::Ur => c.in_ur,
                    Statement::Url => c.in_url,
                    Statement::Clarity => true,
                }
            }
        }
    }
}

/// SplitMix64 finalizer, used to derive independent per-respondent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn respondent_seed(population_seed: u64, index: usize) -> u64 {
    mix(population_seed ^ mix(index as u64))
}

/// Draws the respondents of a population; parameters that violate the
/// probit constraints are redrawn.
pub fn sample_population(spec: &PopulationSpec) -> Result<Vec<SyntheticRespondent>, SimulationError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.size());
    for (gi, g) in spec.groups.iter().enumerate() {
        for _ in 0..g.count {
            let index = out.len();
            let seed = respondent_seed(spec.seed, index);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut params = None;
            for _ in 0..1000 {
                let model = match &g.model {
                    ModelSpec::Utilitarian { epsilon } => ModelParams::Utilitarian { epsilon: epsilon.draw(&mut rng) },
                    ModelSpec::ExtendedGini { eta } => ModelParams::ExtendedGini { eta: eta.draw(&mut rng) },
                    ModelSpec::NonParametric { grid } => ModelParams::NonParametric { grid: grid.clone() },
                };
                let p = ProbitParams {
                    alpha: g.alpha.draw(&mut rng),
                    model,
                    tau1: g.tau1.draw(&mut rng),
                    tau2: g.tau2.draw(&mut rng),
                };
                if p.validate().is_ok() {
                    params = Some(p);
                    break;
                }
            }
            let params = params.ok_or_else(|| {
                SimulationError::Spec(format!("groups[{gi}] rarely yields valid parameters"))
            })?;
            out.push(SyntheticRespondent {
                id: format!("sim{index:05}"),
                group: gi,
                params,
                seed,
            });
        }
    }
    Ok(out)
}

/// Probit draw: A below `tau1`, B above `tau2`, Equivalent in between.
pub fn draw_choice(delta: f64, tau1: f64, tau2: f64, rng: &mut impl Rng) -> Choice {
    let z: f64 = StandardNormal.sample(rng);
    let latent = delta + z;
    if latent < tau1 {
        Choice::A
    } else if latent > tau2 {
        Choice::B
    } else {
        Choice::Equivalent
    }
}

fn draw_category<T: Copy>(all: &[T], shares: &[f64], rng: &mut impl Rng) -> T {
    all[WeightedIndex::new(shares).expect("positive shares").sample(rng)]
}

/// Demographics drawn from the full-sample shares.
pub fn draw_profile(rng: &mut impl Rng) -> RespondentProfile {
    RespondentProfile {
        gender: draw_category(Gender::ALL, Gender::SHARES, rng),
        age: draw_category(AgeGroup::ALL, AgeGroup::SHARES, rng),
        children: draw_category(Children::ALL, Children::SHARES, rng),
        marital_status: draw_category(MaritalStatus::ALL, MaritalStatus::SHARES, rng),
        employment_status: draw_category(EmploymentStatus::ALL, EmploymentStatus::SHARES, rng),
        occupation: draw_category(Occupation::ALL, Occupation::SHARES, rng),
        education: draw_category(Education::ALL, Education::SHARES, rng),
        income_bracket: draw_category(IncomeBracket::ALL, IncomeBracket::SHARES, rng),
        voted: draw_category(Voted::ALL, Voted::SHARES, rng),
        political_view: draw_category(PoliticalView::ALL, PoliticalView::SHARES, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub responses: Vec<ResponseRow>,
    pub session: SessionRow,
}

/// Answers the 44 protocol questions in session order, each presented
/// `replicates` times. Text levels agree (4-5) with principles the true
/// weighting function satisfies and disagree (1-2) otherwise; clarity is
/// uniform on 1..=5.
pub fn simulate_responses(
    r: &SyntheticRespondent,
    catalog: &Catalog,
    replicates: usize,
    noise_on_tests: bool,
) -> Result<SimulatedSession, SimulationError> {
    if replicates == 0 {
        return Err(SimulationError::Spec("replicates must be at least 1".into()));
    }
    let layout = create_session(catalog, Some(r.seed), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    rng.set_stream(1);
    let (t1, t2) = (r.params.tau1, r.params.tau2);
    let mut responses = Vec::with_capacity(44 * replicates);
    let mut errors = 0;
    for (bi, block) in layout.block_order.iter().enumerate() {
        for id in &layout.question_order[bi] {
            let q = catalog.get(id).expect("session ids come from the catalog");
            let noisy = !q.label.is_test() || noise_on_tests;
            let delta = if noisy { r.delta(catalog, id)? } else { 0.0 };
            let mut last = Choice::B;
            for _ in 0..replicates {
                last = if noisy { draw_choice(delta, t1, t2, &mut rng) } else { Choice::B };
                responses.push(ResponseRow {
                    session_id: r.id.clone(),
                    block: *block,
                    question_id: id.clone(),
                    label: q.label,
                    choice: last,
                    revised: false,
                });
            }
            if q.label.is_test() && last != Choice::B {
                errors += 1;
            }
        }
    }
    let text = Statement::ALL.map(|s| {
        Some(match s {
            Statement::Clarity => rng.random_range(1..=5),
            s if r.accepts(s) => rng.random_range(4..=5),
            _ => rng.random_range(1..=2),
        })
    });
    let session = SessionRow {
        session_id: r.id.clone(),
        block_order: layout.block_order.to_vec(),
        profile: Some(draw_profile(&mut rng)),
        error_count: errors,
        text,
    };
    Ok(SimulatedSession { responses, session })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Simulation {
    pub respondents: Vec<SyntheticRespondent>,
    pub responses: Vec<ResponseRow>,
    pub sessions: Vec<SessionRow>,
}

impl Simulation {
    /// Writes `responses.csv`, `sessions.csv` and `truth.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SimulationError> {
        std::fs::create_dir_all(dir)?;
        write_responses_csv(&self.responses, std::fs::File::create(dir.join("responses.csv"))?)?;
        write_sessions_csv(&self.sessions, std::fs::File::create(dir.join("sessions.csv"))?)?;
        let truth = serde_json::to_string_pretty(&self.respondents)?;
        std::fs::write(dir.join("truth.json"), truth + "\n")?;
        Ok(())
    }
}

/// Samples a population and simulates every respondent.
pub fn simulate_population(spec: &PopulationSpec, catalog: &Catalog) -> Result<Simulation, SimulationError> {
    let respondents = sample_population(spec)?;
    let mut sim = Simulation::default();
    for r in &respondents {
        let s = simulate_responses(r, catalog, spec.replicates, spec.noise_on_tests)?;
        sim.responses.extend(s.responses);
        sim.sessions.push(s.session);
    }
    sim.respondents = respondents;
    Ok(sim)
}

/// Expected log-likelihood of one presentation of each question at the
/// true parameters, summed over the respondent's non-test questions.
pub fn expected_loglik(r: &SyntheticRespondent, catalog: &Catalog) -> Result<f64, SimulationError> {
    let mut total = 0.0;
    for q in catalog.transfer_questions() {
        let p = category_probabilities(r.delta(catalog, &q.id)?, r.params.tau1, r.params.tau2);
        total += p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub population: PopulationSpec,
    pub kinds: Vec<ModelKind>,
    pub optimizers: Vec<Optimizer>,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamError {
    pub name: String,
    pub count: usize,
    pub truth_mean: f64,
    pub estimate_median: f64,
    pub bias: f64,
    pub rmse: f64,
    pub median_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub model: ModelKind,
    pub optimizer: Optimizer,
    pub fitted: usize,
    pub converged: usize,
    pub params: Vec<ParamError>,
}

/// Rows are the true class cell, columns the cell of the estimated grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub optimizer: Optimizer,
    pub counts: [[usize; 6]; 6],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..6).all(|i| (0..6).all(|j| i == j || self.counts[i][j] == 0))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| true \\ estimated ({}) |", self.optimizer);
        for c in ClassCell::ALL {
            s.push_str(&format!(" {} |", c.name()));
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(6));
        s.push('\n');
        for c in ClassCell::ALL {
            s.push_str(&format!("| {} |", c.name()));
            for v in self.counts[c.index()] {
                s.push_str(&format!(" {v} |"));
            }
            s.push('\n');
        }
        s
    }
}

/// Cross-optimizer log-likelihood comparison for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoglikAgreement {
    pub model: ModelKind,
    pub compared: usize,
    pub max_abs_diff: f64,
    pub within_tolerance: usize,
}

pub const AGREEMENT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub respondents: usize,
    pub rows: Vec<RecoveryRow>,
    pub confusion: Vec<ConfusionMatrix>,
    pub agreement: Vec<LoglikAgreement>,
    #[serde(skip)]
    pub fits: Vec<FitResult>,
}

impl RecoveryReport {
    pub fn row(&self, model: ModelKind, optimizer: Optimizer) -> Option<&RecoveryRow> {
        self.rows.iter().find(|r| r.model == model && r.optimizer == optimizer)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### Parameter recovery ({} respondents)\n\n", self.respondents);
        s.push_str("| Model | Optimizer | Parameter | N | True mean | Median estimate | Bias | RMSE | Median abs. error |\n|---|---|---|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            for p in &r.params {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                    r.model, r.optimizer, p.name, p.count, p.truth_mean, p.estimate_median, p.bias, p.rmse, p.median_abs_error
                ));
            }
        }
        s.push_str("\n| Model | Optimizer | Fitted | Converged |\n|---|---|---:|---:|\n");
        for r in &self.rows {
            s.push_str(&format!("| {} | {} | {} | {} |\n", r.model, r.optimizer, r.fitted, r.converged));
        }
        for c in &self.confusion {
            s.push_str("\n### Class confusion\n\n");
            s.push_str(&c.to_markdown());
        }
        if !self.agreement.is_empty() {
            s.push_str("\n### BFGS versus SANN log-likelihood\n\n| Model | Compared | Max abs. difference | Within 1e-3 |\n|---|---:|---:|---:|\n");
            for a in &self.agreement {
                s.push_str(&format!("| {} | {} | {:.3e} | {} |\n", a.model, a.compared, a.max_abs_diff, a.within_tolerance));
            }
        }
        s
    }
}

fn param_error(name: &str, pairs: &[(f64, f64)]) -> ParamError {
    let m = pairs.len().max(1) as f64;
    let errs: Vec<f64> = pairs.iter().map(|(t, e)| e - t).collect();
    let mut abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut est: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    est.sort_by(f64::total_cmp);
    let med = |v: &[f64]| if v.is_empty() { f64::NAN } else { crate::estimation::quantile_sorted(v, 0.5) };
    ParamError {
        name: name.to_string(),
        count: pairs.len(),
        truth_mean: pairs.iter().map(|p| p.0).sum::<f64>() / m,
        estimate_median: med(&est),
        bias: errs.iter().sum::<f64>() / m,
        rmse: (errs.iter().map(|e| e * e).sum::<f64>() / m).sqrt(),
        median_abs_error: med(&abs),
    }
}

/// Truth expressed in the fitted model's parameters, when comparable.
fn truth_values(truth: &ModelParams, fitted: ModelKind, n: usize) -> Option<Vec<f64>> {
    match (truth, fitted) {
        (ModelParams::Utilitarian { epsilon }, ModelKind::Utilitarian) => Some(vec![*epsilon]),
        (ModelParams::ExtendedGini { eta }, ModelKind::ExtendedGini) => Some(vec![*eta]),
        (ModelParams::ExtendedGini { eta }, ModelKind::NonParametric) => {
            Some((1..n).map(|j| (j as f64 / n as f64).powf(*eta)).collect())
        }
        (ModelParams::NonParametric { grid }, ModelKind::NonParametric) => Some(grid.clone()),
        _ => None,
    }
}

/// Simulates the population, fits every respondent and compares the
/// estimates with the truth.
pub fn recovery_experiment(config: &RecoveryConfig, catalog: &Catalog) -> Result<RecoveryReport, SimulationError> {
    let sim = simulate_population(&config.population, catalog)?;
    let data = respondents_from_rows(catalog, &sim.responses)?;
    let fits = fit_batch(&data, &config.kinds, &config.optimizers, &config.options)?;
    let truth: BTreeMap<&str, &SyntheticRespondent> = sim.respondents.iter().map(|r| (r.id.as_str(), r)).collect();
    let n = crate::catalog::BlockId::Y1.initial_distribution().len();

    let mut rows = Vec::new();
    for &kind in &config.kinds {
        for &opt in &config.optimizers {
            let sub: Vec<&FitResult> = fits.iter().filter(|f| f.model() == kind && f.optimizer == opt).collect();
            let mut per_param: Vec<Vec<(f64, f64)>> = Vec::new();
            for f in sub.iter().filter(|f| f.converged) {
                let Some(t) = truth_values(&truth[f.session_id.as_str()].params.model, kind, n) else { continue };
                let est = f.params.model.values();
                per_param.resize(t.len(), Vec::new());
                for (j, (tv, ev)) in t.iter().zip(&est).enumerate() {
                    per_param[j].push((*tv, *ev));
                }
            }
            let names: Vec<String> = match kind {
                ModelKind::Utilitarian => vec!["epsilon".into()],
                ModelKind::ExtendedGini => vec!["eta".into()],
                ModelKind::NonParametric => (1..n).map(|j| format!("f({})", j as f64 / n as f64)).collect(),
            };
            rows.push(RecoveryRow {
                model: kind,
                optimizer: opt,
                fitted: sub.len(),
                converged: sub.iter().filter(|f| f.converged).count(),
                params: per_param.iter().zip(&names).map(|(p, name)| param_error(name, p)).collect(),
            });
        }
    }

    let mut confusion = Vec::new();
    if config.kinds.contains(&ModelKind::NonParametric) {
        for &opt in &config.optimizers {
            let mut counts = [[0usize; 6]; 6];
            for f in fits.iter().filter(|f| f.model() == ModelKind::NonParametric && f.optimizer == opt) {
                let (Some(t), Some(w)) = (truth[f.session_id.as_str()].true_cell(n), f.params.model.weighting()) else {
                    continue;
                };
                counts[t.index()][classify_weighting(&w, n).cell().index()] += 1;
            }
            confusion.push(ConfusionMatrix { optimizer: opt, counts });
        }
    }

    let mut agreement = Vec::new();
    if config.optimizers.contains(&Optimizer::Bfgs) && config.optimizers.contains(&Optimizer::Sann) {
        for &kind in &config.kinds {
            let mut diffs = Vec::new();
            let lookup = |opt| -> BTreeMap<&str, f64> {
                fits.iter()
                    .filter(|f| f.model() == kind && f.optimizer == opt && f.converged)
                    .map(|f| (f.session_id.as_str(), f.log_likelihood))
                    .collect()
            };
            let (b, s) = (lookup(Optimizer::Bfgs), lookup(Optimizer::Sann));
            for (id, lb) in &b {
                if let Some(ls) = s.get(id) {
                    diffs.push((lb - ls).abs());
                }
            }
            agreement.push(LoglikAgreement {
                model: kind,
                compared: diffs.len(),
                max_abs_diff: diffs.iter().cloned().fold(0.0, f64::max),
                within_tolerance: diffs.iter().filter(|&&d| d <= AGREEMENT_TOL).count(),
            });
        }
    }

    Ok(RecoveryReport {
        respondents: sim.respondents.len(),
        rows,
        confusion,
        agreement,
        fits,
    })
}
