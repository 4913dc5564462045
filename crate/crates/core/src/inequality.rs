//! Income distributions, social welfare functions and the dominance
//! machinery built on top of them.
//!
//! Distributions are stored sorted in non-decreasing order. Rank `i`
//! (1-based) refers to the `i`-th poorest individual.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used by every class and dominance comparison.
pub const CLASS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InequalityError {
    #[error("a distribution needs at least two incomes, got {0}")]
    TooFewIncomes(usize),
    #[error("income {value} at position {index} is negative or not finite")]
    InvalidIncome { index: usize, value: f64 },
    #[error("income is zero and epsilon = {epsilon} requires strictly positive incomes")]
    NonPositiveIncome { epsilon: f64 },
    #[error("mean income must be positive")]
    NonPositiveMean,
    #[error("distributions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("distributions have different means ({0} vs {1})")]
    MeanMismatch(f64, f64),
    #[error("grid with {grid_points} interior points cannot be evaluated at population size {n}")]
    GridArityMismatch { grid_points: usize, n: usize },
    #[error("invalid weighting function: {0}")]
    InvalidWeighting(String),
    #[error("epsilon must be finite")]
    NonFiniteEpsilon,
}

pub type Result<T> = std::result::Result<T, InequalityError>;

/// A non-decreasingly ordered income vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IncomeDistribution {
    incomes: Vec<f64>,
    /// `permutation[i]` is the input position of the `i`-th sorted income.
    permutation: Vec<usize>,
}

impl IncomeDistribution {
    /// Builds a distribution from incomes in any order; they are sorted and
    /// the sorting permutation is kept.
    pub fn new(incomes: Vec<f64>) -> Result<Self> {
        if incomes.len() < 2 {
            return Err(InequalityError::TooFewIncomes(incomes.len()));
        }
        for (index, &value) in incomes.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(InequalityError::InvalidIncome { index, value });
            }
        }
        let mut permutation: Vec<usize> = (0..incomes.len()).collect();
        permutation.sort_by(|&a, &b| incomes[a].total_cmp(&incomes[b]).then(a.cmp(&b)));
        let sorted = permutation.iter().map(|&i| incomes[i]).collect();
        Ok(Self {
            incomes: sorted,
            permutation,
        })
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(self)
    }

    /// True when every income is strictly larger than its predecessor.
    pub fn is_strictly_increasing(&self) -> bool {
        self.incomes.windows(2).all(|w| w[0] < w[1])
    }

    /// Cumulative income shares `(1/n) Σ_{i≤h} x_i` for `h = 1..n`.
    pub fn generalized_lorenz(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.incomes
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc / n)
            })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for IncomeDistribution {
    type Error = InequalityError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<IncomeDistribution> for Vec<f64> {
    fn from(value: IncomeDistribution) -> Self {
        value.incomes
    }
}

/// Inequality-aversion parameter of the power utility `x^ε/ε` (log at 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParam {
    pub epsilon: f64,
}

impl UtilityParam {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(InequalityError::NonFiniteEpsilon);
        }
        Ok(Self { epsilon })
    }

    pub fn utility(&self, x: f64) -> f64 {
        if self.epsilon == 0.0 {
            x.ln()
        } else {
            x.powf(self.epsilon) / self.epsilon
        }
    }

    pub fn inverse_utility(&self, u: f64) -> f64 {
        if self.epsilon == 0.0 {
            u.exp()
        } else {
            (self.epsilon * u).powf(1.0 / self.epsilon)
        }
    }
}

/// Rank weighting function `f: [0,1] → [0,1]`, continuous and
/// non-decreasing with `f(0) = 0` and `f(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightingFunction {
    /// `f(t) = t^η`.
    Power { eta: f64 },
    /// Values at the interior abscissae `1/m, …, (m−1)/m` with
    /// `m = values.len() + 1`; linear interpolation in between.
    Grid { values: Vec<f64> },
}

impl WeightingFunction {
    pub fn power(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(InequalityError::InvalidWeighting(format!(
                "power exponent must be positive, got {eta}"
            )));
        }
        Ok(Self::Power { eta })
    }

    pub fn grid(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(InequalityError::InvalidWeighting(
                "grid needs at least one interior point".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InequalityError::InvalidWeighting("non-finite grid value".into()));
        }
        if values[0] < 0.0 || *values.last().unwrap() > 1.0 {
            return Err(InequalityError::InvalidWeighting(
                "grid values must lie in [0, 1]".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(InequalityError::InvalidWeighting(
                "grid values must be non-decreasing".into(),
            ));
        }
        Ok(Self::Grid { values })
    }

    /// Number of grid intervals (`m`), `None` for the power form.
    pub fn grid_intervals(&self) -> Option<usize> {
        match self {
            Self::Power { .. } => None,
            Self::Grid { values } => Some(values.len() + 1),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Self::Power { eta } => t.powf(*eta),
            Self::Grid { values } => {
                let m = values.len() + 1;
                let pos = t * m as f64;
                let k = (pos.floor() as usize).min(m - 1);
                let frac = pos - k as f64;
                let at = |j: usize| -> f64 {
                    if j == 0 {
                        0.0
                    } else if j >= m {
                        1.0
                    } else {
                        values[j - 1]
                    }
                };
                let lo = at(k);
                if frac == 0.0 {
                    lo
                } else {
                    lo + frac * (at(k + 1) - lo)
                }
            }
        }
    }

    /// Values at `0, 1/n, …, 1`, with the endpoints pinned to 0 and 1.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|j| match j {
                0 => 0.0,
                j if j == n => 1.0,
                j => self.eval(j as f64 / n as f64),
            })
            .collect()
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if let Self::Grid { values } = self {
            let m = values.len() + 1;
            if m % n != 0 {
                return Err(InequalityError::GridArityMismatch {
                    grid_points: values.len(),
                    n,
                });
            }
        }
        Ok(())
    }
}

/// Membership of a weighting function in the four nested transfer classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightingClassMembership {
    pub in_url: bool,
    pub in_ul: bool,
    pub in_ur: bool,
    pub in_pt: bool,
}

impl WeightingClassMembership {
    /// `in_pt ⟹ in_ur ∧ in_ul` and `in_ur ∨ in_ul ⟹ in_url`.
    pub fn is_nested(&self) -> bool {
        (!self.in_pt || (self.in_ur && self.in_ul)) && (!(self.in_ur || self.in_ul) || self.in_url)
    }

    /// Most specific cell of the class lattice, used for confusion matrices.
    pub fn cell(&self) -> ClassCell {
        match (self.in_url, self.in_ul, self.in_ur, self.in_pt) {
            (_, _, _, true) => ClassCell::Pt,
            (_, true, true, false) => ClassCell::UlAndUr,
            (_, true, false, _) => ClassCell::UlOnly,
            (_, false, true, _) => ClassCell::UrOnly,
            (true, false, false, _) => ClassCell::UrlOnly,
            (false, false, false, _) => ClassCell::None,
        }
    }
}

/// Partition of weighting functions induced by class membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassCell {
    Pt,
    UlAndUr,
    UlOnly,
    UrOnly,
    UrlOnly,
    None,
}

impl ClassCell {
    pub const ALL: [ClassCell; 6] = [
        ClassCell::Pt,
        ClassCell::UlAndUr,
        ClassCell::UlOnly,
        ClassCell::UrOnly,
        ClassCell::UrlOnly,
        ClassCell::None,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassCell::Pt => "PT",
            ClassCell::UlAndUr => "UL+UR",
            ClassCell::UlOnly => "UL",
            ClassCell::UrOnly => "UR",
            ClassCell::UrlOnly => "URL",
            ClassCell::None => "none",
        }
    }
}

/// Social welfare specification used by [`relative_index`].
#[derive(Debug, Clone, PartialEq)]
pub enum WelfareSpec {
    Utilitarian(UtilityParam),
    ExtendedGini(WeightingFunction),
}

pub fn mean(x: &IncomeDistribution) -> f64 {
    x.incomes.iter().sum::<f64>() / x.len() as f64
}

pub fn welfare_utilitarian(x: &IncomeDistribution, p: UtilityParam) -> Result<f64> {
    if p.epsilon <= 0.0 && x.incomes.iter().any(|&v| v <= 0.0) {
        return Err(InequalityError::NonPositiveIncome { epsilon: p.epsilon });
    }
    let total: f64 = x.incomes.iter().map(|&v| p.utility(v)).sum();
    Ok(total / x.len() as f64)
}

/// Rank-weighted welfare `Σ_i [f((n−i+1)/n) − f((n−i)/n)] x_i`.
pub fn welfare_extended_gini(x: &IncomeDistribution, f: &WeightingFunction) -> Result<f64> {
    let n = x.len();
    f.check_arity(n)?;
    let grid = f.sample(n);
    let weighted = x
        .incomes
        .iter()
        .enumerate()
        .map(|(i, &xi)| (grid[n - i] - grid[n - i - 1]) * xi)
        .sum::<f64>();
    debug_assert!({
        let inc = increments_form(&x.incomes, &grid);
        (inc - weighted).abs() <= 1e-12 * (1.0 + weighted.abs())
    });
    Ok(weighted)
}

/// The same welfare written on income increments:
/// `Σ_i f((n−i+1)/n) (x_i − x_{i−1})` with `x_0 = 0`.
pub fn welfare_extended_gini_increments(
    x: &IncomeDistribution,
    f: &WeightingFunction,
) -> Result<f64> {
    let n = x.len();
    f.check_arity(n)?;
    Ok(increments_form(&x.incomes, &f.sample(n)))
}

fn increments_form(incomes: &[f64], grid: &[f64]) -> f64 {
    let n = incomes.len();
    let mut prev = 0.0;
    let mut total = 0.0;
    for (i, &xi) in incomes.iter().enumerate() {
        total += grid[n - i] * (xi - prev);
        prev = xi;
    }
    total
}

/// Equally distributed equivalent income of `x` under `spec`.
pub fn equally_distributed_equivalent(x: &IncomeDistribution, spec: &WelfareSpec) -> Result<f64> {
    match spec {
        WelfareSpec::Utilitarian(p) => Ok(p.inverse_utility(welfare_utilitarian(x, *p)?)),
        WelfareSpec::ExtendedGini(f) => welfare_extended_gini(x, f),
    }
}

/// Relative inequality index `1 − Ξ(x)/μ(x)`.
pub fn relative_index(x: &IncomeDistribution, spec: &WelfareSpec) -> Result<f64> {
    let mu = mean(x);
    if mu <= 0.0 {
        return Err(InequalityError::NonPositiveMean);
    }
    Ok(1.0 - equally_distributed_equivalent(x, spec)? / mu)
}

/// Generalized Lorenz dominance of `x` over `y` at equal means.
pub fn lorenz_dominates(x: &IncomeDistribution, y: &IncomeDistribution) -> Result<bool> {
    if x.len() != y.len() {
        return Err(InequalityError::LengthMismatch(x.len(), y.len()));
    }
    let (mx, my) = (mean(x), mean(y));
    if (mx - my).abs() > CLASS_TOL {
        return Err(InequalityError::MeanMismatch(mx, my));
    }
    let lx = x.generalized_lorenz();
    let ly = y.generalized_lorenz();
    Ok(lx
        .iter()
        .zip(&ly)
        .take(x.len() - 1)
        .all(|(a, b)| *a >= *b - CLASS_TOL))
}

/// Class membership of `f` sampled on `{0, 1/n, …, 1}`.
pub fn classify_weighting(f: &WeightingFunction, n: usize) -> WeightingClassMembership {
    let n = n.max(1);
    let g = f.sample(n);
    let t: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();

    let in_url = g.iter().zip(&t).all(|(fv, tv)| *fv <= tv + CLASS_TOL);

    let non_decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] - CLASS_TOL);

    // Star-shaped at 0: f(t)/t non-decreasing.
    let ratios_right: Vec<f64> = (1..=n).map(|j| g[j] / t[j]).collect();
    // Star-shaped at 1: (1 − f(t))/(1 − t) non-decreasing.
    let ratios_left: Vec<f64> = (0..n).map(|j| (1.0 - g[j]) / (1.0 - t[j])).collect();
    let slopes: Vec<f64> = (0..n).map(|j| (g[j + 1] - g[j]) * n as f64).collect();

    WeightingClassMembership {
        in_url,
        in_ul: non_decreasing(&ratios_left),
        in_ur: non_decreasing(&ratios_right),
        in_pt: non_decreasing(&slopes),
    }
}
