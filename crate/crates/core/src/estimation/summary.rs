//! Population summaries, median weighting profile, kernel densities, the
//! fits file and the estimation report.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{
    aic_winner, classify_shape, AicWinner, EstimationError, FitResult, ModelKind, ModelParams, Optimizer,
    ProbitParams, Shape,
};
use crate::inequality::{classify_weighting, WeightingClassMembership, WeightingFunction};

/// Linear-interpolation quantile of sorted data (`p` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation (denominator `n`).
    pub sd: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Gini benchmark minus median: `2 - median(η)` or `w² - median f(w)`.
    pub gini_gap: Option<f64>,
}

pub fn describe(name: &str, values: &[f64], gini: Option<f64>) -> Result<ParameterSummary, EstimationError> {
    if values.is_empty() {
        return Err(EstimationError::TooFewValues(1));
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    Ok(ParameterSummary {
        name: name.to_string(),
        count: values.len(),
        mean,
        sd,
        median,
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        gini_gap: gini.map(|g| g - median),
    })
}

fn converged_of(fits: &[FitResult], kind: ModelKind) -> Vec<&FitResult> {
    fits.iter().filter(|f| f.converged && f.model() == kind).collect()
}

/// Summary per model parameter over converged fits of a single model.
pub fn population_summary(fits: &[FitResult]) -> Result<Vec<ParameterSummary>, EstimationError> {
    let kind = fits.first().ok_or(EstimationError::NoData)?.model();
    if fits.iter().any(|f| f.model() != kind) {
        return Err(EstimationError::DataMismatch("fits mix several models".into()));
    }
    let used = converged_of(fits, kind);
    if used.is_empty() {
        return Err(EstimationError::NoData);
    }
    match kind {
        ModelKind::Utilitarian | ModelKind::ExtendedGini => {
            let vals: Vec<f64> = used.iter().map(|f| f.params.model.values()[0]).collect();
            let (name, gini) = if kind == ModelKind::Utilitarian { ("epsilon", None) } else { ("eta", Some(2.0)) };
            Ok(vec![describe(name, &vals, gini)?])
        }
        ModelKind::NonParametric => {
            let k = used[0].params.model.values().len();
            let n = k + 1;
            (0..k)
                .map(|j| {
                    let w = (j + 1) as f64 / n as f64;
                    let vals: Vec<f64> = used.iter().map(|f| f.params.model.values()[j]).collect();
                    if vals.len() != used.len() || used.iter().any(|f| f.params.model.values().len() != k) {
                        return Err(EstimationError::DataMismatch("grid sizes differ".into()));
                    }
                    describe(&format!("f({w})"), &vals, Some(w * w))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianProfile {
    /// Interior grid points `j/n`.
    pub points: Vec<f64>,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
    pub membership: WeightingClassMembership,
}

impl MedianProfile {
    /// CSV for plotting: `t,median,q1,q3,gini` including the end points.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,median,q1,q3,gini\n");
        let _ = writeln!(s, "0,0,0,0,0");
        for i in 0..self.points.len() {
            let t = self.points[i];
            let _ = writeln!(s, "{t},{},{},{},{}", self.median[i], self.q1[i], self.q3[i], t * t);
        }
        let _ = writeln!(s, "1,1,1,1,1");
        s
    }
}

/// Point-wise medians (and quartiles) of the grid estimates, classified as
/// a weighting function.
pub fn median_weighting_profile(fits: &[FitResult]) -> Result<MedianProfile, EstimationError> {
    let grids: Vec<&Vec<f64>> = fits
        .iter()
        .filter(|f| f.converged)
        .filter_map(|f| match &f.params.model {
            ModelParams::NonParametric { grid } => Some(grid),
            _ => None,
        })
        .collect();
    let k = grids.first().ok_or(EstimationError::NoData)?.len();
    if grids.iter().any(|g| g.len() != k) {
        return Err(EstimationError::DataMismatch("grid sizes differ".into()));
    }
    let n = k + 1;
    let mut median = Vec::with_capacity(k);
    let mut q1 = Vec::with_capacity(k);
    let mut q3 = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<f64> = grids.iter().map(|g| g[j]).collect();
        v.sort_by(f64::total_cmp);
        median.push(quantile_sorted(&v, 0.5));
        q1.push(quantile_sorted(&v, 0.25));
        q3.push(quantile_sorted(&v, 0.75));
    }
    Ok(MedianProfile {
        points: (1..n).map(|j| j as f64 / n as f64).collect(),
        membership: grid_membership(&median)?,
        median,
        q1,
        q3,
    })
}

/// Class membership of interior grid values `f(1/n) … f((n-1)/n)`.
pub fn grid_membership(interior: &[f64]) -> Result<WeightingClassMembership, EstimationError> {
    let f = WeightingFunction::grid(interior.to_vec()).map_err(|e| EstimationError::ConstraintViolation(e.to_string()))?;
    Ok(classify_weighting(&f, interior.len() + 1))
}

/// Silverman's rule `0.9·min(SD, IQR/1.34)·m^(-1/5)` with the sample SD.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64, EstimationError> {
    let m = values.len();
    if m < 2 {
        return Err(EstimationError::TooFewValues(2));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (m as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(EstimationError::ZeroBandwidth(sorted[0]))
    }
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kernel_density(values: &[f64], grid: &[f64]) -> Result<Vec<f64>, EstimationError> {
    let h = silverman_bandwidth(values)?;
    let m = values.len() as f64;
    Ok(grid
        .iter()
        .map(|&t| values.iter().map(|&v| super::normal::pdf((t - v) / h)).sum::<f64>() / (m * h))
        .collect())
}

pub const FITS_HEADER: [&str; 9] = [
    "session_id", "model", "optimizer", "alpha", "params", "tau1", "tau2", "loglik", "converged",
];

pub fn write_fits_csv<W: Write>(fits: &[FitResult], out: W) -> Result<(), EstimationError> {
    let io = |e: csv::Error| EstimationError::Parse(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FITS_HEADER).map_err(io)?;
    for f in fits {
        let params = f.params.model.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            f.session_id.clone(),
            f.model().as_str().to_string(),
            f.optimizer.as_str().to_string(),
            f.params.alpha.to_string(),
            params,
            f.params.tau1.to_string(),
            f.params.tau2.to_string(),
            f.log_likelihood.to_string(),
            f.converged.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| EstimationError::Parse(e.to_string()))
}

pub fn parse_fits_csv<R: Read>(input: R) -> Result<Vec<FitResult>, EstimationError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| EstimationError::Parse(e.to_string()))?;
    if headers.iter().ne(FITS_HEADER) {
        return Err(EstimationError::Parse(format!("expected header {}", FITS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EstimationError::Parse(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: &str| EstimationError::Parse(format!("line {line}: {m}"));
        if rec.len() != FITS_HEADER.len() {
            return Err(err("wrong number of fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
        let kind: ModelKind = rec[1].parse()?;
        let values = rec[4].split(';').map(num).collect::<Result<Vec<_>, _>>()?;
        let params = ProbitParams {
            alpha: num(&rec[3])?,
            model: ModelParams::from_values(kind, &values)?,
            tau1: num(&rec[5])?,
            tau2: num(&rec[6])?,
        };
        params.validate().map_err(|e| err(&e.to_string()))?;
        out.push(FitResult {
            session_id: rec[0].to_string(),
            optimizer: rec[2].parse()?,
            params,
            log_likelihood: num(&rec[7])?,
            converged: match &rec[8] {
                "true" => true,
                "false" => false,
                _ => return Err(err("converged must be true or false")),
            },
            iterations: 0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassShares {
    pub count: usize,
    pub url: f64,
    pub ul: f64,
    pub ur: f64,
    pub pt: f64,
}

impl ClassShares {
    /// `(URL−UL, UL−PT, URL−UR, UR−PT, PT)` in percentage points.
    pub fn marginal_gains(&self) -> [f64; 5] {
        [self.url - self.ul, self.ul - self.pt, self.url - self.ur, self.ur - self.pt, self.pt]
    }
}

/// Percentage of converged grid fits in each weighting class.
pub fn class_shares(fits: &[FitResult]) -> ClassShares {
    let members: Vec<WeightingClassMembership> = fits
        .iter()
        .filter(|f| f.converged)
        .filter_map(|f| match &f.params.model {
            ModelParams::NonParametric { grid } => grid_membership(grid).ok(),
            _ => None,
        })
        .collect();
    let m = members.len();
    if m == 0 {
        return ClassShares::default();
    }
    let pct = |p: fn(&WeightingClassMembership) -> bool| 100.0 * members.iter().filter(|c| p(c)).count() as f64 / m as f64;
    ClassShares {
        count: m,
        url: pct(|c| c.in_url),
        ul: pct(|c| c.in_ul),
        ur: pct(|c| c.in_ur),
        pt: pct(|c| c.in_pt),
    }
}

/// Percentage of converged fits per shape.
pub fn shape_shares(fits: &[FitResult]) -> BTreeMap<Shape, f64> {
    let shapes: Vec<Shape> = fits
        .iter()
        .filter(|f| f.converged)
        .filter_map(|f| classify_shape(&f.params.model).ok())
        .collect();
    let mut out = BTreeMap::new();
    for s in Shape::ALL {
        let c = shapes.iter().filter(|&&x| x == s).count();
        out.insert(s, if shapes.is_empty() { 0.0 } else { 100.0 * c as f64 / shapes.len() as f64 });
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AicShares {
    pub compared: usize,
    pub utilitarian: f64,
    pub extended_gini: f64,
    pub tie: f64,
}

/// Pairs utilitarian and extended-Gini fits per respondent for one
/// optimizer; pairs where either fit failed to converge are skipped.
pub fn aic_shares(fits: &[FitResult], optimizer: Optimizer) -> AicShares {
    let mut pairs: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for f in fits.iter().filter(|f| f.optimizer == optimizer && f.converged) {
        let e = pairs.entry(f.session_id.as_str()).or_default();
        match f.model() {
            ModelKind::Utilitarian => e.0 = Some(f.log_likelihood),
            ModelKind::ExtendedGini => e.1 = Some(f.log_likelihood),
            ModelKind::NonParametric => {}
        }
    }
    let winners: Vec<AicWinner> = pairs
        .values()
        .filter_map(|&(u, g)| Some(aic_winner(u?, g?)))
        .collect();
    let m = winners.len();
    if m == 0 {
        return AicShares::default();
    }
    let pct = |w: AicWinner| 100.0 * winners.iter().filter(|&&x| x == w).count() as f64 / m as f64;
    AicShares {
        compared: m,
        utilitarian: pct(AicWinner::Utilitarian),
        extended_gini: pct(AicWinner::ExtendedGini),
        tie: pct(AicWinner::Tie),
    }
}

fn of(fits: &[FitResult], kind: ModelKind, opt: Optimizer) -> Vec<FitResult> {
    fits.iter().filter(|f| f.model() == kind && f.optimizer == opt).cloned().collect()
}

fn convergence_rate(fits: &[FitResult]) -> f64 {
    if fits.is_empty() {
        return 0.0;
    }
    100.0 * fits.iter().filter(|f| f.converged).count() as f64 / fits.len() as f64
}

/// Markdown report over a fits file: shapes, parameter summaries, AIC
/// shares, class shares with marginal gains, and the median profile.
pub fn report_markdown(fits: &[FitResult]) -> String {
    let mut s = String::new();
    let opts: Vec<Optimizer> = Optimizer::ALL
        .into_iter()
        .filter(|o| fits.iter().any(|f| f.optimizer == *o))
        .collect();

    s.push_str("### Shapes of u and f\n\n| Model | Optimizer | Concave | Linear | Convex | Converged |\n|---|---|---:|---:|---:|---:|\n");
    for kind in [ModelKind::Utilitarian, ModelKind::ExtendedGini] {
        for &o in &opts {
            let sub = of(fits, kind, o);
            if sub.is_empty() {
                continue;
            }
            let sh = shape_shares(&sub);
            let _ = writeln!(
                s,
                "| {kind} | {o} | {:.2}% | {:.2}% | {:.2}% | {:.2}% |",
                sh[&Shape::Concave],
                sh[&Shape::Linear],
                sh[&Shape::Convex],
                convergence_rate(&sub)
            );
        }
    }

    for kind in ModelKind::ALL {
        for &o in &opts {
            let sub = of(fits, kind, o);
            let Ok(rows) = population_summary(&sub) else { continue };
            let _ = writeln!(s, "\n### Parameter summary: {kind}, {o}\n");
            s.push_str("| Parameter | N | Mean | SD | Median | Q1 | Q3 | Gini - Median |\n|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for r in rows {
                let gap = r.gini_gap.map(|g| format!("{g:.2}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {gap} |",
                    r.name, r.count, r.mean, r.sd, r.median, r.q1, r.q3
                );
            }
        }
    }

    s.push_str("\n### AIC comparison\n\n| Optimizer | N | Utilitarian | Extended Gini | Tie |\n|---|---:|---:|---:|---:|\n");
    for &o in &opts {
        let a = aic_shares(fits, o);
        let _ = writeln!(s, "| {o} | {} | {:.2}% | {:.2}% | {:.2}% |", a.compared, a.utilitarian, a.extended_gini, a.tie);
    }

    s.push_str("\n### Weighting-function classes\n\n| Optimizer | N | URL | UL | UR | PT |\n|---|---:|---:|---:|---:|---:|\n");
    for &o in &opts {
        let c = class_shares(&of(fits, ModelKind::NonParametric, o));
        let _ = writeln!(s, "| {o} | {} | {:.2}% | {:.2}% | {:.2}% | {:.2}% |", c.count, c.url, c.ul, c.ur, c.pt);
    }
    s.push_str("\n### Marginal gains between classes\n\n| Optimizer | URL - UL | UL - PT | URL - UR | UR - PT | PT |\n|---|---:|---:|---:|---:|---:|\n");
    for &o in &opts {
        let g = class_shares(&of(fits, ModelKind::NonParametric, o)).marginal_gains();
        let _ = writeln!(s, "| {o} | {:.2}% | {:.2}% | {:.2}% | {:.2}% | {:.2}% |", g[0], g[1], g[2], g[3], g[4]);
    }

    s.push_str("\n### Median individual\n\n| Optimizer | Median grid | URL | UL | UR | PT |\n|---|---|---|---|---|---|\n");
    let yn = |b: bool| if b { "Yes" } else { "No" };
    for &o in &opts {
        if let Ok(p) = median_weighting_profile(&of(fits, ModelKind::NonParametric, o)) {
            let grid = p.median.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ");
            let m = p.membership;
            let _ = writeln!(s, "| {o} | ({grid}) | {} | {} | {} | {} |", yn(m.in_url), yn(m.in_ul), yn(m.in_ur), yn(m.in_pt));
        }
    }
    s
}
