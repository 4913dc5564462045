//! Descriptive statistics over exported responses: acceptance tables by
//! transfer type and stratum, chi-square equality tests, restricted sample
//! and text-statement tables.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

use crate::catalog::{BlockId, QuestionLabel};
use crate::survey::{
    Choice, Education, EmploymentStatus, Gender, PoliticalView, ResponseRow, SessionRow, Statement,
};
use crate::transfer::TransferLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("contingency table has a zero row or column margin")]
    DegenerateTable,
    #[error("contingency table must have at least two rows and two columns of equal length")]
    RaggedTable,
    #[error("contingency counts must be finite and non-negative")]
    InvalidCount,
    #[error("unknown stratifier {0:?}")]
    UnknownStratifier(String),
}

/// Row order of the acceptance tables.
pub const LABEL_ORDER: [TransferLabel; 4] = [
    TransferLabel::Url,
    TransferLabel::UlStrict,
    TransferLabel::UrStrict,
    TransferLabel::PtStrict,
];

pub const ALL_TRANSFERS: &str = "All transfers";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OutcomeCounts {
    pub accepted: usize,
    pub rejected: usize,
    pub neutral: usize,
}

impl OutcomeCounts {
    pub fn add_choice(&mut self, c: Choice) {
        match c {
            Choice::B => self.accepted += 1,
            Choice::A => self.rejected += 1,
            Choice::Equivalent => self.neutral += 1,
        }
    }

    /// Likert bucketing: 4–5 accepted, 1–2 rejected, 3 neutral.
    pub fn add_level(&mut self, level: u8) {
        match level {
            4 | 5 => self.accepted += 1,
            1 | 2 => self.rejected += 1,
            _ => self.neutral += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.accepted + self.rejected + self.neutral
    }

    pub fn merge(&mut self, other: &OutcomeCounts) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.neutral += other.neutral;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceRow {
    pub stratum: Option<String>,
    pub key: String,
    pub counts: OutcomeCounts,
    pub accepted_pct: f64,
    pub rejected_pct: f64,
    pub neutral_pct: f64,
    pub n: usize,
}

impl AcceptanceRow {
    fn new(stratum: Option<String>, key: &str, counts: OutcomeCounts) -> Option<Self> {
        let n = counts.total();
        if n == 0 {
            return None;
        }
        let pct = |k: usize| 100.0 * k as f64 / n as f64;
        Some(Self {
            stratum,
            key: key.to_string(),
            counts,
            accepted_pct: pct(counts.accepted),
            rejected_pct: pct(counts.rejected),
            neutral_pct: pct(counts.neutral),
            n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AcceptanceTable {
    pub rows: Vec<AcceptanceRow>,
    /// Strata with no observations; reported rather than treated as errors.
    pub empty_strata: Vec<String>,
}

impl AcceptanceTable {
    pub fn row(&self, stratum: Option<&str>, key: &str) -> Option<&AcceptanceRow> {
        self.rows
            .iter()
            .find(|r| r.stratum.as_deref() == stratum && r.key == key)
    }

    pub fn to_markdown(&self, title: &str) -> String {
        let mut s = format!("### {title}\n\n");
        let stratified = self.rows.iter().any(|r| r.stratum.is_some());
        if stratified {
            s.push_str("| Stratum | Transfers | Accepted | Rejected | Neutrality | N |\n|---|---|---:|---:|---:|---:|\n");
        } else {
            s.push_str("| Transfers | Accepted | Rejected | Neutrality | N |\n|---|---:|---:|---:|---:|\n");
        }
        for r in &self.rows {
            if stratified {
                let _ = write!(s, "| {} ", r.stratum.as_deref().unwrap_or(""));
            }
            let _ = writeln!(
                s,
                "| {} | {:.2}% | {:.2}% | {:.2}% | {} |",
                r.key, r.accepted_pct, r.rejected_pct, r.neutral_pct, r.n
            );
        }
        for e in &self.empty_strata {
            let _ = writeln!(s, "\nwarning: empty stratum {e}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stratum,transfers,accepted_pct,rejected_pct,neutral_pct,n\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{:.4},{}",
                r.stratum.as_deref().unwrap_or(""),
                r.key,
                r.accepted_pct,
                r.rejected_pct,
                r.neutral_pct,
                r.n
            );
        }
        s
    }
}

/// Demographic or design variable used to split acceptance tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratifier {
    Gender,
    Education,
    Politics,
    Employment,
    Block,
}

impl FromStr for Stratifier {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(Stratifier::Gender),
            "education" => Ok(Stratifier::Education),
            "politics" => Ok(Stratifier::Politics),
            "employment" => Ok(Stratifier::Employment),
            "block" => Ok(Stratifier::Block),
            other => Err(AnalysisError::UnknownStratifier(other.to_string())),
        }
    }
}

pub const MISSING_STRATUM: &str = "missing";

impl Stratifier {
    /// All stratum values in display order.
    pub fn levels(self) -> Vec<&'static str> {
        match self {
            Stratifier::Gender => Gender::ALL.iter().map(|v| v.as_str()).collect(),
            Stratifier::Education => Education::ALL.iter().map(|v| v.as_str()).collect(),
            Stratifier::Politics => PoliticalView::ALL.iter().map(|v| v.as_str()).collect(),
            Stratifier::Employment => EmploymentStatus::ALL.iter().map(|v| v.as_str()).collect(),
            Stratifier::Block => BlockId::ALL.iter().map(|v| v.as_str()).collect(),
        }
    }

    fn value(self, response: &ResponseRow, session: Option<&SessionRow>) -> &'static str {
        if self == Stratifier::Block {
            return response.block.as_str();
        }
        let Some(p) = session.and_then(|s| s.profile.as_ref()) else {
            return MISSING_STRATUM;
        };
        match self {
            Stratifier::Gender => p.gender.as_str(),
            Stratifier::Education => p.education.as_str(),
            Stratifier::Politics => p.political_view.as_str(),
            Stratifier::Employment => p.employment_status.as_str(),
            Stratifier::Block => unreachable!(),
        }
    }
}

/// Counts per transfer label over non-test responses, optionally restricted
/// to a session subset.
pub fn label_counts(
    responses: &[ResponseRow],
    filter: Option<&BTreeSet<String>>,
) -> BTreeMap<TransferLabel, OutcomeCounts> {
    let mut out: BTreeMap<TransferLabel, OutcomeCounts> = BTreeMap::new();
    for r in responses {
        let QuestionLabel::Transfer(label) = r.label else { continue };
        if filter.is_some_and(|f| !f.contains(&r.session_id)) {
            continue;
        }
        out.entry(label).or_default().add_choice(r.choice);
    }
    out
}

fn label_rows(stratum: Option<String>, counts: &BTreeMap<TransferLabel, OutcomeCounts>) -> Vec<AcceptanceRow> {
    let mut order: Vec<TransferLabel> = LABEL_ORDER.to_vec();
    order.extend(counts.keys().filter(|l| !LABEL_ORDER.contains(l)));
    let mut total = OutcomeCounts::default();
    let mut rows: Vec<AcceptanceRow> = order
        .iter()
        .filter_map(|l| {
            let c = counts.get(l)?;
            total.merge(c);
            AcceptanceRow::new(stratum.clone(), l.as_str(), *c)
        })
        .collect();
    rows.extend(AcceptanceRow::new(stratum, ALL_TRANSFERS, total));
    rows
}

/// Acceptance rates per transfer label plus the "All transfers" row;
/// Accepted = B, Rejected = A, Neutrality = Equivalent. Test questions are
/// excluded.
pub fn acceptance_table(
    responses: &[ResponseRow],
    sessions: &[SessionRow],
    filter: Option<&BTreeSet<String>>,
    stratifier: Option<Stratifier>,
) -> AcceptanceTable {
    let Some(strat) = stratifier else {
        return AcceptanceTable {
            rows: label_rows(None, &label_counts(responses, filter)),
            empty_strata: Vec::new(),
        };
    };
    let by_id: BTreeMap<&str, &SessionRow> = sessions.iter().map(|s| (s.session_id.as_str(), s)).collect();
    let mut groups: BTreeMap<&'static str, Vec<ResponseRow>> = BTreeMap::new();
    for r in responses {
        let v = strat.value(r, by_id.get(r.session_id.as_str()).copied());
        groups.entry(v).or_default().push(r.clone());
    }
    let mut levels = strat.levels();
    levels.push(MISSING_STRATUM);
    let mut table = AcceptanceTable::default();
    for level in levels {
        let rows = groups
            .get(level)
            .map(|g| label_rows(Some(level.to_string()), &label_counts(g, filter)))
            .unwrap_or_default();
        if rows.is_empty() {
            if level != MISSING_STRATUM {
                table.empty_strata.push(level.to_string());
            }
        } else {
            table.rows.extend(rows);
        }
    }
    table
}

/// Sessions with no test-question errors.
pub fn restricted_sample(sessions: &[SessionRow]) -> BTreeSet<String> {
    sessions
        .iter()
        .filter(|s| s.error_count == 0)
        .map(|s| s.session_id.clone())
        .collect()
}

/// Sessions that rated the questions rather or really clear (level 4–5).
pub fn clear_sessions(sessions: &[SessionRow]) -> BTreeSet<String> {
    sessions
        .iter()
        .filter(|s| s.text_level(Statement::Clarity).is_some_and(|l| l >= 4))
        .map(|s| s.session_id.clone())
        .collect()
}

/// Acceptance rates of the four principle statements.
pub fn text_acceptance_table(
    sessions: &[SessionRow],
    filter: Option<&BTreeSet<String>>,
    clarity_filter: bool,
) -> AcceptanceTable {
    let clear = clarity_filter.then(|| clear_sessions(sessions));
    let order = [Statement::Url, Statement::Ul, Statement::Ur, Statement::Pt];
    let mut counts = [OutcomeCounts::default(); 4];
    for s in sessions {
        if filter.is_some_and(|f| !f.contains(&s.session_id)) || clear.as_ref().is_some_and(|c| !c.contains(&s.session_id)) {
            continue;
        }
        for (k, st) in order.iter().enumerate() {
            if let Some(level) = s.text_level(*st) {
                counts[k].add_level(level);
            }
        }
    }
    AcceptanceTable {
        rows: order
            .iter()
            .zip(counts)
            .filter_map(|(st, c)| AcceptanceRow::new(None, st.as_str(), c))
            .collect(),
        empty_strata: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Some expected cell count is below 5.
    pub small_expected: bool,
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(df as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
}

/// Pearson chi-square test of homogeneity on an `r × c` table of counts.
pub fn chi_square_equality(table: &[Vec<f64>]) -> Result<ChiSquareResult, AnalysisError> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(AnalysisError::RaggedTable);
    }
    if table.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(AnalysisError::InvalidCount);
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    if rows.iter().chain(&cols).any(|&m| m <= 0.0) {
        return Err(AnalysisError::DegenerateTable);
    }
    let mut statistic = 0.0;
    let mut small_expected = false;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / total;
            small_expected |= e < 5.0;
            statistic += (o - e) * (o - e) / e;
        }
    }
    let df = (r - 1) * (c - 1);
    Ok(ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
        small_expected,
    })
}

/// (accepted, not accepted) row; neutrality is pooled with rejection.
pub fn binary_row(c: &OutcomeCounts) -> Vec<f64> {
    vec![c.accepted as f64, (c.rejected + c.neutral) as f64]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityTest {
    pub name: String,
    pub result: Result<ChiSquareResult, AnalysisError>,
}

/// Global test across the four labels and the six pairwise comparisons.
pub fn transfer_equality_tests(counts: &BTreeMap<TransferLabel, OutcomeCounts>) -> Vec<EqualityTest> {
    let get = |l: TransferLabel| counts.get(&l).copied().unwrap_or_default();
    let order = [
        TransferLabel::Url,
        TransferLabel::UrStrict,
        TransferLabel::UlStrict,
        TransferLabel::PtStrict,
    ];
    let mut out = vec![EqualityTest {
        name: "Global".into(),
        result: chi_square_equality(&order.iter().map(|&l| binary_row(&get(l))).collect::<Vec<_>>()),
    }];
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            out.push(EqualityTest {
                name: format!("{} versus {}", order[i], order[j]),
                result: chi_square_equality(&[binary_row(&get(order[i])), binary_row(&get(order[j]))]),
            });
        }
    }
    out
}

/// Same tests for the text statements.
pub fn text_equality_tests(table: &AcceptanceTable) -> Vec<EqualityTest> {
    let mut counts = BTreeMap::new();
    for r in &table.rows {
        if let Ok(l) = r.key.parse::<TransferLabel>() {
            counts.insert(l, r.counts);
        }
    }
    transfer_equality_tests(&counts)
}

pub fn equality_tests_markdown(title: &str, tests: &[EqualityTest]) -> String {
    let mut s = format!("### {title}\n\n| Test | df | Value | Prob. |\n|---|---:|---:|---:|\n");
    for t in tests {
        match &t.result {
            Ok(r) => {
                let p = if r.p_value < 1e-4 { "< 0.0001".to_string() } else { format!("{:.4}", r.p_value) };
                let _ = writeln!(s, "| {} | {} | {:.2} | {} |", t.name, r.df, r.statistic, p);
            }
            Err(e) => {
                let _ = writeln!(s, "| {} | - | - | {e} |", t.name);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::RespondentProfile;

    fn resp(session: &str, label: &str, choice: Choice) -> ResponseRow {
        ResponseRow {
            session_id: session.into(),
            block: BlockId::Y1,
            question_id: "q".into(),
            label: label.parse().unwrap(),
            choice,
            revised: false,
        }
    }

    fn session(id: &str, errors: usize, text: [Option<u8>; 5]) -> SessionRow {
        SessionRow {
            session_id: id.into(),
            block_order: vec![BlockId::Y1, BlockId::Y2, BlockId::Y3, BlockId::Y4],
            profile: None,
            error_count: errors,
            text,
        }
    }

    #[test]
    fn known_counts() {
        let rows = vec![
            resp("s", "URL", Choice::B),
            resp("s", "URL", Choice::B),
            resp("s", "URL", Choice::A),
            resp("s", "URL", Choice::Equivalent),
            resp("s", "TEST", Choice::A),
        ];
        let t = acceptance_table(&rows, &[], None, None);
        let url = t.row(None, "URL").unwrap();
        assert_eq!((url.accepted_pct, url.rejected_pct, url.neutral_pct, url.n), (50.0, 25.0, 25.0, 4));
        assert_eq!(t.row(None, ALL_TRANSFERS).unwrap().n, 4);
        assert!(t.row(None, "PT").is_none());
    }

    #[test]
    fn accept_everything() {
        let rows: Vec<_> = ["URL", "UR", "UL", "PT"].iter().map(|l| resp("s", l, Choice::B)).collect();
        let t = acceptance_table(&rows, &[], None, None);
        assert_eq!(t.rows.len(), 5);
        assert!(t.rows.iter().all(|r| r.accepted_pct == 100.0 && r.rejected_pct == 0.0));
        assert_eq!(t.rows.iter().map(|r| r.key.as_str()).collect::<Vec<_>>(), ["URL", "UL", "UR", "PT", ALL_TRANSFERS]);
    }

    #[test]
    fn stratified_reports_empty_strata() {
        let mut s = session("s1", 0, [None; 5]);
        s.profile = Some(
            RespondentProfile::from_codes(&["woman", "15-29", "0", "single", "student", "not_concerned", "bachelor", "d1", "no", "left"])
                .unwrap(),
        );
        let rows = vec![resp("s1", "URL", Choice::B), resp("s2", "PT", Choice::A)];
        let t = acceptance_table(&rows, &[s], None, Some(Stratifier::Gender));
        assert_eq!(t.empty_strata, vec!["man".to_string()]);
        assert_eq!(t.row(Some("woman"), "URL").unwrap().n, 1);
        assert_eq!(t.row(Some(MISSING_STRATUM), "PT").unwrap().n, 1);
    }

    #[test]
    fn restricted_sample_rules() {
        let s = vec![session("a", 0, [None; 5]), session("b", 1, [None; 5])];
        let r = restricted_sample(&s);
        assert!(r.contains("a") && !r.contains("b"));
        assert!(restricted_sample(&[]).is_empty());
    }

    #[test]
    fn text_bucketing() {
        let sessions: Vec<_> = (1..=5)
            .map(|l| session(&format!("s{l}"), 0, [Some(l), None, None, None, Some(if l == 2 { 2 } else { 5 })]))
            .collect();
        let t = text_acceptance_table(&sessions, None, false);
        let pt = t.row(None, "PT").unwrap();
        assert_eq!((pt.accepted_pct, pt.rejected_pct, pt.neutral_pct), (40.0, 40.0, 20.0));
        let filtered = text_acceptance_table(&sessions, None, true);
        assert_eq!(filtered.row(None, "PT").unwrap().n, 4);
        let all5 = vec![session("x", 0, [Some(5); 5])];
        let t = text_acceptance_table(&all5, None, false);
        assert!(t.rows.iter().all(|r| r.accepted_pct == 100.0));
    }

    #[test]
    fn chi_square_basics() {
        let r = chi_square_equality(&[vec![10.0, 10.0], vec![10.0, 10.0]]).unwrap();
        assert_eq!((r.statistic, r.df, r.p_value), (0.0, 1, 1.0));
        let r = chi_square_equality(&[vec![20.0, 10.0], vec![10.0, 20.0]]).unwrap();
        // E = 15 in every cell: 4 · 25/15.
        assert!((r.statistic - 100.0 / 15.0).abs() < 1e-12);
        assert_eq!(chi_square_equality(&[vec![0.0, 0.0], vec![1.0, 2.0]]), Err(AnalysisError::DegenerateTable));
        assert_eq!(chi_square_equality(&[vec![1.0, 2.0]]), Err(AnalysisError::RaggedTable));
        // 1 df: P(chi2 > 3.841459) = 0.05.
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-12);
        // 3 df: P(chi2 > 7.814728) = 0.05.
        assert!((chi_square_sf(7.814727903251178, 3) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn equality_test_layout() {
        let mut counts = BTreeMap::new();
        for (l, a) in [(TransferLabel::Url, 60), (TransferLabel::UrStrict, 50), (TransferLabel::UlStrict, 55), (TransferLabel::PtStrict, 40)] {
            counts.insert(l, OutcomeCounts { accepted: a, rejected: 100 - a, neutral: 0 });
        }
        let tests = transfer_equality_tests(&counts);
        assert_eq!(tests.len(), 7);
        assert_eq!(tests[0].result.as_ref().unwrap().df, 3);
        assert_eq!(tests[1].name, "URL versus UR");
        assert!(tests[1..].iter().all(|t| t.result.as_ref().unwrap().df == 1));
    }
}
