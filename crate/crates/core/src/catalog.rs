//! The 55-question catalog: five initial distributions, ten unit transfers
//! each, plus one egalitarian test question per block.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use thiserror::Error;

use crate::inequality::{mean, IncomeDistribution, InequalityError};
use crate::transfer::{
    apply_transfer, enumerate_unit_transfers, transfer_shape, TransferError, TransferLabel, TransferVector,
};

/// Initial distributions, rank-ordered.
pub const INITIAL_DISTRIBUTIONS: [[f64; 5]; 5] = [
    [2.0, 6.0, 10.0, 14.0, 18.0],
    [2.0, 4.0, 14.0, 16.0, 18.0],
    [2.0, 4.0, 6.0, 16.0, 18.0],
    [2.0, 8.0, 10.0, 12.0, 18.0],
    [2.0, 4.0, 10.0, 16.0, 18.0],
];

pub const QUESTIONS_PER_BLOCK: usize = 11;
pub const CATALOG_SIZE: usize = 55;
/// Income of every individual in the final distribution of a test question,
/// identical across blocks even where the block mean differs.
pub const TEST_EQUAL_INCOME: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown block id {0:?}")]
    UnknownBlock(String),
    #[error("unknown question label {0:?}")]
    UnknownLabel(String),
    #[error("question {id}: {reason}")]
    Inconsistent { id: String, reason: String },
    #[error("duplicate question id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Distribution(#[from] InequalityError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Initial-distribution block identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockId {
    Y1,
    Y2,
    Y3,
    Y4,
    Y5,
}

impl BlockId {
    pub const ALL: [BlockId; 5] = [BlockId::Y1, BlockId::Y2, BlockId::Y3, BlockId::Y4, BlockId::Y5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        ["y1", "y2", "y3", "y4", "y5"][self.index()]
    }

    pub fn initial_distribution(self) -> IncomeDistribution {
        IncomeDistribution::new(INITIAL_DISTRIBUTIONS[self.index()].to_vec())
            .expect("catalog distributions are valid")
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownBlock(s.to_string()))
    }
}

impl Serialize for BlockId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Label of a catalog question: a transfer family or the egalitarian test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionLabel {
    Transfer(TransferLabel),
    Test,
}

impl QuestionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionLabel::Transfer(l) => l.as_str(),
            QuestionLabel::Test => "TEST",
        }
    }

    pub fn is_test(self) -> bool {
        matches!(self, QuestionLabel::Test)
    }

    pub fn transfer(self) -> Option<TransferLabel> {
        match self {
            QuestionLabel::Transfer(l) => Some(l),
            QuestionLabel::Test => None,
        }
    }
}

impl fmt::Display for QuestionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionLabel {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "TEST" {
            return Ok(QuestionLabel::Test);
        }
        s.parse::<TransferLabel>()
            .map(QuestionLabel::Transfer)
            .map_err(|_| CatalogError::UnknownLabel(s.to_string()))
    }
}

impl Serialize for QuestionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for QuestionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One pairwise comparison. `distribution_a` is always the pre-transfer
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuestionRecord", into = "QuestionRecord")]
pub struct QuestionPair {
    pub id: String,
    pub block: BlockId,
    pub distribution_a: IncomeDistribution,
    pub distribution_b: IncomeDistribution,
    /// `None` for test questions.
    pub transfer: Option<TransferVector>,
    pub label: QuestionLabel,
}

/// Flat wire form shared by the JSON and CSV catalog files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuestionRecord {
    id: String,
    block: BlockId,
    a: Vec<f64>,
    b: Vec<f64>,
    transfer: Option<Vec<f64>>,
    label: QuestionLabel,
}

impl From<QuestionPair> for QuestionRecord {
    fn from(q: QuestionPair) -> Self {
        QuestionRecord {
            id: q.id,
            block: q.block,
            a: q.distribution_a.into(),
            b: q.distribution_b.into(),
            transfer: q.transfer.map(Into::into),
            label: q.label,
        }
    }
}

impl TryFrom<QuestionRecord> for QuestionPair {
    type Error = CatalogError;

    fn try_from(r: QuestionRecord) -> Result<Self, CatalogError> {
        let inconsistent = |reason: &str| CatalogError::Inconsistent {
            id: r.id.clone(),
            reason: reason.to_string(),
        };
        if r.a.windows(2).any(|w| w[1] < w[0]) || r.b.windows(2).any(|w| w[1] < w[0]) {
            return Err(inconsistent("distributions must be listed in rank order"));
        }
        let a = IncomeDistribution::new(r.a.clone())?;
        let b = IncomeDistribution::new(r.b.clone())?;
        if a.len() != b.len() {
            return Err(inconsistent("distributions differ in length"));
        }
        let transfer = match (r.label, r.transfer) {
            (QuestionLabel::Test, None) => {
                if b.incomes().windows(2).any(|w| w[0] != w[1]) {
                    return Err(inconsistent("test questions end at an egalitarian distribution"));
                }
                None
            }
            (QuestionLabel::Test, Some(_)) => {
                return Err(inconsistent("test questions carry no transfer"))
            }
            (QuestionLabel::Transfer(_), None) => {
                return Err(inconsistent("transfer questions need a transfer vector"))
            }
            (QuestionLabel::Transfer(_), Some(t)) => {
                if (mean(&a) - mean(&b)).abs() > 1e-9 {
                    return Err(inconsistent("distributions have different means"));
                }
                let t = TransferVector::new(t)?;
                if QuestionLabel::Transfer(transfer_shape(&t).strict_label()) != r.label {
                    return Err(inconsistent("label does not match the transfer shape"));
                }
                let applied = apply_transfer(&a, &t)?;
                if applied.incomes() != b.incomes() {
                    return Err(inconsistent("B differs from A plus the transfer"));
                }
                Some(t)
            }
        };
        Ok(QuestionPair {
            id: r.id,
            block: r.block,
            distribution_a: a,
            distribution_b: b,
            transfer,
            label: r.label,
        })
    }
}

pub fn transfer_question_id(block: BlockId, k: usize) -> String {
    format!("{}+t{}", block.as_str(), k)
}

pub fn test_question_id(block: BlockId) -> String {
    format!("TEST-{}", block.as_str())
}

/// Builds the full catalog: per block, transfers `t1..t10` then the test.
pub fn build_catalog() -> Vec<QuestionPair> {
    let mut out = Vec::with_capacity(CATALOG_SIZE);
    for block in BlockId::ALL {
        let y = block.initial_distribution();
        let transfers = enumerate_unit_transfers(&y).expect("catalog distributions are strictly increasing");
        for (k, (t, label)) in transfers.into_iter().enumerate() {
            let b = apply_transfer(&y, &t).expect("unit transfers preserve ranks on the catalog");
            out.push(QuestionPair {
                id: transfer_question_id(block, k + 1),
                block,
                distribution_a: y.clone(),
                distribution_b: b,
                transfer: Some(t),
                label: QuestionLabel::Transfer(label),
            });
        }
        out.push(QuestionPair {
            id: test_question_id(block),
            block,
            distribution_a: y.clone(),
            distribution_b: IncomeDistribution::new(vec![TEST_EQUAL_INCOME; y.len()]).expect("positive income"),
            transfer: None,
            label: QuestionLabel::Test,
        });
    }
    out
}

/// Indexed, validated question catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    questions: Vec<QuestionPair>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(questions: Vec<QuestionPair>) -> Result<Self, CatalogError> {
        let questions = validate(questions)?;
        let index = questions
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.clone(), i))
            .collect();
        Ok(Self { questions, index })
    }

    pub fn standard() -> Self {
        Self::new(build_catalog()).expect("built-in catalog is valid")
    }

    pub fn questions(&self) -> &[QuestionPair] {
        &self.questions
    }

    pub fn get(&self, id: &str) -> Option<&QuestionPair> {
        self.index.get(id).map(|&i| &self.questions[i])
    }

    /// Questions of `block` in catalog order.
    pub fn block(&self, block: BlockId) -> impl Iterator<Item = &QuestionPair> {
        self.questions.iter().filter(move |q| q.block == block)
    }

    /// Non-test questions in catalog order.
    pub fn transfer_questions(&self) -> impl Iterator<Item = &QuestionPair> {
        self.questions.iter().filter(|q| !q.label.is_test())
    }
}

/// Checks catalog-level invariants shared by every parsed catalog.
fn validate(questions: Vec<QuestionPair>) -> Result<Vec<QuestionPair>, CatalogError> {
    let mut seen = std::collections::HashSet::new();
    for q in &questions {
        if !seen.insert(q.id.as_str()) {
            return Err(CatalogError::DuplicateId(q.id.clone()));
        }
    }
    Ok(questions)
}

pub fn catalog_to_json(questions: &[QuestionPair]) -> Result<String, CatalogError> {
    Ok(serde_json::to_string_pretty(questions)?)
}

pub fn parse_catalog_json(input: &str) -> Result<Vec<QuestionPair>, CatalogError> {
    let records: Vec<QuestionRecord> = serde_json::from_str(input)?;
    validate(records.into_iter().map(QuestionPair::try_from).collect::<Result<_, _>>()?)
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

const CSV_WIDTH: usize = 5;

/// Writes the CSV form (`id, block, A1..A5, B1..B5, t1..t5, label`).
pub fn write_catalog_csv<W: Write>(questions: &[QuestionPair], out: W) -> Result<(), CatalogError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "block".to_string()];
    for prefix in ["A", "B", "t"] {
        header.extend((1..=CSV_WIDTH).map(|i| format!("{prefix}{i}")));
    }
    header.push("label".into());
    w.write_record(&header)?;
    for q in questions {
        if q.distribution_a.len() != CSV_WIDTH {
            return Err(CatalogError::Inconsistent {
                id: q.id.clone(),
                reason: format!("CSV catalog rows hold exactly {CSV_WIDTH} incomes"),
            });
        }
        let mut row = vec![q.id.clone(), q.block.to_string()];
        row.extend(q.distribution_a.incomes().iter().map(|&v| fmt_num(v)));
        row.extend(q.distribution_b.incomes().iter().map(|&v| fmt_num(v)));
        match &q.transfer {
            Some(t) => row.extend(t.deltas().iter().map(|&v| fmt_num(v))),
            None => row.extend(std::iter::repeat_n(String::new(), CSV_WIDTH)),
        }
        row.push(q.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_catalog_csv<R: Read>(input: R) -> Result<Vec<QuestionPair>, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 + 3 * CSV_WIDTH {
            return Err(CatalogError::Inconsistent {
                id: rec.get(0).unwrap_or_default().to_string(),
                reason: format!("expected {} columns, found {}", 3 + 3 * CSV_WIDTH, rec.len()),
            });
        }
        let id = rec[0].to_string();
        let num = |s: &str| -> Result<f64, CatalogError> {
            s.trim().parse::<f64>().map_err(|_| CatalogError::Inconsistent {
                id: id.clone(),
                reason: format!("not a number: {s:?}"),
            })
        };
        let a = (2..2 + CSV_WIDTH).map(|i| num(&rec[i])).collect::<Result<Vec<_>, _>>()?;
        let b = (7..7 + CSV_WIDTH).map(|i| num(&rec[i])).collect::<Result<Vec<_>, _>>()?;
        let t_cells: Vec<&str> = (12..12 + CSV_WIDTH).map(|i| rec[i].trim()).collect();
        let transfer = if t_cells.iter().all(|c| c.is_empty()) {
            None
        } else {
            Some(t_cells.iter().map(|c| num(c)).collect::<Result<Vec<_>, _>>()?)
        };
        let record = QuestionRecord {
            id: id.clone(),
            block: rec[1].parse()?,
            a,
            b,
            transfer,
            label: rec[17].parse()?,
        };
        out.push(QuestionPair::try_from(record)?);
    }
    validate(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_55_rows() {
        let c = build_catalog();
        assert_eq!(c.len(), 55);
        assert_eq!(c.iter().filter(|q| q.label.is_test()).count(), 5);
    }

    #[test]
    fn y5_t9_row() {
        let c = build_catalog();
        let q = c.iter().find(|q| q.id == "y5+t9").unwrap();
        assert_eq!(q.distribution_a.incomes(), &[2.0, 4.0, 10.0, 16.0, 18.0]);
        assert_eq!(q.distribution_b.incomes(), &[2.0, 5.0, 9.0, 16.0, 18.0]);
    }

    #[test]
    fn test_rows_end_at_equality() {
        for q in build_catalog().iter().filter(|q| q.label.is_test()) {
            assert_eq!(q.distribution_b.incomes(), &[10.0; 5]);
            assert!(q.transfer.is_none());
        }
    }

    #[test]
    fn json_and_csv_round_trip() {
        let c = build_catalog();
        let json = catalog_to_json(&c).unwrap();
        assert_eq!(parse_catalog_json(&json).unwrap(), c);
        let mut buf = Vec::new();
        write_catalog_csv(&c, &mut buf).unwrap();
        assert_eq!(parse_catalog_csv(buf.as_slice()).unwrap(), c);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,block,A1,A2,A3,A4,A5,B1,B2,B3,B4,B5,t1,t2,t3,t4,t5,label\n"));
        assert!(text.contains("y1+t1,y1,2,6,10,14,18,3,6,10,14,17,1,0,0,0,-1,URL\n"));
        assert!(text.contains("TEST-y1,y1,2,6,10,14,18,10,10,10,10,10,,,,,,TEST\n"));
    }

    #[test]
    fn parse_rejects_inconsistent_rows() {
        let bad = r#"[{"id":"q","block":"y1","a":[2,6,10,14,18],"b":[3,6,10,14,17],"transfer":[0,1,0,0,-1],"label":"UR"}]"#;
        assert!(matches!(parse_catalog_json(bad), Err(CatalogError::Inconsistent { .. })));
        let bad_block = r#"[{"id":"q","block":"y9","a":[1,2],"b":[1,2],"transfer":null,"label":"TEST"}]"#;
        assert!(parse_catalog_json(bad_block).is_err());
        let unsorted = r#"[{"id":"q","block":"y1","a":[6,2],"b":[4,4],"transfer":null,"label":"TEST"}]"#;
        assert!(parse_catalog_json(unsorted).is_err());
        let dup = r#"[{"id":"q","block":"y1","a":[2,6],"b":[4,4],"transfer":null,"label":"TEST"},
                      {"id":"q","block":"y1","a":[2,6],"b":[4,4],"transfer":null,"label":"TEST"}]"#;
        assert!(matches!(parse_catalog_json(dup), Err(CatalogError::DuplicateId(_))));
    }
}
