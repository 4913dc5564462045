//! Mean-preserving transfer vectors and their classification into the
//! uniform / progressive transfer families.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::inequality::{IncomeDistribution, InequalityError};

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("transfer entries must sum to zero (sum = {0})")]
    NotMeanPreserving(f64),
    #[error("transfer has no non-zero entry")]
    ZeroTransfer,
    #[error("transfer entry {0} is not finite")]
    NonFinite(usize),
    #[error("transfer length {transfer} does not match distribution length {distribution}")]
    LengthMismatch { transfer: usize, distribution: usize },
    #[error("transfer makes income at rank {0} negative")]
    NegativeIncome(usize),
    #[error("transfer reverses the ranks at positions {0} and {1}")]
    RankReversal(usize, usize),
    #[error("unit-transfer enumeration only supports strictly increasing distributions of 5 incomes")]
    UnsupportedArity,
    #[error("classification requires a strictly increasing base distribution")]
    TiedBase,
    #[error(transparent)]
    Distribution(#[from] InequalityError),
}

/// Zero-sum per-rank income deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TransferVector {
    deltas: Vec<f64>,
}

impl TransferVector {
    pub fn new(deltas: Vec<f64>) -> Result<Self, TransferError> {
        if let Some(i) = deltas.iter().position(|d| !d.is_finite()) {
            return Err(TransferError::NonFinite(i));
        }
        if deltas.iter().all(|&d| d == 0.0) {
            return Err(TransferError::ZeroTransfer);
        }
        let sum: f64 = deltas.iter().sum();
        if sum.abs() > SUM_TOL {
            return Err(TransferError::NotMeanPreserving(sum));
        }
        Ok(Self { deltas })
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TransferVector {
    type Error = TransferError;

    fn try_from(value: Vec<f64>) -> Result<Self, TransferError> {
        Self::new(value)
    }
}

impl From<TransferVector> for Vec<f64> {
    fn from(value: TransferVector) -> Self {
        value.deltas
    }
}

/// Partition label of an equalising transfer.
///
/// `UrStrict` is uniform on the right but not URL, `UlStrict` uniform on the
/// left but not URL, `PtStrict` a plain progressive transfer that is neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransferLabel {
    #[serde(rename = "URL")]
    Url,
    #[serde(rename = "UR")]
    UrStrict,
    #[serde(rename = "UL")]
    UlStrict,
    #[serde(rename = "PT")]
    PtStrict,
    #[serde(rename = "NONE")]
    NotEqualising,
}

impl TransferLabel {
    pub const EQUALISING: [TransferLabel; 4] = [
        TransferLabel::Url,
        TransferLabel::UrStrict,
        TransferLabel::UlStrict,
        TransferLabel::PtStrict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferLabel::Url => "URL",
            TransferLabel::UrStrict => "UR",
            TransferLabel::UlStrict => "UL",
            TransferLabel::PtStrict => "PT",
            TransferLabel::NotEqualising => "NONE",
        }
    }
}

impl fmt::Display for TransferLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "URL" => Ok(TransferLabel::Url),
            "UR" => Ok(TransferLabel::UrStrict),
            "UL" => Ok(TransferLabel::UlStrict),
            "PT" => Ok(TransferLabel::PtStrict),
            "NONE" => Ok(TransferLabel::NotEqualising),
            other => Err(format!("unknown transfer label {other:?}")),
        }
    }
}

/// Structural shape tests, before any strictness filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransferShape {
    pub url: bool,
    pub ur: bool,
    pub ul: bool,
    pub pt: bool,
}

impl TransferShape {
    pub fn strict_label(&self) -> TransferLabel {
        if self.url {
            TransferLabel::Url
        } else if self.ur {
            TransferLabel::UrStrict
        } else if self.ul {
            TransferLabel::UlStrict
        } else if self.pt {
            TransferLabel::PtStrict
        } else {
            TransferLabel::NotEqualising
        }
    }
}

/// `y + t`, rejecting negative incomes and rank reversals.
pub fn apply_transfer(
    y: &IncomeDistribution,
    t: &TransferVector,
) -> Result<IncomeDistribution, TransferError> {
    if y.len() != t.len() {
        return Err(TransferError::LengthMismatch {
            transfer: t.len(),
            distribution: y.len(),
        });
    }
    let x: Vec<f64> = y.incomes().iter().zip(t.deltas()).map(|(a, b)| a + b).collect();
    if let Some(i) = x.iter().position(|&v| v < 0.0) {
        return Err(TransferError::NegativeIncome(i + 1));
    }
    if let Some(i) = x.windows(2).position(|w| w[1] < w[0]) {
        return Err(TransferError::RankReversal(i + 1, i + 2));
    }
    Ok(IncomeDistribution::new(x)?)
}

/// Tests `t` against the four transfer definitions, positions being ranks.
pub fn transfer_shape(t: &TransferVector) -> TransferShape {
    let d = t.deltas();
    let n = d.len();
    let pos: Vec<usize> = (0..n).filter(|&i| d[i] > 0.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| d[i] < 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return TransferShape::default();
    }
    let uniform = |idx: &[usize]| idx.iter().all(|&i| d[i] == d[idx[0]]);
    let contiguous = |idx: &[usize]| idx.windows(2).all(|w| w[1] == w[0] + 1);
    // Recipients all poorer than donors, each side receiving / giving the
    // same amount per head.
    if pos.last() >= neg.first() || !uniform(&pos) || !uniform(&neg) {
        return TransferShape::default();
    }
    let left_block = pos[0] == 0 && contiguous(&pos);
    let right_block = *neg.last().unwrap() == n - 1 && contiguous(&neg);
    let single_pos = pos.len() == 1;
    let single_neg = neg.len() == 1;
    TransferShape {
        url: left_block && right_block,
        ur: single_pos && right_block,
        ul: left_block && single_neg,
        pt: single_pos && single_neg,
    }
}

pub fn classify_transfer(
    y: &IncomeDistribution,
    t: &TransferVector,
) -> Result<TransferLabel, TransferError> {
    if !y.is_strictly_increasing() {
        return Err(TransferError::TiedBase);
    }
    apply_transfer(y, t)?;
    Ok(transfer_shape(t).strict_label())
}

/// The ten single-unit two-person transfers, ordered as in the catalog.
pub const UNIT_TRANSFERS: [[i8; 5]; 10] = [
    [1, 0, 0, 0, -1],
    [0, 1, 0, 0, -1],
    [0, 0, 1, 0, -1],
    [0, 0, 0, 1, -1],
    [1, 0, 0, -1, 0],
    [1, 0, -1, 0, 0],
    [1, -1, 0, 0, 0],
    [0, 0, 1, -1, 0],
    [0, 1, -1, 0, 0],
    [0, 1, 0, -1, 0],
];

pub fn enumerate_unit_transfers(
    y: &IncomeDistribution,
) -> Result<Vec<(TransferVector, TransferLabel)>, TransferError> {
    if y.len() != 5 || !y.is_strictly_increasing() {
        return Err(TransferError::UnsupportedArity);
    }
    UNIT_TRANSFERS
        .iter()
        .map(|row| {
            let t = TransferVector::new(row.iter().map(|&v| f64::from(v)).collect())?;
            let label = classify_transfer(y, &t)?;
            Ok((t, label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> IncomeDistribution {
        IncomeDistribution::new(v.to_vec()).unwrap()
    }

    fn tv(v: &[f64]) -> TransferVector {
        TransferVector::new(v.to_vec()).unwrap()
    }

    const Y1: [f64; 5] = [2.0, 6.0, 10.0, 14.0, 18.0];

    #[test]
    fn apply_examples() {
        let x = apply_transfer(&dist(&Y1), &tv(&[1.0, 0.0, 0.0, 0.0, -1.0])).unwrap();
        assert_eq!(x.incomes(), &[3.0, 6.0, 10.0, 14.0, 17.0]);
        let y2 = dist(&[2.0, 4.0, 14.0, 16.0, 18.0]);
        let x = apply_transfer(&y2, &tv(&[0.0, 0.0, 0.0, 1.0, -1.0])).unwrap();
        assert_eq!(x.incomes(), &[2.0, 4.0, 14.0, 17.0, 17.0]);
        assert_eq!(TransferVector::new(vec![0.0; 5]), Err(TransferError::ZeroTransfer));
    }

    #[test]
    fn apply_rejects_bad_results() {
        let y = dist(&[1.0, 2.0]);
        assert_eq!(
            apply_transfer(&y, &tv(&[-2.0, 2.0])),
            Err(TransferError::NegativeIncome(1))
        );
        assert_eq!(
            apply_transfer(&y, &tv(&[1.5, -1.5])),
            Err(TransferError::RankReversal(1, 2))
        );
        assert!(matches!(
            apply_transfer(&y, &tv(&[1.0, 0.0, -1.0])),
            Err(TransferError::LengthMismatch { .. })
        ));
        assert!(matches!(
            TransferVector::new(vec![1.0, 0.0]),
            Err(TransferError::NotMeanPreserving(_))
        ));
    }

    #[test]
    fn classify_examples() {
        let y = dist(&Y1);
        let c = |v: &[f64]| classify_transfer(&y, &tv(v)).unwrap();
        assert_eq!(c(&[1.0, 0.0, 0.0, 0.0, -1.0]), TransferLabel::Url);
        assert_eq!(c(&[0.0, 1.0, 0.0, -1.0, 0.0]), TransferLabel::PtStrict);
        assert_eq!(c(&[1.0, 0.0, 0.0, -1.0, 0.0]), TransferLabel::UlStrict);
        assert_eq!(c(&[0.0, 0.0, 1.0, 0.0, -1.0]), TransferLabel::UrStrict);
        // Regressive and multi-site shapes outside the four families.
        assert_eq!(c(&[-1.0, 0.0, 0.0, 0.0, 1.0]), TransferLabel::NotEqualising);
        assert_eq!(c(&[1.0, 0.0, -1.0, 1.0, -1.0]), TransferLabel::NotEqualising);
    }

    #[test]
    fn multi_person_uniform_shapes() {
        let y = dist(&[1.0, 2.0, 10.0, 20.0, 30.0]);
        // two poorest each get 1.5, three richest each give 1
        let url = tv(&[1.5, 1.5, -1.0, -1.0, -1.0]);
        assert_eq!(classify_transfer(&y, &url).unwrap(), TransferLabel::Url);
        let ur = tv(&[0.0, 2.0, 0.0, -1.0, -1.0]);
        assert_eq!(classify_transfer(&y, &ur).unwrap(), TransferLabel::UrStrict);
        let ul = tv(&[1.0, 1.0, 0.0, -2.0, 0.0]);
        assert_eq!(classify_transfer(&y, &ul).unwrap(), TransferLabel::UlStrict);
        // Non-uniform donors fit nothing.
        let bad = tv(&[0.5, 0.0, 0.0, -0.1, -0.4]);
        assert_eq!(classify_transfer(&y, &bad).unwrap(), TransferLabel::NotEqualising);
    }

    #[test]
    fn url_shape_passes_ur_and_ul_tests() {
        let s = transfer_shape(&tv(&[1.0, 0.0, 0.0, 0.0, -1.0]));
        assert!(s.url && s.ur && s.ul && s.pt);
    }

    #[test]
    fn enumerate_counts() {
        let out = enumerate_unit_transfers(&dist(&Y1)).unwrap();
        assert_eq!(out.len(), 10);
        let count = |l| out.iter().filter(|(_, x)| *x == l).count();
        assert_eq!(count(TransferLabel::Url), 1);
        assert_eq!(count(TransferLabel::UrStrict), 3);
        assert_eq!(count(TransferLabel::UlStrict), 3);
        assert_eq!(count(TransferLabel::PtStrict), 3);
        let y3 = enumerate_unit_transfers(&dist(&[2.0, 4.0, 6.0, 16.0, 18.0])).unwrap();
        assert_eq!(
            out.iter().map(|(t, _)| t.clone()).collect::<Vec<_>>(),
            y3.iter().map(|(t, _)| t.clone()).collect::<Vec<_>>()
        );
        assert_eq!(
            enumerate_unit_transfers(&dist(&[2.0, 2.0, 10.0, 14.0, 18.0])),
            Err(TransferError::UnsupportedArity)
        );
        assert_eq!(
            enumerate_unit_transfers(&dist(&[2.0, 10.0])),
            Err(TransferError::UnsupportedArity)
        );
    }

    #[test]
    fn tied_base_is_rejected() {
        let y = dist(&[2.0, 2.0, 10.0, 14.0, 18.0]);
        assert_eq!(
            classify_transfer(&y, &tv(&[1.0, 0.0, 0.0, 0.0, -1.0])),
            Err(TransferError::TiedBase)
        );
    }
}
