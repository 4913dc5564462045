//! Survey protocol: session lifecycle, answer capture with per-block
//! review, text statements, demographics and persistence.

mod profile;
mod session;
mod store;

pub use profile::*;
pub use session::*;
pub use store::*;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Answer to a pairwise question. `B` is always the post-transfer
/// distribution, so `B` means the transfer was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    Equivalent,
    B,
}

impl Choice {
    pub const ALL: [Choice; 3] = [Choice::A, Choice::Equivalent, Choice::B];

    pub fn as_str(self) -> &'static str {
        match self {
            Choice::A => "A",
            Choice::Equivalent => "Equivalent",
            Choice::B => "B",
        }
    }

    /// Ordered-probit category: 0 = A, 1 = Equivalent, 2 = B.
    pub fn category(self) -> usize {
        self as usize
    }

    pub fn from_category(c: usize) -> Option<Choice> {
        Self::ALL.get(c).copied()
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Choice::A),
            "Equivalent" => Ok(Choice::Equivalent),
            "B" => Ok(Choice::B),
            other => Err(format!("unknown choice {other:?}")),
        }
    }
}

/// Text-based statements: the four transfer principles plus the clarity item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statement {
    #[serde(rename = "PT")]
    Pt,
    #[serde(rename = "UL")]
    Ul,
    #[serde(rename = "UR")]
    Ur,
    #[serde(rename = "URL")]
    Url,
    Clarity,
}

impl Statement {
    pub const ALL: [Statement; 5] = [
        Statement::Pt,
        Statement::Ul,
        Statement::Ur,
        Statement::Url,
        Statement::Clarity,
    ];

    pub const PRINCIPLES: [Statement; 4] = [Statement::Pt, Statement::Ul, Statement::Ur, Statement::Url];

    pub fn as_str(self) -> &'static str {
        match self {
            Statement::Pt => "PT",
            Statement::Ul => "UL",
            Statement::Ur => "UR",
            Statement::Url => "URL",
            Statement::Clarity => "Clarity",
        }
    }

    /// Statement text shown to respondents (English template).
    pub fn prompt(self) -> &'static str {
        match self {
            Statement::Pt => "A transfer of income from individual X to individual Y (who is poorer than X) always reduces inequality in society as a whole.",
            Statement::Ul => "A transfer of income from individual X to individual Y (poorer than X) reduces inequality in society as a whole, on the sole condition that individuals poorer than Y receive at least the same amount of income as that received by Y.",
            Statement::Ur => "A transfer of income from individual X to individual Y (poorer than X) reduces inequality in society as a whole, on the sole condition that individuals richer than X give at least the same amount of income as that given by X.",
            Statement::Url => "A transfer of income from individual X to individual Y (poorer than X) reduces inequality in society as a whole, on the sole conditions that (a) individuals poorer than Y receive at least the same amount of income as that received by Y and (b) individuals richer than X give at least the same amount of income as that given by X.",
            Statement::Clarity => "Did you find these questions clear?",
        }
    }

    /// Labels of levels 1..=5.
    pub fn scale(self) -> [&'static str; 5] {
        match self {
            Statement::Clarity => ["Not clear at all", "Not clear", "No opinion", "Rather clear", "Really clear"],
            _ => ["Strongly disagree", "Somewhat disagree", "No opinion", "Somewhat agree", "Strongly agree"],
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statement::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown statement {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub session_id: String,
    pub question_id: String,
    pub choice: Choice,
    pub revised: bool,
    /// Milliseconds since the Unix epoch.
    pub answered_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextResponseRecord {
    pub session_id: String,
    pub statement: Statement,
    /// 1 = strongly disagree / not clear at all, 5 = strongly agree / really clear.
    pub level: u8,
}

pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
