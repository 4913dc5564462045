use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use super::{Choice, RespondentProfile, ResponseRecord, Statement, TextResponseRecord};
use crate::catalog::{BlockId, Catalog, QuestionPair, QUESTIONS_PER_BLOCK};

pub const BLOCKS_PER_SESSION: usize = 4;
pub const QUESTIONS_PER_SESSION: usize = BLOCKS_PER_SESSION * QUESTIONS_PER_BLOCK;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("question {0} is not the current question")]
    OutOfOrder(String),
    #[error("question {0} can no longer be revised")]
    ReviewWindowClosed(String),
    #[error("question {0} is not part of this session")]
    UnknownQuestion(String),
    #[error("block {0} is not under review")]
    NotInReview(String),
    #[error("session is in phase {0:?}, operation not allowed")]
    WrongPhase(Phase),
    #[error("the numeric part of the session is not finished")]
    PhaseIncomplete,
    #[error("session is complete")]
    SessionComplete,
    #[error("statement {0} was already answered")]
    TextAlreadyAnswered(Statement),
    #[error("level {0} is outside 1..=5")]
    InvalidLevel(u8),
    #[error("catalog block {block} has {found} questions, the protocol needs {QUESTIONS_PER_BLOCK} with one test")]
    MalformedCatalog { block: BlockId, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NumericQuestions,
    TextQuestions,
    Demographics,
    Done,
}

/// Opaque per-session handle of the question at 1-based `position`.
pub fn question_handle(position: usize) -> String {
    format!("q{position:02}")
}

/// A question as shown to the respondent: no label, block or test flag.
/// `question_id` is the opaque positional handle, not the catalog id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: String,
    pub position: usize,
    pub distribution_a: Vec<f64>,
    pub distribution_b: Vec<f64>,
}

impl QuestionView {
    fn new(q: &QuestionPair, position: usize) -> Self {
        Self {
            question_id: question_handle(position),
            position,
            distribution_a: q.distribution_a.incomes().to_vec(),
            distribution_b: q.distribution_b.incomes().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub question: QuestionView,
    pub choice: Choice,
}

/// Summary screen shown after the last question of a block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReview {
    /// 1-based position of the block in this session; the confirm handle.
    pub block_number: usize,
    pub entries: Vec<ReviewEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPrompt {
    pub statement: Statement,
    pub prompt: String,
    pub scale: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "screen", rename_all = "snake_case")]
pub enum NextStep {
    Question(QuestionView),
    BlockReview(BlockReview),
    TextQuestions { pending: Vec<TextPrompt> },
    Demographics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub rng_seed: u64,
    pub block_order: [BlockId; BLOCKS_PER_SESSION],
    /// Presentation order of question ids, one list per block.
    pub question_order: Vec<Vec<String>>,
    pub created_at: u64,
    cursor_block: usize,
    cursor_question: usize,
    in_review: bool,
    phase: Phase,
    responses: BTreeMap<String, ResponseRecord>,
    text: BTreeMap<Statement, TextResponseRecord>,
    profile: Option<RespondentProfile>,
}

pub fn session_id_for_seed(seed: u64) -> String {
    format!("s{seed:016x}")
}

/// Checks that every block has the protocol's 11 questions, one of them a test.
pub fn check_protocol_catalog(catalog: &Catalog) -> Result<(), SessionError> {
    for block in BlockId::ALL {
        let found = catalog.block(block).count();
        let tests = catalog.block(block).filter(|q| q.label.is_test()).count();
        if found != QUESTIONS_PER_BLOCK || tests != 1 {
            return Err(SessionError::MalformedCatalog { block, found });
        }
    }
    Ok(())
}

/// Draws the block order and within-block permutations; deterministic in
/// `seed`. Block `y1` comes first, then `y2`, `y3` and one of `y4`/`y5` in
/// random order.
pub fn create_session(catalog: &Catalog, seed: Option<u64>, created_at: u64) -> Session {
    let seed = seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = if rng.random_bool(0.5) { BlockId::Y4 } else { BlockId::Y5 };
    let mut rest = [BlockId::Y2, BlockId::Y3, last];
    rest.shuffle(&mut rng);
    let block_order = [BlockId::Y1, rest[0], rest[1], rest[2]];
    let question_order = block_order
        .iter()
        .map(|&b| {
            let mut ids: Vec<String> = catalog.block(b).map(|q| q.id.clone()).collect();
            ids.shuffle(&mut rng);
            ids
        })
        .collect();
    Session {
        session_id: session_id_for_seed(seed),
        rng_seed: seed,
        block_order,
        question_order,
        created_at,
        cursor_block: 0,
        cursor_question: 0,
        in_review: false,
        phase: Phase::NumericQuestions,
        responses: BTreeMap::new(),
        text: BTreeMap::new(),
        profile: None,
    }
}

impl Session {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn profile(&self) -> Option<&RespondentProfile> {
        self.profile.as_ref()
    }

    pub fn responses(&self) -> impl Iterator<Item = &ResponseRecord> {
        self.responses.values()
    }

    pub fn response(&self, question_id: &str) -> Option<&ResponseRecord> {
        self.responses.get(question_id)
    }

    pub fn text_responses(&self) -> impl Iterator<Item = &TextResponseRecord> {
        self.text.values()
    }

    pub fn text_level(&self, statement: Statement) -> Option<u8> {
        self.text.get(&statement).map(|r| r.level)
    }

    /// Responses in presentation order.
    pub fn ordered_responses(&self) -> Vec<&ResponseRecord> {
        self.question_order
            .iter()
            .flatten()
            .filter_map(|id| self.responses.get(id))
            .collect()
    }

    /// Maps a positional handle or a catalog id to the catalog id.
    pub fn resolve_question(&self, key: &str) -> Option<String> {
        if let Some(pos) = key.strip_prefix('q').and_then(|p| p.parse::<usize>().ok()) {
            if (1..=QUESTIONS_PER_SESSION).contains(&pos) && key == question_handle(pos) {
                let (b, i) = ((pos - 1) / QUESTIONS_PER_BLOCK, (pos - 1) % QUESTIONS_PER_BLOCK);
                return self.question_order.get(b).and_then(|ids| ids.get(i)).cloned();
            }
        }
        self.block_of(key).map(|_| key.to_string())
    }

    /// Block shown at 1-based `number` in this session.
    pub fn block_at(&self, number: usize) -> Option<BlockId> {
        number.checked_sub(1).and_then(|i| self.block_order.get(i)).copied()
    }

    pub fn block_of(&self, question_id: &str) -> Option<usize> {
        self.question_order
            .iter()
            .position(|ids| ids.iter().any(|id| id == question_id))
    }

    /// Block currently open for review, if any.
    pub fn review_block(&self) -> Option<BlockId> {
        (self.phase == Phase::NumericQuestions && self.in_review)
            .then(|| self.block_order[self.cursor_block])
    }

    pub fn numeric_complete(&self) -> bool {
        self.phase != Phase::NumericQuestions
    }

    pub fn next_step(&self, catalog: &Catalog) -> Result<NextStep, SessionError> {
        match self.phase {
            Phase::NumericQuestions => {
                let ids = &self.question_order[self.cursor_block];
                if self.in_review {
                    let entries = ids
                        .iter()
                        .enumerate()
                        .map(|(i, id)| ReviewEntry {
                            question: QuestionView::new(
                                catalog.get(id).expect("session ids come from the catalog"),
                                self.cursor_block * QUESTIONS_PER_BLOCK + i + 1,
                            ),
                            choice: self.responses[id].choice,
                        })
                        .collect();
                    Ok(NextStep::BlockReview(BlockReview {
                        block_number: self.cursor_block + 1,
                        entries,
                    }))
                } else {
                    let id = &ids[self.cursor_question];
                    let q = catalog.get(id).expect("session ids come from the catalog");
                    Ok(NextStep::Question(QuestionView::new(
                        q,
                        self.cursor_block * QUESTIONS_PER_BLOCK + self.cursor_question + 1,
                    )))
                }
            }
            Phase::TextQuestions => Ok(NextStep::TextQuestions {
                pending: Statement::ALL
                    .into_iter()
                    .filter(|s| !self.text.contains_key(s))
                    .map(|s| TextPrompt {
                        statement: s,
                        prompt: s.prompt().to_string(),
                        scale: s.scale().iter().map(|l| l.to_string()).collect(),
                    })
                    .collect(),
            }),
            Phase::Demographics => Ok(NextStep::Demographics),
            Phase::Done => Err(SessionError::SessionComplete),
        }
    }

    pub fn current_question_id(&self) -> Option<&str> {
        (self.phase == Phase::NumericQuestions && !self.in_review)
            .then(|| self.question_order[self.cursor_block][self.cursor_question].as_str())
    }

    /// Records the answer to the current question. Re-submitting an
    /// identical answer to an already recorded question is a no-op.
    pub fn record_answer(&mut self, key: &str, choice: Choice, at: u64) -> Result<(), SessionError> {
        let question_id = &self
            .resolve_question(key)
            .ok_or_else(|| SessionError::UnknownQuestion(key.to_string()))?;
        let question_id = question_id.as_str();
        if self.phase == Phase::Done {
            return Err(SessionError::SessionComplete);
        }
        if let Some(existing) = self.responses.get(question_id) {
            if existing.choice == choice {
                return Ok(());
            }
            return Err(SessionError::OutOfOrder(question_id.to_string()));
        }
        if self.phase != Phase::NumericQuestions {
            return Err(SessionError::WrongPhase(self.phase));
        }
        if self.current_question_id() != Some(question_id) {
            return Err(SessionError::OutOfOrder(question_id.to_string()));
        }
        self.responses.insert(
            question_id.to_string(),
            ResponseRecord {
                session_id: self.session_id.clone(),
                question_id: question_id.to_string(),
                choice,
                revised: false,
                answered_at: at,
            },
        );
        self.cursor_question += 1;
        if self.cursor_question == QUESTIONS_PER_BLOCK {
            self.in_review = true;
        }
        Ok(())
    }

    /// Changes an answer while its block's review screen is open.
    pub fn revise_answer(&mut self, key: &str, choice: Choice, at: u64) -> Result<(), SessionError> {
        let question_id = &self
            .resolve_question(key)
            .ok_or_else(|| SessionError::UnknownQuestion(key.to_string()))?;
        let question_id = question_id.as_str();
        let block = self.block_of(question_id).expect("resolved ids belong to the session");
        if self.review_block().is_none() || block != self.cursor_block {
            return Err(SessionError::ReviewWindowClosed(question_id.to_string()));
        }
        let rec = self
            .responses
            .get_mut(question_id)
            .expect("every question of a block under review is answered");
        rec.choice = choice;
        rec.revised = true;
        rec.answered_at = at;
        Ok(())
    }

    pub fn confirm_review(&mut self, block: BlockId) -> Result<(), SessionError> {
        if self.review_block() != Some(block) {
            return Err(SessionError::NotInReview(block.to_string()));
        }
        self.in_review = false;
        self.cursor_block += 1;
        self.cursor_question = 0;
        if self.cursor_block == BLOCKS_PER_SESSION {
            self.cursor_block = BLOCKS_PER_SESSION - 1;
            self.phase = Phase::TextQuestions;
        }
        Ok(())
    }

    pub fn record_text(&mut self, statement: Statement, level: u8) -> Result<(), SessionError> {
        if self.phase != Phase::TextQuestions {
            return Err(SessionError::WrongPhase(self.phase));
        }
        if !(1..=5).contains(&level) {
            return Err(SessionError::InvalidLevel(level));
        }
        if self.text.contains_key(&statement) {
            return Err(SessionError::TextAlreadyAnswered(statement));
        }
        self.text.insert(
            statement,
            TextResponseRecord {
                session_id: self.session_id.clone(),
                statement,
                level,
            },
        );
        if self.text.len() == Statement::ALL.len() {
            self.phase = Phase::Demographics;
        }
        Ok(())
    }

    pub fn record_profile(&mut self, profile: RespondentProfile) -> Result<(), SessionError> {
        if self.phase != Phase::Demographics {
            return Err(SessionError::WrongPhase(self.phase));
        }
        self.profile = Some(profile);
        self.phase = Phase::Done;
        Ok(())
    }

    /// Number of test questions whose final answer is not `B`.
    pub fn error_count(&self, catalog: &Catalog) -> Result<usize, SessionError> {
        if !self.numeric_complete() {
            return Err(SessionError::PhaseIncomplete);
        }
        Ok(self
            .responses
            .values()
            .filter(|r| catalog.get(&r.question_id).is_some_and(|q| q.label.is_test()))
            .filter(|r| r.choice != Choice::B)
            .count())
    }
}
