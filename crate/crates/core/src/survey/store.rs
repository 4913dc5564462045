//! Append-only JSON-lines event log, replay, and CSV exports.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use thiserror::Error;

use super::{
    check_protocol_catalog, create_session, now_millis, Choice, NextStep, RespondentProfile, Session,
    SessionError, Statement, UnknownCode,
};
use crate::catalog::{BlockId, Catalog, CatalogError, QuestionLabel};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already exists")]
    DuplicateSession(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("csv line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        seed: u64,
        block_order: Vec<BlockId>,
        at: u64,
    },
    AnswerRecorded {
        session_id: String,
        question_id: String,
        choice: Choice,
        at: u64,
    },
    AnswerRevised {
        session_id: String,
        question_id: String,
        choice: Choice,
        at: u64,
    },
    ReviewConfirmed {
        session_id: String,
        block: BlockId,
        at: u64,
    },
    TextRecorded {
        session_id: String,
        statement: Statement,
        level: u8,
        at: u64,
    },
    ProfileRecorded {
        session_id: String,
        profile: RespondentProfile,
        at: u64,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionCreated { session_id, .. }
            | Event::AnswerRecorded { session_id, .. }
            | Event::AnswerRevised { session_id, .. }
            | Event::ReviewConfirmed { session_id, .. }
            | Event::TextRecorded { session_id, .. }
            | Event::ProfileRecorded { session_id, .. } => session_id,
        }
    }
}

/// Parses a JSON-lines event log. Blank lines are skipped.
pub fn parse_event_log(input: &str) -> Result<Vec<Event>, StoreError> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Applies one event to the session map, enforcing the protocol rules.
pub fn apply_event(
    catalog: &Catalog,
    sessions: &mut BTreeMap<String, Session>,
    event: &Event,
) -> Result<(), StoreError> {
    let id = event.session_id();
    if let Event::SessionCreated { seed, block_order, at, .. } = event {
        if sessions.contains_key(id) {
            return Err(StoreError::DuplicateSession(id.to_string()));
        }
        let s = create_session(catalog, Some(*seed), *at);
        if s.session_id != id || s.block_order[..] != block_order[..] {
            return Err(StoreError::Corrupt {
                line: 0,
                message: format!("session {id} does not match its seed"),
            });
        }
        sessions.insert(s.session_id.clone(), s);
        return Ok(());
    }
    let s = sessions
        .get_mut(id)
        .ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
    match event {
        Event::SessionCreated { .. } => unreachable!(),
        Event::AnswerRecorded { question_id, choice, at, .. } => s.record_answer(question_id, *choice, *at)?,
        Event::AnswerRevised { question_id, choice, at, .. } => s.revise_answer(question_id, *choice, *at)?,
        Event::ReviewConfirmed { block, .. } => s.confirm_review(*block)?,
        Event::TextRecorded { statement, level, .. } => s.record_text(*statement, *level)?,
        Event::ProfileRecorded { profile, .. } => s.record_profile(*profile)?,
    }
    Ok(())
}

/// Rebuilds all sessions from an event sequence.
pub fn replay(catalog: &Catalog, events: &[Event]) -> Result<BTreeMap<String, Session>, StoreError> {
    let mut sessions = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        apply_event(catalog, &mut sessions, e).map_err(|err| StoreError::Corrupt {
            line: i + 1,
            message: err.to_string(),
        })?;
    }
    Ok(sessions)
}

/// Thread-safe session store. Each session has its own lock; log appends
/// are serialized by a separate lock.
pub struct SessionStore {
    catalog: Arc<Catalog>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    log: Mutex<Option<File>>,
}

impl SessionStore {
    pub fn in_memory(catalog: Arc<Catalog>) -> Result<Self, StoreError> {
        check_protocol_catalog(&catalog)?;
        Ok(Self {
            catalog,
            sessions: Mutex::new(HashMap::new()),
            log: Mutex::new(None),
        })
    }

    /// Opens (or creates) the log at `path`, replaying existing events.
    pub fn open(catalog: Arc<Catalog>, path: &Path) -> Result<Self, StoreError> {
        check_protocol_catalog(&catalog)?;
        let existing = match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let sessions = replay(&catalog, &parse_event_log(&existing)?)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            catalog,
            sessions: Mutex::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect(),
            ),
            log: Mutex::new(Some(file)),
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn append(&self, event: &Event) -> Result<(), StoreError> {
        let mut guard = self.log.lock().expect("log lock poisoned");
        if let Some(f) = guard.as_mut() {
            let mut line = serde_json::to_string(event)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, StoreError> {
        self.sessions
            .lock()
            .expect("session map lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(id.to_string()))
    }

    /// Runs `f` on a copy of the session; on success logs the returned
    /// event, then commits the copy.
    fn mutate(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session, u64) -> Result<Option<Event>, SessionError>,
    ) -> Result<(), StoreError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock().expect("session lock poisoned");
        let mut scratch = s.clone();
        if let Some(event) = f(&mut scratch, now_millis())? {
            self.append(&event)?;
        }
        *s = scratch;
        Ok(())
    }

    pub fn create_session(&self, seed: Option<u64>) -> Result<Session, StoreError> {
        let s = create_session(&self.catalog, seed, now_millis());
        let mut map = self.sessions.lock().expect("session map lock poisoned");
        if map.contains_key(&s.session_id) {
            return Err(StoreError::DuplicateSession(s.session_id));
        }
        self.append(&Event::SessionCreated {
            session_id: s.session_id.clone(),
            seed: s.rng_seed,
            block_order: s.block_order.to_vec(),
            at: s.created_at,
        })?;
        map.insert(s.session_id.clone(), Arc::new(Mutex::new(s.clone())));
        Ok(s)
    }

    pub fn session(&self, id: &str) -> Result<Session, StoreError> {
        Ok(self.handle(id)?.lock().expect("session lock poisoned").clone())
    }

    pub fn next_step(&self, id: &str) -> Result<NextStep, StoreError> {
        let handle = self.handle(id)?;
        let s = handle.lock().expect("session lock poisoned");
        Ok(s.next_step(&self.catalog)?)
    }

    pub fn record_answer(&self, id: &str, question_id: &str, choice: Choice) -> Result<(), StoreError> {
        self.mutate(id, |s, at| {
            let qid = s
                .resolve_question(question_id)
                .ok_or_else(|| SessionError::UnknownQuestion(question_id.to_string()))?;
            let fresh = s.response(&qid).is_none();
            s.record_answer(&qid, choice, at)?;
            Ok(fresh.then(|| Event::AnswerRecorded {
                session_id: s.session_id.clone(),
                question_id: qid,
                choice,
                at,
            }))
        })
    }

    pub fn revise_answer(&self, id: &str, question_id: &str, choice: Choice) -> Result<(), StoreError> {
        self.mutate(id, |s, at| {
            s.revise_answer(question_id, choice, at)?;
            Ok(Some(Event::AnswerRevised {
                    session_id: s.session_id.clone(),
                    question_id: question_id.to_string(),
                    choice,
                    at,
                }))
        })
    }

    pub fn confirm_review(&self, id: &str, block: BlockId) -> Result<(), StoreError> {
        self.mutate(id, |s, at| {
            s.confirm_review(block)?;
            Ok(Some(Event::ReviewConfirmed {
                    session_id: s.session_id.clone(),
                    block,
                    at,
                }))
        })
    }

    pub fn record_text(&self, id: &str, statement: Statement, level: u8) -> Result<(), StoreError> {
        self.mutate(id, |s, at| {
            s.record_text(statement, level)?;
            Ok(Some(Event::TextRecorded {
                    session_id: s.session_id.clone(),
                    statement,
                    level,
                    at,
                }))
        })
    }

    pub fn record_profile(&self, id: &str, profile: RespondentProfile) -> Result<(), StoreError> {
        self.mutate(id, |s, at| {
            s.record_profile(profile)?;
            Ok(Some(Event::ProfileRecorded {
                    session_id: s.session_id.clone(),
                    profile,
                    at,
                }))
        })
    }

    /// Snapshot of all sessions ordered by id.
    pub fn snapshot(&self) -> Vec<Session> {
        let handles: Vec<_> = self
            .sessions
            .lock()
            .expect("session map lock poisoned")
            .values()
            .cloned()
            .collect();
        let mut out: Vec<Session> = handles
            .iter()
            .map(|h| h.lock().expect("session lock poisoned").clone())
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    pub fn export_responses<W: Write>(&self, out: W) -> Result<(), StoreError> {
        write_responses_csv(&export_response_rows(&self.catalog, &self.snapshot()), out)
    }

    pub fn export_sessions<W: Write>(&self, out: W) -> Result<(), StoreError> {
        write_sessions_csv(&export_session_rows(&self.catalog, &self.snapshot()), out)
    }
}

/// Loads all sessions from a log file without opening it for writing.
pub fn load_sessions(catalog: &Catalog, path: &Path) -> Result<Vec<Session>, StoreError> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    Ok(replay(catalog, &parse_event_log(&text)?)?.into_values().collect())
}

/// One exported answer, joined with its catalog label and block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseRow {
    pub session_id: String,
    pub block: BlockId,
    pub question_id: String,
    pub label: QuestionLabel,
    pub choice: Choice,
    pub revised: bool,
}

/// One exported session: profile, error count and text answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub session_id: String,
    pub block_order: Vec<BlockId>,
    pub profile: Option<RespondentProfile>,
    pub error_count: usize,
    /// Levels in [`Statement::ALL`] order.
    pub text: [Option<u8>; 5],
}

impl SessionRow {
    pub fn text_level(&self, statement: Statement) -> Option<u8> {
        let i = Statement::ALL.iter().position(|&s| s == statement).expect("statement in ALL");
        self.text[i]
    }
}

pub const RESPONSES_HEADER: [&str; 6] = ["session_id", "block", "question_id", "label", "choice", "revised"];

pub fn sessions_header() -> Vec<String> {
    let mut h = vec!["session_id".to_string(), "block_order".to_string()];
    h.extend(RespondentProfile::FIELDS.iter().map(|f| f.to_string()));
    h.push("error_count".into());
    h.extend(Statement::ALL.iter().map(|s| format!("text_{}", s.as_str().to_lowercase())));
    h
}

/// Final answers of every session whose numeric part is complete.
pub fn export_response_rows(catalog: &Catalog, sessions: &[Session]) -> Vec<ResponseRow> {
    sessions
        .iter()
        .filter(|s| s.numeric_complete())
        .flat_map(|s| {
            s.ordered_responses().into_iter().map(move |r| {
                let q = catalog.get(&r.question_id).expect("session ids come from the catalog");
                ResponseRow {
                    session_id: s.session_id.clone(),
                    block: q.block,
                    question_id: r.question_id.clone(),
                    label: q.label,
                    choice: r.choice,
                    revised: r.revised,
                }
            })
        })
        .collect()
}

pub fn export_session_rows(catalog: &Catalog, sessions: &[Session]) -> Vec<SessionRow> {
    sessions
        .iter()
        .filter(|s| s.numeric_complete())
        .map(|s| SessionRow {
            session_id: s.session_id.clone(),
            block_order: s.block_order.to_vec(),
            profile: s.profile().copied(),
            error_count: s.error_count(catalog).expect("numeric part complete"),
            text: Statement::ALL.map(|st| s.text_level(st)),
        })
        .collect()
}

pub fn write_responses_csv<W: Write>(rows: &[ResponseRow], out: W) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESPONSES_HEADER)?;
    for r in rows {
        w.write_record([
            r.session_id.as_str(),
            r.block.as_str(),
            r.question_id.as_str(),
            r.label.as_str(),
            r.choice.as_str(),
            if r.revised { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sessions_csv<W: Write>(rows: &[SessionRow], out: W) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sessions_header())?;
    for r in rows {
        let mut rec = vec![
            r.session_id.clone(),
            r.block_order.iter().map(|b| b.as_str()).collect::<Vec<_>>().join(";"),
        ];
        match &r.profile {
            Some(p) => rec.extend(p.codes().iter().map(|c| c.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 10)),
        }
        rec.push(r.error_count.to_string());
        rec.extend(r.text.iter().map(|t| t.map(|l| l.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<(), StoreError> {
    if found.iter().ne(expected.iter().map(String::as_str)) {
        return Err(StoreError::BadRow {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn bad(rec: &csv::StringRecord, message: impl std::fmt::Display) -> StoreError {
    StoreError::BadRow {
        line: rec.position().map_or(0, |p| p.line()),
        message: message.to_string(),
    }
}

pub fn parse_responses_csv<R: Read>(input: R) -> Result<Vec<ResponseRow>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let expected: Vec<String> = RESPONSES_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(rdr.headers()?, &expected)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(bad(&rec, "expected 6 fields"));
        }
        let revised = match &rec[5] {
            "true" => true,
            "false" => false,
            other => return Err(bad(&rec, format!("revised must be true or false, got {other:?}"))),
        };
        rows.push(ResponseRow {
            session_id: rec[0].to_string(),
            block: rec[1].parse().map_err(|e: CatalogError| bad(&rec, e))?,
            question_id: rec[2].to_string(),
            label: rec[3].parse().map_err(|e: CatalogError| bad(&rec, e))?,
            choice: rec[4].parse().map_err(|e: String| bad(&rec, e))?,
            revised,
        });
    }
    Ok(rows)
}

pub fn parse_sessions_csv<R: Read>(input: R) -> Result<Vec<SessionRow>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(rdr.headers()?, &sessions_header())?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 18 {
            return Err(bad(&rec, "expected 18 fields"));
        }
        let block_order = if rec[1].is_empty() {
            Vec::new()
        } else {
            rec[1]
                .split(';')
                .map(str::parse)
                .collect::<Result<Vec<BlockId>, _>>()
                .map_err(|e| bad(&rec, e))?
        };
        let codes: Vec<&str> = (2..12).map(|i| &rec[i]).collect();
        let profile = if codes.iter().all(|c| c.is_empty()) {
            None
        } else {
            Some(RespondentProfile::from_codes(&codes).map_err(|e: UnknownCode| bad(&rec, e))?)
        };
        let error_count: usize = rec[12].parse().map_err(|_| bad(&rec, "error_count must be an integer"))?;
        let mut text = [None; 5];
        for (k, slot) in text.iter_mut().enumerate() {
            let cell = &rec[13 + k];
            if !cell.is_empty() {
                let level: u8 = cell.parse().map_err(|_| bad(&rec, "text level must be an integer"))?;
                if !(1..=5).contains(&level) {
                    return Err(bad(&rec, format!("text level {level} outside 1..=5")));
                }
                *slot = Some(level);
            }
        }
        rows.push(SessionRow {
            session_id: rec[0].to_string(),
            block_order,
            profile,
            error_count,
            text,
        });
    }
    Ok(rows)
}

/// Reads a JSON-lines log incrementally; used by tools that tail the log.
pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<Event>, StoreError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> RespondentProfile {
        RespondentProfile::from_codes(&[
            "woman", "30-44", "2", "single", "student", "not_concerned", "master_doctorate", "d1", "no", "no_reply",
        ])
        .unwrap()
    }

    fn complete(store: &SessionStore, seed: u64) -> String {
        let s = store.create_session(Some(seed)).unwrap();
        let id = s.session_id.clone();
        for _ in 0..4 {
            loop {
                match store.next_step(&id).unwrap() {
                    NextStep::Question(q) => store.record_answer(&id, &q.question_id, Choice::B).unwrap(),
                    NextStep::BlockReview(r) => {
                        let b = store.session(&id).unwrap().block_at(r.block_number).unwrap();
                        store.confirm_review(&id, b).unwrap();
                        break;
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
        }
        for st in Statement::ALL {
            store.record_text(&id, st, 5).unwrap();
        }
        store.record_profile(&id, profile()).unwrap();
        id
    }

    #[test]
    fn empty_store_exports_header_only() {
        let store = SessionStore::in_memory(Arc::new(Catalog::standard())).unwrap();
        let mut r = Vec::new();
        let mut s = Vec::new();
        store.export_responses(&mut r).unwrap();
        store.export_sessions(&mut s).unwrap();
        assert_eq!(String::from_utf8(r).unwrap().lines().count(), 1);
        assert_eq!(String::from_utf8(s).unwrap().lines().count(), 1);
    }

    #[test]
    fn complete_session_exports_44_rows() {
        let store = SessionStore::in_memory(Arc::new(Catalog::standard())).unwrap();
        complete(&store, 17);
        let mut r = Vec::new();
        let mut s = Vec::new();
        store.export_responses(&mut r).unwrap();
        store.export_sessions(&mut s).unwrap();
        let rows = parse_responses_csv(r.as_slice()).unwrap();
        assert_eq!(rows.len(), 44);
        let sessions = parse_sessions_csv(s.as_slice()).unwrap();
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].error_count, 0);
        assert_eq!(sessions[0].profile, Some(profile()));
        assert_eq!(sessions[0].text_level(Statement::Clarity), Some(5));
    }

    #[test]
    fn log_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let cat = Arc::new(Catalog::standard());
        let (id, partial) = {
            let store = SessionStore::open(cat.clone(), &path).unwrap();
            let id = complete(&store, 3);
            let p = store.create_session(Some(4)).unwrap().session_id;
            let q = match store.next_step(&p).unwrap() {
                NextStep::Question(q) => q.question_id,
                _ => unreachable!(),
            };
            store.record_answer(&p, &q, Choice::A).unwrap();
            store.record_answer(&p, &q, Choice::A).unwrap();
            (id, p)
        };
        let reopened = SessionStore::open(cat.clone(), &path).unwrap();
        assert_eq!(reopened.session(&id).unwrap().phase(), super::super::Phase::Done);
        assert_eq!(reopened.session(&partial).unwrap().responses().count(), 1);
        let events = read_event_log(BufReader::new(File::open(&path).unwrap())).unwrap();
        assert_eq!(events, parse_event_log(&std::fs::read_to_string(&path).unwrap()).unwrap());
    }

    #[test]
    fn failed_operations_are_not_logged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let store = SessionStore::open(Arc::new(Catalog::standard()), &path).unwrap();
        let s = store.create_session(Some(1)).unwrap();
        assert!(store.record_answer(&s.session_id, "y9+t1", Choice::A).is_err());
        assert!(store.confirm_review(&s.session_id, BlockId::Y1).is_err());
        assert!(matches!(store.record_answer("nope", "y1+t1", Choice::A), Err(StoreError::UnknownSession(_))));
        assert!(matches!(store.create_session(Some(1)), Err(StoreError::DuplicateSession(_))));
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 1);
    }

    #[test]
    fn replay_rejects_protocol_violations() {
        let cat = Catalog::standard();
        let events = vec![Event::AnswerRecorded {
            session_id: "s1".into(),
            question_id: "y1+t1".into(),
            choice: Choice::A,
            at: 0,
        }];
        assert!(matches!(replay(&cat, &events), Err(StoreError::Corrupt { line: 1, .. })));
        assert!(parse_event_log("{\"event\":\"nope\"}").is_err());
        assert!(parse_event_log("\n\n").unwrap().is_empty());
    }

    #[test]
    fn csv_parsers_reject_bad_rows() {
        assert!(parse_responses_csv("a,b\n".as_bytes()).is_err());
        let bad = "session_id,block,question_id,label,choice,revised\ns1,y1,y1+t1,URL,C,false\n";
        assert!(parse_responses_csv(bad.as_bytes()).is_err());
        let bad = "session_id,block,question_id,label,choice,revised\ns1,y1,y1+t1,URL,A,maybe\n";
        assert!(parse_responses_csv(bad.as_bytes()).is_err());
    }
}
