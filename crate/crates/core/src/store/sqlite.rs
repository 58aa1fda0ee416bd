use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{CommentId, DefinitionId, ExampleId, TermId, UserId};
use crate::provenance::{check_append, Action, ProvenanceEvent};
use crate::vocab::*;

use super::migrations::{current_version, migrate_with, MIGRATIONS};
use super::{Commit, MatchField, SearchHit, Storage, TermAggregate, LATEST_SCHEMA_VERSION, MAX_PAGE_SIZE};

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    /// `sqlite::memory:`, `sqlite://<path>` or a bare file path.
    pub url: String,
    pub pool_size: u32,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            url: "sqlite::memory:".into(),
            pool_size: 1,
        }
    }
}

enum Location {
    Memory,
    File(PathBuf),
}

fn parse_url(url: &str) -> Location {
    let rest = url
        .strip_prefix("sqlite://")
        .or_else(|| url.strip_prefix("sqlite:"))
        .unwrap_or(url);
    if rest.is_empty() || rest == ":memory:" {
        Location::Memory
    } else {
        Location::File(PathBuf::from(rest))
    }
}

/// Test hook: make the next commit fail at a chosen point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitFault {
    /// Fail before touching anything.
    Unavailable,
    /// Fail after entity rows are written but before events are appended.
    AfterEntityWrites,
}

/// SQLite-backed store. Writes go through one connection, which also
/// serializes them; per-term conflicts are detected by the aggregate version
/// check in [`Storage::commit`].
pub struct SqliteStore {
    conn: Mutex<Connection>,
    schema_version: AtomicI64,
    fault: Mutex<Option<CommitFault>>,
}

impl std::fmt::Debug for SqliteStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteStore")
            .field("schema_version", &self.schema_version.load(Ordering::SeqCst))
            .finish()
    }
}

fn ts(at: &Timestamp) -> String {
    at.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_ts(raw: &str) -> rusqlite::Result<Timestamp> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn enum_text<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("not a unit enum: {other:?}"),
    }
}

fn parse_enum<T: DeserializeOwned>(raw: String) -> rusqlite::Result<T> {
    serde_json::from_value(serde_json::Value::String(raw))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn actor(kind: String, id: String) -> rusqlite::Result<ActorRef> {
    Ok(ActorRef {
        kind: parse_enum(kind)?,
        id,
    })
}

impl SqliteStore {
    pub fn open(config: &StoreConfig) -> Result<Self> {
        let conn = match parse_url(&config.url) {
            Location::Memory => Connection::open_in_memory()?,
            Location::File(path) => {
                let conn = Connection::open(path)?;
                conn.pragma_update(None, "journal_mode", "WAL")?;
                conn
            }
        };
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        let version = current_version(&conn)?;
        Ok(Self {
            conn: Mutex::new(conn),
            schema_version: AtomicI64::new(version),
            fault: Mutex::new(None),
        })
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::open(&StoreConfig::default())
    }

    /// Open and bring the schema up to date.
    pub fn open_migrated(config: &StoreConfig) -> Result<Self> {
        let store = Self::open(config)?;
        store.migrate(LATEST_SCHEMA_VERSION)?;
        Ok(store)
    }

    /// Arm a one-shot failure for the next commit.
    pub fn inject_commit_fault(&self, fault: CommitFault) {
        *self.fault.lock().expect("fault lock poisoned") = Some(fault);
    }

    fn lock(&self) -> Result<MutexGuard<'_, Connection>> {
        self.conn
            .lock()
            .map_err(|_| Error::StorageUnavailable("connection lock poisoned".into()))
    }

    /// Lock the connection after checking the schema is current.
    fn ready(&self) -> Result<MutexGuard<'_, Connection>> {
        let found = self.schema_version.load(Ordering::SeqCst);
        if found != LATEST_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                found,
                expected: LATEST_SCHEMA_VERSION,
            });
        }
        self.lock()
    }

    fn take_fault(&self) -> Option<CommitFault> {
        self.fault.lock().expect("fault lock poisoned").take()
    }
}

fn term_version(tx: &Connection, term: &TermId) -> Result<Option<u64>> {
    Ok(tx
        .query_row(
            "SELECT version FROM terms WHERE id = ?1",
            [term.as_str()],
            |r| r.get::<_, i64>(0),
        )
        .optional()?
        .map(|v| v as u64))
}

fn unique_violation(err: &rusqlite::Error, index: &str) -> bool {
    matches!(err, rusqlite::Error::SqliteFailure(e, Some(msg))
        if e.code == rusqlite::ErrorCode::ConstraintViolation && msg.contains(index))
}

/// Replace every entity row of one term with `state`.
fn write_rows(tx: &Transaction<'_>, state: &TermState) -> Result<()> {
    let id = state.term.id.as_str();
    for table in ["votes", "comments", "negotiation", "examples", "definitions", "term_tags"] {
        tx.execute(&format!("DELETE FROM {table} WHERE term_id = ?1"), [id])?;
    }
    let term = &state.term;
    tx.execute(
        "INSERT INTO terms (id, label, label_fold, created_by_kind, created_by_id, created_at, status, version)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)
         ON CONFLICT (id) DO UPDATE SET label = excluded.label, label_fold = excluded.label_fold,
             created_by_kind = excluded.created_by_kind, created_by_id = excluded.created_by_id,
             created_at = excluded.created_at, status = excluded.status, version = excluded.version",
        params![
            id,
            term.label,
            fold(&term.label),
            enum_text(&term.created_by.kind),
            term.created_by.id,
            ts(&term.created_at),
            enum_text(&term.status),
            state.version as i64,
        ],
    )
    .map_err(|e| {
        if unique_violation(&e, "label_fold") {
            Error::DuplicateLabel {
                label: term.label.clone(),
            }
        } else {
            e.into()
        }
    })?;
    for tag in &term.tags {
        tx.execute("INSERT INTO term_tags (term_id, tag) VALUES (?1, ?2)", params![id, tag])?;
    }
    for d in state.definitions.values() {
        tx.execute(
            "INSERT INTO definitions (id, term_id, body, body_fold, author_kind, author_id, kind, version,
                                      created_at, updated_at, up, down)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)",
            params![
                d.id.as_str(),
                id,
                d.body,
                fold(&d.body),
                enum_text(&d.author.kind),
                d.author.id,
                enum_text(&d.kind),
                d.version,
                ts(&d.created_at),
                ts(&d.updated_at),
                d.tally.up as i64,
                d.tally.down as i64,
            ],
        )
        .map_err(|e| {
            if unique_violation(&e, "definitions.term_id") {
                Error::AiDefinitionExists
            } else {
                e.into()
            }
        })?;
    }
    for e in state.examples.values() {
        tx.execute(
            "INSERT INTO examples (id, term_id, body, author_kind, author_id, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                e.id.as_str(),
                id,
                e.body,
                enum_text(&e.author.kind),
                e.author.id,
                ts(&e.created_at)
            ],
        )?;
    }
    for c in state.comments.values() {
        tx.execute(
            "INSERT INTO comments (id, term_id, definition_id, author_kind, author_id, body, disposition, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
            params![
                c.id.as_str(),
                id,
                c.target_definition_id.as_str(),
                enum_text(&c.author.kind),
                c.author.id,
                c.body,
                enum_text(&c.disposition),
                ts(&c.created_at),
            ],
        )?;
    }
    for vote in state.votes.values().flat_map(|by_user| by_user.values()) {
        tx.execute(
            "INSERT INTO votes (definition_id, user_id, term_id, value, cast_at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                vote.definition_id.as_str(),
                vote.user_id.as_str(),
                id,
                i64::from(vote.value),
                ts(&vote.cast_at),
            ],
        )?;
    }
    let n = &state.negotiation;
    tx.execute(
        "INSERT INTO negotiation (term_id, phase, pending_feedback, last_activity) VALUES (?1, ?2, ?3, ?4)",
        params![
            id,
            enum_text(&n.phase),
            serde_json::to_string(&n.pending_feedback).expect("ids serialize"),
            ts(&n.last_activity),
        ],
    )?;
    Ok(())
}

fn insert_event(tx: &Connection, event: &ProvenanceEvent) -> Result<()> {
    let (action, payload) = event.action.to_parts();
    tx.execute(
        "INSERT INTO events (seq, term_id, occurred_at, actor_kind, actor_id, action, payload)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![
            event.seq as i64,
            event.term_id.as_str(),
            ts(&event.occurred_at),
            enum_text(&event.actor.kind),
            event.actor.id,
            action,
            payload.to_string(),
        ],
    )?;
    Ok(())
}

fn read_term(conn: &Connection, id: &TermId) -> Result<(Term, u64)> {
    let row = conn
        .query_row(
            "SELECT label, created_by_kind, created_by_id, created_at, status, version FROM terms WHERE id = ?1",
            [id.as_str()],
            |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    actor(r.get(1)?, r.get(2)?)?,
                    parse_ts(&r.get::<_, String>(3)?)?,
                    parse_enum::<TermStatus>(r.get(4)?)?,
                    r.get::<_, i64>(5)?,
                ))
            },
        )
        .optional()?
        .ok_or_else(|| Error::UnknownTerm(id.clone()))?;
    let (label, created_by, created_at, status, version) = row;
    let mut stmt = conn.prepare_cached("SELECT tag FROM term_tags WHERE term_id = ?1 ORDER BY tag")?;
    let tags = stmt
        .query_map([id.as_str()], |r| r.get::<_, String>(0))?
        .collect::<rusqlite::Result<BTreeSet<_>>>()?;
    Ok((
        Term {
            id: id.clone(),
            label,
            tags,
            created_by,
            created_at,
            status,
        },
        version as u64,
    ))
}

fn read_definitions(conn: &Connection, term: &TermId) -> Result<BTreeMap<DefinitionId, Definition>> {
    let mut stmt = conn.prepare_cached(
        "SELECT id, body, author_kind, author_id, kind, version, created_at, updated_at, up, down
         FROM definitions WHERE term_id = ?1 ORDER BY id",
    )?;
    let rows = stmt.query_map([term.as_str()], |r| {
        Ok(Definition {
            id: DefinitionId::new(r.get::<_, String>(0)?),
            term_id: term.clone(),
            body: r.get(1)?,
            author: actor(r.get(2)?, r.get(3)?)?,
            kind: parse_enum(r.get(4)?)?,
            version: r.get(5)?,
            created_at: parse_ts(&r.get::<_, String>(6)?)?,
            updated_at: parse_ts(&r.get::<_, String>(7)?)?,
            tally: VoteTally::from_counts(r.get::<_, i64>(8)? as u64, r.get::<_, i64>(9)? as u64),
        })
    })?;
    Ok(rows
        .map(|d| d.map(|d| (d.id.clone(), d)))
        .collect::<rusqlite::Result<_>>()?)
}

fn read_state(conn: &Connection, id: &TermId) -> Result<TermState> {
    let (term, version) = read_term(conn, id)?;
    let definitions = read_definitions(conn, id)?;

    let mut stmt = conn.prepare_cached(
        "SELECT id, body, author_kind, author_id, created_at FROM examples WHERE term_id = ?1 ORDER BY id",
    )?;
    let examples = stmt
        .query_map([id.as_str()], |r| {
            Ok(Example {
                id: ExampleId::new(r.get::<_, String>(0)?),
                term_id: id.clone(),
                body: r.get(1)?,
                author: actor(r.get(2)?, r.get(3)?)?,
                created_at: parse_ts(&r.get::<_, String>(4)?)?,
            })
        })?
        .map(|e| e.map(|e| (e.id.clone(), e)))
        .collect::<rusqlite::Result<BTreeMap<_, _>>>()?;

    let mut stmt = conn.prepare_cached(
        "SELECT id, definition_id, author_kind, author_id, body, disposition, created_at
         FROM comments WHERE term_id = ?1 ORDER BY id",
    )?;
    let comments = stmt
        .query_map([id.as_str()], |r| {
            Ok(Comment {
                id: CommentId::new(r.get::<_, String>(0)?),
                term_id: id.clone(),
                target_definition_id: DefinitionId::new(r.get::<_, String>(1)?),
                author: actor(r.get(2)?, r.get(3)?)?,
                body: r.get(4)?,
                disposition: parse_enum(r.get(5)?)?,
                created_at: parse_ts(&r.get::<_, String>(6)?)?,
            })
        })?
        .map(|c| c.map(|c| (c.id.clone(), c)))
        .collect::<rusqlite::Result<BTreeMap<_, _>>>()?;

    let mut stmt = conn.prepare_cached(
        "SELECT definition_id, user_id, value, cast_at FROM votes WHERE term_id = ?1 ORDER BY definition_id, user_id",
    )?;
    let mut votes: BTreeMap<DefinitionId, BTreeMap<UserId, Vote>> = BTreeMap::new();
    for vote in stmt.query_map([id.as_str()], |r| {
        let value: i64 = r.get(2)?;
        Ok(Vote {
            definition_id: DefinitionId::new(r.get::<_, String>(0)?),
            user_id: UserId::new(r.get::<_, String>(1)?),
            value: VoteValue::try_from(value).map_err(|e| {
                rusqlite::Error::FromSqlConversionFailure(2, rusqlite::types::Type::Integer, Box::new(e))
            })?,
            cast_at: parse_ts(&r.get::<_, String>(3)?)?,
        })
    })? {
        let vote = vote?;
        votes
            .entry(vote.definition_id.clone())
            .or_default()
            .insert(vote.user_id.clone(), vote);
    }

    let negotiation = conn
        .query_row(
            "SELECT phase, pending_feedback, last_activity FROM negotiation WHERE term_id = ?1",
            [id.as_str()],
            |r| {
                let pending: String = r.get(1)?;
                Ok(NegotiationState {
                    term_id: id.clone(),
                    phase: parse_enum(r.get(0)?)?,
                    pending_feedback: serde_json::from_str(&pending).map_err(|e| {
                        rusqlite::Error::FromSqlConversionFailure(1, rusqlite::types::Type::Text, Box::new(e))
                    })?,
                    last_activity: parse_ts(&r.get::<_, String>(2)?)?,
                })
            },
        )
        .optional()?
        .ok_or_else(|| Error::StorageUnavailable(format!("negotiation row missing for {id}")))?;

    Ok(TermState {
        term,
        definitions,
        examples,
        comments,
        votes,
        negotiation,
        version,
    })
}

fn read_events(conn: &Connection, term: Option<&TermId>) -> Result<Vec<ProvenanceEvent>> {
    let mut stmt = conn.prepare_cached(
        "SELECT seq, term_id, occurred_at, actor_kind, actor_id, action, payload FROM events
         WHERE ?1 IS NULL OR term_id = ?1 ORDER BY seq",
    )?;
    let rows = stmt.query_map([term.map(|t| t.as_str())], |r| {
        Ok((
            r.get::<_, i64>(0)?,
            r.get::<_, String>(1)?,
            parse_ts(&r.get::<_, String>(2)?)?,
            actor(r.get(3)?, r.get(4)?)?,
            r.get::<_, String>(5)?,
            r.get::<_, String>(6)?,
        ))
    })?;
    let mut events = Vec::new();
    for row in rows {
        let (seq, term_id, occurred_at, actor, action, payload) = row?;
        let payload: serde_json::Value =
            serde_json::from_str(&payload).map_err(|e| Error::MalformedPayload(e.to_string()))?;
        events.push(ProvenanceEvent {
            seq: seq as u64,
            term_id: TermId::new(term_id),
            occurred_at,
            actor,
            action: Action::from_parts(&action, payload)?,
        });
    }
    Ok(events)
}

fn last_event(conn: &Connection) -> Result<Option<(u64, Timestamp)>> {
    let row = conn
        .query_row(
            "SELECT seq, occurred_at FROM events ORDER BY seq DESC LIMIT 1",
            [],
            |r| Ok((r.get::<_, i64>(0)? as u64, parse_ts(&r.get::<_, String>(1)?)?)),
        )
        .optional()?;
    Ok(row)
}

fn read_user(conn: &Connection, where_clause: &str, key: &str) -> Result<Option<User>> {
    Ok(conn
        .query_row(
            &format!("SELECT id, display_name, identity_subject, role FROM users WHERE {where_clause} = ?1"),
            [key],
            |r| {
                Ok(User {
                    id: UserId::new(r.get::<_, String>(0)?),
                    display_name: r.get(1)?,
                    identity_subject: r.get(2)?,
                    role: parse_enum(r.get(3)?)?,
                })
            },
        )
        .optional()?)
}

fn bump_counter(conn: &Connection, prefix: &str) -> Result<u64> {
    let n: i64 = conn.query_row(
        "INSERT INTO counters (kind, next) VALUES (?1, 2)
         ON CONFLICT (kind) DO UPDATE SET next = next + 1
         RETURNING next - 1",
        [prefix],
        |r| r.get(0),
    )?;
    Ok(n as u64)
}

fn raise_counter(conn: &Connection, prefix: &str, at_least: u64) -> Result<()> {
    conn.execute(
        "INSERT INTO counters (kind, next) VALUES (?1, ?2)
         ON CONFLICT (kind) DO UPDATE SET next = max(next, excluded.next)",
        params![prefix, (at_least + 1) as i64],
    )?;
    Ok(())
}

impl Storage for SqliteStore {
    fn schema_version(&self) -> Result<i64> {
        current_version(&*self.lock()?)
    }

    fn migrate(&self, target: i64) -> Result<i64> {
        let mut conn = self.lock()?;
        let version = migrate_with(&mut conn, MIGRATIONS, target)?;
        self.schema_version.store(version, Ordering::SeqCst);
        Ok(version)
    }

    fn next_id(&self, prefix: &str) -> Result<u64> {
        bump_counter(&*self.ready()?, prefix)
    }

    fn commit(&self, commit: Commit<'_>) -> Result<Vec<u64>> {
        let mut conn = self.ready()?;
        let fault = self.take_fault();
        if fault == Some(CommitFault::Unavailable) {
            return Err(Error::StorageUnavailable("injected fault".into()));
        }
        let tx = conn.transaction()?;
        let current = term_version(&tx, commit.term_id)?;
        match (commit.expected_version, current) {
            (None, None) => {}
            (Some(expected), Some(found)) if expected == found => {}
            (Some(_), None) => return Err(Error::UnknownTerm(commit.term_id.clone())),
            _ => return Err(Error::ConflictRetry),
        }
        let base = commit.expected_version.unwrap_or(0);
        if commit.state.version != base + commit.events.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "state version {} does not account for {} new events on top of {base}",
                commit.state.version,
                commit.events.len()
            )));
        }
        if commit.events.iter().any(|e| &e.term_id != commit.term_id) {
            return Err(Error::InvalidArgument("commit mixes terms".into()));
        }

        write_rows(&tx, commit.state)?;
        if fault == Some(CommitFault::AfterEntityWrites) {
            return Err(Error::StorageUnavailable("injected fault after entity writes".into()));
        }

        let (mut seq, mut previous) = match last_event(&tx)? {
            Some((seq, at)) => (seq, Some(at)),
            None => (0, None),
        };
        let mut term_known = current.is_some();
        let mut seqs = Vec::with_capacity(commit.events.len());
        for draft in commit.events {
            check_append(previous, draft, term_known)?;
            seq += 1;
            insert_event(&tx, &draft.clone().sequenced(seq))?;
            previous = Some(draft.occurred_at);
            term_known = true;
            seqs.push(seq);
        }
        tx.commit()?;
        Ok(seqs)
    }

    fn load_aggregate(&self, term: &TermId) -> Result<TermAggregate> {
        let conn = self.ready()?;
        let state = read_state(&conn, term)?;
        let events = read_events(&conn, Some(term))?;
        Ok(TermAggregate { state, events })
    }

    fn load_state(&self, term: &TermId) -> Result<TermState> {
        read_state(&*self.ready()?, term)
    }

    fn events_for(&self, term: &TermId) -> Result<Vec<ProvenanceEvent>> {
        let conn = self.ready()?;
        if term_version(&conn, term)?.is_none() {
            return Err(Error::UnknownTerm(term.clone()));
        }
        read_events(&conn, Some(term))
    }

    fn all_events(&self) -> Result<Vec<ProvenanceEvent>> {
        read_events(&*self.ready()?, None)
    }

    fn term_ids(&self) -> Result<Vec<TermId>> {
        let conn = self.ready()?;
        let mut stmt = conn.prepare_cached("SELECT id FROM terms ORDER BY id")?;
        let ids = stmt
            .query_map([], |r| r.get::<_, String>(0))?
            .map(|r| r.map(TermId::new))
            .collect::<rusqlite::Result<_>>()?;
        Ok(ids)
    }

    fn term_of_definition(&self, definition: &DefinitionId) -> Result<TermId> {
        let conn = self.ready()?;
        conn.query_row(
            "SELECT term_id FROM definitions WHERE id = ?1",
            [definition.as_str()],
            |r| r.get::<_, String>(0),
        )
        .optional()?
        .map(TermId::new)
        .ok_or_else(|| Error::UnknownDefinition(definition.clone()))
    }

    fn find_active_label(&self, label: &str) -> Result<Option<TermId>> {
        let conn = self.ready()?;
        Ok(conn
            .query_row(
                "SELECT id FROM terms WHERE label_fold = ?1 AND status = 'active'",
                [fold(label)],
                |r| r.get::<_, String>(0),
            )
            .optional()?
            .map(TermId::new))
    }

    fn search_terms(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>> {
        if limit == 0 {
            return Err(Error::InvalidArgument("limit must be at least 1".into()));
        }
        let needle = fold(query);
        if needle.is_empty() {
            return Ok(Vec::new());
        }
        let conn = self.ready()?;
        let mut stmt = conn.prepare_cached(
            "SELECT t.id,
                    CASE WHEN instr(t.label_fold, ?1) > 0 THEN 0
                         WHEN EXISTS (SELECT 1 FROM term_tags g WHERE g.term_id = t.id AND instr(g.tag, ?1) > 0) THEN 1
                         ELSE 2 END AS field
             FROM terms t
             WHERE t.status = 'active'
               AND (instr(t.label_fold, ?1) > 0
                    OR EXISTS (SELECT 1 FROM term_tags g WHERE g.term_id = t.id AND instr(g.tag, ?1) > 0)
                    OR EXISTS (SELECT 1 FROM definitions d WHERE d.term_id = t.id AND instr(d.body_fold, ?1) > 0))
             ORDER BY (field > 0), t.label_fold, t.id
             LIMIT ?2",
        )?;
        let matches = stmt
            .query_map(params![needle, limit as i64], |r| {
                Ok((TermId::new(r.get::<_, String>(0)?), r.get::<_, i64>(1)?))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        drop(stmt);
        matches
            .into_iter()
            .map(|(id, field)| {
                let (term, _) = read_term(&conn, &id)?;
                let definitions = read_definitions(&conn, &id)?;
                let top = rank_definitions(definitions.values()).into_iter().next();
                Ok(SearchHit {
                    term,
                    matched_on: match field {
                        0 => MatchField::Label,
                        1 => MatchField::Tag,
                        _ => MatchField::Definition,
                    },
                    definition_id: top.as_ref().map(|r| r.definition.id.clone()),
                    excerpt: top.map(|r| excerpt(&r.definition.body, EXCERPT_CHARS)),
                })
            })
            .collect()
    }

    fn list_directory(&self, page: usize, page_size: usize) -> Result<Vec<Term>> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "page_size must be between 1 and {MAX_PAGE_SIZE}"
            )));
        }
        let offset = page
            .checked_mul(page_size)
            .ok_or_else(|| Error::InvalidArgument("page out of range".into()))?;
        let conn = self.ready()?;
        let mut stmt = conn.prepare_cached(
            "SELECT id FROM terms WHERE status = 'active' ORDER BY label_fold, id LIMIT ?1 OFFSET ?2",
        )?;
        let ids = stmt
            .query_map(params![page_size as i64, offset as i64], |r| r.get::<_, String>(0))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        drop(stmt);
        ids.into_iter()
            .map(|id| read_term(&conn, &TermId::new(id)).map(|(t, _)| t))
            .collect()
    }

    fn upsert_user(&self, subject: &str, display_name: &str) -> Result<User> {
        if subject.trim().is_empty() {
            return Err(Error::InvalidArgument("identity subject must not be empty".into()));
        }
        let mut conn = self.ready()?;
        let tx = conn.transaction()?;
        if let Some(user) = read_user(&tx, "identity_subject", subject)? {
            return Ok(user);
        }
        let id = UserId::from_counter(bump_counter(&tx, UserId::PREFIX)?);
        let user = User {
            id,
            display_name: display_name.to_owned(),
            identity_subject: subject.to_owned(),
            role: Role::Member,
        };
        tx.execute(
            "INSERT INTO users (id, display_name, identity_subject, role) VALUES (?1, ?2, ?3, ?4)",
            params![user.id.as_str(), user.display_name, user.identity_subject, enum_text(&user.role)],
        )?;
        tx.commit()?;
        Ok(user)
    }

    fn user(&self, id: &UserId) -> Result<Option<User>> {
        read_user(&*self.ready()?, "id", id.as_str())
    }

    fn import(&self, states: &[TermState], events: &[ProvenanceEvent]) -> Result<()> {
        let mut conn = self.ready()?;
        let tx = conn.transaction()?;
        let existing: i64 = tx.query_row(
            "SELECT (SELECT count(*) FROM terms) + (SELECT count(*) FROM events)",
            [],
            |r| r.get(0),
        )?;
        if existing > 0 {
            return Err(Error::InvalidArgument("import needs an empty store".into()));
        }
        let mut highest: BTreeMap<&str, u64> = BTreeMap::new();
        let mut note = |prefix: &'static str, n: Option<u64>| {
            if let Some(n) = n {
                let e = highest.entry(prefix).or_default();
                *e = (*e).max(n);
            }
        };
        let mut voters = BTreeSet::new();
        for state in states {
            write_rows(&tx, state)?;
            note(TermId::PREFIX, state.term.id.counter());
            for id in state.definitions.keys() {
                note(DefinitionId::PREFIX, id.counter());
            }
            for id in state.examples.keys() {
                note(ExampleId::PREFIX, id.counter());
            }
            for id in state.comments.keys() {
                note(CommentId::PREFIX, id.counter());
            }
            voters.extend(state.votes.values().flat_map(|v| v.keys().cloned()));
        }
        for event in events {
            insert_event(&tx, event)?;
            if let Action::AIGenerationRequested { generation_id, .. } = &event.action {
                note(crate::ids::GenerationId::PREFIX, generation_id.counter());
            }
            if let Some(user) = event.actor.user_id() {
                voters.insert(user);
            }
        }
        // Accounts are not part of the event log; keep referenced users resolvable.
        for user in voters {
            if read_user(&tx, "id", user.as_str())?.is_none() {
                tx.execute(
                    "INSERT INTO users (id, display_name, identity_subject, role) VALUES (?1, ?1, ?2, 'member')",
                    params![user.as_str(), format!("imported:{user}")],
                )?;
                note(UserId::PREFIX, user.counter());
            }
        }
        for (prefix, n) in highest {
            raise_counter(&tx, prefix, n)?;
        }
        tx.commit()?;
        Ok(())
    }

    fn is_empty(&self) -> Result<bool> {
        let conn = self.ready()?;
        let n: i64 = conn.query_row(
            "SELECT (SELECT count(*) FROM terms) + (SELECT count(*) FROM events)",
            [],
            |r| r.get(0),
        )?;
        Ok(n == 0)
    }
}
