use rusqlite::Connection;

use crate::error::{Error, Result};

pub(crate) struct Migration {
    pub version: i64,
    pub sql: &'static str,
}

pub(crate) const MIGRATIONS: &[Migration] = &[
    Migration {
        version: 1,
        sql: include_str!("../../migrations/0001_initial.sql"),
    },
    Migration {
        version: 2,
        sql: include_str!("../../migrations/0002_lookup_indexes.sql"),
    },
];

pub const LATEST_SCHEMA_VERSION: i64 = 2;

pub(crate) fn current_version(conn: &Connection) -> Result<i64> {
    Ok(conn.query_row("PRAGMA user_version", [], |r| r.get(0))?)
}

/// Apply `migrations` in order up to `target`, one transaction each.
pub(crate) fn migrate_with(conn: &mut Connection, migrations: &[Migration], target: i64) -> Result<i64> {
    let current = current_version(conn)?;
    let latest = migrations.last().map_or(0, |m| m.version);
    if target < current {
        return Err(Error::InvalidArgument(format!(
            "cannot downgrade schema from {current} to {target}"
        )));
    }
    if target > latest {
        return Err(Error::InvalidArgument(format!(
            "no migration reaches version {target} (latest is {latest})"
        )));
    }
    for migration in migrations
        .iter()
        .filter(|m| m.version > current && m.version <= target)
    {
        let failure = |e: rusqlite::Error| Error::MigrationFailure {
            version: migration.version,
            detail: e.to_string(),
        };
        let tx = conn.transaction().map_err(failure)?;
        tx.execute_batch(migration.sql).map_err(failure)?;
        tx.pragma_update(None, "user_version", migration.version)
            .map_err(failure)?;
        tx.commit().map_err(failure)?;
    }
    current_version(conn)
}
