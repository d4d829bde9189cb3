//! Line-oriented logged-bandit-feedback format.
//!
//! ```text
//! codband-event-log v1 d=<dim> candidates=<count>
//! <round>,<user_id>,<logged_arm>,<reward>,<x₀₀>,…,<x₀,d−1>,<x₁₀>,…
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a written log
//! reproduces every value exactly.

use std::io::{BufRead, Write};

use crate::bayes_linear::Context;
use crate::environment::UserId;
use crate::error::{Error, Result};

const MAGIC: &str = "codband-event-log";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct EventLogRecord {
    pub round: u64,
    pub user: UserId,
    pub candidates: Vec<Context>,
    pub logged_arm: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub dim: usize,
    pub n_candidates: usize,
    pub records: Vec<EventLogRecord>,
}

impl EventLog {
    pub fn new(dim: usize, n_candidates: usize) -> Self {
        EventLog {
            dim,
            n_candidates,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: EventLogRecord) -> Result<()> {
        if record.candidates.len() != self.n_candidates {
            return Err(Error::Config(format!(
                "record has {} candidates, log declares {}",
                record.candidates.len(),
                self.n_candidates
            )));
        }
        if record.logged_arm >= record.candidates.len() {
            return Err(Error::param("logged_arm", "index beyond candidate count"));
        }
        for c in &record.candidates {
            Error::check_dim(self.dim, c.dim())?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Mean reward of the logging policy.
    pub fn logged_reward_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.reward).sum::<f64>() / self.records.len() as f64
    }
}

pub fn write_event_log<W: Write>(mut w: W, log: &EventLog) -> Result<()> {
    writeln!(
        w,
        "{MAGIC} {VERSION} d={} candidates={}",
        log.dim, log.n_candidates
    )?;
    for r in &log.records {
        write!(w, "{},{},{},{}", r.round, r.user, r.logged_arm, r.reward)?;
        for c in &r.candidates {
            for v in c.as_slice() {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn header_field(token: Option<&str>, key: &str, line: usize) -> Result<usize> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing `{key}=` in header")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<n>`, found `{token}`")))?;
    value
        .parse()
        .map_err(|_| parse_err(line, format!("bad integer in `{token}`")))
}

pub fn read_event_log<R: BufRead>(reader: R) -> Result<EventLog> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty log"))?;
    let header = header?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(parse_err(1, format!("expected `{MAGIC}` header")));
    }
    if tokens.next() != Some(VERSION) {
        return Err(parse_err(
            1,
            format!("unsupported version, expected {VERSION}"),
        ));
    }
    let dim = header_field(tokens.next(), "d", 1)?;
    let n_candidates = header_field(tokens.next(), "candidates", 1)?;
    if dim == 0 || n_candidates == 0 {
        return Err(parse_err(1, "d and candidates must be positive"));
    }
    let expected_fields = 4 + dim * n_candidates;
    let mut log = EventLog::new(dim, n_candidates);

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != expected_fields {
            return Err(parse_err(
                lineno,
                format!("expected {expected_fields} fields, found {}", fields.len()),
            ));
        }
        let int = |s: &str, what: &str| -> Result<u64> {
            s.trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad {what} `{s}`")))
        };
        let float = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad number `{s}`")))
        };
        let round = int(fields[0], "round")?;
        let user = int(fields[1], "user id")? as UserId;
        let logged_arm = int(fields[2], "arm index")? as usize;
        let reward = float(fields[3])?;
        if logged_arm >= n_candidates {
            return Err(parse_err(
                lineno,
                format!("logged arm {logged_arm} out of range"),
            ));
        }
        let mut candidates = Vec::with_capacity(n_candidates);
        for chunk in fields[4..].chunks(dim) {
            let values = chunk.iter().map(|s| float(s)).collect::<Result<Vec<_>>>()?;
            let ctx = Context::new(values).map_err(|e| parse_err(lineno, e.to_string()))?;
            candidates.push(ctx);
        }
        log.records.push(EventLogRecord {
            round,
            user,
            candidates,
            logged_arm,
            reward,
        });
    }
    Ok(log)
}
