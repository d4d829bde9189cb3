//! Regret accounting, normalized reward and offline replay.

mod event_log;
mod regret;
mod replay;

pub use event_log::{read_event_log, write_event_log, EventLog, EventLogRecord};
pub use regret::{normalized_reward, write_regret_csv, RegretCurve};
pub use replay::{replay, ReplayResult};
