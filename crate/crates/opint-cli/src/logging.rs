//! Three-level stderr logging switched by OPINT_LOG (quiet, info, debug).
//! Info is the default. Anything else in the variable is a config error, in
//! line with the fail-closed parsing everywhere else.

use std::sync::OnceLock;

use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Level {
    Quiet,
    Info,
    Debug,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

/// Reads OPINT_LOG once. Call early; later calls keep the first value.
pub fn init() -> Result<Level, CliError> {
    let level = match std::env::var("OPINT_LOG") {
        Err(_) => Level::Info,
        Ok(v) => match v.as_str() {
            "quiet" => Level::Quiet,
            "info" => Level::Info,
            "debug" => Level::Debug,
            other => {
                return Err(CliError::Config(format!(
                    "OPINT_LOG must be quiet, info or debug, got {other:?}"
                )))
            }
        },
    };
    Ok(*LEVEL.get_or_init(|| level))
}

fn level() -> Level {
    *LEVEL.get_or_init(|| Level::Info)
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[opint] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[opint:debug] {}", msg.as_ref());
    }
}
