//! Library side of the `cocrn` command-line tool: subcommands, sweep specs,
//! output formatting and the validation battery.

pub mod commands;
pub mod format;
pub mod sweep;
pub mod validate;
