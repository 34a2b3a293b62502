//! Scenario files, CSV logs, reports and the subcommands of the
//! `coordfeas` binary.

pub mod commands;
pub mod output;
pub mod scenario_file;
