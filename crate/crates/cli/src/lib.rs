//! Library side of the `irrtool` binary: spec parsing, command dispatch and
//! output formatting.

pub mod command;
pub mod output;
pub mod spec;

pub use command::{run_command, CliError, Command, CommandRequest};
pub use spec::{parse_accumulation, parse_spec, parse_stream, ParseError, Spec};
