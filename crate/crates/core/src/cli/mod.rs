//! Config-driven scenario runner behind the `pcompact` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::Scenario;
pub use output::{main_with_args, write_outputs, Format};
pub use run::{run, Outcome, Report, Series, Task, TaskResult};
