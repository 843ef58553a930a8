//! Argument parsing, report serialization and exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, ValueEnum};

use super::config::Scenario;
use super::run::{run, Outcome, Report, Series, Task};

pub const EXIT_RAN: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Parser)]
#[command(
    name = "pcompact",
    version,
    about = "Projective compactness checks on coordinate charts"
)]
struct Args {
    /// Task to run.
    #[arg(value_enum)]
    task: Task,
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; without it the JSON report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// Writes `report.json` and one `<name>.csv` per series into `dir`.
pub fn write_outputs(
    dir: &Path,
    report: &Report,
    series: &[Series],
    format: Format,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    if format != Format::Csv {
        let path = dir.join("report.json");
        fs::write(&path, report_json(report)?)
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    if format != Format::Json {
        for s in series {
            let path = dir.join(format!("{}.csv", s.name));
            write_csv(&path, s).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_csv(path: &Path, s: &Series) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?;
    w.write_record(&s.header)?;
    for row in &s.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_json(report: &Report) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_RAN
            };
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_INVALID;
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return EXIT_INVALID;
        }
    };
    let scenario = match Scenario::from_toml(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let outcome = std::panic::catch_unwind(|| run(&scenario, args.task, args.seed));
    let (report, series) = match outcome {
        Ok(Outcome::Ran(r, s)) => (r, s),
        Ok(Outcome::Invalid(e)) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
        Err(_) => {
            eprintln!("error: internal failure");
            return EXIT_INTERNAL;
        }
    };
    let written = match &args.out {
        Some(dir) => write_outputs(dir, &report, &series, args.format),
        None => report_json(&report).and_then(|t| {
            std::io::stdout().write_all(t.as_bytes())?;
            Ok(vec![])
        }),
    };
    match written {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            EXIT_RAN
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INTERNAL
        }
    }
}
