//! `unlearn`: train, unlearn and evaluate propensity-score models from the
//! command line.
//!
//! Exit codes: 0 success, 1 environment/IO error, 2 data or validation
//! error, 3 numeric failure.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unlearn_core::checkpoint::Checkpoint;
use unlearn_core::{load_dataset, ErrorKind, Schema};

use crate::config::{read_json, Overrides, RunConfig};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn from_core(e: unlearn_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Io => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }

    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

#[derive(Debug, Parser)]
#[command(name = "unlearn", version, about = "Machine unlearning for propensity-score models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a CSV file loads under the schema and summarize it.
    Validate {
        #[arg(long)]
        data: PathBuf,
        /// JSON schema file (column-name mapping).
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Run config; its `schema` entry is used when --schema is absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full three-model experiment and write all artifacts.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a CSV file with a saved checkpoint.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

fn load_schema(schema: Option<&PathBuf>, config: Option<&PathBuf>) -> Result<Schema, CliError> {
    match (schema, config) {
        (Some(path), _) => read_json::<Schema>(path),
        (None, Some(path)) => read_json::<RunConfig>(path).map(|c| c.schema),
        (None, None) => Ok(Schema::default()),
    }
}

fn cmd_validate(data: &Path, schema: &Schema) -> Result<(), CliError> {
    let ds = load_dataset(data, schema).map_err(CliError::from_core)?;
    println!("rows: {}", ds.len());
    println!("covariates: {}", ds.dim());
    println!("treated: {}", ds.treated_count());
    println!("control: {}", ds.control_count());
    Ok(())
}

fn cmd_score(
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    schema: Option<&PathBuf>,
) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)
        .map_err(|e| CliError::from_core(e).context(format!("checkpoint {}", checkpoint.display())))?;
    let schema = match schema {
        Some(path) => read_json::<Schema>(path)?,
        None => Schema {
            covariates: ckpt.covariate_names.clone(),
            ..Schema::default()
        },
    };
    let ds = load_dataset(data, &schema).map_err(CliError::from_core)?;
    let scores = ckpt.score(&ds).map_err(CliError::from_core)?;
    std::fs::write(out, run::scores_csv(&ds.row_ids, &scores))
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", out.display())))?;
    println!("scored {} rows -> {}", scores.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UNLEARN_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate {
            data,
            schema,
            config,
        } => load_schema(schema.as_ref(), config.as_ref()).and_then(|s| cmd_validate(data, &s)),
        Command::Run {
            data,
            config,
            out_dir,
            overrides,
        } => run::cmd_run(data, config.as_ref(), out_dir, overrides),
        Command::Score {
            checkpoint,
            data,
            out,
            schema,
        } => cmd_score(checkpoint, data, out, schema.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
