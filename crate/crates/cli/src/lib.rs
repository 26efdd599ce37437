//! Pipeline orchestration behind the `hgml` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod run;

use args::{Cli, Command};
use hgml_core::learner::compare::render_table;

pub use error::{CliError, Result};

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let run = commands::synth(&a)?;
            println!("{}", run.dir.display());
        }
        Command::Ingest(a) => {
            let run = commands::ingest(&a)?;
            println!("{}", run.dir.display());
        }
        Command::Pairs(a) => print!("{}", commands::pairs(&a)?),
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new().map_err(error::io("tokio runtime"))?;
            rt.block_on(commands::serve(&a))?;
        }
        Command::AutoAnnotate(a) => {
            let s = commands::auto_annotate(&a)?;
            println!("accepted {} of {} attempts", s.accepted, s.attempts);
            if s.accepted < a.models {
                eprintln!("warning: wanted {} accepted models", a.models);
            }
        }
        Command::Featurize(a) => {
            let meta = commands::featurize(&a)?;
            println!(
                "{} columns, {} train rows, {} test rows",
                meta.model_ids.len(),
                meta.train_rows,
                meta.test_rows
            );
        }
        Command::Train(a) => {
            let t = commands::train(&a)?;
            println!(
                "{}: train accuracy {:.3}, test accuracy {:.3}",
                t.arm, t.train_accuracy, t.test_accuracy
            );
        }
        Command::Compare(a) => {
            let report = commands::compare(&a)?;
            print!("{}", render_table(&[report.row]));
        }
        Command::Report(a) => print!("{}", commands::report(&a)?),
    }
    Ok(())
}
