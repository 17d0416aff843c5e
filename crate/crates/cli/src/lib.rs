//! Command-line pipeline and HTTP editing service over the `bathyedit`
//! library.

pub mod args;
pub mod commands;
pub mod error;
pub mod service;

use args::{Cli, Command};
use error::CliError;

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    log::info!("bathyedit {} {:?}", env!("CARGO_PKG_VERSION"), cli.command);
    match cli.command {
        Command::Generate { spec, out } => commands::generate(&spec, &out),
        Command::Split { corpus, split, out } => commands::split_cmd(&corpus, &split, &out),
        Command::Train {
            corpus,
            split,
            train,
            out,
        } => commands::train_cmd(&corpus, &split, &train, &out),
        Command::Score { model, corpus, out } => commands::score(&model, &corpus, &out),
        Command::Roc {
            scores,
            corpus,
            split,
            side,
            out,
        } => commands::roc_cmd(&scores, &corpus, split.as_deref(), side, &out),
        Command::Matrix {
            corpus,
            split,
            train,
            out,
        } => commands::matrix(&corpus, &split, &train, &out),
        Command::Improvement { matrix, out } => commands::improvement(&matrix, &out),
        Command::SeqReport {
            corpus,
            chunk_length,
            test_fraction,
            seed,
            ablate_proxies,
            train,
            out,
        } => commands::seq_report(&corpus, chunk_length, test_fraction, seed, ablate_proxies, &train, &out),
        Command::Serve {
            corpus,
            model,
            edit_log,
            addr,
        } => {
            let session = service::Session::open(&corpus, &model, &edit_log)?;
            tokio::runtime::Runtime::new()
                .map_err(|e| CliError::Service(e.to_string()))?
                .block_on(service::serve(session, addr))
        }
    }
}
