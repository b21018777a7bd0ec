mod cli;
mod commands;
mod manifest;
mod policy;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use rsmdp::avg_bellman::AvgError;
use rsmdp::disc_bellman::DiscError;
use rsmdp::gamma_sweep::SweepError;
use rsmdp::mdp::{load_mdp_with, LoadOptions, RNG_ALGORITHM};
use rsmdp::poisson::PoissonError;
use rsmdp::{corpus, Mdp, ModelError};

use cli::{Cli, Command, ModelArgs};
use commands::{execute, Output};
use manifest::{Manifest, ModelSource};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ADVISORY: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

/// Bad arguments that clap cannot catch.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn resolve_model(args: &ModelArgs) -> Result<(Mdp, ModelSource)> {
    if corpus::IDS.contains(&args.model.as_str()) {
        if let Some(eps) = args.epsilon {
            if args.model != "ex4" {
                return Err(UsageError("--epsilon applies to ex4 only".into()).into());
            }
            if !(0.0..=0.1).contains(&eps) {
                return Err(UsageError(format!("--epsilon must lie in [0, 0.1], got {eps}")).into());
            }
        }
        let mdp = corpus::by_id(&args.model, args.epsilon).expect("id is bundled");
        return Ok((
            mdp,
            ModelSource::Example {
                id: args.model.clone(),
                epsilon: args.epsilon,
            },
        ));
    }
    if args.epsilon.is_some() {
        return Err(UsageError("--epsilon applies to ex4 only".into()).into());
    }
    let text = fs::read_to_string(&args.model)
        .map_err(|e| UsageError(format!("cannot read model '{}': {e}", args.model)))?;
    let mdp = model_from_text(&text, args.renormalize)?;
    Ok((
        mdp,
        ModelSource::File {
            path: args.model.clone(),
            document: text,
        },
    ))
}

fn model_from_text(text: &str, renormalize: bool) -> Result<Mdp> {
    Ok(load_mdp_with(text, LoadOptions { renormalize })?)
}

fn model_from_source(source: &ModelSource, args: &ModelArgs) -> Result<Mdp> {
    match source {
        ModelSource::Example { id, epsilon } => {
            Ok(corpus::by_id(id, *epsilon).with_context(|| format!("unknown example '{id}'"))?)
        }
        ModelSource::File { document, .. } => model_from_text(document, args.renormalize),
    }
}

/// Writes to standard output, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_outputs(dir: &Path, output: &Output) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut names = Vec::new();
    for (name, contents) in &output.files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        names.push(name.clone());
    }
    Ok(names)
}

fn run(cli: Cli, raw_args: Vec<String>) -> Result<u8> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest);
    }
    let started = manifest::now_ms();
    let model_args = cli.command.model().expect("every other command takes a model");
    let (mdp, source) = resolve_model(model_args)?;
    let output = execute(&cli.command, &mdp, cli.format)?;
    emit(&output.stdout)?;
    if let Some(dir) = &cli.out {
        let outputs = write_outputs(dir, &output)?;
        let m = Manifest {
            tool: "rsmdp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cli.command.name().into(),
            args: raw_args,
            model: Some(source),
            parameters: serde_json::to_value(&cli.command)?,
            rng: RNG_ALGORITHM.into(),
            started_unix_ms: started,
            finished_unix_ms: manifest::now_ms(),
            outputs,
        };
        manifest::write(dir, &m)?;
    }
    Ok(if output.advisory { EXIT_ADVISORY } else { 0 })
}

fn replay(path: &Path) -> Result<u8> {
    let m = manifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut argv = vec!["rsmdp".to_string()];
    argv.extend(m.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).context("manifest arguments no longer parse")?;
    let model_args = cli
        .command
        .model()
        .context("manifest does not record a model command")?;
    let source = m.model.as_ref().context("manifest has no model")?;
    let mdp = model_from_source(source, model_args)?;
    let output = execute(&cli.command, &mdp, cli.format)?;
    let mut identical = true;
    for name in &m.outputs {
        let recorded = fs::read_to_string(dir.join(name))
            .with_context(|| format!("reading recorded output {name}"))?;
        let fresh = output.files.iter().find(|(n, _)| n == name).map(|(_, c)| c);
        let same = fresh == Some(&recorded);
        identical &= same;
        emit(&format!("{} {name}\n", if same { "identical" } else { "differs" }))?;
    }
    Ok(if identical { 0 } else { EXIT_FAILURE })
}

/// Maps an error to the documented exit codes.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<ModelError>() {
            return EXIT_USAGE;
        }
        if let Some(AvgError::NotConverged { .. }) = cause.downcast_ref() {
            return EXIT_NOT_CONVERGED;
        }
        if let Some(PoissonError::NotConverged { .. }) = cause.downcast_ref() {
            return EXIT_NOT_CONVERGED;
        }
        match cause.downcast_ref::<DiscError>() {
            Some(DiscError::PolicyIteration(_))
            | Some(DiscError::Poisson(PoissonError::NotConverged { .. }))
            | Some(DiscError::Avg(AvgError::NotConverged { .. })) => return EXIT_NOT_CONVERGED,
            Some(DiscError::Model(_)) => return EXIT_USAGE,
            _ => {}
        }
        match cause.downcast_ref::<SweepError>() {
            Some(SweepError::Model(_)) | Some(SweepError::Window(..)) | Some(SweepError::Step(_)) => {
                return EXIT_USAGE
            }
            _ => {}
        }
        if let Some(PoissonError::Model(_)) = cause.downcast_ref() {
            return EXIT_USAGE;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw_args: Vec<String> = std::env::args().skip(1).collect();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli, raw_args) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
