//! Command-line front end.
//!
//! Option values come from flags, then the `--config` TOML file, then built-in
//! defaults. The resolved set is echoed to stderr and embedded in every file.
//! Exit status: 0 success, 1 usage or input error, 2 numerical-contract
//! violation (the data file is still written).

pub mod commands;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use commands::{ChargeArgs, OutputArgs, ProtocolArgs, QfiArgs, Report, SpinScalingArgs, SqueezeArgs};
use output::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Contract(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Contract(m) => m,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Contract(_) => CliError::Contract(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("I/O error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "dualq", version, about = "Two-mode quantum battery and sensor simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rabi charging of a Fock state in one charge sector.
    Charge(ChargeArgs),
    /// Quantum Fisher information of b†b along the charging trajectory.
    Qfi(QfiArgs),
    /// Least quadrature variance along the evolution of a coherent state.
    Squeeze(SqueezeArgs),
    /// Charging power of the one-axis-twisting spin battery versus N.
    SpinScaling(SpinScalingArgs),
    /// Charge, sense, recharge, measure.
    Protocol(ProtocolArgs),
    /// Run a batch of jobs described in a TOML file.
    Sweep(sweep::SweepArgs),
}

/// A subcommand that produces one data file.
pub trait Job: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    fn run(&mut self) -> Result<Report, CliError>;
    fn output(&mut self) -> &mut OutputArgs;
    fn config_path(&self) -> Option<&Path>;
}

macro_rules! job {
    ($ty:ty, $name:literal, $f:path) => {
        impl Job for $ty {
            const NAME: &'static str = $name;
            fn run(&mut self) -> Result<Report, CliError> {
                $f(self)
            }
            fn output(&mut self) -> &mut OutputArgs {
                &mut self.out
            }
            fn config_path(&self) -> Option<&Path> {
                self.config.as_deref()
            }
        }
    };
}

job!(ChargeArgs, "charge", commands::charge);
job!(QfiArgs, "qfi", commands::qfi);
job!(SqueezeArgs, "squeeze", commands::squeeze);
job!(SpinScalingArgs, "spin-scaling", commands::spin_scaling);
job!(ProtocolArgs, "protocol", commands::protocol);

/// Keys accepted in a config table for `T`.
fn known_keys<T: Job>() -> Vec<String> {
    match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Overlay the non-null fields of `flags` on `file`.
pub fn merge<T: Job>(flags: &T, file: Option<toml::Table>) -> Result<T, CliError> {
    let mut base = match file {
        Some(t) => serde_json::to_value(t).map_err(|e| CliError::Usage(e.to_string()))?,
        None => Value::Object(Default::default()),
    };
    let obj = base.as_object_mut().expect("tables map to objects");
    let known = known_keys::<T>();
    if let Some(k) = obj.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Usage(format!("unknown option `{k}` for {}", T::NAME)));
    }
    if let Ok(Value::Object(over)) = serde_json::to_value(flags) {
        for (k, v) in over {
            if !v.is_null() {
                obj.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| CliError::Usage(format!("{}: {e}", T::NAME)))
}

pub fn read_toml(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Run a job and write its file. A contract violation is reported after writing.
pub fn run_job<T: Job>(args: &mut T) -> Result<(PathBuf, Value), CliError> {
    let report = args.run()?;
    let out = args.output();
    let format = *out.format.get_or_insert(Format::infer(out.output.as_deref()));
    let path = out.output.clone().unwrap_or_else(|| PathBuf::from("-"));
    let mut meta = report.meta;
    // The output settings were filled in after the config snapshot was taken.
    meta["config"]["format"] = serde_json::to_value(format).unwrap_or(Value::Null);
    output::emit(Some(&path), &report.table.render(&meta, format))?;
    match report.violation {
        Some(v) => Err(CliError::Contract(v)),
        None => Ok((path, meta["config"].clone())),
    }
}

fn single<T: Job>(flags: T) -> Result<(), CliError> {
    let file = flags.config_path().map(read_toml).transpose()?;
    let mut args = merge(&flags, file)?;
    let result = run_job(&mut args);
    let echoed = serde_json::to_string(&args).unwrap_or_default();
    eprintln!("resolved config: {echoed}");
    result.map(|_| ())
}

/// Parse `args` and run; the returned code is the process exit status.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Charge(a) => single(a),
        Command::Qfi(a) => single(a),
        Command::Squeeze(a) => single(a),
        Command::SpinScaling(a) => single(a),
        Command::Protocol(a) => single(a),
        Command::Sweep(a) => sweep::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
