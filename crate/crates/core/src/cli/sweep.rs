//! Batch runs: every `[[job]]` entry expands over the cartesian product of its
//! `grid` table and each combination writes one file. A `manifest.json`
//! listing every job and its outcome is written once all jobs have finished.
//!
//! ```toml
//! output_dir = "runs"
//!
//! [[job]]
//! command = "charge"
//! output = "charge_n{n}_q{q}.csv"
//! params = { g = 1.0 }
//! grid = { n = [2, 4], q = [4, 8] }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::commands::{ChargeArgs, ProtocolArgs, QfiArgs, SpinScalingArgs, SqueezeArgs};
use super::{merge, read_toml, run_job, CliError, Job};

#[derive(clap::Args, Debug)]
pub struct SweepArgs {
    /// Sweep description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for result files and the manifest; overrides `output_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Deserialize, Serialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub job: Vec<JobSpec>,
}

#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: String,
    /// File name template; `{key}` is replaced by the grid value of `key`.
    pub output: String,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<toml::Value>>,
}

/// One concrete run after grid expansion.
#[derive(Debug, Clone)]
pub struct Expanded {
    pub index: usize,
    pub command: String,
    pub params: toml::Table,
    pub output: PathBuf,
}

fn display(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Expand every job over its grid; output paths must be distinct.
pub fn expand(file: &SweepFile, out_dir: &std::path::Path) -> Result<Vec<Expanded>, CliError> {
    let mut out = Vec::new();
    for spec in &file.job {
        let mut combos: Vec<Vec<(&String, &toml::Value)>> = vec![Vec::new()];
        for (key, values) in &spec.grid {
            if values.is_empty() {
                return Err(CliError::Usage(format!("grid entry `{key}` is empty")));
            }
            combos = combos
                .into_iter()
                .flat_map(|c| values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key, v));
                    c
                }))
                .collect();
        }
        for combo in combos {
            let mut params = spec.params.clone();
            let mut name = spec.output.clone();
            for (k, v) in combo {
                params.insert(k.clone(), v.clone());
                name = name.replace(&format!("{{{k}}}"), &display(v));
            }
            if name.contains('{') || name.contains('}') {
                return Err(CliError::Usage(format!("unresolved placeholder in output `{name}`")));
            }
            out.push(Expanded { index: out.len(), command: spec.command.clone(), params, output: out_dir.join(name) });
        }
    }
    let mut seen = HashSet::new();
    for e in &out {
        if !seen.insert(e.output.clone()) {
            return Err(CliError::Usage(format!("duplicate output path {}", e.output.display())));
        }
    }
    Ok(out)
}

fn launch<T: Job>(e: &Expanded) -> Result<Value, CliError> {
    let mut args: T = merge(&T::default(), Some(e.params.clone()))?;
    args.output().output = Some(e.output.clone());
    run_job(&mut args).map(|(_, cfg)| cfg)
}

fn dispatch(e: &Expanded) -> Result<Value, CliError> {
    match e.command.as_str() {
        "charge" => launch::<ChargeArgs>(e),
        "qfi" => launch::<QfiArgs>(e),
        "squeeze" => launch::<SqueezeArgs>(e),
        "spin-scaling" => launch::<SpinScalingArgs>(e),
        "protocol" => launch::<ProtocolArgs>(e),
        other => Err(CliError::Usage(format!("unknown command `{other}` in sweep"))),
    }
}

pub fn run(a: SweepArgs) -> Result<(), CliError> {
    let table = read_toml(&a.config)?;
    let file: SweepFile = table.try_into().map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    let out_dir = a.out_dir.clone().or_else(|| file.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let jobs = expand(&file, &out_dir)?;
    std::fs::create_dir_all(&out_dir)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = a.workers {
        if w == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcomes: Vec<Result<Value, CliError>> = pool.install(|| jobs.par_iter().map(dispatch).collect());

    let mut worst: Option<CliError> = None;
    let entries: Vec<Value> = jobs
        .iter()
        .zip(&outcomes)
        .map(|(e, r)| {
            let (status, message, config) = match r {
                Ok(cfg) => ("ok", Value::Null, cfg.clone()),
                Err(err) => {
                    if worst.as_ref().is_none_or(|w| err.exit_code() > w.exit_code()) {
                        worst = Some(err.clone());
                    }
                    let s = if err.exit_code() == 2 { "contract_violation" } else { "error" };
                    (s, Value::String(err.message().to_string()), Value::Null)
                }
            };
            json!({
                "index": e.index,
                "command": e.command,
                "output": e.output,
                "params": e.params,
                "status": status,
                "message": message,
                "config": config,
            })
        })
        .collect();
    let manifest = json!({
        "tool": "dualq",
        "version": crate::VERSION,
        "sweep": file,
        "jobs": entries,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    let Some(e) = worst else { return Ok(()) };
    let failed = outcomes.iter().filter(|r| r.is_err()).count();
    let msg = format!("{failed} of {} jobs failed: {}", jobs.len(), e.message());
    Err(match e {
        CliError::Contract(_) => CliError::Contract(msg),
        CliError::Usage(_) => CliError::Usage(msg),
    })
}
