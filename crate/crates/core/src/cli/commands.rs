//! Subcommand arguments and their execution.
//!
//! Every argument struct doubles as the schema of the matching config-file
//! table: all fields are optional, and `resolve` fills defaults in place so the
//! struct can be echoed as the resolved configuration.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::output::{Format, Table};
use super::CliError;
use crate::fockspace::{charge_operator, number_b, Basis};
use crate::metrics::{qfi_pure, real_expectation};
use crate::model::{build_hamiltonian, BatteryModelParams, ChargingTimes, CircuitParams};
use crate::propagate::{uniform_grid, Leakage, Propagator, QState};
use crate::protocol::{run_protocol, ProtocolParams};
use crate::spinoat::{charging_power_exponent, log_spaced, scaling_series};
use crate::squeezeopt::{squeeze_trajectory, OptimizerStatus, TrajectoryMode};

/// Outcome of a command: the data, its metadata, and a contract violation
/// that should turn into exit status 2 once the file is written.
pub struct Report {
    pub table: Table,
    pub meta: Value,
    pub violation: Option<String>,
}

/// Tolerance of the conservation checks on Fock-sector runs.
const CONSERVATION_TOL: f64 = 1e-10;

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct OutputArgs {
    /// Output file; `-` or absent writes to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Defaults to the output file extension, else CSV.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct ModelArgs {
    /// Nonlinearity order n.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Nonlinear coupling g_n, used as given.
    #[arg(long)]
    pub g_n: Option<f64>,
    /// Linear reference coupling; g_n then follows from the speed-limit match.
    #[arg(long)]
    pub g: Option<f64>,
    /// Charge used by the speed-limit match (defaults to the run's charge).
    #[arg(long)]
    pub q_ref: Option<usize>,
    /// Circuit coupling: Josephson energy E_J (needs --lambda1 and --lambda2).
    #[arg(long)]
    pub josephson_energy: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
}

impl ModelArgs {
    /// Build the model. Without an explicit coupling the fallback is either
    /// `default_g_n` or the speed-limit match of `g = 1` at charge `q`.
    fn resolve(&mut self, default_n: usize, q: usize, default_g_n: Option<f64>) -> Result<BatteryModelParams, CliError> {
        let n = *self.n.get_or_insert(default_n);
        let omega0 = *self.omega0.get_or_insert(1.0);
        let circuit = self.josephson_energy.is_some() || self.lambda1.is_some() || self.lambda2.is_some();
        let chosen = [self.g_n.is_some(), self.g.is_some(), circuit].iter().filter(|b| **b).count();
        if chosen > 1 {
            return Err(CliError::Usage("give only one of g_n, g, or the circuit parameters".into()));
        }
        let model = if let Some(g_n) = self.g_n {
            BatteryModelParams::with_coupling(n, omega0, g_n)?
        } else if circuit {
            let (Some(e), Some(l1), Some(l2)) = (self.josephson_energy, self.lambda1, self.lambda2) else {
                return Err(CliError::Usage("circuit coupling needs josephson_energy, lambda1 and lambda2".into()));
            };
            BatteryModelParams::from_circuit(omega0, CircuitParams { josephson_energy: e, lambda1: l1, lambda2: l2, n })?
        } else if let (None, Some(g_n)) = (self.g, default_g_n) {
            BatteryModelParams::with_coupling(n, omega0, g_n)?
        } else {
            let g = *self.g.get_or_insert(1.0);
            let q_ref = *self.q_ref.get_or_insert(q);
            BatteryModelParams::speed_limit_matched(n, omega0, g, q_ref)?
        };
        Ok(model)
    }
}

fn base_meta(command: &str, config: &impl Serialize) -> Value {
    json!({
        "tool": "dualq",
        "version": crate::VERSION,
        "command": command,
        "config": config,
    })
}

fn model_meta(m: &BatteryModelParams) -> Value {
    json!({ "n": m.n, "omega0": m.omega0, "g_n": m.g_n, "provenance": m.provenance })
}

fn sector_meta(n: usize, q: usize) -> Value {
    json!({ "kind": "sector", "n": n, "charge": q, "closed": true })
}

fn time_window(t_min: &mut Option<f64>, t_max: &mut Option<f64>, points: &mut Option<usize>, d_max: f64, d_points: usize) -> Result<Vec<f64>, CliError> {
    let t0 = *t_min.get_or_insert(0.0);
    let t1 = *t_max.get_or_insert(d_max);
    let k = *points.get_or_insert(d_points);
    if !(t0.is_finite() && t1.is_finite() && t1 > t0 && t0 >= 0.0) || k < 2 {
        return Err(CliError::Usage("time window needs 0 ≤ t_min < t_max and at least 2 points".into()));
    }
    Ok(uniform_grid(t0, t1, k))
}

// ---------------------------------------------------------------- charge

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct ChargeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Conserved charge Q; the run starts in |1, Q-n>.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Defaults to twice the full-charge time.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn charge(a: &mut ChargeArgs) -> Result<Report, CliError> {
    let n = a.model.n.unwrap_or(4);
    let q = *a.q.get_or_insert(n);
    if q < n {
        return Err(CliError::Usage(format!("charge Q = {q} is below n = {n}")));
    }
    let model = a.model.resolve(4, q, None)?;
    let times = ChargingTimes::new(n, q, model.g_n, model.omega0)?;
    let grid = time_window(&mut a.t_min, &mut a.t_max, &mut a.points, 2.0 * times.t_c, 401)?;

    let basis = Basis::sector(n, q)?;
    let psi0 = QState::fock(&basis, 1, q - n)?;
    let h = build_hamiltonian(&model, true, &basis);
    let free = build_hamiltonian(&model, false, &basis);
    let nb = number_b(&basis);
    let charge_op = charge_operator(&basis, n);
    let e0 = real_expectation(&free, &psi0)?;

    let mut table = Table::new(&["t", "p_initial", "p_final", "mean_nb", "mean_q", "energy_free", "norm"]);
    let mut drift: f64 = 0.0;
    for ev in Propagator::new(&h)?.evolve_grid(&psi0, &grid)? {
        let s = &ev.state;
        let mq = real_expectation(&charge_op, s)?;
        let ef = real_expectation(&free, s)?;
        drift = drift.max((s.norm() - 1.0).abs()).max((mq - q as f64).abs()).max((ef - e0).abs());
        table.push(vec![
            ev.t.into(),
            s.probability(1, q - n).into(),
            s.probability(0, q).into(),
            real_expectation(&nb, s)?.into(),
            mq.into(),
            ef.into(),
            s.norm().into(),
        ]);
    }

    let mut meta = base_meta("charge", a);
    meta["model"] = model_meta(&model);
    meta["basis"] = sector_meta(n, q);
    meta["leakage"] = json!({ "max": 0.0, "contaminated": false });
    meta["seed"] = Value::Null;
    meta["charging"] = json!(times);
    meta["conservation_drift"] = json!(drift);
    let violation = (drift > CONSERVATION_TOL).then(|| format!("conservation drift {drift:e} exceeds {CONSERVATION_TOL:e}"));
    Ok(Report { table, meta, violation })
}

// ---------------------------------------------------------------- qfi

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct QfiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Defaults to the full-charge time.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Odd counts put the peak-QFI time on the default grid.
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn qfi(a: &mut QfiArgs) -> Result<Report, CliError> {
    let n = a.model.n.unwrap_or(4);
    let q = *a.q.get_or_insert(n);
    if q < n {
        return Err(CliError::Usage(format!("charge Q = {q} is below n = {n}")));
    }
    let model = a.model.resolve(4, q, None)?;
    let times = ChargingTimes::new(n, q, model.g_n, model.omega0)?;
    let grid = time_window(&mut a.t_min, &mut a.t_max, &mut a.points, times.t_c, 401)?;

    let basis = Basis::sector(n, q)?;
    let psi0 = QState::fock(&basis, 1, q - n)?;
    let nb = number_b(&basis);
    let evolved = Propagator::new(&build_hamiltonian(&model, true, &basis))?.evolve_grid(&psi0, &grid)?;
    let mut values = Vec::with_capacity(evolved.len());
    for ev in &evolved {
        values.push(qfi_pure(&nb, &ev.state)?);
    }
    let nearest_t1 = nearest(&grid, times.t_1);
    let peak = (0..values.len()).max_by(|&i, &j| values[i].value.total_cmp(&values[j].value)).unwrap_or(0);

    let mut table = Table::new(&["t", "qfi", "qfi_conventional", "at_t1"]);
    for (i, (t, f)) in grid.iter().zip(&values).enumerate() {
        table.push(vec![(*t).into(), f.value.into(), f.conventional.into(), (i == nearest_t1).into()]);
    }
    let mut meta = base_meta("qfi", a);
    meta["model"] = model_meta(&model);
    meta["basis"] = sector_meta(n, q);
    meta["leakage"] = json!({ "max": 0.0, "contaminated": false });
    meta["seed"] = Value::Null;
    meta["charging"] = json!(times);
    meta["peak"] = json!({ "t": grid[peak], "qfi": values[peak].value });
    Ok(Report { table, meta, violation: None })
}

fn nearest(grid: &[f64], t: f64) -> usize {
    (0..grid.len()).min_by(|&i, &j| (grid[i] - t).abs().total_cmp(&(grid[j] - t).abs())).unwrap_or(0)
}

// ---------------------------------------------------------------- squeeze

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// n = 4, g_n = 1/√6, α = -4i, β = 2.
    Fig2,
    /// n = 3, g_n = 1/√2, α = -4i, β = 2.
    AppdN3,
    /// n = 6, g_n = 1/√120, α = 2, β = -4i, short window.
    AppdN6,
}

struct PresetValues {
    n: usize,
    g_n: f64,
    alpha: &'static str,
    beta: &'static str,
    t_max: Option<f64>,
}

impl Preset {
    fn values(self) -> PresetValues {
        match self {
            Preset::Fig2 => PresetValues { n: 4, g_n: 1.0 / 6f64.sqrt(), alpha: "-4i", beta: "2", t_max: None },
            Preset::AppdN3 => PresetValues { n: 3, g_n: FRAC_1_SQRT_2, alpha: "-4i", beta: "2", t_max: None },
            // The squeezing minimum sits near t = 4e-4 here, far inside 0.5/g_n.
            Preset::AppdN6 => PresetValues { n: 6, g_n: 1.0 / 120f64.sqrt(), alpha: "2", beta: "-4i", t_max: Some(0.004) },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    WarmStart,
    Independent,
}

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct SqueezeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Parameter set supplying defaults for n, g_n, α, β and the window.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Coherent amplitude of mode A, e.g. `-4i` or `1.5+0.2i`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Defaults to 0.5 / g_n unless the preset says otherwise.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Override the tail-rule truncation of mode A.
    #[arg(long)]
    pub cutoff_a: Option<usize>,
    #[arg(long)]
    pub cutoff_b: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn squeeze(a: &mut SqueezeArgs) -> Result<Report, CliError> {
    let preset = *a.preset.get_or_insert(Preset::Fig2);
    let pv = preset.values();
    let default_phases = a.alpha.is_none() && a.beta.is_none() && preset == Preset::AppdN6;
    let alpha = parse_complex(a.alpha.get_or_insert_with(|| pv.alpha.to_string()))?;
    let beta = parse_complex(a.beta.get_or_insert_with(|| pv.beta.to_string()))?;
    let model = a.model.resolve(pv.n, pv.n, Some(pv.g_n))?;
    if model.g_n == 0.0 && a.t_max.is_none() {
        return Err(CliError::Usage("zero coupling needs an explicit t_max".into()));
    }
    let d_max = pv.t_max.unwrap_or(0.5 / model.g_n.abs());
    let grid = time_window(&mut a.t_min, &mut a.t_max, &mut a.points, d_max, 400)?;
    let mode = match *a.mode.get_or_insert(ModeArg::WarmStart) {
        ModeArg::WarmStart => TrajectoryMode::WarmStart,
        ModeArg::Independent => TrajectoryMode::Independent,
    };
    let cutoffs = match (a.cutoff_a, a.cutoff_b) {
        (Some(ca), Some(cb)) => Some((ca, cb)),
        (None, None) => None,
        _ => return Err(CliError::Usage("give both cutoff_a and cutoff_b or neither".into())),
    };

    let traj = squeeze_trajectory(&model, alpha, beta, &grid, mode, cutoffs)?;
    let mut table = Table::new(&["t", "var_min", "theta", "phi_q", "eta", "status", "leak_a", "leak_b", "contaminated"]);
    let mut worst = Leakage::default();
    for p in &traj.points {
        worst = worst.worst(p.leakage);
        let status = match p.status {
            OptimizerStatus::Converged => "converged",
            OptimizerStatus::GridOnly => "grid_only",
        };
        table.push(vec![
            p.t.into(),
            p.var_min.into(),
            p.angles.theta.into(),
            p.angles.phi_q.into(),
            p.angles.eta.into(),
            status.into(),
            p.leakage.top_a.into(),
            p.leakage.top_b.into(),
            p.truncation_contaminated().into(),
        ]);
    }
    let mut meta = base_meta("squeeze", a);
    meta["model"] = model_meta(&model);
    meta["basis"] = json!({ "kind": "product", "cutoff_a": traj.cutoffs.0, "cutoff_b": traj.cutoffs.1 });
    meta["leakage"] = json!({ "top_a": worst.top_a, "top_b": worst.top_b, "contaminated": worst.contaminated() });
    meta["seed"] = Value::Null;
    if default_phases {
        // only |α| and |β| are fixed for this set; the phases are a default
        meta["phase_assignment"] = json!("default");
    }
    meta["minimum"] = match traj.finite_time_minimum() {
        Some(p) => json!({ "t": p.t, "var_min": p.var_min, "angles": p.angles }),
        None => Value::Null,
    };
    let violation = worst
        .contaminated()
        .then(|| format!("truncation leakage {:e} exceeds threshold; raise the cutoffs", worst.max()));
    Ok(Report { table, meta, violation })
}

/// Parse `a`, `bi`, `a+bi` or `a-bi` (also `i`, `-i`).
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let bad = || CliError::Usage(format!("cannot parse complex number {s:?}"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(C64::from).map_err(|_| bad());
    };
    let split = body
        .char_indices()
        .rfind(|&(i, c)| i > 0 && (c == '+' || c == '-') && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
        .map(|(i, _)| i);
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(C64::new(re.parse::<f64>().map_err(|_| bad())?, im))
}

// ---------------------------------------------------------------- spin-scaling

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct SpinScalingArgs {
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Number of log-spaced N values.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    /// Use χ/N in place of χ.
    #[arg(long)]
    pub kac: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn spin_scaling(a: &mut SpinScalingArgs) -> Result<Report, CliError> {
    let ns = log_spaced(*a.n_min.get_or_insert(100), *a.n_max.get_or_insert(100_000), *a.count.get_or_insert(25));
    let omega = *a.omega.get_or_insert(1.0);
    let chi = *a.chi.get_or_insert(1.0);
    let kac = *a.kac.get_or_insert(false);
    let fit = if kac {
        let pts = scaling_series(&ns, omega, chi, true)?;
        let xs: Vec<f64> = pts.iter().map(|p| p.n_spins as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.power).collect();
        crate::spinoat::fit_power_law(&xs, &ys)?
    } else {
        charging_power_exponent(&ns, omega, chi)?
    };
    let pts = scaling_series(&ns, omega, chi, kac)?;
    let mut table = Table::new(&["n_spins", "charging_time", "energy", "power"]);
    for p in &pts {
        table.push(vec![p.n_spins.into(), p.charging_time.into(), p.energy.into(), p.power.into()]);
    }
    let mut meta = base_meta("spin-scaling", a);
    meta["fit"] = json!(fit);
    meta["leakage"] = json!({ "max": 0.0, "contaminated": false });
    meta["seed"] = Value::Null;
    Ok(Report { table, meta, violation: None })
}

// ---------------------------------------------------------------- protocol

#[derive(clap::Args, Serialize, Deserialize, Default, Clone, Debug)]
pub struct ProtocolArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Sensed frequency shift (the first point when scanning).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Scan φ uniformly up to this value.
    #[arg(long, allow_hyphen_values = true)]
    pub phi_max: Option<f64>,
    #[arg(long)]
    pub phi_points: Option<usize>,
    #[arg(long)]
    pub t_s: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    /// Row k of a scan uses seed + k.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn protocol(a: &mut ProtocolArgs) -> Result<Report, CliError> {
    let n = a.model.n.unwrap_or(4);
    let model = a.model.resolve(4, n, None)?;
    let phi0 = *a.phi.get_or_insert(0.1);
    let t_s = *a.t_s.get_or_insert(1.0);
    let shots = *a.shots.get_or_insert(10_000);
    let seed = *a.seed.get_or_insert(0);
    let phis = match (a.phi_max, a.phi_points) {
        (None, None) => vec![phi0],
        (Some(hi), k) => {
            let k = *a.phi_points.get_or_insert(k.unwrap_or(21));
            if k < 2 || !(hi > phi0) {
                return Err(CliError::Usage("phi scan needs phi_max > phi and at least 2 points".into()));
            }
            uniform_grid(phi0, hi, k)
        }
        (None, Some(_)) => return Err(CliError::Usage("phi_points needs phi_max".into())),
    };

    let results = phis
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let p = ProtocolParams { model: model.clone(), phi, t_s, shots, seed: seed.wrapping_add(k as u64) };
            run_protocol(&p).map(|r| (phi, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&[
        "phi", "p0", "p1", "p0_simulated", "p1_simulated", "k0", "k1", "phi_hat", "std_error",
        "residual_energy", "energy_outcome0", "energy_outcome1", "ambiguous", "seed",
    ]);
    for (phi, r) in &results {
        table.push(vec![
            (*phi).into(),
            r.p0.into(),
            r.p1.into(),
            r.p0_simulated.into(),
            r.p1_simulated.into(),
            r.counts.0.into(),
            r.counts.1.into(),
            r.estimate.map(|e| e.phi_hat).into(),
            r.estimate.map(|e| e.std_error).into(),
            r.residual_energy.into(),
            r.outcome_energies.0.into(),
            r.outcome_energies.1.into(),
            r.ambiguous.into(),
            r.seed.into(),
        ]);
    }
    let mut meta = base_meta("protocol", a);
    meta["model"] = model_meta(&model);
    meta["basis"] = sector_meta(n, n);
    meta["leakage"] = json!({ "max": 0.0, "contaminated": false });
    meta["seed"] = json!(seed);
    meta["t_1"] = json!(results.first().map(|(_, r)| r.t_1));
    Ok(Report { table, meta, violation: None })
}
