//! Charge, sense, recharge, measure.
//!
//! Starting from `|1, 0>` in the `Q = n` sector the battery is charged for
//! `t₁` to the equal superposition of `|1, 0>` and `|0, n>`, the B mode picks
//! up a phase under `-φ b†b` for `t_s`, a second charging pulse of length `t₁`
//! interferes the two branches, and the A mode is read out.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{number_b, Basis};
use crate::model::{BatteryModelParams, ChargingTimes, Generator, ScheduleSegment};
use crate::metrics::real_expectation;
use crate::propagate::{evolve_schedule, QState};

/// Allowed gap between the simulated and closed-form outcome probabilities.
pub const ANALYTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub model: BatteryModelParams,
    pub phi: f64,
    pub t_s: f64,
    pub shots: u64,
    pub seed: u64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.t_s >= 0.0 && self.t_s.is_finite()) {
            return Err(Error::invalid("sensing time must be non-negative and finite"));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("phi must be finite"));
        }
        if self.model.g_n == 0.0 {
            return Err(Error::domain("zero coupling: the battery never charges"));
        }
        Ok(())
    }

    /// True when `|φ| n t_s / 2` leaves the principal branch of the estimator.
    pub fn ambiguous(&self) -> bool {
        self.phi.abs() * self.model.n as f64 * self.t_s / 2.0 > std::f64::consts::FRAC_PI_2
    }
}

/// Sector amplitudes of a state, in basis order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub label: &'static str,
    pub t: f64,
    pub amplitudes: Vec<(usize, usize, C64)>,
}

impl StateSnapshot {
    fn of(label: &'static str, t: f64, s: &QState) -> Self {
        let b = s.basis();
        let amplitudes = (0..b.dim())
            .map(|i| {
                let (na, nb) = b.occupation(i);
                (na, nb, s.amplitudes()[i])
            })
            .collect();
        StateSnapshot { label, t, amplitudes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiEstimate {
    pub phi_hat: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolResult {
    /// Probability of finding the A mode empty (battery charged).
    pub p0: f64,
    pub p1: f64,
    pub p0_simulated: f64,
    pub p1_simulated: f64,
    pub counts: (u64, u64),
    /// `None` without shots or without sensing time.
    pub estimate: Option<PhiEstimate>,
    /// Mean battery energy `ω₀<b†b>` of the post-measurement mixture.
    pub residual_energy: f64,
    /// Battery energy conditioned on outcome 0 and outcome 1.
    pub outcome_energies: (f64, f64),
    pub t_1: f64,
    pub ambiguous: bool,
    pub seed: u64,
    pub state_trace: Vec<StateSnapshot>,
}

/// Run the protocol and cross-check the simulated readout against `sin²(φ n t_s / 2)`.
pub fn run_protocol(p: &ProtocolParams) -> Result<ProtocolResult> {
    p.validate()?;
    let n = p.model.n;
    let w = p.model.omega0;
    let basis = Basis::sector(n, n)?;
    let psi_i = QState::fock(&basis, 1, 0)?;
    let t_1 = ChargingTimes::new(n, n, p.model.g_n, w)?.t_1;

    let mut segments = vec![ScheduleSegment { t_start: 0.0, t_end: t_1, generator: Generator::ChargingOn }];
    let mut t = t_1;
    if p.t_s > 0.0 {
        segments.push(ScheduleSegment { t_start: t, t_end: t + p.t_s, generator: Generator::Sensing { phi: p.phi } });
        t += p.t_s;
    }
    segments.push(ScheduleSegment { t_start: t, t_end: t + t_1, generator: Generator::ChargingOn });
    let evolved = evolve_schedule(&psi_i, &p.model, &segments)?;

    let psi_1 = &evolved[0].state;
    let psi_m = &evolved.last().expect("schedule has segments").state;
    let psi_s = if p.t_s > 0.0 { &evolved[1].state } else { psi_1 };

    let p1_simulated = psi_m.probability(1, 0);
    let p0_simulated = psi_m.probability(0, n);
    let x = p.phi * n as f64 * p.t_s / 2.0;
    let p1 = x.sin().powi(2);
    let p0 = x.cos().powi(2);
    if (p1_simulated - p1).abs() > ANALYTIC_TOL || (p0_simulated - p0).abs() > ANALYTIC_TOL {
        return Err(Error::Contract(format!(
            "simulated p1 = {p1_simulated:.12} disagrees with sin²(φnt_s/2) = {p1:.12}"
        )));
    }

    let residual_energy = w * real_expectation(&number_b(&basis), psi_m)?;
    let counts = sample_measurements(p0, p.shots, p.seed)?;
    let estimate = if p.shots > 0 && p.t_s > 0.0 {
        Some(estimate_phi(counts.1, p.shots, n, p.t_s)?)
    } else {
        None
    };

    Ok(ProtocolResult {
        p0,
        p1,
        p0_simulated,
        p1_simulated,
        counts,
        estimate,
        residual_energy,
        outcome_energies: (n as f64 * w, 0.0),
        t_1,
        ambiguous: p.ambiguous(),
        seed: p.seed,
        state_trace: vec![
            StateSnapshot::of("psi_i", 0.0, &psi_i),
            StateSnapshot::of("psi_1", t_1, psi_1),
            StateSnapshot::of("psi_s", t_1 + p.t_s, psi_s),
            StateSnapshot::of("psi_m", 2.0 * t_1 + p.t_s, psi_m),
        ],
    })
}

/// Binomial draw of `(k₀, k₁)` with `P(outcome 0) = p0`.
pub fn sample_measurements(p0: f64, shots: u64, seed: u64) -> Result<(u64, u64)> {
    if !(-1e-12..=1.0 + 1e-12).contains(&p0) {
        return Err(Error::invalid(format!("p0 = {p0} is not a probability")));
    }
    if shots == 0 {
        return Ok((0, 0));
    }
    let dist = Binomial::new(shots, p0.clamp(0.0, 1.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = dist.sample(&mut rng);
    Ok((k0, shots - k0))
}

/// `φ̂ = (2 / (n t_s)) arcsin √(k₁/shots)` on the principal branch. The
/// delta-method standard error is `1 / (n t_s √shots)` independent of `k₁`.
pub fn estimate_phi(k1: u64, shots: u64, n: usize, t_s: f64) -> Result<PhiEstimate> {
    if shots == 0 {
        return Err(Error::invalid("need at least one shot"));
    }
    if k1 > shots {
        return Err(Error::invalid("k1 exceeds the number of shots"));
    }
    let scale = n as f64 * t_s;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain("phi is not identifiable when n·t_s = 0"));
    }
    let frac = k1 as f64 / shots as f64;
    Ok(PhiEstimate {
        phi_hat: 2.0 / scale * frac.sqrt().asin(),
        std_error: 1.0 / (scale * (shots as f64).sqrt()),
    })
}
