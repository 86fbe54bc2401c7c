//! The charger/battery two-mode Hamiltonian and its coupling constants.
//!
//! `H = n ω₀ a†a + ω₀ b†b + λ g_n (a† bⁿ + a b†ⁿ)` with `ħ = 1`; time is measured
//! in units of inverse energy. The coupling `λ` is a square pulse taking the
//! values 0 or 1 on each [`ScheduleSegment`].

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{falling_sqrt, Basis};
use crate::operator::OperatorMatrix;

/// Where the nonlinear coupling `g_n` came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CouplingProvenance {
    /// Supplied directly by the caller.
    Direct,
    /// Matched to a linear model with coupling `g` via the speed-limit relation.
    SpeedLimit { g: f64, charge: usize },
    /// Leading resonant term of the Josephson-coupled resonator circuit.
    Circuit(CircuitParams),
}

/// Josephson-junction coupled resonator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub josephson_energy: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub n: usize,
}

impl CircuitParams {
    /// The expansion behind the coupling formula assumes `λ_i ≪ 1`.
    pub fn in_weak_flux_regime(&self) -> bool {
        (0.0..1.0).contains(&self.lambda1)
            && self.lambda1 > 0.0
            && (0.0..1.0).contains(&self.lambda2)
            && self.lambda2 > 0.0
    }
}

/// What drives the evolution during a schedule segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `H_A + H_B + H_AB` (λ = 1).
    ChargingOn,
    /// `H_A + H_B` (λ = 0).
    ChargingOff,
    /// Sensing Hamiltonian `-φ b†b`.
    Sensing { phi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub generator: Generator,
}

impl ScheduleSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Check that segments are ordered, contiguous and each has positive length.
pub fn validate_schedule(segments: &[ScheduleSegment]) -> Result<()> {
    for s in segments {
        if !(s.t_start.is_finite() && s.t_end.is_finite()) || s.t_start >= s.t_end {
            return Err(Error::invalid(format!(
                "schedule segment [{}, {}] must have t_start < t_end",
                s.t_start, s.t_end
            )));
        }
    }
    for w in segments.windows(2) {
        if w[0].t_end != w[1].t_start {
            return Err(Error::invalid(format!(
                "schedule segments are not contiguous at t = {} / {}",
                w[0].t_end, w[1].t_start
            )));
        }
    }
    Ok(())
}

/// Parameters of the two-mode battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryModelParams {
    pub n: usize,
    pub omega0: f64,
    pub g_n: f64,
    pub provenance: CouplingProvenance,
    pub schedule: Vec<ScheduleSegment>,
}

impl BatteryModelParams {
    pub fn with_coupling(n: usize, omega0: f64, g_n: f64) -> Result<Self> {
        let p = BatteryModelParams {
            n,
            omega0,
            g_n,
            provenance: CouplingProvenance::Direct,
            schedule: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Coupling derived from a linear-model reference `g` for charge `q`.
    pub fn speed_limit_matched(n: usize, omega0: f64, g: f64, q: usize) -> Result<Self> {
        let g_n = coupling_from_qsl(g, n, q)?;
        let p = BatteryModelParams {
            n,
            omega0,
            g_n,
            provenance: CouplingProvenance::SpeedLimit { g, charge: q },
            schedule: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_circuit(omega0: f64, circuit: CircuitParams) -> Result<Self> {
        let g_n = coupling_from_circuit(&circuit)?;
        let p = BatteryModelParams {
            n: circuit.n,
            omega0,
            g_n,
            provenance: CouplingProvenance::Circuit(circuit),
            schedule: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("nonlinearity order n must be at least 1"));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid("omega0 must be positive and finite"));
        }
        if !self.g_n.is_finite() {
            return Err(Error::invalid("g_n must be finite"));
        }
        validate_schedule(&self.schedule)
    }
}

/// Binomial coefficient as a float. Exact integer arithmetic up to `q = 20`,
/// a sum of logarithms beyond.
pub fn binomial(q: usize, k: usize) -> f64 {
    if k > q {
        return 0.0;
    }
    let k = k.min(q - k);
    if q <= 20 {
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (q - i) as u128 / (i + 1) as u128;
        }
        acc as f64
    } else {
        (0..k)
            .map(|i| ((q - i) as f64).ln() - ((i + 1) as f64).ln())
            .sum::<f64>()
            .exp()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Nonlinear coupling giving the same orthogonalisation time as the linear
/// (`n = 1`) model with coupling `g`.
pub fn coupling_from_qsl(g: f64, n: usize, q: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("nonlinearity order n must be at least 1"));
    }
    if q < n {
        return Err(Error::domain(format!(
            "charge Q = {q} is below n = {n}: no charging transition exists"
        )));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid("reference coupling g must be positive"));
    }
    let num = (n + (2 * n + 1) * (q - n)) as f64;
    let den = factorial(n) * binomial(q, n);
    Ok(g * (num / den).sqrt())
}

/// Magnitude of the leading resonant coupling of the junction-coupled circuit.
pub fn coupling_from_circuit(c: &CircuitParams) -> Result<f64> {
    if c.n == 0 {
        return Err(Error::invalid("nonlinearity order n must be at least 1"));
    }
    if !(c.josephson_energy > 0.0 && c.lambda1 > 0.0 && c.lambda2 > 0.0) {
        return Err(Error::invalid("E_J, lambda1 and lambda2 must be positive"));
    }
    if !c.in_weak_flux_regime() {
        log::warn!(
            "lambda1 = {}, lambda2 = {} outside the weak-flux regime; coupling formula is only leading order",
            c.lambda1,
            c.lambda2
        );
    }
    Ok(c.josephson_energy * c.lambda1 * c.lambda2.powi(c.n as i32) / factorial(c.n))
}

/// Rabi frequency `Ω_Q = sqrt(n! C(Q, n)) g_n` between the two coupled sector states.
pub fn rabi_frequency(n: usize, q: usize, g_n: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("nonlinearity order n must be at least 1"));
    }
    if q < n {
        return Err(Error::domain(format!(
            "charge Q = {q} is below n = {n}: no charging transition exists"
        )));
    }
    Ok((factorial(n) * binomial(q, n)).sqrt() * g_n)
}

/// Charging constants for a Fock initial state `|1, Q-n>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingTimes {
    pub omega_q: f64,
    /// Sector energy `ω₀ Q`.
    pub energy_q: f64,
    /// Full-charge time `π / (2 Ω_Q)`.
    pub t_c: f64,
    /// Peak-QFI time `t_c / 2`.
    pub t_1: f64,
}

impl ChargingTimes {
    pub fn new(n: usize, q: usize, g_n: f64, omega0: f64) -> Result<Self> {
        let omega_q = rabi_frequency(n, q, g_n)?;
        if omega_q == 0.0 {
            return Err(Error::domain("zero coupling: the battery never charges"));
        }
        let t_c = std::f64::consts::FRAC_PI_2 / omega_q.abs();
        Ok(ChargingTimes {
            omega_q,
            energy_q: omega0 * q as f64,
            t_c,
            t_1: t_c / 2.0,
        })
    }
}

/// Assemble `H_A + H_B + λ H_AB` on `basis`; `charging` selects λ ∈ {0, 1}.
pub fn build_hamiltonian(p: &BatteryModelParams, charging: bool, basis: &Arc<Basis>) -> OperatorMatrix {
    let n = p.n;
    let w = p.omega0;
    let g = if charging { p.g_n } else { 0.0 };
    let mut triplets = Vec::new();
    for col in 0..basis.dim() {
        let (na, nb) = basis.occupation(col);
        triplets.push((col, col, C64::from(w * (n * na + nb) as f64)));
        if g == 0.0 || nb < n {
            continue;
        }
        // a† bⁿ |na, nb> and its mirror entry, written together so the
        // assembled matrix is symmetric by construction.
        if let Some(row) = basis.index_of(na + 1, nb - n) {
            let amp = g * ((na + 1) as f64).sqrt() * falling_sqrt(nb, n);
            triplets.push((row, col, amp.into()));
            triplets.push((col, row, amp.into()));
        }
    }
    OperatorMatrix::from_triplets(basis, true, triplets)
}

/// `g_n (a† bⁿ + a b†ⁿ)` alone.
pub fn coupling_term(p: &BatteryModelParams, basis: &Arc<Basis>) -> OperatorMatrix {
    let full = build_hamiltonian(p, true, basis);
    let free = build_hamiltonian(p, false, basis);
    let triplets: Vec<_> = full
        .iter()
        .chain(free.iter().map(|(r, c, v)| (r, c, -v)))
        .collect();
    OperatorMatrix::from_triplets(basis, true, triplets)
}

/// Sensing Hamiltonian `-φ b†b`.
pub fn sensing_hamiltonian(phi: f64, basis: &Arc<Basis>) -> OperatorMatrix {
    OperatorMatrix::diagonal(basis, |(_, nb)| -phi * nb as f64)
}

/// Generator of one schedule segment.
pub fn segment_hamiltonian(p: &BatteryModelParams, generator: Generator, basis: &Arc<Basis>) -> OperatorMatrix {
    match generator {
        Generator::ChargingOn => build_hamiltonian(p, true, basis),
        Generator::ChargingOff => build_hamiltonian(p, false, basis),
        Generator::Sensing { phi } => sensing_hamiltonian(phi, basis),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn qsl_coupling_examples() {
        assert_relative_eq!(coupling_from_qsl(1.0, 4, 4).unwrap(), 1.0 / 6f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(coupling_from_qsl(1.0, 1, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(coupling_from_qsl(1.0, 6, 6).unwrap(), 1.0 / 120f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(coupling_from_qsl(1.0, 4, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn circuit_coupling_examples() {
        let c = |e, l1, l2, n| CircuitParams { josephson_energy: e, lambda1: l1, lambda2: l2, n };
        assert_relative_eq!(coupling_from_circuit(&c(1.0, 1.0, 1.0, 1)).unwrap(), 1.0);
        assert_relative_eq!(coupling_from_circuit(&c(2.0, 0.1, 0.1, 2)).unwrap(), 0.001, epsilon = 1e-16);
        assert_relative_eq!(coupling_from_circuit(&c(1.0, 0.2, 0.3, 3)).unwrap(), 9e-4, epsilon = 1e-16);
        assert!(!c(1.0, 1.0, 1.0, 1).in_weak_flux_regime());
        assert!(c(1.0, 0.2, 0.3, 3).in_weak_flux_regime());
    }

    #[test]
    fn rabi_frequency_examples() {
        let t = ChargingTimes::new(4, 4, 1.0 / 6f64.sqrt(), 1.0).unwrap();
        assert_relative_eq!(t.omega_q, 2.0, epsilon = 1e-14);
        assert_relative_eq!(t.t_c, std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        assert_relative_eq!(t.t_1, std::f64::consts::PI / 8.0, epsilon = 1e-14);
        assert_relative_eq!(rabi_frequency(1, 1, 0.7).unwrap(), 0.7);
        assert_relative_eq!(rabi_frequency(2, 2, 1.0).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(rabi_frequency(4, 3, 1.0).is_err());
    }

    #[test]
    fn matched_rabi_frequency_grows_with_charge() {
        let mut last = 0.0;
        for q in 1..60 {
            let g_n = coupling_from_qsl(1.0, q, q).unwrap();
            let w = rabi_frequency(q, q, g_n).unwrap();
            assert!(w > last, "Ω_Q not increasing at Q = {q}");
            last = w;
        }
    }

    #[test]
    fn binomial_exact_and_log_paths_agree() {
        assert_eq!(binomial(20, 10), 184756.0);
        assert_eq!(binomial(7, 4), 35.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_relative_eq!(binomial(30, 15), 155117520.0, max_relative = 1e-13);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = BatteryModelParams::with_coupling(4, 1.0, 1.0 / 6f64.sqrt()).unwrap();
        let basis = Basis::sector(4, 4).unwrap();
        let free = build_hamiltonian(&p, false, &basis);
        let i = basis.index_of(1, 0).unwrap();
        let f = basis.index_of(0, 4).unwrap();
        assert_eq!(free.get(i, i).re, 4.0);
        let h = build_hamiltonian(&p, true, &basis);
        assert_relative_eq!(h.get(f, i).re, 2.0, epsilon = 1e-14);
        assert!(h.equals_adjoint_exactly());
        let comm = coupling_term(&p, &basis).commutator(&free).unwrap();
        assert!(comm.iter().all(|(_, _, v)| v.norm() == 0.0));
    }

    #[test]
    fn hamiltonian_is_block_diagonal_in_charge() {
        let p = BatteryModelParams::with_coupling(3, 0.7, 0.3).unwrap();
        let basis = Basis::product(4, 14);
        let h = build_hamiltonian(&p, true, &basis);
        assert!(h.equals_adjoint_exactly());
        for (r, c, _) in h.iter() {
            let (a1, b1) = basis.occupation(r);
            let (a2, b2) = basis.occupation(c);
            assert_eq!(3 * a1 + b1, 3 * a2 + b2);
        }
    }

    #[test]
    fn schedule_validation() {
        let seg = |a, b| ScheduleSegment { t_start: a, t_end: b, generator: Generator::ChargingOn };
        assert!(validate_schedule(&[seg(0.0, 1.0), seg(1.0, 2.0)]).is_ok());
        assert!(validate_schedule(&[seg(0.0, 1.0), seg(1.5, 2.0)]).is_err());
        assert!(validate_schedule(&[seg(1.0, 1.0)]).is_err());
    }
}
