//! Exact time evolution under piecewise-constant Hermitian generators.
//!
//! A [`Propagator`] diagonalises its Hamiltonian once, block by block along the
//! connected components of the sparsity pattern (for the battery model these
//! are the charge sectors), and then evaluates `U e^{-iΛt} U† ψ` at any time.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fockspace::{Basis, TwoModeSpace};
use crate::model::{segment_hamiltonian, validate_schedule, BatteryModelParams, Generator, ScheduleSegment};
use crate::operator::OperatorMatrix;

/// Largest truncated Poisson tail a coherent state may discard.
pub const MAX_TAIL_MASS: f64 = 1e-10;
/// Tail probability that fixes the coherent-state cutoff before headroom.
pub const CUTOFF_TAIL: f64 = 1e-12;
/// Probability on the top truncation level above which a result is flagged.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;

/// A normalised pure state over a [`Basis`].
#[derive(Clone, Debug)]
pub struct QState {
    basis: Arc<Basis>,
    amps: Vec<C64>,
    tail_mass: f64,
}

impl QState {
    /// Fock state `|N_A, N_B>`.
    pub fn fock(basis: &Arc<Basis>, na: usize, nb: usize) -> Result<Self> {
        let idx = basis.index_of(na, nb).ok_or_else(|| {
            Error::invalid(format!("Fock state ({na}, {nb}) is not part of the basis"))
        })?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(QState { basis: basis.clone(), amps, tail_mass: 0.0 })
    }

    /// Product coherent state `|α>_A |β>_B`, renormalised after truncation.
    pub fn coherent(alpha: C64, beta: C64, basis: &Arc<Basis>) -> Result<Self> {
        let space = basis
            .as_product()
            .ok_or_else(|| Error::BasisMismatch("coherent states need a product space".into()))?;
        let ca = coherent_amplitudes(alpha, space.cutoff_a());
        let cb = coherent_amplitudes(beta, space.cutoff_b());
        let tail_a = poisson_tail(alpha.norm_sqr(), space.cutoff_a());
        let tail_b = poisson_tail(beta.norm_sqr(), space.cutoff_b());
        let tail_mass = 1.0 - (1.0 - tail_a) * (1.0 - tail_b);
        if tail_mass > MAX_TAIL_MASS {
            return Err(Error::Truncation(format!(
                "coherent state (α = {alpha}, β = {beta}) loses {tail_mass:.3e} probability at cutoffs ({}, {}); \
                 use cutoffs of at least {:?}",
                space.cutoff_a(),
                space.cutoff_b(),
                coherent_cutoffs(alpha, beta)
            )));
        }
        let mut amps = Vec::with_capacity(space.dim());
        for x in &ca {
            for y in &cb {
                amps.push(x * y);
            }
        }
        let mut s = QState { basis: basis.clone(), amps, tail_mass };
        s.normalize()?;
        Ok(s)
    }

    /// State from raw amplitudes, normalised.
    pub fn from_amplitudes(basis: &Arc<Basis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        let mut s = QState { basis: basis.clone(), amps, tail_mass: 0.0 };
        s.normalize()?;
        Ok(s)
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("state has zero or non-finite norm"));
        }
        self.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(())
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Probability discarded by the truncation when the state was built.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amplitude(&self, na: usize, nb: usize) -> C64 {
        self.basis
            .index_of(na, nb)
            .map_or(C64::new(0.0, 0.0), |i| self.amps[i])
    }

    pub fn probability(&self, na: usize, nb: usize) -> f64 {
        self.amplitude(na, nb).norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QState) -> Result<C64> {
        same_basis(&self.basis, &other.basis)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Probability on the top occupation level of each mode.
    pub fn leakage(&self) -> Leakage {
        let Some((ca, cb)) = self.basis.truncation() else {
            return Leakage::default();
        };
        let mut out = Leakage::default();
        for (i, a) in self.amps.iter().enumerate() {
            let (na, nb) = self.basis.occupation(i);
            if na == ca {
                out.top_a += a.norm_sqr();
            }
            if nb == cb {
                out.top_b += a.norm_sqr();
            }
        }
        out
    }

    /// Restrict a product-space state to a charge sector, or embed a sector
    /// state into a product space. Amplitude that has no image is an error.
    pub fn transfer(&self, target: &Arc<Basis>) -> Result<QState> {
        let mut amps = vec![C64::new(0.0, 0.0); target.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            let (na, nb) = self.basis.occupation(i);
            match target.index_of(na, nb) {
                Some(j) => amps[j] = *a,
                None if a.norm_sqr() > 0.0 => {
                    return Err(Error::BasisMismatch(format!(
                        "state has amplitude on ({na}, {nb}) which the target basis lacks"
                    )))
                }
                None => {}
            }
        }
        Ok(QState { basis: target.clone(), amps, tail_mass: self.tail_mass })
    }
}

fn same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::BasisMismatch("state and operator live in different bases".into()))
    }
}

fn coherent_amplitudes(z: C64, cutoff: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut c = C64::from((-z.norm_sqr() / 2.0).exp());
    out.push(c);
    for k in 1..=cutoff {
        c = c * z / (k as f64).sqrt();
        out.push(c);
    }
    out
}

/// `P(X > cutoff)` for `X ~ Poisson(mean)`, summed term by term.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // log of the pmf at cutoff + 1, then march upward
    let k0 = cutoff + 1;
    let mut log_p = -mean + k0 as f64 * mean.ln() - (1..=k0).map(|k| (k as f64).ln()).sum::<f64>();
    let mut total = 0.0;
    let mut k = k0;
    loop {
        let p = log_p.exp();
        total += p;
        if k as f64 > mean && p < total * 1e-17 {
            break;
        }
        k += 1;
        log_p += mean.ln() - (k as f64).ln();
        if k > k0 + 100_000 {
            break;
        }
    }
    total
}

/// Smallest `M` with `P(X > M) < 1e-12`, plus 25% headroom (rounded up).
pub fn tail_rule_cutoff(mean: f64) -> usize {
    let mut m = 0;
    while poisson_tail(mean, m) >= CUTOFF_TAIL {
        m += 1;
    }
    (m as f64 * 1.25).ceil() as usize
}

/// Per-mode cutoffs from the Poisson tail rule.
pub fn coherent_cutoffs(alpha: C64, beta: C64) -> (usize, usize) {
    (tail_rule_cutoff(alpha.norm_sqr()), tail_rule_cutoff(beta.norm_sqr()))
}

/// Cutoffs for evolving a coherent state under the charging Hamiltonian:
/// the B cutoff also holds every B quantum the charger can deposit, so every
/// charge sector carrying non-negligible weight lies inside the truncation.
pub fn charging_cutoffs(alpha: C64, beta: C64, n: usize) -> (usize, usize) {
    let (ca, cb) = coherent_cutoffs(alpha, beta);
    (ca, n * ca + cb)
}

/// Occupation of the top truncation level of each mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Leakage {
    pub top_a: f64,
    pub top_b: f64,
}

impl Leakage {
    pub fn max(&self) -> f64 {
        self.top_a.max(self.top_b)
    }

    pub fn contaminated(&self) -> bool {
        self.max() > LEAKAGE_THRESHOLD
    }

    pub fn worst(self, other: Leakage) -> Leakage {
        Leakage { top_a: self.top_a.max(other.top_a), top_b: self.top_b.max(other.top_b) }
    }
}

/// A state at some time together with the leakage monitor reading.
#[derive(Clone, Debug)]
pub struct Evolved {
    pub t: f64,
    pub state: QState,
    pub leakage: Leakage,
}

impl Evolved {
    /// True when the truncation may have corrupted this result.
    pub fn truncation_contaminated(&self) -> bool {
        self.leakage.contaminated()
    }
}

#[derive(Clone, Debug)]
struct SpectralBlock {
    indices: Vec<usize>,
    energies: Vec<f64>,
    vectors: DMatrix<C64>,
}

/// Cached Hermitian eigendecomposition of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct Propagator {
    basis: Arc<Basis>,
    source: u64,
    blocks: Vec<SpectralBlock>,
}

/// A state expanded in a propagator's eigenbasis, ready for evaluation at many times.
#[derive(Clone, Debug)]
pub struct SpectralState {
    coeffs: Vec<DVector<C64>>,
    tail_mass: f64,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::invalid("time evolution needs a Hermitian generator"));
        }
        let blocks = h
            .blocks()
            .into_par_iter()
            .map(|indices| {
                if indices.len() == 1 {
                    let e = h.get(indices[0], indices[0]).re;
                    return SpectralBlock {
                        indices,
                        energies: vec![e],
                        vectors: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
                    };
                }
                let eig = nalgebra::SymmetricEigen::new(h.dense_block(&indices));
                SpectralBlock {
                    indices,
                    energies: eig.eigenvalues.iter().copied().collect(),
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Propagator { basis: h.basis().clone(), source: h.fingerprint(), blocks })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Fingerprint of the Hamiltonian this propagator was built from.
    pub fn source_id(&self) -> u64 {
        self.source
    }

    /// All eigenvalues, block by block.
    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.energies.iter().copied())
    }

    /// `V Λ V†` reassembled as a sparse operator.
    pub fn reconstruct(&self) -> OperatorMatrix {
        let mut triplets = Vec::new();
        for b in &self.blocks {
            let lam = DMatrix::from_diagonal(&DVector::from_iterator(
                b.energies.len(),
                b.energies.iter().map(|&e| C64::from(e)),
            ));
            let m = &b.vectors * lam * b.vectors.adjoint();
            for (i, &gi) in b.indices.iter().enumerate() {
                for (j, &gj) in b.indices.iter().enumerate() {
                    triplets.push((gi, gj, m[(i, j)]));
                }
            }
        }
        OperatorMatrix::from_triplets(&self.basis, false, triplets)
    }

    pub fn project(&self, state: &QState) -> Result<SpectralState> {
        same_basis(&self.basis, &state.basis)?;
        let coeffs = self
            .blocks
            .iter()
            .map(|b| {
                let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| state.amps[i]));
                b.vectors.ad_mul(&local)
            })
            .collect();
        Ok(SpectralState { coeffs, tail_mass: state.tail_mass })
    }

    /// Evaluate a projected state at time `t`.
    pub fn at(&self, spectral: &SpectralState, t: f64) -> Evolved {
        let mut amps = vec![C64::new(0.0, 0.0); self.basis.dim()];
        for (b, c) in self.blocks.iter().zip(&spectral.coeffs) {
            let phased = DVector::from_iterator(
                c.len(),
                c.iter().zip(&b.energies).map(|(ck, &e)| ck * C64::from_polar(1.0, -e * t)),
            );
            let local = &b.vectors * phased;
            for (k, &i) in b.indices.iter().enumerate() {
                amps[i] = local[k];
            }
        }
        let state = QState { basis: self.basis.clone(), amps, tail_mass: spectral.tail_mass };
        let leakage = state.leakage();
        Evolved { t, state, leakage }
    }

    pub fn evolve(&self, state: &QState, t: f64) -> Result<Evolved> {
        let sp = self.project(state)?;
        Ok(self.at(&sp, t))
    }

    /// Evolve to every time of an explicit grid (evaluated in parallel).
    pub fn evolve_grid(&self, state: &QState, times: &[f64]) -> Result<Vec<Evolved>> {
        let sp = self.project(state)?;
        Ok(times.par_iter().map(|&t| self.at(&sp, t)).collect())
    }
}

/// `e^{-iHt} |ψ>` with a freshly built propagator.
pub fn evolve(state: &QState, h: &OperatorMatrix, t: f64) -> Result<Evolved> {
    Propagator::new(h)?.evolve(state, t)
}

/// States after each segment of a piecewise-constant schedule.
pub fn evolve_schedule(
    state: &QState,
    params: &BatteryModelParams,
    segments: &[ScheduleSegment],
) -> Result<Vec<Evolved>> {
    validate_schedule(segments)?;
    let mut cache: Vec<(Generator, Propagator)> = Vec::new();
    let mut current = state.clone();
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let pos = match cache.iter().position(|(g, _)| *g == seg.generator) {
            Some(p) => p,
            None => {
                let h = segment_hamiltonian(params, seg.generator, state.basis());
                cache.push((seg.generator, Propagator::new(&h)?));
                cache.len() - 1
            }
        };
        let mut ev = cache[pos].1.evolve(&current, seg.duration())?;
        ev.t = seg.t_end;
        current = ev.state.clone();
        out.push(ev);
    }
    Ok(out)
}

/// `<ψ|O|ψ>`.
pub fn expectation(op: &OperatorMatrix, state: &QState) -> Result<C64> {
    same_basis(op.basis(), &state.basis)?;
    let v = op.apply(&state.amps);
    Ok(state.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum())
}

/// `<ψ|O²|ψ> - <ψ|O|ψ>²` (real part), computed as `<ψ|O (O ψ)>`.
pub fn variance(op: &OperatorMatrix, state: &QState) -> Result<f64> {
    same_basis(op.basis(), &state.basis)?;
    let v = op.apply(&state.amps);
    let w = op.apply(&v);
    let mean: C64 = state.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    let second: C64 = state.amps.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
    Ok((second - mean * mean).re.max(0.0))
}

/// Default time grid: `points` uniform samples on `[t0, t1]`, endpoints included.
pub fn uniform_grid(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..points)
            .map(|k| t0 + (t1 - t0) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Convenience: product space sized for a coherent state under charging dynamics.
pub fn charging_space(alpha: C64, beta: C64, n: usize) -> Arc<Basis> {
    let (ca, cb) = charging_cutoffs(alpha, beta, n);
    Arc::new(Basis::Product(TwoModeSpace::new(ca, cb)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{charge_operator, number_a, number_b};
    use crate::model::build_hamiltonian;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model4() -> BatteryModelParams {
        BatteryModelParams::with_coupling(4, 1.0, 1.0 / 6f64.sqrt()).unwrap()
    }

    #[test]
    fn fock_constructors() {
        let s = Basis::sector(4, 4).unwrap();
        assert_eq!(QState::fock(&s, 1, 0).unwrap().probability(1, 0), 1.0);
        assert_eq!(QState::fock(&s, 0, 4).unwrap().probability(0, 4), 1.0);
        assert!(QState::fock(&s, 2, 0).is_err());
        let p = Basis::product(1, 3);
        assert!(QState::fock(&p, 0, 4).is_err());
    }

    #[test]
    fn coherent_vacuum_and_means() {
        let vac = QState::coherent(C64::new(0.0, 0.0), C64::new(0.0, 0.0), &Basis::product(0, 0)).unwrap();
        assert_eq!(vac.tail_mass(), 0.0);
        assert_eq!(vac.amplitudes(), &[C64::new(1.0, 0.0)]);

        let alpha = C64::new(0.0, -4.0);
        let beta = C64::new(2.0, 0.0);
        let (ca, cb) = coherent_cutoffs(alpha, beta);
        let basis = Basis::product(ca, cb);
        let s = QState::coherent(alpha, beta, &basis).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!((expectation(&number_a(&basis), &s).unwrap().re - 16.0).abs() < 1e-8);
        assert!((expectation(&number_b(&basis), &s).unwrap().re - 4.0).abs() < 1e-8);
        assert!((variance(&number_b(&basis), &s).unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_rejects_small_cutoff() {
        let err = QState::coherent(C64::new(1.0, 0.0), C64::new(0.0, 0.0), &Basis::product(2, 0)).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
        let tail = 1.0 - (-1f64).exp() * 2.5;
        assert_relative_eq!(poisson_tail(1.0, 2), tail, max_relative = 1e-12);
    }

    #[test]
    fn tail_rule_values() {
        assert_eq!(tail_rule_cutoff(0.0), 0);
        // P(X > 51) < 1e-12 first holds at 51 for mean 16, at 25 for mean 4
        assert!(poisson_tail(16.0, 51) < 1e-12 && poisson_tail(16.0, 50) >= 1e-12);
        assert_eq!(tail_rule_cutoff(16.0), 64);
        assert_eq!(tail_rule_cutoff(4.0), 32);
    }

    #[test]
    fn full_charge_at_tc() {
        let basis = Basis::sector(4, 4).unwrap();
        let h = build_hamiltonian(&model4(), true, &basis);
        let psi = QState::fock(&basis, 1, 0).unwrap();
        let ev = evolve(&psi, &h, PI / 4.0).unwrap();
        assert!((ev.state.probability(0, 4) - 1.0).abs() < 1e-9);
        let half = evolve(&psi, &h, PI / 8.0).unwrap();
        assert!((half.state.probability(1, 0) - 0.5).abs() < 1e-9);
        assert!((half.state.probability(0, 4) - 0.5).abs() < 1e-9);
        let same = evolve(&psi, &h, 0.0).unwrap();
        assert_eq!(same.state.amplitudes(), psi.amplitudes());
    }

    #[test]
    fn expectation_examples() {
        let basis = Basis::sector(4, 4).unwrap();
        let f = QState::fock(&basis, 0, 4).unwrap();
        assert_eq!(expectation(&number_b(&basis), &f).unwrap().re, 4.0);
        assert_eq!(variance(&number_b(&basis), &f).unwrap(), 0.0);
        let noon = QState::from_amplitudes(&basis, vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!((variance(&number_b(&basis), &noon).unwrap() - 4.0).abs() < 1e-12);

        let h = build_hamiltonian(&model4(), true, &basis);
        let prop = Propagator::new(&h).unwrap();
        let q = charge_operator(&basis, 4);
        for t in uniform_grid(0.0, 3.0, 31) {
            let ev = prop.evolve(&QState::fock(&basis, 1, 0).unwrap(), t).unwrap();
            let val = expectation(&q, &ev.state).unwrap();
            assert!((val.re - 4.0).abs() < 1e-10 && val.im.abs() < 1e-10);
        }
    }

    #[test]
    fn basis_mismatch_is_reported() {
        let s = QState::fock(&Basis::sector(4, 4).unwrap(), 1, 0).unwrap();
        let op = number_b(&Basis::sector(4, 5).unwrap());
        assert!(matches!(expectation(&op, &s), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn non_hermitian_generator_is_rejected() {
        let basis = Basis::product(1, 1);
        let m = OperatorMatrix::from_triplets(&basis, false, vec![(0, 1, C64::new(1.0, 0.0))]);
        assert!(Propagator::new(&m).is_err());
    }

    #[test]
    fn reconstruction_matches_source() {
        let p = BatteryModelParams::with_coupling(3, 0.9, 0.37).unwrap();
        let basis = Basis::product(5, 17);
        let h = build_hamiltonian(&p, true, &basis);
        let prop = Propagator::new(&h).unwrap();
        let diff = prop.reconstruct().sub(&h).unwrap();
        assert!(diff.norm_fro() / h.norm_fro() < 1e-10);
    }

    #[test]
    fn leakage_monitor_flags_top_level() {
        let basis = Basis::product(1, 4);
        let s = QState::fock(&basis, 0, 4).unwrap();
        assert!(s.leakage().contaminated());
        let s = QState::fock(&basis, 0, 2).unwrap();
        assert!(!s.leakage().contaminated());
        let sector = QState::fock(&Basis::sector(4, 4).unwrap(), 0, 4).unwrap();
        assert_eq!(sector.leakage(), Leakage::default());
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(uniform_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid(0.0, 1.0, 1), vec![0.0]);
        assert!(uniform_grid(0.0, 1.0, 0).is_empty());
    }
}
