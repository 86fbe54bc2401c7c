//! Quantum Fisher information, generalised two-mode quadratures, and the
//! leading-order short-time expressions used to check the exact dynamics.
//!
//! The QFI of a pure state with respect to a generator is reported as the
//! generator's variance. The conventional `4 Var` value is carried alongside
//! under a separate name.
//!
//! Quadratures use `x = (b + b†)/2`, `p = (b - b†)/(2i)`, so the vacuum
//! variance of every normalised quadrature is exactly 1/4.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{ladder_ops, number_b, Basis, LadderOps};
use crate::model::{build_hamiltonian, BatteryModelParams};
use crate::operator::OperatorMatrix;
use crate::propagate::{expectation, variance, Leakage, Propagator, QState};

/// Squeezing threshold: vacuum variance of any normalised quadrature.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// QFI of a pure state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Qfi {
    /// Variance of the generator.
    pub value: f64,
    /// `4 × value`, the symmetric-logarithmic-derivative normalisation.
    pub conventional: f64,
}

pub fn qfi_pure(op: &OperatorMatrix, state: &QState) -> Result<Qfi> {
    if !op.is_hermitian() {
        return Err(Error::invalid("QFI needs a Hermitian generator"));
    }
    let value = variance(op, state)?;
    Ok(Qfi { value, conventional: 4.0 * value })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QfiSample {
    pub t: f64,
    pub qfi: Qfi,
    pub leakage: Leakage,
}

/// `F_Q(b†b)` along a time grid under the charging Hamiltonian.
pub fn qfi_timeseries(model: &BatteryModelParams, initial: &QState, times: &[f64]) -> Result<Vec<QfiSample>> {
    let basis = initial.basis();
    let h = build_hamiltonian(model, true, basis);
    let nb = number_b(basis);
    let prop = Propagator::new(&h)?;
    prop.evolve_grid(initial, times)?
        .into_iter()
        .map(|ev| {
            Ok(QfiSample {
                t: ev.t,
                qfi: qfi_pure(&nb, &ev.state)?,
                leakage: ev.leakage,
            })
        })
        .collect()
}

/// Leading-order `Var(b†b)(t)` for an initial Fock state `|N_A, N_B>`.
pub fn short_time_var_nb(na: usize, nb: usize, n: usize, g_n: f64, t: f64) -> f64 {
    let ratio = |hi: usize, lo: usize| -> f64 { ((lo + 1)..=hi).map(|k| k as f64).product() };
    let up = if nb >= n { (na + 1) as f64 * ratio(nb, nb - n) } else { 0.0 };
    let down = na as f64 * ratio(nb + n, nb);
    (n * n) as f64 * t * t * g_n * g_n * (up + down)
}

/// Angles `(θ, φ_q, η)` of `X = ½[e^{iφ_q}(cos θ a + e^{iη} sin θ b) + h.c.]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAngles {
    pub theta: f64,
    pub phi_q: f64,
    pub eta: f64,
}

impl QuadratureAngles {
    pub fn new(theta: f64, phi_q: f64, eta: f64) -> Self {
        QuadratureAngles { theta, phi_q, eta }
    }

    /// Fold onto `θ ∈ [0, π/2]`, `φ_q ∈ [0, π)`, `η ∈ [0, 2π)` without changing
    /// the quadrature up to an overall sign (which leaves its variance fixed).
    pub fn canonical(self) -> Self {
        let (mut theta, mut phi, mut eta) = (self.theta.rem_euclid(TAU), self.phi_q, self.eta);
        if theta > PI {
            // θ → 2π - θ flips the sign of sin θ
            theta = TAU - theta;
            eta += PI;
        }
        if theta > PI / 2.0 {
            // cos(π - θ) = -cos θ: absorb the sign into φ and η
            theta = PI - theta;
            phi += PI;
            eta += PI;
        }
        // X → -X under φ → φ + π
        phi = phi.rem_euclid(PI);
        eta = eta.rem_euclid(TAU);
        // remaining gauge freedom at the poles
        if theta == 0.0 {
            eta = 0.0;
        }
        QuadratureAngles { theta, phi_q: phi, eta }
    }

    /// Real weights `(w_xa, w_pa, w_xb, w_pb)` with `X = Σ w_k R_k`.
    pub fn weights(&self) -> [f64; 4] {
        let u = C64::from_polar(self.theta.cos(), self.phi_q);
        let v = C64::from_polar(self.theta.sin(), self.phi_q + self.eta);
        [u.re, -u.im, v.re, -v.im]
    }
}

/// Explicit matrix of `X_{θ, φ_q, η}` on a product space.
pub fn quadrature_op(angles: QuadratureAngles, space: &Arc<Basis>) -> Result<OperatorMatrix> {
    let ops = ladder_ops(space)?;
    quadrature_from_ladders(angles, &ops)
}

pub fn quadrature_from_ladders(angles: QuadratureAngles, ops: &LadderOps) -> Result<OperatorMatrix> {
    let u = C64::from_polar(angles.theta.cos(), angles.phi_q);
    let v = C64::from_polar(angles.theta.sin(), angles.phi_q + angles.eta);
    let c = ops.a.scale(u).add(&ops.b.scale(v))?;
    let x = c.add(&c.adjoint())?.scale(C64::new(0.5, 0.0));
    // c + c† is Hermitian entrywise by construction
    x.into_hermitian()
}

/// The four single-mode quadratures `x_a, p_a, x_b, p_b` as explicit matrices.
pub fn mode_quadratures(space: &Arc<Basis>) -> Result<[OperatorMatrix; 4]> {
    let q = |theta: f64, phi: f64| quadrature_op(QuadratureAngles::new(theta, phi, 0.0), space);
    Ok([
        q(0.0, 0.0)?,
        q(0.0, -PI / 2.0)?,
        q(PI / 2.0, 0.0)?,
        q(PI / 2.0, -PI / 2.0)?,
    ])
}

/// Symmetrised covariance of `(x_a, p_a, x_b, p_b)` in a pure state.
///
/// `Var X_{θ,φ_q,η} = wᵀ Σ w` with `w = angles.weights()`, which is the same
/// number `variance(quadrature_op(..), ψ)` produces, computed once per state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureCovariance {
    pub means: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

impl QuadratureCovariance {
    pub fn from_state(state: &QState, ops: &LadderOps) -> Result<Self> {
        let psi = state.amplitudes();
        if psi.len() != ops.a.dim() {
            return Err(Error::BasisMismatch("ladder operators do not match the state".into()));
        }
        let a = ops.a.apply(psi);
        let ad = ops.a_dag.apply(psi);
        let b = ops.b.apply(psi);
        let bd = ops.b_dag.apply(psi);
        let half = C64::new(0.5, 0.0);
        let mi = C64::new(0.0, -0.5);
        let comb = |x: &[C64], y: &[C64], s: C64, sign: f64| -> Vec<C64> {
            x.iter().zip(y).map(|(p, q)| s * (p + q * sign)).collect()
        };
        // x = (a + a†)/2, p = (a - a†)/(2i)
        let r = [
            comb(&a, &ad, half, 1.0),
            comb(&a, &ad, mi, -1.0),
            comb(&b, &bd, half, 1.0),
            comb(&b, &bd, mi, -1.0),
        ];
        let dot = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(p, q)| p.conj() * q).sum() };
        let mut means = [0.0; 4];
        for k in 0..4 {
            means[k] = dot(psi, &r[k]).re;
        }
        let mut cov = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let v = dot(&r[i], &r[j]).re - means[i] * means[j];
                cov[i][j] = v;
                cov[j][i] = v;
            }
        }
        Ok(QuadratureCovariance { means, cov })
    }

    pub fn variance(&self, angles: &QuadratureAngles) -> f64 {
        let w = angles.weights();
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += w[i] * self.cov[i][j] * w[j];
            }
        }
        s
    }
}

/// Leading-order `(Var x_b, Var p_b)` with the slope written as
/// `∓ n(n-1)/2 · g_n · Im(α* β^{n-1})`.
pub fn short_time_var_quadratures(alpha: C64, beta: C64, n: usize, g_n: f64, t: f64) -> (f64, f64) {
    let slope = quadrature_slope(alpha, beta.powu(n.saturating_sub(1) as u32), n, g_n);
    (VACUUM_VARIANCE + slope * t, VACUUM_VARIANCE - slope * t)
}

/// Leading-order `(Var x_b, Var p_b)` obtained by evaluating
/// `⟨{[H, x_b], δx_b}⟩` directly in `|α>|β>`. There
/// `⟨{a† b^{n-1}, δx_b}⟩ = (n-1) α* β^{n-2} / 2`, so the slope is
/// `∓ n(n-1)/2 · g_n · Im(α* β^{n-2})`. This is the form the exact dynamics obey.
pub fn short_time_var_quadratures_commutator(alpha: C64, beta: C64, n: usize, g_n: f64, t: f64) -> (f64, f64) {
    let slope = quadrature_slope(alpha, beta.powu(n.saturating_sub(2) as u32), n, g_n);
    (VACUUM_VARIANCE + slope * t, VACUUM_VARIANCE - slope * t)
}

fn quadrature_slope(alpha: C64, beta_pow: C64, n: usize, g_n: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    -((n * (n - 1)) as f64 / 2.0) * g_n * (alpha.conj() * beta_pow).im
}

/// `⟨O⟩` for a Hermitian operator as a real number.
pub fn real_expectation(op: &OperatorMatrix, state: &QState) -> Result<f64> {
    Ok(expectation(op, state)?.re)
}
