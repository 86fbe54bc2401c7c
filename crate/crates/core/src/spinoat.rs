//! One-axis-twisting spin battery.
//!
//! `N` spin-1/2 particles start fully polarised along +z. The battery energy is
//! `-ω S_z` with `S_z = Σ σᶻ` (no factor 1/2), so `E₀ = -Nω`. The twisting
//! generator is written with the spin-`N/2` operator `J_x = S_x / 2` as
//! `χ J_x²`; with that scaling the single-spin polarisation is `cos^{N-1}(χt)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `N` accepted by the exact Dicke-space oracle.
pub const ORACLE_MAX_SPINS: usize = 14;
/// Smallest `N` accepted by the scaling fit.
pub const FIT_MIN_SPINS: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinBatteryParams {
    pub n_spins: usize,
    pub chi: f64,
    pub omega: f64,
    /// Replace `χ` by `χ / N`.
    #[serde(default)]
    pub kac: bool,
}

impl SpinBatteryParams {
    pub fn new(n_spins: usize, chi: f64, omega: f64) -> Result<Self> {
        let p = SpinBatteryParams { n_spins, chi, omega, kac: false };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::invalid("need at least one spin"));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::invalid("chi must be positive and finite"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega must be positive and finite"));
        }
        Ok(())
    }

    /// Twisting strength actually used in the dynamics.
    pub fn effective_chi(&self) -> f64 {
        if self.kac {
            self.chi / self.n_spins as f64
        } else {
            self.chi
        }
    }

    /// Charging time `T = N^{-2/3} / χ`.
    pub fn optimal_time(&self) -> f64 {
        (self.n_spins as f64).powf(-2.0 / 3.0) / self.chi
    }
}

/// `cos^{N-1}(χt)`.
pub fn sigma_z_analytic(n_spins: usize, chi: f64, t: f64) -> f64 {
    if n_spins <= 1 {
        return 1.0;
    }
    (chi * t).cos().powi((n_spins - 1) as i32)
}

/// `ΔE(T) = ωN(1 - cos^{N-1}(χT))`.
pub fn injected_energy(p: &SpinBatteryParams, t: f64) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid("charging time must be non-negative"));
    }
    let n = p.n_spins as f64;
    let c = sigma_z_analytic(p.n_spins, p.effective_chi(), t);
    // 1 - c loses everything for tiny χT at huge N; go through logs there.
    let one_minus = if c > 0.5 && p.n_spins > 1 {
        let x = p.effective_chi() * t;
        -(((p.n_spins - 1) as f64) * (-2.0 * (x / 2.0).sin().powi(2)).ln_1p()).exp_m1()
    } else {
        1.0 - c
    };
    Ok(p.omega * n * one_minus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("need at least two (x, y) pairs of equal length"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all x values coincide"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum();
    Ok(PowerFit { exponent, intercept, residual: (ss / m).sqrt() })
}

/// One row of the scaling study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n_spins: usize,
    pub charging_time: f64,
    pub energy: f64,
    pub power: f64,
}

/// `ΔE`, `T` and `ΔE/T` at `T = N^{-2/3}/χ` for each `N`.
pub fn scaling_series(n_list: &[usize], omega: f64, chi: f64, kac: bool) -> Result<Vec<ScalingPoint>> {
    n_list
        .par_iter()
        .map(|&n_spins| {
            let p = SpinBatteryParams { n_spins, chi, omega, kac };
            p.validate()?;
            let t = p.optimal_time();
            let energy = injected_energy(&p, t)?;
            Ok(ScalingPoint { n_spins, charging_time: t, energy, power: energy / t })
        })
        .collect()
}

/// Exponent of `ΔE/T ∝ N^α`. The list must span two decades with every `N ≥ 100`.
pub fn charging_power_exponent(n_list: &[usize], omega: f64, chi: f64) -> Result<PowerFit> {
    check_span(n_list)?;
    let pts = scaling_series(n_list, omega, chi, false)?;
    let xs: Vec<f64> = pts.iter().map(|p| p.n_spins as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.power).collect();
    fit_power_law(&xs, &ys)
}

fn check_span(n_list: &[usize]) -> Result<()> {
    let lo = n_list.iter().copied().min().unwrap_or(0) as f64;
    let hi = n_list.iter().copied().max().unwrap_or(0) as f64;
    if lo < FIT_MIN_SPINS {
        return Err(Error::invalid(format!("every N must be at least {FIT_MIN_SPINS}")));
    }
    if hi / lo < 100.0 {
        return Err(Error::invalid("N list must span at least two decades"));
    }
    Ok(())
}

/// `count` integers log-spaced on `[lo, hi]`, duplicates removed.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count < 2 || lo == 0 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// Per-spin polarisation `2<J_z>/N` from brute-force evolution in the symmetric
/// subspace, starting from all spins up.
pub fn exact_small_n_oracle(p: &SpinBatteryParams, t: f64) -> Result<f64> {
    p.validate()?;
    if p.n_spins > ORACLE_MAX_SPINS {
        return Err(Error::invalid(format!("oracle limited to N ≤ {ORACLE_MAX_SPINS}")));
    }
    let jz = dicke_jz(p.n_spins, p.effective_chi() * t);
    Ok(2.0 * jz / p.n_spins as f64)
}

/// `<J_z>` after `exp(-i s J_x²)` on `|j, j>`, `j = N/2`.
fn dicke_jz(n_spins: usize, s: f64) -> f64 {
    let dim = n_spins + 1;
    let j = n_spins as f64 / 2.0;
    // Basis index k ↔ m = j - k.
    let m = |k: usize| j - k as f64;
    let mut jx = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..n_spins {
        // <m-1| J_- |m> = sqrt(j(j+1) - m(m-1))
        let v = 0.5 * (j * (j + 1.0) - m(k) * (m(k) - 1.0)).sqrt();
        jx[(k + 1, k)] = v;
        jx[(k, k + 1)] = v;
    }
    let h = &jx * &jx;
    let eig = SymmetricEigen::new(h);
    let u = &eig.eigenvectors;
    // ψ(s) = U e^{-i s Λ} Uᵀ e₀; only |ψ_k|² is needed.
    let c0: DVector<f64> = u.row(0).transpose();
    let mut jz = 0.0;
    for k in 0..dim {
        let (mut re, mut im) = (0.0, 0.0);
        for l in 0..dim {
            let phase = -s * eig.eigenvalues[l];
            let w = u[(k, l)] * c0[l];
            re += w * phase.cos();
            im += w * phase.sin();
        }
        jz += m(k) * (re * re + im * im);
    }
    jz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        assert_eq!(sigma_z_analytic(1, 1.0, 3.7), 1.0);
        assert!(sigma_z_analytic(2, 1.0, std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(sigma_z_analytic(5, 1.0, 0.0), 1.0);
    }

    #[test]
    fn injected_energy_examples() {
        let p = SpinBatteryParams::new(2, 1.0, 1.0).unwrap();
        assert_eq!(injected_energy(&p, 0.0).unwrap(), 0.0);
        assert!((injected_energy(&p, std::f64::consts::FRAC_PI_2).unwrap() - 2.0).abs() < 1e-12);

        let big = SpinBatteryParams::new(1_000_000, 1.0, 1.0).unwrap();
        let de = injected_energy(&big, big.optimal_time()).unwrap();
        let asym = 1e12f64.powf(1.0 / 3.0) / 2.0;
        assert!((de / asym - 1.0).abs() < 0.02, "{}", de / asym);
    }

    #[test]
    fn exponent_and_control() {
        let ns = log_spaced(100, 100_000, 25);
        let fit = charging_power_exponent(&ns, 1.0, 1.0).unwrap();
        assert!((fit.exponent - 4.0 / 3.0).abs() < 0.05, "{}", fit.exponent);

        assert!(charging_power_exponent(&[100, 300, 900], 1.0, 1.0).is_err());
        assert!(charging_power_exponent(&[10, 10_000], 1.0, 1.0).is_err());

        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * x).collect();
        let lin = fit_power_law(&xs, &ys).unwrap();
        assert!((lin.exponent - 1.0).abs() < 0.01);
    }

    #[test]
    fn oracle_examples() {
        let p2 = SpinBatteryParams::new(2, 1.0, 1.0).unwrap();
        assert!((exact_small_n_oracle(&p2, 0.3).unwrap() - 0.3f64.cos()).abs() < 1e-12);
        let p1 = SpinBatteryParams::new(1, 1.0, 1.0).unwrap();
        assert!((exact_small_n_oracle(&p1, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let p8 = SpinBatteryParams::new(8, 1.0, 1.0).unwrap();
        assert!((exact_small_n_oracle(&p8, 0.1).unwrap() - 0.1f64.cos().powi(7)).abs() < 1e-12);
        assert!(exact_small_n_oracle(&SpinBatteryParams::new(15, 1.0, 1.0).unwrap(), 0.1).is_err());
    }

    #[test]
    fn energy_grows_with_n() {
        let ns: Vec<usize> = (10..400).step_by(7).collect();
        let pts = scaling_series(&ns, 1.0, 1.0, false).unwrap();
        assert!(pts.windows(2).all(|w| w[1].energy > w[0].energy));
    }

    #[test]
    fn kac_scaling_loses_the_advantage() {
        let ns = log_spaced(100, 100_000, 10);
        let pts = scaling_series(&ns, 1.0, 1.0, true).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.n_spins as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.power).collect();
        assert!(fit_power_law(&xs, &ys).unwrap().exponent < 1.0);
    }
}
