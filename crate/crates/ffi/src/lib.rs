//! C ABI over the dualq engine.
//!
//! Every fallible function returns a [`DualqStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and can be
//! copied out with [`dualq_last_error_message`]. Long-lived results are opaque
//! handles released with the matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64 as C64;

use dualq::fockspace::{number_b, Basis};
use dualq::metrics::{qfi_pure, real_expectation};
use dualq::model::{build_hamiltonian, coupling_from_circuit, coupling_from_qsl, rabi_frequency, BatteryModelParams, CircuitParams};
use dualq::propagate::{uniform_grid, Propagator, QState};
use dualq::protocol::{estimate_phi, run_protocol, ProtocolParams};
use dualq::spinoat::{self, SpinBatteryParams};
use dualq::squeezeopt::{squeeze_trajectory, OptimizerStatus, SqueezeTrajectory, TrajectoryMode};
use dualq::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualqStatus {
    Ok = 0,
    InvalidArgument = 1,
    Domain = 2,
    BasisMismatch = 3,
    Truncation = 4,
    Contract = 5,
    NullPointer = 6,
    OutOfRange = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DualqStatus {
    match e {
        Error::Domain(_) => DualqStatus::Domain,
        Error::InvalidArgument(_) => DualqStatus::InvalidArgument,
        Error::BasisMismatch(_) => DualqStatus::BasisMismatch,
        Error::Truncation(_) => DualqStatus::Truncation,
        Error::Contract(_) => DualqStatus::Contract,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (DualqStatus, String)>) -> DualqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DualqStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside dualq".into());
            DualqStatus::Panic
        }
    }
}

fn lift<T>(r: dualq::Result<T>) -> Result<T, (DualqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DualqStatus, String) {
    (DualqStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Result<(), (DualqStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dualq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the NUL.
#[no_mangle]
pub extern "C" fn dualq_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copy the last error message into `buf` (truncated, always NUL-terminated).
/// Returns the number of bytes written, excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn dualq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

// ---------------------------------------------------------------- couplings

#[no_mangle]
pub unsafe extern "C" fn dualq_coupling_from_qsl(g: f64, n: usize, q: usize, out: *mut f64) -> DualqStatus {
    guard(|| write(out, lift(coupling_from_qsl(g, n, q))?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn dualq_coupling_from_circuit(
    josephson_energy: f64,
    lambda1: f64,
    lambda2: f64,
    n: usize,
    out: *mut f64,
) -> DualqStatus {
    guard(|| {
        let c = CircuitParams { josephson_energy, lambda1, lambda2, n };
        write(out, lift(coupling_from_circuit(&c))?, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_rabi_frequency(n: usize, q: usize, g_n: f64, out: *mut f64) -> DualqStatus {
    guard(|| write(out, lift(rabi_frequency(n, q, g_n))?, "out"))
}

// ---------------------------------------------------------------- charging

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DualqChargingSample {
    pub t: f64,
    pub p_initial: f64,
    pub p_final: f64,
    pub mean_nb: f64,
    /// Variance of b†b.
    pub qfi: f64,
}

/// Opaque charging trajectory.
pub struct DualqCharging {
    samples: Vec<DualqChargingSample>,
}

/// Evolve `|1, Q-n>` on `points` uniform times in `[0, t_max]`.
#[no_mangle]
pub unsafe extern "C" fn dualq_charging_new(
    n: usize,
    q: usize,
    omega0: f64,
    g_n: f64,
    t_max: f64,
    points: usize,
    out: *mut *mut DualqCharging,
) -> DualqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if q < n {
            return Err((DualqStatus::Domain, format!("charge Q = {q} is below n = {n}")));
        }
        if !(t_max >= 0.0) || points == 0 {
            return Err((DualqStatus::InvalidArgument, "need t_max >= 0 and points >= 1".into()));
        }
        let model = lift(BatteryModelParams::with_coupling(n, omega0, g_n))?;
        let basis = lift(Basis::sector(n, q))?;
        let psi0 = lift(QState::fock(&basis, 1, q - n))?;
        let nb = number_b(&basis);
        let prop = lift(Propagator::new(&build_hamiltonian(&model, true, &basis)))?;
        let mut samples = Vec::with_capacity(points);
        for ev in lift(prop.evolve_grid(&psi0, &uniform_grid(0.0, t_max, points)))? {
            samples.push(DualqChargingSample {
                t: ev.t,
                p_initial: ev.state.probability(1, q - n),
                p_final: ev.state.probability(0, q),
                mean_nb: lift(real_expectation(&nb, &ev.state))?,
                qfi: lift(qfi_pure(&nb, &ev.state))?.value,
            });
        }
        out.write(Box::into_raw(Box::new(DualqCharging { samples })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_charging_len(h: *const DualqCharging) -> usize {
    h.as_ref().map_or(0, |h| h.samples.len())
}

#[no_mangle]
pub unsafe extern "C" fn dualq_charging_sample(h: *const DualqCharging, i: usize, out: *mut DualqChargingSample) -> DualqStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let s = *h.samples.get(i).ok_or((DualqStatus::OutOfRange, format!("index {i} out of range")))?;
        write(out, s, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_charging_free(h: *mut DualqCharging) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------- squeezing

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DualqSqueezePoint {
    pub t: f64,
    pub var_min: f64,
    pub theta: f64,
    pub phi_q: f64,
    pub eta: f64,
    pub converged: bool,
    pub contaminated: bool,
    pub leakage: f64,
}

/// Opaque squeezing trajectory.
pub struct DualqSqueeze {
    traj: SqueezeTrajectory,
}

/// Least quadrature variance along the evolution of `|α>|β>`. `mode` 0 warm-starts
/// from the previous optimum, 1 optimises every point independently.
#[no_mangle]
pub unsafe extern "C" fn dualq_squeeze_new(
    n: usize,
    omega0: f64,
    g_n: f64,
    alpha_re: f64,
    alpha_im: f64,
    beta_re: f64,
    beta_im: f64,
    t_min: f64,
    t_max: f64,
    points: usize,
    mode: u32,
    out: *mut *mut DualqSqueeze,
) -> DualqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            0 => TrajectoryMode::WarmStart,
            1 => TrajectoryMode::Independent,
            m => return Err((DualqStatus::InvalidArgument, format!("unknown mode {m}"))),
        };
        let model = lift(BatteryModelParams::with_coupling(n, omega0, g_n))?;
        let times = uniform_grid(t_min, t_max, points);
        let traj = lift(squeeze_trajectory(
            &model,
            C64::new(alpha_re, alpha_im),
            C64::new(beta_re, beta_im),
            &times,
            mode,
            None,
        ))?;
        out.write(Box::into_raw(Box::new(DualqSqueeze { traj })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_squeeze_len(h: *const DualqSqueeze) -> usize {
    h.as_ref().map_or(0, |h| h.traj.points.len())
}

#[no_mangle]
pub unsafe extern "C" fn dualq_squeeze_point(h: *const DualqSqueeze, i: usize, out: *mut DualqSqueezePoint) -> DualqStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let p = h.traj.points.get(i).ok_or((DualqStatus::OutOfRange, format!("index {i} out of range")))?;
        let v = DualqSqueezePoint {
            t: p.t,
            var_min: p.var_min,
            theta: p.angles.theta,
            phi_q: p.angles.phi_q,
            eta: p.angles.eta,
            converged: p.status == OptimizerStatus::Converged,
            contaminated: p.truncation_contaminated(),
            leakage: p.leakage.max(),
        };
        write(out, v, "out")
    })
}

/// Truncation used by the trajectory.
#[no_mangle]
pub unsafe extern "C" fn dualq_squeeze_cutoffs(h: *const DualqSqueeze, cutoff_a: *mut usize, cutoff_b: *mut usize) -> DualqStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        write(cutoff_a, h.traj.cutoffs.0, "cutoff_a")?;
        write(cutoff_b, h.traj.cutoffs.1, "cutoff_b")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_squeeze_free(h: *mut DualqSqueeze) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------- protocol

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DualqProtocolResult {
    pub p0: f64,
    pub p1: f64,
    pub p1_simulated: f64,
    pub k0: u64,
    pub k1: u64,
    /// NaN when no estimate exists (no shots or no sensing time).
    pub phi_hat: f64,
    pub std_error: f64,
    pub residual_energy: f64,
    pub ambiguous: bool,
}

#[no_mangle]
pub unsafe extern "C" fn dualq_protocol_run(
    n: usize,
    omega0: f64,
    g_n: f64,
    phi: f64,
    t_s: f64,
    shots: u64,
    seed: u64,
    out: *mut DualqProtocolResult,
) -> DualqStatus {
    guard(|| {
        let model = lift(BatteryModelParams::with_coupling(n, omega0, g_n))?;
        let r = lift(run_protocol(&ProtocolParams { model, phi, t_s, shots, seed }))?;
        let v = DualqProtocolResult {
            p0: r.p0,
            p1: r.p1,
            p1_simulated: r.p1_simulated,
            k0: r.counts.0,
            k1: r.counts.1,
            phi_hat: r.estimate.map_or(f64::NAN, |e| e.phi_hat),
            std_error: r.estimate.map_or(f64::NAN, |e| e.std_error),
            residual_energy: r.residual_energy,
            ambiguous: r.ambiguous,
        };
        write(out, v, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dualq_estimate_phi(
    k1: u64,
    shots: u64,
    n: usize,
    t_s: f64,
    phi_hat: *mut f64,
    std_error: *mut f64,
) -> DualqStatus {
    guard(|| {
        let e = lift(estimate_phi(k1, shots, n, t_s))?;
        write(phi_hat, e.phi_hat, "phi_hat")?;
        write(std_error, e.std_error, "std_error")
    })
}

// ---------------------------------------------------------------- spins

#[no_mangle]
pub extern "C" fn dualq_sigma_z_analytic(n_spins: usize, chi: f64, t: f64) -> f64 {
    spinoat::sigma_z_analytic(n_spins, chi, t)
}

#[no_mangle]
pub unsafe extern "C" fn dualq_injected_energy(n_spins: usize, chi: f64, omega: f64, t: f64, out: *mut f64) -> DualqStatus {
    guard(|| {
        let p = lift(SpinBatteryParams::new(n_spins, chi, omega))?;
        write(out, lift(spinoat::injected_energy(&p, t))?, "out")
    })
}

/// Fitted exponent of `ΔE/T` against `N` over `len` spin counts.
#[no_mangle]
pub unsafe extern "C" fn dualq_spin_power_exponent(
    n_list: *const usize,
    len: usize,
    omega: f64,
    chi: f64,
    exponent: *mut f64,
) -> DualqStatus {
    guard(|| {
        if n_list.is_null() {
            return Err(null("n_list"));
        }
        let ns = std::slice::from_raw_parts(n_list, len);
        let fit = lift(spinoat::charging_power_exponent(ns, omega, chi))?;
        write(exponent, fit.exponent, "exponent")
    })
}

/// Per-spin polarisation from exact evolution (N ≤ 14).
#[no_mangle]
pub unsafe extern "C" fn dualq_spin_oracle(n_spins: usize, chi: f64, t: f64, out: *mut f64) -> DualqStatus {
    guard(|| {
        let p = lift(SpinBatteryParams::new(n_spins, chi, 1.0))?;
        write(out, lift(spinoat::exact_small_n_oracle(&p, t))?, "out")
    })
}
