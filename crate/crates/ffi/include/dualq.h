#ifndef DUALQ_H
#define DUALQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum DualqStatus {
  DUALQ_STATUS_OK = 0,
  DUALQ_STATUS_INVALID_ARGUMENT = 1,
  DUALQ_STATUS_DOMAIN = 2,
  DUALQ_STATUS_BASIS_MISMATCH = 3,
  DUALQ_STATUS_TRUNCATION = 4,
  DUALQ_STATUS_CONTRACT = 5,
  DUALQ_STATUS_NULL_POINTER = 6,
  DUALQ_STATUS_OUT_OF_RANGE = 7,
  DUALQ_STATUS_PANIC = 8,
} DualqStatus;

/**
 * Opaque charging trajectory.
 */
typedef struct DualqCharging DualqCharging;

/**
 * Opaque squeezing trajectory.
 */
typedef struct DualqSqueeze DualqSqueeze;

typedef struct DualqChargingSample {
  double t;
  double p_initial;
  double p_final;
  double mean_nb;
  /**
   * Variance of b†b.
   */
  double qfi;
} DualqChargingSample;

typedef struct DualqSqueezePoint {
  double t;
  double var_min;
  double theta;
  double phi_q;
  double eta;
  bool converged;
  bool contaminated;
  double leakage;
} DualqSqueezePoint;

typedef struct DualqProtocolResult {
  double p0;
  double p1;
  double p1_simulated;
  uint64_t k0;
  uint64_t k1;
  /**
   * NaN when no estimate exists (no shots or no sensing time).
   */
  double phi_hat;
  double std_error;
  double residual_energy;
  bool ambiguous;
} DualqProtocolResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dualq_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding the NUL.
 */
size_t dualq_last_error_length(void);

/**
 * Copy the last error message into `buf` (truncated, always NUL-terminated).
 * Returns the number of bytes written, excluding the NUL.
 */
size_t dualq_last_error_message(char *buf, size_t len);

enum DualqStatus dualq_coupling_from_qsl(double g, size_t n, size_t q, double *out);

enum DualqStatus dualq_coupling_from_circuit(double josephson_energy,
                                             double lambda1,
                                             double lambda2,
                                             size_t n,
                                             double *out);

enum DualqStatus dualq_rabi_frequency(size_t n, size_t q, double g_n, double *out);

/**
 * Evolve `|1, Q-n>` on `points` uniform times in `[0, t_max]`.
 */
enum DualqStatus dualq_charging_new(size_t n,
                                    size_t q,
                                    double omega0,
                                    double g_n,
                                    double t_max,
                                    size_t points,
                                    struct DualqCharging **out);

size_t dualq_charging_len(const struct DualqCharging *h);

enum DualqStatus dualq_charging_sample(const struct DualqCharging *h,
                                       size_t i,
                                       struct DualqChargingSample *out);

void dualq_charging_free(struct DualqCharging *h);

/**
 * Least quadrature variance along the evolution of `|α>|β>`. `mode` 0 warm-starts
 * from the previous optimum, 1 optimises every point independently.
 */
enum DualqStatus dualq_squeeze_new(size_t n,
                                   double omega0,
                                   double g_n,
                                   double alpha_re,
                                   double alpha_im,
                                   double beta_re,
                                   double beta_im,
                                   double t_min,
                                   double t_max,
                                   size_t points,
                                   uint32_t mode,
                                   struct DualqSqueeze **out);

size_t dualq_squeeze_len(const struct DualqSqueeze *h);

enum DualqStatus dualq_squeeze_point(const struct DualqSqueeze *h,
                                     size_t i,
                                     struct DualqSqueezePoint *out);

/**
 * Truncation used by the trajectory.
 */
enum DualqStatus dualq_squeeze_cutoffs(const struct DualqSqueeze *h,
                                       size_t *cutoff_a,
                                       size_t *cutoff_b);

void dualq_squeeze_free(struct DualqSqueeze *h);

enum DualqStatus dualq_protocol_run(size_t n,
                                    double omega0,
                                    double g_n,
                                    double phi,
                                    double t_s,
                                    uint64_t shots,
                                    uint64_t seed,
                                    struct DualqProtocolResult *out);

enum DualqStatus dualq_estimate_phi(uint64_t k1,
                                    uint64_t shots,
                                    size_t n,
                                    double t_s,
                                    double *phi_hat,
                                    double *std_error);

double dualq_sigma_z_analytic(size_t n_spins, double chi, double t);

enum DualqStatus dualq_injected_energy(size_t n_spins,
                                       double chi,
                                       double omega,
                                       double t,
                                       double *out);

/**
 * Fitted exponent of `ΔE/T` against `N` over `len` spin counts.
 */
enum DualqStatus dualq_spin_power_exponent(const size_t *n_list,
                                           size_t len,
                                           double omega,
                                           double chi,
                                           double *exponent);

/**
 * Per-spin polarisation from exact evolution (N ≤ 14).
 */
enum DualqStatus dualq_spin_oracle(size_t n_spins, double chi, double t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALQ_H */
