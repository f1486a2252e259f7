#ifndef VORTEXKIN_H
#define VORTEXKIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum VkStatus {
  VkStatus_Ok = 0,
  VkStatus_NullPointer = 1,
  VkStatus_InvalidArgument = 2,
  VkStatus_NumericalFailure = 3,
  VkStatus_Io = 4,
} VkStatus;

/**
 * Opaque mean-field equilibrium handle.
 */
typedef struct VkEquilibrium VkEquilibrium;

/**
 * Opaque torus kernel handle.
 */
typedef struct VkTorusKernel VkTorusKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (truncated to `len` bytes,
 * always NUL-terminated). Returns the full message length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be NULL with `len` 0).
 */
uintptr_t vk_last_error_message(char *buf, uintptr_t len);

/**
 * Crate version as a static NUL-terminated string.
 */
const char *vk_version(void);

/**
 * Build a torus kernel from `n` cosine entries (k1[i], k2[i], amp[i]).
 *
 * # Safety
 * `k1`, `k2`, `amp` must point to `n` readable elements; `out` must be a
 * valid out-pointer.
 */
enum VkStatus vk_torus_kernel_new(const int64_t *k1,
                                  const int64_t *k2,
                                  const double *amp,
                                  uintptr_t n,
                                  struct VkTorusKernel **out);

/**
 * # Safety
 * `k` must be a pointer from [`vk_torus_kernel_new`], not yet freed.
 */
void vk_torus_kernel_free(struct VkTorusKernel *k);

/**
 * Force K(x) of a torus kernel; writes 2 components.
 *
 * # Safety
 * `k` must be a live kernel handle; `force_out` must point to 2 writable f64.
 */
enum VkStatus vk_torus_kernel_force(const struct VkTorusKernel *k,
                                    double x0,
                                    double x1,
                                    double *force_out);

/**
 * Diffusion matrix A = ∫K⊗K (row-major 2×2) of a torus kernel.
 *
 * # Safety
 * `k` must be a live kernel handle; `a_out` must point to 4 writable f64.
 */
enum VkStatus vk_torus_diffusion_matrix(const struct VkTorusKernel *k, double *a_out);

/**
 * Next-order wave correction matrix B (row-major 2×2).
 *
 * # Safety
 * `k` must be a live kernel handle; `b_out` must point to 4 writable f64.
 */
enum VkStatus vk_torus_next_order_b(const struct VkTorusKernel *k, double *b_out);

/**
 * Modal wave evolution for the density 1 + amp·cos(x₁): writes the
 * (1,0)-mode coefficient f̂°·cos(√(kᵀAk)·τ) at each tau.
 *
 * # Safety
 * `k` must be a live kernel handle; `taus` must point to `n_tau` readable
 * f64 and `coeff_out` to `n_tau` writable f64.
 */
enum VkStatus vk_wave_mode_series(const struct VkTorusKernel *k,
                                  double amp,
                                  const double *taus,
                                  uintptr_t n_tau,
                                  double *coeff_out);

/**
 * Solve the mean-field fixed point for V = c2·r²/2 + c4·r⁴/4 and a
 * Gaussian interaction W = w_amp·exp(-r²/(2·w_width²)).
 *
 * # Safety
 * `out` must be a valid out-pointer.
 */
enum VkStatus vk_equilibrium_solve(double beta,
                                   double c2,
                                   double c4,
                                   double w_amp,
                                   double w_width,
                                   double r_max,
                                   uintptr_t n_panels,
                                   struct VkEquilibrium **out);

/**
 * # Safety
 * `p` must be a pointer from [`vk_equilibrium_solve`], not yet freed.
 */
void vk_equilibrium_free(struct VkEquilibrium *p);

/**
 * μ_β(r) by interpolation.
 *
 * # Safety
 * `p` must be a live equilibrium handle; `mu_out` must be writable.
 */
enum VkStatus vk_equilibrium_mu(const struct VkEquilibrium *p, double r, double *mu_out);

/**
 * Equilibrium classification: 0 = Gaussian, 1 = non-degenerate, 2 = other;
 * the reported constant R is written to `r_out`.
 *
 * # Safety
 * `p` must be a live equilibrium handle; `class_out`/`r_out` writable.
 */
enum VkStatus vk_equilibrium_classify(const struct VkEquilibrium *p,
                                      double tol,
                                      int *class_out,
                                      double *r_out);

/**
 * Run an experiment config file end-to-end (same pipeline as the CLI `run`
 * subcommand); Ok when every stage and check passed.
 *
 * # Safety
 * `config_path` must be a NUL-terminated UTF-8 path.
 */
enum VkStatus vk_run_experiment(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VORTEXKIN_H */
