#ifndef REFLECTOR_H
#define REFLECTOR_H

/* Generated by cbindgen from the reflector-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RflStatus {
  RFL_STATUS_OK = 0,
  RFL_STATUS_NULL_POINTER = 1,
  RFL_STATUS_INVALID_INPUT = 2,
  RFL_STATUS_IO = 3,
  RFL_STATUS_BUFFER_TOO_SMALL = 4,
  RFL_STATUS_PANIC = 5,
} RflStatus;

// Element lattice.
typedef struct RflAperture RflAperture;

// Per-element reflection coefficients.
typedef struct RflMask RflMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null.
//
// The pointer stays valid until the next call on this thread.
const char *rfl_last_error(void);

// # Safety
// `out` must be valid for writes.
enum RflStatus rfl_aperture_new(size_t element_count,
                                double spacing,
                                double wavelength,
                                struct RflAperture **out);

// # Safety
// `ap` must come from [`rfl_aperture_new`] and not be used afterwards.
void rfl_aperture_free(struct RflAperture *ap);

// Binary mask from `len` bytes (nonzero = ON).
//
// # Safety
// `bits` must hold `len` bytes; `out` must be valid for writes.
enum RflStatus rfl_mask_from_bits(const uint8_t *bits, size_t len, struct RflMask **out);

// Cosine-threshold mask for `n_targets` equally weighted targets.
//
// # Safety
// `ap` must be a live aperture, `targets` must hold `n_targets` values and
// `out` must be valid for writes.
enum RflStatus rfl_synthesize_mask(const struct RflAperture *ap,
                                   double theta_i_deg,
                                   const double *targets,
                                   size_t n_targets,
                                   double psi,
                                   struct RflMask **out);

// # Safety
// `mask` must come from this library and not be used afterwards.
void rfl_mask_free(struct RflMask *mask);

// Number of elements, or 0 for a null handle.
//
// # Safety
// `mask` must be null or a live mask.
size_t rfl_mask_len(const struct RflMask *mask);

// Copies the bits (0 or 1) into `out`, which holds `cap` bytes.
//
// # Safety
// `mask` must be live; `out` must hold `cap` bytes.
enum RflStatus rfl_mask_bits(const struct RflMask *mask, uint8_t *out, size_t cap);

// # Safety
// `mask` must be live; `out` must be valid for writes.
enum RflStatus rfl_thinning_ratio(const struct RflMask *mask, double *out);

// Complex array factor.
//
// # Safety
// Handles must be live; `re` and `im` valid for writes.
enum RflStatus rfl_array_factor(const struct RflAperture *ap,
                                const struct RflMask *mask,
                                double theta_t_deg,
                                double theta_i_deg,
                                double *re,
                                double *im);

// `|p|² / M²`.
//
// # Safety
// Handles must be live; `out` valid for writes.
enum RflStatus rfl_normalized_gain(const struct RflAperture *ap,
                                   const struct RflMask *mask,
                                   double theta_t_deg,
                                   double theta_i_deg,
                                   double *out);

// Normalized gain at each of `n` strictly increasing angles.
//
// # Safety
// Handles must be live; `thetas` and `gains` must hold `n` values.
enum RflStatus rfl_pattern_sweep(const struct RflAperture *ap,
                                 const struct RflMask *mask,
                                 double theta_i_deg,
                                 const double *thetas,
                                 size_t n,
                                 double *gains);

// Period placing order `order` on `theta_t_deg`.
//
// # Safety
// `out` must be valid for writes.
enum RflStatus rfl_period_for_target(double theta_i_deg,
                                     double theta_t_deg,
                                     double wavelength,
                                     int32_t order,
                                     double *out);

// Direction of order `order`; `visible` is set false for evanescent orders.
//
// # Safety
// `out` and `visible` must be valid for writes.
enum RflStatus rfl_order_direction(double period,
                                   double wavelength,
                                   double theta_i_deg,
                                   int32_t order,
                                   double *out,
                                   bool *visible);

// Scaffold stride and active element count for a period.
//
// # Safety
// `stride` and `m_active` must be valid for writes.
enum RflStatus rfl_snap_to_grid(double period,
                                double pitch,
                                size_t wells_per_row,
                                size_t *stride,
                                size_t *m_active);

// Exact best ON/OFF mask for `m` phases (radians).
//
// # Safety
// `phases` and `bits` must hold `m` values; `s_star` and `gamma_star`
// must be valid for writes.
enum RflStatus rfl_breakpoint_opt_mask(const double *phases,
                                       size_t m,
                                       uint8_t *bits,
                                       double *s_star,
                                       double *gamma_star);

// Writes `base.stl`, `pads.stl` and `stencil.stl` for a striped mask with
// default plate dimensions.
//
// # Safety
// `mask` must be live and `dir` a nul-terminated UTF-8 path.
enum RflStatus rfl_export_stl(const struct RflMask *mask, size_t rows, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFLECTOR_H */
