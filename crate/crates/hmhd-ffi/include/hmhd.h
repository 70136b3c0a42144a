#ifndef HMHD_H
#define HMHD_H

/* Generated from the hmhd-ffi crate; edit the Rust source, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Success.
#define HMHD_OK 0

// A required pointer argument was null.
#define HMHD_ERR_NULL -1

// An argument or configuration value was rejected.
#define HMHD_ERR_INVALID -2

// A tag (system, scheme) outside the supported set.
#define HMHD_ERR_UNSUPPORTED -3

// An internal failure; inspect hmhd_last_error.
#define HMHD_ERR_INTERNAL -4

// The solution lost regularity before reaching the requested time.
#define HMHD_ERR_BLOWUP -5

// Opaque three-component field handle.
typedef struct HmhdField HmhdField;

// Opaque periodic-grid handle.
typedef struct HmhdGrid HmhdGrid;

// Opaque simulation handle: one field (plus optional velocity) marching
// in time under a fixed model.
typedef struct HmhdSim HmhdSim;

// Simulation parameters; obtain defaults from `hmhd_sim_config_default`
// and adjust before `hmhd_sim_new`.  `dt > 0` fixes the step; `dt <= 0`
// selects adaptive stepping under the `cfl` number.
typedef struct {
  // Model tag: 0 anisotropic electron, 1 uniform-exponent electron,
  // 2 mixed-dissipation hall, 3 classical hall.
  uint32_t system;
  // Scheme tag: 0 fourth-order, 1 second-order integrating factor.
  uint32_t scheme;
  double alpha;
  double beta;
  double eps;
  double nu;
  double eta;
  double dt;
  double cfl;
  double t_end;
  double h3_ceiling;
} HmhdSimConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never null.
const char *hmhd_version(void);

// Copies the most recent error message on this thread into `buf`
// (truncated to `cap` bytes including the NUL) and returns the full
// message length in bytes.  With a null or zero-capacity buffer only the
// length is reported.
//
// # Safety
// `buf`, when non-null, must point to `cap` writable bytes.
int32_t hmhd_last_error(char *buf, size_t cap);

// Creates a square periodic grid: `dim` axes (2 or 3), `n` points per
// axis, coefficients kept for |mode| <= `band`.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle that
// must be released with `hmhd_grid_free`.
int32_t hmhd_grid_new(uint32_t dim, uint32_t n, uint32_t band, HmhdGrid **out);

// Releases a grid handle; a null handle is a no-op.
//
// # Safety
// `g` must be null or a handle obtained from this library that has not
// been freed already.
void hmhd_grid_free(HmhdGrid *g);

// Reports the number of axes.
//
// # Safety
// `g` must be a live grid handle and `out` a valid pointer.
int32_t hmhd_grid_dim(const HmhdGrid *g, uint32_t *out);

// Reports the number of points along `axis` (0-based).
//
// # Safety
// `g` must be a live grid handle and `out` a valid pointer.
int32_t hmhd_grid_size(const HmhdGrid *g, uint32_t axis, uint32_t *out);

// Reports the band limit along `axis` (0-based).
//
// # Safety
// `g` must be a live grid handle and `out` a valid pointer.
int32_t hmhd_grid_band(const HmhdGrid *g, uint32_t axis, uint32_t *out);

// Draws a reproducible divergence-free random field on `g`: complex
// Gaussian modes with amplitude |mode|^(-slope) up to `k_max`, projected
// and zero-mean.  The same seed yields bit-identical fields.
//
// # Safety
// `g` must be a live grid handle; `out` receives a handle to release
// with `hmhd_field_free`.
int32_t hmhd_field_random(const HmhdGrid *g,
                          uint64_t seed,
                          uint32_t k_max,
                          double slope,
                          HmhdField **out);

// Deep-copies a field.
//
// # Safety
// `f` must be a live field handle; `out` receives an independent handle.
int32_t hmhd_field_clone(const HmhdField *f, HmhdField **out);

// Releases a field handle; a null handle is a no-op.
//
// # Safety
// `f` must be null or a handle obtained from this library that has not
// been freed already.
void hmhd_field_free(HmhdField *f);

// Multiplies the field by `s` in place.
//
// # Safety
// `f` must be a live field handle.
int32_t hmhd_field_scale(HmhdField *f, double s);

// L2 norm of the field.
//
// # Safety
// `f` must be a live field handle and `out` a valid pointer.
int32_t hmhd_field_l2_norm(const HmhdField *f, double *out);

// Homogeneous Sobolev seminorm of the given order.
//
// # Safety
// `f` must be a live field handle and `out` a valid pointer.
int32_t hmhd_field_sobolev_seminorm(const HmhdField *f, double order, double *out);

// Relative divergence residual (0 for a solenoidal field).
//
// # Safety
// `f` must be a live field handle and `out` a valid pointer.
int32_t hmhd_field_div_residual(const HmhdField *f, double *out);

// Reads one spectral coefficient: component `comp` in 1..=3, signed mode
// vector `mode` of length equal to the grid dimension.
//
// # Safety
// `f` must be a live field handle; `mode` must point to `dim` readable
// integers; `out_re`/`out_im` must be valid pointers.
int32_t hmhd_field_coefficient(const HmhdField *f,
                               uint32_t comp,
                               const int64_t *mode,
                               double *out_re,
                               double *out_im);

// Evaluates the full identity ledger on the field: term additivity, the
// pairwise cancellations, the master identity, and on planar grids the
// two extra families.  Reports the number of checks, how many failed,
// and the worst residual relative to each check's scale.
//
// # Safety
// `f` must be a live field handle; the out-pointers must be valid.
int32_t hmhd_field_check_identities(const HmhdField *f,
                                    double *worst_rel,
                                    uint32_t *n_checks,
                                    uint32_t *n_failed);

// Energy neutrality of the Hall force: |<curl(j x b), b>| scaled by
// ||j|| ||grad b|| ||b||; exactly zero in exact arithmetic.
//
// # Safety
// `f` must be a live field handle and `out` a valid pointer.
int32_t hmhd_field_hall_neutrality(const HmhdField *f, double *out);

// Fills `out` with the default parameters of the given model tag.
//
// # Safety
// `out` must be a valid pointer.
int32_t hmhd_sim_config_default(uint32_t system, HmhdSimConfig *out);

// Starts a simulation from magnetic data `b` and, for the models that
// carry one, velocity data `u` (pass null otherwise).  The initial
// fields are copied; the handles remain owned by the caller.
//
// # Safety
// `cfg` and `b` must be valid; `u` must be null or a live field handle
// on the same grid; `out` receives a handle to release with
// `hmhd_sim_free`.
int32_t hmhd_sim_new(const HmhdSimConfig *cfg,
                     const HmhdField *b,
                     const HmhdField *u,
                     HmhdSim **out);

// Releases a simulation handle; a null handle is a no-op.
//
// # Safety
// `s` must be null or a handle obtained from this library that has not
// been freed already.
void hmhd_sim_free(HmhdSim *s);

// Takes one time step and reports the dt actually used.
//
// # Safety
// `s` must be a live simulation handle and `dt_taken` a valid pointer.
int32_t hmhd_sim_step(HmhdSim *s, double *dt_taken);

// Advances to the configured end time; returns `HMHD_ERR_BLOWUP` when
// the solution loses regularity first.
//
// # Safety
// `s` must be a live simulation handle.
int32_t hmhd_sim_run(HmhdSim *s);

// Current simulation time.
//
// # Safety
// `s` must be a live simulation handle and `out` a valid pointer.
int32_t hmhd_sim_time(const HmhdSim *s, double *out);

// Total quadratic energy of the evolved fields.
//
// # Safety
// `s` must be a live simulation handle and `out` a valid pointer.
int32_t hmhd_sim_energy(const HmhdSim *s, double *out);

// Relative defect of the energy balance (energy plus accumulated
// dissipation against the initial energy).
//
// # Safety
// `s` must be a live simulation handle and `out` a valid pointer.
int32_t hmhd_sim_energy_defect(const HmhdSim *s, double *out);

// Homogeneous H^3 seminorm of the magnetic field.
//
// # Safety
// `s` must be a live simulation handle and `out` a valid pointer.
int32_t hmhd_sim_h3(const HmhdSim *s, double *out);

// Copies the current magnetic field into a fresh field handle.
//
// # Safety
// `s` must be a live simulation handle; `out` receives a handle to
// release with `hmhd_field_free`.
int32_t hmhd_sim_field(const HmhdSim *s, HmhdField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMHD_H */
