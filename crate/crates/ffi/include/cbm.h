#ifndef CBM_H
#define CBM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum CbmStatus {
  CBM_STATUS_OK = 0,
  CBM_STATUS_NULL_POINTER = 1,
  CBM_STATUS_INVALID_ARGUMENT = 2,
  CBM_STATUS_OUT_OF_RANGE = 3,
  CBM_STATUS_ENUMERATION_CAP = 4,
  CBM_STATUS_NOT_GAUGE_FIXED = 5,
  CBM_STATUS_INTERNAL = 6,
  CBM_STATUS_PANIC = 7,
} CbmStatus;

/*
 An incrementally built GF(2) row space.
 */
typedef struct CbmGf2 CbmGf2;

/*
 A generated or parsed instance together with its posterior.
 */
typedef struct CbmInstance CbmInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *cbm_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cbm_version(void);

/*
 Draws a gauge-fixed instance with `Poi(alpha n)` factors of size `k`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum CbmStatus cbm_instance_generate(size_t n,
                                     size_t k,
                                     double alpha,
                                     double q,
                                     uint64_t seed,
                                     struct CbmInstance **out);

/*
 Parses an instance from its JSON form.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_from_json(const char *json, struct CbmInstance **out);

/*
 Releases an instance. Null is ignored.

 # Safety
 `inst` must come from this library and not be used afterwards.
 */
void cbm_instance_free(struct CbmInstance *inst);

/*
 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_num_vars(const struct CbmInstance *inst, size_t *out);

/*
 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_num_factors(const struct CbmInstance *inst, size_t *out);

/*
 Rank of the revealed parity rows.

 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_rank(const struct CbmInstance *inst, size_t *out);

/*
 `(1/n) ln Z` in nats.

 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_free_entropy(const struct CbmInstance *inst, double *out);

/*
 Fraction of variables fixed by the constraints.

 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_mean_overlap(const struct CbmInstance *inst, double *out);

/*
 `⟨σ_S⟩ ∈ {0, 1}` for the index set `support[0..len]`.

 # Safety
 `inst` must be a live handle, `support` must point to `len` indices
 (may be null when `len == 0`) and `out` must be valid.
 */
enum CbmStatus cbm_instance_marginal(const struct CbmInstance *inst,
                                     const size_t *support_ptr,
                                     size_t len,
                                     uint8_t *out);

/*
 JSON serialization; release the string with [`cbm_string_free`].

 # Safety
 `inst` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_instance_to_json(const struct CbmInstance *inst, char **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void cbm_string_free(char *s);

/*
 Empty row space over `n` variables.

 # Safety
 `out` must be a valid pointer.
 */
enum CbmStatus cbm_gf2_new(size_t n, struct CbmGf2 **out);

/*
 Releases a row space. Null is ignored.

 # Safety
 `sys` must come from this library and not be used afterwards.
 */
void cbm_gf2_free(struct CbmGf2 *sys);

/*
 Adds the row with ones at `support[0..len]` (repeated indices cancel) and
 reports the new rank through `rank_out` when it is non-null.

 # Safety
 `sys` must be a live handle and `support` must point to `len` indices.
 */
enum CbmStatus cbm_gf2_add_row(struct CbmGf2 *sys,
                               const size_t *support_ptr,
                               size_t len,
                               size_t *rank_out);

/*
 # Safety
 `sys` must be a live handle and `out` a valid pointer.
 */
enum CbmStatus cbm_gf2_rank(const struct CbmGf2 *sys, size_t *out);

/*
 Writes 1 when the indicator of `support` lies in the row space, else 0.

 # Safety
 `sys` must be a live handle, `support` must point to `len` indices and
 `out` must be valid.
 */
enum CbmStatus cbm_gf2_in_row_space(const struct CbmGf2 *sys,
                                    const size_t *support_ptr,
                                    size_t len,
                                    uint8_t *out);

/*
 Replica-symmetric free entropy at erasure mass `x`.

 # Safety
 `out` must be a valid pointer.
 */
enum CbmStatus cbm_h_rs(size_t k, double alpha, double q, double x, double *out);

/*
 One density-evolution step on the erasure mass.

 # Safety
 `out` must be a valid pointer.
 */
enum CbmStatus cbm_de_map(size_t k, double alpha, double q, double z, double *out);

/*
 Maximizer and maximum of the replica-symmetric free entropy.

 # Safety
 `x_out` and `h_out` must be valid pointers.
 */
enum CbmStatus cbm_sup_h_rs(size_t k,
                            double alpha,
                            double q,
                            size_t grid_points,
                            double refine_tol,
                            double *x_out,
                            double *h_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBM_H */
