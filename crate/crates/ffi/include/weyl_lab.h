#ifndef WEYL_LAB_H
#define WEYL_LAB_H

#include <stddef.h>
#include <stdint.h>

typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_UTF8 = 2,
  /**
   * Syntax or arity error in an expression.
   */
  WL_STATUS_PARSE = 3,
  /**
   * Argument outside the domain of the operation.
   */
  WL_STATUS_DOMAIN = 4,
  /**
   * A numerical check failed (non-unitary, non-Hermitian, ...).
   */
  WL_STATUS_NUMERIC = 5,
  WL_STATUS_IO = 6,
  WL_STATUS_PANIC = 7,
} WlStatus;

typedef struct WlFock WlFock;

typedef struct WlMap WlMap;

typedef struct WlPolynomial WlPolynomial;

typedef struct WlState WlState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *wl_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void wl_string_free(char *s);

/**
 * # Safety
 * `src` must be a nul-terminated string and `out` writable.
 */
enum WlStatus wl_state_parse(const char *src, struct WlState **out);

/**
 * # Safety
 * `s` must be null or a handle from [`wl_state_parse`], freed once.
 */
void wl_state_free(struct WlState *s);

/**
 * `ω(W(x))` for `x = Σ (re_k + i im_k) e_{modes_k}`.
 *
 * # Safety
 * Arrays must hold `n` elements; `out` must be writable.
 */
enum WlStatus wl_characteristic(const struct WlState *s,
                                const int64_t *modes,
                                const double *re,
                                const double *im,
                                size_t n,
                                double *out);

/**
 * # Safety
 * Handles must be valid; `re` and `im` writable.
 */
enum WlStatus wl_evaluate(const struct WlState *s,
                          const struct WlPolynomial *a,
                          double *re,
                          double *im);

/**
 * Seeded search for a negative moment-matrix eigenvalue. Sets `found` to 1
 * with the witness eigenvalue, or 0 with the smallest eigenvalue seen.
 *
 * # Safety
 * `s` must be valid; `found` and `min_eig` writable.
 */
enum WlStatus wl_search_violation(const struct WlState *s,
                                  size_t n_points,
                                  size_t trials,
                                  uint64_t seed,
                                  int32_t *found,
                                  double *min_eig);

/**
 * # Safety
 * Handles must be valid; `out` writable.
 */
enum WlStatus wl_clustering_deviation(const struct WlState *s,
                                      const struct WlPolynomial *a,
                                      const struct WlPolynomial *b,
                                      uint32_t n,
                                      double *out);

/**
 * # Safety
 * Arrays must hold `n` elements; `out` writable.
 */
enum WlStatus wl_regularity_jump(const struct WlState *s,
                                 const int64_t *modes,
                                 const double *re,
                                 const double *im,
                                 size_t n,
                                 double *out);

/**
 * # Safety
 * `src` must be a nul-terminated string and `out` writable.
 */
enum WlStatus wl_polynomial_parse(const char *src, struct WlPolynomial **out);

/**
 * # Safety
 * `p` must be null or a polynomial handle, freed once.
 */
void wl_polynomial_free(struct WlPolynomial *p);

/**
 * # Safety
 * Handles must be valid; `out` writable.
 */
enum WlStatus wl_polynomial_mul(const struct WlPolynomial *a,
                                const struct WlPolynomial *b,
                                struct WlPolynomial **out);

/**
 * # Safety
 * `a` must be valid; `out` writable.
 */
enum WlStatus wl_polynomial_adjoint(const struct WlPolynomial *a, struct WlPolynomial **out);

/**
 * # Safety
 * Handles must be valid; `out` writable.
 */
enum WlStatus wl_polynomial_apply(const struct WlMap *u,
                                  const struct WlPolynomial *a,
                                  struct WlPolynomial **out);

/**
 * Number of terms, or 0 for a null handle.
 *
 * # Safety
 * `a` must be null or valid.
 */
size_t wl_polynomial_num_terms(const struct WlPolynomial *a);

/**
 * JSON form `[{"coeff":[re,im],"vector":{...}}, ...]`.
 *
 * # Safety
 * `a` must be valid; free the result with [`wl_string_free`].
 */
enum WlStatus wl_polynomial_to_json(const struct WlPolynomial *a, char **out);

/**
 * # Safety
 * `src` must be a nul-terminated string and `out` writable.
 */
enum WlStatus wl_map_parse(const char *src, struct WlMap **out);

/**
 * # Safety
 * `u` must be null or a map handle, freed once.
 */
void wl_map_free(struct WlMap *u);

/**
 * Fock space over modes `0..modes` with occupations up to `cutoff`.
 *
 * # Safety
 * `out` must be writable.
 */
enum WlStatus wl_fock_new(size_t modes, size_t cutoff, struct WlFock **out);

/**
 * # Safety
 * `f` must be null or a Fock handle, freed once.
 */
void wl_fock_free(struct WlFock *f);

/**
 * # Safety
 * `f` must be null or valid.
 */
size_t wl_fock_dim(const struct WlFock *f);

/**
 * `Tr(T W(x))` for the thermal density of variance `s2`.
 *
 * # Safety
 * Arrays must hold `n` elements; `re` and `im` writable.
 */
enum WlStatus wl_fock_thermal_characteristic(const struct WlFock *f,
                                             double s2,
                                             const int64_t *modes,
                                             const double *x_re,
                                             const double *x_im,
                                             size_t n,
                                             double *re,
                                             double *im);

/**
 * Recovers a mixing measure from `n` samples `(ts[i], values[i])` on the
 * grid `grid_a, grid_a + step, …, grid_b`. Writes the measure as JSON.
 *
 * # Safety
 * Arrays must hold `n` elements; free the result with [`wl_string_free`].
 */
enum WlStatus wl_invert_mixture(const double *ts,
                                const double *values,
                                size_t n,
                                double x_norm,
                                double grid_a,
                                double grid_b,
                                double step,
                                double reg,
                                char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEYL_LAB_H */
