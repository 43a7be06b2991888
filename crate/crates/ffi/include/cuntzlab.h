#ifndef CUNTZLAB_H
#define CUNTZLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CuntzStatus {
  CUNTZ_STATUS_OK = 0,
  CUNTZ_STATUS_NULL_POINTER = 1,
  CUNTZ_STATUS_INVALID_ARGUMENT = 2,
  CUNTZ_STATUS_BUDGET = 3,
  CUNTZ_STATUS_LEVEL_TOO_LOW = 4,
  CUNTZ_STATUS_NOT_UNITARY = 5,
  CUNTZ_STATUS_BUFFER_TOO_SMALL = 6,
  CUNTZ_STATUS_IO = 7,
  CUNTZ_STATUS_PANIC = 8,
} CuntzStatus;

// A family of n isometries satisfying the Cuntz relations.
typedef struct CuntzFamily CuntzFamily;

// A state on the UHF algebra.
typedef struct CuntzState CuntzState;

typedef struct CuntzComplex {
  double re;
  double im;
} CuntzComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL terminated and
// truncated to `capacity` bytes. Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `capacity` bytes.
size_t cuntzlab_last_error(char *buf, size_t capacity);

// Library version as a static NUL-terminated string.
const char *cuntzlab_version(void);

// The Haar family on n letters.
//
// # Safety
// `outp` must be valid for writes.
enum CuntzStatus cuntzlab_family_haar(size_t n, struct CuntzFamily **outp);

// The weighted Haar family for a unit vector η of length n.
//
// # Safety
// `eta` must be valid for `n` reads and `outp` for writes.
enum CuntzStatus cuntzlab_family_weighted_haar(const struct CuntzComplex *eta,
                                               size_t n,
                                               struct CuntzFamily **outp);

// The nearest-neighbor family on n letters.
//
// # Safety
// `outp` must be valid for writes.
enum CuntzStatus cuntzlab_family_nearest_neighbor(size_t n, struct CuntzFamily **outp);

// Haar family twisted by the gauge unitaries of the theta-harmonic
// sequence, truncated after `horizon` slots.
//
// # Safety
// `outp` must be valid for writes.
enum CuntzStatus cuntzlab_family_theta_gauge(size_t n, size_t horizon, struct CuntzFamily **outp);

// # Safety
// `f` must be null or a handle from a `cuntzlab_family_*` constructor that
// has not been freed.
void cuntzlab_family_free(struct CuntzFamily *f);

// # Safety
// `f` must be a live family handle; `n` valid for writes.
enum CuntzStatus cuntzlab_family_base(const struct CuntzFamily *f, size_t *n);

// Isometry and completeness defects of the Cuntz relations at level m.
//
// # Safety
// `f` must be a live family handle; the outputs valid for writes.
enum CuntzStatus cuntzlab_family_cuntz_defect(const struct CuntzFamily *f,
                                              size_t m,
                                              double *isometry,
                                              double *completeness);

// Applies S_i to a vector of n^level coordinates. The image level is
// written to `out_level` and its n^out_level coordinates to `buf`; when the
// buffer is too small `written` still reports the required length.
//
// # Safety
// `f` must be a live family handle, `input` valid for `len` reads, `buf`
// valid for `capacity` writes and `written`, `out_level` valid for writes.
enum CuntzStatus cuntzlab_family_apply_s(const struct CuntzFamily *f,
                                         size_t i,
                                         size_t level,
                                         const struct CuntzComplex *input,
                                         size_t len,
                                         struct CuntzComplex *buf,
                                         size_t capacity,
                                         size_t *written,
                                         size_t *out_level);

// Applies S_i^*; arguments as for [`cuntzlab_family_apply_s`].
//
// # Safety
// As for [`cuntzlab_family_apply_s`].
enum CuntzStatus cuntzlab_family_apply_s_star(const struct CuntzFamily *f,
                                              size_t i,
                                              size_t level,
                                              const struct CuntzComplex *input,
                                              size_t len,
                                              struct CuntzComplex *buf,
                                              size_t capacity,
                                              size_t *written,
                                              size_t *out_level);

// min over unit ξ at level m of Σ_j ‖S_j^*ξ − λ_j ξ‖², λ of length n.
//
// # Safety
// `f` must be a live family handle, `lambda` valid for `n` reads and
// `residual` valid for writes.
enum CuntzStatus cuntzlab_eigen_residual(const struct CuntzFamily *f,
                                         const struct CuntzComplex *lambda,
                                         size_t n,
                                         size_t m,
                                         double *residual);

// The vector state of the weighted Haar family for η.
//
// # Safety
// `eta` must be valid for `n` reads and `outp` for writes.
enum CuntzStatus cuntzlab_state_cuntz(const struct CuntzComplex *eta,
                                      size_t n,
                                      struct CuntzState **outp);

// The nearest-neighbor state on n letters.
//
// # Safety
// `outp` must be valid for writes.
enum CuntzStatus cuntzlab_state_nearest_neighbor(size_t n, struct CuntzState **outp);

// Product state over `count` unit site vectors of length n stored back to
// back; the last vector repeats on all later sites.
//
// # Safety
// `vectors` must be valid for `n * count` reads and `outp` for writes.
enum CuntzStatus cuntzlab_state_product(const struct CuntzComplex *vectors,
                                        size_t n,
                                        size_t count,
                                        struct CuntzState **outp);

// # Safety
// `s` must be null or a live state handle.
void cuntzlab_state_free(struct CuntzState *s);

// ω(s_I s_J^*) for words I, J of length `len`.
//
// # Safety
// `s` must be a live state handle, `i` and `j` valid for `len` reads and
// `value` valid for writes.
enum CuntzStatus cuntzlab_state_eval(const struct CuntzState *s,
                                     const size_t *i,
                                     const size_t *j,
                                     size_t len,
                                     struct CuntzComplex *value);

// Density matrix on the first k sites, n^k × n^k in row-major order.
//
// # Safety
// `s` must be a live state handle, `buf` valid for `capacity` writes and
// `written` valid for writes.
enum CuntzStatus cuntzlab_state_density(const struct CuntzState *s,
                                        size_t k,
                                        struct CuntzComplex *buf,
                                        size_t capacity,
                                        size_t *written);

// Per-site Hellinger affinity Σ √(p_i q_i) of two probability vectors.
//
// # Safety
// `p` and `q` must be valid for `n` reads and `affinity` for writes.
enum CuntzStatus cuntzlab_hellinger_affinity(const double *p,
                                             const double *q,
                                             size_t n,
                                             double *affinity);

// Runs an experiment config as the command line tool does. `out_dir` may
// be null to use the configured directory. The tool's exit code (0 passed,
// 1 invariant failure, 2 schema error, 3 budget overflow) goes to
// `exit_code`; the return value reports only FFI-level failures.
//
// # Safety
// `path` must be a NUL-terminated string, `out_dir` null or one, and
// `exit_code` valid for writes.
enum CuntzStatus cuntzlab_run_config(const char *path, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUNTZLAB_H */
