#ifndef DTNLAB_H
#define DTNLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

// Result code of every exported function.
typedef enum DtnlabStatus {
  DTNLAB_STATUS_OK = 0,
  DTNLAB_STATUS_NULL_POINTER = 1,
  DTNLAB_STATUS_INVALID_ARGUMENT = 2,
  DTNLAB_STATUS_GEOMETRY = 3,
  DTNLAB_STATUS_MESH = 4,
  DTNLAB_STATUS_CONDUCTIVITY = 5,
  DTNLAB_STATUS_SOLVER = 6,
  DTNLAB_STATUS_SPECTRAL = 7,
  DTNLAB_STATUS_CONFIG = 8,
  DTNLAB_STATUS_IO = 9,
  DTNLAB_STATUS_NUMERICAL = 10,
  DTNLAB_STATUS_PANIC = 11,
} DtnlabStatus;

// Conductivity bound to the domain of the mesh it was created for.
typedef struct DtnlabConductivity DtnlabConductivity;

// Tetrahedral mesh of the cube or the ball.
typedef struct DtnlabMesh DtnlabMesh;

// Assembled Dirichlet-to-Neumann matrix on the boundary vertices of a mesh.
typedef struct DtnlabOperator DtnlabOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next `dtnlab_*` call on the same thread.
const char *dtnlab_last_error(void);

// Structured mesh of the unit cube with `m` cells per edge.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum DtnlabStatus dtnlab_mesh_cube(size_t m, struct DtnlabMesh **out);

// Mesh of the unit ball at refinement `level`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum DtnlabStatus dtnlab_mesh_ball(size_t level, struct DtnlabMesh **out);

// Vertex counts and mesh size. Any of the out pointers may be null.
//
// # Safety
// `mesh` must come from a mesh constructor; non-null out pointers must be writable.
enum DtnlabStatus dtnlab_mesh_info(const struct DtnlabMesh *mesh,
                                   size_t *n_vertices,
                                   size_t *n_boundary,
                                   double *h);

// # Safety
// `mesh` must be null or a handle not yet freed.
void dtnlab_mesh_free(struct DtnlabMesh *mesh);

// Conductivity from a JSON family description such as
// `{"family":"affine","gradient":[1,0,0],"offset":1}`, on the domain of `mesh`.
//
// # Safety
// `mesh` must be a live handle, `json` a nul-terminated string, `out` writable.
enum DtnlabStatus dtnlab_conductivity_from_json(const struct DtnlabMesh *mesh,
                                                const char *json,
                                                struct DtnlabConductivity **out);

// # Safety
// `cond` must be null or a handle not yet freed.
void dtnlab_conductivity_free(struct DtnlabConductivity *cond);

// Assembles the DtN matrix of `cond` on `mesh`.
//
// # Safety
// `mesh` and `cond` must be live handles and `out` writable.
enum DtnlabStatus dtnlab_operator_assemble(const struct DtnlabMesh *mesh,
                                           const struct DtnlabConductivity *cond,
                                           struct DtnlabOperator **out);

// Number of boundary degrees of freedom, or 0 for a null handle.
//
// # Safety
// `op` must be null or a live handle.
size_t dtnlab_operator_dim(const struct DtnlabOperator *op);

// `out = Λ g`; both buffers have length `dim`.
//
// # Safety
// `g` must hold `len` readable doubles and `out` `len` writable ones.
enum DtnlabStatus dtnlab_operator_apply(const struct DtnlabOperator *op,
                                        const double *g,
                                        double *out,
                                        size_t len);

// `⟨Λ g, h⟩`.
//
// # Safety
// `g` and `h` must hold `len` readable doubles; `out` must be writable.
enum DtnlabStatus dtnlab_operator_pairing(const struct DtnlabOperator *op,
                                          const double *g,
                                          const double *h,
                                          size_t len,
                                          double *out);

// Relative asymmetry of the assembled matrix.
//
// # Safety
// `op` must be a live handle and `out` writable.
enum DtnlabStatus dtnlab_operator_asymmetry(const struct DtnlabOperator *op, double *out);

// Steklov eigenvalues in ascending order, with the boundary mass of `mesh`.
// Writes `min(cap, dim)` values and stores the full count in `written`.
//
// # Safety
// `mesh` must be the mesh the operator was assembled on; `out` must hold `cap`
// writable doubles and `written` must be writable.
enum DtnlabStatus dtnlab_operator_steklov(const struct DtnlabOperator *op,
                                          const struct DtnlabMesh *mesh,
                                          double *out,
                                          size_t cap,
                                          size_t *written);

// # Safety
// `op` must be null or a handle not yet freed.
void dtnlab_operator_free(struct DtnlabOperator *op);

// Runs experiment `kind` (for example `"dtn-validate"`) from TOML text.
// `out_dir` may be null to use the config value or the default. On success
// `summary` receives the JSON summary, to be released with [`dtnlab_string_free`].
//
// # Safety
// `kind` and `toml` must be nul-terminated strings, `out_dir` null or one, and
// `summary` writable.
enum DtnlabStatus dtnlab_run_scenario(const char *kind,
                                      const char *toml,
                                      const char *out_dir,
                                      char **summary);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void dtnlab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTNLAB_H */
