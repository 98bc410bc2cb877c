#ifndef DOSEFIND_H
#define DOSEFIND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_POINTER = 1,
  DF_STATUS_INVALID_ARGUMENT = 2,
  DF_STATUS_INVALID_DESIGN = 3,
  DF_STATUS_INVALID_GRID = 4,
  DF_STATUS_INVALID_OUTCOME = 5,
  DF_STATUS_NOT_RUNNING = 6,
  DF_STATUS_INVALID_MODEL = 7,
  DF_STATUS_NUMERICAL = 8,
  DF_STATUS_PANIC = 99,
} DfStatus;

typedef enum DfAction {
  DF_ACTION_DEESCALATE = -1,
  DF_ACTION_RETAIN = 0,
  DF_ACTION_ESCALATE = 1,
} DfAction;

typedef enum DfTrialStatus {
  DF_TRIAL_STATUS_RUNNING = 0,
  DF_TRIAL_STATUS_COMPLETED = 1,
  DF_TRIAL_STATUS_STOPPED_ALL_ELIMINATED = 2,
} DfTrialStatus;

typedef enum DfLink {
  DF_LINK_LOGIT = 0,
  DF_LINK_LOG_LOG = 1,
  DF_LINK_C_LOG_LOG = 2,
} DfLink;

typedef struct DfDesign DfDesign;

typedef struct DfModel DfModel;

typedef struct DfTrial DfTrial;

// Outcome of one cohort.
typedef struct DfDecision {
  enum DfAction action;
  uint32_t next_dose;
  // Lowest dose newly eliminated by this cohort, or 0.
  uint32_t first_eliminated;
  enum DfTrialStatus status;
} DfDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL after a
// success. Valid until the next call into this library on the same thread.
const char *df_last_error(void);

// Library version as a static NUL-terminated string.
const char *df_version(void);

// Creates a design. Pass `phi1 = phi2 = 0` for the default probes
// (0.6 and 1.4 times `phi`).
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum DfStatus df_design_new(double phi,
                            double phi1,
                            double phi2,
                            uint32_t cohort_size,
                            uint32_t n_cohorts,
                            struct DfDesign **out);

// # Safety
// `design` must be NULL or a handle from `df_design_new` not yet freed.
void df_design_free(struct DfDesign *design);

// # Safety
// `design` must be a live handle; the out pointers must be writable.
enum DfStatus df_design_boundaries(const struct DfDesign *design,
                                   double *lambda_e,
                                   double *lambda_d);

// Decision for `m` DLTs among `n` patients at the current dose.
//
// # Safety
// `design` must be a live handle; `out` must be writable.
enum DfStatus df_decide(const struct DfDesign *design, uint32_t n, uint32_t m, enum DfAction *out);

// Whether the elimination rule fires for `(n, m)`.
//
// # Safety
// `design` must be a live handle; `out` must be writable.
enum DfStatus df_check_elimination(const struct DfDesign *design,
                                   uint32_t n,
                                   uint32_t m,
                                   bool *out);

// Starts a trial at dose 1. The design is copied.
//
// # Safety
// `design` must be a live handle; `out` must be writable.
enum DfStatus df_trial_new(const struct DfDesign *design, size_t n_doses, struct DfTrial **out);

// # Safety
// `trial` must be NULL or a handle from `df_trial_new` not yet freed.
void df_trial_free(struct DfTrial *trial);

// Records a cohort at the current dose. On failure the trial is unchanged.
//
// # Safety
// `trial` must be a live handle not used concurrently; `out` may be NULL.
enum DfStatus df_trial_apply_cohort(struct DfTrial *trial,
                                    uint32_t n,
                                    uint32_t dlt,
                                    struct DfDecision *out);

// # Safety
// `trial` must be a live handle; out pointers must be writable.
enum DfStatus df_trial_status(const struct DfTrial *trial,
                              enum DfTrialStatus *out_status,
                              uint32_t *out_dose);

// Copies per-dose patients and DLTs into caller buffers of length `len`,
// which must equal the number of doses.
//
// # Safety
// `n_out` and `m_out` must each point to `len` writable elements.
enum DfStatus df_trial_counts(const struct DfTrial *trial,
                              uint32_t *n_out,
                              uint32_t *m_out,
                              size_t len);

// Isotonic MTD selection on the trial so far; writes 0 when none.
//
// # Safety
// `trial` must be a live handle; `out_mtd` must be writable.
enum DfStatus df_trial_select_pava(const struct DfTrial *trial, uint32_t *out_mtd);

// Weighted isotonic (nondecreasing) regression of `y` with weights `w`.
//
// # Safety
// `y`, `w` and `out` must each point to `len` elements; `out` writable.
enum DfStatus df_pava_fit(const double *y, const double *w, size_t len, double *out);

// Dose-response model `g(pi) = b0 + exp(b1) log(d / d*)` with independent
// normal priors on `b0` and `b1`. `ref_index` is one-based.
//
// # Safety
// `doses` must point to `n_doses` values; `out` must be writable.
enum DfStatus df_model_new(enum DfLink link,
                           const double *doses,
                           size_t n_doses,
                           uint32_t ref_index,
                           double gamma0,
                           double var0,
                           double gamma1,
                           double var1,
                           struct DfModel **out);

// # Safety
// `model` must be NULL or a handle from `df_model_new` not yet freed.
void df_model_free(struct DfModel *model);

// Posterior mean DLT probability per dose given counts, by grid quadrature.
//
// # Safety
// `n`, `m` and `out` must each point to `len` elements; `out` writable.
enum DfStatus df_model_posterior_mean(const struct DfModel *model,
                                      const uint32_t *n,
                                      const uint32_t *m,
                                      size_t len,
                                      double *out);

// Dose-response MTD selection for a trial; writes 0 when none. With
// `treated_only` false, eliminated doses are excluded; with true, every
// treated dose is eligible unless the trial stopped early.
//
// # Safety
// `model` and `trial` must be live handles; `out_mtd` must be writable.
enum DfStatus df_model_select(const struct DfModel *model,
                              const struct DfTrial *trial,
                              bool treated_only,
                              uint32_t *out_mtd);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOSEFIND_H */
