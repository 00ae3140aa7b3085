#ifndef RELUCVX_H
#define RELUCVX_H

/* Generated by cbindgen from src/lib.rs; tests/header.rs fails when this file is stale. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RELUCVX_TASK_BINARY 0

#define RELUCVX_TASK_REGRESSION 1

#define RELUCVX_LOSS_HINGE 0

#define RELUCVX_LOSS_SQUARED 1

#define RELUCVX_BIAS_NONE 0

#define RELUCVX_BIAS_PERTURBED 1

#define RELUCVX_BIAS_FROZEN 2

typedef enum RelucvxStatus {
  RELUCVX_STATUS_OK = 0,
  RELUCVX_STATUS_NULL_POINTER = 1,
  RELUCVX_STATUS_INVALID_ARGUMENT = 2,
  RELUCVX_STATUS_DIMENSION = 3,
  RELUCVX_STATUS_TOO_LARGE = 4,
  RELUCVX_STATUS_SOLVER = 5,
  RELUCVX_STATUS_DIVERGENCE = 6,
  RELUCVX_STATUS_SERIALIZATION = 7,
  RELUCVX_STATUS_PANIC = 8,
} RelucvxStatus;

typedef struct RelucvxDataset RelucvxDataset;

typedef struct RelucvxModel RelucvxModel;

typedef struct RelucvxTrainOptions {
  // Nonzero selects the robust program at radius `eps`.
  uint32_t adversarial;
  uint32_t loss;
  double beta;
  double eps;
  size_t ps;
  size_t pa;
  size_t s;
  uint64_t seed;
  double tol_gap;
  double tol_feas;
  size_t max_iter;
} RelucvxTrainOptions;

typedef struct RelucvxEvaluation {
  // Accuracy for binary tasks, mean squared error for regression.
  double clean;
  double fgsm;
  double pgd;
  double clean_loss;
  double pgd_loss;
} RelucvxEvaluation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *relucvx_version(void);

// Message of the last failed call on this thread; empty when none failed.
// Valid until the next failing call on the same thread.
const char *relucvx_last_error(void);

// Fills `out` with hinge loss, β = 1e-4, P_s = P_a = 120, S = 10, seed 0
// and the default solver tolerances.
//
// # Safety
// `out` must be null or point to writable memory for one options struct.
enum RelucvxStatus relucvx_train_options_default(struct RelucvxTrainOptions *out);

// Copies a row-major n×d matrix and n labels into a new dataset. Binary
// labels must be ±1. With `bias` perturbed or frozen a column of ones is
// appended; a frozen column is never moved by adversaries.
//
// # Safety
// `x` must point to n·d doubles, `y` to n doubles and `out` to a writable
// handle slot.
enum RelucvxStatus relucvx_dataset_new(const double *x,
                                       size_t n,
                                       size_t d,
                                       const double *y,
                                       uint32_t task,
                                       uint32_t bias,
                                       struct RelucvxDataset **out);

// # Safety
// `data` must be null or a handle from [`relucvx_dataset_new`] not yet freed.
void relucvx_dataset_free(struct RelucvxDataset *data);

// Row count, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t relucvx_dataset_rows(const struct RelucvxDataset *data);

// Column count including any bias column, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t relucvx_dataset_cols(const struct RelucvxDataset *data);

// Samples patterns, solves the convex program and recovers a network.
// A solver that stops before certifying optimality still yields a model;
// see [`relucvx_model_degraded`].
//
// # Safety
// `data` and `options` must be live, `out` a writable handle slot.
enum RelucvxStatus relucvx_train(const struct RelucvxDataset *data,
                                 const struct RelucvxTrainOptions *options,
                                 struct RelucvxModel **out);

// # Safety
// `model` must be null or a live model handle.
void relucvx_model_free(struct RelucvxModel *model);

// Number of recovered hidden neurons, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t relucvx_model_width(const struct RelucvxModel *model);

// Optimal value reported by the solver, or NaN for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
double relucvx_model_objective(const struct RelucvxModel *model);

// 1 when the solver stopped before certifying optimality, else 0.
//
// # Safety
// `model` must be null or a live model handle.
uint32_t relucvx_model_degraded(const struct RelucvxModel *model);

// Network outputs ŷ for the n rows of a row-major n×d matrix.
//
// # Safety
// `x` must point to n·d doubles and `out` to n writable doubles.
enum RelucvxStatus relucvx_model_predict(const struct RelucvxModel *model,
                                         const double *x,
                                         size_t n,
                                         size_t d,
                                         double *out);

// Clean, FGSM and PGD metrics on `data` at radius `eps`, with the loss the
// model was trained on.
//
// # Safety
// `model` and `data` must be live handles and `out` writable.
enum RelucvxStatus relucvx_model_evaluate(const struct RelucvxModel *model,
                                          const struct RelucvxDataset *data,
                                          double eps,
                                          struct RelucvxEvaluation *out);

// Serializes the model with its convex solution and training metadata.
// The string must be released with [`relucvx_string_free`].
//
// # Safety
// `model` must be live and `out` a writable pointer slot.
enum RelucvxStatus relucvx_model_to_json(const struct RelucvxModel *model, char **out);

// # Safety
// `json` must be a NUL-terminated string and `out` a writable handle slot.
enum RelucvxStatus relucvx_model_from_json(const char *json, struct RelucvxModel **out);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void relucvx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELUCVX_H */
