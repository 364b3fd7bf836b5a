#ifndef TASKGUARD_H
#define TASKGUARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_ARGUMENT = 2,
  TG_STATUS_CONFIG = 3,
  TG_STATUS_DATA = 4,
  TG_STATUS_DIVERGENCE = 5,
  TG_STATUS_IO = 6,
  TG_STATUS_UNTRAINED = 7,
  TG_STATUS_PANIC = 8,
} TgStatus;

// Which side of the train/test split to read.
typedef enum TgPartition {
  TG_PARTITION_TRAIN = 0,
  TG_PARTITION_TEST = 1,
} TgPartition;

// A fitted binary classifier (label 1 = legitimate).
typedef struct TgClassifier TgClassifier;

// A generated and split task dataset.
typedef struct TgDataset TgDataset;

// A trained generator/discriminator pair.
typedef struct TgGan TgGan;

// Detection counts for one round, or averaged over several.
typedef struct TgCounts {
  // Adversarial rows rejected by the discriminator.
  double da_dis;
  // Adversarial rows rejected by the classifier.
  double da_cla;
  // Original fakes rejected by the discriminator.
  double do_dis;
  // Original fakes rejected by the classifier.
  double do_cla;
  double total_adversarial;
  double total_original_attacks;
} TgCounts;

typedef struct TgRates {
  double aasr;
  double aadr;
  double oadr;
} TgRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, e.g. `"0.1.0"`. Static storage; do not free.
const char *tg_version(void);

// Message of the last failed call on this thread, or null after a success.
// Valid until the next `tg_*` call on the same thread; do not free.
const char *tg_last_error_message(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from a `tg_*` function that hands out owned strings and
// must not be freed twice.
void tg_string_free(char *s);

// Number of encoded features per task.
size_t tg_feature_count(void);

// Generates tasks and splits them. `config_json` is a generation config
// (missing fields take defaults); null means all defaults.
//
// # Safety
// `config_json` must be null or a NUL-terminated string; `out` must be a
// valid pointer. On success `*out` owns a handle for `tg_dataset_free`.
enum TgStatus tg_dataset_generate(const char *config_json, struct TgDataset **out);

// # Safety
// `ds` must be null or a handle from `tg_dataset_generate`, freed once.
void tg_dataset_free(struct TgDataset *ds);

// Row count of one partition.
//
// # Safety
// `ds` must be a live dataset handle and `out_rows` a valid pointer.
enum TgStatus tg_dataset_rows(const struct TgDataset *ds, enum TgPartition which, size_t *out_rows);

// Copies the encoded features of one partition. `len` must equal
// rows * `tg_feature_count()`.
//
// # Safety
// `ds` must be a live dataset handle; `buf` must point to `len` writable
// doubles.
enum TgStatus tg_dataset_features(const struct TgDataset *ds,
                                  enum TgPartition which,
                                  double *buf,
                                  size_t len);

// Copies legitimacy labels (1 = legitimate, 0 = fake). `len` must equal
// the row count.
//
// # Safety
// `ds` must be a live dataset handle; `buf` must point to `len` writable
// bytes.
enum TgStatus tg_dataset_labels(const struct TgDataset *ds,
                                enum TgPartition which,
                                uint8_t *buf,
                                size_t len);

// Trains a GAN on the dataset's training partition. `config_json` is a GAN
// config (null means defaults); its `corpus` field picks the rows used.
//
// # Safety
// `ds` must be a live dataset handle, `config_json` null or NUL-terminated,
// `out` valid. On success `*out` owns a handle for `tg_gan_free`.
enum TgStatus tg_gan_train(const struct TgDataset *ds, const char *config_json, struct TgGan **out);

// Loads `generator.json` and `discriminator.json` from `dir`.
//
// # Safety
// `dir` must be NUL-terminated and `out` valid.
enum TgStatus tg_gan_load(const char *dir, size_t epochs_trained, struct TgGan **out);

// Writes both networks and the loss history into an existing directory.
//
// # Safety
// `gan` must be a live handle and `dir` NUL-terminated.
enum TgStatus tg_gan_save(const struct TgGan *gan, const char *dir);

// # Safety
// `gan` must be null or a handle from this library, freed once.
void tg_gan_free(struct TgGan *gan);

// Width of rows produced and scored by this GAN, or 0 for a null handle.
//
// # Safety
// `gan` must be null or a live handle.
size_t tg_gan_feature_dim(const struct TgGan *gan);

// Draws `n` synthetic rows into `buf` (`len` = n * feature dim).
//
// # Safety
// `gan` must be a live handle and `buf` point to `len` writable doubles.
enum TgStatus tg_gan_generate(const struct TgGan *gan,
                              size_t n,
                              uint64_t seed,
                              double *buf,
                              size_t len);

// Discriminator probability that each row is real, written to `out_probs`
// (one value per row).
//
// # Safety
// `rows` must point to `n_rows * n_cols` doubles and `out_probs` to
// `n_rows` writable doubles.
enum TgStatus tg_gan_discriminate(const struct TgGan *gan,
                                  const double *rows,
                                  size_t n_rows,
                                  size_t n_cols,
                                  double *out_probs);

// Fits a classifier on caller-supplied rows and 0/1 labels. `kind` is
// `knn`, `knn:7`, `nb`, `nb:1e-9`, `dt` or `dt:12`.
//
// # Safety
// `kind` must be NUL-terminated, `rows` point to `n_rows * n_cols` doubles,
// `labels` to `n_rows` bytes, and `out` be valid.
enum TgStatus tg_classifier_fit(const char *kind,
                                const double *rows,
                                size_t n_rows,
                                size_t n_cols,
                                const uint8_t *labels,
                                struct TgClassifier **out);

// Fits a classifier on a dataset's training partition.
//
// # Safety
// `kind` must be NUL-terminated, `ds` a live handle, `out` valid.
enum TgStatus tg_classifier_fit_dataset(const char *kind,
                                        const struct TgDataset *ds,
                                        struct TgClassifier **out);

// Predicts a legitimacy label (1 = legitimate) per row.
//
// # Safety
// `rows` must point to `n_rows * n_cols` doubles and `out_labels` to
// `n_rows` writable bytes.
enum TgStatus tg_classifier_predict(const struct TgClassifier *clf,
                                    const double *rows,
                                    size_t n_rows,
                                    size_t n_cols,
                                    uint8_t *out_labels);

// # Safety
// `clf` must be null or a handle from this library, freed once.
void tg_classifier_free(struct TgClassifier *clf);

// AASR, AADR and OADR from detection counts. Fails with
// `TG_STATUS_DATA` when a denominator is zero.
//
// # Safety
// `counts` and `out` must be valid pointers.
enum TgStatus tg_metrics_rates(const struct TgCounts *counts, struct TgRates *out);

// Runs a whole experiment and returns its report as JSON: the metric
// report, or the sweep report in sweep mode. `preset` is `"paper"` or
// `"desk"` (null means paper); `config_json` is layered over it.
//
// # Safety
// Strings must be null or NUL-terminated; `out_json` must be valid. On
// success `*out_json` is owned by the caller (`tg_string_free`).
enum TgStatus tg_experiment_run(const char *config_json, const char *preset, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TASKGUARD_H */
