/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef RISKSPOT_H
#define RISKSPOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RiskspotStatus {
  RISKSPOT_STATUS_OK = 0,
  RISKSPOT_STATUS_NULL_POINTER = 1,
  RISKSPOT_STATUS_INVALID_ARGUMENT = 2,
  RISKSPOT_STATUS_IO = 3,
  RISKSPOT_STATUS_DATA = 4,
  RISKSPOT_STATUS_NUMERICAL = 5,
  /**
   * The metric does not apply, e.g. TTC of a receding leader.
   */
  RISKSPOT_STATUS_UNDEFINED = 6,
  RISKSPOT_STATUS_OUT_OF_RANGE = 7,
  RISKSPOT_STATUS_PANIC = 8,
} RiskspotStatus;

typedef struct RiskspotConfig RiskspotConfig;

typedef struct RiskspotDataset RiskspotDataset;

typedef struct RiskspotEvaluation RiskspotEvaluation;

typedef struct RiskspotVec2 {
  double x;
  double y;
} RiskspotVec2;

/**
 * Symmetric 2x2 covariance, m².
 */
typedef struct RiskspotCov2 {
  double xx;
  double xy;
  double yy;
} RiskspotCov2;

typedef struct RiskspotEvent {
  int64_t ego;
  int64_t frame;
  double t;
  /**
   * Relative to the dataset origin, m.
   */
  struct RiskspotVec2 position;
  double ego_velocity;
  /**
   * Larger is more critical.
   */
  double metric_value;
} RiskspotEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after success.
 * Valid until the next call into the library from this thread.
 */
const char *riskspot_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *riskspot_version(void);

/**
 * ∫ N(x; μa, Σa) N(x; μb, Σb) dx.
 */
enum RiskspotStatus riskspot_gaussian_2d_overlap(struct RiskspotVec2 mean_a,
                                                 struct RiskspotCov2 cov_a,
                                                 struct RiskspotVec2 mean_b,
                                                 struct RiskspotCov2 cov_b,
                                                 double *result);

/**
 * `delta_l` is the signed longitudinal offset of the leader (negative
 * when it is ahead), m. Returns `RISKSPOT_STATUS_UNDEFINED` when TH does
 * not apply.
 */
enum RiskspotStatus riskspot_time_headway(double delta_l,
                                          double v_follower,
                                          double size_correction,
                                          double *result);

/**
 * `delta_v` is follower minus leader speed, m/s.
 */
enum RiskspotStatus riskspot_time_to_collision(double delta_l,
                                               double delta_v,
                                               double size_correction,
                                               double *result);

/**
 * Integrated collision risk of a critical-rate profile sampled every
 * `ds` seconds, with escape time constant `tau0` and horizon `s_max`.
 */
enum RiskspotStatus riskspot_integrated_risk(const double *rates,
                                             size_t len,
                                             double ds,
                                             double tau0,
                                             double s_max,
                                             double *result);

/**
 * Default configuration.
 */
enum RiskspotStatus riskspot_config_default(struct RiskspotConfig **config);

/**
 * Configuration from TOML text; missing keys keep their defaults.
 */
enum RiskspotStatus riskspot_config_from_toml(const char *toml, struct RiskspotConfig **config);

/**
 * Selects the metric by name: RSD_front, RSD_all, TH or TTC.
 */
enum RiskspotStatus riskspot_config_set_metric(struct RiskspotConfig *config, const char *metric);

void riskspot_config_free(struct RiskspotConfig *config);

/**
 * Reads and smooths a trajectory CSV.
 */
enum RiskspotStatus riskspot_dataset_load(const char *path,
                                          const struct RiskspotConfig *config,
                                          struct RiskspotDataset **dataset);

enum RiskspotStatus riskspot_dataset_vehicle_count(const struct RiskspotDataset *dataset,
                                                   size_t *count);

void riskspot_dataset_free(struct RiskspotDataset *dataset);

/**
 * Evaluates the configured metric at every (ego, frame) sample, using
 * the configured number of worker threads.
 */
enum RiskspotStatus riskspot_evaluate(const struct RiskspotDataset *dataset,
                                      const struct RiskspotConfig *config,
                                      struct RiskspotEvaluation **evaluation);

/**
 * Number of defined events.
 */
enum RiskspotStatus riskspot_evaluation_len(const struct RiskspotEvaluation *evaluation,
                                            size_t *len);

/**
 * Copies event `index`; events are ordered by frame, then ego id.
 */
enum RiskspotStatus riskspot_evaluation_event(const struct RiskspotEvaluation *evaluation,
                                              size_t index,
                                              struct RiskspotEvent *event);

void riskspot_evaluation_free(struct RiskspotEvaluation *evaluation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKSPOT_H */
