#ifndef ARRAYMP_H
#define ARRAYMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum AmpStatus {
  AMP_STATUS_OK = 0,
  // A required pointer was null.
  AMP_STATUS_NULL_POINTER = 1,
  // A size or numeric argument is out of range.
  AMP_STATUS_INVALID_ARGUMENT = 2,
  // Text input could not be parsed.
  AMP_STATUS_PARSE = 3,
  // Well-formed input with inconsistent content.
  AMP_STATUS_INVALID_DATA = 4,
  // Too few or badly placed satellites, or an invalid array layout.
  AMP_STATUS_GEOMETRY = 5,
  // A solver failed to converge or a matrix was singular.
  AMP_STATUS_NUMERIC = 6,
  AMP_STATUS_IO = 7,
  // A Rust panic was caught at the boundary.
  AMP_STATUS_INTERNAL = 8,
} AmpStatus;

// Parsed YUMA almanac.
typedef struct AmpAlmanac AmpAlmanac;

// Seeded RANSAC detector with a fixed array layout.
typedef struct AmpDetector AmpDetector;

// Unscented Kalman filter on rotation × vectors.
typedef struct AmpUkf AmpUkf;

// Five-antenna layout: antennas 1-2-3 on body x, 1-4-5 on body y.
typedef struct AmpGeometry {
  double d12;
  double d23;
  double d14;
  double d45;
  // Carrier wavelength, meters.
  double wavelength;
} AmpGeometry;

// RANSAC detector tuning. Zero `n_iter` derives the count from `p`, `eta`
// and `m`.
typedef struct AmpDetectorConfig {
  // Inlier threshold on the geodesic distance, radians.
  double epsilon_inlier;
  size_t n_min;
  size_t m;
  double p;
  double eta;
  size_t n_iter;
} AmpDetectorConfig;

// Navigation state of the filter (ENU frame).
typedef struct AmpNavState {
  // Body-to-ENU rotation, row-major.
  double rotation[9];
  double position[3];
  double velocity[3];
  double gyro_bias[3];
  double accel_bias[3];
} AmpNavState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next call into this library on the same thread.
const char *amp_last_error(void);

// Library version as a static NUL-terminated string.
const char *amp_version(void);

// Default five-antenna layout for GPS L1.
struct AmpGeometry amp_geometry_default(void);

// RANSAC iteration count for success probability `p`, outlier ratio `eta`
// and seed size `m`.
size_t amp_ransac_iterations(double p, double eta, size_t m);

// Parses YUMA almanac `text` into a new handle stored in `*out`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum AmpStatus amp_almanac_parse(const char *text, struct AmpAlmanac **out);

// Number of records in the almanac; 0 for NULL.
//
// # Safety
// `almanac` must be NULL or a live handle.
size_t amp_almanac_len(const struct AmpAlmanac *almanac);

// PRN of record `index`, 0 when out of range.
//
// # Safety
// `almanac` must be NULL or a live handle.
uint32_t amp_almanac_prn(const struct AmpAlmanac *almanac, size_t index);

// ECEF position (meters) of record `index` at GPS `week`/`tow`.
//
// # Safety
// `almanac` must be a live handle and `out_ecef` point to 3 doubles.
enum AmpStatus amp_almanac_position(const struct AmpAlmanac *almanac,
                                    size_t index,
                                    uint32_t week,
                                    double tow,
                                    double *out_ecef);

// # Safety
// `almanac` must be NULL or a handle from [`amp_almanac_parse`] not yet freed.
void amp_almanac_free(struct AmpAlmanac *almanac);

// Attitude of the array from `n` satellites. `geometry` may be NULL for the
// default layout. Writes the body-to-ENU rotation to `out_rotation`.
//
// # Safety
// `phases` holds `n × 5` doubles, `los` `n × 3`, `out_rotation` 9.
enum AmpStatus amp_attitude_solve(const double *phases,
                                  const double *los,
                                  size_t n,
                                  const struct AmpGeometry *geometry,
                                  double *out_rotation);

// Position (ECEF meters) and clock bias (meters) from `n` pseudoranges.
//
// # Safety
// `pseudoranges` holds `n` doubles, `sat_ecef` `n × 3`, `initial` 3 (or
// NULL for the Earth's centre), `out_position` 3, `out_clock` 1.
enum AmpStatus amp_spp_solve(const double *pseudoranges,
                             const double *sat_ecef,
                             size_t n,
                             const double *initial,
                             double *out_position,
                             double *out_clock);

struct AmpDetectorConfig amp_detector_config_default(void);

// Creates a detector. `config` and `geometry` may be NULL for defaults.
//
// # Safety
// Non-NULL pointers must be readable; `out` writable.
enum AmpStatus amp_detector_new(const struct AmpDetectorConfig *config,
                                const struct AmpGeometry *geometry,
                                uint64_t seed,
                                struct AmpDetector **out);

// Flags satellites inconsistent with the attitude closest to `r_ref`.
// `out_flags` receives one byte per satellite (1 = contaminated); the fitted
// rotation and its geodesic distance to `r_ref` go to `out_rotation` and
// `out_error`, either of which may be NULL.
//
// # Safety
// `detector` must be live; `phases` holds `n × 5` doubles, `los` `n × 3`,
// `r_ref` 9, `out_flags` `n` bytes, `out_rotation` 9 when non-NULL.
enum AmpStatus amp_detector_run(struct AmpDetector *detector,
                                const double *phases,
                                const double *los,
                                size_t n,
                                const double *r_ref,
                                uint8_t *out_flags,
                                double *out_rotation,
                                double *out_error);

// # Safety
// `detector` must be NULL or a handle from [`amp_detector_new`] not yet freed.
void amp_detector_free(struct AmpDetector *detector);

// Starts a filter at the given pose with the default initial covariance and
// process noise. `geometry` may be NULL.
//
// # Safety
// `rotation` holds 9 doubles, `position` and `velocity` 3; `out` writable.
enum AmpStatus amp_ukf_new(const double *rotation,
                           const double *position,
                           const double *velocity,
                           const struct AmpGeometry *geometry,
                           struct AmpUkf **out);

// Propagates with body-frame angular rate (rad/s) and specific force (m/s²)
// over `dt` seconds.
//
// # Safety
// `ukf` must be live; `gyro` and `accel` hold 3 doubles.
enum AmpStatus amp_ukf_propagate(struct AmpUkf *ukf,
                                 const double *gyro,
                                 const double *accel,
                                 double dt);

// Updates with a measured attitude (roll, pitch, yaw, radians) and the five
// antenna positions (`5 × 3` ENU meters). `attitude_error` is the detector's
// geodesic error and sets the attitude variance; `position_var` is the
// per-axis antenna position variance in m². A non-finite `attitude_error`
// skips the attitude rows.
//
// # Safety
// `ukf` must be live; `rpy` holds 3 doubles and `antenna_positions` 15.
enum AmpStatus amp_ukf_update(struct AmpUkf *ukf,
                              const double *rpy,
                              const double *antenna_positions,
                              double attitude_error,
                              double position_var);

// Copies the current state into `*out`.
//
// # Safety
// `ukf` must be live and `out` writable.
enum AmpStatus amp_ukf_state(const struct AmpUkf *ukf, struct AmpNavState *out);

// # Safety
// `ukf` must be NULL or a handle from [`amp_ukf_new`] not yet freed.
void amp_ukf_free(struct AmpUkf *ukf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARRAYMP_H */
