#ifndef SHEETCARRY_H
#define SHEETCARRY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum StStatus {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_POINTER = 1,
  ST_STATUS_INVALID_ARGUMENT = 2,
  ST_STATUS_PARSE = 3,
  ST_STATUS_VALIDATION = 4,
  ST_STATUS_INFEASIBLE = 5,
  ST_STATUS_NUMERICAL = 6,
  ST_STATUS_IO = 7,
  ST_STATUS_OUT_OF_RANGE = 8,
  ST_STATUS_PANIC = 9,
} StStatus;

/*
 Robot positions on a sheet.
 */
typedef struct StFormation StFormation;

/*
 Sheet holding points and holding height.
 */
typedef struct StLayout StLayout;

/*
 Result of a pipeline run.
 */
typedef struct StReport StReport;

/*
 Validated scenario.
 */
typedef struct StScenario StScenario;

/*
 Object equilibrium; per-cable taut flags are returned separately.
 */
typedef struct StEquilibrium {
  /*
   World position `x, y, z`.
   */
  double position[3];
  /*
   Contact point on the sheet, sheet frame.
   */
  double contact[2];
  uint32_t taut_count;
} StEquilibrium;

/*
 One obstacle passage of a pipeline run. Angles are radians and are NaN
 for a bypass.
 */
typedef struct StObstacleSummary {
  /*
   0 crossing, 1 bypassing.
   */
  uint32_t mode;
  double start;
  double end;
  double object_height;
  double entering_angle;
  double exiting_angle;
} StObstacleSummary;

/*
 Minimum clearances of a run; NaN when never evaluated.
 */
typedef struct StClearances {
  double vertical;
  double horizontal;
} StClearances;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until
 the next call on the same thread.
 */
const char *st_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *st_version(void);

/*
 Sheet with `count` holding points (counterclockwise, convex) at height
 `holding_height`.
 */
enum StStatus st_layout_new(const double *holding_points,
                            size_t count,
                            double holding_height,
                            struct StLayout **layout);

void st_layout_free(struct StLayout *layout);

/*
 Formation of `count` robots on `layout`; the layout handle stays owned by
 the caller.
 */
enum StStatus st_formation_new(const struct StLayout *layout,
                               const double *robots,
                               size_t count,
                               struct StFormation **formation);

void st_formation_free(struct StFormation *formation);

/*
 Number of robots, or 0 for a null handle.
 */
size_t st_formation_len(const struct StFormation *formation);

/*
 Copies robot positions into `robots`, which holds `capacity` points.
 */
enum StStatus st_formation_robots(const struct StFormation *formation,
                                  double *robots,
                                  size_t capacity);

/*
 Equilibrium with the taut set found automatically. `taut`, when not
 null, receives one 0/1 flag per robot.
 */
enum StStatus st_solve_equilibrium(const struct StFormation *formation,
                                   struct StEquilibrium *result,
                                   uint8_t *taut);

/*
 Equilibrium for the given taut flags, one 0/1 byte per robot.
 */
enum StStatus st_direct_kinematics(const struct StFormation *formation,
                                   const uint8_t *taut_flags,
                                   struct StEquilibrium *result,
                                   uint8_t *taut);

/*
 Formation holding the object at sheet contact `contact` and height
 `object_height`, robot `i` placed along direction `phis[i]` from the
 object. `phis` has one entry per holding point.
 */
enum StStatus st_inverse_kinematics(const struct StLayout *layout,
                                    const double *contact,
                                    double object_height,
                                    const double *phis,
                                    struct StFormation **formation);

/*
 Optimized formation for one obstacle with default weights and safety
 margins. `mode` receives 0 for crossing, 1 for bypassing.
 */
enum StStatus st_optimize_formation(const struct StFormation *initial,
                                    const double *obstacle_center,
                                    double obstacle_radius,
                                    double obstacle_height,
                                    double corridor_width,
                                    struct StFormation **formation,
                                    uint32_t *mode);

/*
 Scenario read from a TOML file at `path`.
 */
enum StStatus st_scenario_load(const char *path, struct StScenario **scenario);

/*
 Scenario parsed from TOML text.
 */
enum StStatus st_scenario_parse(const char *source, struct StScenario **scenario);

void st_scenario_free(struct StScenario *scenario);

/*
 Plans the whole scenario.
 */
enum StStatus st_run_pipeline(const struct StScenario *scenario, struct StReport **report);

void st_report_free(struct StReport *report);

/*
 Number of trajectory samples, or 0 for a null handle.
 */
size_t st_report_sample_count(const struct StReport *report);

/*
 Planned duration in seconds, or NaN for a null handle.
 */
double st_report_duration(const struct StReport *report);

/*
 Number of obstacles passed, or 0 for a null handle.
 */
size_t st_report_obstacle_count(const struct StReport *report);

enum StStatus st_report_obstacle(const struct StReport *report,
                                 size_t index,
                                 struct StObstacleSummary *summary);

enum StStatus st_report_clearances(const struct StReport *report, struct StClearances *clearances);

/*
 Writes the trajectory table, metrics and plot series into `directory`.
 */
enum StStatus st_report_export(const struct StReport *report, const char *directory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHEETCARRY_H */
