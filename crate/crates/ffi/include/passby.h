#ifndef PASSBY_H
#define PASSBY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PassbyStatus {
  PASSBY_STATUS_OK = 0,
  PASSBY_STATUS_NULL_POINTER = 1,
  PASSBY_STATUS_INVALID_ARGUMENT = 2,
  PASSBY_STATUS_IO = 3,
  PASSBY_STATUS_UNSUPPORTED_FORMAT = 4,
  PASSBY_STATUS_DATA = 5,
  PASSBY_STATUS_PANIC = 6,
} PassbyStatus;

typedef enum PassbyBitDepth {
  PASSBY_BIT_DEPTH_PCM16 = 0,
  PASSBY_BIT_DEPTH_PCM24 = 1,
  PASSBY_BIT_DEPTH_FLOAT32 = 2,
} PassbyBitDepth;

typedef enum PassbyBackend {
  PASSBY_BACKEND_FAST = 0,
  PASSBY_BACKEND_DIRECT = 1,
} PassbyBackend;

// Opaque detection result.
typedef struct PassbyDetections PassbyDetections;

// Opaque recording.
typedef struct PassbySignal PassbySignal;

// Detector settings. `sigma_s <= 0` selects the default width for `t_c_s`.
typedef struct PassbyDetectorConfig {
  double t_c_s;
  double sigma_s;
  double q;
  size_t decimation;
  double refractory_s;
  enum PassbyBackend backend;
  // Nonzero: estimate the background level instead of using ranges.
  uint8_t auto_noise;
} PassbyDetectorConfig;

typedef struct PassbyNoiseRange {
  double start_s;
  double end_s;
} PassbyNoiseRange;

typedef struct PassbyEvent {
  double time_s;
  double w_level;
  double w2_value;
} PassbyEvent;

// Counts, and percentages of the event count. The percentages are only
// meaningful when `has_ratios` is nonzero (there was at least one event).
typedef struct PassbyEvalReport {
  size_t events;
  size_t detections;
  size_t false_positives;
  size_t false_negatives;
  size_t efficacy;
  uint8_t has_ratios;
  double detections_pct;
  double false_positives_pct;
  double false_negatives_pct;
  double efficacy_pct;
} PassbyEvalReport;

typedef struct PassbySynthEvent {
  double t0_s;
  double v_mps;
  double d_m;
  double source_level;
} PassbySynthEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null if the last call
// succeeded. Valid until the next call into this library on the same thread.
const char *passby_last_error_message(void);

// Copies `len` samples into a new signal.
//
// # Safety
// `samples` must point to `len` readable doubles; `out` must be writable.
enum PassbyStatus passby_signal_from_samples(const double *samples,
                                             size_t len,
                                             double sample_rate_hz,
                                             struct PassbySignal **out);

// Reads a PCM or float WAV file, mixing channels down to mono.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PassbyStatus passby_signal_read_wav(const char *path, struct PassbySignal **out);

// Writes a mono WAV file. `clipped`, if not null, receives the number of
// samples clipped to full scale.
//
// # Safety
// `signal` must come from this library; `path` must be NUL-terminated.
enum PassbyStatus passby_signal_write_wav(const struct PassbySignal *signal,
                                          const char *path,
                                          enum PassbyBitDepth depth,
                                          size_t *clipped);

// Sample count; 0 for a null handle.
//
// # Safety
// `signal` must be null or come from this library.
size_t passby_signal_len(const struct PassbySignal *signal);

// Sample rate in Hz; 0 for a null handle.
//
// # Safety
// `signal` must be null or come from this library.
double passby_signal_sample_rate(const struct PassbySignal *signal);

// Borrowed pointer to the samples, valid while the handle lives; null for a
// null handle.
//
// # Safety
// `signal` must be null or come from this library.
const double *passby_signal_samples(const struct PassbySignal *signal);

// # Safety
// `signal` must be null or come from this library and not be used again.
void passby_signal_free(struct PassbySignal *signal);

// Default settings: `t_c` 3 s, default width, `q` 1.5, decimation 480.
struct PassbyDetectorConfig passby_detector_config_default(void);

// Runs the detector. Unless `config.auto_noise` is set, `ranges` must list
// at least one vehicle-free section in seconds.
//
// # Safety
// `signal` must come from this library; `config` must be readable;
// `ranges` must point to `n_ranges` entries; `out` must be writable.
enum PassbyStatus passby_detect(const struct PassbySignal *signal,
                                const struct PassbyDetectorConfig *config,
                                const struct PassbyNoiseRange *ranges,
                                size_t n_ranges,
                                struct PassbyDetections **out);

// # Safety
// `det` must be null or come from this library.
size_t passby_detections_len(const struct PassbyDetections *det);

// # Safety
// `det` must come from this library; `out` must be writable.
enum PassbyStatus passby_detections_get(const struct PassbyDetections *det,
                                        size_t index,
                                        struct PassbyEvent *out);

// Background level used for the threshold; NaN for a null handle.
//
// # Safety
// `det` must be null or come from this library.
double passby_detections_noise_level(const struct PassbyDetections *det);

// Threshold on the smoothed envelope; NaN for a null handle.
//
// # Safety
// `det` must be null or come from this library.
double passby_detections_threshold(const struct PassbyDetections *det);

// # Safety
// `det` must be null or come from this library and not be used again.
void passby_detections_free(struct PassbyDetections *det);

// Scores detection times against true pass-by times.
//
// # Safety
// The time arrays must hold the given number of doubles; `out` must be
// writable.
enum PassbyStatus passby_evaluate(const double *detections,
                                  size_t n_detections,
                                  const double *truth,
                                  size_t n_truth,
                                  double tolerance_s,
                                  struct PassbyEvalReport *out);

// Synthesizes a recording with the given pass-bys over Gaussian background
// noise of RMS `noise_amplitude`. Identical arguments give identical output.
//
// # Safety
// `events` must point to `n_events` entries; `out` must be writable.
enum PassbyStatus passby_synthesize(double duration_s,
                                    double sample_rate_hz,
                                    const struct PassbySynthEvent *events,
                                    size_t n_events,
                                    double noise_amplitude,
                                    uint64_t rng_seed,
                                    struct PassbySignal **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PASSBY_H */
