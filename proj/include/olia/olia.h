#ifndef OLIA_H
#define OLIA_H

/*
 * C interface to the OLIA lock-in amplifier emulator.
 *
 * Every function that can fail returns an olia_status. On failure a message
 * is available from olia_last_error() on the same thread until the next
 * failing call. Strings passed in are UTF-8 and NUL terminated; strings
 * written out are truncated to the buffer and always terminated, and a
 * truncated result is reported as OLIA_RANGE.
 *
 * Settings strings are "key=value" items separated by ';' or newlines, with
 * the scenario option keys: f_d, f_r, tau, gain, output_gain, harmonic,
 * sync, mode, bypass, substeps, f_aa, adc_noise, adc_seed, pll_min, pll_max,
 * pll_tuned, window. NULL or "" keeps the defaults.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define OLIA_API __declspec(dllexport)
#else
#  define OLIA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum olia_status {
  OLIA_OK = 0,
  OLIA_INVALID_ARGUMENT = 1,
  OLIA_PARSE = 2,
  OLIA_RANGE = 3,
  OLIA_STATE = 4,
  OLIA_IO = 5,
  OLIA_EMPTY = 6, /* nothing to return yet (no frame queued) */
  OLIA_CONVERGENCE = 7,
  OLIA_INTERNAL = 8
} olia_status;

/* One output frame, decoded. Angles in radians, amplitudes in mV. */
typedef struct olia_frame {
  int error_indicator; /* bit value 1 clipping, 2 lock failure */
  double output_gain;
  int input_gain;
  int sync_filter;
  int external_reference;
  int samples_per_period;
  double f_d;
  double f_r;
  double tau;
  double undersampling;
  double r1;
  double phi1;
  double s1;
  double x1;
  double y1;
  double xn[3];
  double yn[3];
  int lowest_harmonic;
} olia_frame;

OLIA_API const char* olia_version(void);
OLIA_API const char* olia_status_string(olia_status status);
OLIA_API const char* olia_last_error(void);

/* ---- wire format --------------------------------------------------------- */

/* Parses a frame line (terminator optional) and checks its invariants. */
OLIA_API olia_status olia_frame_decode(const char* line, olia_frame* out);
/* Writes the frame line including "\r\n". */
OLIA_API olia_status olia_frame_encode(const olia_frame* frame, char* buf, size_t len);
/* Checks a command line; writes its canonical text if canonical != NULL. */
OLIA_API olia_status olia_command_check(const char* line, char* canonical, size_t len);

/* ---- in-process device ----------------------------------------------------
 * Simulated time only moves in olia_device_advance. Frames produced are
 * queued (the oldest are dropped past 65536 and counted). Not thread safe;
 * use one handle per thread.
 */

typedef struct olia_device olia_device;

OLIA_API olia_status olia_device_create(const char* settings, olia_device** out);
OLIA_API void olia_device_destroy(olia_device* device);
/* Signal text as in scenario files, e.g. "sine(100, 1000) + noise(1, 7)". */
OLIA_API olia_status olia_device_set_signal(olia_device* device, const char* signal);
/* TTL on the external reference input; hz <= 0 disconnects it. */
OLIA_API olia_status olia_device_set_ttl(olia_device* device, double hz, double phase);
/* Applies one protocol line. A well-formed command the instrument refuses
 * returns OLIA_STATE; nothing changes in either case. */
OLIA_API olia_status olia_device_command(olia_device* device, const char* line);
OLIA_API olia_status olia_device_advance(olia_device* device, double seconds);
/* Oldest queued frame; t (may be NULL) receives its emission time. */
OLIA_API olia_status olia_device_pop_frame(olia_device* device, olia_frame* frame, double* t);
OLIA_API olia_status olia_device_pop_line(olia_device* device, char* buf, size_t len, double* t);
OLIA_API double olia_device_time(const olia_device* device);
/* Analogue output voltage, V. */
OLIA_API double olia_device_analogue_output(const olia_device* device);
OLIA_API uint64_t olia_device_dropped_frames(const olia_device* device);

/* ---- scenarios and bench experiments -------------------------------------- */

/* Runs a scenario file. If table_path is not NULL the frames are written
 * there as CSV. frames and rejected (may be NULL) receive the frame count and
 * the number of rejected commands. seed 0 keeps the file's noise seeds. */
OLIA_API olia_status olia_scenario_run(const char* scenario_path, uint64_t seed, const char* table_path,
                                       size_t* frames, size_t* rejected);

/* Runs one bench experiment: step, freq, harmonics, snr, rolloff, phase,
 * latency or external. params mixes experiment keys (listed in the README)
 * with device settings; list values are comma separated. The per-point table
 * goes to table_path as CSV when not NULL, and "key=value" summary lines to
 * summary when not NULL. */
OLIA_API olia_status olia_lab_run(const char* experiment, const char* params, const char* table_path,
                                  char* summary, size_t len);

/* ---- device server ----------------------------------------------------------
 * The emulator on its own thread, paced by the wall clock or accelerated,
 * with the stdio, TCP line and WebSocket endpoints. Thread safe.
 *
 * Server settings: clock=realtime|accelerated, queue=<frames>,
 * chunk=<s>, stop_after=<s> (0 runs until stopped).
 */

typedef struct olia_server olia_server;
typedef void (*olia_diagnostic_fn)(const char* message, void* user);

OLIA_API olia_status olia_server_create(const char* settings, const char* server_settings, olia_server** out);
/* Stops everything that is running and frees the handle. */
OLIA_API void olia_server_destroy(olia_server* server);
/* Called on the device thread for every rejected command. */
OLIA_API olia_status olia_server_set_diagnostic_callback(olia_server* server, olia_diagnostic_fn fn, void* user);
OLIA_API olia_status olia_server_start(olia_server* server);
/* Starts the network endpoints; a port of 0 picks a free one, -1 disables. */
OLIA_API olia_status olia_server_listen(olia_server* server, const char* address, int tcp_port, int websocket_port);
OLIA_API int olia_server_tcp_port(const olia_server* server);
OLIA_API int olia_server_websocket_port(const olia_server* server);
OLIA_API olia_status olia_server_submit(olia_server* server, const char* line);
OLIA_API olia_status olia_server_set_signal(olia_server* server, const char* signal);
OLIA_API olia_status olia_server_set_ttl(olia_server* server, double hz, double phase);
/* Waits up to timeout_ms for a frame line; OLIA_EMPTY if none came. */
OLIA_API olia_status olia_server_pop_line(olia_server* server, int timeout_ms, char* buf, size_t len, double* t);
/* Commands from stdin, frames to stdout, diagnostics to stderr. Starts the
 * device and returns once it stops. */
OLIA_API olia_status olia_server_run_stdio(olia_server* server);
/* Blocks until the device stops (stop_after reached or olia_server_stop). */
OLIA_API olia_status olia_server_wait(olia_server* server);
OLIA_API void olia_server_stop(olia_server* server);
OLIA_API int olia_server_running(const olia_server* server);
OLIA_API double olia_server_time(const olia_server* server);
OLIA_API uint64_t olia_server_dropped_frames(const olia_server* server);

#ifdef __cplusplus
}
#endif

#endif /* OLIA_H */
