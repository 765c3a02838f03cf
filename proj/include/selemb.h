/*
 * selemb C API: data-loading strategy benchmarking for multi-sensor
 * time-series classification.
 *
 * The library compares three ways of turning simultaneously-sampled sensor
 * recordings into a training set for a small 1-D CNN: single-source loading,
 * parallel multi-channel loading, and selective embedding (alternating short
 * segments from the sources within one channel). All state lives behind
 * opaque handles; every function returns a status code and leaves a detailed
 * message in a thread-local buffer readable via se_last_error().
 *
 * JSON schemas for the option/config strings are documented in
 * docs/FORMATS.md.
 */

#ifndef SELEMB_H
#define SELEMB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SELEMB_API __declspec(dllexport)
#else
#define SELEMB_API __attribute__((visibility("default")))
#endif

typedef enum se_status {
  SE_OK = 0,
  SE_ERR_INVALID_ARGUMENT = 1,
  SE_ERR_PARSE = 2,
  SE_ERR_IO = 3,
  SE_ERR_VALIDATION = 4,
  SE_ERR_NO_FULL_WINDOW = 5,
  SE_ERR_LEAKAGE = 6,
  SE_ERR_DIVERGENCE = 7,
  SE_ERR_INTERNAL = 8
} se_status;

/* Library version, e.g. "0.1.0". Static storage; do not free. */
SELEMB_API const char* se_version(void);

/* Stable name for a status code, e.g. "parse". Static storage. */
SELEMB_API const char* se_status_name(se_status status);

/* Detail message of the last failing call on this thread. Valid until the
 * next failing call; do not free. Empty string when nothing failed yet. */
SELEMB_API const char* se_last_error(void);

/* Frees strings returned through char** out-parameters. */
SELEMB_API void se_string_free(char* s);

/* ---- manifests --------------------------------------------------------- */

typedef struct se_manifest se_manifest;

/* Parses and validates a dataset manifest (JSON, see docs/FORMATS.md). */
SELEMB_API se_status se_manifest_open(const char* path, se_manifest** out);
SELEMB_API void se_manifest_close(se_manifest* manifest);

SELEMB_API int se_manifest_class_count(const se_manifest* manifest);
SELEMB_API int se_manifest_file_count(const se_manifest* manifest);
/* Pointer into the manifest; valid until se_manifest_close. */
SELEMB_API const char* se_manifest_dataset_name(const se_manifest* manifest);

/* ---- synthetic benchmark generation ------------------------------------ */

/* Default generator options as a JSON string (caller frees). */
SELEMB_API se_status se_synth_default_options(char** json_out);

/* Writes CSV files plus manifest.json under out_dir. options_json may be
 * NULL or "{}" for the defaults; manifest_path_out (optional) receives the
 * path of the written manifest (caller frees). */
SELEMB_API se_status se_synth_benchmark(const char* options_json, const char* out_dir,
                                        char** manifest_path_out);

/* ---- experiments -------------------------------------------------------- */

typedef struct se_report se_report;

/* Default experiment configuration as a JSON string (caller frees). */
SELEMB_API se_status se_experiment_default_config(char** json_out);

/* Runs the experiment described by config_json (which names the manifest)
 * and returns an aggregated report. */
SELEMB_API se_status se_experiment_run(const char* config_json, se_report** out);

SELEMB_API void se_report_close(se_report* report);

/* format: "text" | "csv" | "jsonl" | "json". */
SELEMB_API se_status se_report_emit(const se_report* report, const char* path, const char* format);

/* Rendered report in the requested format (caller frees). */
SELEMB_API se_status se_report_render(const se_report* report, const char* format, char** out);

/* ---- plot data ----------------------------------------------------------- */

/* Merges full-format ("json") report files into one long-form CSV with one
 * row per (dataset, model, strategy, variant, run). */
SELEMB_API se_status se_plotdata_write(const char* const* report_paths, size_t count,
                                       const char* out_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SELEMB_H */
