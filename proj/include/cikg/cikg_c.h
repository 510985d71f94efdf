#ifndef CIKG_C_H
#define CIKG_C_H

/* C interface to the cikg recommendation toolkit.
 *
 * All entry points return a cikg_status; 0 means success. On failure,
 * cikg_last_error() returns a thread-local description of the most recent
 * error. Configuration objects are opaque handles created from JSON and
 * released with cikg_config_free().
 *
 * The status values double as process exit codes for the bundled CLI:
 *   0 ok, 2 configuration/path error, 3 data error, 4 numerical failure,
 *   5 LLM transport failure.
 */

#include <stddef.h>

#if defined(_WIN32)
#define CIKG_API __declspec(dllexport)
#else
#define CIKG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cikg_status {
  CIKG_OK = 0,
  CIKG_ERROR = 1,
  CIKG_CONFIG_ERROR = 2,
  CIKG_DATA_ERROR = 3,
  CIKG_NUMERIC_ERROR = 4,
  CIKG_LLM_ERROR = 5
} cikg_status;

typedef struct cikg_config cikg_config;

CIKG_API const char* cikg_version(void);

/* Thread-local message for the last failed call; never NULL. */
CIKG_API const char* cikg_last_error(void);

/* Configuration lifecycle. cikg_config_create yields defaults;
 * cikg_config_load parses a JSON file. */
CIKG_API cikg_status cikg_config_create(cikg_config** out);
CIKG_API cikg_status cikg_config_load(const char* path, cikg_config** out);
CIKG_API cikg_status cikg_config_from_json(const char* json_text, cikg_config** out);

/* Dotted-path override, e.g. ("train.lr", "0.005") or ("llm.mode", "live").
 * Values parse as JSON when possible and fall back to plain strings. */
CIKG_API cikg_status cikg_config_set(cikg_config* cfg, const char* key, const char* value);

/* Serializes the configuration as JSON into buf (NUL-terminated). Returns
 * CIKG_ERROR if the buffer is too small; *written receives the required
 * size including the terminator. */
CIKG_API cikg_status cikg_config_dump(const cikg_config* cfg, char* buf, size_t cap,
                                      size_t* written);

CIKG_API void cikg_config_free(cikg_config* cfg);

/* Pipeline stages. Outputs land under the configured output directory. */
CIKG_API cikg_status cikg_run_ingest(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_interests(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_cluster(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_build_graph(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_train(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_evaluate(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_pipeline(const cikg_config* cfg);
CIKG_API cikg_status cikg_run_ablate(const cikg_config* cfg);

/* Writes schedule.tsv (epoch, linear rate, exponential rate); echo_stdout
 * nonzero also prints the rows. */
CIKG_API cikg_status cikg_run_schedule_preview(const cikg_config* cfg, int echo_stdout);

/* Finite-difference verification of every loss gradient; writes
 * gradcheck.json and fails with CIKG_NUMERIC_ERROR if any check fails. */
CIKG_API cikg_status cikg_run_gradcheck(const cikg_config* cfg, int echo_stdout);

/* Generates the planted-topic synthetic dataset described by the config's
 * synth block into the output directory. */
CIKG_API cikg_status cikg_run_synth(const cikg_config* cfg);

#ifdef __cplusplus
}
#endif

#endif /* CIKG_C_H */
