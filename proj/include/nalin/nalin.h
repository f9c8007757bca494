#ifndef NALIN_H
#define NALIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define NALIN_API __attribute__((visibility("default")))
#else
#define NALIN_API
#endif

/* Status codes returned by every function; NALIN_OK is zero. */
typedef enum {
  NALIN_OK = 0,
  NALIN_INVALID_ARGUMENT = 1,
  NALIN_NUMERICAL_FAILURE,
  NALIN_ESCAPE,
  NALIN_DEGENERATE_COCYCLE,
  NALIN_NON_HYPERBOLIC,
  NALIN_RESOLUTION,
  NALIN_SPLITTING,
  NALIN_ORBIT,
  NALIN_INVERSE,
  NALIN_BUDGET_VIOLATION,
  NALIN_DOMAIN,
  NALIN_TAIL,
  NALIN_CONFIG,
  NALIN_IO,
  NALIN_INTERNAL = 99
} nalin_status;

typedef enum {
  NALIN_CMD_SPECTRUM = 0,
  NALIN_CMD_CONDITIONS = 1,
  NALIN_CMD_LINEARIZE = 2,
  NALIN_CMD_VERIFY = 3
} nalin_command;

/* Flags for nalin_run. */
#define NALIN_OVERRIDE_BUDGET 1u

typedef struct nalin_config nalin_config;
typedef struct nalin_result nalin_result;
typedef struct nalin_system nalin_system;

/* Message of the last failed call on this thread; never NULL. */
NALIN_API const char* nalin_last_error(void);
NALIN_API const char* nalin_status_string(int status);

/* Run configurations (JSON). Relative table paths resolve against base_dir or the file's directory. */
NALIN_API int nalin_config_parse(const char* json, const char* base_dir, nalin_config** out);
NALIN_API int nalin_config_load(const char* path, nalin_config** out);
NALIN_API int nalin_config_set_seed(nalin_config* config, uint64_t seed);
NALIN_API void nalin_config_free(nalin_config* config);

/* Runs a command and writes its reports into out_dir (NULL: the config's output dir, else "."). */
NALIN_API int nalin_run(const nalin_config* config, nalin_command command, const char* out_dir, unsigned flags,
                        nalin_result** out);
/* Process exit code of the run: 0 success, 2 condition or verification failure, 3 numerical failure,
   64 config error. */
NALIN_API int nalin_result_exit_code(const nalin_result* result);
NALIN_API size_t nalin_result_message_count(const nalin_result* result);
NALIN_API const char* nalin_result_message(const nalin_result* result, size_t index);
NALIN_API size_t nalin_result_file_count(const nalin_result* result);
NALIN_API const char* nalin_result_file(const nalin_result* result, size_t index);
NALIN_API void nalin_result_free(nalin_result* result);

/* Catalog. */
NALIN_API size_t nalin_catalog_count(void);
NALIN_API const char* nalin_catalog_name(size_t index);

/* Catalog systems evaluated directly. Parameters come as parallel name/value arrays. */
NALIN_API int nalin_system_create(const char* name, const char* const* param_names, const double* param_values,
                                  size_t param_count, double t_min, double t_max, nalin_system** out);
NALIN_API void nalin_system_free(nalin_system* system);
NALIN_API int nalin_system_dimension(const nalin_system* system);
/* phi(t, s; x) into out (length d). */
NALIN_API int nalin_system_flow(const nalin_system* system, double s, double t, const double* x, double* out);
/* T(t, s) into out, row-major d*d. */
NALIN_API int nalin_system_transition(const nalin_system* system, double s, double t, double* out);

#ifdef __cplusplus
}
#endif

#endif
