#ifndef LAZYDAGGER_H
#define LAZYDAGGER_H

#include <stddef.h>
#include <stdint.h>

#if defined(LDG_BUILDING_LIBRARY)
#define LDG_API __attribute__((visibility("default")))
#else
#define LDG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ldg_status {
  LDG_OK = 0,
  LDG_ERR_INVALID_ARGUMENT = 1, /* bad pointer, dimension or range */
  LDG_ERR_CONFIG = 2,           /* configuration rejected; message lists field paths */
  LDG_ERR_SCHEMA = 3,           /* malformed log, checkpoint or run directory */
  LDG_ERR_IO = 4,
  LDG_ERR_SUPERVISOR_UNAVAILABLE = 5,
  LDG_ERR_BUFFER_TOO_SMALL = 6,
  LDG_ERR_INTERNAL = 99
} ldg_status;

/* Message for the last failing call on this thread; never NULL. */
LDG_API const char* ldg_last_error(void);
LDG_API const char* ldg_status_name(ldg_status status);
LDG_API const char* ldg_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
LDG_API void ldg_string_free(char* s);

/* Environments ----------------------------------------------------------- */

typedef struct ldg_env ldg_env;

/* params_json may be NULL for defaults. */
LDG_API ldg_status ldg_env_create(const char* id, const char* params_json, ldg_env** out);
LDG_API void ldg_env_destroy(ldg_env* env);
LDG_API ldg_status ldg_env_dims(const ldg_env* env, size_t* state_dim, size_t* action_dim,
                                int* horizon);
LDG_API ldg_status ldg_env_reset(const ldg_env* env, uint64_t seed, double* state,
                                 size_t state_len);
LDG_API ldg_status ldg_env_step(const ldg_env* env, const double* state, size_t state_len,
                                const double* action, size_t action_len, int t,
                                double* next_state, int* done, int* success, int* collision,
                                double* reward);
LDG_API ldg_status ldg_env_supervisor_action(const ldg_env* env, const double* state,
                                             size_t state_len, double* action,
                                             size_t action_len);

/* Policies --------------------------------------------------------------- */

typedef struct ldg_policy ldg_policy;

LDG_API ldg_status ldg_policy_load(const char* path, ldg_policy** out);
LDG_API ldg_status ldg_policy_save(const ldg_policy* policy, const char* path);
LDG_API void ldg_policy_destroy(ldg_policy* policy);
LDG_API ldg_status ldg_policy_dims(const ldg_policy* policy, size_t* state_dim,
                                   size_t* action_dim);
LDG_API ldg_status ldg_policy_forward(const ldg_policy* policy, const double* state,
                                      size_t state_len, double* action, size_t action_len);
/* Hex SHA-256 of the parameters. */
LDG_API ldg_status ldg_policy_hash(const ldg_policy* policy, char** out);

/* Burden metrics --------------------------------------------------------- */

/* B = L * C + D. */
LDG_API ldg_status ldg_burden(double switches, double supervisor_actions, double latency,
                              double* out);

/* Latency above which the lazy counts give the lower burden. When no such
 * latency exists *defined is 0, *out is left alone and *reason (if not NULL)
 * receives an explanation. */
LDG_API ldg_status ldg_cutoff_latency(double lazy_switches, double lazy_actions,
                                      double safe_switches, double safe_actions, double* out,
                                      int* defined, char** reason);

/* modes: 0 autonomous, 1 supervisor; one episode. */
LDG_API ldg_status ldg_count_switches(const int* modes, size_t n, size_t* out);

/* Experiments ------------------------------------------------------------ */

/* Resolved configuration with all defaults. */
LDG_API ldg_status ldg_validate_config(const char* config_json, char** resolved_json);

/* Runs every configured algorithm and seed. output_dir may be NULL to use the
 * configured one. Returns the run manifest. */
LDG_API ldg_status ldg_run(const char* config_json, const char* output_dir, int resume,
                           char** manifest_json);

LDG_API ldg_status ldg_compare(const char* run_a, const char* run_b, const double* latency_grid,
                               size_t grid_len, char** comparison_json);

LDG_API ldg_status ldg_calibrate(const char* config_json, uint64_t seed, double target,
                                 char** result_json);

#ifdef __cplusplus
}
#endif

#endif
