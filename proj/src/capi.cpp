#include "lazydagger/lazydagger.h"

#include "lazydagger/env.hpp"
#include "lazydagger/errors.hpp"
#include "lazydagger/harness.hpp"
#include "lazydagger/metrics.hpp"
#include "lazydagger/policy.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

struct ldg_env {
  std::unique_ptr<ldg::Environment> env;
};

struct ldg_policy {
  ldg::RobotPolicy policy;
};

namespace {

thread_local std::string g_last_error;

ldg_status fail(ldg_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
ldg_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const ldg::ConfigError& e) {
    return fail(LDG_ERR_CONFIG, e.what());
  } catch (const ldg::SchemaError& e) {
    return fail(LDG_ERR_SCHEMA, e.what());
  } catch (const ldg::IoError& e) {
    return fail(LDG_ERR_IO, e.what());
  } catch (const ldg::SupervisorUnavailable& e) {
    return fail(LDG_ERR_SUPERVISOR_UNAVAILABLE, e.what());
  } catch (const ldg::ContractViolation& e) {
    return fail(LDG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LDG_ERR_SCHEMA, e.what());
  } catch (const std::exception& e) {
    return fail(LDG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LDG_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw ldg::ContractViolation(what);
}

ldg::Vector to_vector(const double* data, size_t n) {
  ldg::Vector v(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = data[i];
  return v;
}

void copy_out(const ldg::Vector& v, double* out, size_t n) {
  if (static_cast<size_t>(v.size()) != n) {
    throw ldg::ContractViolation("output buffer has length " + std::to_string(n) + ", need " +
                                 std::to_string(v.size()));
  }
  for (size_t i = 0; i < n; ++i) out[i] = v(static_cast<Eigen::Index>(i));
}

}  // namespace

extern "C" {

const char* ldg_last_error(void) { return g_last_error.c_str(); }

const char* ldg_status_name(ldg_status status) {
  switch (status) {
    case LDG_OK: return "ok";
    case LDG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case LDG_ERR_CONFIG: return "config";
    case LDG_ERR_SCHEMA: return "schema";
    case LDG_ERR_IO: return "io";
    case LDG_ERR_SUPERVISOR_UNAVAILABLE: return "supervisor_unavailable";
    case LDG_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
    case LDG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ldg_version(void) { return ldg::kVersion; }

void ldg_string_free(char* s) { std::free(s); }

ldg_status ldg_env_create(const char* id, const char* params_json, ldg_env** out) {
  return guarded([&] {
    require(id != nullptr && out != nullptr, "id and out must not be NULL");
    nlohmann::json params = nlohmann::json::object();
    if (params_json != nullptr && *params_json != '\0') {
      try {
        params = nlohmann::json::parse(params_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw ldg::ConfigError(std::string("params: invalid JSON: ") + e.what());
      }
    }
    auto handle = std::make_unique<ldg_env>();
    handle->env = ldg::make_environment(id, params);
    *out = handle.release();
    return LDG_OK;
  });
}

void ldg_env_destroy(ldg_env* env) { delete env; }

ldg_status ldg_env_dims(const ldg_env* env, size_t* state_dim, size_t* action_dim, int* horizon) {
  return guarded([&] {
    require(env != nullptr, "env must not be NULL");
    const auto& spec = env->env->spec();
    if (state_dim) *state_dim = spec.state_dim;
    if (action_dim) *action_dim = spec.action_dim;
    if (horizon) *horizon = spec.horizon;
    return LDG_OK;
  });
}

ldg_status ldg_env_reset(const ldg_env* env, uint64_t seed, double* state, size_t state_len) {
  return guarded([&] {
    require(env != nullptr && state != nullptr, "env and state must not be NULL");
    copy_out(env->env->reset(seed).values, state, state_len);
    return LDG_OK;
  });
}

ldg_status ldg_env_step(const ldg_env* env, const double* state, size_t state_len,
                        const double* action, size_t action_len, int t, double* next_state,
                        int* done, int* success, int* collision, double* reward) {
  return guarded([&] {
    require(env != nullptr && state != nullptr && action != nullptr && next_state != nullptr,
            "env, state, action and next_state must not be NULL");
    const auto outcome = env->env->step({to_vector(state, state_len)},
                                        {to_vector(action, action_len)}, t);
    copy_out(outcome.next_state.values, next_state, state_len);
    if (done) *done = outcome.done ? 1 : 0;
    if (success) *success = outcome.info.success ? 1 : 0;
    if (collision) *collision = outcome.info.collision ? 1 : 0;
    if (reward) *reward = outcome.info.reward;
    return LDG_OK;
  });
}

ldg_status ldg_env_supervisor_action(const ldg_env* env, const double* state, size_t state_len,
                                     double* action, size_t action_len) {
  return guarded([&] {
    require(env != nullptr && state != nullptr && action != nullptr,
            "env, state and action must not be NULL");
    copy_out(env->env->supervisor_action({to_vector(state, state_len)}).values, action,
             action_len);
    return LDG_OK;
  });
}

ldg_status ldg_policy_load(const char* path, ldg_policy** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    auto handle = std::make_unique<ldg_policy>();
    handle->policy = ldg::load_policy(path);
    *out = handle.release();
    return LDG_OK;
  });
}

ldg_status ldg_policy_save(const ldg_policy* policy, const char* path) {
  return guarded([&] {
    require(policy != nullptr && path != nullptr, "policy and path must not be NULL");
    ldg::save_policy(path, policy->policy);
    return LDG_OK;
  });
}

void ldg_policy_destroy(ldg_policy* policy) { delete policy; }

ldg_status ldg_policy_dims(const ldg_policy* policy, size_t* state_dim, size_t* action_dim) {
  return guarded([&] {
    require(policy != nullptr, "policy must not be NULL");
    if (state_dim) *state_dim = policy->policy.network().input_dim();
    if (action_dim) *action_dim = policy->policy.network().output_dim();
    return LDG_OK;
  });
}

ldg_status ldg_policy_forward(const ldg_policy* policy, const double* state, size_t state_len,
                              double* action, size_t action_len) {
  return guarded([&] {
    require(policy != nullptr && state != nullptr && action != nullptr,
            "policy, state and action must not be NULL");
    copy_out(policy->policy.forward({to_vector(state, state_len)}).values, action, action_len);
    return LDG_OK;
  });
}

ldg_status ldg_policy_hash(const ldg_policy* policy, char** out) {
  return guarded([&] {
    require(policy != nullptr && out != nullptr, "policy and out must not be NULL");
    *out = dup_string(ldg::parameter_hash(policy->policy.network()));
    return LDG_OK;
  });
}

ldg_status ldg_burden(double switches, double supervisor_actions, double latency, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    *out = ldg::burden(switches, supervisor_actions, latency);
    return LDG_OK;
  });
}

ldg_status ldg_cutoff_latency(double lazy_switches, double lazy_actions, double safe_switches,
                              double safe_actions, double* out, int* defined, char** reason) {
  return guarded([&] {
    require(out != nullptr && defined != nullptr, "out and defined must not be NULL");
    require(lazy_switches >= 0 && lazy_actions >= 0 && safe_switches >= 0 && safe_actions >= 0,
            "counts must be nonnegative");
    const auto c = ldg::cutoff_latency({lazy_switches, lazy_actions},
                                       {safe_switches, safe_actions});
    *defined = c.defined() ? 1 : 0;
    if (c.defined()) {
      *out = *c.value;
      if (reason) *reason = nullptr;
    } else if (reason) {
      *reason = dup_string(c.reason);
    }
    return LDG_OK;
  });
}

ldg_status ldg_count_switches(const int* modes, size_t n, size_t* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    require(n == 0 || modes != nullptr, "modes must not be NULL");
    std::vector<ldg::Mode> seq;
    seq.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      require(modes[i] == 0 || modes[i] == 1, "modes must be 0 (autonomous) or 1 (supervisor)");
      seq.push_back(modes[i] == 1 ? ldg::Mode::Supervisor : ldg::Mode::Autonomous);
    }
    *out = ldg::count_switches(seq);
    return LDG_OK;
  });
}

ldg_status ldg_validate_config(const char* config_json, char** resolved_json) {
  return guarded([&] {
    require(config_json != nullptr && resolved_json != nullptr,
            "config_json and resolved_json must not be NULL");
    const auto config = ldg::validate_config(config_json);
    *resolved_json = dup_string(ldg::to_json(config).dump(2));
    return LDG_OK;
  });
}

ldg_status ldg_run(const char* config_json, const char* output_dir, int resume,
                   char** manifest_json) {
  return guarded([&] {
    require(config_json != nullptr && manifest_json != nullptr,
            "config_json and manifest_json must not be NULL");
    const auto config = ldg::validate_config(config_json);
    ldg::RunOptions options;
    options.resume = resume != 0;
    if (output_dir != nullptr && *output_dir != '\0') options.output_dir = output_dir;
    const auto manifest = ldg::run_experiment(config, options);
    *manifest_json = dup_string(manifest.to_json().dump(2));
    return LDG_OK;
  });
}

ldg_status ldg_compare(const char* run_a, const char* run_b, const double* latency_grid,
                       size_t grid_len, char** comparison_json) {
  return guarded([&] {
    require(run_a != nullptr && run_b != nullptr && comparison_json != nullptr,
            "run_a, run_b and comparison_json must not be NULL");
    require(grid_len == 0 || latency_grid != nullptr, "latency_grid must not be NULL");
    std::vector<double> grid(latency_grid, latency_grid + grid_len);
    for (double l : grid) require(l >= 0.0, "latencies must be nonnegative");
    *comparison_json = dup_string(ldg::compare(run_a, run_b, grid).dump(2));
    return LDG_OK;
  });
}

ldg_status ldg_calibrate(const char* config_json, uint64_t seed, double target,
                         char** result_json) {
  return guarded([&] {
    require(config_json != nullptr && result_json != nullptr,
            "config_json and result_json must not be NULL");
    const auto config = ldg::validate_config(config_json);
    *result_json = dup_string(ldg::calibrate(config, seed, target).dump(2));
    return LDG_OK;
  });
}

}  // extern "C"
