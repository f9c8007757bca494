#include "nalin/nalin.h"
#include "nalin/pipeline.hpp"

#include <exception>
#include <map>
#include <memory>
#include <string>
#include <vector>

struct nalin_config {
  nalin::RunConfig config;
};

struct nalin_result {
  nalin::RunOutcome outcome;
};

struct nalin_system {
  nalin::CatalogEntry entry;
};

static_assert(static_cast<int>(nalin::ErrorCode::io) == NALIN_IO, "status codes must mirror ErrorCode");
static_assert(static_cast<int>(nalin::ErrorCode::config) == NALIN_CONFIG, "status codes must mirror ErrorCode");

namespace {

thread_local std::string last_error;

int ok() {
  last_error.clear();
  return NALIN_OK;
}

int error(int status, const std::string& what) {
  last_error = what;
  return status;
}

// Runs body and converts exceptions into status codes.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const nalin::Error& e) {
    return error(static_cast<int>(e.code()), e.what());
  } catch (const std::exception& e) {
    return error(NALIN_INTERNAL, e.what());
  } catch (...) {
    return error(NALIN_INTERNAL, "unknown failure");
  }
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = nalin::catalog_names();
  return n;
}

}  // namespace

extern "C" {

const char* nalin_last_error(void) { return last_error.c_str(); }

const char* nalin_status_string(int status) {
  if (status == NALIN_OK) return "ok";
  if (status == NALIN_INTERNAL) return "internal";
  if (status >= NALIN_INVALID_ARGUMENT && status <= NALIN_IO) return nalin::to_string(static_cast<nalin::ErrorCode>(status));
  return "unknown";
}

int nalin_config_parse(const char* json, const char* base_dir, nalin_config** out) {
  if (!json || !out) return error(NALIN_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<nalin_config>();
    c->config = nalin::parse_config(json, base_dir ? base_dir : ".");
    *out = c.release();
    return ok();
  });
}

int nalin_config_load(const char* path, nalin_config** out) {
  if (!path || !out) return error(NALIN_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<nalin_config>();
    c->config = nalin::load_config(path);
    *out = c.release();
    return ok();
  });
}

int nalin_config_set_seed(nalin_config* config, uint64_t seed) {
  if (!config) return error(NALIN_INVALID_ARGUMENT, "null config");
  nalin::set_seed(config->config, seed);
  return ok();
}

void nalin_config_free(nalin_config* config) { delete config; }

int nalin_run(const nalin_config* config, nalin_command command, const char* out_dir, unsigned flags,
              nalin_result** out) {
  if (!config || !out) return error(NALIN_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  if (command < NALIN_CMD_SPECTRUM || command > NALIN_CMD_VERIFY) return error(NALIN_INVALID_ARGUMENT, "unknown command");
  return guarded([&] {
    nalin::RunOptions options;
    options.out_dir = out_dir ? out_dir : "";
    options.override_budget = (flags & NALIN_OVERRIDE_BUDGET) != 0;
    auto r = std::make_unique<nalin_result>();
    r->outcome = nalin::run_command(static_cast<nalin::Command>(command), config->config, options);
    *out = r.release();
    return ok();
  });
}

int nalin_result_exit_code(const nalin_result* result) { return result ? result->outcome.exit_code : nalin::exit_config; }

size_t nalin_result_message_count(const nalin_result* result) { return result ? result->outcome.messages.size() : 0; }

const char* nalin_result_message(const nalin_result* result, size_t index) {
  if (!result || index >= result->outcome.messages.size()) return nullptr;
  return result->outcome.messages[index].c_str();
}

size_t nalin_result_file_count(const nalin_result* result) { return result ? result->outcome.files.size() : 0; }

const char* nalin_result_file(const nalin_result* result, size_t index) {
  if (!result || index >= result->outcome.files.size()) return nullptr;
  return result->outcome.files[index].c_str();
}

void nalin_result_free(nalin_result* result) { delete result; }

size_t nalin_catalog_count(void) { return names().size(); }

const char* nalin_catalog_name(size_t index) { return index < names().size() ? names()[index].c_str() : nullptr; }

int nalin_system_create(const char* name, const char* const* param_names, const double* param_values,
                        size_t param_count, double t_min, double t_max, nalin_system** out) {
  if (!name || !out || (param_count > 0 && (!param_names || !param_values))) {
    return error(NALIN_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    std::map<std::string, double> params;
    for (size_t i = 0; i < param_count; ++i) {
      if (!param_names[i]) return error(NALIN_INVALID_ARGUMENT, "null parameter name");
      params[param_names[i]] = param_values[i];
    }
    auto s = std::make_unique<nalin_system>();
    s->entry = nalin::make_catalog_entry(name, params, t_min, t_max);
    *out = s.release();
    return ok();
  });
}

void nalin_system_free(nalin_system* system) { delete system; }

int nalin_system_dimension(const nalin_system* system) { return system ? system->entry.family->dimension() : 0; }

int nalin_system_flow(const nalin_system* system, double s, double t, const double* x, double* out) {
  if (!system || !x || !out) return error(NALIN_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const int d = system->entry.family->dimension();
    const nalin::Vec y = system->entry.family->flow(s, t, Eigen::Map<const nalin::Vec>(x, d));
    Eigen::Map<nalin::Vec>(out, d) = y;
    return ok();
  });
}

int nalin_system_transition(const nalin_system* system, double s, double t, double* out) {
  if (!system || !out) return error(NALIN_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const int d = system->entry.family->dimension();
    const nalin::Mat m = system->entry.family->transition(s, t);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i * d + j] = m(i, j);
    return ok();
  });
}

}  // extern "C"
