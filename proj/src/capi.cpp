#include "cikg/cikg_c.h"

#include <cstring>
#include <iostream>
#include <string>

#include "cikg/pipeline.hpp"

using cikg::RunConfig;

struct cikg_config {
  RunConfig cfg;
};

namespace {

thread_local std::string t_last_error = "";

cikg_status to_status(const cikg::Error& e) {
  switch (e.code()) {
    case cikg::ErrorCode::config: return CIKG_CONFIG_ERROR;
    case cikg::ErrorCode::data: return CIKG_DATA_ERROR;
    case cikg::ErrorCode::numeric: return CIKG_NUMERIC_ERROR;
    case cikg::ErrorCode::llm: return CIKG_LLM_ERROR;
    default: return CIKG_ERROR;
  }
}

template <typename Fn>
cikg_status guarded(const char* stage, Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return CIKG_OK;
  } catch (const cikg::Error& e) {
    t_last_error = std::string(stage) + ": " + e.what();
    return to_status(e);
  } catch (const std::exception& e) {
    t_last_error = std::string(stage) + ": " + e.what();
    return CIKG_ERROR;
  } catch (...) {
    t_last_error = std::string(stage) + ": unknown error";
    return CIKG_ERROR;
  }
}

}  // namespace

extern "C" {

const char* cikg_version(void) { return "0.1.0"; }

const char* cikg_last_error(void) { return t_last_error.c_str(); }

cikg_status cikg_config_create(cikg_config** out) {
  if (!out) return CIKG_ERROR;
  return guarded("config", [&] { *out = new cikg_config{cikg::default_config()}; });
}

cikg_status cikg_config_load(const char* path, cikg_config** out) {
  if (!path || !out) return CIKG_ERROR;
  return guarded("config", [&] { *out = new cikg_config{cikg::load_config(path)}; });
}

cikg_status cikg_config_from_json(const char* json_text, cikg_config** out) {
  if (!json_text || !out) return CIKG_ERROR;
  return guarded("config", [&] { *out = new cikg_config{cikg::parse_config_json(json_text)}; });
}

cikg_status cikg_config_set(cikg_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return CIKG_ERROR;
  return guarded("config", [&] { cikg::apply_config_override(cfg->cfg, key, value); });
}

cikg_status cikg_config_dump(const cikg_config* cfg, char* buf, size_t cap, size_t* written) {
  if (!cfg || !buf) return CIKG_ERROR;
  const std::string text = cikg::config_to_json(cfg->cfg);
  if (written) *written = text.size() + 1;
  if (text.size() + 1 > cap) {
    t_last_error = "config: buffer too small";
    return CIKG_ERROR;
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return CIKG_OK;
}

void cikg_config_free(cikg_config* cfg) { delete cfg; }

cikg_status cikg_run_ingest(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("ingest", [&] { cikg::run_ingest(cfg->cfg); });
}

cikg_status cikg_run_interests(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("interests", [&] { cikg::run_interests(cfg->cfg); });
}

cikg_status cikg_run_cluster(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("cluster", [&] { cikg::run_cluster(cfg->cfg); });
}

cikg_status cikg_run_build_graph(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("build-graph", [&] { cikg::run_build_graph(cfg->cfg); });
}

cikg_status cikg_run_train(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("train", [&] { cikg::run_train(cfg->cfg); });
}

cikg_status cikg_run_evaluate(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("evaluate", [&] { cikg::run_evaluate(cfg->cfg); });
}

cikg_status cikg_run_pipeline(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("pipeline", [&] { cikg::run_pipeline(cfg->cfg); });
}

cikg_status cikg_run_ablate(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("ablate", [&] { cikg::run_ablate(cfg->cfg); });
}

cikg_status cikg_run_schedule_preview(const cikg_config* cfg, int echo_stdout) {
  if (!cfg) return CIKG_ERROR;
  return guarded("schedule-preview", [&] {
    cikg::run_schedule_preview(cfg->cfg, echo_stdout ? &std::cout : nullptr);
  });
}

cikg_status cikg_run_gradcheck(const cikg_config* cfg, int echo_stdout) {
  if (!cfg) return CIKG_ERROR;
  return guarded("gradcheck",
                 [&] { cikg::run_gradcheck(cfg->cfg, echo_stdout ? &std::cout : nullptr); });
}

cikg_status cikg_run_synth(const cikg_config* cfg) {
  if (!cfg) return CIKG_ERROR;
  return guarded("synth", [&] { cikg::generate_synthetic(cfg->cfg.synth, cfg->cfg.out); });
}

}  // extern "C"
