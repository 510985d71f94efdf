// Command-line front end. Talks to the core exclusively through the C API in
// cikg_c.h; the shared library owns all pipeline logic.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cikg/cikg_c.h"

namespace {

struct ConfigGuard {
  cikg_config* cfg = nullptr;
  ~ConfigGuard() { cikg_config_free(cfg); }
};

int finish(cikg_status status) {
  if (status != CIKG_OK) {
    std::fprintf(stderr, "error: %s\n", cikg_last_error());
  }
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cikg: collaborative interest knowledge graph recommendation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --config/--set/--out after the subcommand name

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("-o,--out", out_dir, "output directory (overrides config)");
  app.add_option("--set", overrides, "override a config key, e.g. --set train.lr=0.005")
      ->take_all();

  struct Cmd {
    const char* name;
    const char* help;
  };
  const std::vector<Cmd> cmds = {
      {"ingest", "parse, filter and split the dataset; write stats.json"},
      {"interests", "obtain user interest phrases (live LLM or fixture); write interests.jsonl"},
      {"cluster", "cluster interest phrases; write interest_cluster.tsv and user_interest.tsv"},
      {"build-graph", "build the unified graph; write graph.tsv and nodes.tsv"},
      {"train", "train embeddings; write checkpoint, train_log.jsonl, embeddings.tsv"},
      {"evaluate", "evaluate a checkpoint on the test split; write metrics.json"},
      {"run", "run the whole pipeline: ingest through evaluate"},
      {"ablate", "train and evaluate the ablation grid; write ablation.tsv"},
      {"schedule-preview", "emit the mask-rate schedule (epoch, linear, exponential)"},
      {"gradcheck", "verify analytic gradients against finite differences"},
      {"synth", "generate a planted-topic synthetic dataset into the output directory"},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  ConfigGuard guard;
  cikg_status status = config_path.empty() ? cikg_config_create(&guard.cfg)
                                           : cikg_config_load(config_path.c_str(), &guard.cfg);
  if (status != CIKG_OK) return finish(status);

  for (const std::string& kv : overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return 2;
    }
    status = cikg_config_set(guard.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (status != CIKG_OK) return finish(status);
  }
  if (!out_dir.empty()) {
    status = cikg_config_set(guard.cfg, "out", out_dir.c_str());
    if (status != CIKG_OK) return finish(status);
  }

  if (cmd == "ingest") return finish(cikg_run_ingest(guard.cfg));
  if (cmd == "interests") return finish(cikg_run_interests(guard.cfg));
  if (cmd == "cluster") return finish(cikg_run_cluster(guard.cfg));
  if (cmd == "build-graph") return finish(cikg_run_build_graph(guard.cfg));
  if (cmd == "train") return finish(cikg_run_train(guard.cfg));
  if (cmd == "evaluate") return finish(cikg_run_evaluate(guard.cfg));
  if (cmd == "run") return finish(cikg_run_pipeline(guard.cfg));
  if (cmd == "ablate") return finish(cikg_run_ablate(guard.cfg));
  if (cmd == "schedule-preview") return finish(cikg_run_schedule_preview(guard.cfg, 1));
  if (cmd == "gradcheck") return finish(cikg_run_gradcheck(guard.cfg, 1));
  if (cmd == "synth") return finish(cikg_run_synth(guard.cfg));

  std::fprintf(stderr, "error: unknown subcommand '%s'\n", cmd.c_str());
  return 2;
}
