#pragma once

// Configuration, per-stage orchestration, the synthetic dataset generator,
// and the ablation grid runner. Every stage validates its configuration
// before writing anything under the output directory.

#include <optional>
#include <string>
#include <vector>

#include "cikg/data.hpp"
#include "cikg/interests.hpp"
#include "cikg/metrics.hpp"
#include "cikg/trainer.hpp"

namespace cikg {

// Planted-topic dataset: items partitioned into topics, users assigned 1-3
// latent topics, interactions drawn from the user's topics with probability
// 1 - noise_rate (uniform otherwise). Interest fixtures name the true
// topics; KG triples link each item's entity to its topic entity.
struct SyntheticSpec {
  int n_users = 500;
  int n_items = 200;
  int n_clusters = 20;
  int interactions_per_user = 20;
  double noise_rate = 0.2;
  uint64_t seed = 99;

  void validate() const;
};

extern const std::vector<std::string> kKnownVariants;
// {"full", "wo_uik", "wo_uir", "wo_cl", "wo_dmr", "linear_dmr",
//  "aux_cg", "aux_cig", "aux_ckg", "aux_cikg"}

struct RunConfig {
  std::string out = "out";

  struct Dataset {
    std::string name;
    std::string ratings;
    std::string kg_triples;
    std::string kg_projection;
    std::string item_titles;
    int min_user_freq = 0;  // 0 -> 10 for movielens-style names, 5 otherwise
  } dataset;

  struct Split {
    std::array<double, 3> ratios = {0.7, 0.1, 0.2};
    uint64_t seed = 42;
  } split;

  struct Llm {
    std::string mode = "fixture";  // fixture | live
    std::string fixture_path;
    std::string endpoint_url;
    std::string model = "gpt-3.5-turbo-0125";
    double temperature = 0.0;
    int max_retries = 3;
    int backoff_ms = 250;
    int parallelism = 4;
    int max_interests = 5;
    int history_budget = 20;
    PromptTemplate prompt;
  } llm;

  struct Cluster {
    int kappa = 20;
    uint64_t seed = 7;
  } cluster;

  TrainConfig train;

  struct Eval {
    std::vector<int> ks = {50, 100};
    std::string checkpoint;  // empty -> read manifest.json from out
  } eval;

  std::string variant = "full";
  std::vector<uint64_t> ablate_seeds = {1, 2, 3, 4, 5};
  SyntheticSpec synth;

  int effective_min_user_freq() const;
};

RunConfig default_config();
RunConfig parse_config_json(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Dotted-path override; the value is parsed as JSON when possible, else
// taken as a string.
void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value);
std::string config_to_json(const RunConfig& cfg);

// Path/field validation for the stages that `stage` covers. Throws
// ConfigError before any output is written.
void validate_config(const RunConfig& cfg, const std::string& stage);

// Pipeline stages. Each writes its declared files under cfg.out and returns
// through the filesystem; `run_pipeline` chains them in memory.
void run_ingest(const RunConfig& cfg);
void run_interests(const RunConfig& cfg);
void run_cluster(const RunConfig& cfg);
void run_build_graph(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);
void run_pipeline(const RunConfig& cfg);
void run_ablate(const RunConfig& cfg);
void run_schedule_preview(const RunConfig& cfg, std::ostream* echo = nullptr);
void run_gradcheck(const RunConfig& cfg, std::ostream* echo = nullptr);
void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

// Single trained-and-evaluated run used by ablate and tests; returns the
// test-split report.
MetricReport train_and_evaluate(const RunConfig& cfg, const SplitInteractions& split,
                                const TripleStore& kg, const InterestAssignment& assignment,
                                uint64_t model_seed, std::vector<EpochReport>* log = nullptr);

// Applies a variant's semantics to a base config (loss weights, schedule,
// graph composition switches).
struct VariantPlan {
  bool use_interest_edges = true;
  bool use_kg_edges = true;
  bool kg_in_ranking_graph = true;
  TrainConfig train;
};
VariantPlan plan_variant(const std::string& variant, const TrainConfig& base);

}  // namespace cikg
