#include "cikg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace cikg {

const std::vector<std::string> kKnownVariants = {
    "full",   "wo_uik", "wo_uir", "wo_cl",   "wo_dmr",
    "linear_dmr", "aux_cg", "aux_cig", "aux_ckg", "aux_cikg"};

void SyntheticSpec::validate() const {
  if (n_users < 1 || n_items < 1) throw ConfigError("synth: need users and items");
  if (n_clusters < 1 || n_clusters > n_items) {
    throw ConfigError("synth: n_clusters must be in [1, n_items]");
  }
  if (interactions_per_user < 1 || interactions_per_user > n_items) {
    throw ConfigError("synth: interactions_per_user must be in [1, n_items]");
  }
  if (noise_rate < 0.0 || noise_rate > 1.0) throw ConfigError("synth: noise_rate must be in [0, 1]");
}

int RunConfig::effective_min_user_freq() const {
  if (dataset.min_user_freq > 0) return dataset.min_user_freq;
  return to_lower(dataset.name).find("movielens") != std::string::npos ? 10 : 5;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.llm.prompt = default_prompt_template();
  return cfg;
}

// -- config <-> json ----------------------------------------------------------

namespace {

MaskStrategy parse_strategy(const std::string& s) {
  if (s == "linear") return MaskStrategy::linear;
  if (s == "exponential") return MaskStrategy::exponential;
  if (s == "constant") return MaskStrategy::constant;
  throw ConfigError("unknown mask schedule strategy '" + s + "'");
}

std::string strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::linear: return "linear";
    case MaskStrategy::exponential: return "exponential";
    case MaskStrategy::constant: return "constant";
  }
  return "exponential";
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_config_json(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");

  RunConfig cfg = default_config();
  read_field(j, "out", cfg.out);
  read_field(j, "variant", cfg.variant);

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    read_field(d, "name", cfg.dataset.name);
    read_field(d, "ratings", cfg.dataset.ratings);
    read_field(d, "kg_triples", cfg.dataset.kg_triples);
    read_field(d, "kg_projection", cfg.dataset.kg_projection);
    read_field(d, "item_titles", cfg.dataset.item_titles);
    read_field(d, "min_user_freq", cfg.dataset.min_user_freq);
  }
  if (j.contains("split")) {
    const json& d = j["split"];
    if (d.contains("ratios")) {
      auto v = d["ratios"].get<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("split.ratios must have 3 entries");
      cfg.split.ratios = {v[0], v[1], v[2]};
    }
    read_field(d, "seed", cfg.split.seed);
  }
  if (j.contains("llm")) {
    const json& d = j["llm"];
    read_field(d, "mode", cfg.llm.mode);
    read_field(d, "fixture_path", cfg.llm.fixture_path);
    read_field(d, "endpoint_url", cfg.llm.endpoint_url);
    read_field(d, "model", cfg.llm.model);
    read_field(d, "temperature", cfg.llm.temperature);
    read_field(d, "max_retries", cfg.llm.max_retries);
    read_field(d, "backoff_ms", cfg.llm.backoff_ms);
    read_field(d, "parallelism", cfg.llm.parallelism);
    read_field(d, "max_interests", cfg.llm.max_interests);
    read_field(d, "history_budget", cfg.llm.history_budget);
    if (d.contains("prompt")) {
      read_field(d["prompt"], "system_text", cfg.llm.prompt.system_text);
      read_field(d["prompt"], "user_text_template", cfg.llm.prompt.user_text_template);
    }
  }
  if (j.contains("cluster")) {
    read_field(j["cluster"], "kappa", cfg.cluster.kappa);
    read_field(j["cluster"], "seed", cfg.cluster.seed);
  }
  if (j.contains("train")) {
    const json& d = j["train"];
    read_field(d, "lr", cfg.train.lr);
    read_field(d, "dim", cfg.train.dim);
    read_field(d, "layers", cfg.train.layers);
    read_field(d, "max_epochs", cfg.train.max_epochs);
    read_field(d, "patience", cfg.train.patience);
    read_field(d, "eval_interval", cfg.train.eval_interval);
    read_field(d, "seed", cfg.train.seed);
    read_field(d, "neg_per_pos", cfg.train.neg_per_pos);
    read_field(d, "kg_alt_ratio", cfg.train.kg_alt_ratio);
    if (d.contains("schedule")) {
      const json& s = d["schedule"];
      read_field(s, "alpha", cfg.train.schedule.alpha);
      read_field(s, "omega", cfg.train.schedule.omega);
      read_field(s, "lambda_cap", cfg.train.schedule.lambda_cap);
      if (s.contains("strategy")) cfg.train.schedule.strategy = parse_strategy(s["strategy"]);
    }
    if (d.contains("weights")) {
      const json& w = d["weights"];
      read_field(w, "lambda1", cfg.train.weights.lambda1);
      read_field(w, "lambda2", cfg.train.weights.lambda2);
      read_field(w, "lambda3", cfg.train.weights.lambda3);
      read_field(w, "eta", cfg.train.weights.eta);
      read_field(w, "tau", cfg.train.weights.tau);
      read_field(w, "eps", cfg.train.weights.eps);
    }
  }
  if (j.contains("eval")) {
    read_field(j["eval"], "ks", cfg.eval.ks);
    read_field(j["eval"], "checkpoint", cfg.eval.checkpoint);
  }
  if (j.contains("ablate")) {
    read_field(j["ablate"], "seeds", cfg.ablate_seeds);
  }
  if (j.contains("synth")) {
    const json& d = j["synth"];
    read_field(d, "n_users", cfg.synth.n_users);
    read_field(d, "n_items", cfg.synth.n_items);
    read_field(d, "n_clusters", cfg.synth.n_clusters);
    read_field(d, "interactions_per_user", cfg.synth.interactions_per_user);
    read_field(d, "noise_rate", cfg.synth.noise_rate);
    read_field(d, "seed", cfg.synth.seed);
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["out"] = cfg.out;
  j["dataset"] = {{"name", cfg.dataset.name},
                  {"ratings", cfg.dataset.ratings},
                  {"kg_triples", cfg.dataset.kg_triples},
                  {"kg_projection", cfg.dataset.kg_projection},
                  {"item_titles", cfg.dataset.item_titles},
                  {"min_user_freq", cfg.dataset.min_user_freq}};
  j["split"] = {{"ratios", cfg.split.ratios}, {"seed", cfg.split.seed}};
  j["llm"] = {{"mode", cfg.llm.mode},
              {"fixture_path", cfg.llm.fixture_path},
              {"endpoint_url", cfg.llm.endpoint_url},
              {"model", cfg.llm.model},
              {"temperature", cfg.llm.temperature},
              {"max_retries", cfg.llm.max_retries},
              {"backoff_ms", cfg.llm.backoff_ms},
              {"parallelism", cfg.llm.parallelism},
              {"max_interests", cfg.llm.max_interests},
              {"history_budget", cfg.llm.history_budget},
              {"prompt",
               {{"system_text", cfg.llm.prompt.system_text},
                {"user_text_template", cfg.llm.prompt.user_text_template}}}};
  j["cluster"] = {{"kappa", cfg.cluster.kappa}, {"seed", cfg.cluster.seed}};
  j["train"] = {{"lr", cfg.train.lr},
                {"dim", cfg.train.dim},
                {"layers", cfg.train.layers},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"eval_interval", cfg.train.eval_interval},
                {"seed", cfg.train.seed},
                {"neg_per_pos", cfg.train.neg_per_pos},
                {"kg_alt_ratio", cfg.train.kg_alt_ratio},
                {"schedule",
                 {{"alpha", cfg.train.schedule.alpha},
                  {"omega", cfg.train.schedule.omega},
                  {"lambda_cap", cfg.train.schedule.lambda_cap},
                  {"strategy", strategy_name(cfg.train.schedule.strategy)}}},
                {"weights",
                 {{"lambda1", cfg.train.weights.lambda1},
                  {"lambda2", cfg.train.weights.lambda2},
                  {"lambda3", cfg.train.weights.lambda3},
                  {"eta", cfg.train.weights.eta},
                  {"tau", cfg.train.weights.tau},
                  {"eps", cfg.train.weights.eps}}}};
  j["eval"] = {{"ks", cfg.eval.ks}, {"checkpoint", cfg.eval.checkpoint}};
  j["variant"] = cfg.variant;
  j["ablate"] = {{"seeds", cfg.ablate_seeds}};
  j["synth"] = {{"n_users", cfg.synth.n_users},
                {"n_items", cfg.synth.n_items},
                {"n_clusters", cfg.synth.n_clusters},
                {"interactions_per_user", cfg.synth.interactions_per_user},
                {"noise_rate", cfg.synth.noise_rate},
                {"seed", cfg.synth.seed}};
  return j.dump(2);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  json j = json::parse(config_to_json(cfg));
  std::string pointer = "/";
  for (char c : key) pointer += c == '.' ? '/' : c;
  json parsed = json::parse(value, nullptr, false);
  try {
    j[json::json_pointer(pointer)] = parsed.is_discarded() ? json(value) : parsed;
  } catch (const json::exception& e) {
    throw ConfigError("bad override key '" + key + "': " + e.what());
  }
  cfg = parse_config_json(j.dump());
}

// -- validation ---------------------------------------------------------------

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

void require_optional_file(const std::string& path, const std::string& what) {
  if (!path.empty() && !fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

bool needs_dataset(const std::string& stage) {
  return stage == "ingest" || stage == "interests" || stage == "cluster" ||
         stage == "build-graph" || stage == "train" || stage == "evaluate" ||
         stage == "ablate" || stage == "pipeline";
}

}  // namespace

void validate_config(const RunConfig& cfg, const std::string& stage) {
  if (cfg.out.empty()) throw ConfigError("output directory is not set");
  const double rsum = cfg.split.ratios[0] + cfg.split.ratios[1] + cfg.split.ratios[2];
  if (std::abs(rsum - 1.0) > 1e-9) throw ConfigError("split.ratios must sum to 1");

  if (needs_dataset(stage)) {
    require_file(cfg.dataset.ratings, "dataset.ratings");
    require_optional_file(cfg.dataset.kg_triples, "dataset.kg_triples");
    require_optional_file(cfg.dataset.kg_projection, "dataset.kg_projection");
    require_optional_file(cfg.dataset.item_titles, "dataset.item_titles");
  }
  if (stage == "interests" || stage == "pipeline") {
    if (cfg.llm.mode == "fixture") {
      require_file(cfg.llm.fixture_path, "llm.fixture_path");
    } else if (cfg.llm.mode == "live") {
      if (cfg.llm.endpoint_url.empty()) throw ConfigError("llm.endpoint_url is not set");
    } else {
      throw ConfigError("llm.mode must be 'fixture' or 'live'");
    }
  }
  if (stage == "cluster" || stage == "pipeline" || stage == "ablate") {
    if (cfg.cluster.kappa < 1) throw ConfigError("cluster.kappa must be >= 1");
  }
  if (stage == "train" || stage == "pipeline" || stage == "ablate" || stage == "gradcheck") {
    cfg.train.validate();
  }
  if (std::find(kKnownVariants.begin(), kKnownVariants.end(), cfg.variant) ==
      kKnownVariants.end()) {
    throw ConfigError("unknown variant '" + cfg.variant + "'");
  }
  if (stage == "synth") cfg.synth.validate();
  if (stage == "evaluate" && !cfg.eval.checkpoint.empty()) {
    require_file(cfg.eval.checkpoint, "eval.checkpoint");
  }
}

// -- shared stage plumbing ----------------------------------------------------

namespace {

struct LoadedData {
  InteractionSet ix;
  SplitInteractions split;
  TripleStore kg;
};

LoadedData load_data(const RunConfig& cfg) {
  LoadedData d;
  d.ix = load_interactions(cfg.dataset.ratings, cfg.effective_min_user_freq());
  d.split = split_interactions(d.ix, cfg.split.ratios, cfg.split.seed);
  d.kg = load_kg(cfg.dataset.kg_triples, cfg.dataset.kg_projection, d.ix);
  return d;
}

void ensure_out(const RunConfig& cfg) { fs::create_directories(cfg.out); }

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

InterestCorpus obtain_corpus(const RunConfig& cfg, const LoadedData& data) {
  if (cfg.llm.mode == "fixture") {
    return load_fixture_interests(cfg.llm.fixture_path, data.ix);
  }

  std::unordered_map<std::string, std::string> titles;
  if (!cfg.dataset.item_titles.empty()) titles = load_item_titles(cfg.dataset.item_titles);
  auto title_of = [&](int item) {
    auto it = titles.find(data.ix.item_raw[item]);
    return it != titles.end() ? it->second : data.ix.item_raw[item];
  };

  // Prompts are built from training history only, so generated interests
  // never see held-out interactions.
  std::vector<PromptBatchEntry> batch;
  for (int u = 0; u < data.ix.n_users; ++u) {
    const auto& items = data.split.train.items_by_user[u];
    if (items.empty()) continue;
    std::vector<std::string> history;
    history.reserve(items.size());
    for (int i : items) history.push_back(title_of(i));
    PromptBatchEntry e;
    e.user = u;
    e.user_raw = data.ix.user_raw[u];
    e.prompt = render_prompt(cfg.llm.prompt, history, cfg.llm.max_interests, cfg.llm.history_budget);
    batch.push_back(std::move(e));
  }

  LlmOptions opt;
  opt.endpoint_url = cfg.llm.endpoint_url;
  opt.model = cfg.llm.model;
  opt.temperature = cfg.llm.temperature;
  opt.max_retries = cfg.llm.max_retries;
  opt.backoff_ms = cfg.llm.backoff_ms;
  if (const char* key = std::getenv("CIKG_LLM_API_KEY")) opt.api_key = key;
  auto client = make_http_llm_client(opt);

  InterestCorpus corpus = infer_interests(*client, cfg.llm.prompt.system_text, batch,
                                          data.ix.n_users, cfg.llm.parallelism);
  if (!batch.empty() && corpus.failures.size() == batch.size()) {
    throw LlmError("all " + std::to_string(batch.size()) + " completion requests failed; last: " +
                   corpus.failures.rbegin()->second);
  }
  return corpus;
}

InterestAssignment load_assignment_files(const RunConfig& cfg, const InteractionSet& ix) {
  return load_interest_assignment(out_path(cfg, "interest_cluster.tsv"),
                                  out_path(cfg, "user_interest.tsv"), ix);
}

double run_valid_recall(const EmbeddingState& emb, const TrainGraphs& graphs,
                        const SplitInteractions& split, int layers) {
  Mat z_hat = propagate(emb.Z, graphs.ranking, layers);
  return mean_recall_at_k(z_hat, graphs.user_gids, graphs.item_gids, split.train, split.valid, 50);
}

}  // namespace

VariantPlan plan_variant(const std::string& variant, const TrainConfig& base) {
  VariantPlan plan;
  plan.train = base;
  if (variant == "full") return plan;
  if (variant == "wo_uik") {
    plan.use_interest_edges = false;
    return plan;
  }
  if (variant == "wo_uir") {
    plan.train.weights.lambda2 = 0.0;
    return plan;
  }
  if (variant == "wo_cl") {
    plan.train.weights.lambda3 = 0.0;
    return plan;
  }
  if (variant == "wo_dmr") {
    plan.train.schedule.strategy = MaskStrategy::constant;
    return plan;
  }
  if (variant == "linear_dmr") {
    plan.train.schedule.strategy = MaskStrategy::linear;
    return plan;
  }
  // Auxiliary-information grid: ranking-only model on the chosen graph.
  plan.train.weights.lambda2 = 0.0;
  plan.train.weights.lambda3 = 0.0;
  plan.train.kg_alt_ratio = 0;
  if (variant == "aux_cg") {
    plan.use_interest_edges = false;
    plan.use_kg_edges = false;
  } else if (variant == "aux_cig") {
    plan.use_kg_edges = false;
  } else if (variant == "aux_ckg") {
    plan.use_interest_edges = false;
  } else if (variant != "aux_cikg") {
    throw ConfigError("unknown variant '" + variant + "'");
  }
  return plan;
}

// -- stages -------------------------------------------------------------------

void run_ingest(const RunConfig& cfg) {
  validate_config(cfg, "ingest");
  LoadedData data = load_data(cfg);
  ensure_out(cfg);
  std::ofstream out(out_path(cfg, "stats.json"));
  if (!out) throw DataError("cannot write stats.json");
  out << dataset_stats_json(dataset_stats(data.ix, data.kg));
}

void run_interests(const RunConfig& cfg) {
  validate_config(cfg, "interests");
  LoadedData data = load_data(cfg);
  InterestCorpus corpus = obtain_corpus(cfg, data);
  ensure_out(cfg);
  write_interest_corpus(corpus, data.ix, out_path(cfg, "interests.jsonl"));
  if (!corpus.failures.empty()) {
    std::ofstream f(out_path(cfg, "interest_failures.jsonl"));
    for (const auto& [user, err] : corpus.failures) {
      ordered_json j;
      j["user"] = data.ix.user_raw[user];
      j["error"] = err;
      f << j.dump() << '\n';
    }
  }
}

void run_cluster(const RunConfig& cfg) {
  validate_config(cfg, "cluster");
  LoadedData data = load_data(cfg);
  InterestCorpus corpus = load_fixture_interests(out_path(cfg, "interests.jsonl"), data.ix);
  InterestAssignment assignment = cluster_interests(corpus, cfg.cluster.kappa, cfg.cluster.seed);
  ensure_out(cfg);
  write_interest_assignment(assignment, data.ix, out_path(cfg, "interest_cluster.tsv"),
                            out_path(cfg, "user_interest.tsv"));
}

void run_build_graph(const RunConfig& cfg) {
  validate_config(cfg, "build-graph");
  LoadedData data = load_data(cfg);
  VariantPlan plan = plan_variant(cfg.variant, cfg.train);
  InterestAssignment assignment;
  if (plan.use_interest_edges) assignment = load_assignment_files(cfg, data.ix);
  TrainGraphs graphs = build_train_graphs(data.split.train, data.kg, assignment,
                                          plan.use_interest_edges, plan.use_kg_edges,
                                          plan.kg_in_ranking_graph);

  auto table = graphs.table;
  auto relations = make_relation_vocab(data.kg);
  HeteroGraph cg = collaborative_graph(data.split.train, table, relations);
  HeteroGraph ig(table, relations);
  if (plan.use_interest_edges) ig = interest_graph(assignment, table, relations);
  HeteroGraph kgg(table, relations);
  if (plan.use_kg_edges) kgg = map_items_to_entities(data.kg, table, relations);
  HeteroGraph unified = build_cikg(cg, ig, kgg);
  ensure_out(cfg);
  dump_graph(unified, out_path(cfg, "graph.tsv"), out_path(cfg, "nodes.tsv"));
}

namespace {

struct TrainOutcome {
  EmbeddingState embeddings;
  TrainGraphs graphs;
  TrainConfig used;
  std::vector<EpochReport> log;
  int best_epoch = -1;
};

TrainOutcome train_on(const RunConfig& cfg, const LoadedData& data,
                      const InterestAssignment& assignment, uint64_t model_seed) {
  VariantPlan plan = plan_variant(cfg.variant, cfg.train);
  plan.train.seed = model_seed;
  TrainOutcome out;
  out.graphs = build_train_graphs(data.split.train, data.kg, assignment, plan.use_interest_edges,
                                  plan.use_kg_edges, plan.kg_in_ranking_graph);
  out.used = plan.train;

  Trainer trainer(plan.train, out.graphs, data.split.train);
  TrainState state;
  state.embeddings = init_embeddings(out.graphs.table->n_nodes(), data.kg.n_relations + 2,
                                     plan.train.dim, model_seed);
  out.log = trainer.fit(state, [&](const EmbeddingState& emb) {
    return run_valid_recall(emb, out.graphs, data.split, plan.train.layers);
  });
  out.embeddings = std::move(state.embeddings);
  out.best_epoch = state.best_epoch;
  return out;
}

MetricReport evaluate_outcome(const RunConfig& cfg, const LoadedData& data,
                              const TrainOutcome& outcome) {
  Mat z_hat = propagate(outcome.embeddings.Z, outcome.graphs.ranking, outcome.used.layers);
  return evaluate(z_hat, outcome.graphs.user_gids, outcome.graphs.item_gids, data.split.train,
                  data.split.test, cfg.eval.ks);
}

}  // namespace

MetricReport train_and_evaluate(const RunConfig& cfg, const SplitInteractions& split,
                                const TripleStore& kg, const InterestAssignment& assignment,
                                uint64_t model_seed, std::vector<EpochReport>* log) {
  LoadedData data;
  data.split = split;
  data.kg = kg;
  TrainOutcome outcome = train_on(cfg, data, assignment, model_seed);
  if (log) *log = outcome.log;
  return evaluate_outcome(cfg, data, outcome);
}

void run_train(const RunConfig& cfg) {
  validate_config(cfg, "train");
  LoadedData data = load_data(cfg);
  VariantPlan plan = plan_variant(cfg.variant, cfg.train);
  InterestAssignment assignment;
  if (plan.use_interest_edges) assignment = load_assignment_files(cfg, data.ix);

  TrainOutcome outcome = train_on(cfg, data, assignment, cfg.train.seed);
  ensure_out(cfg);
  const int epoch = outcome.best_epoch >= 0 ? outcome.best_epoch : cfg.train.max_epochs - 1;
  const std::string ckpt = "checkpoint_" + std::to_string(epoch) + ".bin";
  save_checkpoint(outcome.embeddings, epoch, cfg.train.seed, outcome.used.layers,
                  out_path(cfg, ckpt));
  write_train_log(outcome.log, out_path(cfg, "train_log.jsonl"));
  export_embeddings(outcome.embeddings.Z, out_path(cfg, "embeddings.tsv"));

  ordered_json manifest;
  manifest["dim"] = outcome.used.dim;
  manifest["layers"] = outcome.used.layers;
  manifest["seed"] = cfg.train.seed;
  manifest["split_seed"] = cfg.split.seed;
  manifest["checkpoint_epoch"] = epoch;
  manifest["checkpoint_file"] = ckpt;
  manifest["variant"] = cfg.variant;
  std::ofstream mf(out_path(cfg, "manifest.json"));
  mf << manifest.dump(2) << '\n';
}

void run_evaluate(const RunConfig& cfg) {
  validate_config(cfg, "evaluate");
  std::string ckpt_path = cfg.eval.checkpoint;
  if (ckpt_path.empty()) {
    const std::string manifest_path = out_path(cfg, "manifest.json");
    std::ifstream mf(manifest_path);
    if (!mf) throw ConfigError("eval.checkpoint not set and " + manifest_path + " not found");
    json manifest = json::parse(mf, nullptr, false);
    if (manifest.is_discarded()) throw DataError("corrupt manifest.json");
    ckpt_path = out_path(cfg, manifest.at("checkpoint_file").get<std::string>());
  }

  int layers = cfg.train.layers;
  EmbeddingState emb = load_checkpoint(ckpt_path, nullptr, nullptr, &layers);

  LoadedData data = load_data(cfg);
  VariantPlan plan = plan_variant(cfg.variant, cfg.train);
  InterestAssignment assignment;
  if (plan.use_interest_edges) assignment = load_assignment_files(cfg, data.ix);
  TrainGraphs graphs = build_train_graphs(data.split.train, data.kg, assignment,
                                          plan.use_interest_edges, plan.use_kg_edges,
                                          plan.kg_in_ranking_graph);
  if (emb.Z.rows() != graphs.table->n_nodes()) {
    throw DataError("checkpoint node count does not match the rebuilt graph");
  }

  Mat z_hat = propagate(emb.Z, graphs.ranking, layers);
  MetricReport report = evaluate(z_hat, graphs.user_gids, graphs.item_gids, data.split.train,
                                 data.split.test, cfg.eval.ks);
  ensure_out(cfg);
  std::ofstream out(out_path(cfg, "metrics.json"));
  out << metric_report_json(report);
}

void run_pipeline(const RunConfig& cfg) {
  validate_config(cfg, "pipeline");
  run_ingest(cfg);
  run_interests(cfg);
  run_cluster(cfg);
  run_build_graph(cfg);
  run_train(cfg);
  run_evaluate(cfg);
}

void run_ablate(const RunConfig& cfg) {
  validate_config(cfg, "ablate");
  LoadedData data = load_data(cfg);
  InterestCorpus corpus = load_fixture_interests(out_path(cfg, "interests.jsonl"), data.ix);
  InterestAssignment assignment = cluster_interests(corpus, cfg.cluster.kappa, cfg.cluster.seed);
  ensure_out(cfg);

  struct Cell {
    std::vector<double> values;
  };
  // variant -> metric -> per-seed values
  std::vector<std::pair<std::string, std::map<std::string, Cell>>> table;

  for (const std::string& variant : kKnownVariants) {
    RunConfig vcfg = cfg;
    vcfg.variant = variant;
    std::map<std::string, Cell> row;
    for (uint64_t seed : cfg.ablate_seeds) {
      MetricReport rep = train_and_evaluate(vcfg, data.split, data.kg, assignment, seed);
      for (const auto& [k, v] : rep.recall) row["recall@" + std::to_string(k)].values.push_back(v);
      for (const auto& [k, v] : rep.ndcg) row["ndcg@" + std::to_string(k)].values.push_back(v);
      std::cerr << "ablate " << variant << " seed " << seed;
      if (rep.recall.count(50)) std::cerr << " recall@50 " << rep.recall.at(50);
      std::cerr << "\n";
    }
    table.emplace_back(variant, std::move(row));
  }

  std::ofstream out(out_path(cfg, "ablation.tsv"));
  if (!out) throw DataError("cannot write ablation.tsv");
  char buf[64];
  for (const auto& [variant, row] : table) {
    for (const auto& [metric, cell] : row) {
      double mean = 0.0;
      for (double v : cell.values) mean += v;
      mean /= cell.values.size();
      double var = 0.0;
      for (double v : cell.values) var += (v - mean) * (v - mean);
      const double sd = cell.values.size() > 1 ? std::sqrt(var / (cell.values.size() - 1)) : 0.0;
      std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", mean, sd);
      out << variant << '\t' << metric << '\t' << buf << '\n';
    }
  }
}

void run_schedule_preview(const RunConfig& cfg, std::ostream* echo) {
  cfg.train.schedule.validate();
  ensure_out(cfg);
  std::ofstream out(out_path(cfg, "schedule.tsv"));
  if (!out) throw DataError("cannot write schedule.tsv");

  MaskSchedule lin = cfg.train.schedule;
  lin.strategy = MaskStrategy::linear;
  MaskSchedule expo = cfg.train.schedule;
  expo.strategy = MaskStrategy::exponential;
  char buf[96];
  for (int q = 0; q <= cfg.train.schedule.lambda_cap; ++q) {
    std::snprintf(buf, sizeof(buf), "%d\t%.10g\t%.10g", q, schedule_mask_rate(lin, q),
                  schedule_mask_rate(expo, q));
    out << buf << '\n';
    if (echo) *echo << buf << '\n';
  }
}

void run_gradcheck(const RunConfig& cfg, std::ostream* echo) {
  ensure_out(cfg);
  const std::vector<std::string> losses = {"quadratic", "bpr", "reconstruction", "contrastive",
                                           "transe"};
  ordered_json results = ordered_json::array();
  bool all_pass = true;
  for (const auto& loss : losses) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      const double tol = loss == "quadratic" ? 1e-10 : 1e-4;
      GradCheckReport rep = gradient_check(loss, seed, tol);
      all_pass = all_pass && rep.pass;
      ordered_json j;
      j["loss"] = rep.loss_id;
      j["seed"] = seed;
      j["max_rel_error"] = rep.max_rel_error;
      j["pass"] = rep.pass;
      results.push_back(j);
      if (echo) {
        *echo << (rep.pass ? "pass" : "FAIL") << "  " << loss << " seed " << seed
              << "  max_rel_error " << rep.max_rel_error << "\n";
      }
    }
  }
  std::ofstream out(out_path(cfg, "gradcheck.json"));
  out << results.dump(2) << '\n';
  if (!all_pass) throw NumericError("gradient check failed; see gradcheck.json");
}

// -- synthetic data -----------------------------------------------------------

namespace {

std::string topic_word(int k) {
  // Letters-only code, deterministic and unique per topic: aa, ab, ..., ba...
  std::string w;
  int v = k;
  do {
    w.insert(w.begin(), static_cast<char>('a' + v % 26));
    v /= 26;
  } while (v > 0);
  while (w.size() < 2) w.insert(w.begin(), 'a');
  return "likes_" + w;
}

}  // namespace

void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  Rng rng(sub_seed(spec.seed, seed_tag::synth));

  // Items partitioned into contiguous topic blocks.
  std::vector<std::vector<int>> topic_items(spec.n_clusters);
  for (int i = 0; i < spec.n_items; ++i) {
    topic_items[static_cast<size_t>(i) * spec.n_clusters / spec.n_items].push_back(i);
  }

  std::vector<std::vector<int>> user_topics(spec.n_users);
  for (int u = 0; u < spec.n_users; ++u) {
    const int k = std::min(1 + static_cast<int>(rng.next_index(3)), spec.n_clusters);
    std::vector<int> pool(spec.n_clusters);
    std::iota(pool.begin(), pool.end(), 0);
    for (int j = 0; j < k; ++j) std::swap(pool[j], pool[j + rng.next_index(pool.size() - j)]);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    user_topics[u] = std::move(pool);
  }

  std::ofstream ratings(fs::path(out_dir) / "ratings.tsv");
  if (!ratings) throw DataError("cannot write synthetic ratings");
  for (int u = 0; u < spec.n_users; ++u) {
    // Items still available from the user's own topics. Once this pool is
    // exhausted, remaining draws fall back to the uniform branch so the
    // target count is always reachable.
    std::vector<int> own_remaining;
    for (int t : user_topics[u]) {
      own_remaining.insert(own_remaining.end(), topic_items[t].begin(), topic_items[t].end());
    }
    std::unordered_set<int> chosen;
    std::vector<int> ordered;
    while (static_cast<int>(chosen.size()) < spec.interactions_per_user) {
      int item;
      if (rng.next_double() < 1.0 - spec.noise_rate && !own_remaining.empty()) {
        item = own_remaining[rng.next_index(own_remaining.size())];
      } else {
        do {
          item = static_cast<int>(rng.next_index(spec.n_items));
        } while (chosen.count(item) > 0);
      }
      if (chosen.insert(item).second) ordered.push_back(item);
      auto it = std::find(own_remaining.begin(), own_remaining.end(), item);
      if (it != own_remaining.end()) own_remaining.erase(it);
    }
    for (int item : ordered) {
      ratings << 'u' << u << '\t' << 'i' << item << "\t1\n";
    }
  }

  std::ofstream triples(fs::path(out_dir) / "kg_triples.tsv");
  std::ofstream projection(fs::path(out_dir) / "kg_projection.tsv");
  if (!triples || !projection) throw DataError("cannot write synthetic KG");
  for (int t = 0; t < spec.n_clusters; ++t) {
    for (int i : topic_items[t]) {
      triples << "ent_i" << i << "\tin_topic\tent_topic_" << t << '\n';
      projection << 'i' << i << "\tent_i" << i << '\n';
    }
  }

  std::ofstream fixtures(fs::path(out_dir) / "interests.jsonl");
  std::ofstream truth(fs::path(out_dir) / "truth.json");
  if (!fixtures || !truth) throw DataError("cannot write synthetic fixtures");
  ordered_json truth_json;
  for (int u = 0; u < spec.n_users; ++u) {
    ordered_json j;
    j["user"] = "u" + std::to_string(u);
    std::vector<std::string> phrases;
    for (int t : user_topics[u]) phrases.push_back(topic_word(t));
    j["interests"] = phrases;
    fixtures << j.dump() << '\n';
    truth_json["u" + std::to_string(u)] = user_topics[u];
  }
  truth << truth_json.dump(2) << '\n';
}

}  // namespace cikg
