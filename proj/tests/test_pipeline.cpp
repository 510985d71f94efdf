#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cikg/pipeline.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cikg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tiny synthetic workspace with config wired to it.
RunConfig synth_workspace(const fs::path& dir, int n_users = 40, int n_items = 30,
                          int n_clusters = 5, int per_user = 8) {
  SyntheticSpec spec;
  spec.n_users = n_users;
  spec.n_items = n_items;
  spec.n_clusters = n_clusters;
  spec.interactions_per_user = per_user;
  spec.noise_rate = 0.2;
  spec.seed = 7;
  generate_synthetic(spec, (dir / "data").string());

  RunConfig cfg = default_config();
  cfg.out = (dir / "out").string();
  cfg.dataset.ratings = (dir / "data" / "ratings.tsv").string();
  cfg.dataset.kg_triples = (dir / "data" / "kg_triples.tsv").string();
  cfg.dataset.kg_projection = (dir / "data" / "kg_projection.tsv").string();
  cfg.dataset.min_user_freq = 1;
  cfg.llm.mode = "fixture";
  cfg.llm.fixture_path = (dir / "data" / "interests.jsonl").string();
  cfg.cluster.kappa = n_clusters;
  cfg.train.dim = 8;
  cfg.train.layers = 3;
  cfg.train.lr = 0.05;
  cfg.train.max_epochs = 8;
  cfg.train.patience = 8;
  cfg.train.eval_interval = 4;
  cfg.train.schedule.alpha = 0.1;
  cfg.train.schedule.omega = 0.9;
  cfg.train.schedule.lambda_cap = 6;
  return cfg;
}

}  // namespace

TEST_CASE("config json round-trips and overrides apply") {
  RunConfig cfg = default_config();
  cfg.train.lr = 0.002;
  cfg.dataset.ratings = "somewhere.tsv";
  RunConfig back = parse_config_json(config_to_json(cfg));
  CHECK(back.train.lr == 0.002);
  CHECK(back.dataset.ratings == "somewhere.tsv");
  CHECK(back.llm.prompt.user_text_template == cfg.llm.prompt.user_text_template);

  apply_config_override(back, "train.lr", "0.005");
  CHECK(back.train.lr == 0.005);
  apply_config_override(back, "llm.mode", "live");
  CHECK(back.llm.mode == "live");
  apply_config_override(back, "train.schedule.strategy", "linear");
  CHECK(back.train.schedule.strategy == MaskStrategy::linear);
  apply_config_override(back, "split.ratios", "[0.8,0.1,0.1]");
  CHECK(back.split.ratios[0] == 0.8);

  CHECK_THROWS_AS(parse_config_json("not json"), ConfigError);
}

TEST_CASE("validation reports missing paths before any output is written") {
  const fs::path dir = fresh_dir("cikg_validate");
  RunConfig cfg = default_config();
  cfg.out = (dir / "out").string();
  cfg.dataset.ratings = (dir / "nope.tsv").string();
  try {
    run_ingest(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nope.tsv") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(cfg.out));

  cfg.variant = "mystery";
  CHECK_THROWS_AS(validate_config(cfg, "train"), ConfigError);
}

TEST_CASE("synthetic generation is deterministic and respects noise") {
  const fs::path dir = fresh_dir("cikg_synth");
  SyntheticSpec spec;
  spec.n_users = 50;
  spec.n_items = 40;
  spec.n_clusters = 8;
  spec.interactions_per_user = 4;  // within every topic block, so noise 0 is attainable
  spec.noise_rate = 0.0;
  spec.seed = 3;
  generate_synthetic(spec, (dir / "a").string());
  generate_synthetic(spec, (dir / "b").string());
  CHECK(slurp(dir / "a" / "ratings.tsv") == slurp(dir / "b" / "ratings.tsv"));
  CHECK(slurp(dir / "a" / "interests.jsonl") == slurp(dir / "b" / "interests.jsonl"));

  // noise 0: every interaction's item belongs to one of the user's topics.
  auto truth = nlohmann::json::parse(slurp(dir / "a" / "truth.json"));
  std::map<std::string, std::set<int>> topics;
  for (const auto& [user, list] : truth.items()) {
    for (const auto& t : list) topics[user].insert(t.get<int>());
  }
  std::istringstream ratings(slurp(dir / "a" / "ratings.tsv"));
  std::string line;
  while (std::getline(ratings, line)) {
    const auto cols = split_tabs(line);
    REQUIRE(cols.size() >= 2);
    const int item = std::stoi(cols[1].substr(1));
    const int topic = static_cast<int>(static_cast<size_t>(item) * spec.n_clusters / spec.n_items);
    CHECK(topics[cols[0]].count(topic) == 1);
  }
}

TEST_CASE("synthetic in-topic fraction tracks the noise rate") {
  const fs::path dir = fresh_dir("cikg_synth_noise");
  SyntheticSpec spec;
  spec.n_users = 400;
  spec.n_items = 200;
  spec.n_clusters = 10;
  spec.interactions_per_user = 5;  // shallow draws keep pool depletion negligible
  spec.noise_rate = 0.3;
  spec.seed = 11;
  generate_synthetic(spec, dir.string());

  auto truth = nlohmann::json::parse(slurp(dir / "truth.json"));
  std::map<std::string, std::set<int>> topics;
  double topic_share = 0.0;
  for (const auto& [user, list] : truth.items()) {
    for (const auto& t : list) topics[user].insert(t.get<int>());
    topic_share += static_cast<double>(topics[user].size()) / spec.n_clusters;
  }
  topic_share /= spec.n_users;

  std::istringstream ratings(slurp(dir / "ratings.tsv"));
  std::string line;
  int in_topic = 0, total = 0;
  while (std::getline(ratings, line)) {
    const auto cols = split_tabs(line);
    const int item = std::stoi(cols[1].substr(1));
    const int topic = static_cast<int>(static_cast<size_t>(item) * spec.n_clusters / spec.n_items);
    in_topic += topics[cols[0]].count(topic) > 0;
    ++total;
  }
  // Expected fraction before dedup-resampling: (1 - noise) + noise * share.
  const double expect = (1.0 - spec.noise_rate) + spec.noise_rate * topic_share;
  const double got = static_cast<double>(in_topic) / total;
  CHECK(std::abs(got - expect) < 0.05);
}

TEST_CASE("variant plans transform the configuration") {
  TrainConfig base;
  base.weights.lambda2 = 0.3;
  base.weights.lambda3 = 0.4;
  base.kg_alt_ratio = 2;

  VariantPlan wo_uir = plan_variant("wo_uir", base);
  CHECK(wo_uir.train.weights.lambda2 == 0.0);
  CHECK(wo_uir.train.weights.lambda3 == 0.4);
  CHECK(wo_uir.use_interest_edges);

  VariantPlan wo_dmr = plan_variant("wo_dmr", base);
  CHECK(wo_dmr.train.schedule.strategy == MaskStrategy::constant);
  CHECK(schedule_mask_rate(wo_dmr.train.schedule, 0) == wo_dmr.train.schedule.omega);

  VariantPlan wo_uik = plan_variant("wo_uik", base);
  CHECK_FALSE(wo_uik.use_interest_edges);
  CHECK(wo_uik.use_kg_edges);

  VariantPlan aux_cg = plan_variant("aux_cg", base);
  CHECK_FALSE(aux_cg.use_interest_edges);
  CHECK_FALSE(aux_cg.use_kg_edges);
  CHECK(aux_cg.train.weights.lambda2 == 0.0);
  CHECK(aux_cg.train.weights.lambda3 == 0.0);
  CHECK(aux_cg.train.kg_alt_ratio == 0);

  VariantPlan aux_cig = plan_variant("aux_cig", base);
  CHECK(aux_cig.use_interest_edges);
  CHECK_FALSE(aux_cig.use_kg_edges);
}

TEST_CASE("the full pipeline produces every declared artifact") {
  const fs::path dir = fresh_dir("cikg_pipeline");
  RunConfig cfg = synth_workspace(dir);
  run_pipeline(cfg);

  for (const char* name :
       {"stats.json", "interests.jsonl", "interest_cluster.tsv", "user_interest.tsv", "graph.tsv",
        "nodes.tsv", "train_log.jsonl", "embeddings.tsv", "manifest.json", "metrics.json"}) {
    INFO(name);
    CHECK(fs::exists(fs::path(cfg.out) / name));
  }

  auto manifest = nlohmann::json::parse(slurp(fs::path(cfg.out) / "manifest.json"));
  CHECK(fs::exists(fs::path(cfg.out) / manifest.at("checkpoint_file").get<std::string>()));

  auto metrics = nlohmann::json::parse(slurp(fs::path(cfg.out) / "metrics.json"));
  CHECK(metrics.contains("recall"));
  CHECK(metrics["recall"].contains("50"));
  CHECK(metrics.contains("groups"));
  CHECK(metrics["n_eval_users"].get<int>() > 0);

  // stats.json reflects the generated dataset.
  auto stats = nlohmann::json::parse(slurp(fs::path(cfg.out) / "stats.json"));
  CHECK(stats["n_users"].get<int>() == 40);
  CHECK(stats["n_items"].get<int>() == 30);

  // The train log holds one record per epoch with the mask rate sequence.
  std::istringstream log(slurp(fs::path(cfg.out) / "train_log.jsonl"));
  std::string line;
  int epochs = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["epoch"].get<int>() == epochs);
    CHECK(j["p_q"].get<double>() ==
          schedule_mask_rate(cfg.train.schedule, j["epoch"].get<int>()));
    ++epochs;
  }
  CHECK(epochs <= cfg.train.max_epochs);
}

TEST_CASE("pipeline reruns are byte-identical") {
  const fs::path dir = fresh_dir("cikg_pipeline_det");
  RunConfig cfg = synth_workspace(dir, 25, 20, 4, 6);
  cfg.train.max_epochs = 6;
  run_pipeline(cfg);
  const std::string metrics1 = slurp(fs::path(cfg.out) / "metrics.json");
  const std::string embeddings1 = slurp(fs::path(cfg.out) / "embeddings.tsv");

  RunConfig cfg2 = cfg;
  cfg2.out = (dir / "out2").string();
  run_pipeline(cfg2);
  CHECK(slurp(fs::path(cfg2.out) / "metrics.json") == metrics1);
  CHECK(slurp(fs::path(cfg2.out) / "embeddings.tsv") == embeddings1);
}

TEST_CASE("schedule preview emits both strategies") {
  const fs::path dir = fresh_dir("cikg_sched");
  RunConfig cfg = default_config();
  cfg.out = (dir / "out").string();
  cfg.train.schedule.alpha = 0.02;
  cfg.train.schedule.omega = 0.95;
  cfg.train.schedule.lambda_cap = 150;
  std::ostringstream echo;
  run_schedule_preview(cfg, &echo);

  std::istringstream in(slurp(fs::path(cfg.out) / "schedule.tsv"));
  std::string line;
  int rows = 0;
  double prev_lin = -1.0, prev_exp = -1.0;
  while (std::getline(in, line)) {
    const auto cols = split_tabs(line);
    REQUIRE(cols.size() == 3);
    CHECK(std::stoi(cols[0]) == rows);
    const double lin = std::stod(cols[1]);
    const double expo = std::stod(cols[2]);
    CHECK(lin >= prev_lin);
    CHECK(expo >= prev_exp);
    if (rows > 0 && rows < 150) CHECK(expo < lin);
    prev_lin = lin;
    prev_exp = expo;
    ++rows;
  }
  CHECK(rows == 151);
  CHECK(echo.str() == slurp(fs::path(cfg.out) / "schedule.tsv"));
}

TEST_CASE("ablate covers the whole grid") {
  const fs::path dir = fresh_dir("cikg_ablate_smoke");
  RunConfig cfg = synth_workspace(dir, 30, 24, 4, 6);
  cfg.train.max_epochs = 4;
  cfg.train.eval_interval = 2;
  cfg.train.patience = 2;
  cfg.ablate_seeds = {1, 2};
  run_interests(cfg);
  run_ablate(cfg);

  std::istringstream in(slurp(fs::path(cfg.out) / "ablation.tsv"));
  std::string line;
  std::map<std::string, std::set<std::string>> metrics_by_variant;
  while (std::getline(in, line)) {
    auto cols = split_tabs(line);
    REQUIRE(cols.size() == 4);
    metrics_by_variant[cols[0]].insert(cols[1]);
    const double mean = std::stod(cols[2]);
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
  }
  CHECK(metrics_by_variant.size() == kKnownVariants.size());
  for (const auto& v : kKnownVariants) {
    INFO(v);
    CHECK(metrics_by_variant.at(v).count("recall@50") == 1);
    CHECK(metrics_by_variant.at(v).count("ndcg@100") == 1);
  }
}

TEST_CASE("gradcheck stage writes a report") {
  const fs::path dir = fresh_dir("cikg_gradcheck_stage");
  RunConfig cfg = default_config();
  cfg.out = (dir / "out").string();
  std::ostringstream echo;
  run_gradcheck(cfg, &echo);
  auto j = nlohmann::json::parse(slurp(fs::path(cfg.out) / "gradcheck.json"));
  CHECK(j.is_array());
  CHECK(j.size() == 25);  // 5 losses x 5 seeds
  for (const auto& row : j) CHECK(row["pass"].get<bool>());
  CHECK(echo.str().find("pass") != std::string::npos);
}
