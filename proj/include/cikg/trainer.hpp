#pragma once

// Joint training loop: full-batch gradients of the weighted main loss
// (ranking + reconstruction + contrastive), alternating translation steps on
// the KG triples, Adam updates, early stopping on validation Recall@50, and
// the finite-difference harness that certifies every backward pass.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cikg/data.hpp"
#include "cikg/graph.hpp"
#include "cikg/objectives.hpp"

namespace cikg {

struct TrainConfig {
  double lr = 0.01;
  int dim = 64;
  int layers = 3;
  int max_epochs = 2000;
  int patience = 20;
  int eval_interval = 1;
  uint64_t seed = 1;
  int neg_per_pos = 1;
  int kg_alt_ratio = 1;  // translation steps per main step
  MaskSchedule schedule;
  LossWeights weights;

  void validate() const;
};

// Prebuilt graph structure shared by every epoch.
struct TrainGraphs {
  std::shared_ptr<const NodeTable> table;
  NormalizedAdjacency ranking;  // unified graph used for Z_hat and reconstruction
  NormalizedAdjacency view_cg;
  NormalizedAdjacency view_v2;  // collaborative + interest edges
  NormalizedAdjacency view_v3;  // collaborative + mapped KG edges
  std::vector<int> user_gids;
  std::vector<int> item_gids;
  std::vector<int> interest_gids;
  std::vector<std::array<int, 3>> kg_triples;  // (head gid, relation, tail gid)
  int n_entity_nodes = 0;                      // candidate pool for corrupted tails
  int entity_gid_base = 0;
};

TrainGraphs build_train_graphs(const InteractionSet& train, const TripleStore& kg,
                               const InterestAssignment& assignment, bool use_interest_edges,
                               bool use_kg_edges, bool kg_in_ranking_graph);

struct EpochReport {
  int epoch = 0;
  double mask_rate = 0.0;
  double loss_r = 0.0;
  double loss_u = 0.0;
  double loss_c = 0.0;
  double loss_t = 0.0;
  std::optional<double> valid_recall50;
  int64_t elapsed_ms = 0;
};

struct TrainState {
  EmbeddingState embeddings;
  int epoch = 0;
  double best_valid_metric = -1.0;
  int best_epoch = -1;
  int evals_since_improvement = 0;
};

// Gaussian(0, 0.1) entries; projection weight is identity + Gaussian(0, 0.01).
EmbeddingState init_embeddings(int n_nodes, int n_relations, int dim, uint64_t seed);

std::vector<BprTriple> sample_bpr_triples(const InteractionSet& train,
                                          const std::vector<int>& user_gids,
                                          const std::vector<int>& item_gids, int neg_per_pos,
                                          uint64_t seed, std::vector<std::string>* warnings = nullptr);

// Parameter gradients mirroring EmbeddingState.
struct Gradients {
  Mat g_z;
  Mat g_zr;
  RowVec g_mask;
  Mat g_w;
  RowVec g_b;

  void reset(const EmbeddingState& s);
};

// Loss evaluators pair a forward value with exact backward accumulation.
double eval_bpr(const EmbeddingState& s, const NormalizedAdjacency& adj, int layers,
                const std::vector<BprTriple>& triples, double weight, Gradients* g);

double eval_reconstruction(const EmbeddingState& s, const NormalizedAdjacency& adj, int layers,
                           const std::vector<int>& masked, double eta, double weight, Gradients* g);

double eval_contrastive(const EmbeddingState& s, const TrainGraphs& graphs, int layers, double eps,
                        double tau, uint64_t noise_seed, double weight, Gradients* g,
                        const LayerNoise* replay = nullptr, LayerNoise* record = nullptr);

double eval_transe(const EmbeddingState& s, const std::vector<TranseQuad>& quads, double weight,
                   Gradients* g);

std::vector<TranseQuad> sample_transe_quads(const TrainGraphs& graphs, uint64_t seed);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one step to params -= lr * m_hat / (sqrt(v_hat) + eps).
  // Blocks are identified by order; the set must be stable across calls.
  void step(std::vector<std::pair<double*, const double*>> blocks,
            const std::vector<Eigen::Index>& sizes, double lr);

 private:
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

struct Trainer {
  TrainConfig cfg;
  const TrainGraphs& graphs;
  const InteractionSet& train;

  Trainer(TrainConfig c, const TrainGraphs& g, const InteractionSet& tr);

  EpochReport train_epoch(TrainState& state, int epoch, Adam& adam_main, Adam& adam_kg);

  // Runs up to max_epochs with early stopping on validation Recall@50 and
  // restores the best checkpoint. valid_eval returns the metric for the
  // current embeddings.
  std::vector<EpochReport> fit(TrainState& state,
                               const std::function<double(const EmbeddingState&)>& valid_eval);
};

// -- gradient verification ---------------------------------------------------

struct GradCheckReport {
  std::string loss_id;
  double max_rel_error = 0.0;
  bool pass = false;
};

// Compares analytic gradients of the named loss ("bpr", "reconstruction",
// "contrastive", "transe", or "quadratic") against central finite
// differences on a small random instance. The perturbed view's noise is
// recorded at the base point and replayed for every probe evaluation, so the
// differentiated function is the loss at a fixed noise realization.
GradCheckReport gradient_check(const std::string& loss_id, uint64_t seed, double tol,
                               double corrupt_factor = 1.0);

// Serializes manifest JSON (length-prefixed) followed by raw little-endian
// doubles in the order Z, Zr, z_mask, proj_w, proj_b.
void save_checkpoint(const EmbeddingState& s, int epoch, uint64_t seed, int layers,
                     const std::string& path);
EmbeddingState load_checkpoint(const std::string& path, int* epoch = nullptr,
                               uint64_t* seed = nullptr, int* layers = nullptr);

void write_train_log(const std::vector<EpochReport>& reports, const std::string& path);

}  // namespace cikg
