#include "cikg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace cikg {

void TrainConfig::validate() const {
  if (lr < 1e-5 || lr > 1e-1) throw ConfigError("train.lr must be in [1e-5, 1e-1]");
  if (dim < 1) throw ConfigError("train.dim must be >= 1");
  if (layers < 2) throw ConfigError("train.layers must be >= 2 (encoder needs l-1 >= 1)");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (eval_interval < 1) throw ConfigError("train.eval_interval must be >= 1");
  if (neg_per_pos < 1) throw ConfigError("train.neg_per_pos must be >= 1");
  if (kg_alt_ratio < 0) throw ConfigError("train.kg_alt_ratio must be >= 0");
  schedule.validate();
  weights.validate();
}

TrainGraphs build_train_graphs(const InteractionSet& train, const TripleStore& kg,
                               const InterestAssignment& assignment, bool use_interest_edges,
                               bool use_kg_edges, bool kg_in_ranking_graph) {
  TrainGraphs g;
  const int kappa = use_interest_edges ? assignment.kappa : 0;
  auto table = std::make_shared<const NodeTable>(train, kg, kappa);
  auto relations = make_relation_vocab(kg);
  g.table = table;

  HeteroGraph cg = collaborative_graph(train, table, relations);
  HeteroGraph ig(table, relations);
  if (use_interest_edges) ig = interest_graph(assignment, table, relations);
  HeteroGraph kgg(table, relations);
  if (use_kg_edges) kgg = map_items_to_entities(kg, table, relations);

  HeteroGraph ranking = kg_in_ranking_graph ? build_cikg(cg, ig, kgg) : merge_graphs(cg, ig);
  g.ranking = normalize(ranking);
  g.view_cg = normalize(cg);
  g.view_v2 = normalize(merge_graphs(cg, ig));
  g.view_v3 = normalize(merge_graphs(cg, kgg));

  g.user_gids.resize(train.n_users);
  for (int u = 0; u < train.n_users; ++u) g.user_gids[u] = table->user_gid(u);
  g.item_gids.resize(train.n_items);
  for (int i = 0; i < train.n_items; ++i) g.item_gids[i] = table->item_gid(i);
  g.interest_gids.resize(kappa);
  for (int c = 0; c < kappa; ++c) g.interest_gids[c] = table->interest_gid(c);

  if (use_kg_edges) {
    g.kg_triples.reserve(kg.triples.size());
    for (const auto& t : kg.triples) {
      g.kg_triples.push_back({table->entity_gid(t[0]), t[1], table->entity_gid(t[2])});
    }
  }
  g.n_entity_nodes = table->n_entities() + table->n_unlinked_items();
  g.entity_gid_base = table->n_users();
  return g;
}

EmbeddingState init_embeddings(int n_nodes, int n_relations, int dim, uint64_t seed) {
  if (dim < 1) throw ConfigError("init_embeddings: dim must be >= 1");
  EmbeddingState s;
  s.dim = dim;
  Rng rng(sub_seed(seed, seed_tag::init));
  auto fill = [&rng](auto& m, double stddev) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * rng.next_normal();
    }
  };
  s.Z.resize(n_nodes, dim);
  fill(s.Z, 0.1);
  s.Zr.resize(n_relations, dim);
  fill(s.Zr, 0.1);
  s.z_mask.resize(dim);
  fill(s.z_mask, 0.1);
  s.proj_w.resize(dim, dim);
  fill(s.proj_w, 0.01);
  s.proj_w += Mat::Identity(dim, dim);
  s.proj_b.resize(dim);
  fill(s.proj_b, 0.1);
  return s;
}

std::vector<BprTriple> sample_bpr_triples(const InteractionSet& train,
                                          const std::vector<int>& user_gids,
                                          const std::vector<int>& item_gids, int neg_per_pos,
                                          uint64_t seed, std::vector<std::string>* warnings) {
  std::vector<std::unordered_set<int>> pos(train.n_users);
  for (int u = 0; u < train.n_users; ++u) {
    pos[u].insert(train.items_by_user[u].begin(), train.items_by_user[u].end());
  }

  Rng rng(seed);
  std::vector<BprTriple> triples;
  triples.reserve(train.edges.size() * static_cast<size_t>(neg_per_pos));
  for (const auto& [u, i] : train.edges) {
    if (static_cast<int>(pos[u].size()) >= train.n_items) {
      if (warnings) warnings->push_back("user " + train.user_raw[u] + " interacted with every item");
      continue;
    }
    for (int k = 0; k < neg_per_pos; ++k) {
      int neg = static_cast<int>(rng.next_index(train.n_items));
      while (pos[u].count(neg) > 0) neg = static_cast<int>(rng.next_index(train.n_items));
      triples.push_back({user_gids[u], item_gids[i], item_gids[neg]});
    }
  }
  return triples;
}

void Gradients::reset(const EmbeddingState& s) {
  g_z.setZero(s.Z.rows(), s.Z.cols());
  g_zr.setZero(s.Zr.rows(), s.Zr.cols());
  g_mask.setZero(s.z_mask.size());
  g_w.setZero(s.proj_w.rows(), s.proj_w.cols());
  g_b.setZero(s.proj_b.size());
}

double eval_bpr(const EmbeddingState& s, const NormalizedAdjacency& adj, int layers,
                const std::vector<BprTriple>& triples, double weight, Gradients* g) {
  Mat z_hat = propagate(s.Z, adj, layers);
  if (!g) return bpr_loss(z_hat, triples, nullptr);

  Mat g_hat = Mat::Zero(z_hat.rows(), z_hat.cols());
  const double loss = bpr_loss(z_hat, triples, &g_hat);
  // Propagation is self-adjoint: pull the gradient back through the same map.
  g->g_z += weight * propagate(g_hat, adj, layers);
  return loss;
}

double eval_reconstruction(const EmbeddingState& s, const NormalizedAdjacency& adj, int layers,
                           const std::vector<int>& masked, double eta, double weight, Gradients* g) {
  Mat z_prime = apply_mask(s.Z, masked, s.z_mask);
  Mat encoded;
  Mat z_recon = gmae_encode_decode(z_prime, adj, layers, s.proj_w, s.proj_b, &encoded);
  if (!g) return reconstruction_loss(s.Z, z_recon, masked, eta, nullptr, nullptr);

  Mat g_orig = Mat::Zero(s.Z.rows(), s.Z.cols());
  Mat g_recon = Mat::Zero(s.Z.rows(), s.Z.cols());
  const double loss = reconstruction_loss(s.Z, z_recon, masked, eta, &g_orig, &g_recon);

  Mat g_projected = propagate(g_recon, adj, 1);
  Mat g_encoded = g_projected * s.proj_w.transpose();
  g->g_w += weight * (encoded.transpose() * g_projected);
  g->g_b += weight * g_projected.colwise().sum();
  Mat g_masked_input = propagate(g_encoded, adj, layers - 1);

  Mat g_z_local = Mat::Zero(s.Z.rows(), s.Z.cols());
  RowVec g_mask_local = RowVec::Zero(s.z_mask.size());
  apply_mask_backward(g_masked_input, masked, g_z_local, g_mask_local);
  g_z_local += g_orig;  // direct dependence of the cosine target on Z

  g->g_z += weight * g_z_local;
  g->g_mask += weight * g_mask_local;
  return loss;
}

double eval_contrastive(const EmbeddingState& s, const TrainGraphs& graphs, int layers, double eps,
                        double tau, uint64_t noise_seed, double weight, Gradients* g,
                        const LayerNoise* replay, LayerNoise* record) {
  Mat zv1 = propagate_perturbed(s.Z, graphs.view_cg, layers, eps, noise_seed, record, replay);
  Mat zv2 = propagate(s.Z, graphs.view_v2, layers);
  Mat zv3 = propagate(s.Z, graphs.view_v3, layers);
  if (!g) {
    return contrastive_loss(zv1, zv2, zv3, graphs.user_gids, graphs.item_gids, tau);
  }

  Mat g1 = Mat::Zero(s.Z.rows(), s.Z.cols());
  Mat g2 = Mat::Zero(s.Z.rows(), s.Z.cols());
  Mat g3 = Mat::Zero(s.Z.rows(), s.Z.cols());
  const double loss =
      contrastive_loss(zv1, zv2, zv3, graphs.user_gids, graphs.item_gids, tau, &g1, &g2, &g3);
  // The noise is constant w.r.t. Z almost everywhere, so the perturbed view
  // backpropagates exactly like the unperturbed one.
  g->g_z += weight * propagate(g1, graphs.view_cg, layers);
  g->g_z += weight * propagate(g2, graphs.view_v2, layers);
  g->g_z += weight * propagate(g3, graphs.view_v3, layers);
  return loss;
}

double eval_transe(const EmbeddingState& s, const std::vector<TranseQuad>& quads, double weight,
                   Gradients* g) {
  if (!g) return transe_loss(s.Z, s.Zr, quads, nullptr, nullptr);
  Mat g_z = Mat::Zero(s.Z.rows(), s.Z.cols());
  Mat g_zr = Mat::Zero(s.Zr.rows(), s.Zr.cols());
  const double loss = transe_loss(s.Z, s.Zr, quads, &g_z, &g_zr);
  g->g_z += weight * g_z;
  g->g_zr += weight * g_zr;
  return loss;
}

std::vector<TranseQuad> sample_transe_quads(const TrainGraphs& graphs, uint64_t seed) {
  // Corrupted tails drawn uniformly from entity nodes, rejecting tails that
  // would recreate an observed triple.
  std::unordered_set<uint64_t> present;
  present.reserve(graphs.kg_triples.size() * 2);
  const uint64_t n = static_cast<uint64_t>(graphs.entity_gid_base) +
                     static_cast<uint64_t>(graphs.n_entity_nodes) + 1;
  uint64_t n_rel = 1;
  for (const auto& t : graphs.kg_triples) n_rel = std::max<uint64_t>(n_rel, t[1] + 1);
  auto key = [n, n_rel](int h, int r, int t) {
    return (static_cast<uint64_t>(h) * n + static_cast<uint64_t>(t)) * n_rel +
           static_cast<uint64_t>(r);
  };
  for (const auto& t : graphs.kg_triples) present.insert(key(t[0], t[1], t[2]));

  Rng rng(seed);
  std::vector<TranseQuad> quads;
  quads.reserve(graphs.kg_triples.size());
  for (const auto& t : graphs.kg_triples) {
    if (graphs.n_entity_nodes <= 1) break;
    int neg;
    int guard = 0;
    while (true) {
      neg = graphs.entity_gid_base + static_cast<int>(rng.next_index(graphs.n_entity_nodes));
      // After many rejections (a nearly complete relation row) settle for any
      // tail other than the true one.
      if (neg != t[2] && (guard > 1000 || present.count(key(t[0], t[1], neg)) == 0)) break;
      ++guard;
    }
    quads.push_back({t[0], t[1], t[2], neg});
  }
  return quads;
}

void Adam::step(std::vector<std::pair<double*, const double*>> blocks,
                const std::vector<Eigen::Index>& sizes, double lr) {
  if (m_.empty()) {
    m_.resize(blocks.size());
    v_.resize(blocks.size());
    for (size_t b = 0; b < blocks.size(); ++b) {
      m_[b].setZero(sizes[b]);
      v_[b].setZero(sizes[b]);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t b = 0; b < blocks.size(); ++b) {
    Eigen::Map<Eigen::VectorXd> p(blocks[b].first, sizes[b]);
    Eigen::Map<const Eigen::VectorXd> grad(blocks[b].second, sizes[b]);
    m_[b] = beta1_ * m_[b] + (1.0 - beta1_) * grad;
    v_[b] = beta2_ * v_[b] + (1.0 - beta2_) * grad.cwiseProduct(grad);
    p.array() -=
        lr * (m_[b].array() / bc1) / ((v_[b].array() / bc2).sqrt() + eps_);
  }
}

namespace {

std::vector<std::pair<double*, const double*>> main_blocks(EmbeddingState& s, const Gradients& g) {
  return {{s.Z.data(), g.g_z.data()},
          {s.z_mask.data(), g.g_mask.data()},
          {s.proj_w.data(), g.g_w.data()},
          {s.proj_b.data(), g.g_b.data()}};
}

std::vector<Eigen::Index> main_sizes(const EmbeddingState& s) {
  return {s.Z.size(), s.z_mask.size(), s.proj_w.size(), s.proj_b.size()};
}

void check_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("non-finite loss in term ") + term);
  }
}

}  // namespace

Trainer::Trainer(TrainConfig c, const TrainGraphs& g, const InteractionSet& tr)
    : cfg(std::move(c)), graphs(g), train(tr) {
  cfg.validate();
}

EpochReport Trainer::train_epoch(TrainState& state, int epoch, Adam& adam_main, Adam& adam_kg) {
  const auto t0 = std::chrono::steady_clock::now();
  EpochReport rep;
  rep.epoch = epoch;
  rep.mask_rate = schedule_mask_rate(cfg.schedule, epoch);

  EmbeddingState& s = state.embeddings;
  Gradients g;
  g.reset(s);

  if (cfg.weights.lambda1 > 0.0) {
    auto triples = sample_bpr_triples(train, graphs.user_gids, graphs.item_gids, cfg.neg_per_pos,
                                      sub_seed(cfg.seed, seed_tag::bpr, epoch));
    rep.loss_r = eval_bpr(s, graphs.ranking, cfg.layers, triples, cfg.weights.lambda1, &g);
    check_finite(rep.loss_r, "ranking");
  }
  if (cfg.weights.lambda2 > 0.0 && !graphs.interest_gids.empty()) {
    auto masked = sample_mask_set(graphs.interest_gids, rep.mask_rate,
                                  sub_seed(cfg.seed, seed_tag::mask, epoch));
    if (!masked.empty()) {
      rep.loss_u = eval_reconstruction(s, graphs.ranking, cfg.layers, masked, cfg.weights.eta,
                                       cfg.weights.lambda2, &g);
      check_finite(rep.loss_u, "reconstruction");
    }
  }
  if (cfg.weights.lambda3 > 0.0) {
    rep.loss_c = eval_contrastive(s, graphs, cfg.layers, cfg.weights.eps, cfg.weights.tau,
                                  sub_seed(cfg.seed, seed_tag::noise, epoch), cfg.weights.lambda3, &g);
    check_finite(rep.loss_c, "contrastive");
  }

  adam_main.step(main_blocks(s, g), main_sizes(s), cfg.lr);

  if (cfg.kg_alt_ratio > 0 && !graphs.kg_triples.empty()) {
    double total = 0.0;
    for (int j = 0; j < cfg.kg_alt_ratio; ++j) {
      auto quads = sample_transe_quads(graphs, sub_seed(cfg.seed, seed_tag::kg_neg, epoch, j));
      Gradients gk;
      gk.reset(s);
      const double lt = eval_transe(s, quads, 1.0, &gk);
      check_finite(lt, "translation");
      total += lt;
      adam_kg.step({{s.Z.data(), gk.g_z.data()}, {s.Zr.data(), gk.g_zr.data()}},
                   {s.Z.size(), s.Zr.size()}, cfg.lr);
    }
    rep.loss_t = total / cfg.kg_alt_ratio;
  }

  state.epoch = epoch;
  rep.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return rep;
}

std::vector<EpochReport> Trainer::fit(TrainState& state,
                                      const std::function<double(const EmbeddingState&)>& valid_eval) {
  Adam adam_main, adam_kg;
  std::vector<EpochReport> log;
  log.reserve(cfg.max_epochs);

  EmbeddingState best;
  bool have_best = false;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochReport rep = train_epoch(state, epoch, adam_main, adam_kg);
    if ((epoch + 1) % cfg.eval_interval == 0) {
      const double metric = valid_eval(state.embeddings);
      rep.valid_recall50 = metric;
      if (metric > state.best_valid_metric) {
        state.best_valid_metric = metric;
        state.best_epoch = epoch;
        state.evals_since_improvement = 0;
        best = state.embeddings;
        have_best = true;
      } else {
        ++state.evals_since_improvement;
      }
      log.push_back(rep);
      if (state.evals_since_improvement >= cfg.patience) break;
    } else {
      log.push_back(rep);
    }
  }
  if (have_best) state.embeddings = best;
  return log;
}

// -- gradient verification ----------------------------------------------------

namespace {

// A small but structurally complete instance: users, linked and unlinked
// items, extra entities, interests, and every edge type.
struct GradCheckInstance {
  InteractionSet train;
  TripleStore kg;
  InterestAssignment assignment;
  TrainGraphs graphs;
  EmbeddingState state;
  std::vector<BprTriple> triples;
  std::vector<int> masked;
  std::vector<TranseQuad> quads;
  int layers = 3;
};

GradCheckInstance make_instance(uint64_t seed) {
  GradCheckInstance inst;
  Rng rng(sub_seed(seed, seed_tag::probe));

  const int n_users = 4, n_items = 5;
  std::vector<std::pair<std::string, std::string>> edges;
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) {
      if (rng.next_double() < 0.5) edges.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    }
  }
  for (int u = 0; u < n_users; ++u) edges.emplace_back("u" + std::to_string(u), "i" + std::to_string(u % n_items));
  inst.train = build_interactions(edges, 1);

  inst.kg.item_entity.assign(inst.train.n_items, -1);
  auto add_entity = [&](const std::string& raw) {
    auto [it, fresh] = inst.kg.entity_id.try_emplace(raw, inst.kg.n_entities);
    if (fresh) {
      inst.kg.entity_raw.push_back(raw);
      ++inst.kg.n_entities;
    }
    return it->second;
  };
  // Link the first three items; two standalone tail entities.
  for (int i = 0; i < 3 && i < inst.train.n_items; ++i) {
    inst.kg.item_entity[i] = add_entity("e" + std::to_string(i));
  }
  const int t0 = add_entity("t0"), t1 = add_entity("t1");
  inst.kg.relation_id = {{"r0", 0}, {"r1", 1}};
  inst.kg.relation_raw = {"r0", "r1"};
  inst.kg.n_relations = 2;
  for (int i = 0; i < 3 && i < inst.train.n_items; ++i) {
    inst.kg.triples.push_back({inst.kg.item_entity[i], i % 2, i % 2 == 0 ? t0 : t1});
  }

  inst.assignment.kappa = 3;
  inst.assignment.representative = {"a", "b", "c"};
  inst.assignment.membership.assign(inst.train.n_users, {});
  for (int u = 0; u < inst.train.n_users; ++u) {
    inst.assignment.membership[u].push_back(u % 3);
    if (u == 0) inst.assignment.membership[u].push_back(1);
  }

  inst.graphs = build_train_graphs(inst.train, inst.kg, inst.assignment, true, true, true);
  inst.state = init_embeddings(inst.graphs.table->n_nodes(), inst.kg.n_relations + 2, 8,
                               sub_seed(seed, seed_tag::init));
  inst.triples = sample_bpr_triples(inst.train, inst.graphs.user_gids, inst.graphs.item_gids, 1,
                                    sub_seed(seed, seed_tag::bpr));
  inst.masked = sample_mask_set(inst.graphs.interest_gids, 0.6, sub_seed(seed, seed_tag::mask));
  inst.quads = sample_transe_quads(inst.graphs, sub_seed(seed, seed_tag::kg_neg));
  return inst;
}

struct ParamView {
  std::vector<double*> data;
  std::vector<Eigen::Index> sizes;

  Eigen::Index total() const {
    Eigen::Index t = 0;
    for (auto s : sizes) t += s;
    return t;
  }
  double& at(Eigen::Index flat) {
    for (size_t b = 0; b < data.size(); ++b) {
      if (flat < sizes[b]) return data[b][flat];
      flat -= sizes[b];
    }
    throw NumericError("parameter index out of range");
  }
};

ParamView view_params(EmbeddingState& s) {
  ParamView v;
  v.data = {s.Z.data(), s.Zr.data(), s.z_mask.data(), s.proj_w.data(), s.proj_b.data()};
  v.sizes = {s.Z.size(), s.Zr.size(), s.z_mask.size(), s.proj_w.size(), s.proj_b.size()};
  return v;
}

std::vector<double> flatten_grads(const Gradients& g) {
  std::vector<double> out;
  auto append = [&out](const double* p, Eigen::Index n) { out.insert(out.end(), p, p + n); };
  append(g.g_z.data(), g.g_z.size());
  append(g.g_zr.data(), g.g_zr.size());
  append(g.g_mask.data(), g.g_mask.size());
  append(g.g_w.data(), g.g_w.size());
  append(g.g_b.data(), g.g_b.size());
  return out;
}

}  // namespace

GradCheckReport gradient_check(const std::string& loss_id, uint64_t seed, double tol,
                               double corrupt_factor) {
  GradCheckInstance inst = make_instance(seed);
  EmbeddingState& s = inst.state;
  const uint64_t noise_seed = sub_seed(seed, seed_tag::noise);

  // Freeze the perturbed view's noise at the base point so every probe
  // evaluation differentiates the same deterministic function.
  LayerNoise frozen;
  if (loss_id == "contrastive") {
    eval_contrastive(s, inst.graphs, inst.layers, 0.1, 0.2, noise_seed, 1.0, nullptr, nullptr,
                     &frozen);
  }

  auto forward = [&](const EmbeddingState& state) -> double {
    if (loss_id == "bpr") return eval_bpr(state, inst.graphs.ranking, inst.layers, inst.triples, 1.0, nullptr);
    if (loss_id == "reconstruction") {
      return eval_reconstruction(state, inst.graphs.ranking, inst.layers, inst.masked, 2.0, 1.0,
                                 nullptr);
    }
    if (loss_id == "contrastive") {
      return eval_contrastive(state, inst.graphs, inst.layers, 0.1, 0.2, noise_seed, 1.0, nullptr,
                              &frozen);
    }
    if (loss_id == "transe") return eval_transe(state, inst.quads, 1.0, nullptr);
    if (loss_id == "quadratic") return 0.5 * state.Z.squaredNorm();
    throw ConfigError("gradient_check: unknown loss id '" + loss_id + "'");
  };

  Gradients g;
  g.reset(s);
  if (loss_id == "bpr") {
    eval_bpr(s, inst.graphs.ranking, inst.layers, inst.triples, 1.0, &g);
  } else if (loss_id == "reconstruction") {
    eval_reconstruction(s, inst.graphs.ranking, inst.layers, inst.masked, 2.0, 1.0, &g);
  } else if (loss_id == "contrastive") {
    eval_contrastive(s, inst.graphs, inst.layers, 0.1, 0.2, noise_seed, 1.0, &g, &frozen);
  } else if (loss_id == "transe") {
    eval_transe(s, inst.quads, 1.0, &g);
  } else if (loss_id == "quadratic") {
    g.g_z = s.Z;
  } else {
    throw ConfigError("gradient_check: unknown loss id '" + loss_id + "'");
  }
  std::vector<double> analytic = flatten_grads(g);
  if (corrupt_factor != 1.0) {
    for (double& a : analytic) a *= corrupt_factor;
  }

  ParamView params = view_params(s);
  const Eigen::Index total = params.total();

  double gmax = 0.0;
  for (double a : analytic) gmax = std::max(gmax, std::abs(a));
  const double denom_floor = 1e-6 * std::max(1.0, gmax);

  // 48 random coordinates plus the 16 largest analytic entries.
  Rng rng(sub_seed(seed, seed_tag::probe, 1));
  std::vector<Eigen::Index> probes;
  for (int k = 0; k < 48; ++k) probes.push_back(static_cast<Eigen::Index>(rng.next_index(total)));
  std::vector<Eigen::Index> order(total);
  for (Eigen::Index i = 0; i < total; ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + std::min<Eigen::Index>(16, total), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return std::abs(analytic[a]) > std::abs(analytic[b]);
                    });
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(16, total); ++i) probes.push_back(order[i]);

  // The quadratic sanity loss has no truncation error, so a larger step
  // only reduces the summation roundoff; the pipeline losses use the
  // documented 1e-4 step.
  const double h = loss_id == "quadratic" ? 1e-2 : 1e-4;
  GradCheckReport rep;
  rep.loss_id = loss_id;
  for (Eigen::Index idx : probes) {
    double& slot = params.at(idx);
    const double saved = slot;
    slot = saved + h;
    const double up = forward(s);
    slot = saved - h;
    const double down = forward(s);
    slot = saved;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic[idx];
    const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), denom_floor});
    rep.max_rel_error = std::max(rep.max_rel_error, err);
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

// -- checkpoint I/O -----------------------------------------------------------

namespace {
void write_raw(std::ofstream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void read_raw(std::ifstream& in, double* p, Eigen::Index n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("checkpoint truncated");
}
}  // namespace

void save_checkpoint(const EmbeddingState& s, int epoch, uint64_t seed, int layers,
                     const std::string& path) {
  nlohmann::ordered_json manifest;
  manifest["n_nodes"] = s.Z.rows();
  manifest["n_relations"] = s.Zr.rows();
  manifest["dim"] = s.dim;
  manifest["layers"] = layers;
  manifest["epoch"] = epoch;
  manifest["seed"] = seed;
  manifest["order"] = {"Z", "Zr", "z_mask", "proj_w", "proj_b"};
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  const uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_raw(out, s.Z.data(), s.Z.size());
  write_raw(out, s.Zr.data(), s.Zr.size());
  write_raw(out, s.z_mask.data(), s.z_mask.size());
  write_raw(out, s.proj_w.data(), s.proj_w.size());
  write_raw(out, s.proj_b.data(), s.proj_b.size());
}

EmbeddingState load_checkpoint(const std::string& path, int* epoch, uint64_t* seed, int* layers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 20)) throw DataError("corrupt checkpoint header in " + path);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  auto manifest = nlohmann::json::parse(header, nullptr, false);
  if (manifest.is_discarded()) throw DataError("corrupt checkpoint manifest in " + path);

  EmbeddingState s;
  const Eigen::Index n_nodes = manifest.at("n_nodes").get<Eigen::Index>();
  const Eigen::Index n_rel = manifest.at("n_relations").get<Eigen::Index>();
  s.dim = manifest.at("dim").get<int>();
  if (epoch) *epoch = manifest.at("epoch").get<int>();
  if (seed) *seed = manifest.at("seed").get<uint64_t>();
  if (layers) *layers = manifest.at("layers").get<int>();

  s.Z.resize(n_nodes, s.dim);
  s.Zr.resize(n_rel, s.dim);
  s.z_mask.resize(s.dim);
  s.proj_w.resize(s.dim, s.dim);
  s.proj_b.resize(s.dim);
  read_raw(in, s.Z.data(), s.Z.size());
  read_raw(in, s.Zr.data(), s.Zr.size());
  read_raw(in, s.z_mask.data(), s.z_mask.size());
  read_raw(in, s.proj_w.data(), s.proj_w.size());
  read_raw(in, s.proj_b.data(), s.proj_b.size());
  return s;
}

void write_train_log(const std::vector<EpochReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["p_q"] = r.mask_rate;
    j["loss_r"] = r.loss_r;
    j["loss_u"] = r.loss_u;
    j["loss_c"] = r.loss_c;
    j["loss_t"] = r.loss_t;
    if (r.valid_recall50) {
      j["valid_recall50"] = *r.valid_recall50;
    } else {
      j["valid_recall50"] = nullptr;
    }
    j["elapsed_ms"] = r.elapsed_ms;
    out << j.dump() << '\n';
  }
}

}  // namespace cikg
