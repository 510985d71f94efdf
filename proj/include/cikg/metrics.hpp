#pragma once

// Top-K ranking and retrieval metrics over propagated embeddings, with the
// four-bucket sparsity breakdown.

#include <map>
#include <string>
#include <vector>

#include "cikg/data.hpp"
#include "cikg/encoder.hpp"

namespace cikg {

struct RankedList {
  int user = -1;
  std::vector<int> items;  // item dense ids, best first
  int k = 0;
};

struct GroupStats {
  double ndcg50 = 0.0;
  int n_users = 0;
};

struct MetricReport {
  std::map<int, double> recall;  // K -> mean
  std::map<int, double> ndcg;
  std::map<int, std::vector<double>> per_user_recall;  // aligned with eval_users
  std::map<int, std::vector<double>> per_user_ndcg;
  std::vector<int> eval_users;
  std::array<GroupStats, 4> groups;  // sparse -> dense
  int n_eval_users = 0;
};

// Scores z_u . z_i over items not in train_items; ties broken by ascending
// item id. Length min(K, eligible items).
RankedList rank_items(const Mat& z_hat, int user_gid, int user,
                      const std::vector<int>& item_gids, const std::vector<int>& train_items,
                      int k);

double recall_at_k(const RankedList& ranked, const std::vector<int>& test_items);

// Binary-gain DCG with 1-indexed positions; IDCG over min(K, |test|).
double ndcg_at_k(const RankedList& ranked, const std::vector<int>& test_items);

// Equal-user-count quantiles by train interaction count (remainder to the
// sparser buckets), ties broken by user id. Returns per-user group in [0, 4).
std::vector<int> sparsity_groups(const InteractionSet& train, int n_groups = 4);

MetricReport evaluate(const Mat& z_hat, const std::vector<int>& user_gids,
                      const std::vector<int>& item_gids, const InteractionSet& train,
                      const InteractionSet& test, const std::vector<int>& ks);

// Mean Recall@K over users with ground-truth items; used for validation
// monitoring during training.
double mean_recall_at_k(const Mat& z_hat, const std::vector<int>& user_gids,
                        const std::vector<int>& item_gids, const InteractionSet& train,
                        const InteractionSet& truth, int k);

std::string metric_report_json(const MetricReport& report);

}  // namespace cikg
