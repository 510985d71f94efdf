#include "cikg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

namespace cikg {

RankedList rank_items(const Mat& z_hat, int user_gid, int user,
                      const std::vector<int>& item_gids, const std::vector<int>& train_items,
                      int k) {
  if (k < 1) throw ConfigError("rank_items: K must be >= 1");
  RankedList out;
  out.user = user;
  out.k = k;

  std::unordered_set<int> excluded(train_items.begin(), train_items.end());
  const int n_items = static_cast<int>(item_gids.size());
  std::vector<std::pair<double, int>> scored;
  scored.reserve(n_items);
  const RowVec zu = z_hat.row(user_gid);
  for (int i = 0; i < n_items; ++i) {
    if (excluded.count(i)) continue;
    scored.emplace_back(zu.dot(z_hat.row(item_gids[i])), i);
  }
  const size_t take = std::min<size_t>(static_cast<size_t>(k), scored.size());
  auto better = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  out.items.reserve(take);
  for (size_t p = 0; p < take; ++p) out.items.push_back(scored[p].second);
  return out;
}

double recall_at_k(const RankedList& ranked, const std::vector<int>& test_items) {
  if (test_items.empty()) throw ConfigError("recall_at_k: empty test set");
  std::unordered_set<int> test(test_items.begin(), test_items.end());
  int hits = 0;
  for (int item : ranked.items) hits += test.count(item) > 0;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double ndcg_at_k(const RankedList& ranked, const std::vector<int>& test_items) {
  if (test_items.empty()) throw ConfigError("ndcg_at_k: empty test set");
  std::unordered_set<int> test(test_items.begin(), test_items.end());
  double dcg = 0.0;
  for (size_t p = 0; p < ranked.items.size(); ++p) {
    if (test.count(ranked.items[p])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  const size_t ideal = std::min<size_t>(static_cast<size_t>(ranked.k), test.size());
  double idcg = 0.0;
  for (size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

std::vector<int> sparsity_groups(const InteractionSet& train, int n_groups) {
  const int n = train.n_users;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&train](int a, int b) {
    return train.items_by_user[a].size() < train.items_by_user[b].size();
  });

  std::vector<int> group(n, 0);
  const int base = n / n_groups;
  const int rem = n % n_groups;
  int cursor = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int size = base + (g < rem ? 1 : 0);
    for (int j = 0; j < size; ++j) group[order[cursor++]] = g;
  }
  return group;
}

MetricReport evaluate(const Mat& z_hat, const std::vector<int>& user_gids,
                      const std::vector<int>& item_gids, const InteractionSet& train,
                      const InteractionSet& test, const std::vector<int>& ks) {
  MetricReport rep;
  const std::vector<int> groups = sparsity_groups(train);
  const int max_k = *std::max_element(ks.begin(), ks.end());

  std::array<double, 4> group_sum{};
  std::array<int, 4> group_count{};

  for (int u = 0; u < train.n_users; ++u) {
    const auto& test_items = test.items_by_user[u];
    if (test_items.empty()) continue;
    rep.eval_users.push_back(u);
    RankedList full = rank_items(z_hat, user_gids[u], u, item_gids, train.items_by_user[u], max_k);
    for (int k : ks) {
      RankedList prefix;
      prefix.user = u;
      prefix.k = k;
      prefix.items.assign(full.items.begin(),
                          full.items.begin() + std::min<size_t>(k, full.items.size()));
      rep.per_user_recall[k].push_back(recall_at_k(prefix, test_items));
      rep.per_user_ndcg[k].push_back(ndcg_at_k(prefix, test_items));
      if (k == 50) {
        group_sum[groups[u]] += rep.per_user_ndcg[k].back();
        ++group_count[groups[u]];
      }
    }
  }
  rep.n_eval_users = static_cast<int>(rep.eval_users.size());
  if (rep.n_eval_users == 0) throw DataError("evaluate: no users with test interactions");

  for (int k : ks) {
    const auto& r = rep.per_user_recall[k];
    const auto& n = rep.per_user_ndcg[k];
    rep.recall[k] = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
    rep.ndcg[k] = std::accumulate(n.begin(), n.end(), 0.0) / n.size();
  }
  for (int g = 0; g < 4; ++g) {
    rep.groups[g].n_users = group_count[g];
    rep.groups[g].ndcg50 = group_count[g] > 0 ? group_sum[g] / group_count[g] : 0.0;
  }
  return rep;
}

double mean_recall_at_k(const Mat& z_hat, const std::vector<int>& user_gids,
                        const std::vector<int>& item_gids, const InteractionSet& train,
                        const InteractionSet& truth, int k) {
  double sum = 0.0;
  int count = 0;
  for (int u = 0; u < train.n_users; ++u) {
    const auto& items = truth.items_by_user[u];
    if (items.empty()) continue;
    RankedList ranked = rank_items(z_hat, user_gids[u], u, item_gids, train.items_by_user[u], k);
    sum += recall_at_k(ranked, items);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : report.recall) j["recall"][std::to_string(k)] = v;
  for (const auto& [k, v] : report.ndcg) j["ndcg"][std::to_string(k)] = v;
  for (int g = 0; g < 4; ++g) {
    j["groups"]["g" + std::to_string(g + 1)] = {{"ndcg50", report.groups[g].ndcg50},
                                                {"n_users", report.groups[g].n_users}};
  }
  j["n_eval_users"] = report.n_eval_users;
  return j.dump(2) + "\n";
}

}  // namespace cikg
