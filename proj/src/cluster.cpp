#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cikg/interests.hpp"

namespace cikg {

namespace {

std::vector<std::string> tokenize(const std::string& phrase) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : to_lower(phrase) + " ") {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      if (cur.size() >= 2) tokens.push_back(cur);
      cur.clear();
    }
  }
  return tokens;
}

// Sparse L2-normalized tf-idf row: sorted (term, weight) pairs.
using SparseVec = std::vector<std::pair<int, double>>;

double dot_sparse_dense(const SparseVec& a, const std::vector<double>& b) {
  double s = 0.0;
  for (const auto& [idx, w] : a) s += w * b[idx];
  return s;
}

}  // namespace

InterestAssignment cluster_interests(const InterestCorpus& corpus, int kappa, uint64_t seed) {
  if (kappa < 1) throw ConfigError("cluster_interests: kappa must be >= 1");

  // Distinct phrases in first-appearance order (user order, then list order).
  std::vector<std::string> phrases;
  std::unordered_map<std::string, int> phrase_index;
  for (const auto& list : corpus.per_user) {
    for (const auto& p : list) {
      if (phrase_index.try_emplace(p, static_cast<int>(phrases.size())).second) {
        phrases.push_back(p);
      }
    }
  }
  if (phrases.empty()) throw DataError("cluster_interests: corpus has no phrases");

  InterestAssignment out;
  if (kappa > static_cast<int>(phrases.size())) {
    out.warnings.push_back("kappa " + std::to_string(kappa) + " clamped to " +
                           std::to_string(phrases.size()) + " distinct phrases");
    kappa = static_cast<int>(phrases.size());
  }
  out.kappa = kappa;

  // tf-idf with smoothed idf: ln((1+N)/(1+df)) + 1.
  std::unordered_map<std::string, int> term_index;
  std::vector<int> df;
  std::vector<std::vector<std::pair<int, int>>> counts(phrases.size());
  for (size_t d = 0; d < phrases.size(); ++d) {
    std::map<std::string, int> tally;
    for (const auto& t : tokenize(phrases[d])) ++tally[t];
    for (const auto& [term, count] : tally) {
      auto [it, fresh] = term_index.try_emplace(term, static_cast<int>(df.size()));
      if (fresh) df.push_back(0);
      ++df[it->second];
      counts[d].emplace_back(it->second, count);
    }
  }
  const double n_docs = static_cast<double>(phrases.size());
  std::vector<SparseVec> vecs(phrases.size());
  for (size_t d = 0; d < phrases.size(); ++d) {
    double norm2 = 0.0;
    for (const auto& [term, count] : counts[d]) {
      const double w = count * (std::log((1.0 + n_docs) / (1.0 + df[term])) + 1.0);
      vecs[d].emplace_back(term, w);
      norm2 += w * w;
    }
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (auto& [term, w] : vecs[d]) w *= inv;
  }
  const int n_terms = static_cast<int>(df.size());
  const int n = static_cast<int>(phrases.size());

  // k-means++ seeding on squared chordal distance (2 - 2*cos on unit vectors).
  Rng rng(sub_seed(seed, seed_tag::cluster));
  std::vector<std::vector<double>> centroids;
  centroids.reserve(kappa);
  auto densify = [&](const SparseVec& v) {
    std::vector<double> dense(n_terms, 0.0);
    for (const auto& [idx, w] : v) dense[idx] = w;
    return dense;
  };
  std::vector<double> best_sim(n, -1.0);
  {
    const int first = static_cast<int>(rng.next_index(n));
    centroids.push_back(densify(vecs[first]));
    for (int c = 1; c < kappa; ++c) {
      std::vector<double> d2(n);
      double total = 0.0;
      for (int d = 0; d < n; ++d) {
        best_sim[d] = std::max(best_sim[d], dot_sparse_dense(vecs[d], centroids.back()));
        d2[d] = std::max(0.0, 2.0 - 2.0 * best_sim[d]);
        total += d2[d];
      }
      int pick = 0;
      if (total > 0.0) {
        double r = rng.next_double() * total;
        for (int d = 0; d < n; ++d) {
          r -= d2[d];
          if (r <= 0.0) {
            pick = d;
            break;
          }
        }
      } else {
        pick = static_cast<int>(rng.next_index(n));
      }
      centroids.push_back(densify(vecs[pick]));
    }
  }

  // Lloyd iterations with spherical centroids; empty clusters are reseeded
  // from the point farthest from its centroid.
  std::vector<int> assign(n, -1);
  const int kMaxIter = 100;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    bool changed = false;
    for (int d = 0; d < n; ++d) {
      int best = 0;
      double best_dot = -2.0;
      for (int c = 0; c < kappa; ++c) {
        const double s = dot_sparse_dense(vecs[d], centroids[c]);
        if (s > best_dot + 1e-15) {
          best_dot = s;
          best = c;
        }
      }
      if (assign[d] != best) {
        assign[d] = best;
        changed = true;
      }
    }

    std::vector<int> sizes(kappa, 0);
    for (int d = 0; d < n; ++d) ++sizes[assign[d]];
    for (int c = 0; c < kappa; ++c) {
      if (sizes[c] > 0) continue;
      int farthest = 0;
      double worst = 2.0;
      for (int d = 0; d < n; ++d) {
        if (sizes[assign[d]] <= 1) continue;  // do not orphan another cluster
        const double s = dot_sparse_dense(vecs[d], centroids[assign[d]]);
        if (s < worst) {
          worst = s;
          farthest = d;
        }
      }
      --sizes[assign[farthest]];
      assign[farthest] = c;
      sizes[c] = 1;
      changed = true;
    }

    for (int c = 0; c < kappa; ++c) std::fill(centroids[c].begin(), centroids[c].end(), 0.0);
    for (int d = 0; d < n; ++d) {
      for (const auto& [idx, w] : vecs[d]) centroids[assign[d]][idx] += w;
    }
    for (int c = 0; c < kappa; ++c) {
      double norm2 = 0.0;
      for (double w : centroids[c]) norm2 += w * w;
      if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& w : centroids[c]) w *= inv;
      }
    }
    if (!changed) break;
  }

  // Representative phrase: member closest to the centroid, earliest on ties.
  out.representative.assign(kappa, "");
  std::vector<double> rep_dot(kappa, -2.0);
  for (int d = 0; d < n; ++d) {
    const int c = assign[d];
    const double s = dot_sparse_dense(vecs[d], centroids[c]);
    if (s > rep_dot[c] + 1e-15) {
      rep_dot[c] = s;
      out.representative[c] = phrases[d];
    }
  }

  for (int d = 0; d < n; ++d) out.phrase_cluster[phrases[d]] = assign[d];
  out.membership.assign(corpus.per_user.size(), {});
  for (size_t u = 0; u < corpus.per_user.size(); ++u) {
    std::set<int> clusters;
    for (const auto& p : corpus.per_user[u]) clusters.insert(out.phrase_cluster.at(p));
    out.membership[u].assign(clusters.begin(), clusters.end());
  }
  return out;
}

void write_interest_assignment(const InterestAssignment& assignment, const InteractionSet& ix,
                               const std::string& clusters_path, const std::string& memberships_path) {
  std::ofstream cf(clusters_path);
  if (!cf) throw DataError("cannot write " + clusters_path);
  for (int c = 0; c < assignment.kappa; ++c) {
    cf << c << '\t' << assignment.representative[c] << '\n';
  }

  std::ofstream mf(memberships_path);
  if (!mf) throw DataError("cannot write " + memberships_path);
  for (int u = 0; u < static_cast<int>(assignment.membership.size()); ++u) {
    for (int c : assignment.membership[u]) {
      mf << ix.user_raw[u] << '\t' << c << '\n';
    }
  }
}

InterestAssignment load_interest_assignment(const std::string& clusters_path,
                                            const std::string& memberships_path,
                                            const InteractionSet& ix) {
  InterestAssignment out;
  std::ifstream cf(clusters_path);
  if (!cf) throw DataError("cannot open " + clusters_path + " (run the cluster stage first)");
  std::string line;
  while (std::getline(cf, line)) {
    if (trim(line).empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 2) throw DataError(clusters_path + ": malformed cluster line");
    out.representative.push_back(cols[1]);
  }
  out.kappa = static_cast<int>(out.representative.size());

  out.membership.assign(ix.n_users, {});
  std::ifstream mf(memberships_path);
  if (!mf) throw DataError("cannot open " + memberships_path + " (run the cluster stage first)");
  size_t lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 2) throw DataError(memberships_path + ": malformed membership line");
    auto it = ix.user_id.find(trim(cols[0]));
    if (it == ix.user_id.end()) continue;
    const int c = std::stoi(cols[1]);
    if (c < 0 || c >= out.kappa) {
      throw DataError(memberships_path + ":" + std::to_string(lineno) + ": cluster id out of range");
    }
    out.membership[it->second].push_back(c);
  }
  for (auto& m : out.membership) {
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
  }
  return out;
}

}  // namespace cikg
