#include "cikg/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace cikg {

namespace {

// Reads non-comment lines of a TSV file; returns false if the file is absent.
bool for_each_record(const std::string& path,
                     const std::function<void(size_t, const std::vector<std::string>&)>& fn) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    fn(lineno, split_tabs(line));
  }
  return true;
}

}  // namespace

InteractionSet build_interactions(const std::vector<std::pair<std::string, std::string>>& raw_edges,
                                  int min_user_freq) {
  // First pass: dedupe (user, item) pairs on raw ids, count per-user frequency.
  std::unordered_map<std::string, int> freq;
  std::unordered_set<std::string> seen;
  std::vector<std::pair<std::string, std::string>> unique_edges;
  unique_edges.reserve(raw_edges.size());
  for (const auto& [u, i] : raw_edges) {
    std::string key = u + '\t' + i;
    if (!seen.insert(std::move(key)).second) continue;
    unique_edges.emplace_back(u, i);
    ++freq[u];
  }

  InteractionSet out;
  for (const auto& [u, i] : unique_edges) {
    if (freq[u] < min_user_freq) continue;
    auto [uit, unew] = out.user_id.try_emplace(u, out.n_users);
    if (unew) {
      out.user_raw.push_back(u);
      out.items_by_user.emplace_back();
      ++out.n_users;
    }
    auto [iit, inew] = out.item_id.try_emplace(i, out.n_items);
    if (inew) {
      out.item_raw.push_back(i);
      ++out.n_items;
    }
    out.edges.emplace_back(uit->second, iit->second);
    out.items_by_user[uit->second].push_back(iit->second);
  }
  if (out.edges.empty()) {
    throw DataError("empty interaction set after filtering (min_user_freq=" +
                    std::to_string(min_user_freq) + ")");
  }
  return out;
}

InteractionSet load_interactions(const std::string& path, int min_user_freq) {
  std::vector<std::pair<std::string, std::string>> raw;
  bool found = for_each_record(path, [&](size_t lineno, const std::vector<std::string>& cols) {
    if (cols.size() < 2 || trim(cols[0]).empty() || trim(cols[1]).empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed ratings line");
    }
    raw.emplace_back(trim(cols[0]), trim(cols[1]));
  });
  if (!found) throw DataError("cannot open ratings file: " + path);
  if (raw.empty()) throw DataError("empty ratings file: " + path);
  return build_interactions(raw, min_user_freq);
}

namespace {

InteractionSet empty_like(const InteractionSet& ix) {
  InteractionSet out;
  out.n_users = ix.n_users;
  out.n_items = ix.n_items;
  out.user_raw = ix.user_raw;
  out.item_raw = ix.item_raw;
  out.user_id = ix.user_id;
  out.item_id = ix.item_id;
  out.items_by_user.assign(ix.n_users, {});
  return out;
}

void push_edge(InteractionSet& s, int u, int i) {
  s.edges.emplace_back(u, i);
  s.items_by_user[u].push_back(i);
}

}  // namespace

SplitInteractions split_interactions(const InteractionSet& ix, const std::array<double, 3>& ratios,
                                     uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1, got " + std::to_string(sum));
  }

  SplitInteractions sp;
  sp.split_seed = seed;
  sp.train = empty_like(ix);
  sp.valid = empty_like(ix);
  sp.test = empty_like(ix);

  Rng rng(sub_seed(seed, seed_tag::split));
  for (int u = 0; u < ix.n_users; ++u) {
    std::vector<int> items = ix.items_by_user[u];
    const int n = static_cast<int>(items.size());
    if (n == 0) continue;
    rng.shuffle(items);

    int n_test = static_cast<int>(std::floor(ratios[2] * n + 0.5));
    int n_valid = static_cast<int>(std::floor(ratios[1] * n + 0.5));
    int n_train = n - n_test - n_valid;
    while (n_train < 1 && n_test + n_valid > 0) {
      if (n_test > 0) {
        --n_test;
      } else {
        --n_valid;
      }
      ++n_train;
    }
    int k = 0;
    for (int j = 0; j < n_train; ++j) push_edge(sp.train, u, items[k++]);
    for (int j = 0; j < n_valid; ++j) push_edge(sp.valid, u, items[k++]);
    for (int j = 0; j < n_test; ++j) push_edge(sp.test, u, items[k++]);
  }
  return sp;
}

TripleStore load_kg(const std::string& path_triples, const std::string& path_projection,
                    const InteractionSet& ix) {
  TripleStore kg;
  kg.item_entity.assign(ix.n_items, -1);

  auto entity_of = [&kg](const std::string& raw) {
    auto [it, fresh] = kg.entity_id.try_emplace(raw, kg.n_entities);
    if (fresh) {
      kg.entity_raw.push_back(raw);
      ++kg.n_entities;
    }
    return it->second;
  };

  if (!path_triples.empty()) {
    bool found = for_each_record(path_triples, [&](size_t lineno, const std::vector<std::string>& cols) {
      if (cols.size() < 3) {
        throw DataError(path_triples + ":" + std::to_string(lineno) + ": malformed triple line");
      }
      int h = entity_of(trim(cols[0]));
      int t = entity_of(trim(cols[2]));
      const std::string rel = trim(cols[1]);
      auto [rit, fresh] = kg.relation_id.try_emplace(rel, kg.n_relations);
      if (fresh) {
        kg.relation_raw.push_back(rel);
        ++kg.n_relations;
      }
      kg.triples.push_back({h, rit->second, t});
    });
    if (!found) throw DataError("cannot open KG triples file: " + path_triples);
  }

  if (!path_projection.empty()) {
    std::vector<std::string> offenders;
    bool found = for_each_record(path_projection, [&](size_t lineno, const std::vector<std::string>& cols) {
      if (cols.size() < 2) {
        throw DataError(path_projection + ":" + std::to_string(lineno) + ": malformed projection line");
      }
      const std::string item = trim(cols[0]);
      auto it = ix.item_id.find(item);
      if (it == ix.item_id.end()) {
        offenders.push_back(item);
        return;
      }
      int e = entity_of(trim(cols[1]));
      int& slot = kg.item_entity[it->second];
      if (slot >= 0 && slot != e) {
        throw DataError("projection maps item '" + item + "' to two entities");
      }
      slot = e;
    });
    if (!found) throw DataError("cannot open projection file: " + path_projection);
    if (!offenders.empty()) {
      std::ostringstream msg;
      msg << "projection references " << offenders.size() << " unknown item(s):";
      for (size_t i = 0; i < offenders.size() && i < 10; ++i) msg << ' ' << offenders[i];
      throw DataError(msg.str());
    }
  }
  return kg;
}

DatasetStats dataset_stats(const InteractionSet& ix, const TripleStore& kg) {
  DatasetStats s;
  s.n_users = ix.n_users;
  s.n_items = ix.n_items;
  s.n_ratings = static_cast<int64_t>(ix.edges.size());
  s.density = ix.n_users > 0 && ix.n_items > 0
                  ? static_cast<double>(s.n_ratings) / (static_cast<double>(s.n_users) * s.n_items)
                  : 0.0;
  s.n_relations = kg.n_relations;
  s.n_entities = kg.n_entities;
  s.n_triples = static_cast<int64_t>(kg.triples.size());
  return s;
}

std::string dataset_stats_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["n_users"] = s.n_users;
  j["n_items"] = s.n_items;
  j["n_ratings"] = s.n_ratings;
  j["density"] = s.density;
  j["n_relations"] = s.n_relations;
  j["n_entities"] = s.n_entities;
  j["n_triples"] = s.n_triples;
  return j.dump(2) + "\n";
}

std::unordered_map<std::string, std::string> load_item_titles(const std::string& path) {
  std::unordered_map<std::string, std::string> titles;
  bool found = for_each_record(path, [&](size_t lineno, const std::vector<std::string>& cols) {
    if (cols.size() < 2) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed titles line");
    }
    titles[trim(cols[0])] = trim(cols[1]);
  });
  if (!found) throw DataError("cannot open item titles file: " + path);
  return titles;
}

}  // namespace cikg
