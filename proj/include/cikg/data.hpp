#pragma once

// Dataset ingestion: ratings files, item-side KG triples, item->entity
// projections, per-user train/valid/test splits, and summary statistics.

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cikg/common.hpp"

namespace cikg {

// User-item interactions with dense, contiguous IDs. Edges are kept in file
// order (later lines = more recent); duplicates are collapsed to the first
// occurrence. Ratings values are ignored: the task is implicit-feedback
// top-K ranking.
struct InteractionSet {
  int n_users = 0;
  int n_items = 0;
  std::vector<std::pair<int, int>> edges;       // (user, item), insertion order
  std::vector<std::vector<int>> items_by_user;  // per-user item lists, insertion order
  std::vector<std::string> user_raw;            // dense id -> raw id
  std::vector<std::string> item_raw;
  std::unordered_map<std::string, int> user_id;  // raw id -> dense id
  std::unordered_map<std::string, int> item_id;

  size_t n_edges() const { return edges.size(); }
};

struct SplitInteractions {
  InteractionSet train;
  InteractionSet valid;
  InteractionSet test;
  uint64_t split_seed = 0;
};

// Item-side KG with dense entity/relation IDs and the partial item->entity
// projection. Entities cover triple endpoints plus projection targets.
struct TripleStore {
  int n_entities = 0;
  int n_relations = 0;
  std::vector<std::array<int, 3>> triples;  // (head, relation, tail)
  std::vector<int> item_entity;             // item dense id -> entity id, -1 if unlinked
  std::vector<std::string> entity_raw;
  std::vector<std::string> relation_raw;
  std::unordered_map<std::string, int> entity_id;
  std::unordered_map<std::string, int> relation_id;

  int n_unlinked_items() const {
    int n = 0;
    for (int e : item_entity) n += (e < 0);
    return n;
  }
};

struct DatasetStats {
  int64_t n_users = 0;
  int64_t n_items = 0;
  int64_t n_ratings = 0;
  double density = 0.0;
  int64_t n_relations = 0;
  int64_t n_entities = 0;
  int64_t n_triples = 0;
};

// Parses `user<TAB>item[<TAB>rating[<TAB>timestamp]]` lines, collapses
// duplicate (user, item) pairs, drops users with fewer than min_user_freq
// distinct interactions, and reindexes both namespaces densely.
InteractionSet load_interactions(const std::string& path, int min_user_freq);

// In-memory variant of the above, used by loaders and tests.
InteractionSet build_interactions(const std::vector<std::pair<std::string, std::string>>& raw_edges,
                                  int min_user_freq);

// Per-user random split. With ratios (r_tr, r_va, r_te): test gets
// round(r_te*n), valid gets round(r_va*n), train the remainder, and train is
// floored at 1 by stealing from test then valid.
SplitInteractions split_interactions(const InteractionSet& ix, const std::array<double, 3>& ratios,
                                     uint64_t seed);

// Loads triples and the projection, reindexing entities/relations densely.
// Empty paths yield an empty store with every item unlinked.
TripleStore load_kg(const std::string& path_triples, const std::string& path_projection,
                    const InteractionSet& ix);

DatasetStats dataset_stats(const InteractionSet& ix, const TripleStore& kg);

std::string dataset_stats_json(const DatasetStats& s);

// Optional titles table (`item_raw<TAB>title`) used when rendering prompts.
std::unordered_map<std::string, std::string> load_item_titles(const std::string& path);

}  // namespace cikg
