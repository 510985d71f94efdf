#pragma once

// Typed heterogeneous graphs over a shared node table, plus the symmetric
// normalization used by the propagation encoder.
//
// Node id layout (global ids):
//   [0, U)                          users
//   [U, U+E)                        KG entities (linked items share their entity node)
//   [U+E, U+E+X)                    items without a KG projection
//   [U+E+X, U+E+X+K)                interest clusters

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "cikg/data.hpp"
#include "cikg/interests.hpp"

namespace cikg {

enum class NodeKind : uint8_t { user = 0, entity = 1, interest = 2 };

struct RelationVocab {
  std::vector<std::string> names;  // KG relations first, then interact / has_interest
  int interact = -1;
  int has_interest = -1;
  int n_kg_relations = 0;

  int size() const { return static_cast<int>(names.size()); }
};

class NodeTable {
 public:
  NodeTable(const InteractionSet& ix, const TripleStore& kg, int n_interests);

  int n_nodes() const { return n_nodes_; }
  int n_users() const { return n_users_; }
  int n_entities() const { return n_entities_; }
  int n_unlinked_items() const { return n_unlinked_; }
  int n_interests() const { return n_interests_; }

  int user_gid(int user) const { return user; }
  int item_gid(int item) const { return item_gid_[item]; }
  int entity_gid(int entity) const { return n_users_ + entity; }
  int interest_gid(int cluster) const { return n_users_ + n_entities_ + n_unlinked_ + cluster; }

  NodeKind kind(int gid) const;
  // Raw identifier for dumps: user/entity raw ids, item raw ids for unlinked
  // items, "j<cluster>" for interests.
  std::string raw_of(int gid) const;

  const std::vector<int>& item_gids() const { return item_gid_; }

 private:
  int n_users_ = 0;
  int n_entities_ = 0;
  int n_unlinked_ = 0;
  int n_interests_ = 0;
  int n_nodes_ = 0;
  std::vector<int> item_gid_;
  std::vector<std::string> user_raw_;
  std::vector<std::string> entity_raw_;
  std::vector<std::string> unlinked_raw_;
};

struct Edge {
  int head;
  int relation;
  int tail;
};

// Immutable after construction; merge/dedup by exact (h, r, t).
class HeteroGraph {
 public:
  HeteroGraph() = default;
  HeteroGraph(std::shared_ptr<const NodeTable> table, std::shared_ptr<const RelationVocab> relations);

  void add_edge(int head, int relation, int tail);

  const std::vector<Edge>& edges() const { return edges_; }
  size_t n_edges() const { return edges_.size(); }
  const NodeTable& table() const { return *table_; }
  std::shared_ptr<const NodeTable> table_ptr() const { return table_; }
  const RelationVocab& relations() const { return *relations_; }
  std::shared_ptr<const RelationVocab> relations_ptr() const { return relations_; }
  bool has_edge(int head, int relation, int tail) const { return keys_.count(key(head, relation, tail)) > 0; }

 private:
  uint64_t key(int h, int r, int t) const;

  std::shared_ptr<const NodeTable> table_;
  std::shared_ptr<const RelationVocab> relations_;
  std::vector<Edge> edges_;
  std::unordered_set<uint64_t> keys_;
};

// Per-edge coefficients 1/sqrt(d_h * d_t) over the undirected view, CSR form.
// Isolated nodes have empty neighbor ranges; the encoder carries their
// embedding through unchanged.
struct NormalizedAdjacency {
  int n_nodes = 0;
  std::vector<int> offsets;    // size n_nodes + 1
  std::vector<int> neighbors;  // concatenated neighbor gids
  std::vector<double> coefs;   // aligned with neighbors
  std::vector<double> degree;  // undirected degree (edge multiplicity counted)
};

std::shared_ptr<const RelationVocab> make_relation_vocab(const TripleStore& kg);

HeteroGraph collaborative_graph(const InteractionSet& train, std::shared_ptr<const NodeTable> table,
                                std::shared_ptr<const RelationVocab> relations);

// KG triples as typed edges among entity nodes. Items obtain nodes through
// the table's projection-aware layout; unlinked items have KG degree 0.
HeteroGraph map_items_to_entities(const TripleStore& kg, std::shared_ptr<const NodeTable> table,
                                  std::shared_ptr<const RelationVocab> relations);

HeteroGraph interest_graph(const InterestAssignment& assignment, std::shared_ptr<const NodeTable> table,
                           std::shared_ptr<const RelationVocab> relations);

HeteroGraph merge_graphs(const HeteroGraph& a, const HeteroGraph& b);

HeteroGraph build_cikg(const HeteroGraph& cg, const HeteroGraph& ig, const HeteroGraph& mapped_kg);

NormalizedAdjacency normalize(const HeteroGraph& g);

// `graph.tsv` (head_gid, relation_id, tail_gid) and `nodes.tsv`
// (gid, namespace, raw_id) dumps.
void dump_graph(const HeteroGraph& g, const std::string& graph_path, const std::string& nodes_path);

}  // namespace cikg
