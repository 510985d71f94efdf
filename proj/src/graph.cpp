#include "cikg/graph.hpp"

#include <cmath>
#include <fstream>

namespace cikg {

NodeTable::NodeTable(const InteractionSet& ix, const TripleStore& kg, int n_interests) {
  n_users_ = ix.n_users;
  n_entities_ = kg.n_entities;
  n_interests_ = n_interests;
  user_raw_ = ix.user_raw;
  entity_raw_ = kg.entity_raw;

  item_gid_.resize(ix.n_items);
  for (int i = 0; i < ix.n_items; ++i) {
    int e = i < static_cast<int>(kg.item_entity.size()) ? kg.item_entity[i] : -1;
    if (e >= 0) {
      item_gid_[i] = n_users_ + e;
    } else {
      item_gid_[i] = n_users_ + n_entities_ + n_unlinked_;
      unlinked_raw_.push_back(ix.item_raw[i]);
      ++n_unlinked_;
    }
  }
  n_nodes_ = n_users_ + n_entities_ + n_unlinked_ + n_interests_;
}

NodeKind NodeTable::kind(int gid) const {
  if (gid < n_users_) return NodeKind::user;
  if (gid < n_users_ + n_entities_ + n_unlinked_) return NodeKind::entity;
  return NodeKind::interest;
}

std::string NodeTable::raw_of(int gid) const {
  if (gid < n_users_) return user_raw_[gid];
  gid -= n_users_;
  if (gid < n_entities_) return entity_raw_[gid];
  gid -= n_entities_;
  if (gid < n_unlinked_) return unlinked_raw_[gid];
  return "j" + std::to_string(gid - n_unlinked_);
}

std::shared_ptr<const RelationVocab> make_relation_vocab(const TripleStore& kg) {
  auto vocab = std::make_shared<RelationVocab>();
  vocab->names = kg.relation_raw;
  vocab->n_kg_relations = kg.n_relations;
  vocab->interact = static_cast<int>(vocab->names.size());
  vocab->names.push_back("interact");
  vocab->has_interest = static_cast<int>(vocab->names.size());
  vocab->names.push_back("has_interest");
  return vocab;
}

HeteroGraph::HeteroGraph(std::shared_ptr<const NodeTable> table,
                         std::shared_ptr<const RelationVocab> relations)
    : table_(std::move(table)), relations_(std::move(relations)) {}

uint64_t HeteroGraph::key(int h, int r, int t) const {
  const uint64_t n = static_cast<uint64_t>(table_->n_nodes());
  return (static_cast<uint64_t>(h) * n + static_cast<uint64_t>(t)) *
             static_cast<uint64_t>(relations_->size()) +
         static_cast<uint64_t>(r);
}

void HeteroGraph::add_edge(int head, int relation, int tail) {
  if (head < 0 || head >= table_->n_nodes() || tail < 0 || tail >= table_->n_nodes()) {
    throw DataError("edge endpoint outside node table");
  }
  if (relation < 0 || relation >= relations_->size()) {
    throw DataError("unknown relation id " + std::to_string(relation));
  }
  if (!keys_.insert(key(head, relation, tail)).second) return;
  edges_.push_back({head, relation, tail});
}

HeteroGraph collaborative_graph(const InteractionSet& train, std::shared_ptr<const NodeTable> table,
                                std::shared_ptr<const RelationVocab> relations) {
  HeteroGraph g(table, relations);
  const int r = relations->interact;
  for (const auto& [u, i] : train.edges) {
    g.add_edge(table->user_gid(u), r, table->item_gid(i));
  }
  return g;
}

HeteroGraph map_items_to_entities(const TripleStore& kg, std::shared_ptr<const NodeTable> table,
                                  std::shared_ptr<const RelationVocab> relations) {
  HeteroGraph g(table, relations);
  for (const auto& t : kg.triples) {
    g.add_edge(table->entity_gid(t[0]), t[1], table->entity_gid(t[2]));
  }
  return g;
}

HeteroGraph interest_graph(const InterestAssignment& assignment, std::shared_ptr<const NodeTable> table,
                           std::shared_ptr<const RelationVocab> relations) {
  HeteroGraph g(table, relations);
  const int r = relations->has_interest;
  for (int u = 0; u < static_cast<int>(assignment.membership.size()); ++u) {
    for (int c : assignment.membership[u]) {
      g.add_edge(table->user_gid(u), r, table->interest_gid(c));
    }
  }
  return g;
}

HeteroGraph merge_graphs(const HeteroGraph& a, const HeteroGraph& b) {
  if (a.table_ptr().get() != b.table_ptr().get() ||
      a.relations_ptr().get() != b.relations_ptr().get()) {
    throw DataError("merge: graphs do not share a node table");
  }
  HeteroGraph out(a.table_ptr(), a.relations_ptr());
  for (const auto& e : a.edges()) out.add_edge(e.head, e.relation, e.tail);
  for (const auto& e : b.edges()) out.add_edge(e.head, e.relation, e.tail);
  return out;
}

HeteroGraph build_cikg(const HeteroGraph& cg, const HeteroGraph& ig, const HeteroGraph& mapped_kg) {
  return merge_graphs(merge_graphs(cg, ig), mapped_kg);
}

NormalizedAdjacency normalize(const HeteroGraph& g) {
  const int n = g.table().n_nodes();
  NormalizedAdjacency adj;
  adj.n_nodes = n;
  adj.degree.assign(n, 0.0);

  for (const auto& e : g.edges()) {
    adj.degree[e.head] += 1.0;
    adj.degree[e.tail] += 1.0;
  }
  std::vector<int> counts(n, 0);
  for (const auto& e : g.edges()) {
    ++counts[e.head];
    ++counts[e.tail];
  }
  adj.offsets.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) adj.offsets[v + 1] = adj.offsets[v] + counts[v];
  adj.neighbors.assign(adj.offsets[n], 0);
  adj.coefs.assign(adj.offsets[n], 0.0);

  std::vector<int> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (const auto& e : g.edges()) {
    const double c = 1.0 / std::sqrt(adj.degree[e.head] * adj.degree[e.tail]);
    adj.neighbors[cursor[e.head]] = e.tail;
    adj.coefs[cursor[e.head]++] = c;
    adj.neighbors[cursor[e.tail]] = e.head;
    adj.coefs[cursor[e.tail]++] = c;
  }
  return adj;
}

void dump_graph(const HeteroGraph& g, const std::string& graph_path, const std::string& nodes_path) {
  std::ofstream gf(graph_path);
  if (!gf) throw DataError("cannot write " + graph_path);
  for (const auto& e : g.edges()) {
    gf << e.head << '\t' << e.relation << '\t' << e.tail << '\n';
  }

  std::ofstream nf(nodes_path);
  if (!nf) throw DataError("cannot write " + nodes_path);
  static const char* kKindNames[] = {"user", "entity", "interest"};
  const NodeTable& t = g.table();
  for (int gid = 0; gid < t.n_nodes(); ++gid) {
    nf << gid << '\t' << kKindNames[static_cast<int>(t.kind(gid))] << '\t' << t.raw_of(gid) << '\n';
  }
}

}  // namespace cikg
