#include "cikg/encoder.hpp"

#include <cstdio>
#include <fstream>

namespace cikg {

namespace {

// One step Y = A_hat X; isolated rows are copied through.
void spmm(const NormalizedAdjacency& adj, const Mat& x, Mat& y) {
  const int n = adj.n_nodes;
  for (int v = 0; v < n; ++v) {
    const int begin = adj.offsets[v];
    const int end = adj.offsets[v + 1];
    if (begin == end) {
      y.row(v) = x.row(v);
      continue;
    }
    y.row(v).setZero();
    for (int e = begin; e < end; ++e) {
      y.row(v) += adj.coefs[e] * x.row(adj.neighbors[e]);
    }
  }
}

void check_shape(const Mat& z, const NormalizedAdjacency& adj) {
  if (z.rows() != adj.n_nodes) {
    throw NumericError("propagate: embedding rows " + std::to_string(z.rows()) +
                       " != graph nodes " + std::to_string(adj.n_nodes));
  }
}

}  // namespace

Mat propagate(const Mat& Z, const NormalizedAdjacency& adj, int layers) {
  if (layers < 0) throw ConfigError("propagate: layers must be >= 0");
  check_shape(Z, adj);
  if (layers == 0) return Z;

  Mat acc = Z;
  Mat cur = Z;
  Mat next(Z.rows(), Z.cols());
  for (int k = 1; k <= layers; ++k) {
    spmm(adj, cur, next);
    acc += next;
    cur.swap(next);
  }
  acc /= static_cast<double>(layers + 1);
  return acc;
}

Mat propagate_perturbed(const Mat& Z, const NormalizedAdjacency& adj, int layers, double eps,
                        uint64_t seed, LayerNoise* record, const LayerNoise* replay) {
  if (layers < 0) throw ConfigError("propagate: layers must be >= 0");
  if (eps < 0) throw ConfigError("propagate_perturbed: eps must be >= 0");
  check_shape(Z, adj);
  if (replay && static_cast<int>(replay->delta.size()) != layers) {
    throw NumericError("propagate_perturbed: replay has wrong layer count");
  }
  if (record) record->delta.clear();
  if (layers == 0) return Z;

  Rng rng(seed);
  Mat acc = Z;
  Mat cur = Z;
  Mat next(Z.rows(), Z.cols());
  const int d = static_cast<int>(Z.cols());
  for (int k = 1; k <= layers; ++k) {
    spmm(adj, cur, next);
    Mat delta;
    if (replay) {
      delta = replay->delta[k - 1];
    } else {
      delta.setZero(Z.rows(), d);
      if (eps > 0.0) {
        std::vector<double> u(d);
        for (int v = 0; v < Z.rows(); ++v) {
          double norm2 = 0.0;
          for (int j = 0; j < d; ++j) {
            u[j] = rng.next_double();
            norm2 += u[j] * u[j];
          }
          const double inv = norm2 > 0.0 ? eps / std::sqrt(norm2) : 0.0;
          for (int j = 0; j < d; ++j) {
            const double s = next(v, j) > 0.0 ? 1.0 : (next(v, j) < 0.0 ? -1.0 : 0.0);
            delta(v, j) = s * u[j] * inv;
          }
        }
      }
    }
    next += delta;
    if (record) record->delta.push_back(std::move(delta));
    acc += next;
    cur.swap(next);
  }
  acc /= static_cast<double>(layers + 1);
  return acc;
}

Mat gmae_encode_decode(const Mat& z_masked, const NormalizedAdjacency& adj, int layers,
                       const Mat& proj_w, const RowVec& proj_b, Mat* cache_encoded) {
  if (layers < 2) throw ConfigError("gmae_encode_decode: needs layers >= 2");
  Mat encoded = propagate(z_masked, adj, layers - 1);
  Mat projected = encoded * proj_w;
  projected.rowwise() += proj_b;
  if (cache_encoded) *cache_encoded = std::move(encoded);
  return propagate(projected, adj, 1);
}

void export_embeddings(const Mat& Z, const std::string& embeddings_path) {
  std::ofstream out(embeddings_path);
  if (!out) throw DataError("cannot write " + embeddings_path);
  char buf[64];
  for (Eigen::Index v = 0; v < Z.rows(); ++v) {
    out << v << '\t';
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", Z(v, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace cikg
