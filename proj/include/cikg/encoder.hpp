#pragma once

// Linear graph propagation over a normalized adjacency, the perturbed
// contrastive view, and the masked encode/project/decode split.
//
// propagate() averages the layer sequence Z^(0..l) where Z^(k+1) = A_hat
// Z^(k). A_hat is symmetric, so the adjoint of propagate is propagate
// itself: backprop reuses the forward routine on the output gradient.
// Nodes with no incident edges carry their embedding through unchanged at
// every layer (an edgeless graph propagates as the identity).

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cikg/graph.hpp"

namespace cikg {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

// All trainable parameters: node embeddings, relation embeddings, the mask
// token, and the projection between encoder and decoder.
struct EmbeddingState {
  Mat Z;        // n_nodes x D
  Mat Zr;       // n_relations x D
  RowVec z_mask;  // D
  Mat proj_w;   // D x D
  RowVec proj_b;  // D
  int dim = 0;

  bool all_finite() const {
    return Z.allFinite() && Zr.allFinite() && z_mask.allFinite() && proj_w.allFinite() &&
           proj_b.allFinite();
  }
};

Mat propagate(const Mat& Z, const NormalizedAdjacency& adj, int layers);

// Per-layer noise added after each propagation step (layers 1..l), recorded
// so a caller can replay the exact same realization.
struct LayerNoise {
  std::vector<Mat> delta;  // one per layer >= 1
};

// Adds eps-scaled, sign-aligned row noise at each layer: for the pre-noise
// value Y = A_hat Z^(k-1), delta = eps * sign(Y) .* (u / ||u||) with u drawn
// uniformly per row. eps = 0 reduces to propagate(). When `replay` is given
// the recorded deltas are reused and no randomness is consumed; the map
// Z -> output is then linear, which is what the gradient path assumes (the
// noise is constant almost everywhere in Z).
Mat propagate_perturbed(const Mat& Z, const NormalizedAdjacency& adj, int layers, double eps,
                        uint64_t seed, LayerNoise* record = nullptr,
                        const LayerNoise* replay = nullptr);

// Z'' = propagate(Z_masked, l-1); Z''' = propagate(Z'' W + b, 1).
// Requires l >= 2 so the encoder keeps at least one layer. The intermediate
// Z'' is exposed for the projection's weight gradient.
Mat gmae_encode_decode(const Mat& z_masked, const NormalizedAdjacency& adj, int layers,
                       const Mat& proj_w, const RowVec& proj_b, Mat* cache_encoded = nullptr);

// `embeddings.tsv` (gid, 9-significant-digit coordinates) plus
// `manifest.json` describing the checkpointed state.
void export_embeddings(const Mat& Z, const std::string& embeddings_path);

}  // namespace cikg
