#pragma once

// Loss functions and the mask-rate curriculum. Every loss returns its value
// and, through optional output arguments, exact analytic gradients with
// respect to the inputs it touches; the trainer's finite-difference harness
// validates them end to end.

#include <cstdint>
#include <vector>

#include "cikg/encoder.hpp"

namespace cikg {

// `constant` pins the rate at omega for every epoch (the fixed-rate ablation).
enum class MaskStrategy { linear, exponential, constant };

struct MaskSchedule {
  double alpha = 0.1;    // initial rate, in (0, 1)
  double omega = 0.95;   // maximum rate, in (alpha, 1]
  int lambda_cap = 160;  // epochs to reach omega
  MaskStrategy strategy = MaskStrategy::exponential;

  void validate() const;
};

struct LossWeights {
  double lambda1 = 1.0;  // ranking loss
  double lambda2 = 0.1;  // reconstruction loss
  double lambda3 = 0.1;  // contrastive loss
  double eta = 2.0;      // reconstruction exponent, >= 1
  double tau = 0.2;      // InfoNCE temperature, > 0
  double eps = 0.1;      // perturbation magnitude for the contrastive view

  void validate() const;
};

// Linear: min(alpha + q*(omega-alpha)/cap, omega).
// Exponential: min(alpha*(omega/alpha)^(q/cap), omega).
// Returns omega exactly for q >= cap.
double schedule_mask_rate(const MaskSchedule& sched, int epoch);

// round(p*|ids|) half-up, floored at 1 when p > 0; uniform without
// replacement, deterministic by seed. `ids` order does not matter; the
// result is sorted.
std::vector<int> sample_mask_set(const std::vector<int>& interest_node_ids, double rate,
                                 uint64_t seed);

// Rows in `masked` replaced by z_mask, everything else untouched.
Mat apply_mask(const Mat& Z, const std::vector<int>& masked, const RowVec& z_mask);

// Scatters a gradient on the masked matrix back to (Z, z_mask): masked rows
// accumulate into g_mask, all other rows pass through into g_z.
void apply_mask_backward(const Mat& g_masked, const std::vector<int>& masked, Mat& g_z,
                         RowVec& g_mask);

// mean over masked rows of (1 - cos(z_orig_j, z_recon_j))^eta.
// Gradients are accumulated (+=) into the optional outputs.
double reconstruction_loss(const Mat& z_orig, const Mat& z_recon, const std::vector<int>& masked,
                           double eta, Mat* g_orig = nullptr, Mat* g_recon = nullptr);

// Full-softmax InfoNCE over row-aligned anchor/positive matrices:
//   sum_a -log( exp(cos(A_a, B_a)/tau) / sum_w exp(cos(A_a, B_w)/tau) ).
double info_nce(const Mat& anchors, const Mat& positives, double tau, Mat* g_anchors = nullptr,
                Mat* g_positives = nullptr);

// User side InfoNCE(v1, v2) over user rows plus item side InfoNCE(v1, v3)
// over item rows. Gradients land on the three full view matrices.
double contrastive_loss(const Mat& zv1, const Mat& zv2, const Mat& zv3,
                        const std::vector<int>& user_gids, const std::vector<int>& item_gids,
                        double tau, Mat* g_v1 = nullptr, Mat* g_v2 = nullptr, Mat* g_v3 = nullptr);

struct BprTriple {
  int user;
  int pos;
  int neg;
};

// sum over triples of -ln sigmoid(z_u . z_i - z_u . z_i').
double bpr_loss(const Mat& z_hat, const std::vector<BprTriple>& triples, Mat* g_z_hat = nullptr);

struct TranseQuad {
  int head;      // entity gid
  int relation;  // KG relation id (row of Zr)
  int tail;      // entity gid
  int neg_tail;  // corrupted tail gid
};

// sum over quads of -ln sigmoid(||z_h + z_r - z_t'|| - ||z_h + z_r - z_t||).
double transe_loss(const Mat& Z, const Mat& Zr, const std::vector<TranseQuad>& quads,
                   Mat* g_z = nullptr, Mat* g_zr = nullptr);

inline double combined_loss(double lr, double lu, double lc, const LossWeights& w) {
  return w.lambda1 * lr + w.lambda2 * lu + w.lambda3 * lc;
}

// Numerically stable -ln sigmoid(x) = softplus(-x).
double neg_log_sigmoid(double x);

// Cosine with stabilized denominators (||v|| + 1e-12).
double stable_cosine(const RowVec& a, const RowVec& b);

}  // namespace cikg
