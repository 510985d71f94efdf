#include "cikg/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace cikg {

namespace {
constexpr double kNormStabilizer = 1e-12;
}

void MaskSchedule::validate() const {
  if (!(alpha > 0.0 && alpha < omega && omega <= 1.0)) {
    throw ConfigError("mask schedule requires 0 < alpha < omega <= 1");
  }
  if (lambda_cap < 1) throw ConfigError("mask schedule requires lambda_cap >= 1");
}

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ConfigError("loss weights must be >= 0");
  if (eta < 1.0) throw ConfigError("reconstruction exponent eta must be >= 1");
  if (tau <= 0.0) throw ConfigError("temperature tau must be > 0");
  if (eps < 0.0) throw ConfigError("perturbation eps must be >= 0");
}

double schedule_mask_rate(const MaskSchedule& sched, int epoch) {
  if (epoch < 0) throw ConfigError("schedule_mask_rate: epoch must be >= 0");
  if (sched.strategy == MaskStrategy::constant) return sched.omega;
  if (epoch >= sched.lambda_cap) return sched.omega;
  const double q = static_cast<double>(epoch);
  const double cap = static_cast<double>(sched.lambda_cap);
  double rate;
  if (sched.strategy == MaskStrategy::linear) {
    rate = sched.alpha + q * (sched.omega - sched.alpha) / cap;
  } else {
    rate = sched.alpha * std::pow(sched.omega / sched.alpha, q / cap);
  }
  return std::min(rate, sched.omega);
}

std::vector<int> sample_mask_set(const std::vector<int>& interest_node_ids, double rate,
                                 uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) throw ConfigError("mask rate must be in [0, 1]");
  const size_t n = interest_node_ids.size();
  if (n == 0 || rate == 0.0) return {};
  size_t m = static_cast<size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
  m = std::max<size_t>(m, 1);
  m = std::min(m, n);

  std::vector<int> pool = interest_node_ids;
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots end up a uniform sample.
  for (size_t i = 0; i < m; ++i) {
    std::swap(pool[i], pool[i + rng.next_index(n - i)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Mat apply_mask(const Mat& Z, const std::vector<int>& masked, const RowVec& z_mask) {
  Mat out = Z;
  for (int gid : masked) {
    if (gid < 0 || gid >= Z.rows()) throw NumericError("apply_mask: row out of range");
    out.row(gid) = z_mask;
  }
  return out;
}

void apply_mask_backward(const Mat& g_masked, const std::vector<int>& masked, Mat& g_z,
                         RowVec& g_mask) {
  g_z += g_masked;
  for (int gid : masked) {
    g_mask += g_masked.row(gid);
    g_z.row(gid) -= g_masked.row(gid);
  }
}

double neg_log_sigmoid(double x) {
  // -ln sigmoid(x) = softplus(-x)
  if (x > 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double stable_cosine(const RowVec& a, const RowVec& b) {
  const double na = a.norm() + kNormStabilizer;
  const double nb = b.norm() + kNormStabilizer;
  return a.dot(b) / (na * nb);
}

namespace {

// Gradient of cos(a, b) with the stabilized denominators, accumulated into
// the outputs. c is the precomputed cosine.
void cosine_backward(const RowVec& a, const RowVec& b, double c, double upstream, RowVec& g_a,
                     RowVec& g_b) {
  const double norm_a = a.norm();
  const double norm_b = b.norm();
  const double na = norm_a + kNormStabilizer;
  const double nb = norm_b + kNormStabilizer;
  g_a += upstream * (b / (na * nb));
  if (norm_a > 0.0) g_a -= upstream * (c / (norm_a * na)) * a;
  g_b += upstream * (a / (na * nb));
  if (norm_b > 0.0) g_b -= upstream * (c / (norm_b * nb)) * b;
}

}  // namespace

double reconstruction_loss(const Mat& z_orig, const Mat& z_recon, const std::vector<int>& masked,
                           double eta, Mat* g_orig, Mat* g_recon) {
  if (masked.empty()) throw ConfigError("reconstruction_loss: empty masked set");
  const double inv_m = 1.0 / static_cast<double>(masked.size());
  double loss = 0.0;
  for (int j : masked) {
    const RowVec a = z_orig.row(j);
    const RowVec b = z_recon.row(j);
    const double c = stable_cosine(a, b);
    const double base = 1.0 - c;
    loss += inv_m * std::pow(base, eta);
    if (g_orig || g_recon) {
      const double up = -inv_m * eta * std::pow(base, eta - 1.0);
      RowVec ga = RowVec::Zero(a.size());
      RowVec gb = RowVec::Zero(b.size());
      cosine_backward(a, b, c, up, ga, gb);
      if (g_orig) g_orig->row(j) += ga;
      if (g_recon) g_recon->row(j) += gb;
    }
  }
  return loss;
}

namespace {

// Row-normalized copy plus norms, for the cosine-softmax losses.
void normalize_rows(const Mat& x, Mat& out, Eigen::VectorXd& norms) {
  out.resize(x.rows(), x.cols());
  norms.resize(x.rows());
  for (Eigen::Index v = 0; v < x.rows(); ++v) {
    const double n = x.row(v).norm();
    norms[v] = n;
    out.row(v) = x.row(v) / (n + kNormStabilizer);
  }
}

// Maps a gradient on the normalized rows back to the raw rows.
void normalize_rows_backward(const Mat& x, const Mat& x_hat, const Eigen::VectorXd& norms,
                             const Mat& g_hat, Mat& g_x) {
  for (Eigen::Index v = 0; v < x.rows(); ++v) {
    const double n = norms[v];
    const double ns = n + kNormStabilizer;
    g_x.row(v) += g_hat.row(v) / ns;
    if (n > 0.0) {
      const double proj = x.row(v).dot(g_hat.row(v));
      g_x.row(v) -= (proj / (n * ns * ns)) * x.row(v);
    }
  }
}

}  // namespace

double info_nce(const Mat& anchors, const Mat& positives, double tau, Mat* g_anchors,
                Mat* g_positives) {
  if (tau <= 0.0) throw ConfigError("info_nce: tau must be > 0");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    throw NumericError("info_nce: shape mismatch");
  }
  const Eigen::Index n = anchors.rows();
  if (n == 0) return 0.0;

  Mat a_hat, b_hat;
  Eigen::VectorXd a_norms, b_norms;
  normalize_rows(anchors, a_hat, a_norms);
  normalize_rows(positives, b_hat, b_norms);

  Mat g_a_hat, g_b_hat;
  if (g_anchors || g_positives) {
    g_a_hat.setZero(n, anchors.cols());
    g_b_hat.setZero(n, anchors.cols());
  }

  double loss = 0.0;
  const Eigen::Index block = 1024;
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index rows = std::min(block, n - start);
    // Scores for this block of anchors against every positive.
    Mat s = a_hat.middleRows(start, rows) * b_hat.transpose() / tau;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index a = start + r;
      const double mx = s.row(r).maxCoeff();
      double denom = 0.0;
      for (Eigen::Index w = 0; w < n; ++w) denom += std::exp(s(r, w) - mx);
      loss += -(s(r, a) - mx) + std::log(denom);
      if (g_anchors || g_positives) {
        // dL/ds_aw = softmax_w - [w == a]
        RowVec p = ((s.row(r).array() - mx).exp() / denom).matrix();
        p(a) -= 1.0;
        p /= tau;
        g_a_hat.row(a) += p * b_hat;
        g_b_hat += p.transpose() * a_hat.row(a);  // outer product over candidates w
      }
    }
  }

  if (g_anchors) normalize_rows_backward(anchors, a_hat, a_norms, g_a_hat, *g_anchors);
  if (g_positives) normalize_rows_backward(positives, b_hat, b_norms, g_b_hat, *g_positives);
  return loss;
}

namespace {

Mat gather_rows(const Mat& x, const std::vector<int>& ids) {
  Mat out(static_cast<Eigen::Index>(ids.size()), x.cols());
  for (size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(ids[i]);
  return out;
}

void scatter_add_rows(const Mat& compact, const std::vector<int>& ids, Mat& full) {
  for (size_t i = 0; i < ids.size(); ++i) full.row(ids[i]) += compact.row(static_cast<Eigen::Index>(i));
}

}  // namespace

double contrastive_loss(const Mat& zv1, const Mat& zv2, const Mat& zv3,
                        const std::vector<int>& user_gids, const std::vector<int>& item_gids,
                        double tau, Mat* g_v1, Mat* g_v2, Mat* g_v3) {
  double loss = 0.0;
  if (!user_gids.empty()) {
    Mat a = gather_rows(zv1, user_gids);
    Mat b = gather_rows(zv2, user_gids);
    Mat ga, gb;
    if (g_v1) ga.setZero(a.rows(), a.cols());
    if (g_v2) gb.setZero(b.rows(), b.cols());
    loss += info_nce(a, b, tau, g_v1 ? &ga : nullptr, g_v2 ? &gb : nullptr);
    if (g_v1) scatter_add_rows(ga, user_gids, *g_v1);
    if (g_v2) scatter_add_rows(gb, user_gids, *g_v2);
  }
  if (!item_gids.empty()) {
    Mat a = gather_rows(zv1, item_gids);
    Mat b = gather_rows(zv3, item_gids);
    Mat ga, gb;
    if (g_v1) ga.setZero(a.rows(), a.cols());
    if (g_v3) gb.setZero(b.rows(), b.cols());
    loss += info_nce(a, b, tau, g_v1 ? &ga : nullptr, g_v3 ? &gb : nullptr);
    if (g_v1) scatter_add_rows(ga, item_gids, *g_v1);
    if (g_v3) scatter_add_rows(gb, item_gids, *g_v3);
  }
  return loss;
}

double bpr_loss(const Mat& z_hat, const std::vector<BprTriple>& triples, Mat* g_z_hat) {
  double loss = 0.0;
  for (const auto& t : triples) {
    const RowVec zu = z_hat.row(t.user);
    const RowVec zi = z_hat.row(t.pos);
    const RowVec zj = z_hat.row(t.neg);
    const double s = zu.dot(zi) - zu.dot(zj);
    loss += neg_log_sigmoid(s);
    if (g_z_hat) {
      // d/ds of softplus(-s) = -sigmoid(-s)
      const double g = -1.0 / (1.0 + std::exp(s));
      g_z_hat->row(t.user) += g * (zi - zj);
      g_z_hat->row(t.pos) += g * zu;
      g_z_hat->row(t.neg) -= g * zu;
    }
  }
  return loss;
}

double transe_loss(const Mat& Z, const Mat& Zr, const std::vector<TranseQuad>& quads, Mat* g_z,
                   Mat* g_zr) {
  double loss = 0.0;
  for (const auto& q : quads) {
    const RowVec base = Z.row(q.head) + Zr.row(q.relation);
    const RowVec v_pos = base - Z.row(q.tail);
    const RowVec v_neg = base - Z.row(q.neg_tail);
    const double d_pos = v_pos.norm();
    const double d_neg = v_neg.norm();
    const double margin = d_neg - d_pos;
    loss += neg_log_sigmoid(margin);
    if (g_z && g_zr) {
      const double g = -1.0 / (1.0 + std::exp(margin));
      RowVec u_pos = RowVec::Zero(v_pos.size());
      RowVec u_neg = RowVec::Zero(v_neg.size());
      if (d_pos > 0.0) u_pos = v_pos / d_pos;
      if (d_neg > 0.0) u_neg = v_neg / d_neg;
      g_z->row(q.head) += g * (u_neg - u_pos);
      g_zr->row(q.relation) += g * (u_neg - u_pos);
      g_z->row(q.tail) += g * u_pos;
      g_z->row(q.neg_tail) -= g * u_neg;
    }
  }
  return loss;
}

}  // namespace cikg
