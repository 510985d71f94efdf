#include <algorithm>
#include <cmath>
#include <set>

#include "cikg/objectives.hpp"
#include "doctest.h"

using namespace cikg;

namespace {

Mat random_mat(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.next_normal();
  }
  return m;
}

// Literal transcription of the InfoNCE definition, cosines via a double loop.
double naive_info_nce(const Mat& a, const Mat& b, double tau) {
  const int n = static_cast<int>(a.rows());
  double total = 0.0;
  for (int u = 0; u < n; ++u) {
    double denom = 0.0;
    for (int w = 0; w < n; ++w) {
      denom += std::exp(stable_cosine(a.row(u), b.row(w)) / tau);
    }
    total += -std::log(std::exp(stable_cosine(a.row(u), b.row(u)) / tau) / denom);
  }
  return total;
}

}  // namespace

TEST_CASE("mask schedule endpoints and midpoint") {
  MaskSchedule sched;
  sched.alpha = 0.02;
  sched.omega = 0.95;
  sched.lambda_cap = 150;

  for (MaskStrategy strat : {MaskStrategy::linear, MaskStrategy::exponential}) {
    sched.strategy = strat;
    CHECK(schedule_mask_rate(sched, 0) == 0.02);
    CHECK(schedule_mask_rate(sched, 150) == 0.95);
    CHECK(schedule_mask_rate(sched, 300) == 0.95);
  }

  sched.strategy = MaskStrategy::exponential;
  // Geometric-mean midpoint: alpha*(omega/alpha)^(1/2) = sqrt(alpha*omega).
  CHECK(schedule_mask_rate(sched, 75) == doctest::Approx(std::sqrt(0.02 * 0.95)).epsilon(1e-12));
  CHECK(schedule_mask_rate(sched, 75) == doctest::Approx(0.1378405).epsilon(1e-6));

  sched.strategy = MaskStrategy::constant;
  CHECK(schedule_mask_rate(sched, 0) == 0.95);
  CHECK(schedule_mask_rate(sched, 40) == 0.95);
}

TEST_CASE("mask schedule validates its fields at construction") {
  MaskSchedule bad;
  bad.alpha = 0.5;
  bad.omega = 0.4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.alpha = 0.0;
  bad.omega = 0.9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.alpha = 0.1;
  bad.lambda_cap = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("exponential schedule stays strictly below linear inside the ramp") {
  Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    MaskSchedule sched;
    sched.alpha = 0.001 + 0.9 * rng.next_double();
    sched.omega = sched.alpha + (1.0 - sched.alpha) * (0.01 + 0.99 * rng.next_double());
    sched.omega = std::min(sched.omega, 1.0);
    sched.lambda_cap = 10 + static_cast<int>(rng.next_index(491));
    sched.validate();

    MaskSchedule lin = sched;
    lin.strategy = MaskStrategy::linear;
    MaskSchedule expo = sched;
    expo.strategy = MaskStrategy::exponential;

    CHECK(std::abs(schedule_mask_rate(lin, 0) - schedule_mask_rate(expo, 0)) < 1e-12);
    CHECK(std::abs(schedule_mask_rate(lin, sched.lambda_cap) -
                   schedule_mask_rate(expo, sched.lambda_cap)) < 1e-12);

    double prev_lin = -1.0, prev_exp = -1.0;
    for (int q = 0; q <= sched.lambda_cap + 5; ++q) {
      const double l = schedule_mask_rate(lin, q);
      const double e = schedule_mask_rate(expo, q);
      CHECK(l >= prev_lin);  // monotone non-decreasing
      CHECK(e >= prev_exp);
      prev_lin = l;
      prev_exp = e;
      if (q > 0 && q < sched.lambda_cap) CHECK(e < l);
      if (q >= sched.lambda_cap) {
        CHECK(l == sched.omega);
        CHECK(e == sched.omega);
      }
    }
  }
}

TEST_CASE("mask sampling rounds half-up with a floor of one") {
  std::vector<int> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(100 + i);

  CHECK(sample_mask_set(ids, 1.0, 1).size() == 10);
  CHECK(sample_mask_set(ids, 0.0, 1).empty());
  CHECK(sample_mask_set(ids, 0.5, 1).size() == 5);
  CHECK(sample_mask_set(ids, 0.01, 1).size() == 1);  // floor

  auto a = sample_mask_set(ids, 0.4, 7);
  auto b = sample_mask_set(ids, 0.4, 7);
  CHECK(a == b);
  for (int gid : a) CHECK(std::count(ids.begin(), ids.end(), gid) == 1);
}

TEST_CASE("apply_mask replaces exactly the masked rows") {
  Rng rng(3);
  Mat z = random_mat(rng, 6, 4);
  RowVec token = random_mat(rng, 1, 4).row(0);

  Mat same = apply_mask(z, {}, token);
  CHECK((same - z).cwiseAbs().maxCoeff() == 0.0);

  Mat all = apply_mask(z, {3, 4, 5}, token);
  for (int r = 3; r < 6; ++r) CHECK((all.row(r) - token).cwiseAbs().maxCoeff() == 0.0);
  for (int r = 0; r < 3; ++r) CHECK((all.row(r) - z.row(r)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(apply_mask(z, {17}, token), NumericError);
}

TEST_CASE("reconstruction loss closed forms") {
  const int d = 4;
  Mat orig(2, d), recon(2, d);
  orig.setZero();
  recon.setZero();
  orig(0, 0) = 1.0;
  orig(1, 1) = 2.0;

  // Perfect reconstruction.
  recon = orig;
  CHECK(reconstruction_loss(orig, recon, {0, 1}, 2.0) == doctest::Approx(0.0).epsilon(1e-12));

  // Orthogonal pairs, eta = 1 -> 1.
  recon.setZero();
  recon(0, 1) = 3.0;
  recon(1, 0) = 0.5;
  CHECK(reconstruction_loss(orig, recon, {0, 1}, 1.0) == doctest::Approx(1.0).epsilon(1e-9));

  // Antipodal pairs, eta = 2 -> (1 - (-1))^2 = 4.
  recon = -orig;
  CHECK(reconstruction_loss(orig, recon, {0, 1}, 2.0) == doctest::Approx(4.0).epsilon(1e-9));

  CHECK_THROWS_AS(reconstruction_loss(orig, recon, {}, 2.0), ConfigError);
}

TEST_CASE("reconstruction loss is invariant to positive row rescaling") {
  Rng rng(4);
  Mat orig = random_mat(rng, 5, 6);
  Mat recon = random_mat(rng, 5, 6);
  std::vector<int> masked = {1, 3, 4};
  const double base = reconstruction_loss(orig, recon, masked, 2.0);

  Mat orig2 = orig;
  orig2.row(3) *= 17.0;
  Mat recon2 = recon;
  recon2.row(1) *= 0.03;
  CHECK(reconstruction_loss(orig2, recon2, masked, 2.0) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("InfoNCE closed forms") {
  // Single ID with identical views: -log(1) = 0.
  Mat one(1, 3);
  one << 0.3, -0.2, 0.9;
  CHECK(info_nce(one, one, 0.5) == doctest::Approx(0.0).epsilon(1e-12));

  // Two orthonormal one-hot rows in both views at tau = 1.
  Mat basis = Mat::Identity(2, 2);
  const double per_anchor = std::log(1.0 + std::exp(-1.0));
  CHECK(info_nce(basis, basis, 1.0) == doctest::Approx(2.0 * per_anchor).epsilon(1e-9));
  CHECK(info_nce(basis, basis, 1.0) == doctest::Approx(0.62652).epsilon(1e-4));

  // Cosine scale invariance.
  Rng rng(5);
  Mat a = random_mat(rng, 4, 3);
  Mat b = random_mat(rng, 4, 3);
  const double base = info_nce(a, b, 0.3);
  a.row(2) *= 40.0;
  b.row(0) *= 0.01;
  CHECK(info_nce(a, b, 0.3) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("InfoNCE matches the naive double-loop reference") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 1 + static_cast<int>(rng.next_index(12));
    Mat a = random_mat(rng, n, 5);
    Mat b = random_mat(rng, n, 5);
    const double tau = 0.1 + rng.next_double();
    CHECK(info_nce(a, b, tau) == doctest::Approx(naive_info_nce(a, b, tau)).epsilon(1e-9));
  }
}

TEST_CASE("contrastive loss composes the two sides") {
  Rng rng(7);
  const int n = 9;
  Mat v1 = random_mat(rng, n, 4);
  Mat v2 = random_mat(rng, n, 4);
  Mat v3 = random_mat(rng, n, 4);
  std::vector<int> users = {0, 1, 2, 3};
  std::vector<int> items = {4, 5, 6, 7, 8};

  auto gather = [](const Mat& m, const std::vector<int>& ids) {
    Mat out(static_cast<Eigen::Index>(ids.size()), m.cols());
    for (size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(ids[i]);
    return out;
  };
  const double expect = naive_info_nce(gather(v1, users), gather(v2, users), 0.2) +
                        naive_info_nce(gather(v1, items), gather(v3, items), 0.2);
  CHECK(contrastive_loss(v1, v2, v3, users, items, 0.2) == doctest::Approx(expect).epsilon(1e-9));

  // A single-user side contributes zero; an empty side contributes zero.
  CHECK(contrastive_loss(v1, v2, v3, {0}, {}, 0.2) == doctest::Approx(0.0).epsilon(1e-12));

  // Identical views: every anchor's positive is its own maximal-similarity
  // candidate; the value still follows the softmax over all candidates.
  CHECK(contrastive_loss(v1, v1, v1, users, items, 0.2) ==
        doctest::Approx(naive_info_nce(gather(v1, users), gather(v1, users), 0.2) +
                        naive_info_nce(gather(v1, items), gather(v1, items), 0.2))
            .epsilon(1e-9));
}

TEST_CASE("BPR closed forms") {
  Mat z(3, 2);
  z << 1.0, 0.0,  // user
      1.0, 0.0,   // positive, score 1
      1.0, 0.0;   // negative, score 1 (tied)
  std::vector<BprTriple> tied = {{0, 1, 2}};
  CHECK(bpr_loss(z, tied) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Mat gap(3, 1);
  gap << 1.0, 20.0, 0.0;  // score gap +20
  CHECK(bpr_loss(gap, tied) < 1e-8);

  Mat neg(3, 1);
  neg << 1.0, 0.0, 2.0;  // score gap -2
  CHECK(bpr_loss(neg, tied) == doctest::Approx(2.0 + std::log1p(std::exp(-2.0))).epsilon(1e-9));
  CHECK(bpr_loss(neg, tied) == doctest::Approx(2.126928).epsilon(1e-6));
}

TEST_CASE("translation loss closed forms and antisymmetry") {
  const int d = 3;
  Mat z(3, d), zr(1, d);
  // z_h + z_r = z_t exactly; corrupted tail at distance 1.
  z.row(0) << 0.2, -0.1, 0.4;   // head
  zr.row(0) << 0.1, 0.3, -0.2;  // relation
  z.row(1) = z.row(0) + zr.row(0);  // true tail
  z.row(2) = z.row(1);
  z(2, 0) += 1.0;  // corrupted tail at distance exactly 1

  std::vector<TranseQuad> quads = {{0, 0, 1, 2}};
  CHECK(transe_loss(z, zr, quads) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  CHECK(transe_loss(z, zr, quads) == doctest::Approx(0.313262).epsilon(1e-6));

  // Degenerate corrupted tail equal to the true tail: -ln sigmoid(0) = ln 2.
  std::vector<TranseQuad> degenerate = {{0, 0, 1, 1}};
  CHECK(transe_loss(z, zr, degenerate) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Swapping tails negates the margin.
  Rng rng(8);
  Mat zz = random_mat(rng, 4, d);
  Mat zzr = random_mat(rng, 2, d);
  std::vector<TranseQuad> fwd = {{0, 1, 2, 3}};
  std::vector<TranseQuad> swapped = {{0, 1, 3, 2}};
  const double margin_fwd = (zz.row(0) + zzr.row(1) - zz.row(3)).norm() -
                            (zz.row(0) + zzr.row(1) - zz.row(2)).norm();
  CHECK(transe_loss(zz, zzr, fwd) == doctest::Approx(neg_log_sigmoid(margin_fwd)).epsilon(1e-12));
  CHECK(transe_loss(zz, zzr, swapped) ==
        doctest::Approx(neg_log_sigmoid(-margin_fwd)).epsilon(1e-12));
}

TEST_CASE("combined loss is the weighted sum") {
  LossWeights w;
  w.lambda1 = 1.0;
  w.lambda2 = 0.0;
  w.lambda3 = 0.0;
  CHECK(combined_loss(3.25, 9.0, 4.0, w) == 3.25);

  w.lambda1 = 0.5;
  w.lambda2 = 2.0;
  w.lambda3 = 1.0;
  CHECK(combined_loss(1.0, 2.0, 3.0, w) == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(combined_loss(0.0, 0.0, 0.0, w) == 0.0);
}

TEST_CASE("losses are non-negative and finite on random inputs") {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 4 + static_cast<int>(rng.next_index(6));
    Mat z = random_mat(rng, n, 4);
    Mat z2 = random_mat(rng, n, 4);
    Mat zr = random_mat(rng, 2, 4);

    const double lu = reconstruction_loss(z, z2, {0, 1}, 2.0);
    CHECK(lu >= 0.0);
    CHECK(std::isfinite(lu));

    const double lc = info_nce(z, z2, 0.2);
    CHECK(lc >= -1e-12);
    CHECK(std::isfinite(lc));

    std::vector<BprTriple> triples = {{0, 1, 2}, {1, 2, 3}};
    const double lr = bpr_loss(z, triples);
    CHECK(lr > 0.0);
    CHECK(std::isfinite(lr));

    std::vector<TranseQuad> quads = {{0, 0, 1, 2}, {1, 1, 2, 3}};
    const double lt = transe_loss(z, zr, quads);
    CHECK(lt > 0.0);
    CHECK(std::isfinite(lt));
  }
}

TEST_CASE("loss weight validation") {
  LossWeights w;
  w.eta = 0.5;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w.eta = 2.0;
  w.tau = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}
