#include <cmath>

#include "catch_amalgamated.hpp"
#include "scq/bench.hpp"
#include "scq/error.hpp"
#include "scq/weights.hpp"

using namespace scq;
using Catch::Approx;

namespace {

std::vector<ConformalP> from_counts(const std::vector<std::size_t>& counts, std::size_t n_cal) {
  std::vector<ConformalP> out;
  for (auto c : counts) out.push_back({c, n_cal});
  return out;
}

// Direct evaluation of the screened estimator with an explicit matrix.
std::vector<double> raw_pi_oracle(const std::vector<double>& omega, const std::vector<ConformalP>& p,
                                  const std::vector<ConformalP>& pt, double lambda) {
  const std::size_t m = p.size();
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double exceed = (p[i].value() > lambda ? 1.0 : 0.0) + (pt[i].value() > lambda ? 1.0 : 0.0);
      num += omega[j * m + i] * exceed;
      den += omega[j * m + i];
    }
    out[j] = 1.0 - num / (2.0 * (1.0 - lambda) * den);
  }
  return out;
}

}  // namespace

TEST_CASE("group weight matrix is the indicator of equal ids", "[weights]") {
  const auto omega = weight_matrix(SideInfo::groups({1, 1, 2}), WeightMatrix::Kind::group);
  CHECK(omega.dense() == std::vector<double>{1, 1, 0, 1, 1, 0, 0, 0, 1});
  CHECK_FALSE(omega.bandwidth());
}

TEST_CASE("kernel weight matrix decays by exp(-1/2) at one bandwidth", "[weights]") {
  const double h = 0.7;
  BandwidthChoice bw{BandwidthRule::fixed, h};
  const auto omega = weight_matrix(SideInfo::positions({0.0, h, 2 * h}), WeightMatrix::Kind::kernel, bw);
  CHECK(omega(0, 1) / omega(0, 0) == Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(omega(0, 2) / omega(0, 0) == Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(*omega.bandwidth() == h);
}

TEST_CASE("single unit gives the 1x1 unit matrix", "[weights]") {
  const auto g = weight_matrix(SideInfo::groups({4}), WeightMatrix::Kind::group);
  CHECK(g.dense() == std::vector<double>{1.0});
  const auto k = weight_matrix(SideInfo::positions({3.0}), WeightMatrix::Kind::kernel);
  REQUIRE(k.size() == 1);
  CHECK(k.smooth(std::vector<double>{2.0}) == std::vector<double>{2.0});
}

TEST_CASE("weight matrix rejects a side-info variant mismatch", "[weights]") {
  CHECK_THROWS_AS(weight_matrix(SideInfo::groups({1, 2}), WeightMatrix::Kind::kernel), VariantMismatch);
  CHECK_THROWS_AS(weight_matrix(SideInfo::positions({1, 2}), WeightMatrix::Kind::group), VariantMismatch);
}

TEST_CASE("Silverman bandwidth for positions", "[weights]") {
  std::vector<double> s(100);
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = static_cast<double>(j + 1);
  double mean = 50.5;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double want = 1.06 * std::sqrt(ss / 99.0) * std::pow(100.0, -0.2);
  CHECK(silverman_bandwidth(s) == Approx(want).epsilon(1e-14));
  const auto omega = weight_matrix(SideInfo::positions(s), WeightMatrix::Kind::kernel);
  CHECK(*omega.bandwidth() == Approx(want).epsilon(1e-14));
}

TEST_CASE("sparsity estimator on hand-worked inputs", "[weights]") {
  const auto omega = weight_matrix(SideInfo::groups({0, 0}), WeightMatrix::Kind::group);
  // p = (0.6, 0.2), p~ = (0.7, 0.9) on a grid of tenths.
  const auto p = from_counts({6, 2}, 9);
  const auto pt = from_counts({7, 9}, 9);
  const auto est = estimate_sparsity(omega, p, pt, 0.5);
  CHECK(est.raw[0] == Approx(-0.5));
  CHECK(est.raw[1] == Approx(-0.5));
  CHECK(est.pi_hat[0] == kPiClip);

  const auto ones = from_counts({10, 10, 10}, 9);
  const auto omega3 = weight_matrix(SideInfo::index_positions(3), WeightMatrix::Kind::kernel);
  const auto null_est = estimate_sparsity(omega3, ones, ones, 0.5);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(null_est.raw[j] == Approx(-1.0));
    CHECK(null_est.pi_hat[j] == kPiClip);
  }

  const auto small = from_counts({1, 2, 1}, 9);
  const auto sig_est = estimate_sparsity(omega3, small, small, 0.5);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(sig_est.raw[j] == 1.0);
    CHECK(sig_est.pi_hat[j] == 0.5 - kPiClip);
  }
}

TEST_CASE("structure and oracle weights", "[weights]") {
  SparsityEstimate est;
  est.pi_hat = {0.25, 1.0 / 3.0, kPiClip, 0.5 - kPiClip};
  const auto w = structure_weights(est);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == Approx(2.0).epsilon(1e-14));
  CHECK(w[2] == Approx(1e-3 / 0.499).epsilon(1e-14));
  CHECK(w[3] == Approx(0.499 / 1e-3).epsilon(1e-12));

  const auto o = oracle_weights(std::vector<double>{0.5, 0.9, 0.01, 0.6});
  CHECK(o[0] == 1.0);
  CHECK(o[1] == Approx(9.0).epsilon(1e-14));
  CHECK(o[2] == Approx(1.0 / 99.0).epsilon(1e-14));
  CHECK(o[3] == Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(oracle_weights(std::vector<double>{0.0}), PiOutOfRange);
  CHECK_THROWS_AS(oracle_weights(std::vector<double>{1.0}), PiOutOfRange);
}

TEST_CASE("lazy smoothing matches the dense matrix", "[weights][property]") {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> cnt(1, 21);
  std::uniform_real_distribution<double> pos(0.0, 50.0);
  std::uniform_int_distribution<std::int64_t> grp(0, 4);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t m = 1 + static_cast<std::size_t>(rep) * 3;
    std::vector<ConformalP> p(m);
    std::vector<ConformalP> pt(m);
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = {cnt(rng), 20};
      pt[j] = {cnt(rng), 20};
    }
    std::vector<double> s(m);
    std::vector<std::int64_t> g(m);
    for (std::size_t j = 0; j < m; ++j) {
      s[j] = pos(rng);
      g[j] = grp(rng);
    }
    const double lambda = 0.05 + 0.9 * static_cast<double>(rep) / 40.0;
    for (const auto& omega : {weight_matrix(SideInfo::positions(s), WeightMatrix::Kind::kernel),
                              weight_matrix(SideInfo::groups(g), WeightMatrix::Kind::group)}) {
      const auto est = estimate_sparsity(omega, p, pt, lambda);
      const auto want = raw_pi_oracle(omega.dense(), p, pt, lambda);
      for (std::size_t j = 0; j < m; ++j) CHECK(est.raw[j] == Approx(want[j]).margin(1e-12));
    }
  }
}

TEST_CASE("weights are invariant to swapping p-value pairs", "[weights][property]") {
  Rng rng(4);
  std::uniform_int_distribution<std::size_t> cnt(1, 31);
  std::bernoulli_distribution flip(0.5);
  const std::size_t m = 60;
  std::vector<double> s(m);
  for (std::size_t j = 0; j < m; ++j) s[j] = static_cast<double>(j + 1);
  const auto omega = weight_matrix(SideInfo::positions(s), WeightMatrix::Kind::kernel);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<ConformalP> p(m);
    std::vector<ConformalP> pt(m);
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = {cnt(rng), 30};
      pt[j] = {cnt(rng), 30};
    }
    auto sp = p;
    auto spt = pt;
    for (std::size_t j = 0; j < m; ++j) {
      if (flip(rng)) std::swap(sp[j], spt[j]);
    }
    const auto a = structure_weights(estimate_sparsity(omega, p, pt, 0.1));
    const auto b = structure_weights(estimate_sparsity(omega, sp, spt, 0.1));
    CHECK(a == b);
  }
}

TEST_CASE("weights stay positive and finite on saturated inputs", "[weights][property]") {
  Rng rng(6);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 1 + static_cast<std::size_t>(rep);
    std::vector<ConformalP> p(m);
    std::vector<ConformalP> pt(m);
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = {coin(rng) ? 1u : 11u, 10};
      pt[j] = {coin(rng) ? 1u : 11u, 10};
    }
    const auto omega = weight_matrix(SideInfo::index_positions(m), WeightMatrix::Kind::kernel);
    for (double lambda : {0.01, 0.1, 0.5, 0.99}) {
      const auto est = estimate_sparsity(omega, p, pt, lambda);
      for (double w : structure_weights(est)) {
        CHECK(std::isfinite(w));
        CHECK(w >= kPiClip / (0.5 - kPiClip) * (1 - 1e-12));
        CHECK(w <= (0.5 - kPiClip) / kPiClip * (1 + 1e-12));
      }
      for (double pi : est.pi_hat) {
        CHECK(pi >= kPiClip);
        CHECK(pi <= 0.5 - kPiClip);
      }
    }
  }
}

TEST_CASE("weight matrix depends on side information only", "[weights]") {
  const SideInfo side = SideInfo::index_positions(30);
  const auto a = weight_matrix(side, WeightMatrix::Kind::kernel).dense();
  // Same side info attached to completely different test features.
  TestSet t1{FeatureMatrix(30, 2), side, std::nullopt};
  TestSet t2{FeatureMatrix(30, 2), side, std::nullopt};
  for (std::size_t j = 0; j < 30; ++j) t2.features.row(j)[0] = 100.0 + static_cast<double>(j);
  CHECK(weight_matrix(t1.side, WeightMatrix::Kind::kernel).dense() == a);
  CHECK(weight_matrix(t2.side, WeightMatrix::Kind::kernel).dense() == a);
}

TEST_CASE("estimated weights are larger inside dense signal blocks", "[weights][montecarlo]") {
  const auto cfg = benchmark_config(600, 2, 3.0, 1400);
  const auto pi = cfg.pi_vector();
  ClassifierSpec kde{Family::OCC, Method::kde, {}};
  int wins = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    const InferenceData data = replication_data(cfg, 99, r);
    Rng rng = fork_rng(r, 1);
    const auto pv = score_and_calibrate(kde, data, rng);
    const auto w = make_weights(pv, data.test.side, WeightConfig{});
    double dense = 0.0;
    double background = 0.0;
    std::size_t nd = 0;
    std::size_t nb = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (pi[j] == 0.9) {
        dense += w[j];
        ++nd;
      } else if (pi[j] == cfg.background_pi) {
        background += w[j];
        ++nb;
      }
    }
    REQUIRE(nd > 0);
    REQUIRE(nb > 0);
    wins += dense / static_cast<double>(nd) > background / static_cast<double>(nb) ? 1 : 0;
  }
  CHECK(wins >= 95);
}

TEST_CASE("weights CSV layout", "[weights]") {
  SparsityEstimate est;
  est.raw = {-0.5, 0.3};
  est.pi_hat = {kPiClip, 0.3};
  const std::vector<double> w{0.5, 1.5};
  const auto csv = weights_csv(SideInfo::groups({7, 8}), &est, w);
  CHECK(csv == "unit,side,pi_raw,pi_clipped,weight\n1,7,-0.5,0.001,0.5\n2,8,0.3,0.3,1.5\n");
}
