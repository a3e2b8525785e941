#include <cmath>
#include <optional>
#include <set>

#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "scq/bench.hpp"
#include "scq/error.hpp"
#include "scq/modelselect.hpp"

using namespace scq;

namespace {

const ClassifierSpec kKde{Family::OCC, Method::kde, {}};
const ClassifierSpec kKnn{Family::OCC, Method::knn, {}};
const ClassifierSpec kRatio{Family::PUC, Method::kde_ratio, {}};
const ClassifierSpec kBic{Family::BIC, Method::logistic, {}};

InferenceData small_data(std::uint64_t seed, std::size_t r, std::size_t outliers = 20) {
  auto cfg = benchmark_config(240, 2, 3.0, 700);
  cfg.labeled_outliers = outliers;
  return replication_data(cfg, seed, r);
}

SelectionOptions options_for(std::uint64_t seed) {
  SelectionOptions o;
  o.alpha = 0.1;
  o.fit_seed = derive_seed(seed, 1);
  o.coin_seed = derive_seed(seed, 2);
  return o;
}

std::set<std::size_t> subset(Rng& rng, std::size_t m) {
  std::bernoulli_distribution coin(0.5);
  std::set<std::size_t> s;
  for (std::size_t j = 0; j < m; ++j) {
    if (coin(rng)) s.insert(j);
  }
  return s;
}

void same_trace(const SelectionTrace& a, const SelectionTrace& b) {
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t k = 0; k < a.candidates.size(); ++k) {
    CHECK(a.candidates[k].r_k == b.candidates[k].r_k);
    CHECK(a.candidates[k].prelim_size == b.candidates[k].prelim_size);
  }
  CHECK(a.selected == b.selected);
  CHECK(a.lambda_star == b.lambda_star);
}

}  // namespace

TEST_CASE("preliminary partition examples", "[modelselect]") {
  const std::vector<double> ones(5, 1.0);
  CHECK(preliminary_partition(ones, ones, 0.1).size() == 0);

  // N = 99: one unit with min p = 1/100 <= alpha0 / m = 0.2 / 5.
  std::vector<double> p(5, 1.0);
  std::vector<double> pt(5, 1.0);
  pt[2] = 0.01;
  const auto r = preliminary_partition(p, pt, 0.2);
  CHECK(r.indices == std::vector<std::size_t>{2});
  CHECK(preliminary_partition(pt, p, 0.2).indices == r.indices);
  CHECK(preliminary_partition(p, pt, 0.04).indices == std::vector<std::size_t>{});
}

TEST_CASE("pseudo scores follow min-max and coin orientation", "[modelselect]") {
  const std::vector<ScorePair> one{{0.3, 0.1}};
  RejectionSet all;
  all.indices = {0};
  const auto mm = pseudo_scores(one, all, CoinStream(0));
  CHECK(mm[0].v == 0.1);
  CHECK(mm[0].v_tilde == 0.3);

  // Find seeds whose first coin is heads and tails.
  std::optional<std::uint64_t> heads;
  std::optional<std::uint64_t> tails;
  for (std::uint64_t s = 0; !(heads && tails); ++s) (CoinStream(s).coin(0) ? heads : tails) = s;
  const auto h = pseudo_scores(one, RejectionSet{}, CoinStream(*heads));
  CHECK(h[0].v == 0.1);
  CHECK(h[0].v_tilde == 0.3);
  const auto t = pseudo_scores(one, RejectionSet{}, CoinStream(*tails));
  CHECK(t[0].v == 0.3);
  CHECK(t[0].v_tilde == 0.1);
}

TEST_CASE("pseudo pairs permute each input pair", "[modelselect][property]") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 1 + static_cast<std::size_t>(rep);
    std::vector<ScorePair> pairs(m);
    for (auto& pr : pairs) pr = {u(rng), u(rng)};
    RejectionSet prelim;
    for (auto j : subset(rng, m)) prelim.indices.push_back(j);
    const auto out = pseudo_scores(pairs, prelim, CoinStream(static_cast<std::uint64_t>(rep)));
    for (std::size_t j = 0; j < m; ++j) {
      CHECK(std::multiset<double>{out[j].v, out[j].v_tilde} == std::multiset<double>{pairs[j].v, pairs[j].v_tilde});
      if (prelim.contains(j)) CHECK(out[j].v <= out[j].v_tilde);
    }
    // Swapping any pair leaves the pseudo pairs unchanged.
    auto swapped = pairs;
    for (auto j : subset(rng, m)) std::swap(swapped[j].v, swapped[j].v_tilde);
    const auto out2 = pseudo_scores(swapped, prelim, CoinStream(static_cast<std::uint64_t>(rep)));
    for (std::size_t j = 0; j < m; ++j) {
      CHECK(out2[j].v == out[j].v);
      CHECK(out2[j].v_tilde == out[j].v_tilde);
    }
  }
}

TEST_CASE("coins are fair and depend on seed and index only", "[modelselect]") {
  const CoinStream coins(123);
  std::size_t heads = 0;
  const std::size_t n = 20000;
  for (std::size_t j = 0; j < n; ++j) heads += coins.coin(j) ? 1 : 0;
  // Within 4 standard deviations of n / 2.
  CHECK(std::abs(static_cast<double>(heads) - n / 2.0) < 4.0 * std::sqrt(n / 4.0));
  // Recomputing in another order gives the same bits.
  for (std::size_t j = n; j-- > 0;) CHECK(CoinStream(123).coin(j) == coins.coin(j));
}

TEST_CASE("single-candidate toolbox matches plain SCQ", "[modelselect]") {
  const auto data = small_data(2, 0);
  const auto opts = options_for(7);
  const auto sel = ptams({{kKde}, {}}, data, opts);
  CHECK(sel.trace.selected == 0);
  CHECK_FALSE(sel.trace.tie_rule_applied);
  Rng rng = fork_rng(opts.fit_seed, 0);
  const auto plain = run_scq(kKde, data, opts.weights, opts.alpha, rng);
  CHECK(sel.final_result.qvalues == plain.qvalues);
  CHECK(sel.final_result.rejection.indices == plain.rejection.indices);
  CHECK(rejection_report_json(sel.final_result, 0.1) == rejection_report_json(plain, 0.1));
}

TEST_CASE("singleton lambda grid reproduces plain selection", "[modelselect]") {
  const auto data = small_data(3, 0);
  const Toolbox box{{kKde, kKnn, kRatio}, {}};
  const auto plain = ptams(box, data, options_for(4));
  const auto plus = ptams_plus(box, data, options_for(4), {0.1});
  CHECK(plus.trace.selected == plain.trace.selected);
  CHECK(*plus.trace.lambda_star == 0.1);
  CHECK(plus.final_result.qvalues == plain.final_result.qvalues);
  CHECK(plus.final_result.rejection.indices == plain.final_result.rejection.indices);
}

TEST_CASE("failed candidates are excluded", "[modelselect]") {
  const auto data = small_data(4, 0, 0);  // no labeled outliers
  const auto sel = ptams({{kBic, kKde}, {}}, data, options_for(5));
  CHECK(sel.trace.candidates[0].r_k == -1);
  CHECK_FALSE(sel.trace.candidates[0].error.empty());
  CHECK(sel.trace.selected == 1);
  CHECK_THROWS_AS(ptams({{kBic}, {}}, data, options_for(5)), AllCandidatesFailed);
}

TEST_CASE("ties go to the first candidate", "[modelselect]") {
  const auto data = small_data(5, 0);
  const auto sel = ptams({{kKde, kKde}, {"a", "b"}}, data, options_for(6));
  // Same spec with different fit streams; kde fitting uses no randomness.
  CHECK(sel.trace.candidates[0].r_k == sel.trace.candidates[1].r_k);
  CHECK(sel.trace.selected == 0);
  CHECK(sel.trace.tie_rule_applied);
}

TEST_CASE("selection is invariant to swapping test and mirror points", "[modelselect][property]") {
  const Toolbox box{{kKde, kKnn, kRatio, {Family::PUC, Method::pu_logistic, {}}}, {}};
  Rng rng(8);
  for (std::size_t inst = 0; inst < 4; ++inst) {
    const auto data = small_data(6, inst);
    const auto opts = options_for(inst);
    const auto base = ptams(box, data, opts);
    const auto base_plus = ptams_plus(box, data, opts);
    for (int rep = 0; rep < 5; ++rep) {
      auto swapped = data;
      swapped.swap_pairs(subset(rng, data.m()));
      same_trace(ptams(box, swapped, opts).trace, base.trace);
      same_trace(ptams_plus(box, swapped, opts).trace, base_plus.trace);
    }
    auto all = data;
    std::set<std::size_t> every;
    for (std::size_t j = 0; j < data.m(); ++j) every.insert(j);
    all.swap_pairs(every);
    same_trace(ptams(box, all, opts).trace, base.trace);
  }
}

TEST_CASE("trace JSON layout", "[modelselect]") {
  SelectionTrace t;
  t.candidates = {{"OCC/kde", 3, 7, ""}, {"BIC/logistic", 0, -1, "needs labeled outliers"}};
  t.selected = 0;
  t.lambda_star = 0.1;
  const auto j = nlohmann::json::parse(t.to_json());
  CHECK(j["selected"] == 1);
  CHECK(j["candidates"][0]["name"] == "OCC/kde");
  CHECK(j["candidates"][0]["r_k"] == 7);
  CHECK(j["candidates"][0]["prelim_size"] == 3);
  CHECK(j["candidates"][1]["r_k"] == -1);
  CHECK(j["lambda_star"] == 0.1);
}

TEST_CASE("P-TAMS+ stays quiet on null-only data", "[modelselect][montecarlo]") {
  SyntheticConfig cfg;
  cfg.m = 200;
  cfg.p = 2;
  cfg.null_pool_size = 600;
  const Toolbox box{{kKde, kKnn}, {}};
  int quiet = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    const auto data = replication_data(cfg, 10, r);
    SelectionOptions opts = options_for(r);
    opts.alpha = 0.05;
    const auto res = ptams_plus(box, data, opts, {0.1, 0.5, 0.9});
    quiet += res.final_result.rejection.size() == 0 ? 1 : 0;
  }
  CHECK(quiet >= 99);
}
