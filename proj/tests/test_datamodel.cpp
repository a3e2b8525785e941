#include <cmath>
#include <filesystem>
#include <set>

#include "catch_amalgamated.hpp"
#include "scq/datamodel.hpp"
#include "scq/error.hpp"

using namespace scq;
using Catch::Approx;

namespace {

LabeledPool pool_of(std::size_t n, std::size_t p = 1) {
  LabeledPool pool;
  pool.inliers = FeatureMatrix(n, p);
  for (std::size_t i = 0; i < n; ++i) pool.inliers.row(i)[0] = static_cast<double>(i);
  return pool;
}

std::multiset<double> first_coords(const FeatureMatrix& x) {
  std::multiset<double> s;
  for (std::size_t i = 0; i < x.rows(); ++i) s.insert(x.row(i)[0]);
  return s;
}

}  // namespace

TEST_CASE("split sizes follow the pool and the ratio", "[datamodel]") {
  Rng rng(1);
  auto s = split_nulls(pool_of(5000), 3000, rng);
  CHECK(s.train.rows() == 1000);
  CHECK(s.cal.rows() == 1000);
  CHECK(s.mirror.rows() == 3000);

  s = split_nulls(pool_of(3), 1, rng);
  CHECK(s.train.rows() == 1);
  CHECK(s.cal.rows() == 1);
  CHECK(s.mirror.rows() == 1);

  CHECK_THROWS_AS(split_nulls(pool_of(10), 9, rng), InsufficientNulls);

  s = split_nulls(pool_of(110), 10, rng, SplitOptions{0.25});
  CHECK(s.train.rows() == 25);
  CHECK(s.cal.rows() == 75);
}

TEST_CASE("split is a disjoint partition of the pool", "[datamodel][property]") {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + static_cast<std::size_t>(rep) * 7;
    const std::size_t m = 1 + static_cast<std::size_t>(rep) % (n - 2);
    const auto s = split_nulls(pool_of(n), m, rng);
    std::multiset<double> all;
    for (const auto* x : {&s.train, &s.cal, &s.mirror}) {
      const auto c = first_coords(*x);
      all.insert(c.begin(), c.end());
    }
    CHECK(all == first_coords(pool_of(n).inliers));
    CHECK(std::set<double>(all.begin(), all.end()).size() == n);
    CHECK(s.mirror.rows() == m);
  }
}

TEST_CASE("split is reproducible from the generator state", "[datamodel]") {
  Rng a(42);
  Rng b(42);
  const auto pool = pool_of(200, 2);
  const auto s1 = split_nulls(pool, 50, a);
  const auto s2 = split_nulls(pool, 50, b);
  CHECK(s1.train == s2.train);
  CHECK(s1.cal == s2.cal);
  CHECK(s1.mirror == s2.mirror);
}

TEST_CASE("split assignment is marginally uniform", "[datamodel][montecarlo]") {
  // 10-element pool, m = 4: mirror 4, train 3, cal 3.
  const auto pool = pool_of(10);
  std::vector<std::array<double, 3>> counts(10, {0, 0, 0});
  Rng rng(9);
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    const auto s = split_nulls(pool, 4, rng);
    int role = 0;
    for (const auto* x : {&s.mirror, &s.train, &s.cal}) {
      for (std::size_t i = 0; i < x->rows(); ++i) counts[static_cast<std::size_t>(x->row(i)[0])][role] += 1;
      ++role;
    }
  }
  const std::array<double, 3> expected{0.4 * reps, 0.3 * reps, 0.3 * reps};
  for (const auto& c : counts) {
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) chi2 += (c[k] - expected[k]) * (c[k] - expected[k]) / expected[k];
    CHECK(chi2 < 13.82);  // chi-square(2) upper 0.001 quantile
  }
}

TEST_CASE("null-only configuration draws no signals", "[datamodel]") {
  SyntheticConfig cfg;
  cfg.m = 200;
  cfg.p = 3;
  cfg.null_pool_size = 50;
  Rng rng(3);
  auto [pool, test] = generate_hierarchical(cfg, rng);
  REQUIRE(test.truth);
  CHECK(std::none_of(test.truth->begin(), test.truth->end(), [](bool b) { return b; }));
  CHECK(pool.inliers.rows() == 50);
  CHECK(test.side.kind() == SideInfo::Kind::position);
  CHECK(test.side.position_values()[0] == 1.0);
  CHECK(test.side.position_values()[199] == 200.0);
}

TEST_CASE("full-signal block centres on its alternative mean", "[datamodel]") {
  SyntheticConfig cfg;
  cfg.m = 100;
  cfg.p = 2;
  cfg.sparsity_blocks = {{{1, 100}, 1.0}};
  cfg.alt_components = {{{1, 100}, {10.0, 10.0}, 1.0}};
  cfg.null_pool_size = 10;
  Rng rng(4);
  auto [pool, test] = generate_hierarchical(cfg, rng);
  CHECK(std::all_of(test.truth->begin(), test.truth->end(), [](bool b) { return b; }));
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 100; ++j) mean += test.features.row(j)[d];
    mean /= 100.0;
    CHECK(std::abs(mean - 10.0) <= 3.0 / std::sqrt(200.0));
  }
}

TEST_CASE("signal fraction in a dense block matches its sparsity level", "[datamodel][montecarlo]") {
  SyntheticConfig cfg;
  cfg.m = 400;
  cfg.p = 1;
  cfg.sparsity_blocks = {{{101, 300}, 0.9}};
  cfg.alt_components = {{{1, 400}, {3.0}, 1.0}};
  cfg.null_pool_size = 3;
  const double L = 200.0;
  const double band = 4.0 * std::sqrt(0.9 * 0.1 / L);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = fork_rng(seed, 0);
    auto [pool, test] = generate_hierarchical(cfg, rng);
    double hits = 0.0;
    for (std::size_t j = 100; j < 300; ++j) hits += (*test.truth)[j] ? 1.0 : 0.0;
    CHECK(std::abs(hits / L - 0.9) <= band);
  }
}

TEST_CASE("benchmark layout at full scale", "[datamodel]") {
  const auto cfg = benchmark_config(3000, 2, 3.0, 5000);
  REQUIRE(cfg.sparsity_blocks.size() == 4);
  CHECK(cfg.sparsity_blocks[0].interval.first == 201);
  CHECK(cfg.sparsity_blocks[0].interval.last == 300);
  CHECK(cfg.sparsity_blocks[1].interval.first == 601);
  CHECK(cfg.sparsity_blocks[2].interval.first == 1000);
  CHECK(cfg.sparsity_blocks[2].interval.last == 1100);
  CHECK(cfg.sparsity_blocks[3].interval.last == 1500);
  CHECK(cfg.pi_at(250) == 0.6);
  CHECK(cfg.pi_at(1450) == 0.9);
  CHECK(cfg.pi_at(2000) == 0.01);
  CHECK(cfg.alt_at(1500)->mean == FeatureVector{3.0, 3.0});
  CHECK(cfg.alt_at(1501)->mean == FeatureVector{-2.0, -2.0});
  CHECK(cfg.alt_at(1501)->scale == 0.5);
}

TEST_CASE("synthetic config validation", "[datamodel]") {
  SyntheticConfig cfg;
  cfg.m = 10;
  cfg.null_pool_size = 20;
  cfg.sparsity_blocks = {{{5, 11}, 0.5}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sparsity_blocks = {{{5, 10}, 1.5}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sparsity_blocks = {{{5, 10}, 0.5}};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("CSV parses roles into pool and test set", "[datamodel]") {
  const std::string text =
      "x1,x2,__role__\n"
      "0.5,1.5,train-null\n"
      "-1,2,train-null\n"
      "3,4,test\n";
  auto [pool, test] = parse_csv(text);
  CHECK(pool.inliers.rows() == 2);
  CHECK(pool.outliers.rows() == 0);
  CHECK(test.size() == 1);
  CHECK_FALSE(test.truth);
  CHECK(test.features.row(0)[1] == 4.0);
  CHECK(test.side.kind() == SideInfo::Kind::position);
}

TEST_CASE("CSV diagnostics", "[datamodel]") {
  CHECK_THROWS_AS(parse_csv("x1,__role__\nNaN,test\n"), NonFiniteFeature);
  try {
    parse_csv("x1,__role__\n1,train-null\nnan,test\n");
    FAIL("expected NonFiniteFeature");
  } catch (const NonFiniteFeature& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("x1,x2\n1,2\n"), SchemaMismatch);
  CHECK_THROWS_AS(parse_csv("x1,__role__\nabc,test\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("x1,__role__\n1,2,test\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("x1,__role__\n1,validation\n"), ParseError);
  ColumnSchema schema;
  schema.feature_columns = {"x9"};
  CHECK_THROWS_AS(parse_csv("x1,__role__\n1,test\n", schema), SchemaMismatch);
}

TEST_CASE("hour-of-day side column becomes group side information", "[datamodel]") {
  std::string text = "x1,__role__,__side__\n";
  for (int i = 0; i < 5; ++i) text += std::to_string(i) + ",train-null,\n";
  for (int j = 0; j < 90; ++j) text += std::to_string(j) + ",test," + std::to_string(9 + j % 9) + "\n";
  auto [pool, test] = parse_csv(text);
  REQUIRE(test.side.kind() == SideInfo::Kind::group);
  const auto& ids = test.side.group_ids();
  CHECK(std::set<std::int64_t>(ids.begin(), ids.end()).size() == 9);
}

TEST_CASE("side kind can be forced by the schema", "[datamodel]") {
  const std::string text = "x1,__role__,__side__\n0,train-null,\n1,test,3\n2,test,3\n";
  ColumnSchema schema;
  schema.side_kind = ColumnSchema::SideKind::position;
  CHECK(parse_csv(text, schema).second.side.kind() == SideInfo::Kind::position);
  CHECK(parse_csv(text).second.side.kind() == SideInfo::Kind::group);
  // Distinct integers are an ordering, not categories.
  CHECK(parse_csv("x1,__role__,__side__\n0,test,1\n0,test,2\n").second.side.kind() == SideInfo::Kind::position);
}

TEST_CASE("labels set truth only when every test row is labeled", "[datamodel]") {
  auto [p1, t1] = parse_csv("x1,__role__,__label__\n0,train-null,0\n1,test,1\n2,test,0\n");
  REQUIRE(t1.truth);
  CHECK(*t1.truth == std::vector<bool>{true, false});
  auto [p2, t2] = parse_csv("x1,__role__,__label__\n0,train-null,0\n1,test,1\n2,test,\n");
  CHECK_FALSE(t2.truth);
}

TEST_CASE("save then load is the identity", "[datamodel][property]") {
  const auto dir = std::filesystem::path(SCQ_TEST_BINARY_DIR) / "roundtrip";
  std::filesystem::create_directories(dir);
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    auto cfg = benchmark_config(60, 1 + rep % 3, 2.0, 30);
    cfg.labeled_outliers = rep % 2 == 0 ? 5 : 0;
    auto [pool, test] = generate_hierarchical(cfg, rng);
    if (rep % 4 == 1) {
      std::vector<std::int64_t> g(test.size());
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = static_cast<std::int64_t>(j % 7) - 3;
      test.side = SideInfo::groups(g);
    } else if (rep % 4 == 2) {
      std::vector<double> pos(test.size());
      for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = 0.1 * static_cast<double>(j) - 2.0;
      test.side = SideInfo::positions(pos);
    }
    const auto path = dir / ("data" + std::to_string(rep) + ".csv");
    save_csv(path, pool, test);
    auto [pool2, test2] = load_csv(path);
    CHECK(pool2 == pool);
    CHECK(test2 == test);
  }
}

TEST_CASE("canonical order depends on the row multiset only", "[datamodel]") {
  const auto a = FeatureMatrix::from_rows({{2, 1}, {0, 5}, {2, 0}}, 2);
  const auto b = FeatureMatrix::from_rows({{2, 0}, {2, 1}, {0, 5}}, 2);
  CHECK(a.canonical() == b.canonical());
  CHECK(a.canonical() == FeatureMatrix::from_rows({{0, 5}, {2, 0}, {2, 1}}, 2));
}
