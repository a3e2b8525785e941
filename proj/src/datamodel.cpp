#include "scq/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "scq/error.hpp"

namespace scq {

// ---------------------------------------------------------------------------
// FeatureMatrix

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) {
    throw InvalidArgument("feature dimension must be positive");
  }
  if (data_.size() % dim_ != 0) {
    throw DimensionMismatch("feature buffer size is not a multiple of the dimension");
  }
  rows_ = data_.size() / dim_;
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<FeatureVector>& rows, std::size_t dim) {
  FeatureMatrix out(dim);
  for (const auto& r : rows) {
    out.push_back(r);
  }
  return out;
}

void FeatureMatrix::push_back(std::span<const double> x) {
  if (x.size() != dim_) {
    throw DimensionMismatch("row of length " + std::to_string(x.size()) + " pushed into matrix of dimension " +
                            std::to_string(dim_));
  }
  data_.insert(data_.end(), x.begin(), x.end());
  ++rows_;
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.rows_ == 0) {
    return;
  }
  if (other.dim_ != dim_) {
    throw DimensionMismatch("cannot append matrices of different dimension");
  }
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

void FeatureMatrix::swap_rows_with(FeatureMatrix& other, std::size_t i) {
  auto a = row(i);
  auto b = other.row(i);
  std::swap_ranges(a.begin(), a.end(), b.begin());
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out(dim_);
  out.data_.reserve(indices.size() * dim_);
  for (auto i : indices) {
    out.push_back(row(i));
  }
  return out;
}

FeatureMatrix FeatureMatrix::canonical() const {
  std::vector<std::size_t> order(rows_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    auto ra = row(a);
    auto rb = row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return select(order);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_finite(const FeatureMatrix& x, const char* what) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      if (!std::isfinite(v)) {
        throw NonFiniteFeature(std::string("non-finite feature in ") + what + " row " + std::to_string(i + 1));
      }
    }
  }
}

}  // namespace

void LabeledPool::validate() const {
  if (inliers.rows() < 3) {
    throw InsufficientNulls("labeled pool needs at least 3 inliers, got " + std::to_string(inliers.rows()));
  }
  if (!outliers.empty() && outliers.dim() != inliers.dim()) {
    throw DimensionMismatch("inliers and outliers have different dimensions");
  }
  check_finite(inliers, "inliers");
  check_finite(outliers, "outliers");
}

SideInfo SideInfo::index_positions(std::size_t m) {
  std::vector<double> pos(m);
  for (std::size_t j = 0; j < m; ++j) {
    pos[j] = static_cast<double>(j + 1);
  }
  return positions(std::move(pos));
}

std::size_t SideInfo::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, values_);
}

const std::vector<std::int64_t>& SideInfo::group_ids() const {
  if (kind() != Kind::group) {
    throw VariantMismatch("side information is positional, not grouped");
  }
  return std::get<std::vector<std::int64_t>>(values_);
}

const std::vector<double>& SideInfo::position_values() const {
  if (kind() != Kind::position) {
    throw VariantMismatch("side information is grouped, not positional");
  }
  return std::get<std::vector<double>>(values_);
}

double SideInfo::as_real(std::size_t j) const {
  return std::visit([j](const auto& v) { return static_cast<double>(v.at(j)); }, values_);
}

void TestSet::validate() const {
  if (side.size() != features.rows()) {
    throw InvalidArgument("test set has " + std::to_string(features.rows()) + " feature rows but " +
                          std::to_string(side.size()) + " side-information values");
  }
  if (truth && truth->size() != features.rows()) {
    throw InvalidArgument("truth vector length does not match the test set");
  }
  check_finite(features, "test set");
}

// ---------------------------------------------------------------------------
// Synthetic configurations

void SyntheticConfig::validate() const {
  if (m == 0) throw ConfigError("synthetic.m must be positive");
  if (p == 0) throw ConfigError("synthetic.p must be positive");
  auto check_pi = [](double pi, const std::string& field) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError(field + " must lie in [0, 1]");
  };
  auto check_interval = [this](const Interval& iv, const std::string& field) {
    if (iv.first < 1 || iv.last < iv.first || iv.last > m) {
      throw ConfigError(field + " must be an interval within [1, m]");
    }
  };
  check_pi(background_pi, "synthetic.background_pi");
  for (std::size_t i = 0; i < sparsity_blocks.size(); ++i) {
    check_pi(sparsity_blocks[i].pi, "synthetic.sparsity_blocks[" + std::to_string(i) + "].pi");
    check_interval(sparsity_blocks[i].interval, "synthetic.sparsity_blocks[" + std::to_string(i) + "].interval");
  }
  for (std::size_t i = 0; i < alt_components.size(); ++i) {
    const auto& c = alt_components[i];
    const std::string field = "synthetic.alt_components[" + std::to_string(i) + "]";
    check_interval(c.interval, field + ".interval");
    if (c.mean.size() != p) throw ConfigError(field + ".mean must have length p");
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw ConfigError(field + ".scale must be positive");
  }
  if (labeled_outliers > 0 && alt_components.empty()) {
    throw ConfigError("synthetic.labeled_outliers requires at least one alternative component");
  }
}

double SyntheticConfig::pi_at(std::size_t j) const {
  for (const auto& b : sparsity_blocks) {
    if (b.interval.contains(j)) return b.pi;
  }
  return background_pi;
}

std::vector<double> SyntheticConfig::pi_vector() const {
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = pi_at(j + 1);
  return out;
}

const AltComponent* SyntheticConfig::alt_at(std::size_t j) const {
  for (const auto& c : alt_components) {
    if (c.interval.contains(j)) return &c;
  }
  return nullptr;
}

SyntheticConfig benchmark_config(std::size_t m, std::size_t p, double mu, std::size_t null_pool_size, double pi_low,
                                 double pi_high, double background_pi) {
  const double f = static_cast<double>(m) / 3000.0;
  auto scaled = [f](std::size_t a, std::size_t b) {
    return Interval{static_cast<std::size_t>(std::floor(static_cast<double>(a - 1) * f)) + 1,
                    static_cast<std::size_t>(std::floor(static_cast<double>(b) * f))};
  };
  SyntheticConfig cfg;
  cfg.m = m;
  cfg.p = p;
  cfg.background_pi = background_pi;
  cfg.sparsity_blocks = {{scaled(201, 300), pi_low},
                         {scaled(601, 700), pi_low},
                         {scaled(1000, 1100), pi_high},
                         {scaled(1400, 1500), pi_high}};
  const std::size_t half = m / 2;
  cfg.alt_components = {{Interval{1, half}, FeatureVector(p, mu), 1.0},
                        {Interval{half + 1, m}, FeatureVector(p, -2.0), 0.5}};
  cfg.null_pool_size = null_pool_size;
  return cfg;
}

SyntheticConfig attainment_config(std::size_t m, std::size_t null_pool_size, double r, double beta) {
  const double md = static_cast<double>(m);
  const double mu = std::sqrt(2.0 * r * std::pow(std::log(md), 1.25));
  const double pi_m = std::pow(md, -beta);
  const auto h = static_cast<std::size_t>(std::ceil(md / 30.0));
  auto block = [&](double k) {
    const auto start = static_cast<std::size_t>(std::ceil(k * md / 30.0));
    return Interval{start + 1, std::min(start + h, m)};
  };
  SyntheticConfig cfg;
  cfg.m = m;
  cfg.p = 1;
  cfg.background_pi = 0.01;
  cfg.sparsity_blocks = {{block(2), pi_m}, {block(6), pi_m}, {block(10), 2.0 / 3.0 * pi_m}, {block(14), 2.0 / 3.0 * pi_m}};
  cfg.alt_components = {{Interval{1, m}, FeatureVector{mu}, 1.0}};
  cfg.null_pool_size = null_pool_size;
  return cfg;
}

// ---------------------------------------------------------------------------
// Splitting and generation

NullSplit split_nulls(const LabeledPool& pool, std::size_t m, Rng& rng, SplitOptions options) {
  const std::size_t n0 = pool.inliers.rows();
  if (n0 < m + 2) {
    throw InsufficientNulls("need at least m + 2 = " + std::to_string(m + 2) + " inliers, got " + std::to_string(n0));
  }
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> perm(n0);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (std::size_t i = n0; i > 1; --i) {
    const std::size_t k = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[k]);
  }
  const std::size_t rest = n0 - m;
  auto n_train = static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(rest)));
  n_train = std::clamp<std::size_t>(n_train, 1, rest - 1);

  std::span<const std::size_t> all(perm);
  NullSplit split;
  split.mirror = pool.inliers.select(all.subspan(0, m));
  split.train = pool.inliers.select(all.subspan(m, n_train));
  split.cal = pool.inliers.select(all.subspan(m + n_train));
  return split;
}

std::pair<LabeledPool, TestSet> generate_hierarchical(const SyntheticConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  TestSet test;
  test.features = FeatureMatrix(cfg.m, cfg.p);
  test.side = SideInfo::index_positions(cfg.m);
  std::vector<bool> truth(cfg.m, false);
  for (std::size_t j = 1; j <= cfg.m; ++j) {
    const bool signal = unif(rng) < cfg.pi_at(j);
    auto x = test.features.row(j - 1);
    const AltComponent* alt = signal ? cfg.alt_at(j) : nullptr;
    truth[j - 1] = signal;
    for (std::size_t d = 0; d < cfg.p; ++d) {
      const double z = gauss(rng);
      x[d] = alt ? alt->mean[d] + alt->scale * z : z;
    }
  }
  test.truth = std::move(truth);

  LabeledPool pool;
  pool.inliers = FeatureMatrix(cfg.null_pool_size, cfg.p);
  for (std::size_t i = 0; i < cfg.null_pool_size; ++i) {
    for (double& v : pool.inliers.row(i)) v = gauss(rng);
  }
  pool.outliers = FeatureMatrix(cfg.labeled_outliers, cfg.p);
  for (std::size_t i = 0; i < cfg.labeled_outliers; ++i) {
    const auto& alt = cfg.alt_components[i % cfg.alt_components.size()];
    auto x = pool.outliers.row(i);
    for (std::size_t d = 0; d < cfg.p; ++d) x[d] = alt.mean[d] + alt.scale * gauss(rng);
  }
  return {std::move(pool), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (line.empty()) cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

std::string where(std::size_t line_no, const std::string& column) {
  return "line " + std::to_string(line_no) + ", column '" + column + "'";
}

}  // namespace

std::pair<LabeledPool, TestSet> parse_csv(const std::string& text, const ColumnSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty CSV input: missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column_of.emplace(header[c], c).second) {
      throw ParseError("duplicate column '" + header[c] + "' in header");
    }
  }
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = column_of.find(name);
    if (it == column_of.end()) return std::nullopt;
    return it->second;
  };
  const auto role_col = find(kRoleColumn);
  if (!role_col) throw SchemaMismatch(std::string("missing required column '") + kRoleColumn + "'");
  const auto label_col = find(kLabelColumn);
  const auto side_col = find(kSideColumn);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] != kRoleColumn && header[c] != kLabelColumn && header[c] != kSideColumn) {
        feature_cols.push_back(c);
        feature_names.push_back(header[c]);
      }
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      auto c = find(name);
      if (!c) throw SchemaMismatch("missing feature column '" + name + "'");
      feature_cols.push_back(*c);
      feature_names.push_back(name);
    }
  }
  if (feature_cols.empty()) throw SchemaMismatch("no feature columns in header");
  const std::size_t p = feature_cols.size();

  LabeledPool pool{FeatureMatrix(p), FeatureMatrix(p)};
  TestSet test{FeatureMatrix(p), {}, std::nullopt};
  std::vector<std::optional<bool>> labels;
  std::vector<std::string> side_cells;
  FeatureVector x(p);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t d = 0; d < p; ++d) {
      const std::string cell = trim(cells[feature_cols[d]]);
      double v = 0.0;
      if (!parse_real(cell, v)) {
        std::string lower = cell;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower == "nan" || lower == "inf" || lower == "-inf" || lower == "+inf" || lower == "infinity" ||
            lower == "-infinity") {
          throw NonFiniteFeature("non-finite feature at " + where(line_no, feature_names[d]));
        }
        throw ParseError("cannot parse number '" + cell + "' at " + where(line_no, feature_names[d]));
      }
      if (!std::isfinite(v)) throw NonFiniteFeature("non-finite feature at " + where(line_no, feature_names[d]));
      x[d] = v;
    }
    const std::string role = trim(cells[*role_col]);
    std::optional<bool> label;
    if (label_col) {
      const std::string cell = trim(cells[*label_col]);
      if (cell == "0") {
        label = false;
      } else if (cell == "1") {
        label = true;
      } else if (!cell.empty()) {
        throw ParseError("label must be 0, 1 or empty at " + where(line_no, kLabelColumn));
      }
    }
    if (role == "train-null") {
      pool.inliers.push_back(x);
    } else if (role == "train-outlier") {
      pool.outliers.push_back(x);
    } else if (role == "test") {
      test.features.push_back(x);
      labels.push_back(label);
      side_cells.push_back(side_col ? trim(cells[*side_col]) : std::string{});
    } else {
      throw ParseError("unknown role '" + role + "' at " + where(line_no, kRoleColumn));
    }
  }

  const std::size_t m = test.features.rows();
  if (side_col) {
    bool all_int = true;
    std::vector<double> reals(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!parse_real(side_cells[j], reals[j]) || !std::isfinite(reals[j])) {
        throw ParseError("cannot parse side information '" + side_cells[j] + "' of test row " + std::to_string(j + 1));
      }
      if (side_cells[j].find_first_of(".eE") != std::string::npos || reals[j] != std::floor(reals[j])) {
        all_int = false;
      }
    }
    auto kind = schema.side_kind;
    if (kind == ColumnSchema::SideKind::automatic) {
      // Integer ids that repeat are categories (hour of day, site). Distinct
      // integers such as 1..m are an ordering and stay positional.
      std::vector<double> sorted = reals;
      std::sort(sorted.begin(), sorted.end());
      const bool repeats = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
      kind = all_int && repeats ? ColumnSchema::SideKind::group : ColumnSchema::SideKind::position;
    }
    if (kind == ColumnSchema::SideKind::group) {
      if (!all_int) throw SchemaMismatch("grouped side information must be integer-valued");
      std::vector<std::int64_t> ids(m);
      for (std::size_t j = 0; j < m; ++j) ids[j] = static_cast<std::int64_t>(reals[j]);
      test.side = SideInfo::groups(std::move(ids));
    } else {
      test.side = SideInfo::positions(std::move(reals));
    }
  } else {
    test.side = SideInfo::index_positions(m);
  }

  if (std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); }) && m > 0 && label_col) {
    std::vector<bool> truth(m);
    for (std::size_t j = 0; j < m; ++j) truth[j] = *labels[j];
    test.truth = std::move(truth);
  }
  return {std::move(pool), std::move(test)};
}

std::pair<LabeledPool, TestSet> load_csv(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_csv(const LabeledPool& pool, const TestSet& test, const std::vector<std::string>& feature_names) {
  const std::size_t p = test.features.rows() > 0 ? test.features.dim() : pool.inliers.dim();
  std::vector<std::string> names = feature_names;
  if (names.empty()) {
    for (std::size_t d = 0; d < p; ++d) names.push_back("x" + std::to_string(d + 1));
  }
  if (names.size() != p) throw InvalidArgument("feature name count does not match the dimension");

  std::ostringstream out;
  for (const auto& n : names) out << n << ',';
  out << kRoleColumn << ',' << kLabelColumn << ',' << kSideColumn << '\n';
  auto write_row = [&](std::span<const double> x) {
    for (double v : x) out << format_double(v) << ',';
  };
  for (std::size_t i = 0; i < pool.inliers.rows(); ++i) {
    write_row(pool.inliers.row(i));
    out << "train-null,0,\n";
  }
  for (std::size_t i = 0; i < pool.outliers.rows(); ++i) {
    write_row(pool.outliers.row(i));
    out << "train-outlier,1,\n";
  }
  const bool groups = test.side.kind() == SideInfo::Kind::group;
  for (std::size_t j = 0; j < test.size(); ++j) {
    write_row(test.features.row(j));
    out << "test,";
    if (test.truth) out << ((*test.truth)[j] ? '1' : '0');
    out << ',';
    if (groups) {
      out << test.side.group_ids()[j];
    } else {
      std::string s = format_double(test.side.position_values()[j]);
      // Keep positional values recognizably real-valued on reload.
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      out << s;
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const std::filesystem::path& path, const LabeledPool& pool, const TestSet& test,
              const std::vector<std::string>& feature_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << format_csv(pool, test, feature_names);
}

}  // namespace scq
