#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scq/rng.hpp"

namespace scq {

using FeatureVector = std::vector<double>;

/// Row-major n x p matrix of finite features. Rows are FeatureVectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}
  FeatureMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}
  FeatureMatrix(std::size_t dim, std::vector<double> data);

  static FeatureMatrix from_rows(const std::vector<FeatureVector>& rows, std::size_t dim);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  void push_back(std::span<const double> x);
  void append(const FeatureMatrix& other);
  void swap_rows_with(FeatureMatrix& other, std::size_t i);
  FeatureMatrix select(std::span<const std::size_t> indices) const;

  /// Rows sorted lexicographically. Order-sensitive fits run on this form so
  /// that they depend on the multiset of rows only.
  FeatureMatrix canonical() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Labeled reference data: inliers (Y = 0) and optional labeled outliers (Y = 1).
struct LabeledPool {
  FeatureMatrix inliers;
  FeatureMatrix outliers;

  std::size_t dim() const noexcept { return inliers.dim(); }
  void validate() const;

  friend bool operator==(const LabeledPool&, const LabeledPool&) = default;
};

/// Disjoint train / calibration / mirror partition of the null pool.
struct NullSplit {
  FeatureMatrix train;
  FeatureMatrix cal;
  FeatureMatrix mirror;
};

/// Side information of a test set: one categorical group id or one real
/// position per unit. The variant is uniform across the set.
class SideInfo {
 public:
  enum class Kind { group, position };

  SideInfo() = default;
  static SideInfo groups(std::vector<std::int64_t> ids) { return SideInfo{std::move(ids)}; }
  static SideInfo positions(std::vector<double> pos) { return SideInfo{std::move(pos)}; }
  /// Positions 1, 2, ..., m.
  static SideInfo index_positions(std::size_t m);

  Kind kind() const noexcept {
    return std::holds_alternative<std::vector<std::int64_t>>(values_) ? Kind::group : Kind::position;
  }
  std::size_t size() const noexcept;
  const std::vector<std::int64_t>& group_ids() const;
  const std::vector<double>& position_values() const;
  /// Value of unit j as a real, for reporting.
  double as_real(std::size_t j) const;

  friend bool operator==(const SideInfo&, const SideInfo&) = default;

 private:
  explicit SideInfo(std::vector<std::int64_t> ids) : values_(std::move(ids)) {}
  explicit SideInfo(std::vector<double> pos) : values_(std::move(pos)) {}

  std::variant<std::vector<double>, std::vector<std::int64_t>> values_;
};

struct TestSet {
  FeatureMatrix features;
  SideInfo side;
  std::optional<std::vector<bool>> truth;

  std::size_t size() const noexcept { return features.rows(); }
  void validate() const;

  friend bool operator==(const TestSet&, const TestSet&) = default;
};

/// Closed index interval [first, last], 1-based like the unit ids S_j = j.
struct Interval {
  std::size_t first = 1;
  std::size_t last = 1;
  bool contains(std::size_t j) const noexcept { return first <= j && j <= last; }
};

struct SparsityBlock {
  Interval interval;
  double pi = 0.0;
};

/// Alternative distribution N(mean, scale^2 I) on an index interval.
/// `scale` is a standard deviation.
struct AltComponent {
  Interval interval;
  FeatureVector mean;
  double scale = 1.0;
};

struct SyntheticConfig {
  std::size_t m = 0;
  std::size_t p = 1;
  std::vector<SparsityBlock> sparsity_blocks;
  double background_pi = 0.0;
  std::vector<AltComponent> alt_components;
  std::size_t null_pool_size = 0;
  std::uint64_t seed = 0;
  /// Labeled outliers added to the pool, drawn from the alternatives in turn.
  std::size_t labeled_outliers = 0;

  void validate() const;
  /// pi(S_j) for 1-based unit j.
  double pi_at(std::size_t j) const;
  std::vector<double> pi_vector() const;
  /// Alternative component covering unit j, or nullptr (then N(0, I) is used).
  const AltComponent* alt_at(std::size_t j) const;
};

/// The hierarchical benchmark layout rescaled from 3000 units to `m` units:
/// pi = 0.6 on the first two blocks, 0.9 on the last two, 0.01 elsewhere;
/// N(mu 1, I) on the first half and N(-2 1, 0.5^2 I) on the second half.
SyntheticConfig benchmark_config(std::size_t m, std::size_t p, double mu, std::size_t null_pool_size,
                                 double pi_low = 0.6, double pi_high = 0.9, double background_pi = 0.01);

/// The growing-m layout used to study FDR attainment: one-dimensional,
/// mu_m = sqrt(2 r (log m)^1.25), pi_m = m^-beta on four blocks of length ceil(m/30).
SyntheticConfig attainment_config(std::size_t m, std::size_t null_pool_size, double r = 1.25, double beta = 0.1);

struct SplitOptions {
  double train_fraction = 0.5;
};

NullSplit split_nulls(const LabeledPool& pool, std::size_t m, Rng& rng, SplitOptions options = {});

std::pair<LabeledPool, TestSet> generate_hierarchical(const SyntheticConfig& cfg, Rng& rng);

struct ColumnSchema {
  enum class SideKind { automatic, group, position };
  /// Feature columns to read; empty means every non-reserved column.
  std::vector<std::string> feature_columns;
  SideKind side_kind = SideKind::automatic;
};

inline constexpr const char* kRoleColumn = "__role__";
inline constexpr const char* kLabelColumn = "__label__";
inline constexpr const char* kSideColumn = "__side__";

std::pair<LabeledPool, TestSet> load_csv(const std::filesystem::path& path, const ColumnSchema& schema = {});
std::pair<LabeledPool, TestSet> parse_csv(const std::string& text, const ColumnSchema& schema = {});

std::string format_csv(const LabeledPool& pool, const TestSet& test, const std::vector<std::string>& feature_names = {});
void save_csv(const std::filesystem::path& path, const LabeledPool& pool, const TestSet& test,
              const std::vector<std::string>& feature_names = {});

/// Shortest representation that parses back to the same double.
std::string format_double(double x);

}  // namespace scq
