#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scq/conformal.hpp"
#include "scq/datamodel.hpp"

namespace scq {

inline constexpr double kPiClip = 1e-3;
inline constexpr double kDefaultScreening = 0.1;

/// Omega over the test units, kept implicit: a group partition or a Gaussian
/// kernel closure over scalar positions. Entries depend on side info only.
class WeightMatrix {
 public:
  enum class Kind { group, kernel };

  static WeightMatrix groups(const std::vector<std::int64_t>& ids);
  static WeightMatrix kernel(std::vector<double> positions, double bandwidth);

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return kind_ == Kind::group ? group_of_.size() : positions_.size(); }
  std::optional<double> bandwidth() const noexcept {
    return kind_ == Kind::kernel ? std::optional<double>(bandwidth_) : std::nullopt;
  }

  double operator()(std::size_t j, std::size_t jp) const;
  /// Materialized m x m matrix, row-major. Test and diagnostic use only.
  std::vector<double> dense() const;

  /// For every row j: sum_i omega_ij x_i / sum_i omega_ij.
  std::vector<double> smooth(std::span<const double> x) const;

 private:
  Kind kind_ = Kind::group;
  std::vector<std::size_t> group_of_;
  std::size_t n_groups_ = 0;
  std::vector<double> positions_;
  double bandwidth_ = 1.0;
};

enum class BandwidthRule { silverman, fixed };

struct BandwidthChoice {
  BandwidthRule rule = BandwidthRule::silverman;
  double h = 1.0;  // used when rule == fixed
};

/// h = 1.06 sd(S) m^(-1/5); falls back to 1 when the positions are constant.
double silverman_bandwidth(std::span<const double> positions);

WeightMatrix weight_matrix(const SideInfo& side, WeightMatrix::Kind kind, BandwidthChoice bandwidth = {});

struct SparsityEstimate {
  std::vector<double> pi_hat;  // clipped to [kPiClip, 1/2 - kPiClip]
  std::vector<double> raw;
  double lambda = kDefaultScreening;
};

SparsityEstimate estimate_sparsity(const WeightMatrix& omega, std::span<const ConformalP> p,
                                   std::span<const ConformalP> p_tilde, double lambda = kDefaultScreening);

std::vector<double> structure_weights(const SparsityEstimate& est);

std::vector<double> oracle_weights(std::span<const double> pi);

/// CSV with header unit,side,pi_raw,pi_clipped,weight (units 1-based).
std::string weights_csv(const SideInfo& side, const SparsityEstimate* est, std::span<const double> w);

}  // namespace scq
