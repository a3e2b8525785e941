#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace scq {

/// Conformal p-value held exactly as count / (N + 1), count in [1, N + 1].
struct ConformalP {
  std::size_t count = 1;
  std::size_t n_cal = 0;

  double value() const noexcept { return static_cast<double>(count) / static_cast<double>(n_cal + 1); }
  friend bool operator==(const ConformalP&, const ConformalP&) = default;
};

/// Weighted score pair (V_j, V~_j) of test unit j (0-based index).
struct ScorePair {
  double v = 1.0;
  double v_tilde = 1.0;
};

/// Selected units (0-based, ascending) with the threshold that produced them.
struct RejectionSet {
  std::vector<std::size_t> indices;
  std::optional<double> threshold;
  double alpha = 0.0;

  std::size_t size() const noexcept { return indices.size(); }
  bool contains(std::size_t j) const;
};

/// Sorted calibration scores, ready for repeated p-value queries.
class Calibrator {
 public:
  explicit Calibrator(std::vector<double> cal_scores);
  ConformalP pvalue(double s_x) const;
  std::vector<ConformalP> pvalues(std::span<const double> s) const;
  std::size_t size() const noexcept { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

ConformalP conformal_pvalue(std::span<const double> cal_scores, double s_x);

std::vector<double> values(std::span<const ConformalP> p);

std::vector<ScorePair> build_pairs(std::span<const ConformalP> p, std::span<const ConformalP> p_tilde,
                                   std::span<const double> w);
std::vector<ScorePair> build_pairs(std::span<const double> p, std::span<const double> p_tilde,
                                   std::span<const double> w);

/// Mirror process H(t) evaluated by direct counting.
double mirror_stat(std::span<const ScorePair> pairs, double t);

std::vector<double> scq_qvalues(std::span<const ScorePair> pairs);

RejectionSet scq_reject(std::span<const double> q, double alpha);

/// Barber-Candes threshold; `threshold` is absent when no grid point has H <= alpha.
RejectionSet bc_threshold(std::span<const ScorePair> pairs, double alpha);

/// Number of pairs with v == v_tilde; these never enter the mirror counts.
std::size_t count_tied_pairs(std::span<const ScorePair> pairs);

/// e-values m 1{V_j <= tau, V_j < V~_j} / (1 + A~(tau)), stored exactly as
/// numerator / denominator so that the step-up comparison is rounding-free.
struct EValueVector {
  std::vector<std::uint64_t> numerator;  // 0 or m
  std::uint64_t denominator = 1;         // 1 + A~(tau)

  std::size_t size() const noexcept { return numerator.size(); }
  double value(std::size_t j) const {
    return static_cast<double>(numerator[j]) / static_cast<double>(denominator);
  }
  std::vector<double> values() const;
};

EValueVector evalues(std::span<const ScorePair> pairs, double alpha);

/// e-BH step-up: k = max{i : i e_(i) / m >= 1/alpha}, reject e_j >= e_(k).
RejectionSet ebh(const EValueVector& e, double alpha);

RejectionSet bh(std::span<const double> pvals, double alpha);

/// BH at level alpha / pi0 with pi0 = min(1, (1 + #{p > lambda}) / (m (1 - lambda))).
RejectionSet storey_bh(std::span<const double> pvals, double alpha, double lambda_storey = 0.5);

}  // namespace scq
