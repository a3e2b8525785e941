#include "scq/weights.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "scq/error.hpp"

namespace scq {

WeightMatrix WeightMatrix::groups(const std::vector<std::int64_t>& ids) {
  WeightMatrix w;
  w.kind_ = Kind::group;
  std::map<std::int64_t, std::size_t> index;
  for (auto id : ids) index.emplace(id, 0);
  std::size_t next = 0;
  for (auto& [id, slot] : index) slot = next++;
  w.group_of_.reserve(ids.size());
  for (auto id : ids) w.group_of_.push_back(index.at(id));
  w.n_groups_ = next;
  return w;
}

WeightMatrix WeightMatrix::kernel(std::vector<double> positions, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidArgument("kernel bandwidth must be positive");
  WeightMatrix w;
  w.kind_ = Kind::kernel;
  w.positions_ = std::move(positions);
  w.bandwidth_ = bandwidth;
  return w;
}

double WeightMatrix::operator()(std::size_t j, std::size_t jp) const {
  if (kind_ == Kind::group) return group_of_.at(j) == group_of_.at(jp) ? 1.0 : 0.0;
  const double t = (positions_.at(j) - positions_.at(jp)) / bandwidth_;
  return std::exp(-0.5 * t * t) / (bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<double> WeightMatrix::dense() const {
  const std::size_t m = size();
  std::vector<double> out(m * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) out[j * m + i] = (*this)(j, i);
  }
  return out;
}

std::vector<double> WeightMatrix::smooth(std::span<const double> x) const {
  const std::size_t m = size();
  if (x.size() != m) throw InvalidArgument("smoothing input does not match the weight matrix size");
  std::vector<double> out(m);
  if (kind_ == Kind::group) {
    std::vector<double> sum(n_groups_, 0.0);
    std::vector<double> count(n_groups_, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      sum[group_of_[i]] += x[i];
      count[group_of_[i]] += 1.0;
    }
    for (std::size_t j = 0; j < m; ++j) out[j] = sum[group_of_[j]] / count[group_of_[j]];
    return out;
  }
  const double inv_h = 1.0 / bandwidth_;
  for (std::size_t j = 0; j < m; ++j) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = (positions_[j] - positions_[i]) * inv_h;
      const double k = std::exp(-0.5 * t * t);
      num += k * x[i];
      den += k;
    }
    // The kernel's normalizing constant cancels in the ratio.
    out[j] = num / den;
  }
  return out;
}

double silverman_bandwidth(std::span<const double> positions) {
  const std::size_t m = positions.size();
  if (m < 2) return 1.0;
  double mean = 0.0;
  for (double s : positions) mean += s;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double s : positions) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  if (!(sd > 0.0)) return 1.0;
  return 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
}

WeightMatrix weight_matrix(const SideInfo& side, WeightMatrix::Kind kind, BandwidthChoice bandwidth) {
  if (kind == WeightMatrix::Kind::group) {
    if (side.kind() != SideInfo::Kind::group) throw VariantMismatch("group weight matrix needs categorical side info");
    return WeightMatrix::groups(side.group_ids());
  }
  if (side.kind() != SideInfo::Kind::position) throw VariantMismatch("kernel weight matrix needs positional side info");
  const auto& pos = side.position_values();
  const double h = bandwidth.rule == BandwidthRule::fixed ? bandwidth.h : silverman_bandwidth(pos);
  return WeightMatrix::kernel(pos, h);
}

SparsityEstimate estimate_sparsity(const WeightMatrix& omega, std::span<const ConformalP> p,
                                   std::span<const ConformalP> p_tilde, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("screening threshold lambda must lie in (0, 1)");
  const std::size_t m = p.size();
  if (p_tilde.size() != m || omega.size() != m) {
    throw InvalidArgument("p-values, mirror p-values and weight matrix must share the test size");
  }
  // Count of the pair's p-values above lambda; symmetric in (p, p~).
  std::vector<double> exceed(m);
  for (std::size_t i = 0; i < m; ++i) {
    exceed[i] = (p[i].value() > lambda ? 1.0 : 0.0) + (p_tilde[i].value() > lambda ? 1.0 : 0.0);
  }
  const auto local = omega.smooth(exceed);
  SparsityEstimate est;
  est.lambda = lambda;
  est.raw.resize(m);
  est.pi_hat.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    est.raw[j] = 1.0 - local[j] / (2.0 * (1.0 - lambda));
    est.pi_hat[j] = std::clamp(est.raw[j], kPiClip, 0.5 - kPiClip);
  }
  return est;
}

std::vector<double> structure_weights(const SparsityEstimate& est) {
  std::vector<double> w(est.pi_hat.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double pi = std::clamp(est.pi_hat[j], kPiClip, 0.5 - kPiClip);
    w[j] = pi / (0.5 - pi);
  }
  return w;
}

std::vector<double> oracle_weights(std::span<const double> pi) {
  std::vector<double> w(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    if (!(pi[j] > 0.0 && pi[j] < 1.0)) {
      throw PiOutOfRange("oracle sparsity of unit " + std::to_string(j + 1) + " must lie in (0, 1)");
    }
    w[j] = pi[j] / (1.0 - pi[j]);
  }
  return w;
}

std::string weights_csv(const SideInfo& side, const SparsityEstimate* est, std::span<const double> w) {
  std::ostringstream out;
  out << "unit,side,pi_raw,pi_clipped,weight\n";
  for (std::size_t j = 0; j < w.size(); ++j) {
    out << (j + 1) << ',' << format_double(side.as_real(j)) << ',';
    if (est) out << format_double(est->raw[j]) << ',' << format_double(est->pi_hat[j]);
    else out << ',';
    out << ',' << format_double(w[j]) << '\n';
  }
  return out.str();
}

}  // namespace scq
