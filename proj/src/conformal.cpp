#include "scq/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scq/error.hpp"

namespace scq {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

double h_ratio(std::size_t mirror_hits, std::size_t rejections) {
  return static_cast<double>(1 + mirror_hits) / static_cast<double>(std::max<std::size_t>(1, rejections));
}

}  // namespace

bool RejectionSet::contains(std::size_t j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

Calibrator::Calibrator(std::vector<double> cal_scores) : sorted_(std::move(cal_scores)) {
  if (sorted_.empty()) throw InvalidArgument("calibration set is empty");
  std::sort(sorted_.begin(), sorted_.end());
}

ConformalP Calibrator::pvalue(double s_x) const {
  const auto below = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), s_x) - sorted_.begin());
  return ConformalP{1 + below, sorted_.size()};
}

std::vector<ConformalP> Calibrator::pvalues(std::span<const double> s) const {
  std::vector<ConformalP> out;
  out.reserve(s.size());
  for (double x : s) out.push_back(pvalue(x));
  return out;
}

ConformalP conformal_pvalue(std::span<const double> cal_scores, double s_x) {
  if (cal_scores.empty()) throw InvalidArgument("calibration set is empty");
  std::size_t below = 0;
  for (double c : cal_scores) below += c <= s_x ? 1 : 0;
  return ConformalP{1 + below, cal_scores.size()};
}

std::vector<double> values(std::span<const ConformalP> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].value();
  return out;
}

std::vector<ScorePair> build_pairs(std::span<const double> p, std::span<const double> p_tilde,
                                   std::span<const double> w) {
  if (p.size() != p_tilde.size() || p.size() != w.size()) {
    throw InvalidArgument("p-values, mirror p-values and weights must have equal length");
  }
  std::vector<ScorePair> pairs(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(w[j] > 0.0) || !std::isfinite(w[j])) {
      throw NonPositiveWeight("weight of unit " + std::to_string(j + 1) + " is not a positive finite number");
    }
    pairs[j] = ScorePair{p[j] / w[j], p_tilde[j] / w[j]};
  }
  return pairs;
}

std::vector<ScorePair> build_pairs(std::span<const ConformalP> p, std::span<const ConformalP> p_tilde,
                                   std::span<const double> w) {
  const auto pv = values(p);
  const auto pt = values(p_tilde);
  return build_pairs(pv, pt, w);
}

double mirror_stat(std::span<const ScorePair> pairs, double t) {
  std::size_t hits = 0;
  std::size_t rejections = 0;
  for (const auto& pr : pairs) {
    if (pr.v_tilde <= t && pr.v_tilde < pr.v) ++hits;
    if (pr.v <= t && pr.v < pr.v_tilde) ++rejections;
  }
  return h_ratio(hits, rejections);
}

std::vector<double> scq_qvalues(std::span<const ScorePair> pairs) {
  const std::size_t m = pairs.size();
  // Merged grid of 2m candidate thresholds, each tagged with its count contribution.
  struct Entry {
    double t;
    int forward;  // +1 when a V_j < V~_j enters the rejection count
    int mirror;   // +1 when a V~_j < V_j enters the mirror count
  };
  std::vector<Entry> grid;
  grid.reserve(2 * m);
  for (const auto& pr : pairs) {
    grid.push_back({pr.v, pr.v < pr.v_tilde ? 1 : 0, 0});
    grid.push_back({pr.v_tilde, 0, pr.v_tilde < pr.v ? 1 : 0});
  }
  std::sort(grid.begin(), grid.end(), [](const Entry& a, const Entry& b) { return a.t < b.t; });

  std::vector<double> distinct;
  std::vector<double> h;
  std::size_t rejections = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < grid.size();) {
    const double t = grid[i].t;
    for (; i < grid.size() && grid[i].t == t; ++i) {
      rejections += static_cast<std::size_t>(grid[i].forward);
      hits += static_cast<std::size_t>(grid[i].mirror);
    }
    distinct.push_back(t);
    h.push_back(h_ratio(hits, rejections));
  }
  for (std::size_t i = h.size(); i-- > 1;) h[i - 1] = std::min(h[i - 1], h[i]);

  std::vector<double> q(m, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (pairs[j].v < pairs[j].v_tilde) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), pairs[j].v) -
                                                distinct.begin());
      q[j] = std::min(1.0, h[pos]);
    }
  }
  return q;
}

RejectionSet scq_reject(std::span<const double> q, double alpha) {
  check_alpha(alpha);
  RejectionSet out;
  out.alpha = alpha;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] <= alpha) out.indices.push_back(j);
  }
  return out;
}

RejectionSet bc_threshold(std::span<const ScorePair> pairs, double alpha) {
  check_alpha(alpha);
  std::vector<double> forward;
  std::vector<double> mirror;
  std::vector<double> grid;
  grid.reserve(2 * pairs.size());
  for (const auto& pr : pairs) {
    if (pr.v < pr.v_tilde) forward.push_back(pr.v);
    if (pr.v_tilde < pr.v) mirror.push_back(pr.v_tilde);
    grid.push_back(pr.v);
    grid.push_back(pr.v_tilde);
  }
  std::sort(forward.begin(), forward.end());
  std::sort(mirror.begin(), mirror.end());
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  RejectionSet out;
  out.alpha = alpha;
  for (double t : grid) {
    const auto r = static_cast<std::size_t>(std::upper_bound(forward.begin(), forward.end(), t) - forward.begin());
    const auto a = static_cast<std::size_t>(std::upper_bound(mirror.begin(), mirror.end(), t) - mirror.begin());
    if (h_ratio(a, r) <= alpha) {
      out.threshold = t;
      break;
    }
  }
  if (out.threshold) {
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      if (pairs[j].v <= *out.threshold && pairs[j].v < pairs[j].v_tilde) out.indices.push_back(j);
    }
  }
  return out;
}

std::size_t count_tied_pairs(std::span<const ScorePair> pairs) {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const ScorePair& p) { return p.v == p.v_tilde; }));
}

std::vector<double> EValueVector::values() const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < size(); ++j) out[j] = value(j);
  return out;
}

EValueVector evalues(std::span<const ScorePair> pairs, double alpha) {
  const RejectionSet bc = bc_threshold(pairs, alpha);
  EValueVector e;
  e.numerator.assign(pairs.size(), 0);
  if (!bc.threshold) return e;
  const double tau = *bc.threshold;
  std::uint64_t hits = 0;
  for (const auto& pr : pairs) {
    if (pr.v_tilde <= tau && pr.v_tilde < pr.v) ++hits;
  }
  e.denominator = 1 + hits;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (pairs[j].v <= tau && pairs[j].v < pairs[j].v_tilde) e.numerator[j] = pairs.size();
  }
  return e;
}

RejectionSet ebh(const EValueVector& e, double alpha) {
  check_alpha(alpha);
  const std::size_t m = e.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&e](std::size_t a, std::size_t b) { return e.numerator[a] > e.numerator[b]; });
  std::size_t k_hat = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    const std::uint64_t num = e.numerator[order[i - 1]];
    if (num == 0) break;
    // i e_(i) / m >= 1 / alpha  <=>  (den m) / (i num) <= alpha; both products are exact integers.
    const double lhs = static_cast<double>(e.denominator * m) / static_cast<double>(i * num);
    if (lhs <= alpha) k_hat = i;
  }
  RejectionSet out;
  out.alpha = alpha;
  if (k_hat == 0) return out;
  const std::uint64_t cut = e.numerator[order[k_hat - 1]];
  for (std::size_t j = 0; j < m; ++j) {
    if (e.numerator[j] >= cut) out.indices.push_back(j);
  }
  return out;
}

RejectionSet bh(std::span<const double> pvals, double alpha) {
  check_alpha(alpha);
  const std::size_t m = pvals.size();
  std::vector<double> sorted(pvals.begin(), pvals.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t k = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    if (sorted[i - 1] <= alpha * static_cast<double>(i) / static_cast<double>(m)) k = i;
  }
  RejectionSet out;
  out.alpha = alpha;
  if (k == 0) return out;
  out.threshold = sorted[k - 1];
  for (std::size_t j = 0; j < m; ++j) {
    if (pvals[j] <= *out.threshold) out.indices.push_back(j);
  }
  return out;
}

RejectionSet storey_bh(std::span<const double> pvals, double alpha, double lambda_storey) {
  check_alpha(alpha);
  if (!(lambda_storey > 0.0 && lambda_storey < 1.0)) throw InvalidArgument("Storey lambda must lie in (0, 1)");
  const std::size_t m = pvals.size();
  if (m == 0) return RejectionSet{{}, std::nullopt, alpha};
  const auto above = static_cast<std::size_t>(
      std::count_if(pvals.begin(), pvals.end(), [lambda_storey](double p) { return p > lambda_storey; }));
  const double pi0 =
      std::min(1.0, static_cast<double>(1 + above) / (static_cast<double>(m) * (1.0 - lambda_storey)));
  const double level = alpha / pi0;
  if (level >= 1.0) {
    // Every p-value is at most 1, so BH at a level >= 1 rejects everything.
    RejectionSet out;
    out.alpha = alpha;
    out.threshold = *std::max_element(pvals.begin(), pvals.end());
    out.indices.resize(m);
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
    return out;
  }
  RejectionSet out = bh(pvals, level);
  out.alpha = alpha;
  return out;
}

}  // namespace scq
