#include "scq/modelselect.hpp"

#include <algorithm>

#include "json.hpp"
#include "scq/error.hpp"

namespace scq {

void Toolbox::validate() const {
  if (candidates.empty()) throw ConfigError("toolbox must contain at least one candidate");
  if (!names.empty() && names.size() != candidates.size()) throw ConfigError("toolbox names do not match candidates");
  for (const auto& c : candidates) c.validate();
}

std::string Toolbox::name(std::size_t k) const {
  if (k < names.size() && !names[k].empty()) return names[k];
  return candidates.at(k).label();
}

bool CoinStream::coin(std::size_t j) const noexcept {
  return (derive_seed(seed_, static_cast<std::uint64_t>(j)) & 1ULL) != 0;
}

RejectionSet preliminary_partition(std::span<const double> p, std::span<const double> p_tilde, double alpha0) {
  if (p.size() != p_tilde.size()) throw InvalidArgument("p-value lists differ in length");
  std::vector<double> pmin(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) pmin[j] = std::min(p[j], p_tilde[j]);
  return bh(pmin, alpha0);
}

RejectionSet preliminary_partition(const PValuePairs& pv, double alpha0) {
  return preliminary_partition(values(pv.p), values(pv.p_tilde), alpha0);
}

std::vector<ScorePair> pseudo_scores(std::span<const ScorePair> pairs, const RejectionSet& prelim,
                                     const CoinStream& coins) {
  std::vector<ScorePair> out(pairs.size());
  std::vector<bool> likely_outlier(pairs.size(), false);
  for (auto j : prelim.indices) {
    if (j >= pairs.size()) throw InvalidArgument("preliminary rejection index out of range");
    likely_outlier[j] = true;
  }
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const double lo = std::min(pairs[j].v, pairs[j].v_tilde);
    const double hi = std::max(pairs[j].v, pairs[j].v_tilde);
    const bool low_first = likely_outlier[j] || coins.coin(j);
    out[j] = low_first ? ScorePair{lo, hi} : ScorePair{hi, lo};
  }
  return out;
}

std::string SelectionTrace::to_json() const {
  nlohmann::ordered_json j;
  auto cands = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["r_k"] = c.r_k;
    e["prelim_size"] = c.prelim_size;
    if (!c.error.empty()) e["error"] = c.error;
    cands.push_back(std::move(e));
  }
  j["candidates"] = std::move(cands);
  j["selected"] = selected + 1;
  j["lambda_star"] = lambda_star ? nlohmann::ordered_json(*lambda_star) : nlohmann::ordered_json(nullptr);
  if (!lambdas.empty()) {
    auto ls = nlohmann::ordered_json::array();
    for (const auto& l : lambdas) ls.push_back({{"lambda", l.lambda}, {"r_l", l.r_l}});
    j["lambdas"] = std::move(ls);
  }
  j["tie_rule_applied"] = tie_rule_applied;
  return j.dump(2) + "\n";
}

double SelectionOptions::effective_alpha0() const {
  const double a0 = alpha0.value_or(2.0 * alpha);
  if (!(a0 > 0.0 && a0 < 1.0)) throw InvalidArgument("alpha0 must lie in (0, 1)");
  return a0;
}

namespace {

long pseudo_rejections(const ScqResult& result, const RejectionSet& prelim, const CoinStream& coins, double alpha) {
  const auto pseudo = pseudo_scores(result.pairs, prelim, coins);
  return static_cast<long>(scq_reject(scq_qvalues(pseudo), alpha).size());
}

struct Candidate {
  std::optional<ScqResult> result;
  RejectionSet prelim;
};

}  // namespace

SelectionResult ptams(const Toolbox& toolbox, const InferenceData& data, const SelectionOptions& options) {
  toolbox.validate();
  data.validate();
  const double alpha0 = options.effective_alpha0();
  const CoinStream coins(options.coin_seed);

  SelectionResult out;
  std::vector<Candidate> cands(toolbox.size());
  long best = -1;
  for (std::size_t k = 0; k < toolbox.size(); ++k) {
    CandidateRecord rec;
    rec.name = toolbox.name(k);
    // Only a failed fit disqualifies a candidate; weight errors are the caller's.
    std::optional<PValuePairs> pv;
    try {
      Rng rng = fork_rng(options.fit_seed, k);
      pv = score_and_calibrate(toolbox.candidates[k], data, rng);
    } catch (const MissingOutliers& e) {
      rec.error = e.what();
    } catch (const RuntimeFailure& e) {
      rec.error = e.what();
    }
    if (pv) {
      cands[k].prelim = preliminary_partition(*pv, alpha0);
      cands[k].result = scq_from_pvalues(std::move(*pv), data.test.side, options.weights, options.alpha);
      rec.prelim_size = cands[k].prelim.size();
      rec.r_k = pseudo_rejections(*cands[k].result, cands[k].prelim, coins, options.alpha);
    }
    if (rec.r_k > best) {
      best = rec.r_k;
      out.trace.selected = k;
    }
    out.trace.candidates.push_back(std::move(rec));
  }
  if (best < 0) throw AllCandidatesFailed("every toolbox candidate failed to fit");
  out.trace.tie_rule_applied =
      std::count_if(out.trace.candidates.begin(), out.trace.candidates.end(),
                    [best](const CandidateRecord& r) { return r.r_k == best; }) > 1;
  if (options.weights.mode == WeightConfig::Mode::structure) out.trace.lambda_star = options.weights.lambda;
  out.final_result = std::move(*cands[out.trace.selected].result);
  return out;
}

SelectionResult ptams_plus(const Toolbox& toolbox, const InferenceData& data, const SelectionOptions& options,
                           const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty()) throw ConfigError("lambda grid must be nonempty");
  for (double l : lambda_grid) {
    if (!(l > 0.0 && l < 1.0)) throw ConfigError("lambda grid values must lie in (0, 1)");
  }
  SelectionOptions stage1 = options;
  stage1.weights.lambda = kDefaultScreening;
  SelectionResult out = ptams(toolbox, data, stage1);

  const CoinStream coins(options.coin_seed);
  const PValuePairs& pv = out.final_result.pvalues;
  const RejectionSet prelim = preliminary_partition(pv, options.effective_alpha0());

  std::optional<double> lambda_star;
  long best = -1;
  std::vector<double> grid = lambda_grid;
  for (double l : grid) {
    WeightConfig cfg = options.weights;
    cfg.lambda = l;
    const ScqResult trial = scq_from_pvalues(pv, data.test.side, cfg, options.alpha);
    const long r = pseudo_rejections(trial, prelim, coins, options.alpha);
    out.trace.lambdas.push_back({l, r});
    if (r > best || (r == best && l < *lambda_star)) {
      best = r;
      lambda_star = l;
    }
  }
  out.trace.lambda_star = lambda_star;
  WeightConfig final_cfg = options.weights;
  final_cfg.lambda = *lambda_star;
  out.final_result = scq_from_pvalues(pv, data.test.side, final_cfg, options.alpha);
  return out;
}

}  // namespace scq
