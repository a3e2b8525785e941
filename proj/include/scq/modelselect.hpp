#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scq/procedure.hpp"

namespace scq {

struct Toolbox {
  std::vector<ClassifierSpec> candidates;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return candidates.size(); }
  void validate() const;
  std::string name(std::size_t k) const;
};

/// Bernoulli(1/2) coins b_j computed from (seed, j) alone, so they cannot
/// depend on features, p-values or the processing order.
class CoinStream {
 public:
  explicit CoinStream(std::uint64_t seed) : seed_(seed) {}
  bool coin(std::size_t j) const noexcept;
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

/// BH at level alpha0 on min(p_j, p~_j).
RejectionSet preliminary_partition(std::span<const double> p, std::span<const double> p_tilde, double alpha0);
RejectionSet preliminary_partition(const PValuePairs& pv, double alpha0);

/// Pseudo pairs (U_j, U~_j). Units in `prelim` get (min, max). The others get
/// the coin orientation of the unordered pair: (min, max) when b_j = 1,
/// (max, min) when b_j = 0. Every output pair is a permutation of its input.
std::vector<ScorePair> pseudo_scores(std::span<const ScorePair> pairs, const RejectionSet& prelim,
                                     const CoinStream& coins);

struct CandidateRecord {
  std::string name;
  std::size_t prelim_size = 0;
  long r_k = -1;  // -1 marks a candidate whose fit failed
  std::string error;
};

struct LambdaRecord {
  double lambda = 0.0;
  long r_l = 0;
};

struct SelectionTrace {
  std::vector<CandidateRecord> candidates;
  std::size_t selected = 0;  // 0-based
  bool tie_rule_applied = false;
  std::optional<double> lambda_star;
  std::vector<LambdaRecord> lambdas;

  /// {"candidates":[{"name","r_k","prelim_size"}],"selected" (1-based),"lambda_star"}
  std::string to_json() const;
};

struct SelectionOptions {
  double alpha = 0.05;
  std::optional<double> alpha0;  // default 2 alpha
  WeightConfig weights;
  std::uint64_t coin_seed = 0;
  std::uint64_t fit_seed = 0;

  double effective_alpha0() const;
};

struct SelectionResult {
  SelectionTrace trace;
  ScqResult final_result;
};

SelectionResult ptams(const Toolbox& toolbox, const InferenceData& data, const SelectionOptions& options);

inline const std::vector<double> kDefaultLambdaGrid{0.05, 0.1, 0.2, 0.3, 0.5};

SelectionResult ptams_plus(const Toolbox& toolbox, const InferenceData& data, const SelectionOptions& options,
                           const std::vector<double>& lambda_grid = kDefaultLambdaGrid);

}  // namespace scq
