#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scq/conformal.hpp"
#include "scq/datamodel.hpp"
#include "scq/scoring.hpp"
#include "scq/weights.hpp"

namespace scq {

/// Everything a single inference run consumes.
struct InferenceData {
  NullSplit split;
  FeatureMatrix labeled_outliers;
  TestSet test;

  std::size_t m() const noexcept { return test.size(); }
  void validate() const;
  TrainContext train_context() const;
  /// Swap X_j and the paired mirror point for every j in `units`.
  void swap_pairs(const std::set<std::size_t>& units);
};

/// How the weights w(S_j) are formed.
struct WeightConfig {
  enum class Mode { structure, unit, fixed };

  Mode mode = Mode::structure;
  std::optional<WeightMatrix::Kind> kind;  // default follows the side-info variant
  BandwidthChoice bandwidth;
  double lambda = kDefaultScreening;
  std::vector<double> fixed;  // Mode::fixed, e.g. oracle weights
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
};

/// Conformal p-value pairs for the test and mirror points under one score model.
struct PValuePairs {
  std::vector<ConformalP> p;
  std::vector<ConformalP> p_tilde;
};

struct ScqResult {
  PValuePairs pvalues;
  std::optional<SparsityEstimate> sparsity;
  std::vector<double> weights;
  std::vector<ScorePair> pairs;
  std::vector<double> qvalues;
  RejectionSet rejection;  // threshold holds the equivalent BC threshold
  std::size_t tied_pairs = 0;
};

PValuePairs calibrate(const ScoreModel& model, const InferenceData& data);

/// Fits the classifier on the data's training context and calibrates.
PValuePairs score_and_calibrate(const ClassifierSpec& spec, const InferenceData& data, Rng& rng);

std::vector<double> make_weights(const PValuePairs& pv, const SideInfo& side, const WeightConfig& cfg,
                                 std::optional<SparsityEstimate>* sparsity = nullptr);

/// Weighting and mirror calibration given the first-stage p-values.
ScqResult scq_from_pvalues(PValuePairs pv, const SideInfo& side, const WeightConfig& cfg, double alpha);

/// The full SCQ procedure with one classifier.
ScqResult run_scq(const ClassifierSpec& spec, const InferenceData& data, const WeightConfig& cfg, double alpha,
                  Rng& rng);

/// Conformal BH (or Storey-BH) on the test p-values alone.
RejectionSet run_cfbh(const ClassifierSpec& spec, const InferenceData& data, double alpha, bool storey,
                      double lambda_storey, Rng& rng);

/// JSON: {"alpha", "tau", "rejected" (1-based), "qvalues", "num_tied_pairs"}.
std::string rejection_report_json(const ScqResult& result, double alpha);

}  // namespace scq
