#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scq/modelselect.hpp"

namespace scq {

/// One method of a comparison run.
struct MethodSpec {
  enum class Pipeline { scq, bc_unweighted, cfbh, ptams, ptams_plus };
  enum class WeightMode { structure, oracle, unit };

  std::string name;
  Pipeline pipeline = Pipeline::scq;
  ClassifierSpec classifier;          // scq, bc_unweighted, cfbh
  WeightMode weight_mode = WeightMode::structure;
  bool storey = true;                 // cfbh
  double lambda_storey = 0.5;         // cfbh
  Toolbox toolbox;                    // ptams, ptams_plus
  std::vector<double> lambda_grid = kDefaultLambdaGrid;
  double lambda = kDefaultScreening;  // screening threshold for structure weights
  std::optional<double> alpha0;

  void validate() const;
};

std::string to_string(MethodSpec::Pipeline p);

struct RunOptions {
  double alpha = 0.05;
  std::size_t threads = 0;  // 0 = hardware concurrency
  SplitOptions split;
};

/// Outcome of one method on one replication.
struct ReplicationOutcome {
  bool failed = false;
  double fdp = 0.0;
  double power = 0.0;
  double true_positives = 0.0;
  std::size_t rejections = 0;
  std::optional<std::size_t> selected;  // ptams pipelines
};

struct MetricsRow {
  std::string method;
  double fdr_hat = 0.0;
  double fdr_se = 0.0;
  double ap_hat = 0.0;
  double ap_se = 0.0;
  double etp_hat = 0.0;
  double etp_se = 0.0;
  std::size_t reps = 0;
  std::size_t failures = 0;
};

double fdp(const RejectionSet& rejection, const std::vector<bool>& truth);

/// Runs `method` on already generated data; throws on method failure.
ReplicationOutcome run_method(const MethodSpec& method, const InferenceData& data, const SyntheticConfig& cfg,
                              const RunOptions& options, std::uint64_t replication_seed);

/// Generates replication r's data from its derived seed.
InferenceData replication_data(const SyntheticConfig& cfg, std::uint64_t master_seed, std::size_t r,
                               const SplitOptions& split = {});

struct CompareResult {
  std::vector<MetricsRow> rows;
  /// outcomes[method][replication]
  std::vector<std::vector<ReplicationOutcome>> outcomes;
};

/// Paired comparison: every method sees the same data in each replication.
CompareResult compare_detailed(const std::vector<MethodSpec>& methods, const SyntheticConfig& cfg, std::size_t reps,
                               std::uint64_t master_seed, const RunOptions& options = {});

std::vector<MetricsRow> compare(const std::vector<MethodSpec>& methods, const SyntheticConfig& cfg, std::size_t reps,
                                std::uint64_t master_seed, const RunOptions& options = {});

MetricsRow run_replications(const MethodSpec& method, const SyntheticConfig& cfg, std::size_t reps,
                            std::uint64_t master_seed, const RunOptions& options = {});

/// Mean and standard error (sample sd / sqrt(n); 0 when n < 2).
std::pair<double, double> mean_se(const std::vector<double>& x);

std::string metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace scq
