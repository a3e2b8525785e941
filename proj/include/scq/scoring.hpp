#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "scq/datamodel.hpp"
#include "scq/rng.hpp"

namespace scq {

enum class Family { OCC, BIC, PUC };
enum class Method { gaussian, kde, knn, logistic, kde_ratio, pu_logistic };

std::string to_string(Family f);
std::string to_string(Method m);
Family family_from_string(const std::string& s);
Method method_from_string(const std::string& s);

/// A member of the model toolbox. Hyperparameters by method:
///   knn:                     "k" (default floor(sqrt(n_train)), at least 1)
///   kde, kde-ratio:          "bandwidth_scale" multiplies the Silverman bandwidths (default 1)
///   logistic, pu-logistic:   "iterations" (500), "step" (0.1), "quadratic" (1 = add squared features)
struct ClassifierSpec {
  Family family = Family::OCC;
  Method method = Method::kde;
  std::map<std::string, double> hyperparams;

  void validate() const;
  double param(const std::string& key, double fallback) const;
  std::string label() const;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// The three disjoint blocks whose union forms the transductive pool of
/// positive-unlabeled fits. Row j of `test` and `mirror` are paired.
struct TransductivePool {
  FeatureMatrix test;
  FeatureMatrix mirror;
  FeatureMatrix cal;

  std::size_t size() const noexcept { return test.rows() + mirror.rows() + cal.rows(); }
  /// Union of the three blocks in canonical (lexicographic) row order.
  FeatureMatrix canonical() const;
  void swap_pairs(const std::set<std::size_t>& units);
};

struct TrainContext {
  FeatureMatrix train_nulls;
  FeatureMatrix labeled_outliers;
  TransductivePool pool;
};

namespace model {

struct Gaussian {
  std::vector<double> mean;
  std::vector<double> chol;  // lower-triangular factor of the regularized covariance, row-major p x p
  double log_norm = 0.0;
  double ridge = 0.0;
};

/// Product Gaussian-kernel density estimate over `points`.
struct Kde {
  FeatureMatrix points;
  std::vector<double> bandwidth;
  double log_norm = 0.0;
};

struct KnnDistance {
  FeatureMatrix points;
  std::size_t k = 1;
};

struct KnnVote {
  FeatureMatrix points;     // canonical nulls followed by canonical outliers
  std::vector<bool> is_outlier;
  std::size_t k = 1;
};

struct Logistic {
  std::vector<double> center;
  std::vector<double> spread;
  std::vector<double> coef;  // intercept, linear terms, then optional squared terms
  bool quadratic = true;
};

struct KdeRatio {
  Kde null_density;
  Kde mixture_density;
};

}  // namespace model

/// A fitted score function s(.). Smaller scores mean stronger outlier evidence.
class ScoreModel {
 public:
  using Params = std::variant<model::Gaussian, model::Kde, model::KnnDistance, model::KnnVote, model::Logistic,
                              model::KdeRatio>;

  ScoreModel(ClassifierSpec spec, std::size_t dim, Params params)
      : spec_(std::move(spec)), dim_(dim), params_(std::move(params)) {}

  double score(std::span<const double> x) const;
  std::vector<double> score_all(const FeatureMatrix& x) const;

  const ClassifierSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return dim_; }
  const Params& params() const noexcept { return params_; }
  /// All fitted numbers flattened in a fixed order; equal vectors mean equal models.
  std::vector<double> flat_parameters() const;

 private:
  ClassifierSpec spec_;
  std::size_t dim_;
  Params params_;
};

ScoreModel fit_score(const ClassifierSpec& spec, const TrainContext& ctx, Rng& rng);

inline double score(const ScoreModel& m, std::span<const double> x) { return m.score(x); }

/// Refits after swapping the paired rows in `units` and compares the probe score.
bool verify_swap_invariance(const ClassifierSpec& spec, const TrainContext& ctx, const std::set<std::size_t>& units,
                            std::span<const double> probe);

/// Silverman's rule-of-thumb bandwidths for a product Gaussian kernel.
std::vector<double> silverman_bandwidths(const FeatureMatrix& x);

/// Log of a product Gaussian KDE, evaluated in the log domain (never -inf).
double kde_log_density(const model::Kde& kde, std::span<const double> x);

inline constexpr double kLogDensityFloor = -745.0;

}  // namespace scq
