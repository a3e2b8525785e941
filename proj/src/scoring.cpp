#include "scq/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "scq/error.hpp"

namespace scq {

std::string to_string(Family f) {
  switch (f) {
    case Family::OCC: return "OCC";
    case Family::BIC: return "BIC";
    case Family::PUC: return "PUC";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::gaussian: return "gaussian";
    case Method::kde: return "kde";
    case Method::knn: return "knn";
    case Method::logistic: return "logistic";
    case Method::kde_ratio: return "kde-ratio";
    case Method::pu_logistic: return "pu-logistic";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "OCC") return Family::OCC;
  if (s == "BIC") return Family::BIC;
  if (s == "PUC") return Family::PUC;
  throw ConfigError("unknown classifier family '" + s + "'");
}

Method method_from_string(const std::string& s) {
  if (s == "gaussian") return Method::gaussian;
  if (s == "kde") return Method::kde;
  if (s == "knn") return Method::knn;
  if (s == "logistic") return Method::logistic;
  if (s == "kde-ratio") return Method::kde_ratio;
  if (s == "pu-logistic") return Method::pu_logistic;
  throw ConfigError("unknown classifier method '" + s + "'");
}

void ClassifierSpec::validate() const {
  bool ok = false;
  switch (family) {
    case Family::OCC: ok = method == Method::gaussian || method == Method::kde || method == Method::knn; break;
    case Family::BIC: ok = method == Method::logistic || method == Method::knn; break;
    case Family::PUC: ok = method == Method::kde_ratio || method == Method::pu_logistic; break;
  }
  if (!ok) {
    throw ConfigError("unsupported classifier combination " + to_string(family) + "/" + to_string(method));
  }
  for (const auto& [key, value] : hyperparams) {
    if (!std::isfinite(value)) throw ConfigError("hyperparameter '" + key + "' must be finite");
  }
  if (param("k", 1.0) < 1.0) throw ConfigError("hyperparameter 'k' must be at least 1");
  if (param("bandwidth_scale", 1.0) <= 0.0) throw ConfigError("hyperparameter 'bandwidth_scale' must be positive");
}

double ClassifierSpec::param(const std::string& key, double fallback) const {
  auto it = hyperparams.find(key);
  return it == hyperparams.end() ? fallback : it->second;
}

std::string ClassifierSpec::label() const { return to_string(family) + "/" + to_string(method); }

FeatureMatrix TransductivePool::canonical() const {
  const std::size_t dim = std::max({test.dim(), mirror.dim(), cal.dim()});
  FeatureMatrix all(dim);
  all.append(test);
  all.append(mirror);
  all.append(cal);
  return all.canonical();
}

void TransductivePool::swap_pairs(const std::set<std::size_t>& units) {
  for (auto j : units) {
    if (j >= test.rows() || j >= mirror.rows()) throw InvalidArgument("swap index outside the paired region");
    test.swap_rows_with(mirror, j);
  }
}

// ---------------------------------------------------------------------------

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

std::vector<double> column_mean(const FeatureMatrix& x) {
  std::vector<double> mean(x.dim(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t d = 0; d < x.dim(); ++d) mean[d] += r[d];
  }
  for (double& v : mean) v /= static_cast<double>(x.rows());
  return mean;
}

model::Kde make_kde(const FeatureMatrix& points, double scale) {
  model::Kde kde;
  kde.points = points.canonical();
  kde.bandwidth = silverman_bandwidths(kde.points);
  double log_norm = -std::log(static_cast<double>(kde.points.rows()));
  for (double& h : kde.bandwidth) {
    h *= scale;
    log_norm -= std::log(h) + 0.5 * std::log(2.0 * std::numbers::pi);
  }
  kde.log_norm = log_norm;
  return kde;
}

bool cholesky(std::vector<double>& a, std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) {
    double diag = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * p + k] * a[j * p + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double l = std::sqrt(diag);
    a[j * p + j] = l;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / l;
    }
    for (std::size_t k = j + 1; k < p; ++k) a[j * p + k] = 0.0;
  }
  return true;
}

model::Gaussian fit_gaussian(const FeatureMatrix& train) {
  const std::size_t n = train.rows();
  const std::size_t p = train.dim();
  if (n < 2) throw DegenerateFit("gaussian fit needs at least two training points");
  model::Gaussian g;
  g.mean = column_mean(train);
  std::vector<double> cov(p * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = train.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b <= a; ++b) cov[a * p + b] += (r[a] - g.mean[a]) * (r[b] - g.mean[b]);
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      cov[a * p + b] /= static_cast<double>(n - 1);
      cov[b * p + a] = cov[a * p + b];
    }
    trace += cov[a * p + a];
  }
  double ridge = 1e-6 * trace / static_cast<double>(p);
  for (int attempt = 0; attempt <= 3; ++attempt, ridge *= 10.0) {
    std::vector<double> a = cov;
    for (std::size_t d = 0; d < p; ++d) a[d * p + d] += ridge;
    if (cholesky(a, p)) {
      g.chol = std::move(a);
      g.ridge = ridge;
      double log_det = 0.0;
      for (std::size_t d = 0; d < p; ++d) log_det += 2.0 * std::log(g.chol[d * p + d]);
      g.log_norm = -0.5 * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) + log_det);
      return g;
    }
  }
  throw DegenerateFit("covariance stays singular after regularization");
}

double gaussian_log_density(const model::Gaussian& g, std::span<const double> x) {
  const std::size_t p = g.mean.size();
  // Solve L z = x - mean by forward substitution; density uses |z|^2.
  std::vector<double> z(p);
  double quad = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    double s = x[i] - g.mean[i];
    for (std::size_t k = 0; k < i; ++k) s -= g.chol[i * p + k] * z[k];
    z[i] = s / g.chol[i * p + i];
    quad += z[i] * z[i];
  }
  return g.log_norm - 0.5 * quad;
}

std::size_t default_k(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
}

double kth_smallest_distance(const FeatureMatrix& points, std::size_t k, std::span<const double> x) {
  std::vector<double> d(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) d[i] = squared_distance(points.row(i), x);
  const std::size_t kk = std::min(k, d.size()) - 1;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  return std::sqrt(d[kk]);
}

double knn_outlier_fraction(const model::KnnVote& m, std::span<const double> x) {
  const std::size_t n = m.points.rows();
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = {squared_distance(m.points.row(i), x), i};
  const std::size_t k = std::min(m.k, n);
  // Ties in distance go to the smaller canonical index.
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += m.is_outlier[d[i].second] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::vector<double> logistic_features(const model::Logistic& lg, std::span<const double> x) {
  const std::size_t p = x.size();
  std::vector<double> phi;
  phi.reserve(1 + p * (lg.quadratic ? 2 : 1));
  phi.push_back(1.0);
  for (std::size_t d = 0; d < p; ++d) phi.push_back((x[d] - lg.center[d]) / lg.spread[d]);
  if (lg.quadratic) {
    for (std::size_t d = 0; d < p; ++d) phi.push_back(phi[1 + d] * phi[1 + d]);
  }
  return phi;
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_probability(const model::Logistic& lg, std::span<const double> x) {
  const auto phi = logistic_features(lg, x);
  double t = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) t += lg.coef[i] * phi[i];
  return sigmoid(t);
}

/// Full-batch gradient descent on the mean log-loss of `positives` (label 1)
/// versus `negatives` (label 0). Both inputs must already be canonical.
model::Logistic fit_logistic(const FeatureMatrix& positives, const FeatureMatrix& negatives, const ClassifierSpec& spec) {
  const std::size_t p = positives.dim();
  model::Logistic lg;
  lg.quadratic = spec.param("quadratic", 1.0) != 0.0;
  const auto iterations = static_cast<int>(spec.param("iterations", 500.0));
  const double step = spec.param("step", 0.1);

  FeatureMatrix all(p);
  all.append(positives);
  all.append(negatives);
  lg.center = column_mean(all);
  lg.spread.assign(p, 0.0);
  for (std::size_t i = 0; i < all.rows(); ++i) {
    auto r = all.row(i);
    for (std::size_t d = 0; d < p; ++d) lg.spread[d] += (r[d] - lg.center[d]) * (r[d] - lg.center[d]);
  }
  for (double& s : lg.spread) {
    s = std::sqrt(s / static_cast<double>(all.rows()));
    if (!(s > 0.0)) s = 1.0;
  }
  lg.coef.assign(1 + p * (lg.quadratic ? 2 : 1), 0.0);

  std::vector<std::vector<double>> phi(all.rows());
  for (std::size_t i = 0; i < all.rows(); ++i) phi[i] = logistic_features(lg, all.row(i));
  const std::size_t n_pos = positives.rows();
  const double inv_n = 1.0 / static_cast<double>(all.rows());
  std::vector<double> grad(lg.coef.size());
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      double t = 0.0;
      for (std::size_t c = 0; c < lg.coef.size(); ++c) t += lg.coef[c] * phi[i][c];
      const double resid = sigmoid(t) - (i < n_pos ? 1.0 : 0.0);
      for (std::size_t c = 0; c < lg.coef.size(); ++c) grad[c] += resid * phi[i][c];
    }
    for (std::size_t c = 0; c < lg.coef.size(); ++c) lg.coef[c] -= step * grad[c] * inv_n;
  }
  return lg;
}

void append_matrix(std::vector<double>& out, const FeatureMatrix& m) {
  out.push_back(static_cast<double>(m.rows()));
  out.insert(out.end(), m.data().begin(), m.data().end());
}

void append_kde(std::vector<double>& out, const model::Kde& k) {
  append_matrix(out, k.points);
  out.insert(out.end(), k.bandwidth.begin(), k.bandwidth.end());
  out.push_back(k.log_norm);
}

}  // namespace

std::vector<double> silverman_bandwidths(const FeatureMatrix& x) {
  const std::size_t n = x.rows();
  const std::size_t p = x.dim();
  if (n < 2) throw DegenerateFit("kernel density estimate needs at least two points");
  const auto mean = column_mean(x);
  std::vector<double> h(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t d = 0; d < p; ++d) h[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
  }
  const double pd = static_cast<double>(p);
  const double factor = std::pow(4.0 / ((pd + 2.0) * static_cast<double>(n)), 1.0 / (pd + 4.0));
  for (double& v : h) {
    v = std::sqrt(v / static_cast<double>(n - 1)) * factor;
    if (!(v > 0.0)) throw DegenerateFit("kernel bandwidth is zero: a coordinate is constant");
  }
  return h;
}

double kde_log_density(const model::Kde& kde, std::span<const double> x) {
  const std::size_t n = kde.points.rows();
  const std::size_t p = kde.points.dim();
  std::vector<double> expo(n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto r = kde.points.row(i);
    double s = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      const double t = (x[d] - r[d]) / kde.bandwidth[d];
      s += t * t;
    }
    expo[i] = -0.5 * s;
    top = std::max(top, expo[i]);
  }
  double acc = 0.0;
  for (double e : expo) acc += std::exp(e - top);
  return kde.log_norm + top + std::log(acc);
}

// ---------------------------------------------------------------------------

double ScoreModel::score(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw DimensionMismatch("probe has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(dim_));
  }
  struct Visitor {
    std::span<const double> x;
    double operator()(const model::Gaussian& g) const { return gaussian_log_density(g, x); }
    double operator()(const model::Kde& k) const { return std::max(kde_log_density(k, x), kLogDensityFloor); }
    double operator()(const model::KnnDistance& k) const { return -kth_smallest_distance(k.points, k.k, x); }
    double operator()(const model::KnnVote& k) const { return -knn_outlier_fraction(k, x); }
    double operator()(const model::Logistic& lg) const { return logistic_probability(lg, x); }
    double operator()(const model::KdeRatio& r) const {
      return kde_log_density(r.null_density, x) - kde_log_density(r.mixture_density, x);
    }
  };
  const double s = std::visit(Visitor{x}, params_);
  // BIC logistic models the outlier probability; flip it so small means outlying.
  if (spec_.family == Family::BIC && spec_.method == Method::logistic) return -s;
  return s;
}

std::vector<double> ScoreModel::score_all(const FeatureMatrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = score(x.row(i));
  return out;
}

std::vector<double> ScoreModel::flat_parameters() const {
  std::vector<double> out;
  struct Visitor {
    std::vector<double>& out;
    void operator()(const model::Gaussian& g) const {
      out.insert(out.end(), g.mean.begin(), g.mean.end());
      out.insert(out.end(), g.chol.begin(), g.chol.end());
      out.push_back(g.log_norm);
      out.push_back(g.ridge);
    }
    void operator()(const model::Kde& k) const { append_kde(out, k); }
    void operator()(const model::KnnDistance& k) const {
      append_matrix(out, k.points);
      out.push_back(static_cast<double>(k.k));
    }
    void operator()(const model::KnnVote& k) const {
      append_matrix(out, k.points);
      for (bool b : k.is_outlier) out.push_back(b ? 1.0 : 0.0);
      out.push_back(static_cast<double>(k.k));
    }
    void operator()(const model::Logistic& lg) const {
      out.insert(out.end(), lg.center.begin(), lg.center.end());
      out.insert(out.end(), lg.spread.begin(), lg.spread.end());
      out.insert(out.end(), lg.coef.begin(), lg.coef.end());
    }
    void operator()(const model::KdeRatio& r) const {
      append_kde(out, r.null_density);
      append_kde(out, r.mixture_density);
    }
  };
  std::visit(Visitor{out}, params_);
  return out;
}

ScoreModel fit_score(const ClassifierSpec& spec, const TrainContext& ctx, Rng& /*rng*/) {
  spec.validate();
  if (ctx.train_nulls.empty()) throw InvalidArgument("score fitting needs at least one training null");
  const std::size_t p = ctx.train_nulls.dim();
  if (!ctx.labeled_outliers.empty() && ctx.labeled_outliers.dim() != p) {
    throw DimensionMismatch("labeled outliers and training nulls have different dimensions");
  }
  const FeatureMatrix train = ctx.train_nulls.canonical();

  switch (spec.family) {
    case Family::OCC: {
      if (spec.method == Method::gaussian) return {spec, p, fit_gaussian(train)};
      if (spec.method == Method::kde) return {spec, p, make_kde(train, spec.param("bandwidth_scale", 1.0))};
      const auto k = static_cast<std::size_t>(spec.param("k", static_cast<double>(default_k(train.rows()))));
      return {spec, p, model::KnnDistance{train, std::min(k, train.rows())}};
    }
    case Family::BIC: {
      if (ctx.labeled_outliers.empty()) throw MissingOutliers(spec.label() + " needs labeled outliers");
      const FeatureMatrix outliers = ctx.labeled_outliers.canonical();
      if (spec.method == Method::logistic) return {spec, p, fit_logistic(outliers, train, spec)};
      model::KnnVote vote;
      vote.points = train;
      vote.points.append(outliers);
      vote.is_outlier.assign(train.rows(), false);
      vote.is_outlier.resize(vote.points.rows(), true);
      const auto k = static_cast<std::size_t>(spec.param("k", static_cast<double>(default_k(vote.points.rows()))));
      vote.k = std::min(k, vote.points.rows());
      return {spec, p, std::move(vote)};
    }
    case Family::PUC: {
      if (ctx.pool.size() == 0) throw InvalidArgument(spec.label() + " needs a nonempty transductive pool");
      const FeatureMatrix pool = ctx.pool.canonical();
      if (pool.dim() != p) throw DimensionMismatch("transductive pool and training nulls have different dimensions");
      if (spec.method == Method::kde_ratio) {
        const double scale = spec.param("bandwidth_scale", 1.0);
        return {spec, p, model::KdeRatio{make_kde(train, scale), make_kde(pool, scale)}};
      }
      return {spec, p, fit_logistic(train, pool, spec)};
    }
  }
  throw ConfigError("unreachable classifier family");
}

bool verify_swap_invariance(const ClassifierSpec& spec, const TrainContext& ctx, const std::set<std::size_t>& units,
                            std::span<const double> probe) {
  Rng rng_a{0};
  Rng rng_b{0};
  const ScoreModel original = fit_score(spec, ctx, rng_a);
  TrainContext swapped = ctx;
  swapped.pool.swap_pairs(units);
  const ScoreModel refit = fit_score(spec, swapped, rng_b);
  const double a = original.score(probe);
  const double b = refit.score(probe);
  if (spec.method == Method::logistic || spec.method == Method::pu_logistic) {
    return a == b || std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
  }
  return a == b;
}

}  // namespace scq
