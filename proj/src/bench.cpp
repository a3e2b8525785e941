#include "scq/bench.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "scq/error.hpp"

namespace scq {

std::string to_string(MethodSpec::Pipeline p) {
  switch (p) {
    case MethodSpec::Pipeline::scq: return "scq";
    case MethodSpec::Pipeline::bc_unweighted: return "bc-unweighted";
    case MethodSpec::Pipeline::cfbh: return "cfbh";
    case MethodSpec::Pipeline::ptams: return "ptams";
    case MethodSpec::Pipeline::ptams_plus: return "ptams_plus";
  }
  return "?";
}

void MethodSpec::validate() const {
  if (name.empty()) throw ConfigError("method name must be nonempty");
  switch (pipeline) {
    case Pipeline::scq:
    case Pipeline::bc_unweighted:
    case Pipeline::cfbh:
      classifier.validate();
      break;
    case Pipeline::ptams:
    case Pipeline::ptams_plus:
      toolbox.validate();
      break;
  }
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("method '" + name + "': lambda must lie in (0, 1)");
  if (!(lambda_storey > 0.0 && lambda_storey < 1.0)) {
    throw ConfigError("method '" + name + "': lambda_storey must lie in (0, 1)");
  }
  if (alpha0 && !(*alpha0 > 0.0 && *alpha0 < 1.0)) throw ConfigError("method '" + name + "': alpha0 must lie in (0, 1)");
}

double fdp(const RejectionSet& rejection, const std::vector<bool>& truth) {
  std::size_t false_hits = 0;
  for (auto j : rejection.indices) {
    if (j >= truth.size()) throw InvalidArgument("rejection index outside the truth vector");
    false_hits += truth[j] ? 0 : 1;
  }
  return static_cast<double>(false_hits) / static_cast<double>(std::max<std::size_t>(1, rejection.size()));
}

std::pair<double, double> mean_se(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n))};
}

InferenceData replication_data(const SyntheticConfig& cfg, std::uint64_t master_seed, std::size_t r,
                               const SplitOptions& split) {
  Rng rng = fork_rng(derive_seed(master_seed, r), 0);
  auto [pool, test] = generate_hierarchical(cfg, rng);
  InferenceData data;
  data.split = split_nulls(pool, cfg.m, rng, split);
  data.labeled_outliers = std::move(pool.outliers);
  data.test = std::move(test);
  return data;
}

ReplicationOutcome run_method(const MethodSpec& method, const InferenceData& data, const SyntheticConfig& cfg,
                              const RunOptions& options, std::uint64_t replication_seed) {
  const std::uint64_t fit_seed = derive_seed(replication_seed, 1);
  WeightConfig weights;
  weights.lambda = method.lambda;
  switch (method.weight_mode) {
    case MethodSpec::WeightMode::structure: weights.mode = WeightConfig::Mode::structure; break;
    case MethodSpec::WeightMode::unit: weights.mode = WeightConfig::Mode::unit; break;
    case MethodSpec::WeightMode::oracle:
      weights.mode = WeightConfig::Mode::fixed;
      weights.fixed = oracle_weights(cfg.pi_vector());
      break;
  }

  ReplicationOutcome out;
  RejectionSet rejection;
  switch (method.pipeline) {
    case MethodSpec::Pipeline::scq: {
      Rng rng = fork_rng(fit_seed, 0);
      rejection = run_scq(method.classifier, data, weights, options.alpha, rng).rejection;
      break;
    }
    case MethodSpec::Pipeline::bc_unweighted: {
      Rng rng = fork_rng(fit_seed, 0);
      weights.mode = WeightConfig::Mode::unit;
      rejection = run_scq(method.classifier, data, weights, options.alpha, rng).rejection;
      break;
    }
    case MethodSpec::Pipeline::cfbh: {
      Rng rng = fork_rng(fit_seed, 0);
      rejection = run_cfbh(method.classifier, data, options.alpha, method.storey, method.lambda_storey, rng);
      break;
    }
    case MethodSpec::Pipeline::ptams:
    case MethodSpec::Pipeline::ptams_plus: {
      SelectionOptions sel;
      sel.alpha = options.alpha;
      sel.alpha0 = method.alpha0;
      sel.weights = weights;
      sel.coin_seed = derive_seed(replication_seed, 2);
      sel.fit_seed = fit_seed;
      const SelectionResult res = method.pipeline == MethodSpec::Pipeline::ptams
                                      ? ptams(method.toolbox, data, sel)
                                      : ptams_plus(method.toolbox, data, sel, method.lambda_grid);
      rejection = res.final_result.rejection;
      out.selected = res.trace.selected;
      break;
    }
  }

  const auto& truth = data.test.truth.value();
  std::size_t tp = 0;
  for (auto j : rejection.indices) tp += truth[j] ? 1 : 0;
  const auto signals = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  out.fdp = fdp(rejection, truth);
  out.true_positives = static_cast<double>(tp);
  out.power = static_cast<double>(tp) / static_cast<double>(std::max<std::size_t>(1, signals));
  out.rejections = rejection.size();
  return out;
}

CompareResult compare_detailed(const std::vector<MethodSpec>& methods, const SyntheticConfig& cfg, std::size_t reps,
                               std::uint64_t master_seed, const RunOptions& options) {
  if (reps == 0) throw ConfigError("reps must be at least 1");
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  cfg.validate();
  for (const auto& m : methods) m.validate();

  CompareResult result;
  result.outcomes.assign(methods.size(), std::vector<ReplicationOutcome>(reps));
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto run_one = [&](std::size_t r) {
    const std::uint64_t seed_r = derive_seed(master_seed, r);
    const InferenceData data = replication_data(cfg, master_seed, r, options.split);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      try {
        result.outcomes[k][r] = run_method(methods[k], data, cfg, options, seed_r);
      } catch (const Error&) {
        result.outcomes[k][r].failed = true;
      }
    }
  };

  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        run_one(r);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  // Sequential reduce in replication order keeps the sums bit-reproducible.
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<double> f;
    std::vector<double> ap;
    std::vector<double> etp;
    MetricsRow row;
    row.method = methods[k].name;
    for (const auto& o : result.outcomes[k]) {
      if (o.failed) {
        ++row.failures;
        continue;
      }
      f.push_back(o.fdp);
      ap.push_back(o.power);
      etp.push_back(o.true_positives);
    }
    if (static_cast<double>(row.failures) > 0.05 * static_cast<double>(reps)) {
      throw TooManyFailures("method '" + row.method + "' failed in " + std::to_string(row.failures) + " of " +
                            std::to_string(reps) + " replications");
    }
    row.reps = f.size();
    std::tie(row.fdr_hat, row.fdr_se) = mean_se(f);
    std::tie(row.ap_hat, row.ap_se) = mean_se(ap);
    std::tie(row.etp_hat, row.etp_se) = mean_se(etp);
    result.rows.push_back(row);
  }
  return result;
}

std::vector<MetricsRow> compare(const std::vector<MethodSpec>& methods, const SyntheticConfig& cfg, std::size_t reps,
                                std::uint64_t master_seed, const RunOptions& options) {
  return compare_detailed(methods, cfg, reps, master_seed, options).rows;
}

MetricsRow run_replications(const MethodSpec& method, const SyntheticConfig& cfg, std::size_t reps,
                            std::uint64_t master_seed, const RunOptions& options) {
  return compare({method}, cfg, reps, master_seed, options).front();
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "method,fdr,fdr_se,ap,ap_se,etp,etp_se,reps\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.fdr_hat) << ',' << format_double(r.fdr_se) << ','
        << format_double(r.ap_hat) << ',' << format_double(r.ap_se) << ',' << format_double(r.etp_hat) << ','
        << format_double(r.etp_se) << ',' << r.reps << '\n';
  }
  return out.str();
}

}  // namespace scq
