#include "scq/procedure.hpp"

#include "json.hpp"

#include "scq/error.hpp"

namespace scq {

void InferenceData::validate() const {
  test.validate();
  const std::size_t m = test.size();
  if (m == 0) throw InvalidArgument("no test rows");
  if (split.mirror.rows() != m) {
    throw InvalidArgument("mirror set has " + std::to_string(split.mirror.rows()) + " points, test set has " +
                          std::to_string(m));
  }
  if (split.cal.empty()) throw InvalidArgument("calibration set is empty");
  if (split.train.empty()) throw InvalidArgument("training set is empty");
  const std::size_t p = test.features.dim();
  for (const FeatureMatrix* x : {&split.train, &split.cal, &split.mirror}) {
    if (x->dim() != p) throw DimensionMismatch("null split and test set have different dimensions");
  }
  if (!labeled_outliers.empty() && labeled_outliers.dim() != p) {
    throw DimensionMismatch("labeled outliers and test set have different dimensions");
  }
}

TrainContext InferenceData::train_context() const {
  TrainContext ctx;
  ctx.train_nulls = split.train;
  ctx.labeled_outliers = labeled_outliers.empty() ? FeatureMatrix(test.features.dim()) : labeled_outliers;
  ctx.pool = TransductivePool{test.features, split.mirror, split.cal};
  return ctx;
}

void InferenceData::swap_pairs(const std::set<std::size_t>& units) {
  for (auto j : units) {
    if (j >= m()) throw InvalidArgument("swap index outside the test set");
    test.features.swap_rows_with(split.mirror, j);
  }
}

PValuePairs calibrate(const ScoreModel& model, const InferenceData& data) {
  const Calibrator cal(model.score_all(data.split.cal));
  const auto s_test = model.score_all(data.test.features);
  const auto s_mirror = model.score_all(data.split.mirror);
  return PValuePairs{cal.pvalues(s_test), cal.pvalues(s_mirror)};
}

PValuePairs score_and_calibrate(const ClassifierSpec& spec, const InferenceData& data, Rng& rng) {
  data.validate();
  const ScoreModel model = fit_score(spec, data.train_context(), rng);
  return calibrate(model, data);
}

std::vector<double> make_weights(const PValuePairs& pv, const SideInfo& side, const WeightConfig& cfg,
                                 std::optional<SparsityEstimate>* sparsity) {
  const std::size_t m = pv.p.size();
  switch (cfg.mode) {
    case WeightConfig::Mode::unit:
      return std::vector<double>(m, 1.0);
    case WeightConfig::Mode::fixed:
      if (cfg.fixed.size() != m) throw InvalidArgument("fixed weight vector does not match the test size");
      return cfg.fixed;
    case WeightConfig::Mode::structure: {
      const auto kind = cfg.kind.value_or(side.kind() == SideInfo::Kind::group ? WeightMatrix::Kind::group
                                                                               : WeightMatrix::Kind::kernel);
      const WeightMatrix omega = weight_matrix(side, kind, cfg.bandwidth);
      SparsityEstimate est = estimate_sparsity(omega, pv.p, pv.p_tilde, cfg.lambda);
      auto w = structure_weights(est);
      if (sparsity) *sparsity = std::move(est);
      return w;
    }
  }
  throw ConfigError("unknown weight mode");
}

ScqResult scq_from_pvalues(PValuePairs pv, const SideInfo& side, const WeightConfig& cfg, double alpha) {
  ScqResult r;
  r.weights = make_weights(pv, side, cfg, &r.sparsity);
  if (cfg.jitter) {
    // Breaks ties among rational p-values by at most 1e-6 of one grid step.
    Rng rng{cfg.jitter_seed};
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto p = values(pv.p);
    auto pt = values(pv.p_tilde);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double step = 1.0 / (1e6 * static_cast<double>(pv.p[j].n_cal + 1));
      p[j] += unif(rng) * step;
      pt[j] += unif(rng) * step;
    }
    r.pairs = build_pairs(p, pt, r.weights);
  } else {
    r.pairs = build_pairs(pv.p, pv.p_tilde, r.weights);
  }
  r.pvalues = std::move(pv);
  r.qvalues = scq_qvalues(r.pairs);
  r.rejection = scq_reject(r.qvalues, alpha);
  r.rejection.threshold = bc_threshold(r.pairs, alpha).threshold;
  r.tied_pairs = count_tied_pairs(r.pairs);
  return r;
}

ScqResult run_scq(const ClassifierSpec& spec, const InferenceData& data, const WeightConfig& cfg, double alpha,
                  Rng& rng) {
  return scq_from_pvalues(score_and_calibrate(spec, data, rng), data.test.side, cfg, alpha);
}

RejectionSet run_cfbh(const ClassifierSpec& spec, const InferenceData& data, double alpha, bool storey,
                      double lambda_storey, Rng& rng) {
  data.validate();
  const ScoreModel model = fit_score(spec, data.train_context(), rng);
  const Calibrator cal(model.score_all(data.split.cal));
  const auto p = values(cal.pvalues(model.score_all(data.test.features)));
  return storey ? storey_bh(p, alpha, lambda_storey) : bh(p, alpha);
}

std::string rejection_report_json(const ScqResult& result, double alpha) {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["tau"] = result.rejection.threshold ? nlohmann::ordered_json(*result.rejection.threshold)
                                        : nlohmann::ordered_json(nullptr);
  auto rejected = nlohmann::ordered_json::array();
  for (auto idx : result.rejection.indices) rejected.push_back(idx + 1);
  j["rejected"] = std::move(rejected);
  j["qvalues"] = result.qvalues;
  j["num_tied_pairs"] = result.tied_pairs;
  return j.dump(2) + "\n";
}

}  // namespace scq
