#include "scq/json_io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "scq/error.hpp"

namespace scq {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
}

void check_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  require_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError("unknown field " + join(path, item.key()));
  }
}

double number(const Json& j, const std::string& key, const std::string& path, std::optional<double> fallback) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field " + join(path, key));
  }
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(join(path, key) + " must be finite");
  return x;
}

std::size_t count(const Json& j, const std::string& key, const std::string& path, std::optional<std::size_t> fallback) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field " + join(path, key));
  }
  const Json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(join(path, key) + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

bool boolean(const Json& j, const std::string& key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(join(path, key) + " must be true or false");
  return j.at(key).get<bool>();
}

std::string text(const Json& j, const std::string& key, const std::string& path, std::optional<std::string> fallback) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field " + join(path, key));
  }
  if (!j.at(key).is_string()) throw ConfigError(join(path, key) + " must be a string");
  return j.at(key).get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(at(path, i) + " must be a number");
    out.push_back(j[i].get<double>());
    if (!std::isfinite(out.back())) throw ConfigError(at(path, i) + " must be finite");
  }
  return out;
}

Interval interval(const Json& j, const std::string& path) {
  return {count(j, "first", path, std::nullopt), count(j, "last", path, std::nullopt)};
}

// Rethrows validation errors from the library with the config path attached.
template <class F>
void validated(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

double alpha_from_json(const Json& j, const std::string& key, const std::string& path) {
  const double a = number(j, key, path, std::nullopt);
  if (!(a > 0.0 && a < 1.0)) throw ConfigError(join(path, key) + " must lie in (0, 1)");
  return a;
}

ClassifierSpec classifier_from_json(const Json& j, const std::string& path) {
  check_keys(j, path, {"name", "family", "method", "hyperparams"});
  ClassifierSpec spec;
  const std::string family = text(j, "family", path, std::nullopt);
  const std::string method = text(j, "method", path, std::nullopt);
  try {
    spec.family = family_from_string(family);
  } catch (const Error&) {
    throw ConfigError(join(path, "family") + ": unknown family '" + family + "'");
  }
  try {
    spec.method = method_from_string(method);
  } catch (const Error&) {
    throw ConfigError(join(path, "method") + ": unknown method '" + method + "'");
  }
  if (j.contains("hyperparams")) {
    const Json& params = j.at("hyperparams");
    const std::string ppath = join(path, "hyperparams");
    require_object(params, ppath);
    for (const auto& item : params.items()) spec.hyperparams[item.key()] = number(params, item.key(), ppath, std::nullopt);
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return spec;
}

Toolbox toolbox_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + " must be a nonempty array of classifiers");
  Toolbox box;
  for (std::size_t i = 0; i < j.size(); ++i) {
    box.candidates.push_back(classifier_from_json(j[i], at(path, i)));
    box.names.push_back(text(j[i], "name", at(path, i), box.candidates.back().label()));
  }
  return box;
}

WeightConfig weights_from_json(const Json& j, const std::string& path) {
  check_keys(j, path, {"mode", "kind", "bandwidth", "lambda", "fixed", "jitter"});
  WeightConfig cfg;
  const std::string mode = text(j, "mode", path, "structure");
  if (mode == "structure") {
    cfg.mode = WeightConfig::Mode::structure;
  } else if (mode == "unit") {
    cfg.mode = WeightConfig::Mode::unit;
  } else if (mode == "fixed") {
    cfg.mode = WeightConfig::Mode::fixed;
    if (!j.contains("fixed")) throw ConfigError("missing field " + join(path, "fixed"));
    cfg.fixed = numbers(j.at("fixed"), join(path, "fixed"));
    for (std::size_t i = 0; i < cfg.fixed.size(); ++i) {
      if (!(cfg.fixed[i] > 0.0)) throw ConfigError(at(join(path, "fixed"), i) + " must be positive");
    }
  } else {
    throw ConfigError(join(path, "mode") + " must be structure, unit or fixed");
  }
  if (j.contains("kind")) {
    const std::string kind = text(j, "kind", path, std::nullopt);
    if (kind == "group") {
      cfg.kind = WeightMatrix::Kind::group;
    } else if (kind == "kernel") {
      cfg.kind = WeightMatrix::Kind::kernel;
    } else {
      throw ConfigError(join(path, "kind") + " must be group or kernel");
    }
  }
  if (j.contains("bandwidth")) {
    const Json& bw = j.at("bandwidth");
    if (bw.is_string() && bw.get<std::string>() == "silverman") {
      cfg.bandwidth.rule = BandwidthRule::silverman;
    } else if (bw.is_number() && bw.get<double>() > 0.0 && std::isfinite(bw.get<double>())) {
      cfg.bandwidth.rule = BandwidthRule::fixed;
      cfg.bandwidth.h = bw.get<double>();
    } else {
      throw ConfigError(join(path, "bandwidth") + " must be \"silverman\" or a positive number");
    }
  }
  cfg.lambda = number(j, "lambda", path, kDefaultScreening);
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) throw ConfigError(join(path, "lambda") + " must lie in (0, 1)");
  cfg.jitter = boolean(j, "jitter", path, false);
  return cfg;
}

SyntheticConfig synthetic_from_json(const Json& j, const std::string& path) {
  require_object(j, path);
  SyntheticConfig cfg;
  const std::string preset = text(j, "preset", path, "none");
  if (preset == "benchmark") {
    check_keys(j, path,
               {"preset", "m", "p", "mu", "null_pool_size", "pi_low", "pi_high", "background_pi", "labeled_outliers"});
    const std::size_t m = count(j, "m", path, std::nullopt);
    validated(path, [&] {
      cfg = benchmark_config(m, count(j, "p", path, 2), number(j, "mu", path, 3.0),
                             count(j, "null_pool_size", path, std::nullopt), number(j, "pi_low", path, 0.6),
                             number(j, "pi_high", path, 0.9), number(j, "background_pi", path, 0.01));
    });
  } else if (preset == "attainment") {
    check_keys(j, path, {"preset", "m", "null_pool_size", "r", "beta", "labeled_outliers"});
    validated(path, [&] {
      cfg = attainment_config(count(j, "m", path, std::nullopt), count(j, "null_pool_size", path, std::nullopt),
                              number(j, "r", path, 1.25), number(j, "beta", path, 0.1));
    });
  } else if (preset == "none") {
    check_keys(j, path,
               {"m", "p", "sparsity_blocks", "background_pi", "alt_components", "null_pool_size", "labeled_outliers"});
    cfg.m = count(j, "m", path, std::nullopt);
    cfg.p = count(j, "p", path, 1);
    cfg.background_pi = number(j, "background_pi", path, 0.0);
    cfg.null_pool_size = count(j, "null_pool_size", path, std::nullopt);
    if (j.contains("sparsity_blocks")) {
      const Json& blocks = j.at("sparsity_blocks");
      const std::string bpath = join(path, "sparsity_blocks");
      if (!blocks.is_array()) throw ConfigError(bpath + " must be an array");
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        check_keys(blocks[i], at(bpath, i), {"first", "last", "pi"});
        cfg.sparsity_blocks.push_back({interval(blocks[i], at(bpath, i)), number(blocks[i], "pi", at(bpath, i), std::nullopt)});
      }
    }
    if (j.contains("alt_components")) {
      const Json& comps = j.at("alt_components");
      const std::string cpath = join(path, "alt_components");
      if (!comps.is_array()) throw ConfigError(cpath + " must be an array");
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string ip = at(cpath, i);
        check_keys(comps[i], ip, {"first", "last", "mean", "scale"});
        AltComponent c;
        c.interval = interval(comps[i], ip);
        if (!comps[i].contains("mean")) throw ConfigError("missing field " + join(ip, "mean"));
        // A scalar mean is shorthand for mean * (1, ..., 1).
        if (comps[i].at("mean").is_number()) {
          c.mean.assign(cfg.p, number(comps[i], "mean", ip, std::nullopt));
        } else {
          c.mean = numbers(comps[i].at("mean"), join(ip, "mean"));
        }
        c.scale = number(comps[i], "scale", ip, 1.0);
        cfg.alt_components.push_back(std::move(c));
      }
    }
  } else {
    throw ConfigError(join(path, "preset") + " must be benchmark or attainment");
  }
  cfg.labeled_outliers = count(j, "labeled_outliers", path, 0);
  validated(path, [&] { cfg.validate(); });
  return cfg;
}

MethodSpec method_from_json(const Json& j, const std::string& path) {
  check_keys(j, path,
             {"name", "pipeline", "classifier", "weights", "storey", "lambda_storey", "toolbox", "lambda_grid", "lambda",
              "alpha0"});
  MethodSpec m;
  const std::string pipeline = text(j, "pipeline", path, "scq");
  if (pipeline == "scq") {
    m.pipeline = MethodSpec::Pipeline::scq;
  } else if (pipeline == "bc-unweighted") {
    m.pipeline = MethodSpec::Pipeline::bc_unweighted;
  } else if (pipeline == "cfbh") {
    m.pipeline = MethodSpec::Pipeline::cfbh;
  } else if (pipeline == "ptams") {
    m.pipeline = MethodSpec::Pipeline::ptams;
  } else if (pipeline == "ptams_plus") {
    m.pipeline = MethodSpec::Pipeline::ptams_plus;
  } else {
    throw ConfigError(join(path, "pipeline") + " must be one of scq, bc-unweighted, cfbh, ptams, ptams_plus");
  }
  const bool selection = m.pipeline == MethodSpec::Pipeline::ptams || m.pipeline == MethodSpec::Pipeline::ptams_plus;
  if (selection) {
    if (!j.contains("toolbox")) throw ConfigError("missing field " + join(path, "toolbox"));
    m.toolbox = toolbox_from_json(j.at("toolbox"), join(path, "toolbox"));
  } else {
    if (!j.contains("classifier")) throw ConfigError("missing field " + join(path, "classifier"));
    m.classifier = classifier_from_json(j.at("classifier"), join(path, "classifier"));
  }
  const std::string weights = text(j, "weights", path, "structure");
  if (weights == "structure") {
    m.weight_mode = MethodSpec::WeightMode::structure;
  } else if (weights == "oracle") {
    m.weight_mode = MethodSpec::WeightMode::oracle;
  } else if (weights == "unit") {
    m.weight_mode = MethodSpec::WeightMode::unit;
  } else {
    throw ConfigError(join(path, "weights") + " must be structure, oracle or unit");
  }
  m.storey = boolean(j, "storey", path, true);
  m.lambda_storey = number(j, "lambda_storey", path, 0.5);
  m.lambda = number(j, "lambda", path, kDefaultScreening);
  if (j.contains("lambda_grid")) m.lambda_grid = numbers(j.at("lambda_grid"), join(path, "lambda_grid"));
  if (j.contains("alpha0")) m.alpha0 = alpha_from_json(j, "alpha0", path);
  m.name = text(j, "name", path, selection ? to_string(m.pipeline) : to_string(m.pipeline) + ":" + m.classifier.label());
  validated(path, [&] { m.validate(); });
  for (double l : m.lambda_grid) {
    if (!(l > 0.0 && l < 1.0)) throw ConfigError(join(path, "lambda_grid") + " values must lie in (0, 1)");
  }
  return m;
}

SplitOptions split_from_json(const Json& j, const std::string& path) {
  check_keys(j, path, {"train_fraction"});
  SplitOptions s;
  s.train_fraction = number(j, "train_fraction", path, 0.5);
  if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) {
    throw ConfigError(join(path, "train_fraction") + " must lie in (0, 1)");
  }
  return s;
}

ColumnSchema schema_from_json(const Json& j, const std::string& path) {
  check_keys(j, path, {"feature_columns", "side_kind"});
  ColumnSchema s;
  if (j.contains("feature_columns")) {
    const Json& cols = j.at("feature_columns");
    const std::string cpath = join(path, "feature_columns");
    if (!cols.is_array()) throw ConfigError(cpath + " must be an array of strings");
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (!cols[i].is_string()) throw ConfigError(at(cpath, i) + " must be a string");
      s.feature_columns.push_back(cols[i].get<std::string>());
    }
  }
  const std::string kind = text(j, "side_kind", path, "auto");
  if (kind == "auto") {
    s.side_kind = ColumnSchema::SideKind::automatic;
  } else if (kind == "group") {
    s.side_kind = ColumnSchema::SideKind::group;
  } else if (kind == "position") {
    s.side_kind = ColumnSchema::SideKind::position;
  } else {
    throw ConfigError(join(path, "side_kind") + " must be auto, group or position");
  }
  return s;
}

}  // namespace scq
