#include "scq/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "scq/error.hpp"
#include "scq/json_io.hpp"

namespace scq {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> threads;
  bool plus = false;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << content;
  if (!f) throw RuntimeFailure("failed while writing " + path.string());
}

fs::path output_dir(const Flags& flags, const Json& cfg) {
  std::string dir = flags.out;
  if (dir.empty() && cfg.contains("out")) {
    if (!cfg.at("out").is_string()) throw ConfigError("out must be a string");
    dir = cfg.at("out").get<std::string>();
  }
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

std::uint64_t seed_of(const Flags& flags, const Json& cfg) {
  if (flags.seed) return *flags.seed;
  if (!cfg.contains("seed")) return 0;
  if (!cfg.at("seed").is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
  return cfg.at("seed").get<std::uint64_t>();
}

double alpha_of(const Flags& flags, const Json& cfg) {
  if (flags.alpha) {
    if (!(*flags.alpha > 0.0 && *flags.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
    return *flags.alpha;
  }
  if (!cfg.contains("alpha")) return 0.05;
  return alpha_from_json(cfg, "alpha", "");
}

Json load_config(const Flags& flags) {
  if (flags.config.empty()) throw ConfigError("--config is required");
  Json cfg = read_json_file(flags.config);
  if (!cfg.is_object()) throw ConfigError("config root must be an object");
  return cfg;
}

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// ---------------------------------------------------------------- simulate

struct SweepPoint {
  std::optional<double> value;
  std::vector<MetricsRow> rows;
  std::vector<std::vector<ReplicationOutcome>> outcomes;
};

Json sweep_value(const std::string& param, double v) {
  if (param == "m" || param == "p" || param == "null_pool_size") {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("sweep.values must be positive integers for " + param);
    return Json(static_cast<std::uint64_t>(v));
  }
  return Json(v);
}

std::string metrics_json(const std::vector<SweepPoint>& points, const std::optional<std::string>& param, double alpha,
                         std::uint64_t seed, std::size_t reps) {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["reps"] = reps;
  j["param"] = param ? nlohmann::ordered_json(*param) : nlohmann::ordered_json(nullptr);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& pt : points) {
    for (const auto& r : pt.rows) {
      nlohmann::ordered_json e;
      e["method"] = r.method;
      e["param_value"] = pt.value ? nlohmann::ordered_json(*pt.value) : nlohmann::ordered_json(nullptr);
      e["fdr"] = r.fdr_hat;
      e["fdr_se"] = r.fdr_se;
      e["ap"] = r.ap_hat;
      e["ap_se"] = r.ap_se;
      e["etp"] = r.etp_hat;
      e["etp_se"] = r.etp_se;
      e["reps"] = r.reps;
      e["failures"] = r.failures;
      rows.push_back(std::move(e));
    }
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string long_csv_line(const std::string& method, const std::string& param_value, const std::string& metric,
                          double value, double se) {
  return method + "," + param_value + "," + metric + "," + format_double(value) + "," + format_double(se) + "\n";
}

int cmd_simulate(const Flags& flags, std::ostream& out) {
  const Json cfg = load_config(flags);
  for (const auto& item : cfg.items()) {
    static const std::vector<std::string> allowed{"alpha", "seed", "reps", "threads", "out", "synthetic",
                                                  "methods", "sweep", "split", "save_outcomes"};
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError("unknown field " + item.key());
    }
  }
  RunOptions options;
  options.alpha = alpha_of(flags, cfg);
  const std::uint64_t seed = seed_of(flags, cfg);
  std::size_t reps = 100;
  if (flags.reps) {
    reps = *flags.reps;
  } else if (cfg.contains("reps")) {
    if (!cfg.at("reps").is_number_unsigned()) throw ConfigError("reps must be a positive integer");
    reps = cfg.at("reps").get<std::size_t>();
  }
  if (reps == 0) throw ConfigError("reps must be a positive integer");
  if (flags.threads) {
    options.threads = *flags.threads;
  } else if (cfg.contains("threads")) {
    if (!cfg.at("threads").is_number_unsigned()) throw ConfigError("threads must be a nonnegative integer");
    options.threads = cfg.at("threads").get<std::size_t>();
  }
  if (cfg.contains("split")) options.split = split_from_json(cfg.at("split"), "split");
  if (!cfg.contains("synthetic")) throw ConfigError("missing field synthetic");
  if (!cfg.contains("methods") || !cfg.at("methods").is_array() || cfg.at("methods").empty()) {
    throw ConfigError("methods must be a nonempty array");
  }
  std::vector<MethodSpec> methods;
  for (std::size_t i = 0; i < cfg.at("methods").size(); ++i) {
    methods.push_back(method_from_json(cfg.at("methods")[i], "methods[" + std::to_string(i) + "]"));
  }
  bool save_outcomes = false;
  if (cfg.contains("save_outcomes")) {
    if (!cfg.at("save_outcomes").is_boolean()) throw ConfigError("save_outcomes must be true or false");
    save_outcomes = cfg.at("save_outcomes").get<bool>();
  }

  std::optional<std::string> param;
  std::vector<std::optional<double>> values{std::nullopt};
  if (cfg.contains("sweep")) {
    const Json& sweep = cfg.at("sweep");
    if (!sweep.is_object() || !sweep.contains("param") || !sweep.at("param").is_string()) {
      throw ConfigError("sweep.param must be a string");
    }
    param = sweep.at("param").get<std::string>();
    static const std::vector<std::string> sweepable{"mu", "p", "m", "background_pi", "null_pool_size"};
    if (std::find(sweepable.begin(), sweepable.end(), *param) == sweepable.end()) {
      throw ConfigError("sweep.param must be one of mu, p, m, background_pi, null_pool_size");
    }
    if (!sweep.contains("values") || !sweep.at("values").is_array() || sweep.at("values").empty()) {
      throw ConfigError("sweep.values must be a nonempty array");
    }
    values.clear();
    for (const auto& v : sweep.at("values")) {
      if (!v.is_number()) throw ConfigError("sweep.values must contain numbers");
      values.push_back(v.get<double>());
    }
  }

  // Parse every sweep point before running anything so that config errors
  // surface immediately.
  std::vector<SyntheticConfig> configs;
  for (const auto& v : values) {
    Json synth = cfg.at("synthetic");
    if (v) {
      if (!synth.is_object()) throw ConfigError("synthetic must be an object");
      synth[*param] = sweep_value(*param, *v);
    }
    configs.push_back(synthetic_from_json(synth, "synthetic"));
  }

  const fs::path dir = output_dir(flags, cfg);
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CompareResult res = compare_detailed(methods, configs[i], reps, seed, options);
    points.push_back({values[i], std::move(res.rows), std::move(res.outcomes)});
  }

  std::string csv;
  if (!param) {
    csv = metrics_csv(points.front().rows);
  } else {
    std::ostringstream s;
    s << "method,param_value,fdr,fdr_se,ap,ap_se,etp,etp_se,reps\n";
    for (const auto& pt : points) {
      for (const auto& r : pt.rows) {
        s << r.method << ',' << format_double(*pt.value) << ',' << format_double(r.fdr_hat) << ','
          << format_double(r.fdr_se) << ',' << format_double(r.ap_hat) << ',' << format_double(r.ap_se) << ','
          << format_double(r.etp_hat) << ',' << format_double(r.etp_se) << ',' << r.reps << '\n';
      }
    }
    csv = s.str();
    std::string lcsv = "method,param_value,metric,value,se\n";
    for (const auto& pt : points) {
      for (const auto& r : pt.rows) {
        const std::string pv = format_double(*pt.value);
        lcsv += long_csv_line(r.method, pv, "fdr", r.fdr_hat, r.fdr_se);
        lcsv += long_csv_line(r.method, pv, "ap", r.ap_hat, r.ap_se);
        lcsv += long_csv_line(r.method, pv, "etp", r.etp_hat, r.etp_se);
      }
    }
    write_file(dir / "long.csv", lcsv);
  }
  write_file(dir / "metrics.csv", csv);
  write_file(dir / "metrics.json", metrics_json(points, param, options.alpha, seed, reps));

  if (save_outcomes) {
    std::ostringstream s;
    s << "method,param_value,rep,failed,fdp,power,true_positives,rejections,selected\n";
    for (const auto& pt : points) {
      for (std::size_t k = 0; k < methods.size(); ++k) {
        for (std::size_t r = 0; r < reps; ++r) {
          const auto& o = pt.outcomes[k][r];
          s << methods[k].name << ',' << (pt.value ? format_double(*pt.value) : "") << ',' << r << ','
            << (o.failed ? 1 : 0) << ',' << format_double(o.fdp) << ',' << format_double(o.power) << ','
            << format_double(o.true_positives) << ',' << o.rejections << ','
            << (o.selected ? std::to_string(*o.selected + 1) : "") << '\n';
        }
      }
    }
    write_file(dir / "outcomes.csv", s.str());
  }

  std::size_t rows = 0;
  for (const auto& pt : points) rows += pt.rows.size();
  out << "simulate: " << rows << " metric rows over " << reps << " replications written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- infer / select

struct Loaded {
  InferenceData data;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  WeightConfig weights;
};

Loaded load_inference(const Flags& flags, const Json& cfg) {
  Loaded l;
  l.alpha = alpha_of(flags, cfg);
  l.seed = seed_of(flags, cfg);
  std::string data_path = flags.data;
  if (data_path.empty() && cfg.contains("data")) {
    if (!cfg.at("data").is_string()) throw ConfigError("data must be a string");
    data_path = (fs::path(flags.config).parent_path() / cfg.at("data").get<std::string>()).string();
  }
  if (data_path.empty()) throw ConfigError("--data is required");
  if (!fs::exists(data_path)) throw ConfigError("data file " + data_path + " does not exist");
  const ColumnSchema schema = cfg.contains("schema") ? schema_from_json(cfg.at("schema"), "schema") : ColumnSchema{};
  SplitOptions split = cfg.contains("split") ? split_from_json(cfg.at("split"), "split") : SplitOptions{};
  if (cfg.contains("weights")) l.weights = weights_from_json(cfg.at("weights"), "weights");
  l.weights.jitter_seed = derive_seed(l.seed, 3);

  auto [pool, test] = load_csv(data_path, schema);
  if (test.size() == 0) throw InvalidArgument("no test rows");
  Rng split_rng = fork_rng(l.seed, 0);
  l.data.split = split_nulls(pool, test.size(), split_rng, split);
  l.data.labeled_outliers = std::move(pool.outliers);
  l.data.test = std::move(test);
  l.data.validate();
  return l;
}

void check_top_keys(const Json& cfg, const std::vector<std::string>& allowed) {
  for (const auto& item : cfg.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError("unknown field " + item.key());
    }
  }
}

void write_result(const fs::path& dir, const ScqResult& result, const SideInfo& side, double alpha) {
  write_file(dir / "report.json", rejection_report_json(result, alpha));
  write_file(dir / "weights.csv", weights_csv(side, result.sparsity ? &*result.sparsity : nullptr, result.weights));
}

int cmd_infer(const Flags& flags, std::ostream& out) {
  const Json cfg = load_config(flags);
  check_top_keys(cfg, {"alpha", "seed", "out", "data", "classifier", "weights", "split", "schema"});
  if (!cfg.contains("classifier")) throw ConfigError("missing field classifier");
  const ClassifierSpec spec = classifier_from_json(cfg.at("classifier"), "classifier");
  const Loaded l = load_inference(flags, cfg);
  const fs::path dir = output_dir(flags, cfg);

  // Same fit stream as candidate 1 of `select`, so a one-model toolbox agrees.
  Rng rng = fork_rng(derive_seed(l.seed, 1), 0);
  const ScqResult result = run_scq(spec, l.data, l.weights, l.alpha, rng);
  write_result(dir, result, l.data.test.side, l.alpha);
  out << "infer: rejected " << result.rejection.size() << " of " << l.data.m() << " test units at alpha "
      << format_double(l.alpha) << "\n";
  return 0;
}

int cmd_select(const Flags& flags, std::ostream& out) {
  const Json cfg = load_config(flags);
  check_top_keys(cfg, {"alpha", "alpha0", "seed", "out", "data", "toolbox", "weights", "split", "schema",
                       "lambda_grid"});
  if (!cfg.contains("toolbox")) throw ConfigError("missing field toolbox");
  const Toolbox toolbox = toolbox_from_json(cfg.at("toolbox"), "toolbox");
  std::vector<double> grid = kDefaultLambdaGrid;
  if (cfg.contains("lambda_grid")) {
    const Json& g = cfg.at("lambda_grid");
    if (!g.is_array() || g.empty()) throw ConfigError("lambda_grid must be a nonempty array");
    grid.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].is_number() || !(g[i].get<double>() > 0.0 && g[i].get<double>() < 1.0)) {
        throw ConfigError("lambda_grid[" + std::to_string(i) + "] must lie in (0, 1)");
      }
      grid.push_back(g[i].get<double>());
    }
  }
  const Loaded l = load_inference(flags, cfg);
  SelectionOptions options;
  options.alpha = l.alpha;
  if (cfg.contains("alpha0")) options.alpha0 = alpha_from_json(cfg, "alpha0", "");
  options.weights = l.weights;
  options.fit_seed = derive_seed(l.seed, 1);
  options.coin_seed = derive_seed(l.seed, 2);
  const fs::path dir = output_dir(flags, cfg);

  const SelectionResult res = flags.plus ? ptams_plus(toolbox, l.data, options, grid) : ptams(toolbox, l.data, options);
  write_file(dir / "trace.json", res.trace.to_json());
  write_result(dir, res.final_result, l.data.test.side, l.alpha);
  out << "select: chose " << toolbox.name(res.trace.selected) << ", rejected " << res.final_result.rejection.size()
      << " of " << l.data.m() << " test units at alpha " << format_double(l.alpha) << "\n";
  return 0;
}

// ---------------------------------------------------------------- report

struct ReportRow {
  std::string method;
  std::optional<double> param_value;
  double fdr, fdr_se, ap, ap_se, etp, etp_se;
  std::size_t reps;
};

struct Artifact {
  std::string source;
  double alpha = 0.0;
  std::optional<std::string> param;
  std::vector<ReportRow> rows;
};

Artifact read_artifact(const fs::path& file, const fs::path& root) {
  Artifact a;
  a.source = fs::relative(file, root).generic_string();
  const std::string where = "corrupt artifact " + a.source + ": ";
  Json j;
  {
    std::ifstream in(file);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      j = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
      throw ParseError(where + "invalid JSON");
    }
  }
  try {
    a.alpha = j.at("alpha").get<double>();
    if (!j.at("param").is_null()) a.param = j.at("param").get<std::string>();
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.method = r.at("method").get<std::string>();
      if (!r.at("param_value").is_null()) row.param_value = r.at("param_value").get<double>();
      row.fdr = r.at("fdr").get<double>();
      row.fdr_se = r.at("fdr_se").get<double>();
      row.ap = r.at("ap").get<double>();
      row.ap_se = r.at("ap_se").get<double>();
      row.etp = r.at("etp").get<double>();
      row.etp_se = r.at("etp_se").get<double>();
      row.reps = r.at("reps").get<std::size_t>();
      a.rows.push_back(std::move(row));
    }
  } catch (const Json::exception& e) {
    throw ParseError(where + e.what());
  }
  if (a.rows.empty()) throw ParseError(where + "no rows");
  return a;
}

int cmd_report(const Flags& flags, const std::string& dir_arg, std::ostream& out) {
  const fs::path root(dir_arg);
  if (!fs::is_directory(root)) throw ConfigError("artifact directory " + dir_arg + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "metrics.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no metrics.json artifacts found in " + dir_arg);
  std::vector<Artifact> artifacts;
  for (const auto& f : files) artifacts.push_back(read_artifact(f, root));

  std::string lcsv = "method,param_value,metric,value,se,source\n";
  std::ostringstream summary;
  std::size_t blocks = 0;
  for (const auto& a : artifacts) {
    summary << "== " << a.source << " (alpha " << format_double(a.alpha);
    if (a.param) summary << ", sweep over " << *a.param;
    summary << ")\n";
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ReportRow*>> by_method;
    for (const auto& r : a.rows) {
      if (!by_method.count(r.method)) order.push_back(r.method);
      by_method[r.method].push_back(&r);
      const std::string pv = r.param_value ? format_double(*r.param_value) : "";
      for (const auto& [metric, v, se] : {std::tuple{"fdr", r.fdr, r.fdr_se}, std::tuple{"ap", r.ap, r.ap_se},
                                          std::tuple{"etp", r.etp, r.etp_se}}) {
        std::string line = long_csv_line(r.method, pv, metric, v, se);
        line.pop_back();
        lcsv += line + "," + a.source + "\n";
      }
    }
    for (const auto& name : order) {
      ++blocks;
      summary << "method " << name << "\n";
      for (const ReportRow* r : by_method[name]) {
        summary << "  ";
        if (r->param_value) summary << (a.param ? *a.param : std::string("param")) << "=" << format_double(*r->param_value) << "  ";
        summary << "fdr " << fixed(r->fdr) << " (" << fixed(r->fdr_se) << ")  ap " << fixed(r->ap) << " ("
                << fixed(r->ap_se) << ")  etp " << fixed(r->etp, 2) << " (" << fixed(r->etp_se, 2) << ")  reps "
                << r->reps << "\n";
      }
    }
    summary << "\n";
  }
  const fs::path out_dir = flags.out.empty() ? root : fs::path(flags.out);
  fs::create_directories(out_dir);
  write_file(out_dir / "report_long.csv", lcsv);
  write_file(out_dir / "summary.txt", summary.str());
  out << "report: merged " << artifacts.size() << " metrics files, " << blocks << " method blocks\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-adaptive conformal outlier detection"};
  app.require_subcommand(1);
  Flags flags;
  std::string report_dir;

  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Master seed");
    sub->add_option("--alpha", flags.alpha, "Target FDR level");
  };
  auto* simulate = app.add_subcommand("simulate", "Run a replication study from a JSON config");
  simulate->add_option("--config", flags.config, "JSON experiment config")->required();
  add_common(simulate);
  simulate->add_option("--reps", flags.reps, "Number of replications");
  simulate->add_option("--threads", flags.threads, "Worker threads (0 = all cores)");

  auto* infer = app.add_subcommand("infer", "Run SCQ on one dataset");
  infer->add_option("--config", flags.config, "JSON config naming the classifier")->required();
  infer->add_option("--data", flags.data, "CSV dataset");
  add_common(infer);

  auto* select = app.add_subcommand("select", "Select a classifier with P-TAMS and run SCQ");
  select->add_option("--config", flags.config, "JSON config naming the toolbox")->required();
  select->add_option("--data", flags.data, "CSV dataset");
  select->add_flag("--plus", flags.plus, "Also select the screening threshold");
  add_common(select);

  auto* report = app.add_subcommand("report", "Merge metrics files into a summary");
  report->add_option("dir", report_dir, "Directory holding simulate outputs")->required();
  report->add_option("--out", flags.out, "Output directory (default: the artifact directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(flags, out);
    if (*infer) return cmd_infer(flags, out);
    if (*select) return cmd_select(flags, out);
    return cmd_report(flags, report_dir, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace scq
