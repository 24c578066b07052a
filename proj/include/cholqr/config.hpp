#ifndef CHOLQR_CONFIG_HPP_
#define CHOLQR_CONFIG_HPP_

#include "cholqr/io.hpp"
#include "cholqr/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cholqr {

using Json = nlohmann::ordered_json;

namespace detail {

/// Typed access to one JSON object that reports problems as
/// "path.to.field: message" and rejects keys nobody asked about.
class FieldReader {
public:
  FieldReader(const Json &obj, std::string path)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw ConfigError(where() + "expected an object");
    }
  }

  std::string field_path(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string &key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const Json &raw(const std::string &key) {
    if (!has(key)) {
      throw ConfigError(field_path(key) + ": required field is missing");
    }
    return obj_.at(key);
  }

  std::string str(const std::string &key) {
    const Json &v = raw(key);
    if (!v.is_string()) {
      throw ConfigError(field_path(key) + ": expected a string");
    }
    return v.get<std::string>();
  }

  std::string str_or(const std::string &key, std::string fallback) {
    return has(key) ? str(key) : fallback;
  }

  std::int64_t integer(const std::string &key, std::int64_t min) {
    const Json &v = raw(key);
    if (!v.is_number_integer()) {
      throw ConfigError(field_path(key) + ": expected an integer");
    }
    const auto x = v.get<std::int64_t>();
    if (x < min) {
      throw ConfigError(field_path(key) + ": must be at least " +
                        std::to_string(min));
    }
    return x;
  }

  std::int64_t integer_or(const std::string &key, std::int64_t min,
                          std::int64_t fallback) {
    return has(key) ? integer(key, min) : fallback;
  }

  double number(const std::string &key) {
    const Json &v = raw(key);
    if (!v.is_number()) {
      throw ConfigError(field_path(key) + ": expected a number");
    }
    return v.get<double>();
  }

  double positive_or(const std::string &key, double fallback) {
    if (!has(key)) {
      return fallback;
    }
    const double x = number(key);
    if (!(x > 0.0)) {
      throw ConfigError(field_path(key) + ": must be positive");
    }
    return x;
  }

  bool boolean_or(const std::string &key, bool fallback) {
    if (!has(key)) {
      return fallback;
    }
    const Json &v = obj_.at(key);
    if (!v.is_boolean()) {
      throw ConfigError(field_path(key) + ": expected true or false");
    }
    return v.get<bool>();
  }

  const Json &array(const std::string &key) {
    const Json &v = raw(key);
    if (!v.is_array()) {
      throw ConfigError(field_path(key) + ": expected an array");
    }
    return v;
  }

  void reject_unknown() const {
    for (const auto &[key, value] : obj_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError(field_path(key) + ": unknown field");
      }
    }
  }

private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const Json &obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string resolve_path(const std::filesystem::path &base,
                                const std::string &p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() || base.empty() ? path : base / path).string();
}

} // namespace detail

struct KernelSpec {
  std::string type = "rbf_ard";
  /// Histogram channel groups as [begin, end) bin ranges; empty means one
  /// group over every bin.
  std::vector<ChannelGroup> groups;
  /// Base matrix files for the precomputed compound kernel, as written in
  /// the config, and resolved against the config directory.
  std::vector<std::string> matrices;
  std::vector<std::string> resolved_matrices;

  Json to_json() const {
    Json j;
    j["type"] = type;
    if (type == "histogram_intersection" && !groups.empty()) {
      Json g = Json::array();
      for (const auto &c : groups) {
        g.push_back({c.begin, c.end});
      }
      j["groups"] = g;
    }
    if (type == "precomputed") {
      j["matrices"] = matrices;
    }
    return j;
  }

  static KernelSpec parse(const Json &j, const std::string &path,
                          const std::filesystem::path &base_dir) {
    detail::FieldReader r(j, path);
    KernelSpec spec;
    spec.type = r.str("type");
    if (spec.type == "histogram_intersection") {
      if (r.has("groups")) {
        const Json &g = r.array("groups");
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::string gp = r.field_path("groups") + "[" +
                                 std::to_string(i) + "]";
          if (!g[i].is_array() || g[i].size() != 2 ||
              !g[i][0].is_number_integer() || !g[i][1].is_number_integer()) {
            throw ConfigError(gp + ": expected [begin, end] bin indices");
          }
          spec.groups.push_back({g[i][0].get<Index>(), g[i][1].get<Index>()});
        }
      }
    } else if (spec.type == "precomputed") {
      const Json &m = r.array("matrices");
      if (m.empty()) {
        throw ConfigError(r.field_path("matrices") +
                          ": at least one matrix file is required");
      }
      for (std::size_t i = 0; i < m.size(); ++i) {
        const std::string mp =
            r.field_path("matrices") + "[" + std::to_string(i) + "]";
        if (!m[i].is_string()) {
          throw ConfigError(mp + ": expected a file path");
        }
        spec.matrices.push_back(m[i].get<std::string>());
        spec.resolved_matrices.push_back(
            detail::resolve_path(base_dir, spec.matrices.back()));
        if (!std::filesystem::exists(spec.resolved_matrices.back())) {
          throw ConfigError(mp + ": kernel file '" +
                            spec.resolved_matrices.back() + "' does not exist");
        }
      }
    } else if (spec.type != "rbf_ard") {
      throw ConfigError(r.field_path("type") + ": unknown kernel '" +
                        spec.type +
                        "' (expected rbf_ard|histogram_intersection|"
                        "precomputed)");
    }
    r.reject_unknown();
    return spec;
  }
};

/// Instantiates the kernel for inputs shaped like `train`.
inline std::shared_ptr<const Kernel> make_kernel(const KernelSpec &spec,
                                                 const Dataset &train) {
  if (spec.type == "rbf_ard") {
    return std::make_shared<RbfArdKernel>(train.dim());
  }
  if (spec.type == "histogram_intersection") {
    return std::make_shared<HistogramIntersectionKernel>(train.dim(),
                                                         spec.groups);
  }
  std::vector<Matrix> bases;
  for (const auto &p : spec.resolved_matrices) {
    bases.push_back(io::read_kernel_matrix(p));
  }
  return std::make_shared<PrecomputedCompoundKernel>(std::move(bases));
}

struct BenchConfig {
  /// Cell labels: cholqr (expanded over z_values), cholqr-zN, random,
  /// greedy, greedy-C, entropy.
  std::vector<std::string> selectors{"cholqr", "random", "greedy"};
  std::vector<Index> z_values{kDefaultInfoPivots};
  Index splits = 1;
  std::vector<std::uint64_t> seeds{0};
  double train_fraction = 0.8;
  std::uint64_t split_seed = 12345;
};

struct RunConfig {
  std::filesystem::path base_dir;
  std::string train_path;
  std::optional<std::string> test_path;
  KernelSpec kernel;
  TrainConfig train;
  std::string out_dir = "out";
  std::optional<BenchConfig> bench;
  Json echo;

  std::string resolved_train() const {
    return detail::resolve_path(base_dir, train_path);
  }
  std::optional<std::string> resolved_test() const {
    if (!test_path) {
      return std::nullopt;
    }
    return detail::resolve_path(base_dir, *test_path);
  }

  /// The effective configuration, written into every report.
  Json to_json() const {
    Json j;
    j["train"] = train_path;
    if (test_path) {
      j["test"] = *test_path;
    }
    j["kernel"] = kernel.to_json();
    j["selector"] = to_string(train.selector);
    j["flavor"] = to_string(train.flavor);
    j["m"] = train.m;
    j["z"] = train.z;
    j["swaps_per_epoch"] = train.swaps();
    j["greedy_candidates"] = train.greedy_candidates;
    j["max_epochs"] = train.max_epochs;
    j["rel_tol"] = train.rel_tol;
    if (train.time_budget_seconds) {
      j["time_budget_seconds"] = *train.time_budget_seconds;
    }
    j["cg_max_fevals"] = train.cg.max_fevals;
    j["continuous_first"] = train.continuous_first;
    j["seed"] = train.seed;
    if (bench) {
      Json b;
      b["selectors"] = bench->selectors;
      b["z_values"] = bench->z_values;
      b["splits"] = bench->splits;
      b["seeds"] = bench->seeds;
      b["train_fraction"] = bench->train_fraction;
      b["split_seed"] = bench->split_seed;
      j["bench"] = b;
    }
    return j;
  }
};

inline BenchConfig parse_bench(const Json &j, const std::string &path) {
  detail::FieldReader r(j, path);
  BenchConfig b;
  if (r.has("selectors")) {
    b.selectors.clear();
    const Json &s = r.array("selectors");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_string()) {
        throw ConfigError(r.field_path("selectors") + "[" + std::to_string(i) +
                          "]: expected a selector label");
      }
      b.selectors.push_back(s[i].get<std::string>());
    }
    if (b.selectors.empty()) {
      throw ConfigError(r.field_path("selectors") + ": must not be empty");
    }
  }
  if (r.has("z_values")) {
    b.z_values.clear();
    const Json &z = r.array("z_values");
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (!z[i].is_number_integer() || z[i].get<std::int64_t>() < 0) {
        throw ConfigError(r.field_path("z_values") + "[" + std::to_string(i) +
                          "]: expected a non-negative integer");
      }
      b.z_values.push_back(z[i].get<Index>());
    }
  }
  b.splits = r.integer_or("splits", 1, b.splits);
  if (r.has("seeds")) {
    b.seeds.clear();
    const Json &s = r.array("seeds");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_integer() || s[i].get<std::int64_t>() < 0) {
        throw ConfigError(r.field_path("seeds") + "[" + std::to_string(i) +
                          "]: expected a non-negative integer");
      }
      b.seeds.push_back(s[i].get<std::uint64_t>());
    }
    if (b.seeds.empty()) {
      throw ConfigError(r.field_path("seeds") + ": must not be empty");
    }
  }
  if (r.has("train_fraction")) {
    b.train_fraction = r.number("train_fraction");
    if (!(b.train_fraction > 0.0 && b.train_fraction < 1.0)) {
      throw ConfigError(r.field_path("train_fraction") +
                        ": must lie strictly between 0 and 1");
    }
  }
  b.split_seed = static_cast<std::uint64_t>(
      r.integer_or("split_seed", 0, static_cast<std::int64_t>(b.split_seed)));
  r.reject_unknown();
  return b;
}

/// Validates a run configuration. Relative paths are resolved against
/// `base_dir`, normally the directory holding the config file.
inline RunConfig parse_run_config(const Json &j,
                                  const std::filesystem::path &base_dir) {
  detail::FieldReader r(j, "");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.train_path = r.str("train");
  if (!std::filesystem::exists(cfg.resolved_train())) {
    throw ConfigError("train: dataset file '" + cfg.resolved_train() +
                      "' does not exist");
  }
  if (r.has("test")) {
    cfg.test_path = r.str("test");
    if (!std::filesystem::exists(*cfg.resolved_test())) {
      throw ConfigError("test: dataset file '" + *cfg.resolved_test() +
                        "' does not exist");
    }
  }
  cfg.kernel = r.has("kernel") ? KernelSpec::parse(r.raw("kernel"), "kernel",
                                                   base_dir)
                               : KernelSpec{};
  TrainConfig &t = cfg.train;
  if (r.has("selector")) {
    try {
      t.selector = parse_selector(r.str("selector"));
    } catch (const ConfigError &e) {
      throw ConfigError(std::string("selector: ") + e.what());
    }
  }
  if (r.has("flavor")) {
    try {
      t.flavor = parse_flavor(r.str("flavor"));
    } catch (const ConfigError &e) {
      throw ConfigError(std::string("flavor: ") + e.what());
    }
  }
  t.m = r.integer_or("m", 1, t.m);
  t.z = r.integer_or("z", 0, t.z);
  t.swaps_per_epoch = r.integer_or("swaps_per_epoch", 0, t.swaps_per_epoch);
  t.greedy_candidates =
      r.integer_or("greedy_candidates", 1, t.greedy_candidates);
  t.max_epochs = r.integer_or("max_epochs", 0, t.max_epochs);
  t.rel_tol = r.positive_or("rel_tol", t.rel_tol);
  if (r.has("time_budget_seconds")) {
    t.time_budget_seconds = r.positive_or("time_budget_seconds", 0.0);
  }
  t.cg.max_fevals = r.integer_or("cg_max_fevals", 0, t.cg.max_fevals);
  t.continuous_first = r.boolean_or("continuous_first", false);
  t.seed = static_cast<std::uint64_t>(r.integer_or("seed", 0, 0));
  cfg.out_dir = detail::resolve_path(base_dir, r.str_or("out", cfg.out_dir));
  if (r.has("bench")) {
    cfg.bench = parse_bench(r.raw("bench"), "bench");
  }
  r.reject_unknown();
  return cfg;
}

inline RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open '" + path + "'");
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

} // namespace cholqr

#endif // CHOLQR_CONFIG_HPP_
