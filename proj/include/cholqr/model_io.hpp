#ifndef CHOLQR_MODEL_IO_HPP_
#define CHOLQR_MODEL_IO_HPP_

#include "cholqr/config.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace cholqr {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char *kModelFormatTag = "cholqr-model";

/// Everything needed to rebuild a trained model on its training data.
struct SavedModel {
  int version = kModelFormatVersion;
  std::string dataset_hash;
  Index n_train = 0;
  KernelSpec kernel;
  Flavor flavor = Flavor::VAR;
  SelectorKind selector = SelectorKind::CholQR;
  Hyperparameters theta;
  std::vector<std::string> param_names;
  std::vector<Index> inducing;
  /// Absolute path of the training set at save time, used as the default
  /// when eval is not told where the training data lives.
  std::string train_path;
  Json config = Json::object();

  Json to_json() const {
    Json j;
    j["format"] = kModelFormatTag;
    j["version"] = version;
    j["dataset_hash"] = dataset_hash;
    j["n_train"] = n_train;
    j["train_path"] = train_path;
    j["kernel"] = kernel.to_json();
    j["flavor"] = to_string(flavor);
    j["selector"] = to_string(selector);
    j["log_noise_var"] = theta.log_noise_var;
    j["kernel_params"] = std::vector<double>(
        theta.kernel_params.data(),
        theta.kernel_params.data() + theta.kernel_params.size());
    j["param_names"] = param_names;
    j["inducing"] = inducing;
    j["config"] = config;
    return j;
  }
};

inline SavedModel snapshot(const TrainedModel &trained, const Kernel &kernel,
                           const KernelSpec &spec, const Dataset &train,
                           const std::string &train_path,
                           const Json &config_echo) {
  SavedModel s;
  s.dataset_hash = io::dataset_hash(train);
  s.n_train = train.size();
  s.kernel = spec;
  s.flavor = trained.flavor;
  s.selector = trained.selector;
  s.theta = trained.theta;
  s.param_names = kernel.param_names();
  s.inducing = trained.inducing();
  s.train_path = train_path;
  s.config = config_echo;
  return s;
}

inline void save_model(const std::string &path, const SavedModel &model) {
  std::ofstream out = io::detail::open_out(path);
  out << model.to_json().dump(2) << '\n';
  if (!out) {
    throw ConfigError("model: failed writing '" + path + "'");
  }
}

/// Parses and validates a model file. Matrix paths inside the kernel spec
/// are resolved against the model file's directory.
inline SavedModel load_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("model: cannot open '" + path + "'");
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw ConfigError("model: '" + path + "' is corrupt: " + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormatTag) {
      throw ConfigError("model: '" + path + "' is not a cholqr model file");
    }
    detail::FieldReader r(j, "model");
    r.str("format");
    SavedModel s;
    s.version = static_cast<int>(r.integer("version", 0));
    if (s.version != kModelFormatVersion) {
      throw ConfigError("model.version: file has version " +
                        std::to_string(s.version) + ", this build reads " +
                        std::to_string(kModelFormatVersion));
    }
    s.dataset_hash = r.str("dataset_hash");
    s.n_train = static_cast<Index>(r.integer("n_train", 1));
    s.train_path = r.str_or("train_path", "");
    Json kernel = r.raw("kernel");
    // Matrix paths were written resolved, so they are taken as they are.
    s.kernel = KernelSpec::parse(kernel, "model.kernel", {});
    s.flavor = parse_flavor(r.str("flavor"));
    s.selector = parse_selector(r.str("selector"));
    s.theta.log_noise_var = r.number("log_noise_var");
    const Json &kp = r.array("kernel_params");
    s.theta.kernel_params.resize(static_cast<Index>(kp.size()));
    for (std::size_t i = 0; i < kp.size(); ++i) {
      s.theta.kernel_params[static_cast<Index>(i)] = kp[i].get<double>();
    }
    s.param_names = r.raw("param_names").get<std::vector<std::string>>();
    s.inducing = r.raw("inducing").get<std::vector<Index>>();
    s.config = r.has("config") ? r.raw("config") : Json::object();
    r.reject_unknown();
    if (!s.theta.finite()) {
      throw ConfigError("model: hyperparameters are not finite");
    }
    std::vector<Index> sorted = s.inducing;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= s.n_train))) {
      throw ConfigError("model.inducing: indices must be distinct and in [0, " +
                        std::to_string(s.n_train) + ")");
    }
    return s;
  } catch (const Json::exception &e) {
    throw ConfigError("model: '" + path + "' is corrupt: " + e.what());
  }
}

inline void check_dataset(const SavedModel &model, const Dataset &train) {
  const std::string h = io::dataset_hash(train);
  if (h != model.dataset_hash) {
    throw ConfigError("model was trained on dataset " + model.dataset_hash +
                      " but the supplied training data hashes to " + h);
  }
}

/// Rebuilds the factored model from (I, theta) on the training data it was
/// saved with. Refuses any other dataset.
inline TrainedModel restore(const SavedModel &model,
                            std::shared_ptr<const Kernel> kernel,
                            const Dataset &train) {
  check_dataset(model, train);
  if (kernel->param_names() != model.param_names) {
    throw ConfigError("model: kernel parameters do not match the kernel spec");
  }
  TrainedModel out;
  out.theta = model.theta;
  out.flavor = model.flavor;
  out.selector = model.selector;
  const KernelMatrix K(std::move(kernel), train.inputs,
                       model.theta.kernel_params);
  auto built = FactoredModel::build(K, model.theta.noise_var(), train.targets,
                                    model.inducing,
                                    static_cast<Index>(model.inducing.size()));
  if (!built.skipped.empty()) {
    throw NumericalError("model: " + std::to_string(built.skipped.size()) +
                         " saved inducing point(s) are degenerate on reload");
  }
  out.factors = std::move(built.model);
  return out;
}

} // namespace cholqr

#endif // CHOLQR_MODEL_IO_HPP_
