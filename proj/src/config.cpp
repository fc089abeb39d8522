#include "repw/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace repw {

namespace {

using nlohmann::json;

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_synthetic(const json& j, SyntheticSpec& s) {
  const std::string w = "data.synthetic";
  only_keys(j, w, {"d", "n_source", "n_target", "confounder_dim", "selection_strength", "outcome_strength", "noise_sd"});
  read(j, "d", w, s.d);
  read(j, "n_source", w, s.n_source);
  read(j, "n_target", w, s.n_target);
  read(j, "confounder_dim", w, s.confounder_dim);
  read(j, "selection_strength", w, s.selection_strength);
  read(j, "outcome_strength", w, s.outcome_strength);
  read(j, "noise_sd", w, s.noise_sd);
}

CsvSource read_csv(const json& j, const std::string& base_dir) {
  const std::string w = "data.csv";
  only_keys(j, w, {"path", "covariates", "treatment", "outcome", "indicator", "treatment_alphabet"});
  CsvSource src;
  read(j, "path", w, src.path);
  if (src.path.empty()) throw ConfigError(w + ".path: required");
  if (std::filesystem::path(src.path).is_relative()) src.path = (std::filesystem::path(base_dir) / src.path).string();
  read(j, "covariates", w, src.schema.covariates);
  if (j.contains("treatment")) read(j, "treatment", w, src.schema.treatment.emplace());
  if (j.contains("outcome")) read(j, "outcome", w, src.schema.outcome.emplace());
  if (j.contains("indicator")) read(j, "indicator", w, src.schema.indicator.emplace());
  read(j, "treatment_alphabet", w, src.schema.treatment_alphabet);
  return src;
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("representation.activation: expected relu or tanh, got '" + name + "'");
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {
      "ours+energy", "ours+linear", "ours+gaussian", "pca+energy", "pca+linear", "pca+gaussian",
      "ps+energy",   "ps+linear",   "ps+gaussian",   "energy",     "linear",     "gaussian",
      "entropy",     "ipw",         "nn-head",       "unweighted"};
  return methods;
}

void RunConfig::validate() const {
  if (synthetic.has_value() == csv.has_value()) throw ConfigError("data: give exactly one of 'synthetic' or 'csv'");
  if (methods.empty()) throw ConfigError("methods: at least one method required");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), m) == known.end()) throw ConfigError("methods: unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("methods: '" + m + "' listed twice");
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds: duplicate seed");
  if (rep_dim <= 0 || hidden <= 0) throw ConfigError("representation: rep_dim and hidden must be positive");
  if (sigma.empty()) throw ConfigError("balancing.sigma: at least one value required");
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("balancing.sigma: values must be finite and nonnegative");
  if (gaussian_bandwidth && !(*gaussian_bandwidth > 0.0))
    throw ConfigError("balancing.gaussian_bandwidth: must be positive");
  if (!(logistic_lambda >= 0.0)) throw ConfigError("logistic_lambda: must be nonnegative");
  if (!(solver.eps_abs > 0.0) || !(solver.eps_rel >= 0.0) || solver.max_iters <= 0 || !(solver.rho > 0.0))
    throw ConfigError("solver: tolerances, rho and max_iters must be positive");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (synthetic) {
    try {
      SyntheticSpec s = *synthetic;
      s.framing = task;
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const std::size_t tasks = task == Framing::ate ? 2 : 1;
    if (sigma.size() != 1 && sigma.size() != tasks)
      throw ConfigError("balancing.sigma: give one value or one per task (" + std::to_string(tasks) + ")");
  }
  if (csv) {
    const auto& sc = csv->schema;
    if (sc.covariates.empty()) throw ConfigError("data.csv.covariates: at least one column required");
    if (!sc.treatment) throw ConfigError("data.csv.treatment: required for task '" + framing_name(task) + "'");
    if (task == Framing::transport && (!sc.indicator || !sc.outcome))
      throw ConfigError("data.csv: transport needs 'indicator' and 'outcome' columns");
  }
}

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "config", {"data", "task", "arm_weighting", "standardize", "methods", "representation", "train",
                          "balancing", "solver", "logistic_lambda", "seeds", "output"});
  RunConfig c;

  if (!j.contains("data")) throw ConfigError("data: required");
  const auto& data = j.at("data");
  only_keys(data, "data", {"synthetic", "csv"});
  if (data.contains("synthetic")) read_synthetic(data.at("synthetic"), c.synthetic.emplace());
  if (data.contains("csv")) c.csv = read_csv(data.at("csv"), base_dir);

  std::string name = "ate";
  read(j, "task", "config", name);
  try {
    c.task = framing_from_name(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("task: ") + e.what());
  }
  if (c.synthetic) c.synthetic->framing = c.task;
  std::string arms = "uniform";
  read(j, "arm_weighting", "config", arms);
  if (arms != "uniform" && arms != "frequency") throw ConfigError("arm_weighting: expected uniform or frequency");
  c.arm_weighting = arms == "uniform" ? ArmWeighting::uniform : ArmWeighting::frequency;
  read(j, "standardize", "config", c.standardize);
  read(j, "methods", "config", c.methods);
  read(j, "logistic_lambda", "config", c.logistic_lambda);

  if (j.contains("representation")) {
    const auto& r = j.at("representation");
    only_keys(r, "representation", {"rep_dim", "hidden", "activation"});
    read(r, "rep_dim", "representation", c.rep_dim);
    read(r, "hidden", "representation", c.hidden);
    std::string act = "relu";
    read(r, "activation", "representation", act);
    c.activation = activation_from_name(act);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    const std::string w = "train";
    only_keys(t, w, {"learning_rate", "beta1", "beta2", "epsilon", "patience", "max_epochs", "validation_fraction",
                     "batch_size", "weight_decay"});
    read(t, "learning_rate", w, c.train.learning_rate);
    read(t, "beta1", w, c.train.beta1);
    read(t, "beta2", w, c.train.beta2);
    read(t, "epsilon", w, c.train.epsilon);
    read(t, "patience", w, c.train.patience);
    read(t, "max_epochs", w, c.train.max_epochs);
    read(t, "validation_fraction", w, c.train.validation_fraction);
    read(t, "batch_size", w, c.train.batch_size);
    read(t, "weight_decay", w, c.train.weight_decay);
  }
  if (j.contains("balancing")) {
    const auto& b = j.at("balancing");
    only_keys(b, "balancing", {"sigma", "gaussian_bandwidth"});
    if (b.contains("sigma")) {
      if (b.at("sigma").is_array())
        read(b, "sigma", "balancing", c.sigma);
      else
        read(b, "sigma", "balancing", c.sigma.front());
    }
    if (b.contains("gaussian_bandwidth") && !(b.at("gaussian_bandwidth").is_string() &&
                                               b.at("gaussian_bandwidth").get<std::string>() == "median"))
      read(b, "gaussian_bandwidth", "balancing", c.gaussian_bandwidth.emplace());
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    only_keys(s, "solver", {"rho", "eps_abs", "eps_rel", "max_iters", "polish"});
    read(s, "rho", "solver", c.solver.rho);
    read(s, "eps_abs", "solver", c.solver.eps_abs);
    read(s, "eps_rel", "solver", c.solver.eps_rel);
    read(s, "max_iters", "solver", c.solver.max_iters);
    read(s, "polish", "solver", c.solver.polish);
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_object()) {
      only_keys(s, "seeds", {"first", "count"});
      std::uint64_t first = 0, count = 0;
      read(s, "first", "seeds", first);
      read(s, "count", "seeds", count);
      for (std::uint64_t k = 0; k < count; ++k) c.seeds.push_back(first + k);
    } else {
      read(j, "seeds", "config", c.seeds);
    }
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    only_keys(o, "output", {"dir", "write_weights", "dump_qp"});
    read(o, "dir", "output", c.output_dir);
    read(o, "write_weights", "output", c.write_weights);
    read(o, "dump_qp", "output", c.dump_qp);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(text.str(), dir.empty() ? "." : dir.string());
}

}  // namespace repw
