#include "repw/pipeline.hpp"

#include "repw/baselines.hpp"
#include "repw/oracle.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace repw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SeedData {
  TaskFamily family;  // what the design stages see, standardised if requested
  TaskFamily raw;
  Eigen::MatrixXd covariates;   // pooled raw rows for propensity fits
  std::vector<int> membership;  // treatment (ate, att) or trial indicator (transport)
  std::optional<std::vector<Eigen::VectorXd>> target_outcome;
  std::optional<std::vector<Eigen::VectorXd>> source_ratio;
};

TaskFamily build_family(const RunConfig& cfg, const Dataset& ds) {
  switch (cfg.task) {
    case Framing::ate: return build_ate_tasks(ds, cfg.arm_weighting);
    case Framing::att: return build_att_task(ds);
    default: {
      const auto [rct, obs] = split_by_indicator(ds);
      return build_transport_task(rct, obs);
    }
  }
}

SeedData prepare(const RunConfig& cfg, std::uint64_t seed, const std::optional<Dataset>& csv_data) {
  SeedData d;
  if (cfg.synthetic) {
    const SyntheticDGP dgp(*cfg.synthetic);
    auto draw = dgp.draw(seed);
    d.raw = cfg.task == Framing::ate ? build_ate_tasks(draw.data, cfg.arm_weighting) : std::move(draw.family);
    d.covariates = draw.data.covariates;
    d.membership = draw.membership;
    d.target_outcome = std::move(draw.target_outcome);
    d.source_ratio = std::move(draw.source_ratio);
  } else {
    const Dataset& ds = *csv_data;
    d.raw = build_family(cfg, ds);
    d.covariates = ds.covariates;
    d.membership = cfg.task == Framing::transport ? *ds.rct_indicator : *ds.treatment;
  }
  d.family = cfg.standardize ? standardize(d.raw) : d.raw;
  return d;
}

double sigma_for(const RunConfig& cfg, std::size_t task, std::size_t tasks) {
  if (cfg.sigma.size() == 1) return cfg.sigma.front();
  if (cfg.sigma.size() != tasks)
    throw std::runtime_error("balancing.sigma has " + std::to_string(cfg.sigma.size()) + " values for " +
                             std::to_string(tasks) + " tasks");
  return cfg.sigma[task];
}

std::string kernel_part(const std::string& method) {
  const auto plus = method.find('+');
  return plus == std::string::npos ? method : method.substr(plus + 1);
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

class SeedRunner {
 public:
  SeedRunner(const RunConfig& cfg, std::uint64_t seed, SeedData data, std::ostream* log)
      : cfg_(cfg), seed_(seed), data_(std::move(data)), design_(data_.family.design()), raw_(data_.raw.design()),
        log_(log) {}

  SeedDiagnostics diagnostics;

  bool needs_network() const {
    for (const auto& m : cfg_.methods)
      if (m.rfind("ours+", 0) == 0 || m == "nn-head") return true;
    return false;
  }

  void train_network() {
    diagnostics.seed = seed_;
    diagnostics.head_error = kNaN;
    diagnostics.best_validation_loss = kNaN;
    if (!needs_network()) return;
    const auto start = std::chrono::steady_clock::now();
    try {
      std::vector<std::string> labels;
      for (const auto& t : design_.tasks) labels.push_back(t.label);
      auto arch = default_architecture(design_.tasks.front().dim(), labels, cfg_.rep_dim, cfg_.hidden);
      arch.activation = cfg_.activation;
      TrainConfig tc = cfg_.train;
      tc.seed = seed_;
      TrainReport report;
      net_ = train(RepNet(arch, seed_), design_, tc, &report);
      diagnostics.trained = true;
      diagnostics.epochs = report.epochs_run;
      diagnostics.best_epoch = report.best_epoch;
      diagnostics.best_validation_loss = report.best_validation_loss;
      if (data_.source_ratio) {
        double total = 0.0;
        for (std::size_t a = 0; a < design_.size(); ++a) {
          const Eigen::VectorXd h = net_->head_values(design_.tasks[a].source_x, a);
          total += design_.probs(static_cast<Eigen::Index>(a)) * (h - (*data_.source_ratio)[a]).squaredNorm() /
                   static_cast<double>(h.size());
        }
        diagnostics.head_error = std::sqrt(total);
      }
    } catch (const std::exception& e) {
      network_error_ = e.what();
      diagnostics.message = e.what();
    }
    diagnostics.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log_)
      *log_ << "seed " << seed_ << ": representation "
            << (diagnostics.trained ? "trained in " + std::to_string(diagnostics.epochs) + " epochs"
                                    : "failed: " + network_error_)
            << '\n';
  }

  void run_method(const std::string& method, RunResult& out) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<WeightVector> weights;
    std::string error;
    try {
      weights = compute(method);
      for (std::size_t a = 0; a < weights.size(); ++a) {
        const auto& w = weights[a].w;
        if (w.size() != design_.tasks[a].source_size() || !w.allFinite() || (w.array() < 0.0).any() ||
            std::abs(w.mean() - 1.0) > 1e-6)
          throw std::runtime_error("weights violate the simplex constraints");
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    double joint = kNaN;
    if (error.empty() && data_.target_outcome) {
      std::vector<Eigen::VectorXd> ws;
      for (const auto& w : weights) ws.push_back(w.w);
      joint = joint_bias_metric(data_.family, ws, *data_.target_outcome);
    }
    for (std::size_t a = 0; a < design_.size(); ++a) {
      const auto& task = data_.family.tasks[a];
      ResultRecord r;
      r.seed = seed_;
      r.method = method;
      r.task = task.design.label;
      r.source_size = static_cast<long>(task.design.source_size());
      r.target_size = static_cast<long>(task.design.target_size());
      if (!error.empty()) {
        r.status = "fail";
        r.message = error;
        r.tau_hat = kNaN;
        r.joint_bias = kNaN;
        r.converged = false;
        r.primal_residual = r.dual_residual = kNaN;
      } else {
        const auto& wv = weights[a];
        r.tau_hat = task.source_pseudo_y ? wv.w.dot(*task.source_pseudo_y) / static_cast<double>(wv.w.size()) : kNaN;
        r.joint_bias = joint;
        r.converged = wv.certificate.converged;
        r.primal_residual = wv.certificate.primal_residual;
        r.dual_residual = wv.certificate.dual_residual;
        r.iterations = wv.certificate.iterations;
        if (!r.converged) r.message = "solver did not converge";
        if (cfg_.write_weights) out.weights.push_back({seed_, method, r.task, task.design.source_rows, wv.w});
      }
      out.records.push_back(std::move(r));
    }
    out.timings.push_back(
        {seed_, method, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    if (log_) *log_ << "seed " << seed_ << ": " << method << (error.empty() ? " ok" : " failed: " + error) << '\n';
  }

 private:
  const PropensityModel& propensity() {
    if (!ps_) ps_ = fit_propensity(data_.covariates, data_.membership, cfg_.logistic_lambda);
    return *ps_;
  }

  const RepNet& network() const {
    if (!net_) throw std::runtime_error("representation training failed: " + network_error_);
    return *net_;
  }

  Kernel kernel_for(const std::string& name, const Representation& phi, const DesignTask& task) const {
    Kernel k = kernel_from_name(name);
    if (auto* g = std::get_if<GaussianKernel>(&k))
      g->bandwidth = cfg_.gaussian_bandwidth ? *cfg_.gaussian_bandwidth
                                             : median_heuristic_bandwidth(phi(task.source_x), phi(task.target_x));
    return k;
  }

  WeightVector kom(const std::string& method, const DesignTask& task, std::size_t a, const Representation& phi) {
    const Kernel k = kernel_for(kernel_part(method), phi, task);
    const double sigma = sigma_for(cfg_, a, design_.size());
    if (cfg_.dump_qp) {
      const auto dir = std::filesystem::path(cfg_.output_dir) / "qp" / ("seed-" + std::to_string(seed_));
      std::filesystem::create_directories(dir);
      std::ofstream f(dir / (sanitize(method) + "_" + sanitize(task.label) + ".txt"));
      dump_qp(assemble_qp(gram(k, phi, task.source_x, task.target_x), sigma), f);
    }
    return kom_weights(task, k, phi, sigma, cfg_.solver);
  }

  std::vector<WeightVector> compute(const std::string& method) {
    std::vector<WeightVector> out;
    const auto& tasks = design_.tasks;
    if (method.rfind("ours+", 0) == 0) {
      const auto phi = extract_representation(network());
      for (std::size_t a = 0; a < tasks.size(); ++a) out.push_back(kom(method, tasks[a], a, phi));
    } else if (method.rfind("pca+", 0) == 0) {
      for (std::size_t a = 0; a < tasks.size(); ++a) {
        const auto& t = tasks[a];
        Eigen::MatrixXd pool;
        if (t.arm) {
          pool = t.target_x;  // the target already holds every row
        } else {
          pool.resize(t.source_size() + t.target_size(), t.dim());
          pool << t.source_x, t.target_x;
        }
        const auto phi = pca_representation(pool, std::min(cfg_.rep_dim, t.dim()));
        out.push_back(kom(method, t, a, phi));
      }
    } else if (method.rfind("ps+", 0) == 0) {
      const auto phi = ps_vector_representation(propensity());
      for (std::size_t a = 0; a < tasks.size(); ++a) out.push_back(kom(method, raw_.tasks[a], a, phi));
    } else if (method == "energy" || method == "linear" || method == "gaussian") {
      const auto phi = identity_representation();
      for (std::size_t a = 0; a < tasks.size(); ++a) out.push_back(kom(method, tasks[a], a, phi));
    } else if (method == "entropy") {
      for (const auto& t : tasks) out.push_back(entropy_balance(t));
    } else if (method == "ipw") {
      const auto& ps = propensity();
      for (const auto& t : raw_.tasks) {
        const Eigen::MatrixXd probs = ps.predict(t.source_x);
        switch (cfg_.task) {
          case Framing::ate: out.push_back(ipw_weights(IpwKind::ate, probs.col(ps.column(*t.arm)))); break;
          case Framing::att: out.push_back(ipw_weights(IpwKind::att, probs.col(ps.column(1)))); break;
          case Framing::transport:
            out.push_back(ipw_weights(IpwKind::transport, probs.col(ps.column(1))));
            break;
        }
      }
    } else if (method == "nn-head") {
      for (const auto& t : tasks) out.push_back(nn_head_weights(network(), t));
    } else if (method == "unweighted") {
      for (const auto& t : tasks) out.push_back(uniform_weights(t));
    } else {
      throw std::invalid_argument("unknown method '" + method + "'");
    }
    return out;
  }

  const RunConfig& cfg_;
  std::uint64_t seed_;
  SeedData data_;
  DesignFamily design_;
  DesignFamily raw_;
  std::ostream* log_;
  std::optional<RepNet> net_;
  std::string network_error_;
  std::optional<PropensityModel> ps_;
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

bool RunResult::all_failed() const {
  for (const auto& r : records)
    if (r.ok()) return false;
  return true;
}

std::vector<std::string> check_data(const RunConfig& cfg) {
  cfg.validate();
  std::vector<std::string> labels;
  if (cfg.synthetic) {
    if (cfg.task == Framing::ate) return {"arm=0", "arm=1"};
    return {framing_name(cfg.task)};
  }
  try {
    const auto ds = load_dataset_csv(cfg.csv->path, cfg.csv->schema);
    const auto family = build_family(cfg, ds);
    for (const auto& t : family.tasks) labels.push_back(t.design.label);
    if (cfg.sigma.size() != 1 && cfg.sigma.size() != labels.size())
      throw std::invalid_argument("balancing.sigma: give one value or one per task (" + std::to_string(labels.size()) +
                                  ")");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return labels;
}

RunResult run_pipeline(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  std::optional<Dataset> csv_data;
  if (cfg.csv) csv_data = load_dataset_csv(cfg.csv->path, cfg.csv->schema);

  RunResult out;
  for (const auto seed : cfg.seeds) {
    std::optional<SeedRunner> runner;
    try {
      runner.emplace(cfg, seed, prepare(cfg, seed, csv_data), log);
    } catch (const std::exception& e) {
      // Task construction failed: every cell of this seed fails.
      for (const auto& m : cfg.methods) {
        ResultRecord r;
        r.seed = seed;
        r.method = m;
        r.task = "*";
        r.status = "fail";
        r.tau_hat = r.joint_bias = r.primal_residual = r.dual_residual = kNaN;
        r.converged = false;
        r.message = e.what();
        out.records.push_back(std::move(r));
      }
      SeedDiagnostics d;
      d.seed = seed;
      d.head_error = d.best_validation_loss = kNaN;
      d.message = e.what();
      out.diagnostics.push_back(d);
      continue;
    }
    runner->train_network();
    for (const auto& m : cfg.methods) runner->run_method(m, out);
    out.diagnostics.push_back(runner->diagnostics);
  }
  return out;
}

void write_outputs(const RunConfig& cfg, const RunResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ostringstream s;
    write_results_tsv(result.records, s);
    write_file(fs::path(dir) / "results.tsv", s.str());
  }
  write_file(fs::path(dir) / "table.txt", format_table(result.records));
  {
    std::ostringstream s;
    s << "seed\ttrained\tepochs\tbest_epoch\tbest_validation_loss\thead_error\tmessage\n";
    for (const auto& d : result.diagnostics)
      s << d.seed << '\t' << (d.trained ? 1 : 0) << '\t' << d.epochs << '\t' << d.best_epoch << '\t'
        << num(d.best_validation_loss) << '\t' << num(d.head_error) << '\t' << d.message << '\n';
    write_file(fs::path(dir) / "diagnostics.tsv", s.str());
  }
  {
    std::ostringstream s;
    s << "seed\tmethod\tseconds\n";
    for (const auto& d : result.diagnostics) s << d.seed << "\ttraining\t" << num(d.train_seconds) << '\n';
    for (const auto& t : result.timings) s << t.seed << '\t' << t.method << '\t' << num(t.seconds) << '\n';
    write_file(fs::path(dir) / "timings.tsv", s.str());
  }
  if (cfg.write_weights) {
    for (const auto& seed : cfg.seeds) {
      const auto sdir = fs::path(dir) / "weights" / ("seed-" + std::to_string(seed));
      for (const auto& m : cfg.methods) {
        std::ostringstream s;
        bool any = false;
        s << "task\trow\tweight\n";
        for (const auto& cw : result.weights) {
          if (cw.seed != seed || cw.method != m) continue;
          // Emit-time re-validation of the simplex constraints.
          if ((cw.w.array() < 0.0).any() || std::abs(cw.w.mean() - 1.0) > 1e-6)
            throw std::logic_error("weights for " + m + " / " + cw.task + " violate the simplex constraints");
          any = true;
          for (Eigen::Index i = 0; i < cw.w.size(); ++i)
            s << cw.task << '\t' << cw.source_rows[static_cast<std::size_t>(i)] << '\t' << num(cw.w(i)) << '\n';
        }
        if (!any) continue;
        fs::create_directories(sdir);
        write_file(sdir / (sanitize(m) + ".tsv"), s.str());
      }
    }
  }
}

}  // namespace repw
