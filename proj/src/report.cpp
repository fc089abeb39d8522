#include "repw/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace repw {

namespace {

constexpr const char* kHeader =
    "seed\tmethod\ttask\tstatus\tsource_size\ttarget_size\ttau_hat\tjoint_bias\tconverged\tprimal_residual\t"
    "dual_residual\titerations\tmessage";

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string clean(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("results line " + std::to_string(line) + ": bad number '" + s + "'");
}

std::string cell(const Summary& s, int digits) {
  if (s.n == 0) return "n/a";
  char buf[64];
  if (std::isnan(s.se))
    std::snprintf(buf, sizeof buf, "%.*f (n/a)", digits, s.mean);
  else
    std::snprintf(buf, sizeof buf, "%.*f (%.*f)", digits, s.mean, digits, s.se);
  return buf;
}

}  // namespace

void write_results_tsv(const std::vector<ResultRecord>& records, std::ostream& out) {
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << r.seed << '\t' << clean(r.method) << '\t' << clean(r.task) << '\t' << r.status << '\t' << r.source_size
        << '\t' << r.target_size << '\t' << num(r.tau_hat) << '\t' << num(r.joint_bias) << '\t' << (r.converged ? 1 : 0)
        << '\t' << num(r.primal_residual) << '\t' << num(r.dual_residual) << '\t' << r.iterations << '\t'
        << clean(r.message) << '\n';
  }
}

std::vector<ResultRecord> read_results_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("results file: unexpected header");
  std::vector<ResultRecord> out;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 13) throw std::runtime_error("results line " + std::to_string(n) + ": expected 13 fields");
    ResultRecord r;
    try {
      r.seed = std::stoull(f[0]);
      r.source_size = std::stol(f[4]);
      r.target_size = std::stol(f[5]);
      r.iterations = std::stoi(f[11]);
    } catch (const std::exception&) {
      throw std::runtime_error("results line " + std::to_string(n) + ": bad integer field");
    }
    r.method = f[1];
    r.task = f[2];
    r.status = f[3];
    if (r.status != "ok" && r.status != "fail")
      throw std::runtime_error("results line " + std::to_string(n) + ": status must be ok or fail");
    r.tau_hat = parse_double(f[6], n);
    r.joint_bias = parse_double(f[7], n);
    r.converged = f[8] == "1";
    r.primal_residual = parse_double(f[9], n);
    r.dual_residual = parse_double(f[10], n);
    r.message = f[12];
    out.push_back(std::move(r));
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = s.se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(s.n);
  if (s.n < 2) {
    s.se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.se = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  return s;
}

std::string format_table(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw std::invalid_argument("format_table: no results");
  std::vector<std::string> methods, tasks;
  auto note = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : records) {
    note(methods, r.method);
    note(tasks, r.task);
  }
  std::vector<std::string> header = {"method", "seeds ok", "joint bias"};
  for (const auto& t : tasks) header.push_back("tau[" + t + "]");
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : methods) {
    std::map<std::uint64_t, bool> seed_ok;
    std::map<std::uint64_t, double> seed_bias;
    std::map<std::string, std::vector<double>> tau;
    std::map<std::string, std::string> reason;
    std::string first_reason;
    for (const auto& r : records) {
      if (r.method != m) continue;
      auto [it, inserted] = seed_ok.emplace(r.seed, r.ok());
      if (!inserted) it->second = it->second && r.ok();
      if (!r.ok()) {
        reason.emplace(r.task, r.message);
        if (first_reason.empty()) first_reason = r.message;
        continue;
      }
      if (!std::isnan(r.tau_hat)) tau[r.task].push_back(r.tau_hat);
      if (!std::isnan(r.joint_bias)) seed_bias[r.seed] = r.joint_bias;
    }
    std::size_t ok = 0;
    for (const auto& [seed, good] : seed_ok) ok += good ? 1 : 0;
    std::vector<double> bias;
    for (const auto& [seed, b] : seed_bias)
      if (seed_ok[seed]) bias.push_back(b);
    std::vector<std::string> row = {m, std::to_string(ok) + "/" + std::to_string(seed_ok.size())};
    if (ok == 0)
      row.push_back("FAIL(" + first_reason + ")");
    else
      row.push_back(cell(summarize(bias), 4));
    for (const auto& t : tasks) {
      const auto& v = tau[t];
      if (v.empty() && reason.count(t))
        row.push_back("FAIL(" + reason[t] + ")");
      else
        row.push_back(cell(summarize(v), 4));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << r[c];
      if (c + 1 < r.size()) out << std::string(width[c] - r[c].size() + 2, ' ');
    }
    out << '\n';
  };
  emit(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  emit(rule);
  for (const auto& r : rows) emit(r);
  return out.str();
}

}  // namespace repw
