#include "repw/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace repw {

void Dataset::validate() const {
  const auto n = static_cast<std::size_t>(covariates.rows());
  if (!covariate_names.empty() && covariate_names.size() != static_cast<std::size_t>(covariates.cols()))
    throw std::invalid_argument("dataset: covariate name count does not match column count");
  if (!covariates.allFinite()) throw std::invalid_argument("dataset: covariates contain non-finite values");
  if (treatment) {
    if (treatment->size() != n) throw std::invalid_argument("dataset: treatment column has wrong length");
    for (int a : *treatment) {
      if (std::find(treatment_alphabet.begin(), treatment_alphabet.end(), a) == treatment_alphabet.end())
        throw std::invalid_argument("dataset: treatment label " + std::to_string(a) + " not in alphabet");
    }
  }
  if (outcome && static_cast<std::size_t>(outcome->size()) != n)
    throw std::invalid_argument("dataset: outcome column has wrong length");
  if (rct_indicator) {
    if (rct_indicator->size() != n) throw std::invalid_argument("dataset: indicator column has wrong length");
    for (int s : *rct_indicator)
      if (s != 0 && s != 1) throw std::invalid_argument("dataset: indicator must be 0 or 1");
  }
}

Dataset make_dataset(Eigen::MatrixXd covariates, std::optional<std::vector<int>> treatment,
                     std::optional<Eigen::VectorXd> outcome, std::optional<std::vector<int>> rct_indicator) {
  Dataset ds;
  ds.covariates = std::move(covariates);
  ds.treatment = std::move(treatment);
  ds.outcome = std::move(outcome);
  ds.rct_indicator = std::move(rct_indicator);
  if (ds.treatment) {
    std::set<int> labels(ds.treatment->begin(), ds.treatment->end());
    ds.treatment_alphabet.assign(labels.begin(), labels.end());
  }
  ds.validate();
  return ds;
}

Dataset select_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.covariate_names = ds.covariate_names;
  out.treatment_alphabet = ds.treatment_alphabet;
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.covariates.row(i) = ds.covariates.row(rows[i]);
  if (ds.treatment) {
    out.treatment.emplace();
    for (auto r : rows) out.treatment->push_back((*ds.treatment)[r]);
  }
  if (ds.outcome) {
    out.outcome.emplace(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) (*out.outcome)(i) = (*ds.outcome)(rows[i]);
  }
  if (ds.rct_indicator) {
    out.rct_indicator.emplace();
    for (auto r : rows) out.rct_indicator->push_back((*ds.rct_indicator)[r]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_by_indicator(const Dataset& ds) {
  if (!ds.rct_indicator) throw std::invalid_argument("dataset has no RCT indicator column");
  std::vector<Eigen::Index> rct, obs;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) ((*ds.rct_indicator)[i] == 1 ? rct : obs).push_back(i);
  return {select_rows(ds, rct), select_rows(ds, obs)};
}

CsvError::CsvError(std::size_t row, std::string column, const std::string& what)
    : std::runtime_error("csv row " + std::to_string(row) + (column.empty() ? "" : ", column '" + column + "'") +
                         ": " + what),
      row_(row),
      column_(std::move(column)) {}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  // strtod accepts "nan"/"inf", which are then rejected as non-finite by the caller.
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Dataset parse_dataset_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(0, "", "missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < header.size(); ++j) index[header[j]] = j;

  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw CsvError(0, name, "declared column missing from header");
    return it->second;
  };
  if (schema.covariates.empty()) throw CsvError(0, "", "schema declares no covariate columns");
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariates) cov_cols.push_back(locate(c));
  std::optional<std::size_t> a_col, y_col, s_col;
  if (schema.treatment) a_col = locate(*schema.treatment);
  if (schema.outcome) y_col = locate(*schema.outcome);
  if (schema.indicator) s_col = locate(*schema.indicator);

  std::vector<std::vector<double>> x_rows;
  std::vector<int> a, s;
  std::vector<double> y;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw CsvError(row, "", "expected " + std::to_string(header.size()) + " cells, found " +
                                  std::to_string(cells.size()));
    std::vector<double> xr;
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      const auto& cell = cells[cov_cols[k]];
      auto v = parse_double(cell);
      if (!v) throw CsvError(row, schema.covariates[k], "non-numeric value '" + cell + "'");
      if (!std::isfinite(*v)) throw CsvError(row, schema.covariates[k], "non-finite value '" + cell + "'");
      xr.push_back(*v);
    }
    x_rows.push_back(std::move(xr));
    if (a_col) {
      auto v = parse_int(cells[*a_col]);
      if (!v) throw CsvError(row, *schema.treatment, "treatment must be an integer label, got '" + cells[*a_col] + "'");
      a.push_back(*v);
    }
    if (y_col) {
      auto v = parse_double(cells[*y_col]);
      if (!v || !std::isfinite(*v)) throw CsvError(row, *schema.outcome, "invalid outcome '" + cells[*y_col] + "'");
      y.push_back(*v);
    }
    if (s_col) {
      auto v = parse_int(cells[*s_col]);
      if (!v || (*v != 0 && *v != 1))
        throw CsvError(row, *schema.indicator, "indicator must be 0 or 1, got '" + cells[*s_col] + "'");
      s.push_back(*v);
    }
  }

  Dataset ds;
  ds.covariate_names = schema.covariates;
  ds.covariates.resize(static_cast<Eigen::Index>(x_rows.size()), static_cast<Eigen::Index>(cov_cols.size()));
  for (std::size_t i = 0; i < x_rows.size(); ++i)
    for (std::size_t j = 0; j < cov_cols.size(); ++j) ds.covariates(i, j) = x_rows[i][j];
  if (a_col) {
    if (!schema.treatment_alphabet.empty()) {
      ds.treatment_alphabet = schema.treatment_alphabet;
      std::sort(ds.treatment_alphabet.begin(), ds.treatment_alphabet.end());
      for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::binary_search(ds.treatment_alphabet.begin(), ds.treatment_alphabet.end(), a[i]))
          throw CsvError(i + 1, *schema.treatment, "label " + std::to_string(a[i]) + " not in declared alphabet");
    } else {
      std::set<int> labels(a.begin(), a.end());
      ds.treatment_alphabet.assign(labels.begin(), labels.end());
    }
    ds.treatment = std::move(a);
  }
  if (y_col) ds.outcome = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  if (s_col) ds.rct_indicator = std::move(s);
  ds.validate();
  return ds;
}

Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);
  return parse_dataset_csv(in, schema);
}

}  // namespace repw
