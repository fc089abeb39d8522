#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace repw {

/// Raw observational or trial data: covariates plus optional treatment,
/// outcome and RCT-membership columns, all with one entry per row.
struct Dataset {
  Eigen::MatrixXd covariates;
  std::vector<std::string> covariate_names;

  std::optional<std::vector<int>> treatment;
  // Declared treatment labels. Filled from the data when not declared, so an
  // arm listed here may legitimately have no rows.
  std::vector<int> treatment_alphabet;

  std::optional<Eigen::VectorXd> outcome;
  std::optional<std::vector<int>> rct_indicator;

  Eigen::Index rows() const { return covariates.rows(); }
  Eigen::Index dim() const { return covariates.cols(); }

  // Throws std::invalid_argument on the first violated invariant.
  void validate() const;
};

/// Builds a dataset, collects the treatment alphabet and validates it.
Dataset make_dataset(Eigen::MatrixXd covariates,
                     std::optional<std::vector<int>> treatment = std::nullopt,
                     std::optional<Eigen::VectorXd> outcome = std::nullopt,
                     std::optional<std::vector<int>> rct_indicator = std::nullopt);

/// Rows of `ds` (in order) selected by `rows`. Every present column follows.
Dataset select_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows);

/// Splits a pooled file into its RCT (S=1) and observational (S=0) parts.
std::pair<Dataset, Dataset> split_by_indicator(const Dataset& ds);

struct CsvSchema {
  std::vector<std::string> covariates;
  std::optional<std::string> treatment;
  std::optional<std::string> outcome;
  std::optional<std::string> indicator;
  // Optional declared alphabet; otherwise the distinct labels in the file.
  std::vector<int> treatment_alphabet;
};

/// Parse failure with its location. `row` is the 1-based data row (the header
/// is row 0) and `column` the header name, empty when not column specific.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t row, std::string column, const std::string& what);
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_dataset_csv(std::istream& in, const CsvSchema& schema);

}  // namespace repw
