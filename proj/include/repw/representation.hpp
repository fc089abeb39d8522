#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace repw {

/// A covariate map applied row-wise: n x d samples in, n x r images out.
using Representation = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

Representation identity_representation();

/// Keeps the listed columns, in order.
Representation coordinate_projection(std::vector<Eigen::Index> columns);

/// Maps every row to the same vector `value`.
Representation constant_representation(Eigen::VectorXd value);

}  // namespace repw
