#include "amh/kernel_ridge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "amh/errors.hpp"

namespace amh {

double median_pairwise_distance(const Eigen::MatrixXd& inputs) {
  const Eigen::Index n = inputs.rows();
  if (n < 2) return 0.0;
  std::vector<double> distances;
  distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      distances.push_back((inputs.row(i) - inputs.row(j)).norm());
    }
  }
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid),
                   distances.end());
  const double upper = distances[mid];
  if (distances.size() % 2 == 1) return upper;
  const double lower = *std::max_element(distances.begin(),
                                         distances.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

KernelRegressor KernelRegressor::fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                                     const KernelRidgeSettings& settings) {
  if (!(settings.ridge > 0.0)) throw ConfigError("ridge must be positive");
  if (!settings.lengthscale.median && !(settings.lengthscale.value > 0.0))
    throw ConfigError("lengthscale must be positive");
  detail::require(inputs.rows() == outputs.rows(), "fit: inputs and outputs differ in length");
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n < settings.n_min || n == 0) {
    std::ostringstream msg;
    msg << "kernel regressor needs " << std::max<std::size_t>(settings.n_min, 1)
        << " training pairs, has " << n;
    throw NotReadyError(msg.str());
  }

  KernelRegressor regressor;
  regressor.inputs_ = inputs;
  regressor.ridge_ = settings.ridge;
  if (settings.lengthscale.median) {
    const double median = median_pairwise_distance(inputs);
    regressor.lengthscale_ = median > 0.0 ? median : 0.5;
  } else {
    regressor.lengthscale_ = settings.lengthscale.value;
  }

  Eigen::MatrixXd system = regressor.kernel_matrix();
  system.diagonal().array() += settings.ridge;
  const Eigen::LLT<Eigen::MatrixXd> factor(system);
  // Positive ridge keeps the Gaussian kernel matrix positive definite.
  detail::require(factor.info() == Eigen::Success, "kernel system is not positive definite");
  regressor.weights_ = factor.solve(outputs);
  // One refinement step; the kernel matrix is badly conditioned at small ridge.
  const Eigen::MatrixXd residual = outputs - system * regressor.weights_;
  regressor.weights_ += factor.solve(residual);
  return regressor;
}

double KernelRegressor::kernel(std::span<const double> a, std::span<const double> b) const {
  double squared = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    squared += d * d;
  }
  return std::exp(-squared / (2.0 * lengthscale_ * lengthscale_));
}

Eigen::MatrixXd KernelRegressor::kernel_matrix() const {
  const Eigen::Index n = inputs_.rows();
  Eigen::MatrixXd k(n, n);
  const double scale = -1.0 / (2.0 * lengthscale_ * lengthscale_);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double value = std::exp(scale * (inputs_.row(i) - inputs_.row(j)).squaredNorm());
      k(i, j) = value;
      k(j, i) = value;
    }
  }
  return k;
}

Eigen::VectorXd KernelRegressor::predict(std::span<const double> unit_input) const {
  detail::require(static_cast<Eigen::Index>(unit_input.size()) == inputs_.cols(),
                  "predict: input dimension mismatch");
  const Eigen::Map<const Eigen::RowVectorXd> x(unit_input.data(), inputs_.cols());
  const double scale = -1.0 / (2.0 * lengthscale_ * lengthscale_);
  const Eigen::VectorXd k =
      (scale * (inputs_.rowwise() - x).rowwise().squaredNorm()).array().exp().matrix();
  return weights_.transpose() * k;
}

}  // namespace amh
