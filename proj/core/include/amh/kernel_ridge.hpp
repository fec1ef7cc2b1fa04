#pragma once

// Gaussian kernel ridge regression on unit-scaled inputs. Used for the reduced
// coefficient surrogate (vector outputs) and the objective surrogate of the
// optimization demo (scalar outputs).

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace amh {

struct LengthscalePolicy {
  bool median = true;
  double value = 0.5;  ///< used when !median

  static LengthscalePolicy median_heuristic() { return {true, 0.5}; }
  static LengthscalePolicy fixed(double lengthscale) { return {false, lengthscale}; }
};

struct KernelRidgeSettings {
  LengthscalePolicy lengthscale = LengthscalePolicy::median_heuristic();
  double ridge = 1e-8;
  std::size_t n_min = 10;
};

/// Median of the pairwise Euclidean distances between the rows of `inputs`;
/// 0 for fewer than two rows.
double median_pairwise_distance(const Eigen::MatrixXd& inputs);

class KernelRegressor {
 public:
  /// `inputs` is n x Q (unit-scaled rows), `outputs` n x D. Throws
  /// NotReadyError when n < settings.n_min and ConfigError for bad settings.
  static KernelRegressor fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                             const KernelRidgeSettings& settings);

  Eigen::VectorXd predict(std::span<const double> unit_input) const;
  double kernel(std::span<const double> a, std::span<const double> b) const;
  Eigen::MatrixXd kernel_matrix() const;

  double lengthscale() const { return lengthscale_; }
  double ridge() const { return ridge_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
  Eigen::Index output_dimension() const { return weights_.cols(); }

 private:
  KernelRegressor() = default;

  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd weights_;  ///< n x D, solves (K + ridge I) W = Y
  double lengthscale_ = 0.5;
  double ridge_ = 1e-8;
};

}  // namespace amh
