#pragma once

// Self-checks behind `amh verify`: FOM against the analytic heat mode,
// online residual norms against full-space computations, X-orthonormality of
// POD bases and a sample of the estimator bound against FOM errors.

#include <cstdint>
#include <string>
#include <vector>

#include "amh/harness/config.hpp"
#include "amh/parabolic/fom.hpp"
#include "amh/parabolic/rb.hpp"

namespace amh::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  int equality_trials = 50;
  int rigor_trials = 200;
  int max_basis_size = 8;
  /// Test hook: flips the sign of the load/state coupling in the online
  /// residual data, which the offline/online check must detect.
  bool sabotage_gramian = false;
};

/// Max-node error at T against e^{-pi^2 T} sin(pi x) for f = 0, Q = 1, mu = 1.
double analytic_heat_error(int n_h, int K, double T);

/// Residual dual norms computed in the full space: r^k assembled from V a^k,
/// X rho = r^k solved, (rho^T X rho)^{1/2}.
std::vector<double> full_space_residual_norms(const parabolic::AffineSystem& system,
                                              const parabolic::ReducedBasis& basis,
                                              const ParameterVector& mu,
                                              const Eigen::MatrixXd& coefficients);

std::vector<CheckResult> run_verification(const RunConfig& config, const VerifyOptions& options);

}  // namespace amh::harness
