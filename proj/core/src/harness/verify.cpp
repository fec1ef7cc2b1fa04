#include "amh/harness/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "amh/harness/results.hpp"
#include "amh/harness/rng.hpp"

namespace amh::harness {

namespace {

using namespace amh::parabolic;

ParameterVector random_parameter(const ParameterBox& box, Xoshiro256ss& rng) {
  std::vector<double> mu(box.dimension());
  for (std::size_t q = 0; q < mu.size(); ++q) mu[q] = rng.uniform(box.lower(q), box.upper(q));
  return ParameterVector(std::move(mu));
}

/// POD basis from one to three FOM trajectories, at most `target` modes.
ReducedBasis random_basis(const AffineSystem& system, const ParameterBox& box, int target,
                          Xoshiro256ss& rng) {
  PodSettings settings;
  settings.n_add_max = target;
  settings.n_max = target;
  ReducedBasis basis;
  basis.vectors.resize(system.n_h, 0);
  const int snapshots = 1 + static_cast<int>(rng() % 3);
  for (int s = 0; s < snapshots && basis.dimension() < target; ++s) {
    basis = extend_basis(basis, system, solve_fom(system, random_parameter(box, rng)), settings).basis;
  }
  return basis;
}

std::string describe(double value) { return format_number(value); }

CheckResult analytic_check(const RunConfig& config) {
  constexpr double kT = 0.1;
  const int n_h = config.fom.n_h;
  const int K = config.fom.K;
  const double h = 1.0 / (n_h + 1);
  const double dt = kT / K;
  const double error = analytic_heat_error(n_h, K, kT);
  const double bound = 4.0 * (h * h + dt);
  const double refined = analytic_heat_error(2 * n_h + 1, 4 * K, kT);
  std::ostringstream detail;
  detail << "max-node error " << describe(error) << " <= 4 (h^2 + dt) = " << describe(bound)
         << "; refinement ratio " << describe(error / refined);
  return {"fom analytic heat mode", error <= bound, detail.str()};
}

}  // namespace

double analytic_heat_error(int n_h, int K, double T) {
  DiscretizationConfig config;
  config.n_h = n_h;
  config.K = K;
  config.T = T;
  config.Q = 1;
  config.source = {0.0};
  config.u0 = InitialCondition::kSine;
  const AffineSystem system = assemble(config);
  const Trajectory trajectory = solve_fom(system, ParameterVector{1.0});
  const double pi = std::numbers::pi;
  const Eigen::VectorXd exact = std::exp(-pi * pi * T) * (pi * system.nodes.array()).sin().matrix();
  return (trajectory.states.col(K) - exact).cwiseAbs().maxCoeff();
}

std::vector<double> full_space_residual_norms(const AffineSystem& system, const ReducedBasis& basis,
                                              const ParameterVector& mu,
                                              const Eigen::MatrixXd& coefficients) {
  SymTridiag operator_mu(system.n_h);
  for (int q = 0; q < system.Q; ++q) operator_mu.add_scaled(mu[static_cast<std::size_t>(q)], system.stiffness[q]);
  const TridiagFactorization gram(system.gram);
  const Eigen::MatrixXd states = basis.vectors * coefficients;
  std::vector<double> norms;
  for (int k = 1; k <= system.K; ++k) {
    const Eigen::VectorXd r = system.load -
                              system.mass.apply(Eigen::VectorXd(states.col(k) - states.col(k - 1))) / system.dt -
                              operator_mu.apply(Eigen::VectorXd(states.col(k)));
    const Eigen::MatrixXd riesz = gram.solve(r);
    norms.push_back(std::sqrt(std::max(0.0, r.dot(riesz.col(0)))));
  }
  return norms;
}

std::vector<CheckResult> run_verification(const RunConfig& config, const VerifyOptions& options) {
  std::vector<CheckResult> results;
  results.push_back(analytic_check(config));

  RunConfig parabolic = config;
  if (parabolic.scenario != Scenario::kParabolic) {
    parabolic.scenario = Scenario::kParabolic;
    parabolic.box_lo.clear();
    parabolic.box_hi.clear();
  }
  const ParameterBox box = parabolic.box();
  const AffineSystem system = assemble(config.fom);
  const int max_n = std::min(options.max_basis_size, system.n_h);
  Xoshiro256ss rng(options.seed);

  // Offline/online equality on random coefficient sequences.
  {
    double worst = 0.0;
    for (int trial = 0; trial < options.equality_trials; ++trial) {
      const int target = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n));
      const ReducedBasis basis = random_basis(system, box, target, rng);
      ReducedSystem reduced = build_reduced_system(system, basis);
      if (options.sabotage_gramian) {
        const Eigen::Index m = reduced.residual_factor.cols();
        reduced.residual_factor.row(0).tail(m - 1) *= -1.0;
        reduced.residual_gram.row(0).tail(m - 1) *= -1.0;
        reduced.residual_gram.col(0).tail(m - 1) *= -1.0;
      }
      const ParameterVector mu = random_parameter(box, rng);
      ReducedTrajectory trajectory;
      trajectory.coefficients.resize(basis.dimension(), system.K + 1);
      for (Eigen::Index i = 0; i < trajectory.coefficients.size(); ++i)
        trajectory.coefficients.data()[i] = rng.uniform(-1.0, 1.0);
      trajectory.mu = mu;
      trajectory.generation = reduced.generation;
      const std::vector<double> online = residual_dual_norms(reduced, mu, trajectory);
      const std::vector<double> offline = full_space_residual_norms(system, basis, mu, trajectory.coefficients);
      for (std::size_t k = 0; k < online.size(); ++k) {
        const double scale = std::max(offline[k], 1e-300);
        worst = std::max(worst, std::abs(online[k] - offline[k]) / scale);
      }
    }
    std::ostringstream detail;
    detail << options.equality_trials << " trials, worst relative deviation " << describe(worst)
           << " (limit 1e-8)";
    results.push_back({"offline/online residual equality", worst <= 1e-8, detail.str()});
  }

  // X-orthonormality of POD bases, including one grown from many snapshots.
  {
    double worst = 0.0;
    ReducedBasis grown;
    grown.vectors.resize(system.n_h, 0);
    for (int s = 0; s < 10; ++s) {
      grown = extend_basis(grown, system, solve_fom(system, random_parameter(box, rng)), config.rb).basis;
    }
    std::vector<ReducedBasis> bases{grown};
    for (int trial = 0; trial < 10; ++trial)
      bases.push_back(random_basis(system, box, 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n)), rng));
    for (const ReducedBasis& basis : bases) {
      const Eigen::MatrixXd gram = basis.vectors.transpose() * system.gram.apply(basis.vectors);
      const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
      if (gram.size() > 0) worst = std::max(worst, (gram - identity).cwiseAbs().maxCoeff());
    }
    std::ostringstream detail;
    detail << bases.size() << " bases (largest N = " << grown.dimension()
           << "), max |V^T X V - I| = " << describe(worst) << " (limit 1e-10)";
    results.push_back({"basis X-orthonormality", worst <= 1e-10, detail.str()});
  }

  // Estimator bound against FOM errors.
  {
    int violations = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < options.rigor_trials; ++trial) {
      const int target = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n));
      const ReducedBasis basis = random_basis(system, box, target, rng);
      const ReducedSystem reduced = build_reduced_system(system, basis);
      const ParameterVector mu = random_parameter(box, rng);
      ReducedTrajectory trajectory = solve_rb(reduced, mu);
      if (trial % 2 == 1) {
        const double scale = 1e-3 * std::max(1.0, trajectory.coefficients.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < trajectory.coefficients.size(); ++i)
          trajectory.coefficients.data()[i] += scale * rng.uniform(-1.0, 1.0);
      }
      const double estimate = error_estimate(reduced, mu, trajectory);
      const Trajectory truth = solve_fom(system, mu);
      const double error = m_norm(system, Eigen::VectorXd(truth.states.col(system.K) -
                                                          reconstruct_final(basis, trajectory)));
      if (estimate < error - 1e-10) ++violations;
      if (error > 0.0) min_ratio = std::min(min_ratio, estimate / error);
    }
    std::ostringstream detail;
    detail << options.rigor_trials << " trials, " << violations
           << " violations, smallest estimate/error " << describe(min_ratio);
    results.push_back({"estimator rigor", violations == 0, detail.str()});
  }
  return results;
}

}  // namespace amh::harness
