#include "amh/parabolic/rb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "amh/errors.hpp"

namespace amh::parabolic {

namespace {

// Upper-triangular factor T of W (T^T T = W^T W), via Householder QR.
Eigen::MatrixXd triangular_factor(const Eigen::MatrixXd& w) {
  const Eigen::Index rows = std::min(w.rows(), w.cols());
  if (w.cols() == 0) return Eigen::MatrixXd(0, 0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  Eigen::MatrixXd factor = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  return factor;
}

void check_parameter(const ReducedSystem& reduced, const ParameterVector& mu) {
  if (mu.size() != static_cast<std::size_t>(reduced.q)) {
    std::ostringstream msg;
    msg << "expected " << reduced.q << " parameters, got " << mu.size();
    throw DomainError(msg.str());
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > 0.0)) throw DomainError("diffusivity must be positive");
  }
}

void check_trajectory(const ReducedSystem& reduced, const ReducedTrajectory& trajectory) {
  if (trajectory.generation != reduced.generation) {
    std::ostringstream msg;
    msg << "reduced trajectory of generation " << trajectory.generation
        << " used with reduced system of generation " << reduced.generation;
    throw ContractViolation(msg.str());
  }
  detail::require(trajectory.coefficients.rows() == reduced.n &&
                      trajectory.coefficients.cols() == reduced.k + 1,
                  "reduced trajectory has the wrong shape");
}

}  // namespace

ReducedSystem build_reduced_system(const AffineSystem& system, const ReducedBasis& basis) {
  const Eigen::MatrixXd& V = basis.vectors;
  detail::require(V.rows() == system.n_h, "basis rows differ from n_h");
  const Eigen::Index n = V.cols();

  ReducedSystem reduced;
  reduced.generation = basis.generation;
  reduced.n = static_cast<int>(n);
  reduced.q = system.Q;
  reduced.k = system.K;
  reduced.dt = system.dt;

  const Eigen::MatrixXd MV = system.mass.apply(V);
  reduced.mass = V.transpose() * MV;
  reduced.load = V.transpose() * system.load;
  reduced.initial_coefficients = system.gram.apply(V).transpose() * system.initial;
  reduced.qoi_coefficients = V.transpose() * system.qoi_vector;

  // Columns of `blocks` are the functionals whose Riesz representers enter the residual.
  const Eigen::Index m = 1 + (system.Q + 1) * n;
  Eigen::MatrixXd blocks(system.n_h, m);
  blocks.col(0) = system.load;
  blocks.middleCols(1, n) = MV;
  for (int q = 0; q < system.Q; ++q) {
    const Eigen::MatrixXd AV = system.stiffness[q].apply(V);
    reduced.stiffness.push_back(V.transpose() * AV);
    blocks.middleCols(1 + (q + 1) * n, n) = AV;
  }
  const TridiagFactorization gram_factor(system.gram);
  const Eigen::MatrixXd whitened = gram_factor.whiten(blocks);
  reduced.residual_gram = whitened.transpose() * whitened;
  reduced.residual_gram = 0.5 * (reduced.residual_gram + reduced.residual_gram.transpose()).eval();
  reduced.residual_factor = triangular_factor(whitened);

  Eigen::MatrixXd initial_block(system.n_h, 1 + n);
  initial_block.col(0) = system.initial;
  initial_block.rightCols(n) = V;
  const TridiagFactorization mass_factor(system.mass);
  reduced.initial_factor = triangular_factor(mass_factor.root_apply(initial_block));
  return reduced;
}

Eigen::VectorXd project(const ReducedBasis& basis, const AffineSystem& system,
                        const Eigen::VectorXd& state) {
  detail::require(state.size() == system.n_h, "project: state length differs from n_h");
  return basis.vectors.transpose() * system.gram.apply(state);
}

ExtensionResult extend_basis(const ReducedBasis& basis, const AffineSystem& system,
                             const Trajectory& trajectory, const PodSettings& settings) {
  const Eigen::MatrixXd& S = trajectory.states;
  detail::require(S.rows() == system.n_h, "extend_basis: trajectory has the wrong n_h");
  detail::require(basis.vectors.rows() == system.n_h, "extend_basis: basis has the wrong n_h");

  ExtensionResult result;
  result.basis = basis;

  const Eigen::MatrixXd& V = basis.vectors;
  const Eigen::MatrixXd XS = system.gram.apply(S);
  const double total_energy = S.cwiseProduct(XS).sum();
  const Eigen::MatrixXd residual = S - V * (V.transpose() * XS);
  Eigen::MatrixXd correlation = residual.transpose() * system.gram.apply(residual);
  correlation = 0.5 * (correlation + correlation.transpose()).eval();
  const double residual_energy = correlation.trace();

  const int capacity =
      std::min(settings.n_add_max, settings.n_max - static_cast<int>(basis.dimension()));
  if (capacity <= 0 || !(total_energy > 0.0) ||
      residual_energy <= settings.pod_tol * total_energy) {
    return result;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(correlation);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = eig.eigenvectors();

  Eigen::MatrixXd extended = V;
  double captured = 0.0;
  int added = 0;
  for (Eigen::Index i = values.size() - 1; i >= 0 && added < capacity; --i) {
    const double lambda = values(i);
    if (!(lambda > 0.0)) break;
    Eigen::VectorXd mode = residual * vectors.col(i) / std::sqrt(lambda);
    for (int pass = 0; pass < 2; ++pass) {
      mode -= extended * (extended.transpose() * system.gram.apply(mode));
    }
    const double norm = std::sqrt(std::max(0.0, mode.dot(system.gram.apply(mode))));
    if (norm < 1e-8) break;  // numerically inside the current span
    extended.conservativeResize(Eigen::NoChange, extended.cols() + 1);
    extended.col(extended.cols() - 1) = mode / norm;
    captured += lambda;
    ++added;
    if (captured >= (1.0 - settings.pod_tol) * residual_energy) break;
  }

  if (added > 0) {
    result.basis.vectors = std::move(extended);
    result.basis.generation = basis.generation + 1;
    result.system = build_reduced_system(system, result.basis);
  }
  result.modes_added = added;
  return result;
}

ReducedTrajectory solve_rb(const ReducedSystem& reduced, const ParameterVector& mu) {
  check_parameter(reduced, mu);
  ReducedTrajectory trajectory;
  trajectory.mu = mu;
  trajectory.generation = reduced.generation;
  trajectory.producer = Producer::kRb;
  trajectory.coefficients.resize(reduced.n, reduced.k + 1);
  if (reduced.n == 0) return trajectory;

  Eigen::MatrixXd lhs = reduced.mass;
  for (int q = 0; q < reduced.q; ++q) lhs += reduced.dt * mu[q] * reduced.stiffness[q];
  const Eigen::LLT<Eigen::MatrixXd> factor(lhs);
  if (factor.info() != Eigen::Success) throw ContractViolation("reduced operator is not SPD");

  const Eigen::VectorXd forcing = reduced.dt * reduced.load;
  trajectory.coefficients.col(0) = reduced.initial_coefficients;
  for (int k = 1; k <= reduced.k; ++k) {
    Eigen::VectorXd rhs = reduced.mass * trajectory.coefficients.col(k - 1) + forcing;
    trajectory.coefficients.col(k) = factor.solve(rhs);
  }
  return trajectory;
}

double coercivity_lower_bound(const ParameterVector& mu) {
  if (mu.size() == 0) throw DomainError("coercivity bound needs at least one parameter");
  double bound = mu[0];
  for (std::size_t q = 0; q < mu.size(); ++q) {
    if (!(mu[q] > 0.0)) throw DomainError("diffusivity must be positive");
    bound = std::min(bound, mu[q]);
  }
  return bound;
}

std::vector<double> residual_dual_norms(const ReducedSystem& reduced, const ParameterVector& mu,
                                        const ReducedTrajectory& trajectory) {
  check_parameter(reduced, mu);
  check_trajectory(reduced, trajectory);
  const Eigen::Index n = reduced.n;
  const Eigen::Index m = 1 + (reduced.q + 1) * n;
  const Eigen::MatrixXd& a = trajectory.coefficients;

  // Column k-1 holds the residual coordinates of step k in the Riesz blocks.
  Eigen::MatrixXd coords(m, reduced.k);
  coords.row(0).setOnes();
  if (n > 0) {
    const Eigen::MatrixXd current = a.rightCols(reduced.k);
    coords.middleRows(1, n) = -(current - a.leftCols(reduced.k)) / reduced.dt;
    for (int q = 0; q < reduced.q; ++q) coords.middleRows(1 + (q + 1) * n, n) = -mu[q] * current;
  }
  const Eigen::MatrixXd whitened = reduced.residual_factor.triangularView<Eigen::Upper>() * coords;
  std::vector<double> norms(reduced.k);
  for (int k = 0; k < reduced.k; ++k) norms[k] = whitened.col(k).norm();
  return norms;
}

double error_estimate(const ReducedSystem& reduced, const ParameterVector& mu,
                      const ReducedTrajectory& trajectory) {
  const std::vector<double> norms = residual_dual_norms(reduced, mu, trajectory);
  const double alpha = coercivity_lower_bound(mu);

  Eigen::VectorXd initial(1 + reduced.n);
  initial(0) = 1.0;
  initial.tail(reduced.n) = -trajectory.coefficients.col(0);
  const double initial_error = (reduced.initial_factor * initial).squaredNorm();

  double residual_sum = 0.0;
  for (double r : norms) residual_sum += r * r;
  return std::sqrt(initial_error + reduced.dt / alpha * residual_sum);
}

Trajectory reconstruct(const ReducedBasis& basis, const ReducedTrajectory& trajectory) {
  detail::require(trajectory.generation == basis.generation,
                  "reconstruct: reduced trajectory belongs to another basis generation");
  detail::require(trajectory.coefficients.rows() == basis.dimension(),
                  "reconstruct: coefficient length differs from basis dimension");
  Trajectory full;
  full.mu = trajectory.mu;
  full.states = basis.vectors * trajectory.coefficients;
  return full;
}

Eigen::VectorXd reconstruct_final(const ReducedBasis& basis, const ReducedTrajectory& trajectory) {
  detail::require(trajectory.generation == basis.generation,
                  "reconstruct: reduced trajectory belongs to another basis generation");
  detail::require(trajectory.coefficients.rows() == basis.dimension(),
                  "reconstruct: coefficient length differs from basis dimension");
  return basis.vectors * trajectory.coefficients.col(trajectory.coefficients.cols() - 1);
}

ReducedModel::ReducedModel(std::shared_ptr<const AffineSystem> system, PodSettings settings)
    : system_(std::move(system)), settings_(settings) {
  detail::require(system_ != nullptr, "ReducedModel needs a system");
  if (!(settings_.pod_tol > 0.0 && settings_.pod_tol < 1.0))
    throw ConfigError("pod_tol must lie in (0, 1)");
  if (settings_.n_add_max < 1 || settings_.n_max < 1)
    throw ConfigError("n_add_max and N_max must be positive");
  basis_.vectors.resize(system_->n_h, 0);
  reduced_ = build_reduced_system(*system_, basis_);
}

int ReducedModel::absorb_trajectory(const Trajectory& trajectory) {
  ExtensionResult result = extend_basis(basis_, *system_, trajectory, settings_);
  if (result.modes_added > 0) {
    basis_ = std::move(result.basis);
    reduced_ = std::move(*result.system);
  }
  return result.modes_added;
}

ReducedTrajectory ReducedModel::solve(const ParameterVector& mu) const {
  return solve_rb(reduced_, mu);
}

double ReducedModel::estimate(const ParameterVector& mu, const ReducedTrajectory& trajectory) const {
  return error_estimate(reduced_, mu, trajectory);
}

double ReducedModel::qoi(const ReducedTrajectory& trajectory) const {
  check_trajectory(reduced_, trajectory);
  if (reduced_.n == 0) return 0.0;
  return reduced_.qoi_coefficients.dot(trajectory.coefficients.col(reduced_.k));
}

RbLevel::RbLevel(std::shared_ptr<ReducedModel> model) : model_(std::move(model)) {
  detail::require(model_ != nullptr, "RbLevel needs a reduced model");
}

ModelOutput RbLevel::evaluate(const ParameterVector& mu) {
  auto trajectory = std::make_shared<const ReducedTrajectory>(model_->solve(mu));
  ModelOutput output;
  output.qoi = model_->qoi(*trajectory);
  output.data = trajectory;
  return output;
}

ErrorEstimate RbLevel::estimate_error(const ModelOutput& output, const ParameterVector& mu,
                                      const ModelLevel*) {
  const auto* trajectory = std::any_cast<std::shared_ptr<const ReducedTrajectory>>(&output.data);
  detail::require(trajectory != nullptr && *trajectory, "RbLevel: output is not a reduced trajectory");
  return ErrorEstimate::of(model_->estimate(mu, **trajectory));
}

AbsorbResult RbLevel::absorb(const AdaptationPayload& payload) {
  const auto* trajectory = std::any_cast<std::shared_ptr<const Trajectory>>(&payload);
  if (trajectory == nullptr || !*trajectory) return AbsorbResult::ignored();
  AbsorbResult result;
  result.used = true;
  if (model_->absorb_trajectory(**trajectory) > 0) {
    result.emitted.emplace_back(BasisChanged{model_->generation()});
  }
  return result;
}

}  // namespace amh::parabolic
