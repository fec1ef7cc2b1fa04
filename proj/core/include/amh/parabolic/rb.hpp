#pragma once

// Reduced-basis model for the parabolic problem: Galerkin projection onto an
// X-orthonormal snapshot space grown by POD-Greedy steps, together with a
// residual-based a posteriori bound on the final-time M-norm error that holds
// for any coefficient sequence in the reduced space.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "amh/hierarchy.hpp"
#include "amh/parabolic/fom.hpp"

namespace amh::parabolic {

struct ReducedBasis {
  Eigen::MatrixXd vectors;  ///< n_h x N, X-orthonormal columns
  std::uint64_t generation = 0;

  Eigen::Index dimension() const { return vectors.cols(); }
};

struct PodSettings {
  double pod_tol = 1e-7;
  int n_add_max = 5;
  int n_max = 60;
};

/// Online data of one basis generation. Everything needed to solve and to
/// certify a reduced trajectory without touching n_h-sized objects.
struct ReducedSystem {
  std::uint64_t generation = 0;
  int n = 0;  ///< reduced dimension N
  int q = 0;
  int k = 0;
  double dt = 0.0;

  Eigen::MatrixXd mass;                    ///< V^T M V
  std::vector<Eigen::MatrixXd> stiffness;  ///< V^T A_q V
  Eigen::VectorXd load;                    ///< V^T F
  Eigen::VectorXd initial_coefficients;    ///< V^T X u0
  Eigen::VectorXd qoi_coefficients;        ///< V^T l

  /// Cross-Gramians of the Riesz representers X^{-1}[F, MV, A_1 V, ..., A_Q V],
  /// a (1 + (Q+1)N)-square symmetric matrix.
  Eigen::MatrixXd residual_gram;
  /// Upper-triangular factor with residual_factor^T residual_factor = residual_gram;
  /// the online residual norm is |residual_factor * c|.
  Eigen::MatrixXd residual_factor;
  /// Factor of the M-Gramian of [u0, V]; |initial_factor * (1, -a0)| = |u0 - V a0|_M.
  Eigen::MatrixXd initial_factor;
};

enum class Producer { kRb, kMl };

struct ReducedTrajectory {
  Eigen::MatrixXd coefficients;  ///< N x (K+1), column k is a^k
  ParameterVector mu;
  std::uint64_t generation = 0;
  Producer producer = Producer::kRb;
};

/// Offered downward whenever the reduced space changes.
struct BasisChanged {
  std::uint64_t generation = 0;
};

ReducedSystem build_reduced_system(const AffineSystem& system, const ReducedBasis& basis);

struct ExtensionResult {
  ReducedBasis basis;
  std::optional<ReducedSystem> system;  ///< rebuilt only when modes were added
  int modes_added = 0;
};

/// One POD-Greedy step with the snapshots of `trajectory`. The generation is
/// bumped only if at least one mode was appended.
ExtensionResult extend_basis(const ReducedBasis& basis, const AffineSystem& system,
                             const Trajectory& trajectory, const PodSettings& settings);

/// V^T X u
Eigen::VectorXd project(const ReducedBasis& basis, const AffineSystem& system,
                        const Eigen::VectorXd& state);

ReducedTrajectory solve_rb(const ReducedSystem& reduced, const ParameterVector& mu);

/// min_q mu_q; throws DomainError for a non-positive component.
double coercivity_lower_bound(const ParameterVector& mu);

/// ||r^k||_{X'} for k = 1..K. Throws ContractViolation on a generation mismatch.
std::vector<double> residual_dual_norms(const ReducedSystem& reduced, const ParameterVector& mu,
                                        const ReducedTrajectory& trajectory);

/// Bound on ||u_h^K(mu) - V a^K||_M valid for any coefficient sequence.
double error_estimate(const ReducedSystem& reduced, const ParameterVector& mu,
                      const ReducedTrajectory& trajectory);

Trajectory reconstruct(const ReducedBasis& basis, const ReducedTrajectory& trajectory);
Eigen::VectorXd reconstruct_final(const ReducedBasis& basis, const ReducedTrajectory& trajectory);

/// Basis and online system of the current generation, shared between the RB
/// level (which grows it) and the ML level (which predicts in it).
class ReducedModel {
 public:
  ReducedModel(std::shared_ptr<const AffineSystem> system, PodSettings settings);

  const AffineSystem& full_system() const { return *system_; }
  const ReducedBasis& basis() const { return basis_; }
  const ReducedSystem& reduced_system() const { return reduced_; }
  const PodSettings& settings() const { return settings_; }
  std::uint64_t generation() const { return basis_.generation; }
  Eigen::Index dimension() const { return basis_.dimension(); }

  /// POD-Greedy extension with a full-order trajectory; returns modes added.
  int absorb_trajectory(const Trajectory& trajectory);

  ReducedTrajectory solve(const ParameterVector& mu) const;
  /// Throws ContractViolation if `trajectory` belongs to another generation.
  double estimate(const ParameterVector& mu, const ReducedTrajectory& trajectory) const;
  double qoi(const ReducedTrajectory& trajectory) const;

 private:
  std::shared_ptr<const AffineSystem> system_;
  PodSettings settings_;
  ReducedBasis basis_;
  ReducedSystem reduced_;
};

/// Middle level. Emits shared_ptr<const ReducedTrajectory> on evaluation and
/// BasisChanged after absorbing a full-order trajectory that grew the basis.
class RbLevel final : public ModelLevel {
 public:
  explicit RbLevel(std::shared_ptr<ReducedModel> model);

  std::string name() const override { return "rb"; }
  ModelOutput evaluate(const ParameterVector& mu) override;
  ErrorEstimate estimate_error(const ModelOutput& output, const ParameterVector& mu,
                               const ModelLevel* next) override;
  AbsorbResult absorb(const AdaptationPayload& payload) override;
  bool is_ready() const override { return model_->dimension() >= 1; }
  std::size_t state_size() const override { return static_cast<std::size_t>(model_->dimension()); }

  const ReducedModel& reduced_model() const { return *model_; }

 private:
  std::shared_ptr<ReducedModel> model_;
};

}  // namespace amh::parabolic
