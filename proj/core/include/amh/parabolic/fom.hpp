#pragma once

// Full-order model: P1 finite elements in space and implicit Euler in time for
//
//   du/dt - d/dx( kappa(x; mu) du/dx ) = f   on (0,1) x (0,T],   u = 0 on the boundary,
//
// with kappa(x; mu) = mu_q on the q-th of Q equal subintervals.

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "amh/hierarchy.hpp"

namespace amh::parabolic {

/// Symmetric tridiagonal matrix stored as diagonal and first off-diagonal.
struct SymTridiag {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;  ///< off(i) couples rows i and i+1

  SymTridiag() = default;
  explicit SymTridiag(Eigen::Index n) : diag(Eigen::VectorXd::Zero(n)), off(Eigen::VectorXd::Zero(n > 0 ? n - 1 : 0)) {}

  Eigen::Index size() const { return diag.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd to_dense() const;
  /// this += scale * other
  void add_scaled(double scale, const SymTridiag& other);
};

/// LDL^T (Thomas) factorization of a symmetric positive definite tridiagonal matrix.
class TridiagFactorization {
 public:
  /// Throws ContractViolation on a non-positive pivot.
  explicit TridiagFactorization(const SymTridiag& matrix);

  void solve_in_place(Eigen::Ref<Eigen::VectorXd> rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  /// W = D^{1/2} L^T B, so that B^T A B = W^T W.
  Eigen::MatrixXd root_apply(const Eigen::MatrixXd& b) const;
  /// W = D^{-1/2} L^{-1} B, so that B^T A^{-1} B = W^T W.
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const;

 private:
  Eigen::VectorXd pivots_;
  Eigen::VectorXd multipliers_;  ///< multipliers_(i) eliminates row i+1 with row i
};

enum class InitialCondition { kZero, kSine };

std::string to_string(InitialCondition u0);
/// "zero" or "sine"; throws ConfigError otherwise.
InitialCondition initial_condition_from_string(const std::string& tag);

struct DiscretizationConfig {
  int n_h = 200;  ///< interior nodes
  int K = 100;    ///< time steps
  double T = 1.0;
  int Q = 2;      ///< diffusivity subdomains
  /// Piecewise-constant source on equally sized cells of (0,1); {1.0} is f = 1.
  std::vector<double> source = {1.0};
  InitialCondition u0 = InitialCondition::kZero;
};

struct AffineSystem {
  int n_h = 0;
  int K = 0;
  int Q = 0;
  double T = 0.0;
  double h = 0.0;
  double dt = 0.0;

  SymTridiag mass;
  std::vector<SymTridiag> stiffness;  ///< one per subdomain
  SymTridiag gram;                    ///< X = sum of the subdomain stiffness matrices
  Eigen::VectorXd load;
  Eigen::VectorXd initial;
  Eigen::VectorXd qoi_vector;         ///< M * 1
  Eigen::VectorXd nodes;              ///< interior node coordinates

  /// sqrt(1^T M 1): the constant in |qoi error| <= c * M-norm error.
  double qoi_constant() const;
};

/// Throws ConfigError for non-positive sizes, n_h < Q or T <= 0.
AffineSystem assemble(const DiscretizationConfig& config);

struct Trajectory {
  Eigen::MatrixXd states;  ///< n_h x (K+1), column k is u^k
  ParameterVector mu;
  double duration_s = 0.0;
};

/// Throws DomainError if mu has the wrong length or a non-positive component.
Trajectory solve_fom(const AffineSystem& system, const ParameterVector& mu);

/// l^T u, the integral of the discrete state over the domain.
double compute_qoi(const AffineSystem& system, const Eigen::VectorXd& state);
double compute_qoi(const AffineSystem& system, const Trajectory& trajectory);

double m_norm(const AffineSystem& system, const Eigen::VectorXd& v);

/// Reference level: never checked, always ready. Its evaluations are handed
/// to the cheaper levels as shared_ptr<const Trajectory>.
class FomLevel final : public ModelLevel {
 public:
  explicit FomLevel(std::shared_ptr<const AffineSystem> system, double artificial_delay_s = 0.0);

  std::string name() const override { return "fom"; }
  ModelOutput evaluate(const ParameterVector& mu) override;
  ErrorEstimate estimate_error(const ModelOutput&, const ParameterVector&,
                               const ModelLevel*) override {
    return ErrorEstimate::reference();
  }
  AbsorbResult absorb(const AdaptationPayload&) override { return AbsorbResult::ignored(); }
  bool is_ready() const override { return true; }

  std::size_t solves() const { return solves_; }
  const std::shared_ptr<const Trajectory>& last_trajectory() const { return last_; }

 private:
  std::shared_ptr<const AffineSystem> system_;
  double artificial_delay_s_;
  std::size_t solves_ = 0;
  std::shared_ptr<const Trajectory> last_;
};

}  // namespace amh::parabolic
