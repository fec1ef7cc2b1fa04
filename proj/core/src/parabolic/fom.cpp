#include "amh/parabolic/fom.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "amh/errors.hpp"

namespace amh::parabolic {

Eigen::VectorXd SymTridiag::apply(const Eigen::VectorXd& x) const {
  detail::require(x.size() == size(), "SymTridiag::apply: size mismatch");
  const Eigen::Index n = size();
  Eigen::VectorXd y = diag.cwiseProduct(x);
  if (n > 1) {
    y.head(n - 1) += off.cwiseProduct(x.tail(n - 1));
    y.tail(n - 1) += off.cwiseProduct(x.head(n - 1));
  }
  return y;
}

Eigen::MatrixXd SymTridiag::apply(const Eigen::MatrixXd& x) const {
  detail::require(x.rows() == size(), "SymTridiag::apply: size mismatch");
  const Eigen::Index n = size();
  Eigen::MatrixXd y = diag.asDiagonal() * x;
  if (n > 1) {
    y.topRows(n - 1) += off.asDiagonal() * x.bottomRows(n - 1);
    y.bottomRows(n - 1) += off.asDiagonal() * x.topRows(n - 1);
  }
  return y;
}

Eigen::MatrixXd SymTridiag::to_dense() const {
  const Eigen::Index n = size();
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  dense.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    dense(i, i + 1) = off(i);
    dense(i + 1, i) = off(i);
  }
  return dense;
}

void SymTridiag::add_scaled(double scale, const SymTridiag& other) {
  detail::require(other.size() == size(), "SymTridiag::add_scaled: size mismatch");
  diag += scale * other.diag;
  off += scale * other.off;
}

TridiagFactorization::TridiagFactorization(const SymTridiag& matrix) {
  const Eigen::Index n = matrix.size();
  pivots_.resize(n);
  multipliers_.resize(n > 0 ? n - 1 : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pivot = matrix.diag(i);
    if (i > 0) {
      const double m = matrix.off(i - 1) / pivots_(i - 1);
      multipliers_(i - 1) = m;
      pivot -= m * matrix.off(i - 1);
    }
    if (!(pivot > 0.0)) throw ContractViolation("tridiagonal matrix is not positive definite");
    pivots_(i) = pivot;
  }
}

void TridiagFactorization::solve_in_place(Eigen::Ref<Eigen::VectorXd> rhs) const {
  const Eigen::Index n = pivots_.size();
  detail::require(rhs.size() == n, "TridiagFactorization::solve: size mismatch");
  for (Eigen::Index i = 1; i < n; ++i) rhs(i) -= multipliers_(i - 1) * rhs(i - 1);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i) /= pivots_(i);
  for (Eigen::Index i = n - 2; i >= 0; --i) rhs(i) -= multipliers_(i) * rhs(i + 1);
}

Eigen::MatrixXd TridiagFactorization::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd x = rhs;
  for (Eigen::Index j = 0; j < x.cols(); ++j) solve_in_place(x.col(j));
  return x;
}

Eigen::MatrixXd TridiagFactorization::root_apply(const Eigen::MatrixXd& b) const {
  const Eigen::Index n = pivots_.size();
  detail::require(b.rows() == n, "TridiagFactorization::root_apply: size mismatch");
  Eigen::MatrixXd w = b;
  if (n > 1) w.topRows(n - 1) += multipliers_.asDiagonal() * b.bottomRows(n - 1);
  return pivots_.cwiseSqrt().asDiagonal() * w;
}

Eigen::MatrixXd TridiagFactorization::whiten(const Eigen::MatrixXd& b) const {
  const Eigen::Index n = pivots_.size();
  detail::require(b.rows() == n, "TridiagFactorization::whiten: size mismatch");
  Eigen::MatrixXd w = b;
  for (Eigen::Index i = 1; i < n; ++i) w.row(i) -= multipliers_(i - 1) * w.row(i - 1);
  return pivots_.cwiseSqrt().cwiseInverse().asDiagonal() * w;
}

std::string to_string(InitialCondition u0) {
  switch (u0) {
    case InitialCondition::kZero: return "zero";
    case InitialCondition::kSine: return "sine";
  }
  return "zero";
}

InitialCondition initial_condition_from_string(const std::string& tag) {
  if (tag == "zero") return InitialCondition::kZero;
  if (tag == "sine") return InitialCondition::kSine;
  throw ConfigError("unknown initial condition '" + tag + "' (expected zero or sine)");
}

namespace {

// Exact integral of f * phi over [a, b] where phi is linear with phi(a) = pa,
// phi(b) = pb and f is piecewise constant on `cells` equal cells of (0, 1).
double integrate_hat_piece(const std::vector<double>& f, double a, double b, double pa, double pb) {
  const auto cells = static_cast<double>(f.size());
  double total = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double lo = std::max(a, static_cast<double>(c) / cells);
    const double hi = std::min(b, static_cast<double>(c + 1) / cells);
    if (hi <= lo || f[c] == 0.0) continue;
    const double phi_lo = pa + (pb - pa) * (lo - a) / (b - a);
    const double phi_hi = pa + (pb - pa) * (hi - a) / (b - a);
    total += f[c] * (hi - lo) * 0.5 * (phi_lo + phi_hi);
  }
  return total;
}

}  // namespace

AffineSystem assemble(const DiscretizationConfig& config) {
  if (config.n_h < 1 || config.K < 1 || config.Q < 1)
    throw ConfigError("n_h, K and Q must be positive");
  if (config.n_h < config.Q) throw ConfigError("n_h must be at least Q");
  if (!(config.T > 0.0) || !std::isfinite(config.T)) throw ConfigError("T must be positive");
  if (config.source.empty()) throw ConfigError("source needs at least one cell value");

  AffineSystem sys;
  sys.n_h = config.n_h;
  sys.K = config.K;
  sys.Q = config.Q;
  sys.T = config.T;
  sys.h = 1.0 / (config.n_h + 1);
  sys.dt = config.T / config.K;

  const Eigen::Index n = config.n_h;
  const double h = sys.h;
  sys.mass = SymTridiag(n);
  sys.stiffness.assign(config.Q, SymTridiag(n));
  sys.load = Eigen::VectorXd::Zero(n);
  sys.nodes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) sys.nodes(i) = static_cast<double>(i + 1) * h;

  // Element e spans [e h, (e+1) h]; its left node is interior index e-1 and
  // its right node interior index e (when those exist).
  for (int e = 0; e <= config.n_h; ++e) {
    const double a = e * h;
    const double b = (e + 1) * h;
    const Eigen::Index left = e - 1;
    const Eigen::Index right = e;
    const bool has_left = left >= 0;
    const bool has_right = right < n;

    if (has_left) sys.mass.diag(left) += 2.0 * h / 6.0;
    if (has_right) sys.mass.diag(right) += 2.0 * h / 6.0;
    if (has_left && has_right) sys.mass.off(left) += h / 6.0;

    for (int q = 0; q < config.Q; ++q) {
      const double lo = std::max(a, static_cast<double>(q) / config.Q);
      const double hi = std::min(b, static_cast<double>(q + 1) / config.Q);
      if (hi <= lo) continue;
      const double weight = (hi - lo) / (h * h);
      auto& A = sys.stiffness[q];
      if (has_left) A.diag(left) += weight;
      if (has_right) A.diag(right) += weight;
      if (has_left && has_right) A.off(left) -= weight;
    }

    if (has_left) sys.load(left) += integrate_hat_piece(config.source, a, b, 1.0, 0.0);
    if (has_right) sys.load(right) += integrate_hat_piece(config.source, a, b, 0.0, 1.0);
  }

  sys.gram = SymTridiag(n);
  for (const auto& A : sys.stiffness) sys.gram.add_scaled(1.0, A);

  sys.initial = Eigen::VectorXd::Zero(n);
  if (config.u0 == InitialCondition::kSine) {
    sys.initial = (std::numbers::pi * sys.nodes.array()).sin().matrix();
  }
  sys.qoi_vector = sys.mass.apply(Eigen::VectorXd::Ones(n).eval());
  return sys;
}

double AffineSystem::qoi_constant() const { return std::sqrt(qoi_vector.sum()); }

Trajectory solve_fom(const AffineSystem& system, const ParameterVector& mu) {
  const auto start = std::chrono::steady_clock::now();
  if (mu.size() != static_cast<std::size_t>(system.Q)) {
    std::ostringstream msg;
    msg << "solve_fom: expected " << system.Q << " parameters, got " << mu.size();
    throw DomainError(msg.str());
  }
  SymTridiag lhs = system.mass;
  for (int q = 0; q < system.Q; ++q) {
    if (!(mu[q] > 0.0)) throw DomainError("solve_fom: diffusivity must be positive");
    lhs.add_scaled(system.dt * mu[q], system.stiffness[q]);
  }
  const TridiagFactorization factor(lhs);
  const Eigen::VectorXd forcing = system.dt * system.load;

  Trajectory trajectory;
  trajectory.mu = mu;
  trajectory.states.resize(system.n_h, system.K + 1);
  trajectory.states.col(0) = system.initial;
  for (int k = 1; k <= system.K; ++k) {
    Eigen::VectorXd rhs = system.mass.apply(Eigen::VectorXd(trajectory.states.col(k - 1)));
    rhs += forcing;
    factor.solve_in_place(rhs);
    trajectory.states.col(k) = rhs;
  }
  trajectory.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trajectory;
}

double compute_qoi(const AffineSystem& system, const Eigen::VectorXd& state) {
  detail::require(state.size() == system.n_h, "compute_qoi: state length differs from n_h");
  return system.qoi_vector.dot(state);
}

double compute_qoi(const AffineSystem& system, const Trajectory& trajectory) {
  return compute_qoi(system, Eigen::VectorXd(trajectory.states.col(trajectory.states.cols() - 1)));
}

double m_norm(const AffineSystem& system, const Eigen::VectorXd& v) {
  return std::sqrt(std::max(0.0, v.dot(system.mass.apply(v))));
}

FomLevel::FomLevel(std::shared_ptr<const AffineSystem> system, double artificial_delay_s)
    : system_(std::move(system)), artificial_delay_s_(artificial_delay_s) {
  detail::require(system_ != nullptr, "FomLevel needs a system");
  if (!(artificial_delay_s_ >= 0.0)) throw ConfigError("FOM delay must be >= 0");
}

ModelOutput FomLevel::evaluate(const ParameterVector& mu) {
  auto trajectory = std::make_shared<Trajectory>(solve_fom(*system_, mu));
  if (artificial_delay_s_ > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(artificial_delay_s_));
  }
  ++solves_;
  ModelOutput output;
  output.qoi = compute_qoi(*system_, *trajectory);
  output.duration_s = trajectory->duration_s;
  last_ = trajectory;
  output.data = std::shared_ptr<const Trajectory>(std::move(trajectory));
  return output;
}

}  // namespace amh::parabolic
