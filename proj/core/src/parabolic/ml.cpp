#include "amh/parabolic/ml.hpp"

#include <sstream>

#include "amh/errors.hpp"

namespace amh::parabolic {

Eigen::VectorXd flatten(const Eigen::MatrixXd& coefficients) {
  return Eigen::Map<const Eigen::VectorXd>(coefficients.data(), coefficients.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, Eigen::Index n, Eigen::Index steps) {
  detail::require(flat.size() == n * steps, "unflatten: length differs from N (K+1)");
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), n, steps);
}

CoefficientTrainingSet::CoefficientTrainingSet(ParameterBox box, double compression_tol)
    : box_(std::move(box)), compression_tol_(compression_tol) {
  if (!(compression_tol_ >= 0.0 && compression_tol_ < 1.0))
    throw ConfigError("compression tolerance must lie in [0, 1)");
}

Eigen::VectorXd CoefficientTrainingSet::compress(const Eigen::VectorXd& output) {
  if (output_basis_.rows() == 0 && output_basis_.cols() == 0) output_basis_.resize(output.size(), 0);
  detail::require(output.size() == output_basis_.rows(), "training outputs differ in length");
  Eigen::VectorXd residual = output;
  Eigen::VectorXd coords = Eigen::VectorXd::Zero(output_basis_.cols());
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd step = output_basis_.transpose() * residual;
    coords += step;
    residual -= output_basis_ * step;
  }
  const double norm = residual.norm();
  if (norm > compression_tol_ * output.norm() && norm > 0.0) {
    output_basis_.conservativeResize(Eigen::NoChange, output_basis_.cols() + 1);
    output_basis_.col(output_basis_.cols() - 1) = residual / norm;
    compressed_.conservativeResize(Eigen::NoChange, output_basis_.cols());
    compressed_.col(compressed_.cols() - 1).setZero();
    coords.conservativeResize(coords.size() + 1);
    coords(coords.size() - 1) = norm;
  }
  return coords;
}

void CoefficientTrainingSet::insert(const ReducedTrajectory& trajectory) {
  if (trajectory.generation != generation_) {
    std::ostringstream msg;
    msg << "training pair of generation " << trajectory.generation
        << " offered to a training set of generation " << generation_;
    throw ContractViolation(msg.str());
  }
  box_.check(trajectory.mu);
  const Eigen::VectorXd coords = compress(flatten(trajectory.coefficients));
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    if (parameters_[i] == trajectory.mu) {
      compressed_.row(static_cast<Eigen::Index>(i)) = coords.transpose();
      return;
    }
  }
  parameters_.push_back(trajectory.mu);
  compressed_.conservativeResize(compressed_.rows() + 1, output_basis_.cols());
  compressed_.row(compressed_.rows() - 1) = coords.transpose();
}

void CoefficientTrainingSet::clear(std::uint64_t generation) {
  generation_ = generation;
  parameters_.clear();
  compressed_.resize(0, 0);
  output_basis_.resize(0, 0);
}

Eigen::MatrixXd CoefficientTrainingSet::outputs() const {
  if (parameters_.empty()) return Eigen::MatrixXd(0, output_basis_.rows());
  return compressed_ * output_basis_.transpose();
}

Eigen::MatrixXd CoefficientTrainingSet::unit_inputs() const {
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(parameters_.size()),
                         static_cast<Eigen::Index>(box_.dimension()));
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    const auto unit = box_.to_unit(parameters_[i]);
    for (std::size_t q = 0; q < unit.size(); ++q)
      inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = unit[q];
  }
  return inputs;
}

CoefficientSurrogate::CoefficientSurrogate(ParameterBox box,
                                           std::shared_ptr<const ReducedModel> reduced,
                                           KernelRidgeSettings settings, double compression_tol)
    : reduced_(std::move(reduced)), settings_(settings), training_(std::move(box), compression_tol) {
  detail::require(reduced_ != nullptr, "CoefficientSurrogate needs a reduced model");
  if (settings_.n_min < 1) throw ConfigError("n_min must be at least 1");
  training_.clear(reduced_->generation());
}

void CoefficientSurrogate::refit() {
  if (training_.size() < settings_.n_min) {
    regressor_.reset();
    return;
  }
  regressor_ =
      KernelRegressor::fit(training_.unit_inputs(), training_.compressed_outputs(), settings_);
}

void CoefficientSurrogate::add_solution(const ReducedTrajectory& trajectory) {
  if (trajectory.generation != training_.generation() &&
      trajectory.generation == reduced_->generation()) {
    rebase();
  }
  training_.insert(trajectory);
  refit();
}

void CoefficientSurrogate::rebase() {
  const std::uint64_t generation = reduced_->generation();
  if (generation == training_.generation()) return;
  const std::vector<ParameterVector> parameters = training_.parameters();
  training_.clear(generation);
  for (const auto& mu : parameters) training_.insert(reduced_->solve(mu));
  refit();
}

bool CoefficientSurrogate::ready() const {
  return regressor_.has_value() && training_.generation() == reduced_->generation();
}

ReducedTrajectory CoefficientSurrogate::predict(const ParameterVector& mu) const {
  if (!regressor_) throw NotReadyError("coefficient surrogate is not fitted");
  if (training_.generation() != reduced_->generation()) {
    throw ContractViolation("coefficient surrogate is stale: reduced basis changed");
  }
  training_.box().check(mu);
  const auto unit = training_.box().to_unit(mu);
  const Eigen::VectorXd flat = training_.output_basis() * regressor_->predict(unit);
  const ReducedSystem& reduced = reduced_->reduced_system();

  ReducedTrajectory trajectory;
  trajectory.coefficients = unflatten(flat, reduced.n, reduced.k + 1);
  trajectory.mu = mu;
  trajectory.generation = training_.generation();
  trajectory.producer = Producer::kMl;
  return trajectory;
}

MlLevel::MlLevel(std::shared_ptr<CoefficientSurrogate> surrogate)
    : surrogate_(std::move(surrogate)) {
  detail::require(surrogate_ != nullptr, "MlLevel needs a surrogate");
}

ModelOutput MlLevel::evaluate(const ParameterVector& mu) {
  auto trajectory = std::make_shared<const ReducedTrajectory>(surrogate_->predict(mu));
  ModelOutput output;
  output.qoi = surrogate_->reduced_model().qoi(*trajectory);
  output.data = trajectory;
  return output;
}

ErrorEstimate MlLevel::estimate_error(const ModelOutput& output, const ParameterVector& mu,
                                      const ModelLevel* next) {
  const auto* rb = dynamic_cast<const RbLevel*>(next);
  detail::require(rb != nullptr, "MlLevel must be followed by an RbLevel");
  const auto* trajectory = std::any_cast<std::shared_ptr<const ReducedTrajectory>>(&output.data);
  detail::require(trajectory != nullptr && *trajectory, "MlLevel: output is not a reduced trajectory");
  return ErrorEstimate::of(rb->reduced_model().estimate(mu, **trajectory));
}

AbsorbResult MlLevel::absorb(const AdaptationPayload& payload) {
  if (const auto* solution = std::any_cast<std::shared_ptr<const ReducedTrajectory>>(&payload)) {
    if (!*solution || (*solution)->producer != Producer::kRb) return AbsorbResult::ignored();
    if ((*solution)->generation != surrogate_->reduced_model().generation()) {
      return AbsorbResult::ignored();
    }
    surrogate_->add_solution(**solution);
    return {true, {}};
  }
  if (std::any_cast<BasisChanged>(&payload) != nullptr) {
    surrogate_->rebase();
    return {true, {}};
  }
  return AbsorbResult::ignored();
}

}  // namespace amh::parabolic
