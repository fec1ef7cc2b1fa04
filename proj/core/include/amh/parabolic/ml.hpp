#pragma once

// Machine-learning level: kernel ridge regression from parameters to reduced
// coefficient trajectories, expressed in the reduced space of the RB level and
// certified by the same error estimator.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "amh/hierarchy.hpp"
#include "amh/kernel_ridge.hpp"
#include "amh/parabolic/rb.hpp"

namespace amh::parabolic {

/// Training pairs (mu, flattened a^0..a^K) in one basis generation.
///
/// Outputs are kept in an orthonormal basis Z of their row span, grown one
/// Gram-Schmidt step per insertion: outputs() == compressed_outputs() * Z^T up
/// to `compression_tol` relative to each row norm.
class CoefficientTrainingSet {
 public:
  explicit CoefficientTrainingSet(ParameterBox box, double compression_tol = 1e-5);

  /// Inserts or, for a parameter already present, replaces the output.
  /// Throws ContractViolation for a generation or length mismatch.
  void insert(const ReducedTrajectory& trajectory);
  /// Drops all outputs and switches to `generation`; parameters are kept only
  /// by callers that re-insert them.
  void clear(std::uint64_t generation);

  std::size_t size() const { return parameters_.size(); }
  bool empty() const { return parameters_.empty(); }
  std::uint64_t generation() const { return generation_; }
  const std::vector<ParameterVector>& parameters() const { return parameters_; }
  /// n x Q, rows scaled to [0,1]^Q by the parameter box.
  Eigen::MatrixXd unit_inputs() const;
  /// n x N(K+1)
  Eigen::MatrixXd outputs() const;
  /// n x r coordinates of the outputs in output_basis().
  const Eigen::MatrixXd& compressed_outputs() const { return compressed_; }
  /// N(K+1) x r, orthonormal columns.
  const Eigen::MatrixXd& output_basis() const { return output_basis_; }
  const ParameterBox& box() const { return box_; }
  double compression_tol() const { return compression_tol_; }

 private:
  Eigen::VectorXd compress(const Eigen::VectorXd& output);

  ParameterBox box_;
  double compression_tol_;
  std::vector<ParameterVector> parameters_;
  Eigen::MatrixXd compressed_;
  Eigen::MatrixXd output_basis_;
  std::uint64_t generation_ = 0;
};

Eigen::VectorXd flatten(const Eigen::MatrixXd& coefficients);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, Eigen::Index n, Eigen::Index steps);

/// Regressor plus the training data it was fitted on.
class CoefficientSurrogate {
 public:
  CoefficientSurrogate(ParameterBox box, std::shared_ptr<const ReducedModel> reduced,
                       KernelRidgeSettings settings, double compression_tol = 1e-5);

  /// Adds an RB solution and refits once n_min pairs are stored.
  void add_solution(const ReducedTrajectory& trajectory);
  /// Re-solves the RB model at every stored parameter in the current reduced
  /// space and refits. No-op if already on the current generation.
  void rebase();

  bool ready() const;
  /// Throws NotReadyError without a fit and ContractViolation when the fit
  /// belongs to an older generation.
  ReducedTrajectory predict(const ParameterVector& mu) const;

  const CoefficientTrainingSet& training_set() const { return training_; }
  /// Fitted on the compressed outputs of training_set().
  const std::optional<KernelRegressor>& regressor() const { return regressor_; }
  std::uint64_t generation() const { return training_.generation(); }
  const ReducedModel& reduced_model() const { return *reduced_; }

 private:
  void refit();

  std::shared_ptr<const ReducedModel> reduced_;
  KernelRidgeSettings settings_;
  CoefficientTrainingSet training_;
  std::optional<KernelRegressor> regressor_;
};

/// Cheapest level. Learns from RB solutions, follows basis changes, and is
/// certified through the reduced system of the next (RB) level.
class MlLevel final : public ModelLevel {
 public:
  explicit MlLevel(std::shared_ptr<CoefficientSurrogate> surrogate);

  std::string name() const override { return "ml"; }
  ModelOutput evaluate(const ParameterVector& mu) override;
  ErrorEstimate estimate_error(const ModelOutput& output, const ParameterVector& mu,
                               const ModelLevel* next) override;
  AbsorbResult absorb(const AdaptationPayload& payload) override;
  bool is_ready() const override { return surrogate_->ready(); }
  std::size_t state_size() const override { return surrogate_->training_set().size(); }

  const CoefficientSurrogate& surrogate() const { return *surrogate_; }

 private:
  std::shared_ptr<CoefficientSurrogate> surrogate_;
};

}  // namespace amh::parabolic
