#pragma once

// Two-stage hierarchy for multistart minimisation. A request is a start point;
// level 1 descends on a kernel surrogate of the objective and is accepted when
// the true finite-difference gradient at its candidate is small, level 2
// descends on the true objective and feeds every sample it touched back into
// the surrogate.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "amh/hierarchy.hpp"
#include "amh/kernel_ridge.hpp"

namespace amh::opt {

using Function = std::function<double(const Eigen::VectorXd&)>;

/// (x^2 + y - 11)^2 + (x + y^2 - 7)^2
double himmelblau(const Eigen::VectorXd& x);

/// Expensive objective stand-in: counts every call and optionally sleeps.
class ObjectiveOracle {
 public:
  ObjectiveOracle(Function function, double artificial_delay_s);
  static std::shared_ptr<ObjectiveOracle> himmelblau(double artificial_delay_s = 0.002);

  double operator()(const Eigen::VectorXd& x);
  std::size_t eval_count() const { return eval_count_; }

 private:
  Function function_;
  double artificial_delay_s_;
  std::size_t eval_count_ = 0;
};

struct DescentSettings {
  double fd_step = 1e-5;
  double gradient_tol = 1e-8;
  int max_iters = 500;
  double armijo = 1e-4;
  int max_halvings = 30;
  double initial_step = 1.0;
};

/// Central differences, or one-sided ones where x +- h leaves the box.
/// Always 2 * dim calls of `f`.
Eigen::VectorXd fd_gradient(const Function& f, const Eigen::VectorXd& x, const ParameterBox& box,
                            double h = 1e-5);

struct Sample {
  Eigen::VectorXd point;
  double value = 0.0;
};

struct DescentResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<Sample> samples;  ///< every evaluation of f, in call order
};

/// Projected gradient descent with finite-difference gradients and Armijo
/// backtracking. Returns the last (and best) iterate.
DescentResult descend(const Function& f, const Eigen::VectorXd& x0, const ParameterBox& box,
                      const DescentSettings& settings);

struct OptAnswer {
  Eigen::VectorXd x;
  double value = 0.0;  ///< J(x) for the full level, surrogate value for level 1
  std::vector<Sample> samples;
};

/// Level 2: descent on the true objective. Its outputs, shared_ptr<const
/// OptAnswer>, carry the samples the surrogate learns from.
class FullDescentLevel final : public ModelLevel {
 public:
  FullDescentLevel(std::shared_ptr<ObjectiveOracle> oracle, ParameterBox box,
                   DescentSettings settings);

  std::string name() const override { return "full-descent"; }
  ModelOutput evaluate(const ParameterVector& start) override;
  ErrorEstimate estimate_error(const ModelOutput&, const ParameterVector&,
                               const ModelLevel*) override {
    return ErrorEstimate::reference();
  }
  AbsorbResult absorb(const AdaptationPayload&) override { return AbsorbResult::ignored(); }
  bool is_ready() const override { return true; }

  ObjectiveOracle& oracle() const { return *oracle_; }
  std::size_t oracle_calls() const { return oracle_calls_; }

 private:
  std::shared_ptr<ObjectiveOracle> oracle_;
  ParameterBox box_;
  DescentSettings settings_;
  std::size_t oracle_calls_ = 0;
};

struct SurrogateSettings {
  KernelRidgeSettings kernel{LengthscalePolicy::fixed(0.03), 1e-8, 10};
  /// Samples closer than this (in unit-scaled coordinates) to a stored input are skipped.
  double min_spacing = 1e-3;
};

/// Level 1: descent on a kernel-ridge surrogate of the objective, certified
/// with the true gradient obtained through the next level's oracle.
class SurrogateDescentLevel final : public ModelLevel {
 public:
  SurrogateDescentLevel(ParameterBox box, DescentSettings descent, SurrogateSettings surrogate);

  std::string name() const override { return "surrogate-descent"; }
  ModelOutput evaluate(const ParameterVector& start) override;
  /// Requires `next` to be a FullDescentLevel; charges 2 * dim oracle calls.
  ErrorEstimate estimate_error(const ModelOutput& output, const ParameterVector& start,
                               const ModelLevel* next) override;
  AbsorbResult absorb(const AdaptationPayload& payload) override;
  bool is_ready() const override { return regressor_.has_value(); }
  std::size_t state_size() const override { return values_.size(); }

  double surrogate_value(const Eigen::VectorXd& x) const;
  std::size_t oracle_calls() const { return oracle_calls_; }
  const std::optional<KernelRegressor>& regressor() const { return regressor_; }

 private:
  ParameterBox box_;
  DescentSettings descent_;
  SurrogateSettings surrogate_;
  std::vector<std::vector<double>> unit_inputs_;
  std::vector<double> values_;
  std::optional<KernelRegressor> regressor_;
  std::size_t oracle_calls_ = 0;
};

}  // namespace amh::opt
