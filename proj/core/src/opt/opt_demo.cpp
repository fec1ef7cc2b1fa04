#include "amh/opt/opt_demo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "amh/errors.hpp"

namespace amh::opt {

double himmelblau(const Eigen::VectorXd& x) {
  detail::require(x.size() == 2, "himmelblau is defined on R^2");
  const double a = x(0) * x(0) + x(1) - 11.0;
  const double b = x(0) + x(1) * x(1) - 7.0;
  return a * a + b * b;
}

ObjectiveOracle::ObjectiveOracle(Function function, double artificial_delay_s)
    : function_(std::move(function)), artificial_delay_s_(artificial_delay_s) {
  if (!(artificial_delay_s_ >= 0.0)) throw ConfigError("oracle delay must be >= 0");
}

std::shared_ptr<ObjectiveOracle> ObjectiveOracle::himmelblau(double artificial_delay_s) {
  return std::make_shared<ObjectiveOracle>(&opt::himmelblau, artificial_delay_s);
}

double ObjectiveOracle::operator()(const Eigen::VectorXd& x) {
  ++eval_count_;
  if (artificial_delay_s_ > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(artificial_delay_s_));
  }
  return function_(x);
}

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const ParameterBox& box) {
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto q = static_cast<std::size_t>(i);
    y(i) = std::clamp(y(i), box.lower(q), box.upper(q));
  }
  return y;
}

ParameterVector to_parameter(const Eigen::VectorXd& x) {
  return ParameterVector(std::vector<double>(x.data(), x.data() + x.size()));
}

Eigen::VectorXd to_vector(const ParameterVector& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.values().data(), static_cast<Eigen::Index>(p.size()));
}

}  // namespace

Eigen::VectorXd fd_gradient(const Function& f, const Eigen::VectorXd& x, const ParameterBox& box,
                            double h) {
  detail::require(static_cast<std::size_t>(x.size()) == box.dimension(),
                  "fd_gradient: dimension mismatch");
  Eigen::VectorXd gradient(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto q = static_cast<std::size_t>(i);
    Eigen::VectorXd forward = x;
    Eigen::VectorXd backward = x;
    if (x(i) + h > box.upper(q)) {
      backward(i) -= h;
    } else if (x(i) - h < box.lower(q)) {
      forward(i) += h;
    } else {
      forward(i) += h;
      backward(i) -= h;
    }
    gradient(i) = (f(forward) - f(backward)) / (forward(i) - backward(i));
  }
  return gradient;
}

DescentResult descend(const Function& f, const Eigen::VectorXd& x0, const ParameterBox& box,
                      const DescentSettings& settings) {
  DescentResult result;
  const Function recorded = [&](const Eigen::VectorXd& x) {
    const double value = f(x);
    result.samples.push_back({x, value});
    return value;
  };

  Eigen::VectorXd x = clamp(x0, box);
  double fx = recorded(x);
  Eigen::VectorXd gradient = fd_gradient(recorded, x, box, settings.fd_step);
  double step = settings.initial_step;

  while (result.iterations < settings.max_iters && gradient.norm() > settings.gradient_tol) {
    bool accepted = false;
    Eigen::VectorXd candidate;
    double f_candidate = 0.0;
    for (int halving = 0; halving <= settings.max_halvings; ++halving) {
      candidate = clamp(x - step * gradient, box);
      const Eigen::VectorXd move = x - candidate;
      if (move.squaredNorm() == 0.0) break;
      f_candidate = recorded(candidate);
      if (f_candidate <= fx - settings.armijo * gradient.dot(move)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    x = candidate;
    fx = f_candidate;
    gradient = fd_gradient(recorded, x, box, settings.fd_step);
    step = std::min(2.0 * step, settings.initial_step);
    ++result.iterations;
  }

  result.x = x;
  result.value = fx;
  result.gradient_norm = gradient.norm();
  return result;
}

FullDescentLevel::FullDescentLevel(std::shared_ptr<ObjectiveOracle> oracle, ParameterBox box,
                                   DescentSettings settings)
    : oracle_(std::move(oracle)), box_(std::move(box)), settings_(settings) {
  detail::require(oracle_ != nullptr, "FullDescentLevel needs an oracle");
}

ModelOutput FullDescentLevel::evaluate(const ParameterVector& start) {
  const std::size_t before = oracle_->eval_count();
  DescentResult descent = descend([this](const Eigen::VectorXd& x) { return (*oracle_)(x); },
                                  to_vector(start), box_, settings_);
  oracle_calls_ += oracle_->eval_count() - before;

  auto answer = std::make_shared<OptAnswer>();
  answer->x = descent.x;
  answer->value = descent.value;
  answer->samples = std::move(descent.samples);
  ModelOutput output;
  output.qoi = answer->value;
  output.data = std::shared_ptr<const OptAnswer>(std::move(answer));
  return output;
}

SurrogateDescentLevel::SurrogateDescentLevel(ParameterBox box, DescentSettings descent,
                                             SurrogateSettings surrogate)
    : box_(std::move(box)), descent_(descent), surrogate_(surrogate) {
  if (!(surrogate_.min_spacing >= 0.0)) throw ConfigError("min_spacing must be >= 0");
}

double SurrogateDescentLevel::surrogate_value(const Eigen::VectorXd& x) const {
  if (!regressor_) throw NotReadyError("objective surrogate is not fitted");
  const auto unit = box_.to_unit(to_parameter(x));
  return regressor_->predict(unit)(0);
}

ModelOutput SurrogateDescentLevel::evaluate(const ParameterVector& start) {
  box_.check(start);
  DescentResult descent = descend([this](const Eigen::VectorXd& x) { return surrogate_value(x); },
                                  to_vector(start), box_, descent_);
  auto answer = std::make_shared<OptAnswer>();
  answer->x = descent.x;
  answer->value = descent.value;
  ModelOutput output;
  output.qoi = answer->value;
  output.data = std::shared_ptr<const OptAnswer>(std::move(answer));
  return output;
}

ErrorEstimate SurrogateDescentLevel::estimate_error(const ModelOutput& output,
                                                    const ParameterVector&,
                                                    const ModelLevel* next) {
  const auto* full = dynamic_cast<const FullDescentLevel*>(next);
  detail::require(full != nullptr, "SurrogateDescentLevel must be followed by a FullDescentLevel");
  const auto* answer = std::any_cast<std::shared_ptr<const OptAnswer>>(&output.data);
  detail::require(answer != nullptr && *answer, "SurrogateDescentLevel: unexpected output");

  ObjectiveOracle& oracle = full->oracle();
  const std::size_t before = oracle.eval_count();
  const Eigen::VectorXd gradient =
      fd_gradient([&oracle](const Eigen::VectorXd& x) { return oracle(x); }, (*answer)->x, box_,
                  descent_.fd_step);
  oracle_calls_ += oracle.eval_count() - before;
  return ErrorEstimate::of(gradient.norm());
}

AbsorbResult SurrogateDescentLevel::absorb(const AdaptationPayload& payload) {
  const auto* answer = std::any_cast<std::shared_ptr<const OptAnswer>>(&payload);
  if (answer == nullptr || !*answer || (*answer)->samples.empty()) return AbsorbResult::ignored();

  const double min_spacing_sq = surrogate_.min_spacing * surrogate_.min_spacing;
  for (const Sample& sample : (*answer)->samples) {
    std::vector<double> unit = box_.to_unit(to_parameter(sample.point));
    const Eigen::Map<const Eigen::VectorXd> u(unit.data(), static_cast<Eigen::Index>(unit.size()));
    bool duplicate = false;
    for (std::size_t i = 0; i < unit_inputs_.size() && !duplicate; ++i) {
      const Eigen::Map<const Eigen::VectorXd> v(unit_inputs_[i].data(), u.size());
      const double distance_sq = (u - v).squaredNorm();
      if (distance_sq == 0.0) {
        values_[i] = sample.value;
        duplicate = true;
      } else if (distance_sq < min_spacing_sq) {
        duplicate = true;
      }
    }
    if (!duplicate) {
      unit_inputs_.push_back(std::move(unit));
      values_.push_back(sample.value);
    }
  }

  if (values_.size() >= surrogate_.kernel.n_min) {
    const auto n = static_cast<Eigen::Index>(values_.size());
    Eigen::MatrixXd inputs(n, static_cast<Eigen::Index>(box_.dimension()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index q = 0; q < inputs.cols(); ++q) inputs(i, q) = unit_inputs_[i][q];
    }
    const Eigen::MatrixXd outputs = Eigen::Map<const Eigen::VectorXd>(values_.data(), n);
    regressor_ = KernelRegressor::fit(inputs, outputs, surrogate_.kernel);
  }
  return {true, {}};
}

}  // namespace amh::opt
