#pragma once

// Run configuration: one JSON document, key names as documented in the README.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amh/kernel_ridge.hpp"
#include "amh/parabolic/fom.hpp"
#include "amh/parabolic/rb.hpp"

namespace amh::harness {

enum class Scenario { kParabolic, kOptDemo };

std::string to_string(Scenario scenario);
/// "parabolic" or "optdemo"; throws ConfigError otherwise.
Scenario scenario_from_string(const std::string& tag);

struct MlConfig {
  KernelRidgeSettings kernel{LengthscalePolicy::fixed(0.15), 1e-8, 10};
  double compression_tol = 1e-5;
};

struct OptConfig {
  double tol_grad = 1e-3;
  int max_iters = 500;
  double delay_s = 0.002;
  double lengthscale = 0.03;
  double min_spacing = 1e-3;
};

struct DumpPaths {
  std::optional<std::string> trajectory;
  std::optional<std::string> basis;
  std::optional<std::string> training;
};

struct OutputConfig {
  std::string results_path = "results.csv";
  DumpPaths dumps;
};

struct RunConfig {
  Scenario scenario = Scenario::kParabolic;
  double tolerance = 1e-3;
  std::int64_t n_queries = 400;
  std::uint64_t seed = 42;
  /// Empty means the scenario default: [0.1, 10]^Q or [-5, 5]^2.
  std::vector<double> box_lo;
  std::vector<double> box_hi;
  parabolic::DiscretizationConfig fom;
  std::string fom_source_tag = "one";
  double fom_delay_s = 0.0;
  parabolic::PodSettings rb;
  MlConfig ml;
  OptConfig opt;
  OutputConfig output;
  bool adaptation = true;

  /// `tolerance` for the parabolic scenario, `opt.TOL_grad` for the demo.
  double effective_tolerance() const;
  ParameterBox box() const;
  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

/// "one", "zero" or an array of cell values; throws ConfigError otherwise.
std::vector<double> source_from_tag(const std::string& tag);

/// Missing keys keep their defaults; unknown keys are errors.
RunConfig parse_config(const std::string& json_text);
/// Throws IoError if the file cannot be read, ConfigError if it is invalid.
RunConfig load_config(const std::string& path);

}  // namespace amh::harness
