#include "amh/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "amh/errors.hpp"
#include "json.hpp"

namespace amh::harness {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!object.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : object.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
  }
}

double get_real(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError(key + " must be a number");
  return value.get<double>();
}

std::int64_t get_integer(const json& value, const std::string& key) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_number_float()) {
    const double x = value.get<double>();
    if (std::floor(x) == x && std::abs(x) < 9e15) return static_cast<std::int64_t>(x);
  }
  throw ConfigError(key + " must be an integer");
}

int get_int(const json& value, const std::string& key) {
  const std::int64_t v = get_integer(value, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(key + " is out of range");
  return static_cast<int>(v);
}

std::string get_string(const json& value, const std::string& key) {
  if (!value.is_string()) throw ConfigError(key + " must be a string");
  return value.get<std::string>();
}

std::vector<double> get_bounds(const json& value, const std::string& key) {
  if (value.is_number()) return {value.get<double>()};
  if (!value.is_array() || value.empty())
    throw ConfigError(key + " must be a number or a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : value) out.push_back(get_real(v, key));
  return out;
}

std::optional<std::string> get_path(const json& value, const std::string& key) {
  if (value.is_null()) return std::nullopt;
  return get_string(value, key);
}

std::vector<double> expand(const std::vector<double>& bounds, std::size_t dimension) {
  if (bounds.size() == 1) return std::vector<double>(dimension, bounds.front());
  return bounds;
}

}  // namespace

std::string to_string(Scenario scenario) {
  return scenario == Scenario::kParabolic ? "parabolic" : "optdemo";
}

Scenario scenario_from_string(const std::string& tag) {
  if (tag == "parabolic") return Scenario::kParabolic;
  if (tag == "optdemo") return Scenario::kOptDemo;
  throw ConfigError("unknown scenario '" + tag + "' (expected parabolic or optdemo)");
}

std::vector<double> source_from_tag(const std::string& tag) {
  if (tag == "one") return {1.0};
  if (tag == "zero") return {0.0};
  throw ConfigError("unknown source '" + tag + "' (expected one, zero or an array)");
}

double RunConfig::effective_tolerance() const {
  return scenario == Scenario::kParabolic ? tolerance : opt.tol_grad;
}

ParameterBox RunConfig::box() const {
  if (scenario == Scenario::kParabolic) {
    const auto q = static_cast<std::size_t>(std::max(fom.Q, 1));
    std::vector<double> lo = box_lo.empty() ? std::vector<double>{0.1} : box_lo;
    std::vector<double> hi = box_hi.empty() ? std::vector<double>{10.0} : box_hi;
    return {expand(lo, q), expand(hi, q)};
  }
  std::vector<double> lo = box_lo.empty() ? std::vector<double>{-5.0} : box_lo;
  std::vector<double> hi = box_hi.empty() ? std::vector<double>{5.0} : box_hi;
  return {expand(lo, 2), expand(hi, 2)};
}

void RunConfig::validate() const {
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (n_queries < 0) throw ConfigError("n_queries must be >= 0");
  if (fom.n_h < 1 || fom.K < 1 || fom.Q < 1) throw ConfigError("fom.n_h, fom.K and fom.Q must be >= 1");
  if (fom.n_h < fom.Q) throw ConfigError("fom.n_h must be at least fom.Q");
  if (!(fom.T > 0.0) || !std::isfinite(fom.T)) throw ConfigError("fom.T must be positive");
  if (fom.source.empty()) throw ConfigError("fom.source needs at least one cell value");
  for (double f : fom.source)
    if (!std::isfinite(f)) throw ConfigError("fom.source values must be finite");
  if (!(fom_delay_s >= 0.0)) throw ConfigError("fom.delay_s must be >= 0");
  if (!(rb.pod_tol > 0.0 && rb.pod_tol < 1.0)) throw ConfigError("rb.pod_tol must lie in (0, 1)");
  if (rb.n_add_max < 1 || rb.n_max < 1) throw ConfigError("rb.n_add_max and rb.N_max must be >= 1");
  if (ml.kernel.n_min < 1) throw ConfigError("ml.n_min must be >= 1");
  if (!ml.kernel.lengthscale.median && !(ml.kernel.lengthscale.value > 0.0))
    throw ConfigError("ml.lengthscale must be \"median\" or a positive number");
  if (!(ml.kernel.ridge > 0.0)) throw ConfigError("ml.ridge must be positive");
  if (!(ml.compression_tol >= 0.0 && ml.compression_tol < 1.0))
    throw ConfigError("ml.compression_tol must lie in [0, 1)");
  if (!(opt.tol_grad >= 0.0)) throw ConfigError("opt.TOL_grad must be >= 0");
  if (opt.max_iters < 0) throw ConfigError("opt.max_iters must be >= 0");
  if (!(opt.delay_s >= 0.0)) throw ConfigError("opt.delay_s must be >= 0");
  if (!(opt.lengthscale > 0.0)) throw ConfigError("opt.lengthscale must be positive");
  if (!(opt.min_spacing >= 0.0)) throw ConfigError("opt.min_spacing must be >= 0");
  if (output.results_path.empty()) throw ConfigError("output.results_path must not be empty");

  const std::size_t dim = scenario == Scenario::kParabolic ? static_cast<std::size_t>(fom.Q) : 2;
  for (const auto* bounds : {&box_lo, &box_hi}) {
    if (bounds->size() > 1 && bounds->size() != dim) {
      std::ostringstream msg;
      msg << "box bounds need 1 or " << dim << " entries, got " << bounds->size();
      throw ConfigError(msg.str());
    }
  }
  const ParameterBox b = box();  // throws on lo >= hi
  if (scenario == Scenario::kParabolic) {
    for (std::size_t q = 0; q < b.dimension(); ++q)
      if (!(b.lower(q) > 0.0)) throw ConfigError("parabolic box.lo must be positive");
  }
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "", {"scenario", "tolerance", "n_queries", "seed", "box", "fom", "rb", "ml",
                           "opt", "output", "adaptation"});
  RunConfig c;
  if (doc.contains("scenario")) c.scenario = scenario_from_string(get_string(doc["scenario"], "scenario"));
  if (doc.contains("tolerance")) c.tolerance = get_real(doc["tolerance"], "tolerance");
  if (doc.contains("n_queries")) c.n_queries = get_integer(doc["n_queries"], "n_queries");
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (s.is_number_unsigned()) {
      c.seed = s.get<std::uint64_t>();
    } else if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
      c.seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
    } else {
      throw ConfigError("seed must be a non-negative integer");
    }
  }
  if (doc.contains("adaptation")) {
    if (!doc["adaptation"].is_boolean()) throw ConfigError("adaptation must be true or false");
    c.adaptation = doc["adaptation"].get<bool>();
  }
  if (doc.contains("box")) {
    const json& b = doc["box"];
    reject_unknown(b, "box", {"lo", "hi"});
    if (b.contains("lo")) c.box_lo = get_bounds(b["lo"], "box.lo");
    if (b.contains("hi")) c.box_hi = get_bounds(b["hi"], "box.hi");
  }
  if (doc.contains("fom")) {
    const json& f = doc["fom"];
    reject_unknown(f, "fom", {"n_h", "K", "T", "Q", "source", "u0", "delay_s"});
    if (f.contains("n_h")) c.fom.n_h = get_int(f["n_h"], "fom.n_h");
    if (f.contains("K")) c.fom.K = get_int(f["K"], "fom.K");
    if (f.contains("T")) c.fom.T = get_real(f["T"], "fom.T");
    if (f.contains("Q")) c.fom.Q = get_int(f["Q"], "fom.Q");
    if (f.contains("source")) {
      const json& s = f["source"];
      if (s.is_array()) {
        c.fom.source = get_bounds(s, "fom.source");
        c.fom_source_tag = s.dump();
      } else {
        c.fom_source_tag = get_string(s, "fom.source");
        c.fom.source = source_from_tag(c.fom_source_tag);
      }
    }
    if (f.contains("u0"))
      c.fom.u0 = parabolic::initial_condition_from_string(get_string(f["u0"], "fom.u0"));
    if (f.contains("delay_s")) c.fom_delay_s = get_real(f["delay_s"], "fom.delay_s");
  }
  if (doc.contains("rb")) {
    const json& r = doc["rb"];
    reject_unknown(r, "rb", {"pod_tol", "n_add_max", "N_max"});
    if (r.contains("pod_tol")) c.rb.pod_tol = get_real(r["pod_tol"], "rb.pod_tol");
    if (r.contains("n_add_max")) c.rb.n_add_max = get_int(r["n_add_max"], "rb.n_add_max");
    if (r.contains("N_max")) c.rb.n_max = get_int(r["N_max"], "rb.N_max");
  }
  if (doc.contains("ml")) {
    const json& m = doc["ml"];
    reject_unknown(m, "ml", {"n_min", "lengthscale", "ridge", "compression_tol"});
    if (m.contains("n_min")) {
      const std::int64_t n = get_integer(m["n_min"], "ml.n_min");
      if (n < 1) throw ConfigError("ml.n_min must be >= 1");
      c.ml.kernel.n_min = static_cast<std::size_t>(n);
    }
    if (m.contains("lengthscale")) {
      const json& l = m["lengthscale"];
      if (l.is_string()) {
        if (l.get<std::string>() != "median")
          throw ConfigError("ml.lengthscale must be \"median\" or a positive number");
        c.ml.kernel.lengthscale = LengthscalePolicy::median_heuristic();
      } else {
        c.ml.kernel.lengthscale = LengthscalePolicy::fixed(get_real(l, "ml.lengthscale"));
      }
    }
    if (m.contains("ridge")) c.ml.kernel.ridge = get_real(m["ridge"], "ml.ridge");
    if (m.contains("compression_tol"))
      c.ml.compression_tol = get_real(m["compression_tol"], "ml.compression_tol");
  }
  if (doc.contains("opt")) {
    const json& o = doc["opt"];
    reject_unknown(o, "opt", {"TOL_grad", "max_iters", "delay_s", "lengthscale", "min_spacing"});
    if (o.contains("TOL_grad")) c.opt.tol_grad = get_real(o["TOL_grad"], "opt.TOL_grad");
    if (o.contains("max_iters")) c.opt.max_iters = get_int(o["max_iters"], "opt.max_iters");
    if (o.contains("delay_s")) c.opt.delay_s = get_real(o["delay_s"], "opt.delay_s");
    if (o.contains("lengthscale")) c.opt.lengthscale = get_real(o["lengthscale"], "opt.lengthscale");
    if (o.contains("min_spacing")) c.opt.min_spacing = get_real(o["min_spacing"], "opt.min_spacing");
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    reject_unknown(o, "output", {"results_path", "dumps"});
    if (o.contains("results_path")) c.output.results_path = get_string(o["results_path"], "output.results_path");
    if (o.contains("dumps")) {
      const json& d = o["dumps"];
      reject_unknown(d, "output.dumps", {"trajectory", "basis", "training"});
      if (d.contains("trajectory")) c.output.dumps.trajectory = get_path(d["trajectory"], "output.dumps.trajectory");
      if (d.contains("basis")) c.output.dumps.basis = get_path(d["basis"], "output.dumps.basis");
      if (d.contains("training")) c.output.dumps.training = get_path(d["training"], "output.dumps.training");
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace amh::harness
