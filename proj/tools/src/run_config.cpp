#include "run_config.hpp"

#include <fstream>
#include <initializer_list>

#include "ccs/mechanical.hpp"

namespace ccs::cli {
namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> keys) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

void read_vector(const json& obj, const char* key, std::optional<Eigen::VectorXd>& out) {
  if (!obj.contains(key)) return;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw ConfigError(std::string("'") + key + "' must be an array");
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError(std::string("'") + key + "' must be numeric");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  out = v;
}

void read_optional(const json& obj, const char* key, std::optional<double>& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  if (!obj.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be numeric");
  out = obj.at(key).get<double>();
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

SimulateConfig parse_simulate(const json& j) {
  expect_object(j, "simulate");
  reject_unknown(j, "simulate",
                 {"system", "vertex", "horizon", "step", "controller", "epsilon", "baumgarte",
                  "x0", "x0_2", "z0"});
  SimulateConfig c;
  read(j, "system", c.system);
  read(j, "vertex", c.vertex);
  read(j, "horizon", c.horizon);
  read(j, "step", c.step);
  read(j, "controller", c.controller);
  read(j, "epsilon", c.epsilon);
  read(j, "baumgarte", c.baumgarte);
  read_vector(j, "x0", c.x0);
  read_vector(j, "x0_2", c.x0_2);
  read_vector(j, "z0", c.z0);
  if (c.system != "isolated" && c.system != "full")
    throw ConfigError("simulate.system must be 'isolated' or 'full'");
  if (c.controller != "io_linear" && c.controller != "zero")
    throw ConfigError("simulate.controller must be 'io_linear' or 'zero'");
  if (c.vertex != 0 && c.vertex != 1) throw ConfigError("simulate.vertex must be 0 or 1");
  require_positive(c.horizon, "simulate.horizon");
  require_positive(c.step, "simulate.step");
  return c;
}

VerifyConfig parse_verify(const json& j) {
  expect_object(j, "verify");
  reject_unknown(j, "verify", {"horizon", "step", "points", "epsilon", "break_relation"});
  VerifyConfig c;
  read(j, "horizon", c.horizon);
  read(j, "step", c.step);
  read(j, "points", c.points);
  read(j, "epsilon", c.epsilon);
  read(j, "break_relation", c.break_relation);
  require_positive(c.horizon, "verify.horizon");
  require_positive(c.step, "verify.step");
  if (c.points < 1) throw ConfigError("verify.points must be at least 1");
  return c;
}

OptimizeConfig parse_optimize(const json& j) {
  expect_object(j, "optimize");
  reject_unknown(j, "optimize",
                 {"grid_k", "period", "cost", "reset", "free_period", "period_min",
                  "period_max", "anchor_coord", "anchor_value", "contraction_epsilon",
                  "amplitude", "lambda_ceiling", "substeps", "max_outer", "max_inner", "eq_tol",
                  "ineq_tol", "stat_tol", "verbose"});
  OptimizeConfig c;
  read(j, "grid_k", c.grid_k);
  read(j, "period", c.period);
  read(j, "cost", c.cost);
  read(j, "reset", c.reset);
  read(j, "free_period", c.free_period);
  read(j, "period_min", c.period_min);
  read(j, "period_max", c.period_max);
  read(j, "anchor_coord", c.anchor_coord);
  read(j, "anchor_value", c.anchor_value);
  read_optional(j, "contraction_epsilon", c.contraction_epsilon);
  read_optional(j, "amplitude", c.amplitude);
  read_optional(j, "lambda_ceiling", c.lambda_ceiling);
  read(j, "substeps", c.substeps);
  read(j, "max_outer", c.solver.max_outer);
  read(j, "max_inner", c.solver.max_inner);
  read(j, "eq_tol", c.solver.eq_tol);
  read(j, "ineq_tol", c.solver.ineq_tol);
  read(j, "stat_tol", c.solver.stat_tol);
  read(j, "verbose", c.solver.verbose);
  if (c.grid_k < 2) throw ConfigError("optimize.grid_k must be at least 2");
  require_positive(c.period, "optimize.period");
  if (c.cost != "input_energy" && c.cost != "base_accel")
    throw ConfigError("optimize.cost must be 'input_energy' or 'base_accel'");
  if (c.reset != "identity")
    throw ConfigError("optimize.reset only supports 'identity' here; custom reset maps are "
                      "available through the library API");
  if (c.substeps < 1) throw ConfigError("optimize.substeps must be at least 1");
  return c;
}

std::vector<PlotSpec> parse_plots(const json& j) {
  if (!j.is_array()) throw ConfigError("plots must be an array");
  std::vector<PlotSpec> out;
  for (const auto& p : j) {
    expect_object(p, "plots entry");
    reject_unknown(p, "plots entry", {"x", "y", "file"});
    PlotSpec spec;
    read(p, "x", spec.x);
    read(p, "y", spec.y);
    read(p, "file", spec.file);
    if (spec.x.empty() || spec.y.empty())
      throw ConfigError("plots entries need both 'x' and 'y' labels");
    out.push_back(std::move(spec));
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  expect_object(doc, "config");
  reject_unknown(doc, "config",
                 {"model", "params", "seed", "out", "simulate", "verify", "optimize", "plots"});
  RunConfig cfg;
  read(doc, "model", cfg.model);
  if (doc.contains("params")) {
    expect_object(doc.at("params"), "params");
    cfg.params = doc.at("params");
  }
  read(doc, "seed", cfg.seed);
  read(doc, "out", cfg.out);
  if (doc.contains("simulate")) cfg.simulate = parse_simulate(doc.at("simulate"));
  if (doc.contains("verify")) cfg.verify = parse_verify(doc.at("verify"));
  if (doc.contains("optimize")) cfg.optimize = parse_optimize(doc.at("optimize"));
  if (doc.contains("plots")) cfg.plots = parse_plots(doc.at("plots"));
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json effective_config(const RunConfig& cfg) {
  json sim{{"system", cfg.simulate.system},
           {"vertex", cfg.simulate.vertex},
           {"horizon", cfg.simulate.horizon},
           {"step", cfg.simulate.step},
           {"controller", cfg.simulate.controller},
           {"epsilon", cfg.simulate.epsilon},
           {"baumgarte", cfg.simulate.baumgarte}};
  if (cfg.simulate.x0) sim["x0"] = vector_json(*cfg.simulate.x0);
  if (cfg.simulate.x0_2) sim["x0_2"] = vector_json(*cfg.simulate.x0_2);
  if (cfg.simulate.z0) sim["z0"] = vector_json(*cfg.simulate.z0);

  json ver{{"horizon", cfg.verify.horizon},
           {"step", cfg.verify.step},
           {"points", cfg.verify.points},
           {"epsilon", cfg.verify.epsilon},
           {"break_relation", cfg.verify.break_relation}};

  json opt{{"grid_k", cfg.optimize.grid_k},
           {"period", cfg.optimize.period},
           {"cost", cfg.optimize.cost},
           {"reset", cfg.optimize.reset},
           {"free_period", cfg.optimize.free_period},
           {"period_min", cfg.optimize.period_min},
           {"period_max", cfg.optimize.period_max},
           {"anchor_coord", cfg.optimize.anchor_coord},
           {"anchor_value", cfg.optimize.anchor_value},
           {"substeps", cfg.optimize.substeps},
           {"max_outer", cfg.optimize.solver.max_outer},
           {"max_inner", cfg.optimize.solver.max_inner},
           {"eq_tol", cfg.optimize.solver.eq_tol},
           {"ineq_tol", cfg.optimize.solver.ineq_tol},
           {"stat_tol", cfg.optimize.solver.stat_tol},
           {"verbose", cfg.optimize.solver.verbose}};
  if (cfg.optimize.contraction_epsilon)
    opt["contraction_epsilon"] = *cfg.optimize.contraction_epsilon;
  if (cfg.optimize.amplitude) opt["amplitude"] = *cfg.optimize.amplitude;
  if (cfg.optimize.lambda_ceiling) opt["lambda_ceiling"] = *cfg.optimize.lambda_ceiling;

  json plots = json::array();
  for (const auto& p : cfg.plots) plots.push_back({{"x", p.x}, {"y", p.y}, {"file", p.file}});

  return json{{"model", cfg.model}, {"params", cfg.params},     {"seed", cfg.seed},
              {"out", cfg.out},     {"simulate", sim},          {"verify", ver},
              {"optimize", opt},    {"plots", std::move(plots)}};
}

std::vector<std::string> available_models() {
  return {"split_cart", "double_pendulum_pivot"};
}

CcsModel build_model(const RunConfig& cfg) {
  const json& p = cfg.params;
  if (cfg.model == "split_cart") {
    reject_unknown(p, "params", {"cart_mass", "pend_mass", "length", "gravity"});
    SplitCartParams params;
    read(p, "cart_mass", params.cart_mass);
    read(p, "pend_mass", params.pend_mass);
    read(p, "length", params.length);
    read(p, "gravity", params.gravity);
    require_positive(params.cart_mass, "params.cart_mass");
    require_positive(params.pend_mass, "params.pend_mass");
    require_positive(params.length, "params.length");
    return example_split_cart(params).ccs;
  }
  if (cfg.model == "double_pendulum_pivot") {
    reject_unknown(p, "params", {"mass", "length", "gravity"});
    DoublePendulumParams params;
    read(p, "mass", params.mass);
    read(p, "length", params.length);
    read(p, "gravity", params.gravity);
    require_positive(params.mass, "params.mass");
    require_positive(params.length, "params.length");
    return example_double_pendulum_pivot(params).ccs;
  }
  std::string names;
  for (const auto& n : available_models()) names += (names.empty() ? "" : ", ") + n;
  throw ConfigError("unknown model '" + cfg.model + "' (available: " + names + ")");
}

}  // namespace ccs::cli
