#include "lipreach/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lipreach/error.hpp"
#include "lipreach/oracle.hpp"

namespace lipreach::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& path, const std::string& message) {
  throw ModelError(path + ": " + message);
}

const json& member(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) fail_at(path + "/" + key, "missing required field");
  return obj[key];
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail_at(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail_at(path, "expected a finite number");
  return d;
}

std::size_t positive_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 1) fail_at(path, "expected a positive integer");
  return v.get<std::size_t>();
}

std::vector<double> vector_of(const json& v, const std::string& path, std::size_t expected) {
  if (!v.is_array()) fail_at(path, "expected an array");
  if (v.size() != expected) {
    fail_at(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "/" + std::to_string(i)));
  return out;
}

reach::Box box_of(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_object()) fail_at(path, "expected an object with lower and upper");
  auto lo = vector_of(member(v, path, "lower"), path + "/lower", n);
  auto hi = vector_of(member(v, path, "upper"), path + "/upper", n);
  try {
    return reach::Box(std::move(lo), std::move(hi));
  } catch (const ModelError& e) {
    fail_at(path, e.what());
  }
}

std::vector<expr::Ast> expressions(const json& v, const std::string& path, std::size_t expected, std::size_t n,
                                   std::size_t m, bool allow_inputs) {
  if (!v.is_array()) fail_at(path, "expected an array of expressions");
  if (v.size() != expected) {
    fail_at(path, "expected " + std::to_string(expected) + " expressions, got " + std::to_string(v.size()));
  }
  std::vector<expr::Ast> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    if (!v[i].is_string()) fail_at(p, "expected an expression string");
    const std::string text = v[i].get<std::string>();
    expr::Ast ast;
    try {
      ast = expr::parse(text);
    } catch (const ParseError& e) {
      fail_at(p, e.what());
    }
    if (ast.max_state_index() > n) {
      fail_at(p, "expression '" + text + "' references x" + std::to_string(ast.max_state_index()) +
                     " but state_dim is " + std::to_string(n));
    }
    if (!allow_inputs && ast.max_input_index() > 0) {
      fail_at(p, "expression '" + text + "' references u" + std::to_string(ast.max_input_index()) +
                     " but measurements may only use states");
    }
    if (ast.max_input_index() > m) {
      fail_at(p, "expression '" + text + "' references u" + std::to_string(ast.max_input_index()) +
                     " but input_dim is " + std::to_string(m));
    }
    out.push_back(std::move(ast));
  }
  return out;
}

}  // namespace

LoadedModel parse_model(const json& doc, std::size_t substeps) {
  if (!doc.is_object()) fail_at("", "model document must be an object");
  const json& plant = member(doc, "", "plant");
  const std::size_t n = positive_int(member(plant, "/plant", "state_dim"), "/plant/state_dim");
  const std::size_t m = positive_int(member(plant, "/plant", "input_dim"), "/plant/input_dim");
  std::vector<expr::Ast> dynamics =
      expressions(member(plant, "/plant", "dynamics"), "/plant/dynamics", n, n, m, true);

  const json& ctrl_doc = member(doc, "", "controller");
  std::optional<nn::Controller> controller;
  try {
    controller.emplace(nn::load_controller(ctrl_doc));
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    throw ModelError("/controller" + (msg.starts_with("/") ? msg : ": " + msg));
  }
  if (controller->output_dim() != m) {
    fail_at("/controller", "output dimension " + std::to_string(controller->output_dim()) +
                               " does not match plant input_dim " + std::to_string(m));
  }

  std::vector<expr::Ast> measurement;
  if (plant.contains("measurement") && !(plant["measurement"].is_string() && plant["measurement"] == "identity")) {
    measurement = expressions(plant["measurement"], "/plant/measurement", controller->input_dim(), n, m, false);
  } else if (controller->input_dim() != n) {
    fail_at("/controller", "input dimension " + std::to_string(controller->input_dim()) +
                               " does not match the identity measurement of " + std::to_string(n) + " states");
  }

  const json& step = member(doc, "", "control_step");
  if (!step.is_number() || !(step.get<double>() > 0.0) || !std::isfinite(step.get<double>())) {
    fail_at("/control_step", "control_step must be > 0");
  }

  reach::Box init = box_of(member(doc, "", "init_set"), "/init_set", n);

  reach::SafetySpec safety;
  if (doc.contains("safety") && !doc["safety"].is_null()) {
    const json& s = doc["safety"];
    if (!s.is_object()) fail_at("/safety", "expected an object");
    if (s.contains("avoid")) {
      if (!s["avoid"].is_array()) fail_at("/safety/avoid", "expected an array of boxes");
      for (std::size_t i = 0; i < s["avoid"].size(); ++i) {
        safety.avoid.push_back(box_of(s["avoid"][i], "/safety/avoid/" + std::to_string(i), n));
      }
    }
    if (s.contains("goal") && !s["goal"].is_null()) safety.goal = box_of(s["goal"], "/safety/goal", n);
  }

  try {
    sim::NncsModel model(std::move(dynamics), std::move(measurement), std::move(*controller), step.get<double>(),
                         substeps);
    return {std::move(model), std::move(init), std::move(safety)};
  } catch (const ModelError& e) {
    fail_at("", e.what());
  }
}

LoadedModel load_model(const std::filesystem::path& path, std::size_t substeps) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_model(doc, substeps);
}

void RunConfig::validate() const {
  if (model_path.empty()) throw ModelError("--model is required");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ModelError("--horizon must be > 0");
  if (!(eps > 0.0)) throw ModelError("--eps must be > 0");
  if (kmax < 1) throw ModelError("--kmax must be >= 1");
  if (per_step < 1) throw ModelError("--per-step must be >= 1");
  if (substeps < 1) throw ModelError("--substeps must be >= 1");
  if (strategy != "fixed" && strategy != "global" && strategy != "local") {
    throw ModelError("--strategy must be fixed, global or local");
  }
  opt_options().validate();
}

optim::OptOptions RunConfig::opt_options() const {
  optim::OptOptions o;
  o.tolerance = eps;
  o.max_iterations = kmax;
  if (strategy == "fixed") {
    o.strategy = optim::LipStrategy::fixed(lipschitz);
  } else if (strategy == "global") {
    o.strategy = optim::LipStrategy::global(r);
  } else {
    o.strategy = optim::LipStrategy::local(r);
  }
  return o;
}

std::vector<double> output_times(const RunConfig& cfg, double control_step) {
  std::vector<double> times;
  if (!cfg.times.empty()) {
    for (std::size_t i = 0; i < cfg.times.size(); ++i) {
      const double t = cfg.times[i];
      if (!(t > 0.0) || t > cfg.horizon) throw ModelError("--times entries must lie in (0, horizon]");
      if (i > 0 && !(t > cfg.times[i - 1])) throw ModelError("--times must be strictly increasing");
    }
    return cfg.times;
  }
  const double rate = static_cast<double>(cfg.per_step) / control_step;  // samples per second
  const auto count = static_cast<std::uint64_t>(std::floor(cfg.horizon * rate + 1e-9));
  for (std::uint64_t j = 1; j <= count; ++j) times.push_back(static_cast<double>(j) / rate);
  if (times.empty() || times.back() < cfg.horizon * (1.0 - 1e-9)) times.push_back(cfg.horizon);
  return times;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(std::span<const double> v, char sep = ' ') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt(v[i]);
  }
  return s;
}

struct ProjectionMetric {
  double time;
  std::size_t i;
  std::size_t j;
  double box_area;
  std::optional<double> hull_area;
};

struct ContainmentMetric {
  double time;
  oracle::ContainmentReport report;
  std::size_t samples;
};

nlohmann::ordered_json metadata_json(const RunConfig& cfg) {
  nlohmann::ordered_json meta;
  meta["model"] = cfg.model_path;
  meta["horizon"] = cfg.horizon;
  if (cfg.times.empty()) {
    meta["times"] = nullptr;
  } else {
    meta["times"] = cfg.times;
  }
  meta["per_step"] = cfg.per_step;
  meta["eps"] = cfg.eps;
  meta["kmax"] = cfg.kmax;
  meta["r"] = cfg.r;
  meta["strategy"] = cfg.strategy;
  meta["lipschitz"] = cfg.lipschitz;
  meta["substeps"] = cfg.substeps;
  meta["oracle_grid"] = cfg.oracle_grid;
  meta["threads"] = cfg.threads;
  meta["out"] = cfg.out;
  meta["format"] = cfg.format == OutputFormat::Json ? "json" : "csv";
  return meta;
}

void write_csv(std::ostream& os, const RunConfig& cfg, const reach::ReachTube& tube, const reach::Verdict& verdict,
               const std::vector<ProjectionMetric>& projections, const std::vector<ContainmentMetric>& containment) {
  os << "# lipreach reach tube\n";
  const auto meta = metadata_json(cfg);
  for (const auto& [key, value] : meta.items()) {
    if (value.is_array()) {
      std::vector<double> v = value.get<std::vector<double>>();
      os << "# " << key << ": " << join(v, ',') << "\n";
    } else if (value.is_string()) {
      os << "# " << key << ": " << value.get<std::string>() << "\n";
    } else if (value.is_number_float()) {
      os << "# " << key << ": " << fmt(value.get<double>()) << "\n";
    } else {
      os << "# " << key << ": " << value.dump() << "\n";
    }
  }
  os << "time,dim,lower,upper,converged_min,converged_max\n";
  for (const auto& e : tube.entries) {
    for (std::size_t d = 0; d < e.box.dim(); ++d) {
      os << fmt(e.time) << ',' << d + 1 << ',' << fmt(e.box.lower()[d]) << ',' << fmt(e.box.upper()[d]) << ','
         << (e.converged_min[d] ? "true" : "false") << ',' << (e.converged_max[d] ? "true" : "false") << "\n";
    }
    for (const auto& err : e.errors) os << "# error: t=" << fmt(e.time) << " " << err << "\n";
  }
  for (const auto& p : projections) {
    os << "# metric: time=" << fmt(p.time) << " dims=" << p.i + 1 << "," << p.j + 1 << " box_area=" << fmt(p.box_area);
    if (p.hull_area) {
      os << " hull_area=" << fmt(*p.hull_area) << " ratio=" << fmt(p.box_area / *p.hull_area);
    }
    os << "\n";
  }
  for (const auto& c : containment) {
    os << "# containment: time=" << fmt(c.time) << " samples=" << c.samples
       << " contained=" << (c.report.contained ? "true" : "false")
       << " worst_dim=" << c.report.worst_dim + 1 << " worst_violation=" << fmt(c.report.worst_violation) << "\n";
  }
  os << "# verdict: " << reach::outcome_name(verdict.outcome) << "\n";
  os << "# reason: " << verdict.reason << "\n";
  if (verdict.conflict_time) os << "# conflict_time: " << fmt(*verdict.conflict_time) << "\n";
  if (verdict.witness) {
    const auto& w = *verdict.witness;
    os << "# witness_x0: " << join(w.x0, ',') << "\n";
    os << "# witness_time: " << fmt(w.time) << "\n";
    os << "# witness_avoid: " << w.avoid_index + 1 << "\n";
    for (const auto& s : w.trajectory.samples) {
      os << "# witness_state: t=" << fmt(s.time) << " x=" << join(s.state, ',') << "\n";
    }
  }
}

void write_json(std::ostream& os, const RunConfig& cfg, const reach::ReachTube& tube, const reach::Verdict& verdict,
                const std::vector<ProjectionMetric>& projections, const std::vector<ContainmentMetric>& containment) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["metadata"] = metadata_json(cfg);
  ojson entries = ojson::array();
  for (const auto& e : tube.entries) {
    ojson j;
    j["time"] = e.time;
    j["lower"] = e.box.lower();
    j["upper"] = e.box.upper();
    j["converged_min"] = e.converged_min;
    j["converged_max"] = e.converged_max;
    if (e.failed()) j["errors"] = e.errors;
    entries.push_back(std::move(j));
  }
  doc["tube"] = {{"eps", tube.tolerance}, {"kmax", tube.max_iterations}, {"entries", std::move(entries)}};

  ojson metrics = ojson::array();
  for (const auto& p : projections) {
    ojson j;
    j["time"] = p.time;
    j["dims"] = {p.i + 1, p.j + 1};
    j["box_area"] = p.box_area;
    if (p.hull_area) {
      j["hull_area"] = *p.hull_area;
      j["ratio"] = p.box_area / *p.hull_area;
    }
    metrics.push_back(std::move(j));
  }
  doc["metrics"] = std::move(metrics);
  ojson cont = ojson::array();
  for (const auto& c : containment) {
    cont.push_back({{"time", c.time},
                    {"samples", c.samples},
                    {"contained", c.report.contained},
                    {"worst_dim", c.report.worst_dim + 1},
                    {"worst_violation", c.report.worst_violation}});
  }
  doc["containment"] = std::move(cont);

  ojson v;
  v["outcome"] = reach::outcome_name(verdict.outcome);
  v["reason"] = verdict.reason;
  if (verdict.conflict_time) v["conflict_time"] = *verdict.conflict_time;
  if (verdict.witness) {
    const auto& w = *verdict.witness;
    ojson traj = ojson::array();
    for (const auto& s : w.trajectory.samples) traj.push_back({{"time", s.time}, {"state", s.state}});
    v["witness"] = {{"x0", w.x0}, {"time", w.time}, {"avoid", w.avoid_index + 1}, {"trajectory", std::move(traj)}};
  }
  doc["verdict"] = std::move(v);
  os << doc.dump(2) << "\n";
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& stdout_sink, std::ostream& diag) {
  try {
    cfg.validate();
    LoadedModel loaded = load_model(cfg.model_path, cfg.substeps);
    const sim::NncsModel& model = loaded.model;
    const std::vector<double> times = output_times(cfg, model.control_step());

    reach::ReachOptions ropts;
    ropts.opt = cfg.opt_options();
    ropts.threads = cfg.threads;
    const reach::ReachTube tube = reach::reach_tube(model, loaded.init, times, ropts);

    std::vector<ProjectionMetric> projections;
    std::vector<ContainmentMetric> containment;
    std::vector<oracle::SampleCloud> clouds;
    if (cfg.oracle_grid > 0) clouds = oracle::grid_search(model, loaded.init, times, cfg.oracle_grid, cfg.threads);
    const std::size_t n = model.state_dim();
    for (std::size_t ti = 0; ti < tube.entries.size(); ++ti) {
      const auto& e = tube.entries[ti];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          ProjectionMetric p{e.time, i, j, e.box.projected_area(i, j), std::nullopt};
          if (!clouds.empty()) p.hull_area = oracle::hull_area(oracle::project(clouds[ti], i, j));
          projections.push_back(p);
        }
      }
      if (!clouds.empty() && !clouds[ti].states.empty()) {
        containment.push_back({e.time, oracle::containment_check(clouds[ti], e.box), clouds[ti].states.size()});
      }
    }

    loaded.safety.horizon = cfg.horizon;
    reach::WitnessOptions wopts;
    wopts.grid_points = std::max<std::size_t>(cfg.oracle_grid, 1);
    const reach::Verdict verdict = reach::check_safety(tube, loaded.safety, model, loaded.init, wopts);

    std::ostringstream buffer;
    if (cfg.format == OutputFormat::Json) {
      write_json(buffer, cfg, tube, verdict, projections, containment);
    } else {
      write_csv(buffer, cfg, tube, verdict, projections, containment);
    }
    if (cfg.out.empty() || cfg.out == "-") {
      stdout_sink << buffer.str();
    } else {
      std::ofstream file(cfg.out, std::ios::binary);
      if (!file) throw Error("cannot write output file '" + cfg.out + "'");
      file << buffer.str();
    }

    diag << "verdict: " << reach::outcome_name(verdict.outcome) << " (" << verdict.reason << ")\n";
    switch (verdict.outcome) {
      case reach::Outcome::Safe: return kExitSafe;
      case reach::Outcome::Unsafe: return kExitUnsafe;
      case reach::Outcome::Unknown: return kExitUnknown;
    }
    return kExitUnknown;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Reachability analysis of neural-network-controlled systems"};
  RunConfig cfg;
  std::string format = "csv";
  app.add_option("--model", cfg.model_path, "Model file (JSON)")->required();
  app.add_option("--horizon", cfg.horizon, "Time horizon in seconds")->required();
  auto* times = app.add_option("--times", cfg.times, "Comma-separated output times")->delimiter(',');
  app.add_option("--per-step", cfg.per_step, "Output samples per control step")->excludes(times);
  app.add_option("--eps", cfg.eps, "Optimisation tolerance epsilon");
  app.add_option("--kmax", cfg.kmax, "Maximum iterations per dimension");
  app.add_option("--r", cfg.r, "Lipschitz safety factor r > 1");
  app.add_option("--strategy", cfg.strategy, "Lipschitz strategy")->check(CLI::IsMember({"fixed", "global", "local"}));
  app.add_option("--lipschitz", cfg.lipschitz, "Lipschitz constant for --strategy fixed");
  app.add_option("--substeps", cfg.substeps, "RK4 substeps per control step");
  app.add_option("--oracle-grid", cfg.oracle_grid, "Grid oracle size (0 disables)");
  app.add_option("--threads", cfg.threads, "Worker threads");
  app.add_option("--out", cfg.out, "Output path (default stdout)");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }
  cfg.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;
  return run(cfg, std::cout, std::cerr);
}

}  // namespace lipreach::cli
