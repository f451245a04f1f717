#pragma once

#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "competitor.hpp"
#include "minsolve.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "stoptime.hpp"

namespace twoplane {

// Malformed experiment configuration; the message starts with a JSON pointer.
class ConfigError : public DomainError {
public:
  using DomainError::DomainError;
};

inline constexpr const char* experiment_schema_id = "twoplane-experiment/1";

enum class CommandKind { solve, verify_estimates, sweep_perturb, detect, compete, all };

inline const std::vector<std::pair<CommandKind, std::string>>& command_names() {
  static const std::vector<std::pair<CommandKind, std::string>> names{
      {CommandKind::solve, "solve"},   {CommandKind::verify_estimates, "verify-estimates"},
      {CommandKind::sweep_perturb, "sweep-perturb"}, {CommandKind::detect, "detect"},
      {CommandKind::compete, "compete"}, {CommandKind::all, "all"}};
  return names;
}

inline std::string command_name(CommandKind k) {
  for (const auto& [c, n] : command_names())
    if (c == k) return n;
  return "?";
}

inline CommandKind parse_command(const std::string& s) {
  for (const auto& [c, n] : command_names())
    if (n == s) return c;
  throw ConfigError("/command: unknown command '" + s + "'");
}

struct ExperimentConfig {
  CommandKind command = CommandKind::all;
  std::uint64_t seed = 0;

  struct Solve {
    int resolution = 128;
    double tolerance = 1e-8;
  } solve;
  struct Estimates {
    int count = 20;
    int resolution = 32;
    double mu_max = 0.1;
    int trend_resolution = 64;
  } estimates;
  struct Sweep {
    int count = 50;
    int resolution = 64;
    double l = 1e-4;
    std::vector<double> mu{0.05, 0.025, 0.0125};
    std::vector<double> r{0.1, 0.15, 0.2};
  } sweep;
  struct Detect {
    double eps = 1e-2;
    int samples = 4096;
    std::vector<int> k{3, 5, 7};
  } detect;
  struct Compete {
    double r_e = 0.4;
    std::vector<double> mu{0.05, 0.02, 0.01};
  } compete;
};

namespace detail {

enum class FieldKind { integer, number, integer_list, number_list };

struct FieldSpec {
  const char* section;
  const char* key;
  FieldKind kind;
  double lo, hi;
};

inline const std::vector<FieldSpec>& config_fields() {
  using K = FieldKind;
  static const std::vector<FieldSpec> f{
      {"solve", "resolution", K::integer, 16, 1024},
      {"solve", "tolerance", K::number, 1e-14, 1e-2},
      {"verify_estimates", "count", K::integer, 1, 1000},
      {"verify_estimates", "resolution", K::integer, 16, 512},
      {"verify_estimates", "mu_max", K::number, 0.03, 0.3},
      {"verify_estimates", "trend_resolution", K::integer, 16, 512},
      {"sweep_perturb", "count", K::integer, 1, 1000},
      {"sweep_perturb", "resolution", K::integer, 16, 512},
      {"sweep_perturb", "l", K::number, 1e-12, 0.5},
      {"sweep_perturb", "mu", K::number_list, 0.0, 0.3},
      {"sweep_perturb", "r", K::number_list, 0.01, 0.3},
      {"detect", "eps", K::number, 1e-6, 1e-2},
      {"detect", "samples", K::integer, 16, 65536},
      {"detect", "k", K::integer_list, 1, 10},
      {"compete", "r_e", K::number, 0.05, 0.45},
      {"compete", "mu", K::number_list, 1e-4, 0.2},
  };
  return f;
}

inline const FieldSpec* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : config_fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

inline void check_field(const FieldSpec& f, const nlohmann::json& v, const std::string& where) {
  auto scalar = [&](const nlohmann::json& x, bool integer, const std::string& at) {
    if (integer ? !x.is_number_integer() : !x.is_number())
      throw ConfigError(at + ": expected " + (integer ? "an integer" : "a number"));
    double d = x.get<double>();
    if (!(d >= f.lo && d <= f.hi))
      throw ConfigError(at + ": " + format_number(d) + " is outside [" + format_number(f.lo) + ", " +
                        format_number(f.hi) + "]");
  };
  switch (f.kind) {
    case FieldKind::integer: scalar(v, true, where); break;
    case FieldKind::number: scalar(v, false, where); break;
    case FieldKind::integer_list:
    case FieldKind::number_list:
      if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array");
      for (std::size_t i = 0; i < v.size(); ++i)
        scalar(v[i], f.kind == FieldKind::integer_list, where + "/" + std::to_string(i));
      break;
  }
}

} // namespace detail

// JSON Schema of the configuration file, generated from the same field table
// the parser enforces.
inline nlohmann::json experiment_schema() {
  using detail::FieldKind;
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& f : detail::config_fields()) {
    auto range = [&](const char* type) {
      return nlohmann::json{{"type", type}, {"minimum", f.lo}, {"maximum", f.hi}};
    };
    nlohmann::json p;
    switch (f.kind) {
      case FieldKind::integer: p = range("integer"); break;
      case FieldKind::number: p = range("number"); break;
      case FieldKind::integer_list: p = {{"type", "array"}, {"minItems", 1}, {"items", range("integer")}}; break;
      case FieldKind::number_list: p = {{"type", "array"}, {"minItems", 1}, {"items", range("number")}}; break;
    }
    auto& s = sections[f.section];
    s["type"] = "object";
    s["additionalProperties"] = false;
    s["properties"][f.key] = p;
  }
  nlohmann::json commands = nlohmann::json::array();
  for (const auto& [c, n] : command_names()) commands.push_back(n);
  nlohmann::json props = sections;
  props["schema"] = {{"const", experiment_schema_id}};
  props["command"] = {{"enum", commands}};
  props["seed"] = {{"type", "integer"}, {"minimum", 0}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"$id", experiment_schema_id},
          {"type", "object"},
          {"required", {"schema"}},
          {"additionalProperties", false},
          {"properties", props}};
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("/: expected an object");
  if (!j.contains("schema")) throw ConfigError("/schema: missing");
  if (j["schema"] != experiment_schema_id)
    throw ConfigError("/schema: expected \"" + std::string(experiment_schema_id) + "\", got " + j["schema"].dump());
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "schema") continue;
    if (key == "command") {
      if (!v.is_string()) throw ConfigError("/command: expected a string");
      c.command = parse_command(v.get<std::string>());
      continue;
    }
    if (key == "seed") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("/seed: expected a non-negative integer");
      c.seed = v.get<std::uint64_t>();
      continue;
    }
    bool known = false;
    for (const auto& f : detail::config_fields()) known = known || key == f.section;
    if (!known) throw ConfigError("/" + key + ": unknown key");
    if (!v.is_object()) throw ConfigError("/" + key + ": expected an object");
    for (const auto& [field, value] : v.items()) {
      const std::string where = "/" + key + "/" + field;
      const auto* spec = detail::find_field(key, field);
      if (!spec) throw ConfigError(where + ": unknown key");
      detail::check_field(*spec, value, where);
    }
  }
  auto read = [&](const char* s, const char* k, auto& target) {
    if (j.contains(s) && j[s].contains(k)) j[s][k].get_to(target);
  };
  read("solve", "resolution", c.solve.resolution);
  read("solve", "tolerance", c.solve.tolerance);
  read("verify_estimates", "count", c.estimates.count);
  read("verify_estimates", "resolution", c.estimates.resolution);
  read("verify_estimates", "mu_max", c.estimates.mu_max);
  read("verify_estimates", "trend_resolution", c.estimates.trend_resolution);
  read("sweep_perturb", "count", c.sweep.count);
  read("sweep_perturb", "resolution", c.sweep.resolution);
  read("sweep_perturb", "l", c.sweep.l);
  read("sweep_perturb", "mu", c.sweep.mu);
  read("sweep_perturb", "r", c.sweep.r);
  read("detect", "eps", c.detect.eps);
  read("detect", "samples", c.detect.samples);
  read("detect", "k", c.detect.k);
  read("compete", "r_e", c.compete.r_e);
  read("compete", "mu", c.compete.mu);
  return c;
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": byte " + std::to_string(e.byte) + ": malformed JSON");
  }
  try {
    return parse_experiment_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---- instance builders shared by the campaigns and the tests ----

// Random trigonometric boundary with four modes, scaled to the given mu.
inline BoundaryCurve random_boundary(std::mt19937_64& rng, double mu) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec2> a, b;
  for (int k = 0; k < 4; ++k) {
    a.emplace_back(u(rng), u(rng));
    b.emplace_back(u(rng), u(rng));
  }
  auto g = BoundaryCurve::fourier(Vec2(u(rng), u(rng)), a, b);
  return g.scaled(mu / g.mu());
}

// (cos 2 theta, sin 2 theta) / 10, the trace of z^2 / 10
inline BoundaryCurve holomorphic_boundary() {
  return BoundaryCurve::fourier(Vec2::Zero(), {Vec2::Zero(), Vec2(0.1, 0)}, {Vec2::Zero(), Vec2(0, 0.1)});
}

// fixed non-holomorphic shape, scaled to mu
inline BoundaryCurve trend_boundary(double mu) {
  auto g = BoundaryCurve::fourier(Vec2::Zero(), {Vec2(0.02, 0.01), Vec2(0.0, 0.015), Vec2(0.01, 0.0)},
                                  {Vec2(0.01, 0.0), Vec2(0.01, -0.01), Vec2(0.0, 0.005)});
  return g.scaled(mu / g.mu());
}

inline const PlanePair& reference_pair() {
  static const PlanePair p = make_plane_pair(1.2, 1.4);
  return p;
}

// Odd bump of support radius 2^-k on sheet 1 of the reference pair, peak
// normal displacement 3/4 eps 2^-k.
inline TriMesh4 synthetic_bump_mesh(int k, double eps) {
  static const Mesh2 graded = disc_mesh(1.25, 64, 2e-4);
  const double R = std::ldexp(1.0, -k), H = 0.75 * eps * R;
  auto g = [R, H](const Vec2& x) -> Vec2 {
    Vec2 y = x / R;
    double r2 = y.squaredNorm();
    if (r2 >= 1) return Vec2::Zero();
    return Vec2(H / 0.2862 * y.x() * (1 - r2) * (1 - r2), 0);
  };
  const auto& pair = reference_pair();
  return merge(lift_to_sheet(pair, 0, graded, g), lift_to_sheet(pair, 1, graded));
}

inline TriMesh4 exact_pair_mesh() {
  static const Mesh2 graded = disc_mesh(1.25, 64, 2e-4);
  const auto& pair = reference_pair();
  return merge(lift_to_sheet(pair, 0, graded), lift_to_sheet(pair, 1, graded));
}

// Reference pair with a smooth normal displacement of size 4e-4 on sheet 1.
inline TriMesh4 perturbed_pair_mesh() {
  const auto& pair = reference_pair();
  Mesh2 d = disc_mesh(1.25, 128);
  auto g = [](const Vec2& x) -> Vec2 {
    return 4e-4 * Vec2(std::cos(3 * x.x()) * std::sin(2 * x.y()), x.x() * x.y());
  };
  return merge(lift_to_sheet(pair, 0, d, g), lift_to_sheet(pair, 1, d));
}

// Smooth radial bump of height mu R (1 - |x|^2/R^2)^2 on sheet 1, R = r_E / 5.
inline TriMesh4 inner_bump_mesh(double mu, double r_e) {
  static const Mesh2 graded = disc_mesh(1.25, 128, 2e-3);
  const double R = 0.2 * r_e;
  auto g = [mu, R](const Vec2& x) -> Vec2 {
    double s = x.squaredNorm() / (R * R);
    if (s >= 1) return Vec2::Zero();
    return Vec2(mu * R * (1 - s) * (1 - s), 0);
  };
  const auto& pair = reference_pair();
  return merge(lift_to_sheet(pair, 0, graded, g), lift_to_sheet(pair, 1, graded));
}

// max_{1<=i<=3} |grad^i f| on B(0, 3/4)
inline double derivative_smallness(const GraphFn& f) {
  auto n = derivative_sup_norms(f, 0.75, 3);
  return std::max({n[1], n[2], n[3]});
}

// ---- campaigns ----

struct Outcome {
  nlohmann::json report;
  std::optional<std::string> csv;
  bool verdict = false;
};

struct Instance {
  std::string command;
  std::string name;
  std::function<Outcome()> run;
};

namespace detail {

inline std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                  static_cast<std::uint32_t>(index)};
  return std::mt19937_64(s);
}

inline SolverConfig solver_config(int resolution, double tolerance = 1e-8) {
  SolverConfig c;
  c.resolution = resolution;
  c.tolerance = tolerance;
  return c;
}

inline nlohmann::json solve_summary(const SolveResult& s) {
  return {{"mu", s.mu},
          {"area", s.area},
          {"residual", s.residual},
          {"iterations", s.iterations},
          {"local_minimum", s.local_minimum},
          {"resolution", s.f.grid().resolution()}};
}

inline std::vector<Instance> solve_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  out.push_back({"solve", "flat", [c] {
                   auto s = solve_minimal_graph(BoundaryCurve{}, solver_config(c.solve.resolution, c.solve.tolerance));
                   double sup = s.f.sup_norm();
                   bool ok = sup <= 1e-8 && std::abs(s.area - std::numbers::pi) <= 1e-3;
                   nlohmann::json r = solve_summary(s);
                   r["instance"] = "flat";
                   r["sup_norm"] = sup;
                   r["estimates"] = estimate_to_json(estimate_report(s));
                   return Outcome{r, std::nullopt, ok};
                 }});
  out.push_back({"solve", "holomorphic", [c] {
                   auto s = solve_minimal_graph(holomorphic_boundary(), solver_config(c.solve.resolution, c.solve.tolerance));
                   const Grid2& g = s.f.grid();
                   double err = 0.0;
                   for (std::size_t p = 0; p < g.size(); ++p) {
                     const Vec2& x = g.nodes()[p].x;
                     Vec2 z2(x.x() * x.x() - x.y() * x.y(), 2 * x.x() * x.y());
                     err = std::max(err, (s.f[p] - z2 / 10).norm());
                   }
                   double bound = 5 * g.h() * g.h();
                   nlohmann::json r = solve_summary(s);
                   r["instance"] = "holomorphic";
                   r["sup_error"] = err;
                   r["error_bound"] = bound;
                   r["estimates"] = estimate_to_json(estimate_report(s));
                   return Outcome{r, std::nullopt, err <= bound};
                 }});
  return out;
}

inline std::vector<Instance> estimate_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  for (int k = 0; k < c.estimates.count; ++k) {
    std::string name = "random-" + std::to_string(k);
    out.push_back({"verify-estimates", name, [c, k, name] {
                     auto rng = instance_rng(c.seed, static_cast<std::uint64_t>(k));
                     std::uniform_real_distribution<double> u(0.02, c.estimates.mu_max);
                     double mu = u(rng);
                     auto gamma = random_boundary(rng, mu);
                     auto s = solve_minimal_graph(gamma, solver_config(c.estimates.resolution));
                     auto rep = estimate_report(s);
                     auto mp = verify_max_principle(s.f, gamma);
                     auto iso = verify_isoperimetric(s.f, gamma);
                     nlohmann::json r = solve_summary(s);
                     r["instance"] = name;
                     r["estimates"] = estimate_to_json(rep);
                     return Outcome{r, std::nullopt, mp.holds && iso.holds && rep.area_bound_holds};
                   }});
  }
  out.push_back({"verify-estimates", "derivative-trend", [c] {
                   std::vector<double> mus{0.1, 0.05, 0.025}, vals;
                   for (double mu : mus)
                     vals.push_back(derivative_smallness(
                         solve_minimal_graph(trend_boundary(mu), solver_config(c.estimates.trend_resolution)).f));
                   bool ok = vals[0] > vals[1] && vals[1] > vals[2] && vals[2] < 0.5 * vals[0];
                   nlohmann::json r{{"instance", "derivative-trend"}, {"mu", mus}, {"c0", vals}, {"decreasing", ok}};
                   return Outcome{r, std::nullopt, ok};
                 }});
  return out;
}

inline std::vector<Instance> sweep_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  const int n = c.sweep.resolution;
  out.push_back({"sweep-perturb", "flat-f", [c, n] {
                   GraphFn zero(Grid2::disc(Circle{}, n));
                   std::vector<SweepRow> rows;
                   bool ok = true;
                   std::size_t violations = 0;
                   for (int k = 0; k < c.sweep.count; ++k) {
                     auto rng = instance_rng(c.seed, 1000 + static_cast<std::uint64_t>(k));
                     std::uniform_real_distribution<double> u(0.0, 1.0);
                     double th = 2 * std::numbers::pi * u(rng);
                     Vec2 q = 0.009 * u(rng) * detail::unit(th);
                     double r = 0.1 + 0.2 * u(rng);
                     auto g = Grid2::annulus(Circle{}, Circle{q, r}, n);
                     auto [h, M] = random_perturbation(g, c.sweep.l, rng);
                     PerturbationSpec spec(zero, h, 0.0, c.sweep.l, std::max(c.sweep.l, inner_closeness(h, M)), M);
                     auto rep = perturbation_gap(spec);
                     bool row_ok = rep.cell_violations == 0 && rep.lhs >= rep.energy;
                     violations += rep.cell_violations;
                     ok = ok && row_ok;
                     rows.push_back({{{"k", k}, {"q_x", q.x()}, {"q_y", q.y()}, {"r", r}}, rep.lhs, rep.energy, row_ok});
                   }
                   nlohmann::json j{{"instance", "flat-f"},
                                    {"count", c.sweep.count},
                                    {"l", c.sweep.l},
                                    {"cell_violations", violations},
                                    {"all_hold", ok}};
                   return Outcome{j, sweep_csv(rows), ok};
                 }});
  out.push_back({"sweep-perturb", "minimal-f", [c, n] {
                   std::vector<SweepRow> rows;
                   nlohmann::json cells = nlohmann::json::array();
                   bool ok = true;
                   for (double mu : c.sweep.mu) {
                     auto s = solve_minimal_graph(trend_boundary(mu), solver_config(n));
                     for (double r : c.sweep.r) {
                       auto g = Grid2::annulus(Circle{}, Circle{Vec2(0.003, 0.0), r}, n);
                       auto [h, M] = ring_bump(g, c.sweep.l);
                       double eps = std::max(c.sweep.l, inner_closeness(h, M));
                       auto rep = perturbation_gap(PerturbationSpec(s.f, h, s.mu, c.sweep.l, eps, M));
                       bool finite = std::isfinite(rep.slack_constant);
                       ok = ok && finite;
                       rows.push_back({{{"mu", mu}, {"r", r}}, rep.lhs, rep.energy, rep.lhs >= rep.energy});
                       cells.push_back({{"mu", mu},
                                        {"r", r},
                                        {"lhs", rep.lhs},
                                        {"energy", rep.energy},
                                        {"c0", rep.c0},
                                        {"slack_scale", rep.slack_scale},
                                        {"slack_constant", rep.slack_constant},
                                        {"cell_violations", rep.cell_violations}});
                     }
                   }
                   nlohmann::json j{{"instance", "minimal-f"}, {"l", c.sweep.l}, {"cells", cells}, {"finite", ok}};
                   return Outcome{j, sweep_csv(rows), ok};
                 }});
  out.push_back({"sweep-perturb", "annulus-modes", [] {
                   std::vector<SweepRow> rows;
                   bool ok = true;
                   for (int m = 1; m <= 8; ++m)
                     for (double r0 : {0.05, 0.1, 0.2}) {
                       auto v = annulus_energy_bound(FourierData::mode(m, 1.0), r0);
                       ok = ok && v.holds;
                       rows.push_back({{{"n", m}, {"r0", r0}}, v.lhs, v.rhs, v.holds});
                     }
                   auto one = annulus_energy_bound(FourierData::mode(1, 1.0), 0.1);
                   double closed = std::numbers::pi * (1 - 0.01) / (1 + 0.01);
                   bool match = std::abs(one.lhs - closed) <= 1e-6;
                   nlohmann::json j{{"instance", "annulus-modes"},
                                    {"n1_r01_energy", one.lhs},
                                    {"n1_r01_closed_form", closed},
                                    {"all_hold", ok}};
                   return Outcome{j, sweep_csv(rows), ok && match};
                 }});
  out.push_back({"sweep-perturb", "level-profile", [] {
                   const double delta = 0.1, r0 = 0.25, c = delta * r0 / std::log(r0);
                   ScalarField u{[c](const Vec2& x) { return c * std::log(x.norm()); },
                                 [c](const Vec2& x) -> Vec2 { return c * x / x.squaredNorm(); }};
                   auto v = level_energy_bound(delta, r0, u);
                   double closed = 2 * std::numbers::pi * delta * delta * r0 * r0 / std::abs(std::log(r0));
                   bool ok = v.holds && std::abs(v.lhs - closed) <= 1e-6 && std::abs(v.ratio - 2.0) <= 0.01;
                   nlohmann::json j{{"instance", "level-profile"},
                                    {"delta", delta},
                                    {"r0", r0},
                                    {"energy", v.lhs},
                                    {"closed_form", closed},
                                    {"rhs", v.rhs},
                                    {"ratio", v.ratio}};
                   return Outcome{j, std::nullopt, ok};
                 }});
  return out;
}

struct DetectCheck {
  bool holds = false;
  nlohmann::json json;
};

inline DetectCheck check_bump_transcript(const Transcript& t, int k, double eps) {
  const double R = std::ldexp(1.0, -k);
  auto inv = check_invariants(t);
  bool scale = t.stopped && t.r_e >= R / 2 && t.r_e <= 2 * R;
  bool centre = t.stopped && t.o_e.norm() <= 24 * eps * R;
  DetectCheck c;
  c.holds = scale && centre && inv.holds() && t.closeness_holds && t.origin_holds;
  c.json = {{"stop_scale_within_factor_2", scale}, {"center_within_24_eps_scale", centre}, {"invariants", inv.holds()}};
  return c;
}

inline std::vector<Instance> detect_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  auto config = [c](const TriMesh4& e) {
    ProcessConfig p;
    p.eps = c.detect.eps;
    p.floor = default_floor(e);
    p.search.samples = static_cast<std::size_t>(c.detect.samples);
    p.search.workers = 1;
    return p;
  };
  for (int k : c.detect.k) {
    std::string name = "bump-" + std::to_string(k);
    out.push_back({"detect", name, [c, k, name, config] {
                     auto e = synthetic_bump_mesh(k, c.detect.eps);
                     auto t = run_eps_process(e, reference_pair(), config(e));
                     auto chk = check_bump_transcript(t, k, c.detect.eps);
                     auto j = transcript_to_json(t);
                     j["instance"] = name;
                     j["checks"] = chk.json;
                     return Outcome{j, std::nullopt, chk.holds};
                   }});
  }
  out.push_back({"detect", "exact-pair", [config] {
                   auto e = exact_pair_mesh();
                   auto t = run_eps_process(e, reference_pair(), config(e));
                   auto j = transcript_to_json(t);
                   j["instance"] = "exact-pair";
                   return Outcome{j, std::nullopt, !t.stopped && check_invariants(t).holds()};
                 }});
  return out;
}

inline bool all_rows_hold(const std::vector<InequalityRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.holds; });
}

inline std::vector<Instance> compete_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  for (const char* name : {"flat-pair", "perturbed-pair"}) {
    std::string n = name;
    out.push_back({"compete", n, [n] {
                     const auto& pair = reference_pair();
                     auto e = n == "flat-pair" ? mesh_plane_pair(pair, 1.25, 128) : perturbed_pair_mesh();
                     auto b = build_Q(e, pair);
                     auto j = competitor_to_json(b);
                     j["instance"] = n;
                     return Outcome{j, std::nullopt, all_rows_hold(b.rows) && b.q.continuous};
                   }});
  }
  out.push_back({"compete", "projection-bounds", [] {
                   constexpr double pi = std::numbers::pi;
                   const PlanePair orth = make_plane_pair(pi / 2, pi / 2);
                   auto b = projection_area_lower_bound(mesh_plane_pair(orth, 1.25, 128), orth, Vec4::Zero(), 0.5);
                   const PlanePair p = make_plane_pair(std::acos(0.1), pi / 2);
                   auto s = projection_area_lower_bound(mesh_plane_pair(p, 1.25, 128), p, Vec4::Zero(), 0.5, 0.2);
                   bool attained = std::abs(b.lhs - b.rhs) <= 1e-2;
                   bool strict = s.lhs > s.rhs;
                   nlohmann::json j{{"instance", "projection-bounds"},
                                    {"orthogonal", {{"lhs", b.lhs}, {"rhs", b.rhs}, {"attained", attained}}},
                                    {"xi_0.2", {{"lhs", s.lhs}, {"rhs", s.rhs}, {"strict", strict}}}};
                   return Outcome{j, std::nullopt, attained && b.holds && strict && s.holds};
                 }});
  for (double mu : c.compete.mu) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%g", mu);
    std::string name = "inner-bump-" + std::string(tag);
    out.push_back({"compete", name, [c, mu, name] {
                     const auto& pair = reference_pair();
                     auto e = inner_bump_mesh(mu, c.compete.r_e);
                     // the traces vanish, so the minimal graphs are zero
                     auto traces = competitor_traces(e, pair);
                     SolverConfig sc = solver_config(128);
                     auto f1 = solve_minimal_graph(traces[0], sc).f;
                     auto f2 = solve_minimal_graph(traces[1], sc).f;
                     auto r = final_area_comparison(e, pair, Vec4::Zero(), c.compete.r_e, f1, f2);
                     auto j = report_to_json(r);
                     j["instance"] = name;
                     j["mu"] = mu;
                     return Outcome{j, std::nullopt, r.positive()};
                   }});
  }
  return out;
}

} // namespace detail

inline std::vector<Instance> plan_experiment(const ExperimentConfig& c) {
  std::vector<Instance> out;
  auto add = [&](std::vector<Instance> v) { out.insert(out.end(), v.begin(), v.end()); };
  const bool all = c.command == CommandKind::all;
  if (all || c.command == CommandKind::solve) add(detail::solve_instances(c));
  if (all || c.command == CommandKind::verify_estimates) add(detail::estimate_instances(c));
  if (all || c.command == CommandKind::sweep_perturb) add(detail::sweep_instances(c));
  if (all || c.command == CommandKind::detect) add(detail::detect_instances(c));
  if (all || c.command == CommandKind::compete) add(detail::compete_instances(c));
  return out;
}

struct RunSummary {
  std::size_t instances = 0;
  std::size_t failed = 0;
  bool all_passed() const { return failed == 0; }
};

// Runs every instance on the worker pool; each writes its own reports as it
// finishes. The manifest is written last.
inline RunSummary run_experiment(const ExperimentConfig& c, ReportWriter& writer, unsigned workers = 0) {
  auto plan = plan_experiment(c);
  std::vector<char> ok(plan.size(), 0);
  parallel_for(plan.size(), workers, [&](std::size_t i) {
    const auto& inst = plan[i];
    Outcome o;
    try {
      o = inst.run();
    } catch (const DomainError& e) {
      throw DomainError(inst.command + "/" + inst.name + ": " + e.what());
    }
    o.report["command"] = inst.command;
    o.report["verdict"] = o.verdict;
    o.report["seed"] = c.seed;
    if (o.csv) o.report["csv"] = writer.write_csv(inst.command, *o.csv, o.verdict).file;
    writer.write_json(inst.command, o.report, o.verdict);
    ok[i] = o.verdict;
  });
  writer.write_manifest();
  RunSummary s;
  s.instances = plan.size();
  s.failed = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  return s;
}

} // namespace twoplane
