// twoplane: command-line front end. Exit 0 when every verdict holds, 2 when a
// verdict fails, 1 on bad input.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include <twoplane/experiment.hpp>

using namespace twoplane;

namespace {

unsigned workers_from_env() {
  const char* v = std::getenv("TWOPLANE_WORKERS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0 || n > 1024) throw ConfigError("TWOPLANE_WORKERS: expected an integer in [0, 1024]");
  return static_cast<unsigned>(n);
}

void write_report(const std::string& path, const nlohmann::json& j) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_atomic(p, canonical_json(j));
}

PlanePair pair_from(double a1, double a2) { return make_plane_pair(a1, a2); }

TriMesh4 load_mesh(const std::string& path) { return read_mesh_file(path); }

int verdict_code(bool ok) { return ok ? 0 : 2; }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal graphs, two-plane detection and competitor checks"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a verification campaign and write content-addressed reports");
  std::string run_command = "all", config_path, out_dir = "reports";
  std::optional<std::uint64_t> seed;
  run->add_option("command", run_command, "solve | verify-estimates | sweep-perturb | detect | compete | all");
  run->add_option("--config", config_path, "experiment config (schema twoplane-experiment/1)");
  run->add_option("--seed", seed, "seed; overrides the config");
  run->add_option("--out-dir", out_dir, "report directory");

  // solve
  auto* solve = app.add_subcommand("solve", "solve the minimal graph problem on the unit disc");
  std::string boundary, solve_out, solve_csv;
  int resolution = 128;
  double tol = 1e-8;
  solve->add_option("--boundary", boundary, "CSV theta,u,v; zero boundary when omitted");
  solve->add_option("--resolution", resolution, "lattice steps per radius");
  solve->add_option("--tol", tol, "residual target");
  solve->add_option("--out", solve_out, "graph JSON")->required();
  solve->add_option("--csv", solve_csv, "also write x,y,u,v samples");

  // detect
  auto* detect = app.add_subcommand("detect", "run the stopping-time process on a mesh or point cloud");
  std::string mesh_path, detect_out;
  double alpha1 = 0, alpha2 = 0, eps = 1e-2;
  std::optional<double> floor;
  std::size_t samples = 1024;
  detect->add_option("--mesh", mesh_path, "mesh JSON, or CSV point cloud")->required();
  detect->add_option("--alpha1", alpha1)->required();
  detect->add_option("--alpha2", alpha2)->required();
  detect->add_option("--eps", eps);
  detect->add_option("--floor", floor, "smallest scale; defaults to four shortest edges");
  detect->add_option("--samples", samples, "distance samples per scale");
  detect->add_option("--out", detect_out, "transcript JSON")->required();

  // compete
  auto* compete = app.add_subcommand("compete", "competitor areas and the final comparison");
  std::string compete_out;
  std::vector<double> oe{0, 0, 0, 0};
  double re = 0.25;
  int compete_resolution = 128;
  compete->add_option("--mesh", mesh_path, "mesh JSON")->required();
  compete->add_option("--alpha1", alpha1)->required();
  compete->add_option("--alpha2", alpha2)->required();
  compete->add_option("--oe", oe, "stop centre x,y,z,w")->expected(4)->delimiter(',');
  compete->add_option("--re", re, "stop radius");
  compete->add_option("--resolution", compete_resolution, "solver resolution for the competitor graphs");
  compete->add_option("--out", compete_out, "report JSON")->required();

  // mesh
  auto* mesh = app.add_subcommand("mesh", "write one of the built-in synthetic sets (reference pair 1.2, 1.4)");
  std::string mesh_kind = "bump", mesh_out;
  int mesh_k = 3;
  double mesh_mu = 0.05;
  mesh->add_option("--kind", mesh_kind, "bump | pair | perturbed | inner-bump")
      ->check(CLI::IsMember({"bump", "pair", "perturbed", "inner-bump"}));
  mesh->add_option("--k", mesh_k, "bump scale 2^-k");
  mesh->add_option("--eps", eps, "bump height parameter");
  mesh->add_option("--mu", mesh_mu, "inner bump slope");
  mesh->add_option("--re", re, "inner bump stop radius");
  mesh->add_option("--out", mesh_out, "mesh JSON")->required();

  auto* schema = app.add_subcommand("schema", "print the experiment config schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    unsigned workers = workers_from_env();

    if (*schema) {
      std::cout << experiment_schema().dump(2) << "\n";
      return 0;
    }

    if (*mesh) {
      TriMesh4 m = mesh_kind == "bump"        ? synthetic_bump_mesh(mesh_k, eps)
                   : mesh_kind == "pair"      ? exact_pair_mesh()
                   : mesh_kind == "perturbed" ? perturbed_pair_mesh()
                                              : inner_bump_mesh(mesh_mu, re);
      write_report(mesh_out, mesh_to_json(m));
      std::cout << m.size() << " triangles\n";
      return 0;
    }

    if (*run) {
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = read_experiment_config(config_path);
      if (run->count("command")) cfg.command = parse_command(run_command);
      if (seed) cfg.seed = *seed;
      ReportWriter writer(out_dir);
      auto s = run_experiment(cfg, writer, workers);
      std::cout << command_name(cfg.command) << ": " << s.instances - s.failed << "/" << s.instances
                << " instances passed, reports in " << out_dir << "\n";
      return verdict_code(s.all_passed());
    }

    if (*solve) {
      BoundaryCurve gamma = boundary.empty() ? BoundaryCurve{} : BoundaryCurve::read_csv(boundary);
      SolverConfig sc;
      sc.resolution = resolution;
      sc.tolerance = tol;
      auto s = solve_minimal_graph(gamma, sc);
      auto rep = estimate_report(s);
      bool ok = s.local_minimum && rep.area_bound_holds && verify_max_principle(s.f, gamma).holds &&
                verify_isoperimetric(s.f, gamma).holds;
      nlohmann::json nodes = nlohmann::json::array();
      for (std::size_t p = 0; p < s.f.grid().size(); ++p) {
        const Vec2& x = s.f.grid().nodes()[p].x;
        nodes.push_back({x.x(), x.y(), s.f[p].x(), s.f[p].y()});
      }
      nlohmann::json j{{"header", graph_header(s.f.grid())},
                       {"area", s.area},
                       {"residual", s.residual},
                       {"iterations", s.iterations},
                       {"estimates", estimate_to_json(rep)},
                       {"nodes", nodes},
                       {"verdict", ok}};
      write_report(solve_out, j);
      if (!solve_csv.empty()) {
        std::ostringstream csv;
        write_graph_csv(csv, s.f);
        write_atomic(solve_csv, csv.str());
      }
      std::cout << "area " << s.area << ", residual " << s.residual << "\n";
      return verdict_code(ok);
    }

    if (*detect) {
      PlanePair pair = pair_from(alpha1, alpha2);
      ProcessConfig pc;
      pc.eps = eps;
      pc.search.samples = samples;
      pc.search.workers = workers;
      Transcript t;
      if (mesh_path.size() >= 4 && mesh_path.substr(mesh_path.size() - 4) == ".csv") {
        if (!floor) throw ConfigError("--floor: required for point clouds");
        pc.floor = *floor;
        t = run_eps_process(read_point_cloud_csv(mesh_path), pair, pc);
      } else {
        auto e = load_mesh(mesh_path);
        pc.floor = floor.value_or(default_floor(e));
        t = run_eps_process(e, pair, pc);
      }
      bool ok = check_invariants(t).holds() && (!t.stopped || (t.closeness_holds && t.origin_holds));
      write_report(detect_out, transcript_to_json(t));
      if (t.stopped)
        std::cout << "stopped at r_E = " << t.r_e << "\n";
      else
        std::cout << "no stop above the floor " << t.floor << "\n";
      return verdict_code(ok);
    }

    if (*compete) {
      PlanePair pair = pair_from(alpha1, alpha2);
      auto e = load_mesh(mesh_path);
      Vec4 o(oe[0], oe[1], oe[2], oe[3]);
      auto q = build_Q(e, pair);
      auto traces = competitor_traces(e, pair);
      SolverConfig sc;
      sc.resolution = compete_resolution;
      auto f1 = solve_minimal_graph(traces[0], sc).f;
      auto f2 = solve_minimal_graph(traces[1], sc).f;
      auto r = final_area_comparison(e, pair, o, re, f1, f2);
      bool ok = detail::all_rows_hold(q.rows) && detail::all_rows_hold(r.rows);
      write_report(compete_out, {{"competitor", competitor_to_json(q)}, {"final", report_to_json(r)}, {"verdict", ok}});
      std::cout << "gap " << r.gap << " (quadrature tolerance " << r.quadrature_tolerance << ")\n";
      return verdict_code(ok);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
