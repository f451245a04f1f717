// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <twoplane/experiment.hpp>

using namespace twoplane;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

namespace {

int failures = 0;

class Stopwatch {
public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void report(int n, bool ok, const std::string& what) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what << std::endl;
  if (!ok) ++failures;
}

template <class F>
void criterion(int n, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

SolverConfig solver(int n) {
  SolverConfig c;
  c.resolution = n;
  return c;
}

// Shared by criteria 3, 4 and 5.
struct RandomSolve {
  BoundaryCurve gamma;
  SolveResult result;
};

std::vector<RandomSolve> random_solves() {
  std::vector<RandomSolve> out;
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto rng = detail::instance_rng(2024, k);
    std::uniform_real_distribution<double> u(0.02, 0.1);
    double mu = u(rng);
    auto gamma = random_boundary(rng, mu);
    out.push_back({gamma, solve_minimal_graph(gamma, solver(64))});
  }
  return out;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

} // namespace

int main() {
  criterion(1, [] {
    Stopwatch w;
    auto s = solve_minimal_graph(BoundaryCurve{}, solver(128));
    double t = w.seconds(), sup = s.f.sup_norm();
    bool ok = sup <= 1e-8 && std::abs(s.area - pi) <= 1e-3 && t < 10;
    report(1, ok, "flat solve at 128: sup|f| " + fmt(sup) + ", area - pi " + fmt(s.area - pi) + ", " + fmt(t) + " s");
  });

  criterion(2, [] {
    std::vector<double> err, h;
    bool bounded = true, variation = true;
    double t256 = 0;
    for (int n : {64, 128, 256}) {
      Stopwatch w;
      auto s = solve_minimal_graph(holomorphic_boundary(), solver(n));
      if (n == 256) t256 = w.seconds();
      const Grid2& g = s.f.grid();
      double e = 0;
      for (std::size_t p = 0; p < g.size(); ++p) {
        const Vec2& x = g.nodes()[p].x;
        e = std::max(e, (s.f[p] - Vec2(x.x() * x.x() - x.y() * x.y(), 2 * x.x() * x.y()) / 10).norm());
      }
      err.push_back(e);
      h.push_back(g.h());
      bounded = bounded && e <= 5 * g.h() * g.h();
      auto analytic = GraphFn::sample(s.f.grid_ptr(), [](const Vec2& x) -> Vec2 {
        return Vec2(x.x() * x.x() - x.y() * x.y(), 2 * x.x() * x.y()) / 10;
      });
      variation = variation && first_variation_residual(analytic).sup_regular <= 10 * g.h() * g.h();
    }
    double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
    bool ok = bounded && variation && o1 >= 1.9 && o2 >= 1.9 && t256 < 120;
    report(2, ok,
           "z^2/10 errors " + fmt(err[0]) + ", " + fmt(err[1]) + ", " + fmt(err[2]) + " (within 5h^2: " +
               (bounded ? "yes" : "no") + "), orders " + fmt(o1) + ", " + fmt(o2) + ", analytic residual within 10h^2: " +
               (variation ? "yes" : "no") + ", " + fmt(t256) + " s at 256");
  });

  std::vector<RandomSolve> solves;
  criterion(3, [&] {
    solves = random_solves();
    int held = 0;
    double worst = -1e300;
    for (const auto& s : solves) {
      auto v = verify_max_principle(s.result.f, s.gamma);
      held += v.holds;
      worst = std::max(worst, v.interior_sup - v.boundary_sup);
    }
    report(3, held == 20, "maximum principle on " + std::to_string(held) + "/20 random boundaries, worst interior excess " + fmt(worst));
  });

  criterion(4, [&] {
    if (solves.empty()) solves = random_solves();
    int held = 0;
    double worst = 0;
    for (const auto& s : solves) {
      auto v = verify_isoperimetric(s.result.f, s.gamma);
      bool ok = v.lhs <= v.rhs * (1 + 1e-3);
      held += ok;
      worst = std::max(worst, v.lhs / v.rhs);
    }
    auto flat = solve_minimal_graph(BoundaryCurve{}, solver(128));
    auto fv = verify_isoperimetric(flat.f, flat.gamma);
    double eq = std::abs(fv.lhs / fv.rhs - 1);
    report(4, held == 20 && eq <= 1e-3,
           "4 pi area <= |gamma|^2 on " + std::to_string(held) + "/20 (worst ratio " + fmt(worst) + "), flat equality defect " +
               fmt(eq));
  });

  criterion(5, [&] {
    if (solves.empty()) solves = random_solves();
    int held = 0, total = 0;
    double worst = -1e300;
    auto check = [&](const SolveResult& s) {
      double bound = (1 + s.mu * s.mu) * (1 + s.mu * s.mu) * pi + 1e-3;
      ++total;
      held += s.area <= bound;
      worst = std::max(worst, s.area - bound);
    };
    for (const auto& s : solves) check(s.result);
    check(solve_minimal_graph(BoundaryCurve{}, solver(128)));
    check(solve_minimal_graph(holomorphic_boundary(), solver(128)));
    report(5, held == total,
           "area <= (1+mu^2)^2 pi + 1e-3 on " + std::to_string(held) + "/" + std::to_string(total) + " solves, worst margin " +
               fmt(worst));
  });

  criterion(6, [] {
    std::vector<double> v;
    for (double mu : {0.1, 0.05, 0.025}) v.push_back(derivative_smallness(solve_minimal_graph(trend_boundary(mu), solver(64)).f));
    bool ok = v[0] > v[1] && v[1] > v[2] && v[2] < 0.5 * v[0];
    report(6, ok, "max derivative norms on B(0,3/4): " + fmt(v[0]) + ", " + fmt(v[1]) + ", " + fmt(v[2]));
  });

  criterion(7, [] {
    GraphFn zero(Grid2::disc(Circle{}, 64));
    int held = 0;
    std::size_t violations = 0;
    const double l = 1e-4;
    for (std::uint64_t k = 0; k < 50; ++k) {
      auto rng = detail::instance_rng(77, k);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Vec2 q = 0.009 * u(rng) * detail::unit(2 * pi * u(rng));
      double r = 0.1 + 0.2 * u(rng);
      auto g = Grid2::annulus(Circle{}, Circle{q, r}, 64);
      auto [h, M] = random_perturbation(g, l, rng);
      auto rep = perturbation_gap(PerturbationSpec(zero, h, 0.0, l, std::max(l, inner_closeness(h, M)), M));
      violations += rep.cell_violations;
      held += rep.cell_violations == 0 && rep.lhs >= rep.energy;
    }
    std::ostringstream sweep;
    bool finite = true;
    for (double mu : {0.05, 0.025, 0.0125}) {
      auto s = solve_minimal_graph(trend_boundary(mu), solver(64));
      for (double r : {0.1, 0.15, 0.2}) {
        auto g = Grid2::annulus(Circle{}, Circle{Vec2(0.003, 0.0), r}, 64);
        auto [h, M] = ring_bump(g, l);
        auto rep = perturbation_gap(PerturbationSpec(s.f, h, s.mu, l, std::max(l, inner_closeness(h, M)), M));
        finite = finite && std::isfinite(rep.slack_constant);
        sweep << " (" << mu << "," << r << "):" << fmt(rep.slack_constant);
      }
    }
    report(7, held == 50 && violations == 0 && finite,
           "flat f: " + std::to_string(held) + "/50 with no cell below a quarter of the energy; minimal f slack C" + sweep.str());
  });

  criterion(8, [] {
    int held = 0;
    for (int n = 1; n <= 8; ++n)
      for (double r0 : {0.05, 0.1, 0.2}) held += annulus_energy_bound(FourierData::mode(n, 1.0), r0).holds;
    double e = annulus_energy_bound(FourierData::mode(1, 1.0), 0.1).lhs;
    double closed = pi * (1 - 0.01) / (1 + 0.01);
    bool ok = held == 24 && std::abs(e - closed) <= 1e-6;
    report(8, ok, std::to_string(held) + "/24 mode bounds hold; n=1, r0=0.1 energy " + fmt(e) + " vs " + fmt(closed));
  });

  criterion(9, [] {
    const double delta = 0.1, r0 = 0.25, c = delta * r0 / std::log(r0);
    ScalarField u{[c](const Vec2& x) { return c * std::log(x.norm()); },
                  [c](const Vec2& x) -> Vec2 { return c * x / x.squaredNorm(); }};
    auto v = level_energy_bound(delta, r0, u);
    double closed = 2 * pi * delta * delta * r0 * r0 / std::abs(std::log(r0));
    bool ok = std::abs(v.lhs - closed) <= 1e-6 && std::abs(v.lhs - 2.8326e-3) <= 1e-6 && v.holds &&
              std::abs(v.ratio - 2.0) <= 0.01;
    report(9, ok, "log profile energy " + fmt(v.lhs) + " (closed form " + fmt(closed) + "), ratio " + fmt(v.ratio));
  });

  criterion(10, [] {
    const double eps = 1e-2;
    bool ok = true;
    std::ostringstream msg;
    auto config = [eps](const TriMesh4& e) {
      ProcessConfig p;
      p.eps = eps;
      p.floor = default_floor(e);
      p.search.samples = 4096;
      return p;
    };
    for (int k : {3, 5, 7}) {
      auto e = synthetic_bump_mesh(k, eps);
      Stopwatch w;
      auto t = run_eps_process(e, reference_pair(), config(e));
      double secs = w.seconds();
      auto chk = detail::check_bump_transcript(t, k, eps);
      ok = ok && chk.holds && secs < 60;
      msg << "k=" << k << ": r_E " << t.r_e << ", |o_E| " << fmt(t.o_e.norm()) << ", " << fmt(secs) << " s; ";
    }
    auto e = exact_pair_mesh();
    Stopwatch w;
    auto t = run_eps_process(e, reference_pair(), config(e));
    double secs = w.seconds();
    ok = ok && !t.stopped && check_invariants(t).holds() && secs < 60;
    msg << "exact pair " << (t.stopped ? "stopped" : "exhausted") << " in " << fmt(secs) << " s";
    report(10, ok, msg.str());
  });

  criterion(11, [] {
    bool ok = true;
    std::ostringstream msg;
    for (int which = 0; which < 2; ++which) {
      auto e = which == 0 ? mesh_plane_pair(reference_pair(), 1.25, 128) : perturbed_pair_mesh();
      auto b = build_Q(e, reference_pair());
      msg << (which == 0 ? "plane pair:" : "; perturbed:");
      for (const auto& r : b.rows) {
        ok = ok && r.holds;
        msg << " " << r.tag << " " << fmt(r.lhs) << (r.holds ? " ok" : " FAILS") << " vs " << fmt(r.rhs);
      }
    }
    report(11, ok, msg.str());
  });

  criterion(12, [] {
    const PlanePair orth = make_plane_pair(pi / 2, pi / 2);
    auto b = projection_area_lower_bound(mesh_plane_pair(orth, 1.25, 128), orth, Vec4::Zero(), 0.5);
    const PlanePair p = make_plane_pair(std::acos(0.1), pi / 2);
    auto s = projection_area_lower_bound(mesh_plane_pair(p, 1.25, 128), p, Vec4::Zero(), 0.5, 0.2);
    bool ok = std::abs(b.lhs - 2 * pi) <= 1e-2 && s.lhs > s.rhs;
    report(12, ok, "orthogonal " + fmt(b.lhs) + " vs 2 pi; xi = 0.2: " + fmt(s.lhs) + " > " + fmt(s.rhs));
  });

  criterion(13, [] {
    auto base = fs::temp_directory_path() / "twoplane-acceptance";
    fs::remove_all(base);
    std::vector<int> codes;
    for (const char* run : {"a", "b"}) {
      std::string cmd = std::string(TWOPLANE_CLI_PATH) + " run all --seed 7 --out-dir " + (base / run).string() + " > /dev/null";
      int status = std::system(cmd.c_str());
      codes.push_back(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
    }
    auto a = read_tree(base / "a"), b = read_tree(base / "b");
    bool same = !a.empty() && a == b;
    report(13, same, "run all --seed 7 twice: " + std::to_string(a.size()) + " files, " + (same ? "byte-identical" : "different") +
                         ", exit codes " + std::to_string(codes[0]) + " and " + std::to_string(codes[1]));
  });

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
