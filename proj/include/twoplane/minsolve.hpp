#pragma once

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>

#include <random>

#include "graphsurf.hpp"

namespace twoplane {

struct SolverConfig {
  int resolution = 128;           // lattice steps per radius
  double switch_threshold = 1e-2; // descent until the residual drops below this
  double tolerance = 1e-8;        // residual sup-norm target
  int max_iterations = 200;
  double damping = 1.0;           // first trial step of the descent phase
  double mu_limit = 0.3;
  Circle domain{};
  int probe_directions = 20;
  double probe_step = 1e-4;
  std::uint64_t probe_seed = 1;

  void validate() const {
    if (resolution < 16) throw DomainError("SolverConfig: resolution must be at least 16");
    if (!(tolerance > 0)) throw DomainError("SolverConfig: tolerance must be positive");
    if (!(damping > 0 && damping <= 1)) throw DomainError("SolverConfig: damping must lie in (0, 1]");
    if (max_iterations < 1) throw DomainError("SolverConfig: max_iterations must be positive");
    if (!(switch_threshold > 0)) throw DomainError("SolverConfig: switch threshold must be positive");
  }
};

struct SolveResult {
  GraphFn f;
  BoundaryCurve gamma;
  double mu = 0.0;
  double area = 0.0;
  double residual = 0.0;  // sup over free nodes
  int iterations = 0;
  std::vector<IterationRecord> history;
  bool local_minimum = false;
};

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Cholesky = Eigen::CholmodSupernodalLLT<SpMat>;

struct FreeIndex {
  std::vector<int> id;  // node -> free index or -1
  std::vector<std::uint32_t> node;
};

inline FreeIndex free_index(const Grid2& g) {
  FreeIndex fi;
  fi.id.assign(g.size(), -1);
  for (std::size_t p = 0; p < g.size(); ++p)
    if (!g.nodes()[p].is_boundary()) {
      fi.id[p] = static_cast<int>(fi.node.size());
      fi.node.push_back(static_cast<std::uint32_t>(p));
    }
  return fi;
}

// P1 stiffness on free nodes plus the free-boundary coupling.
inline std::pair<SpMat, SpMat> stiffness(const Grid2& g, const FreeIndex& fi) {
  std::vector<Eigen::Triplet<double>> kff, kfb;
  for (std::size_t t = 0; t < g.triangles().size(); ++t) {
    const auto& tr = g.triangles()[t];
    const auto& b = g.basis(t);
    for (int a = 0; a < 3; ++a) {
      int ia = fi.id[tr[a]];
      if (ia < 0) continue;
      for (int c = 0; c < 3; ++c) {
        double v = g.area(t) * b[a].dot(b[c]);
        int ic = fi.id[tr[c]];
        if (ic >= 0)
          kff.emplace_back(ia, ic, v);
        else
          kfb.emplace_back(ia, static_cast<int>(tr[c]), v);
      }
    }
  }
  SpMat A(static_cast<Eigen::Index>(fi.node.size()), static_cast<Eigen::Index>(fi.node.size()));
  A.setFromTriplets(kff.begin(), kff.end());
  SpMat B(static_cast<Eigen::Index>(fi.node.size()), static_cast<Eigen::Index>(g.size()));
  B.setFromTriplets(kfb.begin(), kfb.end());
  return {A, B};
}

// Second variation of the discrete area on the free dofs (2k, 2k+1) = (u, v).
inline SpMat area_hessian(const GraphFn& f, const FreeIndex& fi) {
  const Grid2& g = f.grid();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.triangles().size() * 36);
  for (std::size_t t = 0; t < g.triangles().size(); ++t) {
    const auto& tr = g.triangles()[t];
    const auto& b = g.basis(t);
    Mat4 H = integrand_hessian(f.triangle_gradient(t));
    Eigen::Matrix<double, 4, 6> B = Eigen::Matrix<double, 4, 6>::Zero();
    for (int k = 0; k < 3; ++k) {
      B(0, 2 * k) = b[k].x();
      B(1, 2 * k) = b[k].y();
      B(2, 2 * k + 1) = b[k].x();
      B(3, 2 * k + 1) = b[k].y();
    }
    Eigen::Matrix<double, 6, 6> K = g.area(t) * B.transpose() * H * B;
    for (int a = 0; a < 6; ++a) {
      int ia = fi.id[tr[a / 2]];
      if (ia < 0) continue;
      for (int c = 0; c < 6; ++c) {
        int ic = fi.id[tr[c / 2]];
        if (ic < 0) continue;
        trip.emplace_back(2 * ia + a % 2, 2 * ic + c % 2, K(a, c));
      }
    }
  }
  SpMat A(2 * static_cast<Eigen::Index>(fi.node.size()), 2 * static_cast<Eigen::Index>(fi.node.size()));
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

inline Eigen::VectorXd free_gradient(const GraphFn& f, const FreeIndex& fi) {
  auto g = area_gradient(f);
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(fi.node.size()));
  for (std::size_t k = 0; k < fi.node.size(); ++k) {
    out(2 * k) = g[fi.node[k]].x();
    out(2 * k + 1) = g[fi.node[k]].y();
  }
  return out;
}

inline void add_step(GraphFn& f, const FreeIndex& fi, const Eigen::VectorXd& d, double t) {
  for (std::size_t k = 0; k < fi.node.size(); ++k) f[fi.node[k]] += t * Vec2(d(2 * k), d(2 * k + 1));
}

} // namespace detail

// Componentwise discrete harmonic extension of the boundary values already stored in f.
inline GraphFn harmonic_extension(GraphFn f) {
  const Grid2& g = f.grid();
  auto fi = detail::free_index(g);
  if (fi.node.empty()) return f;
  auto [K, Kb] = detail::stiffness(g, fi);
  Eigen::MatrixXd ub(static_cast<Eigen::Index>(g.size()), 2);
  for (std::size_t p = 0; p < g.size(); ++p) ub.row(p) = g.nodes()[p].is_boundary() ? f[p].transpose() : Eigen::RowVector2d(0, 0);
  Eigen::MatrixXd rhs = -(Kb * ub);
  detail::Cholesky llt(K);
  if (llt.info() != Eigen::Success) throw DomainError("harmonic_extension: stiffness factorization failed");
  Eigen::MatrixXd u = llt.solve(rhs);
  for (std::size_t k = 0; k < fi.node.size(); ++k) f[fi.node[k]] = u.row(k).transpose();
  return f;
}

namespace detail {

// Smooth perturbation vanishing on the outer circle.
inline GraphFn probe_direction(const GridPtr& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<double, 12> c;
  for (auto& v : c) v = u(rng);
  const Circle& D = grid->outer();
  GraphFn phi = GraphFn::sample(grid, [&](const Vec2& x) {
    Vec2 y = (x - D.center) / D.radius;
    double cut = std::max(0.0, 1.0 - y.squaredNorm());
    double m[6] = {1.0, y.x(), y.y(), y.x() * y.x(), y.x() * y.y(), y.y() * y.y()};
    Vec2 s(0, 0);
    for (int k = 0; k < 6; ++k) s += Vec2(c[k] * m[k], c[6 + k] * m[k]);
    return Vec2(cut * s);
  });
  for (std::size_t p = 0; p < grid->size(); ++p)
    if (grid->nodes()[p].is_boundary()) phi[p] = Vec2::Zero();
  return phi;
}

} // namespace detail

// Area must not drop along +-step*phi for smooth zero-boundary directions phi.
inline bool probe_local_minimum(const GraphFn& f, int directions, double step, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double a0 = graph_area(f);
  for (int k = 0; k < directions; ++k) {
    GraphFn phi = detail::probe_direction(f.grid_ptr(), rng);
    for (double s : {step, -step}) {
      GraphFn g = f;
      for (std::size_t p = 0; p < g.grid().size(); ++p) g[p] += s * phi[p];
      if (graph_area(g) < a0 - 1e-13 * a0) return false;
    }
  }
  return true;
}

// Dirichlet problem for the minimal graph system on the configured disc.
inline SolveResult solve_minimal_graph(const BoundaryCurve& gamma, const SolverConfig& cfg,
                                       const GraphFn* initial = nullptr) {
  cfg.validate();
  SolveResult out;
  out.gamma = gamma;
  out.mu = gamma.mu(cfg.domain.radius);
  if (out.mu > cfg.mu_limit)
    throw DomainError("solve_minimal_graph: boundary size mu = " + std::to_string(out.mu) + " exceeds " +
                      std::to_string(cfg.mu_limit));

  GraphFn f;
  if (initial) {
    f = *initial;
    f.impose(gamma);
  } else {
    f = GraphFn(Grid2::disc(cfg.domain, cfg.resolution));
    f.impose(gamma);
    f = harmonic_extension(std::move(f));
  }
  const Grid2& g = f.grid();
  auto fi = detail::free_index(g);
  auto [K, Kb] = detail::stiffness(g, fi);
  std::unique_ptr<detail::Cholesky> pre;
  std::unique_ptr<detail::Cholesky> newton;

  using Phase = IterationRecord::Phase;
  double area = graph_area(f);
  double res = first_variation_residual(f).sup_free;
  out.history.push_back({Phase::start, res, area});

  auto descent = [&]() {
    if (!pre) {
      pre = std::make_unique<detail::Cholesky>(K);
      if (pre->info() != Eigen::Success) throw DomainError("solve_minimal_graph: stiffness factorization failed");
    }
    Eigen::VectorXd gr = detail::free_gradient(f, fi);
    Eigen::MatrixXd G(static_cast<Eigen::Index>(fi.node.size()), 2);
    for (std::size_t k = 0; k < fi.node.size(); ++k) G.row(k) << gr(2 * k), gr(2 * k + 1);
    Eigen::MatrixXd D = -pre->solve(G);
    Eigen::VectorXd d(gr.size());
    for (std::size_t k = 0; k < fi.node.size(); ++k) {
      d(2 * k) = D(k, 0);
      d(2 * k + 1) = D(k, 1);
    }
    double slope = gr.dot(d);
    double t = cfg.damping;
    for (int back = 0; back < 60; ++back, t *= 0.5) {
      GraphFn trial = f;
      detail::add_step(trial, fi, d, t);
      double a = graph_area(trial);
      if (a <= area + 1e-4 * t * slope) {
        f = std::move(trial);
        area = a;
        return true;
      }
    }
    return false;
  };

  auto newton_step = [&]() {
    detail::SpMat H = detail::area_hessian(f, fi);
    if (!newton) {
      newton = std::make_unique<detail::Cholesky>();
      newton->analyzePattern(H);
    }
    newton->factorize(H);
    if (newton->info() != Eigen::Success) return false;
    Eigen::VectorXd gr = detail::free_gradient(f, fi);
    Eigen::VectorXd d = -newton->solve(gr);
    GraphFn trial = f;
    detail::add_step(trial, fi, d, 1.0);
    double r = first_variation_residual(trial).sup_free;
    if (!(r < res)) return false;
    f = std::move(trial);
    area = graph_area(f);
    return true;
  };

  int it = 0;
  while (res > cfg.tolerance) {
    if (it >= cfg.max_iterations)
      throw ConvergenceError("solve_minimal_graph: no convergence after " + std::to_string(it) + " iterations",
                             out.history);
    Phase phase = Phase::newton;
    bool ok = res < cfg.switch_threshold && newton_step();
    if (!ok) {
      phase = Phase::descent;
      if (!descent())
        throw ConvergenceError("solve_minimal_graph: line search failed at residual " + std::to_string(res),
                               out.history);
    }
    ++it;
    res = first_variation_residual(f).sup_free;
    out.history.push_back({phase, res, area});
  }
  out.iterations = it;
  out.residual = res;
  out.area = area;
  out.local_minimum = probe_local_minimum(f, cfg.probe_directions, cfg.probe_step, cfg.probe_seed);
  if (!out.local_minimum) throw ConvergenceError("solve_minimal_graph: converged point is not a local minimum", out.history);
  out.f = std::move(f);
  return out;
}

// Frobenius sup norms of the derivative tensors of orders 0..max_order over
// the lattice nodes in B(center, radius), by centered differences.
inline std::vector<double> derivative_sup_norms(const GraphFn& f, double radius, int max_order) {
  const Grid2& g = f.grid();
  if (max_order < 0 || max_order > 3) throw DomainError("derivative_sup_norms: order must lie in 0..3");
  if (!(radius > 0) || !(radius < g.outer().radius)) throw DomainError("derivative_sup_norms: radius outside the domain");
  const double h = g.h();
  if (radius + 3 * h >= g.outer().radius || g.resolution() < 8)
    throw DomainError("derivative_sup_norms: grid too coarse for the difference stencils");
  std::vector<double> out(max_order + 1, 0.0);
  auto at = [&](int i, int j) -> const Vec2& {
    int k = g.lattice_node(i, j);
    if (k < 0 || g.nodes()[k].is_boundary()) throw DomainError("derivative_sup_norms: stencil leaves the grid");
    return f[k];
  };
  const int reach = static_cast<int>(std::ceil(radius / h)) + 1;
  for (int j = -reach; j <= reach; ++j)
    for (int i = -reach; i <= reach; ++i) {
      Vec2 x = g.lattice_point(i, j);
      if ((x - g.outer().center).norm() > radius + 1e-12) continue;
      Vec2 f0 = at(i, j);
      out[0] = std::max(out[0], f0.norm());
      if (max_order >= 1) {
        Vec2 fx = (at(i + 1, j) - at(i - 1, j)) / (2 * h);
        Vec2 fy = (at(i, j + 1) - at(i, j - 1)) / (2 * h);
        out[1] = std::max(out[1], std::sqrt(fx.squaredNorm() + fy.squaredNorm()));
      }
      if (max_order >= 2) {
        Vec2 fxx = (at(i + 1, j) - 2 * f0 + at(i - 1, j)) / (h * h);
        Vec2 fyy = (at(i, j + 1) - 2 * f0 + at(i, j - 1)) / (h * h);
        Vec2 fxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * h * h);
        out[2] = std::max(out[2], std::sqrt(fxx.squaredNorm() + 2 * fxy.squaredNorm() + fyy.squaredNorm()));
      }
      if (max_order >= 3) {
        double h3 = 2 * h * h * h;
        Vec2 fxxx = (at(i + 2, j) - 2 * at(i + 1, j) + 2 * at(i - 1, j) - at(i - 2, j)) / h3;
        Vec2 fyyy = (at(i, j + 2) - 2 * at(i, j + 1) + 2 * at(i, j - 1) - at(i, j - 2)) / h3;
        Vec2 fxxy = ((at(i + 1, j + 1) - 2 * at(i, j + 1) + at(i - 1, j + 1)) -
                     (at(i + 1, j - 1) - 2 * at(i, j - 1) + at(i - 1, j - 1))) / h3;
        Vec2 fxyy = ((at(i + 1, j + 1) - 2 * at(i + 1, j) + at(i + 1, j - 1)) -
                     (at(i - 1, j + 1) - 2 * at(i - 1, j) + at(i - 1, j - 1))) / h3;
        out[3] = std::max(out[3], std::sqrt(fxxx.squaredNorm() + 3 * fxxy.squaredNorm() + 3 * fxyy.squaredNorm() +
                                            fyyy.squaredNorm()));
      }
    }
  return out;
}

struct MaxPrincipleVerdict {
  double interior_sup = 0.0;
  double boundary_sup = 0.0;
  double slack = 0.0;  // 2 h^2
  bool holds = false;
};

inline MaxPrincipleVerdict verify_max_principle(const GraphFn& f, const BoundaryCurve& gamma) {
  MaxPrincipleVerdict v;
  const Grid2& g = f.grid();
  v.boundary_sup = gamma.sup();
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.nodes()[p].is_boundary())
      v.boundary_sup = std::max(v.boundary_sup, f[p].norm());
    else
      v.interior_sup = std::max(v.interior_sup, f[p].norm());
  }
  v.slack = 2 * g.h() * g.h();
  v.holds = v.interior_sup <= v.boundary_sup + v.slack;
  return v;
}

struct IsoperimetricVerdict {
  double lhs = 0.0;  // 4 pi area
  double rhs = 0.0;  // squared length of the boundary space curve
  double length = 0.0;
  double length_bound = 0.0;  // 2 pi R (1 + mu^2)
  bool holds = false;
  bool length_bound_holds = false;
};

inline IsoperimetricVerdict verify_isoperimetric(const GraphFn& f, const BoundaryCurve& gamma) {
  IsoperimetricVerdict v;
  double R = f.grid().outer().radius;
  v.lhs = 4 * std::numbers::pi * graph_area(f);
  v.length = gamma.space_curve_length(R);
  v.rhs = v.length * v.length;
  v.holds = v.lhs <= v.rhs * (1 + 1e-3);
  double mu = gamma.mu(R);
  v.length_bound = 2 * std::numbers::pi * R * (1 + mu * mu);
  v.length_bound_holds = v.length <= v.length_bound * (1 + 1e-12);
  return v;
}

struct EstimateReport {
  double mu = 0.0;
  std::vector<double> sup_norms;  // orders 0..3 on B(0, 3/4)
  MaxPrincipleVerdict max_principle;
  IsoperimetricVerdict isoperimetric;
  double boundary_length = 0.0;
  double area = 0.0;
  double area_bound = 0.0;  // (1 + mu^2)^2 pi R^2
  bool area_bound_holds = false;
};

inline EstimateReport estimate_report(const SolveResult& s, double radius = 0.75) {
  EstimateReport r;
  double R = s.f.grid().outer().radius;
  r.mu = s.mu;
  r.sup_norms = derivative_sup_norms(s.f, radius * R, 3);
  r.max_principle = verify_max_principle(s.f, s.gamma);
  r.isoperimetric = verify_isoperimetric(s.f, s.gamma);
  r.boundary_length = r.isoperimetric.length;
  r.area = s.area;
  r.area_bound = std::pow(1 + s.mu * s.mu, 2) * std::numbers::pi * R * R;
  r.area_bound_holds = r.area <= r.area_bound + 1e-3;
  return r;
}

inline nlohmann::json estimate_to_json(const EstimateReport& r) {
  return {{"mu", r.mu},
          {"sup_norms", r.sup_norms},
          {"max_principle",
           {{"interior_sup", r.max_principle.interior_sup},
            {"boundary_sup", r.max_principle.boundary_sup},
            {"slack", r.max_principle.slack},
            {"holds", r.max_principle.holds}}},
          {"isoperimetric",
           {{"lhs", r.isoperimetric.lhs},
            {"rhs", r.isoperimetric.rhs},
            {"holds", r.isoperimetric.holds},
            {"length_bound", r.isoperimetric.length_bound},
            {"length_bound_holds", r.isoperimetric.length_bound_holds}}},
          {"boundary_length", r.boundary_length},
          {"area", r.area},
          {"area_bound", r.area_bound},
          {"area_bound_holds", r.area_bound_holds}};
}

} // namespace twoplane
