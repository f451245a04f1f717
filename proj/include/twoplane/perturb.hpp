#pragma once

#include <random>

#include "minsolve.hpp"

namespace twoplane {

// Whether 1 + x >= (1 + x/2 - x^2/4)^2. The gap is x^2 (1 + x - x^2/4) / 4, so
// this holds for 2 - 2 sqrt 2 <= x < 1 and fails below.
inline bool sqrt_bound_check(double x) {
  if (!(std::abs(x) < 1.0)) throw DomainError("sqrt_bound_check: |x| must be below 1");
  double y = 1.0 + x / 2 - x * x / 4;
  return 1.0 + x >= y * y - 4 * std::numeric_limits<double>::epsilon();
}

// A C^1 scalar function given with its gradient.
struct ScalarField {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;

  // P1 component of a grid function; gradients are the triangle gradients.
  static ScalarField from_graph(const GraphFn& f, int component) {
    if (component != 0 && component != 1) throw DomainError("ScalarField: component must be 0 or 1");
    auto g = std::make_shared<GraphFn>(f);
    return {[g, component](const Vec2& x) { return g->evaluate(x)[component]; },
            [g, component](const Vec2& x) -> Vec2 {
              auto loc = g->grid().locate(x);
              if (!loc) throw DomainError("ScalarField: point outside the grid");
              return g->triangle_gradient(loc->first).col(component);
            }};
  }
};

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1 - z * z) * dp * dp);
  }
  return {x, w};
}

inline Vec2 unit(double th) { return Vec2(std::cos(th), std::sin(th)); }

} // namespace detail

inline constexpr int circle_samples = 4096;

// Integral of |grad u|^2 over the disc `outer` minus the disc `inner`, which must
// lie inside it. Polar coordinates about the inner center with a logarithmic
// radial variable; 4 Gauss panels of 24 nodes radially, trapezoid in angle.
inline double dirichlet_energy(const ScalarField& u, const Circle& outer, const Circle& inner,
                               int angular = circle_samples) {
  const Vec2 c = inner.center - outer.center;
  if (c.norm() + inner.radius >= outer.radius) throw DomainError("dirichlet_energy: inner disc must lie inside the outer disc");
  static const auto gl = detail::gauss_legendre(24);
  constexpr int panels = 4;
  std::vector<double> ring(angular);
  for (int j = 0; j < angular; ++j) {
    Vec2 e = detail::unit(2 * std::numbers::pi * j / angular);
    double ce = c.dot(e);
    double rmax = -ce + std::sqrt(ce * ce + outer.radius * outer.radius - c.squaredNorm());
    double L = std::log(rmax / inner.radius), s = 0.0;
    for (int p = 0; p < panels; ++p) {
      double a = L * p / panels, b = L * (p + 1) / panels;
      for (std::size_t k = 0; k < gl.first.size(); ++k) {
        double t = 0.5 * (a + b) + 0.5 * (b - a) * gl.first[k];
        double rho = inner.radius * std::exp(t);
        s += 0.5 * (b - a) * gl.second[k] * u.gradient(inner.center + rho * e).squaredNorm() * rho * rho;
      }
    }
    ring[j] = s;
  }
  return detail::pairwise_sum(ring.data(), ring.size()) * 2 * std::numbers::pi / angular;
}

// Integral of |grad u|^2 for a grid function: exact on each triangle.
// component -1 sums both components.
inline double dirichlet_energy(const GraphFn& u, int component = -1) {
  const Grid2& g = u.grid();
  std::vector<double> terms(g.triangles().size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    Mat2 J = u.triangle_gradient(t);
    terms[t] = g.area(t) * (component < 0 ? J.squaredNorm() : J.col(component).squaredNorm());
  }
  return detail::pairwise_sum(terms.data(), terms.size());
}

// Integral over the circle of |u - mean|^2 by the trapezoid rule; samples are
// equispaced in angle.
inline double circle_variance(const std::vector<double>& samples, double radius) {
  if (samples.empty()) throw DomainError("circle_variance: no samples");
  double m = detail::pairwise_sum(samples.data(), samples.size()) / static_cast<double>(samples.size());
  std::vector<double> d(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) d[j] = (samples[j] - m) * (samples[j] - m);
  return detail::pairwise_sum(d.data(), d.size()) * 2 * std::numbers::pi * radius / static_cast<double>(samples.size());
}

inline std::vector<double> circle_values(const std::function<double(const Vec2&)>& u, const Circle& c,
                                         int n = circle_samples) {
  std::vector<double> v(n);
  for (int j = 0; j < n; ++j) v[j] = u(c.center + c.radius * detail::unit(2 * std::numbers::pi * j / n));
  return v;
}

enum class OuterCondition { free, zero };

// u0 = a0 + sum_n a_n cos n theta + b_n sin n theta on the inner circle.
struct FourierData {
  double a0 = 0.0;
  std::vector<double> a, b;

  double operator()(double th) const {
    double s = a0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * std::cos((k + 1.0) * th) + b[k] * std::sin((k + 1.0) * th);
    return s;
  }
  static FourierData mode(int n, double amplitude) {
    FourierData d;
    if (n == 0) {
      d.a0 = amplitude;
      return d;
    }
    d.a.assign(n, 0.0);
    d.b.assign(n, 0.0);
    d.a[n - 1] = amplitude;
    return d;
  }
};

// Energy of the harmonic extension of u0 from the circle of radius r0 about 0
// to the unit circle, which is either left free or held at zero.
inline double harmonic_extension_energy(const FourierData& u0, double r0, OuterCondition outer) {
  if (!(r0 > 0 && r0 < 1)) throw DomainError("harmonic_extension_energy: r0 must lie in (0, 1)");
  if (u0.a.size() != u0.b.size()) throw DomainError("harmonic_extension_energy: coefficient lists differ in length");
  constexpr double pi = std::numbers::pi;
  double e = outer == OuterCondition::zero ? 2 * pi * u0.a0 * u0.a0 / std::abs(std::log(r0)) : 0.0;
  for (std::size_t k = 0; k < u0.a.size(); ++k) {
    double n = static_cast<double>(k + 1), A2 = u0.a[k] * u0.a[k] + u0.b[k] * u0.b[k];
    double p = std::pow(r0, 2 * n);
    e += outer == OuterCondition::free ? pi * n * A2 * (1 - p) / (1 + p) : pi * n * A2 * (1 + p) / (1 - p);
  }
  return e;
}

// Discrete harmonic extension on an annulus grid of the inner data; the outer
// circle is a natural boundary or held at zero. Returns (u, 0).
inline GraphFn harmonic_extension_scalar(const GridPtr& grid, const std::function<double(const Vec2&)>& inner,
                                         OuterCondition outer) {
  const Grid2& g = *grid;
  if (!g.is_annulus()) throw DomainError("harmonic_extension_scalar: needs an annulus grid");
  GraphFn u(grid);
  std::vector<int> id(g.size(), -1);
  int nfree = 0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto k = g.nodes()[p].boundary;
    if (k == BoundaryKind::inner)
      u[p] = Vec2(inner(g.nodes()[p].x), 0.0);
    else if (k == BoundaryKind::outer && outer == OuterCondition::zero)
      u[p] = Vec2::Zero();
    else
      id[p] = nfree++;
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (std::size_t t = 0; t < g.triangles().size(); ++t) {
    const auto& tr = g.triangles()[t];
    const auto& b = g.basis(t);
    for (int i = 0; i < 3; ++i) {
      if (id[tr[i]] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        double v = g.area(t) * b[i].dot(b[j]);
        if (id[tr[j]] >= 0)
          trip.emplace_back(id[tr[i]], id[tr[j]], v);
        else
          rhs(id[tr[i]]) -= v * u[tr[j]].x();
      }
    }
  }
  detail::SpMat K(nfree, nfree);
  K.setFromTriplets(trip.begin(), trip.end());
  detail::Cholesky llt(K);
  if (llt.info() != Eigen::Success) throw DomainError("harmonic_extension_scalar: factorization failed");
  Eigen::VectorXd x = llt.solve(rhs);
  for (std::size_t p = 0; p < g.size(); ++p)
    if (id[p] >= 0) u[p] = Vec2(x(id[p]), 0.0);
  return u;
}

struct EnergyVerdict {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs, infinite when rhs = 0
  bool holds = false;
};

namespace detail {

inline EnergyVerdict verdict(double lhs, double rhs, double slack) {
  EnergyVerdict v{lhs, rhs, rhs > 0 ? lhs / rhs : std::numeric_limits<double>::infinity(), false};
  v.holds = lhs >= rhs * (1 - slack);
  return v;
}

inline void check_annulus_radius(const Vec2& q, double r0) {
  if (!(r0 > 0) || !(r0 < 0.5 * (1.0 - q.norm())))
    throw DomainError("annulus_energy_bound: r0 must be below half the distance from q to the unit circle");
}

} // namespace detail

// Lower bound for any extension to B(0,1) minus B(q, r0) of the samples u0
// (equispaced in angle on the inner circle). Checks the trace of u against u0.
inline EnergyVerdict annulus_energy_bound(const std::vector<double>& u0, const Vec2& q, double r0, const ScalarField& u) {
  detail::check_annulus_radius(q, r0);
  if (u0.size() < 3) throw DomainError("annulus_energy_bound: need at least 3 boundary samples");
  double scale = 1.0;
  for (double v : u0) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < u0.size(); ++j) {
    Vec2 x = q + r0 * detail::unit(2 * std::numbers::pi * j / u0.size());
    if (std::abs(u.value(x) - u0[j]) > 1e-8 * scale) throw DomainError("annulus_energy_bound: u does not trace u0 on the inner circle");
  }
  double lhs = dirichlet_energy(u, Circle{}, Circle{q, r0});
  double rhs = 0.25 / r0 * circle_variance(u0, r0);
  return detail::verdict(lhs, rhs, 1e-2);
}

// Same bound with the infimum over all extensions in closed form (q = 0).
inline EnergyVerdict annulus_energy_bound(const FourierData& u0, double r0) {
  detail::check_annulus_radius(Vec2::Zero(), r0);
  std::vector<double> s(circle_samples);
  for (int j = 0; j < circle_samples; ++j) s[j] = u0(2 * std::numbers::pi * j / circle_samples);
  double lhs = harmonic_extension_energy(u0, r0, OuterCondition::free);
  return detail::verdict(lhs, 0.25 / r0 * circle_variance(s, r0), 1e-2);
}

struct LevelConfig {
  double c = 100.0;   // C(eps) of the level-set bound
  double eps = 0.5;
};

// Energy floor for functions near delta r0 on |x| = r0 and near 0 on |x| = 1.
inline EnergyVerdict level_energy_bound(double delta, double r0, const ScalarField& u, const LevelConfig& cfg = {}) {
  if (!(r0 > 0 && r0 < 1)) throw DomainError("level_energy_bound: r0 must lie in (0, 1)");
  if (!(cfg.c > 1) || !(cfg.eps > 0 && cfg.eps < 1)) throw DomainError("level_energy_bound: bad constants");
  const double lo = delta * r0 - delta * r0 / cfg.c, hi = delta * r0 / cfg.c;
  for (double v : circle_values(u.value, Circle{Vec2::Zero(), r0}))
    if (!(v > lo)) throw DomainError("level_energy_bound: inner hypothesis fails (u <= delta r0 - delta r0 / C on |x| = r0)");
  for (double v : circle_values(u.value, Circle{}))
    if (!(v < hi)) throw DomainError("level_energy_bound: outer hypothesis fails (u >= delta r0 / C on |x| = 1)");
  double lhs = dirichlet_energy(u, Circle{}, Circle{Vec2::Zero(), r0});
  double rhs = cfg.eps * 2 * std::numbers::pi * delta * delta * r0 * r0 / std::abs(std::log(r0));
  return detail::verdict(lhs, rhs, 0.0);
}

struct FloorConfig {
  double c_half = 100.0;  // C(1/2) of the level-set bound; the case split uses 4 C(1/2)
  int radii = 65;         // circles sampled between r_E/4 and r_E
};

struct FloorVerdict {
  int which_case = 0;
  double t = 0.0, t_prime = 0.0;  // circle radii used (t_prime only in case 2)
  double oscillation = 0.0;       // of phi over the annulus
  double lhs = 0.0;               // energy over the region the case uses
  double floor = 0.0;             // lower bound the case chain guarantees
  double measured = 0.0;          // the bound right-hand side from the samples
  bool holds = false;
};

// Energy floor for a function that oscillates by r_E delta'/4 on the annulus
// between radii r_E/4 and r_E about o_E, inside the disc of radius 1/2.
inline FloorVerdict far_graph_energy_floor(const ScalarField& phi, const Vec2& o_e, double r_e, double delta_prime,
                                           const FloorConfig& cfg = {}) {
  constexpr double pi = std::numbers::pi;
  if (!(r_e > 0) || !(r_e < 0.5 * (0.5 - o_e.norm()))) throw DomainError("far_graph_energy_floor: annulus must sit well inside D(0, 1/2)");
  if (!(delta_prime > 0)) throw DomainError("far_graph_energy_floor: delta' must be positive");
  if (cfg.radii < 2 || !(cfg.c_half > 2)) throw DomainError("far_graph_energy_floor: bad configuration");
  const double C = 4 * cfg.c_half;

  std::vector<double> radius(cfg.radii), lo(cfg.radii), hi(cfg.radii);
  double lip = 0.0;
  for (int k = 0; k < cfg.radii; ++k) {
    radius[k] = r_e * (0.25 + 0.75 * k / (cfg.radii - 1));
    auto v = circle_values(phi.value, Circle{o_e, radius[k]});
    lo[k] = *std::min_element(v.begin(), v.end());
    hi[k] = *std::max_element(v.begin(), v.end());
    for (int j = 0; j < circle_samples; j += 4)
      lip = std::max(lip, phi.gradient(o_e + radius[k] * detail::unit(2 * pi * j / circle_samples)).norm());
  }
  FloorVerdict out;
  out.oscillation = *std::max_element(hi.begin(), hi.end()) - *std::min_element(lo.begin(), lo.end());
  if (out.oscillation < 0.25 * r_e * delta_prime)
    throw DomainError("far_graph_energy_floor: oscillation below r_E delta'/4 on the annulus");
  if (!(lip < 1.0)) throw DomainError("far_graph_energy_floor: phi is not 1-Lipschitz on the samples");

  int best = 0;
  for (int k = 1; k < cfg.radii; ++k)
    if (hi[k] - lo[k] > hi[best] - lo[best]) best = k;
  if (hi[best] - lo[best] >= delta_prime / C * r_e) {
    out.which_case = 1;
    out.t = radius[best];
    out.lhs = dirichlet_energy(phi, Circle{Vec2::Zero(), 0.5}, Circle{o_e, out.t});
    out.floor = out.t * out.t * std::pow(delta_prime, 3) / (16 * C * C * C);
    out.measured = 0.25 / out.t * circle_variance(circle_values(phi.value, Circle{o_e, out.t}), out.t);
    out.holds = out.lhs >= out.floor;
    return out;
  }

  // every circle is nearly level: find an inner circle sitting above an outer one
  out.which_case = 2;
  const double gap_min = (1 - 2 / cfg.c_half) * delta_prime * r_e / 4;
  double best_floor = -1.0;
  for (int i = 0; i < cfg.radii; ++i)
    for (int k = i + 1; k < cfg.radii; ++k)
      for (bool f : {false, true}) {
        double gap = f ? lo[k] - hi[i] : lo[i] - hi[k];
        if (gap < gap_min) continue;
        double fl = pi * gap_min * gap_min / std::log(radius[k] / radius[i]);
        if (fl > best_floor) {
          best_floor = fl;
          out.t = radius[i];
          out.t_prime = radius[k];
          out.measured = gap;
        }
      }
  if (best_floor < 0) throw DomainError("far_graph_energy_floor: no pair of circles separates by the required gap");
  out.floor = best_floor;
  out.lhs = dirichlet_energy(phi, Circle{o_e, out.t_prime}, Circle{o_e, out.t});
  out.holds = out.lhs >= out.floor;
  return out;
}

// f on the unit disc (minimal, boundary size mu) and h on the annulus B minus
// B(q, r) with h = 0 on the unit circle, Lip h <= l and |h - M| <= eps r on the
// inner circle. The constructor checks all of it.
class PerturbationSpec {
public:
  PerturbationSpec(GraphFn f, GraphFn h, double mu, double l, double eps, Vec2 M)
      : f_(std::move(f)), h_(std::move(h)), mu_(mu), l_(l), eps_(eps), M_(M) {
    const Grid2 &gf = f_.grid(), &gh = h_.grid();
    if (gf.is_annulus() || gf.outer().center.norm() > 0 || gf.outer().radius != 1.0)
      throw DomainError("PerturbationSpec: f must live on the unit disc");
    if (!gh.is_annulus() || gh.outer().center.norm() > 0 || gh.outer().radius != 1.0)
      throw DomainError("PerturbationSpec: h must live on an annulus in the unit disc");
    if (!(gh.hole()->center.norm() < 0.01)) throw DomainError("PerturbationSpec: q must lie in B(0, 1/100)");
    if (!(mu >= 0) || !(l > 0) || !(eps > 0)) throw DomainError("PerturbationSpec: mu, l and eps must be positive");
    for (std::size_t p = 0; p < gh.size(); ++p) {
      const auto& node = gh.nodes()[p];
      if (node.boundary == BoundaryKind::outer && h_[p].norm() > 1e-12)
        throw DomainError("PerturbationSpec: h must vanish on the unit circle");
      if (node.boundary == BoundaryKind::inner && (h_[p] - M_).norm() > eps * r() * (1 + 1e-9))
        throw DomainError("PerturbationSpec: |h - M| exceeds eps r on the inner circle");
    }
    lip_ = 0.0;
    for (std::size_t t = 0; t < gh.triangles().size(); ++t)
      lip_ = std::max(lip_, Eigen::JacobiSVD<Mat2>(h_.triangle_gradient(t)).singularValues()(0));
    if (lip_ > l * (1 + 1e-9)) throw DomainError("PerturbationSpec: Lip h exceeds l");
  }

  const GraphFn& f() const { return f_; }
  const GraphFn& h() const { return h_; }
  double mu() const { return mu_; }
  double l() const { return l_; }
  double eps() const { return eps_; }
  const Vec2& M() const { return M_; }
  Vec2 q() const { return h_.grid().hole()->center; }
  double r() const { return h_.grid().hole()->radius; }
  double lipschitz() const { return lip_; }
  bool in_regime() const { return l_ <= 1e-4 && eps_ <= 1e-4; }

private:
  GraphFn f_, h_;
  double mu_, l_, eps_;
  Vec2 M_;
  double lip_ = 0.0;
};

struct GapReport {
  double lhs = 0.0;            // area of the graph of f + h minus that of f, over A_r
  double energy = 0.0;         // (1/4) integral of |grad h|^2
  double boundary_flux = 0.0;  // <M, contour integral of n . flux(grad f)> over the inner circle
  double flux_cancellation = 0.0;  // |contour integral of n . V| for V the flux at q
  double remainder_scale = 0.0;    // r^2
  double c0 = 0.0;                 // max of the first three derivative norms of f on B(0, 3/4)
  double slack_scale = 0.0;        // r^2 (mu + mu eps + c0)
  double slack_constant = 0.0;     // max(0, energy - lhs) / slack_scale
  std::size_t cells = 0;
  std::size_t cell_violations = 0;  // cells where the area gain is below a quarter of the energy
  bool in_regime = false;
};

inline GapReport perturbation_gap(const PerturbationSpec& spec) {
  const GraphFn& h = spec.h();
  const Grid2& g = h.grid();
  const GraphFn& f = spec.f();
  GraphFn fa = GraphFn::sample(h.grid_ptr(), [&f](const Vec2& x) { return f.evaluate(x); });

  GapReport rep;
  rep.cells = g.triangles().size();
  std::vector<double> gain(rep.cells), dir(rep.cells);
  for (std::size_t t = 0; t < rep.cells; ++t) {
    Mat2 Jf = fa.triangle_gradient(t), Jh = h.triangle_gradient(t);
    double sf = s_of(Jf), sg = s_of<double>(Jf + Jh);
    gain[t] = g.area(t) * (sg - sf) / (std::sqrt(1 + sg) + std::sqrt(1 + sf));
    dir[t] = g.area(t) * Jh.squaredNorm();
    if (gain[t] < 0.25 * dir[t]) ++rep.cell_violations;
  }
  rep.lhs = detail::pairwise_sum(gain.data(), gain.size());
  rep.energy = 0.25 * detail::pairwise_sum(dir.data(), dir.size());

  // flux of f through the inner circle, from nodal jets interpolated linearly
  Jet jet = jet_of(f);
  auto grad_at = [&](const Vec2& x) {
    auto loc = f.grid().locate(x);
    if (!loc) throw DomainError("perturbation_gap: inner circle leaves the grid of f");
    const auto& tr = f.grid().triangles()[loc->first];
    const auto& b = loc->second;
    return Mat2(b[0] * jet.grad[tr[0]] + b[1] * jet.grad[tr[1]] + b[2] * jet.grad[tr[2]]);
  };
  const double r = spec.r();
  const Vec2 q = spec.q();
  const double ds = 2 * std::numbers::pi * r / circle_samples;
  Vec2 total = Vec2::Zero(), normals = Vec2::Zero();
  for (int j = 0; j < circle_samples; ++j) {
    Vec2 n = detail::unit(2 * std::numbers::pi * j / circle_samples);
    total += ds * (flux(grad_at(q + r * n)).transpose() * n);
    normals += ds * n;
  }
  rep.boundary_flux = spec.M().dot(total);
  rep.flux_cancellation = (flux(grad_at(q)).transpose() * normals).norm();

  auto norms = derivative_sup_norms(f, 0.75, 3);
  rep.c0 = std::max({norms[1], norms[2], norms[3]});
  rep.remainder_scale = r * r;
  rep.slack_scale = r * r * (spec.mu() + spec.mu() * spec.eps() + rep.c0);
  double deficit = std::max(0.0, rep.energy - rep.lhs);
  rep.slack_constant = deficit == 0.0 ? 0.0
                       : rep.slack_scale > 0 ? deficit / rep.slack_scale
                                             : std::numeric_limits<double>::infinity();
  rep.in_regime = spec.in_regime();
  return rep;
}

// Radial bump supported in r <= |x - q| <= 2r, equal to r l' v(theta) on the
// inner circle, rescaled so that its Lipschitz constant is 0.9 l. Returns the
// function and its mean on the inner circle.
inline std::pair<GraphFn, Vec2> ring_bump(const GridPtr& annulus, double l) {
  const Grid2& g = *annulus;
  if (!g.is_annulus()) throw DomainError("ring_bump: needs an annulus grid");
  const Vec2 q = g.hole()->center;
  const double r = g.hole()->radius;
  if (q.norm() + 2 * r >= g.outer().radius) throw DomainError("ring_bump: support leaves the disc");
  auto shape = [q, r](const Vec2& x) -> Vec2 {
    Vec2 d = x - q;
    double rho = d.norm(), th = std::atan2(d.y(), d.x());
    double b = std::clamp(2.0 - rho / r, 0.0, 1.0);
    return r * b * Vec2(0.5 + 0.1 * std::cos(th), 0.1 * std::sin(th));
  };
  GraphFn h = GraphFn::sample(annulus, shape);
  double lip = 0.0;
  for (std::size_t t = 0; t < g.triangles().size(); ++t)
    lip = std::max(lip, Eigen::JacobiSVD<Mat2>(h.triangle_gradient(t)).singularValues()(0));
  double s = 0.9 * l / lip;
  for (auto& v : h.values()) v *= s;
  return {h, Vec2(0.5 * r * s, 0.0)};
}

// Random smooth perturbation on an annulus grid vanishing on the unit circle,
// scaled to Lipschitz constant 0.9 l; the second value is its mean on the inner circle.
inline std::pair<GraphFn, Vec2> random_perturbation(const GridPtr& annulus, double l, std::mt19937_64& rng) {
  const Grid2& g = *annulus;
  if (!g.is_annulus()) throw DomainError("random_perturbation: needs an annulus grid");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<double, 12> c;
  for (auto& v : c) v = u(rng);
  auto shape = [c](const Vec2& x) -> Vec2 {
    double w = 1.0 - x.squaredNorm();
    double m[6] = {1.0, x.x(), x.y(), std::sin(3 * x.x()), std::cos(2 * x.y()), x.x() * x.y()};
    Vec2 s(0, 0);
    for (int k = 0; k < 6; ++k) s += Vec2(c[k] * m[k], c[6 + k] * m[k]);
    return Vec2(w * s);
  };
  GraphFn h = GraphFn::sample(annulus, shape);
  for (std::size_t p = 0; p < g.size(); ++p)
    if (g.nodes()[p].boundary == BoundaryKind::outer) h[p] = Vec2::Zero();
  double lip = 0.0;
  for (std::size_t t = 0; t < g.triangles().size(); ++t)
    lip = std::max(lip, Eigen::JacobiSVD<Mat2>(h.triangle_gradient(t)).singularValues()(0));
  double s = 0.9 * l / lip;
  for (auto& v : h.values()) v *= s;
  Vec2 mean = Vec2::Zero();
  std::size_t n = 0;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (g.nodes()[p].boundary == BoundaryKind::inner) {
      mean += h[p];
      ++n;
    }
  return {h, mean / static_cast<double>(n)};
}

// Smallest eps with |h - M| <= eps r on the inner circle nodes.
inline double inner_closeness(const GraphFn& h, const Vec2& M) {
  const Grid2& g = h.grid();
  double m = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (g.nodes()[p].boundary == BoundaryKind::inner) m = std::max(m, (h[p] - M).norm());
  return m / g.hole()->radius;
}

} // namespace twoplane
