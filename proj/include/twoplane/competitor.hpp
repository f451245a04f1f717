#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "perturb.hpp"

namespace twoplane {

struct InequalityRow {
  std::string tag;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline nlohmann::json rows_to_json(const std::vector<InequalityRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"tag", r.tag}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"holds", r.holds}});
  return out;
}

namespace detail {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Bucket grid over projected triangles.
class PlanarIndex {
public:
  using Tri2 = std::array<Vec2, 3>;

  explicit PlanarIndex(std::vector<Tri2> tris) : tris_(std::move(tris)) {
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo_;
    for (const auto& t : tris_)
      for (const auto& p : t) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    if (tris_.empty()) return;
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(tris_.size()))));
    Vec2 span = (hi - lo_).cwiseMax(Vec2::Constant(1e-300));
    cell_ = Vec2(span.x() / n_, span.y() / n_);
    buckets_.resize(static_cast<std::size_t>(n_) * n_);
    for (std::size_t k = 0; k < tris_.size(); ++k) {
      Vec2 a = tris_[k][0].cwiseMin(tris_[k][1]).cwiseMin(tris_[k][2]);
      Vec2 b = tris_[k][0].cwiseMax(tris_[k][1]).cwiseMax(tris_[k][2]);
      auto [i0, j0] = bucket(a);
      auto [i1, j1] = bucket(b);
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(i) * n_ + j].push_back(static_cast<std::uint32_t>(k));
    }
  }

  std::size_t size() const { return tris_.size(); }
  const Tri2& triangle(std::size_t k) const { return tris_[k]; }

  // f(k, barycentric) for every triangle whose barycentrics all exceed -tol.
  template <class F>
  void visit(const Vec2& x, double tol, F&& f) const {
    if (tris_.empty()) return;
    if ((x - lo_).minCoeff() < 0 || x.x() > lo_.x() + n_ * cell_.x() || x.y() > lo_.y() + n_ * cell_.y()) return;
    auto [i, j] = bucket(x);
    for (auto k : buckets_[static_cast<std::size_t>(i) * n_ + j]) {
      auto b = barycentric(tris_[k], x);
      if (b[0] > -tol && b[1] > -tol && b[2] > -tol) f(k, b);
    }
  }

  static std::array<double, 3> barycentric(const Tri2& t, const Vec2& x) {
    double det = cross2(t[1] - t[0], t[2] - t[0]);
    double l1 = cross2(x - t[0], t[2] - t[0]) / det;
    double l2 = cross2(t[1] - t[0], x - t[0]) / det;
    return {1 - l1 - l2, l1, l2};
  }

private:
  std::pair<int, int> bucket(const Vec2& x) const {
    int i = std::clamp(static_cast<int>((x.x() - lo_.x()) / cell_.x()), 0, n_ - 1);
    int j = std::clamp(static_cast<int>((x.y() - lo_.y()) / cell_.y()), 0, n_ - 1);
    return {i, j};
  }

  std::vector<Tri2> tris_;
  Vec2 lo_, cell_;
  int n_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

inline Vec2 normal_coords(const PlanePair& pair, int sheet, const Vec4& y) {
  const auto& n = pair.normals(sheet);
  Vec4 r = y - pair.sheet(sheet).offset;
  return Vec2(n[0].dot(r), n[1].dot(r));
}

} // namespace detail

struct GraphCheckConfig {
  double gradient_limit = 0.5;
  int raster = 256;
};

// The part of E over an annulus of sheet i, checked to be the graph of a map
// P^i -> (P^i)^perp: consistent orientation, gradient below the limit and no
// two projected triangles overlapping on the raster. Triangles go to the
// sheet whose plane is nearer to their centroid.
class SheetGraph {
public:
  SheetGraph(const TriMesh4& e, const PlanePair& pair, int sheet, const Vec2& center, double r_in, double r_out,
             const GraphCheckConfig& cfg = {})
      : sheet_(sheet), center_(center), r_in_(r_in), r_out_(r_out) {
    const std::string who = "sheet " + std::to_string(sheet + 1) + ": ";
    if (!(r_out > r_in && r_in >= 0)) throw DomainError(who + "bad annulus");
    const Plane2& P = pair.sheet(sheet);
    const Plane2& other = pair.sheet(1 - sheet);
    std::vector<detail::PlanarIndex::Tri2> tris;
    int positive = 0, negative = 0;
    for (std::size_t t = 0; t < e.size(); ++t) {
      const auto& tr = e.triangles()[t];
      const Vec4 &a = e.vertices()[tr[0]], &b = e.vertices()[tr[1]], &c = e.vertices()[tr[2]];
      Vec4 g = (a + b + c) / 3;
      if (P.distance(g) > other.distance(g)) continue;
      detail::PlanarIndex::Tri2 x{P.coords(a), P.coords(b), P.coords(c)};
      Vec2 xc = (x[0] + x[1] + x[2]) / 3;
      double rad = std::max({(x[0] - xc).norm(), (x[1] - xc).norm(), (x[2] - xc).norm()});
      double dc = (xc - center).norm();
      if (dc + rad < r_in || dc - rad > r_out) continue;
      double area = detail::cross2(x[1] - x[0], x[2] - x[0]) / 2;
      if (!(std::abs(area) > 1e-14 * e.areas()[t])) throw DomainError(who + "a triangle is vertical over the plane");
      (area > 0 ? positive : negative)++;
      std::array<Vec2, 3> w{detail::normal_coords(pair, sheet, a), detail::normal_coords(pair, sheet, b),
                            detail::normal_coords(pair, sheet, c)};
      Mat2 X, W;
      X << x[1] - x[0], x[2] - x[0];
      W << w[1] - w[0], w[2] - w[0];
      // rows are d/dx, d/dy as elsewhere
      Mat2 J = (W * X.inverse()).transpose();
      max_gradient_ = std::max(max_gradient_, Eigen::JacobiSVD<Mat2>(J).singularValues()(0));
      tris.push_back(x);
      values_.push_back(w);
      ids_.push_back(static_cast<std::uint32_t>(t));
    }
    if (tris.empty()) throw DomainError(who + "no triangles over the annulus");
    if (positive > 0 && negative > 0) throw DomainError(who + "projection folds over");
    if (!(max_gradient_ < cfg.gradient_limit))
      throw DomainError(who + "gradient " + std::to_string(max_gradient_) + " reaches the limit");
    index_ = std::make_shared<const detail::PlanarIndex>(std::move(tris));

    const int n = cfg.raster;
    const double step = 2 * r_out / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vec2 x = center + Vec2(-r_out + (i + 0.5) * step, -r_out + (j + 0.5) * step);
        double d = (x - center).norm();
        if (d < r_in || d > r_out) continue;
        ++raster_cells_;
        int strict = 0, loose = 0;
        index_->visit(x, 1e-9, [&](std::size_t, const std::array<double, 3>& b) {
          ++loose;
          if (std::min({b[0], b[1], b[2]}) > 1e-9) ++strict;
        });
        if (strict > 1) throw DomainError(who + "projection is not injective");
        if (loose == 0) ++uncovered_;
      }
  }

  int sheet() const { return sheet_; }
  double max_gradient() const { return max_gradient_; }
  const std::vector<std::uint32_t>& triangles() const { return ids_; }
  std::size_t raster_cells() const { return raster_cells_; }
  std::size_t uncovered_cells() const { return uncovered_; }

  // Normal displacement of E above x, if x lies under the extracted piece.
  std::optional<Vec2> operator()(const Vec2& x) const {
    std::optional<Vec2> out;
    index_->visit(x, 1e-9, [&](std::size_t k, const std::array<double, 3>& b) {
      if (!out) out = b[0] * values_[k][0] + b[1] * values_[k][1] + b[2] * values_[k][2];
    });
    return out;
  }

  // Equispaced samples of the trace on the circle of the given radius.
  std::vector<Vec2> trace(double radius, std::size_t n) const {
    std::vector<Vec2> s(n);
    for (std::size_t k = 0; k < n; ++k) {
      auto v = (*this)(center_ + radius * detail::unit(2 * std::numbers::pi * k / n));
      if (!v) throw DomainError("sheet " + std::to_string(sheet_ + 1) + ": trace leaves the extracted graph");
      s[k] = *v;
    }
    return s;
  }

private:
  int sheet_;
  Vec2 center_;
  double r_in_, r_out_;
  double max_gradient_ = 0.0;
  std::shared_ptr<const detail::PlanarIndex> index_;
  std::vector<std::array<Vec2, 3>> values_;
  std::vector<std::uint32_t> ids_;
  std::size_t raster_cells_ = 0, uncovered_ = 0;
};

// h(x) = (|x| - 3/4) / (39/40 - 3/4) * gamma(theta): joins the flat disc of radius
// 3/4 to the boundary curve gamma, given on the circle of radius 39/40.
class AnnulusInterpolant {
public:
  static constexpr double inner_radius = 0.75;
  static constexpr double outer_radius = 39.0 / 40.0;
  static constexpr double width = outer_radius - inner_radius;

  AnnulusInterpolant(BoundaryCurve gamma, double sup_bound) : gamma_(std::move(gamma)) {
    sup_ = gamma_.sup();
    lip_gamma_ = gamma_.derivative_sup() / outer_radius;
    if (!(sup_ <= sup_bound)) throw DomainError("annulus interpolant: sup of gamma exceeds the bound");
    if (!(lip_gamma_ <= 0.5)) throw DomainError("annulus interpolant: gamma is not 1/2-Lipschitz");
  }

  const BoundaryCurve& gamma() const { return gamma_; }
  double gamma_sup() const { return sup_; }
  double gamma_lipschitz() const { return lip_gamma_; }

  Vec2 operator()(const Vec2& x) const {
    double r = x.norm();
    return (r - inner_radius) / width * gamma_(std::atan2(x.y(), x.x()));
  }

  // rows d/dx, d/dy
  Mat2 jacobian(const Vec2& x) const {
    double r = x.norm(), th = std::atan2(x.y(), x.x());
    Vec2 dr = gamma_(th) / width;
    Vec2 dt = (r - inner_radius) / width / r * gamma_.derivative(th);
    double c = std::cos(th), s = std::sin(th);
    Mat2 J;
    J.row(0) = (c * dr - s * dt).transpose();
    J.row(1) = (s * dr + c * dt).transpose();
    return J;
  }

  double radial_bound() const { return sup_ / width; }
  // (r - 3/4) / r grows with r, so the outer circle is the worst case
  double tangential_bound() const { return lip_gamma_; }
  double lipschitz_certificate() const { return std::hypot(radial_bound(), tangential_bound()); }

  double measured_lipschitz(int radial = 32, int angular = 512) const {
    double m = 0.0;
    for (int i = 0; i <= radial; ++i) {
      double r = inner_radius + width * i / radial;
      for (int k = 0; k < angular; ++k)
        m = std::max(m, Eigen::JacobiSVD<Mat2>(jacobian(r * detail::unit(2 * std::numbers::pi * k / angular)))
                            .singularValues()(0));
    }
    return m;
  }

  // Graph area: Gauss-Legendre in r, trapezoid (spectral for periodic data) in theta.
  double area(int radial = 24, int angular = 1024) const {
    auto [nodes, weights] = detail::gauss_legendre(radial);
    double sum = 0.0;
    for (int i = 0; i < radial; ++i) {
      double r = inner_radius + width * (nodes[i] + 1) / 2;
      double ring = 0.0;
      for (int k = 0; k < angular; ++k) {
        Mat2 J = jacobian(r * detail::unit(2 * std::numbers::pi * k / angular));
        ring += std::sqrt(1 + s_of(J));
      }
      sum += weights[i] * width / 2 * r * ring * 2 * std::numbers::pi / angular;
    }
    return sum;
  }

  static double flat_area() { return std::numbers::pi * (outer_radius * outer_radius - inner_radius * inner_radius); }
  // (1 + (2/3)^2) times the flat annulus
  static double area_bound() { return 897.0 * std::numbers::pi / 1600.0; }

  TriMesh4 mesh(const PlanePair& pair, int sheet, int angular = 256, int radial = 16) const {
    Mesh2 m;
    for (int i = 0; i <= radial; ++i) {
      double r = inner_radius + width * i / radial;
      for (int k = 0; k < angular; ++k) m.points.push_back(r * detail::unit(2 * std::numbers::pi * k / angular));
    }
    auto id = [angular](int i, int k) { return static_cast<std::uint32_t>(i * angular + (k % angular)); };
    for (int i = 0; i < radial; ++i)
      for (int k = 0; k < angular; ++k) {
        m.triangles.push_back({id(i, k), id(i + 1, k), id(i + 1, k + 1)});
        m.triangles.push_back({id(i, k), id(i + 1, k + 1), id(i, k + 1)});
      }
    return lift_to_sheet(pair, sheet, m, [this](const Vec2& x) { return (*this)(x); });
  }

private:
  BoundaryCurve gamma_;
  double sup_ = 0.0;
  double lip_gamma_ = 0.0;
};

struct CompetitorConfig {
  double eps = 1e-2;           // traces must satisfy sup |gamma| <= eps / 10
  Vec4 q_n = Vec4::Zero();     // centre of the small hole in the lower bound
  double hole = 1.0 / 20;      // its radius
  double graph_inner = 1.0 / 20;
  std::size_t trace_samples = 256;
  GraphCheckConfig graph;
};

struct CompetitorQ {
  std::array<std::optional<AnnulusInterpolant>, 2> interpolant;
  std::array<TriMesh4, 2> sigma_mesh;  // the interpolating annuli
  std::array<TriMesh4, 2> flat_mesh;   // P^i inside radius 3/4
  TriMesh4 outer;                      // triangles of E with centroid outside D(0, 39/40)
  std::array<double, 2> area_sigma{};
  std::array<double, 2> area_flat{};
  std::array<double, 2> area_q{};
  double area_e_inside = 0.0;  // H^2(E ∩ D(0, 39/40))
  double area_annulus = 0.0;   // H^2(E ∩ D(0, 39/40) \ D(q_n, hole))
  std::array<double, 2> gap_inner{}, gap_outer{};
  double interface_tolerance = 0.0;  // twice the longest edge of E
  bool continuous = false;
};

struct CompetitorBuild {
  CompetitorQ q;
  std::vector<InequalityRow> rows;
};

inline double max_edge_length(const TriMesh4& m) {
  double out = 0.0;
  for (const auto& t : m.triangles())
    for (int k = 0; k < 3; ++k) out = std::max(out, (m.vertices()[t[k]] - m.vertices()[t[(k + 1) % 3]]).norm());
  return out;
}

inline CompetitorBuild build_Q(const TriMesh4& e, const PlanePair& pair, const CompetitorConfig& cfg = {}) {
  constexpr double R = AnnulusInterpolant::outer_radius;
  constexpr double pi = std::numbers::pi;
  CompetitorBuild out;
  auto& q = out.q;
  const BiCylinder big{pair, Vec4::Zero(), R};
  q.area_e_inside = area_in_region(e, big);
  q.area_annulus = q.area_e_inside - area_in_region(e, BiCylinder{pair, cfg.q_n, cfg.hole});
  q.outer = e.filtered([&](std::size_t t) {
    const auto& tr = e.triangles()[t];
    return !contains(big, (e.vertices()[tr[0]] + e.vertices()[tr[1]] + e.vertices()[tr[2]]) / 3);
  });
  q.interface_tolerance = 2 * max_edge_length(e);
  q.continuous = true;
  const Mesh2 disc = disc_mesh(AnnulusInterpolant::inner_radius, 128);
  for (int i = 0; i < 2; ++i) {
    SheetGraph g(e, pair, i, Vec2::Zero(), cfg.graph_inner, 1.0, cfg.graph);
    auto gamma = BoundaryCurve::from_samples(g.trace(R, cfg.trace_samples));
    auto& h = q.interpolant[i].emplace(gamma, cfg.eps / 10);
    q.sigma_mesh[i] = h.mesh(pair, i);
    q.flat_mesh[i] = lift_to_sheet(pair, i, disc);
    q.area_sigma[i] = h.area();
    q.area_flat[i] = pi * 9 / 16;
    q.area_q[i] = q.area_sigma[i] + q.area_flat[i];
    for (int k = 0; k < 256; ++k) {
      Vec2 u = detail::unit(2 * pi * k / 256);
      q.gap_inner[i] = std::max(q.gap_inner[i], h(AnnulusInterpolant::inner_radius * u).norm());
      Vec2 x = R * u, w = h(x);
      const auto& n = pair.normals(i);
      q.gap_outer[i] = std::max(q.gap_outer[i], e.distance(pair.sheet(i).point(x) + w.x() * n[0] + w.y() * n[1]));
    }
    q.continuous = q.continuous && q.gap_inner[i] <= q.interface_tolerance && q.gap_outer[i] <= q.interface_tolerance;

    std::string s = std::to_string(i + 1);
    const double bound = AnnulusInterpolant::area_bound();
    out.rows.push_back({"interpolant_area_" + s, q.area_sigma[i], bound, q.area_sigma[i] <= bound});
    out.rows.push_back({"sheet_area_" + s, q.area_q[i], 9 * pi / 8, q.area_q[i] <= 9 * pi / 8});
  }
  const double lower = 1517.0 / 800.0 * pi;
  out.rows.push_back({"annulus_lower", q.area_annulus, lower * (1 - 1e-2), q.area_annulus >= lower * (1 - 1e-2)});
  return out;
}

inline nlohmann::json competitor_to_json(const CompetitorBuild& b) {
  const auto& q = b.q;
  nlohmann::json sheets = nlohmann::json::array();
  for (int i = 0; i < 2; ++i) {
    const auto& h = *q.interpolant[i];
    sheets.push_back({{"area_sigma", q.area_sigma[i]},
                      {"area_flat", q.area_flat[i]},
                      {"area_q", q.area_q[i]},
                      {"gamma_sup", h.gamma_sup()},
                      {"gamma_lipschitz", h.gamma_lipschitz()},
                      {"lipschitz_certificate", h.lipschitz_certificate()},
                      {"gap_inner", q.gap_inner[i]},
                      {"gap_outer", q.gap_outer[i]}});
  }
  return {{"area_e_inside", q.area_e_inside},
          {"area_annulus", q.area_annulus},
          {"interface_tolerance", q.interface_tolerance},
          {"continuous", q.continuous},
          {"sheets", sheets},
          {"rows", rows_to_json(b.rows)}};
}

struct SurjectivityVerdict {
  int sheet = 0;
  bool surjective = false;
  std::size_t cells = 0;
  double cell = 0.0;
  std::vector<Vec2> uncovered;  // centres of uncovered cells, sheet coordinates
};

// Rasterises p^i(E ∩ closed D(q, t)) over the disc P^i ∩ C^i(q, t). A cell
// counts as covered when some triangle over its centre lifts it into D(q, t).
inline std::array<SurjectivityVerdict, 2> check_projection_surjectivity(const TriMesh4& e, const PlanePair& pair,
                                                                         const Vec4& q, double t, int raster = 128) {
  if (!(t > 0)) throw DomainError("surjectivity: t must be positive");
  const BiCylinder region{pair, q, t * (1 + 1e-9)};
  double reach = region.bounding_radius();
  std::vector<std::uint32_t> cand;
  if (std::isfinite(reach)) {
    cand = e.triangles_near(q, reach);
  } else {
    cand.resize(e.size());
    std::iota(cand.begin(), cand.end(), 0u);
  }
  std::array<SurjectivityVerdict, 2> out;
  for (int i = 0; i < 2; ++i) {
    const Plane2& P = pair.sheet(i);
    std::vector<detail::PlanarIndex::Tri2> tris;
    std::vector<std::uint32_t> ids;
    for (auto k : cand) {
      const auto& tr = e.triangles()[k];
      detail::PlanarIndex::Tri2 x{P.coords(e.vertices()[tr[0]]), P.coords(e.vertices()[tr[1]]),
                                  P.coords(e.vertices()[tr[2]])};
      if (std::abs(detail::cross2(x[1] - x[0], x[2] - x[0])) <= 1e-14 * e.areas()[k]) continue;
      tris.push_back(x);
      ids.push_back(k);
    }
    detail::PlanarIndex index(std::move(tris));
    auto& v = out[i];
    v.sheet = i;
    v.cell = 2 * t / raster;
    Vec2 c = P.coords(q);
    for (int a = 0; a < raster; ++a)
      for (int b = 0; b < raster; ++b) {
        Vec2 x = c + Vec2(-t + (a + 0.5) * v.cell, -t + (b + 0.5) * v.cell);
        if ((x - c).norm() > t) continue;
        ++v.cells;
        bool hit = false;
        index.visit(x, 1e-9, [&](std::size_t k, const std::array<double, 3>& w) {
          if (hit) return;
          const auto& tr = e.triangles()[ids[k]];
          Vec4 y = w[0] * e.vertices()[tr[0]] + w[1] * e.vertices()[tr[1]] + w[2] * e.vertices()[tr[2]];
          hit = contains(region, y);
        });
        if (!hit) v.uncovered.push_back(x);
      }
    v.surjective = v.uncovered.empty();
  }
  return out;
}

struct ProjectionBound {
  double lhs = 0.0;  // H^2(E ∩ D(x, r)) / r^2
  double rhs = 0.0;  // 2 pi / (1 + xi)
  double xi = 0.0;
  bool holds = false;
};

inline ProjectionBound projection_area_lower_bound(const TriMesh4& e, const PlanePair& pair, const Vec4& center,
                                                   double radius, std::optional<double> xi = {}, int raster = 128) {
  ProjectionBound out;
  out.xi = xi.value_or(pair.xi);
  if (!(out.xi >= 0 && out.xi <= 2)) throw DomainError("projection bound: xi must lie in [0, 2]");
  if (std::acos(out.xi / 2) > pair.alpha1 + 1e-12) throw DomainError("projection bound: arccos(xi/2) exceeds alpha1");
  auto cover = check_projection_surjectivity(e, pair, center, radius, raster);
  for (const auto& c : cover)
    if (!c.surjective)
      throw DomainError("projection bound: projection onto sheet " + std::to_string(c.sheet + 1) +
                        " misses " + std::to_string(c.uncovered.size()) + " cells");
  out.lhs = area_in_region(e, BiCylinder{pair, center, radius}) / (radius * radius);
  out.rhs = 2 * std::numbers::pi / (1 + out.xi);
  out.holds = out.lhs >= out.rhs * (1 - 1e-2);
  return out;
}

// Graph of a grid function lifted onto sheet i, with both the domain and the
// values multiplied by `scale`.
inline TriMesh4 graph_mesh(const GraphFn& f, const PlanePair& pair, int sheet, double scale = 1.0) {
  const Grid2& g = f.grid();
  const Plane2& P = pair.sheet(sheet);
  const auto& n = pair.normals(sheet);
  std::vector<Vec4> v;
  v.reserve(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    Vec2 w = scale * f[p];
    v.push_back(P.point(scale * g.nodes()[p].x) + w.x() * n[0] + w.y() * n[1]);
  }
  std::vector<Tri> t(g.triangles().begin(), g.triangles().end());
  return TriMesh4(std::move(v), std::move(t));
}

// Traces of E on the circles of radius 1/2, blown up by 2 so that the
// competitor graphs are solved on the unit disc.
inline std::array<BoundaryCurve, 2> competitor_traces(const TriMesh4& e, const PlanePair& pair,
                                                      std::size_t samples = 256, const GraphCheckConfig& cfg = {}) {
  std::array<BoundaryCurve, 2> out;
  for (int i = 0; i < 2; ++i) {
    SheetGraph g(e, pair, i, Vec2::Zero(), 0.4, 0.6, cfg);
    auto s = g.trace(0.5, samples);
    for (auto& v : s) v *= 2;
    out[i] = BoundaryCurve::from_samples(s);
  }
  return out;
}

struct FinalConfig {
  std::optional<double> theta1;  // defaults to alpha1
  int perturb_resolution = 128;
  int raster = 128;
  GraphCheckConfig graph;
};

struct CompetitorReport {
  double area_e = 0.0;      // H^2(E ∩ D(0, 1/2))
  double area_sigma = 0.0;  // H^2(Σ)
  double gap = 0.0;
  std::array<double, 2> sheet_e{}, sheet_sigma{}, sheet_gap{};  // outside the inner region
  double inner_e = 0.0, inner_sigma = 0.0;                       // inside D(o_E, r_E / 4)
  double inner_e_lower = 0.0, inner_sigma_upper = 0.0;
  double c0 = 0.0;  // Lipschitz constant of the competitor graphs over the inner region
  std::array<bool, 2> inner_surjective{};
  std::array<GapReport, 2> perturbation{};  // on the unit-disc blow-up; areas scale by 1/4
  double quadrature_tolerance = 0.0;
  std::vector<InequalityRow> rows;
  bool positive() const { return gap > 0; }
};

inline CompetitorReport final_area_comparison(const TriMesh4& e, const PlanePair& pair, const Vec4& o_e, double r_e,
                                              const GraphFn& f1, const GraphFn& f2, const FinalConfig& cfg = {}) {
  constexpr double pi = std::numbers::pi;
  if (!(r_e > 0 && r_e < 0.5)) throw DomainError("final comparison: r_E must lie in (0, 1/2)");
  const std::array<const GraphFn*, 2> f{&f1, &f2};
  for (const auto* fi : f)
    if (fi->grid().is_annulus() || fi->grid().outer().radius != 1.0 || fi->grid().outer().center.norm() > 0)
      throw DomainError("final comparison: competitor graphs must live on the unit disc");
  CompetitorReport out;
  const double rho = r_e / 4;
  const BiCylinder half{pair, Vec4::Zero(), 0.5};
  const BiCylinder inner{pair, o_e, rho};
  out.area_e = area_in_region(e, half);
  out.inner_e = area_in_region(e, inner);

  double flat_e = 0.0, flat_sigma = 0.0;
  std::vector<Vec4> flat_v;
  std::vector<Tri> flat_t;
  for (int i = 0; i < 2; ++i) {
    const std::string who = "sheet " + std::to_string(i + 1);
    const Plane2& P = pair.sheet(i);
    const Plane2& other = pair.sheet(1 - i);
    auto mine = e.filtered([&](std::size_t t) {
      const auto& tr = e.triangles()[t];
      Vec4 g = (e.vertices()[tr[0]] + e.vertices()[tr[1]] + e.vertices()[tr[2]]) / 3;
      return P.distance(g) <= other.distance(g);
    });
    out.sheet_e[i] = area_in_region(mine, half) - area_in_region(mine, inner);
    for (const auto& t : mine.triangles()) {
      auto base = static_cast<std::uint32_t>(flat_v.size());
      for (auto k : t) flat_v.push_back(P.project(mine.vertices()[k]));
      flat_t.push_back({base, base + 1, base + 2});
    }

    const Circle hole{2 * P.coords(o_e), 2 * rho};
    double all = graph_area(*f[i]) / 4;
    double in = graph_area(*f[i], Subregion{hole, std::nullopt}) / 4;
    out.area_sigma += all;
    out.inner_sigma += in;
    out.sheet_sigma[i] = all - in;
    out.sheet_gap[i] = out.sheet_e[i] - out.sheet_sigma[i];
    flat_sigma += f[i]->grid().domain_area() / 4;

    const Grid2& g = f[i]->grid();
    for (std::size_t t = 0; t < g.triangles().size(); ++t) {
      const auto& tr = g.triangles()[t];
      Vec2 c = (g.nodes()[tr[0]].x + g.nodes()[tr[1]].x + g.nodes()[tr[2]].x) / 3;
      if ((c - hole.center).norm() <= hole.radius + 2 * g.h())
        out.c0 = std::max(out.c0, Eigen::JacobiSVD<Mat2>(f[i]->triangle_gradient(t)).singularValues()(0));
    }

    // h = g - f on the blown-up annulus
    try {
      SheetGraph sg(e, pair, i, P.coords(o_e), 0.9 * rho, 0.5, cfg.graph);
      auto grid = Grid2::annulus(Circle{}, hole, cfg.perturb_resolution);
      std::vector<Vec2> hv(grid->size());
      Vec2 mean = Vec2::Zero();
      int inner_nodes = 0;
      for (std::size_t p = 0; p < grid->size(); ++p) {
        const auto& node = grid->nodes()[p];
        if (node.boundary == BoundaryKind::outer) {
          hv[p] = Vec2::Zero();
          continue;
        }
        auto gv = sg(node.x / 2);
        if (!gv) throw DomainError("no graph above an annulus node");
        hv[p] = 2 * *gv - f[i]->evaluate(node.x);
        if (node.boundary == BoundaryKind::inner) {
          mean += hv[p];
          ++inner_nodes;
        }
      }
      mean /= std::max(inner_nodes, 1);
      GraphFn h(grid, hv);
      double spread = 0.0, lip = 0.0;
      for (std::size_t p = 0; p < grid->size(); ++p)
        if (grid->nodes()[p].boundary == BoundaryKind::inner) spread = std::max(spread, (hv[p] - mean).norm());
      for (std::size_t t = 0; t < grid->triangles().size(); ++t)
        lip = std::max(lip, Eigen::JacobiSVD<Mat2>(h.triangle_gradient(t)).singularValues()(0));
      double mu = 0.0;
      for (std::size_t p = 0; p < g.size(); ++p)
        if (g.nodes()[p].boundary == BoundaryKind::outer) mu = std::max(mu, (*f[i])[p].norm());
      PerturbationSpec spec(*f[i], h, mu, std::max(lip, 1e-300) * (1 + 1e-6),
                            std::max(spread / hole.radius, 1e-300) * (1 + 1e-6), mean);
      out.perturbation[i] = perturbation_gap(spec);
    } catch (const DomainError& err) {
      throw DomainError("final comparison, " + who + " annulus: " + err.what());
    }
  }
  out.gap = out.area_e - out.area_sigma;

  TriMesh4 flat(std::move(flat_v), std::move(flat_t));
  flat_e = area_in_region(flat, half);
  out.quadrature_tolerance = std::abs(flat_e - pi / 2) + std::abs(pi / 2 - flat_sigma);

  const double theta1 = cfg.theta1.value_or(pair.alpha1);
  const double c02 = out.c0 * out.c0;
  auto cover = check_projection_surjectivity(e, pair, o_e, rho, cfg.raster);
  for (int i = 0; i < 2; ++i) out.inner_surjective[i] = cover[i].surjective;
  out.inner_e_lower = 2 * pi * rho * rho / (1 + 2 * std::cos(theta1));
  out.inner_sigma_upper = 2 * pi * rho * rho * (1 + (c02 + c02 * c02) / 2);
  double diff_bound = 2 * pi * rho * rho * ((c02 + c02 * c02) / 2 + 2 * std::cos(pair.alpha1));
  bool surj = out.inner_surjective[0] && out.inner_surjective[1];
  // the upper bound is attained by flat sheets, so allow for roundoff
  const double roundoff = 1e-12 * 2 * pi * rho * rho;
  out.rows.push_back({"inner_projection_lower", out.inner_e, out.inner_e_lower, surj && out.inner_e >= out.inner_e_lower});
  out.rows.push_back({"inner_competitor_upper", out.inner_sigma, out.inner_sigma_upper,
                      out.inner_sigma <= out.inner_sigma_upper + roundoff});
  out.rows.push_back(
      {"inner_difference", out.inner_sigma - out.inner_e, diff_bound, out.inner_sigma - out.inner_e <= diff_bound + roundoff});
  out.rows.push_back({"total_gap", out.gap, 0.0, out.gap > 0});
  return out;
}

inline nlohmann::json report_to_json(const CompetitorReport& r) {
  nlohmann::json sheets = nlohmann::json::array();
  for (int i = 0; i < 2; ++i) {
    const auto& p = r.perturbation[i];
    sheets.push_back({{"area_e", r.sheet_e[i]},
                      {"area_sigma", r.sheet_sigma[i]},
                      {"gap", r.sheet_gap[i]},
                      {"perturbation",
                       {{"lhs", p.lhs},
                        {"energy", p.energy},
                        {"slack_scale", p.slack_scale},
                        {"slack_constant", p.slack_constant},
                        {"c0", p.c0},
                        {"cell_violations", p.cell_violations},
                        {"in_regime", p.in_regime}}}});
  }
  return {{"area_e", r.area_e},
          {"area_sigma", r.area_sigma},
          {"gap", r.gap},
          {"positive", r.positive()},
          {"inner_e", r.inner_e},
          {"inner_sigma", r.inner_sigma},
          {"c0", r.c0},
          {"quadrature_tolerance", r.quadrature_tolerance},
          {"sheets", sheets},
          {"rows", rows_to_json(r.rows)}};
}

} // namespace twoplane
