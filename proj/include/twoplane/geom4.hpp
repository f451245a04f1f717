#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace twoplane {

using Vec4 = Eigen::Vector4d;
using Vec2 = Eigen::Vector2d;
using Frame4 = std::array<Vec4, 4>;

inline Frame4 standard_frame() {
  Frame4 f;
  for (int i = 0; i < 4; ++i) f[i] = Vec4::Unit(i);
  return f;
}

inline double frame_defect(const Frame4& f) {
  double worst = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      worst = std::max(worst, std::abs(f[i].dot(f[j]) - (i == j ? 1.0 : 0.0)));
  return worst;
}

// Affine 2-plane: offset + span(b1, b2) with b1, b2 orthonormal.
struct Plane2 {
  Vec4 b1 = Vec4::Unit(0);
  Vec4 b2 = Vec4::Unit(1);
  Vec4 offset = Vec4::Zero();

  static Plane2 spanned(const Vec4& a, const Vec4& b, const Vec4& offset = Vec4::Zero()) {
    Vec4 u = a.normalized();
    Vec4 w = b - b.dot(u) * u;
    if (!(w.norm() > 1e-14)) throw DomainError("Plane2::spanned: dependent vectors");
    return Plane2{u, w.normalized(), offset};
  }

  Vec2 coords(const Vec4& x) const {
    Vec4 d = x - offset;
    return {d.dot(b1), d.dot(b2)};
  }
  Vec4 point(const Vec2& c) const { return offset + c.x() * b1 + c.y() * b2; }
  // orthogonal projection of a direction onto the linear span
  Vec4 along(const Vec4& d) const { return d.dot(b1) * b1 + d.dot(b2) * b2; }
  Vec4 project(const Vec4& x) const { return offset + along(x - offset); }
  double distance(const Vec4& x) const {
    Vec4 d = x - offset;
    return (d - along(d)).norm();
  }
  Plane2 translated(const Vec4& t) const { return Plane2{b1, b2, offset + t}; }
  bool parallel_to(const Plane2& o, double tol = 1e-9) const {
    return std::abs(o.along(b1).norm() - 1.0) < tol && std::abs(o.along(b2).norm() - 1.0) < tol;
  }
};

struct PlanePair {
  double alpha1 = std::numbers::pi / 2;
  double alpha2 = std::numbers::pi / 2;
  Frame4 frame = standard_frame();
  Plane2 p1, p2;
  std::array<Vec4, 2> n1, n2;  // orthonormal bases of the orthogonal complements
  double xi = 0.0;

  const Plane2& sheet(int i) const { return i == 0 ? p1 : p2; }
  const std::array<Vec4, 2>& normals(int i) const { return i == 0 ? n1 : n2; }
};

inline PlanePair make_plane_pair(double alpha1, double alpha2, const Frame4& frame = standard_frame()) {
  constexpr double half_pi = std::numbers::pi / 2;
  if (!(alpha1 >= 0.0 && alpha1 <= alpha2 && alpha2 <= half_pi))
    throw DomainError("make_plane_pair: need 0 <= alpha1 <= alpha2 <= pi/2");
  if (!(frame_defect(frame) <= 1e-12)) throw DomainError("make_plane_pair: frame is not orthonormal");
  const auto& e = frame;
  PlanePair p;
  p.alpha1 = alpha1;
  p.alpha2 = alpha2;
  p.frame = frame;
  double c1 = std::cos(alpha1), s1 = std::sin(alpha1), c2 = std::cos(alpha2), s2 = std::sin(alpha2);
  p.p1 = Plane2{e[0], e[1], Vec4::Zero()};
  p.p2 = Plane2{c1 * e[0] + s1 * e[2], c2 * e[1] + s2 * e[3], Vec4::Zero()};
  p.n1 = {e[2], e[3]};
  p.n2 = {-s1 * e[0] + c1 * e[2], -s2 * e[1] + c2 * e[3]};
  p.xi = 2.0 * c1;
  return p;
}

// Principal angles, ascending. Cosines and sines are both taken from singular
// values so that small angles keep full precision.
inline std::pair<double, double> characteristic_angles(const Plane2& P, const Plane2& Q) {
  Eigen::Matrix2d G;
  G << P.b1.dot(Q.b1), P.b1.dot(Q.b2), P.b2.dot(Q.b1), P.b2.dot(Q.b2);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(G);
  Eigen::Matrix<double, 4, 2> R;
  R.col(0) = Q.b1 - P.along(Q.b1);
  R.col(1) = Q.b2 - P.along(Q.b2);
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 2>> svr(R);
  Vec2 c = svd.singularValues();  // descending
  Vec2 s = svr.singularValues();  // descending
  double a1 = std::atan2(s(1), c(0));
  double a2 = std::atan2(s(0), c(1));
  if (a1 > a2) std::swap(a1, a2);
  return {a1, a2};
}

inline Vec4 project_onto(const Plane2& P, const Vec4& x) { return P.project(x); }

struct Ball {
  Vec4 center = Vec4::Zero();
  double radius = 1.0;
};

// D_alpha(center, radius): intersection of the two solid cylinders.
struct BiCylinder {
  PlanePair pair;
  Vec4 center = Vec4::Zero();
  double radius = 1.0;

  double cylinder_norm(int i, const Vec4& x) const { return pair.sheet(i).along(x - center).norm(); }
  // |y| <= radius * sqrt(2 / (1 - cos alpha1)) on the bicylinder
  double bounding_radius() const {
    double c = std::cos(pair.alpha1);
    if (c > 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
    return radius * std::sqrt(2.0 / (1.0 - c));
  }
};

using Region = std::variant<Ball, BiCylinder>;

inline bool contains(const Ball& b, const Vec4& x) { return (x - b.center).norm() <= b.radius; }
inline bool contains(const BiCylinder& d, const Vec4& x) {
  return d.cylinder_norm(0, x) <= d.radius && d.cylinder_norm(1, x) <= d.radius;
}
inline bool contains(const Region& r, const Vec4& x) {
  return std::visit([&](const auto& g) { return contains(g, x); }, r);
}

inline Ball bounding_ball(const Region& r) {
  if (const auto* b = std::get_if<Ball>(&r)) return *b;
  const auto& d = std::get<BiCylinder>(r);
  return Ball{d.center, d.bounding_radius()};
}

inline Vec4 region_center(const Region& r) {
  return std::visit([](const auto& g) { return g.center; }, r);
}

inline double region_radius(const Region& r) {
  return std::visit([](const auto& g) { return g.radius; }, r);
}

// Uniform dilation x -> about + lambda (x - about).
inline Region dilate(const Region& r, const Vec4& about, double lambda) {
  return std::visit(
      [&](auto g) -> Region {
        g.center = about + lambda * (g.center - about);
        g.radius *= lambda;
        return g;
      },
      r);
}

// Additive recurrence with the generalized golden ratio (Roberts' R_d).
namespace lowdisc {

inline double phi(int d) {
  double x = 2.0;
  for (int i = 0; i < 60; ++i) x -= (std::pow(x, d + 1) - x - 1.0) / ((d + 1) * std::pow(x, d) - 1.0);
  return x;
}

template <int D>
struct Sequence {
  std::array<double, D> alpha{};
  Sequence() {
    double g = phi(D);
    for (int j = 0; j < D; ++j) alpha[j] = std::pow(1.0 / g, j + 1);
  }
  std::array<double, D> operator()(std::size_t k) const {
    std::array<double, D> p{};
    for (int j = 0; j < D; ++j) {
      double v = 0.5 + alpha[j] * static_cast<double>(k + 1);
      p[j] = v - std::floor(v);
    }
    return p;
  }
};

} // namespace lowdisc

template <class S>
concept PointSetQuery = requires(const S& s, const Vec4& x, const Region& r, std::size_t n, std::vector<Vec4>& out) {
  { s.distance(x) } -> std::convertible_to<double>;
  s.sample(r, n, out);
};

namespace detail {

// Disc in a plane covering plane ∩ region; radius < 0 when empty.
inline std::pair<Vec4, double> covering_disc(const Plane2& s, const Region& region) {
  if (const auto* d = std::get_if<BiCylinder>(&region)) {
    for (int i = 0; i < 2; ++i) {
      const Plane2& P = d->pair.sheet(i);
      if (s.parallel_to(P)) return {s.offset + P.along(d->center - s.offset), d->radius};
    }
  }
  Ball b = bounding_ball(region);
  if (!std::isfinite(b.radius)) throw DomainError("covering_disc: degenerate bicylinder");
  Vec4 c = s.project(b.center);
  double h2 = (b.center - c).squaredNorm();
  double r2 = b.radius * b.radius - h2;
  return {c, r2 < 0 ? -1.0 : std::sqrt(r2)};
}

inline void sample_plane(const Plane2& s, const Region& region, std::size_t n, std::vector<Vec4>& out) {
  auto [c, rho] = covering_disc(s, region);
  if (rho < 0 || n == 0) return;
  static const lowdisc::Sequence<2> seq;
  std::size_t got = 0;
  const std::size_t limit = 64 * n + 64;
  for (std::size_t k = 0; k < limit && got < n; ++k) {
    auto u = seq(k);
    double rr = rho * std::sqrt(u[0]);
    double th = 2.0 * std::numbers::pi * u[1];
    Vec4 y = c + rr * (std::cos(th) * s.b1 + std::sin(th) * s.b2);
    if (contains(region, y)) {
      out.push_back(y);
      ++got;
    }
  }
}

} // namespace detail

// Finite union of affine planes, e.g. P_alpha + q.
class PlaneUnion {
public:
  explicit PlaneUnion(std::vector<Plane2> sheets) : sheets_(std::move(sheets)) {}
  static PlaneUnion of(const PlanePair& pair, const Vec4& q = Vec4::Zero()) {
    return PlaneUnion({pair.p1.translated(q), pair.p2.translated(q)});
  }
  static PlaneUnion single(const Plane2& p) { return PlaneUnion({p}); }

  const std::vector<Plane2>& sheets() const { return sheets_; }

  double distance(const Vec4& x) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : sheets_) d = std::min(d, s.distance(x));
    return d;
  }

  void sample(const Region& region, std::size_t n, std::vector<Vec4>& out) const {
    if (sheets_.empty()) return;
    std::size_t per = (n + sheets_.size() - 1) / sheets_.size();
    for (const auto& s : sheets_) detail::sample_plane(s, region, per, out);
  }

  PlaneUnion dilated(const Vec4& about, double lambda) const {
    std::vector<Plane2> out;
    for (auto s : sheets_) {
      s.offset = about + lambda * (s.offset - about);
      out.push_back(s);
    }
    return PlaneUnion(std::move(out));
  }

private:
  std::vector<Plane2> sheets_;
};

struct RelativeDistance {
  double value = 0.0;             // sup estimate from all samples, divided by r
  double coarse = 0.0;            // same estimate from every fourth sample
  double refinement_delta = 0.0;  // value - coarse, never negative
  std::size_t samples_first = 0;
  std::size_t samples_second = 0;
};

namespace detail {

template <class To>
std::pair<double, double> one_sided_sup(const std::vector<Vec4>& pts, const To& target) {
  double all = 0.0, sub = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = target.distance(pts[i]);
    all = std::max(all, d);
    if (i % 4 == 0) sub = std::max(sub, d);
  }
  return {all, sub};
}

} // namespace detail

// (1/r) max(sup_{E∩U} d(., F), sup_{F∩U} d(., E)) over low-discrepancy samples.
// An empty side contributes nothing, so two empty sides give 0.
template <PointSetQuery A, PointSetQuery B>
RelativeDistance relative_distance(const A& e, const B& f, const Region& region, double r, std::size_t n = 4096) {
  if (!(r > 0)) throw DomainError("relative_distance: r must be positive");
  std::vector<Vec4> se, sf;
  e.sample(region, n, se);
  f.sample(region, n, sf);
  auto [a, a4] = detail::one_sided_sup(se, f);
  auto [b, b4] = detail::one_sided_sup(sf, e);
  RelativeDistance out;
  out.value = std::max(a, b) / r;
  out.coarse = std::max(a4, b4) / r;
  out.refinement_delta = out.value - out.coarse;
  out.samples_first = se.size();
  out.samples_second = sf.size();
  return out;
}

inline void to_json(nlohmann::json& j, const Vec4& v) { j = nlohmann::json::array({v(0), v(1), v(2), v(3)}); }

inline Vec4 vec4_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw DomainError("expected an array of 4 numbers");
  return Vec4(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline nlohmann::json plane_pair_to_json(const PlanePair& p) {
  nlohmann::json frame = nlohmann::json::array();
  for (const auto& e : p.frame) frame.push_back(nlohmann::json::array({e(0), e(1), e(2), e(3)}));
  return {{"alpha1", p.alpha1}, {"alpha2", p.alpha2}, {"frame", frame}};
}

inline PlanePair plane_pair_from_json(const nlohmann::json& j) {
  Frame4 f = standard_frame();
  if (j.contains("frame")) {
    const auto& fr = j.at("frame");
    if (!fr.is_array() || fr.size() != 4) throw DomainError("frame must hold 4 vectors");
    for (int i = 0; i < 4; ++i) f[i] = vec4_from_json(fr[i]);
  }
  return make_plane_pair(j.at("alpha1").get<double>(), j.at("alpha2").get<double>(), f);
}

} // namespace twoplane
