#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geom4.hpp"

namespace twoplane {

using Tri = std::array<std::uint32_t, 3>;

namespace detail {

struct Box4 {
  Vec4 lo = Vec4::Constant(std::numeric_limits<double>::infinity());
  Vec4 hi = Vec4::Constant(-std::numeric_limits<double>::infinity());
  void grow(const Vec4& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Box4& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double dist2(const Vec4& p) const {
    Vec4 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec4::Zero());
    return d.squaredNorm();
  }
};

// Closest point on triangle (a, b, c) to p; dimension-free (Ericson).
template <class V>
V closest_on_triangle(const V& p, const V& a, const V& b, const V& c) {
  V ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  V bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double den = d1 - d3;
    return den > 0 ? V(a + (d1 / den) * ab) : a;
  }
  V cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double den = d2 - d6;
    return den > 0 ? V(a + (d2 / den) * ac) : a;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double den = (d4 - d3) + (d5 - d6);
    return den > 0 ? V(b + ((d4 - d3) / den) * (c - b)) : b;
  }
  double den = va + vb + vc;
  if (!(den > 0)) {
    // degenerate triangle: best of the three edges
    auto seg = [&](const V& u, const V& w) {
      V e = w - u;
      double l = e.squaredNorm();
      double t = l > 0 ? std::clamp((p - u).dot(e) / l, 0.0, 1.0) : 0.0;
      return V(u + t * e);
    };
    V q1 = seg(a, b), q2 = seg(b, c), q3 = seg(a, c);
    V best = q1;
    if ((q2 - p).squaredNorm() < (best - p).squaredNorm()) best = q2;
    if ((q3 - p).squaredNorm() < (best - p).squaredNorm()) best = q3;
    return best;
  }
  double v = vb / den, w = vc / den;
  return a + v * ab + w * ac;
}

// Bounding volume hierarchy over abstract primitives with 4D boxes.
class Bvh {
public:
  struct Node {
    Box4 box;
    std::uint32_t first = 0, count = 0;  // leaf when count > 0
    std::uint32_t left = 0, right = 0;
  };

  Bvh() = default;
  explicit Bvh(const std::vector<Box4>& boxes) {
    order_.resize(boxes.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (boxes.empty()) return;
    std::vector<Vec4> centers(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) centers[i] = 0.5 * (boxes[i].lo + boxes[i].hi);
    nodes_.reserve(2 * boxes.size());
    build(boxes, centers, 0, static_cast<std::uint32_t>(boxes.size()));
  }

  const std::vector<std::uint32_t>& order() const { return order_; }
  bool empty() const { return nodes_.empty(); }

  // Nearest primitive distance; prim(i, best2) returns the squared distance to primitive i.
  template <class F>
  double nearest2(const Vec4& p, F&& prim) const {
    double best = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& n = nodes_[stack[--top]];
      if (n.box.dist2(p) >= best) continue;
      if (n.count > 0) {
        for (std::uint32_t k = n.first; k < n.first + n.count; ++k) best = std::min(best, prim(order_[k]));
        continue;
      }
      const Node& l = nodes_[n.left];
      const Node& r = nodes_[n.right];
      double dl = l.box.dist2(p), dr = r.box.dist2(p);
      if (dl < dr) {
        if (dr < best) stack[top++] = n.right;
        if (dl < best) stack[top++] = n.left;
      } else {
        if (dl < best) stack[top++] = n.left;
        if (dr < best) stack[top++] = n.right;
      }
    }
    return best;
  }

  // Primitives whose boxes come within radius of p, in index order.
  std::vector<std::uint32_t> within(const Vec4& p, double radius) const {
    std::vector<std::uint32_t> out;
    if (nodes_.empty()) return out;
    double r2 = radius * radius;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (n.box.dist2(p) > r2) continue;
      if (n.count > 0) {
        for (std::uint32_t k = n.first; k < n.first + n.count; ++k) out.push_back(order_[k]);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  std::uint32_t build(const std::vector<Box4>& boxes, const std::vector<Vec4>& centers, std::uint32_t first,
                      std::uint32_t count) {
    std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Box4 box, cbox;
    for (std::uint32_t k = first; k < first + count; ++k) {
      box.grow(boxes[order_[k]]);
      cbox.grow(centers[order_[k]]);
    }
    nodes_[id].box = box;
    if (count <= 4) {
      nodes_[id].first = first;
      nodes_[id].count = count;
      return id;
    }
    int axis = 0;
    (cbox.hi - cbox.lo).maxCoeff(&axis);
    std::uint32_t mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (centers[a](axis) != centers[b](axis)) return centers[a](axis) < centers[b](axis);
                       return a < b;
                     });
    std::uint32_t l = build(boxes, centers, first, mid - first);
    std::uint32_t r = build(boxes, centers, mid, first + count - mid);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

// Signed area of (0, a, b) ∩ disc(0, r).
inline double wedge_disc_area(const Vec2& a, const Vec2& b, double r) {
  auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
  auto sector = [&](const Vec2& u, const Vec2& v) {
    return 0.5 * r * r * std::atan2(cross(u, v), u.dot(v));
  };
  Vec2 d = b - a;
  double A = d.squaredNorm();
  if (A <= 0) return 0.0;
  double B = a.dot(d), C = a.squaredNorm() - r * r;
  double disc = B * B - A * C;
  if (disc <= 0) return sector(a, b);
  double sq = std::sqrt(disc);
  double t1 = std::clamp((-B - sq) / A, 0.0, 1.0);
  double t2 = std::clamp((-B + sq) / A, 0.0, 1.0);
  Vec2 p1 = a + t1 * d, p2 = a + t2 * d;
  double area = 0.0;
  if (t1 > 0) area += sector(a, p1);
  area += 0.5 * cross(p1, p2);
  if (t2 < 1) area += sector(p2, b);
  return area;
}

} // namespace detail

// Exact area of a planar triangle intersected with a disc.
inline double triangle_disc_area(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& center, double r) {
  if (!(r > 0)) return 0.0;
  Vec2 pa = a - center, pb = b - center, pc = c - center;
  double s = detail::wedge_disc_area(pa, pb, r) + detail::wedge_disc_area(pb, pc, r) +
             detail::wedge_disc_area(pc, pa, r);
  return std::abs(s);
}

inline double gram_area(const Vec4& a, const Vec4& b, const Vec4& c) {
  Vec4 u = b - a, v = c - a;
  double g = u.squaredNorm() * v.squaredNorm() - u.dot(v) * u.dot(v);
  return 0.5 * std::sqrt(std::max(g, 0.0));
}

// Immutable triangulated 2-set in R^4.
class TriMesh4 {
public:
  TriMesh4() = default;
  TriMesh4(std::vector<Vec4> vertices, std::vector<Tri> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    areas_.reserve(triangles_.size());
    std::vector<detail::Box4> boxes;
    boxes.reserve(triangles_.size());
    for (const auto& t : triangles_) {
      for (auto i : t)
        if (i >= vertices_.size()) throw DomainError("TriMesh4: triangle index out of range");
      double a = gram_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
      if (!(a > 0)) throw DomainError("TriMesh4: degenerate triangle");
      areas_.push_back(a);
      detail::Box4 b;
      for (auto i : t) b.grow(vertices_[i]);
      boxes.push_back(b);
    }
    total_area_ = 0.0;
    for (double a : areas_) total_area_ += a;
    bvh_ = std::make_shared<const detail::Bvh>(boxes);
  }

  const std::vector<Vec4>& vertices() const { return vertices_; }
  const std::vector<Tri>& triangles() const { return triangles_; }
  const std::vector<double>& areas() const { return areas_; }
  double total_area() const { return total_area_; }
  std::size_t size() const { return triangles_.size(); }

  double triangle_distance(std::size_t t, const Vec4& p) const {
    const auto& tr = triangles_[t];
    Vec4 q = detail::closest_on_triangle(p, vertices_[tr[0]], vertices_[tr[1]], vertices_[tr[2]]);
    return (q - p).norm();
  }

  double distance(const Vec4& p) const {
    if (triangles_.empty()) throw DomainError("TriMesh4::distance: empty mesh");
    double d2 = bvh_->nearest2(p, [&](std::uint32_t t) {
      const auto& tr = triangles_[t];
      Vec4 q = detail::closest_on_triangle(p, vertices_[tr[0]], vertices_[tr[1]], vertices_[tr[2]]);
      return (q - p).squaredNorm();
    });
    return std::sqrt(d2);
  }

  double distance_brute_force(const Vec4& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < triangles_.size(); ++t) best = std::min(best, triangle_distance(t, p));
    return best;
  }

  std::vector<std::uint32_t> triangles_near(const Vec4& p, double radius) const {
    return bvh_ ? bvh_->within(p, radius) : std::vector<std::uint32_t>{};
  }

  // Area-weighted low-discrepancy samples of mesh ∩ region.
  void sample(const Region& region, std::size_t n, std::vector<Vec4>& out) const {
    Ball b = bounding_ball(region);
    std::vector<std::uint32_t> cand = std::isfinite(b.radius) ? triangles_near(b.center, b.radius)
                                                              : all_triangles();
    if (cand.empty() || n == 0) return;
    std::vector<double> cdf(cand.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i) cdf[i] = (acc += areas_[cand[i]]);
    static const lowdisc::Sequence<3> seq;
    std::size_t got = 0;
    const std::size_t limit = 64 * n + 64;
    for (std::size_t k = 0; k < limit && got < n; ++k) {
      auto u = seq(k);
      double target = u[0] * acc;
      std::size_t i = std::min<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin(),
                                            cand.size() - 1);
      const auto& tr = triangles_[cand[i]];
      double s = std::sqrt(u[1]);
      Vec4 y = (1 - s) * vertices_[tr[0]] + s * (1 - u[2]) * vertices_[tr[1]] + s * u[2] * vertices_[tr[2]];
      if (contains(region, y)) {
        out.push_back(y);
        ++got;
      }
    }
  }

  TriMesh4 dilated(const Vec4& about, double lambda) const {
    std::vector<Vec4> v = vertices_;
    for (auto& p : v) p = about + lambda * (p - about);
    return TriMesh4(std::move(v), triangles_);
  }

  TriMesh4 translated(const Vec4& t) const {
    std::vector<Vec4> v = vertices_;
    for (auto& p : v) p += t;
    return TriMesh4(std::move(v), triangles_);
  }

  // Sub-mesh of the triangles accepted by keep(t).
  template <class Pred>
  TriMesh4 filtered(Pred keep) const {
    std::vector<Tri> tris;
    for (std::size_t t = 0; t < triangles_.size(); ++t)
      if (keep(t)) tris.push_back(triangles_[t]);
    return TriMesh4(vertices_, std::move(tris));
  }

  double edge_length_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : triangles_)
      for (int k = 0; k < 3; ++k) m = std::min(m, (vertices_[t[k]] - vertices_[t[(k + 1) % 3]]).norm());
    return m;
  }

private:
  std::vector<std::uint32_t> all_triangles() const {
    std::vector<std::uint32_t> v(triangles_.size());
    std::iota(v.begin(), v.end(), 0u);
    return v;
  }

  std::vector<Vec4> vertices_;
  std::vector<Tri> triangles_;
  std::vector<double> areas_;
  double total_area_ = 0.0;
  std::shared_ptr<const detail::Bvh> bvh_;
};

inline TriMesh4 merge(const TriMesh4& a, const TriMesh4& b) {
  std::vector<Vec4> v = a.vertices();
  std::vector<Tri> t = a.triangles();
  auto off = static_cast<std::uint32_t>(v.size());
  v.insert(v.end(), b.vertices().begin(), b.vertices().end());
  for (auto tr : b.triangles()) t.push_back({tr[0] + off, tr[1] + off, tr[2] + off});
  return TriMesh4(std::move(v), std::move(t));
}

inline double point_to_set_distance(const TriMesh4& m, const Vec4& x) { return m.distance(x); }

namespace detail {

// Area of the part of a triangle where both affine functions are >= 0.
inline double clipped_fraction(const std::array<double, 3>& f, const std::array<double, 3>& g) {
  using P = Vec2;
  std::vector<P> poly{P(0, 0), P(1, 0), P(0, 1)};
  std::vector<double> fv{f[0], f[1], f[2]}, gv{g[0], g[1], g[2]};
  auto clip = [](std::vector<P>& pts, std::vector<double>& val, std::vector<double>& other) {
    std::vector<P> np;
    std::vector<double> nv, no;
    std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = (i + 1) % n;
      bool ini = val[i] >= 0, inj = val[j] >= 0;
      if (ini) {
        np.push_back(pts[i]);
        nv.push_back(val[i]);
        no.push_back(other[i]);
      }
      if (ini != inj) {
        double t = val[i] / (val[i] - val[j]);
        np.push_back(pts[i] + t * (pts[j] - pts[i]));
        nv.push_back(0.0);
        no.push_back(other[i] + t * (other[j] - other[i]));
      }
    }
    pts.swap(np);
    val.swap(nv);
    other.swap(no);
  };
  clip(poly, fv, gv);
  if (poly.size() < 3) return 0.0;
  clip(poly, gv, fv);
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const P& p = poly[i];
    const P& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - p.y() * q.x();
  }
  return std::abs(a);  // the reference triangle has doubled area 1
}

// Each cylinder projects to a disc in its own plane, so a triangle cut by one
// cylinder only is clipped exactly: the projection scales all areas in the
// triangle by the same factor. Triangles cut by both boundaries are split.
inline double bicylinder_triangle_area(const BiCylinder& d, const Vec4& a, const Vec4& b, const Vec4& c, double area,
                                       int depth) {
  auto level = [&](int i, const Vec4& y) { return d.radius - d.cylinder_norm(i, y); };
  std::array<double, 3> f{level(0, a), level(0, b), level(0, c)};
  std::array<double, 3> g{level(1, a), level(1, b), level(1, c)};
  bool in0 = std::min({f[0], f[1], f[2]}) >= 0, in1 = std::min({g[0], g[1], g[2]}) >= 0;
  if (in0 && in1) return area;
  std::array<std::array<Vec2, 3>, 2> proj;
  for (int i = 0; i < 2; ++i) {
    const Plane2& P = d.pair.sheet(i);
    proj[i] = {P.coords(a + P.offset - d.center), P.coords(b + P.offset - d.center),
               P.coords(c + P.offset - d.center)};
    // fully outside cylinder i: the projected triangle misses the disc
    Vec2 q = closest_on_triangle(Vec2(0, 0), proj[i][0], proj[i][1], proj[i][2]);
    if (q.norm() > d.radius) return 0.0;
  }
  auto exact = [&](int i) -> std::optional<double> {
    const auto& p = proj[i];
    Vec2 u = p[1] - p[0], v = p[2] - p[0];
    double pa = 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
    if (!(pa > 1e-9 * area)) return std::nullopt;
    return area * std::min(1.0, triangle_disc_area(p[0], p[1], p[2], Vec2(0, 0), d.radius) / pa);
  };
  if (in1)
    if (auto v = exact(0)) return *v;
  if (in0)
    if (auto v = exact(1)) return *v;
  if (depth >= 16) return area * clipped_fraction(f, g);
  Vec4 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  double q = 0.25 * area;
  return bicylinder_triangle_area(d, a, ab, ca, q, depth + 1) + bicylinder_triangle_area(d, ab, b, bc, q, depth + 1) +
         bicylinder_triangle_area(d, ca, bc, c, q, depth + 1) + bicylinder_triangle_area(d, ab, bc, ca, q, depth + 1);
}

inline double ball_triangle_area(const Ball& ball, const Vec4& a, const Vec4& b, const Vec4& c) {
  Vec4 u = b - a;
  Vec4 e1 = u.normalized();
  Vec4 w = (c - a) - (c - a).dot(e1) * e1;
  Vec4 e2 = w.normalized();
  Vec4 rel = ball.center - a;
  Vec2 cc(rel.dot(e1), rel.dot(e2));
  double h2 = (rel - cc.x() * e1 - cc.y() * e2).squaredNorm();
  double r2 = ball.radius * ball.radius - h2;
  if (r2 <= 0) return 0.0;
  Vec2 pa(0, 0), pb(u.dot(e1), 0), pc((c - a).dot(e1), (c - a).dot(e2));
  return triangle_disc_area(pa, pb, pc, cc, std::sqrt(r2));
}

} // namespace detail

// H^2(M ∩ region). Balls are clipped exactly in each triangle's plane; bicylinders
// exactly wherever a single boundary crosses a triangle.
inline double area_in_region(const TriMesh4& m, const Region& region) {
  Ball b = bounding_ball(region);
  auto cand = std::isfinite(b.radius) ? m.triangles_near(b.center, b.radius) : std::vector<std::uint32_t>{};
  if (!std::isfinite(b.radius)) {
    cand.resize(m.size());
    std::iota(cand.begin(), cand.end(), 0u);
  }
  const auto& V = m.vertices();
  double total = 0.0;
  for (auto t : cand) {
    const auto& tr = m.triangles()[t];
    const Vec4 &a = V[tr[0]], &bb = V[tr[1]], &c = V[tr[2]];
    double area = m.areas()[t];
    if (const auto* ball = std::get_if<Ball>(&region)) {
      total += detail::ball_triangle_area(*ball, a, bb, c);
    } else {
      total += detail::bicylinder_triangle_area(std::get<BiCylinder>(region), a, bb, c, area, 0);
    }
  }
  return total;
}

struct DensityCurve {
  Vec4 center = Vec4::Zero();
  std::vector<double> radii;
  std::vector<double> values;
};

// theta_x(r) = H^2(M ∩ B(x, r)) / r^2, reported raw (a plane gives pi).
inline DensityCurve density(const TriMesh4& m, const Vec4& x, const std::vector<double>& radii) {
  DensityCurve out;
  out.center = x;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0)) throw DomainError("density: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw DomainError("density: radii must increase strictly");
  }
  out.radii = radii;
  for (double r : radii) out.values.push_back(area_in_region(m, Ball{x, r}) / (r * r));
  return out;
}

struct Mesh2 {
  std::vector<Vec2> points;
  std::vector<Tri> triangles;
};

// Disc triangulation by concentric rings. grading_inner > 0 switches to geometric
// rings down to that radius, each with `resolution` points.
inline Mesh2 disc_mesh(double radius, int resolution, double grading_inner = 0.0) {
  if (!(radius > 0) || resolution < 4) throw DomainError("disc_mesh: need radius > 0 and resolution >= 4");
  Mesh2 m;
  m.points.push_back(Vec2(0, 0));
  std::vector<std::vector<std::uint32_t>> rings;
  std::vector<double> phases;
  auto add_ring = [&](double r, int n, double phase) {
    phases.push_back(phase);
    std::vector<std::uint32_t> ids;
    for (int k = 0; k < n; ++k) {
      double th = 2 * std::numbers::pi * (k + phase) / n;
      ids.push_back(static_cast<std::uint32_t>(m.points.size()));
      m.points.push_back(Vec2(r * std::cos(th), r * std::sin(th)));
    }
    rings.push_back(std::move(ids));
  };
  if (grading_inner > 0) {
    double step = std::log1p(2 * std::numbers::pi / resolution);
    int nr = std::max(1, static_cast<int>(std::ceil(std::log(radius / grading_inner) / step)));
    for (int j = 0; j <= nr; ++j)
      add_ring(grading_inner * std::pow(radius / grading_inner, static_cast<double>(j) / nr), resolution,
               0.5 * (j % 2));
  } else {
    int nr = std::max(1, resolution / 4);
    for (int j = 1; j <= nr; ++j) {
      int n = std::max(6, static_cast<int>(std::lround(static_cast<double>(resolution) * j / nr)));
      if (j == nr) n = resolution;
      add_ring(radius * j / nr, n, 0.0);
    }
  }
  const auto& r0 = rings.front();
  for (std::size_t k = 0; k < r0.size(); ++k) m.triangles.push_back({0u, r0[k], r0[(k + 1) % r0.size()]});
  // stitch consecutive rings by merging their angular orders
  for (std::size_t j = 1; j < rings.size(); ++j) {
    const auto& in = rings[j - 1];
    const auto& out = rings[j];
    const std::size_t ni = in.size(), no = out.size();
    auto ang = [](double phase, std::size_t idx, std::size_t n) { return (idx + phase) / static_cast<double>(n); };
    std::size_t i = 0, k = 0;
    while (i < ni || k < no) {
      bool advance_out = i >= ni || (k < no && ang(phases[j], k + 1, no) <= ang(phases[j - 1], i + 1, ni));
      if (advance_out) {
        m.triangles.push_back({in[i % ni], out[k % no], out[(k + 1) % no]});
        ++k;
      } else {
        m.triangles.push_back({in[i % ni], out[k % no], in[(i + 1) % ni]});
        ++i;
      }
    }
  }
  return m;
}

// Lift a planar mesh onto sheet i of the pair, displaced by g(x) in the normal plane.
inline TriMesh4 lift_to_sheet(const PlanePair& pair, int sheet, const Mesh2& m,
                              const std::function<Vec2(const Vec2&)>& g = {}, const Vec4& shift = Vec4::Zero()) {
  const Plane2& P = pair.sheet(sheet);
  const auto& n = pair.normals(sheet);
  std::vector<Vec4> v;
  v.reserve(m.points.size());
  for (const auto& x : m.points) {
    Vec4 y = P.point(x) + shift;
    if (g) {
      Vec2 h = g(x);
      y += h.x() * n[0] + h.y() * n[1];
    }
    v.push_back(y);
  }
  return TriMesh4(std::move(v), m.triangles);
}

inline TriMesh4 mesh_plane_pair(const PlanePair& pair, double radius, int resolution) {
  Mesh2 d = disc_mesh(radius, resolution);
  return merge(lift_to_sheet(pair, 0, d), lift_to_sheet(pair, 1, d));
}

// Unstructured points; distance and sampling only.
class PointCloud4 {
public:
  PointCloud4() = default;
  explicit PointCloud4(std::vector<Vec4> points) : points_(std::move(points)) {
    std::vector<detail::Box4> boxes(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) boxes[i].grow(points_[i]);
    bvh_ = std::make_shared<const detail::Bvh>(boxes);
  }
  const std::vector<Vec4>& points() const { return points_; }
  double distance(const Vec4& p) const {
    if (points_.empty()) throw DomainError("PointCloud4::distance: empty cloud");
    return std::sqrt(bvh_->nearest2(p, [&](std::uint32_t i) { return (points_[i] - p).squaredNorm(); }));
  }
  void sample(const Region& region, std::size_t n, std::vector<Vec4>& out) const {
    std::size_t got = 0;
    for (const auto& p : points_) {
      if (got >= n) break;
      if (contains(region, p)) {
        out.push_back(p);
        ++got;
      }
    }
  }

private:
  std::vector<Vec4> points_;
  std::shared_ptr<const detail::Bvh> bvh_;
};

inline nlohmann::json mesh_to_json(const TriMesh4& m) {
  nlohmann::json v = nlohmann::json::array(), t = nlohmann::json::array();
  for (const auto& p : m.vertices()) v.push_back(nlohmann::json::array({p(0), p(1), p(2), p(3)}));
  for (const auto& tr : m.triangles()) t.push_back(nlohmann::json::array({tr[0], tr[1], tr[2]}));
  return {{"vertices", v}, {"triangles", t}};
}

inline TriMesh4 mesh_from_json(const nlohmann::json& j) {
  std::vector<Vec4> v;
  std::vector<Tri> t;
  for (const auto& p : j.at("vertices")) v.push_back(vec4_from_json(p));
  for (const auto& tr : j.at("triangles")) {
    if (!tr.is_array() || tr.size() != 3) throw DomainError("mesh: triangles must be index triples");
    t.push_back({tr[0].get<std::uint32_t>(), tr[1].get<std::uint32_t>(), tr[2].get<std::uint32_t>()});
  }
  return TriMesh4(std::move(v), std::move(t));
}

inline TriMesh4 read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open mesh file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("mesh file " + path + ": " + e.what());
  }
  return mesh_from_json(j);
}

// One point per row, four comma separated numbers; non-numeric rows are skipped.
inline PointCloud4 read_point_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open point cloud " + path);
  std::vector<Vec4> pts;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Vec4 p;
    if (ss >> p(0) >> p(1) >> p(2) >> p(3)) pts.push_back(p);
  }
  return PointCloud4(std::move(pts));
}

} // namespace twoplane
