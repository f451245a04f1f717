#pragma once

#include <climits>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "meshset.hpp"

namespace twoplane {

template <class S> using Mat2_ = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat4_ = Eigen::Matrix<S, 4, 4>;
using Mat2 = Mat2_<double>;
using Mat4 = Mat4_<double>;

// Gradient matrices are laid out as (u_x v_x; u_y v_y): rows are derivative
// directions, columns are components.

template <class S>
Mat2_<S> star(const Mat2_<S>& m) {
  Mat2_<S> r;
  r << m(1, 1), -m(1, 0), -m(0, 1), m(0, 0);
  return r;
}

template <class S>
S pairing(const Mat2_<S>& a, const Mat2_<S>& b) {
  return a(0, 0) * b(0, 0) + a(0, 1) * b(0, 1) + a(1, 0) * b(1, 0) + a(1, 1) * b(1, 1);
}

template <class S>
S det2(const Mat2_<S>& m) {
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

// S(J) = |J|^2 + (det J)^2
template <class S>
S s_of(const Mat2_<S>& m) {
  S d = det2(m);
  return pairing(m, m) + d * d;
}

// (J + det J J*) / sqrt(1 + S(J)); the derivative of sqrt(1 + S) in J.
template <class S>
Mat2_<S> flux(const Mat2_<S>& m) {
  using std::sqrt;
  return (m + det2(m) * star(m)) / sqrt(S(1) + s_of(m));
}

// Right-hand side of the expansion of S(F + H) - S(F).
template <class S>
S s_difference_expansion(const Mat2_<S>& f, const Mat2_<S>& h) {
  S fh = pairing(f, h), sh = pairing(star(f), h), dh = det2(h);
  return (S(2) * fh + pairing(h, h)) + (sh + dh) * (S(2) * det2(f) + dh + sh);
}

template <class S>
struct Coefficients {
  S xx, yx, xy, yy;  // A_x^x, A_y^x, A_x^y, A_y^y
};

template <class S>
Coefficients<S> coefficients(const Mat2_<S>& m) {
  using std::sqrt;
  const S a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  const S L = sqrt(S(1) + s_of(m));
  return {((S(1) + d * d) * a - b * c * d) / L, ((S(1) + b * b) * c - a * b * d) / L,
          ((S(1) + c * c) * b - a * c * d) / L, ((S(1) + a * a) * d - a * b * c) / L};
}

// Linearization of the minimal graph system at J = (a b; c d).
template <class S>
Mat4_<S> coefficient_matrix(const Mat2_<S>& m) {
  using std::sqrt;
  const S a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  const S L = sqrt(S(1) + s_of(m));
  const auto A = coefficients(m);
  Mat4_<S> M;
  M << S(1) + d * d - A.xx * A.xx, -A.xx * A.yx - b * d, -A.xx * A.xy - c * d, -A.xy * A.yx + S(2) * b * c - a * d,
      -A.yx * A.xx - b * d, S(1) + b * b - A.yx * A.yx, -A.yy * A.xx + S(2) * a * d - b * c, -A.yy * A.yx - a * b,
      -A.xx * A.xy - c * d, -A.xx * A.yy + S(2) * a * d - b * c, S(1) + c * c - A.xy * A.xy, -A.xy * A.yy - a * c,
      -A.yx * A.xy + S(2) * b * c - a * d, -A.yx * A.yy - a * b, -A.yy * A.xy - a * c, S(1) + a * a - A.yy * A.yy;
  return M / L;
}

// Hessian of sqrt(1 + S) in the slots (u_x, u_y, v_x, v_y). It agrees with the
// coefficient matrix except for the two mixed (u_x, v_y) and (u_y, v_x) entries,
// which the coefficient matrix carries crosswise.
template <class S>
Mat4_<S> integrand_hessian(const Mat2_<S>& m) {
  Mat4_<S> M = coefficient_matrix(m);
  Mat4_<S> H = M;
  H(0, 3) = H(3, 0) = M(1, 2);
  H(1, 2) = H(2, 1) = M(0, 3);
  return H;
}

namespace detail {

// Pairwise summation keeps the result independent of any chunking.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t m = n / 2;
  return pairwise_sum(v, m) + pairwise_sum(v + m, n - m);
}

inline double lh_form(const Mat4& A, double s, double t) {
  Eigen::Vector4d w(std::cos(s) * std::cos(t), std::sin(s) * std::cos(t), std::cos(s) * std::sin(t),
                    std::sin(s) * std::sin(t));
  return w.dot(A * w);
}

} // namespace detail

// min over unit xi, eta of sum A_{(i a),(j b)} xi_a xi_b eta_i eta_j.
inline double ellipticity_margin(const Mat4& A) {
  constexpr double pi = std::numbers::pi;
  constexpr int n = 360;
  double best = std::numeric_limits<double>::infinity(), bs = 0, bt = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = pi * i / n, t = pi * j / n;
      double q = detail::lh_form(A, s, t);
      if (q < best) {
        best = q;
        bs = s;
        bt = t;
      }
    }
  double step = pi / n;
  for (int round = 0; round < 8; ++round) {
    double cs = bs, ct = bt;
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        double s = cs + step * i / 10, t = ct + step * j / 10;
        double q = detail::lh_form(A, s, t);
        if (q < best) {
          best = q;
          bs = s;
          bt = t;
        }
      }
    step /= 5;
  }
  return best;
}

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

enum class BoundaryKind : std::uint8_t { none, outer, inner };

struct GridNode {
  Vec2 x;
  BoundaryKind boundary = BoundaryKind::none;
  int i = INT_MIN, j = INT_MIN;  // lattice index, INT_MIN for edge crossings
  bool snapped = false;          // lattice node moved onto the boundary
  double theta = 0.0;            // angle on its boundary circle
  bool is_boundary() const { return boundary != BoundaryKind::none; }
};

// Cut-cell P1 grid over a disc or an annulus. Lattice nodes inside the domain
// are kept, lattice nodes within 1e-3 h of a circle are snapped onto it, and
// every lattice edge from an inside node to an outside point contributes its
// crossing point as a boundary node.
class Grid2 {
public:
  static std::shared_ptr<const Grid2> disc(const Circle& outer, int resolution) {
    return std::shared_ptr<const Grid2>(new Grid2(outer, std::nullopt, resolution));
  }
  static std::shared_ptr<const Grid2> annulus(const Circle& outer, const Circle& hole, int resolution) {
    return std::shared_ptr<const Grid2>(new Grid2(outer, hole, resolution));
  }

  const Circle& outer() const { return outer_; }
  const std::optional<Circle>& hole() const { return hole_; }
  bool is_annulus() const { return hole_.has_value(); }
  double h() const { return h_; }
  int resolution() const { return n_; }
  const std::vector<GridNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Tri>& triangles() const { return tris_; }
  double area(std::size_t t) const { return areas_[t]; }
  // gradients of the three hat functions on triangle t
  const std::array<Vec2, 3>& basis(std::size_t t) const { return grads_[t]; }
  double lumped_area(std::size_t p) const { return lumped_[p]; }
  bool regular(std::size_t p) const { return regular_[p] != 0; }
  double domain_area() const { return total_area_; }

  // signed distance to the boundary, positive inside
  double level(const Vec2& x) const {
    double v = outer_.radius - (x - outer_.center).norm();
    if (hole_) v = std::min(v, (x - hole_->center).norm() - hole_->radius);
    return v;
  }

  Vec2 lattice_point(int i, int j) const { return outer_.center + h_ * Vec2(i, j); }

  // node index of lattice point (i, j) or -1
  int lattice_node(int i, int j) const {
    if (i < -m_ || i > m_ || j < -m_ || j > m_) return -1;
    return lattice_[lin(i, j)];
  }
  // node index of the crossing on the edge from (i, j) along +x (axis 0) or +y (axis 1), or -1
  int crossing(int i, int j, int axis) const {
    if (i < -m_ || i > m_ || j < -m_ || j > m_) return -1;
    return cross_[2 * lin(i, j) + axis];
  }

  // Nodes within distance rho of x, in index order.
  std::vector<std::uint32_t> nodes_near(const Vec2& x, double rho) const {
    std::vector<std::uint32_t> out;
    Vec2 c = (x - outer_.center) / h_;
    int r = static_cast<int>(std::ceil(rho / h_)) + 1;
    int i0 = static_cast<int>(std::floor(c.x())), j0 = static_cast<int>(std::floor(c.y()));
    for (int j = j0 - r; j <= j0 + r + 1; ++j)
      for (int i = i0 - r; i <= i0 + r + 1; ++i) {
        for (int k : {lattice_node(i, j), crossing(i, j, 0), crossing(i, j, 1)})
          if (k >= 0 && (nodes_[k].x - x).norm() <= rho) out.push_back(static_cast<std::uint32_t>(k));
      }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Triangle containing x (or the nearest one for points just outside the
  // polygonal domain) with barycentric coordinates.
  std::optional<std::pair<std::size_t, std::array<double, 3>>> locate(const Vec2& x) const {
    Vec2 c = (x - outer_.center) / h_;
    int i0 = static_cast<int>(std::floor(c.x())), j0 = static_cast<int>(std::floor(c.y()));
    double best = -std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::array<double, 3>> found{};
    for (int r = 0; r <= 2 && best < -1e-12; ++r)
      for (int j = j0 - r; j <= j0 + r; ++j)
        for (int i = i0 - r; i <= i0 + r; ++i) {
          if (i < -m_ || i >= m_ || j < -m_ || j >= m_) continue;
          std::size_t cell = lin(i, j);
          for (std::uint32_t t = cell_begin_[cell]; t < cell_begin_[cell + 1]; ++t) {
            auto b = barycentric(t, x);
            double m = std::min({b[0], b[1], b[2]});
            if (m > best) {
              best = m;
              found = {t, b};
            }
          }
        }
    if (best == -std::numeric_limits<double>::infinity() || best < -2.0) return std::nullopt;
    return found;
  }

  std::array<double, 3> barycentric(std::size_t t, const Vec2& x) const {
    const auto& tr = tris_[t];
    std::array<double, 3> b;
    for (int k = 0; k < 3; ++k) b[k] = 0.0;
    const Vec2& p0 = nodes_[tr[0]].x;
    for (int k = 1; k < 3; ++k) b[k] = grads_[t][k].dot(x - p0);
    b[0] = 1.0 - b[1] - b[2];
    return b;
  }

private:
  Grid2(const Circle& outer, std::optional<Circle> hole, int resolution)
      : outer_(outer), hole_(std::move(hole)), n_(resolution) {
    if (!(outer.radius > 0) || resolution < 4) throw DomainError("Grid2: need radius > 0 and resolution >= 4");
    h_ = outer.radius / resolution;
    m_ = resolution + 1;
    if (hole_) {
      double gap = outer.radius - ((hole_->center - outer.center).norm() + hole_->radius);
      if (!(hole_->radius >= 4 * h_)) throw DomainError("Grid2: hole radius must be at least 4h");
      if (!(gap >= 4 * h_)) throw DomainError("Grid2: annulus must be at least 4h wide");
    }
    build();
  }

  std::size_t lin(int i, int j) const {
    return static_cast<std::size_t>(j + m_) * static_cast<std::size_t>(2 * m_ + 1) + static_cast<std::size_t>(i + m_);
  }

  // which circle is binding at x
  BoundaryKind binding(const Vec2& x) const {
    double vo = outer_.radius - (x - outer_.center).norm();
    if (hole_ && (x - hole_->center).norm() - hole_->radius < vo) return BoundaryKind::inner;
    return BoundaryKind::outer;
  }
  const Circle& circle(BoundaryKind k) const { return k == BoundaryKind::inner ? *hole_ : outer_; }

  GridNode boundary_node(const Vec2& x, BoundaryKind k, int i, int j, bool snapped) const {
    const Circle& c = circle(k);
    Vec2 d = x - c.center;
    double th = std::atan2(d.y(), d.x());
    GridNode g;
    g.x = c.center + c.radius * Vec2(std::cos(th), std::sin(th));
    g.boundary = k;
    g.i = i;
    g.j = j;
    g.snapped = snapped;
    g.theta = th;
    return g;
  }

  void build() {
    const double tol = 1e-3 * h_;
    const int w = 2 * m_ + 1;
    lattice_.assign(static_cast<std::size_t>(w) * w, -1);
    cross_.assign(2 * static_cast<std::size_t>(w) * w, -1);
    std::vector<std::int8_t> state(static_cast<std::size_t>(w) * w, -1);  // 1 inside, 0 snapped, -1 outside
    for (int j = -m_; j <= m_; ++j)
      for (int i = -m_; i <= m_; ++i) {
        Vec2 x = lattice_point(i, j);
        double v = level(x);
        std::size_t k = lin(i, j);
        if (v > tol) {
          state[k] = 1;
          lattice_[k] = static_cast<int>(nodes_.size());
          GridNode g;
          g.x = x;
          g.i = i;
          g.j = j;
          nodes_.push_back(g);
        } else if (v >= -tol) {
          state[k] = 0;
          lattice_[k] = static_cast<int>(nodes_.size());
          nodes_.push_back(boundary_node(x, binding(x), i, j, true));
        }
      }
    for (int axis = 0; axis < 2; ++axis)
      for (int j = -m_; j <= m_; ++j)
        for (int i = -m_; i <= m_; ++i) {
          int i2 = i + (axis == 0), j2 = j + (axis == 1);
          if (i2 > m_ || j2 > m_) continue;
          std::int8_t s1 = state[lin(i, j)], s2 = state[lin(i2, j2)];
          if (!((s1 == 1 && s2 == -1) || (s1 == -1 && s2 == 1))) continue;
          Vec2 a = lattice_point(i, j), b = lattice_point(i2, j2);
          Vec2 out = s1 == -1 ? a : b;
          BoundaryKind k = binding(out);
          Vec2 x = intersect(a, b, circle(k));
          cross_[2 * lin(i, j) + axis] = static_cast<int>(nodes_.size());
          GridNode g = boundary_node(x, k, INT_MIN, INT_MIN, false);
          g.x = x;
          nodes_.push_back(g);
        }
    triangulate();
    finish();
  }

  static Vec2 intersect(const Vec2& a, const Vec2& b, const Circle& c) {
    Vec2 d = b - a, f = a - c.center;
    double A = d.squaredNorm(), B = f.dot(d), C = f.squaredNorm() - c.radius * c.radius;
    double disc = std::max(B * B - A * C, 0.0);
    double sq = std::sqrt(disc);
    double t1 = (-B - sq) / A, t2 = (-B + sq) / A;
    double t = (t1 >= -1e-12 && t1 <= 1 + 1e-12) ? t1 : t2;
    t = std::clamp(t, 0.0, 1.0);
    Vec2 x = a + t * d;
    // place exactly on the circle
    Vec2 r = x - c.center;
    return c.center + c.radius * r.normalized();
  }

  void add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const Vec2 &p = nodes_[a].x, &q = nodes_[b].x, &r = nodes_[c].x;
    double s = (q - p).x() * (r - p).y() - (q - p).y() * (r - p).x();
    if (std::abs(s) < 1e-10 * h_ * h_) return;
    if (s > 0)
      tris_.push_back({a, b, c});
    else
      tris_.push_back({a, c, b});
  }

  static double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

  void triangulate_polygon(const std::vector<std::uint32_t>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return;
    auto P = [&](std::size_t k) -> const Vec2& { return nodes_[poly[k % n]].x; };
    const double eps = 1e-10 * h_ * h_;
    // Fan apex: every fan triangle positive or degenerate, smallest maximal angle.
    // Near-ties go to the fan whose diagonals lean most like the full-cell split;
    // that score only sees undirected directions, so a half turn of the plane
    // leaves the choice unchanged.
    std::vector<std::pair<double, double>> cand(n, {10.0, 0.0});
    double best_angle = 10.0;
    for (std::size_t a = 0; a < n; ++a) {
      bool ok = true;
      double worst = 0.0, lean = 0.0;
      for (std::size_t k = 1; k + 1 < n; ++k) {
        const Vec2 &p = P(a), &q = P(a + k), &r = P(a + k + 1);
        double s = cross2(q - p, r - p);
        if (s < -eps) {
          ok = false;
          break;
        }
        if (k > 1) {
          Vec2 d = q - p;
          lean += d.x() * d.y() / d.squaredNorm();
        }
        if (s <= eps) continue;
        std::array<Vec2, 3> v{p, q, r};
        for (int m = 0; m < 3; ++m) {
          Vec2 e1 = v[(m + 1) % 3] - v[m], e2 = v[(m + 2) % 3] - v[m];
          worst = std::max(worst, std::acos(std::clamp(e1.normalized().dot(e2.normalized()), -1.0, 1.0)));
        }
      }
      if (!ok) continue;
      cand[a] = {worst, lean};
      best_angle = std::min(best_angle, worst);
    }
    int best_apex = -1;
    for (std::size_t a = 0; a < n; ++a) {
      if (cand[a].first > best_angle + 1e-9) continue;
      if (best_apex < 0 || cand[a].second < cand[best_apex].second - 1e-9) best_apex = static_cast<int>(a);
    }
    if (best_apex >= 0) {
      for (std::size_t k = 1; k + 1 < n; ++k)
        add_triangle(poly[best_apex], poly[(best_apex + k) % n], poly[(best_apex + k + 1) % n]);
      return;
    }
    // ear clipping for the rare non-convex cut
    std::vector<std::uint32_t> v = poly;
    while (v.size() > 3) {
      bool clipped = false;
      for (std::size_t k = 0; k < v.size(); ++k) {
        const Vec2& a = nodes_[v[(k + v.size() - 1) % v.size()]].x;
        const Vec2& b = nodes_[v[k]].x;
        const Vec2& c = nodes_[v[(k + 1) % v.size()]].x;
        if (cross2(b - a, c - a) <= eps) continue;
        bool empty = true;
        for (std::size_t m = 0; m < v.size() && empty; ++m) {
          if (m == k || m == (k + 1) % v.size() || m == (k + v.size() - 1) % v.size()) continue;
          const Vec2& p = nodes_[v[m]].x;
          if (cross2(b - a, p - a) >= 0 && cross2(c - b, p - b) >= 0 && cross2(a - c, p - c) >= 0) empty = false;
        }
        if (!empty) continue;
        add_triangle(v[(k + v.size() - 1) % v.size()], v[k], v[(k + 1) % v.size()]);
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(k));
        clipped = true;
        break;
      }
      if (!clipped) break;
    }
    if (v.size() == 3) add_triangle(v[0], v[1], v[2]);
  }

  void triangulate() {
    const int w = 2 * m_ + 1;
    cell_begin_.assign(static_cast<std::size_t>(w) * w + 1, 0);
    full_.assign(static_cast<std::size_t>(w) * w, 0);
    for (int j = -m_; j <= m_; ++j)
      for (int i = -m_; i <= m_; ++i) {
        std::size_t cell = lin(i, j);
        cell_begin_[cell] = static_cast<std::uint32_t>(tris_.size());
        if (i == m_ || j == m_) continue;
        int c0 = lattice_node(i, j), c1 = lattice_node(i + 1, j), c2 = lattice_node(i + 1, j + 1),
            c3 = lattice_node(i, j + 1);
        auto plain = [&](int c) { return c >= 0 && !nodes_[c].snapped; };
        if (plain(c0) && plain(c1) && plain(c2) && plain(c3)) {
          full_[cell] = 1;
          add_triangle(c0, c1, c3);
          add_triangle(c1, c2, c3);
          continue;
        }
        std::vector<std::uint32_t> poly;
        auto push = [&](int k) {
          if (k >= 0) poly.push_back(static_cast<std::uint32_t>(k));
        };
        push(c0);
        push(crossing(i, j, 0));
        push(c1);
        push(crossing(i + 1, j, 1));
        push(c2);
        push(crossing(i, j + 1, 0));
        push(c3);
        push(crossing(i, j, 1));
        triangulate_polygon(poly);
      }
    cell_begin_.back() = static_cast<std::uint32_t>(tris_.size());
  }

  void finish() {
    areas_.resize(tris_.size());
    grads_.resize(tris_.size());
    lumped_.assign(nodes_.size(), 0.0);
    total_area_ = 0.0;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      const auto& tr = tris_[t];
      std::array<Vec2, 3> p{nodes_[tr[0]].x, nodes_[tr[1]].x, nodes_[tr[2]].x};
      double a2 = cross2(p[1] - p[0], p[2] - p[0]);
      areas_[t] = 0.5 * a2;
      for (int k = 0; k < 3; ++k) {
        Vec2 e = p[(k + 2) % 3] - p[(k + 1) % 3];
        grads_[t][k] = Vec2(-e.y(), e.x()) / a2;
      }
      for (auto v : tr) lumped_[v] += areas_[t] / 3.0;
    }
    total_area_ = detail::pairwise_sum(areas_.data(), areas_.size());
    regular_.assign(nodes_.size(), 0);
    for (std::size_t p = 0; p < nodes_.size(); ++p) {
      const auto& g = nodes_[p];
      if (g.is_boundary() || g.i == INT_MIN) continue;
      bool ok = true;
      for (int dj = -1; dj <= 0 && ok; ++dj)
        for (int di = -1; di <= 0 && ok; ++di) {
          int ci = g.i + di, cj = g.j + dj;
          if (ci < -m_ || ci >= m_ || cj < -m_ || cj >= m_ || !full_[lin(ci, cj)]) ok = false;
        }
      regular_[p] = ok;
    }
    for (std::size_t p = 0; p < nodes_.size(); ++p)
      if (lumped_[p] <= 0) throw DomainError("Grid2: node without triangles");
  }

  Circle outer_;
  std::optional<Circle> hole_;
  int n_ = 0, m_ = 0;
  double h_ = 0.0;
  std::vector<GridNode> nodes_;
  std::vector<int> lattice_, cross_;
  std::vector<Tri> tris_;
  std::vector<std::uint32_t> cell_begin_;
  std::vector<std::uint8_t> full_, regular_;
  std::vector<double> areas_, lumped_;
  std::vector<std::array<Vec2, 3>> grads_;
  double total_area_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid2>;

// Boundary curve theta -> gamma(theta) in R^2 with its derivative.
class BoundaryCurve {
public:
  using Fn = std::function<Vec2(double)>;

  BoundaryCurve() : value_([](double) { return Vec2(0, 0); }), derivative_([](double) { return Vec2(0, 0); }) {}
  BoundaryCurve(Fn value, Fn derivative) : value_(std::move(value)), derivative_(std::move(derivative)) {}

  // Trigonometric polynomial a0 + sum_k a_k cos k theta + b_k sin k theta.
  static BoundaryCurve fourier(Vec2 a0, std::vector<Vec2> a, std::vector<Vec2> b) {
    if (a.size() != b.size()) throw DomainError("BoundaryCurve: coefficient lists differ in length");
    auto val = [a0, a, b](double th) {
      Vec2 s = a0;
      for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * std::cos((k + 1) * th) + b[k] * std::sin((k + 1) * th);
      return s;
    };
    auto der = [a, b](double th) {
      Vec2 s(0, 0);
      for (std::size_t k = 0; k < a.size(); ++k) {
        double n = static_cast<double>(k + 1);
        s += n * (-a[k] * std::sin(n * th) + b[k] * std::cos(n * th));
      }
      return s;
    };
    return BoundaryCurve(val, der);
  }

  // Trigonometric interpolation of equispaced samples at theta_j = 2 pi j / n.
  static BoundaryCurve from_samples(const std::vector<Vec2>& s) {
    const std::size_t n = s.size();
    if (n < 3) throw DomainError("BoundaryCurve: need at least 3 samples");
    const std::size_t K = (n - 1) / 2;
    Vec2 a0 = Vec2::Zero();
    for (const auto& v : s) a0 += v;
    a0 /= static_cast<double>(n);
    std::vector<Vec2> a(K, Vec2::Zero()), b(K, Vec2::Zero());
    for (std::size_t k = 1; k <= K; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        double th = 2 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n);
        a[k - 1] += 2.0 / n * s[j] * std::cos(th);
        b[k - 1] += 2.0 / n * s[j] * std::sin(th);
      }
    if (n % 2 == 0) {
      Vec2 c = Vec2::Zero();
      for (std::size_t j = 0; j < n; ++j) c += (j % 2 == 0 ? 1.0 : -1.0) * s[j];
      a.push_back(c / static_cast<double>(n));
      b.push_back(Vec2::Zero());  // sin at the Nyquist mode vanishes on the samples
    }
    return fourier(a0, std::move(a), std::move(b));
  }

  // Analytic closure; the derivative comes from a 1024-point trigonometric fit.
  static BoundaryCurve analytic(Fn value) {
    std::vector<Vec2> s(1024);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = value(2 * std::numbers::pi * j / s.size());
    BoundaryCurve fit = from_samples(s);
    return BoundaryCurve(std::move(value), fit.derivative_);
  }

  // CSV with columns theta,u,v; rows must be equispaced starting at 0.
  static BoundaryCurve read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open boundary file " + path);
    std::vector<double> th;
    std::vector<Vec2> s;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      ++row;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ss(line);
      double t, u, v;
      if (!(ss >> t >> u >> v)) {
        if (row == 1) continue;  // header
        throw DomainError(path + ":" + std::to_string(row) + ": expected theta,u,v");
      }
      th.push_back(t);
      s.emplace_back(u, v);
    }
    const double step = 2 * std::numbers::pi / static_cast<double>(std::max<std::size_t>(s.size(), 1));
    for (std::size_t j = 0; j < th.size(); ++j)
      if (std::abs(th[j] - step * static_cast<double>(j)) > 1e-6)
        throw DomainError(path + ": theta values must be equispaced from 0");
    return from_samples(s);
  }

  Vec2 operator()(double th) const { return value_(th); }
  Vec2 derivative(double th) const { return derivative_(th); }

  BoundaryCurve rotated(double phi) const {
    auto v = value_;
    auto d = derivative_;
    return BoundaryCurve([v, phi](double t) { return v(t + phi); }, [d, phi](double t) { return d(t + phi); });
  }
  BoundaryCurve scaled(double s) const {
    auto v = value_;
    auto d = derivative_;
    return BoundaryCurve([v, s](double t) { return Vec2(s * v(t)); }, [d, s](double t) { return Vec2(s * d(t)); });
  }

  double sup(std::size_t n = 4096) const {
    double m = 0;
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, value_(2 * std::numbers::pi * j / n).norm());
    return m;
  }
  double derivative_sup(std::size_t n = 4096) const {
    double m = 0;
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, derivative_(2 * std::numbers::pi * j / n).norm());
    return m;
  }
  // max(sup |gamma|, sup |tangential derivative|) on a circle of the given radius
  double mu(double radius = 1.0) const { return std::max(sup(), derivative_sup() / radius); }

  // length of theta -> (c + R e^{i theta}, gamma(theta)) in R^4
  double space_curve_length(double radius = 1.0, std::size_t n = 4096) const {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      Vec2 d = derivative_(2 * std::numbers::pi * j / n);
      s += std::sqrt(radius * radius + d.squaredNorm());
    }
    return s * 2 * std::numbers::pi / static_cast<double>(n);
  }

private:
  Fn value_, derivative_;
};

// P1 map from the grid domain to R^2.
class GraphFn {
public:
  GraphFn() = default;
  explicit GraphFn(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), Vec2::Zero()) {}
  GraphFn(GridPtr grid, std::vector<Vec2> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw DomainError("GraphFn: value count does not match the grid");
  }
  static GraphFn sample(GridPtr grid, const std::function<Vec2(const Vec2&)>& f) {
    std::vector<Vec2> v(grid->size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = f(grid->nodes()[p].x);
    return GraphFn(std::move(grid), std::move(v));
  }

  const Grid2& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<Vec2>& values() const { return values_; }
  std::vector<Vec2>& values() { return values_; }
  const Vec2& operator[](std::size_t p) const { return values_[p]; }
  Vec2& operator[](std::size_t p) { return values_[p]; }

  // Dirichlet data on the outer (or inner) circle, by angle.
  void impose(const BoundaryCurve& g, BoundaryKind which = BoundaryKind::outer) {
    for (std::size_t p = 0; p < values_.size(); ++p)
      if (grid_->nodes()[p].boundary == which) values_[p] = g(grid_->nodes()[p].theta);
  }

  double boundary_defect(const BoundaryCurve& g, BoundaryKind which = BoundaryKind::outer) const {
    double m = 0;
    for (std::size_t p = 0; p < values_.size(); ++p)
      if (grid_->nodes()[p].boundary == which) m = std::max(m, (values_[p] - g(grid_->nodes()[p].theta)).norm());
    return m;
  }

  Mat2 triangle_gradient(std::size_t t) const {
    const auto& tr = grid_->triangles()[t];
    const auto& g = grid_->basis(t);
    Mat2 J = Mat2::Zero();
    for (int k = 0; k < 3; ++k) J += g[k] * values_[tr[k]].transpose();
    return J;
  }

  Vec2 evaluate(const Vec2& x) const {
    auto loc = grid_->locate(x);
    if (!loc) throw DomainError("GraphFn::evaluate: point outside the grid");
    const auto& tr = grid_->triangles()[loc->first];
    const auto& b = loc->second;
    return b[0] * values_[tr[0]] + b[1] * values_[tr[1]] + b[2] * values_[tr[2]];
  }

  double sup_norm() const {
    double m = 0;
    for (const auto& v : values_) m = std::max(m, v.norm());
    return m;
  }

  GraphFn operator+(const GraphFn& o) const {
    GraphFn r = *this;
    for (std::size_t p = 0; p < values_.size(); ++p) r.values_[p] += o.values_[p];
    return r;
  }

private:
  GridPtr grid_;
  std::vector<Vec2> values_;
};

struct Jet {
  std::vector<Mat2> grad;
  std::vector<double> det;
  std::vector<double> s;
};

namespace detail {

// weights of the 3-point first derivative with arms hm (backward) and hp (forward)
inline std::array<double, 3> three_point(double hm, double hp) {
  return {-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))};
}

// Weighted quadratic least-squares gradient at node p; exact on quadratics.
inline Mat2 lsq_gradient(const GraphFn& f, std::size_t p) {
  const Grid2& g = f.grid();
  const Vec2 x0 = g.nodes()[p].x;
  double rho = 2.5 * g.h();
  std::vector<std::uint32_t> nb;
  for (int grow = 0; grow < 4; ++grow) {
    nb = g.nodes_near(x0, rho);
    if (nb.size() >= 10) break;
    rho *= 1.5;
  }
  Eigen::MatrixXd A(nb.size(), 6);
  Eigen::MatrixXd B(nb.size(), 2);
  for (std::size_t r = 0; r < nb.size(); ++r) {
    Vec2 d = (g.nodes()[nb[r]].x - x0) / g.h();
    double w = nb[r] == p ? 1e3 : 1.0 / (0.25 + d.squaredNorm());
    A.row(r) << w, w * d.x(), w * d.y(), w * d.x() * d.x(), w * d.x() * d.y(), w * d.y() * d.y();
    B.row(r) = w * f[nb[r]].transpose();
  }
  Eigen::MatrixXd c = A.colPivHouseholderQr().solve(B);
  Mat2 J;
  J.row(0) = c.row(1) / g.h();
  J.row(1) = c.row(2) / g.h();
  return J;
}

} // namespace detail

// Nodal gradients: nonuniform 3-point differences along the lattice lines where
// both arms are lattice nodes or edge crossings, a local quadratic fit elsewhere.
inline Jet jet_of(const GraphFn& f) {
  const Grid2& g = f.grid();
  const auto& nodes = g.nodes();
  Jet out;
  out.grad.resize(nodes.size());
  out.det.resize(nodes.size());
  out.s.resize(nodes.size());
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    const auto& n = nodes[p];
    bool done = false;
    if (!n.is_boundary() && n.i != INT_MIN) {
      Mat2 J;
      done = true;
      for (int axis = 0; axis < 2 && done; ++axis) {
        int di = axis == 0, dj = axis == 1;
        // forward arm: lattice node or the crossing on the edge leaving (i, j)
        int fw = g.lattice_node(n.i + di, n.j + dj);
        if (fw < 0) fw = g.crossing(n.i, n.j, axis);
        int bw = g.lattice_node(n.i - di, n.j - dj);
        if (bw < 0) bw = g.crossing(n.i - di, n.j - dj, axis);
        if (fw < 0 || bw < 0 || nodes[fw].snapped || nodes[bw].snapped) {
          done = false;
          break;
        }
        double hp = (nodes[fw].x - n.x)(axis), hm = (n.x - nodes[bw].x)(axis);
        auto w = detail::three_point(hm, hp);
        J.row(axis) = (w[0] * f[bw] + w[1] * f[p] + w[2] * f[fw]).transpose();
      }
      if (done) out.grad[p] = J;
    }
    if (!done) out.grad[p] = detail::lsq_gradient(f, p);
    out.det[p] = det2(out.grad[p]);
    out.s[p] = s_of(out.grad[p]);
  }
  return out;
}

// Exact area of the P1 graph over (subregion ∩ domain). The subregion is the
// optional disc `inside` minus the optional disc `outside` (which must sit in `inside`).
struct Subregion {
  std::optional<Circle> inside;
  std::optional<Circle> outside;
};

inline double triangle_weight(const Grid2& g, std::size_t t, const Subregion& r) {
  const auto& tr = g.triangles()[t];
  const Vec2 &a = g.nodes()[tr[0]].x, &b = g.nodes()[tr[1]].x, &c = g.nodes()[tr[2]].x;
  double w = r.inside ? triangle_disc_area(a, b, c, r.inside->center, r.inside->radius) : g.area(t);
  if (r.outside) w -= triangle_disc_area(a, b, c, r.outside->center, r.outside->radius);
  return std::max(w, 0.0);
}

inline double graph_area(const GraphFn& f, const Subregion& region = {}) {
  if (region.inside && region.outside &&
      (region.outside->center - region.inside->center).norm() + region.outside->radius > region.inside->radius)
    throw DomainError("graph_area: the excluded disc must lie inside the disc");
  const Grid2& g = f.grid();
  std::vector<double> terms(g.triangles().size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    double w = (region.inside || region.outside) ? triangle_weight(g, t, region) : g.area(t);
    terms[t] = w == 0.0 ? 0.0 : w * std::sqrt(1.0 + s_of(f.triangle_gradient(t)));
  }
  return detail::pairwise_sum(terms.data(), terms.size());
}

// dA/dU_p for every node.
inline std::vector<Vec2> area_gradient(const GraphFn& f) {
  const Grid2& g = f.grid();
  std::vector<Vec2> out(g.size(), Vec2::Zero());
  for (std::size_t t = 0; t < g.triangles().size(); ++t) {
    Mat2 F = flux(f.triangle_gradient(t));
    const auto& tr = g.triangles()[t];
    const auto& b = g.basis(t);
    for (int k = 0; k < 3; ++k) out[tr[k]] += g.area(t) * (F.transpose() * b[k]);
  }
  return out;
}

struct FirstVariation {
  std::vector<Vec2> field;    // discrete div of the flux, zero on boundary nodes
  double sup_regular = 0.0;   // over nodes with a full lattice patch
  double sup_free = 0.0;      // over all non-boundary nodes
};

inline FirstVariation first_variation_residual(const GraphFn& f) {
  const Grid2& g = f.grid();
  auto grad = area_gradient(f);
  FirstVariation out;
  out.field.assign(g.size(), Vec2::Zero());
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.nodes()[p].is_boundary()) continue;
    out.field[p] = -grad[p] / g.lumped_area(p);
    double m = out.field[p].norm();
    out.sup_free = std::max(out.sup_free, m);
    if (g.regular(p)) out.sup_regular = std::max(out.sup_regular, m);
  }
  return out;
}

inline nlohmann::json graph_header(const Grid2& g) {
  nlohmann::json d{{"kind", g.is_annulus() ? "annulus" : "disc"},
                   {"center", {g.outer().center.x(), g.outer().center.y()}},
                   {"radius", g.outer().radius}};
  if (g.hole()) {
    d["hole_center"] = {g.hole()->center.x(), g.hole()->center.y()};
    d["hole_radius"] = g.hole()->radius;
  }
  return {{"domain", d}, {"h", g.h()}, {"resolution", g.resolution()}, {"nodes", g.size()}};
}

inline void write_graph_csv(std::ostream& out, const GraphFn& f) {
  out << "x,y,u,v\n";
  out.precision(17);
  for (std::size_t p = 0; p < f.grid().size(); ++p) {
    const Vec2& x = f.grid().nodes()[p].x;
    out << x.x() << ',' << x.y() << ',' << f[p].x() << ',' << f[p].y() << '\n';
  }
}

inline void write_field_csv(std::ostream& out, const Grid2& g, const std::vector<Vec2>& field) {
  out << "x,y,r1,r2\n";
  out.precision(17);
  for (std::size_t p = 0; p < g.size(); ++p)
    out << g.nodes()[p].x.x() << ',' << g.nodes()[p].x.y() << ',' << field[p].x() << ',' << field[p].y() << '\n';
}

} // namespace twoplane
