#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <twoplane/graphsurf.hpp>

using namespace twoplane;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
constexpr double pi = std::numbers::pi;

namespace {

Mat2 mat(double a, double b, double c, double d) {
  Mat2 m;
  m << a, b, c, d;
  return m;
}

Mat2 random_jet(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return mat(u(rng), u(rng), u(rng), u(rng));
}

// slots (u_x, u_y, v_x, v_y) -> gradient matrix
Mat2 from_slots(const Eigen::Vector4d& w) { return mat(w(0), w(2), w(1), w(3)); }

double integrand(const Eigen::Vector4d& w) { return std::sqrt(1.0 + s_of(from_slots(w))); }

Vec2 z2(const Vec2& x, double c) { return c * Vec2(x.x() * x.x() - x.y() * x.y(), 2 * x.x() * x.y()); }

GridPtr unit_disc(int n) { return Grid2::disc(Circle{}, n); }

} // namespace

TEST_CASE("star on small examples") {
  CHECK(star(Mat2(Mat2::Identity())) == Mat2::Identity());
  CHECK(star(mat(1, 2, 3, 4)) == mat(4, -3, -2, 1));
  Mat2 c = mat(0.3, -1.7, 1.7, 0.3);
  CHECK(star(c) == c);
}

TEST_CASE("star is a Frobenius isometry pairing to twice the determinant") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    Mat2 m = random_jet(rng, 2.0);
    CHECK_THAT(star(m).norm(), WithinAbs(m.norm(), 1e-14));
    CHECK_THAT(pairing(star(m), m), WithinAbs(2 * det2(m), 1e-13));
    CHECK(star(star(m)) == m);
  }
}

TEST_CASE("expansion of S(F + H) - S(F)") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 1000; ++k) {
    Mat2 F = random_jet(rng, 1.0), H = random_jet(rng, 1.0);
    CHECK_THAT(s_of<double>(F + H) - s_of(F), WithinAbs(s_difference_expansion(F, H), 1e-12));
    CHECK(s_of(F) >= 0.0);
  }
}

TEST_CASE("flux entries are the closed-form coefficients") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    Mat2 J = random_jet(rng, 0.8);
    Mat2 F = flux(J);
    auto A = coefficients(J);
    CHECK_THAT(F(0, 0), WithinAbs(A.xx, 1e-14));
    CHECK_THAT(F(0, 1), WithinAbs(A.xy, 1e-14));
    CHECK_THAT(F(1, 0), WithinAbs(A.yx, 1e-14));
    CHECK_THAT(F(1, 1), WithinAbs(A.yy, 1e-14));
  }
}

TEST_CASE("coefficient matrix at zero and along diagonal jets") {
  CHECK(coefficient_matrix(Mat2(Mat2::Zero())) == Mat4::Identity());
  for (double t : {0.0, 0.01, 0.1}) {
    Mat4 M = coefficient_matrix(mat(t, 0, 0, t));
    CHECK((M - M.transpose()).norm() < 1e-15);
    double d = 1e-6;
    Mat4 Md = coefficient_matrix(mat(t + d, 0, 0, t + d));
    CHECK((Md - M).norm() < 10 * d);
  }
}

TEST_CASE("coefficient matrix is the integrand Hessian up to the mixed slots") {
  std::mt19937_64 rng(4);
  const double e = 1e-4;
  for (int k = 0; k < 100; ++k) {
    Mat2 J = random_jet(rng, 0.3);
    Eigen::Vector4d w(J(0, 0), J(1, 0), J(0, 1), J(1, 1));
    Mat4 fd;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d ei = Eigen::Vector4d::Unit(i) * e, ej = Eigen::Vector4d::Unit(j) * e;
        fd(i, j) = (integrand(w + ei + ej) - integrand(w + ei - ej) - integrand(w - ei + ej) + integrand(w - ei - ej)) /
                   (4 * e * e);
      }
    Mat4 H = integrand_hessian(J);
    CHECK((H - fd).cwiseAbs().maxCoeff() < 1e-6);

    // the crosswise mixed entries leave every rank-one form unchanged
    Mat4 M = coefficient_matrix(J);
    std::uniform_real_distribution<double> u(-1, 1);
    Vec2 xi(u(rng), u(rng)), eta(u(rng), u(rng));
    Eigen::Vector4d r(xi.x() * eta.x(), xi.y() * eta.x(), xi.x() * eta.y(), xi.y() * eta.y());
    CHECK_THAT(r.dot(M * r), WithinAbs(r.dot(H * r), 1e-13));
  }
}

TEST_CASE("ellipticity margin") {
  CHECK_THAT(ellipticity_margin(Mat4::Identity()), WithinAbs(1.0, 1e-12));
  CHECK_THAT(ellipticity_margin(coefficient_matrix(Mat2(Mat2::Zero()))), WithinAbs(1.0, 1e-12));
  Mat2 dir = mat(0.6, -0.3, 0.5, 0.55).normalized();
  double prev = 0.0;
  for (double s : {0.2, 0.1, 0.05}) {
    double m = ellipticity_margin(coefficient_matrix<double>(s * dir));
    CHECK(m > prev);
    CHECK(m <= 1.0 + 1e-12);
    prev = m;
  }
  CHECK(prev > 0.99);
}

TEST_CASE("disc grid geometry") {
  for (int n : {16, 37, 128}) {
    auto g = unit_disc(n);
    CHECK(g->h() == 1.0 / n);
    double sum = 0.0;
    for (std::size_t t = 0; t < g->triangles().size(); ++t) {
      CHECK(g->area(t) > 0.0);
      sum += g->area(t);
    }
    CHECK_THAT(sum, WithinRel(g->domain_area(), 1e-12));
    CHECK(g->domain_area() <= pi);
    CHECK(g->domain_area() >= pi - 2 * pi * g->h() * g->h());
    int regular = 0;
    for (std::size_t p = 0; p < g->size(); ++p) {
      const auto& node = g->nodes()[p];
      if (node.is_boundary())
        CHECK_THAT(node.x.norm(), WithinAbs(1.0, 1e-12));
      else
        CHECK(node.x.norm() < 1.0);
      regular += g->regular(p);
    }
    CHECK(regular > 0);
  }
}

TEST_CASE("annulus grid geometry") {
  auto g = Grid2::annulus(Circle{}, Circle{Vec2::Zero(), 0.25}, 64);
  CHECK(g->is_annulus());
  CHECK_THAT(g->domain_area(), WithinAbs(pi * (1 - 0.0625), 5e-3));
  int inner = 0;
  for (const auto& node : g->nodes())
    if (node.boundary == BoundaryKind::inner) {
      ++inner;
      CHECK_THAT(node.x.norm(), WithinAbs(0.25, 1e-12));
    }
  CHECK(inner > 20);
  CHECK_THROWS_AS(Grid2::annulus(Circle{}, Circle{Vec2::Zero(), 0.02}, 64), DomainError);
}

TEST_CASE("P1 evaluation and location") {
  auto g = Grid2::disc(Circle{Vec2(0.3, -0.2), 1.5}, 40);
  auto f = GraphFn::sample(g, [](const Vec2& x) { return Vec2(2 * x.x() - x.y() + 1, 0.5 * x.y()); });
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    Vec2 x = Vec2(0.3, -0.2) + 1.4 * Vec2(u(rng), u(rng)) / std::sqrt(2.0);
    CHECK(g->locate(x).has_value());
    Vec2 v = f.evaluate(x);
    CHECK_THAT(v.x(), WithinAbs(2 * x.x() - x.y() + 1, 1e-12));
    CHECK_THAT(v.y(), WithinAbs(0.5 * x.y(), 1e-12));
  }
}

TEST_CASE("jets of affine, zero and quadratic maps") {
  auto g = unit_disc(48);
  auto affine = GraphFn::sample(g, [](const Vec2& x) { return Vec2(0.3 * x.x() - 0.7 * x.y() + 2, 1.1 * x.x() + 0.2 * x.y() - 1); });
  Jet ja = jet_of(affine);
  // exact up to rounding, which short arms next to the boundary amplify
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t p = 0; p < g->size(); ++p) {
    double err = (ja.grad[p] - mat(0.3, 1.1, -0.7, 0.2)).cwiseAbs().maxCoeff();
    CHECK(err < (g->regular(p) ? 100 * eps / g->h() : 1e-9));
  }

  Jet j0 = jet_of(GraphFn(g));
  for (std::size_t p = 0; p < g->size(); ++p) {
    CHECK(j0.grad[p] == Mat2::Zero());
    CHECK(j0.s[p] == 0.0);
  }

  Jet jq = jet_of(GraphFn::sample(g, [](const Vec2& x) { return z2(x, 1.0); }));
  for (std::size_t p = 0; p < g->size(); ++p) {
    double r2 = g->nodes()[p].x.squaredNorm();
    CHECK_THAT(jq.det[p], WithinAbs(4 * r2, 1e-9));
    CHECK_THAT(jq.s[p], WithinAbs(8 * r2 + 16 * r2 * r2, 1e-8));
    CHECK_THAT(1 + jq.s[p], WithinAbs((1 + 4 * r2) * (1 + 4 * r2), 1e-8));
  }
}

TEST_CASE("graph area") {
  auto g = unit_disc(128);
  CHECK_THAT(graph_area(GraphFn(g)), WithinAbs(pi, 1e-3));
  CHECK(graph_area(GraphFn(g)) == g->domain_area());

  for (auto [a, b] : {std::pair{0.5, -0.3}, std::pair{1.2, 0.7}}) {
    auto f = GraphFn::sample(g, [a, b](const Vec2& x) { return Vec2(a * x.x(), b * x.y()); });
    CHECK_THAT(graph_area(f), WithinAbs(pi * std::sqrt((1 + a * a) * (1 + b * b)), 1e-3));
  }

  auto q = GraphFn::sample(g, [](const Vec2& x) { return z2(x, 0.1); });
  CHECK_THAT(graph_area(q), WithinAbs(pi * 1.02, 1e-3));

  // a disc well inside the polygon is clipped exactly
  Subregion inner{Circle{Vec2::Zero(), 0.5}, std::nullopt};
  CHECK_THAT(graph_area(GraphFn(g), inner), WithinAbs(pi / 4, 1e-12));
  Subregion ring{std::nullopt, Circle{Vec2::Zero(), 0.5}};
  CHECK_THAT(graph_area(GraphFn(g), inner) + graph_area(GraphFn(g), ring), WithinRel(g->domain_area(), 1e-12));
}

TEST_CASE("graph area exceeds the flat area") {
  auto g = unit_disc(32);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int k = 0; k < 20; ++k) {
    double c[6];
    for (double& v : c) v = u(rng);
    auto f = GraphFn::sample(g, [&c](const Vec2& x) {
      return Vec2(c[0] * std::sin(3 * x.x()) + c[1] * x.y() * x.y() + c[2], c[3] * x.x() * x.y() + c[4] * std::cos(x.y()) + c[5]);
    });
    CHECK(graph_area(f) > g->domain_area());
    CHECK(graph_area(f) == graph_area(f));
  }
  // constants have zero jet and flat area
  auto c = GraphFn::sample(g, [](const Vec2&) { return Vec2(0.4, -0.1); });
  CHECK(graph_area(c) == g->domain_area());
}

TEST_CASE("first variation of affine and holomorphic maps") {
  auto g = unit_disc(64);
  auto affine = GraphFn::sample(g, [](const Vec2& x) { return Vec2(0.4 * x.x() + 0.1 * x.y(), -0.3 * x.x() + 0.9 * x.y() + 0.2); });
  auto fa = first_variation_residual(affine);
  // zero up to rounding; tiny cut-cell lumped areas magnify it next to the boundary
  const double eps = std::numeric_limits<double>::epsilon();
  CHECK(fa.sup_regular < 100 * eps / (g->h() * g->h()));
  CHECK(fa.sup_free < 1e-9);

  for (int n : {32, 64, 128}) {
    auto gn = unit_disc(n);
    auto fq = first_variation_residual(GraphFn::sample(gn, [](const Vec2& x) { return z2(x, 0.1); }));
    double h = gn->h();
    CHECK(fq.sup_regular <= 10 * h * h);
    for (std::size_t p = 0; p < gn->size(); ++p)
      if (gn->nodes()[p].is_boundary()) CHECK(fq.field[p] == Vec2::Zero());
  }
}

TEST_CASE("area gradient matches finite differences") {
  auto g = unit_disc(16);
  auto f = GraphFn::sample(g, [](const Vec2& x) { return Vec2(0.2 * x.x() * x.x() + 0.1 * x.y(), 0.3 * std::sin(2 * x.y())); });
  auto grad = area_gradient(f);
  const double e = 1e-6;
  for (std::size_t p = 0; p < g->size(); p += 7)
    for (int c = 0; c < 2; ++c) {
      GraphFn up = f, dn = f;
      up[p][c] += e;
      dn[p][c] -= e;
      CHECK_THAT((graph_area(up) - graph_area(dn)) / (2 * e), WithinAbs(grad[p][c], 1e-8));
    }
}

TEST_CASE("boundary imposition and curves") {
  auto g = unit_disc(32);
  auto gamma = BoundaryCurve::fourier(Vec2(0.01, 0), {Vec2(0.05, 0.02)}, {Vec2(0, 0.03)});
  GraphFn f(g);
  f.impose(gamma);
  CHECK(f.boundary_defect(gamma) <= 1e-12);
  for (std::size_t p = 0; p < g->size(); ++p)
    if (!g->nodes()[p].is_boundary()) CHECK(f[p] == Vec2::Zero());

  auto circle = BoundaryCurve::analytic([](double t) -> Vec2 { return Vec2(std::cos(2 * t), std::sin(2 * t)) / 10; });
  CHECK_THAT(circle.sup(), WithinAbs(0.1, 1e-12));
  CHECK_THAT(circle.derivative_sup(), WithinAbs(0.2, 1e-6));
  CHECK_THAT(circle.space_curve_length(), WithinRel(2 * pi * std::sqrt(1.04), 1e-9));
  auto rot = circle.rotated(0.3);
  CHECK((rot(0.1) - circle(0.4)).norm() < 1e-15);

  std::vector<Vec2> s;
  for (int k = 0; k < 64; ++k) s.push_back(gamma(2 * pi * k / 64));
  auto back = BoundaryCurve::from_samples(s);
  for (double t : {0.1, 1.3, 4.0}) CHECK((back(t) - gamma(t)).norm() < 1e-12);
}

TEST_CASE("csv export") {
  auto g = unit_disc(16);
  auto f = GraphFn::sample(g, [](const Vec2& x) { return Vec2(x.x(), 0); });
  std::ostringstream out;
  write_graph_csv(out, f);
  std::string text = out.str();
  CHECK(text.rfind("x,y,u,v\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == g->size() + 1);
  auto head = graph_header(*g);
  CHECK(head["domain"]["kind"] == "disc");
  CHECK(head["h"] == g->h());
}
