#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <twoplane/geom4.hpp>

using namespace twoplane;
using Catch::Matchers::WithinAbs;
constexpr double pi = std::numbers::pi;

namespace {

Frame4 random_frame(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = n(rng);
  Eigen::HouseholderQR<Eigen::Matrix4d> qr(m);
  Eigen::Matrix4d q = qr.householderQ();
  Frame4 f;
  for (int i = 0; i < 4; ++i) f[i] = q.col(i);
  return f;
}

// Singular values of the 2x2 Gram matrix, descending.
Vec2 gram_singular_values(const Plane2& p, const Plane2& q) {
  Eigen::Matrix2d g;
  g << p.b1.dot(q.b1), p.b1.dot(q.b2), p.b2.dot(q.b1), p.b2.dot(q.b2);
  return Eigen::JacobiSVD<Eigen::Matrix2d>(g).singularValues();
}

} // namespace

TEST_CASE("orthogonal and coincident pairs") {
  auto orth = make_plane_pair(pi / 2, pi / 2);
  CHECK_THAT(orth.xi, WithinAbs(0.0, 1e-15));
  CHECK(gram_singular_values(orth.p1, orth.p2).norm() < 1e-15);
  auto same = make_plane_pair(0, 0);
  CHECK(same.xi == 2.0);
  CHECK((same.p1.b1 - same.p2.b1).norm() < 1e-15);
  CHECK((same.p1.b2 - same.p2.b2).norm() < 1e-15);
}

TEST_CASE("gram singular values at (pi/3, pi/2)") {
  auto p = make_plane_pair(pi / 3, pi / 2);
  CHECK_THAT(p.xi, WithinAbs(1.0, 1e-15));
  Vec2 s = gram_singular_values(p.p1, p.p2);
  CHECK_THAT(s(0), WithinAbs(0.5, 1e-14));
  CHECK_THAT(s(1), WithinAbs(0.0, 1e-14));
}

TEST_CASE("angle validation") {
  CHECK_THROWS_AS(make_plane_pair(-0.1, 1.0), DomainError);
  CHECK_THROWS_AS(make_plane_pair(1.2, 0.8), DomainError);
  CHECK_THROWS_AS(make_plane_pair(0.5, 2.0), DomainError);
  Frame4 bad = standard_frame();
  bad[0](1) = 1e-6;
  CHECK_THROWS_AS(make_plane_pair(0.5, 1.0, bad), DomainError);
}

TEST_CASE("p2 basis decomposition and frame orthonormality") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, pi / 2);
  for (int k = 0; k < 100; ++k) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    auto f = random_frame(rng);
    auto p = make_plane_pair(a, b, f);
    CHECK(frame_defect(p.frame) <= 1e-12);
    CHECK((p.p2.b1 - (std::cos(a) * f[0] + std::sin(a) * f[2])).norm() < 1e-14);
    CHECK((p.p2.b2 - (std::cos(b) * f[1] + std::sin(b) * f[3])).norm() < 1e-14);
    for (int i = 0; i < 2; ++i) {
      const auto& s = p.sheet(i);
      for (const auto& n : p.normals(i)) {
        CHECK(std::abs(n.dot(s.b1)) < 1e-14);
        CHECK(std::abs(n.dot(s.b2)) < 1e-14);
      }
    }
  }
}

TEST_CASE("characteristic angles round trip") {
  CHECK(characteristic_angles(Plane2{}, Plane2{}) == std::pair<double, double>{0.0, 0.0});
  auto orth = make_plane_pair(pi / 2, pi / 2);
  auto [o1, o2] = characteristic_angles(orth.p1, orth.p2);
  CHECK_THAT(o1, WithinAbs(pi / 2, 1e-12));
  CHECK_THAT(o2, WithinAbs(pi / 2, 1e-12));
  auto p = make_plane_pair(0.8, 1.2);
  auto [a1, a2] = characteristic_angles(p.p1, p.p2);
  CHECK_THAT(a1, WithinAbs(0.8, 1e-10));
  CHECK_THAT(a2, WithinAbs(1.2, 1e-10));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, pi / 2);
  for (int k = 0; k < 100; ++k) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    auto q = make_plane_pair(a, b, random_frame(rng));
    auto [c1, c2] = characteristic_angles(q.p1, q.p2);
    CHECK_THAT(c1, WithinAbs(a, 1e-10));
    CHECK_THAT(c2, WithinAbs(b, 1e-10));
  }
}

TEST_CASE("projection") {
  Plane2 P;
  CHECK((project_onto(P, Vec4(1, 2, 3, 4)) - Vec4(1, 2, 0, 0)).norm() == 0.0);
  Plane2 off = P.translated(Vec4(0, 0, 1, -1));
  CHECK((project_onto(off, Vec4(1, 2, 3, 4)) - Vec4(1, 2, 1, -1)).norm() < 1e-15);
  CHECK((project_onto(off, Vec4(5, 6, 1, -1)) - Vec4(5, 6, 1, -1)).norm() < 1e-15);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int k = 0; k < 200; ++k) {
    auto f = random_frame(rng);
    Plane2 Q{f[0], f[1], Vec4(n(rng), n(rng), n(rng), n(rng))};
    Vec4 x(n(rng), n(rng), n(rng), n(rng));
    Vec4 p = project_onto(Q, x);
    CHECK(Q.distance(p) < 1e-12);
    CHECK(std::abs((x - p).dot(Q.b1)) < 1e-12);
    CHECK(std::abs((x - p).dot(Q.b2)) < 1e-12);
  }
}

TEST_CASE("bicylinder membership") {
  auto pair = make_plane_pair(0.9, 1.3);
  BiCylinder D{pair, Vec4::Zero(), 1.0};
  CHECK(contains(D, Vec4::Zero()));
  CHECK_FALSE(contains(D, pair.p1.point(Vec2(1.0001, 0))));
  CHECK_FALSE(contains(D, pair.p2.point(Vec2(0, -1.0001))));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    Vec4 d(n(rng), n(rng), n(rng), n(rng));
    Vec4 x = d.normalized() * u(rng);
    CHECK(contains(D, x));  // the bicylinder contains the ball
  }
  for (int k = 0; k < 2000; ++k) {
    // restricted to the planes, the test is the Euclidean ball test
    int s = k % 2;
    Vec2 c(2.4 * u(rng) - 1.2, 2.4 * u(rng) - 1.2);
    Vec4 x = pair.sheet(s).point(c);
    if (std::abs(c.norm() - 1.0) > 1e-12) CHECK(contains(D, x) == (c.norm() <= 1.0));
  }
}

TEST_CASE("relative distance of parallel planes") {
  Plane2 P;
  auto E = PlaneUnion::single(P);
  CHECK(relative_distance(E, E, Ball{Vec4::Zero(), 1.0}, 1.0).value == 0.0);
  for (double t : {0.05, 0.1, 0.2}) {
    auto F = PlaneUnion::single(P.translated(t * Vec4::Unit(2)));
    auto d = relative_distance(E, F, Ball{Vec4::Zero(), 1.0}, 1.0);
    CHECK_THAT(d.value, WithinAbs(t, 1e-12));
    CHECK(d.refinement_delta >= 0.0);
    CHECK(d.samples_first == 4096);
  }
  CHECK_THROWS_AS(relative_distance(E, E, Ball{}, 0.0), DomainError);
}

TEST_CASE("relative distance symmetry, dilation and Hausdorff comparison") {
  auto pair = make_plane_pair(1.0, 1.4);
  auto E = PlaneUnion::of(pair);
  auto F = PlaneUnion::of(pair, Vec4(0.03, -0.02, 0.05, 0.01));
  Region D = BiCylinder{pair, Vec4(0.01, 0, 0, 0), 0.7};
  auto a = relative_distance(E, F, D, 0.7, 2048);
  auto b = relative_distance(F, E, D, 0.7, 2048);
  CHECK(a.value == b.value);
  Vec4 about(0.01, 0, 0, 0);
  double lambda = 3.0;
  auto c = relative_distance(E.dilated(about, lambda), F.dilated(about, lambda), dilate(D, about, lambda),
                             0.7 * lambda, 2048);
  CHECK_THAT(c.value, WithinAbs(a.value, 1e-9));
  // one-sided sup over intersections never exceeds the Hausdorff distance of
  // the intersections; a dense cloud of both intersections gives that bound.
  std::vector<Vec4> se, sf;
  E.sample(D, 6000, se);
  F.sample(D, 6000, sf);
  auto side = [](const std::vector<Vec4>& from, const std::vector<Vec4>& to) {
    double h = 0.0;
    for (const auto& x : from) {
      double m = 1e300;
      for (const auto& y : to) m = std::min(m, (x - y).norm());
      h = std::max(h, m);
    }
    return h;
  };
  double h = std::max(side(se, sf), side(sf, se));
  CHECK(a.value <= h / 0.7 + 1e-9);
}

TEST_CASE("plane pair json") {
  auto p = make_plane_pair(0.4, 0.9);
  auto q = plane_pair_from_json(plane_pair_to_json(p));
  CHECK(q.alpha1 == p.alpha1);
  CHECK(q.alpha2 == p.alpha2);
  CHECK((q.p2.b2 - p.p2.b2).norm() == 0.0);
  CHECK_THROWS_AS(vec4_from_json(nlohmann::json::array({1, 2})), DomainError);
}
