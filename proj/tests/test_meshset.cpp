#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <twoplane/meshset.hpp>

using namespace twoplane;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
constexpr double pi = std::numbers::pi;

namespace {

TriMesh4 flat_disc(double radius, int res) { return lift_to_sheet(make_plane_pair(pi / 2, pi / 2), 0, disc_mesh(radius, res)); }

// Cone over a closed polygonal loop in R^4 with apex x.
TriMesh4 cone(const Vec4& apex, int n, double reach) {
  std::vector<Vec4> v{apex};
  for (int k = 0; k < n; ++k) {
    double t = 2 * pi * k / n;
    Vec4 d(std::cos(t), std::sin(t), 0.3 * std::cos(3 * t), 0.2 * std::sin(2 * t));
    v.push_back(apex + reach * d);
  }
  std::vector<Tri> tris;
  for (int k = 0; k < n; ++k)
    tris.push_back({0u, static_cast<std::uint32_t>(1 + k), static_cast<std::uint32_t>(1 + (k + 1) % n)});
  return TriMesh4(std::move(v), std::move(tris));
}

} // namespace

TEST_CASE("construction validates indices and degeneracy") {
  std::vector<Vec4> v{Vec4::Zero(), Vec4::Unit(0), Vec4::Unit(1)};
  CHECK_THROWS_AS(TriMesh4(v, {{0, 1, 3}}), DomainError);
  CHECK_THROWS_AS(TriMesh4(v, {{0, 1, 1}}), DomainError);
  TriMesh4 m(v, {{0, 1, 2}});
  CHECK_THAT(m.areas()[0], WithinAbs(0.5, 1e-15));
}

TEST_CASE("cached areas match the Gram determinant") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<Vec4> v;
  for (int i = 0; i < 60; ++i) v.emplace_back(n(rng), n(rng), n(rng), n(rng));
  std::vector<Tri> t;
  for (std::uint32_t i = 0; i + 2 < 60; i += 3) t.push_back({i, i + 1, i + 2});
  TriMesh4 m(v, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    Vec4 a = v[t[k][1]] - v[t[k][0]], b = v[t[k][2]] - v[t[k][0]];
    Eigen::Matrix2d g;
    g << a.dot(a), a.dot(b), a.dot(b), b.dot(b);
    CHECK_THAT(m.areas()[k], WithinAbs(0.5 * std::sqrt(g.determinant()), 1e-12));
  }
}

TEST_CASE("plane pair mesh area") {
  auto orth = make_plane_pair(pi / 2, pi / 2);
  double a1 = mesh_plane_pair(orth, 1.0, 128).total_area();
  CHECK(a1 <= 2 * pi);
  CHECK(a1 >= 2 * pi * 0.995);
  double a2 = mesh_plane_pair(orth, 2.0, 128).total_area();
  CHECK_THAT(a2, WithinRel(4 * a1, 1e-12));
  auto same = make_plane_pair(0, 0);
  CHECK_THAT(mesh_plane_pair(same, 1.0, 128).total_area(), WithinRel(a1, 1e-12));
}

TEST_CASE("graded disc mesh covers the disc") {
  Mesh2 m = disc_mesh(1.25, 64, 1e-3);
  double area = 0.0;
  for (const auto& t : m.triangles) {
    Vec2 a = m.points[t[0]], b = m.points[t[1]], c = m.points[t[2]];
    double s = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    CHECK(s > 0);  // counter-clockwise
    area += 0.5 * s;
  }
  double n = 64;
  double polygon = 0.5 * n * 1.25 * 1.25 * std::sin(2 * pi / n);
  CHECK_THAT(area, WithinRel(polygon, 1e-10));
}

TEST_CASE("area in region") {
  TriMesh4 m = flat_disc(1.5, 192);
  CHECK_THAT(area_in_region(m, Ball{Vec4::Zero(), 10.0}), WithinRel(m.total_area(), 1e-12));
  CHECK_THAT(area_in_region(m, Ball{Vec4::Zero(), 1.0}), WithinAbs(pi, 1e-12));
  CHECK(area_in_region(m, Ball{Vec4(0, 0, 2, 0), 1.0}) == 0.0);
  CHECK_THAT(area_in_region(m, Ball{Vec4(0, 0, 0.6, 0), 1.0}), WithinAbs(pi * 0.64, 1e-12));

  auto pair = make_plane_pair(0.7, 1.1);
  TriMesh4 pp = mesh_plane_pair(pair, 2.0, 192);
  BiCylinder D{pair, Vec4::Zero(), 1.0};
  // on each sheet the other projection only shortens vectors, so D cuts out the unit disc
  double a = area_in_region(pp, D);
  CHECK(a >= 2 * pi * 0.999);
  CHECK(a <= area_in_region(pp, bounding_ball(Region{D})));
}

TEST_CASE("area monotone in the region and 2-homogeneous") {
  auto pair = make_plane_pair(0.8, 1.2);
  TriMesh4 m = lift_to_sheet(pair, 0, disc_mesh(1.0, 96), [](const Vec2& x) {
    return Vec2(0.2 * x.x() * x.y(), 0.1 * (x.x() * x.x() - x.y() * x.y()));
  });
  Vec4 c(0.1, -0.05, 0.02, 0.0);
  double prev = 0.0;
  for (double r : {0.1, 0.2, 0.4, 0.6, 0.8}) {
    double a = area_in_region(m, Ball{c, r});
    CHECK(a >= prev);
    prev = a;
    double s = area_in_region(m.dilated(c, 2.5), Ball{c, 2.5 * r});
    CHECK_THAT(s, WithinRel(6.25 * a, 1e-10));
    double b = area_in_region(m, BiCylinder{pair, c, r});
    CHECK(b >= a - 1e-12);
    double b2 = area_in_region(m.dilated(c, 2.5), BiCylinder{pair, c, 2.5 * r});
    CHECK_THAT(b2, WithinRel(6.25 * b, 1e-5));
  }
}

TEST_CASE("area additive over a split") {
  TriMesh4 m = flat_disc(1.0, 96);
  Ball big{Vec4::Zero(), 0.8}, small{Vec4::Zero(), 0.5};
  double ring = area_in_region(m, big) - area_in_region(m, small);
  CHECK_THAT(ring, WithinAbs(pi * (0.64 - 0.25), 1e-12));
}

TEST_CASE("density of plane and two-plane cones") {
  std::vector<double> radii{0.1, 0.3, 0.5, 0.9};
  auto single = density(flat_disc(1.0, 128), Vec4::Zero(), radii);
  for (double v : single.values) CHECK_THAT(v, WithinAbs(pi, 1e-10));
  auto pair = make_plane_pair(0.9, 1.3);
  auto two = density(mesh_plane_pair(pair, 1.0, 128), Vec4::Zero(), radii);
  for (double v : two.values) CHECK_THAT(v, WithinAbs(2 * pi, 1e-10));
  auto above = density(flat_disc(1.0, 128), Vec4(0.1, 0, 0.25, 0), {0.1, 0.2, 0.3});
  CHECK(above.values[0] == 0.0);
  CHECK(above.values[1] == 0.0);
  CHECK(above.values[2] > 0.0);
  CHECK_THROWS_AS(density(flat_disc(1.0, 16), Vec4::Zero(), {0.2, 0.1}), DomainError);
  CHECK_THROWS_AS(density(flat_disc(1.0, 16), Vec4::Zero(), {-0.1}), DomainError);
}

TEST_CASE("cone density is constant") {
  Vec4 apex(0.2, -0.1, 0.3, 0.05);
  TriMesh4 c = cone(apex, 40, 2.0);
  auto d = density(c, apex, {0.05, 0.2, 0.7, 1.3});
  for (double v : d.values) CHECK_THAT(v, WithinRel(d.values.front(), 1e-10));
}

TEST_CASE("minimal graph density is nondecreasing") {
  // z -> z^2/10 is a holomorphic, hence minimal, graph
  auto pair = make_plane_pair(pi / 2, pi / 2);
  TriMesh4 m = lift_to_sheet(pair, 0, disc_mesh(1.0, 256), [](const Vec2& x) {
    return Vec2((x.x() * x.x() - x.y() * x.y()) / 10, 2 * x.x() * x.y() / 10);
  });
  Vec4 x = Vec4::Zero();
  std::vector<double> radii;
  for (int k = 1; k <= 18; ++k) radii.push_back(0.05 * k);
  auto d = density(m, x, radii);
  for (std::size_t i = 1; i < d.values.size(); ++i) CHECK(d.values[i] >= d.values[i - 1] - 2e-4);
}

TEST_CASE("point to set distance") {
  TriMesh4 m = flat_disc(1.0, 64);
  CHECK(point_to_set_distance(m, m.vertices()[17]) == 0.0);
  CHECK_THAT(point_to_set_distance(m, Vec4(0.1, 0.2, 0.3, 0.4)), WithinAbs(0.5, 1e-14));

  auto pair = make_plane_pair(0.6, 1.0);
  TriMesh4 pp = lift_to_sheet(pair, 1, disc_mesh(1.0, 48), [](const Vec2& x) {
    return Vec2(0.3 * std::sin(3 * x.x()), 0.2 * x.y() * x.y());
  });
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  for (int k = 0; k < 1000; ++k) {
    Vec4 x(n(rng), n(rng), n(rng), n(rng));
    double fast = pp.distance(x);
    CHECK_THAT(fast, WithinAbs(pp.distance_brute_force(x), 1e-12));
    // triangle inequality against vertices
    const Vec4& v = pp.vertices()[k % pp.vertices().size()];
    CHECK(fast <= (x - v).norm() + 1e-12);
    CHECK(fast <= (x - v).norm() + pp.distance(v) + 1e-12);
  }
  CHECK_THROWS_AS(TriMesh4().distance(Vec4::Zero()), DomainError);
}

TEST_CASE("mesh samples stay inside the region and on the mesh") {
  auto pair = make_plane_pair(0.9, 1.3);
  TriMesh4 pp = mesh_plane_pair(pair, 1.0, 64);
  BiCylinder D{pair, Vec4(0.1, 0, 0, 0), 0.4};
  std::vector<Vec4> s;
  pp.sample(D, 500, s);
  CHECK(s.size() == 500);
  for (const auto& y : s) {
    CHECK(contains(D, y));
    CHECK(pp.distance(y) < 1e-12);
  }
}

TEST_CASE("json round trip and point cloud") {
  TriMesh4 m = flat_disc(1.0, 8);
  TriMesh4 r = mesh_from_json(mesh_to_json(m));
  CHECK(r.vertices() == m.vertices());
  CHECK(r.triangles() == m.triangles());
  CHECK_THROWS_AS(mesh_from_json(nlohmann::json{{"vertices", {{0, 0, 0, 0}}}, {"triangles", {{0, 0}}}}),
                  DomainError);

  std::string path = "test_meshset_cloud.csv";
  {
    std::ofstream out(path);
    out << "x,y,z,w\n0,0,0,0\n1,0,0,0\n0,2,0,0\n";
  }
  auto cloud = read_point_cloud_csv(path);
  std::remove(path.c_str());
  CHECK(cloud.points().size() == 3);
  CHECK_THAT(cloud.distance(Vec4(0, 2, 0, 1)), WithinAbs(1.0, 1e-15));
  std::vector<Vec4> s;
  cloud.sample(Ball{Vec4::Zero(), 1.5}, 10, s);
  CHECK(s.size() == 2);
}
