#include <doctest.h>

#include "deepcontext/geometry.hpp"
#include "deepcontext/io.hpp"
#include "deepcontext/util.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace deepcontext;

namespace {

OrientedBox3 random_box(std::mt19937_64& rng, double spread) {
  return OrientedBox3(Vec3(uniform(rng, -spread, spread), uniform(rng, -spread, spread), uniform(rng, 0, 0.5)),
                      Vec3(uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 1.5)),
                      uniform(rng, -kPi, kPi));
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("angles wrap and distances are symmetric") {
  CHECK(normalize_yaw(-kPi / 2) == doctest::Approx(1.5 * kPi));
  CHECK(normalize_yaw(5 * kPi) == doctest::Approx(kPi));
  CHECK(angle_distance(0.1, kTwoPi - 0.1) == doctest::Approx(0.2));
  CHECK(angle_distance(0.0, kPi) == doctest::Approx(kPi));
}

TEST_CASE("box validation and containment") {
  CHECK_THROWS_AS(OrientedBox3(Vec3::Zero(), Vec3(1, 0, 1), 0.0), std::invalid_argument);
  const OrientedBox3 b(Vec3(0, 0, 0), Vec3(2, 1, 1), kPi / 2);
  CHECK(b.contains(Vec3(0.0, 0.9, 0.0)));
  CHECK_FALSE(b.contains(Vec3(0.9, 0.0, 0.0)));
}

TEST_CASE("iou: identical, disjoint, quarter turn of a square, touching") {
  const OrientedBox3 a(Vec3(0, 0, 0.5), Vec3(1, 1, 1), 0.3);
  CHECK(box_iou_3d(a, a) == doctest::Approx(1.0));
  CHECK(box_iou_3d(a, OrientedBox3(Vec3(5, 0, 0.5), Vec3(1, 1, 1), 0.3)) == 0.0);
  CHECK(box_iou_3d(a, OrientedBox3(Vec3(0, 0, 0.5), Vec3(1, 1, 1), 0.3 + kPi / 2)) == doctest::Approx(1.0));
  CHECK(box_iou_3d(a, OrientedBox3(Vec3(0, 0, 1.5), Vec3(1, 1, 1), 0.3)) == doctest::Approx(0.0));
  // Half overlap along x, axis aligned: inter 0.5, union 1.5.
  const OrientedBox3 p(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.0), q(Vec3(0.5, 0, 0), Vec3(1, 1, 1), 0.0);
  CHECK(box_iou_3d(p, q) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou agrees with Monte Carlo sampling") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 8; ++i) {
    const OrientedBox3 a = random_box(rng, 0.4), b = random_box(rng, 0.4);
    CHECK(std::abs(box_iou_3d(a, b) - oracle::iou_monte_carlo(a, b, 200000, 100 + i)) < 1e-2);
  }
}

TEST_CASE("iou is symmetric and within [0, 1]") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const OrientedBox3 a = random_box(rng, 1.0), b = random_box(rng, 1.0);
    const double ab = box_iou_3d(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(ab == doctest::Approx(box_iou_3d(b, a)).epsilon(1e-9));
  }
}

TEST_CASE("render then back-project stays on a planted plane") {
  const CameraIntrinsics cam = CameraIntrinsics::desk_default();
  const TriMesh wall = make_box_mesh(Vec3(-3, -3, 2.0), Vec3(3, 3, 2.2));
  const DepthImage d = render_mesh_depth(wall, cam);
  const PointCloud pts = backproject_depth(d, cam);
  CHECK(pts.size() == static_cast<std::size_t>(cam.width * cam.height));
  for (const auto& p : pts.points) CHECK(std::abs(p.z() - 2.0) < 1e-6);
  const Vec3 c = backproject_pixel(cam, cam.cx, cam.cy, 2.0);
  CHECK(c.x() == doctest::Approx(0.0));
  CHECK(c.y() == doctest::Approx(0.0));
}

TEST_CASE("slanted plane round trip") {
  const CameraIntrinsics cam = CameraIntrinsics::desk_default();
  // Plane z = 2 + 0.5 x, as two triangles.
  TriMesh m;
  m.vertices = {Vec3(-2, -2, 1.0), Vec3(2, -2, 3.0), Vec3(2, 2, 3.0), Vec3(-2, 2, 1.0)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  const PointCloud pts = backproject_depth(render_mesh_depth(m, cam), cam);
  CHECK(pts.size() > 1000u);
  for (const auto& p : pts.points) CHECK(std::abs(p.z() - (2.0 + 0.5 * p.x())) < 1e-6);
}

TEST_CASE("fit_mesh_to_box matches the box bounds") {
  const TriMesh unit = make_box_mesh(Vec3(-0.5, -0.5, 0), Vec3(0.5, 0.5, 1));
  const OrientedBox3 box(Vec3(1, 2, 0.4), Vec3(2, 1, 0.8), 0.0);
  const auto [lo, hi] = mesh_bounds(fit_mesh_to_box(unit, box));
  CHECK((lo - Vec3(0, 1.5, 0.0)).norm() < 1e-12);
  CHECK((hi - Vec3(2, 2.5, 0.8)).norm() < 1e-12);
}

TEST_CASE("convex intersection area of offset squares") {
  const std::vector<Eigen::Vector2d> a{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, b{{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}};
  CHECK(convex_intersection_area(a, b) == doctest::Approx(0.25));
}

TEST_CASE("depth png stores millimeters") {
  DepthImage d(4, 3);
  d.at(1, 1) = 1.2344f;
  d.at(2, 2) = 70.0f;
  const auto path = std::filesystem::temp_directory_path() / "dc_depth_test.png";
  io::write_depth_png(path, d);
  const DepthImage r = io::read_depth_png(path);
  CHECK(r.at(1, 1) == doctest::Approx(1.234).epsilon(1e-6));
  CHECK(r.at(2, 2) == doctest::Approx(65.535).epsilon(1e-6));
  CHECK(r.at(0, 0) == 0.0f);
  CHECK(io::quantize_to_millimeters(d).values == r.values);
  std::filesystem::remove(path);
}

TEST_CASE("obj round trip") {
  const TriMesh m = make_cylinder_mesh(0.1, 0.2, 0.3, 0.0, 1.0, 8);
  const auto path = std::filesystem::temp_directory_path() / "dc_mesh_test.obj";
  io::write_obj(path, m);
  const TriMesh r = io::read_obj(path);
  CHECK(r.triangles == m.triangles);
  REQUIRE(r.vertices.size() == m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((r.vertices[i] - m.vertices[i]).norm() < 1e-6);
  std::filesystem::remove(path);
}

}
