#include <doctest.h>

#include "deepcontext/hungarian.hpp"
#include "deepcontext/templates.hpp"
#include "oracles.hpp"

using namespace deepcontext;

namespace {

const std::vector<std::string> kCats{"bed", "nightstand", "lamp"};

// Random template with bed as major, and a matching random annotation.
std::pair<SceneTemplate, SceneAnnotation> random_instance(std::mt19937_64& rng) {
  SceneTemplate t;
  t.name = "sleeping_area";
  t.major_category = "bed";
  SceneAnnotation a;
  a.scene_type = t.name;
  int id = 0;
  for (const auto& cat : kCats) {
    const int na = 1 + static_cast<int>(uniform_index(rng, 7));
    const int no = (cat == "bed" ? 1 : 0) + static_cast<int>(uniform_index(rng, cat == "bed" ? 7 : 8));
    for (int i = 0; i < na; ++i)
      t.anchors.push_back({id++, cat,
                           OrientedBox3(Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 0, 1)),
                                        Vec3(uniform(rng, 0.3, 2), uniform(rng, 0.3, 2), uniform(rng, 0.3, 1)), 0.0)});
    for (int i = 0; i < no; ++i)
      a.objects.push_back({cat, OrientedBox3(Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 0, 1)),
                                             Vec3(uniform(rng, 0.3, 2), uniform(rng, 0.3, 2), uniform(rng, 0.3, 1)),
                                             uniform(rng, -kPi, kPi))});
  }
  return {t, a};
}

// Per-category exhaustive minimum, costs taken from the definition directly.
double oracle_cost(const SceneAnnotation& a, const SceneTemplate& t, const Alignment& al) {
  double total = 0.0;
  for (const auto& cat : kCats) {
    std::vector<std::vector<double>> cost;
    for (const auto& o : a.objects) {
      if (o.category != cat) continue;
      const OrientedBox3 b = canonicalize_box(al.apply(o.box));
      std::vector<double> row;
      for (const auto& an : t.anchors)
        if (an.category == cat) row.push_back((b.center - an.box.center).norm() + (b.size - an.box.size).norm());
      cost.push_back(row);
    }
    total += oracle::assignment_min(cost);
  }
  return total;
}

}  // namespace

TEST_SUITE("templates") {

TEST_CASE("assignment solver reaches the permutation minimum") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const int r = 1 + static_cast<int>(uniform_index(rng, 7)), c = 1 + static_cast<int>(uniform_index(rng, 7));
    Eigen::MatrixXd m(r, c);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(c)));
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = rows[i][j] = uniform(rng, 0, 10);
    const auto asg = solve_assignment(m);
    REQUIRE(asg.size() == static_cast<std::size_t>(r));
    double s = 0;
    int assigned = 0;
    std::vector<int> used(static_cast<std::size_t>(c), 0);
    for (int i = 0; i < r; ++i) {
      if (asg[i] < 0) continue;
      CHECK(used[static_cast<std::size_t>(asg[i])]++ == 0);
      s += m(i, asg[i]);
      ++assigned;
    }
    CHECK(assigned == std::min(r, c));
    CHECK(s == doctest::Approx(oracle::assignment_min(rows)).epsilon(1e-12));
  }
}

TEST_CASE("match total cost equals the exhaustive minimum") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 200; ++t) {
    const auto [tmpl, ann] = random_instance(rng);
    const auto gt = match_annotation_to_template(ann, tmpl);
    CHECK(gt.total_cost == doctest::Approx(oracle_cost(ann, tmpl, gt.alignment)).epsilon(1e-12));
    int exists = 0;
    for (const auto& a : gt.anchors) exists += a.exists;
    std::size_t matchable = 0;
    for (const auto& cat : kCats) {
      std::size_t o = 0;
      for (const auto& x : ann.objects) o += x.category == cat;
      matchable += std::min(o, tmpl.count(cat));
    }
    CHECK(static_cast<std::size_t>(exists) == matchable);
  }
}

TEST_CASE("objects of categories without anchors are dropped with a warning") {
  SceneTemplate t;
  t.name = "office_area";
  t.major_category = "desk";
  t.anchors.push_back({0, "desk", OrientedBox3(Vec3::Zero(), Vec3(1.2, 0.6, 0.75), 0.0)});
  SceneAnnotation a;
  a.objects.push_back({"desk", OrientedBox3(Vec3(1, 2, 0.4), Vec3(1.2, 0.6, 0.75), 0.3)});
  a.objects.push_back({"piano", OrientedBox3(Vec3(3, 2, 0.4), Vec3(1, 1, 1), 0.0)});
  const auto gt = match_annotation_to_template(a, t);
  CHECK(gt.warnings.size() == 1u);
  CHECK(gt.anchors[0].exists);
  CHECK(gt.anchors[0].target.center.norm() < 1e-12);
  CHECK(gt.total_cost < 1e-12);
}

TEST_CASE("align_to_major puts the largest major object at the origin with yaw zero") {
  SceneAnnotation a;
  a.objects.push_back({"bed", OrientedBox3(Vec3(1, 1, 0.3), Vec3(1, 1, 0.5), 0.4)});
  a.objects.push_back({"bed", OrientedBox3(Vec3(-2, 3, 0.3), Vec3(2, 1.6, 0.5), 1.1)});
  const Alignment al = align_to_major(a, "bed");
  const OrientedBox3 b = al.apply(a.objects[1].box);
  CHECK(b.center.norm() < 1e-12);
  CHECK(angle_distance(b.yaw, 0.0) < 1e-12);
  CHECK_THROWS_AS(align_to_major(a, "desk"), AlignmentError);
}

TEST_CASE("alignment inverse and compose") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const Alignment a{uniform(rng, -4, 4), Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -1, 1))};
    const Alignment b{uniform(rng, -4, 4), Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -1, 1))};
    const Vec3 p(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
    CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    CHECK((a.rigid() * p - a.apply(p)).norm() < 1e-12);
  }
}

TEST_CASE("canonicalize_box keeps the footprint and lands yaw within 45 degrees of zero") {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 500; ++i) {
    const OrientedBox3 b(Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), 0.5),
                         Vec3(uniform(rng, 0.2, 2), uniform(rng, 0.2, 2), 1.0), uniform(rng, -10, 10));
    const OrientedBox3 c = canonicalize_box(b);
    CHECK(angle_distance(c.yaw, 0.0) <= kPi / 4 + 1e-12);
    CHECK(box_iou_3d(b, c) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("kmeans recovers separated clusters and is seeded") {
  std::mt19937_64 rng(25);
  std::vector<Eigen::VectorXd> pts;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd p(2);
      p << 10.0 * c + uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5);
      pts.push_back(p);
    }
  const auto centers = kmeans(pts, 3, 7);
  REQUIRE(centers.size() == 3u);
  std::vector<double> xs;
  for (const auto& c : centers) xs.push_back(c(0));
  std::sort(xs.begin(), xs.end());
  for (int c = 0; c < 3; ++c) CHECK(std::abs(xs[static_cast<std::size_t>(c)] - 10.0 * c) < 0.5);
  const auto again = kmeans(pts, 3, 7);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i] == centers[i]);
}

TEST_CASE("learned templates have the requested anchors and survive json") {
  std::mt19937_64 rng(26);
  std::vector<SceneAnnotation> scenes;
  for (int s = 0; s < 12; ++s) {
    SceneAnnotation a;
    a.scene_type = "sleeping_area";
    const double yaw = uniform(rng, -kPi, kPi);
    const Alignment place{yaw, Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), 0.0)};
    a.objects.push_back({"bed", place.apply(OrientedBox3(Vec3(0, 0, 0.3), Vec3(2.0, 1.6, 0.6), 0.0))});
    a.objects.push_back({"nightstand", place.apply(OrientedBox3(Vec3(1.3, 0.6, 0.3), Vec3(0.5, 0.4, 0.6), 0.0))});
    a.objects.push_back({"floor", place.apply(OrientedBox3(Vec3(0, 0, -0.05), Vec3(5, 5, 0.1), 0.0))});
    scenes.push_back(a);
  }
  TemplateLearningOptions opt;
  opt.k_per_category = {{"bed", 1}, {"nightstand", 2}, {"floor", 1}};
  const SceneTemplate t = learn_template(scenes, "sleeping_area", "bed", opt);
  CHECK(t.count("bed") == 1u);
  CHECK(t.count("nightstand") == 2u);
  CHECK(t.count("floor") == 1u);
  for (const auto& an : t.anchors)
    if (an.category == "bed") CHECK(an.box.center.head<2>().norm() < 1e-9);
  const SceneTemplate back = template_from_json(to_json(t));
  REQUIRE(back.anchors.size() == t.anchors.size());
  for (std::size_t i = 0; i < t.anchors.size(); ++i) {
    CHECK(back.anchors[i].category == t.anchors[i].category);
    CHECK((back.anchors[i].box.center - t.anchors[i].box.center).norm() < 1e-12);
    CHECK((back.anchors[i].box.size - t.anchors[i].box.size).norm() < 1e-12);
  }
  CHECK(back.major_category == "bed");
}

TEST_CASE("annotation json round trip") {
  SceneAnnotation a;
  a.scene_type = "lounging_area";
  a.camera = CameraIntrinsics::desk_default();
  a.objects.push_back({"sofa", OrientedBox3(Vec3(1, 2, 0.4), Vec3(2, 0.9, 0.8), 0.7)});
  a.world_from_camera.translation() = Vec3(0, 0, 1.4);
  const SceneAnnotation b = annotation_from_json(to_json(a));
  CHECK(b.scene_type == a.scene_type);
  REQUIRE(b.objects.size() == 1u);
  CHECK(b.objects[0].box.yaw == doctest::Approx(0.7));
  CHECK((b.world_from_camera.matrix() - a.world_from_camera.matrix()).norm() < 1e-12);
  CHECK(b.camera.fx == a.camera.fx);
}

}
