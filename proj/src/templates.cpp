#include "deepcontext/templates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "deepcontext/hungarian.hpp"
#include "deepcontext/util.hpp"

namespace deepcontext {

int template_index(std::string_view name) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i)
    if (kTemplateNames[i] == name) return static_cast<int>(i);
  return -1;
}

bool is_layout_category(std::string_view category) {
  return std::find(kLayoutCategories.begin(), kLayoutCategories.end(), category) != kLayoutCategories.end();
}

std::size_t SceneTemplate::count(std::string_view category) const {
  return static_cast<std::size_t>(
      std::count_if(anchors.begin(), anchors.end(), [&](const ObjectAnchor& a) { return a.category == category; }));
}

Vec3 Alignment::apply(const Vec3& p) const { return yaw_rotation(yaw) * p + translation; }

OrientedBox3 Alignment::apply(const OrientedBox3& box) const {
  return OrientedBox3(apply(box.center), box.size, box.yaw + yaw);
}

Alignment Alignment::inverse() const {
  return Alignment{-yaw, -(yaw_rotation(-yaw) * translation)};
}

Alignment Alignment::compose(const Alignment& first) const {
  return Alignment{yaw + first.yaw, yaw_rotation(yaw) * first.translation + translation};
}

Rigid3 Alignment::rigid() const {
  Rigid3 r = Rigid3::Identity();
  r.linear() = yaw_rotation(yaw);
  r.translation() = translation;
  return r;
}

OrientedBox3 canonicalize_box(const OrientedBox3& box) {
  // Quarter turns k such that yaw - k*pi/2 falls in [-pi/4, pi/4).
  const double quarter = kPi / 2;
  const double k = std::floor((box.yaw + kPi / 4) / quarter);
  const double rest = box.yaw - k * quarter;
  Vec3 size = box.size;
  if (static_cast<long>(k) % 2 != 0) std::swap(size.x(), size.y());
  return OrientedBox3(box.center, size, rest);
}

Alignment align_to_major(const SceneAnnotation& annotation, std::string_view major_category) {
  const AnnotatedObject* best = nullptr;
  for (const auto& obj : annotation.objects) {
    if (obj.category != major_category) continue;
    if (!best || obj.box.volume() > best->box.volume()) best = &obj;
  }
  if (!best) throw AlignmentError("no '" + std::string(major_category) + "' object to align to");
  const double yaw = -best->box.yaw;
  return Alignment{yaw, -(yaw_rotation(yaw) * best->box.center)};
}

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

std::vector<Eigen::VectorXd> kmeans(std::span<const Eigen::VectorXd> points, int k, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("kmeans needs at least one point");
  if (k < 1) throw std::invalid_argument("kmeans needs k >= 1");
  const auto n = points.size();

  std::vector<Eigen::VectorXd> distinct;
  for (const auto& p : points)
    if (std::none_of(distinct.begin(), distinct.end(), [&](const Eigen::VectorXd& d) { return d == p; }))
      distinct.push_back(p);
  if (static_cast<std::size_t>(k) >= distinct.size()) {
    std::vector<Eigen::VectorXd> out = distinct;
    std::sort(out.begin(), out.end(), lex_less);
    const std::size_t base = out.size();
    for (std::size_t i = 0; out.size() < static_cast<std::size_t>(k); ++i) out.push_back(out[i % base]);
    return out;
  }

  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centroids;
  centroids.push_back(points[static_cast<std::size_t>(uniform01(rng) * n) % n]);
  std::vector<double> d2(n);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    double r = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0) continue;
      r -= d2[i];
      if (r < 0) {
        pick = i;
        break;
      }
    }
    // Guard against rounding: never pick a point already used as a centroid.
    if (d2[pick] <= 0)
      for (std::size_t i = 0; i < n; ++i)
        if (d2[i] > 0) pick = i;
    centroids.push_back(points[pick]);
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points[i] - centroids[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(points[0].size());
      int count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == c) {
          sum += points[i];
          ++count;
        }
      if (count > 0) centroids[c] = sum / count;
    }
  }
  std::sort(centroids.begin(), centroids.end(), lex_less);
  return centroids;
}

std::string default_major_category(std::string_view template_name) {
  if (template_name == "sleeping_area") return "bed";
  if (template_name == "office_area") return "desk";
  if (template_name == "lounging_area") return "sofa";
  if (template_name == "table_chair_set") return "table";
  throw std::invalid_argument("unknown template: " + std::string(template_name));
}

TemplateLearningOptions default_learning_options(std::string_view template_name) {
  TemplateLearningOptions opt;
  opt.default_k = 1;
  opt.k_per_category[default_major_category(template_name)] = 1;
  if (template_name == "sleeping_area") {
    opt.k_per_category["nightstand"] = 2;
  } else if (template_name == "office_area") {
    opt.k_per_category["bookshelf"] = 2;
  } else if (template_name == "lounging_area") {
    opt.k_per_category["end_table"] = 2;
  } else if (template_name == "table_chair_set") {
    opt.k_per_category["chair"] = 4;
  }
  for (auto layout : kLayoutCategories) opt.k_per_category[std::string(layout)] = 1;
  return opt;
}

namespace {

Eigen::VectorXd box_features(const OrientedBox3& b) {
  Eigen::VectorXd f(6);
  f << b.center, b.size;
  return f;
}

OrientedBox3 layout_box(OrientedBox3 box) {
  int thin = 0;
  box.size.minCoeff(&thin);
  box.size[thin] = kLayoutThickness;
  return box;
}

}  // namespace

SceneTemplate learn_template(std::span<const SceneAnnotation> scenes, std::string_view name,
                             std::string_view major_category, const TemplateLearningOptions& options) {
  if (scenes.empty()) throw std::invalid_argument("learn_template needs at least one scene");

  std::map<std::string, std::vector<Eigen::VectorXd>> per_category;
  for (const auto& scene : scenes) {
    const Alignment align = align_to_major(scene, major_category);
    for (const auto& obj : scene.objects) {
      const OrientedBox3 b = canonicalize_box(align.apply(obj.box));
      per_category[obj.category].push_back(box_features(b));
    }
  }

  SceneTemplate tmpl;
  tmpl.name = std::string(name);
  tmpl.major_category = std::string(major_category);

  auto k_for = [&](const std::string& cat) {
    auto it = options.k_per_category.find(cat);
    return it != options.k_per_category.end() ? it->second : options.default_k;
  };
  auto add_anchors = [&](const std::string& cat, bool layout) {
    auto it = per_category.find(cat);
    if (it == per_category.end()) return;
    const int k = k_for(cat);
    if (k <= 0) return;
    const auto centroids = kmeans(it->second, k, mix_seed(options.seed, fnv1a64(cat)));
    for (const auto& c : centroids) {
      OrientedBox3 box(c.head<3>(), c.tail<3>(), 0.0);
      if (layout) box = layout_box(box);
      tmpl.anchors.push_back(ObjectAnchor{static_cast<int>(tmpl.anchors.size()), cat, box});
    }
  };

  add_anchors(tmpl.major_category, false);
  for (const auto& [cat, _] : per_category)
    if (cat != tmpl.major_category && !is_layout_category(cat)) add_anchors(cat, false);
  for (auto layout : kLayoutCategories) add_anchors(std::string(layout), true);
  return tmpl;
}

double anchor_match_cost(const OrientedBox3& object, const OrientedBox3& anchor) {
  return (object.center - anchor.center).norm() + (object.size - anchor.size).norm();
}

TemplateGroundTruth match_with_alignment(const SceneAnnotation& annotation, const SceneTemplate& tmpl,
                                         const Alignment& alignment) {
  TemplateGroundTruth gt;
  gt.template_name = tmpl.name;
  gt.alignment = alignment;
  gt.anchors.assign(tmpl.anchors.size(), AnchorTarget{});

  std::map<std::string, std::vector<int>> objects_by_cat;
  for (std::size_t i = 0; i < annotation.objects.size(); ++i)
    objects_by_cat[annotation.objects[i].category].push_back(static_cast<int>(i));

  for (const auto& [cat, obj_ids] : objects_by_cat) {
    std::vector<int> anchor_ids;
    for (std::size_t a = 0; a < tmpl.anchors.size(); ++a)
      if (tmpl.anchors[a].category == cat) anchor_ids.push_back(static_cast<int>(a));
    if (anchor_ids.empty()) {
      gt.warnings.push_back("dropped " + std::to_string(obj_ids.size()) + " '" + cat +
                            "' object(s): no anchor of that category");
      continue;
    }
    std::vector<OrientedBox3> boxes;
    for (int oi : obj_ids) boxes.push_back(canonicalize_box(alignment.apply(annotation.objects[oi].box)));
    Eigen::MatrixXd cost(obj_ids.size(), anchor_ids.size());
    for (std::size_t r = 0; r < obj_ids.size(); ++r)
      for (std::size_t c = 0; c < anchor_ids.size(); ++c)
        cost(r, c) = anchor_match_cost(boxes[r], tmpl.anchors[anchor_ids[c]].box);
    const auto assignment = solve_assignment(cost);
    for (std::size_t r = 0; r < obj_ids.size(); ++r) {
      if (assignment[r] < 0) {
        gt.warnings.push_back("dropped unmatched '" + cat + "' object #" + std::to_string(obj_ids[r]));
        continue;
      }
      auto& target = gt.anchors[anchor_ids[assignment[r]]];
      target.exists = true;
      target.target = boxes[r];
      target.object_index = obj_ids[r];
      gt.total_cost += cost(r, assignment[r]);
    }
  }
  return gt;
}

TemplateGroundTruth match_annotation_to_template(const SceneAnnotation& annotation, const SceneTemplate& tmpl) {
  return match_with_alignment(annotation, tmpl, align_to_major(annotation, tmpl.major_category));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

nlohmann::json to_json(const SceneTemplate& tmpl) {
  nlohmann::json j;
  j["name"] = tmpl.name;
  j["major_category"] = tmpl.major_category;
  j["anchors"] = nlohmann::json::array();
  for (const auto& a : tmpl.anchors)
    j["anchors"].push_back({{"id", a.id}, {"category", a.category}, {"center", vec_json(a.box.center)},
                            {"size", vec_json(a.box.size)}});
  return j;
}

SceneTemplate template_from_json(const nlohmann::json& j) {
  SceneTemplate t;
  t.name = j.at("name").get<std::string>();
  t.major_category = j.at("major_category").get<std::string>();
  std::set<int> ids;
  for (const auto& a : j.at("anchors")) {
    ObjectAnchor anchor;
    anchor.id = a.at("id").get<int>();
    anchor.category = a.at("category").get<std::string>();
    if (anchor.category.empty()) throw std::invalid_argument("anchor category must be nonempty");
    if (!ids.insert(anchor.id).second) throw std::invalid_argument("duplicate anchor id " + std::to_string(anchor.id));
    anchor.box = OrientedBox3(vec_from(a.at("center")), vec_from(a.at("size")), 0.0);
    t.anchors.push_back(std::move(anchor));
  }
  return t;
}

std::vector<SceneTemplate> templates_from_json(const nlohmann::json& j) {
  std::vector<SceneTemplate> out;
  if (j.contains("templates")) {
    for (const auto& t : j.at("templates")) out.push_back(template_from_json(t));
  } else {
    out.push_back(template_from_json(j));
  }
  return out;
}

nlohmann::json templates_to_json(std::span<const SceneTemplate> templates) {
  nlohmann::json j;
  j["templates"] = nlohmann::json::array();
  for (const auto& t : templates) j["templates"].push_back(to_json(t));
  return j;
}

nlohmann::json to_json(const CameraIntrinsics& cam) {
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  CameraIntrinsics cam{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(), j.at("width").get<int>(),  j.at("height").get<int>()};
  cam.validate();
  return cam;
}

nlohmann::json to_json(const SceneAnnotation& ann) {
  nlohmann::json j;
  j["scene_type"] = ann.scene_type;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : ann.objects)
    j["objects"].push_back({{"category", o.category}, {"center", vec_json(o.box.center)},
                            {"size", vec_json(o.box.size)}, {"yaw", o.box.yaw}});
  j["intrinsics"] = to_json(ann.camera);
  nlohmann::json m = nlohmann::json::array();
  const Eigen::Matrix4d mat = ann.world_from_camera.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(mat(r, c));
  j["world_from_camera"] = m;
  return j;
}

SceneAnnotation annotation_from_json(const nlohmann::json& j) {
  SceneAnnotation ann;
  ann.scene_type = j.value("scene_type", std::string("other"));
  for (const auto& o : j.at("objects")) {
    ann.objects.push_back(AnnotatedObject{o.at("category").get<std::string>(),
                                          OrientedBox3(vec_from(o.at("center")), vec_from(o.at("size")),
                                                       o.value("yaw", 0.0))});
  }
  ann.camera = intrinsics_from_json(j.at("intrinsics"));
  const auto& m = j.at("world_from_camera");
  if (!m.is_array() || m.size() != 16) throw std::invalid_argument("world_from_camera must hold 16 values");
  Eigen::Matrix4d mat;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) mat(r, c) = m[r * 4 + c].get<double>();
  ann.world_from_camera.matrix() = mat;
  return ann;
}

std::vector<SceneTemplate> learn_templates(std::span<const SceneAnnotation> scenes, std::uint64_t seed) {
  std::vector<SceneTemplate> out;
  for (const auto& name : kTemplateNames) {
    std::vector<SceneAnnotation> of_type;
    for (const auto& s : scenes)
      if (s.scene_type == name) of_type.push_back(s);
    if (of_type.empty()) throw std::invalid_argument("no annotated scenes of type " + std::string(name));
    TemplateLearningOptions opt = default_learning_options(name);
    opt.seed = mix_seed(seed, static_cast<std::uint64_t>(template_index(name)));
    out.push_back(learn_template(of_type, name, default_major_category(name), opt));
  }
  return out;
}

}  // namespace deepcontext
