#include "deepcontext/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <random>

#include "deepcontext/hybrid_synth.hpp"
#include "deepcontext/io.hpp"
#include "deepcontext/parallel.hpp"
#include "deepcontext/util.hpp"

namespace deepcontext {

namespace {

constexpr double kDeg = kPi / 180.0;

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) throw std::invalid_argument(std::string("generator range '") + name + "' is empty");
}

nlohmann::json range_json(const Range& r) { return {r.lo, r.hi}; }

Range range_from(const nlohmann::json& j, const char* key, Range def) {
  if (!j.contains(key)) return def;
  const auto v = j.at(key).get<std::array<double, 2>>();
  return {v[0], v[1]};
}

double draw(std::mt19937_64& rng, const Range& r) { return uniform(rng, r.lo, r.hi); }

}  // namespace

void GeneratorConfig::validate() const {
  double total = 0.0;
  for (double w : template_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("template weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("template weights must not all be zero");
  check_range(room_height, "room_height");
  check_range(room_margin, "room_margin");
  check_range(camera_height, "camera_height");
  check_range(camera_pitch_deg, "camera_pitch_deg");
  check_range(camera_distance, "camera_distance");
  if (clutter_count[0] < 0 || clutter_count[0] > clutter_count[1])
    throw std::invalid_argument("generator range 'clutter_count' is empty");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  camera.validate();
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"template_weights", c.template_weights},
          {"room_height", range_json(c.room_height)},
          {"room_margin", range_json(c.room_margin)},
          {"camera_height", range_json(c.camera_height)},
          {"camera_pitch_deg", range_json(c.camera_pitch_deg)},
          {"camera_distance", range_json(c.camera_distance)},
          {"camera_heading_jitter_deg", c.camera_heading_jitter_deg},
          {"wall_view_spread_deg", c.wall_view_spread_deg},
          {"clutter_count", c.clutter_count},
          {"position_jitter", c.position_jitter},
          {"yaw_jitter_deg", c.yaw_jitter_deg},
          {"min_major_pixels", c.min_major_pixels},
          {"max_attempts", c.max_attempts},
          {"camera", to_json(c.camera)},
          {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  if (j.contains("template_weights")) c.template_weights = j.at("template_weights").get<std::array<double, 4>>();
  c.room_height = range_from(j, "room_height", c.room_height);
  c.room_margin = range_from(j, "room_margin", c.room_margin);
  c.camera_height = range_from(j, "camera_height", c.camera_height);
  c.camera_pitch_deg = range_from(j, "camera_pitch_deg", c.camera_pitch_deg);
  c.camera_distance = range_from(j, "camera_distance", c.camera_distance);
  c.camera_heading_jitter_deg = j.value("camera_heading_jitter_deg", c.camera_heading_jitter_deg);
  c.wall_view_spread_deg = j.value("wall_view_spread_deg", c.wall_view_spread_deg);
  if (j.contains("clutter_count")) c.clutter_count = j.at("clutter_count").get<std::array<int, 2>>();
  c.position_jitter = j.value("position_jitter", c.position_jitter);
  c.yaw_jitter_deg = j.value("yaw_jitter_deg", c.yaw_jitter_deg);
  c.min_major_pixels = j.value("min_major_pixels", c.min_major_pixels);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  if (j.contains("camera")) c.camera = intrinsics_from_json(j.at("camera"));
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Layout of one functional area in a room frame: major object centered at
// the origin with yaw 0, its front facing -y.

namespace {

struct Placed {
  std::string category;
  OrientedBox3 box;
};

struct AreaLayout {
  std::vector<Placed> objects;  // major first
  bool wall_backed = false;
  bool annotate_wall = false;
  double wall_y = 0.0;
};

struct Sampler {
  std::mt19937_64& rng;
  const GeneratorConfig& cfg;

  double u(double lo, double hi) { return uniform(rng, lo, hi); }
  double side() { return bernoulli(rng, 0.5) ? 1.0 : -1.0; }
  double jitter() { return u(-cfg.position_jitter, cfg.position_jitter); }
  double yaw_jitter() { return u(-cfg.yaw_jitter_deg, cfg.yaw_jitter_deg) * kDeg; }
  // Count with the given probabilities for 0, 1, 2, ...
  int count(std::initializer_list<double> probs) {
    double r = uniform01(rng);
    int i = 0;
    for (double p : probs) {
      if (r < p) return i;
      r -= p;
      ++i;
    }
    return i - 1;
  }
};

void add(AreaLayout& area, const std::string& cat, const Vec3& size, double x, double y, double yaw) {
  area.objects.push_back({cat, OrientedBox3(Vec3(x, y, size.z() / 2), size, yaw)});
}

AreaLayout sleeping_area(Sampler& s) {
  AreaLayout a;
  const Vec3 bed(s.u(1.4, 2.0), s.u(1.9, 2.2), s.u(0.8, 1.1));
  add(a, "bed", bed, 0, 0, 0);
  a.wall_backed = a.annotate_wall = true;
  a.wall_y = bed.y() / 2 + s.u(0.0, 0.05);
  const int stands = s.count({0.0, 0.5, 0.5});
  const double first = s.side();
  for (int i = 0; i < stands; ++i) {
    const double side = i == 0 ? first : -first;
    const Vec3 size(s.u(0.4, 0.6), s.u(0.35, 0.5), s.u(0.45, 0.65));
    add(a, "nightstand", size, side * (bed.x() / 2 + s.u(0.05, 0.2) + size.x() / 2),
        a.wall_y - size.y() / 2 - s.u(0.0, 0.05), s.yaw_jitter());
  }
  if (bernoulli(s.rng, 0.6)) {
    const Vec3 size(s.u(0.9, 1.4), s.u(0.45, 0.6), s.u(0.7, 1.0));
    add(a, "dresser", size, s.side() * (bed.x() / 2 + 0.85 + size.x() / 2 + s.u(0.0, 0.3)),
        a.wall_y - size.y() / 2 - s.u(0.0, 0.05), s.yaw_jitter());
  }
  return a;
}

AreaLayout office_area(Sampler& s) {
  AreaLayout a;
  const Vec3 desk(s.u(1.0, 1.6), s.u(0.55, 0.8), s.u(0.72, 0.78));
  add(a, "desk", desk, 0, 0, 0);
  a.wall_backed = a.annotate_wall = true;
  a.wall_y = desk.y() / 2 + s.u(0.0, 0.05);
  if (bernoulli(s.rng, 0.9)) {
    const Vec3 size(s.u(0.45, 0.6), s.u(0.45, 0.6), s.u(0.8, 1.0));
    add(a, "chair", size, s.u(-0.25, 0.25), -(desk.y() / 2 + size.y() / 2) + s.u(0.0, 0.12),
        kPi + s.u(-20.0, 20.0) * kDeg);
  }
  const int shelves = s.count({0.3, 0.45, 0.25});
  const double first = s.side();
  for (int i = 0; i < shelves; ++i) {
    const double side = i == 0 ? first : -first;
    const Vec3 size(s.u(0.6, 1.0), s.u(0.28, 0.4), s.u(1.2, 2.0));
    add(a, "bookshelf", size, side * (desk.x() / 2 + s.u(0.3, 0.9) + size.x() / 2), a.wall_y - size.y() / 2,
        s.yaw_jitter() * 0.5);
  }
  return a;
}

AreaLayout lounging_area(Sampler& s) {
  AreaLayout a;
  const Vec3 sofa(s.u(1.6, 2.4), s.u(0.8, 1.0), s.u(0.75, 0.95));
  add(a, "sofa", sofa, 0, 0, 0);
  if (bernoulli(s.rng, 0.5)) {
    a.wall_backed = true;
    a.wall_y = sofa.y() / 2 + s.u(0.05, 0.3);
  }
  if (bernoulli(s.rng, 0.85)) {
    const Vec3 size(s.u(0.8, 1.2), s.u(0.5, 0.7), s.u(0.35, 0.5));
    add(a, "coffee_table", size, s.u(-0.15, 0.15), -(sofa.y() / 2 + s.u(0.35, 0.6) + size.y() / 2),
        s.yaw_jitter());
  }
  const int ends = s.count({0.3, 0.4, 0.3});
  const double first = s.side();
  for (int i = 0; i < ends; ++i) {
    const double side = i == 0 ? first : -first;
    const Vec3 size(s.u(0.4, 0.6), s.u(0.4, 0.6), s.u(0.5, 0.65));
    add(a, "end_table", size, side * (sofa.x() / 2 + s.u(0.05, 0.2) + size.x() / 2),
        sofa.y() / 2 - size.y() / 2 - s.u(0.0, 0.15), s.yaw_jitter());
  }
  return a;
}

AreaLayout table_chair_set(Sampler& s) {
  AreaLayout a;
  const Vec3 table(s.u(1.2, 1.8), s.u(0.8, 1.0), s.u(0.72, 0.78));
  add(a, "table", table, 0, 0, 0);
  std::array<int, 4> slots{0, 1, 2, 3};
  std::shuffle(slots.begin(), slots.end(), s.rng);
  const int chairs = 2 + static_cast<int>(uniform_index(s.rng, 3));
  for (int i = 0; i < chairs; ++i) {
    const int slot = slots[static_cast<std::size_t>(i)];
    const double sx = (slot & 1) ? 1.0 : -1.0;
    const double sy = (slot & 2) ? 1.0 : -1.0;
    const Vec3 size(s.u(0.42, 0.55), s.u(0.42, 0.55), s.u(0.8, 1.0));
    add(a, "chair", size, sx * table.x() / 4 + s.jitter(), sy * (table.y() / 2 + size.y() / 2 + s.u(-0.05, 0.15)),
        (sy > 0 ? 0.0 : kPi) + s.yaw_jitter() * 2);
  }
  return a;
}

AreaLayout sample_area(std::string_view type, Sampler& s) {
  if (type == "sleeping_area") return sleeping_area(s);
  if (type == "office_area") return office_area(s);
  if (type == "lounging_area") return lounging_area(s);
  if (type == "table_chair_set") return table_chair_set(s);
  throw std::invalid_argument("unknown scene type '" + std::string(type) + "'");
}

bool overlapping(const std::vector<Placed>& objs) {
  for (std::size_t i = 0; i < objs.size(); ++i)
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      const double inter = box_intersection_volume(objs[i].box, objs[j].box);
      if (inter > 0.25 * std::min(objs[i].box.volume(), objs[j].box.volume())) return true;
    }
  return false;
}

// Footprint-only containment with a margin, for keeping things apart on
// the floor.
bool footprint_hits(const OrientedBox3& box, double x, double y, double margin) {
  const Eigen::Vector2d local = yaw_rotation(-box.yaw).topLeftCorner<2, 2>() *
                                Eigen::Vector2d(x - box.center.x(), y - box.center.y());
  return std::abs(local.x()) <= box.size.x() / 2 + margin && std::abs(local.y()) <= box.size.y() / 2 + margin;
}

TriMesh clutter_mesh(std::mt19937_64& rng, double x, double y, double& radius) {
  const int kind = static_cast<int>(uniform_index(rng, 3));
  if (kind == 0) {
    const Vec3 half(uniform(rng, 0.1, 0.25), uniform(rng, 0.1, 0.25), uniform(rng, 0.1, 0.3));
    radius = std::hypot(half.x(), half.y());
    const double yaw = uniform(rng, 0.0, kTwoPi);
    TriMesh m = make_box_mesh(Vec3(-half.x(), -half.y(), 0), Vec3(half.x(), half.y(), 2 * half.z()));
    Rigid3 pose = Rigid3::Identity();
    pose.linear() = yaw_rotation(yaw);
    pose.translation() = Vec3(x, y, 0);
    return transform_mesh(m, pose);
  }
  if (kind == 1) {
    radius = uniform(rng, 0.08, 0.25);
    return make_cylinder_mesh(x, y, radius, 0.0, uniform(rng, 0.2, 0.8));
  }
  radius = uniform(rng, 0.1, 0.25);
  return make_sphere_mesh(Vec3(x, y, radius), radius, 8, 16);
}

}  // namespace

GeneratedScene generate_scene_with_geometry(const GeneratorConfig& cfg, std::string_view scene_type,
                                            std::uint64_t seed, SceneGeometry* geometry) {
  cfg.validate();
  if (template_index(scene_type) < 0) throw std::invalid_argument("unknown scene type '" + std::string(scene_type) + "'");
  std::mt19937_64 rng(seed);
  Sampler s{rng, cfg};
  const CameraIntrinsics& cam = cfg.camera;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    AreaLayout area = sample_area(scene_type, s);
    if (overlapping(area.objects)) continue;
    const OrientedBox3& major = area.objects.front().box;

    // Camera on a ring around the major object.
    const double spread = area.wall_backed ? cfg.wall_view_spread_deg : 180.0;
    const double phi = s.u(-spread, spread) * kDeg;
    const double dist = draw(rng, cfg.camera_distance);
    const Eigen::Vector2d cam_xy = Eigen::Vector2d(major.center.x(), major.center.y()) +
                                   dist * Eigen::Vector2d(std::sin(phi), -std::cos(phi));
    bool blocked = false;
    for (const auto& o : area.objects) blocked = blocked || footprint_hits(o.box, cam_xy.x(), cam_xy.y(), 0.3);
    if (blocked) continue;
    if (area.wall_backed && cam_xy.y() > area.wall_y - 0.5) continue;
    const Eigen::Vector2d to_target = Eigen::Vector2d(major.center.x(), major.center.y()) - cam_xy;
    const double heading = std::atan2(to_target.y(), to_target.x()) +
                           s.u(-cfg.camera_heading_jitter_deg, cfg.camera_heading_jitter_deg) * kDeg;
    const double cam_height = draw(rng, cfg.camera_height);
    // Aim at the major object, then perturb; stays inside the pitch range.
    const double aim = -std::atan2(cam_height - major.center.z(), dist) / kDeg;
    const double pitch =
        std::clamp(aim + s.u(-10.0, 10.0), cfg.camera_pitch_deg.lo, cfg.camera_pitch_deg.hi) * kDeg;

    // Room bounds enclose every object and the camera.
    double x0 = cam_xy.x(), x1 = cam_xy.x(), y0 = cam_xy.y(), y1 = cam_xy.y();
    for (const auto& o : area.objects)
      for (const auto& c : o.box.footprint()) {
        x0 = std::min(x0, c.x());
        x1 = std::max(x1, c.x());
        y0 = std::min(y0, c.y());
        y1 = std::max(y1, c.y());
      }
    x0 -= draw(rng, cfg.room_margin);
    x1 += draw(rng, cfg.room_margin);
    y0 -= draw(rng, cfg.room_margin);
    y1 = area.wall_backed ? area.wall_y : y1 + draw(rng, cfg.room_margin);
    const double height = draw(rng, cfg.room_height);

    // Room frame -> world frame (camera at the origin of the floor plane,
    // looking along +y).
    const double alpha = kPi / 2 - heading;
    Rigid3 world_from_room = Rigid3::Identity();
    world_from_room.linear() = yaw_rotation(alpha);
    world_from_room.translation() = -(yaw_rotation(alpha) * Vec3(cam_xy.x(), cam_xy.y(), 0.0));
    auto to_world = [&](const OrientedBox3& b) {
      return OrientedBox3(world_from_room * b.center, b.size, b.yaw + alpha);
    };

    SceneAnnotation ann;
    ann.scene_type = std::string(scene_type);
    ann.camera = cam;
    {
      const double cp = std::cos(pitch), sp = std::sin(pitch);
      Eigen::Matrix3d r;
      r.col(0) = Vec3(1, 0, 0);
      r.col(1) = Vec3(0, sp, -cp);
      r.col(2) = Vec3(0, cp, sp);
      ann.world_from_camera.linear() = r;
      ann.world_from_camera.translation() = Vec3(0, 0, cam_height);
    }

    SceneGeometry geo;
    for (const auto& o : area.objects) {
      ann.objects.push_back({o.category, to_world(o.box)});
      geo.object_meshes.push_back(
          transform_mesh(fit_mesh_to_box(procedural_mesh(o.category, rng), o.box), world_from_room));
    }

    // Room shell. Layout boxes are 0.1 m slabs on the outside of the room.
    const double t = kLayoutThickness;
    const double cx = (x0 + x1) / 2, cy = (y0 + y1) / 2, w = x1 - x0, d = y1 - y0;
    const OrientedBox3 floor_box(Vec3(cx, cy, -t / 2), Vec3(w, d, t), 0.0);
    const OrientedBox3 ceiling_box(Vec3(cx, cy, height + t / 2), Vec3(w, d, t), 0.0);
    const OrientedBox3 back_wall(Vec3(cx, y1 + t / 2, height / 2), Vec3(w, t, height), 0.0);
    auto slab_mesh = [&](const OrientedBox3& b) {
      return transform_mesh(make_box_mesh(b.center - b.size / 2, b.center + b.size / 2), world_from_room);
    };
    ann.objects.push_back({"floor", to_world(floor_box)});
    geo.object_meshes.push_back(slab_mesh(floor_box));
    ann.objects.push_back({"ceiling", to_world(ceiling_box)});
    geo.object_meshes.push_back(slab_mesh(ceiling_box));
    if (area.annotate_wall) {
      ann.objects.push_back({"wall", to_world(back_wall)});
      geo.object_meshes.push_back(slab_mesh(back_wall));
    } else {
      geo.other.append(slab_mesh(back_wall));
    }
    geo.other.append(slab_mesh(OrientedBox3(Vec3(cx, y0 - t / 2, height / 2), Vec3(w, t, height), 0.0)));
    geo.other.append(slab_mesh(OrientedBox3(Vec3(x0 - t / 2, cy, height / 2), Vec3(t, d, height), 0.0)));
    geo.other.append(slab_mesh(OrientedBox3(Vec3(x1 + t / 2, cy, height / 2), Vec3(t, d, height), 0.0)));

    // Unannotated clutter on free floor.
    const int clutter = cfg.clutter_count[0] +
                        static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.clutter_count[1] -
                                                                                       cfg.clutter_count[0] + 1)));
    for (int i = 0; i < clutter; ++i) {
      for (int tries = 0; tries < 10; ++tries) {
        const double x = s.u(x0 + 0.3, x1 - 0.3), y = s.u(y0 + 0.3, y1 - 0.3);
        bool clash = std::hypot(x - cam_xy.x(), y - cam_xy.y()) < 0.8;
        for (const auto& o : area.objects) clash = clash || footprint_hits(o.box, x, y, 0.35);
        if (clash) continue;
        double radius = 0;
        geo.other.append(transform_mesh(clutter_mesh(rng, x, y, radius), world_from_room));
        break;
      }
    }

    TriMesh all;
    for (const auto& m : geo.object_meshes) all.append(m);
    all.append(geo.other);
    const DepthImage depth = render_mesh_depth(transform_mesh(all, ann.world_from_camera.inverse()), cam);

    const OrientedBox3& major_world = ann.objects.front().box;
    int visible = 0;
    for (int v = 0; v < depth.height; ++v)
      for (int u = 0; u < depth.width; ++u) {
        const float z = depth.at(u, v);
        if (z > 0.0f && major_world.contains(ann.world_from_camera * backproject_pixel(cam, u, v, z), 0.02)) ++visible;
      }
    if (visible < cfg.min_major_pixels) continue;

    if (geometry) *geometry = std::move(geo);
    return {depth, std::move(ann)};
  }
  throw PlacementError("no valid " + std::string(scene_type) + " layout after " + std::to_string(cfg.max_attempts) +
                       " attempts");
}

GeneratedScene generate_scene_of_type(const GeneratorConfig& cfg, std::string_view scene_type, std::uint64_t seed) {
  return generate_scene_with_geometry(cfg, scene_type, seed, nullptr);
}

GeneratedScene generate_scene(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, 0x7e3d));
  double total = 0;
  for (double w : cfg.template_weights) total += w;
  double r = uniform01(rng) * total;
  std::size_t type = 0;
  for (; type + 1 < cfg.template_weights.size(); ++type) {
    if (r < cfg.template_weights[type]) break;
    r -= cfg.template_weights[type];
  }
  while (cfg.template_weights[type] <= 0.0) --type;
  return generate_scene_of_type(cfg, kTemplateNames[type], seed);
}

// ---------------------------------------------------------------------------
// Datasets

std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", index);
  return buf;
}

std::uint64_t scene_seed(std::uint64_t global_seed, std::size_t index) { return mix_seed(global_seed, index); }

std::vector<std::string> assign_splits(std::uint64_t seed, std::size_t n) {
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) order.emplace_back(mix_seed(scene_seed(seed, i), 0x5b1d), i);
  std::sort(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  std::vector<std::string> split(n);
  for (std::size_t r = 0; r < n; ++r)
    split[order[r].second] = r < n_train ? "train" : r < n_train + n_val ? "val" : "test";
  return split;
}

std::vector<const DatasetEntry*> DatasetManifest::split(std::string_view name) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : scenes)
    if (e.split == name) out.push_back(&e);
  return out;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& e : m.scenes)
    scenes.push_back({{"id", e.id}, {"split", e.split}, {"scene_type", e.scene_type}, {"seed", e.seed}});
  return {{"seed", m.seed}, {"scenes", scenes}, {"skipped", m.skipped}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : j.at("scenes"))
    m.scenes.push_back({s.at("id").get<std::string>(), s.at("split").get<std::string>(),
                        s.value("scene_type", std::string("other")), s.value("seed", std::uint64_t{0})});
  if (j.contains("skipped")) m.skipped = j.at("skipped").get<std::vector<std::string>>();
  return m;
}

DatasetManifest generate_dataset(const GeneratorConfig& cfg, std::size_t n_scenes, const std::filesystem::path& out_dir,
                                 int jobs) {
  cfg.validate();
  std::filesystem::create_directories(out_dir / "scenes");
  const auto splits = assign_splits(cfg.seed, n_scenes);
  std::vector<std::optional<DatasetEntry>> entries(n_scenes);
  std::vector<std::string> failures(n_scenes);
  parallel_for(n_scenes, jobs, [&](std::size_t i) {
    const std::string id = scene_id(i);
    const std::uint64_t seed = scene_seed(cfg.seed, i);
    try {
      const GeneratedScene scene = generate_scene(cfg, seed);
      io::write_depth_png(out_dir / "scenes" / (id + "_depth.png"), scene.depth);
      io::write_text(out_dir / "scenes" / (id + "_ann.json"), to_json(scene.annotation).dump(2) + "\n");
      entries[i] = DatasetEntry{id, splits[i], scene.annotation.scene_type, seed};
    } catch (const PlacementError& e) {
      failures[i] = id + ": " + e.what();
    }
  });
  DatasetManifest m;
  m.seed = cfg.seed;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    if (entries[i]) m.scenes.push_back(*entries[i]);
    if (!failures[i].empty()) m.skipped.push_back(failures[i]);
  }
  io::write_text(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

LoadedScene load_scene(const std::filesystem::path& dataset_dir, const std::string& id) {
  LoadedScene s;
  s.id = id;
  s.depth = io::read_depth_png(dataset_dir / "scenes" / (id + "_depth.png"));
  s.annotation = annotation_from_json(nlohmann::json::parse(io::read_text(dataset_dir / "scenes" / (id + "_ann.json"))));
  return s;
}

std::vector<LoadedScene> load_splits(const std::filesystem::path& dataset_dir, const std::vector<std::string>& splits,
                                     int jobs) {
  const DatasetManifest m = manifest_from_json(nlohmann::json::parse(io::read_text(dataset_dir / "manifest.json")));
  std::vector<std::string> ids;
  for (const auto& e : m.scenes)
    if (std::find(splits.begin(), splits.end(), e.split) != splits.end()) ids.push_back(e.id);
  std::vector<LoadedScene> out(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) { out[i] = load_scene(dataset_dir, ids[i]); });
  return out;
}

}  // namespace deepcontext
