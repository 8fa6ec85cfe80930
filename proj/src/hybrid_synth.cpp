#include "deepcontext/hybrid_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "deepcontext/io.hpp"
#include "deepcontext/kernels.hpp"
#include "deepcontext/util.hpp"

namespace deepcontext {

void ModelRepository::add(ModelEntry entry) {
  if (find(entry.id)) throw std::invalid_argument("duplicate model id '" + entry.id + "'");
  entry.mesh.validate();
  if (entry.mesh.empty()) throw std::invalid_argument("model '" + entry.id + "' has no triangles");
  entries.push_back(std::move(entry));
}

void ModelRepository::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) throw std::invalid_argument("duplicate model id '" + e.id + "'");
    e.mesh.validate();
  }
}

std::vector<const ModelEntry*> ModelRepository::of_category(std::string_view category) const {
  std::vector<const ModelEntry*> out;
  for (const auto& e : entries)
    if (e.category == category) out.push_back(&e);
  return out;
}

const ModelEntry* ModelRepository::find(std::string_view id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Procedural library

const std::vector<std::string>& furniture_categories() {
  static const std::vector<std::string> cats{"bed",  "nightstand",   "dresser",   "desk",  "chair",
                                             "bookshelf", "sofa", "coffee_table", "end_table", "table"};
  return cats;
}

namespace {

struct Builder {
  TriMesh mesh;
  void box(double x0, double y0, double z0, double x1, double y1, double z1) {
    mesh.append(make_box_mesh(Vec3(x0, y0, z0), Vec3(x1, y1, z1)));
  }
  void cylinder(double cx, double cy, double r, double z0, double z1) {
    mesh.append(make_cylinder_mesh(cx, cy, r, z0, z1, 12));
  }
  // Four legs of square section s inset to the footprint corners.
  void legs(double s, double z1) {
    for (double sx : {-1.0, 1.0})
      for (double sy : {-1.0, 1.0}) {
        const double x = sx * (0.5 - s / 2), y = sy * (0.5 - s / 2);
        box(x - s / 2, y - s / 2, 0.0, x + s / 2, y + s / 2, z1);
      }
  }
};

using Rng = std::mt19937_64;

TriMesh bed(Rng& rng) {
  Builder b;
  const double mattress = uniform(rng, 0.4, 0.6);
  const double head = uniform(rng, 0.06, 0.12);
  b.box(-0.5, -0.5, 0.0, 0.5, 0.5 - head, mattress);
  b.box(-0.5, 0.5 - head, 0.0, 0.5, 0.5, 1.0);
  if (bernoulli(rng, 0.5)) b.box(-0.5, -0.5, 0.0, 0.5, -0.5 + head, uniform(rng, mattress, 0.8));
  return b.mesh;
}

TriMesh cabinet(Rng& rng, bool allow_legs) {
  Builder b;
  if (allow_legs && bernoulli(rng, 0.5)) {
    const double leg = uniform(rng, 0.1, 0.25);
    b.legs(uniform(rng, 0.06, 0.12), leg);
    b.box(-0.5, -0.5, leg, 0.5, 0.5, 1.0);
  } else {
    const double plinth = uniform(rng, 0.03, 0.08);
    b.box(-0.45, -0.45, 0.0, 0.45, 0.45, plinth);
    b.box(-0.5, -0.5, plinth, 0.5, 0.5, 1.0);
  }
  return b.mesh;
}

TriMesh desk(Rng& rng) {
  Builder b;
  const double top = uniform(rng, 0.04, 0.08);
  b.box(-0.5, -0.5, 1.0 - top, 0.5, 0.5, 1.0);
  const int style = static_cast<int>(uniform_index(rng, 3));
  if (style == 0) {
    b.legs(uniform(rng, 0.04, 0.08), 1.0 - top);
  } else if (style == 1) {
    const double t = uniform(rng, 0.03, 0.06);
    b.box(-0.5, -0.5, 0.0, -0.5 + t, 0.5, 1.0 - top);
    b.box(0.5 - t, -0.5, 0.0, 0.5, 0.5, 1.0 - top);
  } else {
    // Pedestal with drawers on one side plus two legs on the other.
    const double w = uniform(rng, 0.25, 0.4);
    b.box(0.5 - w, -0.5, 0.0, 0.5, 0.5, 1.0 - top);
    b.box(-0.5, -0.5, 0.0, -0.44, -0.44, 1.0 - top);
    b.box(-0.5, 0.44, 0.0, -0.44, 0.5, 1.0 - top);
  }
  return b.mesh;
}

TriMesh chair(Rng& rng) {
  Builder b;
  const double seat = uniform(rng, 0.42, 0.55);
  const double s = uniform(rng, 0.06, 0.1);
  const double back = uniform(rng, 0.08, 0.14);
  b.legs(s, seat - 0.06);
  b.box(-0.5, -0.5, seat - 0.06, 0.5, 0.5, seat);
  b.box(-0.5, 0.5 - back, seat, 0.5, 0.5, 1.0);
  return b.mesh;
}

TriMesh bookshelf(Rng& rng) {
  Builder b;
  const double t = uniform(rng, 0.04, 0.07);
  b.box(-0.5, 0.5 - t, 0.0, 0.5, 0.5, 1.0);   // back
  b.box(-0.5, -0.5, 0.0, -0.5 + t, 0.5, 1.0);  // sides
  b.box(0.5 - t, -0.5, 0.0, 0.5, 0.5, 1.0);
  const int shelves = 3 + static_cast<int>(uniform_index(rng, 3));
  for (int i = 0; i <= shelves; ++i) {
    const double z = std::min(1.0 - t, static_cast<double>(i) / shelves * (1.0 - t));
    b.box(-0.5 + t, -0.5, z, 0.5 - t, 0.5 - t, z + t);
  }
  return b.mesh;
}

TriMesh sofa(Rng& rng) {
  Builder b;
  const double seat = uniform(rng, 0.4, 0.5);
  const double back = uniform(rng, 0.15, 0.3);
  const double arm = uniform(rng, 0.06, 0.14);
  const double arm_h = uniform(rng, 0.55, 0.75);
  b.box(-0.5 + arm, -0.5, 0.0, 0.5 - arm, 0.5 - back, seat);
  b.box(-0.5, 0.5 - back, 0.0, 0.5, 0.5, 1.0);
  b.box(-0.5, -0.5, 0.0, -0.5 + arm, 0.5 - back, arm_h);
  b.box(0.5 - arm, -0.5, 0.0, 0.5, 0.5 - back, arm_h);
  return b.mesh;
}

TriMesh small_table(Rng& rng) {
  Builder b;
  const double top = uniform(rng, 0.06, 0.15);
  if (bernoulli(rng, 0.3)) {
    // Round top on a pedestal; the top spans the full footprint.
    b.cylinder(0.0, 0.0, 0.5, 1.0 - top, 1.0);
    b.cylinder(0.0, 0.0, uniform(rng, 0.08, 0.15), 0.0, 1.0 - top);
    b.cylinder(0.0, 0.0, 0.3, 0.0, 0.04);
  } else {
    b.box(-0.5, -0.5, 1.0 - top, 0.5, 0.5, 1.0);
    b.legs(uniform(rng, 0.05, 0.12), 1.0 - top);
    if (bernoulli(rng, 0.4)) b.box(-0.45, -0.45, 0.15, 0.45, 0.45, 0.15 + top / 2);
  }
  return b.mesh;
}

TriMesh dining_table(Rng& rng) {
  Builder b;
  const double top = uniform(rng, 0.04, 0.08);
  b.box(-0.5, -0.5, 1.0 - top, 0.5, 0.5, 1.0);
  if (bernoulli(rng, 0.25)) {
    b.box(-0.08, -0.35, 0.0, 0.08, 0.35, 1.0 - top);
    b.box(-0.3, -0.45, 0.0, 0.3, 0.45, 0.05);
  } else {
    b.legs(uniform(rng, 0.04, 0.09), 1.0 - top);
  }
  return b.mesh;
}

}  // namespace

TriMesh procedural_mesh(std::string_view category, std::mt19937_64& rng) {
  if (category == "bed") return bed(rng);
  if (category == "nightstand") return cabinet(rng, true);
  if (category == "dresser") return cabinet(rng, false);
  if (category == "desk") return desk(rng);
  if (category == "chair") return chair(rng);
  if (category == "bookshelf") return bookshelf(rng);
  if (category == "sofa") return sofa(rng);
  if (category == "coffee_table" || category == "end_table") return small_table(rng);
  if (category == "table") return dining_table(rng);
  throw std::invalid_argument("no procedural model for category '" + std::string(category) + "'");
}

ModelRepository procedural_repository(int variants, std::uint64_t seed) {
  if (variants < 1) throw std::invalid_argument("procedural_repository needs at least one variant");
  ModelRepository repo;
  for (const auto& cat : furniture_categories()) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(cat)));
    for (int i = 0; i < variants; ++i) repo.add({cat, procedural_mesh(cat, rng), cat + "/p" + std::to_string(i)});
  }
  return repo;
}

ModelRepository load_obj_repository(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw io::IoError("model repository '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& cat_dir : fs::directory_iterator(dir)) {
    if (!cat_dir.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(cat_dir.path()))
      if (f.is_regular_file() && f.path().extension() == ".obj") files.push_back(f.path());
  }
  // Directory iteration order is unspecified.
  std::sort(files.begin(), files.end());
  ModelRepository repo;
  for (const auto& f : files) {
    const std::string cat = f.parent_path().filename().string();
    repo.add({cat, io::read_obj(f), cat + "/" + f.stem().string()});
  }
  return repo;
}

void SynthesisConfig::validate() const {
  if (shortlist_size < 1) throw std::invalid_argument("shortlist_size must be >= 1");
  if (multiplier < 1) throw std::invalid_argument("multiplier must be >= 1");
  if (!(inflate >= 0.0)) throw std::invalid_argument("inflate must be >= 0");
}

// ---------------------------------------------------------------------------
// Retrieval

PointCloud partial_view(const TriMesh& mesh, const OrientedBox3& box, const CameraIntrinsics& cam,
                        const Rigid3& world_from_camera) {
  PointCloud out;
  out.frame = world_from_camera.matrix().isIdentity(0.0) ? Frame::camera : Frame::gravity_aligned;
  if (mesh.empty()) return out;
  const TriMesh world = fit_mesh_to_box(mesh, box);
  const TriMesh camera = transform_mesh(world, world_from_camera.inverse());
  const DepthImage depth = render_mesh_depth(camera, cam);
  PointCloud pts = backproject_depth(depth, cam);
  out.points.reserve(pts.size());
  for (const auto& p : pts.points) out.points.push_back(world_from_camera * p);
  return out;
}

namespace {

struct Soa {
  std::vector<double> x, y, z;
  explicit Soa(const PointCloud& c) {
    x.reserve(c.size());
    y.reserve(c.size());
    z.reserve(c.size());
    for (const auto& p : c.points) {
      x.push_back(p.x());
      y.push_back(p.y());
      z.push_back(p.z());
    }
  }
};

double mean_min_distance(const PointCloud& from, const Soa& to) {
  double sum = 0.0;
  for (const auto& p : from.points)
    sum += std::sqrt(kernels::min_sqdist(to.x.data(), to.y.data(), to.z.data(), to.x.size(), p.x(), p.y(), p.z()));
  return sum / static_cast<double>(from.size());
}

}  // namespace

double shape_distance(const PointCloud& p, const PointCloud& v) {
  if (p.empty() || v.empty()) throw std::invalid_argument("shape_distance of an empty cloud");
  return mean_min_distance(p, Soa(v)) + mean_min_distance(v, Soa(p));
}

PointCloud subsample(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(max_points);
  for (std::size_t i = 0; i < max_points; ++i) out.points.push_back(cloud.points[i * cloud.size() / max_points]);
  return out;
}

std::vector<std::string> retrieve_models(const PointCloud& object_cloud, const OrientedBox3& box,
                                         const CameraIntrinsics& cam, const ModelRepository& repo,
                                         std::string_view category, std::size_t n,
                                         const Rigid3& world_from_camera, std::size_t max_points) {
  std::vector<std::pair<double, std::string>> ranked;
  if (object_cloud.empty()) return {};
  for (const ModelEntry* m : repo.of_category(category)) {
    const PointCloud view = subsample(partial_view(m->mesh, box, cam, world_from_camera), max_points);
    const double d = view.empty() ? std::numeric_limits<double>::infinity() : shape_distance(object_cloud, view);
    ranked.emplace_back(d, m->id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) ids.push_back(ranked[i].second);
  return ids;
}

PointCloud object_points(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                         const OrientedBox3& box, double inflate) {
  PointCloud out;
  out.frame = Frame::gravity_aligned;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const float z = depth.at(u, v);
      if (!(z > 0.0f)) continue;
      const Vec3 p = world_from_camera * backproject_pixel(cam, u, v, z);
      if (box.contains(p, inflate)) out.points.push_back(p);
    }
  return out;
}

Shortlists build_shortlists(const DepthImage& depth, const SceneAnnotation& annotation, const ModelRepository& repo,
                            const SynthesisConfig& cfg) {
  cfg.validate();
  Shortlists out;
  out.per_object.resize(annotation.objects.size());
  for (std::size_t i = 0; i < annotation.objects.size(); ++i) {
    const auto& obj = annotation.objects[i];
    if (is_layout_category(obj.category)) continue;
    const PointCloud cloud = subsample(
        object_points(depth, annotation.camera, annotation.world_from_camera, obj.box, cfg.inflate),
        cfg.max_cloud_points);
    auto ids = retrieve_models(cloud, obj.box, annotation.camera, repo, obj.category,
                               static_cast<std::size_t>(cfg.shortlist_size), annotation.world_from_camera,
                               cfg.max_cloud_points);
    if (ids.empty())
      out.warnings.push_back("object " + std::to_string(i) + " (" + obj.category +
                             "): no visible points or no models of this category; left unreplaced");
    out.per_object[i] = std::move(ids);
  }
  return out;
}

DepthImage synthesize_with_shortlists(const DepthImage& depth, const SceneAnnotation& annotation,
                                      const ModelRepository& repo, const Shortlists& shortlists,
                                      const SynthesisConfig& cfg, std::uint64_t rng_seed) {
  if (shortlists.per_object.size() != annotation.objects.size())
    throw std::invalid_argument("shortlists do not match the annotation");
  const CameraIntrinsics& cam = annotation.camera;
  if (!depth.matches(cam)) throw std::invalid_argument("depth image does not match the annotation camera");
  std::mt19937_64 rng(mix_seed(cfg.seed, rng_seed));

  struct Replacement {
    std::size_t object;
    const ModelEntry* model;
  };
  std::vector<Replacement> chosen;
  for (std::size_t i = 0; i < annotation.objects.size(); ++i) {
    const auto& list = shortlists.per_object[i];
    if (list.empty()) continue;
    const ModelEntry* m = repo.find(list[uniform_index(rng, list.size())]);
    if (!m) throw std::invalid_argument("shortlisted model missing from repository");
    chosen.push_back({i, m});
  }
  if (chosen.empty()) return depth;

  DepthImage out = depth;
  for (int v = 0; v < out.height; ++v)
    for (int u = 0; u < out.width; ++u) {
      float& z = out.at(u, v);
      if (!(z > 0.0f)) continue;
      const Vec3 p = annotation.world_from_camera * backproject_pixel(cam, u, v, z);
      for (const auto& r : chosen)
        if (annotation.objects[r.object].box.contains(p, cfg.inflate)) {
          z = 0.0f;
          break;
        }
    }
  DepthImage models(cam.width, cam.height);
  const Rigid3 camera_from_world = annotation.world_from_camera.inverse();
  for (const auto& r : chosen)
    rasterize_mesh(transform_mesh(fit_mesh_to_box(r.model->mesh, annotation.objects[r.object].box), camera_from_world),
                   cam, models);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const float m = models.values[i];
    if (m > 0.0f && (!(out.values[i] > 0.0f) || m < out.values[i])) out.values[i] = m;
  }
  return out;
}

DepthImage synthesize_scene(const DepthImage& depth, const SceneAnnotation& annotation, const ModelRepository& repo,
                            const SynthesisConfig& cfg, std::uint64_t rng_seed, std::vector<std::string>* warnings) {
  const Shortlists lists = build_shortlists(depth, annotation, repo, cfg);
  if (warnings) warnings->insert(warnings->end(), lists.warnings.begin(), lists.warnings.end());
  return synthesize_with_shortlists(depth, annotation, repo, lists, cfg, rng_seed);
}

}  // namespace deepcontext
