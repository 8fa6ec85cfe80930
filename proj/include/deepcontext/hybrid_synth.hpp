#pragma once
// Hybrid depth synthesis: annotated objects in a real depth image are cut
// out and replaced by shape-matched library models rendered in place.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "deepcontext/geometry.hpp"
#include "deepcontext/templates.hpp"

namespace deepcontext {

struct ModelEntry {
  std::string category;
  TriMesh mesh;
  std::string id;
};

struct ModelRepository {
  std::vector<ModelEntry> entries;

  // Throws on duplicate ids or invalid meshes.
  void add(ModelEntry entry);
  void validate() const;
  std::vector<const ModelEntry*> of_category(std::string_view category) const;
  const ModelEntry* find(std::string_view id) const;
};

// Furniture categories the procedural library knows how to build.
const std::vector<std::string>& furniture_categories();

// A random primitive-composed model of the category inside
// [-0.5,0.5] x [-0.5,0.5] x [0,1]; the front faces -y. Throws for unknown
// categories.
TriMesh procedural_mesh(std::string_view category, std::mt19937_64& rng);

// `variants` procedural models per furniture category, ids "<cat>/p<i>".
ModelRepository procedural_repository(int variants = 4, std::uint64_t seed = 0);

// Reads <dir>/<category>/<id>.obj files.
ModelRepository load_obj_repository(const std::filesystem::path& dir);

struct SynthesisConfig {
  int shortlist_size = 3;
  int multiplier = 20;
  std::uint64_t seed = 0;
  double inflate = 0.05;             // box growth when clearing pixels
  std::size_t max_cloud_points = 256;  // retrieval clouds are subsampled to this

  void validate() const;
};

// Fits the mesh to `box` (given in the world frame), renders it from the
// camera and back-projects. Points are returned in the world frame; with the
// default identity pose world and camera frames coincide.
PointCloud partial_view(const TriMesh& mesh, const OrientedBox3& box, const CameraIntrinsics& cam,
                        const Rigid3& world_from_camera = Rigid3::Identity());

// Symmetric mean nearest-neighbor Euclidean distance. Throws on empty input.
double shape_distance(const PointCloud& p, const PointCloud& v);

// Evenly strided subsample keeping at most `max_points` points.
PointCloud subsample(const PointCloud& cloud, std::size_t max_points);

// Models of `category` ranked by shape_distance to their partial views;
// ties broken by id. Rendered views are subsampled to `max_points` when
// nonzero.
std::vector<std::string> retrieve_models(const PointCloud& object_cloud, const OrientedBox3& box,
                                         const CameraIntrinsics& cam, const ModelRepository& repo,
                                         std::string_view category, std::size_t n,
                                         const Rigid3& world_from_camera = Rigid3::Identity(),
                                         std::size_t max_points = 0);

// World-frame points of the depth image lying inside `box` grown by
// `inflate`.
PointCloud object_points(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                         const OrientedBox3& box, double inflate);

struct Shortlists {
  std::vector<std::vector<std::string>> per_object;  // empty for layout / unmatched objects
  std::vector<std::string> warnings;
};

// Retrieval runs once per real scene; every hybrid copy draws from it.
Shortlists build_shortlists(const DepthImage& depth, const SceneAnnotation& annotation, const ModelRepository& repo,
                            const SynthesisConfig& cfg);

DepthImage synthesize_with_shortlists(const DepthImage& depth, const SceneAnnotation& annotation,
                                      const ModelRepository& repo, const Shortlists& shortlists,
                                      const SynthesisConfig& cfg, std::uint64_t rng_seed);

// build_shortlists + synthesize_with_shortlists. Objects whose shortlist is
// empty stay as they are and produce a warning.
DepthImage synthesize_scene(const DepthImage& depth, const SceneAnnotation& annotation, const ModelRepository& repo,
                            const SynthesisConfig& cfg, std::uint64_t rng_seed,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace deepcontext
