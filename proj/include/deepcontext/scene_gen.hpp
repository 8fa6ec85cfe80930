#pragma once
// Procedural annotated scenes for the four functional-area types, rendered
// to depth through the geometry module.

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepcontext/geometry.hpp"
#include "deepcontext/templates.hpp"

namespace deepcontext {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct GeneratorConfig {
  // Relative frequency of each template, in kTemplateNames order.
  std::array<double, 4> template_weights{1.0, 1.0, 1.0, 1.0};
  Range room_height{2.4, 2.7};
  Range room_margin{0.4, 1.2};      // free floor between content/camera and the side walls
  Range camera_height{1.0, 1.8};
  Range camera_pitch_deg{-30.0, 0.0};
  Range camera_distance{2.3, 3.6};  // camera to major object, horizontal
  double camera_heading_jitter_deg = 15.0;
  // Viewing direction spread around the front of wall-backed areas;
  // free-standing areas are seen from any side.
  double wall_view_spread_deg = 70.0;
  std::array<int, 2> clutter_count{0, 3};
  double position_jitter = 0.08;  // meters, side-object placement noise
  double yaw_jitter_deg = 5.0;
  int min_major_pixels = 200;     // camera poses showing less of the major object are redrawn
  int max_attempts = 50;
  CameraIntrinsics camera = CameraIntrinsics::desk_default();
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
// Missing keys keep their defaults.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeneratedScene {
  DepthImage depth;
  SceneAnnotation annotation;
};

// Throws PlacementError when no valid layout/camera is found within
// cfg.max_attempts.
GeneratedScene generate_scene(const GeneratorConfig& cfg, std::uint64_t seed);
// Same, forcing the template type.
GeneratedScene generate_scene_of_type(const GeneratorConfig& cfg, std::string_view scene_type, std::uint64_t seed);

// Meshes of every placed object and room element in the world frame, in
// annotation order followed by unannotated geometry. Exposed for tests.
struct SceneGeometry {
  std::vector<TriMesh> object_meshes;  // parallel to annotation.objects
  TriMesh other;                       // unannotated walls and clutter
};
GeneratedScene generate_scene_with_geometry(const GeneratorConfig& cfg, std::string_view scene_type,
                                            std::uint64_t seed, SceneGeometry* geometry);

std::string scene_id(std::size_t index);
std::uint64_t scene_seed(std::uint64_t global_seed, std::size_t index);

struct DatasetEntry {
  std::string id;
  std::string split;  // train / val / test
  std::string scene_type;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<DatasetEntry> scenes;
  std::vector<std::string> skipped;
  std::vector<const DatasetEntry*> split(std::string_view name) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// Split by rank of hash(seed, index): the first 70% train, next 10% val,
// the rest test.
std::vector<std::string> assign_splits(std::uint64_t seed, std::size_t n);

// Writes scenes/<id>_depth.png, scenes/<id>_ann.json and manifest.json.
DatasetManifest generate_dataset(const GeneratorConfig& cfg, std::size_t n_scenes, const std::filesystem::path& out_dir,
                                 int jobs = 1);

struct LoadedScene {
  std::string id;
  DepthImage depth;
  SceneAnnotation annotation;
};

LoadedScene load_scene(const std::filesystem::path& dataset_dir, const std::string& id);
// Scenes of the listed splits, in manifest order.
std::vector<LoadedScene> load_splits(const std::filesystem::path& dataset_dir, const std::vector<std::string>& splits,
                                     int jobs = 1);

}  // namespace deepcontext
