#pragma once
// Inference: TSDF -> template classification -> rotation -> translation ->
// re-voxelization in the template frame -> context network.
//
// Frames: annotations and outputs live in the gravity-aligned frame of the
// depth camera (camera at (0, 0, height) looking along +y). The scene
// volume is centered on the cloud center c. The rotation network predicts
// yaw y of R(y) (p - c); the translation network predicts the offset t of
// the major object in that rotated frame; the template frame is then
// R(y) (p - c) - t.

#include <array>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "deepcontext/encoders.hpp"
#include "deepcontext/networks.hpp"
#include "deepcontext/templates.hpp"
#include "deepcontext/tsdf.hpp"

namespace deepcontext {

inline constexpr double kAcceptThreshold = 0.95;

// Grid used in the template frame: same shape as `scene_grid`, centered in
// x and y, starting 0.9 m below the major object's center.
GridConfig context_grid(const GridConfig& scene_grid);

// Midpoint of the 5th..95th percentile range of the points along each axis.
Vec3 cloud_center(const PointCloud& cloud);
// Extent of that percentile range.
Vec3 cloud_range(const PointCloud& cloud);

// Points of a depth image in the gravity-aligned frame.
PointCloud world_points(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera);

// TSDF of the depth image seen in the frame `to_frame`(world).
TsdfVolume frame_volume(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                        const Alignment& to_frame, const GridConfig& grid);

nn::Tensor<float> volume_tensor(const TsdfVolume& vol);
nn::Tensor<double> volume_tensor_double(const TsdfVolume& vol);

// Frozen networks and templates used for inference.
struct ModelSet {
  GridConfig grid = desk_grid();
  std::vector<SceneTemplate> templates;  // kTemplateNames order
  ClassifierNet<float> classifier;
  ClassifierNet<float> rotation;
  ClassifierNet<float> translation;
  std::map<std::string, ContextNet<float>> context;
};

// Reads <dir>/{classification,rotation,translation,context/<template>}.
ModelSet load_models(const std::filesystem::path& dir, const std::vector<SceneTemplate>& templates);

struct TemplateDecision {
  std::array<double, 4> probs{};
  int best = 0;
  bool accepted = false;
};

// Accepted iff the largest probability exceeds the threshold.
TemplateDecision decide_template(const std::array<double, 4>& probs, double threshold = kAcceptThreshold);
TemplateDecision classify_template(const TsdfVolume& volume, const ClassifierNet<float>& net,
                                   double threshold = kAcceptThreshold);
double estimate_rotation(const TsdfVolume& volume, const ClassifierNet<float>& net);
Vec3 estimate_translation(const TsdfVolume& rotated, const ClassifierNet<float>& net);

struct AnchorDetection {
  int anchor_id = 0;
  std::string category;
  double existence = 0.0;
  OrientedBox3 template_box;  // decoded, template frame
  OrientedBox3 box;           // gravity-aligned camera frame
  bool outside = false;       // ROI missed the feature grid; existence forced to 0
};

struct SceneParse {
  bool rejected = false;
  std::string template_name;
  std::array<double, 4> template_probs{};
  double yaw = 0.0;                  // rotation network output
  Vec3 center = Vec3::Zero();        // cloud center c
  Vec3 offset = Vec3::Zero();        // translation network output
  Alignment alignment;               // gravity-aligned -> template frame
  std::vector<AnchorDetection> anchors;
};

// Context network on an already aligned volume; boxes are mapped back with
// the inverse of `alignment`.
std::vector<AnchorDetection> parse_scene(const TsdfVolume& aligned, const SceneTemplate& tmpl,
                                         const ContextNet<float>& net, const Alignment& alignment);

// Decodes raw per-anchor network outputs. Exposed for tests.
std::vector<AnchorDetection> decode_anchors(const SceneTemplate& tmpl,
                                            const std::vector<std::array<float, kAnchorOutputs>>& outputs,
                                            const std::vector<bool>& outside, const Alignment& alignment);

// Full pipeline. Alignment fields are filled even for rejected scenes.
SceneParse parse_depth_image(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                             const ModelSet& models);

nlohmann::json to_json(const SceneParse& parse);
SceneParse scene_parse_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GridConfig& grid);
GridConfig grid_from_json(const nlohmann::json& j);
nlohmann::json box_to_json(const OrientedBox3& box);
OrientedBox3 box_from_json(const nlohmann::json& j);

}  // namespace deepcontext
