#pragma once
// Scene templates: canonical functional-area layouts made of per-category
// anchor boxes, learned by clustering annotated scenes aligned to their
// major object, plus conversion of annotations into template-indexed
// ground truth.

#include <array>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepcontext/geometry.hpp"

namespace deepcontext {

inline constexpr std::array<std::string_view, 4> kTemplateNames{
    "sleeping_area", "office_area", "lounging_area", "table_chair_set"};
inline constexpr std::array<std::string_view, 3> kLayoutCategories{"floor", "wall", "ceiling"};
inline constexpr double kLayoutThickness = 0.1;

// Index into kTemplateNames, or -1.
int template_index(std::string_view name);
bool is_layout_category(std::string_view category);

struct ObjectAnchor {
  int id = 0;
  std::string category;
  OrientedBox3 box;  // template frame, yaw 0
};

struct SceneTemplate {
  std::string name;
  std::string major_category;
  std::vector<ObjectAnchor> anchors;

  std::size_t count(std::string_view category) const;
};

struct AnnotatedObject {
  std::string category;
  OrientedBox3 box;  // gravity-aligned frame
};

struct SceneAnnotation {
  std::string scene_type = "other";
  std::vector<AnnotatedObject> objects;
  CameraIntrinsics camera;
  Rigid3 world_from_camera = Rigid3::Identity();
};

// p' = R(yaw) * p + translation, rotation about gravity.
struct Alignment {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const;
  OrientedBox3 apply(const OrientedBox3& box) const;
  Alignment inverse() const;
  // this after `first`.
  Alignment compose(const Alignment& first) const;
  Rigid3 rigid() const;
};

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Equivalent box (same occupied volume) whose yaw lies within 45 degrees
// of zero; x/y extents are swapped for quarter turns.
OrientedBox3 canonicalize_box(const OrientedBox3& box);

// Transform placing the largest major object at the origin with yaw 0.
Alignment align_to_major(const SceneAnnotation& annotation, std::string_view major_category);

// Lloyd's algorithm with seeded k-means++ seeding; stops when assignments
// stabilize or after 100 iterations. With fewer distinct points than k the
// distinct points are returned, padded by repetition. Centroids are sorted
// lexicographically.
std::vector<Eigen::VectorXd> kmeans(std::span<const Eigen::VectorXd> points, int k, std::uint64_t seed);

struct TemplateLearningOptions {
  // Clusters per category; categories not listed use `default_k`.
  std::map<std::string, int> k_per_category;
  int default_k = 1;
  std::uint64_t seed = 0;
};

// Default k: 1 for the major category and layout elements, 2 for side
// objects, 4 chairs around a table.
TemplateLearningOptions default_learning_options(std::string_view template_name);
std::string default_major_category(std::string_view template_name);

SceneTemplate learn_template(std::span<const SceneAnnotation> scenes, std::string_view name,
                             std::string_view major_category, const TemplateLearningOptions& options);

// All four templates, each learned from the annotations of its scene type
// with the default options.
std::vector<SceneTemplate> learn_templates(std::span<const SceneAnnotation> scenes, std::uint64_t seed);

struct AnchorTarget {
  bool exists = false;
  OrientedBox3 target;  // template frame, meaningful only when exists
  int object_index = -1;
};

struct TemplateGroundTruth {
  std::string template_name;
  Alignment alignment;
  std::vector<AnchorTarget> anchors;
  double total_cost = 0.0;
  std::vector<std::string> warnings;
};

// Matching cost between two template-frame boxes: |dcenter| + |dsize|.
double anchor_match_cost(const OrientedBox3& object, const OrientedBox3& anchor);

// Aligns via the major object, then runs per-category minimum-cost
// assignment between annotated boxes and anchors.
TemplateGroundTruth match_annotation_to_template(const SceneAnnotation& annotation, const SceneTemplate& tmpl);
// Same, with a caller-provided alignment (gravity-aligned -> template).
TemplateGroundTruth match_with_alignment(const SceneAnnotation& annotation, const SceneTemplate& tmpl,
                                         const Alignment& alignment);

nlohmann::json to_json(const SceneTemplate& tmpl);
SceneTemplate template_from_json(const nlohmann::json& j);
// Reads either a single template document or {"templates": [...]}.
std::vector<SceneTemplate> templates_from_json(const nlohmann::json& j);
nlohmann::json templates_to_json(std::span<const SceneTemplate> templates);

nlohmann::json to_json(const SceneAnnotation& ann);
SceneAnnotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraIntrinsics& cam);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

}  // namespace deepcontext
