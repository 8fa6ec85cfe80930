#pragma once
// Metrics: detection AP with PR curves, room layout error, total scene
// understanding precision/recall, alignment accuracy and an exhaustive
// point-cloud alignment baseline.

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepcontext/geometry.hpp"
#include "deepcontext/pipeline.hpp"
#include "deepcontext/templates.hpp"

namespace deepcontext {

inline constexpr double kDefaultIou = 0.25;

struct EvalError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Detection {
  std::string category;
  OrientedBox3 box;
  double score = 0.0;
};

// Keyed by scene id.
using SceneDetections = std::map<std::string, std::vector<Detection>>;
using SceneObjects = std::map<std::string, std::vector<AnnotatedObject>>;

struct PrCurve {
  std::vector<double> recall;
  std::vector<double> precision;
};

struct CategoryAp {
  double ap = 0.0;
  int num_gt = 0;
  int num_detections = 0;
  PrCurve curve;
};

// Area under the all-points interpolated precision envelope of a ranked
// list of true/false positives.
double average_precision(const std::vector<bool>& ranked_tp, int num_gt, PrCurve* curve = nullptr);

// Per-category AP. Layout elements are skipped. Detection ids missing from
// `gts` are rejected.
std::map<std::string, CategoryAp> evaluate_detection(const SceneDetections& dets, const SceneObjects& gts,
                                                     double iou_threshold = kDefaultIou);
// Mean over categories that have ground truth.
double mean_ap(const std::map<std::string, CategoryAp>& per_category);

struct LayoutStats {
  int count = 0;
  double mean = 0.0;
  double median = 0.0;
};

// Distance between predicted and ground-truth element along the ground
// truth normal (z for floor and ceiling, the thin axis for walls).
double layout_error(const OrientedBox3& predicted, const OrientedBox3& gt, std::string_view element);
LayoutStats summarize_errors(std::vector<double> errors);

// Per element over scenes; elements absent from the ground truth or the
// prediction are skipped. The highest scoring prediction is used.
std::map<std::string, LayoutStats> evaluate_layout(const SceneDetections& predicted, const SceneObjects& gts);

struct SceneUnderstanding {
  double pg = 0.0;  // matched detections / detections
  double rg = 0.0;  // matched ground truth / ground truth
  double rr = 0.0;  // matched with the right category / ground truth
};

// Category-agnostic greedy matching at `iou_threshold`; layout skipped.
SceneUnderstanding evaluate_scene_understanding(const SceneDetections& dets, const SceneObjects& gts,
                                                double iou_threshold = kDefaultIou);

struct AlignmentSample {
  double predicted_yaw = 0.0;
  double gt_yaw = 0.0;
  Vec3 predicted_center = Vec3::Zero();  // major object center
  Vec3 gt_center = Vec3::Zero();
  bool symmetric = true;
};

struct AlignmentStats {
  int count = 0;
  double rotation_accuracy = 0.0;      // within 10 degrees
  double rotation_accuracy_sym = 0.0;  // also accepting 180 degree flips where symmetric
  double translation_error = 0.0;      // mean, meters
};

AlignmentStats evaluate_alignment(std::span<const AlignmentSample> samples);

struct IcpReference {
  PointCloud cloud;     // gravity-aligned frame
  Alignment alignment;  // gravity-aligned -> template
};

struct IcpOptions {
  std::size_t max_points = 64;
};

// Exhaustive search over every reference, rotation bin and translation
// cell for the smallest shape distance. Returns the query's alignment to
// the template.
Alignment icp_baseline_align(const PointCloud& query, std::span<const IcpReference> references,
                             const IcpOptions& options = {});

struct EvalReport {
  int num_scenes = 0;
  double template_accuracy = 0.0;
  double rejection_rate = 0.0;
  std::map<std::string, CategoryAp> detection;
  double map = 0.0;
  std::map<std::string, LayoutStats> layout;          // context network output
  std::map<std::string, LayoutStats> layout_initial;  // anchors under the predicted alignment
  SceneUnderstanding understanding;
  std::map<std::string, AlignmentStats> alignment;  // per template plus "all"
  std::map<std::string, AlignmentStats> icp;        // empty unless the baseline ran

  void validate() const;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string format_report(const EvalReport& r);
// recall,precision rows, one block per category.
std::string pr_curves_csv(const EvalReport& r);

struct EvalScene {
  std::string id;
  DepthImage depth;
  SceneAnnotation annotation;
};

struct EvalOptions {
  double iou_threshold = kDefaultIou;
  double existence_threshold = 0.5;  // detections kept for Pg/Rg/Rr
  bool icp_baseline = false;
  int icp_references_per_template = 4;
  IcpOptions icp;
  int jobs = 1;
};

// Detections of a parse: every non-outside anchor scored by existence.
std::vector<Detection> parse_detections(const SceneParse& parse, bool with_layout = false);

// Report for precomputed parses. `reference` is only used by the baseline.
EvalReport evaluate_parses(const std::map<std::string, SceneParse>& parses, std::span<const EvalScene> scenes,
                           const std::vector<SceneTemplate>& templates, const EvalOptions& options = {},
                           std::span<const EvalScene> reference = {});

std::map<std::string, SceneParse> run_inference(const ModelSet& models, std::span<const EvalScene> scenes,
                                                int jobs = 1);

}  // namespace deepcontext
