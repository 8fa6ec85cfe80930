#pragma once
// Staged training: template classifier, then rotation and translation
// networks from its trunk, then one context network per template. Each
// stage pretrains on on-the-fly hybrid scenes and finetunes on the base
// scenes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepcontext/hybrid_synth.hpp"
#include "deepcontext/networks.hpp"
#include "deepcontext/pipeline.hpp"
#include "deepcontext/templates.hpp"
#include "deepcontext/tsdf.hpp"

namespace deepcontext {

inline const std::vector<std::string> kStageOrder{"classification", "rotation", "translation", "context"};

struct StageSchedule {
  int pretrain_steps = 0;  // weight updates on hybrid scenes
  int finetune_steps = 0;  // weight updates on base scenes
  double lr = 0.01;
  double finetune_lr = 0.003;
};

struct TrainingConfig {
  std::vector<std::string> stages = kStageOrder;
  std::map<std::string, StageSchedule> schedule;
  int micro_batch = 24;
  int accum = 4;
  double momentum = 0.9;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  GridConfig grid = desk_grid();
  TrunkConfig trunk;
  ContextConfig context;
  double rotation_jitter_deg = 10.0;
  double translation_jitter_fraction = 1.0 / 6.0;
  // Alignment noise the context networks are trained under, standing in
  // for the quantization of the alignment networks.
  double context_yaw_noise_deg = 5.0;
  double context_translation_noise = 0.25;
  SynthesisConfig synthesis;

  void validate() const;
  const StageSchedule& stage(const std::string& name) const;
};

// Default schedule with the documented batch shape (24 x 4).
TrainingConfig default_training_config();
// Smaller batches and step counts sized for a single desktop core.
TrainingConfig desk_training_config();

nlohmann::json to_json(const TrainingConfig& cfg);
// Keys absent from `j` keep the values of `base`.
TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig base = default_training_config());

struct StageOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingScene {
  std::string id;
  DepthImage depth;
  SceneAnnotation annotation;
};

struct TrainingData {
  std::vector<TrainingScene> scenes;
  // Hybrid pretraining draws copies from these; without a repository
  // pretraining falls back to the base scenes.
  const ModelRepository* repo = nullptr;
  std::vector<Shortlists> shortlists;
};

// Runs retrieval once per scene.
TrainingData prepare_training_data(std::vector<TrainingScene> scenes, const ModelRepository* repo,
                                   const SynthesisConfig& synthesis, int jobs = 1);

struct StageReport {
  std::string stage;
  int updates = 0;
  double final_loss = 0.0;      // running mean over the last updates
  double final_accuracy = 0.0;  // classification stages only
  std::uint64_t digest = 0;
};

struct TrainingReport {
  std::vector<StageReport> stages;
  std::uint64_t digest = 0;  // over every saved weight set
};

nlohmann::json to_json(const TrainingReport& r);

using LogFn = std::function<void(const std::string&)>;

// Writes <out_dir>/<stage>/ (context: <out_dir>/context/<template>/) and
// <out_dir>/training_report.json. Stages after classification refuse to
// run when its weights are missing.
TrainingReport train_staged(const TrainingData& data, const std::vector<SceneTemplate>& templates,
                            const TrainingConfig& cfg, const std::filesystem::path& out_dir, const LogFn& log = {});

// Digest of the weights saved under `dir`, in stage order.
std::uint64_t models_digest(const std::filesystem::path& dir, const std::vector<SceneTemplate>& templates);

// Per-sample targets, exposed for tests.
struct AlignmentTargets {
  int rotation_bin = 0;
  int translation_cell = 0;
  Alignment input_frame;  // frame the network input volume is computed in
};

// Rotation target for a scene rotated by `delta` about the shifted center.
AlignmentTargets rotation_targets(const SceneAnnotation& ann, const std::string& major, const Vec3& center,
                                  double delta);
// Translation target when the input is rotated by `yaw` about `center`.
AlignmentTargets translation_targets(const SceneAnnotation& ann, const std::string& major, const Vec3& center,
                                     double yaw);

struct ContextTargets {
  std::vector<bool> exists;
  std::vector<std::array<double, 6>> offsets;  // valid where exists
};

// Anchors matched under the exact alignment, boxes expressed in the frame of
// `input_alignment`.
ContextTargets context_targets(const SceneAnnotation& ann, const SceneTemplate& tmpl,
                               const Alignment& input_alignment);

// Summed loss over anchors and the gradient w.r.t. the raw outputs.
template <class T>
double context_loss(const std::vector<std::array<T, kAnchorOutputs>>& outputs, const std::vector<bool>& outside,
                    const ContextTargets& targets, double lambda, std::vector<std::array<T, kAnchorOutputs>>& grad);

}  // namespace deepcontext
