#include "deepcontext/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deepcontext/encoders.hpp"
#include "deepcontext/io.hpp"
#include "deepcontext/parallel.hpp"
#include "deepcontext/util.hpp"

namespace deepcontext {

namespace {

constexpr double kDeg = kPi / 180.0;

bool is_stage(const std::string& s) { return std::find(kStageOrder.begin(), kStageOrder.end(), s) != kStageOrder.end(); }

}  // namespace

void TrainingConfig::validate() const {
  for (const auto& s : stages)
    if (!is_stage(s)) throw std::invalid_argument("unknown training stage '" + s + "'");
  if (micro_batch < 1 || accum < 1) throw std::invalid_argument("micro_batch and accum must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  for (const auto& [name, s] : schedule) {
    if (!is_stage(name)) throw std::invalid_argument("schedule for unknown stage '" + name + "'");
    if (s.pretrain_steps < 0 || s.finetune_steps < 0) throw std::invalid_argument("step counts must be >= 0");
    if (!(s.lr > 0.0) || !(s.finetune_lr > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  }
  grid.validate();
  trunk.validate();
  context.validate();
  synthesis.validate();
}

const StageSchedule& TrainingConfig::stage(const std::string& name) const {
  const auto it = schedule.find(name);
  if (it == schedule.end()) throw std::invalid_argument("no schedule for stage '" + name + "'");
  return it->second;
}

TrainingConfig default_training_config() {
  TrainingConfig c;
  c.schedule["classification"] = {200, 50, 0.01, 0.003};
  c.schedule["rotation"] = {400, 100, 0.01, 0.003};
  c.schedule["translation"] = {400, 100, 0.01, 0.003};
  c.schedule["context"] = {400, 100, 0.01, 0.003};
  return c;
}

TrainingConfig desk_training_config() {
  TrainingConfig c = default_training_config();
  c.micro_batch = 8;
  c.accum = 1;
  c.trunk.channels = {8, 16, 32};
  c.trunk.hidden = 256;
  // about 25 min on one core for 400 scenes
  c.schedule["classification"] = {3000, 500, 0.01, 0.003};
  c.schedule["rotation"] = {4000, 600, 0.01, 0.003};
  c.schedule["translation"] = {2400, 500, 0.01, 0.003};
  c.schedule["context"] = {500, 100, 0.01, 0.003};
  return c;
}

nlohmann::json to_json(const TrainingConfig& c) {
  nlohmann::json sched = nlohmann::json::object();
  for (const auto& [name, s] : c.schedule)
    sched[name] = {{"pretrain_steps", s.pretrain_steps},
                   {"finetune_steps", s.finetune_steps},
                   {"lr", s.lr},
                   {"finetune_lr", s.finetune_lr}};
  return {{"stages", c.stages},
          {"schedule", sched},
          {"micro_batch", c.micro_batch},
          {"accum", c.accum},
          {"momentum", c.momentum},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"grid", to_json(c.grid)},
          {"trunk", to_json(c.trunk)},
          {"context", to_json(c.context)},
          {"rotation_jitter_deg", c.rotation_jitter_deg},
          {"translation_jitter_fraction", c.translation_jitter_fraction},
          {"context_yaw_noise_deg", c.context_yaw_noise_deg},
          {"context_translation_noise", c.context_translation_noise},
          {"synthesis",
           {{"shortlist_size", c.synthesis.shortlist_size},
            {"multiplier", c.synthesis.multiplier},
            {"seed", c.synthesis.seed},
            {"inflate", c.synthesis.inflate},
            {"max_cloud_points", c.synthesis.max_cloud_points}}}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig c) {
  if (j.contains("stages")) c.stages = j.at("stages").get<std::vector<std::string>>();
  if (j.contains("schedule"))
    for (const auto& [name, s] : j.at("schedule").items()) {
      StageSchedule& st = c.schedule[name];
      st.pretrain_steps = s.value("pretrain_steps", st.pretrain_steps);
      st.finetune_steps = s.value("finetune_steps", st.finetune_steps);
      st.lr = s.value("lr", st.lr);
      st.finetune_lr = s.value("finetune_lr", st.finetune_lr);
    }
  c.micro_batch = j.value("micro_batch", c.micro_batch);
  c.accum = j.value("accum", c.accum);
  c.momentum = j.value("momentum", c.momentum);
  c.lambda = j.value("lambda", c.lambda);
  c.seed = j.value("seed", c.seed);
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  if (j.contains("trunk")) c.trunk = trunk_config_from_json(j.at("trunk"));
  if (j.contains("context")) c.context = context_config_from_json(j.at("context"));
  c.rotation_jitter_deg = j.value("rotation_jitter_deg", c.rotation_jitter_deg);
  c.translation_jitter_fraction = j.value("translation_jitter_fraction", c.translation_jitter_fraction);
  c.context_yaw_noise_deg = j.value("context_yaw_noise_deg", c.context_yaw_noise_deg);
  c.context_translation_noise = j.value("context_translation_noise", c.context_translation_noise);
  if (j.contains("synthesis")) {
    const auto& s = j.at("synthesis");
    c.synthesis.shortlist_size = s.value("shortlist_size", c.synthesis.shortlist_size);
    c.synthesis.multiplier = s.value("multiplier", c.synthesis.multiplier);
    c.synthesis.seed = s.value("seed", c.synthesis.seed);
    c.synthesis.inflate = s.value("inflate", c.synthesis.inflate);
    c.synthesis.max_cloud_points = s.value("max_cloud_points", c.synthesis.max_cloud_points);
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainingReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"stage", s.stage},
                      {"updates", s.updates},
                      {"final_loss", s.final_loss},
                      {"final_accuracy", s.final_accuracy},
                      {"digest", s.digest}});
  return {{"stages", stages}, {"digest", r.digest}};
}

TrainingData prepare_training_data(std::vector<TrainingScene> scenes, const ModelRepository* repo,
                                   const SynthesisConfig& synthesis, int jobs) {
  TrainingData d;
  d.scenes = std::move(scenes);
  d.repo = repo;
  if (repo) {
    d.shortlists.resize(d.scenes.size());
    parallel_for(d.scenes.size(), jobs, [&](std::size_t i) {
      d.shortlists[i] = build_shortlists(d.scenes[i].depth, d.scenes[i].annotation, *repo, synthesis);
    });
  }
  return d;
}

// ---------------------------------------------------------------------------
// Targets

namespace {

Vec3 major_center(const SceneAnnotation& ann, const std::string& major) {
  return align_to_major(ann, major).inverse().apply(Vec3::Zero());
}

}  // namespace

AlignmentTargets rotation_targets(const SceneAnnotation& ann, const std::string& major, const Vec3& center,
                                  double delta) {
  const Alignment gt = align_to_major(ann, major);
  AlignmentTargets t;
  t.input_frame = Alignment{delta, -(yaw_rotation(delta) * center)};
  // The major object's yaw becomes theta + delta; undoing it needs -(theta + delta).
  t.rotation_bin = yaw_to_bin(gt.yaw - delta);
  t.translation_cell = offset_to_cell(yaw_rotation(delta) * (major_center(ann, major) - center));
  return t;
}

AlignmentTargets translation_targets(const SceneAnnotation& ann, const std::string& major, const Vec3& center,
                                     double yaw) {
  AlignmentTargets t;
  t.input_frame = Alignment{yaw, -(yaw_rotation(yaw) * center)};
  t.rotation_bin = yaw_to_bin(yaw);
  t.translation_cell = offset_to_cell(yaw_rotation(yaw) * (major_center(ann, major) - center));
  return t;
}

ContextTargets context_targets(const SceneAnnotation& ann, const SceneTemplate& tmpl,
                               const Alignment& input_alignment) {
  const TemplateGroundTruth gt = match_with_alignment(ann, tmpl, align_to_major(ann, tmpl.major_category));
  ContextTargets t;
  t.exists.resize(tmpl.anchors.size(), false);
  t.offsets.resize(tmpl.anchors.size(), {});
  for (std::size_t a = 0; a < tmpl.anchors.size(); ++a) {
    const AnchorTarget& at = gt.anchors[a];
    if (!at.exists) continue;
    const OrientedBox3 box =
        canonicalize_box(input_alignment.apply(ann.objects[static_cast<std::size_t>(at.object_index)].box));
    const BoxOffset off = encode_box(box, tmpl.anchors[a].box);
    t.exists[a] = true;
    t.offsets[a] = {off.dcenter.x(),   off.dcenter.y(),   off.dcenter.z(),
                    off.dlog_size.x(), off.dlog_size.y(), off.dlog_size.z()};
  }
  return t;
}

template <class T>
double context_loss(const std::vector<std::array<T, kAnchorOutputs>>& outputs, const std::vector<bool>& outside,
                    const ContextTargets& targets, double lambda, std::vector<std::array<T, kAnchorOutputs>>& grad) {
  if (outputs.size() != targets.exists.size() || outside.size() != outputs.size())
    throw std::invalid_argument("context_loss: anchor count mismatch");
  grad.assign(outputs.size(), {});
  double loss = 0.0;
  for (std::size_t a = 0; a < outputs.size(); ++a) {
    if (outside[a]) continue;
    const auto& o = outputs[a];
    const auto ce = nn::softmax_cross_entropy<T>(std::span<const T>(o.data(), 2), targets.exists[a] ? 1 : 0);
    loss += static_cast<double>(ce.loss);
    grad[a][0] = ce.grad[0];
    grad[a][1] = ce.grad[1];
    if (!targets.exists[a]) continue;
    std::array<T, 6> target{};
    for (int k = 0; k < 6; ++k) target[static_cast<std::size_t>(k)] = static_cast<T>(targets.offsets[a][static_cast<std::size_t>(k)]);
    const auto l1 = nn::smooth_l1<T>(std::span<const T>(o.data() + 2, 6), std::span<const T>(target));
    loss += lambda * static_cast<double>(l1.loss);
    for (int k = 0; k < 6; ++k) grad[a][static_cast<std::size_t>(2 + k)] = static_cast<T>(lambda) * l1.grad[static_cast<std::size_t>(k)];
  }
  return loss;
}

template double context_loss<float>(const std::vector<std::array<float, kAnchorOutputs>>&, const std::vector<bool>&,
                                    const ContextTargets&, double, std::vector<std::array<float, kAnchorOutputs>>&);
template double context_loss<double>(const std::vector<std::array<double, kAnchorOutputs>>&, const std::vector<bool>&,
                                     const ContextTargets&, double,
                                     std::vector<std::array<double, kAnchorOutputs>>&);

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct Sample {
  const TrainingScene* scene;
  DepthImage depth;
  Vec3 center;
  Vec3 range;
};

class SceneSource {
 public:
  SceneSource(const TrainingData& data, const TrainingConfig& cfg) : data_(data), cfg_(cfg) {}

  Sample draw(std::size_t index, bool hybrid, std::mt19937_64& rng) const {
    const TrainingScene& s = data_.scenes[index];
    Sample out{&s, {}, {}, {}};
    const std::uint64_t copy = uniform_index(rng, static_cast<std::uint64_t>(cfg_.synthesis.multiplier));
    if (hybrid && data_.repo)
      out.depth = synthesize_with_shortlists(s.depth, s.annotation, *data_.repo, data_.shortlists[index],
                                             cfg_.synthesis, mix_seed(fnv1a64(s.id), copy));
    else
      out.depth = s.depth;
    const PointCloud pts = world_points(out.depth, s.annotation.camera, s.annotation.world_from_camera);
    if (pts.empty()) throw std::invalid_argument("training scene " + s.id + " has no valid depth");
    out.center = cloud_center(pts);
    out.range = cloud_range(pts);
    return out;
  }

  TsdfVolume volume(const Sample& s, const Alignment& frame, const GridConfig& grid) const {
    return frame_volume(s.depth, s.scene->annotation.camera, s.scene->annotation.world_from_camera, frame, grid);
  }

 private:
  const TrainingData& data_;
  const TrainingConfig& cfg_;
};

struct Running {
  double loss = 0.0, acc = 0.0;
  double weight = 0.0;
  void add(double l, double a) {
    const double decay = 0.98;
    loss = decay * loss + l;
    acc = decay * acc + a;
    weight = decay * weight + 1.0;
  }
  double mean_loss() const { return weight > 0 ? loss / weight : 0.0; }
  double mean_acc() const { return weight > 0 ? acc / weight : 0.0; }
};

// Returns (loss, accuracy) of one example after accumulating its gradient.
using ExampleFn = std::function<std::pair<double, double>(std::size_t scene, bool hybrid, std::mt19937_64& rng,
                                                          double grad_scale)>;

StageReport run_schedule(const std::string& label, const StageSchedule& sched, const TrainingConfig& cfg,
                         const std::vector<std::size_t>& pool, std::vector<Param<float>> params,
                         std::mt19937_64& rng, const ExampleFn& example, const LogFn& log) {
  if (pool.empty()) throw std::invalid_argument(label + ": no training scenes");
  std::vector<nn::Tensor<float>*> tensors;
  for (auto& p : params) {
    p.tensor->zero_grad();
    tensors.push_back(p.tensor);
  }
  nn::SgdState<float> state;
  Running running;
  StageReport report;
  report.stage = label;
  const double scale = 1.0 / cfg.micro_batch;
  const auto start = std::chrono::steady_clock::now();
  const int total = sched.pretrain_steps + sched.finetune_steps;
  for (int step = 0; step < total; ++step) {
    const bool hybrid = step < sched.pretrain_steps;
    const double lr = hybrid ? sched.lr : sched.finetune_lr;
    double loss = 0.0, acc = 0.0;
    for (int a = 0; a < cfg.accum; ++a)
      for (int m = 0; m < cfg.micro_batch; ++m) {
        const std::size_t idx = pool[uniform_index(rng, pool.size())];
        const auto [l, c] = example(idx, hybrid, rng, scale);
        loss += l;
        acc += c;
      }
    const double n = static_cast<double>(cfg.accum * cfg.micro_batch);
    running.add(loss / n, acc / n);
    nn::sgd_step<float>(tensors, state, lr, cfg.momentum, cfg.accum);
    ++report.updates;
    if (log && ((step + 1) % 20 == 0 || step + 1 == total)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream os;
      os.precision(4);
      os << label << " update " << step + 1 << "/" << total << (hybrid ? " hybrid" : " base")
         << " loss " << running.mean_loss() << " acc " << running.mean_acc() << " (" << secs << " s)";
      log(os.str());
    }
  }
  report.final_loss = running.mean_loss();
  report.final_accuracy = running.mean_acc();
  report.digest = nn::weights_digest(named_tensors(params));
  return report;
}

std::string major_of(const SceneAnnotation& ann) { return default_major_category(ann.scene_type); }

int argmax(const std::vector<float>& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

// Cross-entropy step for a classifier; returns (loss, correct).
std::pair<double, double> classifier_step(ClassifierNet<float>& net, const TsdfVolume& vol, int label,
                                          double grad_scale) {
  typename ClassifierNet<float>::Cache cache;
  net.forward(volume_tensor(vol), cache);
  const auto ce = nn::softmax_cross_entropy<float>(cache.logits.values, label);
  nn::Tensor<float> d({static_cast<int>(ce.grad.size())});
  for (std::size_t i = 0; i < ce.grad.size(); ++i) d.values[i] = ce.grad[i] * static_cast<float>(grad_scale);
  net.backward(cache, d);
  return {ce.loss, argmax(cache.logits.values) == label ? 1.0 : 0.0};
}

nlohmann::json stage_extra(const std::string& stage, const TrainingConfig& cfg, const GridConfig& grid, int classes) {
  nlohmann::json j{{"stage", stage}, {"grid", to_json(grid)}, {"trunk", to_json(cfg.trunk)}};
  if (classes > 0) j["classes"] = classes;
  return j;
}

std::vector<Param<float>> trunk_only(std::vector<Param<float>> params) {
  std::vector<Param<float>> out;
  for (auto& p : params)
    if (p.name.rfind("trunk.", 0) == 0) out.push_back(p);
  return out;
}

ClassifierNet<float> load_stage_classifier(const std::filesystem::path& dir) {
  const auto extra = nlohmann::json::parse(io::read_text(dir / "manifest.json")).at("extra");
  ClassifierNet<float> net(grid_from_json(extra.at("grid")), trunk_config_from_json(extra.at("trunk")),
                           extra.at("classes").get<int>(), 0);
  nn::load_weights(dir, named_tensors(net.params()));
  return net;
}

std::uint64_t dir_digest(const std::filesystem::path& dir, std::uint64_t h) {
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  for (const auto& layer : manifest.at("layers")) {
    const auto shape = layer.at("shape").get<std::vector<int>>();
    std::vector<float> values(nn::shape_size(shape));
    std::ifstream in(dir / layer.at("file").get<std::string>(), std::ios::binary);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) throw io::IoError("truncated weight blob in " + dir.string());
    h = fnv1a64(layer.at("name").get<std::string>(), h);
    h = fnv1a64(nn::shape_string(shape), h);
    h = fnv1a64_bytes(std::as_bytes(std::span<const float>(values)), h);
  }
  return h;
}

}  // namespace

std::uint64_t models_digest(const std::filesystem::path& dir, const std::vector<SceneTemplate>& templates) {
  std::uint64_t h = fnv1a64("");
  for (const std::string stage : {"classification", "rotation", "translation"})
    if (std::filesystem::exists(dir / stage / "manifest.json")) h = dir_digest(dir / stage, h);
  for (const auto& t : templates)
    if (std::filesystem::exists(dir / "context" / t.name / "manifest.json")) h = dir_digest(dir / "context" / t.name, h);
  return h;
}

TrainingReport train_staged(const TrainingData& data, const std::vector<SceneTemplate>& templates,
                            const TrainingConfig& cfg, const std::filesystem::path& out_dir, const LogFn& log) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const SceneSource source(data, cfg);
  TrainingReport report;

  std::vector<std::size_t> all(data.scenes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (const auto& s : data.scenes)
    if (template_index(s.annotation.scene_type) < 0)
      throw std::invalid_argument("training scene " + s.id + " has unknown scene type '" + s.annotation.scene_type + "'");

  // Stages run in pipeline order regardless of how they were listed.
  std::vector<std::string> stages;
  for (const auto& s : kStageOrder)
    if (std::find(cfg.stages.begin(), cfg.stages.end(), s) != cfg.stages.end()) stages.push_back(s);

  const auto cls_dir = out_dir / "classification";
  const double jitter = cfg.rotation_jitter_deg * kDeg;

  for (const auto& stage : stages) {
    if (stage != "classification" && !std::filesystem::exists(cls_dir / "manifest.json"))
      throw StageOrderError("stage '" + stage + "' requires the template classification weights (stage 1) in " +
                            cls_dir.string() + "; run the classification stage first");
    std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64(stage)));
    const StageSchedule& sched = cfg.stage(stage);

    if (stage == "classification" || stage == "rotation" || stage == "translation") {
      const int classes = stage == "classification" ? 4 : stage == "rotation" ? kRotationBins : kTranslationCells;
      ClassifierNet<float> net(cfg.grid, cfg.trunk, classes, mix_seed(cfg.seed, fnv1a64(stage + "/init")));
      if (stage != "classification") {
        ClassifierNet<float> base = load_stage_classifier(cls_dir);
        copy_params<float, float>(trunk_only(net.params()), trunk_only(base.params()));
      }
      const ExampleFn fn = [&](std::size_t idx, bool hybrid, std::mt19937_64& r, double scale) {
        const Sample s = source.draw(idx, hybrid, r);
        const SceneAnnotation& ann = s.scene->annotation;
        const double delta = uniform(r, -jitter, jitter);
        Vec3 shift;
        for (int a = 0; a < 3; ++a) {
          const double lim = s.range[a] * cfg.translation_jitter_fraction;
          shift[a] = uniform(r, -lim, lim);
        }
        const Vec3 center = s.center + shift;
        AlignmentTargets t;
        int label = 0;
        if (stage == "translation") {
          const double gt_yaw = align_to_major(ann, major_of(ann)).yaw;
          t = translation_targets(ann, major_of(ann), center, gt_yaw + delta);
          label = t.translation_cell;
        } else {
          t = rotation_targets(ann, major_of(ann), center, delta);
          label = stage == "rotation" ? t.rotation_bin : template_index(ann.scene_type);
        }
        return classifier_step(net, source.volume(s, t.input_frame, cfg.grid), label, scale);
      };
      StageReport r = run_schedule(stage, sched, cfg, all, net.params(), rng, fn, log);
      nn::save_weights(out_dir / stage, named_tensors(net.params()), stage_extra(stage, cfg, cfg.grid, classes));
      report.stages.push_back(r);
      continue;
    }

    // Context networks, one per template, trunk initialized from stage 1.
    ClassifierNet<float> base = load_stage_classifier(cls_dir);
    const GridConfig cgrid = context_grid(cfg.grid);
    for (const auto& tmpl : templates) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < data.scenes.size(); ++i)
        if (data.scenes[i].annotation.scene_type == tmpl.name) pool.push_back(i);
      if (pool.empty()) {
        if (log) log("context/" + tmpl.name + ": no training scenes, skipped");
        continue;
      }
      ContextNet<float> net(cgrid, tmpl, cfg.trunk, cfg.context, mix_seed(cfg.seed, fnv1a64("context/" + tmpl.name)));
      copy_params<float, float>(trunk_only(net.params()), trunk_only(base.params()));
      const double yaw_noise = cfg.context_yaw_noise_deg * kDeg;
      const double t_noise = cfg.context_translation_noise;
      const ExampleFn fn = [&](std::size_t idx, bool hybrid, std::mt19937_64& r, double scale) {
        const Sample s = source.draw(idx, hybrid, r);
        const SceneAnnotation& ann = s.scene->annotation;
        const Alignment gt = align_to_major(ann, tmpl.major_category);
        const Vec3 cm = gt.inverse().apply(Vec3::Zero());
        const double yaw = gt.yaw + uniform(r, -yaw_noise, yaw_noise);
        Vec3 noise;
        for (int a = 0; a < 3; ++a) noise[a] = uniform(r, -t_noise, t_noise);
        const Alignment frame{yaw, -(yaw_rotation(yaw) * cm) + noise};
        const ContextTargets targets = context_targets(ann, tmpl, frame);
        typename ContextNet<float>::Cache cache;
        net.forward(volume_tensor(source.volume(s, frame, cgrid)), cache);
        std::vector<std::array<float, kAnchorOutputs>> outputs, grad;
        std::vector<bool> outside;
        for (const auto& ac : cache.anchors) {
          outputs.push_back(ac.out);
          outside.push_back(ac.outside);
        }
        const double loss = context_loss<float>(outputs, outside, targets, cfg.lambda, grad);
        double correct = 0, counted = 0;
        for (std::size_t a = 0; a < outputs.size(); ++a) {
          if (outside[a]) continue;
          counted += 1;
          correct += ((outputs[a][1] > outputs[a][0]) == targets.exists[a]) ? 1 : 0;
          for (auto& g : grad[a]) g *= static_cast<float>(scale);
        }
        net.backward(cache, grad);
        return std::pair<double, double>{loss, counted > 0 ? correct / counted : 0.0};
      };
      StageReport r = run_schedule("context/" + tmpl.name, sched, cfg, pool, net.params(), rng, fn, log);
      auto extra = stage_extra("context", cfg, cgrid, 0);
      extra["template"] = tmpl.name;
      extra["context"] = to_json(cfg.context);
      nn::save_weights(out_dir / "context" / tmpl.name, named_tensors(net.params()), extra);
      report.stages.push_back(r);
    }
  }
  report.digest = models_digest(out_dir, templates);
  io::write_text(out_dir / "training_report.json", to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace deepcontext
