#include "deepcontext/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "deepcontext/io.hpp"

namespace deepcontext {

GridConfig context_grid(const GridConfig& scene_grid) {
  GridConfig g = scene_grid;
  const Vec3 ext = g.extent();
  g.origin = Vec3(-ext.x() / 2, -ext.y() / 2, -0.9);
  return g;
}

namespace {

std::pair<double, double> percentile_span(std::vector<double>& v) {
  const auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
  };
  const double lo = at(0.05);
  const double hi = at(0.95);
  return {lo, hi};
}

template <class Fn>
Vec3 per_axis(const PointCloud& cloud, Fn&& fn) {
  if (cloud.empty()) throw std::invalid_argument("empty point cloud");
  Vec3 out;
  std::vector<double> v(cloud.size());
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < cloud.size(); ++i) v[i] = cloud.points[i][a];
    const auto [lo, hi] = percentile_span(v);
    out[a] = fn(lo, hi);
  }
  return out;
}

}  // namespace

Vec3 cloud_center(const PointCloud& cloud) {
  return per_axis(cloud, [](double lo, double hi) { return 0.5 * (lo + hi); });
}

Vec3 cloud_range(const PointCloud& cloud) {
  return per_axis(cloud, [](double lo, double hi) { return hi - lo; });
}

PointCloud world_points(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera) {
  PointCloud cloud = backproject_depth(depth, cam);
  for (auto& p : cloud.points) p = world_from_camera * p;
  cloud.frame = Frame::gravity_aligned;
  return cloud;
}

TsdfVolume frame_volume(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                        const Alignment& to_frame, const GridConfig& grid) {
  return compute_tsdf(depth, cam, to_frame.rigid() * world_from_camera, grid);
}

nn::Tensor<float> volume_tensor(const TsdfVolume& vol) {
  nn::Tensor<float> t({1, vol.config.dims[2], vol.config.dims[1], vol.config.dims[0]});
  t.values = vol.values;
  return t;
}

nn::Tensor<double> volume_tensor_double(const TsdfVolume& vol) {
  nn::Tensor<double> t({1, vol.config.dims[2], vol.config.dims[1], vol.config.dims[0]});
  std::copy(vol.values.begin(), vol.values.end(), t.values.begin());
  return t;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const GridConfig& g) {
  return {{"dims", g.dims},
          {"voxel_size", g.voxel_size},
          {"truncation", g.truncation},
          {"origin", {g.origin.x(), g.origin.y(), g.origin.z()}}};
}

GridConfig grid_from_json(const nlohmann::json& j) {
  GridConfig g;
  g.dims = j.at("dims").get<std::array<int, 3>>();
  g.voxel_size = j.at("voxel_size").get<double>();
  g.truncation = j.at("truncation").get<double>();
  const auto o = j.at("origin").get<std::array<double, 3>>();
  g.origin = Vec3(o[0], o[1], o[2]);
  g.validate();
  return g;
}

nlohmann::json box_to_json(const OrientedBox3& b) {
  return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"size", {b.size.x(), b.size.y(), b.size.z()}},
          {"yaw", b.yaw}};
}

OrientedBox3 box_from_json(const nlohmann::json& j) {
  const auto c = j.at("center").get<std::array<double, 3>>();
  const auto s = j.at("size").get<std::array<double, 3>>();
  return OrientedBox3(Vec3(c[0], c[1], c[2]), Vec3(s[0], s[1], s[2]), j.at("yaw").get<double>());
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 vec_from(const nlohmann::json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return Vec3(a[0], a[1], a[2]);
}

}  // namespace

nlohmann::json to_json(const SceneParse& p) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : p.anchors)
    anchors.push_back({{"anchor_id", a.anchor_id},
                       {"category", a.category},
                       {"existence", a.existence},
                       {"box", box_to_json(a.box)},
                       {"template_box", box_to_json(a.template_box)},
                       {"outside", a.outside}});
  nlohmann::json probs = nlohmann::json::object();
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) probs[std::string(kTemplateNames[i])] = p.template_probs[i];
  return {{"rejected", p.rejected},
          {"template", p.template_name},
          {"template_probs", probs},
          {"rotation_yaw", p.yaw},
          {"cloud_center", vec_json(p.center)},
          {"translation_offset", vec_json(p.offset)},
          {"alignment", {{"yaw", p.alignment.yaw}, {"translation", vec_json(p.alignment.translation)}}},
          {"anchors", anchors}};
}

SceneParse scene_parse_from_json(const nlohmann::json& j) {
  SceneParse p;
  p.rejected = j.at("rejected").get<bool>();
  p.template_name = j.value("template", std::string());
  if (j.contains("template_probs"))
    for (std::size_t i = 0; i < kTemplateNames.size(); ++i)
      p.template_probs[i] = j.at("template_probs").value(std::string(kTemplateNames[i]), 0.0);
  p.yaw = j.value("rotation_yaw", 0.0);
  if (j.contains("cloud_center")) p.center = vec_from(j.at("cloud_center"));
  if (j.contains("translation_offset")) p.offset = vec_from(j.at("translation_offset"));
  if (j.contains("alignment")) {
    p.alignment.yaw = j.at("alignment").at("yaw").get<double>();
    p.alignment.translation = vec_from(j.at("alignment").at("translation"));
  }
  if (j.contains("anchors"))
    for (const auto& a : j.at("anchors")) {
      AnchorDetection d;
      d.anchor_id = a.at("anchor_id").get<int>();
      d.category = a.at("category").get<std::string>();
      d.existence = a.at("existence").get<double>();
      d.box = box_from_json(a.at("box"));
      d.template_box = box_from_json(a.at("template_box"));
      d.outside = a.value("outside", false);
      p.anchors.push_back(d);
    }
  return p;
}

// ---------------------------------------------------------------------------
// Models

namespace {

ClassifierNet<float> load_classifier(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  const auto& extra = manifest.at("extra");
  ClassifierNet<float> net(grid_from_json(extra.at("grid")), trunk_config_from_json(extra.at("trunk")),
                           extra.at("classes").get<int>(), 0);
  nn::load_weights(dir, named_tensors(net.params()));
  return net;
}

}  // namespace

ModelSet load_models(const std::filesystem::path& dir, const std::vector<SceneTemplate>& templates) {
  ModelSet m;
  m.templates = templates;
  m.classifier = load_classifier(dir / "classification");
  m.rotation = load_classifier(dir / "rotation");
  m.translation = load_classifier(dir / "translation");
  const auto extra = nlohmann::json::parse(io::read_text(dir / "classification" / "manifest.json")).at("extra");
  m.grid = grid_from_json(extra.at("grid"));
  for (const auto& t : templates) {
    const auto cdir = dir / "context" / t.name;
    const auto cextra = nlohmann::json::parse(io::read_text(cdir / "manifest.json")).at("extra");
    ContextNet<float> net(grid_from_json(cextra.at("grid")), t, trunk_config_from_json(cextra.at("trunk")),
                          context_config_from_json(cextra.at("context")), 0);
    nn::load_weights(cdir, named_tensors(net.params()));
    m.context.emplace(t.name, std::move(net));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Stages

TemplateDecision decide_template(const std::array<double, 4>& probs, double threshold) {
  TemplateDecision d;
  d.probs = probs;
  d.best = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  d.accepted = probs[static_cast<std::size_t>(d.best)] > threshold;
  return d;
}

namespace {

std::vector<float> logits_of(const TsdfVolume& volume, const ClassifierNet<float>& net, const char* stage) {
  typename ClassifierNet<float>::Cache cache;
  try {
    net.forward(volume_tensor(volume), cache);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string(stage) + ": " + e.what());
  }
  return cache.logits.values;
}

int argmax(const std::vector<float>& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

}  // namespace

TemplateDecision classify_template(const TsdfVolume& volume, const ClassifierNet<float>& net, double threshold) {
  const auto logits = logits_of(volume, net, "template classification");
  if (logits.size() != 4) throw std::invalid_argument("template classification: network must have 4 outputs");
  const auto p = nn::softmax<float>(logits);
  return decide_template({p[0], p[1], p[2], p[3]}, threshold);
}

double estimate_rotation(const TsdfVolume& volume, const ClassifierNet<float>& net) {
  const auto logits = logits_of(volume, net, "rotation estimation");
  if (logits.size() != kRotationBins) throw std::invalid_argument("rotation estimation: wrong output size");
  return bin_to_yaw(argmax(logits));
}

Vec3 estimate_translation(const TsdfVolume& rotated, const ClassifierNet<float>& net) {
  const auto logits = logits_of(rotated, net, "translation estimation");
  if (logits.size() != kTranslationCells) throw std::invalid_argument("translation estimation: wrong output size");
  return cell_to_offset(argmax(logits));
}

std::vector<AnchorDetection> decode_anchors(const SceneTemplate& tmpl,
                                            const std::vector<std::array<float, kAnchorOutputs>>& outputs,
                                            const std::vector<bool>& outside, const Alignment& alignment) {
  if (outputs.size() != tmpl.anchors.size() || outside.size() != tmpl.anchors.size())
    throw std::invalid_argument("anchor output count does not match the template");
  const Alignment back = alignment.inverse();
  std::vector<AnchorDetection> out;
  for (std::size_t a = 0; a < tmpl.anchors.size(); ++a) {
    const auto& anchor = tmpl.anchors[a];
    const auto& o = outputs[a];
    AnchorDetection d;
    d.anchor_id = anchor.id;
    d.category = anchor.category;
    d.outside = outside[a];
    const auto p = nn::softmax<float>(std::span<const float>(o.data(), 2));
    d.existence = d.outside ? 0.0 : static_cast<double>(p[1]);
    BoxOffset off;
    off.dcenter = Vec3(o[2], o[3], o[4]);
    off.dlog_size = Vec3(o[5], o[6], o[7]);
    d.template_box = decode_box(off, anchor.box);
    d.box = back.apply(d.template_box);
    out.push_back(d);
  }
  return out;
}

std::vector<AnchorDetection> parse_scene(const TsdfVolume& aligned, const SceneTemplate& tmpl,
                                         const ContextNet<float>& net, const Alignment& alignment) {
  typename ContextNet<float>::Cache cache;
  try {
    net.forward(volume_tensor(aligned), cache);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("context network: ") + e.what());
  }
  std::vector<std::array<float, kAnchorOutputs>> outputs;
  std::vector<bool> outside;
  for (const auto& ac : cache.anchors) {
    outputs.push_back(ac.out);
    outside.push_back(ac.outside);
  }
  return decode_anchors(tmpl, outputs, outside, alignment);
}

SceneParse parse_depth_image(const DepthImage& depth, const CameraIntrinsics& cam, const Rigid3& world_from_camera,
                             const ModelSet& models) {
  if (!depth.matches(cam)) throw std::invalid_argument("tsdf: depth image size does not match the camera");
  const PointCloud cloud = world_points(depth, cam, world_from_camera);
  if (cloud.empty()) throw std::invalid_argument("tsdf: depth image has no valid pixels");

  SceneParse parse;
  parse.center = cloud_center(cloud);
  const Alignment centered{0.0, -parse.center};
  const TsdfVolume scene = frame_volume(depth, cam, world_from_camera, centered, models.grid);
  const TemplateDecision decision = classify_template(scene, models.classifier);
  parse.template_probs = decision.probs;
  parse.template_name = std::string(kTemplateNames[static_cast<std::size_t>(decision.best)]);
  parse.rejected = !decision.accepted;

  parse.yaw = estimate_rotation(scene, models.rotation);
  const Alignment rotated{parse.yaw, -(yaw_rotation(parse.yaw) * parse.center)};
  parse.offset = estimate_translation(frame_volume(depth, cam, world_from_camera, rotated, models.grid),
                                      models.translation);
  parse.alignment = Alignment{parse.yaw, rotated.translation - parse.offset};
  if (parse.rejected) return parse;

  const auto it = models.context.find(parse.template_name);
  if (it == models.context.end()) throw std::invalid_argument("context network: no model for " + parse.template_name);
  const SceneTemplate* tmpl = nullptr;
  for (const auto& t : models.templates)
    if (t.name == parse.template_name) tmpl = &t;
  if (!tmpl) throw std::invalid_argument("context network: no template named " + parse.template_name);
  const TsdfVolume aligned =
      frame_volume(depth, cam, world_from_camera, parse.alignment, context_grid(models.grid));
  parse.anchors = parse_scene(aligned, *tmpl, it->second, parse.alignment);
  return parse;
}

}  // namespace deepcontext
