#include "deepcontext/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "deepcontext/encoders.hpp"
#include "deepcontext/hybrid_synth.hpp"
#include "deepcontext/parallel.hpp"

namespace deepcontext {

namespace {

constexpr double kTenDegrees = 10.0 * kPi / 180.0;

void check_ids(const SceneDetections& dets, const SceneObjects& gts) {
  for (const auto& [id, _] : dets)
    if (!gts.count(id)) throw EvalError("detections for unknown scene id '" + id + "'");
}

struct Ranked {
  double score;
  std::size_t order;  // stable tie-break: scene order, then detection order
  const std::string* scene;
  const Detection* det;
};

std::vector<Ranked> rank(const SceneDetections& dets, const std::function<bool(const Detection&)>& keep) {
  std::vector<Ranked> out;
  std::size_t order = 0;
  for (const auto& [id, list] : dets)
    for (const auto& d : list) {
      if (keep(d)) out.push_back({d.score, order, &id, &d});
      ++order;
    }
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.order < b.order;
  });
  return out;
}

// Index of the unmatched candidate with the highest IoU at or above the
// threshold, or -1.
int best_unmatched(const OrientedBox3& box, const std::vector<AnnotatedObject>& gts, const std::vector<bool>& used,
                   const std::function<bool(const AnnotatedObject&)>& eligible, double threshold) {
  int best = -1;
  double best_iou = threshold;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g] || !eligible(gts[g])) continue;
    const double iou = box_iou_3d(box, gts[g].box);
    if (iou >= best_iou && (best < 0 || iou > best_iou)) {
      best = static_cast<int>(g);
      best_iou = iou;
    }
  }
  return best;
}

}  // namespace

double average_precision(const std::vector<bool>& ranked_tp, int num_gt, PrCurve* curve) {
  if (curve) *curve = {};
  if (num_gt <= 0) return 0.0;
  std::vector<double> rec, prec;
  int tp = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    if (ranked_tp[i]) ++tp;
    rec.push_back(static_cast<double>(tp) / num_gt);
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  if (curve) {
    curve->recall = rec;
    curve->precision = prec;
  }
  // Precision envelope, then area under the step function.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), rec.begin(), rec.end());
  mpre.insert(mpre.end(), prec.begin(), prec.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

std::map<std::string, CategoryAp> evaluate_detection(const SceneDetections& dets, const SceneObjects& gts,
                                                     double iou_threshold) {
  check_ids(dets, gts);
  std::set<std::string> categories;
  for (const auto& [_, list] : gts)
    for (const auto& o : list)
      if (!is_layout_category(o.category)) categories.insert(o.category);
  for (const auto& [_, list] : dets)
    for (const auto& d : list)
      if (!is_layout_category(d.category)) categories.insert(d.category);

  std::map<std::string, CategoryAp> out;
  for (const auto& cat : categories) {
    CategoryAp r;
    std::map<std::string, std::vector<bool>> used;
    for (const auto& [id, list] : gts) {
      used[id].assign(list.size(), false);
      for (const auto& o : list) r.num_gt += o.category == cat;
    }
    const auto ranked = rank(dets, [&](const Detection& d) { return d.category == cat; });
    r.num_detections = static_cast<int>(ranked.size());
    std::vector<bool> tp;
    for (const auto& rd : ranked) {
      const auto& list = gts.at(*rd.scene);
      auto& u = used[*rd.scene];
      const int g = best_unmatched(
          rd.det->box, list, u, [&](const AnnotatedObject& o) { return o.category == cat; }, iou_threshold);
      if (g >= 0) u[static_cast<std::size_t>(g)] = true;
      tp.push_back(g >= 0);
    }
    r.ap = average_precision(tp, r.num_gt, &r.curve);
    out[cat] = std::move(r);
  }
  return out;
}

double mean_ap(const std::map<std::string, CategoryAp>& per_category) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [_, r] : per_category)
    if (r.num_gt > 0) {
      sum += r.ap;
      ++n;
    }
  return n ? sum / n : 0.0;
}

double layout_error(const OrientedBox3& predicted, const OrientedBox3& gt, std::string_view element) {
  const Vec3 d = predicted.center - gt.center;
  if (element == "floor" || element == "ceiling") return std::abs(d.z());
  const Vec3 axis = gt.size.x() <= gt.size.y() ? Vec3::UnitX() : Vec3::UnitY();
  return std::abs((yaw_rotation(gt.yaw) * axis).dot(d));
}

LayoutStats summarize_errors(std::vector<double> errors) {
  LayoutStats s;
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  s.median = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  return s;
}

std::map<std::string, LayoutStats> evaluate_layout(const SceneDetections& predicted, const SceneObjects& gts) {
  check_ids(predicted, gts);
  std::map<std::string, std::vector<double>> errors;
  for (const auto& [id, objects] : gts) {
    const auto it = predicted.find(id);
    if (it == predicted.end()) continue;
    for (const auto& element : kLayoutCategories) {
      const AnnotatedObject* gt = nullptr;
      for (const auto& o : objects)
        if (o.category == element) {
          gt = &o;
          break;
        }
      if (!gt) continue;
      const Detection* best = nullptr;
      for (const auto& d : it->second)
        if (d.category == element && (!best || d.score > best->score)) best = &d;
      if (!best) continue;
      errors[std::string(element)].push_back(layout_error(best->box, gt->box, element));
    }
  }
  std::map<std::string, LayoutStats> out;
  for (auto& [element, e] : errors) out[element] = summarize_errors(std::move(e));
  return out;
}

SceneUnderstanding evaluate_scene_understanding(const SceneDetections& dets, const SceneObjects& gts,
                                                double iou_threshold) {
  check_ids(dets, gts);
  int n_det = 0, n_gt = 0, matched = 0, correct = 0;
  const auto object = [](const AnnotatedObject& o) { return !is_layout_category(o.category); };
  for (const auto& [id, objects] : gts) {
    for (const auto& o : objects) n_gt += object(o);
    const auto it = dets.find(id);
    if (it == dets.end()) continue;
    SceneDetections one{{id, it->second}};
    const auto ranked = rank(one, [](const Detection& d) { return !is_layout_category(d.category); });
    std::vector<bool> used(objects.size(), false);
    for (const auto& rd : ranked) {
      ++n_det;
      const int g = best_unmatched(rd.det->box, objects, used, object, iou_threshold);
      if (g < 0) continue;
      used[static_cast<std::size_t>(g)] = true;
      ++matched;
      correct += objects[static_cast<std::size_t>(g)].category == rd.det->category;
    }
  }
  SceneUnderstanding s;
  s.pg = n_det ? static_cast<double>(matched) / n_det : 0.0;
  s.rg = n_gt ? static_cast<double>(matched) / n_gt : 0.0;
  s.rr = n_gt ? static_cast<double>(correct) / n_gt : 0.0;
  return s;
}

AlignmentStats evaluate_alignment(std::span<const AlignmentSample> samples) {
  AlignmentStats s;
  s.count = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  int plain = 0, sym = 0;
  double err = 0.0;
  for (const auto& a : samples) {
    const double d = angle_distance(a.predicted_yaw, a.gt_yaw);
    // Small slack so exact 10 degree differences survive rounding.
    const double tol = kTenDegrees + 1e-9;
    plain += d <= tol;
    sym += d <= tol || (a.symmetric && kPi - d <= tol);
    err += (a.predicted_center - a.gt_center).norm();
  }
  s.rotation_accuracy = static_cast<double>(plain) / s.count;
  s.rotation_accuracy_sym = static_cast<double>(sym) / s.count;
  s.translation_error = err / s.count;
  return s;
}

Alignment icp_baseline_align(const PointCloud& query, std::span<const IcpReference> references,
                             const IcpOptions& options) {
  if (references.empty()) throw EvalError("icp_baseline_align: empty reference set");
  if (query.empty()) throw EvalError("icp_baseline_align: empty query cloud");
  const PointCloud q = subsample(query, options.max_points);
  const Vec3 cq = cloud_center(q);

  std::vector<PointCloud> rotated(kRotationBins);
  for (int b = 0; b < kRotationBins; ++b) {
    const Eigen::Matrix3d r = yaw_rotation(bin_to_yaw(b));
    for (const auto& p : q.points) rotated[static_cast<std::size_t>(b)].points.push_back(r * (p - cq));
  }

  double best = std::numeric_limits<double>::infinity();
  Alignment result;
  PointCloud moved;
  for (const auto& ref : references) {
    if (ref.cloud.empty()) throw EvalError("icp_baseline_align: empty reference cloud");
    PointCloud centered = subsample(ref.cloud, options.max_points);
    const Vec3 cr = cloud_center(centered);
    for (auto& p : centered.points) p -= cr;
    for (int b = 0; b < kRotationBins; ++b)
      for (int cell = 0; cell < kTranslationCells; ++cell) {
        const Vec3 t = cell_to_offset(cell);
        moved.points = rotated[static_cast<std::size_t>(b)].points;
        for (auto& p : moved.points) p += t;
        const double d = shape_distance(moved, centered);
        if (d < best) {
          best = d;
          // query -> reference frame, then the reference's own alignment
          const double yaw = bin_to_yaw(b);
          const Alignment to_ref{yaw, -(yaw_rotation(yaw) * cq) + t + cr};
          result = ref.alignment.compose(to_ref);
        }
      }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Report

void EvalReport::validate() const {
  const auto rate = [](double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) throw EvalError(what + " outside [0, 1]");
  };
  const auto nonneg = [](double v, const std::string& what) {
    if (!(v >= 0.0)) throw EvalError(what + " negative");
  };
  rate(template_accuracy, "template_accuracy");
  rate(rejection_rate, "rejection_rate");
  rate(map, "map");
  for (const auto& [c, r] : detection) rate(r.ap, "AP of " + c);
  for (const auto* l : {&layout, &layout_initial})
    for (const auto& [e, s] : *l) {
      nonneg(s.mean, "layout mean of " + e);
      nonneg(s.median, "layout median of " + e);
    }
  rate(understanding.pg, "Pg");
  rate(understanding.rg, "Rg");
  rate(understanding.rr, "Rr");
  if (understanding.rr > understanding.rg + 1e-12) throw EvalError("Rr exceeds Rg");
  for (const auto* a : {&alignment, &icp})
    for (const auto& [t, s] : *a) {
      rate(s.rotation_accuracy, "rotation accuracy of " + t);
      rate(s.rotation_accuracy_sym, "symmetric rotation accuracy of " + t);
      nonneg(s.translation_error, "translation error of " + t);
    }
}

namespace {

nlohmann::json layout_json(const std::map<std::string, LayoutStats>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [e, s] : m) j[e] = {{"count", s.count}, {"mean", s.mean}, {"median", s.median}};
  return j;
}

std::map<std::string, LayoutStats> layout_from(const nlohmann::json& j) {
  std::map<std::string, LayoutStats> m;
  for (const auto& [e, s] : j.items()) m[e] = {s.at("count").get<int>(), s.at("mean").get<double>(), s.at("median").get<double>()};
  return m;
}

nlohmann::json alignment_json(const std::map<std::string, AlignmentStats>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [t, s] : m)
    j[t] = {{"count", s.count},
            {"rotation_accuracy", s.rotation_accuracy},
            {"rotation_accuracy_sym", s.rotation_accuracy_sym},
            {"translation_error", s.translation_error}};
  return j;
}

std::map<std::string, AlignmentStats> alignment_from(const nlohmann::json& j) {
  std::map<std::string, AlignmentStats> m;
  for (const auto& [t, s] : j.items())
    m[t] = {s.at("count").get<int>(), s.at("rotation_accuracy").get<double>(),
            s.at("rotation_accuracy_sym").get<double>(), s.at("translation_error").get<double>()};
  return m;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json det = nlohmann::json::object();
  for (const auto& [c, a] : r.detection)
    det[c] = {{"ap", a.ap},
              {"num_gt", a.num_gt},
              {"num_detections", a.num_detections},
              {"recall", a.curve.recall},
              {"precision", a.curve.precision}};
  return {{"num_scenes", r.num_scenes},
          {"template_accuracy", r.template_accuracy},
          {"rejection_rate", r.rejection_rate},
          {"detection", det},
          {"map", r.map},
          {"layout", layout_json(r.layout)},
          {"layout_initial", layout_json(r.layout_initial)},
          {"scene_understanding", {{"pg", r.understanding.pg}, {"rg", r.understanding.rg}, {"rr", r.understanding.rr}}},
          {"alignment", alignment_json(r.alignment)},
          {"icp_baseline", alignment_json(r.icp)}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.num_scenes = j.at("num_scenes").get<int>();
  r.template_accuracy = j.at("template_accuracy").get<double>();
  r.rejection_rate = j.at("rejection_rate").get<double>();
  for (const auto& [c, a] : j.at("detection").items()) {
    CategoryAp ap;
    ap.ap = a.at("ap").get<double>();
    ap.num_gt = a.at("num_gt").get<int>();
    ap.num_detections = a.at("num_detections").get<int>();
    ap.curve.recall = a.at("recall").get<std::vector<double>>();
    ap.curve.precision = a.at("precision").get<std::vector<double>>();
    r.detection[c] = std::move(ap);
  }
  r.map = j.at("map").get<double>();
  r.layout = layout_from(j.at("layout"));
  r.layout_initial = layout_from(j.at("layout_initial"));
  const auto& su = j.at("scene_understanding");
  r.understanding = {su.at("pg").get<double>(), su.at("rg").get<double>(), su.at("rr").get<double>()};
  r.alignment = alignment_from(j.at("alignment"));
  r.icp = alignment_from(j.value("icp_baseline", nlohmann::json::object()));
  r.validate();
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "scenes             " << r.num_scenes << "\n";
  os << "template accuracy  " << r.template_accuracy << "\n";
  os << "rejection rate     " << r.rejection_rate << "\n\n";
  os << std::left << std::setw(16) << "category" << std::right << std::setw(8) << "AP" << std::setw(8) << "gt"
     << std::setw(8) << "dets" << "\n";
  for (const auto& [c, a] : r.detection)
    os << std::left << std::setw(16) << c << std::right << std::setw(8) << a.ap << std::setw(8) << a.num_gt
       << std::setw(8) << a.num_detections << "\n";
  os << std::left << std::setw(16) << "mAP" << std::right << std::setw(8) << r.map << "\n\n";
  os << std::left << std::setw(16) << "layout" << std::right << std::setw(10) << "mean" << std::setw(10) << "median"
     << std::setw(12) << "init mean" << std::setw(12) << "init median" << "\n";
  for (const auto& [e, s] : r.layout) {
    os << std::left << std::setw(16) << e << std::right << std::setw(10) << s.mean << std::setw(10) << s.median;
    const auto it = r.layout_initial.find(e);
    if (it != r.layout_initial.end()) os << std::setw(12) << it->second.mean << std::setw(12) << it->second.median;
    os << "\n";
  }
  os << "\nPg " << r.understanding.pg << "  Rg " << r.understanding.rg << "  Rr " << r.understanding.rr << "\n\n";
  const auto table = [&](const char* title, const std::map<std::string, AlignmentStats>& m) {
    os << std::left << std::setw(18) << title << std::right << std::setw(7) << "n" << std::setw(10) << "rot"
       << std::setw(10) << "rot sym" << std::setw(10) << "trans m" << "\n";
    for (const auto& [t, s] : m)
      os << std::left << std::setw(18) << t << std::right << std::setw(7) << s.count << std::setw(10)
         << s.rotation_accuracy << std::setw(10) << s.rotation_accuracy_sym << std::setw(10) << s.translation_error
         << "\n";
  };
  table("alignment", r.alignment);
  if (!r.icp.empty()) {
    os << "\n";
    table("icp baseline", r.icp);
  }
  return os.str();
}

std::string pr_curves_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "category,recall,precision\n";
  for (const auto& [c, a] : r.detection)
    for (std::size_t i = 0; i < a.curve.recall.size(); ++i)
      os << c << "," << a.curve.recall[i] << "," << a.curve.precision[i] << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Harness

std::vector<Detection> parse_detections(const SceneParse& parse, bool with_layout) {
  std::vector<Detection> out;
  if (parse.rejected) return out;
  for (const auto& a : parse.anchors) {
    if (a.outside) continue;
    if (!with_layout && is_layout_category(a.category)) continue;
    out.push_back({a.category, a.box, a.existence});
  }
  return out;
}

std::map<std::string, SceneParse> run_inference(const ModelSet& models, std::span<const EvalScene> scenes, int jobs) {
  std::vector<SceneParse> parses(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto& s = scenes[i];
    parses[i] = parse_depth_image(s.depth, s.annotation.camera, s.annotation.world_from_camera, models);
  });
  std::map<std::string, SceneParse> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) out[scenes[i].id] = std::move(parses[i]);
  return out;
}

namespace {

const SceneTemplate* find_template(const std::vector<SceneTemplate>& templates, std::string_view name) {
  for (const auto& t : templates)
    if (t.name == name) return &t;
  return nullptr;
}

AlignmentSample alignment_sample(const SceneAnnotation& ann, const std::string& major, const Alignment& predicted) {
  const Alignment gt = align_to_major(ann, major);
  AlignmentSample s;
  s.predicted_yaw = predicted.yaw;
  s.gt_yaw = gt.yaw;
  s.predicted_center = predicted.inverse().apply(Vec3::Zero());
  s.gt_center = gt.inverse().apply(Vec3::Zero());
  return s;
}

std::map<std::string, AlignmentStats> alignment_table(
    const std::vector<std::pair<std::string, AlignmentSample>>& samples) {
  std::map<std::string, std::vector<AlignmentSample>> by;
  for (const auto& [t, s] : samples) {
    by[t].push_back(s);
    by["all"].push_back(s);
  }
  std::map<std::string, AlignmentStats> out;
  for (const auto& [t, v] : by) out[t] = evaluate_alignment(v);
  return out;
}

}  // namespace

EvalReport evaluate_parses(const std::map<std::string, SceneParse>& parses, std::span<const EvalScene> scenes,
                           const std::vector<SceneTemplate>& templates, const EvalOptions& options,
                           std::span<const EvalScene> reference) {
  EvalReport r;
  SceneObjects gts;
  SceneDetections all, kept, layout, layout_initial;
  std::vector<std::pair<std::string, AlignmentSample>> samples;
  std::vector<const EvalScene*> queries;
  int correct = 0, rejected = 0;

  for (const auto& s : scenes) {
    const auto it = parses.find(s.id);
    if (it == parses.end()) throw EvalError("no parse for scene '" + s.id + "'");
    const SceneParse& p = it->second;
    gts[s.id] = s.annotation.objects;
    ++r.num_scenes;
    correct += p.template_name == s.annotation.scene_type;
    rejected += p.rejected;

    all[s.id] = parse_detections(p);
    for (const auto& d : all[s.id])
      if (d.score >= options.existence_threshold) kept[s.id].push_back(d);
    kept[s.id];

    if (!p.rejected) {
      const SceneTemplate* tmpl = find_template(templates, p.template_name);
      for (const auto& a : p.anchors) {
        if (a.outside || !is_layout_category(a.category)) continue;
        layout[s.id].push_back({a.category, a.box, a.existence});
        if (tmpl && a.anchor_id >= 0 && static_cast<std::size_t>(a.anchor_id) < tmpl->anchors.size())
          layout_initial[s.id].push_back(
              {a.category, p.alignment.inverse().apply(tmpl->anchors[static_cast<std::size_t>(a.anchor_id)].box), 1.0});
      }
    }

    const SceneTemplate* gt_tmpl = find_template(templates, s.annotation.scene_type);
    if (gt_tmpl) {
      samples.emplace_back(gt_tmpl->name, alignment_sample(s.annotation, gt_tmpl->major_category, p.alignment));
      queries.push_back(&s);
    }
  }
  // Parses without a scene are an input error.
  for (const auto& [id, _] : parses)
    if (!gts.count(id)) throw EvalError("parse for unknown scene id '" + id + "'");

  if (r.num_scenes > 0) {
    r.template_accuracy = static_cast<double>(correct) / r.num_scenes;
    r.rejection_rate = static_cast<double>(rejected) / r.num_scenes;
  }
  r.detection = evaluate_detection(all, gts, options.iou_threshold);
  r.map = mean_ap(r.detection);
  r.layout = evaluate_layout(layout, gts);
  r.layout_initial = evaluate_layout(layout_initial, gts);
  r.understanding = evaluate_scene_understanding(kept, gts, options.iou_threshold);
  r.alignment = alignment_table(samples);

  if (options.icp_baseline) {
    std::vector<IcpReference> refs;
    std::map<std::string, int> taken;
    for (const auto& s : reference) {
      const SceneTemplate* t = find_template(templates, s.annotation.scene_type);
      if (!t || taken[t->name] >= options.icp_references_per_template) continue;
      const PointCloud cloud = world_points(s.depth, s.annotation.camera, s.annotation.world_from_camera);
      if (cloud.empty()) continue;
      refs.push_back({cloud, align_to_major(s.annotation, t->major_category)});
      ++taken[t->name];
    }
    if (refs.empty()) throw EvalError("icp baseline: no usable reference scenes");
    std::vector<std::pair<std::string, AlignmentSample>> icp(queries.size());
    parallel_for(queries.size(), options.jobs, [&](std::size_t i) {
      const EvalScene& s = *queries[i];
      const PointCloud cloud = world_points(s.depth, s.annotation.camera, s.annotation.world_from_camera);
      const Alignment a = cloud.empty() ? Alignment{} : icp_baseline_align(cloud, refs, options.icp);
      icp[i] = {s.annotation.scene_type,
                alignment_sample(s.annotation, default_major_category(s.annotation.scene_type), a)};
    });
    r.icp = alignment_table(icp);
  }
  r.validate();
  return r;
}

}  // namespace deepcontext
