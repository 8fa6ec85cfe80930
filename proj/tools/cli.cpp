#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>

#include "deepcontext/eval.hpp"
#include "deepcontext/hybrid_synth.hpp"
#include "deepcontext/io.hpp"
#include "deepcontext/parallel.hpp"
#include "deepcontext/pipeline.hpp"
#include "deepcontext/scene_gen.hpp"
#include "deepcontext/templates.hpp"
#include "deepcontext/training.hpp"
#include "deepcontext/util.hpp"

namespace fs = std::filesystem;

namespace deepcontext::cli {

namespace {

// Failure inside a named stage of a command.
struct StageFailure : std::runtime_error {
  StageFailure(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what());
  }
}

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string config;
  std::string grid = "desk";
};

void add_common(CLI::App* app, Common& c, bool with_grid) {
  app->add_option("--seed", c.seed, "Seed for every random choice of the command")->capture_default_str();
  app->add_option("--jobs", c.jobs, "Worker threads; outputs do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--config", c.config, "JSON configuration overriding the defaults");
  if (with_grid)
    app->add_option("--grid", c.grid, "Voxel grid: paper (128x128x64, 5 cm) or desk (32x32x16, 20 cm)")
        ->check(CLI::IsMember({"paper", "desk"}))
        ->capture_default_str();
}

GridConfig grid_named(const std::string& name) { return name == "paper" ? default_grid() : desk_grid(); }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(io::read_text(p)); }

std::string default_data_dir() {
  const char* env = std::getenv("DEEPCONTEXT_DATA_DIR");
  return env ? env : "";
}

fs::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw StageFailure("arguments", std::string(flag) + " is required (or set DEEPCONTEXT_DATA_DIR)");
  return value;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

ModelRepository repository(const std::string& dir, int variants, std::uint64_t seed) {
  return dir.empty() ? procedural_repository(variants, mix_seed(seed, 1)) : load_obj_repository(dir);
}

std::vector<SceneTemplate> read_templates(const std::string& path) {
  return stage("templates", [&] { return templates_from_json(read_json(path)); });
}

// ---------------------------------------------------------------------------

int cmd_gen(const Common& c, const std::string& out_dir, std::size_t n, std::ostream& out) {
  GeneratorConfig cfg;
  if (!c.config.empty()) cfg = stage("config", [&] { return generator_config_from_json(read_json(c.config)); });
  cfg.seed = c.seed;
  const fs::path dir = require_dir(out_dir, "--out");
  const DatasetManifest m = stage("generate", [&] { return generate_dataset(cfg, n, dir, c.jobs); });
  out << "generated " << m.scenes.size() << " scenes (" << m.skipped.size() << " skipped) in " << dir.string() << "\n";
  return 0;
}

int cmd_synth(const Common& c, const std::string& dataset, const std::string& out_dir, const std::string& repo_dir,
              int copies, const std::string& splits, std::ostream& out) {
  SynthesisConfig cfg;
  if (!c.config.empty())
    cfg = stage("config", [&] { return training_config_from_json(read_json(c.config)).synthesis; });
  cfg.seed = c.seed;
  if (copies > 0) cfg.multiplier = copies;
  const fs::path src = require_dir(dataset, "--dataset");
  const fs::path dst = require_dir(out_dir, "--out");
  const ModelRepository repo = stage("repository", [&] { return repository(repo_dir, 4, c.seed); });
  const auto scenes = stage("load", [&] { return load_splits(src, split_list(splits), c.jobs); });
  fs::create_directories(dst / "scenes");
  DatasetManifest manifest;
  manifest.seed = c.seed;
  std::vector<std::vector<std::string>> warnings(scenes.size());
  stage("synthesize", [&] {
    parallel_for(scenes.size(), c.jobs, [&](std::size_t i) {
      const auto& s = scenes[i];
      const Shortlists lists = build_shortlists(s.depth, s.annotation, repo, cfg);
      warnings[i] = lists.warnings;
      const std::string ann = to_json(s.annotation).dump(2) + "\n";
      for (int k = 0; k < cfg.multiplier; ++k) {
        const DepthImage d =
            synthesize_with_shortlists(s.depth, s.annotation, repo, lists, cfg, mix_seed(fnv1a64(s.id), k));
        std::ostringstream id;
        id << s.id << "_h" << std::setw(2) << std::setfill('0') << k;
        io::write_depth_png(dst / "scenes" / (id.str() + "_depth.png"), d);
        io::write_text(dst / "scenes" / (id.str() + "_ann.json"), ann);
      }
    });
    return 0;
  });
  for (std::size_t i = 0; i < scenes.size(); ++i)
    for (int k = 0; k < cfg.multiplier; ++k) {
      std::ostringstream id;
      id << scenes[i].id << "_h" << std::setw(2) << std::setfill('0') << k;
      manifest.scenes.push_back({id.str(), "train", scenes[i].annotation.scene_type, mix_seed(fnv1a64(scenes[i].id), k)});
    }
  io::write_text(dst / "manifest.json", to_json(manifest).dump(2) + "\n");
  std::size_t n_warn = 0;
  for (const auto& w : warnings) n_warn += w.size();
  out << "wrote " << manifest.scenes.size() << " hybrid scenes to " << dst.string() << " (" << n_warn
      << " retrieval warnings)\n";
  return 0;
}

int cmd_learn(const Common& c, const std::string& dataset, const std::string& out_path, const std::string& splits,
              std::ostream& out) {
  const fs::path src = require_dir(dataset, "--dataset");
  const auto scenes = stage("load", [&] { return load_splits(src, split_list(splits), c.jobs); });
  const auto templates = stage("learn", [&] {
    std::vector<SceneAnnotation> anns;
    for (const auto& s : scenes) anns.push_back(s.annotation);
    return learn_templates(anns, c.seed);
  });
  io::write_text(out_path, templates_to_json(templates).dump(2) + "\n");
  for (const auto& t : templates) out << t.name << ": " << t.anchors.size() << " anchors\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset, const std::string& templates_path,
              const std::string& out_dir, const std::vector<std::string>& stages, const std::string& repo_dir,
              bool no_hybrid, const std::string& splits, std::ostream& out) {
  TrainingConfig cfg = desk_training_config();
  cfg.grid = grid_named(c.grid);
  if (!c.config.empty()) cfg = stage("config", [&] { return training_config_from_json(read_json(c.config), cfg); });
  cfg.seed = c.seed;
  cfg.synthesis.seed = c.seed;
  if (!stages.empty()) cfg.stages = stages;
  stage("config", [&] {
    cfg.validate();
    return 0;
  });
  const fs::path models = require_dir(out_dir, "--out");
  // Checked before any data is loaded so the failure is immediate.
  if (std::any_of(cfg.stages.begin(), cfg.stages.end(), [](const auto& s) { return s != "classification"; }) &&
      std::find(cfg.stages.begin(), cfg.stages.end(), "classification") == cfg.stages.end() &&
      !fs::exists(models / "classification" / "manifest.json"))
    throw StageFailure("train", "stage order: template classification weights (stage 1) not found in " +
                                    (models / "classification").string() + "; run --stage classification first");
  const auto templates = read_templates(templates_path);
  const fs::path src = require_dir(dataset, "--dataset");
  auto loaded = stage("load", [&] { return load_splits(src, split_list(splits), c.jobs); });
  std::vector<TrainingScene> scenes;
  for (auto& s : loaded) scenes.push_back({s.id, std::move(s.depth), std::move(s.annotation)});
  const ModelRepository repo = stage("repository", [&] { return repository(repo_dir, 4, c.seed); });
  const TrainingData data = stage("retrieval", [&] {
    return prepare_training_data(std::move(scenes), no_hybrid ? nullptr : &repo, cfg.synthesis, c.jobs);
  });
  const TrainingReport report =
      stage("train", [&] { return train_staged(data, templates, cfg, models, [&](const std::string& line) { out << line << "\n" << std::flush; }); });
  out << "weights digest " << std::hex << std::setw(16) << std::setfill('0') << report.digest << std::dec << "\n";
  return 0;
}

// Depth image plus the camera description: the sibling annotation
// (<id>_ann.json next to <id>_depth.png) or an explicit --camera file.
struct InferInput {
  std::string id;
  fs::path depth;
  fs::path camera;
};

std::string id_of(const fs::path& depth) {
  std::string stem = depth.stem().string();
  const std::string suffix = "_depth";
  if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
    stem.resize(stem.size() - suffix.size());
  return stem;
}

SceneParse infer_one(const InferInput& in, const ModelSet& models) {
  const DepthImage depth = io::read_depth_png(in.depth);
  const SceneAnnotation cam = annotation_from_json(read_json(in.camera));
  return parse_depth_image(depth, cam.camera, cam.world_from_camera, models);
}

int cmd_infer(const Common& c, const std::string& depth, const std::string& camera, const std::string& models_dir,
              const std::string& templates_path, const std::string& out_path, std::ostream& out) {
  const auto templates = read_templates(templates_path);
  const ModelSet models = stage("load models", [&] { return load_models(models_dir, templates); });
  std::vector<InferInput> inputs;
  const bool dir_mode = fs::is_directory(depth);
  if (dir_mode) {
    for (const auto& e : fs::directory_iterator(depth)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 10 && name.ends_with("_depth.png")) {
        const std::string id = id_of(e.path());
        inputs.push_back({id, e.path(), e.path().parent_path() / (id + "_ann.json")});
      }
    }
    std::sort(inputs.begin(), inputs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    if (out_path.empty()) throw StageFailure("arguments", "--out DIR is required with a depth directory");
  } else {
    const fs::path p(depth);
    inputs.push_back({id_of(p), p, camera.empty() ? p.parent_path() / (id_of(p) + "_ann.json") : fs::path(camera)});
  }
  std::vector<SceneParse> parses(inputs.size());
  stage("infer", [&] {
    parallel_for(inputs.size(), c.jobs, [&](std::size_t i) {
      try {
        parses[i] = infer_one(inputs[i], models);
      } catch (const std::exception& e) {
        throw std::runtime_error(inputs[i].id + ": " + e.what());
      }
    });
    return 0;
  });
  if (dir_mode) {
    fs::create_directories(out_path);
    int rejected = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      io::write_text(fs::path(out_path) / (inputs[i].id + ".json"), to_json(parses[i]).dump(2) + "\n");
      rejected += parses[i].rejected;
    }
    out << "parsed " << inputs.size() << " images (" << rejected << " rejected) into " << out_path << "\n";
  } else {
    const std::string text = to_json(parses[0]).dump(2) + "\n";
    if (out_path.empty())
      out << text;
    else
      io::write_text(out_path, text);
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& dataset, const std::string& split, const std::string& models_dir,
             const std::string& parses_dir, const std::string& templates_path, const std::string& out_path,
             const std::string& text_path, const std::string& csv_path, bool icp, std::ostream& out) {
  const auto templates = read_templates(templates_path);
  const fs::path src = require_dir(dataset, "--dataset");
  auto loaded = stage("load", [&] { return load_splits(src, split_list(split), c.jobs); });
  std::vector<EvalScene> scenes;
  for (auto& s : loaded) scenes.push_back({s.id, std::move(s.depth), std::move(s.annotation)});
  std::map<std::string, SceneParse> parses;
  if (!parses_dir.empty()) {
    parses = stage("load parses", [&] {
      std::map<std::string, SceneParse> m;
      for (const auto& s : scenes) m[s.id] = scene_parse_from_json(read_json(fs::path(parses_dir) / (s.id + ".json")));
      return m;
    });
  } else {
    if (models_dir.empty()) throw StageFailure("arguments", "either --models or --parses is required");
    const ModelSet models = stage("load models", [&] { return load_models(models_dir, templates); });
    parses = stage("infer", [&] { return run_inference(models, scenes, c.jobs); });
  }
  EvalOptions opt;
  opt.jobs = c.jobs;
  opt.icp_baseline = icp;
  std::vector<EvalScene> reference;
  if (icp) {
    auto train = stage("load", [&] { return load_splits(src, {"train"}, c.jobs); });
    for (auto& s : train) reference.push_back({s.id, std::move(s.depth), std::move(s.annotation)});
  }
  const EvalReport report = stage("evaluate", [&] { return evaluate_parses(parses, scenes, templates, opt, reference); });
  const std::string json = to_json(report).dump(2) + "\n";
  if (out_path.empty())
    out << json;
  else
    io::write_text(out_path, json);
  if (!text_path.empty()) io::write_text(text_path, format_report(report));
  if (!csv_path.empty()) io::write_text(csv_path, pr_curves_csv(report));
  if (!out_path.empty()) out << format_report(report);
  return 0;
}

std::string color_of(const std::string& category) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
  return palette[fnv1a64(category) % (sizeof(palette) / sizeof(palette[0]))];
}

std::string top_view_svg(const SceneParse& parse, const SceneAnnotation* gt, double min_score) {
  struct Item {
    OrientedBox3 box;
    std::string category;
    bool dashed;
  };
  std::vector<Item> items;
  for (const auto& a : parse.anchors)
    if (!a.outside && a.existence >= min_score && a.category != "floor" && a.category != "ceiling")
      items.push_back({a.box, a.category, false});
  if (gt)
    for (const auto& o : gt->objects)
      if (o.category != "floor" && o.category != "ceiling") items.push_back({o.box, o.category, true});
  double lo_x = -1, hi_x = 1, lo_y = 0, hi_y = 2;
  for (const auto& it : items)
    for (const auto& p : it.box.footprint()) {
      lo_x = std::min(lo_x, p.x());
      hi_x = std::max(hi_x, p.x());
      lo_y = std::min(lo_y, p.y());
      hi_y = std::max(hi_y, p.y());
    }
  const double scale = 100.0, pad = 20.0;
  const double w = (hi_x - lo_x) * scale + 2 * pad, h = (hi_y - lo_y) * scale + 2 * pad;
  const auto sx = [&](double x) { return pad + (x - lo_x) * scale; };
  const auto sy = [&](double y) { return pad + (hi_y - y) * scale; };
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << " " << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<circle cx=\"" << sx(0) << "\" cy=\"" << sy(0) << "\" r=\"4\" fill=\"black\"/>\n";
  for (const auto& it : items) {
    os << "<polygon points=\"";
    for (const auto& p : it.box.footprint()) os << sx(p.x()) << "," << sy(p.y()) << " ";
    os << "\" fill=\"none\" stroke=\"" << color_of(it.category) << "\" stroke-width=\"2\""
       << (it.dashed ? " stroke-dasharray=\"6,4\"" : "") << "><title>" << it.category << "</title></polygon>\n";
  }
  double ly = pad;
  std::map<std::string, bool> seen;
  for (const auto& it : items) {
    if (seen[it.category]) continue;
    seen[it.category] = true;
    os << "<text x=\"" << w - pad << "\" y=\"" << ly << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << color_of(it.category) << "\">" << it.category << "</text>\n";
    ly += 13;
  }
  os << "</svg>\n";
  return os.str();
}

int cmd_plot(const std::string& parse_path, const std::string& ann_path, const std::string& report_path,
             const std::string& svg_path, const std::string& csv_path, double min_score, std::ostream& out) {
  if (parse_path.empty() && report_path.empty())
    throw StageFailure("arguments", "plot needs --parse and/or --report");
  if (!parse_path.empty()) {
    if (svg_path.empty()) throw StageFailure("arguments", "--svg is required with --parse");
    const SceneParse parse = stage("load parse", [&] { return scene_parse_from_json(read_json(parse_path)); });
    std::optional<SceneAnnotation> gt;
    if (!ann_path.empty()) gt = stage("load annotation", [&] { return annotation_from_json(read_json(ann_path)); });
    io::write_text(svg_path, top_view_svg(parse, gt ? &*gt : nullptr, min_score));
    out << "wrote " << svg_path << "\n";
  }
  if (!report_path.empty()) {
    if (csv_path.empty()) throw StageFailure("arguments", "--csv is required with --report");
    const EvalReport r = stage("load report", [&] { return eval_report_from_json(read_json(report_path)); });
    io::write_text(csv_path, pr_curves_csv(r));
    out << "wrote " << csv_path << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DeepContext: context-encoding 3D scene parsing from depth images", "deepcontext"};
  app.require_subcommand(1);
  const std::string data_dir = default_data_dir();

  Common c;
  std::string dataset = data_dir, out_dir, templates, models, repo, splits, camera, depth, parses, text, csv;
  std::string parse, ann, report, svg, split = "test";
  std::vector<std::string> stages;
  std::size_t n_scenes = 400;
  int copies = 0;
  bool no_hybrid = false, icp = false;
  double min_score = 0.5;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic annotated dataset");
  add_common(gen, c, false);
  gen->add_option("--out", out_dir, "Dataset directory (default: $DEEPCONTEXT_DATA_DIR)");
  gen->add_option("--scenes", n_scenes, "Number of scenes")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write hybrid copies of dataset scenes");
  add_common(synth, c, false);
  synth->add_option("--dataset", dataset, "Source dataset (default: $DEEPCONTEXT_DATA_DIR)");
  synth->add_option("--out", out_dir, "Output dataset directory")->required();
  synth->add_option("--repo", repo, "Directory of <category>/<id>.obj models (default: procedural models)");
  synth->add_option("--copies", copies, "Hybrid copies per scene (default: 20 or the config's multiplier)");
  synth->add_option("--splits", splits, "Comma separated splits to synthesize")->default_val("train");

  auto* learn = app.add_subcommand("learn-templates", "Learn the four scene templates from annotations");
  add_common(learn, c, false);
  learn->add_option("--dataset", dataset, "Dataset directory (default: $DEEPCONTEXT_DATA_DIR)");
  learn->add_option("--out", out_dir, "Output templates JSON")->required();
  learn->add_option("--splits", splits, "Comma separated splits to learn from")->default_val("train,val");

  auto* train = app.add_subcommand("train", "Staged training; each stage can be run separately");
  add_common(train, c, true);
  train->add_option("--dataset", dataset, "Dataset directory (default: $DEEPCONTEXT_DATA_DIR)");
  train->add_option("--templates", templates, "Templates JSON")->required();
  train->add_option("--out", out_dir, "Models directory")->required();
  train->add_option("--stage", stages, "Stage(s) to run: classification, rotation, translation, context")
      ->check(CLI::IsMember(kStageOrder));
  train->add_option("--repo", repo, "Directory of <category>/<id>.obj models (default: procedural models)");
  train->add_flag("--no-hybrid", no_hybrid, "Pretrain on the base scenes instead of hybrid copies");
  train->add_option("--splits", splits, "Comma separated splits to train on")->default_val("train,val");

  auto* infer = app.add_subcommand("infer", "Parse a depth image or a directory of them");
  add_common(infer, c, true);
  infer->add_option("--depth", depth, "Depth PNG (millimeters) or a directory of <id>_depth.png")->required();
  infer->add_option("--camera", camera, "Annotation or camera JSON (default: sibling <id>_ann.json)");
  infer->add_option("--models", models, "Models directory")->required();
  infer->add_option("--templates", templates, "Templates JSON")->required();
  infer->add_option("--out", out_dir, "Output JSON file, or directory in directory mode (default: stdout)");

  auto* eval = app.add_subcommand("eval", "Evaluate parses against a dataset split");
  add_common(eval, c, true);
  eval->add_option("--dataset", dataset, "Dataset directory (default: $DEEPCONTEXT_DATA_DIR)");
  eval->add_option("--split", split, "Comma separated splits to evaluate")->capture_default_str();
  eval->add_option("--models", models, "Models directory; inference runs on every scene");
  eval->add_option("--parses", parses, "Directory of <id>.json parses from infer, instead of --models");
  eval->add_option("--templates", templates, "Templates JSON")->required();
  eval->add_option("--out", out_dir, "Report JSON (default: stdout)");
  eval->add_option("--text", text, "Also write the plain-text table here");
  eval->add_option("--csv", csv, "Also write PR curves as CSV here");
  eval->add_flag("--icp", icp, "Run the exhaustive point-cloud alignment baseline against the train split");

  auto* plot = app.add_subcommand("plot", "Top-view SVG of a parse and PR curve CSV of a report");
  plot->add_option("--parse", parse, "SceneParse JSON");
  plot->add_option("--annotation", ann, "Ground-truth annotation drawn dashed");
  plot->add_option("--svg", svg, "Output SVG");
  plot->add_option("--min-score", min_score, "Existence threshold for drawn detections")->capture_default_str();
  plot->add_option("--report", report, "EvalReport JSON");
  plot->add_option("--csv", csv, "Output PR curve CSV");

  app.failure_message(CLI::FailureMessage::help);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(c, out_dir.empty() ? data_dir : out_dir, n_scenes, out);
    if (*synth) return cmd_synth(c, dataset, out_dir, repo, copies, splits, out);
    if (*learn) return cmd_learn(c, dataset, out_dir, splits, out);
    if (*train) return cmd_train(c, dataset, templates, out_dir, stages, repo, no_hybrid, splits, out);
    if (*infer) return cmd_infer(c, depth, camera, models, templates, out_dir, out);
    if (*eval) return cmd_eval(c, dataset, split, models, parses, templates, out_dir, text, csv, icp, out);
    if (*plot) return cmd_plot(parse, ann, report, svg, csv, min_score, out);
  } catch (const StageOrderError& e) {
    err << "deepcontext: train: stage order: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "deepcontext: " << args.front() << ": " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace deepcontext::cli
