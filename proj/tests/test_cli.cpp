#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "deepcontext/eval.hpp"
#include "deepcontext/io.hpp"

using namespace deepcontext;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small everything: a quick end-to-end pass over the commands.
const char* kTinyConfig = R"({
  "micro_batch": 2, "accum": 1,
  "trunk": {"channels": [2, 2, 4], "hidden": 8},
  "context": {"roi_channels": [2, 2], "hidden": 4},
  "synthesis": {"multiplier": 2},
  "schedule": {"classification": {"pretrain_steps": 2, "finetune_steps": 1},
               "rotation": {"pretrain_steps": 2, "finetune_steps": 1},
               "translation": {"pretrain_steps": 2, "finetune_steps": 1},
               "context": {"pretrain_steps": 2, "finetune_steps": 1}}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  CHECK(run({"gen", "--bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--out", "x"}).code == 2);  // --templates missing
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("commands run end to end on a tiny dataset") {
  const fs::path dir = fs::temp_directory_path() / "dc_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = (dir / "data").string(), tmpl = (dir / "templates.json").string(),
                    models = (dir / "models").string(), cfg = (dir / "tiny.json").string();
  io::write_text(cfg, kTinyConfig);

  REQUIRE(run({"gen", "--out", data, "--scenes", "16", "--seed", "3"}).code == 0);
  const auto learn = run({"learn-templates", "--dataset", data, "--out", tmpl, "--splits", "train,val,test"});
  REQUIRE(learn.code == 0);

  const auto early = run({"train", "--dataset", data, "--templates", tmpl, "--out", models, "--stage", "context"});
  CHECK(early.code == 1);
  CHECK(early.err.find("classification") != std::string::npos);

  const auto train = run({"train", "--dataset", data, "--templates", tmpl, "--out", models, "--config", cfg,
                          "--splits", "train,val,test", "--seed", "5"});
  REQUIRE(train.code == 0);
  CHECK(fs::exists(fs::path(models) / "training_report.json"));

  // An untrained classifier rejects: still a successful parse.
  const auto manifest = nlohmann::json::parse(io::read_text(fs::path(data) / "manifest.json"));
  const std::string id = manifest.at("scenes").at(0).at("id");
  const auto infer = run({"infer", "--depth", (fs::path(data) / "scenes" / (id + "_depth.png")).string(), "--models",
                          models, "--templates", tmpl});
  REQUIRE(infer.code == 0);
  const SceneParse p = scene_parse_from_json(nlohmann::json::parse(infer.out));
  CHECK(p.rejected);

  const std::string parses = (dir / "parses").string();
  CHECK(run({"infer", "--depth", (fs::path(data) / "scenes").string(), "--models", models, "--templates", tmpl})
            .code == 1);
  REQUIRE(run({"infer", "--depth", (fs::path(data) / "scenes").string(), "--models", models, "--templates", tmpl,
               "--out", parses})
              .code == 0);

  const std::string report = (dir / "report.json").string();
  const auto ev = run({"eval", "--dataset", data, "--split", "train,val,test", "--parses", parses, "--templates", tmpl,
                       "--out", report, "--csv", (dir / "pr.csv").string()});
  REQUIRE(ev.code == 0);
  const EvalReport r = eval_report_from_json(nlohmann::json::parse(io::read_text(report)));
  CHECK(r.num_scenes == static_cast<int>(manifest.at("scenes").size()));
  CHECK(r.understanding.rr <= r.understanding.rg);
  CHECK(r.rejection_rate == doctest::Approx(1.0));

  const auto ev2 = run({"eval", "--dataset", data, "--split", "train,val,test", "--models", models, "--templates",
                        tmpl});
  REQUIRE(ev2.code == 0);
  CHECK(nlohmann::json::parse(ev2.out) == nlohmann::json::parse(io::read_text(report)));

  const std::string svg = (dir / "top.svg").string();
  CHECK(run({"plot", "--parse", (fs::path(parses) / (id + ".json")).string(), "--annotation",
             (fs::path(data) / "scenes" / (id + "_ann.json")).string(), "--svg", svg})
            .code == 0);
  CHECK(io::read_text(svg).find("<svg") != std::string::npos);
  CHECK(run({"eval", "--dataset", (dir / "missing").string(), "--templates", tmpl, "--models", models}).code == 1);
  fs::remove_all(dir);
}

}
