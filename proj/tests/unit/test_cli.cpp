#include <doctest.h>

#include <sstream>

#include "histo/cli/cli.hpp"
#include "histo/cli/config.hpp"
#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/patches/manifest.hpp"
#include "histo/segmentation/segment.hpp"
#include "histo/text.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace histo;
using histo::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Two small synthetic slides plus a config; `segment_extra` is appended to
/// the segment section.
std::filesystem::path write_fixture(const TempDir& dir, const std::string& segment_extra = "") {
  synth::SlideRecipe recipe;
  recipe.width = recipe.height = 384;
  recipe.region_radius = 45;
  for (const char* id : {"a", "b"}) {
    const auto s = synth::make_slide(recipe, id, text::fnv1a(id));
    write_raster(dir / (std::string(id) + ".png"), s.slide);
    text::write_file(dir / (std::string(id) + ".txt"), render_annotations(s.annotations));
  }
  const std::string cfg = R"({
  "out": "run", "seed": 5,
  "slides": [{"id": "a", "image": "a.png", "annotations": "a.txt"},
             {"id": "b", "image": "b.png", "annotations": "b.txt"}],
  "extract": {"patch_physical_um": 14.944, "patch_pixel_px": 16, "spacing_level0": 24,
              "mask": {"downsample": 4}},
  "network": {"preset": "toy", "blocks": [1], "initial_channels": 8},
  "train": {"batch_size": 16, "phases": [{"scope": "head_only", "epochs": 1, "lr": 0.01},
                                         {"scope": "full_network", "epochs": 1, "lr": 0.01}]},
  "crossval": {"folds": 2},
  "segment": {"downsample": 2, "patch_pixel_px": 16, "stride": 8)" + segment_extra + "}\n}";
  text::write_file(dir / "config.json", cfg);
  return dir / "config.json";
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  CHECK(run_cli({"--version"}).out.find(cli::kVersion) != std::string::npos);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"--config", "x.json"}).code == cli::kExitUsage);  // no command
  CHECK(run_cli({"--config", "x.json", "frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"--config", "x.json", "--threads", "-2", "extract"}).code == cli::kExitUsage);
}

TEST_CASE("config problems: missing file is IO, bad content is a usage error naming the key") {
  TempDir dir("cli-config");
  CHECK(run_cli({"--config", (dir / "absent.json").string(), "extract"}).code == cli::kExitIo);

  text::write_file(dir / "broken.json", "{ \"seed\": ");
  CHECK(run_cli({"--config", (dir / "broken.json").string(), "extract"}).code == cli::kExitUsage);

  text::write_file(dir / "typo.json", R"({"extract": {"patch_size_um": 330}})");
  const auto typo = run_cli({"--config", (dir / "typo.json").string(), "extract"});
  CHECK(typo.code == cli::kExitUsage);
  CHECK(typo.err.find("extract.patch_size_um") != std::string::npos);

  text::write_file(dir / "type.json", R"({"seed": "seven"})");
  CHECK(run_cli({"--config", (dir / "type.json").string(), "split"}).code == cli::kExitUsage);

  text::write_file(dir / "enum.json", R"({"split": {"mode": "random"}})");
  const auto e = run_cli({"--config", (dir / "enum.json").string(), "split"});
  CHECK(e.code == cli::kExitUsage);
  CHECK(e.err.find("stratified") != std::string::npos);

  text::write_file(dir / "empty.json", "// nothing configured\n{}");
  CHECK(run_cli({"--config", (dir / "empty.json").string(), "extract"}).code == cli::kExitUsage);
}

TEST_CASE("config parsing fills defaults and resolves paths against the config directory") {
  const auto c = cli::parse_run_config(R"({"slides": [{"image": "s/x.png"}], "seed": 3})", "/data/exp");
  CHECK(c.seed == 3);
  CHECK(c.out == std::filesystem::path("/data/exp/run"));
  REQUIRE(c.slides.size() == 1);
  CHECK(c.slides[0].id == "x");
  CHECK(c.slides[0].image == std::filesystem::path("/data/exp/s/x.png"));
  CHECK(c.extract.patch_pixel_px == 157);
  CHECK(c.network == dnn::NetworkSpec::toy());
  CHECK_THROWS_AS(cli::parse_run_config(R"({"slides": [{"id": "a,b", "image": "x.png"}]})", "/"), Error);
}

TEST_CASE("commands out of order fail with IO or data codes") {
  TempDir dir("cli-order");
  const auto cfg = write_fixture(dir).string();
  CHECK(run_cli({"--config", cfg, "split"}).code == cli::kExitIo);
  CHECK(run_cli({"--config", cfg, "postprocess"}).code == cli::kExitIo);
  CHECK(run_cli({"--config", cfg, "report"}).code == cli::kExitIo);
  REQUIRE(run_cli({"--config", cfg, "extract"}).code == 0);
  CHECK(run_cli({"--config", cfg, "train"}).code == cli::kExitData);  // no split yet
  REQUIRE(run_cli({"--config", cfg, "split"}).code == 0);
  CHECK(run_cli({"--config", cfg, "train"}).code == cli::kExitData);  // no stats yet
  CHECK(run_cli({"--config", cfg, "evaluate"}).code == cli::kExitData);
}

TEST_CASE("full command sequence writes every artifact") {
  TempDir dir("cli-run");
  const auto cfg = write_fixture(dir).string();
  for (const char* cmd : {"extract", "split", "stats", "train", "evaluate", "crossval", "segment", "postprocess",
                          "report"}) {
    const auto r = run_cli({"--config", cfg, "--threads", "1", cmd});
    INFO(cmd << ": " << r.err);
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "run" / "runs" / (std::string(cmd) + ".txt")));
  }
  const auto run = dir / "run";
  const auto m = load_manifest(run / "manifest.txt");
  CHECK(m.size() > 0);
  CHECK(m.split.has_value());
  CHECK(m.stats.has_value());
  for (const char* f : {"weights.hpdn", "metrics.txt", "evaluation.txt", "evaluation_report.txt",
                        "crossval_report.txt", "report.txt", "report_table.txt", "segmentation/a.png",
                        "postprocessed/b.png", "masks/a.png"})
    CHECK_MESSAGE(std::filesystem::exists(run / f), f);
  const auto rec = text::parse_key_value(text::read_file(run / "runs" / "train.txt"), "HISTOPIPE-RUN v1");
  CHECK(rec.get("seed") == "5");
  CHECK(rec.get("threads") == "1");
  CHECK(rec.get("config_hash").size() == 16);
  const auto map = import_label_map(run / "segmentation" / "a.png");
  CHECK(map.width == 24);  // 384 / 2 = 192 classifier px, stride 8
  CHECK(map.total_downsample == doctest::Approx(16.0));

  // --seed and --out override the config.
  const auto other = dir / "elsewhere";
  CHECK(run_cli({"--config", cfg, "--seed", "6", "--out", other.string(), "extract"}).code == 0);
  CHECK(load_manifest(other / "manifest.txt").seed == 6);
}

TEST_CASE("external process backend") {
  TempDir dir("cli-ext");
  text::write_file(dir / "classify.sh", "#!/bin/sh\nwhile read -r f; do echo '0 0 1 0'; done < \"$1/batch.txt\" > \"$1/probabilities.txt\"\n");
  const auto cfg =
      write_fixture(dir, ", \"use_mask\": false, \"backend\": \"external\", \"command\": \"sh '" + (dir / "classify.sh").string() + "'\"");
  const auto r = run_cli({"--config", cfg.string(), "segment"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto map = import_label_map(dir / "run" / "segmentation" / "b.png");
  for (auto c : map.cells) CHECK(c == 2);

  text::write_file(dir / "classify.sh", "#!/bin/sh\nexit 3\n");
  CHECK(run_cli({"--config", cfg.string(), "segment"}).code == cli::kExitData);
}
