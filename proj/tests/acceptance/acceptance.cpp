// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "histo/augment/augment.hpp"
#include "histo/cli/cli.hpp"
#include "histo/dnn/loss.hpp"
#include "histo/dnn/train.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/patches/extract.hpp"
#include "histo/patches/manifest.hpp"
#include "histo/segmentation/segment.hpp"
#include "histo/text.hpp"
#include "histo/tissue/mask.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "toy_data.hpp"

namespace fs = std::filesystem;
using namespace histo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// 1 -----------------------------------------------------------------------------
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  const auto spec = dnn::NetworkSpec::toy(2, {1}, 4);
  const auto params = dnn::init_xavier_uniform<double>(spec, 7);
  Rng rng(11);
  std::vector<double> input(2 * 8 * 8 * 3);
  for (auto& x : input) x = rng.uniform(-1.0, 1.0);
  const auto net = testing::check_network_gradients(spec, params, input, {1, 3}, 8, 8, 1e-5);

  std::vector<double> logits(8 * 4);
  for (auto& x : logits) x = rng.uniform(-3.0, 3.0);
  const std::vector<int> labels{0, 1, 2, 3, 3, 2, 1, 0};
  const double loss_err = std::max(
      testing::check_loss_gradient(logits, labels, dnn::ClassWeights::uniform(4)),
      testing::check_loss_gradient(logits, labels, dnn::ClassWeights{{0.61, 3.30, 4.23, 0.91}}));
  const double secs = seconds_since(t0);
  return {net.max_relative_error < 1e-4 && loss_err < 1e-6 && secs < 60.0,
          "network max rel err " + fmt(net.max_relative_error, 3) + " over " + std::to_string(net.checked) +
              " params; loss layer " + fmt(loss_err, 3) + "; " + fmt(secs, 3) + " s"};
}

// 2 -----------------------------------------------------------------------------
Outcome class_weight_formula() {
  using Big = boost::multiprecision::cpp_dec_float_50;
  const std::vector<std::uint64_t> counts{13280, 903, 354, 9869};
  const double stated[4] = {0.6086, 3.2968, 4.2333, 0.9055};
  const auto w = dnn::class_weights(counts);
  Big n = 0;
  for (auto c : counts) n += c;
  bool ok = true;
  std::string got;
  for (int c = 0; c < 4; ++c) {
    const double oracle = static_cast<double>(boost::multiprecision::log(n / Big(counts[c])));
    ok = ok && std::abs(w.w[c] - oracle) < 1e-12 && std::abs(w.w[c] - stated[c]) < 1e-3;
    got += (c ? ", " : "") + fmt(w.w[c], 5);
  }
  return {ok, "weights (" + got + ")"};
}

// 3 -----------------------------------------------------------------------------
Outcome resolution_arithmetic() {
  const RasterImage frame(2048, 1536, 3, 0.42);
  const auto small = resample(frame, 10.0);
  ExtractionConfig e;
  e.patch_physical_um = 330.0;
  e.patch_pixel_px = 157;
  const double ds = extraction_downsample(e, 0.467);
  SegmentConfig s;
  s.downsample = 4.5;
  s.patch_pixel_px = 157;
  s.stride = 32;
  const auto grid = segmentation_grid(RasterImage(4096, 4096, 3, 0.467), s);
  const bool ok = small.width() == 205 && small.height() == 154 && std::abs(ds - 4.5) <= 1e-3 &&
                  grid.spacing == 144.0;
  return {ok, std::to_string(small.width()) + "x" + std::to_string(small.height()) + ", downsample " +
                  fmt(ds, 6) + ", grid spacing " + fmt(grid.spacing) + " level-0 px"};
}

// 4 -----------------------------------------------------------------------------
DatasetManifest synthetic_manifest(const ClassCounts& counts, std::optional<ClassCounts> val = std::nullopt) {
  DatasetManifest m;
  std::vector<int> tags;
  auto add = [&](const ClassCounts& cc, int tag) {
    for (int c = 0; c < kNumClasses; ++c)
      for (std::uint64_t i = 0; i < cc[c]; ++i) {
        m.add({"s", {double(i), double(c)}, label_from_code(c), 330.0, 157, "p", ""});
        tags.push_back(tag);
      }
  };
  add(counts, kTrainTag);
  if (val) {
    add(*val, kValTag);
    m.split = SplitAssignment{SplitKind::kTrainVal, 2, tags, false};
  }
  return m;
}

bool counts_survive_round_trip(const DatasetManifest& m) {
  const auto text = render_manifest(m);
  if (parse_manifest(text).per_class_counts() != m.per_class_counts()) return false;
  // A manifest whose declared counts disagree with its records is rejected.
  auto tampered = text;
  const auto pos = tampered.find("\nnormal=");
  if (pos == std::string::npos) return false;
  tampered.insert(pos + 8, "1");
  try {
    (void)parse_manifest(tampered);
    return false;
  } catch (const Error&) {
    return true;
  }
}

Outcome bookkeeping() {
  const auto a = synthetic_manifest({119705, 0, 0, 101347}, ClassCounts{30240, 0, 0, 22980});
  const auto sa = count_split(a);
  const bool a_ok = sa.total() == 274272 && sa.train == ClassCounts{119705, 0, 0, 101347} &&
                    sa.val == ClassCounts{30240, 0, 0, 22980} && total(a.per_class_counts()) == 274272 &&
                    counts_survive_round_trip(a);
  const auto b = synthetic_manifest({13280, 903, 354, 9869});
  const auto b2 = synthetic_manifest({25230, 1723, 1759, 12794});
  const bool b_ok = total(b.per_class_counts()) == 24406 && total(b2.per_class_counts()) == 41506 &&
                    counts_survive_round_trip(b) && counts_survive_round_trip(b2);
  return {a_ok && b_ok, "274,272 = " + std::to_string(sa.total()) + "; 24,406 = " +
                            std::to_string(total(b.per_class_counts())) + "; 41,506 = " +
                            std::to_string(total(b2.per_class_counts()))};
}

// 5 -----------------------------------------------------------------------------
Outcome median_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(5);
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto m = testing::random_label_map(16, 16, gen);
    for (int w : {3, 5}) mismatches += median_filter(m, w).cells != testing::brute_median(m, w).cells;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 30.0,
          std::to_string(mismatches) + " mismatches over 2000 filtered maps; " + fmt(secs, 3) + " s"};
}

// 6 -----------------------------------------------------------------------------
Outcome dilation_oracle() {
  std::mt19937_64 gen(6);
  int mismatches = 0, erased = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto m = testing::random_label_map(16, 16, gen);
    const auto d = priority_dilate(m, 1);
    mismatches += d.cells != testing::brute_priority_dilate(m, 1).cells;
    for (std::size_t i = 0; i < m.cells.size(); ++i) erased += m.cells[i] != 0 && d.cells[i] == 0;
  }
  return {mismatches == 0 && erased == 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(erased) + " tumour cells erased"};
}

// 7 -----------------------------------------------------------------------------
Outcome otsu_oracle() {
  std::mt19937_64 gen(7);
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    kern::Histogram256 h{};
    if (rep % 2 == 0) {
      for (auto& b : h) b = gen() % 4 == 0 ? 0 : gen() % 500;
    } else {
      std::normal_distribution<double> lo(30 + gen() % 80, 4 + gen() % 25), hi(140 + gen() % 100, 4 + gen() % 30);
      for (int i = 0, n = 500 + static_cast<int>(gen() % 5000); i < n; ++i)
        ++h[std::clamp(static_cast<int>(i % 3 ? lo(gen) : hi(gen)), 0, 255)];
    }
    mismatches += otsu_threshold(h) != testing::brute_otsu(h);
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 histograms"};
}

// 8 -----------------------------------------------------------------------------
Outcome segmentation_plumbing() {
  std::mt19937_64 gen(8);
  int mismatches = 0;
  std::size_t cells = 0;
  for (int rep = 0; rep < 20; ++rep) {
    synth::SlideRecipe recipe;
    recipe.width = 320 + static_cast<int>(gen() % 400);
    recipe.height = 320 + static_cast<int>(gen() % 400);
    recipe.region_radius = std::min(recipe.width, recipe.height) / (7.0 + gen() % 4);
    const auto s = synth::make_slide(recipe, "p" + std::to_string(rep), gen());
    SegmentConfig cfg;
    cfg.downsample = std::array{1.5, 2.0, 3.0, 4.5}[gen() % 4];
    cfg.patch_pixel_px = 16;
    cfg.stride = std::array{2, 4, 8}[gen() % 3];
    cfg.batch_size = 37;
    testing::GroundTruthBackend backend(s.annotations, cfg.patch_pixel_px * cfg.downsample * s.slide.resolution(),
                                        cfg.patch_pixel_px);
    const auto map = segment(s.slide, backend, cfg, "p");
    const auto truth = rasterize(s.annotations, segmentation_grid(s.slide, cfg), cfg.stride);
    mismatches += map.width != truth.width || map.height != truth.height || map.cells != truth.cells;
    cells += map.cells.size();
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 20 slides differ (" + std::to_string(cells) + " cells)"};
}

// 9 -----------------------------------------------------------------------------
Outcome toy_training() {
  const auto t0 = Clock::now();
  const auto spec = dnn::NetworkSpec::toy();
  const auto train_set = testing::toy_patches(10, 32, 1);
  const auto val_set = testing::toy_patches(5, 32, 2);
  dnn::TrainOptions o;
  o.schedule.batch_size = 32;
  o.schedule.shuffle_per_epoch = true;
  o.schedule.phases = {{dnn::PhaseScope::kHeadOnly, 10, 1e-2}, {dnn::PhaseScope::kFullNetwork, 190, 1e-2}};
  o.augmentation = AugmentationConfig::identity();
  o.augmentation.flips = true;
  o.augmentation.seed = 3;
  o.stats = compute_dataset_stats(std::span<const RasterImage>(train_set.images));
  o.seed = 4;
  std::optional<int> perfect;
  o.on_epoch = [&](const dnn::EpochMetrics& e) {
    if (!perfect && e.train_acc == 1.0) perfect = e.epoch;
  };
  const auto r = dnn::train<float>(spec, dnn::init_xavier_uniform<float>(spec, 5), train_set, val_set, o);

  // Checkpoint contract against the log.
  double best = -1.0;
  int first = -1;
  for (const auto& e : r.log)
    if (*e.val_acc > best) best = *e.val_acc, first = e.epoch;
  const double replay = dnn::accuracy<float>(spec, r.best, val_set, o.stats);
  const auto parsed = dnn::parse_metrics(dnn::render_metrics(r.log));
  const bool phases = r.log.front().scope == dnn::PhaseScope::kHeadOnly &&
                      r.log.back().scope == dnn::PhaseScope::kFullNetwork;
  const bool checkpoint = r.best_epoch == first && r.best_val_acc && *r.best_val_acc == best &&
                          replay == best && parsed.size() == r.log.size() &&
                          parsed[static_cast<std::size_t>(first)].val_acc == r.best_val_acc;
  const double secs = seconds_since(t0);
  return {perfect.has_value() && phases && checkpoint && secs < 300.0,
          (perfect ? "100% train accuracy at epoch " + std::to_string(*perfect) : std::string("never reached 100%")) +
              "; best val " + fmt(best) + " at epoch " + std::to_string(first) + " (replayed " + fmt(replay) +
              ")" + (checkpoint ? "" : " CHECKPOINT MISMATCH") + "; " + fmt(secs, 3) + " s"};
}

// 10 ----------------------------------------------------------------------------
RasterImage rotate_cw(const RasterImage& img) {
  RasterImage out(img.height(), img.width(), img.channels(), img.resolution());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.height() - 1 - y, x, c) = img.at(x, y, c);
  return out;
}

Outcome augmentation_invariants() {
  std::mt19937_64 gen(10);
  bool identity = true, flips = true, rotations = true;
  for (int rep = 0; rep < 50; ++rep) {
    const int size = 5 + static_cast<int>(gen() % 40);
    RasterImage img(size, size, 3, 1.0);
    for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(gen());
    Rng rng(gen());
    identity = identity && apply(img, draw_sample(AugmentationConfig::identity(), rng, size, size)) == img;
    AugmentationSample h, v;
    h.flip_h = true;
    v.flip_v = true;
    flips = flips && apply(apply(img, h), h) == img && apply(apply(img, v), v) == img;
    // Each multiple of 90 degrees must equal an exact pixel permutation.
    auto cw = img, ccw = img;
    for (int k = 1; k < 4; ++k) {
      cw = rotate_cw(cw);
      ccw = rotate_cw(rotate_cw(rotate_cw(ccw)));
      AugmentationSample r;
      r.angle = 90.0 * k;
      const auto out = apply(img, r);
      rotations = rotations && (out == cw || out == ccw);
    }
  }
  AugmentationConfig cfg;
  Rng rng(2018);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(draw_sample(cfg, rng, 157, 157).scale);
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - 0.5) / 1.5;
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  p = std::clamp(p, 0.0, 1.0);
  const bool range = xs.front() >= 0.5 && xs.back() <= 2.0;
  return {identity && flips && rotations && range && p > 0.01,
          std::string("identity ") + (identity ? "exact" : "BROKEN") + ", double flips " + (flips ? "exact" : "BROKEN") +
              ", 90-degree rotations " + (rotations ? "exact" : "BROKEN") + ", scale KS D=" + fmt(d, 3) +
              " p=" + fmt(p, 3)};
}

// 11 / 12 -----------------------------------------------------------------------
int cli(const fs::path& config, const fs::path& out, const std::string& command) {
  std::ostringstream sink;
  const int code = histo::cli::run({"--config", config.string(), "--threads", "1", "--out", out.string(), command},
                                   sink, std::cerr);
  if (code != 0) std::cerr << "command '" << command << "' exited with " << code << "\n" << sink.str();
  return code;
}

std::string file_bytes(const fs::path& p) { return fs::exists(p) ? text::read_file(p) : std::string("<missing>"); }

struct PipelineRuns {
  bool ran = false;
  double first_run_seconds = 0.0;
  double full_seconds = 0.0;
  int failures = 0;
  fs::path a, b;
};

PipelineRuns run_fixture_pipeline(const fs::path& fixture, const fs::path& scratch) {
  PipelineRuns r;
  r.a = scratch / "run_a";
  r.b = scratch / "run_b";
  fs::remove_all(r.a);
  fs::remove_all(r.b);
  const auto config = fixture / "config.json";
  const std::vector<std::string> core{"extract", "split", "stats", "train", "segment", "postprocess"};
  auto t0 = Clock::now();
  for (const auto& c : core) r.failures += cli(config, r.a, c) != 0;
  r.first_run_seconds = seconds_since(t0);
  for (const auto& c : {"evaluate", "crossval", "report"}) r.failures += cli(config, r.a, c) != 0;
  r.full_seconds = seconds_since(t0);
  for (const auto& c : core) r.failures += cli(config, r.b, c) != 0;
  r.ran = true;
  return r;
}

Outcome determinism(const PipelineRuns& runs, const std::vector<std::string>& slides) {
  std::vector<std::string> files{"manifest.txt", "weights.hpdn", "metrics.txt"};
  for (const auto& s : slides) {
    files.push_back("segmentation/" + s + ".png");
    files.push_back("segmentation/" + s + ".png.meta");
    files.push_back("postprocessed/" + s + ".png");
  }
  int differing = 0;
  std::string which;
  for (const auto& f : files)
    if (file_bytes(runs.a / f) != file_bytes(runs.b / f) || file_bytes(runs.a / f) == "<missing>") {
      ++differing;
      which += " " + f;
    }
  // Patch payloads are named by content hash, so equal manifests imply equal
  // names; compare their bytes too.
  const auto m = load_manifest(runs.a / "manifest.txt");
  int payloads = 0;
  for (const auto& r : m.records()) payloads += file_bytes(runs.a / r.path) != file_bytes(runs.b / r.path);
  return {runs.failures == 0 && differing == 0 && payloads == 0,
          std::to_string(files.size() - differing) + "/" + std::to_string(files.size()) + " artifacts and " +
              std::to_string(m.size() - payloads) + "/" + std::to_string(m.size()) + " patch payloads identical" +
              (which.empty() ? "" : "; differing:" + which)};
}

Outcome end_to_end(const PipelineRuns& runs) {
  const bool outputs = fs::exists(runs.a / "report.txt") && fs::exists(runs.a / "crossval_report.txt");
  return {runs.failures == 0 && outputs && runs.full_seconds < 300.0,
          "extract..postprocess " + fmt(runs.first_run_seconds, 3) + " s; with evaluate, crossval, report " +
              fmt(runs.full_seconds, 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path fixture = argc > 1 ? fs::path(argv[1]) : fs::path(HISTO_FIXTURE_DIR);
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "histopipe-acceptance";

  int failed = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << title << " -- " << o.detail
              << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "class-weight formula", class_weight_formula);
  report(3, "resolution arithmetic", resolution_arithmetic);
  report(4, "bookkeeping identities", bookkeeping);
  report(5, "median-filter oracle", median_oracle);
  report(6, "dilation-priority oracle", dilation_oracle);
  report(7, "Otsu oracle", otsu_oracle);
  report(8, "segmentation plumbing", segmentation_plumbing);
  report(9, "toy training", toy_training);
  report(10, "augmentation invariants", augmentation_invariants);

  PipelineRuns runs;
  try {
    runs = run_fixture_pipeline(fixture, scratch);
  } catch (const std::exception& e) {
    std::cerr << "fixture pipeline: " << e.what() << "\n";
  }
  report(11, "determinism", [&] { return runs.ran ? determinism(runs, {"slide_a", "slide_b"}) : Outcome{false, "pipeline did not run"}; });
  report(12, "end-to-end fixture run", [&] { return runs.ran ? end_to_end(runs) : Outcome{false, "pipeline did not run"}; });

  std::cout << (failed == 0 ? "all 12 criteria pass" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
