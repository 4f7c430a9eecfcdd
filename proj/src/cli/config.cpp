#include "histo/cli/config.hpp"

#include <json.hpp>
#include <set>

#include "histo/error.hpp"
#include "histo/text.hpp"

namespace histo::cli {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  fail(ErrorKind::kConfig, "config " + where + ": " + what);
}

/// Typed access to one JSON object that remembers which keys were read, so
/// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_error(where_, "expected an object");
  }
  ~Section() = default;

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename V>
  void get(const char* key, V& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception&) {
      config_error(path(key), "has the wrong type");
    }
  }

  template <typename V>
  void get(const char* key, std::optional<V>& out) {
    if (!has(key)) return;
    V v;
    get(key, v);
    out = v;
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), path(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename E>
  void choice(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> options) {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) {
        out = value;
        return;
      }
      names += names.empty() ? name : std::string(", ") + name;
    }
    config_error(path(key), "'" + s + "' is not one of " + names);
  }

  /// Throws on the first key that was never looked at.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) config_error(path(key.c_str()), "unknown key");
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void parse_extract(Section s, RunConfig& c) {
  auto& e = c.extract;
  s.get("patch_physical_um", e.patch_physical_um);
  s.get("patch_pixel_px", e.patch_pixel_px);
  s.get("spacing_level0", e.spacing_level0);
  s.get("random_offset", c.random_offset);
  s.choice("background", e.background,
           {{"patch_level", BackgroundRule::kPatchLevel},
            {"coarse_grid", BackgroundRule::kCoarseGrid},
            {"none", BackgroundRule::kNone}});
  s.get("min_foreground_fraction", e.min_foreground_fraction);
  s.choice("unannotated", e.unannotated,
           {{"normal", UnannotatedPolicy::kNormal}, {"exclude", UnannotatedPolicy::kExclude}});
  s.get("context_margin_px", e.context_margin_px);
  s.get("require_annotations", e.require_annotations);
  if (s.has("mask")) {
    Section m = s.child("mask");
    m.get("enabled", c.mask.enabled);
    m.get("downsample", c.mask.downsample);
    m.get("threshold", c.mask.threshold);
    m.finish();
  }
  s.finish();
  if (!(e.patch_physical_um > 0.0) || e.patch_pixel_px <= 0)
    config_error("extract", "patch size must be positive");
  if (!(c.mask.downsample >= 1.0)) config_error("extract.mask.downsample", "must be >= 1");
}

void parse_augmentation(Section s, AugmentationConfig& a) {
  s.get("rotate", a.rotate);
  s.get("flips", a.flips);
  if (s.has("scale")) {
    std::vector<double> range;
    s.get("scale", range);
    if (range.size() != 2) config_error(s.path("scale"), "expected [lo, hi]");
    a.scale_lo = range[0];
    a.scale_hi = range[1];
  }
  s.get("shift_fraction", a.shift_fraction_max);
  s.choice("fill", a.fill,
           {{"nearest_edge", FillPolicy::kNearestEdge}, {"source_context", FillPolicy::kSourceContext}});
  if (s.has("color")) {
    Section col = s.child("color");
    col.get("brightness", a.color.brightness);
    col.get("saturation", a.color.saturation);
    col.get("hue", a.color.hue);
    col.get("contrast", a.color.contrast);
    col.finish();
  }
  s.finish();
  try {
    a.validate();
  } catch (const Error& e) {
    config_error("augmentation", e.what());
  }
}

void parse_network(Section s, dnn::NetworkSpec& n) {
  if (s.has("preset")) {
    std::string preset;
    s.get("preset", preset);
    if (preset == "densenet161")
      n = dnn::NetworkSpec::densenet161();
    else if (preset == "toy")
      n = dnn::NetworkSpec::toy();
    else
      config_error(s.path("preset"), "'" + preset + "' is not one of toy, densenet161");
  }
  s.get("growth_rate", n.growth_rate);
  s.get("blocks", n.block_layers);
  s.get("initial_channels", n.initial_channels);
  s.get("bottleneck_factor", n.bottleneck_factor);
  s.get("compression", n.compression);
  s.choice("pool", n.transition_pool, {{"max", dnn::PoolKind::kMax}, {"average", dnn::PoolKind::kAverage}});
  s.get("num_classes", n.num_classes);
  s.finish();
  try {
    n.validate();
  } catch (const Error& e) {
    config_error("network", e.what());
  }
}

void parse_train(Section s, RunConfig& c) {
  auto& sch = c.schedule;
  s.get("batch_size", sch.batch_size);
  s.get("shuffle", sch.shuffle_per_epoch);
  if (s.has("phases")) {
    const json& phases = s.raw("phases");
    if (!phases.is_array() || phases.empty()) config_error("train.phases", "expected a non-empty list");
    sch.phases.clear();
    for (std::size_t i = 0; i < phases.size(); ++i) {
      Section p(phases[i], "train.phases[" + std::to_string(i) + "]");
      dnn::TrainPhase phase;
      p.choice("scope", phase.scope,
               {{"head_only", dnn::PhaseScope::kHeadOnly}, {"full_network", dnn::PhaseScope::kFullNetwork}});
      p.get("epochs", phase.epochs);
      p.get("lr", phase.learning_rate);
      p.finish();
      sch.phases.push_back(phase);
    }
  }
  if (s.has("lr_decay")) {
    Section d = s.child("lr_decay");
    dnn::LrDecay decay;
    d.get("factor", decay.factor);
    d.get("every", decay.every);
    d.finish();
    sch.lr_decay = decay;
  }
  s.choice("class_weights", c.class_weighting,
           {{"uniform", ClassWeighting::kUniform}, {"log_balanced", ClassWeighting::kLogBalanced}});
  s.choice("dtype", c.dtype, {{"float32", Dtype::kFloat32}, {"float64", Dtype::kFloat64}});
  s.finish();
  try {
    sch.validate();
  } catch (const Error& e) {
    config_error("train", e.what());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  c.base_dir = base_dir;
  c.out = base_dir / "run";
  c.config_hash = text::hex64(text::fnv1a(json_text));
  Section s(root, "");
  std::string out;
  s.get("out", out);
  if (!out.empty()) c.out = resolve(base_dir, out);
  s.get("seed", c.seed);
  s.get("threads", c.threads);
  if (s.has("slides")) {
    const json& slides = s.raw("slides");
    if (!slides.is_array()) config_error("slides", "expected a list");
    for (std::size_t i = 0; i < slides.size(); ++i) {
      Section e(slides[i], "slides[" + std::to_string(i) + "]");
      SlideEntry entry;
      std::string image, ann;
      e.get("id", entry.id);
      e.get("image", image);
      e.get("annotations", ann);
      e.get("resolution_um", entry.resolution_um);
      e.finish();
      if (image.empty()) config_error(e.path("image"), "is required");
      entry.image = resolve(base_dir, image);
      if (!ann.empty()) entry.annotations = resolve(base_dir, ann);
      if (entry.id.empty()) entry.id = entry.image.stem().string();
      if (entry.id.find_first_of(",\n/") != std::string::npos)
        config_error(e.path("id"), "may not contain ',', '/' or newlines");
      c.slides.push_back(std::move(entry));
    }
  }
  if (s.has("extract")) parse_extract(s.child("extract"), c);
  if (s.has("split")) {
    Section sp = s.child("split");
    sp.choice("mode", c.split_mode, {{"stratified", SplitMode::kStratified}, {"by_slide", SplitMode::kBySlide}});
    sp.get("train_fraction", c.train_fraction);
    sp.finish();
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
      config_error("split.train_fraction", "must lie in (0, 1)");
  }
  if (s.has("augmentation")) parse_augmentation(s.child("augmentation"), c.augmentation);
  if (s.has("network")) parse_network(s.child("network"), c.network);
  if (s.has("train")) parse_train(s.child("train"), c);
  if (s.has("crossval")) {
    Section cv = s.child("crossval");
    cv.get("folds", c.crossval_folds);
    cv.get("architecture", c.architecture);
    cv.get("pretraining", c.pretraining);
    cv.finish();
    if (c.crossval_folds < 2) config_error("crossval.folds", "must be >= 2");
  }
  if (s.has("segment")) {
    Section sg = s.child("segment");
    sg.get("downsample", c.segment.downsample);
    sg.get("patch_pixel_px", c.segment.patch_pixel_px);
    sg.get("stride", c.segment.stride);
    sg.get("batch_size", c.segment.batch_size);
    sg.get("use_mask", c.segment_use_mask);
    sg.choice("backend", c.backend, {{"densenet", BackendKind::kDenseNet}, {"external", BackendKind::kExternal}});
    sg.get("command", c.backend_command);
    sg.finish();
    try {
      c.segment.validate();
    } catch (const Error& e) {
      config_error("segment", e.what());
    }
    if (c.backend == BackendKind::kExternal && c.backend_command.empty())
      config_error("segment.command", "is required for the external backend");
  }
  if (s.has("postprocess")) {
    Section pp = s.child("postprocess");
    pp.get("median_window", c.postprocess.median_window);
    pp.get("dilate_radius", c.postprocess.dilate_radius);
    bool majority = false;
    pp.get("majority_vote", majority);
    c.postprocess.median_mode = majority ? kern::MedianMode::kMajority : kern::MedianMode::kOrdinal;
    pp.finish();
    try {
      c.postprocess.validate();
    } catch (const Error& e) {
      config_error("postprocess", e.what());
    }
  }
  if (s.has("report")) {
    Section r = s.child("report");
    r.get("title", c.report_title);
    std::vector<std::string> inputs;
    r.get("inputs", inputs);
    for (const auto& in : inputs) c.report_inputs.push_back(resolve(base_dir, in));
    r.finish();
  }
  s.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing config file " + path.string());
  const auto abs = std::filesystem::absolute(path);
  return parse_run_config(text::read_file(abs), abs.parent_path());
}

}  // namespace histo::cli
