#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "histo/cli/cli.hpp"
#include "histo/cli/config.hpp"
#include "histo/dnn/params.hpp"
#include "histo/dnn/train.hpp"
#include "histo/error.hpp"
#include "histo/eval/crossval.hpp"
#include "histo/eval/metrics.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/patches/extract.hpp"
#include "histo/patches/manifest.hpp"
#include "histo/patches/split.hpp"
#include "histo/segmentation/segment.hpp"
#include "histo/text.hpp"
#include "histo/tissue/mask.hpp"

namespace histo::cli {

namespace fs = std::filesystem;

namespace {

// Substream tags for the per-command seeds.
enum SeedTag : std::uint64_t { kOffsetSeed = 1, kSplitSeed, kInitSeed, kTrainSeed, kFoldSeed };

struct Context {
  RunConfig cfg;
  fs::path out;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string command;
  std::ostream& log;

  fs::path manifest_path() const { return out / "manifest.txt"; }
  fs::path weights_path() const { return out / "weights.hpdn"; }
  std::uint64_t seed_for(SeedTag tag) const { return derive_seed(seed, static_cast<std::uint64_t>(tag)); }
};

std::string thousands(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string count_sentence(const ClassCounts& c) {
  return thousands(total(c)) + " patches, with " + thousands(c[0]) + " being labeled normal, " +
         thousands(c[1]) + " benign, " + thousands(c[2]) + " in situ, and " + thousands(c[3]) +
         " invasive";
}

void write_run_record(const Context& ctx) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
  text::KeyValueDoc doc;
  doc.header = "HISTOPIPE-RUN v1";
  doc.values["command"] = ctx.command;
  doc.values["config_hash"] = ctx.cfg.config_hash;
  doc.values["seed"] = std::to_string(ctx.seed);
  doc.values["threads"] = std::to_string(ctx.threads);
  doc.values["version"] = kVersion;
  doc.values["compiler"] = __VERSION__;
  doc.values["timestamp"] = ts.str();
  text::write_file(ctx.out / "runs" / (ctx.command + ".txt"), text::render_key_value(doc));
}

RasterImage load_slide(const SlideEntry& s) {
  if (!fs::exists(s.image)) fail(ErrorKind::kIo, "missing slide image " + s.image.string());
  RasterImage img = read_raster(s.image, s.resolution_um);
  if (s.resolution_um) img.set_resolution(*s.resolution_um);
  if (img.channels() != 3) fail(ErrorKind::kData, "slide " + s.image.string() + " is not RGB");
  return img;
}

std::optional<AnnotationSet> load_slide_annotations(const SlideEntry& s) {
  if (!s.annotations) return std::nullopt;
  if (!fs::exists(*s.annotations))
    fail(ErrorKind::kIo, "missing annotation file " + s.annotations->string());
  return load_annotations(*s.annotations);
}

RasterImage mask_source(const RasterImage& slide, const RunConfig& cfg) {
  return cfg.mask.downsample > 1.0 ? resample(slide, cfg.mask.downsample) : slide;
}

MaskOptions mask_options(const RunConfig& cfg) { return {cfg.mask.threshold}; }

DatasetManifest load_run_manifest(const Context& ctx) {
  if (!fs::exists(ctx.manifest_path()))
    fail(ErrorKind::kIo, "missing manifest " + ctx.manifest_path().string() + " (run extract first)");
  return load_manifest(ctx.manifest_path());
}

dnn::LabeledImages load_images(const DatasetManifest& m, const fs::path& root,
                               std::span<const std::size_t> indices, bool with_context) {
  dnn::LabeledImages set;
  if (with_context) {
    if (!m.meta.contains("context_margin_px"))
      fail(ErrorKind::kData, "source_context fill needs patches extracted with a context margin");
    set.context_margin = static_cast<int>(text::parse_int(m.meta.at("context_margin_px"), "context_margin_px"));
  }
  for (auto i : indices) {
    const auto& r = m.records()[i];
    const fs::path p = root / r.path;
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing patch payload " + p.string());
    auto img = decode_png(p).image;
    img.set_resolution(r.resolution_um());
    set.images.push_back(std::move(img));
    set.labels.push_back(r.label);
    if (with_context) {
      fs::path cp = p;
      cp.replace_filename(p.stem().string() + "_ctx.png");
      if (!fs::exists(cp)) fail(ErrorKind::kIo, "missing context payload " + cp.string());
      set.contexts.push_back(decode_png(cp).image);
    }
  }
  return set;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::string split_label(double fraction) {
  const int train = static_cast<int>(std::lround(fraction * 100));
  return std::to_string(train) + "/" + std::to_string(100 - train) + " split";
}

// --- extract ---------------------------------------------------------------

void cmd_extract(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.slides.empty()) fail(ErrorKind::kConfig, "config lists no slides");
  DatasetManifest all;
  std::size_t planned = 0, background = 0, unannotated = 0;
  std::string slide_list;
  std::optional<double> downsample;
  for (const auto& entry : cfg.slides) {
    const RasterImage slide = load_slide(entry);
    const auto annotations = load_slide_annotations(entry);
    ExtractionConfig e = cfg.extract;
    if (cfg.random_offset) e.offset_seed = ctx.seed_for(kOffsetSeed);

    std::optional<TissueMask> mask;
    if (cfg.mask.enabled && e.background != BackgroundRule::kNone) {
      const RasterImage low = mask_source(slide, cfg);
      if (e.background == BackgroundRule::kCoarseGrid)
        mask = coarse_mask_for_grid(low, extraction_grid(slide, e, entry.id), slide.resolution(),
                                    mask_options(cfg));
      else
        mask = compute_mask(low, mask_options(cfg));
      save_mask(ctx.out / "masks" / (entry.id + ".png"), *mask);
    }
    Extraction ex = extract_patches(slide, entry.id, e, annotations ? &*annotations : nullptr,
                                    mask ? &*mask : nullptr);
    write_payloads(ex, ctx.out);
    for (const auto& p : ex.patches) all.add(p.record);
    planned += ex.planned;
    background += ex.discarded_background;
    unannotated += ex.discarded_unannotated;
    slide_list += (slide_list.empty() ? "" : ";") + entry.id;
    all.meta["downsample." + entry.id] = text::format_real(ex.downsample);
    if (!downsample) downsample = ex.downsample;
    ctx.log << entry.id << ": " << ex.planned << " grid centers, " << ex.patches.size() << " kept, "
            << ex.discarded_background << " background, downsample " << text::format_real(ex.downsample)
            << "\n";
  }
  all.seed = ctx.seed;
  all.meta["slides"] = slide_list;
  all.meta["downsample"] = text::format_real(*downsample);
  all.meta["patch_physical_um"] = text::format_real(cfg.extract.patch_physical_um);
  all.meta["patch_pixel_px"] = std::to_string(cfg.extract.patch_pixel_px);
  all.meta["planned"] = std::to_string(planned);
  all.meta["discarded_background"] = std::to_string(background);
  all.meta["discarded_unannotated"] = std::to_string(unannotated);
  if (cfg.extract.context_margin_px > 0)
    all.meta["context_margin_px"] = std::to_string(cfg.extract.context_margin_px);
  save_manifest(ctx.manifest_path(), all);
  ctx.log << "extracted " << count_sentence(all.per_class_counts()) << "\n";
}

// --- split / stats -----------------------------------------------------------

void cmd_split(Context& ctx) {
  DatasetManifest m = load_run_manifest(ctx);
  const auto seed = ctx.seed_for(kSplitSeed);
  m.split = ctx.cfg.split_mode == SplitMode::kBySlide
                ? split_by_slide(m, ctx.cfg.train_fraction, seed)
                : split_stratified(m, ctx.cfg.train_fraction, seed);
  save_manifest(ctx.manifest_path(), m);
  const auto counts = count_split(m);
  ctx.log << "train: " << count_sentence(counts.train) << "\n"
          << "validation: " << count_sentence(counts.val) << "\n";
}

void cmd_stats(Context& ctx) {
  DatasetManifest m = load_run_manifest(ctx);
  const auto idx = m.split ? m.split->indices_with(kTrainTag) : all_indices(m.size());
  if (idx.empty()) fail(ErrorKind::kData, "no training patches to compute statistics on");
  const auto set = load_images(m, ctx.out, idx, false);
  m.stats = compute_dataset_stats(std::span<const RasterImage>(set.images));
  save_manifest(ctx.manifest_path(), m);
  ctx.log << "statistics over " << idx.size() << " patches: mean";
  for (double v : m.stats->mean) ctx.log << " " << text::format_real(v);
  ctx.log << ", std";
  for (double v : m.stats->stddev) ctx.log << " " << text::format_real(v);
  ctx.log << "\n";
}

// --- train / evaluate / crossval ------------------------------------------------

dnn::TrainOptions train_options(const Context& ctx, const DatasetStats& stats) {
  dnn::TrainOptions o;
  o.schedule = ctx.cfg.schedule;
  o.augmentation = ctx.cfg.augmentation;
  o.augmentation.seed = ctx.seed_for(kTrainSeed);
  o.stats = stats;
  o.seed = ctx.seed_for(kTrainSeed);
  return o;
}

std::optional<dnn::ClassWeights> weights_for(const Context& ctx, const dnn::LabeledImages& train) {
  if (ctx.cfg.class_weighting == ClassWeighting::kUniform) return std::nullopt;
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(ctx.cfg.network.num_classes), 0);
  for (auto l : train.labels) {
    if (code(l) >= ctx.cfg.network.num_classes)
      fail(ErrorKind::kData, "training label exceeds network.num_classes");
    ++counts[static_cast<std::size_t>(code(l))];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      fail(ErrorKind::kData, "class '" + std::string(label_name(label_from_code(static_cast<int>(c)))) +
                                 "' has no training patches; log-balanced weights are undefined "
                                 "(set train.class_weights to \"uniform\")");
  return dnn::class_weights(counts);
}

const DatasetStats& require_stats(const DatasetManifest& m) {
  if (!m.stats) fail(ErrorKind::kData, "manifest has no normalization statistics (run stats first)");
  return *m.stats;
}

template <typename T>
void train_typed(Context& ctx, const DatasetManifest& m) {
  const bool ctx_fill = ctx.cfg.augmentation.fill == FillPolicy::kSourceContext;
  const auto train_set = load_images(m, ctx.out, m.split->indices_with(kTrainTag), ctx_fill);
  const auto val_set = load_images(m, ctx.out, m.split->indices_with(kValTag), false);
  auto options = train_options(ctx, require_stats(m));
  options.class_weights = weights_for(ctx, train_set);
  options.on_epoch = [&](const dnn::EpochMetrics& e) {
    ctx.log << "epoch " << e.epoch << " [" << dnn::scope_name(e.scope) << "] lr "
            << text::format_real(e.learning_rate) << " loss " << std::setprecision(4) << e.train_loss
            << " train_acc " << e.train_acc;
    if (e.val_acc) ctx.log << " val_acc " << *e.val_acc;
    ctx.log << std::setprecision(6) << "\n";
  };
  auto init = dnn::init_xavier_uniform<T>(ctx.cfg.network, ctx.seed_for(kInitSeed));
  const auto result = dnn::train<T>(ctx.cfg.network, std::move(init), train_set, val_set, options);
  dnn::save_params(ctx.weights_path(), result.best);
  text::write_file(ctx.out / "metrics.txt", dnn::render_metrics(result.log));
  text::KeyValueDoc summary;
  summary.header = "HISTOPIPE-TRAIN v1";
  summary.values["best_epoch"] = std::to_string(result.best_epoch);
  summary.values["best_val_acc"] = result.best_val_acc ? text::format_real(*result.best_val_acc) : "none";
  summary.values["epochs"] = std::to_string(result.log.size());
  summary.values["train_patches"] = std::to_string(train_set.size());
  summary.values["val_patches"] = std::to_string(val_set.size());
  summary.values["parameters"] = std::to_string(result.best.parameter_count());
  text::write_file(ctx.out / "train_summary.txt", text::render_key_value(summary));
  ctx.log << "best epoch " << result.best_epoch;
  if (result.best_val_acc) ctx.log << " (val_acc " << *result.best_val_acc << ")";
  ctx.log << ", weights written to " << ctx.weights_path().string() << "\n";
}

void cmd_train(Context& ctx) {
  const DatasetManifest m = load_run_manifest(ctx);
  if (!m.split || m.split->kind != SplitKind::kTrainVal)
    fail(ErrorKind::kData, "manifest has no train/validation split (run split first)");
  if (ctx.cfg.dtype == Dtype::kFloat64)
    train_typed<double>(ctx, m);
  else
    train_typed<float>(ctx, m);
}

template <typename T>
std::vector<dnn::Prediction> predict_with_weights(const Context& ctx, const dnn::LabeledImages& set,
                                                  const DatasetStats& stats) {
  if (!fs::exists(ctx.weights_path()))
    fail(ErrorKind::kIo, "missing weights " + ctx.weights_path().string() + " (run train first)");
  const auto loaded = dnn::load_params<T>(ctx.weights_path(), ctx.cfg.network);
  if (loaded.converted) ctx.log << "note: weights converted to the configured dtype\n";
  return dnn::predict<T>(ctx.cfg.network, loaded.store, set.images, stats);
}

void cmd_evaluate(Context& ctx) {
  const DatasetManifest m = load_run_manifest(ctx);
  const auto idx = m.split ? m.split->indices_with(kValTag) : all_indices(m.size());
  if (idx.empty()) fail(ErrorKind::kData, "no validation patches to evaluate");
  const auto set = load_images(m, ctx.out, idx, false);
  const auto preds = ctx.cfg.dtype == Dtype::kFloat64
                         ? predict_with_weights<double>(ctx, set, require_stats(m))
                         : predict_with_weights<float>(ctx, set, require_stats(m));
  std::vector<LabelClass> predicted;
  for (const auto& p : preds) predicted.push_back(p.label);
  const auto cm = confusion(set.labels, predicted);
  const auto table = render_confusion(cm);
  text::write_file(ctx.out / "evaluation.txt", table);
  ExperimentReport report;
  report.title = ctx.cfg.report_title;
  report.rows.push_back({ctx.cfg.architecture, ctx.cfg.pretraining,
                         m.split ? split_label(ctx.cfg.train_fraction) : "all patches", cm.accuracy(), {}});
  save_report(ctx.out / "evaluation_report.txt", report);
  ctx.log << table;
}

void cmd_crossval(Context& ctx) {
  const DatasetManifest m = load_run_manifest(ctx);
  const auto data = load_images(m, ctx.out, all_indices(m.size()),
                                ctx.cfg.augmentation.fill == FillPolicy::kSourceContext);
  auto options = train_options(ctx, DatasetStats{});
  options.class_weights = weights_for(ctx, data);
  DenseNetLearner learner(ctx.cfg.network, options, data, ctx.seed_for(kInitSeed));
  const auto result = run_cross_validation(m, ctx.cfg.crossval_folds, learner, ctx.seed_for(kFoldSeed),
                                           ctx.cfg.architecture, ctx.cfg.pretraining);
  if (result.folds.underfilled_class)
    ctx.log << "warning: a class has fewer members than folds; some folds lack it\n";
  ExperimentReport report;
  report.title = ctx.cfg.report_title;
  report.rows.push_back(result.row);
  save_report(ctx.out / "crossval_report.txt", report);
  for (std::size_t f = 0; f < result.per_fold.size(); ++f)
    ctx.log << "fold " << f << ": accuracy " << result.row.fold_accuracies[f] << "\n";
  ctx.log << render_table(report);
}

// --- segment / postprocess / report ---------------------------------------------

template <typename T>
std::unique_ptr<ClassifierBackend> densenet_backend(const Context& ctx, const DatasetManifest& m) {
  if (!fs::exists(ctx.weights_path()))
    fail(ErrorKind::kIo, "missing weights " + ctx.weights_path().string() + " (run train first)");
  if (m.size() == 0) fail(ErrorKind::kData, "manifest is empty");
  auto loaded = dnn::load_params<T>(ctx.weights_path(), ctx.cfg.network);
  const auto& r = m.records().front();
  return std::make_unique<DenseNetBackend<T>>(ctx.cfg.network, std::move(loaded.store), require_stats(m),
                                              r.physical_um, r.pixel_px);
}

void cmd_segment(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.slides.empty()) fail(ErrorKind::kConfig, "config lists no slides");
  std::unique_ptr<ClassifierBackend> backend;
  if (cfg.backend == BackendKind::kDenseNet) {
    const DatasetManifest m = load_run_manifest(ctx);
    backend = cfg.dtype == Dtype::kFloat64 ? densenet_backend<double>(ctx, m) : densenet_backend<float>(ctx, m);
  }
  for (const auto& entry : cfg.slides) {
    const RasterImage slide = load_slide(entry);
    if (cfg.backend == BackendKind::kExternal) {
      BackendMetadata meta{"external", cfg.segment.patch_pixel_px * cfg.segment.downsample * slide.resolution(),
                           cfg.segment.patch_pixel_px, kNumClasses, std::nullopt};
      backend = std::make_unique<ExternalProcessBackend>(cfg.backend_command, meta);
    }
    std::optional<TissueMask> mask;
    if (cfg.segment_use_mask && cfg.mask.enabled)
      mask = compute_mask(mask_source(slide, cfg), mask_options(cfg));
    const LabelMap map = segment(slide, *backend, cfg.segment, entry.id, mask ? &*mask : nullptr);
    export_label_map(ctx.out / "segmentation" / (entry.id + ".png"), map);
    std::array<std::size_t, kNumClasses> hist{};
    for (auto c : map.cells) ++hist[c];
    ctx.log << entry.id << ": " << map.width << "x" << map.height << " cells ("
            << text::format_real(map.total_downsample) << " level-0 px each);";
    for (int c = 0; c < kNumClasses; ++c)
      ctx.log << " " << label_name(label_from_code(c)) << "=" << hist[c];
    ctx.log << "\n";
  }
}

void cmd_postprocess(Context& ctx) {
  const fs::path in_dir = ctx.out / "segmentation";
  std::vector<fs::path> maps;
  if (!ctx.cfg.slides.empty()) {
    for (const auto& s : ctx.cfg.slides) maps.push_back(in_dir / (s.id + ".png"));
  } else if (fs::exists(in_dir)) {
    for (const auto& e : fs::directory_iterator(in_dir))
      if (e.path().extension() == ".png") maps.push_back(e.path());
    std::sort(maps.begin(), maps.end());
  }
  if (maps.empty()) fail(ErrorKind::kIo, "no label maps under " + in_dir.string() + " (run segment first)");
  for (const auto& p : maps) {
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing label map " + p.string() + " (run segment first)");
    const LabelMap before = import_label_map(p);
    const LabelMap after = postprocess(before, ctx.cfg.postprocess);
    export_label_map(ctx.out / "postprocessed" / p.filename(), after);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < before.cells.size(); ++i) changed += before.cells[i] != after.cells[i];
    ctx.log << p.stem().string() << ": " << changed << " of " << before.cells.size() << " cells changed\n";
  }
}

void cmd_report(Context& ctx) {
  std::vector<fs::path> inputs = ctx.cfg.report_inputs;
  if (inputs.empty())
    for (const char* name : {"evaluation_report.txt", "crossval_report.txt"})
      if (fs::exists(ctx.out / name)) inputs.push_back(ctx.out / name);
  if (inputs.empty()) fail(ErrorKind::kIo, "no report inputs found (run evaluate or crossval first)");
  ExperimentReport merged;
  merged.title = ctx.cfg.report_title;
  for (const auto& p : inputs)
    for (auto& row : load_report(p).rows) merged.rows.push_back(std::move(row));
  save_report(ctx.out / "report.txt", merged);
  const auto table = render_table(merged);
  text::write_file(ctx.out / "report_table.txt", table);
  ctx.log << table;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidArgument: return kExitUsage;
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kFormat:
    case ErrorKind::kData: return kExitData;
  }
  return kExitInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Histopathology patch classification and slide segmentation pipeline", "histopipe"};
  app.set_version_flag("--version", kVersion);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
  app.add_option("--config", config_path, "Run configuration (JSON)")->required();
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--threads", threads, "Worker thread cap (0 uses all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.require_subcommand(1, 1);

  using Handler = void (*)(Context&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"extract", "Extract labeled patches from the configured slides", cmd_extract},
      {"split", "Assign a train/validation split to the manifest", cmd_split},
      {"stats", "Compute normalization statistics on the training patches", cmd_stats},
      {"train", "Train the network on the split manifest", cmd_train},
      {"evaluate", "Evaluate trained weights on the validation patches", cmd_evaluate},
      {"crossval", "Run stratified k-fold cross-validation", cmd_crossval},
      {"segment", "Classify a patch grid over every slide into a label map", cmd_segment},
      {"postprocess", "Median-filter and dilate the label maps", cmd_postprocess},
      {"report", "Merge evaluation reports into one table", cmd_report},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    Context ctx{std::move(cfg), {}, 0, 0, "", out};
    ctx.out = out_dir.empty() ? ctx.cfg.out : fs::path(out_dir);
    ctx.seed = seed.value_or(ctx.cfg.seed);
    ctx.threads = threads.value_or(ctx.cfg.threads);
    kern::set_thread_limit(ctx.threads);
    for (const auto& [name, help, fn] : commands) {
      if (!app.got_subcommand(name)) continue;
      ctx.command = name;
      fs::create_directories(ctx.out);
      fn(ctx);
      write_run_record(ctx);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace histo::cli
