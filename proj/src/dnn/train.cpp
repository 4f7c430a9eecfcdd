#include "histo/dnn/train.hpp"

#include <cmath>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"
#include "histo/text.hpp"

namespace histo::dnn {

std::string_view scope_name(PhaseScope scope) noexcept {
  return scope == PhaseScope::kHeadOnly ? "head_only" : "full_network";
}

void TrainSchedule::validate() const {
  require(!phases.empty(), "training schedule has no phases");
  for (const auto& p : phases) {
    require(p.epochs > 0, "every phase needs at least one epoch");
    require(p.learning_rate > 0.0, "learning rates must be positive");
  }
  require(batch_size > 0, "batch size must be positive");
  if (lr_decay) {
    require(lr_decay->factor > 0.0, "decay factor must be positive");
    require(lr_decay->every > 0, "decay interval must be positive");
  }
}

int TrainSchedule::total_epochs() const noexcept {
  int n = 0;
  for (const auto& p : phases) n += p.epochs;
  return n;
}

double TrainSchedule::learning_rate(std::size_t phase, int epoch_in_phase) const {
  require(phase < phases.size(), "phase index out of range");
  double lr = phases[phase].learning_rate;
  if (lr_decay) lr *= std::pow(lr_decay->factor, epoch_in_phase / lr_decay->every);
  return lr;
}

TrainSchedule TrainSchedule::fine_tune_microscopy() {
  TrainSchedule s;
  s.phases = {{PhaseScope::kHeadOnly, 25, 1e-3}, {PhaseScope::kFullNetwork, 250, 2e-4}};
  return s;
}

TrainSchedule TrainSchedule::fine_tune_slides() {
  TrainSchedule s;
  s.phases = {{PhaseScope::kHeadOnly, 6, 5e-3},
              {PhaseScope::kFullNetwork, 60, 1e-3},
              {PhaseScope::kFullNetwork, 40, 5e-4}};
  return s;
}

TrainSchedule TrainSchedule::pretraining(int epochs) {
  TrainSchedule s;
  s.phases = {{PhaseScope::kFullNetwork, epochs, 1e-3}};
  s.lr_decay = LrDecay{0.5, 20};
  return s;
}

void LabeledImages::validate() const {
  require(images.size() == labels.size(), "one label per image");
  require(contexts.empty() || contexts.size() == images.size(), "one context raster per image");
  for (const auto& img : images)
    require(img.width() == images.front().width() && img.height() == images.front().height() &&
                img.channels() == images.front().channels(),
            "all images must share one shape");
}

template <typename T>
std::vector<T> pack_batch(std::span<const FloatImage> images) {
  std::vector<T> out;
  if (images.empty()) return out;
  out.reserve(images.size() * images.front().pixels().size());
  for (const auto& img : images) {
    require(img.pixels().size() == images.front().pixels().size(), "batch images differ in shape");
    for (float v : img.pixels()) out.push_back(static_cast<T>(v));
  }
  return out;
}

template <typename T>
std::vector<Prediction> predict(const NetworkSpec& spec, const ParamStore<T>& params,
                                std::span<const RasterImage> images, const DatasetStats& stats,
                                int batch_size) {
  require(batch_size > 0, "batch size must be positive");
  std::vector<Prediction> out;
  out.reserve(images.size());
  Network<T> net(spec);
  for (std::size_t begin = 0; begin < images.size(); begin += batch_size) {
    const std::size_t end = std::min(images.size(), begin + batch_size);
    std::vector<FloatImage> norm;
    for (std::size_t i = begin; i < end; ++i) norm.push_back(normalize(images[i], stats));
    const auto input = pack_batch<T>(norm);
    const int n = static_cast<int>(end - begin);
    const auto logits = net.forward(params, input, n, images[begin].height(), images[begin].width());
    const auto probs = softmax<T>(logits, spec.num_classes);
    for (int i = 0; i < n; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * spec.num_classes;
      Prediction p;
      p.label = label_from_code(argmax<T>(std::span(logits).subspan(row, spec.num_classes)));
      p.probabilities.assign(probs.begin() + row, probs.begin() + row + spec.num_classes);
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename T>
double accuracy(const NetworkSpec& spec, const ParamStore<T>& params, const LabeledImages& set,
                const DatasetStats& stats) {
  if (set.size() == 0) return 0.0;
  const auto preds = predict(spec, params, std::span<const RasterImage>(set.images), stats);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i].label == set.labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, ParamStore<T> initial, const LabeledImages& train_set,
                     const LabeledImages& val_set, const TrainOptions& options) {
  const auto& schedule = options.schedule;
  schedule.validate();
  train_set.validate();
  val_set.validate();
  initial.check_matches(spec);
  options.augmentation.validate();
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(schedule.batch_size);
  if (n == 0) fail(ErrorKind::kData, "training split is empty");
  if (n < bs)
    fail(ErrorKind::kData, "training split has " + std::to_string(n) +
                               " samples, fewer than one batch of " + std::to_string(bs));
  if (options.augmentation.fill == FillPolicy::kSourceContext && train_set.contexts.empty())
    fail(ErrorKind::kData, "source_context fill needs context rasters for the training set");
  for (auto l : train_set.labels)
    if (code(l) >= spec.num_classes) fail(ErrorKind::kData, "training label exceeds class count");
  const ClassWeights weights =
      options.class_weights.value_or(ClassWeights::uniform(spec.num_classes));
  require(static_cast<int>(weights.w.size()) == spec.num_classes,
          "class weights do not match the class count");

  const int h = train_set.images.front().height();
  const int w = train_set.images.front().width();
  const std::size_t head_begin = head_tensor_begin(spec);

  TrainResult<T> result;
  ParamStore<T> params = std::move(initial);
  ParamStore<T> grads(spec);
  Network<T> net(spec);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  int epoch = 0;
  for (std::size_t phase = 0; phase < schedule.phases.size(); ++phase) {
    const TrainPhase& ph = schedule.phases[phase];
    const bool head_only = ph.scope == PhaseScope::kHeadOnly;
    for (int e = 0; e < ph.epochs; ++e, ++epoch) {
      const double lr = schedule.learning_rate(phase, e);
      if (schedule.shuffle_per_epoch) {
        Rng rng(derive_seed(options.seed, 0x5348u, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(std::span(order));
      }
      const std::size_t batches = n / bs;  // the final partial batch is dropped
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) {
        std::vector<RasterImage> patches;
        std::vector<std::uint64_t> ids;
        std::vector<EnclosingRaster> contexts;
        std::vector<int> labels;
        for (std::size_t j = b * bs; j < (b + 1) * bs; ++j) {
          const std::size_t i = order[j];
          patches.push_back(train_set.images[i]);
          ids.push_back(i);
          labels.push_back(code(train_set.labels[i]));
          if (!train_set.contexts.empty())
            contexts.push_back({&train_set.contexts[i], train_set.context_margin,
                                train_set.context_margin});
        }
        const auto aug = augment_batch(patches, options.augmentation, options.stats,
                                       static_cast<std::uint64_t>(epoch), ids, contexts);
        const auto input = pack_batch<T>(aug.images);
        const auto logits = net.forward(params, input, static_cast<int>(bs), h, w);
        const auto loss = weighted_cross_entropy<T>(logits, labels, weights);
        loss_sum += loss.loss;
        net.backward(params, loss.dlogits, grads, head_only);
        for (std::size_t t = head_only ? head_begin : 0; t < params.size(); ++t) {
          auto& pd = params[t].data;
          const auto& gd = grads[t].data;
          const T step = static_cast<T>(lr);
          for (std::size_t i = 0; i < pd.size(); ++i) pd[i] -= step * gd[i];
        }
      }

      EpochMetrics m;
      m.epoch = epoch;
      m.phase = static_cast<int>(phase);
      m.scope = ph.scope;
      m.learning_rate = lr;
      m.train_loss = loss_sum / static_cast<double>(batches);
      m.train_acc = accuracy(spec, params, train_set, options.stats);
      if (val_set.size() > 0) m.val_acc = accuracy(spec, params, val_set, options.stats);
      result.log.push_back(m);
      if (options.on_epoch) options.on_epoch(m);

      if (m.val_acc && (!result.best_val_acc || *m.val_acc > *result.best_val_acc)) {
        result.best_val_acc = m.val_acc;
        result.best_epoch = epoch;
        result.best = params;
      }
    }
  }
  if (!result.best_val_acc) {
    result.best = params;
    result.best_epoch = epoch - 1;
  }
  result.last = std::move(params);
  return result;
}

std::string render_metrics(std::span<const EpochMetrics> log) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& m : log) {
    out += "epoch=" + std::to_string(m.epoch) + " phase=" + std::to_string(m.phase) +
           " scope=" + std::string(scope_name(m.scope)) + " lr=" + text::format_real(m.learning_rate) +
           " train_loss=" + text::format_real(m.train_loss) +
           " train_acc=" + text::format_real(m.train_acc) +
           " val_acc=" + (m.val_acc ? text::format_real(*m.val_acc) : std::string("none")) + "\n";
  }
  return out;
}

std::vector<EpochMetrics> parse_metrics(std::string_view contents) {
  std::vector<EpochMetrics> out;
  bool header = false;
  for (auto raw : text::split(contents, '\n')) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (line != kMetricsHeader) fail(ErrorKind::kFormat, "not a metrics log");
      header = true;
      continue;
    }
    EpochMetrics m;
    int seen = 0;
    for (auto field : text::split(line, ' ')) {
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::kFormat, "malformed metrics field");
      const auto key = field.substr(0, eq);
      const auto val = field.substr(eq + 1);
      ++seen;
      if (key == "epoch") m.epoch = static_cast<int>(text::parse_int(val, key));
      else if (key == "phase") m.phase = static_cast<int>(text::parse_int(val, key));
      else if (key == "scope") m.scope = val == "head_only" ? PhaseScope::kHeadOnly : PhaseScope::kFullNetwork;
      else if (key == "lr") m.learning_rate = text::parse_real(val, key);
      else if (key == "train_loss") m.train_loss = text::parse_real(val, key);
      else if (key == "train_acc") m.train_acc = text::parse_real(val, key);
      else if (key == "val_acc") { if (val != "none") m.val_acc = text::parse_real(val, key); }
      else fail(ErrorKind::kFormat, "unknown metrics field '" + std::string(key) + "'");
    }
    if (seen != 7) fail(ErrorKind::kFormat, "metrics record is missing fields");
    out.push_back(m);
  }
  if (!header) fail(ErrorKind::kFormat, "metrics log is empty");
  return out;
}

template std::vector<float> pack_batch<float>(std::span<const FloatImage>);
template std::vector<double> pack_batch<double>(std::span<const FloatImage>);
template std::vector<Prediction> predict<float>(const NetworkSpec&, const ParamStore<float>&,
                                                std::span<const RasterImage>, const DatasetStats&, int);
template std::vector<Prediction> predict<double>(const NetworkSpec&, const ParamStore<double>&,
                                                 std::span<const RasterImage>, const DatasetStats&, int);
template double accuracy<float>(const NetworkSpec&, const ParamStore<float>&, const LabeledImages&,
                                const DatasetStats&);
template double accuracy<double>(const NetworkSpec&, const ParamStore<double>&, const LabeledImages&,
                                 const DatasetStats&);
template TrainResult<float> train<float>(const NetworkSpec&, ParamStore<float>, const LabeledImages&,
                                         const LabeledImages&, const TrainOptions&);
template TrainResult<double> train<double>(const NetworkSpec&, ParamStore<double>,
                                           const LabeledImages&, const LabeledImages&,
                                           const TrainOptions&);

}  // namespace histo::dnn
