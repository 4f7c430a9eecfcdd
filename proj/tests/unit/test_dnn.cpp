#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "histo/dnn/train.hpp"
#include "histo/error.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/text.hpp"
#include "oracles.hpp"
#include "toy_data.hpp"
#include "histo/dnn/loss.hpp"
#include "histo/dnn/network.hpp"
#include "histo/dnn/params.hpp"
#include "histo/dnn/spec.hpp"
#include "histo/rng.hpp"

using namespace histo;
using namespace histo::dnn;

namespace {

std::vector<double> random_input(int n, int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n) * h * w * c);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("network gradients match central differences on a tiny spec") {
  const auto spec = NetworkSpec::toy(2, {1}, 4);
  const auto params = init_xavier_uniform<double>(spec, 7);
  const auto input = random_input(2, 8, 8, 3, 11);
  const auto report = testing::check_network_gradients(spec, params, input, {1, 3}, 8, 8);
  MESSAGE("max rel err " << report.max_relative_error << " at " << report.worst_tensor << " over " << report.checked);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("loss layer gradient matches central differences within 1e-6") {
  Rng rng(3);
  std::vector<double> logits(6 * 4);
  for (auto& x : logits) x = rng.uniform(-3.0, 3.0);
  const std::vector<int> labels{0, 1, 2, 3, 1, 3};
  CHECK(testing::check_loss_gradient(logits, labels, ClassWeights::uniform(4)) < 1e-6);
  CHECK(testing::check_loss_gradient(logits, labels, ClassWeights{{0.6, 3.3, 4.2, 0.9}}) < 1e-6);
}

TEST_CASE("weighted cross-entropy values") {
  const std::vector<double> flat(8, 0.0);
  const std::vector<int> labels{2, 0};
  CHECK(weighted_cross_entropy<double>(flat, labels, ClassWeights::uniform(4)).loss ==
        doctest::Approx(std::log(4.0)));
  std::vector<double> confident{0, 0, 1e4, 0, 1e4, 0, 0, 0};
  const auto r = weighted_cross_entropy<double>(confident, labels, ClassWeights::uniform(4));
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(0.0));
  std::vector<double> wrong{1e4, 0, 0, 0, 0, -1e4, 0, 0};
  CHECK(std::isfinite(weighted_cross_entropy<double>(wrong, labels, ClassWeights::uniform(4)).loss));

  // Doubling the weight of the only class present doubles loss and gradient.
  Rng rng(5);
  std::vector<double> logits(12);
  for (auto& x : logits) x = rng.uniform(-1, 1);
  const std::vector<int> ones{1, 1, 1};
  const auto a = weighted_cross_entropy<double>(logits, ones, ClassWeights{{1, 1, 1, 1}});
  const auto b = weighted_cross_entropy<double>(logits, ones, ClassWeights{{1, 2, 1, 1}});
  CHECK(b.loss == doctest::Approx(2 * a.loss));
  for (std::size_t i = 0; i < a.dlogits.size(); ++i) CHECK(b.dlogits[i] == doctest::Approx(2 * a.dlogits[i]));
}

TEST_CASE("log-balanced class weights") {
  const std::vector<std::uint64_t> paper{13280, 903, 354, 9869};
  const auto w = class_weights(paper);
  const double n = 24406.0;
  for (int c = 0; c < 4; ++c) CHECK(w.w[c] == doctest::Approx(std::log(n / paper[c])).epsilon(1e-12));
  CHECK(w.w[0] == doctest::Approx(0.6086).epsilon(2e-4));
  CHECK(w.w[2] == doctest::Approx(4.2333).epsilon(2e-4));
  const std::vector<std::uint64_t> equal{7, 7, 7, 7};
  for (double v : class_weights(equal).w) CHECK(v == doctest::Approx(std::log(4.0)));
  const std::vector<std::uint64_t> zero{5, 0, 1, 1};
  CHECK_THROWS_AS(class_weights(zero), Error);
}

TEST_CASE("softmax sums to one; argmax ties go to the lowest class") {
  const std::vector<double> z(4, 0.0);
  CHECK(argmax<double>(z) == 0);
  const std::vector<float> t{0.5f, 2.0f, 2.0f, -1.0f};
  CHECK(argmax<float>(t) == 1);
  Rng rng(1);
  std::vector<double> logits(40);
  for (auto& x : logits) x = rng.uniform(-20, 20);
  const auto p = softmax<double>(logits, 4);
  for (int i = 0; i < 10; ++i) CHECK(p[4 * i] + p[4 * i + 1] + p[4 * i + 2] + p[4 * i + 3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Xavier bounds follow fan arithmetic; biases start at zero") {
  const auto spec = NetworkSpec::toy(2, {1}, 2);
  const auto shapes = parameter_shapes(spec);
  const auto params = init_xavier_uniform<double>(spec, 3);
  REQUIRE(shapes.size() == params.size());
  for (std::size_t t = 0; t < shapes.size(); ++t) {
    const bool bias = params[t].name.ends_with("bias");
    const double bound = std::sqrt(6.0 / static_cast<double>(shapes[t].fan_in + shapes[t].fan_out));
    for (double v : params[t].data) {
      if (bias)
        CHECK(v == 0.0);
      else
        CHECK(std::abs(v) <= bound);
    }
  }
  // A 3x3 conv with 2 inputs and 4 outputs: fan_in 18, fan_out 36.
  const auto& c2 = parameter_shapes(NetworkSpec::toy(4, {1}, 2));
  const auto it = std::find_if(c2.begin(), c2.end(), [](const TensorShape& s) {
    return s.name == "block1.layer1.conv1.weight";
  });
  REQUIRE(it != c2.end());
  CHECK(it->fan_in == 2);  // 1x1, 2 inputs
  CHECK(it->fan_out == 16);

  // Empirical mean of a large tensor is near zero.
  const auto big = init_xavier_uniform<double>(NetworkSpec::densenet161(), 1);
  const auto& w = big.find("block3.layer36.conv2.weight").data;
  double s = 0;
  for (double v : w) s += v;
  const double mean = s / w.size();
  const double bound = big.find("block3.layer36.conv2.weight").data.empty() ? 0 : std::sqrt(6.0 / (9.0 * 192 + 9.0 * 48));
  CHECK(std::abs(mean) < 3 * bound / std::sqrt(3.0 * w.size()));
  CHECK(init_xavier_uniform<double>(spec, 3) == params);
  CHECK(init_xavier_uniform<double>(spec, 4) != params);
}

TEST_CASE("DenseNet-161 descriptor: channel bookkeeping and 157 px shapes") {
  const auto spec = NetworkSpec::densenet161();
  int c = spec.initial_channels;
  for (int b = 0; b < 4; ++b) {
    CHECK(spec.block_input_channels(b) == c);
    c += spec.block_layers[b] * spec.growth_rate;
    CHECK(spec.block_output_channels(b) == c);
    if (b < 3) c /= 2;
    CHECK(spec.transition_output_channels(b) == c);
  }
  CHECK(spec.feature_channels() == 2208);
  const auto shapes = describe_shapes(spec, 157, 157);
  std::vector<int> sizes;
  for (const auto& s : shapes)
    if (s.name == "stem_conv" || s.name == "stem_pool" || s.name.starts_with("transition")) sizes.push_back(s.height);
  CHECK(sizes == std::vector<int>{79, 40, 20, 10, 5, 2});
  CHECK(shapes.back().channels == 4);
  CHECK(spatial_reductions(spec) == 6);
  try {
    (void)describe_shapes(spec, 40, 40);
    FAIL("tiny input accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("transition") != std::string::npos);
  }
  const auto toy = NetworkSpec::toy();
  CHECK(toy.block_output_channels(0) == toy.initial_channels + 8);
}

TEST_CASE("forward: zero weights give zero logits; samples do not interact") {
  const auto spec = NetworkSpec::toy();
  ParamStore<double> zero(spec);
  Network<double> net(spec);
  const auto input = random_input(3, 32, 32, 3, 2);
  for (double v : net.forward(zero, input, 3, 32, 32)) CHECK(v == 0.0);

  const auto params = init_xavier_uniform<double>(spec, 9);
  const auto batch = net.forward(params, input, 3, 32, 32);
  const std::vector<double> second(input.begin() + 32 * 32 * 3, input.begin() + 2 * 32 * 32 * 3);
  Network<double> single(spec);
  const auto one = single.forward(params, second, 1, 32, 32);
  for (int k = 0; k < 4; ++k) CHECK(one[k] == batch[4 + k]);
}

TEST_CASE("dead ReLU paths receive exactly zero gradient") {
  const auto spec = NetworkSpec::toy(2, {1}, 4);
  auto params = init_xavier_uniform<double>(spec, 1);
  for (auto& v : params.find("stem.conv.bias").data) v = -1e3;
  Network<double> net(spec);
  const auto input = random_input(2, 16, 16, 3, 4);
  const std::vector<int> labels{0, 2};
  const auto logits = net.forward(params, input, 2, 16, 16);
  const auto loss = weighted_cross_entropy<double>(logits, labels, ClassWeights::uniform(4));
  ParamStore<double> grads(spec);
  net.backward(params, loss.dlogits, grads);
  for (double g : grads.find("stem.conv.weight").data) CHECK(g == 0.0);
  // Backward against a different parameter store is rejected.
  const auto other = params;
  CHECK_THROWS_AS(net.backward(other, loss.dlogits, grads), Error);
}

TEST_CASE("weights file round trip, conversion flag, and corrupt files") {
  testing::TempDir dir("weights");
  const auto spec = NetworkSpec::toy(2, {1}, 4);
  const auto p64 = init_xavier_uniform<double>(spec, 5);
  save_params(dir / "w.hpdn", p64);
  const auto same = load_params<double>(dir / "w.hpdn", spec);
  CHECK(same.store == p64);
  CHECK_FALSE(same.converted);

  const auto as32 = load_params<float>(dir / "w.hpdn", spec);
  CHECK(as32.converted);
  for (std::size_t t = 0; t < p64.size(); ++t)
    for (std::size_t i = 0; i < p64[t].size(); ++i) CHECK(as32.store[t].data[i] == static_cast<float>(p64[t].data[i]));

  CHECK_THROWS_AS(load_params<double>(dir / "w.hpdn", NetworkSpec::toy(4, {1}, 4)), Error);
  const auto bytes = text::read_file(dir / "w.hpdn");
  text::write_file(dir / "cut.hpdn", std::string_view(bytes).substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_params<double>(dir / "cut.hpdn", spec), Error);
  text::write_file(dir / "magic.hpdn", "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_params<double>(dir / "magic.hpdn", spec), Error);
  text::write_file(dir / "tail.hpdn", bytes + "x");
  CHECK_THROWS_AS(load_params<double>(dir / "tail.hpdn", spec), Error);
}

TEST_CASE("learning-rate schedules") {
  const auto pre = TrainSchedule::pretraining();
  CHECK(pre.learning_rate(0, 0) == doctest::Approx(1e-3));
  CHECK(pre.learning_rate(0, 19) == doctest::Approx(1e-3));
  CHECK(pre.learning_rate(0, 20) == doctest::Approx(5e-4));
  CHECK(pre.learning_rate(0, 40) == doctest::Approx(2.5e-4));
  const auto micro = TrainSchedule::fine_tune_microscopy();
  REQUIRE(micro.phases.size() == 2);
  CHECK(micro.phases[0].scope == PhaseScope::kHeadOnly);
  CHECK(micro.phases[0].epochs == 25);
  CHECK(micro.phases[1].learning_rate == doctest::Approx(2e-4));
  CHECK(micro.total_epochs() == 275);
  const auto slides = TrainSchedule::fine_tune_slides();
  CHECK(slides.total_epochs() == 106);
  CHECK(slides.batch_size == 32);
  TrainSchedule bad;
  bad.phases.push_back({PhaseScope::kFullNetwork, 0, 1e-3});
  CHECK_THROWS_AS(bad.validate(), Error);
}

namespace {

struct SmallRun {
  NetworkSpec spec = NetworkSpec::toy(4, {1}, 8);
  LabeledImages train_set = testing::toy_patches(3, 16, 1);
  LabeledImages val_set = testing::toy_patches(2, 16, 2);
  TrainOptions options;
  SmallRun() {
    options.schedule.batch_size = 4;
    options.schedule.phases = {{PhaseScope::kHeadOnly, 2, 1e-2}, {PhaseScope::kFullNetwork, 3, 1e-2}};
    options.augmentation.seed = 7;
    options.stats = compute_dataset_stats(std::span<const RasterImage>(train_set.images));
    options.seed = 11;
  }
  TrainResult<double> run() const {
    return train<double>(spec, init_xavier_uniform<double>(spec, 3), train_set, val_set, options);
  }
};

}  // namespace

TEST_CASE("head-only phases freeze everything but the classifier") {
  SmallRun r;
  r.options.schedule.phases = {{PhaseScope::kHeadOnly, 2, 5e-2}};
  const auto init = init_xavier_uniform<double>(r.spec, 3);
  const auto result = r.run();
  const std::size_t head = head_tensor_begin(r.spec);
  for (std::size_t t = 0; t < init.size(); ++t) {
    if (t < head)
      CHECK(result.last[t] == init[t]);
    else
      CHECK(result.last[t] != init[t]);
  }
}

TEST_CASE("training is deterministic and returns the best-validation checkpoint") {
  kern::set_thread_limit(1);
  SmallRun r;
  const auto a = r.run();
  const auto b = r.run();
  kern::set_thread_limit(0);
  CHECK(a.best == b.best);
  CHECK(a.last == b.last);
  CHECK(a.log == b.log);
  REQUIRE(a.log.size() == 5);
  CHECK(a.log[0].scope == PhaseScope::kHeadOnly);
  CHECK(a.log[4].scope == PhaseScope::kFullNetwork);

  double best = -1;
  int first = -1;
  for (const auto& e : a.log)
    if (*e.val_acc > best) best = *e.val_acc, first = e.epoch;
  CHECK(a.best_epoch == first);
  CHECK(*a.best_val_acc == best);
  CHECK(accuracy<double>(r.spec, a.best, r.val_set, r.options.stats) == doctest::Approx(best));

  // Metrics log round trips through its text form.
  CHECK(parse_metrics(render_metrics(a.log)) == a.log);
}

TEST_CASE("a training set smaller than one batch is rejected") {
  SmallRun r;
  r.options.schedule.batch_size = 64;
  CHECK_THROWS_AS(r.run(), Error);
}

TEST_CASE("predict agrees with argmax of forward logits") {
  SmallRun r;
  const auto params = init_xavier_uniform<double>(r.spec, 8);
  const auto preds = predict<double>(r.spec, params, r.val_set.images, r.options.stats, 3);
  REQUIRE(preds.size() == r.val_set.size());
  std::vector<FloatImage> norm;
  for (const auto& im : r.val_set.images) norm.push_back(normalize(im, r.options.stats));
  const auto packed = pack_batch<double>(norm);
  Network<double> net(r.spec);
  const auto logits = net.forward(params, packed, static_cast<int>(norm.size()), 16, 16);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::span<const double> row(logits.data() + 4 * i, 4);
    CHECK(code(preds[i].label) == argmax<double>(row));
    double s = 0;
    for (double p : preds[i].probabilities) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}
