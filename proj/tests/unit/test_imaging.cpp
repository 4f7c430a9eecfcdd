#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/text.hpp"
#include "oracles.hpp"

using namespace histo;
using histo::testing::TempDir;

namespace {

RasterImage random_image(int w, int h, int c, std::uint64_t seed, double res = 0.5) {
  RasterImage img(w, h, c, res);
  std::mt19937_64 gen(seed);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(gen() & 0xFF);
  return img;
}

template <typename T>
std::vector<T> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(gen));
  return v;
}

}  // namespace

TEST_CASE("PNG round trip preserves pixels for gray and RGB") {
  TempDir dir("png");
  for (int c : {1, 3}) {
    const auto img = random_image(37, 23, c, 11 + c);
    const auto path = dir / ("img" + std::to_string(c) + ".png");
    write_png(path, img);
    const auto back = decode_png(path).image;
    CHECK(back.width() == 37);
    CHECK(back.height() == 23);
    CHECK(back.channels() == c);
    CHECK(std::equal(img.pixels().begin(), img.pixels().end(), back.pixels().begin()));
  }
}

TEST_CASE("truncated or bogus PNG raises a format error") {
  TempDir dir("png-bad");
  const auto img = random_image(64, 64, 3, 5);
  write_png(dir / "ok.png", img);
  const auto bytes = text::read_file(dir / "ok.png");
  text::write_file(dir / "cut.png", std::string_view(bytes).substr(0, bytes.size() / 2));
  text::write_file(dir / "junk.png", "definitely not a png file");
  for (const char* name : {"cut.png", "junk.png"}) {
    try {
      (void)decode_png(dir / name);
      FAIL("decode succeeded on " << name);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  }
  try {
    (void)decode_png(dir / "absent.png");
    FAIL("decode succeeded on a missing file");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("TIFF round trip, both compressions, keeps resolution tags") {
  TempDir dir("tiff");
  for (auto comp : {TiffCompression::kNone, TiffCompression::kDeflate})
    for (int c : {1, 3}) {
      const auto img = random_image(41, 19, c, 99 + c, 0.467);
      const auto path = dir / "t.tif";
      write_tiff(path, img, comp);
      const auto back = decode_tiff(path);
      CHECK(back.image.channels() == c);
      CHECK(std::equal(img.pixels().begin(), img.pixels().end(), back.image.pixels().begin()));
      REQUIRE(back.resolution_um.has_value());
      CHECK(*back.resolution_um == doctest::Approx(0.467).epsilon(1e-6));
    }
}

TEST_CASE("raster sidecar carries the resolution; missing resolution is a data error") {
  TempDir dir("sidecar");
  const auto img = random_image(8, 8, 3, 1, 0.25);
  write_raster(dir / "a.png", img, {{"origin", "test"}});
  const auto back = read_raster(dir / "a.png");
  CHECK(back == img);
  CHECK(read_sidecar(dir / "a.png")->get("origin") == "test");
  write_png(dir / "bare.png", img);
  CHECK_THROWS_AS(read_raster(dir / "bare.png"), Error);
  CHECK(read_raster(dir / "bare.png", 2.0).resolution() == 2.0);
}

TEST_CASE("resampled dimensions round half up") {
  // 2048x1536 at factor 10 is 204.8 x 153.6.
  CHECK(resampled_dimension(2048, 10.0) == 205);
  CHECK(resampled_dimension(1536, 10.0) == 154);
  CHECK(resampled_dimension(9, 2.0) == 5);  // 4.5 rounds up
  const RasterImage img(2048, 1536, 3, 0.42);
  const auto small = resample(img, 10.0);
  CHECK(small.width() == 205);
  CHECK(small.height() == 154);
  CHECK(small.resolution() == doctest::Approx(4.2));
  CHECK_THROWS_AS(resample(RasterImage(3, 3, 1, 1.0), 10.0), Error);
}

TEST_CASE("bilinear resample of a constant image is constant") {
  RasterImage img(50, 30, 3, 1.0);
  std::fill(img.pixels().begin(), img.pixels().end(), std::uint8_t{117});
  for (double f : {0.5, 1.7, 4.5}) {
    const auto out = resample(img, f);
    CHECK(std::all_of(out.pixels().begin(), out.pixels().end(), [](auto v) { return v == 117; }));
  }
}

TEST_CASE("crop fills with the nearest edge or the enclosing raster") {
  RasterImage src(4, 4, 1, 1.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) src.at(x, y) = static_cast<std::uint8_t>(10 * y + x);
  const auto edge = crop_with_fill(src, {0, 0}, 4);
  CHECK(edge.at(0, 0) == src.at(0, 0));  // (-2,-2) clamps to the corner
  CHECK(edge.at(3, 3) == src.at(1, 1));

  RasterImage big(8, 8, 1, 1.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) big.at(x, y) = static_cast<std::uint8_t>(100 + 10 * y + x);
  const EnclosingRaster ctx{&big, 2, 2};
  const auto filled = crop_with_fill(src, {0, 0}, 4, FillPolicy::kSourceContext, &ctx);
  CHECK(filled.at(0, 0) == big.at(0, 0));
  CHECK(filled.at(2, 2) == src.at(0, 0));
  CHECK_THROWS_AS(crop_with_fill(src, {0, 0}, 4, FillPolicy::kSourceContext), Error);
}

TEST_CASE("dataset statistics match a two-pass double oracle") {
  std::vector<RasterImage> imgs;
  for (int i = 0; i < 5; ++i) imgs.push_back(random_image(13 + i, 7, 3, 1000 + i));
  const auto stats = compute_dataset_stats(std::span<const RasterImage>(imgs));
  for (int c = 0; c < 3; ++c) {
    long double s = 0, n = 0;
    for (const auto& im : imgs)
      for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x) s += im.at(x, y, c), n += 1;
    const long double mean = s / n;
    long double q = 0;
    for (const auto& im : imgs)
      for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x) q += (im.at(x, y, c) - mean) * (im.at(x, y, c) - mean);
    CHECK(stats.mean[c] == doctest::Approx(static_cast<double>(mean)).epsilon(1e-12));
    CHECK(stats.stddev[c] == doctest::Approx(static_cast<double>(std::sqrt(q / n))).epsilon(1e-10));
  }
  // Float path agrees with the integer path.
  std::vector<FloatImage> f;
  for (const auto& im : imgs) {
    FloatImage fi(im.width(), im.height(), 3, im.resolution());
    std::copy(im.pixels().begin(), im.pixels().end(), fi.pixels().begin());
    f.push_back(fi);
  }
  const auto fstats = compute_dataset_stats(std::span<const FloatImage>(f));
  for (int c = 0; c < 3; ++c) {
    CHECK(fstats.mean[c] == doctest::Approx(stats.mean[c]).epsilon(1e-9));
    CHECK(fstats.stddev[c] == doctest::Approx(stats.stddev[c]).epsilon(1e-9));
  }
}

TEST_CASE("normalize then denormalize recovers the image") {
  const auto img = random_image(9, 9, 3, 4);
  const std::vector<RasterImage> one{img};
  const auto stats = compute_dataset_stats(std::span<const RasterImage>(one));
  const auto z = normalize(img, stats);
  double mean = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) mean += z.at(x, y, 1);
  CHECK(mean / 81 == doctest::Approx(0.0).epsilon(1e-5));
  const auto back = denormalize(z, stats);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back.pixels()[i] == doctest::Approx(img.pixels()[i]).epsilon(1e-4));
}

TEST_CASE("HSV conversion round-trips and saturation matches the definition") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 2000; ++i) {
    const double r = (gen() % 256) / 255.0, g = (gen() % 256) / 255.0, b = (gen() % 256) / 255.0;
    double r2, g2, b2;
    hsv_to_rgb(rgb_to_hsv(r, g, b), r2, g2, b2);
    CHECK(r2 == doctest::Approx(r).epsilon(1e-12));
    CHECK(g2 == doctest::Approx(g).epsilon(1e-12));
    CHECK(b2 == doctest::Approx(b).epsilon(1e-12));
    const int R = static_cast<int>(r * 255 + .5), G = static_cast<int>(g * 255 + .5),
              B = static_cast<int>(b * 255 + .5);
    const int mx = std::max({R, G, B}), mn = std::min({R, G, B});
    const double exact = mx == 0 ? 0.0 : 255.0 * (mx - mn) / mx;
    CHECK(std::abs(saturation8(R, G, B) - exact) <= 0.5 + 1e-9);
  }
}

// --- reference vs parallel kernels -------------------------------------------

TEST_CASE("parallel image kernels equal the serial reference") {
  const auto img = random_image(61, 47, 3, 77);
  const kern::ImageView v{img.data(), img.width(), img.height(), 3};
  for (auto [w, h] : {std::pair{20, 15}, std::pair{61, 47}, std::pair{130, 90}}) {
    std::vector<std::uint8_t> a(w * h * 3), b(w * h * 3);
    kern::reference::resample_bilinear(v, {a.data(), w, h, 3});
    kern::parallel::resample_bilinear(v, {b.data(), w, h, 3});
    CHECK(a == b);
    kern::reference::resample_nearest(v, {a.data(), w, h, 3});
    kern::parallel::resample_nearest(v, {b.data(), w, h, 3});
    CHECK(a == b);
  }
  std::vector<std::uint8_t> s1(61 * 47), s2(61 * 47);
  kern::reference::saturation_plane(v, s1.data());
  kern::parallel::saturation_plane(v, s2.data());
  CHECK(s1 == s2);
  CHECK(kern::reference::histogram(img.pixels()) == kern::parallel::histogram(img.pixels()));

  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto map = histo::testing::random_label_map(17, 11, gen);
    const kern::LabelGridView g{map.cells.data(), map.width, map.height};
    std::vector<std::uint8_t> a(map.cells.size()), b(map.cells.size());
    for (auto mode : {kern::MedianMode::kOrdinal, kern::MedianMode::kMajority}) {
      kern::reference::median_filter_labels(g, 5, mode, a.data());
      kern::parallel::median_filter_labels(g, 5, mode, b.data());
      CHECK(a == b);
    }
    kern::reference::dilate_labels(g, 2, a.data());
    kern::parallel::dilate_labels(g, 2, b.data());
    CHECK(a == b);
  }
}

TEST_CASE_TEMPLATE("parallel convolutions equal the serial reference", T, float, double) {
  const int n = 2, h = 9, w = 7, cin = 5, cout = 6;
  for (auto geo : {kern::ConvGeometry{1, 1, 0}, kern::ConvGeometry{3, 1, 1}, kern::ConvGeometry{7, 2, 3}}) {
    const int oh = geo.output_extent(h), ow = geo.output_extent(w);
    // The input lives inside a wider buffer to exercise pitch and offset.
    const int pitch = cin + 3, offset = 2;
    auto in = random_values<T>(static_cast<std::size_t>(n) * h * w * pitch, 1);
    auto weight = random_values<T>(static_cast<std::size_t>(cout) * geo.kernel * geo.kernel * cin, 2);
    auto bias = random_values<T>(cout, 3);
    auto dout = random_values<T>(static_cast<std::size_t>(n) * oh * ow * cout, 4);
    const kern::FeatureMap<const T> fin{in.data(), n, h, w, pitch, offset, cin};
    std::vector<T> o1(dout.size()), o2(dout.size());
    kern::reference::conv2d_forward<T>(fin, weight.data(), bias.data(), {o1.data(), n, oh, ow, cout, 0, cout}, geo);
    kern::parallel::conv2d_forward<T>(fin, weight.data(), bias.data(), {o2.data(), n, oh, ow, cout, 0, cout}, geo);
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o2[i] == doctest::Approx(o1[i]).epsilon(1e-5));

    const kern::FeatureMap<const T> fdout{dout.data(), n, oh, ow, cout, 0, cout};
    std::vector<T> d1(in.size(), T(0)), d2(in.size(), T(0));
    kern::reference::conv2d_backward_input<T>(fdout, weight.data(), {d1.data(), n, h, w, pitch, offset, cin}, geo);
    kern::parallel::conv2d_backward_input<T>(fdout, weight.data(), {d2.data(), n, h, w, pitch, offset, cin}, geo);
    for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d2[i] == doctest::Approx(d1[i]).epsilon(1e-5));

    std::vector<T> w1(weight.size(), T(0)), w2(weight.size(), T(0)), b1(cout, T(0)), b2(cout, T(0));
    kern::reference::conv2d_backward_params<T>(fin, fdout, w1.data(), b1.data(), geo);
    kern::parallel::conv2d_backward_params<T>(fin, fdout, w2.data(), b2.data(), geo);
    for (std::size_t i = 0; i < w1.size(); ++i) CHECK(w2[i] == doctest::Approx(w1[i]).epsilon(1e-5));
    for (int i = 0; i < cout; ++i) CHECK(b2[i] == doctest::Approx(b1[i]).epsilon(1e-5));
  }
}
