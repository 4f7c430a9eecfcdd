#include "histo/dnn/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo::dnn {

static_assert(std::endian::native == std::endian::little,
              "weights files are written in native little-endian order");

std::vector<TensorShape> parameter_shapes(const NetworkSpec& spec) {
  spec.validate();
  std::vector<TensorShape> out;
  auto conv = [&](const std::string& name, int out_c, int k, int in_c) {
    const std::size_t o = out_c, kk = static_cast<std::size_t>(k) * k, i = in_c;
    out.push_back({name + ".weight", {o, static_cast<std::size_t>(k), static_cast<std::size_t>(k), i},
                   kk * i, kk * o, false});
    out.push_back({name + ".bias", {o}, 0, 0, false});
  };
  conv("stem.conv", spec.initial_channels, 7, spec.input_channels);
  for (int b = 0; b < static_cast<int>(spec.block_layers.size()); ++b) {
    const std::string block = "block" + std::to_string(b + 1);
    int c = spec.block_input_channels(b);
    for (int l = 0; l < spec.block_layers[b]; ++l) {
      const std::string layer = block + ".layer" + std::to_string(l + 1);
      conv(layer + ".conv1", spec.bottleneck_channels(), 1, c);
      conv(layer + ".conv2", spec.growth_rate, 3, spec.bottleneck_channels());
      c += spec.growth_rate;
    }
    conv("transition" + std::to_string(b + 1) + ".conv", spec.transition_output_channels(b), 1, c);
  }
  const std::size_t f = spec.feature_channels(), k = spec.num_classes;
  out.push_back({"head.fc.weight", {k, f}, f, k, true});
  out.push_back({"head.fc.bias", {k}, 0, 0, true});
  return out;
}

std::size_t head_tensor_begin(const NetworkSpec& spec) { return parameter_shapes(spec).size() - 2; }

template <typename T>
ParamStore<T>::ParamStore(const NetworkSpec& spec) {
  for (auto& s : parameter_shapes(spec)) {
    const std::size_t n =
        std::accumulate(s.shape.begin(), s.shape.end(), std::size_t{1}, std::multiplies<>());
    tensors_.push_back({std::move(s.name), std::move(s.shape), std::vector<T>(n, T(0))});
  }
}

template <typename T>
const Tensor<T>& ParamStore<T>::find(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  fail(ErrorKind::kInvalidArgument, "no parameter tensor named '" + name + "'");
}

template <typename T>
Tensor<T>& ParamStore<T>::find(const std::string& name) {
  return const_cast<Tensor<T>&>(std::as_const(*this).find(name));
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <typename T>
void ParamStore<T>::check_matches(const NetworkSpec& spec) const {
  const auto shapes = parameter_shapes(spec);
  if (shapes.size() != tensors_.size())
    fail(ErrorKind::kData, "parameter store has " + std::to_string(tensors_.size()) +
                               " tensors, network expects " + std::to_string(shapes.size()));
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors_[i].name != shapes[i].name)
      fail(ErrorKind::kData, "parameter " + std::to_string(i) + " is '" + tensors_[i].name +
                                 "', expected '" + shapes[i].name + "'");
    const std::size_t n = std::accumulate(shapes[i].shape.begin(), shapes[i].shape.end(),
                                          std::size_t{1}, std::multiplies<>());
    if (tensors_[i].shape != shapes[i].shape || tensors_[i].data.size() != n)
      fail(ErrorKind::kData, "parameter '" + shapes[i].name + "' has the wrong shape");
  }
}

template <typename T>
ParamStore<T> init_xavier_uniform(const NetworkSpec& spec, std::uint64_t seed) {
  ParamStore<T> store(spec);
  const auto shapes = parameter_shapes(spec);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].fan_in == 0) continue;  // bias
    const double bound =
        std::sqrt(6.0 / static_cast<double>(shapes[i].fan_in + shapes[i].fan_out));
    Rng rng(derive_seed(seed, i));
    for (auto& v : store[i].data) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return store;
}

template <typename To, typename From>
ParamStore<To> convert_params(const ParamStore<From>& store) {
  ParamStore<To> out;
  for (const auto& t : store.tensors())
    out.push_back({t.name, t.shape, std::vector<To>(t.data.begin(), t.data.end())});
  return out;
}

namespace {

template <typename T>
constexpr std::uint8_t dtype_code() {
  return std::is_same_v<T, float> ? 1 : 2;
}

template <typename V>
void put(std::ofstream& f, V v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), f_(path, std::ios::binary) {
    if (!f_) fail(ErrorKind::kIo, "cannot open weights file " + path.string());
  }
  template <typename V>
  V get() {
    V v;
    bytes(&v, sizeof v);
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f_.gcount()) != n)
      fail(ErrorKind::kFormat, "weights file " + path_.string() + " is truncated");
  }
  bool at_end() { return f_.peek() == std::char_traits<char>::eof(); }

 private:
  std::filesystem::path path_;
  std::ifstream f_;
};

template <typename T, typename S>
void read_values(Reader& r, std::vector<T>& out, std::size_t n) {
  std::vector<S> raw(n);
  r.bytes(raw.data(), n * sizeof(S));
  out.assign(raw.begin(), raw.end());
}

}  // namespace

template <typename T>
void save_params(const std::filesystem::path& path, const ParamStore<T>& store) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write weights file " + path.string());
  f.write("HPDN", 4);
  put(f, kWeightsVersion);
  put(f, static_cast<std::uint32_t>(store.size()));
  for (const auto& t : store.tensors()) {
    put(f, static_cast<std::uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put(f, dtype_code<T>());
    put(f, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put(f, static_cast<std::uint64_t>(d));
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  }
  if (!f) fail(ErrorKind::kIo, "failed writing weights file " + path.string());
}

template <typename T>
LoadedParams<T> load_params(const std::filesystem::path& path, const NetworkSpec& spec) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "HPDN", 4) != 0)
    fail(ErrorKind::kFormat, path.string() + " is not a weights file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kWeightsVersion)
    fail(ErrorKind::kFormat, "unsupported weights version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  if (count > 1u << 20) fail(ErrorKind::kFormat, "implausible tensor count in weights file");
  LoadedParams<T> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor<T> t;
    const auto len = r.get<std::uint32_t>();
    if (len > 4096) fail(ErrorKind::kFormat, "implausible tensor name length in weights file");
    t.name.resize(len);
    r.bytes(t.name.data(), len);
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint8_t>();
    if (rank > 8) fail(ErrorKind::kFormat, "implausible tensor rank in weights file");
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint64_t>();
      if (dim > (1ULL << 32)) fail(ErrorKind::kFormat, "implausible tensor dimension");
      t.shape.push_back(static_cast<std::size_t>(dim));
      n *= static_cast<std::size_t>(dim);
    }
    if (n > (1ULL << 31)) fail(ErrorKind::kFormat, "implausible tensor size in weights file");
    if (dtype == 1)
      read_values<T, float>(r, t.data, n);
    else if (dtype == 2)
      read_values<T, double>(r, t.data, n);
    else
      fail(ErrorKind::kFormat, "unknown dtype code " + std::to_string(dtype));
    if (dtype != dtype_code<T>()) out.converted = true;
    out.store.push_back(std::move(t));
  }
  if (!r.at_end()) fail(ErrorKind::kFormat, "trailing bytes after weights data");
  out.store.check_matches(spec);
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template ParamStore<float> init_xavier_uniform<float>(const NetworkSpec&, std::uint64_t);
template ParamStore<double> init_xavier_uniform<double>(const NetworkSpec&, std::uint64_t);
template ParamStore<float> convert_params<float, double>(const ParamStore<double>&);
template ParamStore<double> convert_params<double, float>(const ParamStore<float>&);
template ParamStore<float> convert_params<float, float>(const ParamStore<float>&);
template ParamStore<double> convert_params<double, double>(const ParamStore<double>&);
template void save_params<float>(const std::filesystem::path&, const ParamStore<float>&);
template void save_params<double>(const std::filesystem::path&, const ParamStore<double>&);
template LoadedParams<float> load_params<float>(const std::filesystem::path&, const NetworkSpec&);
template LoadedParams<double> load_params<double>(const std::filesystem::path&, const NetworkSpec&);

}  // namespace histo::dnn
