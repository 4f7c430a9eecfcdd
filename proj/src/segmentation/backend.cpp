#include "histo/segmentation/backend.hpp"

#include <cstdio>
#include <cstdlib>

#include "histo/dnn/train.hpp"
#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/text.hpp"

namespace histo {

BackendMetadata ConstantBackend::metadata() const {
  return {"constant", physical_, pixels_, kNumClasses, std::nullopt};
}

std::vector<std::vector<double>> ConstantBackend::classify(const PatchBatch& batch) {
  std::vector<double> row(kNumClasses, 0.0);
  row[static_cast<std::size_t>(code(label_))] = 1.0;
  return std::vector<std::vector<double>>(batch.patches.size(), row);
}

template <typename T>
DenseNetBackend<T>::DenseNetBackend(dnn::NetworkSpec spec, dnn::ParamStore<T> params,
                                    DatasetStats stats, double patch_physical_um,
                                    int patch_pixel_px)
    : spec_(std::move(spec)),
      params_(std::move(params)),
      stats_(std::move(stats)),
      physical_(patch_physical_um),
      pixels_(patch_pixel_px) {
  params_.check_matches(spec_);
}

template <typename T>
BackendMetadata DenseNetBackend<T>::metadata() const {
  return {"densenet", physical_, pixels_, spec_.num_classes, stats_};
}

template <typename T>
std::vector<std::vector<double>> DenseNetBackend<T>::classify(const PatchBatch& batch) {
  const auto preds = dnn::predict(spec_, params_, std::span<const RasterImage>(batch.patches),
                                  stats_, static_cast<int>(batch.patches.size()) + 1);
  std::vector<std::vector<double>> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.probabilities);
  return out;
}

template class DenseNetBackend<float>;
template class DenseNetBackend<double>;

ExternalProcessBackend::ExternalProcessBackend(std::string command, BackendMetadata metadata)
    : command_(std::move(command)), metadata_(std::move(metadata)) {
  require(!command_.empty(), "external backend needs a command");
}

std::vector<std::vector<double>> ExternalProcessBackend::classify(const PatchBatch& batch) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("histo-batch-" + text::hex64(text::fnv1a(command_) ^ reinterpret_cast<std::uintptr_t>(this)) +
                        "-" + std::to_string(batches_++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};

  std::string listing;
  for (std::size_t i = 0; i < batch.patches.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "patch_%05zu.png", i);
    write_png(dir / name, batch.patches[i]);
    listing += std::string(name) + "\n";
  }
  text::write_file(dir / "batch.txt", listing);
  const std::string cmd = command_ + " '" + dir.string() + "'";
  if (std::system(cmd.c_str()) != 0)
    fail(ErrorKind::kData, "external classifier failed: " + command_);

  const auto contents = text::read_file(dir / "probabilities.txt");
  std::vector<std::vector<double>> out;
  for (auto raw : text::split(contents, '\n')) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto field : text::split(line, ' '))
      if (!text::trim(field).empty()) row.push_back(text::parse_real(field, "probability"));
    out.push_back(std::move(row));
  }
  if (out.size() != batch.patches.size())
    fail(ErrorKind::kData, "external classifier returned " + std::to_string(out.size()) +
                               " rows for " + std::to_string(batch.patches.size()) + " patches");
  return out;
}

}  // namespace histo
