#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "histo/imaging/raster.hpp"
#include "histo/text.hpp"

namespace histo {

/// Pixel data plus whatever physical resolution the container carried.
struct DecodedImage {
  RasterImage image;
  std::optional<double> resolution_um;
};

DecodedImage decode_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RasterImage& image);

/// Palette image; indices refer to `palette` entries.
struct IndexedImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> indices;
  std::vector<std::array<std::uint8_t, 3>> palette;
};

void write_indexed_png(const std::filesystem::path& path, const IndexedImage& image);
IndexedImage read_indexed_png(const std::filesystem::path& path);

enum class TiffCompression { kNone, kDeflate };

/// Single-level, single-strip, 8-bit baseline TIFF with resolution tags.
void write_tiff(const std::filesystem::path& path, const RasterImage& image,
                TiffCompression compression = TiffCompression::kDeflate);

/// Reads strip-organized 8-bit gray or RGB TIFF, uncompressed or deflate.
DecodedImage decode_tiff(const std::filesystem::path& path);

// Sidecar metadata lives at "<raster path>.meta".

inline constexpr std::string_view kSidecarHeader = "HISTOPIPE-META v1";

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);
void write_sidecar(const std::filesystem::path& raster_path, const text::KeyValueDoc& doc);
std::optional<text::KeyValueDoc> read_sidecar(const std::filesystem::path& raster_path);

/// Write a PNG or TIFF (chosen by extension) and its sidecar carrying the
/// resolution plus any `extra` keys.
void write_raster(const std::filesystem::path& path, const RasterImage& image,
                  const std::map<std::string, std::string>& extra = {});

/// Read a PNG or TIFF. Resolution comes from the sidecar, else the TIFF tags,
/// else `fallback_resolution_um`; with none of these the read fails.
RasterImage read_raster(const std::filesystem::path& path,
                        std::optional<double> fallback_resolution_um = std::nullopt);

}  // namespace histo
