#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace histo {

/// Four-way tissue class. The ordinal order is meaningful: median filtering
/// sorts by it and dilation resolves overlaps by it.
enum class LabelClass : std::uint8_t {
  kNormal = 0,
  kBenign = 1,
  kInSitu = 2,
  kInvasive = 3,
};

inline constexpr int kNumClasses = 4;

constexpr int code(LabelClass c) noexcept { return static_cast<int>(c); }

constexpr bool is_valid_label_code(int v) noexcept { return v >= 0 && v < kNumClasses; }

constexpr LabelClass label_from_code(int v) noexcept { return static_cast<LabelClass>(v); }

constexpr std::string_view label_name(LabelClass c) noexcept {
  constexpr std::array<std::string_view, kNumClasses> names = {"normal", "benign", "in_situ",
                                                               "invasive"};
  return names[static_cast<std::size_t>(c)];
}

}  // namespace histo
