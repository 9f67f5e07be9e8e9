#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "disent/dataset.hpp"

namespace disent {

/// 8-bit PNG with 1 (gray) or 3 (RGB) interleaved channels, rows top to bottom.
void write_png(const std::filesystem::path& path, int width, int height, int channels,
               std::span<const std::uint8_t> pixels);

/// Intensities in [0, 1] quantized to 8 bits.
void write_observation_png(const std::filesystem::path& path, const Observation& image);

}  // namespace disent
