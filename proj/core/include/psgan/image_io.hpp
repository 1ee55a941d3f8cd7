#pragma once

#include <filesystem>

#include "psgan/tensor.hpp"

namespace psgan {

/// Reads an 8-bit PNG (gray, palette, RGB or RGBA all accepted) into a
/// (3,H,W) float tensor in [-1,1]: v -> v/127.5 - 1.
Tensorf read_png(const std::filesystem::path& path);

/// Writes a (3,H,W) tensor in [-1,1] as 8-bit RGB PNG, rounding and
/// clamping each value.
void write_png(const std::filesystem::path& path, const Tensorf& image);

}  // namespace psgan
