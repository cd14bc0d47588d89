#pragma once

#include <optional>
#include <string>
#include <utility>

#include "dsatlas/image.hpp"

namespace dsatlas {

/// Loads all *.png in a directory, lexicographic file order = frame order.
/// range is an inclusive 0-based [first, last] frame window (the operator's
/// carotid-frame exclusion); omit it to keep everything. spacing_mm applies
/// to every frame (PNG carries no physical spacing).
FrameSequence load_frames(const std::string& dir,
                          std::optional<std::pair<int, int>> range = std::nullopt,
                          std::array<double, 2> spacing_mm = {1.0, 1.0});

}  // namespace dsatlas
