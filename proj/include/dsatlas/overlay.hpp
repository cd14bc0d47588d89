#pragma once

#include <map>
#include <string>

#include "dsatlas/atlas.hpp"
#include "dsatlas/image.hpp"
#include "dsatlas/projector.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas {

struct LegendEntry {
    std::string name;
    std::array<std::uint8_t, 3> rgb;
};

struct TerritoryOverlay {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> label_map;  // 0 = none
    std::map<int, LegendEntry> legend;
};

/// Warps each per-label path-length integral through the pair; at each pixel
/// the label with the greatest warped path length wins (ties to the smaller
/// id); pixels where every integral stays <= epsilon get 0.
TerritoryOverlay build_overlay(const Projection& projection, const TransformPair& pair,
                               const TerritoryLUT& lut, const FixedGrid& grid);

/// writes <stem>_labels.png (indexed), <stem>_composite.png (RGB, 40%-alpha
/// territories over the background), <stem>_legend.json
void export_overlay(const TerritoryOverlay& ov, const GrayImage& background,
                    const std::string& dir, const std::string& stem);

/// round-trip: label map from an exported labels PNG + legend JSON
TerritoryOverlay import_overlay(const std::string& labels_png, const std::string& legend_json);

}  // namespace dsatlas
