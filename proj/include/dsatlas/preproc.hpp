#pragma once

#include <optional>
#include <string>

#include "dsatlas/image.hpp"

namespace dsatlas {

enum class Polarity { ContrastDark, ContrastBright };

/// Mask extraction parameters, all config-exposed. Defaults: iodine appears
/// dark in subtracted runs, Otsu threshold, components under 100 px dropped,
/// one-pixel erosion, 8-connectivity.
struct PreprocParams {
    Polarity polarity = Polarity::ContrastDark;
    std::optional<float> fixed_threshold;  // nullopt = Otsu over a 256-bin histogram
    int min_component_px = 100;
    int erosion_radius = 1;
    int connectivity = 8;  // 4 or 8

    void validate() const;
};

PreprocParams load_preproc_params(const std::string& path);
void save_preproc_params(const PreprocParams& p, const std::string& path);

/// pixel-wise arithmetic mean over frames (double accumulation)
GrayImage temporal_average(const FrameSequence& seq);

/// Otsu threshold over a 256-bin histogram of [0,1] intensities: returns the
/// upper edge of the chosen background bin. Throws "no separable classes" on
/// a degenerate (single-class) histogram.
float otsu_threshold(const GrayImage& img);

/// ContrastDark inverts intensities first; pixels strictly above the
/// threshold become foreground.
BinaryMask threshold(const GrayImage& img, const PreprocParams& params);

/// drops connected components with area < min_component_px
BinaryMask filter_components(const BinaryMask& mask, int min_component_px, int connectivity);

/// binary erosion with a square structuring element of half-width radius;
/// outside the image counts as background
BinaryMask erode(const BinaryMask& mask, int radius);

/// background regions not reachable from the border via background
/// 4-connectivity become foreground
BinaryMask fill_holes(const BinaryMask& mask);

/// erosion then fill-holes
BinaryMask refine(const BinaryMask& mask, int erosion_radius);

struct PreprocDebug {
    GrayImage averaged;
    BinaryMask raw_threshold;
};

/// the whole chain: temporal_average -> threshold -> filter_components -> refine
BinaryMask make_mask(const FrameSequence& seq, const PreprocParams& params,
                     PreprocDebug* debug = nullptr);

}  // namespace dsatlas
