#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dsatlas/image.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas {

struct SSIMParams {
    int window = 11;              // odd
    double sigma = 1.5;           // Gaussian window
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;   // L, intensities normalized to [0,1]
};

struct SSIMResult {
    double mean_ssim = 0;
    int window = 11;
    double k1 = 0.01, k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Gaussian-window SSIM; the mean is taken over the fully-supported interior
/// (window radius cropped from each border). Windows shrink for tiny images.
SSIMResult ssim(const GrayImage& a, const GrayImage& b, const SSIMParams& params = {});

/// SSIM between a binary mask and a warped silhouette binarized at 0.5 —
/// both operands binary, so the score measures shape agreement.
SSIMResult ssim_mask_vs_silhouette(const BinaryMask& fixed, const GrayImage& warped_silhouette,
                                   const SSIMParams& params = {});

/// Ground truth for phantom cases: fixed-grid point p maps to
/// affine(p + field(p)), the field raster holding per-pixel displacements in
/// pixel units.
struct GroundTruthWarp {
    Affine2 affine;
    int width = 0, height = 0;
    std::array<double, 2> spacing = {1.0, 1.0};
    std::vector<float> field_dx, field_dy;  // px units; empty = affine-only

    bool has_field() const { return !field_dx.empty(); }
};

struct TreResult {
    double mean_px = 0;
    double max_px = 0;
    int n_points = 0;
};

/// Mean/max distance (px) between the true and recovered mappings over a
/// uniform grid of sample points inside the mask.
TreResult tre(const GroundTruthWarp& truth, const TransformPair& recovered,
              const BinaryMask& region, int grid_stride = 4);

struct CohortStats {
    int n = 0;
    double mean = 0;
    double stddev = 0;  // population
    double median = 0;
    std::array<std::int64_t, 100> histogram{};  // 0.01-wide bins over [0,1]
    int clamped_negative = 0;                   // values < 0 pushed into the first bin
    bool left_skewed = false;                   // median > mean, reported not asserted
};

/// mean / population std / median (midpoint for even n) and the 0.01-bin
/// histogram; a value on a bin edge falls in the upper bin
CohortStats cohort_stats(const std::vector<double>& values);

/// Dice overlap of two masks (phantom closure checks)
double dice(const BinaryMask& a, const BinaryMask& b);

}  // namespace dsatlas
