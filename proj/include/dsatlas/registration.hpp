#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsatlas/bspline.hpp"
#include "dsatlas/image.hpp"

namespace dsatlas {

/// 2D affine map about a fixed rotation center:
///   q = A * (p - c) + c + t      (all coordinates in mm)
struct Affine2 {
    double a11 = 1, a12 = 0, a21 = 0, a22 = 1;
    double tx = 0, ty = 0;      // mm
    double cx = 0, cy = 0;      // rotation center, mm

    void apply(double x, double y, double& qx, double& qy) const {
        const double rx = x - cx, ry = y - cy;
        qx = a11 * rx + a12 * ry + cx + tx;
        qy = a21 * rx + a22 * ry + cy + ty;
    }
    double det() const { return a11 * a22 - a12 * a21; }
    /// rotation angle of the polar decomposition, degrees
    double rotation_deg() const;
    void validate() const;  // throws on singular matrix
};

struct RegistrationConfig {
    int resolutions_affine = 20;
    int resolutions_bspline = 16;
    double max_step_length = 2.0;   // scaled parameter space
    int histogram_bins = 32;
    int lbfgs_memory = 5;
    int max_iterations_per_level = 200;
    double convergence_tol = 1e-6;  // relative cost change
    bool auto_scale = true;

    void validate() const;
};

struct LevelLog {
    std::string stage;  // "affine" | "bspline"
    int level = 0;      // 0 = coarsest
    int width = 0, height = 0;
    int iterations = 0;
    double initial_cost = 0, final_cost = 0;
};

struct TransformPair {
    Affine2 affine;
    std::optional<BSplineField2> bspline;
    RegistrationConfig config;
    double final_cost = 0;  // negative MI at the finest level of the last stage
    std::vector<LevelLog> log;
};

/// fixed-image sampling grid for resampling operations
struct FixedGrid {
    int width = 0;
    int height = 0;
    std::array<double, 2> spacing = {1.0, 1.0};
    static FixedGrid like(const GrayImage& img) {
        return {img.width, img.height, img.spacing};
    }
};

struct MIResult {
    double cost = 0;          // negative mutual information, natural log
    bool informative = true;  // false when the fixed image is constant
};

/// Joint-histogram mutual information over bins x bins with linear
/// (partial-volume) bin assignment; intensities are clamped to [0,1].
/// Returns -MI; a constant fixed image yields cost 0, flagged.
MIResult mutual_information(const GrayImage& fixed, const GrayImage& moving, int bins);

/// Resamples `moving` onto the fixed grid through the pair: fixed point p ->
/// p + bspline displacement -> affine -> bilinear sample (outside = 0).
GrayImage apply_transform(const GrayImage& moving, const TransformPair& pair,
                          const FixedGrid& grid);
GrayImage apply_affine(const GrayImage& moving, const Affine2& affine, const FixedGrid& grid);

enum class TransformKind { Affine, BSpline };

/// Per-parameter scales for scaled-space optimization: matrix entries get the
/// RMS displacement of the fixed image's corners under a unit parameter
/// change; translations (and B-spline coefficients, which are mm
/// displacements) get 1. auto_scale=false yields all ones.
std::vector<double> estimate_scales(TransformKind kind, const FixedGrid& fixed,
                                    std::size_t n_params, bool auto_scale);

struct RegisterResult {
    TransformPair pair;
    bool improved_at_finest = true;  // cost improved beyond initialization at the finest level
    int effective_levels = 0;        // after the >=32 px clamp
};

/// Affine stage: multi-resolution (factor-2 Gaussian pyramid, level count
/// clamped so min(w,h) >= 32), L-BFGS on -MI with central-difference
/// gradients in scaled space, centroid initialization.
RegisterResult register_affine(const GrayImage& fixed, const GrayImage& moving,
                               const RegistrationConfig& config);

/// B-spline stage on top of a fixed affine: control grid starts at
/// image-extent/8 spacing and halves per level (exact dyadic refinement
/// between levels), zero-displacement initialization.
RegisterResult register_bspline(const GrayImage& fixed, const GrayImage& moving,
                                const Affine2& affine, const RegistrationConfig& config);

/// factor-2 Gaussian pyramid clamped to keep min(w,h) >= min_dim;
/// result[0] is the coarsest level
std::vector<GrayImage> gaussian_pyramid(const GrayImage& img, int max_levels, int min_dim = 32);

/// transform (de)serialization; numbers carry 17 significant digits
std::string transform_pair_to_json(const TransformPair& pair);
TransformPair transform_pair_from_json(const std::string& text);
void save_transform_pair(const TransformPair& pair, const std::string& path);
TransformPair load_transform_pair(const std::string& path);

}  // namespace dsatlas
