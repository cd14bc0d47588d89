#pragma once

#include <cstdint>
#include <string>

#include "dsatlas/atlas.hpp"
#include "dsatlas/image.hpp"
#include "dsatlas/projector.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas {

/// Seeded synthetic case generator: known geometry, known warp, known mask —
/// the ground-truth oracle the clinical data cannot provide.
struct PhantomConfig {
    std::array<int, 3> atlas_dims = {96, 96, 96};
    int n_territories = 3;
    ConeBeamGeometry geometry;  // zero-initialized; defaulted by default_phantom_geometry
    InjectionSite site = InjectionSite::Posterior;
    ViewLabel view = ViewLabel::Anteroposterior;
    // warp bounds (generator caps; validated against the hard limits below)
    double max_translation_px = 20.0;   // hard limit 20
    double max_rotation_deg = 10.0;     // hard limit 10
    double min_scale = 0.9, max_scale = 1.1;  // hard limits [0.9, 1.1]
    double max_bspline_px = 8.0;        // hard limit 8; 0 = affine-only
    int bspline_cells = 4;              // coarse control grid keeps the warp smooth
    double noise_sigma = 0.05;
    int n_frames = 8;
    double signal_amplitude = 0.8;      // contrast dip depth on a bright background

    void validate() const;
};

ConeBeamGeometry default_phantom_geometry(int det_cols = 256, int det_rows = 256);

struct PhantomCase {
    LabelVolume atlas;
    ConeBeamGeometry geometry;
    InjectionSite site = InjectionSite::Posterior;
    ViewLabel view = ViewLabel::Anteroposterior;
    Affine2 true_affine;
    std::optional<BSplineField2> true_bspline;
    std::vector<float> true_field_dx, true_field_dy;  // dense raster, px units, detector grid
    FrameSequence frames;
    BinaryMask true_mask;  // warped silhouette
    Projection projection;  // unwarped projection of the atlas (the moving image source)
    std::uint64_t seed = 0;

    TransformPair true_pair() const;
};

/// Disjoint seeded superellipsoid territories labeled 1..n, centered in the
/// volume; each occupies at least 1% of the voxels.
LabelVolume synth_atlas(std::array<int, 3> dims, int n_territories, std::uint64_t seed);

/// project -> warp by a sampled affine+field -> gamma-variate time modulation
/// -> Gaussian noise -> 16-bit quantization. Regeneration from (config, seed)
/// is bit-identical.
PhantomCase make_case(const LabelVolume& atlas, const PhantomConfig& config, std::uint64_t seed);

/// case directory: frames/*.png, geometry.json, truth.json (+ raw f32 field),
/// true_mask.png, atlas.nii, lut.json
void save_case(const PhantomCase& c, const std::string& dir);
PhantomCase load_case(const std::string& dir);

/// LUT covering the synthetic atlas labels (all sites share the full set)
TerritoryLUT phantom_lut(const LabelVolume& atlas);

}  // namespace dsatlas
