#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "dsatlas/atlas.hpp"
#include "dsatlas/image.hpp"

namespace dsatlas {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

/// C-arm acquisition geometry. World frame is centered at the isocenter;
/// the source sits at sid * p(alpha, beta) with p(0,0) = (0,1,0), the
/// lateral view alpha=90 giving p = (1,0,0), and beta tilting toward the
/// patient superior axis (+z). Detector center = source - sdd * p.
struct ConeBeamGeometry {
    double sid_mm = 0;   // source to isocenter
    double sdd_mm = 0;   // source to detector
    double primary_angle_deg = 0;
    double secondary_angle_deg = 0;
    int det_cols = 0;
    int det_rows = 0;
    std::array<double, 2> det_spacing_mm = {1.0, 1.0};  // (su, sv)

    void validate() const;  // 0 < sid < sdd, detector at least 1x1, positive spacing
};

/// AP -> alpha=0, Lateral -> alpha=90, beta=0 in both
void apply_view_preset(ConeBeamGeometry& g, ViewLabel view);

/// Sidecar JSON mirroring the relevant DICOM tags:
///   sid_mm            (0018,1111) Distance Source to Patient
///   sdd_mm            (0018,1110) Distance Source to Detector
///   primary_angle_deg (0018,1510) Positioner Primary Angle    [optional]
///   secondary_angle_deg (0018,1511) Positioner Secondary Angle [optional]
///   det_cols/det_rows (0028,0011)/(0028,0010) Columns/Rows
///   det_spacing_mm    (0018,1164) Imager Pixel Spacing [su, sv]
/// Missing angles are left at 0 and reported so the caller can apply the
/// view preset.
ConeBeamGeometry load_geometry(const std::string& path, bool* angles_present = nullptr);
void save_geometry(const ConeBeamGeometry& g, const std::string& path);

struct DetectorFrame {
    Vec3 source;
    Vec3 center;  // detector center
    Vec3 u_axis;  // unit, along detector columns
    Vec3 v_axis;  // unit, along patient superior at alpha=beta=0
};

DetectorFrame place_geometry(const ConeBeamGeometry& g);

/// sdd / sid: magnification of an object at the isocenter
double magnification(const ConeBeamGeometry& g);

struct Projection {
    GrayImage integral;                   // per-pixel ray path length through selected labels, mm
    std::map<int, GrayImage> per_label;   // per-label path length integrals, mm
    float epsilon_mm = 0;                 // silhouette threshold: 0.5 * min voxel spacing

    BinaryMask silhouette() const;
    std::map<int, BinaryMask> per_label_silhouettes() const;
};

/// Cone-beam forward projection: for each detector pixel, the ray from the
/// source through the pixel center accumulates exact voxel-intersection
/// lengths over voxels whose label is in `labels`. Incremental parametric
/// traversal; deterministic output independent of any parallelism.
Projection project(const LabelVolume& volume, const std::set<int>& labels,
                   const ConeBeamGeometry& g);

}  // namespace dsatlas
