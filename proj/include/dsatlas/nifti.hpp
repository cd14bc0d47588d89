#pragma once

#include <string>

#include "dsatlas/image.hpp"

namespace dsatlas {

// Minimal uncompressed little-endian NIfTI-1 support. Header fields used:
// sizeof_hdr, dim, datatype, bitpix, pixdim, vox_offset, qform_code,
// qoffset_x/y/z, magic. Orientation quaternions are ignored; the stored axis
// order is taken as the world axis order.

/// Reads a 3D label volume. Accepted datatypes: uint8 (2), int16 (4),
/// float32 (16), uint16 (512). Float voxels are rounded to the nearest
/// integer; negative values are rejected.
LabelVolume read_nifti(const std::string& path);

/// Writes labels as uint16 single-file .nii (labels must fit in 16 bits).
void write_nifti(const LabelVolume& vol, const std::string& path);

}  // namespace dsatlas
