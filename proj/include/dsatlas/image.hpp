#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dsatlas {

/// 2D float intensity raster, row-major, with physical pixel spacing in mm.
/// Intensities are kept in [0,1] by the I/O layer; interior code may hold
/// other finite values (e.g. path lengths in mm) transiently.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::array<double, 2> spacing = {1.0, 1.0};  // (sx, sy) mm/pixel
    std::vector<float> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::array<double, 2> sp = {1.0, 1.0}, float fill = 0.f)
        : width(w), height(h), spacing(sp), data(std::size_t(w) * h, fill) {}

    std::size_t size() const { return data.size(); }
    float& at(int x, int y) { return data[std::size_t(y) * width + x]; }
    float at(int x, int y) const { return data[std::size_t(y) * width + x]; }

    // throws Error on broken invariants (size mismatch, bad spacing, non-finite values)
    void validate() const;
};

/// 2D boolean raster, row-major (stored as 0/1 bytes).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::array<double, 2> spacing = {1.0, 1.0};
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h, std::array<double, 2> sp = {1.0, 1.0}, bool fill = false)
        : width(w), height(h), spacing(sp), data(std::size_t(w) * h, fill ? 1 : 0) {}

    std::size_t size() const { return data.size(); }
    bool at(int x, int y) const { return data[std::size_t(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[std::size_t(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;

    void validate() const;
};

/// 3D voxel grid of non-negative integer territory labels. Row-major with x
/// fastest; label 0 is background. origin is the world position (mm) of the
/// center of voxel (0,0,0).
struct LabelVolume {
    std::array<int, 3> dims = {0, 0, 0};            // (nx, ny, nz)
    std::array<double, 3> spacing = {1.0, 1.0, 1.0};  // mm/voxel
    std::array<double, 3> origin = {0.0, 0.0, 0.0};   // mm
    std::vector<std::int32_t> data;

    LabelVolume() = default;
    LabelVolume(std::array<int, 3> d, std::array<double, 3> sp,
                std::array<double, 3> org = {0.0, 0.0, 0.0})
        : dims(d), spacing(sp), origin(org),
          data(std::size_t(d[0]) * d[1] * d[2], 0) {}

    std::size_t size() const { return data.size(); }
    std::int32_t at(int x, int y, int z) const {
        return data[(std::size_t(z) * dims[1] + y) * dims[0] + x];
    }
    std::int32_t& at(int x, int y, int z) {
        return data[(std::size_t(z) * dims[1] + y) * dims[0] + x];
    }
    // recenters so the volume's physical center sits at the world origin
    void center_on_isocenter();

    void validate() const;
};

/// Ordered stack of dimension-identical frames.
struct FrameSequence {
    std::vector<GrayImage> frames;
    double frame_interval_s = 0.0;  // informational

    void validate() const;
};

/// mask cast to {0,1} floats, keeping spacing
GrayImage mask_to_gray(const BinaryMask& m);

/// strictly-greater threshold
BinaryMask gray_to_mask(const GrayImage& img, float thresh);

}  // namespace dsatlas
