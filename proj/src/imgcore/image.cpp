#include "dsatlas/image.hpp"

#include <algorithm>
#include <cmath>

#include "dsatlas/error.hpp"

namespace dsatlas {

void GrayImage::validate() const {
    if (width < 0 || height < 0 || data.size() != std::size_t(width) * height)
        throw Error("GrayImage: data length does not match width x height");
    if (!(spacing[0] > 0.0) || !(spacing[1] > 0.0))
        throw Error("GrayImage: spacing must be positive");
    for (float v : data)
        if (!std::isfinite(v)) throw Error("GrayImage: non-finite intensity");
}

std::size_t BinaryMask::count() const {
    return std::size_t(std::count_if(data.begin(), data.end(),
                                     [](std::uint8_t v) { return v != 0; }));
}

void BinaryMask::validate() const {
    if (width < 0 || height < 0 || data.size() != std::size_t(width) * height)
        throw Error("BinaryMask: data length does not match width x height");
}

void LabelVolume::center_on_isocenter() {
    for (int a = 0; a < 3; ++a)
        origin[a] = -0.5 * spacing[a] * (dims[a] - 1);
}

void LabelVolume::validate() const {
    if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0 ||
        data.size() != std::size_t(dims[0]) * dims[1] * dims[2])
        throw Error("LabelVolume: data length does not match dims");
    for (double s : spacing)
        if (!(s > 0.0)) throw Error("LabelVolume: spacing must be positive");
    for (std::int32_t v : data)
        if (v < 0) throw Error("LabelVolume: negative label");
}

void FrameSequence::validate() const {
    if (frames.empty()) throw Error("FrameSequence: no frames");
    for (const auto& f : frames) {
        if (f.width != frames[0].width || f.height != frames[0].height)
            throw Error("FrameSequence: mixed dimensions");
    }
}

GrayImage mask_to_gray(const BinaryMask& m) {
    GrayImage g(m.width, m.height, m.spacing);
    for (std::size_t i = 0; i < m.data.size(); ++i) g.data[i] = m.data[i] ? 1.f : 0.f;
    return g;
}

BinaryMask gray_to_mask(const GrayImage& img, float thresh) {
    BinaryMask m(img.width, img.height, img.spacing);
    for (std::size_t i = 0; i < img.data.size(); ++i) m.data[i] = img.data[i] > thresh ? 1 : 0;
    return m;
}

}  // namespace dsatlas
