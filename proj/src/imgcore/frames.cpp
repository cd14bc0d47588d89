#include "dsatlas/frames.hpp"

#include <algorithm>
#include <filesystem>

#include "dsatlas/error.hpp"
#include "dsatlas/png_io.hpp"

namespace dsatlas {

FrameSequence load_frames(const std::string& dir,
                          std::optional<std::pair<int, int>> range,
                          std::array<double, 2> spacing_mm) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            names.push_back(entry.path().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error("no PNG frames in directory: " + dir);

    if (range) {
        const auto [first, last] = *range;
        if (first > last) throw Error("empty frame range");
        if (first < 0 || last >= int(names.size()))
            throw Error("frame range out of bounds (have " + std::to_string(names.size()) +
                        " frames)");
        names = std::vector<std::string>(names.begin() + first, names.begin() + last + 1);
    }

    FrameSequence seq;
    seq.frames.reserve(names.size());
    for (const auto& name : names) {
        GrayImage img = read_png_gray(name);
        img.spacing = spacing_mm;
        if (!seq.frames.empty() &&
            (img.width != seq.frames[0].width || img.height != seq.frames[0].height))
            throw Error("mixed dimensions in frame directory: " + dir);
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

}  // namespace dsatlas
