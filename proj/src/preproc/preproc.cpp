#include "dsatlas/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/kernels.hpp"

namespace dsatlas {

void PreprocParams::validate() const {
    if (fixed_threshold && !(*fixed_threshold > 0.f && *fixed_threshold < 1.f))
        throw Error("fixed threshold must lie in (0,1)");
    if (min_component_px < 0) throw Error("min_component_px must be >= 0");
    if (erosion_radius < 0) throw Error("erosion_radius must be >= 0");
    if (connectivity != 4 && connectivity != 8) throw Error("connectivity must be 4 or 8");
}

PreprocParams load_preproc_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open preproc params: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("preproc params JSON parse error: " + std::string(e.what()));
    }
    PreprocParams p;
    if (j.contains("polarity")) {
        const std::string pol = j["polarity"].get<std::string>();
        if (pol == "ContrastDark") p.polarity = Polarity::ContrastDark;
        else if (pol == "ContrastBright") p.polarity = Polarity::ContrastBright;
        else throw Error("unknown polarity: " + pol);
    }
    if (j.contains("threshold")) {
        if (j["threshold"].is_string()) {
            if (j["threshold"].get<std::string>() != "otsu")
                throw Error("threshold must be \"otsu\" or a number in (0,1)");
            p.fixed_threshold.reset();
        } else {
            p.fixed_threshold = j["threshold"].get<float>();
        }
    }
    if (j.contains("min_component_px")) p.min_component_px = j["min_component_px"].get<int>();
    if (j.contains("erosion_radius")) p.erosion_radius = j["erosion_radius"].get<int>();
    if (j.contains("connectivity")) p.connectivity = j["connectivity"].get<int>();
    p.validate();
    return p;
}

void save_preproc_params(const PreprocParams& p, const std::string& path) {
    nlohmann::ordered_json j;
    j["polarity"] = p.polarity == Polarity::ContrastDark ? "ContrastDark" : "ContrastBright";
    if (p.fixed_threshold) j["threshold"] = *p.fixed_threshold;
    else j["threshold"] = "otsu";
    j["min_component_px"] = p.min_component_px;
    j["erosion_radius"] = p.erosion_radius;
    j["connectivity"] = p.connectivity;
    atomic_write_file(path, j.dump(2) + "\n");
}

GrayImage temporal_average(const FrameSequence& seq) {
    seq.validate();
    const auto& first = seq.frames[0];
    std::vector<double> acc(first.size(), 0.0);
    for (const auto& f : seq.frames) kern::accumulate(acc.data(), f.data.data(), acc.size());
    GrayImage out(first.width, first.height, first.spacing);
    const double inv = 1.0 / double(seq.frames.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = float(acc[i] * inv);
    return out;
}

float otsu_threshold(const GrayImage& img) {
    if (img.size() == 0) throw Error("otsu: empty image");
    std::array<std::int64_t, 256> hist{};
    for (float v : img.data) {
        int bin = int(std::floor(v * 256.f));
        bin = std::clamp(bin, 0, 255);
        ++hist[bin];
    }
    const double total = double(img.size());
    double sum_all = 0;
    for (int i = 0; i < 256; ++i) sum_all += double(i) * hist[i];

    double w0 = 0, sum0 = 0, best_var = -1.0;
    int best_k = -1;
    for (int k = 0; k < 255; ++k) {
        w0 += double(hist[k]);
        if (w0 == 0) continue;
        const double w1 = total - w0;
        if (w1 == 0) break;
        sum0 += double(k) * hist[k];
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_k = k;
        }
    }
    if (best_k < 0 || best_var <= 0.0) throw Error("otsu: no separable classes");
    return float(best_k + 1) / 256.f;
}

BinaryMask threshold(const GrayImage& img, const PreprocParams& params) {
    params.validate();
    GrayImage work = img;
    if (params.polarity == Polarity::ContrastDark)
        kern::scale_offset(img.data.data(), -1.f, 1.f, work.data.data(), img.size());
    const float t = params.fixed_threshold ? *params.fixed_threshold : otsu_threshold(work);
    return gray_to_mask(work, t);
}

namespace {

// stack flood fill; returns component pixel list
void collect_component(const BinaryMask& mask, std::vector<std::uint8_t>& seen,
                       int sx, int sy, int connectivity, std::vector<int>& out_pixels) {
    const int w = mask.width, h = mask.height;
    out_pixels.clear();
    std::vector<int> stack{sy * w + sx};
    seen[std::size_t(sy) * w + sx] = 1;
    while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        out_pixels.push_back(idx);
        const int x = idx % w, y = idx / w;
        const auto try_push = [&](int nx, int ny) {
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
            const std::size_t ni = std::size_t(ny) * w + nx;
            if (!seen[ni] && mask.data[ni]) {
                seen[ni] = 1;
                stack.push_back(int(ni));
            }
        };
        try_push(x - 1, y);
        try_push(x + 1, y);
        try_push(x, y - 1);
        try_push(x, y + 1);
        if (connectivity == 8) {
            try_push(x - 1, y - 1);
            try_push(x + 1, y - 1);
            try_push(x - 1, y + 1);
            try_push(x + 1, y + 1);
        }
    }
}

}  // namespace

BinaryMask filter_components(const BinaryMask& mask, int min_component_px, int connectivity) {
    if (connectivity != 4 && connectivity != 8) throw Error("connectivity must be 4 or 8");
    BinaryMask out(mask.width, mask.height, mask.spacing);
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<int> pixels;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::size_t i = std::size_t(y) * mask.width + x;
            if (!mask.data[i] || seen[i]) continue;
            collect_component(mask, seen, x, y, connectivity, pixels);
            if (int(pixels.size()) >= min_component_px)
                for (int idx : pixels) out.data[idx] = 1;
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    if (radius <= 0) return mask;
    const int w = mask.width, h = mask.height;
    // separable: horizontal all-of window, then vertical
    BinaryMask tmp(w, h, mask.spacing);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = 1;
            for (int k = -radius; k <= radius; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w || !mask.data[std::size_t(y) * w + xx]) {
                    v = 0;
                    break;
                }
            }
            tmp.data[std::size_t(y) * w + x] = v;
        }
    }
    BinaryMask out(w, h, mask.spacing);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = 1;
            for (int k = -radius; k <= radius; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h || !tmp.data[std::size_t(yy) * w + x]) {
                    v = 0;
                    break;
                }
            }
            out.data[std::size_t(y) * w + x] = v;
        }
    }
    return out;
}

BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<std::uint8_t> outside(mask.size(), 0);
    std::vector<int> stack;
    const auto try_seed = [&](int x, int y) {
        const std::size_t i = std::size_t(y) * w + x;
        if (!mask.data[i] && !outside[i]) {
            outside[i] = 1;
            stack.push_back(int(i));
        }
    };
    for (int x = 0; x < w; ++x) {
        try_seed(x, 0);
        try_seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        try_seed(0, y);
        try_seed(w - 1, y);
    }
    while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w, y = idx / w;
        const auto try_push = [&](int nx, int ny) {
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
            const std::size_t ni = std::size_t(ny) * w + nx;
            if (!mask.data[ni] && !outside[ni]) {
                outside[ni] = 1;
                stack.push_back(int(ni));
            }
        };
        try_push(x - 1, y);
        try_push(x + 1, y);
        try_push(x, y - 1);
        try_push(x, y + 1);
    }
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!out.data[i] && !outside[i]) out.data[i] = 1;
    return out;
}

BinaryMask refine(const BinaryMask& mask, int erosion_radius) {
    return fill_holes(erode(mask, erosion_radius));
}

BinaryMask make_mask(const FrameSequence& seq, const PreprocParams& params,
                     PreprocDebug* debug) {
    params.validate();
    const GrayImage avg = temporal_average(seq);
    const BinaryMask raw = threshold(avg, params);
    if (debug) {
        debug->averaged = avg;
        debug->raw_threshold = raw;
    }
    const BinaryMask filtered = filter_components(raw, params.min_component_px, params.connectivity);
    return refine(filtered, params.erosion_radius);
}

}  // namespace dsatlas
