#include "dsatlas/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/png_io.hpp"

namespace dsatlas {

namespace {

// fixed 12-color palette, assigned by label id order unless the LUT overrides
constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60},  {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
}};

}  // namespace

TerritoryOverlay build_overlay(const Projection& projection, const TransformPair& pair,
                               const TerritoryLUT& lut, const FixedGrid& grid) {
    TerritoryOverlay ov;
    ov.width = grid.width;
    ov.height = grid.height;
    ov.label_map.assign(std::size_t(grid.width) * grid.height, 0);

    int color_index = 0;
    for (const auto& [id, integral] : projection.per_label) {
        const auto name_it = lut.names.find(id);
        if (name_it == lut.names.end())
            throw Error("overlay: label " + std::to_string(id) + " missing from legend");
        LegendEntry entry;
        entry.name = name_it->second;
        const auto color_it = lut.colors.find(id);
        entry.rgb = color_it != lut.colors.end() ? color_it->second
                                                 : kPalette[color_index % kPalette.size()];
        ov.legend.emplace(id, entry);
        ++color_index;
    }

    std::vector<float> best(ov.label_map.size(), projection.epsilon_mm);
    for (const auto& [id, integral] : projection.per_label) {  // ascending id: ties stay small
        const GrayImage warped = apply_transform(integral, pair, grid);
        for (std::size_t i = 0; i < warped.size(); ++i) {
            if (warped.data[i] > best[i]) {
                best[i] = warped.data[i];
                ov.label_map[i] = id;
            }
        }
    }
    return ov;
}

void export_overlay(const TerritoryOverlay& ov, const GrayImage& background,
                    const std::string& dir, const std::string& stem) {
    if (background.width != ov.width || background.height != ov.height)
        throw Error("export_overlay: background dimensions differ from label map");

    // indexed labels PNG: palette entry 0 = background, then legend ids ascending
    IndexedImage idx;
    idx.width = ov.width;
    idx.height = ov.height;
    idx.palette.push_back({0, 0, 0});
    std::map<int, std::uint8_t> id_to_index;
    for (const auto& [id, entry] : ov.legend) {
        if (idx.palette.size() > 255) throw Error("export_overlay: more than 255 territories");
        id_to_index[id] = std::uint8_t(idx.palette.size());
        idx.palette.push_back(entry.rgb);
    }
    idx.indices.resize(ov.label_map.size());
    for (std::size_t i = 0; i < ov.label_map.size(); ++i) {
        const int id = ov.label_map[i];
        if (id == 0) {
            idx.indices[i] = 0;
        } else {
            const auto it = id_to_index.find(id);
            if (it == id_to_index.end())
                throw Error("export_overlay: label " + std::to_string(id) + " missing from legend");
            idx.indices[i] = it->second;
        }
    }
    write_png_indexed(idx, dir + "/" + stem + "_labels.png");

    // composite: 0.6 * background + 0.4 * territory color
    std::vector<std::uint8_t> rgb(std::size_t(ov.width) * ov.height * 3);
    for (std::size_t i = 0; i < ov.label_map.size(); ++i) {
        const float bg = std::clamp(background.data[i], 0.f, 1.f);
        const float bg255 = bg * 255.f;
        const int id = ov.label_map[i];
        if (id == 0) {
            const std::uint8_t v = std::uint8_t(std::lround(bg255));
            rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
        } else {
            const auto& c = ov.legend.at(id).rgb;
            for (int ch = 0; ch < 3; ++ch)
                rgb[3 * i + ch] = std::uint8_t(std::lround(0.6f * bg255 + 0.4f * float(c[ch])));
        }
    }
    write_png_rgb(ov.width, ov.height, rgb, dir + "/" + stem + "_composite.png");

    nlohmann::ordered_json legend;
    for (const auto& [id, entry] : ov.legend) {
        nlohmann::ordered_json e;
        e["name"] = entry.name;
        e["rgb"] = {entry.rgb[0], entry.rgb[1], entry.rgb[2]};
        legend[std::to_string(id)] = e;
    }
    atomic_write_file(dir + "/" + stem + "_legend.json", legend.dump(2) + "\n");
}

TerritoryOverlay import_overlay(const std::string& labels_png, const std::string& legend_json) {
    const IndexedImage idx = read_png_indexed(labels_png);
    std::ifstream f(legend_json);
    if (!f) throw Error("cannot open legend: " + legend_json);
    nlohmann::json j;
    f >> j;

    TerritoryOverlay ov;
    ov.width = idx.width;
    ov.height = idx.height;
    for (const auto& [key, val] : j.items()) {
        LegendEntry e;
        e.name = val.at("name").get<std::string>();
        e.rgb = {std::uint8_t(val.at("rgb").at(0).get<int>()),
                 std::uint8_t(val.at("rgb").at(1).get<int>()),
                 std::uint8_t(val.at("rgb").at(2).get<int>())};
        ov.legend.emplace(std::stoi(key), e);
    }
    // palette order mirrors export: entry 0 background, then ids ascending
    std::vector<int> index_to_id(idx.palette.size(), 0);
    std::size_t slot = 1;
    for (const auto& [id, entry] : ov.legend) {
        if (slot >= index_to_id.size())
            throw Error("import_overlay: legend larger than palette");
        index_to_id[slot++] = id;
    }
    ov.label_map.resize(idx.indices.size());
    for (std::size_t i = 0; i < idx.indices.size(); ++i)
        ov.label_map[i] = index_to_id[idx.indices[i]];
    return ov;
}

}  // namespace dsatlas
