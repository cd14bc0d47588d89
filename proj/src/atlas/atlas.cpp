#include "dsatlas/atlas.hpp"

#include <fstream>

#include <json.hpp>

#include "dsatlas/error.hpp"

namespace dsatlas {

using nlohmann::json;

InjectionSite parse_injection_site(const std::string& s) {
    if (s == "LeftAnterior") return InjectionSite::LeftAnterior;
    if (s == "RightAnterior") return InjectionSite::RightAnterior;
    if (s == "Posterior") return InjectionSite::Posterior;
    throw Error("unknown site key: " + s);
}

ViewLabel parse_view_label(const std::string& s) {
    if (s == "Anteroposterior" || s == "AP") return ViewLabel::Anteroposterior;
    if (s == "Lateral") return ViewLabel::Lateral;
    throw Error("unknown view label: " + s);
}

std::string to_string(InjectionSite site) {
    switch (site) {
        case InjectionSite::LeftAnterior: return "LeftAnterior";
        case InjectionSite::RightAnterior: return "RightAnterior";
        case InjectionSite::Posterior: return "Posterior";
    }
    return "?";
}

std::string to_string(ViewLabel view) {
    return view == ViewLabel::Anteroposterior ? "Anteroposterior" : "Lateral";
}

void TerritoryLUT::validate() const {
    for (const auto& [site, labels] : entries) {
        if (labels.empty()) throw Error("empty label set for site " + to_string(site));
        for (int id : labels) {
            if (id == 0) throw Error("label 0 (background) not allowed in LUT");
            if (id < 0) throw Error("negative label in LUT");
            if (!names.count(id))
                throw Error("label " + std::to_string(id) + " absent from names");
        }
    }
    if (!entries.count(InjectionSite::Posterior) ||
        entries.at(InjectionSite::Posterior).empty())
        throw Error("Posterior entry must be present and non-empty");
}

bool TerritoryLUT::covers_all_names() const {
    std::set<int> all;
    for (const auto& [site, labels] : entries) all.insert(labels.begin(), labels.end());
    for (const auto& [id, name] : names)
        if (id != 0 && !all.count(id)) return false;
    return true;
}

TerritoryLUT load_lut(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open LUT file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("LUT JSON parse error in " + path + ": " + e.what());
    }

    TerritoryLUT lut;
    if (!j.contains("names") || !j["names"].is_object())
        throw Error("LUT missing names object: " + path);
    for (const auto& [key, val] : j["names"].items())
        lut.names[std::stoi(key)] = val.get<std::string>();

    if (!j.contains("entries") || !j["entries"].is_object())
        throw Error("LUT missing entries object: " + path);
    for (const auto& [key, val] : j["entries"].items()) {
        const InjectionSite site = parse_injection_site(key);  // throws on unknown key
        if (!val.is_array()) throw Error("LUT entry for " + key + " must be an array");
        std::set<int>& labels = lut.entries[site];
        for (const auto& id : val) labels.insert(id.get<int>());
    }

    if (j.contains("colors")) {
        for (const auto& [key, val] : j["colors"].items()) {
            if (!val.is_array() || val.size() != 3) throw Error("color must be [r,g,b]: " + path);
            lut.colors[std::stoi(key)] = {std::uint8_t(val[0].get<int>()),
                                          std::uint8_t(val[1].get<int>()),
                                          std::uint8_t(val[2].get<int>())};
        }
    }

    lut.validate();
    return lut;
}

std::set<int> select_labels(const TerritoryLUT& lut, InjectionSite site) {
    const auto it = lut.entries.find(site);
    if (it == lut.entries.end())
        throw Error("site " + to_string(site) + " missing from LUT");
    return it->second;
}

LabelVolume mask_labels(const LabelVolume& volume, const std::set<int>& labels) {
    LabelVolume out = volume;
    for (auto& v : out.data)
        if (v != 0 && !labels.count(v)) v = 0;
    return out;
}

}  // namespace dsatlas
