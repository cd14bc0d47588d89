#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "dsatlas/image.hpp"

namespace dsatlas {

enum class InjectionSite { LeftAnterior, RightAnterior, Posterior };
enum class ViewLabel { Anteroposterior, Lateral };

InjectionSite parse_injection_site(const std::string& s);
ViewLabel parse_view_label(const std::string& s);
std::string to_string(InjectionSite site);
std::string to_string(ViewLabel view);

/// (injection site) -> set of atlas territory labels, from an editable JSON
/// file. The view never changes the label set; it only selects projection
/// geometry. The posterior entry covers the whole posterior circulation as
/// one group and is never subdivided.
struct TerritoryLUT {
    std::map<InjectionSite, std::set<int>> entries;
    std::map<int, std::string> names;
    // optional per-label RGB overrides for overlay rendering
    std::map<int, std::array<std::uint8_t, 3>> colors;
    bool posterior_unsplit = true;

    void validate() const;
    /// every non-zero label in names appears in some entry
    bool covers_all_names() const;
};

/// schema: {"names": {"<id>": "<name>"},
///          "entries": {"LeftAnterior": [ids], "RightAnterior": [ids], "Posterior": [ids]},
///          "colors": {"<id>": [r,g,b]}}   (colors optional)
TerritoryLUT load_lut(const std::string& path);

std::set<int> select_labels(const TerritoryLUT& lut, InjectionSite site);

/// voxels whose label is outside the set become background (0)
LabelVolume mask_labels(const LabelVolume& volume, const std::set<int>& labels);

}  // namespace dsatlas
