#include <doctest.h>

#include <filesystem>

#include "dsatlas/atlas.hpp"
#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"

using namespace dsatlas;

namespace {

std::string write_lut(const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    atomic_write_file(path, text);
    return path;
}

const char* kDefaultLut = DSATLAS_SOURCE_DIR "/data/territory_lut.json";

}  // namespace

TEST_CASE("load_lut: shipped default is valid and covers every named label") {
    const TerritoryLUT lut = load_lut(kDefaultLut);
    CHECK(lut.covers_all_names());
    CHECK_FALSE(lut.entries.at(InjectionSite::Posterior).empty());
    // posterior circulation stays one unsplit group
    const auto post = select_labels(lut, InjectionSite::Posterior);
    CHECK(post == lut.entries.at(InjectionSite::Posterior));
    // left and right anterior sets are disjoint
    const auto left = select_labels(lut, InjectionSite::LeftAnterior);
    const auto right = select_labels(lut, InjectionSite::RightAnterior);
    for (int id : left) CHECK_FALSE(right.count(id));
}

TEST_CASE("load_lut: error paths") {
    const auto bad_site = write_lut("lut_bad_site.json",
                                    R"({"names": {"1": "x"},
                                        "entries": {"BadSite": [1], "Posterior": [1]}})");
    CHECK_THROWS_WITH_AS(load_lut(bad_site), doctest::Contains("unknown site"), Error);

    const auto empty_set = write_lut("lut_empty.json",
                                     R"({"names": {"1": "x"},
                                         "entries": {"Posterior": []}})");
    CHECK_THROWS_WITH_AS(load_lut(empty_set), doctest::Contains("empty label set"), Error);

    const auto missing_name = write_lut("lut_missing_name.json",
                                        R"({"names": {"1": "x"},
                                            "entries": {"Posterior": [1, 2]}})");
    CHECK_THROWS_WITH_AS(load_lut(missing_name), doctest::Contains("absent from names"), Error);

    const auto zero_label = write_lut("lut_zero.json",
                                      R"({"names": {"0": "bg", "1": "x"},
                                          "entries": {"Posterior": [0, 1]}})");
    CHECK_THROWS_WITH_AS(load_lut(zero_label), doctest::Contains("background"), Error);
}

TEST_CASE("select_labels: site missing from LUT") {
    TerritoryLUT lut;
    lut.names[1] = "x";
    lut.entries[InjectionSite::Posterior] = {1};
    CHECK_THROWS_WITH_AS(select_labels(lut, InjectionSite::LeftAnterior),
                         doctest::Contains("missing from LUT"), Error);
}

TEST_CASE("mask_labels semantics and idempotence") {
    LabelVolume vol({3, 1, 1}, {1, 1, 1});
    vol.data = {1, 2, 3};

    const LabelVolume only2 = mask_labels(vol, {2});
    CHECK(only2.data == std::vector<std::int32_t>{0, 2, 0});

    const LabelVolume all = mask_labels(vol, {1, 2, 3});
    CHECK(all.data == vol.data);

    const LabelVolume none = mask_labels(vol, {});
    CHECK(none.data == std::vector<std::int32_t>{0, 0, 0});

    // idempotent
    const LabelVolume twice = mask_labels(only2, {2});
    CHECK(twice.data == only2.data);
}
