#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsatlas/preproc.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas::cli {

/// One case end to end. Precedence: built-in defaults < command-line flags <
/// config file (values present in the file win).
struct CaseConfig {
    std::string atlas_path;
    std::string lut_path;
    std::string frames_dir;
    std::string geometry_path;
    std::string output_dir;
    std::string site = "Posterior";
    std::string view = "Anteroposterior";
    std::optional<std::pair<int, int>> frame_range;
    std::string case_id;  // defaults to the output directory name
    PreprocParams preproc;
    RegistrationConfig registration;
    std::string stage = "full";  // "full" | "affine"
    bool keep_atlas_origin = false;
    std::string debug_dir;
    std::string truth_dir;  // phantom case directory; enables TRE scoring
};

CaseConfig load_case_config(const std::string& path);
/// overlays any fields present in the JSON file onto base
void merge_case_config(CaseConfig& base, const std::string& path);

struct StageTiming {
    std::string name;
    double seconds = 0;
};

struct PipelineResult {
    std::string case_id;
    double ssim_affine = 0;
    double ssim_final = 0;
    std::optional<double> tre_mean_px;
    double runtime_s = 0;
    std::vector<StageTiming> timings;
    std::vector<LevelLog> level_logs;
};

/// load -> select labels -> project -> make_mask -> register (affine [+
/// B-spline]) -> ssim -> overlay -> export. Writes transforms.json, overlay
/// PNGs + legend, mask.png, results.csv, manifest.json and timing.txt into
/// output_dir. Throws Error with a stage-tagged message on failure.
PipelineResult run_pipeline(const CaseConfig& config);

/// one results.csv row (header written when the file is created fresh)
std::string results_csv_header();
std::string results_csv_row(const CaseConfig& config, const PipelineResult& r);

}  // namespace dsatlas::cli
