#include "pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsatlas/atlas.hpp"
#include "dsatlas/error.hpp"
#include "dsatlas/frames.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/kernels.hpp"
#include "dsatlas/metrics.hpp"
#include "dsatlas/nifti.hpp"
#include "dsatlas/overlay.hpp"
#include "dsatlas/phantom.hpp"
#include "dsatlas/png_io.hpp"
#include "dsatlas/projector.hpp"

namespace dsatlas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RegistrationConfig registration_from_json(const json& jc) {
    RegistrationConfig c;
    c.resolutions_affine = jc.value("resolutions_affine", c.resolutions_affine);
    c.resolutions_bspline = jc.value("resolutions_bspline", c.resolutions_bspline);
    c.max_step_length = jc.value("max_step_length", c.max_step_length);
    c.histogram_bins = jc.value("histogram_bins", c.histogram_bins);
    c.lbfgs_memory = jc.value("lbfgs_memory", c.lbfgs_memory);
    c.max_iterations_per_level = jc.value("max_iterations_per_level", c.max_iterations_per_level);
    c.convergence_tol = jc.value("convergence_tol", c.convergence_tol);
    c.auto_scale = jc.value("auto_scale", c.auto_scale);
    return c;
}

PreprocParams preproc_from_json(const json& jp) {
    PreprocParams p;
    if (jp.contains("polarity")) {
        const std::string pol = jp["polarity"].get<std::string>();
        if (pol == "ContrastDark") p.polarity = Polarity::ContrastDark;
        else if (pol == "ContrastBright") p.polarity = Polarity::ContrastBright;
        else throw Error("unknown polarity: " + pol);
    }
    if (jp.contains("threshold")) {
        if (jp["threshold"].is_string()) p.fixed_threshold.reset();
        else p.fixed_threshold = jp["threshold"].get<float>();
    }
    p.min_component_px = jp.value("min_component_px", p.min_component_px);
    p.erosion_radius = jp.value("erosion_radius", p.erosion_radius);
    p.connectivity = jp.value("connectivity", p.connectivity);
    return p;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json config_to_json(const CaseConfig& c) {
    nlohmann::ordered_json j;
    j["atlas"] = c.atlas_path;
    j["lut"] = c.lut_path;
    j["frames_dir"] = c.frames_dir;
    j["geometry"] = c.geometry_path;
    j["output_dir"] = c.output_dir;
    j["site"] = c.site;
    j["view"] = c.view;
    if (c.frame_range) j["frame_range"] = {c.frame_range->first, c.frame_range->second};
    j["case_id"] = c.case_id;
    j["stage"] = c.stage;
    j["keep_atlas_origin"] = c.keep_atlas_origin;
    j["truth"] = c.truth_dir;
    j["preproc"]["polarity"] =
        c.preproc.polarity == Polarity::ContrastDark ? "ContrastDark" : "ContrastBright";
    if (c.preproc.fixed_threshold) j["preproc"]["threshold"] = *c.preproc.fixed_threshold;
    else j["preproc"]["threshold"] = "otsu";
    j["preproc"]["min_component_px"] = c.preproc.min_component_px;
    j["preproc"]["erosion_radius"] = c.preproc.erosion_radius;
    j["preproc"]["connectivity"] = c.preproc.connectivity;
    j["registration"]["resolutions_affine"] = c.registration.resolutions_affine;
    j["registration"]["resolutions_bspline"] = c.registration.resolutions_bspline;
    j["registration"]["max_step_length"] = c.registration.max_step_length;
    j["registration"]["histogram_bins"] = c.registration.histogram_bins;
    j["registration"]["lbfgs_memory"] = c.registration.lbfgs_memory;
    j["registration"]["max_iterations_per_level"] = c.registration.max_iterations_per_level;
    j["registration"]["convergence_tol"] = c.registration.convergence_tol;
    j["registration"]["auto_scale"] = c.registration.auto_scale;
    return j;
}

class StageClock {
  public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}
    template <typename F>
    auto run(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                finish(name, t0);
            } else {
                auto r = f();
                finish(name, t0);
                return r;
            }
        } catch (const std::exception& e) {
            throw Error("stage " + name + ": " + e.what());
        }
    }

  private:
    void finish(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out_.push_back({name, dt});
    }
    std::vector<StageTiming>& out_;
};

}  // namespace

void merge_case_config(CaseConfig& c, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open case config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("case config JSON parse error in " + path + ": " + e.what());
    }
    if (j.contains("atlas")) c.atlas_path = j["atlas"].get<std::string>();
    if (j.contains("lut")) c.lut_path = j["lut"].get<std::string>();
    if (j.contains("frames_dir")) c.frames_dir = j["frames_dir"].get<std::string>();
    if (j.contains("geometry")) c.geometry_path = j["geometry"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("site")) c.site = j["site"].get<std::string>();
    if (j.contains("view")) c.view = j["view"].get<std::string>();
    if (j.contains("frame_range")) {
        c.frame_range = {j["frame_range"].at(0).get<int>(), j["frame_range"].at(1).get<int>()};
    }
    if (j.contains("case_id")) c.case_id = j["case_id"].get<std::string>();
    if (j.contains("stage")) c.stage = j["stage"].get<std::string>();
    if (j.contains("keep_atlas_origin")) c.keep_atlas_origin = j["keep_atlas_origin"].get<bool>();
    if (j.contains("debug_dir")) c.debug_dir = j["debug_dir"].get<std::string>();
    if (j.contains("truth")) c.truth_dir = j["truth"].get<std::string>();
    if (j.contains("preproc")) c.preproc = preproc_from_json(j["preproc"]);
    if (j.contains("registration")) c.registration = registration_from_json(j["registration"]);
}

CaseConfig load_case_config(const std::string& path) {
    CaseConfig c;
    merge_case_config(c, path);
    return c;
}

std::string results_csv_header() {
    return "case_id,site,view,ssim_affine,ssim_final,tre_mean_px,runtime_s\n";
}

std::string results_csv_row(const CaseConfig& config, const PipelineResult& r) {
    char buf[256];
    std::string tre = "";
    if (r.tre_mean_px) {
        std::snprintf(buf, sizeof(buf), "%.4f", *r.tre_mean_px);
        tre = buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%.6f,%s,%.3f\n", r.case_id.c_str(),
                  config.site.c_str(), config.view.c_str(), r.ssim_affine, r.ssim_final,
                  tre.c_str(), r.runtime_s);
    return buf;
}

PipelineResult run_pipeline(const CaseConfig& config_in) {
    CaseConfig config = config_in;
    if (config.case_id.empty())
        config.case_id = fs::path(config.output_dir).filename().string();
    if (config.case_id.empty()) config.case_id = "case";
    if (config.stage != "full" && config.stage != "affine")
        throw Error("stage load_config: stage must be \"full\" or \"affine\"");

    const auto t_start = std::chrono::steady_clock::now();
    PipelineResult result;
    result.case_id = config.case_id;
    StageClock clock(result.timings);

    fs::create_directories(config.output_dir);
    if (!config.debug_dir.empty()) fs::create_directories(config.debug_dir);

    const InjectionSite site = parse_injection_site(config.site);
    const ViewLabel view = parse_view_label(config.view);

    // ---- load ----
    LabelVolume atlas = clock.run("load_atlas", [&] { return read_nifti(config.atlas_path); });
    if (!config.keep_atlas_origin) atlas.center_on_isocenter();
    const TerritoryLUT lut = clock.run("load_lut", [&] { return load_lut(config.lut_path); });
    bool angles_present = false;
    ConeBeamGeometry geometry = clock.run("load_geometry", [&] {
        return load_geometry(config.geometry_path, &angles_present);
    });
    if (!angles_present) apply_view_preset(geometry, view);
    const FrameSequence frames = clock.run("load_frames", [&] {
        return load_frames(config.frames_dir, config.frame_range,
                           {geometry.det_spacing_mm[0], geometry.det_spacing_mm[1]});
    });

    // ---- projection ----
    const std::set<int> labels = select_labels(lut, site);
    const Projection projection =
        clock.run("project", [&] { return project(atlas, labels, geometry); });

    // ---- DSA mask ----
    PreprocDebug debug;
    const BinaryMask mask = clock.run("make_mask", [&] {
        return make_mask(frames, config.preproc, config.debug_dir.empty() ? nullptr : &debug);
    });
    if (!config.debug_dir.empty()) {
        write_png_gray(debug.averaged, config.debug_dir + "/averaged.png");
        write_png_gray(mask_to_gray(debug.raw_threshold), config.debug_dir + "/raw_threshold.png");
    }
    if (mask.count() == 0) throw Error("stage make_mask: empty perfusion mask");

    // ---- registration ----
    const GrayImage fixed = mask_to_gray(mask);
    const FixedGrid grid = FixedGrid::like(fixed);
    GrayImage moving(projection.integral.width, projection.integral.height,
                     projection.integral.spacing);
    const auto [ilo, ihi] =
        kern::minmax(projection.integral.data.data(), projection.integral.size());
    if (ihi > 0)
        kern::scale_offset(projection.integral.data.data(), 1.f / ihi, 0.f, moving.data.data(),
                           moving.size());
    GrayImage moving_silhouette = mask_to_gray(projection.silhouette());
    moving_silhouette.spacing = projection.integral.spacing;

    const RegisterResult affine_result = clock.run("register_affine", [&] {
        return register_affine(fixed, moving, config.registration);
    });
    for (const auto& l : affine_result.pair.log) result.level_logs.push_back(l);

    TransformPair affine_only;
    affine_only.affine = affine_result.pair.affine;
    affine_only.config = config.registration;
    affine_only.final_cost = affine_result.pair.final_cost;

    result.ssim_affine = clock.run("ssim_affine", [&] {
        return ssim_mask_vs_silhouette(mask, apply_transform(moving_silhouette, affine_only, grid))
            .mean_ssim;
    });

    TransformPair pair = affine_only;
    if (config.stage == "full") {
        const RegisterResult bspline_result = clock.run("register_bspline", [&] {
            return register_bspline(fixed, moving, affine_result.pair.affine,
                                    config.registration);
        });
        for (const auto& l : bspline_result.pair.log) result.level_logs.push_back(l);
        pair = bspline_result.pair;
    }

    result.ssim_final = clock.run("ssim_final", [&] {
        return ssim_mask_vs_silhouette(mask, apply_transform(moving_silhouette, pair, grid))
            .mean_ssim;
    });

    // ---- overlay + artifacts ----
    clock.run("save_transforms", [&] {
        save_transform_pair(pair, config.output_dir + "/transforms.json");
    });
    const TerritoryOverlay overlay = clock.run("build_overlay", [&] {
        return build_overlay(projection, pair, lut, grid);
    });
    const GrayImage background = temporal_average(frames);
    clock.run("export_overlay", [&] {
        export_overlay(overlay, background, config.output_dir, "overlay");
    });
    clock.run("save_mask", [&] {
        write_png_gray(mask_to_gray(mask), config.output_dir + "/mask.png");
    });

    // ---- TRE against phantom ground truth, when provided ----
    std::optional<std::uint64_t> case_seed;
    if (!config.truth_dir.empty()) {
        const PhantomCase truth_case = load_case(config.truth_dir);
        case_seed = truth_case.seed;
        GroundTruthWarp truth;
        truth.affine = truth_case.true_affine;
        truth.width = truth_case.geometry.det_cols;
        truth.height = truth_case.geometry.det_rows;
        truth.spacing = {truth_case.geometry.det_spacing_mm[0],
                         truth_case.geometry.det_spacing_mm[1]};
        truth.field_dx = truth_case.true_field_dx;
        truth.field_dy = truth_case.true_field_dy;
        result.tre_mean_px = tre(truth, pair, truth_case.true_mask).mean_px;
    }

    result.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    // ---- reports ----
    atomic_write_file(config.output_dir + "/results.csv",
                      results_csv_header() + results_csv_row(config, result));

    const std::string config_text = config_to_json(config).dump();
    nlohmann::ordered_json manifest;
    manifest["tool"] = "dsatlas";
    manifest["version"] = "0.1.0";
    manifest["config_hash"] = hex64(fnv1a64(config_text));
    manifest["case_id"] = config.case_id;
    manifest["site"] = config.site;
    manifest["view"] = config.view;
    manifest["stage"] = config.stage;
    manifest["inputs"] = {{"atlas", config.atlas_path},
                          {"lut", config.lut_path},
                          {"frames_dir", config.frames_dir},
                          {"geometry", config.geometry_path}};
    manifest["kernels"] = kern::avx2_active() ? "avx2" : "scalar";
    if (case_seed) manifest["seeds"] = {{"phantom", *case_seed}};
    else manifest["seeds"] = nlohmann::ordered_json::object();
    manifest["effective_levels"] = {{"affine", affine_result.effective_levels}};
    atomic_write_file(config.output_dir + "/manifest.json", manifest.dump(2) + "\n");

    std::ostringstream timing;
    timing << "# stage seconds\n";
    for (const auto& t : result.timings) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-18s %10.3f\n", t.name.c_str(), t.seconds);
        timing << line;
    }
    {
        char line[128];
        std::snprintf(line, sizeof(line), "%-18s %10.3f\n", "total", result.runtime_s);
        timing << line;
    }
    timing << "# stage level width height iterations initial_cost final_cost\n";
    for (const auto& l : result.level_logs) {
        char line[192];
        std::snprintf(line, sizeof(line), "%s %d %d %d %d %.9g %.9g\n", l.stage.c_str(), l.level,
                      l.width, l.height, l.iterations, l.initial_cost, l.final_cost);
        timing << line;
    }
    atomic_write_file(config.output_dir + "/timing.txt", timing.str());

    return result;
}

}  // namespace dsatlas::cli
