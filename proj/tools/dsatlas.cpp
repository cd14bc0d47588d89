#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
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
#include "pipeline.hpp"
#include "stats_util.hpp"

namespace fs = std::filesystem;
using namespace dsatlas;

namespace {

GrayImage normalized(const GrayImage& img) {
    GrayImage out(img.width, img.height, img.spacing);
    const auto [lo, hi] = kern::minmax(img.data.data(), img.size());
    if (hi > 0) kern::scale_offset(img.data.data(), 1.f / hi, 0.f, out.data.data(), img.size());
    return out;
}

void add_registration_flags(CLI::App* cmd, RegistrationConfig& reg) {
    cmd->add_option("--resolutions-affine", reg.resolutions_affine);
    cmd->add_option("--resolutions-bspline", reg.resolutions_bspline);
    cmd->add_option("--max-step-length", reg.max_step_length);
    cmd->add_option("--histogram-bins", reg.histogram_bins);
    cmd->add_option("--lbfgs-memory", reg.lbfgs_memory);
    cmd->add_option("--max-iterations", reg.max_iterations_per_level);
    cmd->add_option("--convergence-tol", reg.convergence_tol);
    cmd->add_flag_callback("--no-auto-scale", [&reg] { reg.auto_scale = false; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsatlas: registers cone-beam projections of a labeled neurovascular atlas "
                 "onto DSA perfusion masks and extracts per-territory overlays"};
    app.require_subcommand(1);

    // ---------------- pipeline ----------------
    auto* cmd_pipeline = app.add_subcommand("pipeline", "run one case end to end");
    cli::CaseConfig cfg;
    std::string config_path;
    std::vector<int> frame_range_flag;
    cmd_pipeline->add_option("--config", config_path, "case config JSON (overrides flags)");
    cmd_pipeline->add_option("--atlas", cfg.atlas_path);
    cmd_pipeline->add_option("--lut", cfg.lut_path);
    cmd_pipeline->add_option("--frames", cfg.frames_dir);
    cmd_pipeline->add_option("--geometry", cfg.geometry_path);
    cmd_pipeline->add_option("--out", cfg.output_dir);
    cmd_pipeline->add_option("--site", cfg.site);
    cmd_pipeline->add_option("--view", cfg.view);
    cmd_pipeline->add_option("--case-id", cfg.case_id);
    cmd_pipeline->add_option("--stage", cfg.stage, "full or affine");
    cmd_pipeline->add_option("--frame-range", frame_range_flag, "first last (inclusive)")
        ->expected(2);
    cmd_pipeline->add_option("--truth", cfg.truth_dir, "phantom case dir for TRE scoring");
    cmd_pipeline->add_option("--debug-dir", cfg.debug_dir);
    cmd_pipeline->add_flag("--keep-atlas-origin", cfg.keep_atlas_origin);
    add_registration_flags(cmd_pipeline, cfg.registration);
    cmd_pipeline->callback([&] {
        if (frame_range_flag.size() == 2)
            cfg.frame_range = {frame_range_flag[0], frame_range_flag[1]};
        if (!config_path.empty()) cli::merge_case_config(cfg, config_path);
        const auto r = cli::run_pipeline(cfg);
        std::string tre_part;
        if (r.tre_mean_px) {
            char b[48];
            std::snprintf(b, sizeof(b), " tre=%.3fpx", *r.tre_mean_px);
            tre_part = b;
        }
        std::printf("%s: ssim_affine=%.4f ssim_final=%.4f%s runtime=%.1fs\n", r.case_id.c_str(),
                    r.ssim_affine, r.ssim_final, tre_part.c_str(), r.runtime_s);
    });

    // ---------------- batch ----------------
    auto* cmd_batch = app.add_subcommand("batch", "run many case configs concurrently");
    std::string batch_list, batch_out;
    int batch_jobs = 1;
    cmd_batch->add_option("--list", batch_list, "file with one case-config path per line")
        ->required();
    cmd_batch->add_option("--jobs", batch_jobs, "concurrent cases");
    cmd_batch->add_option("--out", batch_out, "combined results CSV (default: batch_results.csv)");
    cmd_batch->callback([&] {
        std::ifstream f(batch_list);
        if (!f) throw Error("cannot open batch list: " + batch_list);
        std::vector<std::string> paths;
        std::string line;
        while (std::getline(f, line))
            if (!line.empty()) paths.push_back(line);
        if (paths.empty()) throw Error("batch list is empty");
        std::vector<std::string> rows(paths.size());
        std::vector<std::string> errors(paths.size());
        std::atomic<std::size_t> next{0};
        const int jobs = std::max(1, batch_jobs);
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= paths.size()) return;
                    try {
                        const auto c = cli::load_case_config(paths[i]);
                        const auto r = cli::run_pipeline(c);
                        rows[i] = cli::results_csv_row(c, r);
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        std::string csv = cli::results_csv_header();
        int failed = 0;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            if (!errors[i].empty()) {
                std::cerr << paths[i] << ": " << errors[i] << "\n";
                ++failed;
            } else {
                csv += rows[i];
            }
        }
        const std::string out = batch_out.empty() ? "batch_results.csv" : batch_out;
        atomic_write_file(out, csv);
        std::printf("batch: %zu cases, %d failed, results in %s\n", paths.size(), failed,
                    out.c_str());
        if (failed) throw Error("batch had failures");
    });

    // ---------------- project ----------------
    auto* cmd_project =
        app.add_subcommand("project", "cone-beam projection of selected territories");
    std::string p_atlas, p_lut, p_site = "Posterior", p_view = "Anteroposterior", p_geom, p_out;
    bool p_keep_origin = false;
    cmd_project->add_option("--atlas", p_atlas)->required();
    cmd_project->add_option("--lut", p_lut)->required();
    cmd_project->add_option("--site", p_site);
    cmd_project->add_option("--view", p_view);
    cmd_project->add_option("--geometry", p_geom)->required();
    cmd_project->add_option("--out", p_out)->required();
    cmd_project->add_flag("--keep-atlas-origin", p_keep_origin);
    cmd_project->callback([&] {
        LabelVolume atlas = read_nifti(p_atlas);
        if (!p_keep_origin) atlas.center_on_isocenter();
        const TerritoryLUT lut = load_lut(p_lut);
        bool have_angles = false;
        ConeBeamGeometry g = load_geometry(p_geom, &have_angles);
        if (!have_angles) apply_view_preset(g, parse_view_label(p_view));
        const auto labels = select_labels(lut, parse_injection_site(p_site));
        const Projection proj = project(atlas, labels, g);
        fs::create_directories(p_out);
        write_png_gray(normalized(proj.integral), p_out + "/integral.png");
        write_png_gray(mask_to_gray(proj.silhouette()), p_out + "/silhouette.png");
        for (const auto& [id, sil] : proj.per_label_silhouettes())
            write_png_gray(mask_to_gray(sil),
                           p_out + "/silhouette_label_" + std::to_string(id) + ".png");
        const auto [lo, hi] = kern::minmax(proj.integral.data.data(), proj.integral.size());
        nlohmann::ordered_json meta;
        meta["max_path_length_mm"] = hi;
        meta["epsilon_mm"] = proj.epsilon_mm;
        meta["magnification"] = magnification(g);
        meta["labels"] = std::vector<int>(labels.begin(), labels.end());
        atomic_write_file(p_out + "/projection.json", meta.dump(2) + "\n");
        std::printf("projected %zu labels, max path length %.2f mm\n", labels.size(), double(hi));
    });

    // ---------------- preprocess ----------------
    auto* cmd_pre = app.add_subcommand("preprocess", "DSA frames -> perfusion mask");
    std::string q_frames, q_out, q_params, q_debug;
    std::vector<int> q_range;
    cmd_pre->add_option("--frames", q_frames)->required();
    cmd_pre->add_option("--out", q_out, "output mask PNG")->required();
    cmd_pre->add_option("--params", q_params, "preproc params JSON");
    cmd_pre->add_option("--frame-range", q_range)->expected(2);
    cmd_pre->add_option("--debug-dir", q_debug);
    cmd_pre->callback([&] {
        PreprocParams params;
        if (!q_params.empty()) params = load_preproc_params(q_params);
        std::optional<std::pair<int, int>> range;
        if (q_range.size() == 2) range = {q_range[0], q_range[1]};
        const FrameSequence frames = load_frames(q_frames, range);
        PreprocDebug debug;
        const BinaryMask mask = make_mask(frames, params, q_debug.empty() ? nullptr : &debug);
        if (!q_debug.empty()) {
            fs::create_directories(q_debug);
            write_png_gray(debug.averaged, q_debug + "/averaged.png");
            write_png_gray(mask_to_gray(debug.raw_threshold), q_debug + "/raw_threshold.png");
        }
        write_png_gray(mask_to_gray(mask), q_out);
        std::printf("mask: %zu foreground px of %zu\n", mask.count(), mask.size());
    });

    // ---------------- register ----------------
    auto* cmd_reg = app.add_subcommand("register", "register a moving image onto a fixed mask");
    std::string r_fixed, r_moving, r_out, r_stage = "full";
    RegistrationConfig r_config;
    cmd_reg->add_option("--fixed", r_fixed, "fixed mask PNG")->required();
    cmd_reg->add_option("--moving", r_moving, "moving image PNG")->required();
    cmd_reg->add_option("--out", r_out, "output transforms JSON")->required();
    cmd_reg->add_option("--stage", r_stage, "full or affine");
    add_registration_flags(cmd_reg, r_config);
    cmd_reg->callback([&] {
        const GrayImage fixed = read_png_gray(r_fixed);
        const GrayImage moving = read_png_gray(r_moving);
        const auto affine_res = register_affine(fixed, moving, r_config);
        TransformPair pair = affine_res.pair;
        if (r_stage == "full") {
            const auto bspline_res =
                register_bspline(fixed, moving, affine_res.pair.affine, r_config);
            pair = bspline_res.pair;
        } else if (r_stage != "affine") {
            throw Error("stage must be \"full\" or \"affine\"");
        }
        save_transform_pair(pair, r_out);
        std::printf("final cost %.6f, transforms in %s\n", pair.final_cost, r_out.c_str());
    });

    // ---------------- overlay ----------------
    auto* cmd_ov = app.add_subcommand("overlay", "apply saved transforms and compose the overlay");
    std::string o_atlas, o_lut, o_site = "Posterior", o_view = "Anteroposterior";
    std::string o_geom, o_transforms, o_background, o_out, o_stem = "overlay";
    bool o_keep_origin = false;
    cmd_ov->add_option("--atlas", o_atlas)->required();
    cmd_ov->add_option("--lut", o_lut)->required();
    cmd_ov->add_option("--site", o_site);
    cmd_ov->add_option("--view", o_view);
    cmd_ov->add_option("--geometry", o_geom)->required();
    cmd_ov->add_option("--transforms", o_transforms)->required();
    cmd_ov->add_option("--background", o_background, "background PNG (e.g. averaged DSA)")
        ->required();
    cmd_ov->add_option("--out", o_out)->required();
    cmd_ov->add_option("--stem", o_stem);
    cmd_ov->add_flag("--keep-atlas-origin", o_keep_origin);
    cmd_ov->callback([&] {
        LabelVolume atlas = read_nifti(o_atlas);
        if (!o_keep_origin) atlas.center_on_isocenter();
        const TerritoryLUT lut = load_lut(o_lut);
        bool have_angles = false;
        ConeBeamGeometry g = load_geometry(o_geom, &have_angles);
        if (!have_angles) apply_view_preset(g, parse_view_label(o_view));
        const auto labels = select_labels(lut, parse_injection_site(o_site));
        const Projection proj = project(atlas, labels, g);
        const TransformPair pair = load_transform_pair(o_transforms);
        GrayImage background = read_png_gray(o_background);
        background.spacing = {g.det_spacing_mm[0], g.det_spacing_mm[1]};
        const FixedGrid grid{background.width, background.height, background.spacing};
        const TerritoryOverlay ov = build_overlay(proj, pair, lut, grid);
        fs::create_directories(o_out);
        export_overlay(ov, background, o_out, o_stem);
        std::printf("overlay written to %s/%s_*.png\n", o_out.c_str(), o_stem.c_str());
    });

    // ---------------- ssim ----------------
    auto* cmd_ssim = app.add_subcommand("ssim", "structural similarity of two images");
    std::string s_a, s_b;
    bool s_binarize = false;
    cmd_ssim->add_option("--a", s_a)->required();
    cmd_ssim->add_option("--b", s_b)->required();
    cmd_ssim->add_flag("--binarize", s_binarize, "binarize both at 0.5 first");
    cmd_ssim->callback([&] {
        GrayImage a = read_png_gray(s_a);
        GrayImage b = read_png_gray(s_b);
        if (s_binarize) {
            for (auto& v : a.data) v = v > 0.5f ? 1.f : 0.f;
            for (auto& v : b.data) v = v > 0.5f ? 1.f : 0.f;
        }
        const SSIMResult r = ssim(a, b);
        std::printf("{\"mean_ssim\": %.9f, \"window\": %d}\n", r.mean_ssim, r.window);
    });

    // ---------------- phantom ----------------
    auto* cmd_ph = app.add_subcommand("phantom", "generate a seeded synthetic case");
    std::string ph_out, ph_site = "Posterior", ph_view = "Anteroposterior";
    std::uint64_t ph_seed = 1;
    PhantomConfig ph_cfg;
    int ph_det = 256, ph_adim = 96;
    bool ph_affine_only = false;
    cmd_ph->add_option("--out", ph_out)->required();
    cmd_ph->add_option("--seed", ph_seed);
    cmd_ph->add_option("--detector", ph_det, "detector cols=rows");
    cmd_ph->add_option("--atlas-dim", ph_adim, "atlas voxels per axis");
    cmd_ph->add_option("--territories", ph_cfg.n_territories);
    cmd_ph->add_option("--frames", ph_cfg.n_frames);
    cmd_ph->add_option("--noise", ph_cfg.noise_sigma);
    cmd_ph->add_option("--max-translation-px", ph_cfg.max_translation_px);
    cmd_ph->add_option("--max-rotation-deg", ph_cfg.max_rotation_deg);
    cmd_ph->add_option("--max-bspline-px", ph_cfg.max_bspline_px);
    cmd_ph->add_option("--bspline-cells", ph_cfg.bspline_cells, "warp control grid cells per axis");
    double ph_fill = 0.60;
    cmd_ph->add_option("--fill", ph_fill, "fraction of the detector the projected atlas spans");
    cmd_ph->add_option("--site", ph_site);
    cmd_ph->add_option("--view", ph_view);
    cmd_ph->add_flag("--affine-only", ph_affine_only);
    cmd_ph->callback([&] {
        ph_cfg.atlas_dims = {ph_adim, ph_adim, ph_adim};
        ph_cfg.geometry = default_phantom_geometry(ph_det, ph_det);
        ph_cfg.site = parse_injection_site(ph_site);
        ph_cfg.view = parse_view_label(ph_view);
        if (ph_affine_only) ph_cfg.max_bspline_px = 0;
        LabelVolume atlas =
            synth_atlas(ph_cfg.atlas_dims, ph_cfg.n_territories, ph_seed * 7919 + 13);
        // size the atlas so its projection occupies ~60% of the detector
        const double det_extent = (ph_det - 1) * ph_cfg.geometry.det_spacing_mm[0];
        const double mag = ph_cfg.geometry.sdd_mm / ph_cfg.geometry.sid_mm;
        const double vox = ph_fill * det_extent / (mag * ph_adim);
        atlas.spacing = {vox, vox, vox};
        atlas.center_on_isocenter();
        const PhantomCase pc = make_case(atlas, ph_cfg, ph_seed);
        save_case(pc, ph_out);
        nlohmann::ordered_json jc;
        jc["atlas"] = ph_out + "/atlas.nii";
        jc["lut"] = ph_out + "/lut.json";
        jc["frames_dir"] = ph_out + "/frames";
        jc["geometry"] = ph_out + "/geometry.json";
        jc["output_dir"] = ph_out + "/out";
        jc["site"] = to_string(pc.site);
        jc["view"] = to_string(pc.view);
        jc["case_id"] = "phantom_" + std::to_string(ph_seed);
        jc["truth"] = ph_out;
        atomic_write_file(ph_out + "/case_config.json", jc.dump(2) + "\n");
        std::printf("phantom case in %s (seed %llu)\n", ph_out.c_str(),
                    static_cast<unsigned long long>(ph_seed));
    });

    // ---------------- stats ----------------
    auto* cmd_stats = app.add_subcommand("stats", "cohort statistics and SSIM histogram");
    std::string st_csv, st_out, st_column = "ssim_final";
    cmd_stats->add_option("--csv", st_csv, "results CSV")->required();
    cmd_stats->add_option("--out", st_out, "output directory")->required();
    cmd_stats->add_option("--column", st_column, "CSV column to analyze");
    cmd_stats->callback([&] {
        const auto values = cli::read_csv_column(st_csv, st_column);
        const CohortStats s = cohort_stats(values);
        fs::create_directories(st_out);
        nlohmann::ordered_json j;
        j["n"] = s.n;
        j["mean"] = s.mean;
        j["std"] = s.stddev;
        j["median"] = s.median;
        j["bin_width"] = 0.01;
        j["clamped_negative"] = s.clamped_negative;
        j["left_skewed"] = s.left_skewed;
        atomic_write_file(st_out + "/stats.json", j.dump(2) + "\n");
        cli::render_histogram_svg(s, st_out + "/histogram.svg");
        cli::render_histogram_png(s, st_out + "/histogram.png");
        std::printf("n=%d mean=%.4f std=%.4f median=%.4f%s\n", s.n, s.mean, s.stddev, s.median,
                    s.left_skewed ? " (left-skewed)" : "");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "dsatlas: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
