#include "dsatlas/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsatlas/error.hpp"
#include "dsatlas/frames.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/kernels.hpp"
#include "dsatlas/nifti.hpp"
#include "dsatlas/png_io.hpp"
#include "dsatlas/rng.hpp"

namespace dsatlas {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void PhantomConfig::validate() const {
    if (atlas_dims[0] < 32 || atlas_dims[1] < 32 || atlas_dims[2] < 32)
        throw Error("phantom: atlas dims must be at least 32^3");
    if (n_territories < 2) throw Error("phantom: need at least 2 territories");
    if (max_translation_px < 0 || max_translation_px > 20.0)
        throw Error("phantom: invalid bounds (|translation| <= 20 px)");
    if (max_rotation_deg < 0 || max_rotation_deg > 10.0)
        throw Error("phantom: invalid bounds (|rotation| <= 10 deg)");
    if (min_scale < 0.9 || max_scale > 1.1 || min_scale > max_scale)
        throw Error("phantom: invalid bounds (scale in [0.9, 1.1])");
    if (max_bspline_px < 0 || max_bspline_px > 8.0)
        throw Error("phantom: invalid bounds (B-spline displacement <= 8 px)");
    if (bspline_cells < 1) throw Error("phantom: bspline_cells must be >= 1");
    if (noise_sigma < 0) throw Error("phantom: noise sigma must be >= 0");
    if (n_frames < 1) throw Error("phantom: need at least one frame");
    if (!(signal_amplitude > 0) || signal_amplitude > 1)
        throw Error("phantom: signal amplitude must lie in (0,1]");
}

ConeBeamGeometry default_phantom_geometry(int det_cols, int det_rows) {
    ConeBeamGeometry g;
    g.sid_mm = 750;
    g.sdd_mm = 1200;
    g.det_cols = det_cols;
    g.det_rows = det_rows;
    g.det_spacing_mm = {0.4, 0.4};
    return g;
}

TransformPair PhantomCase::true_pair() const {
    TransformPair p;
    p.affine = true_affine;
    p.bspline = true_bspline;
    return p;
}

LabelVolume synth_atlas(std::array<int, 3> dims, int n_territories, std::uint64_t seed) {
    if (n_territories < 1) throw Error("synth_atlas: need at least one territory");
    if (dims[0] < 32 || dims[1] < 32 || dims[2] < 32)
        throw Error("synth_atlas: dims must be at least 32^3");

    LabelVolume vol({dims[0], dims[1], dims[2]}, {1.0, 1.0, 1.0});
    vol.center_on_isocenter();
    const std::size_t min_voxels = vol.size() / 100;

    Rng rng(seed ^ 0xA7C15ull);
    for (int label = 1; label <= n_territories; ++label) {
        bool placed = false;
        for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
            // a superellipsoid blob in the middle half of the volume
            const double cx = rng.uniform(0.30, 0.70) * dims[0];
            const double cy = rng.uniform(0.30, 0.70) * dims[1];
            const double cz = rng.uniform(0.30, 0.70) * dims[2];
            const double ax = rng.uniform(0.12, 0.22) * dims[0];
            const double ay = rng.uniform(0.12, 0.22) * dims[1];
            const double az = rng.uniform(0.12, 0.22) * dims[2];
            const double p = rng.uniform(2.0, 4.0);

            std::vector<std::size_t> voxels;
            const int x0 = std::max(0, int(cx - ax - 1)), x1 = std::min(dims[0] - 1, int(cx + ax + 1));
            const int y0 = std::max(0, int(cy - ay - 1)), y1 = std::min(dims[1] - 1, int(cy + ay + 1));
            const int z0 = std::max(0, int(cz - az - 1)), z1 = std::min(dims[2] - 1, int(cz + az + 1));
            for (int z = z0; z <= z1; ++z)
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        const double r = std::pow(std::abs((x - cx) / ax), p) +
                                         std::pow(std::abs((y - cy) / ay), p) +
                                         std::pow(std::abs((z - cz) / az), p);
                        if (r <= 1.0) {
                            const std::size_t i = (std::size_t(z) * dims[1] + y) * dims[0] + x;
                            if (vol.data[i] == 0) voxels.push_back(i);
                        }
                    }
            if (voxels.size() >= min_voxels) {
                for (std::size_t i : voxels) vol.data[i] = label;
                placed = true;
            }
        }
        if (!placed)
            throw Error("synth_atlas: territory " + std::to_string(label) + " failed to fit");
    }
    return vol;
}

TerritoryLUT phantom_lut(const LabelVolume& atlas) {
    TerritoryLUT lut;
    std::set<int> labels;
    for (std::int32_t v : atlas.data)
        if (v > 0) labels.insert(v);
    if (labels.empty()) throw Error("phantom_lut: atlas has no labels");
    for (int id : labels) lut.names[id] = "territory_" + std::to_string(id);
    lut.entries[InjectionSite::LeftAnterior] = labels;
    lut.entries[InjectionSite::RightAnterior] = labels;
    lut.entries[InjectionSite::Posterior] = labels;
    lut.validate();
    return lut;
}

namespace {

// gamma-variate wash-in/out, peak 1 at t = tp
double gamma_variate(double t, double tp, double alpha) {
    if (t <= 0) return 0;
    return std::pow(t / tp, alpha) * std::exp(alpha * (1.0 - t / tp));
}

// in-memory frames match their PNG round-trip exactly
GrayImage quantize16(const GrayImage& img) {
    GrayImage out = img;
    for (auto& v : out.data) v = float(std::lround(std::clamp(v, 0.f, 1.f) * 65535.f)) / 65535.f;
    return out;
}

}  // namespace

PhantomCase make_case(const LabelVolume& atlas, const PhantomConfig& config, std::uint64_t seed) {
    config.validate();
    ConeBeamGeometry geom = config.geometry;
    if (geom.det_cols == 0) geom = default_phantom_geometry();
    apply_view_preset(geom, config.view);  // the view label and the angles always agree
    geom.validate();

    PhantomCase c;
    c.atlas = atlas;
    c.geometry = geom;
    c.site = config.site;
    c.view = config.view;
    c.seed = seed;

    const TerritoryLUT lut = phantom_lut(atlas);
    const std::set<int> labels = select_labels(lut, config.site);
    c.projection = project(atlas, labels, geom);

    const double su = geom.det_spacing_mm[0], sv = geom.det_spacing_mm[1];
    const double extent_x = (geom.det_cols - 1) * su;
    const double extent_y = (geom.det_rows - 1) * sv;

    Rng rng(seed);
    const double theta = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) * kPi / 180.0;
    const double scale = rng.uniform(config.min_scale, config.max_scale);
    const double tx_px = rng.uniform(-config.max_translation_px, config.max_translation_px);
    const double ty_px = rng.uniform(-config.max_translation_px, config.max_translation_px);

    Affine2& A = c.true_affine;
    A.a11 = scale * std::cos(theta);
    A.a12 = -scale * std::sin(theta);
    A.a21 = scale * std::sin(theta);
    A.a22 = scale * std::cos(theta);
    A.tx = tx_px * su;
    A.ty = ty_px * sv;
    A.cx = extent_x / 2.0;
    A.cy = extent_y / 2.0;

    if (config.max_bspline_px > 0) {
        BSplineField2 f = BSplineField2::make(extent_x, extent_y,
                                              config.bspline_cells, config.bspline_cells);
        const double amp_x = config.max_bspline_px * su;
        const double amp_y = config.max_bspline_px * sv;
        for (int cj = 0; cj < f.rows; ++cj)
            for (int ci = 0; ci < f.cols; ++ci) {
                f.dx(ci, cj) = rng.uniform(-amp_x, amp_x);
                f.dy(ci, cj) = rng.uniform(-amp_y, amp_y);
            }
        // rescale so the dense field reliably reaches (but never exceeds)
        // the configured bound; basis smoothing would otherwise leave random
        // coefficients far below it
        std::vector<float> dmx, dmy;
        f.eval_dense(geom.det_cols, geom.det_rows, su, sv, dmx, dmy);
        double peak_px = 0;
        for (std::size_t i = 0; i < dmx.size(); ++i)
            peak_px = std::max({peak_px, std::abs(double(dmx[i])) / su,
                                std::abs(double(dmy[i])) / sv});
        if (peak_px > 0) {
            const double gain = 0.95 * config.max_bspline_px / peak_px;
            for (auto& v : f.coeffs) v *= gain;
        }
        c.true_bspline = std::move(f);
    }

    // dense ground-truth field raster in pixel units
    c.true_field_dx.assign(std::size_t(geom.det_cols) * geom.det_rows, 0.f);
    c.true_field_dy.assign(c.true_field_dx.size(), 0.f);
    if (c.true_bspline) {
        std::vector<float> dmx, dmy;
        c.true_bspline->eval_dense(geom.det_cols, geom.det_rows, su, sv, dmx, dmy);
        for (std::size_t i = 0; i < dmx.size(); ++i) {
            c.true_field_dx[i] = float(dmx[i] / su);
            c.true_field_dy[i] = float(dmy[i] / sv);
        }
    }

    // observed = moving warped by the true pair on the detector grid
    const FixedGrid grid{geom.det_cols, geom.det_rows, {su, sv}};
    const GrayImage warped_mm = apply_transform(c.projection.integral, c.true_pair(), grid);
    c.true_mask = gray_to_mask(warped_mm, c.projection.epsilon_mm);

    const auto [wlo, whi] = kern::minmax(warped_mm.data.data(), warped_mm.size());
    GrayImage warped_norm(geom.det_cols, geom.det_rows, {su, sv});
    if (whi > 0)
        kern::scale_offset(warped_mm.data.data(), 1.f / whi, 0.f, warped_norm.data.data(),
                           warped_mm.size());

    c.frames.frames.clear();
    c.frames.frame_interval_s = 1.0;
    const double tp = 0.35;
    for (int k = 0; k < config.n_frames; ++k) {
        const double t = (k + 0.5) / config.n_frames;
        const double gk = gamma_variate(t, tp, 2.0);
        GrayImage frame(geom.det_cols, geom.det_rows, {su, sv});
        const float a = float(-config.signal_amplitude * gk);
        kern::scale_offset(warped_norm.data.data(), a, 1.f, frame.data.data(), frame.size());
        if (config.noise_sigma > 0) {
            for (auto& v : frame.data) v += float(config.noise_sigma * rng.normal());
        }
        c.frames.frames.push_back(quantize16(frame));
    }
    return c;
}

void save_case(const PhantomCase& c, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir + "/frames");

    for (std::size_t k = 0; k < c.frames.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.png", k);
        write_png_gray(c.frames.frames[k], dir + "/frames/" + name);
    }
    save_geometry(c.geometry, dir + "/geometry.json");
    write_png_gray(mask_to_gray(c.true_mask), dir + "/true_mask.png");
    write_nifti(c.atlas, dir + "/atlas.nii");

    // LUT for the synthetic labels
    const TerritoryLUT lut = phantom_lut(c.atlas);
    nlohmann::ordered_json jl;
    for (const auto& [id, name] : lut.names) jl["names"][std::to_string(id)] = name;
    const auto ids = [&] {
        std::vector<int> v;
        for (const auto& [id, name] : lut.names) v.push_back(id);
        return v;
    }();
    jl["entries"]["LeftAnterior"] = ids;
    jl["entries"]["RightAnterior"] = ids;
    jl["entries"]["Posterior"] = ids;
    atomic_write_file(dir + "/lut.json", jl.dump(2) + "\n");

    // truth: affine (+ optional B-spline) and the dense px-unit field raster
    nlohmann::ordered_json jt;
    jt["site"] = to_string(c.site);
    jt["view"] = to_string(c.view);
    jt["seed"] = c.seed;
    jt["affine"]["matrix"] = {c.true_affine.a11, c.true_affine.a12, c.true_affine.a21,
                              c.true_affine.a22};
    jt["affine"]["translation_mm"] = {c.true_affine.tx, c.true_affine.ty};
    jt["affine"]["center_mm"] = {c.true_affine.cx, c.true_affine.cy};
    if (c.true_bspline) {
        const BSplineField2& b = *c.true_bspline;
        jt["bspline"]["grid"] = {b.cols, b.rows};
        jt["bspline"]["spacing_mm"] = {b.spacing[0], b.spacing[1]};
        jt["bspline"]["origin_mm"] = {b.origin[0], b.origin[1]};
        nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < std::size_t(b.rows) * b.cols; ++k)
            coeffs.push_back({b.coeffs[2 * k], b.coeffs[2 * k + 1]});
        jt["bspline"]["coeffs_mm"] = coeffs;
    }
    jt["field"] = {{"dims", {c.geometry.det_cols, c.geometry.det_rows}},
                   {"units", "px"},
                   {"layout", "dx plane then dy plane, row-major little-endian float32"},
                   {"file", "true_field.raw"}};
    atomic_write_file(dir + "/truth.json", jt.dump(2) + "\n");

    std::vector<float> raw = c.true_field_dx;
    raw.insert(raw.end(), c.true_field_dy.begin(), c.true_field_dy.end());
    write_raw_f32(dir + "/true_field.raw", raw);
}

PhantomCase load_case(const std::string& dir) {
    PhantomCase c;
    c.geometry = load_geometry(dir + "/geometry.json");
    c.atlas = read_nifti(dir + "/atlas.nii");

    std::ifstream f(dir + "/truth.json");
    if (!f) throw Error("cannot open truth.json in " + dir);
    nlohmann::json j;
    f >> j;
    c.site = parse_injection_site(j.at("site").get<std::string>());
    c.view = parse_view_label(j.at("view").get<std::string>());
    c.seed = j.value("seed", 0ull);
    const auto& ja = j.at("affine");
    c.true_affine.a11 = ja.at("matrix").at(0).get<double>();
    c.true_affine.a12 = ja.at("matrix").at(1).get<double>();
    c.true_affine.a21 = ja.at("matrix").at(2).get<double>();
    c.true_affine.a22 = ja.at("matrix").at(3).get<double>();
    c.true_affine.tx = ja.at("translation_mm").at(0).get<double>();
    c.true_affine.ty = ja.at("translation_mm").at(1).get<double>();
    c.true_affine.cx = ja.at("center_mm").at(0).get<double>();
    c.true_affine.cy = ja.at("center_mm").at(1).get<double>();
    if (j.contains("bspline")) {
        BSplineField2 b;
        const auto& jb = j.at("bspline");
        b.cols = jb.at("grid").at(0).get<int>();
        b.rows = jb.at("grid").at(1).get<int>();
        b.spacing = {jb.at("spacing_mm").at(0).get<double>(), jb.at("spacing_mm").at(1).get<double>()};
        b.origin = {jb.at("origin_mm").at(0).get<double>(), jb.at("origin_mm").at(1).get<double>()};
        b.domain_extent = {(b.cols - 3) * b.spacing[0], (b.rows - 3) * b.spacing[1]};
        b.coeffs.resize(2 * std::size_t(b.rows) * b.cols);
        const auto& coeffs = jb.at("coeffs_mm");
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            b.coeffs[2 * k] = coeffs.at(k).at(0).get<double>();
            b.coeffs[2 * k + 1] = coeffs.at(k).at(1).get<double>();
        }
        c.true_bspline = std::move(b);
    }
    const std::size_t npx = std::size_t(c.geometry.det_cols) * c.geometry.det_rows;
    const auto raw = read_raw_f32(dir + "/true_field.raw", 2 * npx);
    c.true_field_dx.assign(raw.begin(), raw.begin() + npx);
    c.true_field_dy.assign(raw.begin() + npx, raw.end());

    c.frames = load_frames(dir + "/frames", std::nullopt,
                           {c.geometry.det_spacing_mm[0], c.geometry.det_spacing_mm[1]});
    const GrayImage tm = read_png_gray(dir + "/true_mask.png");
    c.true_mask = gray_to_mask(tm, 0.5f);
    c.true_mask.spacing = {c.geometry.det_spacing_mm[0], c.geometry.det_spacing_mm[1]};

    const TerritoryLUT lut = phantom_lut(c.atlas);
    c.projection = project(c.atlas, select_labels(lut, c.site), c.geometry);
    return c;
}

}  // namespace dsatlas
