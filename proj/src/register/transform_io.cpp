#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas {

namespace {

// fixed field order and %.17g floats keep the file byte-stable and round-trip exact
std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string transform_pair_to_json(const TransformPair& pair) {
    std::ostringstream os;
    const Affine2& a = pair.affine;
    os << "{\n";
    os << "  \"affine\": {\n";
    os << "    \"matrix\": [" << num(a.a11) << ", " << num(a.a12) << ", " << num(a.a21) << ", "
       << num(a.a22) << "],\n";
    os << "    \"translation_mm\": [" << num(a.tx) << ", " << num(a.ty) << "],\n";
    os << "    \"center_mm\": [" << num(a.cx) << ", " << num(a.cy) << "]\n";
    os << "  },\n";
    if (pair.bspline) {
        const BSplineField2& b = *pair.bspline;
        os << "  \"bspline\": {\n";
        os << "    \"grid\": [" << b.cols << ", " << b.rows << "],\n";
        os << "    \"spacing_mm\": [" << num(b.spacing[0]) << ", " << num(b.spacing[1]) << "],\n";
        os << "    \"origin_mm\": [" << num(b.origin[0]) << ", " << num(b.origin[1]) << "],\n";
        os << "    \"coeffs_mm\": [";
        const std::size_t n = std::size_t(b.rows) * b.cols;
        for (std::size_t k = 0; k < n; ++k) {
            if (k) os << ", ";
            os << "[" << num(b.coeffs[2 * k]) << ", " << num(b.coeffs[2 * k + 1]) << "]";
        }
        os << "]\n";
        os << "  },\n";
    }
    const RegistrationConfig& c = pair.config;
    os << "  \"config\": {\n";
    os << "    \"resolutions_affine\": " << c.resolutions_affine << ",\n";
    os << "    \"resolutions_bspline\": " << c.resolutions_bspline << ",\n";
    os << "    \"max_step_length\": " << num(c.max_step_length) << ",\n";
    os << "    \"histogram_bins\": " << c.histogram_bins << ",\n";
    os << "    \"lbfgs_memory\": " << c.lbfgs_memory << ",\n";
    os << "    \"max_iterations_per_level\": " << c.max_iterations_per_level << ",\n";
    os << "    \"convergence_tol\": " << num(c.convergence_tol) << ",\n";
    os << "    \"auto_scale\": " << (c.auto_scale ? "true" : "false") << "\n";
    os << "  },\n";
    os << "  \"final_cost\": " << num(pair.final_cost) << "\n";
    os << "}\n";
    return os.str();
}

TransformPair transform_pair_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("transform JSON parse error: ") + e.what());
    }
    TransformPair pair;
    try {
        const auto& ja = j.at("affine");
        const auto& m = ja.at("matrix");
        pair.affine.a11 = m.at(0).get<double>();
        pair.affine.a12 = m.at(1).get<double>();
        pair.affine.a21 = m.at(2).get<double>();
        pair.affine.a22 = m.at(3).get<double>();
        pair.affine.tx = ja.at("translation_mm").at(0).get<double>();
        pair.affine.ty = ja.at("translation_mm").at(1).get<double>();
        pair.affine.cx = ja.at("center_mm").at(0).get<double>();
        pair.affine.cy = ja.at("center_mm").at(1).get<double>();
        if (j.contains("bspline")) {
            BSplineField2 b;
            const auto& jb = j.at("bspline");
            b.cols = jb.at("grid").at(0).get<int>();
            b.rows = jb.at("grid").at(1).get<int>();
            b.spacing = {jb.at("spacing_mm").at(0).get<double>(),
                         jb.at("spacing_mm").at(1).get<double>()};
            b.origin = {jb.at("origin_mm").at(0).get<double>(),
                        jb.at("origin_mm").at(1).get<double>()};
            b.domain_extent = {(b.cols - 3) * b.spacing[0], (b.rows - 3) * b.spacing[1]};
            const auto& coeffs = jb.at("coeffs_mm");
            if (int(coeffs.size()) != b.cols * b.rows)
                throw Error("transform JSON: coeffs_mm count mismatch");
            b.coeffs.resize(2 * coeffs.size());
            for (std::size_t k = 0; k < coeffs.size(); ++k) {
                b.coeffs[2 * k] = coeffs.at(k).at(0).get<double>();
                b.coeffs[2 * k + 1] = coeffs.at(k).at(1).get<double>();
            }
            b.validate();
            pair.bspline = std::move(b);
        }
        if (j.contains("config")) {
            const auto& jc = j.at("config");
            RegistrationConfig c;
            c.resolutions_affine = jc.value("resolutions_affine", c.resolutions_affine);
            c.resolutions_bspline = jc.value("resolutions_bspline", c.resolutions_bspline);
            c.max_step_length = jc.value("max_step_length", c.max_step_length);
            c.histogram_bins = jc.value("histogram_bins", c.histogram_bins);
            c.lbfgs_memory = jc.value("lbfgs_memory", c.lbfgs_memory);
            c.max_iterations_per_level =
                jc.value("max_iterations_per_level", c.max_iterations_per_level);
            c.convergence_tol = jc.value("convergence_tol", c.convergence_tol);
            c.auto_scale = jc.value("auto_scale", c.auto_scale);
            pair.config = c;
        }
        pair.final_cost = j.value("final_cost", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("transform JSON missing field: ") + e.what());
    }
    pair.affine.validate();
    return pair;
}

void save_transform_pair(const TransformPair& pair, const std::string& path) {
    atomic_write_file(path, transform_pair_to_json(pair));
}

TransformPair load_transform_pair(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open transform file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return transform_pair_from_json(ss.str());
}

}  // namespace dsatlas
