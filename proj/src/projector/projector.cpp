#include "dsatlas/projector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"

namespace dsatlas {

using nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

Vec3 scaled(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }

}  // namespace

void ConeBeamGeometry::validate() const {
    if (!(sid_mm > 0) || !(sid_mm < sdd_mm))
        throw Error("geometry: need 0 < sid < sdd");
    if (det_cols < 1 || det_rows < 1) throw Error("geometry: detector must be at least 1x1");
    if (!(det_spacing_mm[0] > 0) || !(det_spacing_mm[1] > 0))
        throw Error("geometry: detector spacing must be positive");
}

void apply_view_preset(ConeBeamGeometry& g, ViewLabel view) {
    g.primary_angle_deg = (view == ViewLabel::Lateral) ? 90.0 : 0.0;
    g.secondary_angle_deg = 0.0;
}

ConeBeamGeometry load_geometry(const std::string& path, bool* angles_present) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open geometry sidecar: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("geometry JSON parse error in " + path + ": " + e.what());
    }
    ConeBeamGeometry g;
    try {
        g.sid_mm = j.at("sid_mm").get<double>();
        g.sdd_mm = j.at("sdd_mm").get<double>();
        g.det_cols = j.at("det_cols").get<int>();
        g.det_rows = j.at("det_rows").get<int>();
        g.det_spacing_mm = {j.at("det_spacing_mm").at(0).get<double>(),
                            j.at("det_spacing_mm").at(1).get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error("geometry sidecar missing field in " + path + ": " + e.what());
    }
    const bool have_angles = j.contains("primary_angle_deg");
    if (have_angles) g.primary_angle_deg = j["primary_angle_deg"].get<double>();
    if (j.contains("secondary_angle_deg"))
        g.secondary_angle_deg = j["secondary_angle_deg"].get<double>();
    if (angles_present) *angles_present = have_angles;
    g.validate();
    return g;
}

void save_geometry(const ConeBeamGeometry& g, const std::string& path) {
    ordered_json j;
    j["sid_mm"] = g.sid_mm;
    j["sdd_mm"] = g.sdd_mm;
    j["primary_angle_deg"] = g.primary_angle_deg;
    j["secondary_angle_deg"] = g.secondary_angle_deg;
    j["det_cols"] = g.det_cols;
    j["det_rows"] = g.det_rows;
    j["det_spacing_mm"] = {g.det_spacing_mm[0], g.det_spacing_mm[1]};
    atomic_write_file(path, j.dump(2) + "\n");
}

DetectorFrame place_geometry(const ConeBeamGeometry& g) {
    g.validate();
    const double a = g.primary_angle_deg * kPi / 180.0;
    const double b = g.secondary_angle_deg * kPi / 180.0;
    const Vec3 p{std::sin(a) * std::cos(b), std::cos(a) * std::cos(b), std::sin(b)};
    Vec3 u{p.y, -p.x, 0.0};
    const double un = norm(u);
    if (un < 1e-12) throw Error("geometry: degenerate view (beam along superior axis)");
    u = scaled(u, 1.0 / un);
    const Vec3 v = cross(u, p);  // unit, since u is orthogonal to p
    DetectorFrame fr;
    fr.source = scaled(p, g.sid_mm);
    fr.center = scaled(p, g.sid_mm - g.sdd_mm);
    fr.u_axis = u;
    fr.v_axis = v;
    return fr;
}

double magnification(const ConeBeamGeometry& g) {
    g.validate();
    return g.sdd_mm / g.sid_mm;
}

BinaryMask Projection::silhouette() const {
    return gray_to_mask(integral, epsilon_mm);
}

std::map<int, BinaryMask> Projection::per_label_silhouettes() const {
    std::map<int, BinaryMask> out;
    for (const auto& [id, img] : per_label) out.emplace(id, gray_to_mask(img, epsilon_mm));
    return out;
}

Projection project(const LabelVolume& volume, const std::set<int>& labels,
                   const ConeBeamGeometry& g) {
    volume.validate();
    const DetectorFrame fr = place_geometry(g);

    Projection out;
    out.integral = GrayImage(g.det_cols, g.det_rows, g.det_spacing_mm);
    const double min_sp = std::min({volume.spacing[0], volume.spacing[1], volume.spacing[2]});
    out.epsilon_mm = float(0.5 * min_sp);
    for (int id : labels) {
        if (id != 0) out.per_label.emplace(id, GrayImage(g.det_cols, g.det_rows, g.det_spacing_mm));
    }
    if (labels.empty() || volume.size() == 0) return out;

    // per-label double accumulators; the combined integral is their exact sum
    const std::size_t npix = std::size_t(g.det_cols) * g.det_rows;
    const int max_label = *labels.rbegin();
    std::map<int, std::vector<double>> acc;
    std::vector<std::vector<double>*> label_acc(std::size_t(max_label) + 1, nullptr);
    for (auto& [id, img] : out.per_label) {
        acc.emplace(id, std::vector<double>(npix, 0.0));
        label_acc[id] = &acc.at(id);
    }

    const double bmin[3] = {volume.origin[0] - 0.5 * volume.spacing[0],
                            volume.origin[1] - 0.5 * volume.spacing[1],
                            volume.origin[2] - 0.5 * volume.spacing[2]};
    const double bmax[3] = {bmin[0] + volume.dims[0] * volume.spacing[0],
                            bmin[1] + volume.dims[1] * volume.spacing[1],
                            bmin[2] + volume.dims[2] * volume.spacing[2]};

    const double cu = 0.5 * (g.det_cols - 1);
    const double cv = 0.5 * (g.det_rows - 1);
    const std::int32_t* vox = volume.data.data();
    const int nx = volume.dims[0], ny = volume.dims[1], nz = volume.dims[2];

    for (int r = 0; r < g.det_rows; ++r) {
        for (int c = 0; c < g.det_cols; ++c) {
            const double uoff = (c - cu) * g.det_spacing_mm[0];
            const double voff = (cv - r) * g.det_spacing_mm[1];  // row 0 is most superior
            const Vec3 px{fr.center.x + fr.u_axis.x * uoff + fr.v_axis.x * voff,
                          fr.center.y + fr.u_axis.y * uoff + fr.v_axis.y * voff,
                          fr.center.z + fr.u_axis.z * uoff + fr.v_axis.z * voff};
            const double dir[3] = {px.x - fr.source.x, px.y - fr.source.y, px.z - fr.source.z};
            const double src[3] = {fr.source.x, fr.source.y, fr.source.z};
            const double ray_len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);

            // slab clip of the parametric ray against the volume box
            double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
            bool miss = false;
            for (int a = 0; a < 3; ++a) {
                if (std::abs(dir[a]) < 1e-300) {
                    if (src[a] < bmin[a] || src[a] > bmax[a]) {
                        miss = true;
                        break;
                    }
                } else {
                    double t0 = (bmin[a] - src[a]) / dir[a];
                    double t1 = (bmax[a] - src[a]) / dir[a];
                    if (t0 > t1) std::swap(t0, t1);
                    tmin = std::max(tmin, t0);
                    tmax = std::min(tmax, t1);
                }
            }
            if (miss || tmin >= tmax) continue;

            // entry voxel
            int iv[3];
            double tnext[3], dt[3];
            int step[3];
            for (int a = 0; a < 3; ++a) {
                const double pos = src[a] + dir[a] * tmin;
                int i = int(std::floor((pos - bmin[a]) / volume.spacing[a]));
                i = std::clamp(i, 0, volume.dims[a] - 1);
                iv[a] = i;
                if (dir[a] > 0) {
                    step[a] = 1;
                    dt[a] = volume.spacing[a] / dir[a];
                    tnext[a] = (bmin[a] + (i + 1) * volume.spacing[a] - src[a]) / dir[a];
                } else if (dir[a] < 0) {
                    step[a] = -1;
                    dt[a] = -volume.spacing[a] / dir[a];
                    tnext[a] = (bmin[a] + i * volume.spacing[a] - src[a]) / dir[a];
                } else {
                    step[a] = 0;
                    dt[a] = std::numeric_limits<double>::infinity();
                    tnext[a] = std::numeric_limits<double>::infinity();
                }
            }

            double t = tmin;
            const std::size_t pix = std::size_t(r) * g.det_cols + c;
            while (t < tmax) {
                int axis = 0;
                if (tnext[1] < tnext[0]) axis = 1;
                if (tnext[2] < tnext[axis]) axis = 2;
                const double t_exit = std::min(tnext[axis], tmax);
                const std::int32_t lab = vox[(std::size_t(iv[2]) * ny + iv[1]) * nx + iv[0]];
                if (lab > 0 && lab <= max_label && label_acc[lab])
                    (*label_acc[lab])[pix] += (t_exit - t) * ray_len;
                t = t_exit;
                if (tnext[axis] >= tmax) break;
                iv[axis] += step[axis];
                if (iv[axis] < 0 || iv[axis] >= volume.dims[axis]) break;
                tnext[axis] += dt[axis];
            }
        }
    }
    std::vector<double> total(npix, 0.0);
    for (auto& [id, buf] : acc) {
        GrayImage& img = out.per_label.at(id);
        for (std::size_t i = 0; i < npix; ++i) {
            img.data[i] = float(buf[i]);
            total[i] += buf[i];
        }
    }
    for (std::size_t i = 0; i < npix; ++i) out.integral.data[i] = float(total[i]);
    return out;
}

}  // namespace dsatlas
