#pragma once

#include <array>
#include <vector>

namespace dsatlas {

/// Uniform cubic B-spline free-form deformation over a 2D rectangular
/// domain. Control point i sits at origin + i*spacing per axis; the domain
/// [0, extent] is covered with a full 4-point support everywhere (grid =
/// cells + 3 control points per axis). Coefficients are displacements in mm,
/// stored row-major as [dx, dy] per control point.
struct BSplineField2 {
    int cols = 0;
    int rows = 0;
    std::array<double, 2> spacing = {1.0, 1.0};   // (gx, gy) mm between control points
    std::array<double, 2> origin = {0.0, 0.0};    // mm anchor of control point (0,0)
    std::array<double, 2> domain_extent = {0.0, 0.0};  // mm
    std::vector<double> coeffs;                   // 2 * rows * cols

    /// grid with ncells_x x ncells_y cells spanning [0, extent] per axis,
    /// zero displacement
    static BSplineField2 make(double extent_x, double extent_y, int ncells_x, int ncells_y);

    std::size_t n_params() const { return coeffs.size(); }
    double& dx(int ci, int cj) { return coeffs[2 * (std::size_t(cj) * cols + ci)]; }
    double& dy(int ci, int cj) { return coeffs[2 * (std::size_t(cj) * cols + ci) + 1]; }
    double dx(int ci, int cj) const { return coeffs[2 * (std::size_t(cj) * cols + ci)]; }
    double dy(int ci, int cj) const { return coeffs[2 * (std::size_t(cj) * cols + ci) + 1]; }

    void displacement_at(double x_mm, double y_mm, double& out_dx, double& out_dy) const;

    /// dense displacement over a pixel grid (pixel center i -> i * pixel_spacing mm)
    void eval_dense(int width, int height, double sx_mm, double sy_mm,
                    std::vector<float>& field_dx, std::vector<float>& field_dy) const;

    /// exact dyadic refinement: halves the spacing, doubles the cells, and
    /// represents the same displacement field (knot insertion)
    BSplineField2 refined() const;

    double max_abs_coeff() const;
    void validate() const;
};

/// cubic B-spline basis B0..B3 at local coordinate u in [0,1]
inline void bspline_weights(double u, double w[4]) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    w[0] = (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0;
    w[1] = (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0;
    w[2] = (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0;
    w[3] = u3 / 6.0;
}

}  // namespace dsatlas
