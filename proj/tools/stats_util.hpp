#pragma once

#include <string>
#include <vector>

#include "dsatlas/metrics.hpp"

namespace dsatlas::cli {

/// numeric column from a results CSV (header row names the columns)
std::vector<double> read_csv_column(const std::string& csv_path, const std::string& column);

/// Fig.2-style SSIM histogram, 0.01-wide bins over [0,1]
void render_histogram_svg(const CohortStats& s, const std::string& path);
void render_histogram_png(const CohortStats& s, const std::string& path);

}  // namespace dsatlas::cli
