#include "stats_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"
#include "dsatlas/png_io.hpp"

namespace dsatlas::cli {

void render_histogram_svg(const CohortStats& s, const std::string& path) {
    const int width = 1040, height = 420, margin = 40;
    const int plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    std::int64_t peak = 1;
    for (auto c : s.histogram) peak = std::max(peak, c);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int b = 0; b < 100; ++b) {
        const double h = double(s.histogram[b]) / double(peak) * plot_h;
        const double x = margin + b * (plot_w / 100.0);
        os << "<rect x=\"" << x << "\" y=\"" << (margin + plot_h - h) << "\" width=\""
           << (plot_w / 100.0) << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
    }
    os << "<line x1=\"" << margin << "\" y1=\"" << (margin + plot_h) << "\" x2=\""
       << (margin + plot_w) << "\" y2=\"" << (margin + plot_h) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << (margin + plot_h) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 10; ++t) {
        const double x = margin + t * (plot_w / 10.0);
        os << "<text x=\"" << x << "\" y=\"" << (height - 12)
           << "\" font-size=\"12\" text-anchor=\"middle\">" << (t / 10.0) << "</text>\n";
    }
    os << "<text x=\"" << (width / 2) << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
       << "SSIM histogram (bin width 0.01, n=" << s.n << ")</text>\n";
    os << "</svg>\n";
    atomic_write_file(path, os.str());
}

void render_histogram_png(const CohortStats& s, const std::string& path) {
    const int width = 1040, height = 420, margin = 40;
    const int plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    std::vector<std::uint8_t> rgb(std::size_t(width) * height * 3, 255);
    std::int64_t peak = 1;
    for (auto c : s.histogram) peak = std::max(peak, c);
    const auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const std::size_t i = (std::size_t(y) * width + x) * 3;
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    };
    for (int b = 0; b < 100; ++b) {
        const int bar_h = int(std::llround(double(s.histogram[b]) / double(peak) * plot_h));
        const int x0 = margin + b * plot_w / 100;
        const int x1 = margin + (b + 1) * plot_w / 100;
        for (int x = x0; x < x1 - 1; ++x)
            for (int y = margin + plot_h - bar_h; y < margin + plot_h; ++y)
                put(x, y, 70, 130, 180);
    }
    for (int x = margin; x <= margin + plot_w; ++x) put(x, margin + plot_h, 0, 0, 0);
    for (int y = margin; y <= margin + plot_h; ++y) put(margin, y, 0, 0, 0);
    for (int t = 0; t <= 10; ++t) {
        const int x = margin + t * plot_w / 10;
        for (int y = margin + plot_h; y < margin + plot_h + 6; ++y) put(x, y, 0, 0, 0);
    }
    write_png_rgb(width, height, rgb, path);
}

std::vector<double> read_csv_column(const std::string& csv_path, const std::string& column) {
    std::ifstream f(csv_path);
    if (!f) throw Error("cannot open CSV: " + csv_path);
    std::string line;
    if (!std::getline(f, line)) throw Error("empty CSV: " + csv_path);
    std::vector<std::string> headers;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) headers.push_back(cell);
    }
    int col = -1;
    for (std::size_t i = 0; i < headers.size(); ++i)
        if (headers[i] == column) col = int(i);
    if (col < 0) throw Error("CSV column not found: " + column);
    std::vector<double> values;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        for (int i = 0; i <= col; ++i)
            if (!std::getline(ss, cell, ',')) throw Error("short CSV row: " + line);
        if (!cell.empty()) values.push_back(std::stod(cell));
    }
    return values;
}


}  // namespace dsatlas::cli
