#pragma once

#include <string>
#include <vector>

namespace rarefind {

// One line with an optional confidence band (lo/hi empty = no band).
struct LineSeries {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> lo;
    std::vector<double> hi;
};

struct ScatterSeries {
    std::string label;
    std::string color;
    bool cross = false;  // crosses for the highlighted class, circles otherwise
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained static charts; CSV stays the authoritative output, these
// exist for quick visual checks.
std::string line_chart_svg(const std::vector<LineSeries>& series,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label);

std::string scatter_chart_svg(const std::vector<ScatterSeries>& series,
                              const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label);

void save_text(const std::string& path, const std::string& body);

}  // namespace rarefind
