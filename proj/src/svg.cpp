#include "rarefind/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "rarefind/common.hpp"

namespace rarefind {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 40.0, kBottom = 48.0;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    void pad() {
        if (lo > hi) {  // nothing included
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

class Canvas {
public:
    Canvas(Range xr, Range yr, const std::string& title,
           const std::string& x_label, const std::string& y_label)
        : xr_(xr), yr_(yr) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
             << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
             << kHeight << "\">\n";
        out_ << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
             << "\" fill=\"white\"/>\n";
        out_ << "<text x=\"" << kWidth / 2
             << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                "font-size=\"15\">"
             << title << "</text>\n";
        axes(x_label, y_label);
    }

    double px(double x) const {
        return kLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom -
               (y - yr_.lo) / (yr_.hi - yr_.lo) * (kHeight - kTop - kBottom);
    }

    void band(const std::vector<double>& x, const std::vector<double>& lo,
              const std::vector<double>& hi, const std::string& color) {
        if (x.size() < 2) return;
        out_ << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" "
             << "stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            out_ << num(px(x[i])) << "," << num(py(hi[i])) << " ";
        for (std::size_t i = x.size(); i-- > 0;)
            out_ << num(px(x[i])) << "," << num(py(lo[i])) << " ";
        out_ << "\"/>\n";
    }

    void polyline(const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& color) {
        out_ << "<polyline fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            out_ << num(px(x[i])) << "," << num(py(y[i])) << " ";
        out_ << "\"/>\n";
        for (std::size_t i = 0; i < x.size(); ++i)
            out_ << "<circle cx=\"" << num(px(x[i])) << "\" cy=\"" << num(py(y[i]))
                 << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }

    void marker(double x, double y, const std::string& color, bool cross) {
        const double cx = px(x), cy = py(y);
        if (cross) {
            out_ << "<path d=\"M" << num(cx - 4) << " " << num(cy - 4) << " L"
                 << num(cx + 4) << " " << num(cy + 4) << " M" << num(cx - 4) << " "
                 << num(cy + 4) << " L" << num(cx + 4) << " " << num(cy - 4)
                 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        } else {
            out_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy)
                 << "\" r=\"3\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
        }
    }

    void legend_entry(const std::string& label, const std::string& color,
                      std::size_t index) {
        const double y = kTop + 8 + 18.0 * static_cast<double>(index);
        out_ << "<rect x=\"" << kLeft + 8 << "\" y=\"" << y - 9
             << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        out_ << "<text x=\"" << kLeft + 26 << "\" y=\"" << y + 2
             << "\" font-family=\"sans-serif\" font-size=\"12\">" << label
             << "</text>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    void axes(const std::string& x_label, const std::string& y_label) {
        out_ << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom
             << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
             << "\" stroke=\"black\"/>\n";
        out_ << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
             << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = xr_.lo + (xr_.hi - xr_.lo) * i / 4.0;
            const double fy = yr_.lo + (yr_.hi - yr_.lo) * i / 4.0;
            out_ << "<text x=\"" << num(px(fx)) << "\" y=\"" << kHeight - kBottom + 18
                 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                    "font-size=\"11\">"
                 << tick_label(fx) << "</text>\n";
            out_ << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(fy) + 4)
                 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
                    "font-size=\"11\">"
                 << tick_label(fy) << "</text>\n";
        }
        out_ << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\""
             << kHeight - 12
             << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                "font-size=\"13\">"
             << x_label << "</text>\n";
        out_ << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
             << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                "font-size=\"13\" transform=\"rotate(-90 16 "
             << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label
             << "</text>\n";
    }

    Range xr_, yr_;
    std::ostringstream out_;
};

}  // namespace

std::string line_chart_svg(const std::vector<LineSeries>& series,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
    Range xr, yr;
    for (const auto& s : series) {
        for (double v : s.x) xr.include(v);
        for (double v : s.y) yr.include(v);
        for (double v : s.lo) yr.include(v);
        for (double v : s.hi) yr.include(v);
    }
    xr.pad();
    yr.pad();

    Canvas canvas(xr, yr, title, x_label, y_label);
    for (const auto& s : series)
        if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size())
            canvas.band(s.x, s.lo, s.hi, s.color);
    for (std::size_t i = 0; i < series.size(); ++i) {
        canvas.polyline(series[i].x, series[i].y, series[i].color);
        canvas.legend_entry(series[i].label, series[i].color, i);
    }
    return canvas.finish();
}

std::string scatter_chart_svg(const std::vector<ScatterSeries>& series,
                              const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label) {
    Range xr, yr;
    for (const auto& s : series) {
        for (double v : s.x) xr.include(v);
        for (double v : s.y) yr.include(v);
    }
    xr.pad();
    yr.pad();

    Canvas canvas(xr, yr, title, x_label, y_label);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        for (std::size_t p = 0; p < s.x.size(); ++p)
            canvas.marker(s.x[p], s.y[p], s.color, s.cross);
        canvas.legend_entry(s.label, s.color, i);
    }
    return canvas.finish();
}

void save_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << body;
    if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace rarefind
