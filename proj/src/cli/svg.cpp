#include "neuralign/cli/svg.hpp"

#include "neuralign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace neuralign::cli::svg {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0, hi = 1;
};

Range data_range(const std::vector<const std::vector<double>*>& sets) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto* v : sets) {
        for (double x : *v) {
            if (!std::isfinite(x)) continue;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (!std::isfinite(lo)) return {0, 1};
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
        const double pad = std::max(0.5, std::abs(hi) * 0.1);
        return {lo - pad, hi + pad};
    }
    return {lo, hi};
}

// Tick step from {1, 2, 5} x 10^k giving about five intervals.
std::vector<double> ticks(Range& r) {
    const double raw = (r.hi - r.lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (raw <= step) break;
    }
    r.lo = std::floor(r.lo / step) * step;
    r.hi = std::ceil(r.hi / step) * step;
    std::vector<double> t;
    const auto count = static_cast<long>(std::llround((r.hi - r.lo) / step));
    for (long i = 0; i <= count; ++i) {
        double v = r.lo + static_cast<double>(i) * step;
        if (std::abs(v) < step * 1e-9) v = 0.0;
        t.push_back(v);
    }
    return t;
}

class Canvas {
public:
    Canvas(const Axes& axes, Range x, Range y) : x_(x), y_(y) {
        const auto xt = ticks(x_);
        const auto yt = ticks(y_);
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
             << "\" viewBox=\"0 0 " << num(kWidth) << " " << num(kHeight) << "\" font-family=\"sans-serif\">\n";
        out_ << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
             << "\" fill=\"white\"/>\n";
        out_ << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">"
             << escape(axes.title) << "</text>\n";
        const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
        out_ << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
        for (double t : xt) out_ << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px(t)) << "\" y2=\"" << num(y1) << "\"/>\n";
        for (double t : yt) out_ << "<line x1=\"" << num(x0) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(py(t)) << "\"/>\n";
        out_ << "</g>\n";
        out_ << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
             << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
        out_ << "<g font-size=\"11\">\n";
        for (double t : xt) {
            out_ << "<text x=\"" << num(px(t)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">" << num(t)
                 << "</text>\n";
        }
        for (double t : yt) {
            out_ << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << num(t)
                 << "</text>\n";
        }
        out_ << "</g>\n";
        out_ << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 18)
             << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(axes.x_label) << "</text>\n";
        out_ << "<text x=\"18\" y=\"" << num((y0 + y1) / 2) << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
             << num((y0 + y1) / 2) << ")\">" << escape(axes.y_label) << "</text>\n";
    }

    double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kRight - kLeft); }
    double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kBottom - kTop); }
    std::ostringstream& out() { return out_; }
    const Range& x_range() const { return x_; }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    Range x_, y_;
    std::ostringstream out_;
};

}  // namespace

std::string num(double v) {
    if (!std::isfinite(v)) return "0";
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string scatter(const Axes& axes, const std::vector<double>& x, const std::vector<double>& y, bool fit_line) {
    Canvas c(axes, data_range({&x}), data_range({&y}));
    auto& o = c.out();
    o << "<g fill=\"" << kPalette[0] << "\" fill-opacity=\"0.7\">\n";
    double sx = 0, sy = 0, n = 0;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        o << "<circle cx=\"" << num(c.px(x[i])) << "\" cy=\"" << num(c.py(y[i])) << "\" r=\"3\"/>\n";
        sx += x[i];
        sy += y[i];
        n += 1;
    }
    o << "</g>\n";
    if (fit_line && n >= 2) {
        const double mx = sx / n, my = sy / n;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        if (sxx > 0) {
            const double slope = sxy / sxx;
            const double a = c.x_range().lo, b = c.x_range().hi;
            o << "<line x1=\"" << num(c.px(a)) << "\" y1=\"" << num(c.py(my + slope * (a - mx))) << "\" x2=\""
              << num(c.px(b)) << "\" y2=\"" << num(c.py(my + slope * (b - mx)))
              << "\" stroke=\"" << kPalette[3] << "\" stroke-width=\"2\"/>\n";
        }
    }
    return c.finish();
}

std::string lines(const Axes& axes, const std::vector<Series>& series) {
    std::vector<const std::vector<double>*> xs, ys;
    for (const auto& s : series) {
        xs.push_back(&s.x);
        ys.push_back(&s.y);
    }
    Canvas c(axes, data_range(xs), data_range(ys));
    auto& o = c.out();
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            o << (first ? "" : " ") << num(c.px(s.x[i])) << "," << num(c.py(s.y[i]));
            first = false;
        }
        o << "\"/>\n";
        const double ly = kTop + 10 + 18 * static_cast<double>(k);
        o << "<line x1=\"" << num(kWidth - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kWidth - kRight + 32)
          << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(kWidth - kRight + 38) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\">"
          << escape(s.label) << "</text>\n";
    }
    return c.finish();
}

void write(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << content;
}

}  // namespace neuralign::cli::svg
