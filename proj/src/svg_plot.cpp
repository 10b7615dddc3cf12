#include "pcw/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "pcw/io.hpp"

namespace pcw::plot {

namespace {

constexpr double kLeft = 78, kRight = 20, kTop = 34, kBottom = 52;
constexpr const char* kColors[] = {"#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d4820f", "#555555"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v)
{
    if (v == 0.0)
        return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape(const std::string& s)
{
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

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    double pixel_lo = 0.0, pixel_hi = 1.0;

    double map(double v) const
    {
        double a = log ? std::log10(v) : v;
        double b0 = log ? std::log10(lo) : lo;
        double b1 = log ? std::log10(hi) : hi;
        return pixel_lo + (a - b0) / (b1 - b0) * (pixel_hi - pixel_lo);
    }
};

// 1-2-5 steps, roughly `target` intervals.
std::vector<double> linear_ticks(double lo, double hi, int target = 5)
{
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step)
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return out;
}

void pad_range(double& lo, double& hi, double fraction)
{
    if (hi <= lo) {
        const double d = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
        lo -= d;
        hi += d;
        return;
    }
    const double d = fraction * (hi - lo);
    lo -= d;
    hi += d;
}

std::string short_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

bool drawable(const Figure& f, double x, double y)
{
    return std::isfinite(x) && std::isfinite(y) && (!f.log_y || y > 0.0);
}

} // namespace

std::optional<std::string> render(const Figure& f)
{
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    std::size_t count = 0;
    for (const auto& s : f.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!drawable(f, s.x[i], s.y[i]))
                continue;
            ++count;
            const double e = i < s.y_error.size() && std::isfinite(s.y_error[i]) ? s.y_error[i] : 0.0;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, f.log_y ? s.y[i] : s.y[i] - e);
            y1 = std::max(y1, s.y[i] + e);
        }
    if (count == 0)
        return std::nullopt;
    for (const auto& g : f.guides) {
        if (!std::isfinite(g.value) || (g.horizontal && f.log_y && g.value <= 0.0))
            continue;
        if (g.horizontal) {
            y0 = std::min(y0, g.value);
            y1 = std::max(y1, g.value);
        } else {
            x0 = std::min(x0, g.value);
            x1 = std::max(x1, g.value);
        }
    }

    Axis ax{x0, x1, false, kLeft, kWidth - kRight};
    pad_range(ax.lo, ax.hi, 0.03);
    Axis ay{y0, y1, f.log_y, kHeight - kBottom, kTop};
    if (f.log_y) {
        ay.lo = std::pow(10.0, std::floor(std::log10(y0)));
        ay.hi = std::pow(10.0, std::ceil(std::log10(y1)));
        if (ay.hi <= ay.lo)
            ay.hi = ay.lo * 10.0;
    } else {
        pad_range(ay.lo, ay.hi, 0.06);
    }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    if (!f.title.empty())
        os << "<text x=\"" << num(kWidth / 2.0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
           << escape(f.title) << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kWidth - kLeft - kRight)
       << "\" height=\"" << num(kHeight - kTop - kBottom) << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Ticks
    os << "<g class=\"x-ticks\" text-anchor=\"middle\">\n";
    for (double t : linear_ticks(ax.lo, ax.hi)) {
        const double px = ax.map(t);
        os << "<line x1=\"" << num(px) << "\" y1=\"" << num(kHeight - kBottom) << "\" x2=\"" << num(px) << "\" y2=\""
           << num(kHeight - kBottom + 5) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << num(px) << "\" y=\"" << num(kHeight - kBottom + 18) << "\">" << tick_label(t)
           << "</text>\n";
    }
    os << "</g>\n<g class=\"y-ticks\" text-anchor=\"end\">\n";
    std::vector<double> yt;
    if (f.log_y) {
        for (double e = std::log10(ay.lo); e <= std::log10(ay.hi) + 1e-9; e += 1.0)
            yt.push_back(std::pow(10.0, std::round(e)));
    } else {
        yt = linear_ticks(ay.lo, ay.hi);
    }
    for (double t : yt) {
        const double py = ay.map(t);
        os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(kLeft) << "\" y2=\""
           << num(py) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py + 4) << "\">" << tick_label(t) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << num((kLeft + kWidth - kRight) / 2.0) << "\" y=\"" << num(kHeight - 12)
       << "\" text-anchor=\"middle\">" << escape(f.x_label) << "</text>\n";
    const double yc = (kTop + kHeight - kBottom) / 2.0;
    os << "<text x=\"16\" y=\"" << num(yc) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << num(yc)
       << ")\">" << escape(f.y_label) << "</text>\n";

    // Data, clipped to the frame.
    os << "<defs><clipPath id=\"frame\"><rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
       << num(kWidth - kLeft - kRight) << "\" height=\"" << num(kHeight - kTop - kBottom)
       << "\"/></clipPath></defs>\n<g clip-path=\"url(#frame)\">\n";
    for (const auto& g : f.guides) {
        if (!std::isfinite(g.value) || (g.horizontal && f.log_y && g.value <= 0.0))
            continue;
        if (g.horizontal) {
            const double py = ay.map(g.value);
            os << "<line class=\"guide\" x1=\"" << num(kLeft) << "\" y1=\"" << num(py) << "\" x2=\""
               << num(kWidth - kRight) << "\" y2=\"" << num(py)
               << "\" stroke=\"#777777\" stroke-dasharray=\"6 4\"/>";
            os << "<text x=\"" << num(kWidth - kRight - 4) << "\" y=\"" << num(py - 4)
               << "\" text-anchor=\"end\" fill=\"#555555\">" << escape(g.label) << "</text>\n";
        } else {
            const double px = ax.map(g.value);
            os << "<line class=\"guide\" x1=\"" << num(px) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(px)
               << "\" y2=\"" << num(kHeight - kBottom) << "\" stroke=\"#777777\" stroke-dasharray=\"6 4\"/>";
            os << "<text x=\"" << num(px + 4) << "\" y=\"" << num(kTop + 14) << "\" fill=\"#555555\">"
               << escape(g.label) << "</text>\n";
        }
    }
    for (std::size_t si = 0; si < f.series.size(); ++si) {
        const auto& s = f.series[si];
        const char* color = kColors[si % std::size(kColors)];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.markers) {
            const char* radius = n > 150 ? "2" : "3";
            os << "<g class=\"series\" fill=\"" << color << "\" stroke=\"" << color << "\">\n";
            for (std::size_t i = 0; i < n; ++i) {
                if (!drawable(f, s.x[i], s.y[i]))
                    continue;
                const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
                if (i < s.y_error.size() && std::isfinite(s.y_error[i]) && s.y_error[i] > 0.0) {
                    const double lo = f.log_y ? std::max(s.y[i] - s.y_error[i], ay.lo) : s.y[i] - s.y_error[i];
                    os << "<line x1=\"" << num(px) << "\" y1=\"" << num(ay.map(lo)) << "\" x2=\"" << num(px)
                       << "\" y2=\"" << num(ay.map(s.y[i] + s.y_error[i])) << "\"/>";
                }
                os << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"" << radius << "\"/>\n";
            }
            os << "</g>\n";
        } else {
            os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
            if (s.dashed)
                os << " stroke-dasharray=\"5 3\"";
            os << " points=\"";
            bool first = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (!drawable(f, s.x[i], s.y[i]))
                    continue;
                os << (first ? "" : " ") << num(ax.map(s.x[i])) << ',' << num(ay.map(s.y[i]));
                first = false;
            }
            os << "\"/>\n";
        }
    }
    os << "</g>\n";

    // Legend
    double ly = kTop + 16;
    for (std::size_t si = 0; si < f.series.size(); ++si) {
        const auto& s = f.series[si];
        if (s.label.empty())
            continue;
        const char* color = kColors[si % std::size(kColors)];
        const double lx = kLeft + 12;
        if (s.markers)
            os << "<circle cx=\"" << num(lx + 9) << "\" cy=\"" << num(ly - 4) << "\" r=\"3\" fill=\"" << color
               << "\"/>";
        else
            os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 18) << "\" y2=\""
               << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>";
        os << "<text x=\"" << num(lx + 24) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
        ly += 16;
    }
    os << "</svg>\n";
    return os.str();
}

bool emit_plot(const Figure& figure, const std::filesystem::path& path, std::ostream& warn)
{
    auto svg = render(figure);
    if (!svg) {
        warn << "warning: nothing to plot for " << path.filename().string() << ", no file written\n";
        return false;
    }
    io::write_atomic(path, *svg);
    return true;
}

Figure dispersion_figure(const DispersionCurve& curve)
{
    Figure f;
    f.kind = Kind::dispersion;
    f.title = "Guided-mode dispersion";
    f.x_label = "wavevector k (2π/a)";
    f.y_label = "frequency ν (a/λ)";
    Series s;
    s.label = "guided mode";
    for (const auto& p : curve.points()) {
        s.x.push_back(p.k);
        s.y.push_back(p.frequency);
    }
    f.series.push_back(std::move(s));
    std::ostringstream os;
    os << "band edge " << short_label(curve.band_edge_wavelength_nm()) << " nm";
    f.guides.push_back({curve.band_edge_frequency(), os.str(), true});
    return f;
}

Figure decay_figure(const DecayHistogram& hist, std::span<const double> model, std::string title)
{
    Figure f;
    f.kind = Kind::decay;
    f.title = title.empty() ? "Decay histogram" : std::move(title);
    f.x_label = "time (ns)";
    f.y_label = "counts per bin";
    f.log_y = true;
    Series h;
    h.label = "counts";
    h.markers = true;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        h.x.push_back(0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]));
        h.y.push_back(static_cast<double>(hist.counts[i]));
    }
    f.series.push_back(h);
    if (model.size() == hist.counts.size()) {
        Series m;
        m.label = "model";
        m.x = h.x;
        m.y.assign(model.begin(), model.end());
        f.series.push_back(std::move(m));
    }
    return f;
}

Figure spectrum_figure(const Spectrum& spectrum, const SpectralModel* model, std::string title)
{
    Figure f;
    f.kind = Kind::spectrum;
    f.title = title.empty() ? "Photoluminescence spectrum" : std::move(title);
    f.x_label = "wavelength (nm)";
    f.y_label = "intensity (counts)";
    Series s;
    s.label = "data";
    s.x = spectrum.wavelength_nm;
    s.y = spectrum.intensity;
    f.series.push_back(std::move(s));
    if (model) {
        Series m;
        m.label = "fit";
        m.x = spectrum.wavelength_nm;
        m.y = model->evaluate(spectrum.wavelength_nm);
        f.series.push_back(std::move(m));
        if (model->gaussian) {
            std::ostringstream os;
            os << "edge " << short_label(model->gaussian->center_nm) << " nm";
            f.guides.push_back({model->gaussian->center_nm, os.str(), false});
        }
    }
    return f;
}

Figure rates_figure(std::span<const RateVsDetuning> series, const std::optional<BetaResult>& beta,
                    const RateCurve* model, std::string title)
{
    Figure f;
    f.kind = Kind::rates_vs_detuning;
    f.title = title.empty() ? "Decay rate versus detuning" : std::move(title);
    f.x_label = "detuning from band edge (nm)";
    f.y_label = "Γ_tot (1/ns)";
    for (const auto& r : series) {
        Series s;
        s.label = r.label;
        s.markers = true;
        for (const auto& p : r.points) {
            if (!p.converged)
                continue;
            s.x.push_back(p.detuning_nm);
            s.y.push_back(p.gamma_tot);
            s.y_error.push_back(p.sigma);
        }
        f.series.push_back(std::move(s));
    }
    if (model) {
        Series m;
        m.label = "model";
        m.dashed = true;
        for (const auto& p : model->samples) {
            m.x.push_back(p.detuning_nm);
            m.y.push_back(p.gamma_tot);
        }
        f.series.push_back(std::move(m));
    }
    if (beta) {
        f.guides.push_back({beta->gamma_res, "Γ_res " + short_label(beta->gamma_res), true});
        f.guides.push_back({beta->gamma_nonres, "Γ_non-res " + short_label(beta->gamma_nonres), true});
    }
    f.guides.push_back({0.0, "band edge", false});
    return f;
}

} // namespace pcw::plot
