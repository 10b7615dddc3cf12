#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcw/beta_pipeline.hpp"
#include "pcw/dispersion.hpp"
#include "pcw/emission_model.hpp"
#include "pcw/spectrum.hpp"
#include "pcw/tcspc.hpp"

namespace pcw::plot {

enum class Kind { dispersion, decay, spectrum, rates_vs_detuning };

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::vector<double> y_error; // empty or one per point
    bool markers = false;        // otherwise a polyline
    bool dashed = false;
};

// Dashed reference line across the plot at a fixed y (or x) value.
struct Guide {
    double value = 0.0;
    std::string label;
    bool horizontal = true;
};

struct Figure {
    Kind kind = Kind::dispersion;
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::vector<Series> series;
    std::vector<Guide> guides;
};

inline constexpr int kWidth = 640;
inline constexpr int kHeight = 420;

// Fixed-size SVG. Returns nothing when no series has a drawable point (on a log
// axis only positive values are drawable).
std::optional<std::string> render(const Figure& figure);

// Renders and writes atomically. Empty data writes nothing, prints a warning
// to `warn` and returns false.
bool emit_plot(const Figure& figure, const std::filesystem::path& path, std::ostream& warn);

Figure dispersion_figure(const DispersionCurve& curve);
// Histogram counts on a log axis; `model` (expected counts per bin) is drawn as a line.
Figure decay_figure(const DecayHistogram& hist, std::span<const double> model = {}, std::string title = {});
Figure spectrum_figure(const Spectrum& spectrum, const SpectralModel* model = nullptr, std::string title = {});
// Measured rates with error bars, Γ_res / Γ_non-res guides when `beta` is given
// and an optional model curve.
Figure rates_figure(std::span<const RateVsDetuning> series, const std::optional<BetaResult>& beta = std::nullopt,
                    const RateCurve* model = nullptr, std::string title = {});

} // namespace pcw::plot
