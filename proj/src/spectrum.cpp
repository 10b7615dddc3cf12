#include "pcw/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

void Spectrum::validate() const
{
    require(!wavelength_nm.empty(), ErrorKind::InvalidArgument, "spectrum: empty");
    require(wavelength_nm.size() == intensity.size(), ErrorKind::InvalidArgument,
            "spectrum: wavelength and intensity lengths differ");
    for (std::size_t i = 1; i < wavelength_nm.size(); ++i)
        require(wavelength_nm[i] > wavelength_nm[i - 1], ErrorKind::InvalidArgument,
                "spectrum: wavelengths must be strictly increasing");
    for (double v : intensity)
        require(v >= 0.0 && std::isfinite(v), ErrorKind::InvalidArgument, "spectrum: intensities must be >= 0");
    require(resolution_nm > 0.0, ErrorKind::InvalidArgument, "spectrum: resolution must be > 0");
}

double SpectralModel::operator()(double x) const
{
    double v = baseline;
    for (const auto& l : lorentzians) {
        double hw = 0.5 * l.fwhm_nm;
        double d = x - l.center_nm;
        v += l.area * hw / (std::numbers::pi * (d * d + hw * hw));
    }
    if (gaussian) {
        double d = (x - gaussian->center_nm) / gaussian->sigma_nm;
        v += gaussian->amplitude * std::exp(-0.5 * d * d);
    }
    return v;
}

std::vector<double> SpectralModel::evaluate(std::span<const double> x) const
{
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [&](double w) { return (*this)(w); });
    return out;
}

void SpectralModel::validate() const
{
    for (const auto& l : lorentzians)
        require(l.fwhm_nm > 0.0 && l.area >= 0.0, ErrorKind::InvalidArgument,
                "spectral model: Lorentzian widths must be > 0 and areas >= 0");
    if (gaussian)
        require(gaussian->sigma_nm > 0.0 && gaussian->amplitude >= 0.0, ErrorKind::InvalidArgument,
                "spectral model: Gaussian sigma must be > 0 and amplitude >= 0");
}

std::vector<double> median_filter(std::span<const double> values, std::size_t window)
{
    require(window % 2 == 1, ErrorKind::InvalidArgument, "median_filter: window must be odd");
    const std::size_t n = values.size();
    const std::size_t half = window / 2;
    std::vector<double> out(n), buf;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(n, i + half + 1);
        // Symmetric truncation near the ends keeps the window centered.
        std::size_t reach = std::min(i - lo, hi - 1 - i);
        lo = i - reach;
        hi = i + reach + 1;
        buf.assign(values.begin() + static_cast<std::ptrdiff_t>(lo), values.begin() + static_cast<std::ptrdiff_t>(hi));
        auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        out[i] = *mid;
    }
    return out;
}

namespace {

// Indices of local maxima (plateaus reported at their middle) with prominence.
std::vector<std::pair<std::size_t, double>> local_maxima(std::span<const double> v)
{
    std::vector<std::pair<std::size_t, double>> out;
    const std::size_t n = v.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(v[i] > v[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i])
            ++j;
        if (j + 1 < n && v[j + 1] < v[i]) {
            const std::size_t peak = (i + j) / 2;
            double left_min = v[i], right_min = v[i];
            for (std::size_t k = i; k-- > 0;) {
                if (v[k] > v[i])
                    break;
                left_min = std::min(left_min, v[k]);
            }
            for (std::size_t k = j + 1; k < n; ++k) {
                if (v[k] > v[i])
                    break;
                right_min = std::min(right_min, v[k]);
            }
            out.emplace_back(peak, v[i] - std::max(left_min, right_min));
        }
        i = j + 1;
    }
    return out;
}

std::size_t nearest_index(std::span<const double> x, double value)
{
    auto it = std::lower_bound(x.begin(), x.end(), value);
    if (it == x.end())
        return x.size() - 1;
    auto i = static_cast<std::size_t>(it - x.begin());
    if (i > 0 && value - x[i - 1] < x[i] - value)
        --i;
    return i;
}

double percentile(std::vector<double> v, double q)
{
    auto k = static_cast<std::ptrdiff_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[static_cast<std::size_t>(k)];
}

struct Layout {
    std::size_t lines = 0;
    bool gaussian = false;
    Eigen::Index size() const { return 1 + 3 * static_cast<Eigen::Index>(lines) + (gaussian ? 3 : 0); }
};

// x = [baseline, (center, fwhm, area) per line, (center, sigma, amplitude)]
SpectralModel to_model(const Eigen::VectorXd& x, const Layout& layout)
{
    SpectralModel m;
    m.baseline = x[0];
    for (std::size_t k = 0; k < layout.lines; ++k) {
        auto o = 1 + 3 * static_cast<Eigen::Index>(k);
        m.lorentzians.push_back({x[o], x[o + 1], x[o + 2]});
    }
    if (layout.gaussian) {
        auto o = x.size() - 3;
        m.gaussian = GaussianPeak{x[o], x[o + 1], x[o + 2]};
    }
    return m;
}

Eigen::MatrixXd model_jacobian(const Eigen::VectorXd& x, const Layout& layout, std::span<const double> w)
{
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd J(n, x.size());
    J.col(0).setOnes();
    for (std::size_t k = 0; k < layout.lines; ++k) {
        auto o = 1 + 3 * static_cast<Eigen::Index>(k);
        const double c = x[o], fw = x[o + 1], a = x[o + 2];
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = w[static_cast<std::size_t>(i)] - c;
            double D = d * d + 0.25 * fw * fw;
            J(i, o) = a * fw / std::numbers::pi * d / (D * D);
            J(i, o + 1) = a / (2.0 * std::numbers::pi) * (D - 0.5 * fw * fw) / (D * D);
            J(i, o + 2) = fw / (2.0 * std::numbers::pi * D);
        }
    }
    if (layout.gaussian) {
        auto o = x.size() - 3;
        const double c = x[o], s = x[o + 1], a = x[o + 2];
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = w[static_cast<std::size_t>(i)] - c;
            double e = std::exp(-0.5 * d * d / (s * s));
            J(i, o) = a * e * d / (s * s);
            J(i, o + 1) = a * e * d * d / (s * s * s);
            J(i, o + 2) = e;
        }
    }
    return J;
}

struct Seed {
    std::vector<LorentzianLine> lines;
    std::optional<GaussianPeak> gaussian;
    double baseline = 0.0;
};

std::string describe(const Seed& seed)
{
    std::ostringstream os;
    os << seed.lines.size() << " Lorentzian seed(s) at [";
    for (std::size_t i = 0; i < seed.lines.size(); ++i)
        os << (i ? ", " : "") << seed.lines[i].center_nm;
    os << "] nm";
    if (seed.gaussian)
        os << ", Gaussian seed at " << seed.gaussian->center_nm << " nm (sigma " << seed.gaussian->sigma_nm << " nm)";
    os << ", baseline " << seed.baseline;
    return os.str();
}

SpectralModel run_fit(const Spectrum& s, const Seed& seed, const SpectrumFitOptions& options)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const Layout layout{seed.lines.size(), seed.gaussian.has_value()};
    const double lo_w = s.wavelength_nm.front(), hi_w = s.wavelength_nm.back();
    Eigen::VectorXd x0(layout.size()), lower(layout.size()), upper(layout.size());
    x0[0] = seed.baseline;
    lower[0] = 0.0;
    upper[0] = inf;
    for (std::size_t k = 0; k < seed.lines.size(); ++k) {
        auto o = 1 + 3 * static_cast<Eigen::Index>(k);
        const auto& l = seed.lines[k];
        x0.segment(o, 3) << l.center_nm, l.fwhm_nm, l.area;
        lower.segment(o, 3) << l.center_nm - options.max_center_shift_nm, options.min_fwhm_nm, 0.0;
        upper.segment(o, 3) << l.center_nm + options.max_center_shift_nm, hi_w - lo_w, inf;
    }
    if (seed.gaussian) {
        auto o = x0.size() - 3;
        x0.segment(o, 3) << seed.gaussian->center_nm, seed.gaussian->sigma_nm, seed.gaussian->amplitude;
        lower.segment(o, 3) << lo_w, options.min_fwhm_nm, 0.0;
        upper.segment(o, 3) << hi_w, hi_w - lo_w, inf;
    }

    const auto n = static_cast<Eigen::Index>(s.size());
    auto residual = [&](const Eigen::VectorXd& x) {
        const SpectralModel m = to_model(x, layout);
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i)
            r[i] = m(s.wavelength_nm[static_cast<std::size_t>(i)]) - s.intensity[static_cast<std::size_t>(i)];
        return r;
    };
    optim::JacobianFn jac = [&](const Eigen::VectorXd& x) { return model_jacobian(x, layout, s.wavelength_nm); };
    auto r = optim::levenberg_marquardt(residual, jac, x0, lower, upper, options.least_squares);
    if (!r.converged) {
        std::ostringstream os;
        os << "fit_spectrum: no convergence after " << r.iterations << " iterations from " << describe(seed);
        throw Error(ErrorKind::NonConvergence, os.str());
    }
    SpectralModel m = to_model(r.x, layout);
    m.residual_rms = std::sqrt(2.0 * r.cost / static_cast<double>(n));
    m.iterations = r.iterations;
    return m;
}

} // namespace

std::vector<double> detect_peaks(const Spectrum& spectrum, double min_prominence)
{
    spectrum.validate();
    const auto smooth = median_filter(spectrum.intensity, 3);
    std::vector<double> out;
    for (auto [i, prominence] : local_maxima(smooth))
        if (prominence >= min_prominence && prominence > 0.0)
            out.push_back(spectrum.wavelength_nm[i]);
    return out;
}

SpectralModel fit_spectrum(const Spectrum& spectrum, std::span<const double> candidates_nm, bool fit_gaussian,
                           const SpectrumFitOptions& options)
{
    spectrum.validate();
    require(options.min_fwhm_nm > 0.0, ErrorKind::InvalidArgument, "fit_spectrum: width floor must be > 0");
    const auto& w = spectrum.wavelength_nm;
    const auto& y = spectrum.intensity;
    require(w.size() >= 4, ErrorKind::InsufficientData, "fit_spectrum: need at least 4 samples");
    const auto smooth = median_filter(y, 3);
    const double spacing = (w.back() - w.front()) / static_cast<double>(w.size() - 1);

    Seed seed;
    seed.baseline = std::max(0.0, percentile(smooth, 0.1));
    std::vector<double> envelope;
    if (fit_gaussian) {
        auto win = static_cast<std::size_t>(std::ceil(options.envelope_window_nm / spacing));
        win = std::min(win | 1u, (w.size() - 1) | 1u);
        envelope = median_filter(y, std::max<std::size_t>(win, 3));
        const auto top = static_cast<std::size_t>(std::max_element(envelope.begin(), envelope.end()) - envelope.begin());
        const double amp = std::max(envelope[top] - seed.baseline, 1e-9);
        const double half = seed.baseline + 0.5 * amp;
        std::size_t l = top, r = top;
        while (l > 0 && envelope[l] > half)
            --l;
        while (r + 1 < w.size() && envelope[r] > half)
            ++r;
        double sigma = (w[r] - w[l]) / 2.3548200450309493;
        if (!(sigma > options.min_fwhm_nm))
            sigma = 0.1 * (w.back() - w.front());
        seed.gaussian = GaussianPeak{w[top], sigma, amp};
    }
    auto background = [&](double x) {
        double b = seed.baseline;
        if (seed.gaussian) {
            double d = (x - seed.gaussian->center_nm) / seed.gaussian->sigma_nm;
            b += seed.gaussian->amplitude * std::exp(-0.5 * d * d);
        }
        return b;
    };

    std::vector<double> cands(candidates_nm.begin(), candidates_nm.end());
    std::sort(cands.begin(), cands.end());
    std::vector<std::size_t> picked;
    for (double c : cands) {
        if (c < w.front() || c > w.back())
            continue;
        const std::size_t i = nearest_index(w, c);
        if (fit_gaussian && smooth[i] - envelope[i] <= 3.0 * std::sqrt(std::max(envelope[i], 1.0)))
            continue;
        if (!picked.empty() && w[i] - w[picked.back()] <= options.min_line_separation_nm) {
            if (smooth[i] > smooth[picked.back()])
                picked.back() = i;
            continue;
        }
        picked.push_back(i);
    }
    for (std::size_t i : picked) {
        const double base = background(w[i]);
        const double h = std::max(smooth[i] - base, 1e-9);
        std::size_t l = i, r = i;
        while (l > 0 && smooth[l] - background(w[l]) > 0.5 * h)
            --l;
        while (r + 1 < w.size() && smooth[r] - background(w[r]) > 0.5 * h)
            ++r;
        double fwhm = std::clamp(w[r] - w[l], 2.0 * options.min_fwhm_nm, 2.0);
        seed.lines.push_back({w[i], fwhm, h * std::numbers::pi * fwhm / 2.0});
    }

    // Lines that end up closer than the separation limit are merged and the fit repeated.
    for (;;) {
        SpectralModel m = run_fit(spectrum, seed, options);
        std::sort(m.lorentzians.begin(), m.lorentzians.end(),
                  [](const auto& a, const auto& b) { return a.center_nm < b.center_nm; });
        std::size_t clash = m.lorentzians.size();
        for (std::size_t k = 1; k < m.lorentzians.size(); ++k)
            if (m.lorentzians[k].center_nm - m.lorentzians[k - 1].center_nm <= options.min_line_separation_nm) {
                clash = k;
                break;
            }
        if (clash == m.lorentzians.size())
            return m;
        const auto& a = m.lorentzians[clash - 1];
        const auto& b = m.lorentzians[clash];
        const double area = a.area + b.area;
        const double center = area > 0.0 ? (a.center_nm * a.area + b.center_nm * b.area) / area
                                         : 0.5 * (a.center_nm + b.center_nm);
        LorentzianLine merged{center, std::max(a.fwhm_nm, b.fwhm_nm), area};
        seed.lines = m.lorentzians;
        seed.lines.erase(seed.lines.begin() + static_cast<std::ptrdiff_t>(clash));
        seed.lines[clash - 1] = merged;
        seed.baseline = m.baseline;
        seed.gaussian = m.gaussian;
    }
}

double band_edge_position(const SpectralModel& model)
{
    require(model.gaussian.has_value(), ErrorKind::Absence, "band_edge_position: model has no Gaussian component");
    return model.gaussian->center_nm;
}

Spectrum sample_spectrum(const SpectralModel& model, std::span<const double> wavelength_nm, std::uint64_t seed,
                         double resolution_nm)
{
    model.validate();
    Spectrum s;
    s.resolution_nm = resolution_nm;
    s.wavelength_nm.assign(wavelength_nm.begin(), wavelength_nm.end());
    std::mt19937_64 rng(seed);
    for (double x : wavelength_nm) {
        double mean = model(x);
        require(mean >= 0.0 && std::isfinite(mean), ErrorKind::InvalidArgument,
                "sample_spectrum: model is negative or not finite");
        if (mean == 0.0) {
            s.intensity.push_back(0.0);
            continue;
        }
        std::poisson_distribution<std::int64_t> draw(mean);
        s.intensity.push_back(static_cast<double>(draw(rng)));
    }
    s.validate();
    return s;
}

} // namespace pcw
