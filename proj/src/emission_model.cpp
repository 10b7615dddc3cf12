#include "pcw/emission_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

RateDecomposition RateDecomposition::from_parts(double gamma_wg, double gamma_bg)
{
    return {gamma_wg, gamma_bg, gamma_wg + gamma_bg};
}

void RateModelConfig::validate() const
{
    require(coupling_scale > 0.0 && coupling_scale <= 1.0, ErrorKind::InvalidArgument,
            "rate model: coupling_scale must lie in (0, 1]");
    require(gamma_bg >= 0.0 && gamma_0 >= 0.0, ErrorKind::InvalidArgument, "rate model: rates must be >= 0");
    require(broadening_fwhm >= 0.0, ErrorKind::InvalidArgument, "rate model: broadening_fwhm must be >= 0");
}

RateDecomposition lossless_rate(const DispersionCurve& curve, const RateModelConfig& config, double wavelength_nm)
{
    config.validate();
    require(wavelength_nm > 0.0, ErrorKind::InvalidArgument, "lossless rate: wavelength must be > 0");
    const double nu = curve.frequency_at_wavelength(wavelength_nm);
    if (curve.in_gap(nu))
        return RateDecomposition::from_parts(0.0, config.gamma_bg);
    if (!curve.in_propagating_domain(nu)) {
        std::ostringstream os;
        os << "lossless rate: wavelength " << wavelength_nm << " nm lies beyond the guided segment (ends at "
           << curve.wavelength_at_frequency(curve.far_frequency()) << " nm)";
        throw Error(ErrorKind::OutOfDomain, os.str());
    }
    double wg = config.coupling_scale * config.gamma_0 * curve.group_index(nu) / curve.effective_index();
    return RateDecomposition::from_parts(wg, config.gamma_bg);
}

RateCurve lossless_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                              std::span<const double> wavelengths_nm)
{
    RateCurve out;
    out.band_edge_wavelength_nm = curve.band_edge_wavelength_nm();
    for (double w : wavelengths_nm)
        out.samples.push_back({w, w - out.band_edge_wavelength_nm, lossless_rate(curve, config, w).gamma_tot});
    std::stable_sort(out.samples.begin(), out.samples.end(),
                     [](const RateSample& a, const RateSample& b) { return a.wavelength_nm < b.wavelength_nm; });
    return out;
}

BroadenedDensity::BroadenedDensity(const DispersionCurve& curve, std::size_t cell_count)
{
    require(cell_count >= 16, ErrorKind::InvalidArgument, "broadened density: need at least 16 cells");
    const double edge = curve.band_edge_frequency();
    const double span = std::abs(curve.far_frequency() - edge);
    const double sign = curve.propagating_above_edge() ? 1.0 : -1.0;
    cells_.reserve(cell_count);
    for (std::size_t i = 0; i < cell_count; ++i) {
        double s0 = static_cast<double>(i) / static_cast<double>(cell_count);
        double s1 = static_cast<double>(i + 1) / static_cast<double>(cell_count);
        double a = edge + sign * span * s0 * s0;
        double b = edge + sign * span * s1 * s1;
        double mass = std::abs(curve.group_index_integral(a, b));
        cells_.push_back({std::min(a, b), std::max(a, b), mass});
    }
}

double BroadenedDensity::operator()(double nu, double fwhm) const
{
    double out = 0.0;
    evaluate(std::span<const double>(&nu, 1), fwhm, std::span<double>(&out, 1), Execution::serial);
    return out;
}

void BroadenedDensity::evaluate(std::span<const double> nu, double fwhm, std::span<double> out, Execution exec) const
{
    require(fwhm > 0.0, ErrorKind::InvalidArgument, "broadened density: broadening_fwhm must be > 0");
    require(out.size() == nu.size(), ErrorKind::InvalidArgument, "broadened density: output size mismatch");
    if (exec == Execution::parallel)
        kernels::omp::lorentzian_box_sum(cells_, fwhm, nu, out);
    else
        kernels::serial::lorentzian_box_sum(cells_, fwhm, nu, out);
}

double BroadenedDensity::total_mass() const
{
    double m = 0.0;
    for (const auto& c : cells_)
        m += c.mass;
    return m;
}

namespace {

void require_broadening(const RateModelConfig& config)
{
    config.validate();
    require(config.broadening_fwhm > 0.0, ErrorKind::InvalidArgument,
            "broadened rate curve: broadening_fwhm must be > 0");
}

RateCurve assemble(const DispersionCurve& curve, const BroadenedDensity& density, const RateModelConfig& config,
                   std::vector<double> nu, Execution exec)
{
    std::vector<double> b(nu.size());
    density.evaluate(nu, config.broadening_fwhm, b, exec);
    RateCurve out;
    out.band_edge_wavelength_nm = curve.band_edge_wavelength_nm();
    const double scale = config.coupling_scale * config.gamma_0 / curve.effective_index();
    for (std::size_t i = 0; i < nu.size(); ++i) {
        double w = curve.wavelength_at_frequency(nu[i]);
        out.samples.push_back({w, w - out.band_edge_wavelength_nm, scale * b[i] + config.gamma_bg});
    }
    std::stable_sort(out.samples.begin(), out.samples.end(),
                     [](const RateSample& x, const RateSample& y) { return x.wavelength_nm < y.wavelength_nm; });
    return out;
}

} // namespace

RateCurve broadened_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                               const BroadeningGrid& grid, Execution exec)
{
    require_broadening(config);
    require(grid.points >= 2 && grid.half_width_in_fwhm > 0.0, ErrorKind::InvalidArgument,
            "broadened rate curve: bad grid");
    const double edge = curve.band_edge_frequency();
    const double half = grid.half_width_in_fwhm * config.broadening_fwhm;
    require(edge - half > 0.0, ErrorKind::InvalidArgument, "broadened rate curve: broadening too large for the edge");
    std::vector<double> nu(grid.points);
    for (std::size_t i = 0; i < grid.points; ++i)
        nu[i] = edge - half + 2.0 * half * static_cast<double>(i) / static_cast<double>(grid.points - 1);
    return assemble(curve, BroadenedDensity(curve), config, std::move(nu), exec);
}

RateCurve broadened_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                               std::span<const double> wavelengths_nm, Execution exec)
{
    require_broadening(config);
    return broadened_rate_curve(curve, BroadenedDensity(curve), config, wavelengths_nm, exec);
}

RateCurve broadened_rate_curve(const DispersionCurve& curve, const BroadenedDensity& density,
                               const RateModelConfig& config, std::span<const double> wavelengths_nm, Execution exec)
{
    require_broadening(config);
    std::vector<double> nu;
    nu.reserve(wavelengths_nm.size());
    for (double w : wavelengths_nm) {
        require(w > 0.0, ErrorKind::InvalidArgument, "broadened rate curve: wavelength must be > 0");
        nu.push_back(curve.frequency_at_wavelength(w));
    }
    return assemble(curve, density, config, std::move(nu), exec);
}

double beta_factor(double gamma_res, double gamma_nonres)
{
    require(gamma_res != 0.0, ErrorKind::DivisionByZero, "beta_factor: gamma_res is zero");
    require(gamma_nonres >= 0.0 && gamma_res > 0.0, ErrorKind::InvalidArgument, "beta_factor: rates must be >= 0");
    if (gamma_res < gamma_nonres) {
        std::ostringstream os;
        os << "beta_factor: gamma_res (" << gamma_res << ") < gamma_nonres (" << gamma_nonres << ")";
        throw Error(ErrorKind::Ordering, os.str());
    }
    return (gamma_res - gamma_nonres) / gamma_res;
}

double purcell_factor(double gamma_res, double gamma_0)
{
    require(gamma_0 > 0.0, ErrorKind::InvalidArgument, "purcell_factor: gamma_0 must be > 0");
    require(gamma_res >= 0.0, ErrorKind::InvalidArgument, "purcell_factor: gamma_res must be >= 0");
    return gamma_res / gamma_0;
}

} // namespace pcw
