#include "pcw/kernels.hpp"

#include <cmath>
#include <numbers>

namespace pcw::kernels {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::complex<double> dielectric_at(const Eigen::Vector2d& g, const HoleLattice& lattice)
{
    const double norm = g.norm();
    const bool zero = norm < 1e-14;
    double fill = std::numbers::pi * lattice.radius * lattice.radius / lattice.cell_area;
    std::complex<double> structure{0.0, 0.0};
    for (const auto& c : lattice.centers) {
        double phase = -kTwoPi * g.dot(c);
        structure += std::complex<double>(std::cos(phase), std::sin(phase));
    }
    std::complex<double> eps = (lattice.eps_hole - lattice.eps_background) * fill
                               * hole_form_factor(kTwoPi * norm, lattice.radius) * structure;
    if (zero)
        eps += lattice.eps_background;
    return eps;
}

// Φ(x2) - Φ(x1) without cancellation in either tail.
double normal_cdf_difference(double x1, double x2)
{
    constexpr double r2 = std::numbers::sqrt2;
    if (x1 > 0.0)
        return 0.5 * (std::erfc(x1 / r2) - std::erfc(x2 / r2));
    return 0.5 * (std::erfc(-x2 / r2) - std::erfc(-x1 / r2));
}

double log_normal_cdf(double y)
{
    if (y > -30.0)
        return std::log(0.5 * std::erfc(-y / std::numbers::sqrt2));
    // Asymptotic tail; erfc underflows past |y| ~ 37.
    double y2 = y * y;
    return -0.5 * y2 - std::log(-y * std::sqrt(kTwoPi)) + std::log1p(-1.0 / y2 + 3.0 / (y2 * y2));
}

// exp(-γu + γ²σ²/2) Φ(u/σ - γσ)
double emg_tail(double u, double gamma, double sigma)
{
    double a = -gamma * u + 0.5 * gamma * gamma * sigma * sigma;
    double y = u / sigma - gamma * sigma;
    if (y > 9.0)
        return std::exp(a);
    if (y > -5.0)
        return std::exp(a) * normal_cdf(y);
    return std::exp(a + log_normal_cdf(y));
}

// One pulse at onset t0 - p·T, bin [e1, e2], unit amplitude, times gamma.
double emg_pulse(double e1, double e2, double gamma, const EmgSetup& setup, int p)
{
    double shift = -setup.t0 + p * setup.period;
    double u1 = e1 + shift, u2 = e2 + shift;
    double x1 = u1 / setup.sigma, x2 = u2 / setup.sigma;
    // Entirely before the onset: bounded by Φ(x2) < 2e-33.
    if (x2 < -12.0)
        return 0.0;
    double gauss_part = x1 > 9.0 ? 0.0 : normal_cdf_difference(x1, x2);
    return gauss_part - (emg_tail(u2, gamma, setup.sigma) - emg_tail(u1, gamma, setup.sigma));
}

double emg_bin(double e1, double e2, std::span<const EmgComponent> components, const EmgSetup& setup)
{
    double total = 0.0;
    for (const auto& c : components) {
        if (c.amplitude == 0.0)
            continue;
        // p = -1: the next pulse, whose rising edge can reach the end of the window.
        double sum = emg_pulse(e1, e2, c.gamma, setup, -1) + emg_pulse(e1, e2, c.gamma, setup, 0);
        double u1 = e1 - setup.t0 + setup.period, u2 = e2 - setup.t0 + setup.period;
        if (u1 / setup.sigma - c.gamma * setup.sigma > 9.0) {
            // Earlier pulses are pure exponentials here: sum the geometric series.
            double head = emg_tail(u1, c.gamma, setup.sigma) - emg_tail(u2, c.gamma, setup.sigma);
            sum += head / -std::expm1(-c.gamma * setup.period);
        } else {
            for (int p = 1; p <= setup.prior_pulses; ++p)
                sum += emg_pulse(e1, e2, c.gamma, setup, p);
        }
        total += c.amplitude / c.gamma * sum;
    }
    return total;
}

double box_lorentz(const DensityCell& cell, double fwhm, double nu)
{
    double width = cell.hi - cell.lo;
    if (width <= 0.0) {
        double x = nu - cell.lo;
        double hw = 0.5 * fwhm;
        return cell.mass * hw / (std::numbers::pi * (x * x + hw * hw));
    }
    double a = 2.0 * (nu - cell.lo) / fwhm;
    double b = 2.0 * (nu - cell.hi) / fwhm;
    // atan(a) - atan(b) for a > b, free of cancellation in the tails.
    double dtheta = std::atan2(a - b, 1.0 + a * b);
    return cell.mass / width * dtheta / std::numbers::pi;
}

} // namespace

double hole_form_factor(double g_norm, double radius)
{
    double x = g_norm * radius;
    if (x < 1e-8)
        return 1.0 - x * x / 8.0;
    return 2.0 * std::cyl_bessel_j(1.0, x) / x;
}

double lorentzian_cdf(double x, double fwhm)
{
    return 0.5 + std::atan(2.0 * x / fwhm) / std::numbers::pi;
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double emg_cdf(double u, double gamma, double sigma)
{
    return normal_cdf(u / sigma) - emg_tail(u, gamma, sigma);
}

namespace serial {

void dielectric_coefficients(std::span<const Eigen::Vector2d> g, const HoleLattice& lattice,
                             std::span<std::complex<double>> out)
{
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = dielectric_at(g[i], lattice);
}

void lorentzian_box_sum(std::span<const DensityCell> cells, double fwhm, std::span<const double> nu,
                        std::span<double> out)
{
    for (std::size_t i = 0; i < nu.size(); ++i) {
        double s = 0.0;
        for (const auto& c : cells)
            s += box_lorentz(c, fwhm, nu[i]);
        out[i] = s;
    }
}

void emg_bin_integrals(std::span<const double> edges, std::span<const EmgComponent> components,
                       const EmgSetup& setup, std::span<double> out)
{
    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        out[b] = emg_bin(edges[b], edges[b + 1], components, setup);
}

} // namespace serial

namespace omp {

void dielectric_coefficients(std::span<const Eigen::Vector2d> g, const HoleLattice& lattice,
                             std::span<std::complex<double>> out)
{
    const auto n = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[i] = dielectric_at(g[i], lattice);
}

void lorentzian_box_sum(std::span<const DensityCell> cells, double fwhm, std::span<const double> nu,
                        std::span<double> out)
{
    const auto n = static_cast<std::ptrdiff_t>(nu.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& c : cells)
            s += box_lorentz(c, fwhm, nu[i]);
        out[i] = s;
    }
}

void emg_bin_integrals(std::span<const double> edges, std::span<const EmgComponent> components,
                       const EmgSetup& setup, std::span<double> out)
{
    const auto bins = static_cast<std::ptrdiff_t>(edges.size()) - 1;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < bins; ++b)
        out[b] = emg_bin(edges[b], edges[b + 1], components, setup);
}

} // namespace omp

} // namespace pcw::kernels
