#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// pcw::kernels::serial and an OpenMP version in pcw::kernels::omp that must
// produce bit-identical output; tests/test_kernels.cpp holds them to that and
// bench/pcw_bench.cpp times the pair.

#include <complex>
#include <span>

#include <Eigen/Core>

namespace pcw {

enum class Execution { serial, parallel };

namespace kernels {

struct HoleLattice {
    std::span<const Eigen::Vector2d> centers; // units of a
    double radius = 0.0;                      // units of a
    double cell_area = 1.0;                   // units of a^2
    double eps_background = 1.0;
    double eps_hole = 1.0;
};

// Uniform ν-cell of the lossless density: mass = ∫ n_g dν over [lo, hi].
struct DensityCell {
    double lo = 0.0;
    double hi = 0.0;
    double mass = 0.0;
};

// Exponential decay (rate gamma, unit amplitude) convolved with a unit-area
// Gaussian of width sigma, onset t0, repeated every `period`.
struct EmgComponent {
    double gamma = 1.0;
    double amplitude = 1.0;
};

struct EmgSetup {
    double sigma = 0.1;
    double t0 = 0.0;
    double period = 13.158;
    // Earlier pulses summed explicitly when the closed-form geometric tail does
    // not apply (onset within ~9 sigma of the window start).
    int prior_pulses = 0;
};

namespace serial {

// eps(G) for each reciprocal vector G (units 2π/a).
void dielectric_coefficients(std::span<const Eigen::Vector2d> g, const HoleLattice& lattice,
                             std::span<std::complex<double>> out);

// out[i] = Σ_c mass_c / (hi_c - lo_c) · ∫_{lo_c}^{hi_c} L(nu_i - x) dx, L a unit-area
// Lorentzian of full width `fwhm`.
void lorentzian_box_sum(std::span<const DensityCell> cells, double fwhm, std::span<const double> nu,
                        std::span<double> out);

// Per-bin integral of Σ_components amplitude · (exp ⊛ gauss)(t) summed over
// the pulse train (the next pulse, the current one and all earlier ones), for
// bins delimited by `edges` (size = bins + 1).
void emg_bin_integrals(std::span<const double> edges, std::span<const EmgComponent> components,
                       const EmgSetup& setup, std::span<double> out);

} // namespace serial

namespace omp {

void dielectric_coefficients(std::span<const Eigen::Vector2d> g, const HoleLattice& lattice,
                             std::span<std::complex<double>> out);
void lorentzian_box_sum(std::span<const DensityCell> cells, double fwhm, std::span<const double> nu,
                        std::span<double> out);
void emg_bin_integrals(std::span<const double> edges, std::span<const EmgComponent> components,
                       const EmgSetup& setup, std::span<double> out);

} // namespace omp

// Scalar building blocks shared by both variants (exposed for tests).
double hole_form_factor(double g_norm, double radius);
double lorentzian_cdf(double x, double fwhm);
double normal_cdf(double x);
// Antiderivative of the EMG density, up to a constant: returns
// Φ(u/σ) - exp(-γu + γ²σ²/2) Φ(u/σ - γσ), i.e. γ times the EMG CDF.
double emg_cdf(double u, double gamma, double sigma);

} // namespace kernels
} // namespace pcw
