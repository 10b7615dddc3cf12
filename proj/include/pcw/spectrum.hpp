#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcw/optim.hpp"

namespace pcw {

struct Spectrum {
    std::vector<double> wavelength_nm; // strictly increasing
    std::vector<double> intensity;     // counts, >= 0
    double resolution_nm = 0.15;

    std::size_t size() const { return wavelength_nm.size(); }
    void validate() const;
};

// area·(w/2π) / ((λ - c)² + (w/2)²)
struct LorentzianLine {
    double center_nm = 0.0;
    double fwhm_nm = 0.0;
    double area = 0.0; // counts·nm
};

// amplitude·exp(-(λ - c)² / 2σ²)
struct GaussianPeak {
    double center_nm = 0.0;
    double sigma_nm = 0.0;
    double amplitude = 0.0; // counts
};

struct SpectralModel {
    std::vector<LorentzianLine> lorentzians; // ascending center
    std::optional<GaussianPeak> gaussian;
    double baseline = 0.0;
    double residual_rms = 0.0; // counts; set by fit_spectrum
    int iterations = 0;

    double operator()(double wavelength_nm) const;
    std::vector<double> evaluate(std::span<const double> wavelength_nm) const;
    void validate() const;
};

// Running median over `window` samples (odd); the window shrinks at the ends.
std::vector<double> median_filter(std::span<const double> values, std::size_t window);

// Local maxima of the 3-sample median-smoothed intensity whose topographic
// prominence is at least `min_prominence`. Returns wavelengths, ascending.
std::vector<double> detect_peaks(const Spectrum& spectrum, double min_prominence);

struct SpectrumFitOptions {
    double min_fwhm_nm = 0.075;        // half the 0.15 nm resolution
    double min_line_separation_nm = 0.1;
    double envelope_window_nm = 1.2;   // median window that removes the narrow lines
    double max_center_shift_nm = 0.5;
    optim::LeastSquaresOptions least_squares{500, 1e-10, 1e-10, 1e-3};
};

// Least squares on the summed model. With `fit_gaussian`, a broad peak is
// seeded from the median-smoothed envelope and candidates that do not rise
// above that envelope by 3 Poisson standard deviations are absorbed into it.
// Throws NonConvergence with the initialization and iteration count.
SpectralModel fit_spectrum(const Spectrum& spectrum, std::span<const double> candidates_nm, bool fit_gaussian,
                           const SpectrumFitOptions& options = {});

// Center of the broad peak; Absence when the model has none.
double band_edge_position(const SpectralModel& model);

// Model on `wavelength_nm` with an independent Poisson draw per sample.
Spectrum sample_spectrum(const SpectralModel& model, std::span<const double> wavelength_nm, std::uint64_t seed,
                         double resolution_nm = 0.15);

} // namespace pcw
