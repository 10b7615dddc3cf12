#pragma once

#include <span>
#include <vector>

#include "pcw/dispersion.hpp"
#include "pcw/kernels.hpp"

namespace pcw {

// Rates are in ns⁻¹ throughout.
struct RateDecomposition {
    double gamma_wg = 0.0;
    double gamma_bg = 0.0;
    double gamma_tot = 0.0;

    static RateDecomposition from_parts(double gamma_wg, double gamma_bg);
};

struct RateModelConfig {
    double coupling_scale = 0.4; // C
    double gamma_bg = 0.8;       // Γ_rad + Γ_non-rad, set to the in-gap rate
    double gamma_0 = 1.1;        // homogeneous-medium rate
    double broadening_fwhm = 0.0; // Lorentzian FWHM in ν = a/λ units; 0 is lossless

    void validate() const;
};

struct RateSample {
    double wavelength_nm = 0.0;
    double detuning_nm = 0.0; // wavelength - band-edge wavelength
    double gamma_tot = 0.0;
};

struct RateCurve {
    double band_edge_wavelength_nm = 0.0;
    std::vector<RateSample> samples; // ascending wavelength
};

// Γ_wg = C·Γ_0·n_g/n_eff on the propagating side, 0 in the gap. Wavelengths
// beyond the far end of the guided segment throw OutOfDomain.
RateDecomposition lossless_rate(const DispersionCurve& curve, const RateModelConfig& config, double wavelength_nm);
RateCurve lossless_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                              std::span<const double> wavelengths_nm);

// The lossless density n_g(ν) (zero in the gap and past the far end of the
// segment) as cells of exact mass ∫n_g dν. Cells are uniform in sqrt|ν - ν_edge|
// so they shrink towards the inverse-sqrt singularity.
class BroadenedDensity {
public:
    explicit BroadenedDensity(const DispersionCurve& curve, std::size_t cell_count = 2048);

    // Density convolved with a unit-area Lorentzian of full width `fwhm`.
    double operator()(double nu, double fwhm) const;
    void evaluate(std::span<const double> nu, double fwhm, std::span<double> out,
                  Execution exec = Execution::parallel) const;

    const std::vector<kernels::DensityCell>& cells() const { return cells_; }
    double total_mass() const;

private:
    std::vector<kernels::DensityCell> cells_;
};

struct BroadeningGrid {
    std::size_t points = 4096;
    double half_width_in_fwhm = 20.0; // grid spans ν_edge ± this many widths
};

// Broadened curve on a uniform ν grid around the edge.
RateCurve broadened_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                               const BroadeningGrid& grid = {}, Execution exec = Execution::parallel);
// Broadened curve at caller-chosen wavelengths (any order; output ascending).
RateCurve broadened_rate_curve(const DispersionCurve& curve, const RateModelConfig& config,
                               std::span<const double> wavelengths_nm, Execution exec = Execution::parallel);
// Same, reusing a precomputed density (fitting loops).
RateCurve broadened_rate_curve(const DispersionCurve& curve, const BroadenedDensity& density,
                               const RateModelConfig& config, std::span<const double> wavelengths_nm,
                               Execution exec = Execution::parallel);

// β = (Γ_res - Γ_non-res) / Γ_res
double beta_factor(double gamma_res, double gamma_nonres);
// F_p = Γ_res / Γ_0
double purcell_factor(double gamma_res, double gamma_0);

} // namespace pcw
