#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcw/dispersion.hpp"

namespace pcw {

struct RateObservation {
    double detuning_nm = 0.0; // emitter - band edge; > 0 lies in the gap
    double gamma_tot = 0.0;   // ns⁻¹
    double sigma = 0.0;       // ns⁻¹
    double temperature_k = 0.0;
    bool converged = true;
};

struct RateVsDetuning {
    std::string label;
    std::string band_edge_source = "spectrum"; // "spectrum" or "bands"
    std::vector<RateObservation> points;
};

struct BetaResult {
    double gamma_res = 0.0;
    double gamma_nonres = 0.0;
    double beta = 0.0;
    double purcell = 0.0;
    // β from the slowest in-gap rate can only underestimate the coupling.
    bool lower_bound = true;
    int n_points_in_gap = 0;
};

// Γ_res is the fastest converged rate, Γ_non-res the slowest converged in-gap
// rate. Needs >= 3 converged points, at least one in the gap.
BetaResult extract_beta(const RateVsDetuning& series, double gamma_0);

struct RateModelFitOptions {
    // Broadening grid (FWHM in ν = a/λ units), log-spaced, then a simplex on ln γ.
    double min_broadening = 1e-6;
    double max_broadening = 1e-2;
    int grid_points = 49;
    // Set to hold the broadening fixed and fit only C and Γ_bg.
    std::optional<double> fixed_broadening;
    std::size_t density_cells = 2048;
};

struct RateModelFit {
    double coupling_scale = 0.0;   // C
    double gamma_bg = 0.0;         // ns⁻¹
    double broadening_fwhm = 0.0;  // ν units
    double chi_square = 0.0;
    double reduced_residual = 0.0; // χ² / (n - free parameters)
    int points_used = 0;
    bool converged = false;
    std::string diagnostics;
};

// Weighted (1/σ²) least squares of the broadened rate curve against the
// converged points. Detunings are placed relative to the curve's own edge.
// Γ_tot is linear in C and Γ_bg, which are solved exactly (non-negative) for
// every broadening value.
RateModelFit fit_rate_model(const RateVsDetuning& series, const DispersionCurve& curve, double gamma_0,
                            const RateModelFitOptions& options = {});

struct DotReport {
    std::string label;
    std::optional<BetaResult> result;
    std::string note;  // broadband coupling remark when no β is defined
    std::string error; // set when extraction failed for another reason
    int points = 0;
    int converged_points = 0;
};

struct MultiDotReport {
    std::vector<DotReport> dots;
    std::optional<double> beta_min;
    std::optional<double> beta_max;
};

MultiDotReport multi_dot_report(std::span<const RateVsDetuning> series, double gamma_0);

} // namespace pcw
