#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcw/beta_pipeline.hpp"
#include "pcw/decay_fit.hpp"
#include "pcw/dispersion.hpp"
#include "pcw/geometry.hpp"
#include "pcw/spectrum.hpp"
#include "pcw/tuning.hpp"

namespace pcw {

// λ(T) = at_10k + slope·(T - 10) + curvature·(T - 10)², nm.
struct TuningLaw {
    double at_10k = 0.0;
    double slope = 0.0;
    double curvature = 0.0;

    double operator()(double temperature_k) const;
    std::array<double, 3> coefficients() const; // in powers of T
};

struct DotSpec {
    std::string label;
    double coupling_scale = 0.4; // C
    double gamma_bg = 0.8;       // ns⁻¹
    double detuning_at_10k = 0.0; // nm from the measured edge
    double line_area = 800.0;     // counts·nm in the PL spectrum
    double line_fwhm_nm = 0.12;
};

struct ScenarioConfig {
    WaveguideGeometry geometry;   // effective index calibrated to a 968.4 nm edge
    int reciprocal_cutoff = 5;
    std::size_t k_samples = 41;
    double gamma_0 = 1.1;
    double broadening_fwhm = 0.0; // ν units
    TuningLaw edge{968.7, 0.02, 5e-5};
    double qd_slope = 0.05;       // nm/K
    double qd_curvature = 1e-4;   // nm/K²
    std::vector<DotSpec> dots;
    std::string primary_dot = "QD3";
    std::vector<double> temperatures_k;

    // PL spectra
    double spectrum_lo_nm = 925.0;
    double spectrum_hi_nm = 985.0;
    double spectrum_step_nm = 0.025;
    double edge_peak_sigma_nm = 1.2;
    double edge_peak_amplitude = 1500.0;
    double spectrum_baseline = 50.0;

    // Decay histograms
    double amp_fast = 0.8;
    double slow_ratio = 4.0;          // Γ_fast / Γ_slow
    double background_fraction = 0.01; // of the peak expected bin
    AcquisitionConfig acquisition;
    InstrumentResponse irf;

    std::uint64_t seed = 20100915;

    void validate() const;
};

// Five dots (QD1..QD5) around a 968.7 nm measured edge; QD5 sits far on the
// propagating side with a nearly flat rate.
ScenarioConfig qd3_scenario();

struct DotOutcome {
    DotSpec spec;
    TuningLaw truth;
    std::optional<TuningCurve> tuning; // fitted from the spectra
    std::vector<TaggedHistogram> histograms;
    std::vector<RatePoint> fits;
    RateVsDetuning measured;
    RateVsDetuning injected; // true rates at true detunings
    std::string error;
};

struct ScenarioResult {
    std::optional<DispersionCurve> curve;
    TuningCurve edge_tuning;
    std::vector<Spectrum> spectra; // one per temperature
    std::vector<SpectralModel> spectral_models;
    std::vector<DotOutcome> dots;
    std::size_t primary = 0;
    BetaResult primary_beta;
    double injected_beta = 0.0;
    RateModelFit primary_fit;
    MultiDotReport report;
};

// Builds the dispersion curve from the geometry and runs the whole chain.
ScenarioResult run_scenario(const ScenarioConfig& config, Execution exec = Execution::parallel);
// Same with a precomputed curve.
ScenarioResult run_scenario(const ScenarioConfig& config, const DispersionCurve& curve,
                            Execution exec = Execution::parallel);

DispersionCurve guided_dispersion(const WaveguideGeometry& geometry, int reciprocal_cutoff, std::size_t k_samples,
                                  Execution exec = Execution::parallel);

} // namespace pcw
