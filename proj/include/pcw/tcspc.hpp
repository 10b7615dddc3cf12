#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcw/kernels.hpp"

namespace pcw {

inline constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493; // 2 sqrt(2 ln 2)

struct AcquisitionConfig {
    double repetition_period_ns = 1000.0 / 76.0;
    double bin_width_ps = 25.0;
    int n_bins = 0; // 0: as many whole bins as fit in one period
    double total_signal_counts = 1e5;
    double background_rate = 0.0; // counts per bin

    int bins() const;
    double bin_width_ns() const { return bin_width_ps * 1e-3; }
    double window_ns() const { return bins() * bin_width_ns(); }
    std::vector<double> bin_edges() const;
    void validate() const;
};

// Gaussian response of width `fwhm_ps`; optionally a tabulated per-bin shape
// (unit sum after normalization, peak position defines time zero) which the
// fitter convolves circularly instead of using the closed form.
struct InstrumentResponse {
    double fwhm_ps = 280.0;
    double t0_ns = 1.0; // excitation time within the window
    std::vector<double> table;

    double sigma_ns() const { return fwhm_ps * 1e-3 * kFwhmToSigma; }
    bool tabulated() const { return !table.empty(); }
    void validate(const AcquisitionConfig& config) const;
};

struct DecayParams {
    double amp_fast = 1.0;
    double gamma_fast = 1.0; // ns⁻¹
    double amp_slow = 0.0;
    double gamma_slow = 0.5; // ns⁻¹

    static DecayParams mono(double gamma) { return {1.0, gamma, 0.0, gamma}; }
    void validate() const;
};

struct DecayHistogram {
    std::vector<double> bin_edges; // ns, uniform
    std::vector<std::int64_t> counts;
    InstrumentResponse irf;
    AcquisitionConfig config;
    std::uint64_t seed = 0; // 0 for measured data

    std::int64_t total_counts() const;
    void validate() const;
};

// Expected counts per bin: pulse-train bi-exponential decay convolved with the
// IRF, scaled so the signal part sums to total_signal_counts, plus background.
std::vector<double> expected_curve(const DecayParams& params, const InstrumentResponse& irf,
                                   const AcquisitionConfig& config, Execution exec = Execution::parallel);

// Unnormalized per-bin integrals of amplitude·exp(-γt) (t from the excitation)
// convolved with the IRF, pulse train included. Used by the fitter.
std::vector<double> decay_bin_integrals(std::span<const kernels::EmgComponent> components, double t0_ns,
                                        const InstrumentResponse& irf, const AcquisitionConfig& config,
                                        Execution exec = Execution::serial);

// Number of earlier pulses whose slowest component still exceeds 1e-6 of its
// amplitude inside the window.
int prior_pulse_count(double slowest_gamma, double period_ns);

// Independent Poisson draw per bin.
DecayHistogram sample_histogram(std::span<const double> expected, std::uint64_t seed,
                                const InstrumentResponse& irf = {}, const AcquisitionConfig& config = {});

} // namespace pcw
