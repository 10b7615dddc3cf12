#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcw/optim.hpp"
#include "pcw/tcspc.hpp"

namespace pcw {

enum class DecayModel { bi, mono };

const char* to_string(DecayModel model);

struct DecayUncertainties {
    double amp_fast = 0.0;
    double gamma_fast = 0.0;
    double amp_slow = 0.0;
    double gamma_slow = 0.0;
    double background = 0.0;
    double t0 = 0.0;
};

struct DecayFitResult {
    // Amplitudes are weights (amp_fast + amp_slow = 1); mono fits report
    // amp_slow = 0 and gamma_slow = gamma_fast.
    DecayParams params;
    double signal_counts = 0.0; // fitted signal in the window
    double background = 0.0;    // counts per bin
    double t0 = 0.0;            // ns
    DecayUncertainties uncertainties;
    double cstat = 0.0;
    double initial_cstat = 0.0;
    double reduced_cstat = 0.0;
    int degrees_of_freedom = 0;
    bool converged = false;
    bool low_statistics = false;
    DecayModel model_selected = DecayModel::bi;
    int evaluations = 0;
    std::string diagnostics;

    double gamma_tot() const { return params.gamma_fast; }
    double gamma_tot_sigma() const { return uncertainties.gamma_fast; }
};

struct DecayFitOptions {
    int restarts = 5;
    std::uint64_t jitter_seed = 20100915;
    double jitter = 0.25; // spread of the restart points in log-parameter space
    double min_rate_ratio = 1.3;
    double min_cash_gain = 9.21; // χ² with 2 dof at the 1% level
    double low_statistics_counts = 1000.0;
    // A mono decay must beat a flat line by this much Cash, otherwise the
    // histogram is treated as background only.
    double min_signal_cash_gain = 25.0;
    optim::NelderMeadOptions simplex{4000, 1e-7, 1e-10, 1e-7, 2};
};

// 2 Σ (m - n + n ln(n/m)); infinite when any m <= 0 meets n > 0.
double cash_statistic(std::span<const std::int64_t> counts, std::span<const double> model);

DecayFitResult fit_bi_exponential(const DecayHistogram& hist, const InstrumentResponse& irf,
                                  const DecayFitOptions& options = {});
DecayFitResult fit_mono_exponential(const DecayHistogram& hist, const InstrumentResponse& irf,
                                    const DecayFitOptions& options = {});

// Mono when Γ_f/Γ_s < min_rate_ratio or the bi fit improves Cash by less than
// min_cash_gain (ties go to mono).
const DecayFitResult& model_select(const DecayFitResult& bi, const DecayFitResult& mono,
                                   const DecayFitOptions& options = {});

// Fits both models and returns the selected one. Throws DegenerateInput for an
// empty or background-only histogram.
DecayFitResult fit_decay(const DecayHistogram& hist, const InstrumentResponse& irf,
                         const DecayFitOptions& options = {});

struct TaggedHistogram {
    std::string tag;
    double wavelength_nm = 0.0;
    double temperature_k = 0.0;
    DecayHistogram histogram;
};

struct RatePoint {
    std::string tag;
    double wavelength_nm = 0.0;
    double temperature_k = 0.0;
    double gamma_tot = 0.0;
    double sigma = 0.0;
    bool converged = false;
    bool low_statistics = false;
    DecayModel model = DecayModel::bi;
    std::string error; // set when the fit threw; gamma_tot is then 0
};

// One fit per histogram, input order and tags preserved. Failed fits are kept
// with converged = false.
std::vector<RatePoint> rate_series(std::span<const TaggedHistogram> histograms, const DecayFitOptions& options = {},
                                   Execution exec = Execution::parallel);

} // namespace pcw
