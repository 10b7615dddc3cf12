#include "pcw/tcspc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

int AcquisitionConfig::bins() const
{
    if (n_bins > 0)
        return n_bins;
    // A hair of tolerance so that exact multiples are not lost to rounding.
    return static_cast<int>(std::floor(repetition_period_ns / bin_width_ns() + 1e-9));
}

std::vector<double> AcquisitionConfig::bin_edges() const
{
    const int n = bins();
    std::vector<double> edges(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        edges[static_cast<std::size_t>(i)] = i * bin_width_ns();
    return edges;
}

void AcquisitionConfig::validate() const
{
    require(repetition_period_ns > 0.0 && bin_width_ps > 0.0, ErrorKind::InvalidArgument,
            "acquisition: period and bin width must be > 0");
    require(n_bins >= 0, ErrorKind::InvalidArgument, "acquisition: n_bins must be >= 0");
    require(bins() >= 2, ErrorKind::InvalidArgument, "acquisition: fewer than 2 bins");
    require(window_ns() <= repetition_period_ns * (1.0 + 1e-12), ErrorKind::InvalidArgument,
            "acquisition: n_bins * bin_width exceeds the repetition period");
    require(total_signal_counts >= 0.0 && background_rate >= 0.0, ErrorKind::InvalidArgument,
            "acquisition: counts must be >= 0");
}

void InstrumentResponse::validate(const AcquisitionConfig& config) const
{
    require(fwhm_ps > 0.0, ErrorKind::InvalidArgument, "instrument response: fwhm must be > 0");
    require(t0_ns >= 0.0 && t0_ns < config.window_ns(), ErrorKind::InvalidArgument,
            "instrument response: t0 must lie within the acquisition window");
    if (tabulated()) {
        require(table.size() == static_cast<std::size_t>(config.bins()), ErrorKind::InvalidArgument,
                "instrument response: table must have one entry per bin");
        double sum = 0.0;
        for (double v : table) {
            require(v >= 0.0, ErrorKind::InvalidArgument, "instrument response: table entries must be >= 0");
            sum += v;
        }
        require(sum > 0.0, ErrorKind::InvalidArgument, "instrument response: table is all zero");
    }
}

void DecayParams::validate() const
{
    require(amp_fast >= 0.0 && amp_slow >= 0.0, ErrorKind::InvalidArgument, "decay params: amplitudes must be >= 0");
    require(amp_fast == 0.0 || gamma_fast > 0.0, ErrorKind::InvalidArgument, "decay params: gamma_fast must be > 0");
    require(amp_slow == 0.0 || gamma_slow > 0.0, ErrorKind::InvalidArgument, "decay params: gamma_slow must be > 0");
    if (amp_fast > 0.0 && amp_slow > 0.0)
        require(gamma_fast > gamma_slow, ErrorKind::Ordering, "decay params: gamma_fast must exceed gamma_slow");
}

std::int64_t DecayHistogram::total_counts() const
{
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void DecayHistogram::validate() const
{
    require(!counts.empty() && bin_edges.size() == counts.size() + 1, ErrorKind::InvalidArgument,
            "histogram: need len(counts) = len(bin_edges) - 1 > 0");
    const double width = bin_edges[1] - bin_edges[0];
    require(width > 0.0, ErrorKind::InvalidArgument, "histogram: bin edges must increase");
    for (std::size_t i = 1; i < bin_edges.size(); ++i) {
        double w = bin_edges[i] - bin_edges[i - 1];
        require(w > 0.0 && std::abs(w - width) <= 1e-6 * width, ErrorKind::InvalidArgument,
                "histogram: bin edges must be strictly increasing and uniform");
    }
    for (auto c : counts)
        require(c >= 0, ErrorKind::InvalidArgument, "histogram: counts must be >= 0");
}

int prior_pulse_count(double slowest_gamma, double period_ns)
{
    require(slowest_gamma > 0.0 && period_ns > 0.0, ErrorKind::InvalidArgument,
            "prior_pulse_count: rate and period must be > 0");
    double p = std::ceil(std::log(1e6) / (slowest_gamma * period_ns));
    return static_cast<int>(std::clamp(p, 1.0, 1e6));
}

namespace {

// Bin integrals of the periodic train Σ_p a·exp(-γ(t - t0 + pT)), no IRF.
std::vector<double> periodic_exponential(const kernels::EmgComponent& c, double t0, double period,
                                         std::span<const double> edges)
{
    const double norm = c.amplitude / (c.gamma * -std::expm1(-c.gamma * period));
    auto phase = [&](double t) {
        double tau = std::fmod(t - t0, period);
        return tau < 0.0 ? tau + period : tau;
    };
    std::vector<double> out(edges.size() - 1);
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        double e1 = edges[b], e2 = edges[b + 1];
        auto piece = [&](double lo, double hi) {
            double ta = phase(lo);
            double tb = ta + (hi - lo);
            return norm * (std::exp(-c.gamma * ta) - std::exp(-c.gamma * tb));
        };
        out[b] = (t0 > e1 && t0 < e2) ? piece(e1, t0) + piece(t0, e2) : piece(e1, e2);
    }
    return out;
}

} // namespace

std::vector<double> decay_bin_integrals(std::span<const kernels::EmgComponent> components, double t0_ns,
                                        const InstrumentResponse& irf, const AcquisitionConfig& config,
                                        Execution exec)
{
    const auto edges = config.bin_edges();
    const std::size_t n = edges.size() - 1;
    std::vector<double> out(n, 0.0);
    if (!irf.tabulated()) {
        double slowest = 0.0;
        for (const auto& c : components)
            if (c.amplitude != 0.0)
                slowest = slowest == 0.0 ? c.gamma : std::min(slowest, c.gamma);
        if (slowest == 0.0)
            return out;
        kernels::EmgSetup setup{irf.sigma_ns(), t0_ns, config.repetition_period_ns,
                                prior_pulse_count(slowest, config.repetition_period_ns)};
        if (exec == Execution::parallel)
            kernels::omp::emg_bin_integrals(edges, components, setup, out);
        else
            kernels::serial::emg_bin_integrals(edges, components, setup, out);
        return out;
    }

    // Tabulated response: circular convolution over the window, lag zero at the table peak.
    const double total = std::accumulate(irf.table.begin(), irf.table.end(), 0.0);
    const auto peak = static_cast<std::size_t>(std::max_element(irf.table.begin(), irf.table.end()) - irf.table.begin());
    std::vector<double> decay(n, 0.0);
    for (const auto& c : components) {
        if (c.amplitude == 0.0)
            continue;
        auto part = periodic_exponential(c, t0_ns, config.repetition_period_ns, edges);
        for (std::size_t i = 0; i < n; ++i)
            decay[i] += part[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double w = irf.table[j];
            if (w == 0.0)
                continue;
            std::size_t src = (i + n + peak - j) % n; // lag j - peak
            s += w * decay[src];
        }
        out[i] = s / total;
    }
    return out;
}

std::vector<double> expected_curve(const DecayParams& params, const InstrumentResponse& irf,
                                   const AcquisitionConfig& config, Execution exec)
{
    params.validate();
    config.validate();
    irf.validate(config);
    const kernels::EmgComponent components[] = {{params.gamma_fast, params.amp_fast},
                                                {params.gamma_slow, params.amp_slow}};
    auto signal = decay_bin_integrals(components, irf.t0_ns, irf, config, exec);
    const double sum = std::accumulate(signal.begin(), signal.end(), 0.0);
    const double scale = sum > 0.0 ? config.total_signal_counts / sum : 0.0;
    for (auto& v : signal)
        v = v * scale + config.background_rate;
    return signal;
}

DecayHistogram sample_histogram(std::span<const double> expected, std::uint64_t seed, const InstrumentResponse& irf,
                                const AcquisitionConfig& config)
{
    config.validate();
    require(expected.size() == static_cast<std::size_t>(config.bins()), ErrorKind::InvalidArgument,
            "sample_histogram: expected curve length does not match the acquisition bins");
    for (double v : expected) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "sample_histogram: expected value " << v << " is negative or not finite";
            throw Error(ErrorKind::InvalidArgument, os.str());
        }
    }
    DecayHistogram h;
    h.bin_edges = config.bin_edges();
    h.irf = irf;
    h.config = config;
    h.seed = seed;
    h.counts.resize(expected.size());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i] == 0.0) {
            h.counts[i] = 0;
            continue;
        }
        std::poisson_distribution<std::int64_t> draw(expected[i]);
        h.counts[i] = draw(rng);
    }
    return h;
}

} // namespace pcw
