#include "pcw/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pcw/emission_model.hpp"
#include "pcw/error.hpp"
#include "pcw/photonic_bands.hpp"

namespace pcw {

double TuningLaw::operator()(double t) const
{
    double u = t - 10.0;
    return at_10k + u * (slope + u * curvature);
}

std::array<double, 3> TuningLaw::coefficients() const
{
    return {at_10k - 10.0 * slope + 100.0 * curvature, slope - 20.0 * curvature, curvature};
}

void ScenarioConfig::validate() const
{
    geometry.validate();
    require(!dots.empty(), ErrorKind::InvalidArgument, "scenario: no dots");
    require(temperatures_k.size() >= 3, ErrorKind::InvalidArgument, "scenario: need at least 3 temperatures");
    require(broadening_fwhm > 0.0, ErrorKind::InvalidArgument, "scenario: broadening_fwhm must be > 0");
    require(gamma_0 > 0.0, ErrorKind::InvalidArgument, "scenario: gamma_0 must be > 0");
    require(amp_fast > 0.0 && amp_fast <= 1.0 && slow_ratio > 1.0, ErrorKind::InvalidArgument,
            "scenario: need 0 < amp_fast <= 1 and slow_ratio > 1");
    require(spectrum_step_nm > 0.0 && spectrum_hi_nm > spectrum_lo_nm, ErrorKind::InvalidArgument,
            "scenario: bad spectrum grid");
    require(std::any_of(dots.begin(), dots.end(), [&](const DotSpec& d) { return d.label == primary_dot; }),
            ErrorKind::InvalidArgument, "scenario: primary dot '" + primary_dot + "' is not among the dots");
}

ScenarioConfig qd3_scenario()
{
    ScenarioConfig c;
    c.geometry = WaveguideGeometry{}.with_index(2.764891);
    c.broadening_fwhm = 2e-4;
    c.dots = {
        {"QD1", 0.25, 0.9, -0.85, 700.0, 0.12},
        {"QD2", 0.15, 0.7, -0.6, 600.0, 0.10},
        {"QD3", 0.40, 0.8, -0.35, 900.0, 0.12},
        {"QD4", 0.30, 1.0, -1.1, 650.0, 0.11},
        {"QD5", 0.30, 1.55, -38.0, 800.0, 0.12},
    };
    for (double t = 10.0; t <= 60.0 + 1e-9; t += 5.0)
        c.temperatures_k.push_back(t);
    return c;
}

DispersionCurve guided_dispersion(const WaveguideGeometry& geometry, int reciprocal_cutoff, std::size_t k_samples,
                                  Execution exec)
{
    BandSolver solver(geometry, PlaneWaveBasis::build(geometry, reciprocal_cutoff), exec);
    auto bands = compute_band_structure(solver, uniform_k_samples(0.0, 0.5, k_samples), 0, true, exec);
    return extract_guided_band(bands);
}

ScenarioResult run_scenario(const ScenarioConfig& config, Execution exec)
{
    config.validate();
    return run_scenario(config, guided_dispersion(config.geometry, config.reciprocal_cutoff, config.k_samples, exec),
                        exec);
}

namespace {

TuningLaw dot_law(const ScenarioConfig& c, const DotSpec& d)
{
    return {c.edge.at_10k + d.detuning_at_10k, c.qd_slope, c.qd_curvature};
}

std::string tag(const std::string& label, double t)
{
    std::ostringstream os;
    os << label << "@" << t << "K";
    return os.str();
}

} // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const DispersionCurve& curve, Execution exec)
{
    config.validate();
    ScenarioResult out;
    out.curve = curve;
    const auto& temps = config.temperatures_k;
    const std::size_t nt = temps.size(), nd = config.dots.size();
    out.dots.resize(nd);
    for (std::size_t d = 0; d < nd; ++d) {
        out.dots[d].spec = config.dots[d];
        out.dots[d].truth = dot_law(config, config.dots[d]);
        if (config.dots[d].label == config.primary_dot)
            out.primary = d;
    }

    // PL spectra: measured edge and line positions per temperature.
    std::vector<double> grid;
    for (double w = config.spectrum_lo_nm; w <= config.spectrum_hi_nm + 1e-9; w += config.spectrum_step_nm)
        grid.push_back(w);
    std::vector<double> edge_t, edge_w;
    std::vector<std::vector<double>> line_t(nd), line_w(nd);
    for (std::size_t i = 0; i < nt; ++i) {
        const double t = temps[i];
        SpectralModel truth;
        truth.baseline = config.spectrum_baseline;
        truth.gaussian = GaussianPeak{config.edge(t), config.edge_peak_sigma_nm, config.edge_peak_amplitude};
        for (std::size_t d = 0; d < nd; ++d)
            truth.lorentzians.push_back({out.dots[d].truth(t), config.dots[d].line_fwhm_nm, config.dots[d].line_area});
        Spectrum s = sample_spectrum(truth, grid, config.seed + 1000 + i);
        const double peak = *std::max_element(s.intensity.begin(), s.intensity.end());
        SpectralModel m = fit_spectrum(s, detect_peaks(s, 10.0 * std::sqrt(peak)), true);
        edge_t.push_back(t);
        edge_w.push_back(band_edge_position(m));
        // Each dot is identified as the fitted line nearest its nominal position.
        for (std::size_t d = 0; d < nd; ++d) {
            const double nominal = out.dots[d].truth(t);
            const LorentzianLine* best = nullptr;
            for (const auto& l : m.lorentzians)
                if (!best || std::abs(l.center_nm - nominal) < std::abs(best->center_nm - nominal))
                    best = &l;
            if (best && std::abs(best->center_nm - nominal) < 0.2) {
                line_t[d].push_back(t);
                line_w[d].push_back(best->center_nm);
            }
        }
        out.spectra.push_back(std::move(s));
        out.spectral_models.push_back(std::move(m));
    }
    out.edge_tuning = fit_tuning(edge_t, edge_w, "band edge");

    // Decay histograms at the true rates.
    const BroadenedDensity density(curve);
    std::vector<TaggedHistogram> all;
    for (std::size_t d = 0; d < nd; ++d) {
        auto& dot = out.dots[d];
        std::vector<double> nu;
        for (double t : temps)
            nu.push_back(curve.frequency_at_wavelength(curve.band_edge_wavelength_nm() + dot.truth(t) - config.edge(t)));
        std::vector<double> b(nt);
        density.evaluate(nu, config.broadening_fwhm, b, exec);
        const double scale = dot.spec.coupling_scale * config.gamma_0 / curve.effective_index();
        dot.injected.label = dot.spec.label;
        dot.injected.band_edge_source = "truth";
        for (std::size_t i = 0; i < nt; ++i) {
            const double t = temps[i];
            const double g = scale * b[i] + dot.spec.gamma_bg;
            dot.injected.points.push_back({dot.truth(t) - config.edge(t), g, 0.0, t, true});
            DecayParams p{config.amp_fast, g, 1.0 - config.amp_fast, g / config.slow_ratio};
            AcquisitionConfig acq = config.acquisition;
            acq.background_rate = 0.0;
            auto clean = expected_curve(p, config.irf, acq, exec);
            acq.background_rate = config.background_fraction * *std::max_element(clean.begin(), clean.end());
            auto expected = expected_curve(p, config.irf, acq, exec);
            const std::uint64_t seed = config.seed + 100 * (d + 1) + i;
            dot.histograms.push_back({tag(dot.spec.label, t), dot.truth(t), t,
                                      sample_histogram(expected, seed, config.irf, acq)});
        }
        all.insert(all.end(), dot.histograms.begin(), dot.histograms.end());
    }
    const auto fits = rate_series(all, {}, exec);

    for (std::size_t d = 0; d < nd; ++d) {
        auto& dot = out.dots[d];
        dot.fits.assign(fits.begin() + static_cast<std::ptrdiff_t>(d * nt),
                        fits.begin() + static_cast<std::ptrdiff_t>((d + 1) * nt));
        dot.measured.label = dot.spec.label;
        dot.measured.band_edge_source = "spectrum";
        try {
            dot.tuning = fit_tuning(line_t[d], line_w[d], dot.spec.label);
        } catch (const Error& e) {
            dot.error = e.what();
            continue;
        }
        auto detuning = detuning_series(*dot.tuning, out.edge_tuning, temps);
        for (std::size_t i = 0; i < nt; ++i) {
            const auto& f = dot.fits[i];
            dot.measured.points.push_back(
                {detuning.entries[i].detuning_nm, f.gamma_tot, f.sigma, temps[i], f.converged && f.error.empty()});
        }
    }

    const auto& primary = out.dots[out.primary];
    require(primary.error.empty(), ErrorKind::InsufficientData, "scenario: primary dot: " + primary.error);
    out.primary_beta = extract_beta(primary.measured, config.gamma_0);
    out.injected_beta = extract_beta(primary.injected, config.gamma_0).beta;
    out.primary_fit = fit_rate_model(primary.measured, curve, config.gamma_0);
    std::vector<RateVsDetuning> measured;
    for (const auto& d : out.dots)
        measured.push_back(d.measured);
    out.report = multi_dot_report(measured, config.gamma_0);
    return out;
}

} // namespace pcw
