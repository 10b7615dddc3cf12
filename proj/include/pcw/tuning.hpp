#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pcw {

// λ(T) = c0 + c1·T + c2·T², valid on [t_min, t_max].
struct TuningCurve {
    std::string label;
    std::array<double, 3> coefficients{}; // nm, nm/K, nm/K²
    double t_min = 0.0;
    double t_max = 0.0;
    double fit_rms = 0.0; // nm

    double operator()(double temperature_k) const;
    bool in_domain(double temperature_k) const;
    void validate() const;
};

TuningCurve fit_tuning(std::span<const double> temperatures_k, std::span<const double> wavelengths_nm,
                       std::string label = {});

struct ShiftRate {
    double nm_per_k = 0.0;
    bool extrapolated = false;
};

ShiftRate shift_rate(const TuningCurve& curve, double temperature_k);

struct DetuningEntry {
    double temperature_k = 0.0;
    double qd_wavelength_nm = 0.0;
    double band_edge_wavelength_nm = 0.0;
    double detuning_nm = 0.0; // qd - band edge
    bool extrapolated = false;
};

struct DetuningSeries {
    std::vector<DetuningEntry> entries;
};

DetuningSeries detuning_series(const TuningCurve& qd, const TuningCurve& edge, std::span<const double> temperatures_k);

struct Resonance {
    double temperature_k = 0.0;             // smallest in-domain root
    std::optional<double> second_root_k;    // the other root when it also lies in the domain
    bool degenerate = false;                // identical curves; temperature_k is the domain start
};

// Roots of qd(T) - edge(T) inside the intersection of both domains. Throws
// NoCrossing when there is none.
Resonance resonance_temperature(const TuningCurve& qd, const TuningCurve& edge);

} // namespace pcw
