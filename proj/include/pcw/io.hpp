#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pcw/beta_pipeline.hpp"
#include "pcw/decay_fit.hpp"
#include "pcw/dispersion.hpp"
#include "pcw/emission_model.hpp"
#include "pcw/photonic_bands.hpp"
#include "pcw/spectrum.hpp"
#include "pcw/tcspc.hpp"
#include "pcw/tuning.hpp"

namespace pcw::io {

// Shortest round-trip decimal form; the same double always prints the same way.
std::string format_number(double v);

std::string read_text(const std::filesystem::path& path);
// Writes to a sibling temporary and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

// Comma-separated table with a header row. Blank lines and lines starting with
// '#' are skipped. Numeric cells only; an empty cell reads as NaN.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> lines; // source line of each row

    // Column index by name; Parse error naming the source when missing.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
};

CsvTable parse_csv(std::string_view text, const std::string& source);
CsvTable load_csv(const std::filesystem::path& path);

// k_2pi_over_a,freq_a_over_lambda,wavelength_nm,group_index
std::string dispersion_csv(const DispersionCurve& curve);
// wavelength_nm,detuning_nm,gamma_tot_per_ns
std::string rate_curve_csv(const RateCurve& curve);

// time_ns (bin start),counts plus a JSON sidecar with the IRF, acquisition
// settings and seed.
std::string histogram_csv(const DecayHistogram& hist);
nlohmann::json histogram_sidecar(const DecayHistogram& hist);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);
// Reads the sidecar next to the CSV when present; otherwise the bin width is
// taken from the time column and the IRF/acquisition defaults apply.
DecayHistogram load_histogram(const std::filesystem::path& csv_path);

// wavelength_nm,intensity
std::string spectrum_csv(const Spectrum& spectrum);
Spectrum parse_spectrum(std::string_view text, const std::string& source);
Spectrum load_spectrum(const std::filesystem::path& path);

// temperature_K,wavelength_nm
struct TuningData {
    std::string label;
    std::vector<double> temperatures_k;
    std::vector<double> wavelengths_nm;
};
std::string tuning_csv(const TuningData& data);
TuningData load_tuning_data(const std::filesystem::path& path);

// Rates versus detuning: CSV with detuning_nm,gamma_tot_per_ns and optional
// sigma_per_ns,temperature_K,converged columns (label from the file stem), or
// JSON holding one series object or an array of them.
std::string rates_csv(const RateVsDetuning& series);
std::vector<RateVsDetuning> load_rate_series(const std::filesystem::path& path);

// Batch manifest for decay fitting:
// {"histograms": [{"path": ..., "tag": ..., "wavelength_nm": ..., "temperature_K": ...}]}
// Relative paths resolve against the manifest's directory.
std::vector<TaggedHistogram> load_histogram_manifest(const std::filesystem::path& path);

nlohmann::json to_json(const DecayFitResult& r);
nlohmann::json to_json(const RatePoint& p);
nlohmann::json to_json(const SpectralModel& m);
nlohmann::json to_json(const TuningCurve& c);
nlohmann::json to_json(const Resonance& r);
nlohmann::json to_json(const BetaResult& r);
nlohmann::json to_json(const RateModelFit& f);
nlohmann::json to_json(const RateVsDetuning& s);
nlohmann::json to_json(const DotReport& d);
nlohmann::json to_json(const MultiDotReport& r);
nlohmann::json to_json(const BandEdge& e);
nlohmann::json to_json(const CalibrationResult& c);

RateVsDetuning rate_series_from_json(const nlohmann::json& j, const std::string& source);

// Two-space indented JSON with a trailing newline.
std::string dump(const nlohmann::json& j);

} // namespace pcw::io
