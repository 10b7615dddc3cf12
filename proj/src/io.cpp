#include "pcw/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "pcw/error.hpp"

namespace pcw::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, std::string_view content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string());
    }
}

namespace {

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what)
{
    std::ostringstream os;
    os << source << ":" << line << ": " << what;
    throw Error(ErrorKind::Parse, os.str());
}

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r'))
        ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return out;
}

double cell_value(const std::string& cell, const std::string& source, int line)
{
    if (cell.empty())
        return std::numeric_limits<double>::quiet_NaN();
    if (cell == "true")
        return 1.0;
    if (cell == "false")
        return 0.0;
    double v = 0.0;
    const char* b = cell.data();
    if (*b == '+')
        ++b;
    auto [ptr, ec] = std::from_chars(b, cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        parse_fail(source, line, "expected a number, got '" + cell + "'");
    return v;
}

json parse_json(std::string_view text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
        parse_fail(source, line, std::string("invalid JSON: ") + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, const std::string& source, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Parse, source + ": field '" + key + "' has the wrong type");
    }
}

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        parse_fail(source, 1, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> CsvTable::values(const std::string& name) const
{
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back(r[c]);
    return out;
}

CsvTable parse_csv(std::string_view text, const std::string& source)
{
    CsvTable t;
    t.source = source;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string content = trim(raw);
        if (content.empty() || content.front() == '#')
            continue;
        auto cells = split(content);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            std::ostringstream os;
            os << "expected " << t.header.size() << " columns, got " << cells.size();
            parse_fail(source, line, os.str());
        }
        std::vector<double> row;
        for (const auto& c : cells)
            row.push_back(cell_value(c, source, line));
        t.rows.push_back(std::move(row));
        t.lines.push_back(line);
    }
    if (t.header.empty())
        parse_fail(source, line, "no header row");
    return t;
}

CsvTable load_csv(const fs::path& path)
{
    return parse_csv(read_text(path), path.string());
}

std::string dispersion_csv(const DispersionCurve& curve)
{
    std::ostringstream os;
    os << "k_2pi_over_a,freq_a_over_lambda,wavelength_nm,group_index\n";
    const auto& pts = curve.points();
    const auto& ng = curve.point_group_index();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        os << format_number(pts[i].k) << ',' << format_number(pts[i].frequency) << ','
           << format_number(curve.wavelength_at_frequency(pts[i].frequency)) << ',';
        if (i < ng.size() && ng[i])
            os << format_number(*ng[i]);
        os << '\n';
    }
    return os.str();
}

std::string rate_curve_csv(const RateCurve& curve)
{
    std::ostringstream os;
    os << "wavelength_nm,detuning_nm,gamma_tot_per_ns\n";
    for (const auto& s : curve.samples)
        os << format_number(s.wavelength_nm) << ',' << format_number(s.detuning_nm) << ','
           << format_number(s.gamma_tot) << '\n';
    return os.str();
}

std::string histogram_csv(const DecayHistogram& hist)
{
    std::ostringstream os;
    os << "time_ns,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
        os << format_number(hist.bin_edges[i]) << ',' << hist.counts[i] << '\n';
    return os.str();
}

json histogram_sidecar(const DecayHistogram& hist)
{
    const auto& c = hist.config;
    return {
        {"irf", {{"fwhm_ps", hist.irf.fwhm_ps}, {"t0_ns", hist.irf.t0_ns}, {"table", hist.irf.table}}},
        {"acquisition",
         {{"repetition_period_ns", c.repetition_period_ns},
          {"bin_width_ps", c.bin_width_ps},
          {"n_bins", c.bins()},
          {"total_signal_counts", c.total_signal_counts},
          {"background_rate", c.background_rate}}},
        {"seed", hist.seed},
        {"total_counts", hist.total_counts()},
    };
}

fs::path sidecar_path(const fs::path& csv_path)
{
    fs::path p = csv_path;
    p.replace_extension(".json");
    return p;
}

DecayHistogram load_histogram(const fs::path& csv_path)
{
    const auto table = load_csv(csv_path);
    const auto time = table.values("time_ns");
    const auto counts = table.values("counts");
    const std::string src = csv_path.string();
    if (time.size() < 2)
        parse_fail(src, table.lines.empty() ? 1 : table.lines.back(), "need at least 2 histogram bins");

    DecayHistogram h;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double n = counts[i];
        if (!(n >= 0.0) || n != std::floor(n))
            parse_fail(src, table.lines[i], "counts must be non-negative integers");
        h.counts.push_back(static_cast<std::int64_t>(n));
    }
    const fs::path side = sidecar_path(csv_path);
    if (fs::exists(side)) {
        const std::string s = side.string();
        const json j = parse_json(read_text(side), s);
        const json irf = j.value("irf", json::object());
        const json acq = j.value("acquisition", json::object());
        h.irf.fwhm_ps = field(irf, "fwhm_ps", s, h.irf.fwhm_ps);
        h.irf.t0_ns = field(irf, "t0_ns", s, h.irf.t0_ns);
        h.irf.table = field(irf, "table", s, std::vector<double>{});
        auto& c = h.config;
        c.repetition_period_ns = field(acq, "repetition_period_ns", s, c.repetition_period_ns);
        c.bin_width_ps = field(acq, "bin_width_ps", s, c.bin_width_ps);
        c.n_bins = field(acq, "n_bins", s, 0);
        c.total_signal_counts = field(acq, "total_signal_counts", s, c.total_signal_counts);
        c.background_rate = field(acq, "background_rate", s, c.background_rate);
        h.seed = field<std::uint64_t>(j, "seed", s, 0);
    } else {
        h.config.bin_width_ps = (time[1] - time[0]) * 1e3;
    }
    if (h.config.n_bins == 0)
        h.config.n_bins = static_cast<int>(h.counts.size());
    if (h.config.n_bins != static_cast<int>(h.counts.size()))
        parse_fail(src, 1, "sidecar n_bins disagrees with the number of rows");
    const double w = h.config.bin_width_ns();
    for (std::size_t i = 0; i < time.size(); ++i)
        if (std::abs(time[i] - time[0] - w * static_cast<double>(i)) > 1e-6 * std::max(w, 1.0))
            parse_fail(src, table.lines[i], "time_ns is not on a uniform grid of the bin width");
    for (std::size_t i = 0; i <= h.counts.size(); ++i)
        h.bin_edges.push_back(time[0] + w * static_cast<double>(i));
    h.validate();
    return h;
}

std::string spectrum_csv(const Spectrum& spectrum)
{
    std::ostringstream os;
    os << "wavelength_nm,intensity\n";
    for (std::size_t i = 0; i < spectrum.size(); ++i)
        os << format_number(spectrum.wavelength_nm[i]) << ',' << format_number(spectrum.intensity[i]) << '\n';
    return os.str();
}

Spectrum parse_spectrum(std::string_view text, const std::string& source)
{
    const auto table = parse_csv(text, source);
    Spectrum s;
    s.wavelength_nm = table.values("wavelength_nm");
    s.intensity = table.values("intensity");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s.wavelength_nm[i]) || !std::isfinite(s.intensity[i]))
            parse_fail(source, table.lines[i], "values must be finite");
        if (i > 0 && !(s.wavelength_nm[i] > s.wavelength_nm[i - 1]))
            parse_fail(source, table.lines[i], "wavelength_nm must increase strictly");
    }
    s.validate();
    return s;
}

Spectrum load_spectrum(const fs::path& path)
{
    return parse_spectrum(read_text(path), path.string());
}

std::string tuning_csv(const TuningData& data)
{
    std::ostringstream os;
    os << "temperature_K,wavelength_nm\n";
    for (std::size_t i = 0; i < data.temperatures_k.size(); ++i)
        os << format_number(data.temperatures_k[i]) << ',' << format_number(data.wavelengths_nm[i]) << '\n';
    return os.str();
}

TuningData load_tuning_data(const fs::path& path)
{
    const auto table = load_csv(path);
    TuningData d;
    d.label = path.stem().string();
    d.temperatures_k = table.values("temperature_K");
    d.wavelengths_nm = table.values("wavelength_nm");
    for (std::size_t i = 0; i < d.temperatures_k.size(); ++i)
        if (!std::isfinite(d.temperatures_k[i]) || !std::isfinite(d.wavelengths_nm[i]))
            parse_fail(path.string(), table.lines[i], "values must be finite");
    return d;
}

std::string rates_csv(const RateVsDetuning& series)
{
    std::ostringstream os;
    os << "detuning_nm,gamma_tot_per_ns,sigma_per_ns,temperature_K,converged\n";
    for (const auto& p : series.points)
        os << format_number(p.detuning_nm) << ',' << format_number(p.gamma_tot) << ',' << format_number(p.sigma)
           << ',' << format_number(p.temperature_k) << ',' << (p.converged ? 1 : 0) << '\n';
    return os.str();
}

RateVsDetuning rate_series_from_json(const json& j, const std::string& source)
{
    if (!j.is_object() || !j.contains("points") || !j.at("points").is_array())
        throw Error(ErrorKind::Parse, source + ": a rate series needs a 'points' array");
    RateVsDetuning s;
    s.label = field<std::string>(j, "label", source, "");
    s.band_edge_source = field<std::string>(j, "band_edge_source", source, s.band_edge_source);
    for (const auto& p : j.at("points")) {
        if (!p.contains("detuning_nm") || !p.contains("gamma_tot"))
            throw Error(ErrorKind::Parse, source + ": each point needs detuning_nm and gamma_tot");
        RateObservation o;
        o.detuning_nm = field(p, "detuning_nm", source, 0.0);
        o.gamma_tot = field(p, "gamma_tot", source, 0.0);
        o.sigma = field(p, "sigma", source, 0.0);
        o.temperature_k = field(p, "temperature_K", source, 0.0);
        o.converged = field(p, "converged", source, true);
        s.points.push_back(o);
    }
    return s;
}

std::vector<RateVsDetuning> load_rate_series(const fs::path& path)
{
    const std::string src = path.string();
    if (path.extension() == ".json") {
        const json j = parse_json(read_text(path), src);
        std::vector<RateVsDetuning> out;
        if (j.is_array()) {
            for (const auto& e : j)
                out.push_back(rate_series_from_json(e, src));
        } else {
            out.push_back(rate_series_from_json(j, src));
        }
        for (auto& s : out)
            if (s.label.empty())
                s.label = path.stem().string();
        return out;
    }
    const auto table = load_csv(path);
    RateVsDetuning s;
    s.label = path.stem().string();
    const auto det = table.values("detuning_nm");
    const auto rate = table.values("gamma_tot_per_ns");
    const bool has_sigma = table.has_column("sigma_per_ns");
    const bool has_t = table.has_column("temperature_K");
    const bool has_conv = table.has_column("converged");
    for (std::size_t i = 0; i < det.size(); ++i) {
        const auto& row = table.rows[i];
        RateObservation o;
        o.detuning_nm = det[i];
        o.gamma_tot = rate[i];
        if (!std::isfinite(o.detuning_nm) || !std::isfinite(o.gamma_tot))
            parse_fail(src, table.lines[i], "detuning and rate must be finite");
        if (has_sigma)
            o.sigma = row[table.column("sigma_per_ns")];
        if (has_t)
            o.temperature_k = row[table.column("temperature_K")];
        if (has_conv)
            o.converged = row[table.column("converged")] != 0.0;
        s.points.push_back(o);
    }
    return {s};
}

std::vector<TaggedHistogram> load_histogram_manifest(const fs::path& path)
{
    const std::string src = path.string();
    const json j = parse_json(read_text(path), src);
    if (!j.is_object() || !j.contains("histograms") || !j.at("histograms").is_array())
        throw Error(ErrorKind::Parse, src + ": manifest needs a 'histograms' array");
    std::vector<TaggedHistogram> out;
    for (const auto& e : j.at("histograms")) {
        if (!e.contains("path"))
            throw Error(ErrorKind::Parse, src + ": every manifest entry needs a 'path'");
        fs::path p = field<std::string>(e, "path", src, "");
        if (p.is_relative())
            p = path.parent_path() / p;
        require(fs::exists(p), ErrorKind::Io, src + ": histogram file not found: " + p.string());
        TaggedHistogram t;
        t.tag = field<std::string>(e, "tag", src, p.stem().string());
        t.wavelength_nm = field(e, "wavelength_nm", src, 0.0);
        t.temperature_k = field(e, "temperature_K", src, 0.0);
        t.histogram = load_histogram(p);
        out.push_back(std::move(t));
    }
    return out;
}

json to_json(const DecayFitResult& r)
{
    const auto& u = r.uncertainties;
    return {
        {"model", to_string(r.model_selected)},
        {"gamma_tot", r.gamma_tot()},
        {"params",
         {{"amp_fast", r.params.amp_fast},
          {"gamma_fast", r.params.gamma_fast},
          {"amp_slow", r.params.amp_slow},
          {"gamma_slow", r.params.gamma_slow}}},
        {"signal_counts", r.signal_counts},
        {"background", r.background},
        {"t0", r.t0},
        {"uncertainties",
         {{"amp_fast", number_or_null(u.amp_fast)},
          {"gamma_fast", number_or_null(u.gamma_fast)},
          {"amp_slow", number_or_null(u.amp_slow)},
          {"gamma_slow", number_or_null(u.gamma_slow)},
          {"background", number_or_null(u.background)},
          {"t0", number_or_null(u.t0)}}},
        {"cstat", r.cstat},
        {"initial_cstat", number_or_null(r.initial_cstat)},
        {"reduced_cstat", r.reduced_cstat},
        {"degrees_of_freedom", r.degrees_of_freedom},
        {"converged", r.converged},
        {"low_statistics", r.low_statistics},
        {"evaluations", r.evaluations},
        {"diagnostics", r.diagnostics},
    };
}

json to_json(const RatePoint& p)
{
    return {
        {"tag", p.tag},
        {"wavelength_nm", p.wavelength_nm},
        {"temperature_K", p.temperature_k},
        {"gamma_tot", p.gamma_tot},
        {"sigma", number_or_null(p.sigma)},
        {"converged", p.converged},
        {"low_statistics", p.low_statistics},
        {"model", to_string(p.model)},
        {"error", p.error},
    };
}

json to_json(const SpectralModel& m)
{
    json lines = json::array();
    for (const auto& l : m.lorentzians)
        lines.push_back({{"center_nm", l.center_nm}, {"fwhm_nm", l.fwhm_nm}, {"area", l.area}});
    json out = {
        {"lorentzians", lines},
        {"gaussian", nullptr},
        {"baseline", m.baseline},
        {"residual_rms", m.residual_rms},
        {"iterations", m.iterations},
    };
    if (m.gaussian)
        out["gaussian"] = {{"center_nm", m.gaussian->center_nm},
                           {"sigma_nm", m.gaussian->sigma_nm},
                           {"amplitude", m.gaussian->amplitude}};
    return out;
}

json to_json(const TuningCurve& c)
{
    return {
        {"label", c.label},
        {"coefficients", c.coefficients},
        {"t_min", c.t_min},
        {"t_max", c.t_max},
        {"fit_rms", c.fit_rms},
    };
}

json to_json(const Resonance& r)
{
    return {
        {"temperature_K", r.temperature_k},
        {"second_root_K", r.second_root_k ? json(*r.second_root_k) : json(nullptr)},
        {"degenerate", r.degenerate},
    };
}

json to_json(const BetaResult& r)
{
    return {
        {"gamma_res", r.gamma_res},
        {"gamma_nonres", r.gamma_nonres},
        {"beta", r.beta},
        {"purcell", r.purcell},
        {"lower_bound", r.lower_bound},
        {"n_points_in_gap", r.n_points_in_gap},
    };
}

json to_json(const RateModelFit& f)
{
    return {
        {"coupling_scale", f.coupling_scale},
        {"gamma_bg", f.gamma_bg},
        {"broadening_fwhm", f.broadening_fwhm},
        {"chi_square", number_or_null(f.chi_square)},
        {"reduced_residual", number_or_null(f.reduced_residual)},
        {"points_used", f.points_used},
        {"converged", f.converged},
        {"diagnostics", f.diagnostics},
    };
}

json to_json(const RateVsDetuning& s)
{
    json pts = json::array();
    for (const auto& p : s.points)
        pts.push_back({{"detuning_nm", p.detuning_nm},
                       {"gamma_tot", p.gamma_tot},
                       {"sigma", p.sigma},
                       {"temperature_K", p.temperature_k},
                       {"converged", p.converged}});
    return {{"label", s.label}, {"band_edge_source", s.band_edge_source}, {"points", pts}};
}

json to_json(const DotReport& d)
{
    return {
        {"label", d.label},
        {"result", d.result ? to_json(*d.result) : json(nullptr)},
        {"note", d.note},
        {"error", d.error},
        {"points", d.points},
        {"converged_points", d.converged_points},
    };
}

json to_json(const MultiDotReport& r)
{
    json dots = json::array();
    for (const auto& d : r.dots)
        dots.push_back(to_json(d));
    return {
        {"dots", dots},
        {"beta_min", r.beta_min ? json(*r.beta_min) : json(nullptr)},
        {"beta_max", r.beta_max ? json(*r.beta_max) : json(nullptr)},
    };
}

json to_json(const BandEdge& e)
{
    return {
        {"frequency_a_over_lambda", e.frequency},
        {"wavelength_nm", e.wavelength_nm},
        {"band_index", e.band_index},
        {"core_weight", e.core_weight},
        {"gap", {{"lower", e.gap.lower}, {"upper", e.gap.upper}, {"bands_below", e.gap.bands_below}}},
    };
}

json to_json(const CalibrationResult& c)
{
    return {
        {"effective_index", c.effective_index},
        {"band_edge_wavelength_nm", c.band_edge_wavelength_nm},
        {"residual_nm", c.residual_nm},
        {"iterations", c.iterations},
    };
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

} // namespace pcw::io
