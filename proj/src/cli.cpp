#include "pcw/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pcw/beta_pipeline.hpp"
#include "pcw/decay_fit.hpp"
#include "pcw/emission_model.hpp"
#include "pcw/error.hpp"
#include "pcw/geometry.hpp"
#include "pcw/io.hpp"
#include "pcw/photonic_bands.hpp"
#include "pcw/scenario.hpp"
#include "pcw/spectrum.hpp"
#include "pcw/svg_plot.hpp"
#include "pcw/tcspc.hpp"
#include "pcw/tuning.hpp"

#ifndef PCW_VERSION
#define PCW_VERSION "0.0.0"
#endif

namespace pcw::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Command, const char*> kNames[] = {
    {Command::bands, "bands"},
    {Command::simulate_decay, "simulate-decay"},
    {Command::fit_decay, "fit-decay"},
    {Command::fit_spectrum, "fit-spectrum"},
    {Command::calibrate, "calibrate"},
    {Command::extract_beta, "extract-beta"},
    {Command::reproduce_paper, "reproduce-paper"},
};

} // namespace

const char* to_string(Command c)
{
    for (const auto& [k, n] : kNames)
        if (k == c)
            return n;
    return "unknown";
}

std::optional<Command> parse_command(const std::string& name)
{
    for (const auto& [k, n] : kNames)
        if (name == n)
            return k;
    return std::nullopt;
}

std::vector<std::string> command_names()
{
    std::vector<std::string> out;
    for (const auto& [k, n] : kNames)
        out.emplace_back(n);
    return out;
}

void RunConfig::validate() const
{
    const std::string cmd = to_string(command);
    auto must_exist = [](const fs::path& p) {
        require(fs::exists(p), ErrorKind::Io, "input file not found: " + p.string());
    };
    for (const auto& p : inputs)
        must_exist(p);
    for (const auto* p : {&geometry, &config, &manifest, &edge})
        if (*p)
            must_exist(**p);

    switch (command) {
    case Command::bands:
    case Command::reproduce_paper:
        require(inputs.empty(), ErrorKind::InvalidArgument, cmd + " takes no input files");
        break;
    case Command::simulate_decay:
        require(seed.has_value(), ErrorKind::InvalidArgument, "simulate-decay requires --seed");
        require(inputs.empty(), ErrorKind::InvalidArgument, "simulate-decay takes no input files");
        break;
    case Command::fit_decay:
        require(!inputs.empty() || manifest, ErrorKind::InvalidArgument,
                "fit-decay needs histogram files or --manifest");
        break;
    case Command::fit_spectrum:
        require(inputs.size() == 1, ErrorKind::InvalidArgument, "fit-spectrum takes exactly one spectrum file");
        break;
    case Command::calibrate:
        require(inputs.empty() == !edge.has_value(), ErrorKind::InvalidArgument,
                "calibrate: tuning mode needs --edge together with emitter tuning files");
        break;
    case Command::extract_beta:
        require(!inputs.empty(), ErrorKind::InvalidArgument, "extract-beta needs at least one rate file");
        break;
    }
    if (command != Command::fit_decay)
        require(!manifest, ErrorKind::InvalidArgument, "--manifest only applies to fit-decay");
    if (command != Command::calibrate)
        require(!edge, ErrorKind::InvalidArgument, "--edge only applies to calibrate");
}

namespace {

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::string fnv1a(const std::string& data)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_safe(const std::string& s)
{
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out.empty() ? "series" : out;
}

// Merges the user's --config object into the command defaults. Unknown keys
// and type mismatches are parse errors; a null default accepts any value.
json options(const RunConfig& rc, json defaults)
{
    if (!rc.config)
        return defaults;
    const std::string src = rc.config->string();
    json user;
    try {
        user = json::parse(io::read_text(*rc.config));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, src + ": invalid JSON: " + e.what());
    }
    require(user.is_object(), ErrorKind::Parse, src + ": config must be a JSON object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (!defaults.contains(it.key()))
            throw Error(ErrorKind::Parse, src + ": unknown option '" + it.key() + "' for " + to_string(rc.command));
        const json& d = defaults[it.key()];
        const json& v = it.value();
        const bool ok = d.is_null() || (d.is_number() && v.is_number()) || d.type() == v.type();
        if (!ok)
            throw Error(ErrorKind::Parse, src + ": option '" + it.key() + "' has the wrong type");
        defaults[it.key()] = v;
    }
    return defaults;
}

WaveguideGeometry geometry_of(const RunConfig& rc)
{
    return rc.geometry ? load_geometry(*rc.geometry) : WaveguideGeometry{};
}

class RunDir {
public:
    RunDir(fs::path dir, bool plot, std::ostream& err) : dir_(std::move(dir)), plot_(plot), err_(err) {}

    void write(const std::string& name, std::string_view content)
    {
        io::write_atomic(dir_ / name, content);
        files_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, io::dump(j)); }
    void plot(const std::string& name, const plot::Figure& figure)
    {
        if (plot_ && plot::emit_plot(figure, dir_ / name, err_))
            files_.push_back(name);
    }
    const fs::path& dir() const { return dir_; }
    const std::vector<std::string>& files() const { return files_; }

private:
    fs::path dir_;
    bool plot_;
    std::ostream& err_;
    std::vector<std::string> files_;
};

struct Context {
    const RunConfig& rc;
    RunDir& out;
    std::ostream& stdout_;
    std::ostream& stderr_;
    json effective;        // options after merging, recorded in the manifest
    std::optional<json> geometry;
    int exit_code = kExitOk;
};

// ---- bands ----------------------------------------------------------------

void cmd_bands(Context& cx)
{
    cx.effective = options(cx.rc, {{"cutoff", kDefaultCutoff},
                                   {"k_samples", 41},
                                   {"coupling_scale", 0.4},
                                   {"gamma_bg", 0.8},
                                   {"gamma_0", 1.1},
                                   {"broadening_fwhm", 2e-4}});
    const auto g = geometry_of(cx.rc);
    cx.geometry = to_json(g);
    const int cutoff = cx.effective["cutoff"].get<int>();
    const int nk = cx.effective["k_samples"].get<int>();
    require(nk >= 32, ErrorKind::InvalidArgument, "bands: k_samples must be >= 32");
    const auto curve = guided_dispersion(g, cutoff, static_cast<std::size_t>(nk));

    cx.out.write("dispersion.csv", io::dispersion_csv(curve));
    json edge = {
        {"band_edge_frequency_a_over_lambda", curve.band_edge_frequency()},
        {"band_edge_wavelength_nm", curve.band_edge_wavelength_nm()},
        {"effective_index", g.effective_index},
        {"lattice_constant_nm", g.lattice_constant},
        {"reciprocal_cutoff", cutoff},
        {"wave_count", PlaneWaveBasis::build(g, cutoff).wave_count()},
        {"k_samples", nk},
        {"propagating_above_edge", curve.propagating_above_edge()},
        {"far_frequency_a_over_lambda", curve.far_frequency()},
    };
    cx.out.write_json("band_edge.json", edge);

    RateModelConfig rm;
    rm.coupling_scale = cx.effective["coupling_scale"].get<double>();
    rm.gamma_bg = cx.effective["gamma_bg"].get<double>();
    rm.gamma_0 = cx.effective["gamma_0"].get<double>();
    rm.broadening_fwhm = cx.effective["broadening_fwhm"].get<double>();
    rm.validate();
    RateCurve rates;
    if (rm.broadening_fwhm > 0.0) {
        rates = broadened_rate_curve(curve, rm);
    } else {
        std::vector<double> wl;
        const auto& pts = curve.points();
        for (std::size_t i = curve.segment_begin(); i + 1 < pts.size(); ++i)
            wl.push_back(curve.wavelength_at_frequency(pts[i].frequency));
        rates = lossless_rate_curve(curve, rm, wl);
    }
    cx.out.write("rate_curve.csv", io::rate_curve_csv(rates));
    cx.out.plot("dispersion.svg", plot::dispersion_figure(curve));

    cx.stdout_ << "band edge: nu = " << io::format_number(curve.band_edge_frequency()) << " a/lambda, "
               << std::fixed << std::setprecision(3) << curve.band_edge_wavelength_nm() << " nm (n_eff "
               << std::setprecision(6) << g.effective_index << ", cutoff " << cutoff << ")\n"
               << std::defaultfloat;
}

// ---- simulate-decay ---------------------------------------------------------

void cmd_simulate_decay(Context& cx)
{
    const AcquisitionConfig acq_default;
    const InstrumentResponse irf_default;
    cx.effective = options(cx.rc, {{"gamma_fast", 2.0},
                                   {"gamma_slow", nullptr},
                                   {"amp_fast", 0.8},
                                   {"amp_slow", 0.2},
                                   {"total_signal_counts", acq_default.total_signal_counts},
                                   {"background_fraction", 0.01},
                                   {"background_rate", nullptr},
                                   {"irf_fwhm_ps", irf_default.fwhm_ps},
                                   {"t0_ns", irf_default.t0_ns},
                                   {"bin_width_ps", acq_default.bin_width_ps},
                                   {"repetition_period_ns", acq_default.repetition_period_ns}});
    const auto& o = cx.effective;
    DecayParams p;
    p.gamma_fast = o["gamma_fast"].get<double>();
    p.gamma_slow = o["gamma_slow"].is_null() ? p.gamma_fast / 4.0 : o["gamma_slow"].get<double>();
    p.amp_fast = o["amp_fast"].get<double>();
    p.amp_slow = o["amp_slow"].get<double>();
    p.validate();
    InstrumentResponse irf;
    irf.fwhm_ps = o["irf_fwhm_ps"].get<double>();
    irf.t0_ns = o["t0_ns"].get<double>();
    AcquisitionConfig acq;
    acq.total_signal_counts = o["total_signal_counts"].get<double>();
    acq.bin_width_ps = o["bin_width_ps"].get<double>();
    acq.repetition_period_ns = o["repetition_period_ns"].get<double>();
    acq.background_rate = 0.0;
    if (o["background_rate"].is_null()) {
        const auto clean = expected_curve(p, irf, acq);
        acq.background_rate = o["background_fraction"].get<double>() * *std::max_element(clean.begin(), clean.end());
    } else {
        acq.background_rate = o["background_rate"].get<double>();
    }
    const auto expected = expected_curve(p, irf, acq);
    const auto hist = sample_histogram(expected, *cx.rc.seed, irf, acq);

    cx.out.write("histogram.csv", io::histogram_csv(hist));
    json side = io::histogram_sidecar(hist);
    side["truth"] = {{"amp_fast", p.amp_fast},
                     {"gamma_fast", p.gamma_fast},
                     {"amp_slow", p.amp_slow},
                     {"gamma_slow", p.gamma_slow}};
    cx.out.write_json("histogram.json", side);
    cx.out.plot("decay.svg", plot::decay_figure(hist, expected, "Simulated decay"));
    cx.stdout_ << "simulated " << hist.total_counts() << " counts in " << hist.counts.size() << " bins (seed "
               << *cx.rc.seed << ")\n";
}

// ---- fit-decay --------------------------------------------------------------

std::vector<double> fitted_curve(const DecayFitResult& r, const DecayHistogram& h)
{
    InstrumentResponse irf = h.irf;
    irf.t0_ns = r.t0;
    AcquisitionConfig acq = h.config;
    acq.total_signal_counts = r.signal_counts;
    acq.background_rate = r.background;
    return expected_curve(r.params, irf, acq);
}

void cmd_fit_decay(Context& cx)
{
    cx.effective = options(cx.rc, {{"restarts", 5}, {"model", "auto"}});
    const std::string model = cx.effective["model"].get<std::string>();
    require(model == "auto" || model == "bi" || model == "mono", ErrorKind::InvalidArgument,
            "fit-decay: model must be auto, bi or mono");
    DecayFitOptions fo;
    fo.restarts = cx.effective["restarts"].get<int>();
    require(fo.restarts >= 0, ErrorKind::InvalidArgument, "fit-decay: restarts must be >= 0");

    std::vector<TaggedHistogram> hists;
    std::vector<std::string> sources;
    for (const auto& p : cx.rc.inputs) {
        hists.push_back({p.stem().string(), 0.0, 0.0, io::load_histogram(p)});
        sources.push_back(p.string());
    }
    if (cx.rc.manifest)
        for (auto& t : io::load_histogram_manifest(*cx.rc.manifest)) {
            hists.push_back(std::move(t));
            sources.push_back(cx.rc.manifest->string());
        }

    json records = json::array();
    std::ostringstream csv;
    csv << "tag,wavelength_nm,temperature_K,gamma_tot_per_ns,sigma_per_ns,model,converged\n";
    int ok = 0;
    std::optional<Error> last;
    auto& os = cx.stdout_;
    os << std::left << std::setw(20) << "tag" << std::right << std::setw(12) << "gamma_tot" << std::setw(10)
       << "sigma" << std::setw(7) << "model" << "  status\n";
    for (std::size_t i = 0; i < hists.size(); ++i) {
        const auto& t = hists[i];
        json rec = {{"tag", t.tag},
                    {"source", sources[i]},
                    {"wavelength_nm", t.wavelength_nm},
                    {"temperature_K", t.temperature_k}};
        try {
            DecayFitResult r = model == "bi"     ? fit_bi_exponential(t.histogram, t.histogram.irf, fo)
                               : model == "mono" ? fit_mono_exponential(t.histogram, t.histogram.irf, fo)
                                                 : fit_decay(t.histogram, t.histogram.irf, fo);
            rec["fit"] = io::to_json(r);
            ++ok;
            csv << t.tag << ',' << io::format_number(t.wavelength_nm) << ',' << io::format_number(t.temperature_k)
                << ',' << io::format_number(r.gamma_tot()) << ',' << io::format_number(r.gamma_tot_sigma()) << ','
                << to_string(r.model_selected) << ',' << (r.converged ? 1 : 0) << '\n';
            os << std::left << std::setw(20) << t.tag << std::right << std::fixed << std::setprecision(4)
               << std::setw(12) << r.gamma_tot() << std::setw(10) << r.gamma_tot_sigma() << std::setw(7)
               << to_string(r.model_selected) << "  " << (r.converged ? "ok" : "not converged")
               << (r.low_statistics ? ", low statistics" : "") << '\n'
               << std::defaultfloat;
            cx.out.plot("decay-" + file_safe(t.tag) + ".svg",
                        plot::decay_figure(t.histogram, fitted_curve(r, t.histogram), t.tag));
        } catch (const Error& e) {
            rec["error"] = {{"kind", pcw::to_string(e.kind())}, {"message", e.what()}};
            os << std::left << std::setw(20) << t.tag << "  failed: " << e.what() << '\n';
            last = e;
        }
        records.push_back(std::move(rec));
    }
    cx.out.write_json("fits.json", records);
    cx.out.write("rates.csv", csv.str());
    if (ok == 0 && last)
        throw *last;
}

// ---- fit-spectrum -----------------------------------------------------------

void cmd_fit_spectrum(Context& cx)
{
    cx.effective = options(cx.rc, {{"fit_gaussian", true}, {"min_prominence", nullptr}, {"candidates_nm", nullptr}});
    const auto spec = io::load_spectrum(cx.rc.inputs.front());
    std::vector<double> candidates;
    if (!cx.effective["candidates_nm"].is_null()) {
        candidates = cx.effective["candidates_nm"].get<std::vector<double>>();
    } else {
        double prom = 0.0;
        if (cx.effective["min_prominence"].is_null())
            prom = 10.0 * std::sqrt(std::max(*std::max_element(spec.intensity.begin(), spec.intensity.end()), 1.0));
        else
            prom = cx.effective["min_prominence"].get<double>();
        candidates = detect_peaks(spec, prom);
    }
    const auto model = fit_spectrum(spec, candidates, cx.effective["fit_gaussian"].get<bool>());
    cx.out.write_json("model.json", io::to_json(model));
    cx.out.plot("spectrum.svg", plot::spectrum_figure(spec, &model, cx.rc.inputs.front().filename().string()));

    auto& os = cx.stdout_;
    os << std::fixed << std::setprecision(4);
    for (const auto& l : model.lorentzians)
        os << "line " << l.center_nm << " nm, FWHM " << l.fwhm_nm << " nm, area " << std::setprecision(1) << l.area
           << '\n'
           << std::setprecision(4);
    if (model.gaussian)
        os << "band edge peak " << model.gaussian->center_nm << " nm (sigma " << model.gaussian->sigma_nm << " nm)\n";
    os << std::defaultfloat;
}

// ---- calibrate --------------------------------------------------------------

void calibrate_index(Context& cx)
{
    cx.effective = options(cx.rc, {{"target_nm", nullptr},
                                   {"anchor", "computed"},
                                   {"cutoff", kDefaultCutoff},
                                   {"tolerance_nm", CalibrationOptions{}.tolerance_nm}});
    const std::string anchor = cx.effective["anchor"].get<std::string>();
    require(anchor == "computed" || anchor == "measured", ErrorKind::InvalidArgument,
            "calibrate: anchor must be 'computed' (968.4 nm) or 'measured' (968.7 nm)");
    const double target = cx.effective["target_nm"].is_null() ? (anchor == "measured" ? 968.7 : 968.4)
                                                              : cx.effective["target_nm"].get<double>();
    const auto g = geometry_of(cx.rc);
    cx.geometry = to_json(g);
    CalibrationOptions co;
    co.tolerance_nm = cx.effective["tolerance_nm"].get<double>();
    const int cutoff = cx.effective["cutoff"].get<int>();
    const auto r = calibrate_effective_index(g, cutoff, target, co);
    json j = io::to_json(r);
    j["target_nm"] = target;
    j["reciprocal_cutoff"] = cutoff;
    cx.out.write_json("calibration.json", j);
    cx.out.write_json("geometry.json", to_json(g.with_index(r.effective_index)));
    cx.stdout_ << "n_eff = " << io::format_number(r.effective_index) << " puts the band edge at " << std::fixed
               << std::setprecision(4) << r.band_edge_wavelength_nm << " nm (target " << target << ", "
               << r.iterations << " iterations)\n"
               << std::defaultfloat;
}

void calibrate_tuning(Context& cx)
{
    cx.effective = options(cx.rc, {});
    const auto edge_data = io::load_tuning_data(*cx.rc.edge);
    const auto edge = fit_tuning(edge_data.temperatures_k, edge_data.wavelengths_nm, edge_data.label);
    json dots = json::array();
    auto& os = cx.stdout_;
    os << std::fixed << std::setprecision(4) << "edge " << edge.label << ": "
       << shift_rate(edge, 0.5 * (edge.t_min + edge.t_max)).nm_per_k << " nm/K at mid-range\n";
    for (const auto& path : cx.rc.inputs) {
        const auto data = io::load_tuning_data(path);
        const auto qd = fit_tuning(data.temperatures_k, data.wavelengths_nm, data.label);
        json d = {{"curve", io::to_json(qd)}, {"source", path.string()}};
        double t_eval = 0.5 * (std::max(qd.t_min, edge.t_min) + std::min(qd.t_max, edge.t_max));
        try {
            const auto res = resonance_temperature(qd, edge);
            d["resonance"] = io::to_json(res);
            t_eval = res.temperature_k;
            os << qd.label << ": crosses the edge at " << res.temperature_k << " K";
        } catch (const Error& e) {
            d["resonance"] = nullptr;
            d["note"] = e.what();
            os << qd.label << ": no crossing";
        }
        const auto sq = shift_rate(qd, t_eval), se = shift_rate(edge, t_eval);
        d["shift_rates_at_K"] = t_eval;
        d["shift_rate_nm_per_K"] = sq.nm_per_k;
        d["edge_shift_rate_nm_per_K"] = se.nm_per_k;
        d["extrapolated"] = sq.extrapolated || se.extrapolated;
        os << ", " << sq.nm_per_k << " vs " << se.nm_per_k << " nm/K\n";
        json det = json::array();
        for (const auto& e : detuning_series(qd, edge, data.temperatures_k).entries)
            det.push_back({{"temperature_K", e.temperature_k},
                           {"qd_wavelength_nm", e.qd_wavelength_nm},
                           {"band_edge_wavelength_nm", e.band_edge_wavelength_nm},
                           {"detuning_nm", e.detuning_nm},
                           {"extrapolated", e.extrapolated}});
        d["detuning"] = det;
        dots.push_back(std::move(d));
    }
    os << std::defaultfloat;
    cx.out.write_json("tuning.json", {{"edge", io::to_json(edge)}, {"emitters", dots}});
}

void cmd_calibrate(Context& cx)
{
    if (cx.rc.edge)
        calibrate_tuning(cx);
    else
        calibrate_index(cx);
}

// ---- extract-beta -----------------------------------------------------------

void print_beta_table(std::ostream& os, const MultiDotReport& report)
{
    os << std::left << std::setw(10) << "emitter" << std::right << std::setw(8) << "points" << std::setw(11)
       << "G_res" << std::setw(11) << "G_nonres" << std::setw(8) << "beta" << std::setw(8) << "F_p" << "  note\n";
    for (const auto& d : report.dots) {
        os << std::left << std::setw(10) << d.label << std::right << std::setw(8) << d.converged_points;
        if (d.result) {
            os << std::fixed << std::setprecision(3) << std::setw(11) << d.result->gamma_res << std::setw(11)
               << d.result->gamma_nonres << std::setw(8) << d.result->beta << std::setw(8) << d.result->purcell
               << "  lower bound\n"
               << std::defaultfloat;
        } else {
            os << std::setw(11) << "-" << std::setw(11) << "-" << std::setw(8) << "-" << std::setw(8) << "-" << "  "
               << (d.note.empty() ? d.error : d.note) << '\n';
        }
    }
    if (report.beta_min)
        os << "beta range " << std::fixed << std::setprecision(3) << *report.beta_min << " to " << *report.beta_max
           << '\n'
           << std::defaultfloat;
}

RateCurve model_curve_for(const RateVsDetuning& s, const DispersionCurve& curve, const RateModelFit& fit,
                          double gamma_0)
{
    double lo = 0.0, hi = 0.0;
    for (const auto& p : s.points) {
        lo = std::min(lo, p.detuning_nm);
        hi = std::max(hi, p.detuning_nm);
    }
    lo -= 0.1 * (hi - lo) + 0.05;
    hi += 0.1 * (hi - lo) + 0.05;
    std::vector<double> wl;
    for (int i = 0; i <= 400; ++i)
        wl.push_back(curve.band_edge_wavelength_nm() + lo + (hi - lo) * i / 400.0);
    RateModelConfig rm;
    rm.coupling_scale = fit.coupling_scale;
    rm.gamma_bg = fit.gamma_bg;
    rm.gamma_0 = gamma_0;
    rm.broadening_fwhm = fit.broadening_fwhm;
    return broadened_rate_curve(curve, rm, wl);
}

void cmd_extract_beta(Context& cx)
{
    cx.effective = options(cx.rc, {{"gamma_0", 1.1},
                                   {"fit_model", false},
                                   {"cutoff", kDefaultCutoff},
                                   {"k_samples", 41},
                                   {"fixed_broadening", nullptr}});
    const double gamma_0 = cx.effective["gamma_0"].get<double>();
    const bool fit_model = cx.effective["fit_model"].get<bool>();
    require(!fit_model || cx.rc.geometry, ErrorKind::InvalidArgument,
            "extract-beta: fit_model needs --geometry for the dispersion curve");

    std::vector<RateVsDetuning> series;
    std::vector<std::string> sources;
    for (const auto& p : cx.rc.inputs)
        for (auto& s : io::load_rate_series(p)) {
            series.push_back(std::move(s));
            sources.push_back(p.string());
        }
    const auto report = multi_dot_report(series, gamma_0);

    std::optional<DispersionCurve> curve;
    if (fit_model) {
        const auto g = geometry_of(cx.rc);
        cx.geometry = to_json(g);
        curve = guided_dispersion(g, cx.effective["cutoff"].get<int>(),
                                  static_cast<std::size_t>(cx.effective["k_samples"].get<int>()));
    }
    RateModelFitOptions fo;
    if (!cx.effective["fixed_broadening"].is_null())
        fo.fixed_broadening = cx.effective["fixed_broadening"].get<double>();

    json out = json::array();
    std::vector<std::optional<RateModelFit>> fits(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& d = report.dots[i];
        json rec = d.result ? io::to_json(*d.result)
                            : json{{"gamma_res", nullptr}, {"gamma_nonres", nullptr}, {"beta", nullptr},
                                   {"purcell", nullptr},   {"lower_bound", true},     {"n_points_in_gap", 0}};
        rec["label"] = d.label;
        rec["provenance"] = {{"source", sources[i]},
                             {"band_edge_source", series[i].band_edge_source},
                             {"gamma_0", gamma_0},
                             {"points", d.points},
                             {"converged_points", d.converged_points},
                             {"gamma_res_rule", "fastest converged rate"},
                             {"gamma_nonres_rule", "slowest converged in-gap rate"}};
        rec["note"] = d.note;
        rec["error"] = d.error;
        if (curve) {
            try {
                fits[i] = fit_rate_model(series[i], *curve, gamma_0, fo);
                rec["rate_model"] = io::to_json(*fits[i]);
            } catch (const Error& e) {
                rec["rate_model"] = {{"error", e.what()}};
            }
        }
        out.push_back(std::move(rec));
    }
    cx.out.write_json("beta_report.json", out);
    print_beta_table(cx.stdout_, report);

    if (series.size() == 1) {
        std::optional<RateCurve> mc;
        if (curve && fits[0])
            mc = model_curve_for(series[0], *curve, *fits[0], gamma_0);
        cx.out.plot("rates.svg", plot::rates_figure(series, report.dots[0].result, mc ? &*mc : nullptr, series[0].label));
    } else {
        cx.out.plot("rates.svg", plot::rates_figure(series));
    }
}

// ---- reproduce-paper --------------------------------------------------------

struct Check {
    std::string name;
    double value, target, tolerance;
    bool relative = false;
    bool pass() const
    {
        const double d = std::abs(value - target);
        return relative ? d <= tolerance * std::abs(target) : d <= tolerance;
    }
};

void cmd_reproduce_paper(Context& cx)
{
    auto cfg = qd3_scenario();
    cx.effective = options(cx.rc, {{"seed", cfg.seed}, {"cutoff", cfg.reciprocal_cutoff},
                                   {"k_samples", static_cast<int>(cfg.k_samples)}});
    cfg.seed = cx.rc.seed ? *cx.rc.seed : cx.effective["seed"].get<std::uint64_t>();
    cx.effective["seed"] = cfg.seed;
    cfg.reciprocal_cutoff = cx.effective["cutoff"].get<int>();
    cfg.k_samples = static_cast<std::size_t>(cx.effective["k_samples"].get<int>());
    cx.geometry = to_json(cfg.geometry);
    const auto r = run_scenario(cfg);
    const auto& primary = r.dots[r.primary];

    std::vector<Check> checks = {
        {"beta from 5.7 and 0.8 1/ns", beta_factor(5.7, 0.8), 0.860, 0.015},
        {"Purcell factor 5.7 / 1.1", purcell_factor(5.7, 1.1), 5.18, 0.01},
        {"beta with 0.43 1/ns in the gap", beta_factor(5.7, 0.43), 0.925, 0.01},
        {"beta with 0.05 1/ns in the gap", beta_factor(5.7, 0.05), 0.991, 0.01},
        {"scenario beta vs injected", r.primary_beta.beta, r.injected_beta, 0.02},
        {"scenario beta vs 0.86", r.primary_beta.beta, 0.860, 0.015},
        {"fitted coupling scale C", r.primary_fit.coupling_scale, primary.spec.coupling_scale, 0.2, true},
    };
    json jchecks = json::array();
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.pass();
        jchecks.push_back({{"name", c.name},
                           {"value", c.value},
                           {"target", c.target},
                           {"tolerance", c.tolerance},
                           {"relative", c.relative},
                           {"pass", c.pass()}});
    }

    json dots = json::array();
    for (const auto& d : r.dots) {
        json jd = {{"label", d.spec.label},
                   {"coupling_scale", d.spec.coupling_scale},
                   {"gamma_bg", d.spec.gamma_bg},
                   {"detuning_at_10K_nm", d.spec.detuning_at_10k},
                   {"tuning", d.tuning ? io::to_json(*d.tuning) : json(nullptr)},
                   {"measured", io::to_json(d.measured)},
                   {"injected", io::to_json(d.injected)},
                   {"error", d.error}};
        if (d.tuning) {
            try {
                jd["resonance"] = io::to_json(resonance_temperature(*d.tuning, r.edge_tuning));
            } catch (const Error& e) {
                jd["resonance"] = nullptr;
            }
        }
        dots.push_back(std::move(jd));
        cx.out.write("rates-" + file_safe(d.spec.label) + ".csv", io::rates_csv(d.measured));
    }
    json report = {
        {"checks", jchecks},
        {"all_pass", all},
        {"scenario",
         {{"seed", cfg.seed},
          {"primary", primary.spec.label},
          {"band_edge_wavelength_nm", r.curve->band_edge_wavelength_nm()},
          {"gamma_0", cfg.gamma_0},
          {"broadening_fwhm", cfg.broadening_fwhm},
          {"edge_tuning", io::to_json(r.edge_tuning)},
          {"primary_beta", io::to_json(r.primary_beta)},
          {"injected_beta", r.injected_beta},
          {"rate_model", io::to_json(r.primary_fit)},
          {"multi_dot", io::to_json(r.report)},
          {"dots", dots}}},
    };
    cx.out.write_json("report.json", report);
    cx.out.write("dispersion.csv", io::dispersion_csv(*r.curve));
    cx.out.write("spectrum-" + io::format_number(cfg.temperatures_k.front()) + "K.csv",
                 io::spectrum_csv(r.spectra.front()));

    const auto model = model_curve_for(primary.measured, *r.curve, r.primary_fit, cfg.gamma_0);
    const RateVsDetuning one[] = {primary.measured};
    cx.out.plot("rates_vs_detuning.svg",
                plot::rates_figure(one, r.primary_beta, &model, primary.spec.label + " decay rate vs detuning"));
    std::size_t fastest = 0;
    for (std::size_t i = 0; i < primary.measured.points.size(); ++i)
        if (primary.measured.points[i].gamma_tot > primary.measured.points[fastest].gamma_tot)
            fastest = i;
    const auto& h = primary.histograms[fastest];
    cx.out.plot("decay-" + file_safe(h.tag) + ".svg", plot::decay_figure(h.histogram, {}, h.tag));
    cx.out.plot("spectrum-" + io::format_number(cfg.temperatures_k.front()) + "K.svg",
                plot::spectrum_figure(r.spectra.front(), &r.spectral_models.front()));
    cx.out.plot("dispersion.svg", plot::dispersion_figure(*r.curve));

    auto& os = cx.stdout_;
    for (const auto& c : checks)
        os << (c.pass() ? "PASS " : "FAIL ") << std::left << std::setw(34) << c.name << std::right << std::fixed
           << std::setprecision(4) << std::setw(9) << c.value << "  target " << c.target << (c.relative ? " +/- " : " +/- ")
           << (c.relative ? c.tolerance * 100.0 : c.tolerance) << (c.relative ? "%" : "") << '\n'
           << std::defaultfloat;
    print_beta_table(os, r.report);
    if (!all)
        cx.exit_code = kExitChecksFailed;
}

int exit_code_for(ErrorKind k)
{
    switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Parse:
    case ErrorKind::Io:
        return kExitUsage;
    default:
        return kExitNumerical;
    }
}

json build_info()
{
    json j = {{"version", PCW_VERSION}};
#ifdef __VERSION__
    j["compiler"] = __VERSION__;
#endif
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
#ifdef _OPENMP
    j["openmp"] = _OPENMP;
#endif
    return j;
}

} // namespace

RunOutcome run(const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    RunOutcome outcome;
    const std::string cmd = to_string(rc.command);
    auto report_error = [&](const std::string& kind, const std::string& message, int code) {
        json e = {{"error", {{"command", cmd}, {"kind", kind}, {"message", message}, {"exit_code", code}}}};
        err << e.dump() << '\n';
        if (!outcome.run_dir.empty()) {
            try {
                io::write_atomic(outcome.run_dir / "error.json", io::dump(e));
                outcome.files.push_back("error.json");
            } catch (const Error&) {
            }
        }
        outcome.exit_code = code;
    };

    try {
        rc.validate();
        std::error_code ec;
        fs::create_directories(rc.out_dir, ec);
        require(!ec && fs::is_directory(rc.out_dir), ErrorKind::Io,
                "output directory is not writable: " + rc.out_dir.string());
        const std::string stamp = rc.timestamp.empty() ? utc_timestamp() : rc.timestamp;
        fs::path dir = rc.out_dir / (cmd + "-" + stamp);
        for (int i = 2; fs::exists(dir); ++i)
            dir = rc.out_dir / (cmd + "-" + stamp + "-" + std::to_string(i));
        fs::create_directory(dir, ec);
        require(!ec, ErrorKind::Io, "cannot create run directory " + dir.string());
        outcome.run_dir = dir;

        RunDir rd(dir, rc.plot, err);
        Context cx{rc, rd, out, err, json::object(), std::nullopt, kExitOk};
        json manifest = {
            {"command", cmd},
            {"timestamp", stamp},
            {"argv", rc.argv},
            {"seed", rc.seed ? json(*rc.seed) : json(nullptr)},
            {"plot", rc.plot},
            {"build", build_info()},
        };
        json inputs = json::array();
        auto note_input = [&](const fs::path& p, const char* role) {
            const std::string data = io::read_text(p);
            inputs.push_back({{"role", role}, {"path", p.string()}, {"bytes", data.size()}, {"fnv1a64", fnv1a(data)}});
        };
        for (const auto& p : rc.inputs)
            note_input(p, "input");
        if (rc.geometry)
            note_input(*rc.geometry, "geometry");
        if (rc.config)
            note_input(*rc.config, "config");
        if (rc.manifest)
            note_input(*rc.manifest, "manifest");
        if (rc.edge)
            note_input(*rc.edge, "edge");
        manifest["inputs"] = inputs;

        std::optional<std::pair<ErrorKind, std::string>> failure;
        try {
            switch (rc.command) {
            case Command::bands: cmd_bands(cx); break;
            case Command::simulate_decay: cmd_simulate_decay(cx); break;
            case Command::fit_decay: cmd_fit_decay(cx); break;
            case Command::fit_spectrum: cmd_fit_spectrum(cx); break;
            case Command::calibrate: cmd_calibrate(cx); break;
            case Command::extract_beta: cmd_extract_beta(cx); break;
            case Command::reproduce_paper: cmd_reproduce_paper(cx); break;
            }
        } catch (const Error& e) {
            failure = {e.kind(), e.what()};
        }
        manifest["options"] = cx.effective;
        manifest["geometry"] = cx.geometry ? *cx.geometry : json(nullptr);
        manifest["outputs"] = rd.files();
        outcome.files = rd.files();
        if (failure) {
            manifest["status"] = "failed";
            io::write_atomic(dir / "manifest.json", io::dump(manifest));
            outcome.files.push_back("manifest.json");
            report_error(pcw::to_string(failure->first), failure->second, exit_code_for(failure->first));
            return outcome;
        }
        manifest["status"] = cx.exit_code == kExitOk ? "ok" : "checks-failed";
        io::write_atomic(dir / "manifest.json", io::dump(manifest));
        outcome.files.push_back("manifest.json");
        outcome.exit_code = cx.exit_code;
    } catch (const Error& e) {
        report_error(pcw::to_string(e.kind()), e.what(), exit_code_for(e.kind()));
    } catch (const std::exception& e) {
        report_error("internal", e.what(), kExitNumerical);
    }
    return outcome;
}

} // namespace pcw::cli
